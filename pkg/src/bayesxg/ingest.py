"""Shot extraction from a StatsBomb open-data directory snapshot.

Expected layout::

    <data_dir>/competitions.json
    <data_dir>/matches/<competition_id>/<season_id>.json
    <data_dir>/events/<match_id>.json
"""

from __future__ import annotations

import json
import logging
import warnings
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

from .features import PITCH_LENGTH, PITCH_WIDTH, OutOfBounds

log = logging.getLogger(__name__)

OPEN_PLAY_PATTERNS = frozenset({"Regular Play", "From Counter", "Other"})

_BODY_PARTS = {"Left Foot": "left_foot", "Right Foot": "right_foot", "Head": "head"}
_TECHNIQUES = {
    "Normal": "normal",
    "Half Volley": "half_volley",
    "Volley": "volley",
    "Lob": "lob",
    "Overhead Kick": "overhead_kick",
    "Diving Header": "diving_header",
    "Backheel": "backheel",
}


class MissingFile(FileNotFoundError):
    pass


class ParseError(ValueError):
    pass


class UnknownPlayer(KeyError):
    pass


class TieWarning(UserWarning):
    """A modal position or preferred foot was decided by the tie-break rule."""


@dataclass(frozen=True)
class CompetitionRef:
    competition_id: int
    season_id: int
    gender: str
    name: str = ""

    def __post_init__(self):
        if self.competition_id < 0 or self.season_id < 0:
            raise ValueError("competition and season ids must be non-negative")
        if self.gender not in ("male", "female"):
            raise ValueError(f"gender must be male or female, got {self.gender!r}")


@dataclass
class FreezeFramePlayer:
    location: tuple[float, float]
    teammate: bool
    is_keeper: bool = False
    player_name: str = ""
    position_name: str = ""


@dataclass
class RawShot:
    match_id: int
    shooter_name: str
    shooter_position_raw: str
    location: tuple[float, float]
    body_part_raw: str = "right_foot"
    technique: str = "normal"
    first_time: bool = False
    one_on_one: bool = False
    open_goal: bool = False
    under_pressure: bool = False
    play_pattern: str = "Regular Play"
    outcome_goal: bool = False
    statsbomb_xg: float = 0.0
    freeze_frame: list[FreezeFramePlayer] = field(default_factory=list)
    event_index: int = 0
    competition_id: int = 0
    season_id: int = 0
    preferred_foot: str = "right"


def _read_json(path: Path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: {e}") from e


def load_competitions(data_dir) -> list[CompetitionRef]:
    path = Path(data_dir) / "competitions.json"
    if not path.is_file():
        raise MissingFile(str(path))
    data = _read_json(path)
    if not isinstance(data, list):
        raise ParseError(f"{path}: expected a JSON array")
    out = []
    for entry in data:
        try:
            out.append(
                CompetitionRef(
                    competition_id=int(entry["competition_id"]),
                    season_id=int(entry["season_id"]),
                    gender=entry.get("competition_gender", "male"),
                    name=f"{entry.get('competition_name', '')} {entry.get('season_name', '')}".strip(),
                )
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"{path}: bad competition entry {entry!r}") from e
    return out


def match_ids(data_dir, comp: CompetitionRef) -> list[int]:
    path = Path(data_dir) / "matches" / str(comp.competition_id) / f"{comp.season_id}.json"
    if not path.is_file():
        log.warning("no matches file for %s/%s", comp.competition_id, comp.season_id)
        return []
    return sorted(int(m["match_id"]) for m in _read_json(path))


def _point(loc, what) -> tuple[float, float]:
    x, y = float(loc[0]), float(loc[1])
    if not (0.0 <= x <= PITCH_LENGTH and 0.0 <= y <= PITCH_WIDTH):
        raise OutOfBounds(f"{what} location ({x}, {y}) outside the 120x80 frame")
    return x, y


def _parse_shot(ev: dict, match_id: int) -> RawShot | None:
    shot = ev.get("shot", {})
    if shot.get("type", {}).get("name", "Open Play") != "Open Play":
        return None
    if ev.get("play_pattern", {}).get("name") not in OPEN_PLAY_PATTERNS:
        return None
    loc = _point(ev["location"][:2], "shot")
    if loc[0] >= PITCH_LENGTH:
        return None
    frame = shot.get("freeze_frame")
    if not frame:
        return None
    players = [
        FreezeFramePlayer(
            location=_point(p["location"][:2], "freeze-frame"),
            teammate=bool(p.get("teammate", False)),
            is_keeper=p.get("position", {}).get("name") == "Goalkeeper",
            player_name=p.get("player", {}).get("name", ""),
            position_name=p.get("position", {}).get("name", ""),
        )
        for p in frame
    ]
    return RawShot(
        match_id=match_id,
        shooter_name=ev.get("player", {}).get("name", ""),
        shooter_position_raw=ev.get("position", {}).get("name", ""),
        location=loc,
        body_part_raw=_BODY_PARTS.get(shot.get("body_part", {}).get("name"), "other"),
        technique=_TECHNIQUES.get(shot.get("technique", {}).get("name"), "normal"),
        first_time=bool(shot.get("first_time", False)),
        one_on_one=bool(shot.get("one_on_one", False)),
        open_goal=bool(shot.get("open_goal", False)),
        under_pressure=bool(ev.get("under_pressure", False)),
        play_pattern=ev["play_pattern"]["name"],
        outcome_goal=shot.get("outcome", {}).get("name") == "Goal",
        statsbomb_xg=float(shot.get("statsbomb_xg", 0.0)),
        freeze_frame=players,
        event_index=int(ev.get("index", 0)),
    )


@dataclass
class _MatchScan:
    shots: list
    skipped_no_frame: int
    positions: dict
    feet: dict


def _scan_match(path: Path, match_id: int) -> _MatchScan:
    events = _read_json(path)
    if not isinstance(events, list):
        raise ParseError(f"{path}: expected a JSON array of events")
    shots, skipped = [], 0
    positions: dict[str, Counter] = {}
    feet: dict[str, Counter] = {}
    for ev in events:
        name = ev.get("player", {}).get("name")
        if name is None:
            continue
        pos = ev.get("position", {}).get("name")
        if pos:
            positions.setdefault(name, Counter())[pos] += 1
        etype = ev.get("type", {}).get("name")
        if etype == "Pass":
            part = ev.get("pass", {}).get("body_part", {}).get("name")
            if part in ("Left Foot", "Right Foot"):
                feet.setdefault(name, Counter())[part.split()[0].lower()] += 1
        elif etype == "Shot":
            try:
                s = _parse_shot(ev, match_id)
            except (KeyError, TypeError, IndexError) as e:
                raise ParseError(f"{path}: malformed shot event {ev.get('id')}") from e
            if s is None:
                if (
                    ev.get("shot", {}).get("type", {}).get("name", "Open Play") == "Open Play"
                    and ev.get("play_pattern", {}).get("name") in OPEN_PLAY_PATTERNS
                    and not ev.get("shot", {}).get("freeze_frame")
                ):
                    skipped += 1
                continue
            shots.append(s)
    return _MatchScan(shots, skipped, positions, feet)


def _match_jobs(data_dir: Path, competitions: Iterable[CompetitionRef]):
    jobs = []
    for comp in competitions:
        for mid in match_ids(data_dir, comp):
            path = data_dir / "events" / f"{mid}.json"
            if path.is_file():
                jobs.append((path, mid, comp))
            else:
                log.warning("missing events file for match %s", mid)
    return jobs


def _scan(data_dir, competitions: Sequence[CompetitionRef], workers: int = 1):
    data_dir = Path(data_dir)
    jobs = _match_jobs(data_dir, competitions)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as ex:
            scans = list(ex.map(_scan_match, [j[0] for j in jobs], [j[1] for j in jobs]))
    else:
        scans = [_scan_match(p, mid) for p, mid, _ in jobs]

    shots, skipped = [], 0
    positions: dict[str, Counter] = {}
    feet: dict[str, Counter] = {}
    for (_, _, comp), sc in zip(jobs, scans):
        for s in sc.shots:
            s.competition_id, s.season_id = comp.competition_id, comp.season_id
        shots.extend(sc.shots)
        skipped += sc.skipped_no_frame
        for name, c in sc.positions.items():
            positions.setdefault(name, Counter()).update(c)
        for name, c in sc.feet.items():
            feet.setdefault(name, Counter()).update(c)
    if skipped:
        log.info("skipped %d open-play shots without a freeze frame", skipped)
    shots.sort(key=lambda s: (s.match_id, s.event_index))
    return shots, positions, feet


def extract_shots(data_dir, competitions: Sequence[CompetitionRef], workers: int = 1) -> list[RawShot]:
    """All open-play shots with a freeze frame, ordered by (match_id, event index)."""
    bad = [c for c in competitions if c.gender != "male"]
    if bad:
        raise ValueError(f"only men's competitions are accepted, got {bad}")
    return _scan(data_dir, competitions, workers)[0]


@lru_cache(maxsize=8)
def _profiles(data_dir: str):
    comps = [c for c in load_competitions(data_dir) if c.gender == "male"]
    _, positions, feet = _scan(data_dir, comps)
    return positions, feet


def _modal(counts: Counter, name: str) -> str:
    best = max(counts.values())
    top = sorted(k for k, v in counts.items() if v == best)
    if len(top) > 1:
        warnings.warn(f"{name}: position tie {top}, using {top[0]!r}", TieWarning, stacklevel=3)
    return top[0]


def _foot(counts: Counter | None, name: str) -> str:
    left = counts["left"] if counts else 0
    right = counts["right"] if counts else 0
    if left > right:
        return "left"
    if right > left:
        return "right"
    warnings.warn(f"{name}: {left} left vs {right} right passes, defaulting to right", TieWarning, stacklevel=3)
    return "right"


def modal_position(data_dir, player_name: str) -> str:
    positions, _ = _profiles(str(Path(data_dir).resolve()))
    if player_name not in positions:
        raise UnknownPlayer(player_name)
    return _modal(positions[player_name], player_name)


def infer_preferred_foot(data_dir, player_name: str) -> str:
    _, feet = _profiles(str(Path(data_dir).resolve()))
    return _foot(feet.get(player_name), player_name)


def ingest(data_dir, competition_ids: Sequence[int] | None = None, workers: int = 1) -> list[RawShot]:
    """Men's open-play shots with modal positions and preferred feet filled in.

    Player profiles (modal position, pass-foot counts) are gathered from all
    men's competitions in the snapshot, even when ``competition_ids``
    restricts which shots are returned.
    """
    comps = [c for c in load_competitions(data_dir) if c.gender == "male"]
    all_positions, all_feet = _profiles(str(Path(data_dir).resolve()))
    if competition_ids is not None:
        wanted = set(competition_ids)
        comps = [c for c in comps if c.competition_id in wanted]
    shots = extract_shots(data_dir, comps, workers)
    modal_cache: dict[str, str] = {}
    foot_cache: dict[str, str] = {}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TieWarning)
        for s in shots:
            name = s.shooter_name
            if name not in modal_cache:
                modal_cache[name] = _modal(all_positions[name], name) if name in all_positions else s.shooter_position_raw
                foot_cache[name] = _foot(all_feet.get(name), name)
            s.shooter_position_raw = modal_cache[name]
            s.preferred_foot = foot_cache[name]
    if caught:
        log.info("%d players resolved by tie-break", len(caught))
    return shots
