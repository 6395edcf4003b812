"""Canonical CSV files for raw shots and engineered feature rows.

Booleans are written as 0/1, enums as text labels and floats with six
decimals. The raw-shot file stores each freeze frame as a JSON list in a
single column.
"""

from __future__ import annotations

import csv
import json
from dataclasses import fields
from pathlib import Path
from typing import Sequence

from .features import FeatureRow
from .ingest import FreezeFramePlayer, RawShot

FEATURE_COLUMNS = [f.name for f in fields(FeatureRow)]

RAW_COLUMNS = [
    "match_id", "event_index", "competition_id", "season_id", "shooter_name",
    "shooter_position_raw", "preferred_foot", "x", "y", "body_part_raw", "technique",
    "first_time", "one_on_one", "open_goal", "under_pressure", "play_pattern",
    "outcome_goal", "statsbomb_xg", "freeze_frame",
]

_INT = {"players_in_shot_triangle", "opponents_in_radius", "match_id", "competition_id", "season_id", "event_index"}
_BOOL = {
    "shot_first_time", "gk_in_shot_triangle", "shot_one_on_one", "shot_open_goal",
    "under_pressure", "goal", "first_time", "one_on_one", "open_goal", "outcome_goal",
}


def fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def _parse(name: str, text: str):
    if name in _BOOL:
        return text.strip() in ("1", "True", "true")
    if name in _INT:
        return int(float(text))
    return text


def write_csv(path, header: Sequence[str], rows) -> None:
    """Write rows (sequences aligned with ``header``) as UTF-8 CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_features(path, rows: Sequence[FeatureRow]) -> None:
    write_csv(path, FEATURE_COLUMNS, ([getattr(r, c) for c in FEATURE_COLUMNS] for r in rows))


def read_features(path) -> list[FeatureRow]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"distance_to_goal", "shot_angle", "goal"} - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        float_cols = {f.name for f in fields(FeatureRow) if f.type == "float"}
        for rec in reader:
            kw = {}
            for k, v in rec.items():
                if k not in FEATURE_COLUMNS or v is None or v == "":
                    continue
                kw[k] = float(v) if k in float_cols else _parse(k, v)
            out.append(FeatureRow(**kw))
    return out


def write_raw_shots(path, shots: Sequence[RawShot]) -> None:
    def row(s: RawShot):
        frame = [
            [round(p.location[0], 6), round(p.location[1], 6), int(p.teammate), int(p.is_keeper), p.player_name, p.position_name]
            for p in s.freeze_frame
        ]
        return [
            s.match_id, s.event_index, s.competition_id, s.season_id, s.shooter_name,
            s.shooter_position_raw, s.preferred_foot, float(s.location[0]), float(s.location[1]),
            s.body_part_raw, s.technique, s.first_time, s.one_on_one, s.open_goal,
            s.under_pressure, s.play_pattern, s.outcome_goal, float(s.statsbomb_xg),
            json.dumps(frame, ensure_ascii=False),
        ]

    write_csv(path, RAW_COLUMNS, (row(s) for s in shots))


def read_raw_shots(path) -> list[RawShot]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            frame = [
                FreezeFramePlayer((float(x), float(y)), bool(tm), bool(gk), name, pos)
                for x, y, tm, gk, name, pos in json.loads(rec["freeze_frame"])
            ]
            out.append(
                RawShot(
                    match_id=int(rec["match_id"]),
                    event_index=int(rec["event_index"]),
                    competition_id=int(rec["competition_id"]),
                    season_id=int(rec["season_id"]),
                    shooter_name=rec["shooter_name"],
                    shooter_position_raw=rec["shooter_position_raw"],
                    preferred_foot=rec["preferred_foot"],
                    location=(float(rec["x"]), float(rec["y"])),
                    body_part_raw=rec["body_part_raw"],
                    technique=rec["technique"],
                    first_time=_parse("first_time", rec["first_time"]),
                    one_on_one=_parse("one_on_one", rec["one_on_one"]),
                    open_goal=_parse("open_goal", rec["open_goal"]),
                    under_pressure=_parse("under_pressure", rec["under_pressure"]),
                    play_pattern=rec["play_pattern"],
                    outcome_goal=_parse("outcome_goal", rec["outcome_goal"]),
                    statsbomb_xg=float(rec["statsbomb_xg"]),
                    freeze_frame=frame,
                )
            )
    return out
