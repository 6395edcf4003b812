import json
from pathlib import Path

import numpy as np
import pytest

from bayesxg.synth import REALISTIC_BETA, TruthConfig, generate_shots


def _event(index, etype, player, position, **extra):
    ev = {
        "id": f"ev{index}",
        "index": index,
        "type": {"name": etype},
        "player": {"name": player},
        "position": {"name": position},
        "play_pattern": {"name": extra.pop("pattern", "Regular Play")},
    }
    ev.update(extra)
    return ev


def pass_event(index, player, position, foot="Right Foot"):
    return _event(index, "Pass", player, position, location=[60.0, 40.0], **{"pass": {"body_part": {"name": foot}}})


def shot_event(index, player, position, location, frame, goal=False, pattern="Regular Play", shot_type="Open Play", xg=0.1, body="Right Foot", **flags):
    shot = {
        "type": {"name": shot_type},
        "body_part": {"name": body},
        "technique": {"name": "Normal"},
        "outcome": {"name": "Goal" if goal else "Saved"},
        "statsbomb_xg": xg,
        "freeze_frame": frame,
    }
    pressure = flags.pop("under_pressure", False)
    shot.update(flags)
    ev = _event(index, "Shot", player, position, location=list(location), shot=shot, pattern=pattern)
    if pressure:
        ev["under_pressure"] = True
    return ev


def keeper(x=119.0, y=40.0):
    return {"location": [x, y], "teammate": False, "position": {"name": "Goalkeeper"}, "player": {"name": "Keeper"}}


def outfield(x, y, teammate=False):
    return {"location": [x, y], "teammate": teammate, "position": {"name": "Center Back"}, "player": {"name": "Someone"}}


def write_snapshot(root: Path, competitions, matches, events) -> Path:
    """``matches`` maps (competition_id, season_id) to match ids; ``events`` maps match id to events."""
    root.mkdir(parents=True, exist_ok=True)
    (root / "competitions.json").write_text(json.dumps(competitions), encoding="utf-8")
    for (cid, sid), mids in matches.items():
        d = root / "matches" / str(cid)
        d.mkdir(parents=True, exist_ok=True)
        (d / f"{sid}.json").write_text(json.dumps([{"match_id": m} for m in mids]), encoding="utf-8")
    (root / "events").mkdir(exist_ok=True)
    for mid, evs in events.items():
        (root / "events" / f"{mid}.json").write_text(json.dumps(evs), encoding="utf-8")
    return root


@pytest.fixture
def snapshot(tmp_path):
    """Two men's matches and one women's match with a mix of shot kinds."""
    comps = [
        {"competition_id": 2, "season_id": 44, "competition_gender": "male", "competition_name": "Premier League", "season_name": "2003/2004"},
        {"competition_id": 37, "season_id": 90, "competition_gender": "female", "competition_name": "FA WSL", "season_name": "2020/2021"},
    ]
    frame = [keeper(), outfield(115.0, 40.0), outfield(100.0, 40.0, teammate=True)]
    m1 = [
        pass_event(1, "Thierry Henry", "Center Forward", "Right Foot"),
        pass_event(2, "Thierry Henry", "Center Forward", "Right Foot"),
        pass_event(3, "Robert Pirès", "Left Wing", "Left Foot"),
        shot_event(5, "Thierry Henry", "Center Forward", (108.0, 40.0), frame, goal=True, xg=0.3),
        shot_event(4, "Robert Pirès", "Left Wing", (110.0, 30.0), frame, body="Left Foot", pattern="From Counter"),
        shot_event(6, "Thierry Henry", "Center Forward", (108.0, 40.0), frame, shot_type="Penalty", xg=0.76),
        shot_event(7, "Thierry Henry", "Center Forward", (100.0, 40.0), frame, pattern="From Corner"),
        shot_event(8, "Robert Pirès", "Left Wing", (105.0, 45.0), []),
        shot_event(9, "Robert Pirès", "Left Wing", (120.0, 41.0), frame),
    ]
    m2 = [
        shot_event(1, "Thierry Henry", "Left Wing", (95.0, 50.0), frame, pattern="Other", under_pressure=True),
        pass_event(2, "Robert Pirès", "Left Wing", "Left Foot"),
    ]
    m3 = [shot_event(1, "Someone Else", "Striker", (108.0, 40.0), frame)]
    return write_snapshot(tmp_path / "open-data", comps, {(2, 44): [11, 10], (37, 90): [30]}, {10: m1, 11: m2, 30: m3})


@pytest.fixture(scope="session")
def realistic_rows():
    rows, p = generate_shots(TruthConfig(beta=REALISTIC_BETA, n=4000, realistic=True, seed=11))
    return rows, p


def rel_err(a, b, floor=1e-8):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    def record(number, name, ok, detail, elapsed=None, limit=None, status=None):
        if status is None:
            timely = limit is None or elapsed is None or elapsed < limit
            status = "PASS" if ok and timely else "FAIL"
        timing = "" if elapsed is None else f" [{elapsed:.1f}s" + ("" if limit is None else f" / {limit:.0f}s") + "]"
        ACCEPTANCE_LINES.append(f"criterion {number:>2} {status:<7} {name}: {detail}{timing}")
        return status

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
