"""Engineered shot features and the numeric design matrix.

Coordinates are StatsBomb pitch units: 120 x 80 with the attacked goal on
the line x = 120 between the posts (120, 36) and (120, 44).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, asdict
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

PITCH_LENGTH = 120.0
PITCH_WIDTH = 80.0
GOAL_CENTER = (120.0, 40.0)
POST_LOW = (120.0, 36.0)
POST_HIGH = (120.0, 44.0)
RADIUS = 1.0

POSITIONS = ("ST", "AM", "M", "D")
BODY_PARTS = ("preferred_foot", "other_foot", "head", "other")
TECHNIQUES = ("normal", "half_volley", "volley", "lob", "overhead_kick", "diving_header", "backheel")
TRIANGLE_LEVELS = tuple(range(11))  # 0..10, ten or more share the top level
RADIUS_LEVELS = tuple(range(4))  # 0..3, three or more share the top level
BOOLEAN_FEATURES = ("shot_first_time", "gk_in_shot_triangle", "shot_one_on_one", "shot_open_goal", "under_pressure")


class OutOfBounds(ValueError):
    pass


class GoalLineShot(ValueError):
    pass


class UnknownPosition(KeyError):
    pass


class ConstantColumn(ValueError):
    pass


class ColumnMismatch(ValueError):
    pass


@dataclass
class FeatureRow:
    distance_to_goal: float
    shot_angle: float
    gk_distance_to_goal: float = 0.0
    players_in_shot_triangle: int = 0
    opponents_in_radius: int = 0
    body_part: str = "preferred_foot"
    shot_first_time: bool = False
    gk_in_shot_triangle: bool = False
    shot_one_on_one: bool = False
    shot_open_goal: bool = False
    under_pressure: bool = False
    technique: str = "normal"
    general_position: str = "M"
    player: str = ""
    goal: bool = False
    statsbomb_xg: float = float("nan")
    x: float = float("nan")
    y: float = float("nan")
    match_id: int = 0
    competition_id: int = 0
    season_id: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# geometry

def _check_location(x: float, y: float):
    if not (0.0 <= x <= PITCH_LENGTH and 0.0 <= y <= PITCH_WIDTH):
        raise OutOfBounds(f"location ({x}, {y}) outside the 120x80 pitch")


def distance_to_goal(location) -> float:
    x, y = location
    _check_location(x, y)
    return math.hypot(GOAL_CENTER[0] - x, GOAL_CENTER[1] - y)


def shot_angle(location) -> float:
    """Angle in degrees at the shooter subtended by the two posts (law of cosines)."""
    x, y = location
    _check_location(x, y)
    if x >= PITCH_LENGTH:
        raise GoalLineShot(f"shot on the goal line at ({x}, {y}) has no triangle")
    a = math.hypot(POST_LOW[0] - x, POST_LOW[1] - y)
    b = math.hypot(POST_HIGH[0] - x, POST_HIGH[1] - y)
    c = POST_HIGH[1] - POST_LOW[1]
    cos_t = (a * a + b * b - c * c) / (2.0 * a * b)
    return math.degrees(math.acos(min(1.0, max(-1.0, cos_t))))


def _cross(ox, oy, ax, ay, bx, by):
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


def point_in_shot_triangle(point, shot_location) -> bool:
    """Closed-triangle membership test against (shooter, low post, high post)."""
    px, py = point
    sx, sy = shot_location
    d1 = _cross(sx, sy, POST_LOW[0], POST_LOW[1], px, py)
    d2 = _cross(POST_LOW[0], POST_LOW[1], POST_HIGH[0], POST_HIGH[1], px, py)
    d3 = _cross(POST_HIGH[0], POST_HIGH[1], sx, sy, px, py)
    has_neg = d1 < 0 or d2 < 0 or d3 < 0
    has_pos = d1 > 0 or d2 > 0 or d3 > 0
    return not (has_neg and has_pos)


@dataclass
class FreezeFrameFeatures:
    gk_distance_to_goal: float
    gk_in_shot_triangle: bool
    players_in_shot_triangle: int
    opponents_in_radius: int
    has_keeper: bool = True


def freeze_frame_features(shot) -> FreezeFrameFeatures:
    """Keeper position, triangle occupancy and close-opponent count for one shot.

    Without an opposing keeper in the frame the keeper distance is 0 and the
    keeper is treated as outside the triangle.
    """
    loc = shot.location
    keeper = None
    in_triangle = 0
    near = 0
    for p in shot.freeze_frame:
        if point_in_shot_triangle(p.location, loc):
            in_triangle += 1
        if not p.teammate:
            if p.is_keeper and keeper is None:
                keeper = p
            if math.hypot(p.location[0] - loc[0], p.location[1] - loc[1]) <= RADIUS:
                near += 1
    if keeper is None:
        return FreezeFrameFeatures(0.0, False, in_triangle, near, has_keeper=False)
    return FreezeFrameFeatures(
        gk_distance_to_goal=distance_to_goal(keeper.location),
        gk_in_shot_triangle=point_in_shot_triangle(keeper.location, loc),
        players_in_shot_triangle=in_triangle,
        opponents_in_radius=near,
    )


_POSITION_MAP = {
    "Goalkeeper": "D",
    "Right Back": "D",
    "Right Center Back": "D",
    "Center Back": "D",
    "Left Center Back": "D",
    "Left Back": "D",
    "Right Wing Back": "D",
    "Left Wing Back": "D",
    "Right Defensive Midfield": "M",
    "Center Defensive Midfield": "M",
    "Left Defensive Midfield": "M",
    "Right Midfield": "M",
    "Right Center Midfield": "M",
    "Center Midfield": "M",
    "Left Center Midfield": "M",
    "Left Midfield": "M",
    "Right Wing": "AM",
    "Left Wing": "AM",
    "Right Attacking Midfield": "AM",
    "Center Attacking Midfield": "AM",
    "Left Attacking Midfield": "AM",
    "Right Center Forward": "ST",
    "Striker": "ST",
    "Left Center Forward": "ST",
    "Center Forward": "ST",
    "Secondary Striker": "ST",
}


def map_general_position(raw_position: str) -> str:
    try:
        return _POSITION_MAP[raw_position]
    except KeyError:
        raise UnknownPosition(raw_position) from None


def resolve_body_part(body_part_raw: str, preferred_foot: str) -> str:
    if body_part_raw in ("left_foot", "right_foot"):
        side = body_part_raw.split("_")[0]
        return "preferred_foot" if side == preferred_foot else "other_foot"
    if body_part_raw == "head":
        return "head"
    return "other"


def engineer(shot, preferred_foot: str | None = None) -> FeatureRow:
    """Turn a RawShot into a FeatureRow."""
    if preferred_foot is None:
        preferred_foot = getattr(shot, "preferred_foot", "right")
    ff = freeze_frame_features(shot)
    return FeatureRow(
        distance_to_goal=distance_to_goal(shot.location),
        shot_angle=shot_angle(shot.location),
        gk_distance_to_goal=ff.gk_distance_to_goal,
        players_in_shot_triangle=ff.players_in_shot_triangle,
        opponents_in_radius=ff.opponents_in_radius,
        body_part=resolve_body_part(shot.body_part_raw, preferred_foot),
        shot_first_time=shot.first_time,
        gk_in_shot_triangle=ff.gk_in_shot_triangle,
        shot_one_on_one=shot.one_on_one,
        shot_open_goal=shot.open_goal,
        under_pressure=shot.under_pressure,
        technique=shot.technique,
        general_position=map_general_position(shot.shooter_position_raw),
        player=shot.shooter_name,
        goal=shot.outcome_goal,
        statsbomb_xg=shot.statsbomb_xg,
        x=shot.location[0],
        y=shot.location[1],
        match_id=shot.match_id,
        competition_id=shot.competition_id,
        season_id=shot.season_id,
    )


# ---------------------------------------------------------------------------
# design matrix

CONTINUOUS = ("distance_to_goal", "shot_angle", "distance_angle_interaction", "gk_distance_to_goal")


def _level_name(feature: str, level) -> str:
    return f"{feature}[{level}]"


# canonical block order; the feature-count sweep adds blocks in this order
BLOCK_ORDER = (
    "distance_to_goal",
    "shot_angle",
    "distance_angle_interaction",
    "gk_distance_to_goal",
    "players_in_shot_triangle",
    "opponents_in_radius",
    "body_part",
    "shot_first_time",
    "gk_in_shot_triangle",
    "shot_one_on_one",
    "shot_open_goal",
    "technique",
    "under_pressure",
)

PREDICTOR_SETS = {
    "baseline": BLOCK_ORDER[:3],
    "extended": BLOCK_ORDER,
}

CATEGORICAL_LEVELS = {
    "players_in_shot_triangle": TRIANGLE_LEVELS,
    "opponents_in_radius": RADIUS_LEVELS,
    "body_part": BODY_PARTS,
    "technique": TECHNIQUES,
}


def block_columns(block: str) -> list[str]:
    if block in CATEGORICAL_LEVELS:
        return [_level_name(block, lv) for lv in CATEGORICAL_LEVELS[block][1:]]
    return [block]


def _raw_block(rows: Sequence[FeatureRow], block: str) -> np.ndarray:
    n = len(rows)
    if block == "distance_angle_interaction":
        return np.array([r.distance_to_goal * r.shot_angle for r in rows], dtype=float)[:, None]
    if block in ("distance_to_goal", "shot_angle", "gk_distance_to_goal"):
        return np.array([getattr(r, block) for r in rows], dtype=float)[:, None]
    if block in BOOLEAN_FEATURES:
        return np.array([bool(getattr(r, block)) for r in rows], dtype=float)[:, None]
    levels = CATEGORICAL_LEVELS[block]
    if block == "players_in_shot_triangle":
        codes = np.array([min(int(r.players_in_shot_triangle), levels[-1]) for r in rows])
    elif block == "opponents_in_radius":
        codes = np.array([min(int(r.opponents_in_radius), levels[-1]) for r in rows])
    else:
        lookup = {lv: i for i, lv in enumerate(levels)}
        try:
            codes = np.array([lookup[getattr(r, block)] for r in rows], dtype=int)
        except KeyError as e:
            raise ValueError(f"unknown {block} level {e.args[0]!r}") from None
    out = np.zeros((n, len(levels) - 1))
    hit = codes > 0
    out[np.flatnonzero(hit), codes[hit] - 1] = 1.0
    return out


def raw_design(rows: Sequence[FeatureRow], blocks: Iterable[str]) -> tuple[np.ndarray, list[str]]:
    """Unstandardised columns for ``blocks`` in canonical order."""
    blocks = [b for b in BLOCK_ORDER if b in set(blocks)]
    mats, names = [], []
    for b in blocks:
        mats.append(_raw_block(rows, b))
        names.extend(block_columns(b))
    raw = np.hstack(mats) if mats else np.zeros((len(rows), 0))
    return raw, names


@dataclass
class DesignLayout:
    """Column names, standardisation constants and grouping levels of a fit."""

    columns: list[str]
    center: np.ndarray
    scale: np.ndarray
    group_levels: list[str] = field(default_factory=list)
    grouping: str = "none"

    def to_dict(self) -> dict:
        return {
            "columns": list(self.columns),
            "center": [float(v) for v in self.center],
            "scale": [float(v) for v in self.scale],
            "group_levels": list(self.group_levels),
            "grouping": self.grouping,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DesignLayout":
        return cls(
            columns=list(d["columns"]),
            center=np.asarray(d["center"], dtype=float),
            scale=np.asarray(d["scale"], dtype=float),
            group_levels=list(d.get("group_levels", [])),
            grouping=d.get("grouping", "none"),
        )


@dataclass
class DesignMatrix:
    """Standardised predictors (no intercept column) plus optional group index."""

    X: np.ndarray
    layout: DesignLayout
    group_index: np.ndarray | None = None

    @property
    def columns(self) -> list[str]:
        return self.layout.columns

    @property
    def group_levels(self) -> list[str]:
        return self.layout.group_levels

    def __len__(self):
        return self.X.shape[0]

    def raw(self) -> np.ndarray:
        """Undo the standardisation."""
        return self.X * self.layout.scale + self.layout.center

    def subset(self, idx) -> "DesignMatrix":
        gi = None if self.group_index is None else self.group_index[idx]
        return DesignMatrix(self.X[idx], self.layout, gi)


def group_labels(rows: Sequence[FeatureRow], grouping: str, players: Sequence[str] = ()) -> list[str]:
    if grouping == "position":
        return [r.general_position for r in rows]
    if grouping == "player":
        chosen = set(players)
        return [r.player if r.player in chosen else "other" for r in rows]
    raise ValueError(f"unknown grouping {grouping!r}")


def default_group_levels(grouping: str, players: Sequence[str] = ()) -> list[str]:
    if grouping == "position":
        return list(POSITIONS)
    if grouping == "player":
        return list(players) + ["other"]
    return []


def build_design_matrix(
    rows: Sequence[FeatureRow],
    predictors: str | Iterable[str] = "baseline",
    grouping: str = "none",
    players: Sequence[str] = (),
    layout: DesignLayout | None = None,
    drop_constant: bool = False,
) -> DesignMatrix:
    """Assemble the standardised design matrix for a predictor set.

    ``predictors`` is ``"baseline"``, ``"extended"`` or an explicit list of
    blocks from :data:`BLOCK_ORDER`. Continuous columns (the interaction is
    formed on raw values first) are centred and scaled; one-hot and boolean
    columns are left as 0/1. Passing a fitted ``layout`` reuses its columns
    and constants so new data lines up with an existing fit.
    """
    if layout is None:
        blocks = PREDICTOR_SETS[predictors] if isinstance(predictors, str) else tuple(predictors)
        unknown = set(blocks) - set(BLOCK_ORDER)
        if unknown:
            raise ValueError(f"unknown predictor blocks {sorted(unknown)}")
        blocks = [b for b in BLOCK_ORDER if b in blocks]
    else:
        present = {c.split("[")[0] for c in layout.columns}
        blocks = [b for b in BLOCK_ORDER if b in present]

    raw, names = raw_design(rows, blocks)

    if layout is None:
        sd = raw.std(axis=0)
        const = np.flatnonzero(sd == 0)
        if const.size:
            bad = [names[i] for i in const]
            if not drop_constant:
                raise ConstantColumn(f"zero-variance columns: {bad}")
            log.warning("dropping zero-variance columns %s", bad)
            keep = np.setdiff1d(np.arange(len(names)), const)
            raw, names, sd = raw[:, keep], [names[i] for i in keep], sd[keep]
        center = np.zeros(len(names))
        scale = np.ones(len(names))
        for i, name in enumerate(names):
            if name in CONTINUOUS:
                center[i] = raw[:, i].mean()
                scale[i] = sd[i]
        levels = default_group_levels(grouping, players) if grouping != "none" else []
        layout = DesignLayout(names, center, scale, levels, grouping)
    else:
        lookup = {n: i for i, n in enumerate(names)}
        missing = [c for c in layout.columns if c not in lookup]
        if missing:
            raise ColumnMismatch(f"columns {missing} cannot be built")
        raw = raw[:, [lookup[c] for c in layout.columns]]
        grouping = layout.grouping
        players = [lv for lv in layout.group_levels if lv != "other"]

    X = (raw - layout.center) / layout.scale
    gi = None
    if layout.grouping != "none":
        labels = group_labels(rows, layout.grouping, players)
        index = {lv: k for k, lv in enumerate(layout.group_levels)}
        # levels unseen at fit time map to -1 (zero offset)
        gi = np.array([index.get(lb, -1) for lb in labels], dtype=int)
    return DesignMatrix(X, layout, gi)


def outcomes(rows: Sequence[FeatureRow]) -> np.ndarray:
    return np.array([1.0 if r.goal else 0.0 for r in rows])
