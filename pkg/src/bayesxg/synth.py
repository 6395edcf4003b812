"""Synthetic shots with known coefficients and group offsets.

Shot locations are drawn uniformly over a box in front of goal, and
distance and angle are derived from them; every other feature is drawn
independently. Outcomes follow the logistic model with the true
coefficients applied to the *unstandardised* design columns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.special import expit

from .features import (
    BLOCK_ORDER,
    BODY_PARTS,
    POSITIONS,
    RADIUS_LEVELS,
    TECHNIQUES,
    TRIANGLE_LEVELS,
    FeatureRow,
    block_columns,
    distance_to_goal,
    raw_design,
    shot_angle,
)

# level frequencies of the full men's open-play data set
SHOT_LEVEL_FREQUENCIES = {
    "players_in_shot_triangle": [1786, 30262, 19481, 6802, 2918, 1217, 513, 211, 77, 29, 13],
    "opponents_in_radius": [55536, 7030, 662, 81],
    "body_part": [30738, 11733, 10647, 191],
    "technique": [47854, 9371, 4483, 688, 385, 284, 244],
    "shot_first_time": 20946 / 63309,
    "gk_in_shot_triangle": 60570 / 63309,
    "shot_one_on_one": 3546 / 63309,
    "shot_open_goal": 736 / 63309,
    "under_pressure": 16149 / 63309,
    "general_position": [17073, 20065, 15858, 10313],
}

_LEVELS = {
    "players_in_shot_triangle": TRIANGLE_LEVELS,
    "opponents_in_radius": RADIUS_LEVELS,
    "body_part": BODY_PARTS,
    "technique": TECHNIQUES,
}

# plausible raw-scale effects, giving a goal rate near 10% under realistic features
REALISTIC_BETA = {
    "intercept": 0.45,
    "distance_to_goal": -0.11,
    "shot_angle": 0.012,
    "distance_angle_interaction": 0.0002,
    "gk_distance_to_goal": 0.12,
    **{f"players_in_shot_triangle[{v}]": -0.45 * v for v in range(1, 11)},
    **{f"opponents_in_radius[{v}]": -0.3 * v for v in range(1, 4)},
    "body_part[other_foot]": -0.25,
    "body_part[head]": -0.8,
    "body_part[other]": -0.5,
    "shot_first_time": 0.15,
    "gk_in_shot_triangle": -0.6,
    "shot_one_on_one": 0.6,
    "shot_open_goal": 1.8,
    "technique[half_volley]": -0.1,
    "technique[volley]": -0.3,
    "technique[lob]": 0.4,
    "technique[overhead_kick]": -0.6,
    "technique[diving_header]": 0.3,
    "technique[backheel]": -0.2,
    "under_pressure": -0.15,
}


@dataclass
class TruthConfig:
    """Ground truth for a synthetic data set.

    ``beta`` maps ``"intercept"`` and design-column names to raw-scale
    coefficients; columns not named have a zero effect. ``group_offsets``
    maps group labels to logit offsets; with ``grouping="position"`` the
    labels must be position codes, with ``"player"`` they are player names.
    ``feature_distributions`` overrides the sampler for any feature with a
    callable ``(rng, n) -> array``.
    """

    beta: Mapping[str, float] = field(default_factory=lambda: {"intercept": 0.0})
    group_offsets: Mapping[str, float] = field(default_factory=dict)
    grouping: str = "position"
    n: int = 1000
    seed: int = 0
    realistic: bool = False
    x_range: tuple = (88.0, 119.5)
    y_range: tuple = (14.0, 66.0)
    gk_distance_range: tuple = (0.0, 8.0)
    feature_distributions: Mapping[str, Callable] = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not (0 <= self.x_range[0] < self.x_range[1] < 120 and 0 <= self.y_range[0] < self.y_range[1] <= 80):
            raise ValueError("location ranges must lie inside the pitch, in front of the goal line")
        known = {"intercept", *(c for b in BLOCK_ORDER for c in block_columns(b))}
        unknown = set(self.beta) - known
        if unknown:
            raise ValueError(f"unknown coefficient names {sorted(unknown)}")
        if self.grouping not in ("position", "player"):
            raise ValueError("grouping must be position or player")


def _categorical(rng, n, levels, weights=None):
    if weights is None:
        idx = rng.integers(0, len(levels), n)
    else:
        w = np.asarray(weights, dtype=float)
        idx = rng.choice(len(levels), size=n, p=w / w.sum())
    return [levels[i] for i in idx]


def _bernoulli(rng, n, rate):
    return rng.random(n) < rate


def generate_shots(config: TruthConfig) -> tuple[list[FeatureRow], np.ndarray]:
    """Draw ``config.n`` shots; returns the rows and their true goal probabilities.

    The true probability is also stored in each row's ``statsbomb_xg`` so the
    reference-column machinery can run unchanged.
    """
    rng = np.random.default_rng(config.seed)
    n = config.n
    custom = config.feature_distributions
    freq = SHOT_LEVEL_FREQUENCIES if config.realistic else {}

    def draw(name, default):
        if name in custom:
            return list(custom[name](rng, n))
        return default()

    xs = draw("x", lambda: rng.uniform(*config.x_range, n))
    ys = draw("y", lambda: rng.uniform(*config.y_range, n))
    gk = draw("gk_distance_to_goal", lambda: rng.uniform(*config.gk_distance_range, n))
    cats = {
        name: draw(name, lambda name=name: _categorical(rng, n, levels, freq.get(name)))
        for name, levels in _LEVELS.items()
    }
    flags = {
        name: draw(name, lambda name=name: _bernoulli(rng, n, freq.get(name, 0.5)))
        for name in ("shot_first_time", "gk_in_shot_triangle", "shot_one_on_one", "shot_open_goal", "under_pressure")
    }

    if config.group_offsets:
        labels = list(config.group_offsets)
    else:
        labels = list(POSITIONS) if config.grouping == "position" else ["other"]
    if config.grouping == "position" and config.realistic and set(labels) == set(POSITIONS):
        weights = [SHOT_LEVEL_FREQUENCIES["general_position"][POSITIONS.index(lb)] for lb in labels]
    else:
        weights = None
    groups = draw("group", lambda: _categorical(rng, n, labels, weights))

    rows = []
    for i in range(n):
        loc = (float(xs[i]), float(ys[i]))
        g = groups[i]
        rows.append(
            FeatureRow(
                distance_to_goal=distance_to_goal(loc),
                shot_angle=shot_angle(loc),
                gk_distance_to_goal=float(gk[i]),
                players_in_shot_triangle=int(cats["players_in_shot_triangle"][i]),
                opponents_in_radius=int(cats["opponents_in_radius"][i]),
                body_part=cats["body_part"][i],
                technique=cats["technique"][i],
                shot_first_time=bool(flags["shot_first_time"][i]),
                gk_in_shot_triangle=bool(flags["gk_in_shot_triangle"][i]),
                shot_one_on_one=bool(flags["shot_one_on_one"][i]),
                shot_open_goal=bool(flags["shot_open_goal"][i]),
                under_pressure=bool(flags["under_pressure"][i]),
                general_position=g if config.grouping == "position" else "M",
                player=g if config.grouping == "player" else f"player_{g}",
                x=loc[0],
                y=loc[1],
                match_id=i // 25,
            )
        )

    raw, names = raw_design(rows, BLOCK_ORDER)
    coef = np.array([config.beta.get(c, 0.0) for c in names])
    eta = config.beta.get("intercept", 0.0) + raw @ coef
    eta += np.array([config.group_offsets.get(g, 0.0) for g in groups])
    p = expit(eta)
    goals = rng.random(n) < p
    for r, gl, pi in zip(rows, goals, p):
        r.goal = bool(gl)
        r.statsbomb_xg = float(pi)
    return rows, p
