"""Design matrix with player interactions, and response standardization."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .ingest import PLAYERS, SURFACES, TOURNAMENTS, Observation

# reference levels come first in each tuple and get no column
_PLAYER_DUMMIES = PLAYERS[1:]          # Djokovic, Nadal
_SURFACE_DUMMIES = SURFACES[1:]        # Clay, Grass
_TOURNAMENT_DUMMIES = TOURNAMENTS[1:]  # GrandSlam, Finals, Masters


def _factor_names() -> list[str]:
    return (["win"] + [f"surface[{s}]" for s in _SURFACE_DUMMIES]
            + [f"tournament[{t}]" for t in _TOURNAMENT_DUMMIES] + ["top20"])


COLUMN_NAMES: tuple[str, ...] = tuple(
    ["intercept"]
    + [f"player[{p}]" for p in _PLAYER_DUMMIES]
    + _factor_names()
    + [f"player[{p}]:{f}" for f in _factor_names() for p in _PLAYER_DUMMIES]
)
N_COLUMNS = len(COLUMN_NAMES)
assert N_COLUMNS == 24


@dataclass(frozen=True)
class CovariateProfile:
    player: str = "Federer"
    win: bool = False
    surface: str = "Hard"
    tournament: str = "Others"
    top20: bool = False

    def __post_init__(self):
        if self.player not in PLAYERS:
            raise ValueError(f"unknown player {self.player!r}")
        if self.surface not in SURFACES:
            raise ValueError(f"unknown surface {self.surface!r}")
        if self.tournament not in TOURNAMENTS:
            raise ValueError(f"unknown tournament type {self.tournament!r}")


@dataclass(frozen=True)
class DesignMatrix:
    X: np.ndarray
    column_names: tuple[str, ...] = COLUMN_NAMES

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.column_names)
            writer.writerows(self.X.astype(int).tolist())


@dataclass(frozen=True)
class ScalingParams:
    mean: np.ndarray
    sd: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.sd) <= 0):
            raise ValueError("standard deviations must be positive")

    def apply(self, Y: np.ndarray) -> np.ndarray:
        return (np.asarray(Y, dtype=float) - self.mean) / self.sd

    def invert(self, Z: np.ndarray) -> np.ndarray:
        return np.asarray(Z, dtype=float) * self.sd + self.mean

    def to_dict(self) -> dict:
        return {"mean": [float(v) for v in self.mean], "sd": [float(v) for v in self.sd],
                "columns": ["rel_points", "minutes"]}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalingParams":
        return cls(np.array(d["mean"], dtype=float), np.array(d["sd"], dtype=float))


def _row(player: str, win: bool, surface: str, tournament: str, top20: bool) -> np.ndarray:
    factors = ([float(win)] + [float(surface == s) for s in _SURFACE_DUMMIES]
               + [float(tournament == t) for t in _TOURNAMENT_DUMMIES] + [float(top20)])
    players = [float(player == p) for p in _PLAYER_DUMMIES]
    inter = [f * p for f in factors for p in players]
    return np.array([1.0] + players + factors + inter)


def profile_vector(profile: CovariateProfile) -> np.ndarray:
    return _row(profile.player, profile.win, profile.surface, profile.tournament, profile.top20)


def encode_design(obs: Sequence[Observation]) -> DesignMatrix:
    if not obs:
        raise ValueError("no observations to encode")
    X = np.vstack([_row(o.player, o.win, o.surface, o.tournament, o.top20_opponent) for o in obs])
    return DesignMatrix(X)


def response_matrix(obs: Sequence[Observation]) -> np.ndarray:
    """Columns: relative points won, minutes."""
    return np.array([[o.rel_points, o.minutes] for o in obs], dtype=float)


def standardize(Y: np.ndarray) -> tuple[np.ndarray, ScalingParams]:
    """Center and scale each column by its mean and sample (n-1) standard deviation."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[0] < 2:
        raise ValueError("need an n x k response with n >= 2")
    mean = Y.mean(axis=0)
    sd = Y.std(axis=0, ddof=1)
    if np.any(sd <= 0):
        raise ValueError(f"zero-variance response column(s): {np.flatnonzero(sd <= 0).tolist()}")
    scaling = ScalingParams(mean, sd)
    return scaling.apply(Y), scaling
