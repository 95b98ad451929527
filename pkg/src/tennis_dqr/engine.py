"""Fitting every direction and turning the fits into quantile regions."""
from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .design import COLUMN_NAMES, CovariateProfile, ScalingParams, profile_vector
from .geometry import (DEFAULT_BOX, Direction, Polygon, box, direction_grid,
                       halfplane_from_fit, intersect_halfplanes, project)
from .ingest import PLAYERS, SURFACES, TOURNAMENTS
from .sampler import DirectionFit, SamplerConfig, direction_seed, gibbs_fit

log = logging.getLogger(__name__)

MODELFIT_FORMAT = "tennis-dqr/modelfit"
CONTOURS_FORMAT = "tennis-dqr/contours"


class DirectionFitError(RuntimeError):
    def __init__(self, index: int, cause: Exception):
        self.index = index
        super().__init__(f"direction {index}: {cause}")


@dataclass
class ModelFit:
    tau: float
    fits: list[DirectionFit]
    scaling: ScalingParams
    design_columns: tuple[str, ...]
    data_fingerprint: str
    config: SamplerConfig
    box_half_width: float = DEFAULT_BOX

    def __post_init__(self):
        for f in self.fits:
            if f.tau != self.tau or tuple(f.column_names) != tuple(self.design_columns):
                raise ValueError("all direction fits must share tau and design columns")

    @property
    def directions(self) -> list[Direction]:
        return [f.direction for f in self.fits]

    def fingerprint(self) -> str:
        return hashlib.sha256(dumps(modelfit_to_dict(self)).encode()).hexdigest()


def _fit_one(args):
    index, u, y_u, y_perp, X, tau, cfg, columns = args
    try:
        return gibbs_fit(y_u, y_perp, X, tau, cfg, column_names=columns,
                         direction=Direction(u, index), seed=direction_seed(cfg.seed, index))
    except Exception as exc:
        raise DirectionFitError(index, exc) from exc


def fit_all_directions(Z: np.ndarray, X: np.ndarray, tau: float, cfg: SamplerConfig, m: int,
                       scaling: ScalingParams | None = None, column_names: Sequence[str] | None = None,
                       data_fingerprint: str = "", jobs: int = 1,
                       progress: Callable[[int, int], None] | None = None) -> ModelFit:
    """One Gibbs fit per grid direction; any failure aborts the whole fit."""
    Z = np.asarray(Z, dtype=float)
    X = np.asarray(X, dtype=float)
    if len(Z) != len(X):
        raise ValueError("responses and design have different row counts")
    if column_names is None:
        column_names = COLUMN_NAMES if X.shape[1] == len(COLUMN_NAMES) else tuple(
            f"x{j}" for j in range(X.shape[1]))
    if scaling is None:
        scaling = ScalingParams(np.zeros(2), np.ones(2))
    tasks = []
    for d in direction_grid(m):
        y_u, y_perp = project(Z, d)
        tasks.append((d.index, d.u, y_u, y_perp, X, tau, cfg, tuple(column_names)))
    fits: list[DirectionFit] = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for k, f in enumerate(pool.map(_fit_one, tasks)):
                fits.append(f)
                if progress:
                    progress(k + 1, m)
    else:
        for k, t in enumerate(tasks):
            fits.append(_fit_one(t))
            if progress:
                progress(k + 1, m)
    fits.sort(key=lambda f: f.direction.index)
    return ModelFit(tau, fits, scaling, tuple(column_names), data_fingerprint, cfg)


def quantile_region(fit: ModelFit, profile) -> tuple[Polygon, Polygon]:
    """Region in standardized units and its image in original units.

    ``profile`` is a CovariateProfile or a raw covariate row matching the
    design columns.
    """
    x = profile_vector(profile) if isinstance(profile, CovariateProfile) else np.asarray(profile, dtype=float)
    if len(x) != len(fit.design_columns):
        raise ValueError("profile does not match design columns")
    hs = [halfplane_from_fit(f.direction, f.b_hat, float(x @ f.beta_hat)) for f in fit.fits]
    region = intersect_halfplanes(hs, box(fit.box_half_width))
    if region.is_empty:
        log.warning("empty quantile region for profile %s", profile)
    return region, region.map(fit.scaling.sd, fit.scaling.mean)


@dataclass
class ContourEntry:
    name: str
    profile: CovariateProfile
    standardized: Polygon
    original: Polygon


@dataclass
class ContourSet:
    tau: float
    scaling: ScalingParams
    profiles: list[ContourEntry] = field(default_factory=list)
    family: str = "custom"

    def names(self) -> list[str]:
        return [p.name for p in self.profiles]


def compare_profiles(fit: ModelFit, profiles: Iterable[tuple[str, CovariateProfile]], family: str = "custom") -> ContourSet:
    out = ContourSet(fit.tau, fit.scaling, family=family)
    for name, prof in profiles:
        std, orig = quantile_region(fit, prof)
        out.profiles.append(ContourEntry(name, prof, std, orig))
    return out


def _preset(levels, make, label):
    return [(f"{p}, {label(lv)}", make(p, lv)) for lv in levels for p in PLAYERS]


# everything not varied stays at its reference level
PRESETS: dict[str, list[tuple[str, CovariateProfile]]] = {
    "win": _preset((False, True), lambda p, w: CovariateProfile(player=p, win=w),
                   lambda w: "win" if w else "loss"),
    "top20": _preset((False, True), lambda p, t: CovariateProfile(player=p, top20=t),
                     lambda t: "top 20 opponent" if t else "other opponent"),
    "surface": _preset(SURFACES, lambda p, s: CovariateProfile(player=p, surface=s), str),
    "tournament": _preset(TOURNAMENTS, lambda p, t: CovariateProfile(player=p, tournament=t), str),
}


# --- serialization ----------------------------------------------------------

def dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _floats(a) -> list[float]:
    return [float(v) for v in np.asarray(a, dtype=float)]


def modelfit_to_dict(fit: ModelFit) -> dict:
    return {
        "format": MODELFIT_FORMAT,
        "version": 1,
        "tau": fit.tau,
        "config": fit.config.to_dict(),
        "scaling": fit.scaling.to_dict(),
        "design_columns": list(fit.design_columns),
        "data_fingerprint": fit.data_fingerprint,
        "box_half_width": fit.box_half_width,
        "complement_convention": "gamma_u = (-u2, u1)",
        "directions": [
            {
                "index": f.direction.index,
                "u": _floats(f.direction.u),
                "b_hat": f.b_hat,
                "beta_hat": _floats(f.beta_hat),
                "sigma_hat": f.sigma_hat,
                "posterior_sd": _floats(f.sds),
                "ess": _floats(f.ess),
                "iterations": f.iterations,
            }
            for f in fit.fits
        ],
    }


def modelfit_from_dict(d: dict) -> ModelFit:
    if d.get("format") != MODELFIT_FORMAT:
        raise ValueError("not a model fit document")
    cols = tuple(d["design_columns"])
    fits = [
        DirectionFit(
            tau=d["tau"], b_hat=e["b_hat"], beta_hat=np.array(e["beta_hat"]),
            sigma_hat=e["sigma_hat"], kept_draws=None, sds=np.array(e["posterior_sd"]),
            ess=np.array(e["ess"]), direction=Direction(np.array(e["u"]), e["index"]),
            iterations=e["iterations"], column_names=cols,
        )
        for e in d["directions"]
    ]
    return ModelFit(d["tau"], fits, ScalingParams.from_dict(d["scaling"]), cols,
                    d["data_fingerprint"], SamplerConfig.from_dict(d["config"]),
                    d.get("box_half_width", DEFAULT_BOX))


def save_modelfit(fit: ModelFit, path, extra: dict | None = None) -> None:
    d = modelfit_to_dict(fit)
    if extra:
        d.update(extra)
    Path(path).write_text(dumps(d), encoding="utf-8")


def load_modelfit(path) -> ModelFit:
    return modelfit_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _profile_dict(p: CovariateProfile) -> dict:
    return {"player": p.player, "win": p.win, "surface": p.surface,
            "tournament": p.tournament, "top20": p.top20}


def contourset_to_dict(cs: ContourSet) -> dict:
    return {
        "format": CONTOURS_FORMAT,
        "version": 1,
        "tau": cs.tau,
        "family": cs.family,
        "scaling": cs.scaling.to_dict(),
        "profiles": [
            {"name": e.name, "profile": _profile_dict(e.profile),
             "empty": e.standardized.is_empty,
             "standardized": e.standardized.to_list(), "original": e.original.to_list()}
            for e in cs.profiles
        ],
    }


def contourset_from_dict(d: dict) -> ContourSet:
    if d.get("format") != CONTOURS_FORMAT:
        raise ValueError("not a contour set document")
    cs = ContourSet(d["tau"], ScalingParams.from_dict(d["scaling"]), family=d.get("family", "custom"))
    for e in d["profiles"]:
        cs.profiles.append(ContourEntry(e["name"], CovariateProfile(**e["profile"]),
                                        Polygon(e["standardized"]), Polygon(e["original"])))
    return cs


def write_chains(fit: ModelFit, out_dir) -> list[Path]:
    """One CSV of retained draws per direction."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for f in fit.fits:
        if f.kept_draws is None:
            continue
        p = out_dir / f"chain_{f.direction.index:03d}.csv"
        np.savetxt(p, f.kept_draws, delimiter=",", header=",".join(f.draw_columns),
                   comments="", fmt="%.17g")
        paths.append(p)
    return paths
