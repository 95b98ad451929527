"""Gibbs sampler for one directional quantile regression.

The asymmetric Laplace working likelihood is written as a normal-exponential
mixture. Per direction u the model is

    y_u = y_perp * b + X beta + theta * v + psi * sqrt(sigma * v) * z
    v_i ~ Exp(mean sigma),  z ~ N(0, 1)

with (b, beta) ~ N(0, prior_var * I) and sigma ~ InvGamma(a0, b0). All three
full conditionals are standard:

    (b, beta) | v, sigma   normal
    v_i | b, beta, sigma   GIG(1/2, chi_i, psi)
    sigma | b, beta, v     inverse gamma
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, stats

log = logging.getLogger(__name__)


class SamplerError(RuntimeError):
    pass


class RankDeficientError(ValueError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"design matrix is rank deficient; dependent columns: {', '.join(map(str, self.columns))}")


@dataclass(frozen=True)
class SamplerConfig:
    burn_in: int = 10_000
    total_iters: int = 100_000
    thin: int = 100
    prior_var: float = 100.0
    sigma_prior: tuple[float, float] = (0.01, 0.01)
    seed: int = 0

    def __post_init__(self):
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if not 1 <= self.thin <= self.total_iters:
            raise ValueError("need 1 <= thin <= total_iters")
        if self.total_iters % self.thin:
            raise ValueError("total_iters must be a multiple of thin")
        if self.prior_var <= 0:
            raise ValueError("prior_var must be positive")
        a0, b0 = self.sigma_prior
        if a0 <= 0 or b0 <= 0:
            raise ValueError("inverse gamma hyperparameters must be positive")

    @property
    def n_keep(self) -> int:
        return self.total_iters // self.thin

    def to_dict(self) -> dict:
        return {"burn_in": self.burn_in, "total_iters": self.total_iters, "thin": self.thin,
                "prior_var": self.prior_var, "sigma_prior": list(self.sigma_prior),
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "SamplerConfig":
        d = dict(d)
        d["sigma_prior"] = tuple(d["sigma_prior"])
        return cls(**d)


@dataclass(frozen=True)
class TauParams:
    tau: float
    theta: float
    psi2: float


def tau_params(tau: float) -> TauParams:
    if not 0 < tau < 1:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    w = tau * (1 - tau)
    return TauParams(tau, (1 - 2 * tau) / w, 2 / w)


# --- generalized inverse Gaussian ------------------------------------------

def sample_gig_half(chi, psi, rng: np.random.Generator, size=None):
    """Draw from GIG(1/2, chi, psi), density ~ x^(-1/2) exp(-(chi/x + psi x)/2).

    Uses 1/X ~ InverseGaussian(mean sqrt(psi/chi), shape psi). The inverse
    Gaussian draw (Michael, Schucany and Haas) is rewritten in terms of
    r = sqrt(chi/psi) so that chi -> 0 stays finite and reduces to the
    Gamma(1/2, rate psi/2) limit.
    """
    chi = np.asarray(chi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if np.any(chi < 0) or np.any(psi <= 0):
        raise ValueError("GIG parameters must satisfy chi >= 0, psi > 0")
    if size is None:
        size = np.broadcast(chi, psi).shape
    nu = rng.standard_normal(size) ** 2
    u = rng.random(size)
    r = np.sqrt(chi / psi)
    # reciprocal of the smaller root of the inverse Gaussian quadratic
    xa = r + nu / (2 * psi) + np.sqrt(4 * psi * nu * r + nu * nu) / (2 * psi)
    keep = u * (xa + r) <= xa
    out = np.where(keep, xa, r * r / np.where(xa > 0, xa, 1.0))
    if out.ndim == 0:
        return float(out)
    return out


def sample_gig(lam: float, chi: float, psi: float, rng: np.random.Generator, size=None):
    """Generic-order GIG via scipy's ratio-of-uniforms ``geninvgauss``."""
    if chi <= 0 or psi <= 0:
        raise ValueError("GIG parameters must be positive")
    return stats.geninvgauss.rvs(lam, np.sqrt(chi * psi), scale=np.sqrt(chi / psi),
                                 size=size, random_state=rng)


def gig_logpdf(x, lam: float, chi, psi):
    """Normalized GIG log-density with the (chi, psi) parameterization."""
    chi = np.asarray(chi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    return stats.geninvgauss.logpdf(x, lam, np.sqrt(chi * psi), scale=np.sqrt(chi / psi))


# --- full conditionals ------------------------------------------------------

class DenseDesign:
    """Regressors (y_perp, X) held as one dense matrix."""

    def __init__(self, W):
        self.W = np.asarray(W, dtype=float)
        self.shape = self.W.shape

    def gram(self, d):
        return (self.W.T * d) @ self.W

    def rmul(self, z):
        return self.W.T @ z

    def __matmul__(self, c):
        return self.W @ c


class GroupedDesign:
    """Same regressors, with X stored as its distinct rows.

    A categorical design has few distinct rows, so the weighted cross
    products reduce to per-group sums.
    """

    def __init__(self, y_perp, X):
        self.y_perp = np.asarray(y_perp, dtype=float)
        self.G, inv = np.unique(np.asarray(X, dtype=float), axis=0, return_inverse=True)
        self.inv = inv.ravel()
        self.shape = (len(self.y_perp), self.G.shape[1] + 1)

    def _sum(self, w):
        return np.bincount(self.inv, weights=w, minlength=len(self.G))

    def gram(self, d):
        out = np.empty((self.shape[1],) * 2)
        dy = d * self.y_perp
        out[0, 0] = dy @ self.y_perp
        out[0, 1:] = out[1:, 0] = self._sum(dy) @ self.G
        out[1:, 1:] = (self.G.T * self._sum(d)) @ self.G
        return out

    def rmul(self, z):
        return np.concatenate([[self.y_perp @ z], self._sum(z) @ self.G])

    def __matmul__(self, c):
        return self.y_perp * c[0] + (self.G @ c[1:])[self.inv]


def _ops(W):
    return W if isinstance(W, (DenseDesign, GroupedDesign)) else DenseDesign(W)


def coef_conditional(y, W, v, sigma, tp: TauParams, prior_var: float):
    """Mean, precision and its lower Cholesky factor for (b, beta) given v, sigma."""
    W = _ops(W)
    d = 1.0 / (tp.psi2 * sigma * v)
    precision = W.gram(d)
    precision[np.diag_indices_from(precision)] += 1.0 / prior_var
    rhs = W.rmul(d * (y - tp.theta * v))
    chol = linalg.cho_factor(precision, lower=True, check_finite=False)
    return linalg.cho_solve(chol, rhs, check_finite=False), precision, chol[0]


def latent_conditional(y, W, coef, sigma, tp: TauParams):
    """(chi_i, psi) of the GIG(1/2) conditional for each latent v_i."""
    resid = y - _ops(W) @ coef
    chi = resid * resid / (tp.psi2 * sigma)
    psi = tp.theta * tp.theta / (tp.psi2 * sigma) + 2.0 / sigma
    return chi, psi


def sigma_conditional(y, W, coef, v, tp: TauParams, sigma_prior: tuple[float, float]):
    """(shape, scale) of the inverse gamma conditional for sigma."""
    a0, b0 = sigma_prior
    e = y - _ops(W) @ coef - tp.theta * v
    shape = a0 + 1.5 * len(y)
    scale = b0 + v.sum() + (e * e / (2 * tp.psi2 * v)).sum()
    return shape, scale


# --- chain summaries ------------------------------------------------------------

def effective_sample_size(x: np.ndarray) -> float:
    """Geyer's initial monotone sequence estimate for one chain."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    x = x - x.mean()
    if not np.any(x):
        return float(n)
    f = np.fft.rfft(x, 2 * n)
    acov = np.fft.irfft(f * np.conj(f))[:n] / n
    rho = acov / acov[0]
    pairs = rho[: n - n % 2].reshape(-1, 2).sum(axis=1)
    neg = np.flatnonzero(pairs <= 0)
    pairs = pairs[: neg[0]] if len(neg) else pairs
    pairs = np.minimum.accumulate(pairs)
    tau_int = -1.0 + 2.0 * pairs.sum()
    return float(n / max(tau_int, 1.0 / n))


def posterior_summary(kept: np.ndarray):
    """Columnwise posterior mean, sd and effective sample size."""
    kept = np.asarray(kept, dtype=float)
    if kept.ndim == 1:
        kept = kept[:, None]
    if kept.shape[0] < 10:
        raise ValueError(f"need at least 10 draws, got {kept.shape[0]}")
    means = kept.mean(axis=0)
    sds = kept.std(axis=0, ddof=1)
    ess = np.array([effective_sample_size(c) for c in kept.T])
    return means, sds, ess


# --- the sampler ----------------------------------------------------------------

def dependent_columns(X: np.ndarray, names=None) -> list:
    """Columns that are linear combinations of earlier ones."""
    names = list(names) if names is not None else list(range(X.shape[1]))
    bad, basis = [], []
    for j in range(X.shape[1]):
        trial = basis + [j]
        if np.linalg.matrix_rank(X[:, trial]) == len(trial):
            basis = trial
        else:
            bad.append(names[j])
    return bad


def direction_seed(seed: int, index: int) -> np.random.SeedSequence:
    """Independent stream per direction, fixed regardless of scheduling."""
    return np.random.SeedSequence(entropy=seed, spawn_key=(index,))


@dataclass
class DirectionFit:
    tau: float
    b_hat: float
    beta_hat: np.ndarray
    sigma_hat: float
    kept_draws: np.ndarray
    sds: np.ndarray
    ess: np.ndarray
    direction: object = None
    iterations: int = 0
    column_names: tuple = field(default_factory=tuple)

    @property
    def draw_columns(self) -> list[str]:
        return ["b"] + list(self.column_names) + ["sigma"]


def gibbs_fit(y_u, y_perp, X, tau: float, cfg: SamplerConfig = SamplerConfig(),
              column_names=None, direction=None, seed=None) -> DirectionFit:
    """Posterior means of (b, beta, sigma) for one direction.

    ``seed`` overrides ``cfg.seed`` and may be a ``SeedSequence``.
    """
    y = np.asarray(y_u, dtype=float)
    X = np.asarray(X, dtype=float)
    W = np.column_stack([np.asarray(y_perp, dtype=float), X])
    n, q = W.shape
    if column_names is None:
        column_names = tuple(f"x{j}" for j in range(X.shape[1]))
    if n <= q:
        raise ValueError(f"need more observations ({n}) than coefficients ({q})")
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise RankDeficientError(dependent_columns(X, column_names))

    n_groups = len(np.unique(X, axis=0))
    ops = GroupedDesign(y_perp, X) if n_groups <= n // 4 else DenseDesign(W)
    tp = tau_params(tau)
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    coef = np.linalg.lstsq(W, y, rcond=None)[0]
    v = np.ones(n)
    sigma = 1.0
    tiny = np.finfo(float).tiny
    draws = np.empty((cfg.n_keep, q + 1))
    k = 0
    for it in range(cfg.burn_in + cfg.total_iters):
        mean, _, L = coef_conditional(y, ops, v, sigma, tp, cfg.prior_var)
        coef = mean + linalg.solve_triangular(L, rng.standard_normal(q), lower=True,
                                              trans="T", check_finite=False)
        chi, psi = latent_conditional(y, ops, coef, sigma, tp)
        v = np.maximum(sample_gig_half(chi, psi, rng), tiny)
        shape, scale = sigma_conditional(y, ops, coef, v, tp, cfg.sigma_prior)
        sigma = scale / rng.gamma(shape)
        if not (np.isfinite(sigma) and np.all(np.isfinite(coef))):
            raise SamplerError(f"non-finite draw at iteration {it}")
        kept = it - cfg.burn_in + 1
        if kept > 0 and kept % cfg.thin == 0:
            draws[k, :q] = coef
            draws[k, q] = sigma
            k += 1

    means, sds, ess = posterior_summary(draws) if cfg.n_keep >= 10 else (
        draws.mean(axis=0), np.full(q + 1, np.nan), np.full(q + 1, np.nan))
    return DirectionFit(
        tau=tau, b_hat=float(means[0]), beta_hat=means[1:q], sigma_hat=float(means[q]),
        kept_draws=draws, sds=sds, ess=ess, direction=direction,
        iterations=cfg.burn_in + cfg.total_iters, column_names=tuple(column_names),
    )
