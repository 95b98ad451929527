"""Self-checks of the sampler and geometry against the brute-force references.

Each check returns a :class:`CheckResult` carrying the measured value and the
bound it was held to, so a failure can be read without rerunning anything.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

from . import oracle
from .design import standardize
from .engine import fit_all_directions, quantile_region
from .geometry import (Halfplane, box, direction_grid, halfplane_from_fit,
                       intersect_halfplanes, project, satisfies_all, contains,
                       symmetric_difference_area)
from .sampler import (SamplerConfig, coef_conditional, gig_logpdf, gibbs_fit,
                      latent_conditional, sample_gig_half, sigma_conditional, tau_params)


@dataclass
class CheckResult:
    name: str
    measured: float
    required: str
    passed: bool
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name}: measured {self.measured:.6g}, required {self.required} ({self.seconds:.1f}s)"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        results = fn(*args, **kwargs)
        dt = time.perf_counter() - t0
        for r in results:
            r.seconds = dt / len(results)
        return results
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# --- GIG ------------------------------------------------------------------

def gig_half_reference(chi: float = 1.0, psi: float = 1.0):
    """Normalizing constant, mean and a tabulated CDF by numerical quadrature."""
    dens = lambda x: x ** -0.5 * np.exp(-(chi / x + psi * x) / 2)
    norm = integrate.quad(dens, 0, np.inf, limit=200)[0]
    mean = integrate.quad(lambda x: x * dens(x), 0, np.inf, limit=200)[0] / norm
    # CDF on a log grid: integrate the density of t = log x
    t = np.linspace(-30.0, np.log(200.0 / psi) + 3, 400_001)
    g = dens(np.exp(t)) * np.exp(t) / norm
    cdf = integrate.cumulative_trapezoid(g, t, initial=0.0)
    return norm, mean, np.exp(t), cdf


@_timed
def check_gig(n_mean: int = 1_000_000, n_ks: int = 100_000, seed: int = 11,
              mean_tol: float = 0.01, ks_tol: float = 0.01) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    _, ref_mean, grid, cdf = gig_half_reference()
    draws = sample_gig_half(np.ones(n_mean), np.ones(n_mean), rng)
    rel = abs(draws.mean() - ref_mean) / ref_mean
    x = np.sort(sample_gig_half(np.ones(n_ks), np.ones(n_ks), rng))
    F = np.interp(x, grid, cdf)
    emp_hi = np.arange(1, n_ks + 1) / n_ks
    emp_lo = np.arange(n_ks) / n_ks
    ks = float(max(np.max(emp_hi - F), np.max(F - emp_lo)))
    return [
        CheckResult("gig mean relative error", rel, f"< {mean_tol}", bool(rel < mean_tol and np.all(draws > 0))),
        CheckResult("gig KS distance", ks, f"< {ks_tol}", ks < ks_tol),
    ]


# --- full conditionals ----------------------------------------------------------

def log_joint(y, W, coef, v, sigma, tau, prior_var, sigma_prior):
    """Joint log density of data, latents and parameters, written directly
    from the hierarchical model with scipy distributions."""
    tp = tau_params(tau)
    a0, b0 = sigma_prior
    mu = W @ coef + tp.theta * v
    return (stats.norm.logpdf(y, mu, np.sqrt(tp.psi2 * sigma * v)).sum()
            + stats.expon.logpdf(v, scale=sigma).sum()
            + stats.norm.logpdf(coef, 0.0, np.sqrt(prior_var)).sum()
            + stats.invgamma.logpdf(sigma, a0, scale=b0))


@_timed
def check_density_ratio(n_points: int = 100, n_obs: int = 5, seed: int = 5,
                        tol: float = 1e-6) -> list[CheckResult]:
    """Differences of each conditional log density must match differences of
    the joint when only that block moves."""
    rng = np.random.default_rng(seed)
    tau = 0.25
    prior_var, sigma_prior = 100.0, (0.01, 0.01)
    tp = tau_params(tau)
    worst = 0.0
    for _ in range(n_points):
        W = np.column_stack([rng.standard_normal(n_obs), np.ones(n_obs), rng.standard_normal(n_obs)])
        y = rng.standard_normal(n_obs)
        q = W.shape[1]
        coef1, coef2 = rng.standard_normal(q), rng.standard_normal(q)
        v1, v2 = rng.gamma(2.0, 0.5, n_obs), rng.gamma(2.0, 0.5, n_obs)
        s1, s2 = rng.gamma(2.0, 0.5), rng.gamma(2.0, 0.5)
        lj = lambda c, v, s: log_joint(y, W, c, v, s, tau, prior_var, sigma_prior)

        mean, prec, _ = coef_conditional(y, W, v1, s1, tp, prior_var)
        cov = np.linalg.inv(prec)
        dc = stats.multivariate_normal.logpdf(coef1, mean, cov) - stats.multivariate_normal.logpdf(coef2, mean, cov)
        worst = max(worst, abs(dc - (lj(coef1, v1, s1) - lj(coef2, v1, s1))))

        chi, psi = latent_conditional(y, W, coef1, s1, tp)
        dv = gig_logpdf(v1, 0.5, chi, psi).sum() - gig_logpdf(v2, 0.5, chi, psi).sum()
        worst = max(worst, abs(dv - (lj(coef1, v1, s1) - lj(coef1, v2, s1))))

        shape, scale = sigma_conditional(y, W, coef1, v1, tp, sigma_prior)
        ds = stats.invgamma.logpdf(s1, shape, scale=scale) - stats.invgamma.logpdf(s2, shape, scale=scale)
        worst = max(worst, abs(ds - (lj(coef1, v1, s1) - lj(coef1, v1, s2))))
    return [CheckResult("full-conditional log-ratio deviation", worst, f"< {tol:g}", worst < tol)]


# --- geometry --------------------------------------------------------------

def random_halfplanes(rng, k: int = 40):
    """Tangent-ish constraints around a random ellipse, plus a few loose ones."""
    angles = np.sort(rng.uniform(0, 2 * np.pi, k))
    normals = np.column_stack([np.cos(angles), np.sin(angles)]) * rng.uniform(0.5, 2.0, (k, 1))
    offsets = -rng.uniform(0.5, 1.5, k) * np.linalg.norm(normals, axis=1)
    return [Halfplane(c, float(d)) for c, d in zip(normals, offsets)]


@_timed
def check_geometry(n_side: int = 100, seed: int = 3, tol: float = 1e-9) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    hs = random_halfplanes(rng)
    bbox = box(2.0)
    poly = intersect_halfplanes(hs, bbox)
    box_hs = [Halfplane(np.array(c, float), -2.0) for c in ((1, 0), (-1, 0), (0, 1), (0, -1))]
    g = np.linspace(-2.2, 2.2, n_side)
    pts = np.array([(a, b) for a in g for b in g])
    # include polygon vertices, which sit exactly on the boundary
    pts = np.vstack([pts, poly.vertices])
    inside, slack = satisfies_all(hs + box_hs, pts)
    member = np.array([contains(poly, p) for p in pts])
    bad = (inside != member) & (np.abs(slack) > tol)
    worst_vertex = float(-satisfies_all(hs + box_hs, poly.vertices)[1].min())
    return [
        CheckResult("polygon membership mismatches", float(bad.sum()), "== 0", not bad.any()),
        CheckResult("vertex constraint violation", max(worst_vertex, 0.0), f"<= {tol:g}", worst_vertex <= tol),
    ]


# --- sampler ----------------------------------------------------------------

@_timed
def check_coverage(n: int = 2000, m: int = 36, tau: float = 0.25,
                   cfg: SamplerConfig = SamplerConfig(burn_in=1000, total_iters=10_000, thin=10, seed=21),
                   band: float = 0.03, seed: int = 17) -> list[CheckResult]:
    """Intercept-only fit on bivariate normal data: each fitted halfplane should
    leave about tau of the sample strictly below it."""
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, 2))
    X = np.ones((n, 1))
    cov = []
    for d in direction_grid(m):
        y_u, y_perp = project(Z, d)
        f = gibbs_fit(y_u, y_perp, X, tau, cfg, seed=cfg.seed + d.index)
        cov.append(oracle.empirical_direction_coverage(halfplane_from_fit(d, f.b_hat, f.beta_hat[0]), Z))
    cov = np.array(cov)
    worst = float(np.max(np.abs(cov - tau)))
    return [CheckResult(f"directional coverage |frac - {tau}| over {m} directions", worst,
                        f"<= {band}", worst <= band)]


def synthetic_problem(rng, n: int, p: int, tau: float):
    X = np.column_stack([np.ones(n)] + [rng.standard_normal(n) for _ in range(p - 1)])
    y_perp = rng.standard_normal(n)
    beta = rng.uniform(-1, 1, p)
    y_u = X @ beta + 0.5 * y_perp + rng.standard_normal(n)
    return y_u, y_perp, X


SAMPLER_PROBLEMS = ((1, 0.25), (2, 0.5), (3, 0.25), (2, 0.25), (3, 0.5))


@_timed
def check_sampler_vs_oracle(problems=SAMPLER_PROBLEMS, n: int = 200, tol: float = 0.1,
                            cfg: SamplerConfig = SamplerConfig(burn_in=2000, total_iters=20_000, thin=10, seed=31),
                            seed: int = 29) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p, tau in problems:
        y_u, y_perp, X = synthetic_problem(rng, n, p, tau)
        fit = gibbs_fit(y_u, y_perp, X, tau, cfg)
        W = np.column_stack([y_perp, X])
        ref = oracle.brute_force_fit(oracle.CheckLossProblem(y_u, W, tau))
        worst = max(worst, float(np.max(np.abs(np.concatenate([[fit.b_hat], fit.beta_hat]) - ref))))
    return [CheckResult(f"posterior mean vs check-loss minimizer ({len(problems)} problems)",
                        worst, f"<= {tol}", worst <= tol)]


def elliptical_sample(rng, n: int):
    cov = np.array([[1.0, 0.6], [0.6, 1.0]])
    return rng.multivariate_normal([0.0, 0.0], cov, n) * [1.0, 3.0] + [2.0, -1.0]


@_timed
def check_tukey(n: int = 400, m: int = 180, tau: float = 0.25, tol: float = 0.10,
                cfg: SamplerConfig = SamplerConfig(burn_in=1000, total_iters=10_000, thin=10, seed=41),
                seed: int = 43) -> list[CheckResult]:
    """Unconditional fitted region against the brute-force depth region."""
    rng = np.random.default_rng(seed)
    Z, _ = standardize(elliptical_sample(rng, n))
    fit = fit_all_directions(Z, np.ones((n, 1)), tau, cfg, m, column_names=("intercept",))
    region, _ = quantile_region(fit, [1.0])
    depth = oracle.tukey_region_bruteforce(Z, tau)
    ratio = symmetric_difference_area(region, depth) / depth.area if not depth.is_empty else np.inf
    return [CheckResult("depth-region symmetric difference / area", ratio, f"< {tol}", ratio < tol)]


SCALES = {
    "tiny": dict(
        gig=dict(n_mean=200_000, n_ks=100_000, mean_tol=0.02),
        density=dict(n_points=100),
        geometry=dict(),
        coverage=dict(n=2000, m=8, band=0.03,
                      cfg=SamplerConfig(burn_in=300, total_iters=3000, thin=3, seed=21)),
        sampler=dict(problems=SAMPLER_PROBLEMS[:2],
                     cfg=SamplerConfig(burn_in=500, total_iters=5000, thin=5, seed=31)),
        tukey=dict(n=400, m=36, tol=0.15,
                   cfg=SamplerConfig(burn_in=300, total_iters=3000, thin=3, seed=41)),
    ),
    "default": dict(gig={}, density={}, geometry={}, coverage={}, sampler={}, tukey={}),
}


def run_validation(scale: str = "default", report=print) -> list[CheckResult]:
    if scale not in SCALES:
        raise ValueError(f"unknown scale {scale!r}; choose from {sorted(SCALES)}")
    s = SCALES[scale]
    results = []
    for fn, key in ((check_gig, "gig"), (check_density_ratio, "density"), (check_geometry, "geometry"),
                    (check_coverage, "coverage"), (check_sampler_vs_oracle, "sampler"),
                    (check_tukey, "tukey")):
        for r in fn(**s[key]):
            results.append(r)
            if report:
                report(r.line())
    return results
