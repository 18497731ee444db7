"""Seeded Monte Carlo reference for the risk of the surplus, plus a quadrature oracle for one asset.

Draws are produced in chunks, each with its own Philox stream spawned from one
``SeedSequence``; chunks may be filled by several threads but the result only
depends on ``(seed, n_samples, n_chunks)``. Asset draws ``U = X - 1`` and the
liability ``<X, L>`` are stored once, so every allocation is evaluated on the
same underlying randomness (common random numbers).
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate, optimize

from .errors import ConvergenceError, DomainError, NumericError, TailSampleWarning

TAIL_FLOOR = 1000


def default_jobs():
    env = os.environ.get("STATICHEDGE_JOBS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class McConfig:
    n_samples: int = 10_000_000
    seed: int = 20240601
    n_chunks: int = 64
    alpha: float = 0.005
    jobs: int | None = None
    n_batches: int = 30
    tail_tilt: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DomainError("alpha must lie in (0, 1)")
        if self.n_samples < max(2, self.n_chunks, self.n_batches):
            raise DomainError("n_samples must exceed the number of chunks and batches")
        if self.n_chunks < 1 or self.n_batches < 2:
            raise DomainError("need n_chunks >= 1 and n_batches >= 2")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if not 0.0 <= self.tail_tilt <= 1.5:
            raise DomainError("tail_tilt must lie in [0, 1.5]")

    @property
    def tail_count(self):
        return self.n_samples * self.alpha

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True)
class RiskEstimate:
    value: float
    std_error: float
    measure: str
    alpha: float
    batch_values: np.ndarray = field(default=None, repr=False, compare=False)

    def __sub__(self, other):
        diff = self.batch_values - other.batch_values
        return RiskEstimate(self.value - other.value, _batch_se(diff), self.measure, self.alpha, diff)


def _batch_se(values):
    return float(np.std(values, ddof=1) / math.sqrt(len(values)))


def _chunk_bounds(n, k):
    edges = np.linspace(0, n, k + 1).astype(np.int64)
    return list(zip(edges[:-1], edges[1:]))


def _claim_tilt(model, cfg):
    """Mean shift of Gaussian claims toward the tail event ``<1, L> > q`` and the matching precision."""
    from .models import claim_quantile

    cov = model.claims.gaussian_cov
    if cov is None:
        raise DomainError("tail_tilt needs Gaussian claims")
    ones = np.ones(model.n)
    direction = cov @ ones
    q = claim_quantile(model.claims, cfg.alpha)
    shift = cfg.tail_tilt * q * direction / (ones @ direction)
    return shift, np.linalg.solve(cov, shift)


class SurplusSimulation:
    """Stored draws of ``U = X - 1`` and ``B = <X, L>`` for a normalized model.

    With ``cfg.tail_tilt > 0`` (Gaussian claims only) the claims are drawn with
    their mean shifted by ``tail_tilt * q`` along ``Sigma^L 1`` and every draw
    carries the likelihood ratio in ``weights`` (importance sampling of the tail).
    """

    def __init__(self, model, cfg):
        self.model = model
        self.cfg = cfg
        tilt = _claim_tilt(model, cfg) if cfg.tail_tilt > 0.0 else None
        if tilt is None and cfg.tail_count < TAIL_FLOOR:
            warnings.warn(f"only {cfg.tail_count:.0f} expected tail samples (recommended >= {TAIL_FLOOR})",
                          TailSampleWarning, stacklevel=2)
        n, size = model.n, cfg.n_samples
        self.u = np.empty((size, n))
        self.b = np.empty(size)
        self.weights = np.empty(size) if tilt is not None else None
        children = np.random.SeedSequence(int(cfg.seed)).spawn(cfg.n_chunks)
        bounds = _chunk_bounds(size, cfg.n_chunks)

        def fill(i):
            lo, hi = bounds[i]
            rng = np.random.Generator(np.random.Philox(children[i]))
            u = model.sample_assets(rng, hi - lo)
            ell = model.claims.sample(rng, hi - lo)
            if tilt is not None:
                shift, prec_shift = tilt
                ell += shift
                self.weights[lo:hi] = np.exp(0.5 * shift @ prec_shift - ell @ prec_shift)
            self.u[lo:hi] = u
            self.b[lo:hi] = np.einsum("ij,ij->i", 1.0 + u, ell)

        jobs = cfg.jobs or default_jobs()
        if jobs == 1:
            for i in range(cfg.n_chunks):
                fill(i)
        else:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                list(pool.map(fill, range(cfg.n_chunks)))
        self._frac = 0.05
        if tilt is not None:
            # share of draws in the tilted claim tail, with a safety margin, sizes the sort window
            z0 = -_weighted_tail_stats(-self.b, self.weights, cfg.alpha, 0.5)[0]
            self._frac = min(1.0, 1.3 * float(np.mean(-self.b <= z0)) + 0.01)

    def surplus(self, phi):
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        if phi.shape != (self.model.n,):
            raise DomainError(f"allocation must have {self.model.n} entries")
        return self.u @ phi - self.b

    def estimate(self, phi, measure="var", alpha=None):
        return risk_from_samples(self.surplus(phi), measure, alpha or self.cfg.alpha, self.cfg.n_batches,
                                 self.weights, self._frac)

    def value(self, phi, measure="var", alpha=None):
        """Point estimate without the batch-means standard error."""
        s, a = self.surplus(phi), alpha or self.cfg.alpha
        var, es = _tail_stats(s, a) if self.weights is None else _weighted_tail_stats(s, self.weights, a, self._frac)
        return var if measure == "var" else es


def _tail_stats(s, alpha):
    """(VaR, ES) of the sample ``s`` using the linear-interpolation quantile."""
    n = s.size
    h = (n - 1) * alpha
    k = int(math.floor(h))
    part = np.partition(s, [k, min(k + 1, n - 1)])
    lo, hi = part[k], part[min(k + 1, n - 1)]
    z = lo + (h - k) * (hi - lo)
    tail = part[:k + 1]
    es = -float(np.sum(tail[tail <= z])) / (n * alpha)
    return -float(z), es


def _weighted_tail_stats(s, w, alpha, frac=0.05):
    """(VaR, ES) of a weighted sample whose weights average to 1 (importance sampling).

    The quantile is the smallest sample value whose cumulative weight reaches
    ``n * alpha``. Only the lowest ``frac`` of the sample is sorted; ``frac`` is
    doubled until that part carries enough weight.
    """
    n = s.size
    target = n * alpha
    while True:
        k = min(n - 1, int(frac * n))
        mask = s <= np.partition(s, k)[k] if k < n - 1 else np.ones(n, dtype=bool)
        sub_s, sub_w = s[mask], w[mask]
        order = np.argsort(sub_s, kind="stable")
        cum = np.cumsum(sub_w[order])
        if cum[-1] >= target or k == n - 1:
            break
        frac *= 2.0
    j = min(int(np.searchsorted(cum, target)), len(order) - 1)
    sorted_s = sub_s[order]
    z = sorted_s[j]
    below = cum[j - 1] if j > 0 else 0.0
    # split the atom at the quantile so that exactly n*alpha of weight enters the tail mean
    tail_sum = float(np.dot(sub_w[order[:j]], sorted_s[:j])) + (target - below) * z
    return -float(z), -tail_sum / target


def risk_from_samples(s, measure, alpha, n_batches=30, weights=None, frac=0.05):
    """VaR or ES estimate from a sample with batch-means standard error.

    ``weights`` are importance-sampling likelihood ratios (mean 1); ``None`` is plain sampling.
    """
    s = np.asarray(s, dtype=float)
    if s.size < 2 or np.ptp(s) == 0.0:
        raise NumericError("degenerate surplus sample (all values equal)")
    idx = 0 if measure == "var" else 1
    if measure not in ("var", "es"):
        raise DomainError("measure must be 'var' or 'es'")
    if weights is None:
        value = _tail_stats(s, alpha)[idx]
        batches = np.array([_tail_stats(chunk, alpha)[idx] for chunk in np.array_split(s, n_batches)])
    else:
        value = _weighted_tail_stats(s, weights, alpha, frac)[idx]
        batches = np.array([_weighted_tail_stats(cs, cw, alpha, frac)[idx] for cs, cw in
                            zip(np.array_split(s, n_batches), np.array_split(weights, n_batches))])
    return RiskEstimate(value, _batch_se(batches), measure, alpha, batches)


def simulate_surplus(model, phi, cfg):
    """Draws of the surplus ``<X - 1, phi> - <X, L>``."""
    return SurplusSimulation(model, cfg).surplus(phi)


def var_mc(model, phi, cfg, sim=None):
    sim = sim or SurplusSimulation(model, cfg)
    return sim.estimate(phi, "var")


def es_mc(model, phi, cfg, sim=None):
    sim = sim or SurplusSimulation(model, cfg)
    return sim.estimate(phi, "es")


def _es_integral(s, alpha, n_beta):
    """alpha^-1 * int_0^alpha VaR_beta dbeta with the trapezoid rule on (beta_1, alpha].

    The first panel [0, beta_1] is integrated exactly on the empirical quantile function.
    """
    n = s.size
    betas = np.linspace(alpha / n_beta, alpha, n_beta)
    kmax = min(int(math.ceil((n - 1) * alpha)) + 2, n)
    tail = np.sort(np.partition(s, kmax - 1)[:kmax])
    h = (n - 1) * betas
    k = np.floor(h).astype(np.int64)
    q = tail[k] + (h - k) * (tail[np.minimum(k + 1, kmax - 1)] - tail[k])
    var = -q
    body = integrate.trapezoid(var, betas)
    # exact integral of the type-7 quantile over [0, beta_1]: piecewise linear in beta
    b1 = betas[0]
    grid = np.arange(0, k[0] + 1) / (n - 1)
    grid = np.append(grid, b1)
    vals = np.append(tail[:k[0] + 1], q[0])
    head = -integrate.trapezoid(vals, grid)
    return float((head + body) / alpha)


def es_from_var_integral(model, phi, cfg, n_beta=256, sim=None):
    """ES computed as the average of VaR_beta over beta in (0, alpha]."""
    if n_beta < 16:
        raise DomainError("n_beta must be at least 16")
    sim = sim or SurplusSimulation(model, cfg)
    if sim.weights is not None:
        raise DomainError("es_from_var_integral uses plain sampling (tail_tilt = 0)")
    s = sim.surplus(phi)
    value = _es_integral(s, cfg.alpha, n_beta)
    batches = np.array([_es_integral(c, cfg.alpha, n_beta) for c in np.array_split(s, cfg.n_batches)])
    return RiskEstimate(value, _batch_se(batches), "es", cfg.alpha, batches)


@dataclass(frozen=True)
class ProfileCurve:
    phi: np.ndarray
    value: np.ndarray
    std_error: np.ndarray
    measure: str


def risk_profile(model, phi_grid, cfg, measure="var", sim=None):
    """Risk of the surplus along a grid of allocations on common random numbers.

    A 1-d grid is read as allocations of a single asset; otherwise rows are allocations.
    """
    sim = sim or SurplusSimulation(model, cfg)
    grid = np.asarray(phi_grid, dtype=float)
    grid = grid.reshape(-1, 1) if grid.ndim == 1 else grid
    ests = [sim.estimate(p, measure) for p in grid]
    return ProfileCurve(grid, np.array([e.value for e in ests]), np.array([e.std_error for e in ests]), measure)


@dataclass(frozen=True)
class MinimizationResult:
    phi: np.ndarray
    value: float
    achieved_tol: float
    n_evals: int


def _poly_features(x, center, scale):
    """Full quadratic design matrix in scaled coordinates."""
    t = (x - center) / scale
    n = t.shape[1]
    cols = [np.ones(len(t))] + [t[:, i] for i in range(n)]
    cols += [t[:, i] * t[:, j] for i in range(n) for j in range(i, n)]
    return np.stack(cols, axis=1), t


def _surface_refine(objective, start, bounds, width, per_dim, iters):
    """Iterated least-squares fit of a cubic (1-d) or quadratic (n-d) response surface."""
    n = len(start)
    x = np.asarray(start, dtype=float)
    history = [x.copy()]
    for _ in range(iters):
        lo = np.maximum(bounds[:, 0], x - width)
        hi = np.minimum(bounds[:, 1], x + width)
        axes = [np.linspace(a, b, per_dim) for a, b in zip(lo, hi)]
        pts = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
        vals = np.array([objective(p) for p in pts])
        center, scale = 0.5 * (lo + hi), 0.5 * (hi - lo)
        best = pts[int(np.argmin(vals))]
        if n == 1:
            poly = np.polynomial.Polynomial.fit(pts[:, 0], vals, 3)
            roots = poly.deriv().roots()
            roots = [r.real for r in roots if abs(r.imag) < 1e-12 and lo[0] <= r.real <= hi[0]
                     and poly.deriv(2)(r.real) > 0]
            x = np.array([min(roots, key=poly)]) if roots else best
        else:
            design, _ = _poly_features(pts, center, scale)
            coef, *_ = np.linalg.lstsq(design, vals, rcond=None)
            grad = coef[1:n + 1]
            hess = np.zeros((n, n))
            k = n + 1
            for i in range(n):
                for j in range(i, n):
                    hess[i, j] += coef[k] if i != j else 2 * coef[k]
                    if i != j:
                        hess[j, i] += coef[k]
                    k += 1
            if np.all(np.linalg.eigvalsh(hess) > 0):
                x = np.clip(center + scale * np.linalg.solve(hess, -grad), lo, hi)
            else:
                x = best
        history.append(x.copy())
    return x, float(np.max(np.abs(history[-1] - history[-2])))


def minimize_risk_mc(model, bounds, cfg, measure="var", sim=None, grid_points=41, xtol=1e-4, maxiter=200,
                     refine="direct", window=0.2, surface_points=None, surface_iters=2):
    """Minimize the CRN risk estimate over a box.

    A coarse grid locates the basin. ``refine="direct"`` then runs golden section
    (one asset) or Nelder-Mead (several assets) on the CRN objective.
    ``refine="surface"`` instead fits a response surface (cubic in one dimension,
    quadratic otherwise) to a local grid of half-width ``window`` and re-centers
    ``surface_iters`` times; this averages the fine-scale jitter of empirical
    quantiles and gives a far less seed-dependent minimizer on flat curves.
    """
    sim = sim or SurplusSimulation(model, cfg)
    bounds = np.atleast_2d(np.asarray(bounds, dtype=float))
    if bounds.shape != (model.n, 2) or not np.all(np.isfinite(bounds)) or np.any(bounds[:, 0] >= bounds[:, 1]):
        raise DomainError("bounds must be finite (lo, hi) pairs, one per asset")
    if refine not in ("direct", "surface"):
        raise DomainError("refine must be 'direct' or 'surface'")
    evals = [0]

    def objective(p):
        evals[0] += 1
        return sim.value(np.atleast_1d(p), measure)

    per_dim = grid_points if model.n == 1 else 11
    axes = [np.linspace(lo, hi, per_dim) for lo, hi in bounds]
    mesh = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    vals = np.array([objective(p) for p in mesh])
    i = int(np.argmin(vals))
    start = mesh[i]
    steps = (bounds[:, 1] - bounds[:, 0]) / (per_dim - 1)

    if refine == "surface":
        npts = surface_points or (33 if model.n == 1 else 9)
        x, moved = _surface_refine(objective, start, bounds, window, npts, surface_iters)
        return MinimizationResult(x, float(objective(x)), moved, evals[0])

    if model.n == 1:
        lo, hi = bounds[0]
        if i in (0, per_dim - 1):
            return MinimizationResult(start.copy(), float(vals[i]), float(steps[0]), evals[0])
        a, b, c = mesh[i - 1, 0], mesh[i, 0], mesh[i + 1, 0]
        tol = xtol / max(abs(b), 1e-12)
        res = optimize.minimize_scalar(lambda x: objective([x]), bracket=(a, b, c), method="golden",
                                       tol=tol, options={"maxiter": maxiter})
        if not res.success:
            raise ConvergenceError(f"golden section did not converge: {res.message}",
                                   best=np.array([res.x]), achieved=float(c - a))
        x = float(np.clip(res.x, lo, hi))
        return MinimizationResult(np.array([x]), float(res.fun), xtol, evals[0])

    simplex = np.vstack([start] + [start + np.eye(model.n)[k] * steps[k] for k in range(model.n)])
    res = optimize.minimize(objective, start, method="Nelder-Mead",
                            options={"initial_simplex": simplex, "xatol": xtol, "fatol": 1e-10,
                                     "maxiter": maxiter * model.n})
    spread = float(np.ptp(res.final_simplex[0], axis=0).max())
    if not res.success:
        raise ConvergenceError(f"Nelder-Mead did not converge: {res.message}", best=res.x, achieved=spread)
    return MinimizationResult(np.clip(res.x, bounds[:, 0], bounds[:, 1]), float(res.fun), spread, evals[0])


def derivative_at_q_mc(model, cfg, h=0.05, measure="var", sim=None, q=None):
    """Central difference of the CRN risk estimate at phi = q (single asset)."""
    if h <= 0:
        raise DomainError("h must be positive")
    if model.n != 1:
        raise DomainError("derivative_at_q_mc is defined for a single asset")
    from .models import claim_quantile

    q = claim_quantile(model.claims, cfg.alpha) if q is None else q
    sim = sim or SurplusSimulation(model, cfg)
    up = sim.estimate([q + h], measure)
    down = sim.estimate([q - h], measure)
    diff = up - down
    return RiskEstimate(diff.value / (2 * h), diff.std_error / (2 * h), measure, cfg.alpha,
                        diff.batch_values / (2 * h))


# ----------------------------------------------------------------------------- quadrature oracle


def _positive_single_asset(model):
    if model.n != 1:
        raise DomainError("the quadrature oracle handles a single asset")
    asset = model.assets[0]
    if not asset.is_positive:
        raise DomainError("the quadrature oracle needs a positive asset")
    return asset, model.claims


def surplus_cdf_quad(model, phi, z):
    """P(S(phi) <= z) = E_X[P(L >= phi - (z + phi)/X)] by quadrature over the asset driver."""
    asset, claims = _positive_single_asset(model)
    phi = float(np.squeeze(phi))

    def prob(y):
        with np.errstate(divide="ignore"):
            return claims.agg_sf(phi - (z + phi) / asset.value(y))

    return asset.driver.expect(prob)


def var_quad(model, phi, alpha):
    """VaR of S(phi) by root search on the quadrature CDF."""
    _positive_single_asset(model)
    s = model.claims.scale
    lo, hi = -s, s
    while surplus_cdf_quad(model, phi, lo) > alpha:
        lo -= 2 * s
    while surplus_cdf_quad(model, phi, hi) < alpha:
        hi += 2 * s
    z = optimize.brentq(lambda t: surplus_cdf_quad(model, phi, t) - alpha, lo, hi, xtol=1e-13, rtol=1e-14)
    return -z


def es_quad(model, phi, alpha):
    """ES of S(phi) from the quadrature VaR and the claim partial moments."""
    asset, claims = _positive_single_asset(model)
    phi = float(np.squeeze(phi))
    z = -var_quad(model, phi, alpha)

    def inner(y):
        x = asset.value(y)
        with np.errstate(divide="ignore"):
            c = phi - (z + phi) / x
        sf = claims.agg_sf(c)
        m1 = np.array([claims.agg_partial_moment(ci, 1) for ci in np.atleast_1d(c)]).reshape(np.shape(c))
        return (x * phi - phi) * sf - x * m1

    return -asset.driver.expect(inner) / alpha
