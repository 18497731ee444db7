"""Distributions of tradeable assets and claim sizes, the market model and problem normalization.

Conventions: the surplus of an allocation ``phi`` is ``<X - 1, phi> - <X, L>`` with
``E[X] = 1`` and ``E[L] = 0``; :func:`normalize_problem` maps a raw problem onto this form.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate, optimize, special, stats

from . import _geometry
from .errors import DomainError, NumericError

_Z_RANGE = 12.0  # standard-normal mass outside [-12, 12] is ~1e-33


class VolKind(str, enum.Enum):
    NORMAL = "normal"
    LOGNORMAL = "lognormal"


class PositivityWarning(UserWarning):
    """An asset can take non-positive values, which the special-point theory excludes."""


def _normal_expect(g, epsrel=1e-13):
    # near-zero results (centered moments) trigger harmless roundoff warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(lambda z: g(z) * math.exp(-0.5 * z * z), -_Z_RANGE, _Z_RANGE,
                                epsabs=1e-15, epsrel=epsrel, limit=400)
    return val / math.sqrt(2.0 * math.pi)


# --------------------------------------------------------------------------- drivers


class Driver:
    """Standardized random variable Y (mean 0, variance 1) driving an asset.

    Every driver is a monotone function of a standard normal variate, which is how
    correlated drivers are sampled (Gaussian copula on the driver correlation).
    """

    name = "driver"
    mu3: float
    mu4: float
    lower_bound: float

    def from_normal(self, z):
        raise NotImplementedError

    def mgf_m1(self, t):
        """E[exp(tY)] - 1, ``inf`` where the moment generating function diverges."""
        raise NotImplementedError

    def mgf(self, t):
        return 1.0 + self.mgf_m1(t)

    def log_mgf(self, t):
        m1 = self.mgf_m1(t)
        return math.inf if math.isinf(m1) else math.log1p(m1)

    def expect(self, g):
        """E[g(Y)] for a vectorizable ``g``."""
        return _normal_expect(lambda z: g(self.from_normal(z)))

    def moment(self, k):
        return {0: 1.0, 1: 0.0, 2: 1.0, 3: self.mu3, 4: self.mu4}[k]

    def sample(self, rng, size):
        return self.from_normal(rng.standard_normal(size))


class StandardNormal(Driver):
    name = "standard_normal"
    mu3 = 0.0
    mu4 = 3.0
    lower_bound = -math.inf

    def from_normal(self, z):
        return np.asarray(z, dtype=float)

    def mgf_m1(self, t):
        return math.expm1(0.5 * t * t)

    def __repr__(self):
        return "StandardNormal()"


class ShiftedLognormal(Driver):
    """``sign * (W - E W) / sd(W)`` with ``W = exp(s Z)``, shape ``s`` chosen so the skew equals ``skew``.

    A negative ``skew`` negates the lognormal, giving a heavy left tail and a
    moment generating function that is finite for t >= 0 only.
    """

    name = "shifted_lognormal"

    def __init__(self, skew):
        skew = float(skew)
        if skew == 0.0 or not math.isfinite(skew):
            raise DomainError("ShiftedLognormal needs a finite non-zero skew; use StandardNormal for skew 0")
        self.skew = skew
        self.sign = 1.0 if skew > 0 else -1.0
        target = abs(skew)
        # (e + 3) * sqrt(e) = |skew| with e = exp(s^2) - 1
        hi = max(1.0, target ** (2.0 / 3.0))
        while (hi + 3.0) * math.sqrt(hi) < target:
            hi *= 2.0
        e = optimize.brentq(lambda e: (e + 3.0) * math.sqrt(e) - target, 0.0, hi,
                            xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
        self._e = e
        self.shape = math.sqrt(math.log1p(e))
        w = 1.0 + e
        self._half_var_m1 = math.expm1(0.5 * self.shape ** 2)  # E[W] - 1
        self._sd = math.sqrt(w * e)
        self.mu3 = skew
        self.mu4 = w ** 4 + 2 * w ** 3 + 3 * w ** 2 - 3.0
        self.lower_bound = -(1.0 + self._half_var_m1) / self._sd if self.sign > 0 else -math.inf

    def from_normal(self, z):
        z = np.asarray(z, dtype=float)
        return self.sign * (np.expm1(self.shape * z) - self._half_var_m1) / self._sd

    def mgf_m1(self, t):
        if t == 0.0:
            return 0.0
        if self.sign * t > 0.0:
            return math.inf
        return _normal_expect(lambda z: np.expm1(t * self.from_normal(z)))

    def __repr__(self):
        return f"ShiftedLognormal(skew={self.skew!r})"


class Empirical(Driver):
    """Driver given by samples; standardized in memory to exact sample mean 0 and variance 1."""

    name = "empirical"

    def __init__(self, samples):
        x = np.asarray(samples, dtype=float).ravel()
        if x.size < 10 or not np.all(np.isfinite(x)):
            raise DomainError("Empirical driver needs at least 10 finite samples")
        sd = x.std()
        if sd == 0.0:
            raise DomainError("Empirical driver samples are constant")
        y = np.sort((x - x.mean()) / sd)
        self.samples = y
        self.mu3 = float(np.mean(y ** 3))
        self.mu4 = float(np.mean(y ** 4))
        self.lower_bound = float(y[0])
        self._probs = (np.arange(y.size) + 0.5) / y.size

    def from_normal(self, z):
        return np.interp(special.ndtr(np.asarray(z, dtype=float)), self._probs, self.samples)

    def mgf_m1(self, t):
        return float(np.mean(np.expm1(t * self.samples)))

    def expect(self, g):
        return float(np.mean(g(self.samples)))

    def sample(self, rng, size):
        return rng.choice(self.samples, size=size)

    def __repr__(self):
        return f"Empirical(n={self.samples.size})"


def lognormal_skew_for_shape(sigma):
    """Skew of ``ln X`` implied when ``ln X`` is a negated lognormal with shape ``sigma``.

    This is the convention that ties sigma = 0.5 to a skew of about -1.75.
    """
    e = math.expm1(sigma * sigma)
    return -(e + 3.0) * math.sqrt(e)


def driver_from_skew(skew):
    return StandardNormal() if skew == 0 else ShiftedLognormal(skew)


# --------------------------------------------------------------------------- assets


@dataclass(frozen=True, eq=False)
class AssetFamily:
    """Unit-mean asset ``X = 1 + sigma*Y`` (normal) or ``X = exp(sigma*Y) / M(sigma)`` (lognormal)."""

    vol_kind: VolKind
    sigma: float
    driver: Driver = field(default_factory=StandardNormal)

    def __post_init__(self):
        object.__setattr__(self, "vol_kind", VolKind(self.vol_kind))
        if not (self.sigma >= 0.0 and math.isfinite(self.sigma)):
            raise DomainError(f"sigma must be a finite non-negative number, got {self.sigma}")
        if self.vol_kind is VolKind.LOGNORMAL and math.isinf(self._log_m(self.sigma)):
            raise DomainError(f"moment generating function of {self.driver!r} diverges at sigma={self.sigma}")

    def _log_m(self, t):
        return self.driver.log_mgf(t)

    @cached_property
    def _log_m_sigma(self):
        return self._log_m(self.sigma)

    def excess(self, y):
        """``X - 1`` as a function of driver values, computed without cancellation."""
        y = np.asarray(y, dtype=float)
        if self.vol_kind is VolKind.NORMAL:
            return self.sigma * y
        return np.expm1(self.sigma * y - self._log_m_sigma)

    def value(self, y):
        return 1.0 + self.excess(y)

    def raw_moment_m1(self, k):
        """E[X^k] - 1."""
        if k == 0:
            return 0.0
        if self.vol_kind is VolKind.NORMAL:
            return sum(math.comb(k, j) * self.sigma ** j * self.driver.moment(j) for j in range(1, k + 1))
        log_mk = self._log_m(k * self.sigma)
        if math.isinf(log_mk):
            raise DomainError(f"E[X^{k}] diverges for {self.driver!r} at sigma={self.sigma}")
        return math.expm1(log_mk - k * self._log_m_sigma)

    def central_moment(self, i):
        """E[(X - 1)^i]."""
        if i == 0:
            return 1.0
        if self.vol_kind is VolKind.NORMAL:
            return self.sigma ** i * self.driver.moment(i)
        return sum(math.comb(i, k) * (-1) ** (i - k) * self.raw_moment_m1(k) for k in range(1, i + 1))

    @property
    def variance(self):
        return self.central_moment(2)

    @property
    def is_positive(self):
        if self.vol_kind is VolKind.LOGNORMAL or self.sigma == 0.0:
            return True
        return 1.0 + self.sigma * self.driver.lower_bound > 0.0

    def inverse_mean(self):
        """E[1/X]; raises DomainError when it diverges."""
        if self.sigma == 0.0:
            return 1.0
        if self.vol_kind is VolKind.LOGNORMAL:
            log_minus = self._log_m(-self.sigma)
            if math.isinf(log_minus):
                raise DomainError(f"E[1/X] diverges for {self.driver!r}")
            return math.exp(self._log_m_sigma + log_minus)
        if not self.is_positive:
            raise DomainError("E[1/X] diverges: X = 1 + sigma*Y is not bounded away from 0")
        return self.driver.expect(lambda y: 1.0 / (1.0 + self.sigma * y))


def build_asset(vol_kind, sigma, driver=None):
    return AssetFamily(VolKind(vol_kind), float(sigma), driver if driver is not None else StandardNormal())


def exact_central_moments(asset, upto=4):
    """Central moments (m2, ..., m_upto) of ``asset``; lognormal ones use M(i*sigma)/M(sigma)^i."""
    if not 2 <= upto <= 4:
        raise DomainError("upto must be 2, 3 or 4")
    return tuple(asset.central_moment(i) for i in range(2, upto + 1))


def expanded_central_moments(sigma, mu3, mu4):
    """Fourth-order small-volatility expansion of the lognormal-asset central moments."""
    if sigma < 0:
        raise DomainError("sigma must be non-negative")
    s2, s3, s4 = sigma ** 2, sigma ** 3, sigma ** 4
    m2 = s2 + mu3 * s3 + (7.0 / 12.0 * mu4 - 1.25) * s4
    m3 = mu3 * s3 + 1.5 * (mu4 - 1.0) * s4
    m4 = mu4 * s4
    return m2, m3, m4


# --------------------------------------------------------------------------- claims


class ClaimModel:
    """Law of the claim vector L (centered), exposed mainly through the aggregate <1, L>."""

    n = 1
    gaussian_cov = None
    scale = 1.0  # rough standard deviation of the aggregate, used for brackets and truncation

    def agg_pdf_derivative(self, y, k):
        raise NotImplementedError

    def agg_pdf(self, y):
        return self.agg_pdf_derivative(y, 0)

    def agg_sf(self, y):
        raise NotImplementedError

    def agg_cdf(self, y):
        return 1.0 - self.agg_sf(y)

    def agg_partial_moment(self, y, k):
        """Integral of t^k times the aggregate density over (y, inf)."""
        raise NotImplementedError

    def joint_raw_moment(self, exponents):
        raise NotImplementedError(f"{type(self).__name__} does not provide joint moments")

    def sample(self, rng, size):
        raise NotImplementedError


class UnivariateClaim(ClaimModel):
    """Claim law given by density derivative evaluators ``[f, f', f'', ...]`` and a sampler.

    ``sf`` and ``partial_moment`` default to adaptive quadrature of ``f``.
    """

    def __init__(self, pdf_derivatives, sampler, sf=None, partial_moment=None, scale=1.0,
                 name="custom", check_mean=True):
        if not pdf_derivatives:
            raise DomainError("at least the density itself is required")
        self._derivs = list(pdf_derivatives)
        self._sampler = sampler
        self._sf = sf
        self._partial = partial_moment
        self.scale = float(scale)
        self.name = name
        if check_mean:
            mean = self._quad(lambda t: t * self._derivs[0](t), -math.inf, math.inf)
            if abs(mean) > 1e-6 * self.scale:
                raise DomainError(f"claim law must be centered (E[L] = {mean:.3g}); normalize first")

    @staticmethod
    def _quad(g, a, b):
        val, _ = integrate.quad(g, a, b, epsabs=1e-14, epsrel=1e-12, limit=400)
        return val

    @property
    def max_derivative(self):
        return len(self._derivs) - 1

    def agg_pdf_derivative(self, y, k):
        if k > self.max_derivative:
            raise DomainError(f"density derivative of order {k} not available (max {self.max_derivative})")
        return self._derivs[k](y)

    def agg_sf(self, y):
        if self._sf is not None:
            return self._sf(y)
        return self._quad(self._derivs[0], y, math.inf)

    def agg_partial_moment(self, y, k):
        if self._partial is not None:
            return self._partial(y, k)
        return self._quad(lambda t: t ** k * self._derivs[0](t), y, math.inf)

    def joint_raw_moment(self, exponents):
        (k,) = exponents
        return self._quad(lambda t: t ** k * self._derivs[0](t), -math.inf, math.inf)

    def sample(self, rng, size):
        return np.asarray(self._sampler(rng, size), dtype=float).reshape(size, 1)


class GaussianClaims(ClaimModel):
    """Centered multivariate normal claims with covariance ``cov`` (n >= 1)."""

    def __init__(self, cov):
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise DomainError("claim covariance must be a square matrix")
        if not np.allclose(cov, cov.T, atol=1e-12, rtol=0):
            raise DomainError("claim covariance must be symmetric")
        try:
            self._chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise DomainError("claim covariance must be positive definite") from exc
        self.cov = cov
        self.n = cov.shape[0]
        self.total_variance = float(cov.sum())
        if self.total_variance <= 0:
            raise DomainError("aggregate claim variance <1, cov 1> must be positive")
        self.scale = math.sqrt(self.total_variance)
        self._inv = np.linalg.inv(cov)
        self._norm = 1.0 / math.sqrt((2 * math.pi) ** self.n * np.linalg.det(cov))

    @property
    def gaussian_cov(self):
        return self.cov

    def agg_pdf_derivative(self, y, k):
        s = self.scale
        x = np.asarray(y, dtype=float) / s
        he = special.eval_hermitenorm(k, x)
        return (-1) ** k * he * np.exp(-0.5 * x * x) / (math.sqrt(2 * math.pi) * s ** (k + 1))

    def agg_sf(self, y):
        return special.ndtr(-np.asarray(y, dtype=float) / self.scale)

    def agg_partial_moment(self, y, k):
        if k == 0:
            return self.agg_sf(y)
        f = self.agg_pdf(y)
        s2 = self.total_variance
        if k == 1:
            return s2 * f
        return s2 * (y ** (k - 1) * f + (k - 1) * self.agg_partial_moment(y, k - 2))

    def pdf(self, ell):
        ell = np.asarray(ell, dtype=float)
        quad = np.einsum("...i,ij,...j->...", ell, self._inv, ell)
        return self._norm * np.exp(-0.5 * quad)

    def grad_pdf(self, ell):
        ell = np.asarray(ell, dtype=float)
        return -(ell @ self._inv) * self.pdf(ell)[..., None]

    def joint_raw_moment(self, exponents):
        idx = [i for i, a in enumerate(exponents) for _ in range(int(a))]
        return _isserlis(idx, self.cov)

    def sample(self, rng, size):
        return rng.standard_normal((size, self.n)) @ self._chol.T

    def as_density_claims(self):
        """Same law, seen only through its density and gradient (forces the quadrature paths)."""
        return DensityClaims(self.pdf, self.grad_pdf, self.sample, self.n, scale=self.scale,
                             coord_scales=np.sqrt(np.diag(self.cov)))


def _isserlis(idx, cov):
    if not idx:
        return 1.0
    if len(idx) % 2:
        return 0.0
    first, rest = idx[0], idx[1:]
    return sum(cov[first, rest[j]] * _isserlis(rest[:j] + rest[j + 1:], cov) for j in range(len(rest)))


def gaussian_claim(sigma):
    """Univariate centered normal claim size with standard deviation ``sigma``."""
    return GaussianClaims([[float(sigma) ** 2]])


class DensityClaims(ClaimModel):
    """Multivariate claims known through a joint density ``pdf(ell)``, its gradient and a sampler.

    Aggregate quantities are obtained by adaptive quadrature over hyperplanes
    orthogonal to the diagonal, truncated at 10 ``scale`` units.
    """

    def __init__(self, pdf, grad_pdf, sampler, n, scale=1.0, coord_scales=None):
        if n < 1:
            raise DomainError("dimension must be positive")
        self.pdf = pdf
        self.grad_pdf = grad_pdf
        self._sampler = sampler
        self.n = int(n)
        self.scale = float(scale)
        self.coord_scales = (np.full(self.n, self.scale) if coord_scales is None
                             else np.asarray(coord_scales, dtype=float))
        self.rotation = _geometry.householder_rotation(self.n) if self.n > 1 else np.ones((1, 1))

    def _hyperplane(self, y, integrand_fn):
        """``integrand_fn(ell, lam_bar)`` integrated over the hyperplane <1, ell> = y."""
        n, d = self.n, self.rotation
        lam1 = y / math.sqrt(n)

        def func(lam_bar):
            ell = d @ np.concatenate(([lam1], lam_bar))
            return integrand_fn(ell, lam_bar)

        value, err = _geometry.adaptive_box_integral(func, np.full(n - 1, 10.0 * self.scale))
        # far-tail values are tiny and only meaningful in absolute terms
        _geometry.check_accuracy(value, err, what="hyperplane quadrature", floor=1e-12 / self.scale ** 2)
        return value

    def agg_pdf_derivative(self, y, k):
        n = self.n
        if k == 0:
            return float(self._hyperplane(y, lambda ell, lb: np.atleast_1d(self.pdf(ell)))[0]) / math.sqrt(n)
        if k == 1:
            val = self._hyperplane(y, lambda ell, lb: np.atleast_1d(np.sum(self.grad_pdf(ell))))
            return float(val[0]) / n ** 1.5
        raise DomainError("DensityClaims provides aggregate density derivatives up to order 1")

    def agg_partial_moment(self, y, k):
        upper = 12.0 * self.scale
        if y >= upper:
            return 0.0
        val, err = integrate.quad(lambda t: t ** k * self.agg_pdf(t), y, upper, epsabs=1e-13,
                                  epsrel=1e-10, limit=200)
        return val

    def agg_sf(self, y):
        return self.agg_partial_moment(y, 0)

    def sample(self, rng, size):
        return np.asarray(self._sampler(rng, size), dtype=float).reshape(size, self.n)


def claim_quantile(claims, alpha):
    """q with P(<1, L> <= q) = 1 - alpha, by bracketed root search on the aggregate tail function."""
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    s = claims.scale
    lo, hi = -s, s
    for _ in range(200):
        if claims.agg_sf(lo) > alpha:
            break
        lo -= 2 * s
    for _ in range(200):
        if claims.agg_sf(hi) < alpha:
            break
        hi += 2 * s
    f_lo, f_hi = claims.agg_sf(lo) - alpha, claims.agg_sf(hi) - alpha
    if not (f_lo > 0.0 > f_hi):
        raise NumericError("aggregate claim CDF is not strictly increasing across the bracket")
    return optimize.brentq(lambda y: claims.agg_sf(y) - alpha, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500)


def claim_expected_shortfall(claims, alpha):
    """ES_alpha[-<1, L>] = E[<1, L> ; <1, L> > q] / alpha."""
    q = claim_quantile(claims, alpha)
    return float(claims.agg_partial_moment(q, 1)) / alpha


# --------------------------------------------------------------------------- market


def _gauss_hermite(n_dim):
    per_dim = {1: 80, 2: 48, 3: 24}.get(n_dim, 12)
    x, w = np.polynomial.hermite_e.hermegauss(per_dim)
    w = w / w.sum()
    grids = np.meshgrid(*([x] * n_dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wts = np.ones(len(pts))
    for g in np.meshgrid(*([w] * n_dim), indexing="ij"):
        wts = wts * g.ravel()
    return pts, wts


@dataclass(frozen=True, eq=False)
class MarketModel:
    """Tradeable assets, the correlation of their driver normals, and the claim law.

    Only the asset covariance enters the second-order theory; the driver
    correlation is the Gaussian-copula parameter used to realize it.
    """

    assets: tuple
    claims: ClaimModel
    asset_corr: np.ndarray = None
    allow_nonpositive: bool = False

    def __post_init__(self):
        assets = tuple(self.assets)
        object.__setattr__(self, "assets", assets)
        n = len(assets)
        if n != self.claims.n:
            raise DomainError(f"{n} assets but {self.claims.n} claim dimensions")
        corr = np.eye(n) if self.asset_corr is None else np.atleast_2d(np.asarray(self.asset_corr, dtype=float))
        if corr.shape != (n, n) or not np.allclose(corr, corr.T, atol=1e-12) \
                or not np.allclose(np.diag(corr), 1.0, atol=1e-12):
            raise DomainError("asset_corr must be a symmetric correlation matrix matching the assets")
        if np.linalg.eigvalsh(corr).min() < -1e-12:
            raise DomainError("asset_corr must be positive semi-definite")
        object.__setattr__(self, "asset_corr", corr)
        if not self.allow_nonpositive:
            for i, a in enumerate(assets):
                if not a.is_positive:
                    warnings.warn(f"asset {i} can become non-positive (sigma={a.sigma}, {a.driver!r})",
                                  PositivityWarning, stacklevel=3)

    @property
    def n(self):
        return len(self.assets)

    @property
    def independent(self):
        return np.array_equal(self.asset_corr, np.eye(self.n))

    @cached_property
    def corr_factor(self):
        vals, vecs = np.linalg.eigh(self.asset_corr)
        return vecs * np.sqrt(np.clip(vals, 0.0, None))

    @cached_property
    def _quadrature(self):
        pts, wts = _gauss_hermite(self.n)
        z = pts @ self.corr_factor.T
        u = np.stack([a.excess(a.driver.from_normal(z[:, i])) for i, a in enumerate(self.assets)], axis=1)
        y = np.stack([a.driver.from_normal(z[:, i]) for i, a in enumerate(self.assets)], axis=1)
        return u, y, wts

    def asset_comoment(self, exponents):
        """E[prod_i (X_i - 1)^a_i]."""
        exponents = tuple(int(a) for a in exponents)
        if self.independent:
            return math.prod(a.central_moment(k) for a, k in zip(self.assets, exponents))
        active = [i for i, k in enumerate(exponents) if k]
        if len(active) == 1:
            return self.assets[active[0]].central_moment(exponents[active[0]])
        u, _, w = self._quadrature
        return float(np.sum(w * np.prod(u ** np.asarray(exponents), axis=1)))

    @cached_property
    def covariance(self):
        """Cov(X), exact on the diagonal; correlated off-diagonal terms by Gauss-Hermite quadrature."""
        n = self.n
        cov = np.zeros((n, n))
        for i in range(n):
            for j in range(i, n):
                e = [0] * n
                e[i] += 1
                e[j] += 1
                cov[i, j] = cov[j, i] = self.asset_comoment(e)
        return cov

    @cached_property
    def leading_covariance(self):
        """sigma_i sigma_j E[Y_i Y_j], the covariance to leading order in the volatilities."""
        sig = np.array([a.sigma for a in self.assets])
        if self.independent:
            corr_y = np.eye(self.n)
        else:
            _, y, w = self._quadrature
            corr_y = np.einsum("k,ki,kj->ij", w, y, y)
            np.fill_diagonal(corr_y, 1.0)
        return np.outer(sig, sig) * corr_y

    def sample_assets(self, rng, size):
        """Return ``X - 1`` draws of shape (size, n)."""
        z = rng.standard_normal((size, self.n))
        if not self.independent:
            z = z @ self.corr_factor.T
        out = np.empty((size, self.n))
        for i, a in enumerate(self.assets):
            out[:, i] = a.excess(a.driver.from_normal(z[:, i]))
        return out


def univariate_model(asset, claims, allow_nonpositive=False):
    return MarketModel((asset,), claims, allow_nonpositive=allow_nonpositive)


# --------------------------------------------------------------------------- normalization


@dataclass(frozen=True)
class NormalizationReport:
    """Affine change of variables onto the normalized problem E[X] = 1, E[L] = 0, A0 = 0."""

    tilde_x_scale: np.ndarray
    claim_shift: np.ndarray
    cash_offset: float

    def map_phi(self, phi):
        return self.tilde_x_scale * (np.asarray(phi, dtype=float) - self.claim_shift)

    def unmap_phi(self, phi_tilde):
        return np.asarray(phi_tilde, dtype=float) / self.tilde_x_scale + self.claim_shift

    def map_assets(self, x):
        return np.asarray(x, dtype=float) / self.tilde_x_scale

    def map_claims(self, ell):
        return self.tilde_x_scale * (np.asarray(ell, dtype=float) - self.claim_shift)

    def risk_from_normalized(self, rho_tilde):
        """Risk of the raw surplus; cash invariance moves the risk opposite to the mean surplus."""
        return rho_tilde - self.cash_offset

    def normalized_risk(self, rho):
        return rho + self.cash_offset


def normalize_problem(raw_assets_mean, raw_claims_mean, a0=0.0):
    x = np.atleast_1d(np.asarray(raw_assets_mean, dtype=float))
    ell = np.atleast_1d(np.asarray(raw_claims_mean, dtype=float))
    if x.shape != ell.shape:
        raise DomainError("asset and claim mean vectors must have the same length")
    if np.any(x <= 0):
        raise DomainError("asset means must be positive")
    return NormalizationReport(x, ell, float(a0 - x @ ell))
