"""Small-volatility expansions of VaR and ES of the surplus, optimal allocations and series baselines."""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DegenerateError, DomainError
from .kterms import k_bundle, k_univariate
from .models import VolKind, claim_expected_shortfall, claim_quantile, exact_central_moments


@dataclass(frozen=True)
class ExpansionResult:
    """Expanded risk value; ``value = -(z0 + z2 + z3 + z4)`` (the first-order term vanishes)."""

    value: float
    terms: tuple
    order: int
    vol_kind: VolKind | None
    measure: str
    sigma: float | None = None


@dataclass(frozen=True)
class OptimalAllocation:
    phi_star: np.ndarray
    total: float
    method: str
    clipped: bool = False
    raw: np.ndarray | None = None


def _allocation(raw, method):
    raw = np.atleast_1d(np.asarray(raw, dtype=float))
    clipped = bool(np.any(raw < 0))
    phi = np.clip(raw, 0.0, None) if clipped else raw.copy()
    if clipped:
        warnings.warn(f"{method}: negative units clipped to 0 (no leverage)", stacklevel=3)
    return OptimalAllocation(phi, float(phi.sum()), method, clipped, raw)


def _aggregate_at_q(claims, alpha):
    q = claim_quantile(claims, alpha)
    f = float(claims.agg_pdf(q))
    if not f > 0.0:
        raise DomainError(f"aggregate claim density vanishes at q={q}")
    return q, f


def _sigma_matrix(model, covariance):
    if covariance == "exact":
        return model.covariance
    if covariance == "leading":
        return model.leading_covariance
    raise DomainError("covariance must be 'exact' or 'leading'")


# --------------------------------------------------------------------------- multivariate, 2nd order


def var2_multi(model, phi, alpha, covariance="exact"):
    """Second-order VaR of the surplus for a general number of assets."""
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    sigma = _sigma_matrix(model, covariance)
    q, f = _aggregate_at_q(model.claims, alpha)
    b = k_bundle(model.claims, sigma, q, values=False)
    sphi = sigma @ phi
    bracket = (phi @ sphi) * b.f_agg_d1 + 2.0 * (sphi @ b.kvec_d2) - b.kL_d2
    z2 = bracket / (2.0 * f)
    return ExpansionResult(q - z2, (-q, z2, 0.0, 0.0), 2, None, "var")


def es2_multi(model, phi, alpha, covariance="exact"):
    """Second-order ES of the surplus for a general number of assets."""
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    sigma = _sigma_matrix(model, covariance)
    q, f = _aggregate_at_q(model.claims, alpha)
    es0 = claim_expected_shortfall(model.claims, alpha)
    b = k_bundle(model.claims, sigma, q, values=False)
    sphi = sigma @ phi
    bracket = (phi @ sphi) * f + 2.0 * (sphi @ b.kvec_d1) - b.kL_d1
    z2 = -bracket / (2.0 * alpha)
    return ExpansionResult(es0 - z2, (-es0, z2, 0.0, 0.0), 2, None, "es")


def phi_star_var2_multi(model, alpha):
    """Minimizer ``-K''(q) / f'(q)`` of the second-order VaR; it does not depend on the assets."""
    claims = model.claims
    q, f = _aggregate_at_q(claims, alpha)
    b = k_bundle(claims, np.eye(claims.n), q, values=False)
    if abs(b.f_agg_d1) <= 1e-12 * f / claims.scale:
        raise DegenerateError("f'(q) = 0: the second-order VaR has no interior minimum; "
                              "use phi_star_var3_1d for a third-order allocation")
    return _allocation(-b.kvec_d2 / b.f_agg_d1, "VaR2")


def phi_star_es2_multi(model, alpha):
    """Minimizer ``-K'(q) / f(q)`` of the second-order ES; its components sum to q."""
    claims = model.claims
    q, f = _aggregate_at_q(claims, alpha)
    b = k_bundle(claims, np.eye(claims.n), q, values=False)
    method = "SpecialPointES" if claims.n == 1 else "ES2"
    return _allocation(-b.kvec_d1 / f, method)


def optimal_total(claims, alpha, measure="var"):
    """Total optimal amount: ``q + f/f'`` for VaR and ``q`` for ES."""
    q, f = _aggregate_at_q(claims, alpha)
    if measure == "es":
        return q
    f1 = float(claims.agg_pdf_derivative(q, 1))
    if f1 == 0.0:
        raise DegenerateError("f'(q) = 0")
    return q + f / f1


def covariance_allocation(model, alpha, measure="var"):
    """Split the total optimal amount proportionally to ``Sigma^L 1`` (Gaussian claims only)."""
    cov = model.claims.gaussian_cov
    if cov is None:
        raise DomainError("covariance allocation needs multivariate Gaussian claims")
    weights = cov @ np.ones(model.n)
    total = weights.sum()
    if total == 0.0:
        raise DomainError("<1, Sigma^L 1> = 0")
    return _allocation(weights / total * optimal_total(model.claims, alpha, measure), "CovarianceAlloc")


# --------------------------------------------------------------------------- univariate, up to 4th order


class _Expr:
    """Linear combination of ``(phi - y)^k * f^(m)(y)`` as a function of y."""

    def __init__(self, terms=None):
        self.terms = dict(terms or {})

    @classmethod
    def atom(cls, k, m, c=1.0):
        return cls({(k, m): c})

    def d(self):
        out = {}
        for (k, m), c in self.terms.items():
            if k:
                out[(k - 1, m)] = out.get((k - 1, m), 0.0) - k * c
            out[(k, m + 1)] = out.get((k, m + 1), 0.0) + c
        return _Expr(out)

    def __add__(self, other):
        out = dict(self.terms)
        for key, c in other.terms.items():
            out[key] = out.get(key, 0.0) + c
        return _Expr(out)

    def __rmul__(self, c):
        return _Expr({key: c * v for key, v in self.terms.items()})

    def at(self, psi, fd):
        return sum(c * psi ** k * fd(m) for (k, m), c in self.terms.items() if c)


def _expansion_params(asset, vol_kind):
    """(sigma, mu3, mu4) of the requested volatility parametrization of ``asset``."""
    vol_kind = asset.vol_kind if vol_kind is None else VolKind(vol_kind)
    if vol_kind is asset.vol_kind:
        return vol_kind, asset.sigma, asset.driver.mu3, asset.driver.mu4
    if vol_kind is VolKind.NORMAL:
        m2, m3, m4 = exact_central_moments(asset, 4)
        if m2 == 0.0:
            return vol_kind, 0.0, 0.0, 3.0
        return vol_kind, math.sqrt(m2), m3 / m2 ** 1.5, m4 / m2 ** 2
    if asset.sigma == 0.0:
        return vol_kind, 0.0, 0.0, 3.0
    raise DomainError("a log-normal volatility expansion needs a log-normal asset")


def _univariate(model):
    if model.n != 1:
        raise DomainError("this expansion is defined for a single asset")
    return model.assets[0], model.claims


def _density_derivs(claims, q):
    cache = {}

    def fd(m):
        if m not in cache:
            try:
                cache[m] = float(claims.agg_pdf_derivative(q, m))
            except (DomainError, NotImplementedError) as exc:
                raise DomainError(f"expansion needs the claim density derivative of order {m}") from exc
        return cache[m]
    return fd


def _a_squared_over_f(psi, fd, derivative):
    a_expr = _Expr.atom(2, 0).d()
    a = a_expr.at(psi, fd)
    if not derivative:
        return a * a / fd(0)
    a1 = a_expr.d().at(psi, fd)
    return 2.0 * a * a1 / fd(0) - a * a * fd(1) / fd(0) ** 2


def _brackets(vol_kind, mu3, mu4, psi, fd, order, derivative):
    """Order-2..4 brackets evaluated at q, with (VaR) or without (ES) the outer derivative."""
    p2f = _Expr.atom(2, 0)
    out = [0.5 * (p2f.d() if derivative else p2f).at(psi, fd), 0.0, 0.0]
    if order >= 3:
        if vol_kind is VolKind.LOGNORMAL:
            e3 = _Expr.atom(3, 1)
        else:
            e3 = _Expr.atom(3, 0).d()
        out[1] = mu3 / 6.0 * (e3.d() if derivative else e3).at(psi, fd)
    if order >= 4:
        if vol_kind is VolKind.LOGNORMAL:
            lin = mu4 * _Expr.atom(4, 1).d() + (2 * mu4 - 6) * _Expr.atom(3, 1) + (mu4 + 3) * _Expr.atom(2, 0)
        else:
            lin = mu4 * _Expr.atom(4, 0).d().d()
        val = (lin.d() if derivative else lin).at(psi, fd) - 3.0 * _a_squared_over_f(psi, fd, derivative)
        out[2] = val / 24.0
    return out


def var_expand_1d(model, phi, alpha, order=2, vol_kind=None):
    """VaR of the single-asset surplus expanded to ``order`` in the (log-)normal volatility."""
    if order not in (2, 3, 4):
        raise DomainError("order must be 2, 3 or 4")
    asset, claims = _univariate(model)
    kind, sigma, mu3, mu4 = _expansion_params(asset, vol_kind)
    q, f = _aggregate_at_q(claims, alpha)
    fd = _density_derivs(claims, q)
    psi = float(np.squeeze(phi)) - q
    b = _brackets(kind, mu3, mu4, psi, fd, order, derivative=True)
    z = [sigma ** (i + 2) * b[i] / f for i in range(3)]
    value = q - sum(z)
    return ExpansionResult(value, (-q, z[0], z[1], z[2]), order, kind, "var", sigma)


def es_expand_1d(model, phi, alpha, order=2, vol_kind=None):
    """ES of the single-asset surplus expanded to ``order`` in the (log-)normal volatility."""
    if order not in (2, 3, 4):
        raise DomainError("order must be 2, 3 or 4")
    asset, claims = _univariate(model)
    kind, sigma, mu3, mu4 = _expansion_params(asset, vol_kind)
    q, f = _aggregate_at_q(claims, alpha)
    es0 = claim_expected_shortfall(claims, alpha)
    fd = _density_derivs(claims, q)
    psi = float(np.squeeze(phi)) - q
    b = _brackets(kind, mu3, mu4, psi, fd, order, derivative=False)
    z = [-sigma ** (i + 2) * b[i] / alpha for i in range(3)]
    value = es0 - sum(z)
    return ExpansionResult(value, (-es0, z[0], z[1], z[2]), order, kind, "es", sigma)


def phi_star_var3_1d(model, alpha, sigma=None):
    """Local minimizer of the third-order VaR expansion in the log-normal volatility.

    The stationarity condition is the quadratic ``a psi^2 + b psi + c = 0`` in
    ``psi = phi - q``; the root where the VaR curve is convex is
    ``psi = (-b + sqrt(b^2 - 4ac)) / (2a)`` for either sign of the skew.
    """
    asset, claims = _univariate(model)
    if asset.vol_kind is not VolKind.LOGNORMAL and asset.driver.mu3 != 0.0:
        raise DomainError("the third-order minimizer refers to the log-normal volatility expansion")
    sig = asset.sigma if sigma is None else float(sigma)
    mu3 = asset.driver.mu3
    q, f = _aggregate_at_q(claims, alpha)
    f1 = float(claims.agg_pdf_derivative(q, 1))
    f2 = float(claims.agg_pdf_derivative(q, 2)) if mu3 != 0.0 else 0.0

    def fallback():
        if f1 == 0.0:
            raise DegenerateError("f'(q) = 0 and the third-order term vanishes: no interior minimum")
        return _allocation([q + f / f1], "VaR3_1d")

    if sig == 0.0 or mu3 == 0.0:
        return fallback()
    a = -sig ** 3 * mu3 * f2 / (2.0 * f)
    b = (mu3 * sig - 1.0) * sig ** 2 * f1 / f
    c = sig ** 2
    if a == 0.0:
        if b == 0.0:
            raise DegenerateError("degenerate third-order expansion")
        return _allocation([q - c / b], "VaR3_1d")
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        warnings.warn("third-order VaR has no local minimum for these (sigma, mu3); "
                      "returning the zero-skew allocation", stacklevel=2)
        return fallback()
    psi = (-b + math.sqrt(disc)) / (2.0 * a)
    return _allocation([q + psi], "VaR3_1d")


def special_point_derivative(asset, measure="var"):
    """Slope of phi -> rho[S(phi)] at phi = q: ``1 - 1/E[1/X]`` for VaR, 0 for ES."""
    if measure == "es":
        return 0.0
    return 1.0 - 1.0 / asset.inverse_mean()


# --------------------------------------------------------------------------- moments and series


def surplus_moments(model, phi, upto=4):
    """Mean and central moments 2..upto of ``S = <X - 1, phi> - <X, L>``.

    ``S`` is a linear form in the atoms ``U_i phi_i``, ``-U_i L_i`` and ``-L_i``
    (``U = X - 1``); powers are expanded and moments factorize by the
    independence of X and L.
    """
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    n = model.n
    raw = [1.0]
    for k in range(1, upto + 1):
        total = 0.0
        for combo in itertools.combinations_with_replacement(range(3 * n), k):
            counts = np.bincount(combo, minlength=3 * n)
            a, b, c = counts[:n], counts[n:2 * n], counts[2 * n:]
            coef = math.factorial(k) / np.prod([math.factorial(int(x)) for x in counts])
            coef *= np.prod(phi ** a) * (-1) ** int(b.sum() + c.sum())
            ex = model.asset_comoment(tuple(int(x) for x in a + b))
            if ex == 0.0:
                continue
            el = model.claims.joint_raw_moment(tuple(int(x) for x in b + c))
            total += coef * ex * el
        raw.append(float(total))
    mean = raw[1]
    central = []
    for k in range(2, upto + 1):
        central.append(sum(math.comb(k, j) * raw[j] * (-mean) ** (k - j) for j in range(k + 1)))
    return (mean, *central)


def cornish_fisher_var(model, phi, alpha):
    """VaR from the fourth-order Cornish-Fisher quantile of S(phi)."""
    mean, m2, m3, m4 = surplus_moments(model, phi, 4)
    sd = math.sqrt(m2)
    g1 = m3 / sd ** 3
    g2 = m4 / m2 ** 2 - 3.0
    u = special.ndtri(alpha)
    w = u + (u * u - 1) * g1 / 6 + (u ** 3 - 3 * u) * g2 / 24 - (2 * u ** 3 - 5 * u) * g1 ** 2 / 36
    return -(mean + sd * w)


def gram_charlier_cdf(model, phi, z, truncation=4):
    """Truncated series for P(S(phi) <= z) in the central moments of the asset."""
    if truncation > 4 or truncation < 0:
        raise DomainError("truncation must be at most 4")
    asset, claims = _univariate(model)
    phi = float(np.squeeze(phi))
    value = float(claims.agg_sf(-z))
    if truncation < 2:
        return value
    moments = exact_central_moments(asset, max(truncation, 2))
    for i in range(2, truncation + 1):
        value += moments[i - 2] / math.factorial(i) * k_univariate(claims, phi, -z, i, deriv=i)
    return value
