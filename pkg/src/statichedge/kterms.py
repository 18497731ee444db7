"""Claim-side tail functionals.

For the aggregate claim ``T = <1, L>`` these are

* ``K(y) = E[L ; T > y]`` (vector),
* ``K[L](y) = E[<L, Sigma L> ; T > y]`` with ``Sigma`` the asset covariance,
* the univariate terms ``K_j(y) = int_y^inf (phi - l)^j f(l) dl``.

Their derivatives are expressed through integrals over the hyperplane ``T = y``
written in coordinates rotated so that the first axis is the diagonal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _geometry
from .errors import DomainError, NumericError
from .models import GaussianClaims


@dataclass(frozen=True)
class RotationMatrix:
    n: int
    d: np.ndarray

    @property
    def one_perp(self):
        return self.d[:, 1:]


def rotation_matrix(n):
    """Orthogonal matrix with unit determinant whose first column is ``n**-0.5 * ones``."""
    if int(n) != n or n < 2:
        raise DomainError("rotation_matrix needs an integer n >= 2")
    n = int(n)
    return RotationMatrix(n, _geometry.householder_rotation(n))


@dataclass(frozen=True)
class KTermBundle:
    """K-terms and their building blocks at a single point ``y``.

    ``kvec`` and ``kL`` are ``None`` when only derivatives were requested for a
    claim law without closed forms.
    """

    y: float
    kvec: np.ndarray | None
    kvec_d1: np.ndarray
    kvec_d2: np.ndarray
    kL: float | None
    kL_d1: float
    kL_d2: float
    h: np.ndarray
    h_d1: np.ndarray
    h2: float
    h2_d1: float
    f_agg: float
    f_agg_d1: float


def _check_sigma(sigma_x, n):
    s = np.atleast_2d(np.asarray(sigma_x, dtype=float))
    if s.shape != (n, n):
        raise DomainError(f"asset covariance must be {n}x{n}")
    if not np.allclose(s, s.T, atol=1e-12):
        raise DomainError("asset covariance must be symmetric")
    if np.linalg.eigvalsh(s).min() < -1e-12 * max(1.0, np.abs(s).max()):
        raise DomainError("asset covariance must be positive semi-definite")
    return s


def _assemble(y, n, sigma, perp, f, f1, h, h1, h2, h21, kvec=None, kL=None):
    """Turn hyperplane integrals into K-derivatives (first and second order)."""
    ones = np.ones(n)
    s11 = ones @ sigma @ ones
    c = perp.T @ sigma @ ones  # 1perp' Sigma 1
    kvec_d1 = -(y / n) * f * ones - perp @ h
    kvec_d2 = -(f + y * f1) / n * ones - perp @ h1
    kL_d1 = -(y * y / n ** 2) * s11 * f - (2 * y / n) * (c @ h) - h2
    kL_d2 = -(y / n ** 2) * s11 * (2 * f + y * f1) - (2.0 / n) * (c @ (h + y * h1)) - h21
    return KTermBundle(float(y), kvec, kvec_d1, kvec_d2, kL, float(kL_d1), float(kL_d2),
                       h, h1, float(h2), float(h21), float(f), float(f1))


def _gaussian_hyperplane(claims, sigma, y, rot):
    n = claims.n
    d, perp = rot.d, rot.d[:, 1:]
    cov_l = claims.cov
    f = float(claims.agg_pdf(y))
    f1 = float(claims.agg_pdf_derivative(y, 1))
    if n == 1:
        return f, f1, np.zeros(0), np.zeros(0), 0.0, 0.0
    c = d.T @ cov_l @ d
    c11 = c[0, 0]
    beta = c[1:, 0] / c11
    ccond = c[1:, 1:] - np.outer(c[1:, 0], c[0, 1:]) / c11
    a = perp.T @ sigma @ perp
    mu = beta * y / math.sqrt(n)
    h = f * mu
    h1 = beta / math.sqrt(n) * (f + y * f1)
    second = mu @ a @ mu + np.trace(a @ ccond)
    h2 = f * second
    h21 = f1 * second + f * 2.0 * (mu @ a @ beta) / math.sqrt(n)
    return f, f1, h, h1, h2, h21


def _gaussian_values(claims, sigma, y):
    cov_l = claims.cov
    ones = np.ones(claims.n)
    s2 = claims.total_variance
    f = float(claims.agg_pdf(y))
    sf = float(claims.agg_sf(y))
    b = cov_l @ ones / s2
    kvec = cov_l @ ones * f
    resid = cov_l - s2 * np.outer(b, b)
    kL = (b @ sigma @ b) * s2 * (y * f + sf) + np.trace(sigma @ resid) * sf
    return kvec, float(kL)


def _density_hyperplane(claims, sigma, y, rot, target):
    """Adaptive quadrature of all hyperplane integrands at once."""
    n = claims.n
    d, perp = rot.d, rot.d[:, 1:]
    a = perp.T @ sigma @ perp
    lam1 = y / math.sqrt(n)

    def integrand(lam_bar):
        ell = d @ np.concatenate(([lam1], lam_bar))
        g = float(claims.pdf(ell))
        dg = float(np.sum(claims.grad_pdf(ell)))
        quad = lam_bar @ a @ lam_bar
        return np.concatenate(([g], lam_bar * g, [quad * g, dg], lam_bar * dg, [quad * dg]))

    bounds = np.full(n - 1, 10.0 * claims.scale)
    val, err = _geometry.adaptive_box_integral(integrand, bounds, epsrel=min(1e-10, target / 10))
    _geometry.check_accuracy(val, err, target=target, what="hyperplane integrals")
    m = n - 1
    g0, gl, gq = val[0], val[1:1 + m], val[1 + m]
    d0, dl, dq = val[2 + m], val[3 + m:3 + 2 * m], val[3 + 2 * m]
    rn = math.sqrt(n)
    # d/dy g(y/sqrt(n), .) = <1, grad f> / n
    return g0 / rn, d0 / n ** 1.5, gl / rn, dl / n ** 1.5, gq / rn, dq / n ** 1.5


def k_bundle(claims, sigma_x, y, rotation=None, values=True, target=1e-8):
    """Evaluate the K-terms and their first two derivatives at ``y``.

    Gaussian claims use closed forms; claims exposing ``pdf``/``grad_pdf`` use
    adaptive quadrature over the rotated hyperplane (relative target ``target``,
    NumericError if missed). Univariate claims use the aggregate law directly.
    """
    n = claims.n
    sigma = _check_sigma(sigma_x, n)
    y = float(y)
    if n == 1:
        f = float(claims.agg_pdf(y))
        f1 = float(claims.agg_pdf_derivative(y, 1))
        kvec = kL = None
        if values:
            m1 = float(claims.agg_partial_moment(y, 1))
            kvec = np.array([m1])
            kL = float(sigma[0, 0] * claims.agg_partial_moment(y, 2))
        return _assemble(y, 1, sigma, np.zeros((1, 0)), f, f1, np.zeros(0), np.zeros(0), 0.0, 0.0, kvec, kL)
    rot = rotation if rotation is not None else rotation_matrix(n)
    if rot.n != n:
        raise DomainError("rotation dimension does not match the claims")
    if isinstance(claims, GaussianClaims):
        parts = _gaussian_hyperplane(claims, sigma, y, rot)
        kvec, kL = _gaussian_values(claims, sigma, y) if values else (None, None)
    elif hasattr(claims, "pdf") and hasattr(claims, "grad_pdf"):
        parts = _density_hyperplane(claims, sigma, y, rot, target)
        kvec, kL = direct_k_values(claims, sigma, y) if values else (None, None)
    else:
        raise DomainError(f"{type(claims).__name__} exposes neither closed forms nor a joint density")
    f, f1, h, h1, h2, h21 = parts
    return _assemble(y, n, sigma, rot.one_perp, f, f1, h, h1, h2, h21, kvec, kL)


def k_univariate(claims, phi, y, j, deriv=0):
    """``d^deriv/dy^deriv`` of ``K_j(y) = int_y^inf (phi - l)^j f(l) dl`` for a univariate claim law.

    Derivatives use ``K_j' = -(phi - y)^j f(y)`` and the Leibniz rule.
    """
    if claims.n != 1:
        raise DomainError("k_univariate needs a univariate claim model")
    if j < 0 or deriv < 0 or deriv > 4:
        raise DomainError("need j >= 0 and 0 <= deriv <= 4")
    if deriv == 0:
        return float(sum(math.comb(j, k) * phi ** (j - k) * (-1) ** k * claims.agg_partial_moment(y, k)
                         for k in range(j + 1)))
    m = deriv - 1
    total = 0.0
    for r in range(min(m, j) + 1):
        poly = (-1) ** r * math.perm(j, r) * (phi - y) ** (j - r)
        total += math.comb(m, r) * poly * claims.agg_pdf_derivative(y, m - r)
    return float(-total)


# ----------------------------------------------------------------------------- direct oracle


def _slab_integrand_factory(claims, sigma):
    """Return ``F(t)`` = hyperplane integral of ``[l, <l, Sigma l>] f(l)`` over ``<1, l> = t``.

    The hyperplane is parametrized by its first n-1 coordinates, so the
    construction does not involve any rotation.
    """
    n = claims.n
    if n == 1:
        def single(t):
            t = np.atleast_1d(t)
            f = claims.agg_pdf(t)
            return np.stack([t * f, sigma[0, 0] * t * t * f], axis=1)
        return single

    scales = getattr(claims, "coord_scales", None)
    if scales is None:
        scales = np.sqrt(np.diag(claims.cov)) if isinstance(claims, GaussianClaims) else np.full(n, claims.scale)
    half = 12.0 * float(np.max(scales))
    panels, order = {2: (48, 20), 3: (32, 14)}.get(n, (12, 12))
    pts, wts = _geometry.tensor_gauss_legendre(np.full(n - 1, half), panels=panels, order=order)
    chunk = 200_000

    def slab(t):
        out = []
        for tv in np.atleast_1d(t):
            acc = np.zeros(n + 1)
            for start in range(0, len(pts), chunk):
                p = pts[start:start + chunk]
                w = wts[start:start + chunk]
                ell = np.concatenate([p, (tv - p.sum(axis=1))[:, None]], axis=1)
                fw = claims.pdf(ell) * w
                acc[:n] += fw @ ell
                acc[n] += fw @ np.einsum("ki,ij,kj->k", ell, sigma, ell)
            out.append(acc)
        return np.array(out)

    return slab


def _slab(func, a, b, order=8):
    x, w = np.polynomial.legendre.leggauss(order)
    t = 0.5 * (a + b) + 0.5 * (b - a) * x
    return 0.5 * (b - a) * (w @ func(t))


def direct_k_values(claims, sigma_x, y, upper_sd=12.0, panels=8):
    """K(y) and K[L](y) by direct integration in claim coordinates (independent of the rotation)."""
    sigma = _check_sigma(sigma_x, claims.n)
    func = _slab_integrand_factory(claims, sigma)
    upper = y + upper_sd * claims.scale
    edges = np.linspace(y, upper, panels + 1)
    total = sum(_slab(func, a, b, order=16) for a, b in zip(edges[:-1], edges[1:]))
    return total[:-1], float(total[-1])


def kderiv_finite_difference_check(claims, sigma_x, y, step=1e-4, rotation=None):
    """Largest relative error between the analytic K-derivatives and central differences.

    The differences are formed from slab integrals ``int_a^b`` of the hyperplane
    integrand so no large tail integral is ever subtracted from another.
    """
    if step <= 0:
        raise DomainError("step must be positive")
    n = claims.n
    sigma = _check_sigma(sigma_x, n)
    bundle = k_bundle(claims, sigma, y, rotation=rotation, values=False)
    func = _slab_integrand_factory(claims, sigma)
    lower = _slab(func, y - step, y)
    upper = _slab(func, y, y + step)
    d1 = -(lower + upper) / (2 * step)
    d2 = (lower - upper) / step ** 2
    pairs = [(bundle.kvec_d1, d1[:n]), (bundle.kvec_d2, d2[:n]),
             (np.array([bundle.kL_d1]), d1[n:]), (np.array([bundle.kL_d2]), d2[n:])]
    errs = []
    for analytic, fd in pairs:
        scale = max(np.linalg.norm(analytic), np.linalg.norm(fd))
        if scale == 0.0:
            errs.append(0.0)
            continue
        errs.append(np.linalg.norm(analytic - fd) / scale)
    err = float(max(errs))
    if not math.isfinite(err):
        raise NumericError("finite-difference check produced a non-finite error")
    return err
