"""Rotations aligned with the diagonal and box quadrature helpers."""
from functools import lru_cache

import numpy as np
from scipy.integrate import quad_vec

from .errors import NumericError


def householder_rotation(n):
    """Deterministic SO(n) matrix whose first column is ``n**-0.5 * ones``.

    Built from the Householder reflection that maps e1 onto the normalized
    diagonal; the last column is negated to turn the reflection into a rotation.
    """
    u = np.full(n, 1.0 / np.sqrt(n))
    v = -u
    v[0] += 1.0
    d = np.eye(n) - 2.0 * np.outer(v, v) / (v @ v)
    d[:, -1] *= -1.0
    return d


@lru_cache(maxsize=32)
def _gl_rule(dim, bound_key, panels, order):
    bounds = np.asarray(bound_key, dtype=float)
    x, w = np.polynomial.legendre.leggauss(order)
    axes, weights = [], []
    for b in bounds:
        edges = np.linspace(-b, b, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        axes.append((mid[:, None] + half[:, None] * x[None, :]).ravel())
        weights.append((half[:, None] * w[None, :]).ravel())
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wts = np.ones(len(pts))
    for wg in np.meshgrid(*weights, indexing="ij"):
        wts = wts * wg.ravel()
    return pts, wts


def tensor_gauss_legendre(bounds, panels=8, order=12):
    """Nodes and weights of a composite tensor Gauss-Legendre rule on the box prod [-b_i, b_i]."""
    bounds = tuple(float(b) for b in np.atleast_1d(bounds))
    return _gl_rule(len(bounds), bounds, panels, order)


def adaptive_box_integral(func, bounds, epsrel=1e-10, epsabs=1e-13):
    """Integrate a vector-valued ``func(x)`` over prod [-b_i, b_i] with nested adaptive Gauss-Kronrod.

    Returns ``(value, error_estimate)``. A zero-dimensional box evaluates ``func``
    at the empty point.
    """
    bounds = np.atleast_1d(np.asarray(bounds, dtype=float))
    dim = len(bounds)
    if dim == 0:
        return np.asarray(func(np.empty(0)), dtype=float), 0.0
    inner_errors = []

    def level(k, prefix):
        def integrand(t):
            point = np.append(prefix, t)
            if k == dim - 1:
                return np.asarray(func(point), dtype=float)
            return level(k + 1, point)

        res, err = quad_vec(integrand, -bounds[k], bounds[k], epsrel=epsrel, epsabs=epsabs,
                            norm="max", limit=400)
        inner_errors.append(err)
        return res

    value = level(0, np.empty(0))
    return value, float(max(inner_errors))


def check_accuracy(value, error, target=1e-8, what="quadrature", floor=0.0):
    """Raise NumericError when ``error`` exceeds ``target`` relative to ``value`` and the absolute ``floor``."""
    scale = max(float(np.max(np.abs(value))), 1e-12)
    if error > max(target * scale, floor):
        raise NumericError(f"{what} missed relative target {target:g} (achieved {error / scale:.3g})",
                           achieved=error / scale)
