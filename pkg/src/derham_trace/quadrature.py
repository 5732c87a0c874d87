"""Simplex quadrature rules in barycentric form.

Triangle and tetrahedron rules are collapsed (Stroud conical) products of
Gauss-Jacobi rules, which are exact for polynomials of total degree
``2*m - 1`` with ``m`` points per direction.
"""
from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@dataclass(frozen=True)
class QuadratureRule:
    dim: int
    degree: int
    bary: np.ndarray    # (nq, dim+1) barycentric coordinates
    weights: np.ndarray  # (nq,), sum = 1/dim! (reference simplex measure)

    @property
    def npoints(self):
        return len(self.weights)


def _gauss01(m, a=0.0):
    # Gauss-Jacobi on [0, 1] for weight (1-t)^a
    if a == 0.0:
        t, w = roots_legendre(m)
    else:
        t, w = roots_jacobi(m, a, 0.0)
    return (t + 1) / 2, w / 2 ** (a + 1)


@lru_cache(maxsize=None)
def simplex_rule(dim, degree):
    """Rule exact to ``degree`` on the reference ``dim``-simplex."""
    m = max(1, (degree + 2) // 2)
    if dim == 0:
        return QuadratureRule(0, degree, np.ones((1, 1)), np.ones(1))
    if dim == 1:
        t, w = _gauss01(m)
        bary = np.column_stack([1 - t, t])
        return QuadratureRule(1, degree, bary, w)
    if dim == 2:
        s, ws = _gauss01(m, 1.0)
        t, wt = _gauss01(m)
        S, T = np.meshgrid(s, t, indexing="ij")
        x = S.ravel()
        y = (T * (1 - S)).ravel()
        w = np.outer(ws, wt).ravel()
        bary = np.column_stack([1 - x - y, x, y])
        return QuadratureRule(2, degree, bary, w)
    if dim == 3:
        r, wr = _gauss01(m, 2.0)
        s, ws = _gauss01(m, 1.0)
        t, wt = _gauss01(m)
        R, S, T = np.meshgrid(r, s, t, indexing="ij")
        x = R
        y = S * (1 - R)
        z = T * (1 - R) * (1 - S)
        w = (wr[:, None, None] * ws[None, :, None] * wt[None, None, :])
        x, y, z, w = x.ravel(), y.ravel(), z.ravel(), w.ravel()
        bary = np.column_stack([1 - x - y - z, x, y, z])
        return QuadratureRule(3, degree, bary, w)
    raise ValueError(f"unsupported simplex dimension {dim}")


def monomial_integral(powers):
    """Exact integral of prod(bary_i**p_i) over the reference simplex."""
    dim = len(powers) - 1
    num = np.prod([factorial(p) for p in powers])
    return num / factorial(sum(powers) + dim)
