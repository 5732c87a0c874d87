"""Analytic test fields with exact exterior derivatives.

Polynomial fields are stored as 3D coefficient arrays of
``numpy.polynomial.polynomial`` and differentiated exactly; their degree is
kept low enough (at most 6) for the default quadrature to integrate the
boundary functionals exactly.  Trigonometric fields are meant for stability
studies only.  Bubbles vanish together with their traces on the unit cube.
"""
import numpy as np
from numpy.polynomial import polynomial as P

from .fem import AnalyticField, DiscreteField, FieldSum, ndofs

MAXDEG = 7


def _coef(terms):
    """Coefficient array from ``{(i, j, k): c}``."""
    c = np.zeros((MAXDEG, MAXDEG, MAXDEG))
    for (i, j, k), v in terms.items():
        c[i, j, k] += v
    return c


def _ev(c, x):
    return P.polyval3d(x[:, 0], x[:, 1], x[:, 2], c)


def _der(c, axis):
    d = P.polyder(c, axis=axis)
    pad = [(0, 0)] * 3
    pad[axis] = (0, 1)
    return np.pad(d, pad)


def _degree(c):
    nz = np.argwhere(np.abs(c) > 0)
    return int(nz.sum(axis=1).max()) if len(nz) else 0


def poly_field(level, comps, name=""):
    """Polynomial field of a level from coefficient arrays (1 or 3 of them)."""
    comps = [np.asarray(c, dtype=float) for c in comps]
    deg = max(_degree(c) for c in comps)
    if level in (0, 3):
        c = comps[0]
        f = lambda x: _ev(c, x)
        if level == 3:
            return AnalyticField(3, f, name=name, degree=deg)
        grad = [_der(c, a) for a in range(3)]
        df = lambda x: np.column_stack([_ev(g, x) for g in grad])
        return AnalyticField(0, f, df, name=name, degree=deg)
    f = lambda x: np.column_stack([_ev(c, x) for c in comps])
    if level == 1:
        cx, cy, cz = comps
        curl = [_der(cz, 1) - _der(cy, 2), _der(cx, 2) - _der(cz, 0), _der(cy, 0) - _der(cx, 1)]
        df = lambda x: np.column_stack([_ev(g, x) for g in curl])
    else:
        div = sum(_der(c, a) for a, c in enumerate(comps))
        df = lambda x: _ev(div, x)
    return AnalyticField(level, f, df, name=name, degree=deg)


def _bubble_coef():
    one = np.array([0.0, 1.0, -1.0])           # s - s^2
    b = np.einsum("i,j,k->ijk", one, one, one)
    return np.pad(b, [(0, MAXDEG - 3)] * 3)


def _mul(a, b):
    """Product of two coefficient arrays, truncated to MAXDEG."""
    out = np.zeros_like(a)
    for idx in np.argwhere(np.abs(a) > 0):
        i, j, k = idx
        sub = b[:MAXDEG - i, :MAXDEG - j, :MAXDEG - k]
        out[i:i + sub.shape[0], j:j + sub.shape[1], k:k + sub.shape[2]] += a[i, j, k] * sub
    return out


def bubble(level, direction=(1.0, 0.5, -0.25), weight=None, scale=1.0):
    """Zero-trace field ``b c`` with ``b = x(1-x)y(1-y)z(1-z)``.

    ``weight`` (coefficient array) multiplies the bubble.  On level 3 the
    analogue is a zero-mean field, since that trace is the domain integral.
    """
    if level == 3:
        c = _coef({(1, 0, 0): scale, (0, 0, 0): -0.5 * scale})
        return poly_field(3, [c], name="zero-mean")
    b = scale * _bubble_coef()
    if weight is not None:
        b = _mul(b, weight)
    if level == 0:
        return poly_field(0, [b], name="bubble")
    return poly_field(level, [d * b for d in direction], name="bubble")


def polynomials(level):
    """Six polynomial fields of degree at most 3 for a level."""
    out = []
    if level in (0, 3):
        specs = [
            {(0, 0, 0): 1.0},
            {(0, 0, 0): 0.5, (1, 0, 0): 2.0, (0, 1, 0): -1.0, (0, 0, 1): 0.75},
            {(2, 0, 0): 1.0, (1, 1, 0): 1.0, (0, 0, 2): -0.5},
            {(1, 1, 1): 3.0, (0, 2, 0): -1.0},
            {(3, 0, 0): 1.0, (0, 1, 2): 0.5, (0, 0, 0): -0.2},
            {(1, 0, 1): -2.0, (0, 1, 1): 1.5, (2, 1, 0): 0.7},
        ]
        for k, s in enumerate(specs):
            out.append(poly_field(level, [_coef(s)], name=f"poly{level}_{k}"))
        return out
    specs = [
        [{(0, 0, 0): 1.0}, {(0, 0, 0): -0.5}, {(0, 0, 0): 0.25}],
        [{(0, 1, 0): 1.0}, {(0, 0, 1): -2.0}, {(1, 0, 0): 0.5}],
        [{(1, 0, 0): 1.0, (0, 0, 1): 1.0}, {(0, 1, 0): 0.3}, {(1, 1, 0): 1.0}],
        [{(0, 2, 0): 1.0}, {(2, 0, 1): 0.5}, {(1, 0, 0): -1.0, (0, 1, 1): 2.0}],
        [{(1, 1, 1): 1.0}, {(3, 0, 0): -0.4}, {(0, 0, 2): 1.0}],
        [{(0, 0, 1): 2.0, (2, 0, 0): -1.0}, {(1, 2, 0): 1.0}, {(0, 1, 0): 0.5}],
    ]
    for k, s in enumerate(specs):
        out.append(poly_field(level, [_coef(c) for c in s], name=f"poly{level}_{k}"))
    return out


def trig(level, freq=1.0):
    """A smooth non-polynomial field with closed-form derivative."""
    a = np.pi * freq

    def s(x):
        return np.sin(a * x[:, 0]) * np.cos(a * x[:, 1]) * np.exp(0.5 * x[:, 2])

    def gs(x):
        X, Y, Z = x.T
        e = np.exp(0.5 * Z)
        return np.column_stack([a * np.cos(a * X) * np.cos(a * Y) * e,
                                -a * np.sin(a * X) * np.sin(a * Y) * e,
                                0.5 * np.sin(a * X) * np.cos(a * Y) * e])

    if level == 0:
        return AnalyticField(0, s, gs, name="trig0")
    if level == 3:
        return AnalyticField(3, s, name="trig3")
    if level == 1:
        # u = (cos(a z), s, x y): curl = (x - gs_z, -a sin(a z) - y, gs_x)
        def f(x):
            return np.column_stack([np.cos(a * x[:, 2]), s(x), x[:, 0] * x[:, 1]])

        def df(x):
            g = gs(x)
            return np.column_stack([x[:, 0] - g[:, 2], -a * np.sin(a * x[:, 2]) - x[:, 1], g[:, 0]])
        return AnalyticField(1, f, df, name="trig1")

    # u = (s, sin(a y), x z): div = gs_x + a cos(a y) + x
    def f(x):
        return np.column_stack([s(x), np.sin(a * x[:, 1]), x[:, 0] * x[:, 2]])

    def df(x):
        return gs(x)[:, 0] + a * np.cos(a * x[:, 1]) + x[:, 0]
    return AnalyticField(2, f, df, name="trig2")


def gradient_of(level, u):
    """Exterior derivative of a catalog field as a field of the next level
    (only its value; the derivative of a derivative is zero)."""
    zeros = {0: lambda x: np.zeros((len(x), 3)), 1: lambda x: np.zeros(len(x)), 2: None}
    return AnalyticField(level + 1, u.df, zeros[level], name=f"d({u.name})", degree=u.degree)


def admissible(mesh, level, rng, bubble_scale=1.0):
    """Random discrete field plus a bubble: trace is discrete by construction."""
    vh = DiscreteField(mesh, level, rng.standard_normal(ndofs(mesh, level)))
    return FieldSum([(1.0, vh), (1.0, bubble(level, scale=bubble_scale))]), vh


def derivative_of_admissible(level, vh, bubble_scale=1.0):
    return FieldSum([(1.0, vh.d()), (1.0, gradient_of(level, bubble(level, scale=bubble_scale)))])


def fd_derivative(u, x, eps=1e-5):
    """Central finite-difference exterior derivative of ``u`` at ``x``."""
    class _X:
        def __init__(self, x):
            self.x = x

    jac = np.zeros((len(x), 3) + ((3,) if u.level in (1, 2) else ()))
    for a in range(3):
        e = np.zeros(3)
        e[a] = eps
        jac[:, a] = (u.value(_X(x + e)) - u.value(_X(x - e))) / (2 * eps)
    if u.level == 0:
        return jac
    if u.level == 1:
        J = jac  # J[:, a, c] = d u_c / d x_a
        return np.column_stack([J[:, 1, 2] - J[:, 2, 1], J[:, 2, 0] - J[:, 0, 2], J[:, 0, 1] - J[:, 1, 0]])
    return jac[:, 0, 0] + jac[:, 1, 1] + jac[:, 2, 2]


def catalog(level):
    """Named fields of a level: polynomials, a trig field and a bubble."""
    out = {u.name: u for u in polynomials(level)}
    out[f"trig{level}"] = trig(level)
    out[f"bubble{level}"] = bubble(level)
    return out
