"""Discrete liftings and minimal extensions.

The continuous harmonic extension and the trace norm are replaced by
minimal graph-norm problems over an enriched first-kind space on the same
mesh (see :mod:`derham_trace.spaces`).  Constraints are imposed through
point values at unisolvent lattice points: trace values on boundary faces
and derivative values in cells.
"""
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import Infeasible, InfeasibleTrace, LevelMismatch
from .fem import (DEFAULT_DEGREE, DiscreteField, FieldSum, Points, SurfacePoints,
                  _embed_bary, cell_points, graph_norm, trace_kind, trace_values)
from .projections import CommutingProjection
from .spaces import EnrichedSpace, WhitneySpace, graph_gram, gram

CONSTRAINT_TOL = 1e-10


# ---------------------------------------------------------------- constraint points
def _lattice(dim, k, shrink=0.8):
    """Principal lattice of order ``k`` pulled towards the centroid."""
    if k == 0:
        return np.full((1, dim + 1), 1.0 / (dim + 1))
    pts = []
    for combo in combinations_with_replacement(range(dim + 1), k):
        a = np.bincount(np.array(combo), minlength=dim + 1) / k
        pts.append(shrink * a + (1 - shrink) / (dim + 1))
    return np.array(pts)


def lattice_cell_points(mesh, k):
    lat = _lattice(3, k)
    nt = len(mesh.cells)
    return Points(mesh, np.repeat(np.arange(nt), len(lat)), np.tile(lat, (nt, 1)))


def lattice_boundary_points(mesh, k):
    faces = mesh.boundary_faces
    lat = _lattice(2, k)
    hosts = mesh.face_cells[faces, 0]
    cv, fv = mesh.cells[hosts], mesh.faces[faces]
    positions = np.argmax(cv[:, None, :] == fv[:, :, None], axis=2)
    bary = _embed_bary(lat, positions).reshape(-1, 4)
    nq = len(lat)
    return SurfacePoints(mesh, np.repeat(hosts, nq), bary, None,
                         np.repeat(mesh.outward_normals[faces], nq, axis=0), np.repeat(faces, nq))


def trace_rows(space, spts):
    """Sparse rows evaluating the trace of basis functions at surface points."""
    comps = space.basis_matrix(spts)
    level = space.level
    if level == 0:
        return comps[0].tocsr()
    n = spts.normals
    if level == 2:
        return sum(sp.diags(n[:, c]) @ comps[c] for c in range(3)).tocsr()
    normal = sum(sp.diags(n[:, c]) @ comps[c] for c in range(3))
    return sp.vstack([comps[c] - sp.diags(n[:, c]) @ normal for c in range(3)]).tocsr()


def trace_targets(level, g, spts):
    t = trace_values(trace_kind(level), g, spts)
    return t.T.ravel() if t.ndim == 2 else t


def derivative_rows(space, pts):
    return sp.vstack(space.basis_matrix(pts, derivative=True)).tocsr()


def derivative_targets(f, pts):
    v = f.value(pts)
    return v.T.ravel() if v.ndim == 2 else v


# ---------------------------------------------------------------- constrained least squares
def constrained_minimize(M, C, b, q=None, tol=CONSTRAINT_TOL):
    """Minimize ``x^T M x - 2 q^T x`` subject to ``C x = b``.

    Nullspace method: particular solution by least squares, then an SPD
    solve on the nullspace of ``C``.  Raises :class:`Infeasible` when the
    constraint residual exceeds ``tol`` relative to ``max(1, |b|)``.
    """
    M = M.toarray() if sp.issparse(M) else np.asarray(M)
    C = C.toarray() if sp.issparse(C) else np.asarray(C)
    b = np.asarray(b, dtype=float)
    q = np.zeros(M.shape[0]) if q is None else np.asarray(q, dtype=float)
    if C.shape[0]:
        xp, *_ = sla.lstsq(C, b)
        res = np.linalg.norm(C @ xp - b)
        if res > tol * max(1.0, np.linalg.norm(b)):
            raise Infeasible(f"constraint residual {res:.3e}")
        Z = sla.null_space(C, rcond=tol)
    else:
        xp = np.zeros(M.shape[0])
        Z = np.eye(M.shape[0])
    if Z.shape[1] == 0:
        return xp
    K = Z.T @ M @ Z
    y = sla.solve(K, Z.T @ (q - M @ xp), assume_a="pos")
    return xp + Z @ y


def sup_ratio(N, D, tol=1e-10):
    """``sqrt(max x^T N x / x^T D x)`` over the range of the PSD matrix ``D``."""
    N = N.toarray() if sp.issparse(N) else np.asarray(N)
    D = D.toarray() if sp.issparse(D) else np.asarray(D)
    lam, U = np.linalg.eigh(0.5 * (D + D.T))
    keep = lam > tol * max(lam.max(), 0.0)
    if not keep.any():
        return 0.0
    T = U[:, keep] / np.sqrt(lam[keep])
    R = T.T @ N @ T
    return float(np.sqrt(max(np.linalg.eigvalsh(0.5 * (R + R.T)).max(), 0.0)))


# ---------------------------------------------------------------- extension and lifting
class ExtensionOperator:
    """Minimal graph-norm extension of discrete traces into ``P_r^-``.

    The trace dofs of the enriched space are fixed from the boundary data
    (their traces are unisolvent), the remaining dofs minimize the graph
    norm.
    """

    def __init__(self, mesh, level, order=2, degree=DEFAULT_DEGREE):
        if level == 3:
            raise LevelMismatch("level 3 has no pointwise trace")
        self.mesh = mesh
        self.level = level
        self.space = EnrichedSpace(mesh, level, order)
        self.A = graph_gram(self.space, degree=degree).tocsc()
        self.spts = lattice_boundary_points(mesh, order)
        self.bdofs = np.nonzero(self.space.trace_dofs)[0]
        self.idofs = np.nonzero(~self.space.trace_dofs)[0]
        T = trace_rows(self.space, self.spts)
        self.Tb = T[:, self.bdofs].toarray()
        self._Aii = spla.splu(self.A[self.idofs][:, self.idofs].tocsc()) if len(self.idofs) else None
        self._Aib = self.A[self.idofs][:, self.bdofs]

    def _solve(self, rhs):
        xb, *_ = sla.lstsq(self.Tb, rhs)
        res = np.linalg.norm(self.Tb @ xb - rhs, axis=0)
        scale = np.maximum(1.0, np.linalg.norm(rhs, axis=0))
        if np.any(res > 1e-9 * scale):
            raise InfeasibleTrace(f"trace residual {np.max(res):.3e}")
        x = np.zeros((self.space.ndofs,) + rhs.shape[1:])
        x[self.bdofs] = xb
        if self._Aii is not None:
            x[self.idofs] = -self._Aii.solve(np.asarray(self._Aib @ xb))
        return x

    def __call__(self, g):
        """Extension of the trace of ``g`` (a level field with discrete trace)."""
        return self.space.field(self._solve(trace_targets(self.level, g, self.spts)))

    def matrix(self):
        """Extension of the trace of each boundary Whitney form, as columns."""
        W = WhitneySpace(self.mesh, self.level)
        rb = np.nonzero(W.trace_dofs)[0]
        G = trace_rows(W, self.spts)[:, rb].toarray()
        return self._solve(G), rb

    def energy(self, x):
        return float(np.sqrt(max(x @ (self.A @ x), 0.0)))


def extend_min_energy(mesh, level, g, order=2):
    return ExtensionOperator(mesh, level, order)(g)


def boundary_data(mesh, level, coeffs_on_boundary):
    """Discrete trace data as a field carrying only boundary dofs."""
    W = WhitneySpace(mesh, level)
    c = np.zeros(W.ndofs)
    c[np.nonzero(W.trace_dofs)[0]] = coeffs_on_boundary
    return DiscreteField(mesh, level, c)


@dataclass
class LiftReport:
    level: int
    lift: DiscreteField
    extension_norm: float
    lift_norm: float
    trace_dof_error: float

    @property
    def ratio(self):
        return self.lift_norm / self.extension_norm if self.extension_norm > 0 else 0.0


def lift(pi, level, g, extension=None):
    """Discrete lifting ``Pi(E g)`` of discrete trace data ``g``."""
    mesh = pi.mesh
    E = extension if extension is not None else ExtensionOperator(mesh, level)
    eg = E(g)
    lifted = pi(level, eg)
    W = WhitneySpace(mesh, level)
    b = W.trace_dofs
    err = float(np.abs(lifted.coeffs[b] - g.coeffs[b]).max(initial=0.0))
    return LiftReport(level, lifted, E.energy(eg.coeffs), graph_norm(lifted, mesh), err)


def lift_constant(pi, level, extension=None):
    """sup over discrete traces of ``|lift g|_V / |E g|_V``."""
    mesh = pi.mesh
    E = extension if extension is not None else ExtensionOperator(mesh, level)
    X, _ = E.matrix()
    L = pi.matrix(level, E.space) @ X
    Ap = graph_gram(WhitneySpace(mesh, level))
    return sup_ratio(L.T @ (Ap @ L), X.T @ (E.A @ X))


# ---------------------------------------------------------------- minimal extensions of data
@dataclass
class MinMinReport:
    level: int
    mu_h: float
    mu: float
    scale: float
    extras: dict = field(default_factory=dict)

    @property
    def ratio(self):
        return self.mu_h / self.mu if self.mu > 0 else (1.0 if self.mu_h == 0 else np.inf)

    @property
    def nested_ok(self):
        return self.mu <= self.mu_h + 1e-10 * max(1.0, self.scale)


def _min_l2(space, level, g, f):
    mesh = space.mesh
    order = space.order
    spts = lattice_boundary_points(mesh, order)
    cpts = lattice_cell_points(mesh, order - 1)
    C = sp.vstack([trace_rows(space, spts), derivative_rows(space, cpts)])
    b = np.concatenate([trace_targets(level, g, spts), derivative_targets(f, cpts)])
    M = gram(space)
    x = constrained_minimize(M, C, b)
    return float(np.sqrt(max(x @ (M @ x), 0.0))), x


def min_min_compare(mesh, level, g, f, order=2):
    """Minimal L2 norm under trace data ``g`` and derivative data ``f``.

    ``g`` is any level field with discrete trace and ``f`` a level+1 field
    in the discrete space; returns the discrete and enriched minima.
    """
    if level > 2:
        raise LevelMismatch("derivative data needs level <= 2")
    mu_h, _ = _min_l2(WhitneySpace(mesh, level), level, g, f)
    mu, _ = _min_l2(EnrichedSpace(mesh, level, order), level, g, f)
    scale = max(mu_h, 1.0)
    return MinMinReport(level, mu_h, mu, scale)


def _distance_form(space, level):
    """Quadratic form of the L2 distance to {tr = 0, d = 0} in ``space``."""
    mesh = space.mesh
    spts = lattice_boundary_points(mesh, space.order)
    cpts = lattice_cell_points(mesh, space.order - 1)
    C = sp.vstack([trace_rows(space, spts), derivative_rows(space, cpts)]).toarray()
    M = gram(space).toarray()
    Z = sla.null_space(C, rcond=CONSTRAINT_TOL)
    if Z.shape[1] == 0:
        return M
    MZ = M @ Z
    return M - MZ @ sla.solve(Z.T @ MZ, MZ.T, assume_a="pos")


def embedding(space_from, space_to, degree=DEFAULT_DEGREE):
    """Coefficient map of a nested inclusion, by least squares at points."""
    pts = cell_points(space_from.mesh, None, degree)
    A = sp.vstack(space_to.basis_matrix(pts)).toarray()
    B = sp.vstack(space_from.basis_matrix(pts)).toarray()
    X, *_ = sla.lstsq(A, B)
    return X


def min_min_constant(mesh, level, order=2):
    """sup over discrete data of ``mu_h / mu``."""
    W = WhitneySpace(mesh, level)
    S = EnrichedSpace(mesh, level, order)
    Qh = _distance_form(W, level)
    J = embedding(W, S)
    Q = J.T @ _distance_form(S, level) @ J
    return sup_ratio(Qh, Q)


# ---------------------------------------------------------------- best approximation
def _graph_load(space, u, degree=DEFAULT_DEGREE):
    pts = cell_points(space.mesh, None, degree)
    w = pts.weights
    v = u.value(pts)
    comps = space.basis_matrix(pts)
    vs = [v] if v.ndim == 1 else [v[:, c] for c in range(3)]
    q = sum(B.T @ (w * vc) for B, vc in zip(comps, vs))
    if space.level < 3:
        dv = u.dvalue(pts)
        dcomps = space.basis_matrix(pts, derivative=True)
        dvs = [dv] if dv.ndim == 1 else [dv[:, c] for c in range(3)]
        q = q + sum(B.T @ (w * vc) for B, vc in zip(dcomps, dvs))
    return np.asarray(q).ravel()


def best_approx_demo(mesh, level, u, g, extension=None):
    """Trace-constrained vs unconstrained best approximation in graph norm.

    Returns LHS (constrained error), the unconstrained error, the surrogate
    trace-norm mismatch and their ratio.
    """
    W = WhitneySpace(mesh, level)
    A = graph_gram(W).tocsc()
    q = _graph_load(W, u)
    best = spla.spsolve(A, q)
    b = W.trace_dofs
    x = np.zeros(W.ndofs)
    x[b] = g.coeffs[b]
    i = np.nonzero(~b)[0]
    if len(i):
        Aii = A[i][:, i]
        x[i] = spla.spsolve(Aii.tocsc(), q[i] - A[i][:, np.nonzero(b)[0]] @ x[b])
    lhs = graph_norm(FieldSum([(1.0, u), (-1.0, DiscreteField(mesh, level, x))]), mesh)
    unconstrained = graph_norm(FieldSum([(1.0, u), (-1.0, DiscreteField(mesh, level, best))]), mesh)
    E = extension if extension is not None else ExtensionOperator(mesh, level)
    diff = np.zeros(W.ndofs)
    diff[b] = g.coeffs[b] - best[b]
    mismatch = E.energy(E(DiscreteField(mesh, level, diff)).coeffs)
    rhs = unconstrained + mismatch
    return {"level": level, "lhs": lhs, "unconstrained": unconstrained,
            "trace_mismatch": mismatch, "ratio": lhs / rhs if rhs > 0 else 0.0}


def default_projection(mesh):
    return CommutingProjection(mesh)
