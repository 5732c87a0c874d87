"""Boundary functionals and the commuting, trace-preserving projections.

For a boundary simplex ``r`` of level ``l`` the functional ``alpha_r`` is a
volume integral against the bulk extension ``Y_r`` of its boundary weight:

* level 0: ``(u, div Y) + (grad u, Y)``,
* level 1: ``(u, curl Y) - (curl u, Y)``,
* level 2: ``(u, grad Y) + (div u, Y)``,

so that for fields with a discrete trace ``alpha_r(u) = (tr u, zeta_r)`` on
the boundary.  Level 3 uses the cell integral.  All integrals run over the
Worsey-Farin sub-cells touching the boundary, where ``Y`` is affine and the
integrands of polynomial inputs are integrated exactly.
"""
import numpy as np
import scipy.sparse as sp

from .errors import LevelMismatch, NotBoundarySimplex, QuadratureDomainMismatch
from .fem import (DEFAULT_DEGREE, DiscreteField, Field, FieldSum, basis_matrix,
                  canonical_dofs, cell_points, cellwise_sq_norms, ndofs,
                  simplex_points)
from .mesh import classify
from .weights import WeightSet


def _check_level(u, level):
    if u.level != level:
        raise LevelMismatch(f"field level {u.level} != {level}")


def _components(arr):
    return [arr] if arr.ndim == 1 else [arr[:, c] for c in range(arr.shape[1])]


class BoundaryFunctionals:
    """The functionals ``alpha_r`` of all boundary simplices of a mesh.

    ``Y[l]`` / ``dY[l]`` hold the weighted values of the bulk extensions at
    the quadrature points as sparse (n_anchor, npts) matrices per component.
    """

    def __init__(self, weights, degree=DEFAULT_DEGREE):
        self.weights = weights
        self.mesh = weights.mesh
        self.wf = weights.wf
        self.degree = degree
        wf = self.wf
        touching = wf.boundary_vertex_mask[wf.cells].any(axis=1)
        self.cells = np.nonzero(touching)[0]
        self.pts = cell_points(wf, self.cells, degree)
        W = sp.diags(self.pts.weights)
        self.Y, self.dY = {}, {}
        for level in range(3):
            E = weights.extension_coeffs(level).T.tocsc()
            ylev = 2 - level
            self.Y[level] = [(W @ B @ E).T.tocsr() for B in basis_matrix(wf, ylev, self.pts)]
            self.dY[level] = [(W @ B @ E).T.tocsr()
                              for B in basis_matrix(wf, ylev, self.pts, derivative=True)]

    def anchors(self, level):
        if level == 3:
            return np.arange(len(self.mesh.cells))
        return self.mesh.boundary_simplices(level)

    def _values(self, u, derivative):
        try:
            return u.dvalue(self.pts) if derivative else u.value(self.pts)
        except ValueError as exc:
            raise QuadratureDomainMismatch(str(exc)) from exc

    def __call__(self, level, u):
        """Vector of ``alpha_r(u)`` over the boundary ``level``-simplices."""
        _check_level(u, level)
        if level == 3:
            # cell integrals, in the signed convention of the cell dofs
            return canonical_dofs(3, u, mesh=self.mesh, degree=self.degree)
        v = _components(self._values(u, False))
        dv = _components(self._values(u, True))
        Y, dY = self.Y[level], self.dY[level]
        if level == 0:
            return dY[0] @ v[0] + sum(Yc @ c for Yc, c in zip(Y, dv))
        if level == 1:
            return sum(d @ c for d, c in zip(dY, v)) - sum(Yc @ c for Yc, c in zip(Y, dv))
        return sum(d @ c for d, c in zip(dY, v)) + Y[0] @ dv[0]

    def matrix(self, level, space):
        """Sparse (n_anchor, space.ndofs) matrix of ``alpha`` on a basis."""
        if space.level != level:
            raise LevelMismatch(f"space level {space.level} != {level}")
        if level == 3:
            return canonical_dof_matrix(3, space, None, self.degree)
        v = space.basis_matrix(self.pts)
        dv = space.basis_matrix(self.pts, derivative=True)
        Y, dY = self.Y[level], self.dY[level]
        if level == 0:
            out = dY[0] @ v[0] + sum(Yc @ c for Yc, c in zip(Y, dv))
        elif level == 1:
            out = sum(d @ c for d, c in zip(dY, v)) - sum(Yc @ c for Yc, c in zip(Y, dv))
        else:
            out = sum(d @ c for d, c in zip(dY, v)) + Y[0] @ dv[0]
        return sp.csr_matrix(out)


def canonical_dof_matrix(level, space, sids=None, degree=DEFAULT_DEGREE):
    """Sparse (len(sids), space.ndofs) matrix of canonical dofs on a basis."""
    mesh = space.mesh
    if sids is None:
        sids = np.arange(ndofs(mesh, level))
    sids = np.asarray(sids, dtype=np.int64)
    n = len(sids)
    if not n:
        return sp.csr_matrix((0, space.ndofs))
    pts, nq = simplex_points(mesh, level, sids, degree=degree)
    comps = space.basis_matrix(pts)
    rows = np.repeat(np.arange(n), nq)
    cols = np.arange(n * nq)
    if level == 0:
        R = sp.csr_matrix((np.ones(n), (np.arange(n), np.arange(n) * nq)), shape=(n, n * nq))
        return (R @ comps[0]).tocsr()
    w = pts.weights
    if level == 3:
        R = sp.csr_matrix((w * np.repeat(mesh.signs[sids], nq), (rows, cols)), shape=(n, n * nq))
        return (R @ comps[0]).tocsr()
    if level == 1:
        e = mesh.edges[sids]
        d = mesh.vertices[e[:, 1]] - mesh.vertices[e[:, 0]]
        d /= np.linalg.norm(d, axis=1)[:, None]
    else:
        d = mesh.face_normals[sids]
    d = np.repeat(d, nq, axis=0)
    out = None
    for c in range(3):
        R = sp.csr_matrix((w * d[:, c], (rows, cols)), shape=(n, n * nq))
        term = R @ comps[c]
        out = term if out is None else out + term
    return out.tocsr()


# ---------------------------------------------------------------- operators
class BoundaryProjector:
    """Lowest-order boundary operators; at this order the trace-preserving
    operator coincides with ``P0`` on levels 0..2 and with the cellwise
    mean on level 3."""

    def __init__(self, mesh, weights=None, degree=DEFAULT_DEGREE):
        self.mesh = mesh
        self.weights = weights if weights is not None else WeightSet(mesh)
        self.alpha = BoundaryFunctionals(self.weights, degree)
        self.degree = degree

    def P0(self, level, u):
        if level == 3:
            return self.pib3(u)
        coeffs = np.zeros(ndofs(self.mesh, level))
        coeffs[self.alpha.anchors(level)] = self.alpha(level, u)
        return DiscreteField(self.mesh, level, coeffs)

    def matrix(self, level, space):
        """Coefficients of the boundary operator applied to a basis."""
        n = ndofs(self.mesh, level)
        if level == 3:
            return canonical_dof_matrix(3, space, None, self.degree)
        A = self.alpha.matrix(level, space).tocoo()
        rows = self.alpha.anchors(level)[A.row]
        return sp.csr_matrix((A.data, (rows, A.col)), shape=(n, space.ndofs))

    def pib3(self, u):
        _check_level(u, 3)
        return DiscreteField(self.mesh, 3, canonical_dofs(3, u, mesh=self.mesh, degree=self.degree))

    def __call__(self, level, u):
        return self.P0(level, u)


class InteriorInterpolation:
    """Default interior projector: canonical interpolation on interior dofs.

    On level 3 the output is shifted to zero mean so that it maps into the
    zero-integral space.  Projection and commuting hold together on
    interior discrete fields, smooth zero-trace fields and their sums with
    fields whose trace dofs have been removed.
    """

    def __init__(self, mesh, degree=DEFAULT_DEGREE):
        self.mesh = mesh
        self.degree = degree
        self.partitions = classify(mesh)

    def __call__(self, level, u):
        _check_level(u, level)
        mesh = self.mesh
        coeffs = np.zeros(ndofs(mesh, level))
        if level == 3:
            c = canonical_dofs(3, u, mesh=mesh, degree=self.degree)
            mean = np.dot(mesh.signs, c) / mesh.volumes.sum()
            coeffs = c - mesh.signs * mesh.volumes * mean
        else:
            ids = self.partitions.interior_simplices[level]
            coeffs[ids] = canonical_dofs(level, u, ids, mesh=mesh, degree=self.degree)
        return DiscreteField(mesh, level, coeffs)

    def matrix(self, level, space):
        mesh = self.mesh
        n = ndofs(mesh, level)
        if level == 3:
            C = canonical_dof_matrix(3, space, None, self.degree)
            corr = sp.csr_matrix((mesh.signs * mesh.volumes / mesh.volumes.sum())[:, None])
            return (C - corr @ (sp.csr_matrix(mesh.signs[None, :]) @ C)).tocsr()
        ids = self.partitions.interior_simplices[level]
        C = canonical_dof_matrix(level, space, ids, self.degree).tocoo()
        return sp.csr_matrix((C.data, (ids[C.row], C.col)), shape=(n, space.ndofs))


class CommutingProjection:
    """``Pi = Pi_int (I - Pi_bnd) + Pi_bnd`` with pluggable interior part.

    Inputs are expected in the admissible family: a discrete field plus a
    smooth field whose trace vanishes (or is discrete).
    """

    def __init__(self, mesh, boundary=None, interior=None, degree=DEFAULT_DEGREE):
        self.mesh = mesh
        self.boundary = boundary if boundary is not None else BoundaryProjector(mesh, degree=degree)
        self.interior = interior if interior is not None else InteriorInterpolation(mesh, degree)

    def __call__(self, level, u):
        pb = self.boundary(level, u)
        pi = self.interior(level, FieldSum([(1.0, u), (-1.0, pb)]))
        return DiscreteField(self.mesh, level, pi.coeffs + pb.coeffs)

    def matrix(self, level, space):
        """Sparse (ndofs, space.ndofs) matrix of ``Pi`` on the basis of ``space``."""
        from .spaces import WhitneySpace
        Pb = self.boundary.matrix(level, space)
        Ci = self.interior.matrix(level, space)
        Ci_low = self.interior.matrix(level, WhitneySpace(self.mesh, level))
        return (Ci - Ci_low @ Pb + Pb).tocsr()


# ---------------------------------------------------------------- functional API
def alpha_eval(projector, level, r, u):
    """``alpha_r(u)`` for the boundary simplex with mesh id ``r``."""
    anchors = projector.alpha.anchors(level)
    k = np.searchsorted(anchors, r)
    if k >= len(anchors) or anchors[k] != r:
        raise NotBoundarySimplex(f"{level}-simplex {r} is not on the boundary")
    return float(projector.alpha(level, u)[k])


def apply_P0(projector, level, u):
    return projector.P0(level, u)


def apply_Pib(projector, level, u):
    return projector(level, u)


def apply_Pib3(projector, u):
    return projector.pib3(u)


def interior_project(interior, level, u):
    return interior(level, u)


def apply_Pi(pi, level, u):
    return pi(level, u)


# ---------------------------------------------------------------- locality and stability
class CellMaskedField(Field):
    """``u`` set to zero at points hosted by the given cells of ``mesh``."""

    def __init__(self, u, mesh, zero_cells):
        self.u = u
        self.level = u.level
        self.mesh = mesh
        self.mask = np.zeros(len(mesh.cells), bool)
        self.mask[np.asarray(zero_cells, dtype=np.int64)] = True

    def _apply(self, pts, vals):
        keep = ~self.mask[pts.on(self.mesh).cells]
        return vals * (keep if vals.ndim == 1 else keep[:, None])

    def value(self, pts):
        return self._apply(pts, self.u.value(pts))

    def dvalue(self, pts):
        return self._apply(pts, self.u.dvalue(pts))


def locality_check(pi, level, u, cell, perturbation):
    """Perturb ``u`` outside the second extended star of ``cell`` and compare
    the local coefficients of ``Pi u`` on that cell bit for bit."""
    from .fem import local_dofs
    mesh = pi.mesh
    es2 = classify(mesh).es2(cell)
    p = CellMaskedField(perturbation, mesh, es2)
    a = pi(level, u).coeffs
    b = pi(level, FieldSum([(1.0, u), (1.0, p)])).coeffs
    ids = local_dofs(mesh, level)[cell]
    changed_elsewhere = bool(np.any(a != b))
    return bool(np.array_equal(a[ids], b[ids])), changed_elsewhere


def dependence_mask(parts, level, domain="support"):
    """Cells the boundary functionals of a level may read.

    ``"restricted"`` uses the cells containing a boundary ``level``-simplex.
    ``"support"`` widens level 2 to all cells touching the boundary, since
    the continuous bulk extension of a face weight carries its values at
    boundary vertices into every cell around those vertices.
    """
    if domain == "restricted" or level < 2:
        return parts.boundary_cell_mask[level]
    return parts.boundary_cell_mask[0]


def neighbourhood(parts, cell, level, domain="support"):
    cells = parts.es2(cell)
    return cells[dependence_mask(parts, level, domain)[cells]]


def pib_bound_ratio(projector, level, u, degree=DEFAULT_DEGREE, domain="support"):
    """max over boundary-touching cells of
    ``|Pi_bnd u|_cell / (|u| + h |d u|)`` on the neighbourhood of
    :func:`neighbourhood`."""
    mesh = projector.mesh
    parts = classify(mesh)
    pb = projector(level, u)
    num = cellwise_sq_norms(pb, mesh, degree)
    uu = cellwise_sq_norms(u, mesh, degree)
    du = cellwise_sq_norms(u, mesh, degree, derivative=True) if level < 3 else np.zeros_like(uu)
    cells = np.nonzero(parts.boundary_cell_mask[level])[0] if level < 3 else np.arange(len(mesh.cells))
    worst = 0.0
    for t in cells:
        nb = neighbourhood(parts, t, level, domain) if level < 3 else np.array([t])
        den = np.sqrt(uu[nb].sum()) + mesh.diameters[3][t] * np.sqrt(du[nb].sum())
        if den > 0:
            worst = max(worst, np.sqrt(num[t]) / den)
    return float(worst)


def l2_stability_ratio(pi, level, u, degree=DEFAULT_DEGREE):
    """``|Pi u| / |u|`` in L2."""
    mesh = pi.mesh
    num = cellwise_sq_norms(pi(level, u), mesh, degree).sum()
    den = cellwise_sq_norms(u, mesh, degree).sum()
    return float(np.sqrt(num / den))
