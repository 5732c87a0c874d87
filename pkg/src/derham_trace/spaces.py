"""Finite element spaces as matrix-producing objects.

Both the lowest-order Whitney spaces and the enriched first-kind spaces
``P_r^-`` expose the same interface: ``basis_matrix(pts, derivative)``
returns one sparse (npts, ndofs) matrix per component, ``cell_dofs`` maps
local to global dofs and ``trace_dofs`` flags dofs with a nonzero trace.

The enriched basis is ``lambda^alpha W_sigma`` with ``|alpha| = r - 1`` and
``alpha_i = 0`` below the smallest vertex of ``sigma``; with vertex numbers
sorted globally the functions glue conformingly.  A function is attached to
the simplex spanned by ``supp(alpha)`` and ``sigma``.
"""
from itertools import combinations_with_replacement

import numpy as np
import scipy.sparse as sp

from .errors import LevelMismatch
from .fem import DEFAULT_DEGREE, Field, basis_at, cell_points, local_dofs, ndofs, whitney_local
from .mesh import LOCAL_EDGES, LOCAL_FACES

LOCAL_SIMPLICES = {0: [(0,), (1,), (2,), (3,)], 1: list(LOCAL_EDGES),
                   2: list(LOCAL_FACES), 3: [(0, 1, 2, 3)]}


def _sparse_comps(arr, ids, ndof):
    n, nloc = ids.shape
    rows = np.repeat(np.arange(n), nloc)
    comps = [arr] if arr.ndim == 2 else [arr[..., c] for c in range(arr.shape[-1])]
    return [sp.csr_matrix((c.ravel(), (rows, ids.ravel())), shape=(n, ndof)) for c in comps]


def _ncomp(level):
    return 1 if level in (0, 3) else 3


class WhitneySpace:
    """Lowest-order space of a level (all simplices)."""

    def __init__(self, mesh, level):
        self.mesh = mesh
        self.level = level
        self.order = 1
        self.ndofs = ndofs(mesh, level)
        self.cell_dofs = local_dofs(mesh, level)
        mask = [mesh.boundary_vertex_mask, mesh.boundary_edge_mask, mesh.boundary_face_mask,
                np.zeros(len(mesh.cells), bool)][level]
        self.trace_dofs = mask.copy()

    def local_values(self, pts):
        pts = pts.on(self.mesh)
        return basis_at(self.mesh, self.level, pts)

    def basis_matrix(self, pts, derivative=False):
        if derivative and self.level == 3:
            raise LevelMismatch("level-3 fields have no derivative")
        val, dval = self.local_values(pts)
        ids = self.cell_dofs[pts.on(self.mesh).cells]
        return _sparse_comps(dval if derivative else val, ids, self.ndofs)

    def field(self, coeffs):
        from .fem import DiscreteField
        return DiscreteField(self.mesh, self.level, coeffs)


class EnrichedSpace:
    """First-kind space ``P_r^-`` of a level on the same mesh."""

    def __init__(self, mesh, level, order=2):
        if order < 1:
            raise ValueError("order must be at least 1")
        self.mesh = mesh
        self.level = level
        self.order = order
        sig = LOCAL_SIMPLICES[level]
        self.local = []                              # (alpha, sigma index)
        for k, s in enumerate(sig):
            for combo in combinations_with_replacement(range(4), order - 1):
                if all(i >= min(s) for i in combo):
                    a = np.bincount(np.array(combo, dtype=np.int64), minlength=4)
                    self.local.append((a, k))
        self.alphas = np.array([a for a, _ in self.local], dtype=np.int64).reshape(-1, 4)
        self.sigmas = np.array([k for _, k in self.local], dtype=np.int64)
        sub = local_dofs(mesh, level)
        index = {}
        cell_dofs = np.empty((len(mesh.cells), len(self.local)), dtype=np.int64)
        attached = []
        for t, cell in enumerate(mesh.cells):
            for j, (a, k) in enumerate(self.local):
                key = (tuple(np.repeat(cell, a)), int(sub[t, k]))
                gid = index.get(key)
                if gid is None:
                    gid = index[key] = len(index)
                    verts = set(cell[a > 0].tolist()) | set(cell[list(sig[k])].tolist())
                    attached.append(tuple(sorted(verts)))
                cell_dofs[t, j] = gid
        self.cell_dofs = cell_dofs
        self.ndofs = len(index)
        self.attached = attached
        self.trace_dofs = np.array([self._on_boundary(v) for v in attached], dtype=bool)

    def _on_boundary(self, verts):
        mesh = self.mesh
        if len(verts) == 4:
            return False
        sid = mesh.find_simplex(verts)
        return sid is not None and mesh.is_boundary(len(verts) - 1, sid)

    def local_values(self, pts):
        pts = pts.on(self.mesh)
        mesh = self.mesh
        cells = pts.cells
        grads = mesh.grad_bary[cells]
        W, dW = whitney_local(self.level, pts.bary, grads, mesh.signs[cells], mesh.volumes[cells])
        lam = pts.bary
        A = self.alphas
        mono = np.prod(lam[:, None, :] ** A[None], axis=2)                # (n, nb)
        gmono = np.zeros(mono.shape + (3,))
        for i in range(4):
            e = A.copy()
            has = e[:, i] > 0
            e[has, i] -= 1
            coef = np.prod(lam[:, None, :] ** e[None], axis=2) * A[None, :, i]
            gmono += (coef * has[None])[..., None] * grads[:, None, i, :]
        Wk = W[:, self.sigmas]
        dWk = dW[:, self.sigmas] if self.level < 3 else None
        if self.level in (0, 3):
            val = mono * Wk
        else:
            val = mono[..., None] * Wk
        if self.level == 0:
            dval = Wk[..., None] * gmono + mono[..., None] * dWk
        elif self.level == 1:
            dval = np.cross(gmono, Wk) + mono[..., None] * dWk
        elif self.level == 2:
            dval = np.einsum("nkc,nkc->nk", gmono, Wk) + mono * dWk
        else:
            dval = np.zeros((len(cells), 0))
        return val, dval

    def basis_matrix(self, pts, derivative=False):
        if derivative and self.level == 3:
            raise LevelMismatch("level-3 fields have no derivative")
        val, dval = self.local_values(pts)
        ids = self.cell_dofs[pts.on(self.mesh).cells]
        return _sparse_comps(dval if derivative else val, ids, self.ndofs)

    def field(self, coeffs):
        return SpaceField(self, coeffs)


class DerivativeSpace:
    """Image of a space under the exterior derivative, as a spanning set."""

    def __init__(self, space):
        if space.level > 2:
            raise LevelMismatch("no exterior derivative above level 2")
        self.base = space
        self.mesh = space.mesh
        self.level = space.level + 1
        self.ndofs = space.ndofs
        self.cell_dofs = space.cell_dofs

    def basis_matrix(self, pts, derivative=False):
        if derivative:
            n = len(pts)
            return [sp.csr_matrix((n, self.ndofs)) for _ in range(_ncomp(self.level + 1))]
        return self.base.basis_matrix(pts, derivative=True)


class SpaceField(Field):
    """Coefficient vector of any space, evaluable as a field."""

    def __init__(self, space, coeffs):
        self.space = space
        self.mesh = space.mesh
        self.level = space.level
        self.coeffs = np.asarray(coeffs, dtype=float)

    def _eval(self, pts, derivative):
        comps = [B @ self.coeffs for B in self.space.basis_matrix(pts, derivative)]
        return comps[0] if len(comps) == 1 else np.column_stack(comps)

    def value(self, pts):
        return self._eval(pts, False)

    def dvalue(self, pts):
        return self._eval(pts, True)


# ---------------------------------------------------------------- Gram matrices
def gram(space, cells=None, degree=DEFAULT_DEGREE, derivative=False):
    """Sparse L2 Gram matrix of a space (or of its derivatives)."""
    pts = cell_points(space.mesh, cells, degree)
    W = sp.diags(pts.weights)
    comps = space.basis_matrix(pts, derivative)
    return sum((B.T @ W @ B) for B in comps).tocsr()


def graph_gram(space, cells=None, degree=DEFAULT_DEGREE, h=None):
    """``mass + h^2 stiffness`` (``h = 1`` gives the graph norm)."""
    M = gram(space, cells, degree)
    if space.level == 3:
        return M
    K = gram(space, cells, degree, derivative=True)
    return (M + (1.0 if h is None else h * h) * K).tocsr()


def local_grams(space, degree=DEFAULT_DEGREE):
    """Per-cell dense mass and derivative Gram blocks, shape (nt, nloc, nloc)."""
    mesh = space.mesh
    pts = cell_points(mesh, None, degree)
    nt = len(mesh.cells)
    val, dval = space.local_values(pts)
    nq = len(pts) // nt
    w = pts.weights.reshape(nt, nq)

    def block(arr):
        a = arr.reshape((nt, nq) + arr.shape[1:])
        if a.ndim == 3:
            return np.einsum("tq,tqi,tqj->tij", w, a, a)
        return np.einsum("tq,tqic,tqjc->tij", w, a, a)

    M = block(val)
    K = block(dval) if space.level < 3 else np.zeros_like(M)
    return M, K
