"""Surface finite elements on boundary patches.

A :class:`SurfaceMesh` wraps the boundary triangles of a tetrahedral mesh
(the base mesh, or its Worsey-Farin split whose boundary is the Alfeld split).
Surface Whitney forms are the traces of the bulk ones:

* level 0: hat functions,
* level 1: tangential edge forms ``w``; the twisted space stores ``n x w``
  with the same coefficients,
* level 2: ``o_T / |T|`` where ``o_T`` compares the sorted-vertex normal of
  ``T`` with the outward normal.

In these bases sgrad and scurl are the incidence matrices and sdiv of a
twisted field is ``-scurl``.  The rotated gradient is ``srot m = sgrad m x n``,
the orientation for which ``(scurl v, w) = (v, srot w)``; on twisted
coefficients it acts as ``-sgrad``.
"""
import numpy as np
import scipy.linalg as sla

from .errors import NotContractible, NotInRange, SingularSystem, UnsupportedPair
from .fem import SurfacePoints, _embed_bary
from .mesh import TRI_EDGES, patch_is_disc
from .quadrature import simplex_rule

RANK_TOL = 1e-9
LOCAL_MASS_DEGREE = 4


class SurfaceMesh:
    """Boundary triangles of ``mesh`` with surface-local numbering.

    ``verts``, ``edges``, ``faces`` hold the ids in ``mesh``; ``tris`` and
    ``tri_edges`` use surface-local vertex / edge indices.
    """

    def __init__(self, mesh):
        self.mesh = mesh
        self.faces = mesh.boundary_faces.copy()
        self.verts = mesh.boundary_vertices.copy()
        self.edges = mesh.boundary_edges.copy()
        vloc = -np.ones(mesh.nv, dtype=np.int64)
        vloc[self.verts] = np.arange(len(self.verts))
        eloc = -np.ones(len(mesh.edges), dtype=np.int64)
        eloc[self.edges] = np.arange(len(self.edges))
        floc = -np.ones(len(mesh.faces), dtype=np.int64)
        floc[self.faces] = np.arange(len(self.faces))
        self.vloc, self.eloc, self.floc = vloc, eloc, floc
        self.tris = vloc[mesh.faces[self.faces]]
        self.tri_edges = eloc[mesh.face_edges[self.faces]]
        self.edge_verts = vloc[mesh.edges[self.edges]]
        self.normals = mesh.outward_normals[self.faces]
        self.orient = np.sign(np.einsum("nc,nc->n", mesh.face_normals[self.faces], self.normals))
        self.areas = mesh.face_areas[self.faces]
        self.G = mesh.d[0][self.edges][:, self.verts].toarray()
        self.C = mesh.d[1][self.faces][:, self.edges].toarray()
        p = mesh.vertices[mesh.faces[self.faces]]
        self.corners = p
        jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)      # (nb, 3, 2)
        pinv = np.linalg.pinv(jac)                                          # (nb, 2, 3)
        self.grads = np.concatenate([-pinv.sum(axis=1, keepdims=True), pinv], axis=1)
        self._local_mass = {}

    @property
    def ntris(self):
        return len(self.tris)

    def bary_at(self, tri, x):
        """Barycentric coordinates of points ``x`` in surface triangles ``tri``."""
        g = self.grads[tri]
        lam = np.einsum("nij,nj->ni", g, x - self.corners[tri, 0])
        lam[:, 0] += 1.0
        return lam

    def basis(self, level, tri, bary, perp=False):
        """Local surface basis at points (values; second item = derivative).

        level 0 -> (n,3) values, (n,3,3) sgrad; level 1 -> (n,3,3) values
        (twisted if ``perp``), (n,3) scurl (or sdiv when ``perp``);
        level 2 -> (n,1) values.
        """
        g = self.grads[tri]
        n = self.normals[tri]
        if level == 0:
            return bary.copy(), g.copy()
        if level == 1:
            val = np.empty((len(tri), 3, 3))
            der = np.empty((len(tri), 3))
            for k, (i, j) in enumerate(TRI_EDGES):
                val[:, k] = bary[:, i, None] * g[:, j] - bary[:, j, None] * g[:, i]
                der[:, k] = 2.0 * np.einsum("nc,nc->n", np.cross(g[:, i], g[:, j]), n)
            if perp:
                val = np.cross(n[:, None, :], val)
                der = -der
            return val, der
        if level == 2:
            return (self.orient[tri] / self.areas[tri])[:, None], None
        raise UnsupportedPair(f"no surface level {level}")

    def local_ids(self, level):
        return [self.tris, self.tri_edges, np.arange(self.ntris)[:, None]][level]

    def points(self, tris=None, degree=6):
        """Surface quadrature points (hosted in the bulk mesh)."""
        if tris is None:
            tris = np.arange(self.ntris)
        tris = np.asarray(tris, dtype=np.int64)
        mesh = self.mesh
        faces = self.faces[tris]
        hosts = mesh.face_cells[faces, 0]
        cv = mesh.cells[hosts]
        fv = mesh.faces[faces]
        positions = np.argmax(cv[:, None, :] == fv[:, :, None], axis=2)
        rule = simplex_rule(2, degree)
        nq = rule.npoints
        bulk_bary = _embed_bary(rule.bary, positions).reshape(-1, 4)
        w = np.tile(rule.weights, len(tris)) * np.repeat(2.0 * self.areas[tris], nq)
        sp_ = SurfacePoints(mesh, np.repeat(hosts, nq), bulk_bary, w,
                            np.repeat(self.normals[tris], nq, axis=0), np.repeat(faces, nq))
        sp_.tri = np.repeat(tris, nq)
        sp_.tri_bary = np.tile(rule.bary, (len(tris), 1))
        return sp_

    def local_mass(self, level, perp=False):
        """Per-triangle local mass matrices (nb, k, k)."""
        key = (level, perp)
        if key not in self._local_mass:
            if level == 2:
                m = (1.0 / self.areas)[:, None, None]
            else:
                rule = simplex_rule(2, LOCAL_MASS_DEGREE)
                nq = rule.npoints
                tri = np.repeat(np.arange(self.ntris), nq)
                bary = np.tile(rule.bary, (self.ntris, 1))
                val, _ = self.basis(level, tri, bary, perp)
                w = (np.tile(rule.weights, self.ntris) * np.repeat(2 * self.areas, nq))
                if level == 0:
                    prod = np.einsum("ni,nj,n->nij", val, val, w)
                else:
                    prod = np.einsum("nic,njc,n->nij", val, val, w)
                m = prod.reshape(self.ntris, nq, 3, 3).sum(axis=1)
            self._local_mass[key] = m
        return self._local_mass[key]

    def sgrad_face_values(self, tri, coeffs):
        """Constant surface gradient of a P1 function on each triangle."""
        return np.einsum("ni,nic->nc", coeffs[self.tris[tri]], self.grads[tri])

    def scurl_face_values(self, tri, coeffs):
        """Constant scurl of an edge-form expansion on each triangle."""
        return self.orient[tri] * (self.C[tri] @ coeffs) / self.areas[tri]


def surface_field_values(smesh, level, coeffs, spts, perp=False):
    """Evaluate a surface Whitney expansion (surface-local coefficients)."""
    val, _ = smesh.basis(level, spts.tri, spts.tri_bary, perp)
    c = np.asarray(coeffs)[smesh.local_ids(level)[spts.tri]]
    if val.ndim == 3:
        return np.einsum("nk,nkc->nc", c, val)
    return np.einsum("nk,nk->n", c, val)


def surface_derivative_values(smesh, level, coeffs, spts, perp=False):
    _, der = smesh.basis(level, spts.tri, spts.tri_bary, perp)
    c = np.asarray(coeffs)[smesh.local_ids(level)[spts.tri]]
    if der.ndim == 3:
        return np.einsum("nk,nkc->nc", c, der)
    return np.einsum("nk,nk->n", c, der)


class BoundaryComplex:
    """Base boundary surface together with its Alfeld split.

    The Alfeld surface is taken as the boundary of the Worsey-Farin split,
    so surface coefficients on it are directly WF trace dofs.
    """

    def __init__(self, mesh, wf):
        self.mesh = mesh
        self.wf = wf
        self.base = SurfaceMesh(mesh)
        self.alf = SurfaceMesh(wf)
        par_face = wf.boundary_parent_face[self.alf.floc[self.alf.faces]]
        self.alf_parent = self.base.floc[par_face]
        order = np.argsort(self.alf_parent, kind="stable")
        self.children = order.reshape(-1, 3)
        nvb = mesh.nv + len(mesh.cells)
        # the barycenter of each Alfeld triangle's parent is its largest vertex
        self.alf_bary_vertex = self.alf.tris.max(axis=1)
        self.is_barycenter = self.alf.verts >= nvb
        self._mu = None
        self._cross = None

    # bubble weight mu: P1 on the Alfeld split, 1 at barycenters, 0 elsewhere
    def mu_coeffs(self):
        return self.is_barycenter.astype(float)

    def mu_face_integrals(self):
        if self._mu is None:
            m0 = self.alf.local_mass(0)
            mu = self.mu_coeffs()[self.alf.tris]                       # (nA, 3)
            per_tri = np.einsum("nij,nj->n", m0, mu)                   # integral of mu
            self._mu = np.bincount(self.alf_parent, weights=per_tri, minlength=self.base.ntris)
        return self._mu

    def cross_mass_perp(self):
        """Per Alfeld triangle: int (n x w_k^A) . u_i^S, shape (nA, 3, 3) [k, i]."""
        if self._cross is None:
            rule = simplex_rule(2, LOCAL_MASS_DEGREE)
            nq = rule.npoints
            nA = self.alf.ntris
            tri = np.repeat(np.arange(nA), nq)
            bary = np.tile(rule.bary, (nA, 1))
            valA, _ = self.alf.basis(1, tri, bary, perp=True)
            x = np.einsum("ni,nic->nc", bary, self.alf.corners[tri])
            ptri = self.alf_parent[tri]
            valS, _ = self.base.basis(1, ptri, self.base.bary_at(ptri, x))
            w = np.tile(rule.weights, nA) * np.repeat(2 * self.alf.areas, nq)
            prod = np.einsum("nkc,nic,n->nki", valA, valS, w)
            self._cross = prod.reshape(nA, nq, 3, 3).sum(axis=1)
        return self._cross

    def patch(self, dim, sid, check=True):
        return SurfacePatch(self, dim, sid, check=check)


def _assemble(local, ids, index, n):
    out = np.zeros((n, n))
    for m, row in zip(local, ids):
        r = index[row]
        keep = r >= 0
        rk = r[keep]
        out[np.ix_(rk, rk)] += m[np.ix_(keep, keep)]
    return out


def _index(ids, size):
    out = -np.ones(size, dtype=np.int64)
    out[ids] = np.arange(len(ids))
    return out


class SurfacePatch:
    """Extended boundary star of a boundary simplex with its local spaces.

    Base spaces on F(esb): ``v0`` (patch vertices), ``v1`` (patch edges),
    ``v2`` (patch faces).  Constrained Alfeld spaces: ``a0`` (interior Alfeld
    vertices), ``a1`` (interior Alfeld edges; twisted for sdiv), ``a2``
    (Alfeld triangles; zero mean is a constraint).  All ids are
    surface-local.
    """

    def __init__(self, bc, dim, sid, check=True):
        mesh = bc.mesh
        self.bc = bc
        self.anchor = (dim, int(sid))
        faces_mesh = mesh.extended_boundary_star(dim, sid)
        if check and not patch_is_disc(mesh, faces_mesh):
            raise NotContractible(f"extended boundary star of {dim}:{sid} is not a disc")
        S, A = bc.base, bc.alf
        self.h = mesh.h(dim, sid)
        self.faces = S.floc[faces_mesh]
        self.v0 = np.unique(S.tris[self.faces])
        self.v1 = np.unique(S.tri_edges[self.faces])
        self.v2 = self.faces
        ecount = np.bincount(S.tri_edges[self.faces].ravel(), minlength=len(S.edges))
        self.bnd_edges = np.nonzero(ecount == 1)[0]
        self.bnd_verts = np.unique(S.edge_verts[self.bnd_edges])
        self.atris = np.sort(bc.children[self.faces].ravel())
        averts = np.unique(A.tris[self.atris])
        aedges = np.unique(A.tri_edges[self.atris])
        acount = np.bincount(A.tri_edges[self.atris].ravel(), minlength=len(A.edges))
        self.a_bnd_edges = np.nonzero(acount == 1)[0]
        a_bnd_verts = np.unique(A.edge_verts[self.a_bnd_edges])
        self.a0 = np.setdiff1d(averts, a_bnd_verts)
        self.a1 = np.setdiff1d(aedges, self.a_bnd_edges)
        self.a2 = self.atris
        self.area = float(S.areas[self.faces].sum())

        idx = {k: _index(getattr(self, k), n) for k, n in
               (("v0", len(S.verts)), ("v1", len(S.edges)), ("v2", S.ntris),
                ("a0", len(A.verts)), ("a1", len(A.edges)), ("a2", A.ntris))}
        self.index = idx
        self.mass = {
            "v0": _assemble(S.local_mass(0)[self.faces], S.tris[self.faces], idx["v0"], len(self.v0)),
            "v1": _assemble(S.local_mass(1)[self.faces], S.tri_edges[self.faces], idx["v1"], len(self.v1)),
            "v2": np.diag(1.0 / S.areas[self.faces]),
            "a0": _assemble(A.local_mass(0)[self.atris], A.tris[self.atris], idx["a0"], len(self.a0)),
            "a1": _assemble(A.local_mass(1)[self.atris], A.tri_edges[self.atris], idx["a1"], len(self.a1)),
            "a2": np.diag(1.0 / A.areas[self.atris]),
        }
        self.ops = {
            "sgrad": S.G[np.ix_(self.v1, self.v0)],
            "scurl": S.C[np.ix_(self.v2, self.v1)],
            "srot": -A.G[np.ix_(self.a1, self.a0)],
            "sdiv": -A.C[np.ix_(self.a2, self.a1)],
        }

    @property
    def dims(self):
        return {k: len(getattr(self, k)) for k in ("v0", "v1", "v2", "a0", "a1", "a2")}

    def integral_row(self, space):
        """Row vector mapping level-2 coefficients to their integral."""
        S = self.bc.base if space == "v2" else self.bc.alf
        return S.orient[getattr(self, space)]


OPERATORS = {
    # tag: (domain space, codomain space, domain mass key, codomain mass key)
    "sgrad": ("v0", "v1"),
    "scurl": ("v1", "v2"),
    "srot": ("a0", "a1"),
    "sdiv": ("a1", "a2"),
}


class SurfaceOperatorMatrix:
    def __init__(self, tag, domain, codomain, matrix):
        self.tag = tag
        self.domain = domain
        self.codomain = codomain
        self.matrix = matrix

    def __matmul__(self, x):
        return self.matrix @ x


def build_patch(bc, anchor):
    return SurfacePatch(bc, *anchor)


def operator_matrix(patch, tag):
    if tag not in OPERATORS:
        raise UnsupportedPair(f"no surface operator {tag!r} on patch spaces")
    dom, cod = OPERATORS[tag]
    return SurfaceOperatorMatrix(tag, dom, cod, patch.ops[tag])


def null_space(D, tol=RANK_TOL):
    if D.size == 0:
        return np.eye(D.shape[1])
    u, s, vt = np.linalg.svd(D)
    if not len(s) or s[0] == 0:
        return np.eye(D.shape[1])
    rank = int((s > tol * s[0]).sum())
    return vt[rank:].T.copy()


def matrix_rank(D, tol=RANK_TOL):
    if D.size == 0:
        return 0
    s = np.linalg.svd(D, compute_uv=False)
    return int((s > tol * s[0]).sum()) if len(s) and s[0] > 0 else 0


def kernel_complement(patch, tag):
    """(Z, Zperp): kernel basis and its mass-orthogonal complement."""
    op = operator_matrix(patch, tag)
    M = patch.mass[op.domain]
    Z = null_space(op.matrix)
    if Z.shape[1] == 0:
        return Z, np.eye(M.shape[0])
    Zp = sla.null_space(Z.T @ M, rcond=RANK_TOL)
    return Z, Zp


def mu_weighted_stiffness(patch, level):
    """Matrix of (mu_sigma D a, D b) on the base patch space of ``level``."""
    bc = patch.bc
    S = bc.base
    faces = patch.faces
    mu = bc.mu_face_integrals()[faces]
    if level == 0:
        n = len(patch.v0)
        A = np.zeros((n, n))
        for f, m in zip(faces, mu):
            loc = patch.index["v0"][S.tris[f]]
            g = S.grads[f]
            A[np.ix_(loc, loc)] += m * g @ g.T
        return A
    if level == 1:
        Cf = patch.ops["scurl"] * (S.orient[faces] / S.areas[faces])[:, None]
        return Cf.T @ (mu[:, None] * Cf)
    raise UnsupportedPair(f"weighted solve only for levels 0 and 1, got {level}")


def weighted_patch_solve(patch, level, rhs, return_residual=False):
    """Solve (mu D psi, D u) = rhs(u) for psi in the complement of ker D."""
    tag = ("sgrad", "scurl")[level] if level in (0, 1) else None
    if tag is None:
        raise UnsupportedPair(f"weighted solve only for levels 0 and 1, got {level}")
    A = mu_weighted_stiffness(patch, level)
    rhs = np.asarray(rhs, dtype=float)
    _, Q = kernel_complement(patch, tag)
    K = Q.T @ A @ Q
    ev = np.linalg.eigvalsh(K)
    if ev.min() <= RANK_TOL * max(ev.max(), 1e-300):
        raise SingularSystem(f"reduced weighted matrix singular on patch {patch.anchor}")
    psi = Q @ np.linalg.solve(K, Q.T @ rhs)
    if return_residual:
        res = np.linalg.norm(A @ psi - rhs) / max(np.linalg.norm(rhs), 1e-300)
        return psi, res
    return psi


def min_norm_preimage(patch, tag, target, tol=1e-10):
    """Minimum-mass-norm x with D x = target, D the patch operator ``tag``."""
    op = operator_matrix(patch, tag)
    target = np.asarray(target, dtype=float)
    if not np.any(target):
        return np.zeros(op.matrix.shape[1])
    _, Q = kernel_complement(patch, tag)
    DQ = op.matrix @ Q
    y, *_ = np.linalg.lstsq(DQ, target, rcond=None)
    x = Q @ y
    res = np.linalg.norm(op.matrix @ x - target) / np.linalg.norm(target)
    if res > tol:
        raise NotInRange(f"{tag} preimage residual {res:.3e} on patch {patch.anchor}")
    return x


POINCARE_VARIANTS = {"onto0": "sgrad", "onto1": "scurl", "onto0m": "srot", "onto1m": "sdiv"}


class PoincareEstimate:
    def __init__(self, anchor, variant, constant):
        self.anchor = anchor
        self.variant = variant
        self.constant = constant

    def __repr__(self):
        return f"PoincareEstimate({self.anchor}, {self.variant}, {self.constant:.4g})"


def poincare_constant(patch, variant):
    tag = POINCARE_VARIANTS[variant]
    op = operator_matrix(patch, tag)
    M = patch.mass[op.domain]
    Mc = patch.mass[op.codomain]
    _, Q = kernel_complement(patch, tag)
    A = Q.T @ M @ Q
    B = Q.T @ op.matrix.T @ Mc @ op.matrix @ Q
    try:
        lam = sla.eigh(A, B, eigvals_only=True)
    except np.linalg.LinAlgError:
        raise SingularSystem(f"Poincare pencil singular for {variant} on {patch.anchor}") from None
    c = float(np.sqrt(lam.max())) / patch.h
    if not np.isfinite(c) or c <= 0:
        raise SingularSystem(f"Poincare constant not finite for {variant} on {patch.anchor}")
    return PoincareEstimate(patch.anchor, variant, c)


def exactness_report(patch):
    """Rank-chain data for both local sequences; all entries should be True."""
    G, C = patch.ops["sgrad"], patch.ops["scurl"]
    R, D = patch.ops["srot"], patch.ops["sdiv"]
    rG, rC = matrix_rank(G), matrix_rank(C)
    rR, rD = matrix_rank(R), matrix_rank(D)
    n0, n1, n2 = G.shape[1], G.shape[0], C.shape[0]
    a0, a1, a2 = R.shape[1], R.shape[0], D.shape[0]
    means = patch.integral_row("a2") @ D
    return {
        "ker_sgrad_is_constants": n0 - rG == 1,
        "ker_scurl_is_range_sgrad": n1 - rC == rG,
        "scurl_onto": rC == n2,
        "srot_injective": a0 == rR,
        "ker_sdiv_is_range_srot": a1 - rD == rR,
        "sdiv_onto_zero_mean": rD == a2 - 1,
        "sdiv_mean_free": bool(np.abs(means).max(initial=0.0) <= 1e-12 * max(1.0, np.abs(D).max())),
        "curl_grad_zero": bool(np.abs(C @ G).max(initial=0.0) == 0),
        "div_rot_zero": bool(np.abs(D @ R).max(initial=0.0) == 0),
    }
