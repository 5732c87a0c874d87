"""Lowest-order boundary weights and their Worsey-Farin bulk extensions.

Weights are built level by level: vertex weights first, then edge weights
(which need the vertex weights of both endpoints), then face weights.
Representations on the Alfeld surface (surface-local ids of
``BoundaryComplex.alf``):

* vertex weights: level-2 coefficients per Alfeld triangle,
* edge weights: coefficients ``c`` of a tangential edge-form expansion ``w``;
  the weight itself is the twisted field ``n x w``,
* face weights: P1 coefficients per Alfeld vertex.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .fem import DiscreteField
from .splits import worsey_farin_split
from .surface import (BoundaryComplex, min_norm_preimage, surface_field_values,
                      weighted_patch_solve)

LEVEL_SPACE = {0: "a2", 1: "a1", 2: "a0"}


@dataclass
class BoundaryWeight:
    level: int
    anchor: int                 # mesh id of the boundary simplex
    coeffs: np.ndarray          # full Alfeld-surface coefficient vector
    support: np.ndarray         # base surface triangles of the patch
    eta: np.ndarray = None
    psi: np.ndarray = None
    diagnostics: dict = field(default_factory=dict)


class WeightSet:
    """All boundary weights of a mesh.

    ``zeta[l]`` is a sparse matrix whose row ``k`` holds the Alfeld-surface
    coefficients of the weight of the ``k``-th boundary ``l``-simplex
    (ordered as ``mesh.boundary_simplices(l)``).
    """

    def __init__(self, mesh, wf=None, keep_patches=False):
        self.mesh = mesh
        self.wf = wf if wf is not None else worsey_farin_split(mesh)
        self.bc = BoundaryComplex(mesh, self.wf)
        self.weights = {0: [], 1: [], 2: []}
        self.patches = {} if keep_patches else None
        self._build()

    # ------------------------------------------------------------ construction
    def _patch(self, dim, sid):
        P = self.bc.patch(dim, sid)
        if self.patches is not None:
            self.patches[(dim, sid)] = P
        return P

    def _build(self):
        mesh, bc = self.mesh, self.bc
        S, A = bc.base, bc.alf
        nA_tri, nA_edge, nA_vert = A.ntris, len(A.edges), len(A.verts)

        # vertex weights
        z0 = np.zeros((len(mesh.boundary_vertices), nA_tri))
        for k, v in enumerate(mesh.boundary_vertices):
            w = build_vertex_weight(self._patch(0, int(v)))
            z0[k] = w.coeffs
            self.weights[0].append(w)
        self._z0 = z0
        self.vrow = {int(v): k for k, v in enumerate(mesh.boundary_vertices)}

        # edge weights
        z1 = np.zeros((len(mesh.boundary_edges), nA_edge))
        for k, e in enumerate(mesh.boundary_edges):
            a, b = mesh.edges[e]
            # sum_v iota_ev zeta_v with iota = -1 at the tail, +1 at the head
            target = z0[self.vrow[int(b)]] - z0[self.vrow[int(a)]]
            w = build_edge_weight(self._patch(1, int(e)), target)
            z1[k] = w.coeffs
            self.weights[1].append(w)
        self._z1 = z1
        self.erow = {int(e): k for k, e in enumerate(mesh.boundary_edges)}

        # face weights
        z2 = np.zeros((len(mesh.boundary_faces), nA_vert))
        for k, f in enumerate(mesh.boundary_faces):
            target = np.zeros(nA_edge)
            for j, e in enumerate(mesh.face_edges[f]):
                target += mesh.d[1][f, e] * z1[self.erow[int(e)]]
            w = build_face_weight(self._patch(2, int(f)), target)
            z2[k] = w.coeffs
            self.weights[2].append(w)
        self._z2 = z2
        self.frow = {int(f): k for k, f in enumerate(mesh.boundary_faces)}
        self.zeta = [sp.csr_matrix(z0), sp.csr_matrix(z1), sp.csr_matrix(z2)]

    # ------------------------------------------------------------ evaluation
    def values(self, level, spts):
        """Weights at Alfeld surface points, shape (n_anchor, npts[, 3])."""
        A = self.bc.alf
        space_level = (2, 1, 0)[level]
        basis, _ = A.basis(space_level, spts.tri, spts.tri_bary, perp=(level == 1))
        ids = A.local_ids(space_level)[spts.tri]
        Z = self.zeta[level]
        n = len(spts.tri)
        if basis.ndim == 3:
            out = np.zeros((Z.shape[0], n, 3))
            for k in range(ids.shape[1]):
                coef = Z[:, ids[:, k]].toarray()
                out += coef[:, :, None] * basis[None, :, k, :]
            return out
        out = np.zeros((Z.shape[0], n))
        for k in range(ids.shape[1]):
            out += Z[:, ids[:, k]].toarray() * basis[None, :, k]
        return out

    def anchors(self, level):
        return self.mesh.boundary_simplices(level)

    # ------------------------------------------------------------ bulk extension
    def extension_coeffs(self, level):
        """Sparse (n_anchor, n_wf_dofs) coefficients of the bulk extensions.

        Level 0 weights extend into the WF face space, level 1 into the WF
        edge space, level 2 into the WF vertex space; only boundary dofs are
        nonzero.
        """
        A = self.bc.alf
        Z = self.zeta[level].tocoo()
        if level == 0:
            cols, n = A.faces[Z.col], len(self.wf.faces)
        elif level == 1:
            cols, n = A.edges[Z.col], len(self.wf.edges)
        else:
            cols, n = A.verts[Z.col], self.wf.nv
        return sp.csr_matrix((Z.data, (Z.row, cols)), shape=(Z.shape[0], n))

    def extension(self, level, k):
        c = self.extension_coeffs(level)[k].toarray().ravel()
        return DiscreteField(self.wf, 2 - level, c)


def build_weights(mesh, wf=None):
    return WeightSet(mesh, wf)


# ---------------------------------------------------------------- per-anchor builders
def _full(patch, space, local, n):
    out = np.zeros(n)
    out[getattr(patch, space)] = local
    return out


def build_vertex_weight(patch):
    """Vertex weight: eta - sdiv(mu sgrad psi), stored per Alfeld triangle."""
    bc = patch.bc
    S, A = bc.base, bc.alf
    v_mesh = patch.anchor[1]
    v_loc = patch.index["v0"][S.vloc[v_mesh]]
    eta = 1.0 / patch.area
    M0 = patch.mass["v0"]
    rhs = -eta * M0.sum(axis=1)
    rhs[v_loc] += 1.0
    psi, res = weighted_patch_solve(patch, 0, rhs, return_residual=True)
    coeff_full = np.zeros(len(S.verts))
    coeff_full[patch.v0] = psi
    g = S.sgrad_face_values(patch.faces, coeff_full)              # (nf, 3)
    gface = dict(zip(patch.faces.tolist(), g))
    vals = np.empty(len(patch.atris))
    for i, t in enumerate(patch.atris):
        f = bc.alf_parent[t]
        # local position of the barycenter vertex in the Alfeld triangle
        j = int(np.argmax(A.tris[t]))
        vals[i] = eta - gface[int(f)] @ A.grads[t, j]
    local = vals * A.areas[patch.atris] * A.orient[patch.atris]
    coeffs = _full(patch, "a2", local, A.ntris)
    return BoundaryWeight(0, v_mesh, coeffs, patch.faces, eta=np.array([eta]), psi=psi,
                          diagnostics={"weighted_residual": res})


def build_edge_weight(patch, target_full):
    """Edge weight from the endpoint vertex weights (``target_full`` holds
    sum_v iota_ev zeta_v on all Alfeld triangles)."""
    bc = patch.bc
    S, A = bc.base, bc.alf
    e_mesh = patch.anchor[1]
    outside = np.delete(target_full, patch.atris)
    target = target_full[patch.atris]
    # sdiv eta = - sum_v iota_ev zeta_v
    eta_loc = min_norm_preimage(patch, "sdiv", -target)
    eta_full = _full(patch, "a1", eta_loc, len(A.edges))
    # rhs_i = phi_e(u_i) - (eta, u_i)
    cross = bc.cross_mass_perp()
    rhs = np.zeros(len(patch.v1))
    for t in patch.atris:
        f = bc.alf_parent[t]
        ce = eta_full[A.tri_edges[t]]
        loc = patch.index["v1"][S.tri_edges[f]]
        rhs[loc] -= ce @ cross[t]
    rhs[patch.index["v1"][S.eloc[e_mesh]]] += 1.0
    psi, res = weighted_patch_solve(patch, 1, rhs, return_residual=True)
    full_psi = np.zeros(len(S.edges))
    full_psi[patch.v1] = psi
    s = S.scurl_face_values(patch.faces, full_psi)
    coeffs = eta_full.copy()
    # srot(mu s) in twisted edge-form coefficients: -s_f on the spokes of face f
    for f, sf in zip(patch.faces, s):
        for t in bc.children[f]:
            b = A.tris[t].max()
            for e in A.tri_edges[t]:
                if b in A.edge_verts[e]:
                    # spoke oriented base vertex -> barycenter
                    coeffs[e] = eta_full[e] - sf
    return BoundaryWeight(1, e_mesh, coeffs, patch.faces, eta=eta_loc, psi=psi,
                          diagnostics={"weighted_residual": res,
                                       "target_outside_patch": float(np.abs(outside).max(initial=0.0))})


def build_face_weight(patch, target_full):
    """Face weight: the srot preimage of sum_e iota_fe zeta_e."""
    A = patch.bc.alf
    f_mesh = patch.anchor[1]
    outside_mask = np.ones(len(A.edges), bool)
    outside_mask[patch.a1] = False
    leak = float(np.abs(target_full[outside_mask]).max(initial=0.0))
    eta_loc = min_norm_preimage(patch, "srot", target_full[patch.a1])
    coeffs = _full(patch, "a0", eta_loc, len(A.verts))
    return BoundaryWeight(2, f_mesh, coeffs, patch.faces, eta=eta_loc,
                          diagnostics={"target_outside_interior": leak})


def weight_surface_values(ws, level, coeffs, spts):
    A = ws.bc.alf
    return surface_field_values(A, (2, 1, 0)[level], coeffs, spts, perp=(level == 1))


# ---------------------------------------------------------------- checks
def duality_gram(ws, level, spts=None):
    """Gram matrix ``(zeta_r, tr W_r')`` over boundary anchors (should be I)."""
    from .fem import trace_kind, trace_values
    mesh = ws.mesh
    if spts is None:
        spts = ws.bc.alf.points()
    Z = ws.values(level, spts)
    anchors = ws.anchors(level)
    G = np.zeros((len(anchors), len(anchors)))
    for j, s in enumerate(anchors):
        tv = trace_values(trace_kind(level), DiscreteField.basis(mesh, level, int(s)), spts)
        prod = (Z * tv[None]).sum(-1) if Z.ndim == 3 else Z * tv[None]
        G[:, j] = prod @ spts.weights
    return G


def derivative_residuals(ws):
    """Coefficient residuals of the two derivative relations.

    Edge weights: ``scurl zeta_e = sum_v iota_ev zeta_v``; face weights:
    ``srot zeta_f = sum_e iota_fe zeta_e`` (``srot`` acts as ``-sgrad`` on
    coefficients).  Returns ``(edge_residual, face_residual)``.
    """
    mesh, A = ws.mesh, ws.bc.alf
    z0, z1, z2 = (z.toarray() for z in ws.zeta)
    rhs1 = np.array([z0[ws.vrow[int(b)]] - z0[ws.vrow[int(a)]]
                     for a, b in mesh.edges[mesh.boundary_edges]])
    rhs2 = np.array([sum(mesh.d[1][f, e] * z1[ws.erow[int(e)]] for e in mesh.face_edges[f])
                     for f in mesh.boundary_faces])
    r1 = np.abs((A.C @ z1.T).T - rhs1).max(initial=0.0)
    r2 = np.abs((-(A.G @ z2.T)).T - rhs2).max(initial=0.0)
    return float(r1), float(r2)


def face_flux_signs(mesh):
    """``tr3(div W_f)`` for boundary faces, from the incidence matrix.

    The level-3 dof of a cell is its signed integral, so the domain integral
    of ``div W_f`` is the orientation-weighted column sum of the incidence.
    """
    return np.asarray(mesh.signs @ mesh.d[2]).ravel()[mesh.boundary_faces]


def partition_of_unity_error(ws, spts=None):
    """``max |sum_f tr3(div W_f) zeta_f - 1|`` at surface quadrature points."""
    if spts is None:
        spts = ws.bc.alf.points()
    pou = face_flux_signs(ws.mesh) @ ws.values(2, spts)
    return float(np.abs(pou - 1.0).max())
