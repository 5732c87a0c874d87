import numpy as np
import pytest

from derham_trace.errors import NotContractible, NotInRange, UnsupportedPair
from derham_trace.mesh import annulus_faces
from derham_trace.surface import (POINCARE_VARIANTS, SurfacePatch, exactness_report,
                                  kernel_complement, min_norm_preimage, operator_matrix,
                                  poincare_constant, surface_derivative_values,
                                  surface_field_values, weighted_patch_solve)


def _full(n, ids, local):
    out = np.zeros(n)
    out[ids] = local
    return out


def _face_patch(mesh, bc, k=0):
    return bc.patch(2, int(mesh.boundary_faces[k]))


def test_patch_dimensions(cube2, bc2):
    # vertex patch on a cube face: P1 dofs = patch vertices
    v = [int(x) for x in cube2.boundary_vertices
         if len(cube2.boundary_star(0, int(x))) == 6][0]
    P = bc2.patch(0, v)
    assert P.dims["v0"] == len(np.unique(cube2.faces[cube2.boundary_star(0, v)]))
    assert len(P.faces) == 6


def test_mu_vanishes_on_parent_vertices(bc2):
    mu = bc2.mu_coeffs()
    A = bc2.alf
    parent = A.verts < bc2.mesh.nv
    assert np.all(mu[parent] == 0) and np.all(mu[~parent] == 1)


def test_exactness_on_every_patch(cube2, bc2):
    for dim in range(3):
        for sid in cube2.boundary_simplices(dim):
            rep = exactness_report(bc2.patch(dim, int(sid)))
            assert all(rep.values()), (dim, sid, rep)


def test_kernel_of_sgrad_is_constants(cube2, bc2):
    P = _face_patch(cube2, bc2, 3)
    Z, Zp = kernel_complement(P, "sgrad")
    assert Z.shape[1] == 1
    assert np.allclose(Z[:, 0] / Z[0, 0], 1.0)
    assert Z.shape[1] + Zp.shape[1] == P.dims["v0"]
    assert np.abs(Z.T @ P.mass["v0"] @ Zp).max() <= 1e-12


def test_srot_kernel_trivial(cube2, bc2):
    P = _face_patch(cube2, bc2, 5)
    Z, Zp = kernel_complement(P, "srot")
    assert Z.shape[1] == 0 and Zp.shape[1] == P.dims["a0"]


def _alfeld_pairings(P):
    """Quadrature pairings on the Alfeld patch from pointwise fields."""
    A = P.bc.alf
    spts = A.points(P.atris, degree=4)
    n = spts.normals
    nA0, nA1, nA2 = len(A.verts), len(A.edges), A.ntris
    edges = np.unique(A.tri_edges[P.atris])
    return A, spts, n, nA0, nA1, nA2, edges


def test_adjoint_scurl_srot(cube2, bc2):
    # (scurl v, w) = (v, srot w) with srot w = sgrad w x n, w zero on the patch boundary
    P = _face_patch(cube2, bc2, 2)
    A, spts, n, nA0, nA1, _, edges = _alfeld_pairings(P)
    w = spts.weights
    worst = 0.0
    for e in edges:
        ce = _full(nA1, [e], 1.0)
        v = surface_field_values(A, 1, ce, spts)
        cv = surface_derivative_values(A, 1, ce, spts)
        for a in P.a0:
            ca = _full(nA0, [a], 1.0)
            m = surface_field_values(A, 0, ca, spts)
            rot = np.cross(surface_derivative_values(A, 0, ca, spts), n)
            lhs = w @ (cv * m)
            rhs = w @ np.einsum("nc,nc->n", v, rot)
            worst = max(worst, abs(lhs - rhs))
    assert worst <= 1e-10


def test_adjoint_sdiv_sgrad(cube2, bc2):
    # (sdiv v, w) = -(v, sgrad w) for twisted v vanishing tangentially on the patch boundary
    P = _face_patch(cube2, bc2, 7)
    A, spts, n, nA0, nA1, _, _ = _alfeld_pairings(P)
    w = spts.weights
    verts = np.unique(A.tris[P.atris])
    worst = 0.0
    for e in P.a1:
        ce = _full(nA1, [e], 1.0)
        v = surface_field_values(A, 1, ce, spts, perp=True)
        dv = surface_derivative_values(A, 1, ce, spts, perp=True)
        for a in verts:
            ca = _full(nA0, [a], 1.0)
            m = surface_field_values(A, 0, ca, spts)
            g = surface_derivative_values(A, 0, ca, spts)
            worst = max(worst, abs(w @ (dv * m) + w @ np.einsum("nc,nc->n", v, g)))
    assert worst <= 1e-10


def test_srot_matrix_matches_pointwise_rotation(cube2, bc2, rng):
    P = _face_patch(cube2, bc2, 4)
    A, spts, n, nA0, nA1, _, _ = _alfeld_pairings(P)
    c = rng.standard_normal(len(P.a0))
    full0 = _full(nA0, P.a0, c)
    rot = np.cross(surface_derivative_values(A, 0, full0, spts), n)
    full1 = _full(nA1, P.a1, operator_matrix(P, "srot") @ c)
    assert np.allclose(surface_field_values(A, 1, full1, spts, perp=True), rot, atol=1e-12)


def test_operator_compositions_vanish(cube2, bc2):
    P = _face_patch(cube2, bc2, 1)
    assert np.abs(P.ops["scurl"] @ P.ops["sgrad"]).max() == 0
    assert np.abs(P.ops["sdiv"] @ P.ops["srot"]).max() == 0
    assert np.abs(P.ops["sgrad"] @ np.ones(P.dims["v0"])).max() == 0


def test_sdiv_has_zero_mean(cube2, bc2, rng):
    P = _face_patch(cube2, bc2, 6)
    A, spts, _, _, nA1, _, _ = _alfeld_pairings(P)
    x = _full(nA1, P.a1, rng.standard_normal(len(P.a1)))
    assert abs(spts.weights @ surface_derivative_values(A, 1, x, spts, perp=True)) <= 1e-12


def test_unknown_operator(cube2, bc2):
    with pytest.raises(UnsupportedPair):
        operator_matrix(_face_patch(cube2, bc2), "laplace")


def test_min_norm_preimage(cube2, bc2, rng):
    P = _face_patch(cube2, bc2, 0)
    for tag in ("sgrad", "scurl", "srot", "sdiv"):
        D = P.ops[tag]
        assert np.all(min_norm_preimage(P, tag, np.zeros(D.shape[0])) == 0)
        t = D @ rng.standard_normal(D.shape[1])
        x = min_norm_preimage(P, tag, t)
        assert np.abs(D @ x - t).max() <= 1e-10 * np.abs(t).max()
        # minimum norm: mass-orthogonal to the kernel
        Z, _ = kernel_complement(P, tag)
        dom = {"sgrad": "v0", "scurl": "v1", "srot": "a0", "sdiv": "a1"}[tag]
        if Z.shape[1]:
            assert np.abs(Z.T @ P.mass[dom] @ x).max() <= 1e-10 * max(1, np.abs(x).max())


def test_preimage_of_non_range_target(cube2, bc2):
    P = _face_patch(cube2, bc2, 0)
    t = np.ones(P.ops["sdiv"].shape[0]) * P.bc.alf.orient[P.a2]   # constant, nonzero mean
    with pytest.raises(NotInRange):
        min_norm_preimage(P, "sdiv", t)


def test_weighted_solve(cube2, bc2, rng):
    P = _face_patch(cube2, bc2, 8)
    assert np.all(weighted_patch_solve(P, 0, np.zeros(P.dims["v0"])) == 0)
    rhs = rng.standard_normal(P.dims["v1"])
    _, Q = kernel_complement(P, "scurl")
    psi = weighted_patch_solve(P, 1, rhs)
    from derham_trace.surface import mu_weighted_stiffness
    K = mu_weighted_stiffness(P, 1)
    assert np.linalg.eigvalsh(Q.T @ K @ Q).min() > 0
    assert np.allclose(Q.T @ (K @ psi), Q.T @ rhs, atol=1e-10)


def test_poincare_constants_finite(cube2, bc2):
    for dim in range(3):
        sid = int(cube2.boundary_simplices(dim)[0])
        P = bc2.patch(dim, sid)
        for variant in POINCARE_VARIANTS:
            c = poincare_constant(P, variant).constant
            assert np.isfinite(c) and c > 0


def test_annulus_patch_rejected(cube2, bc2, monkeypatch):
    ring = np.asarray(annulus_faces(cube2))
    # a patch whose extended boundary star is an annulus must refuse to build
    monkeypatch.setattr(cube2, "extended_boundary_star", lambda d, s: ring)
    with pytest.raises(NotContractible):
        SurfacePatch(bc2, 0, int(cube2.boundary_vertices[0]))
