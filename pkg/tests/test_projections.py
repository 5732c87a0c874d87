import numpy as np
import pytest

from derham_trace.catalog import (admissible, bubble, derivative_of_admissible, gradient_of,
                                  polynomials, trig)
from derham_trace.errors import NotBoundarySimplex
from derham_trace.fem import (AnalyticField, DiscreteField, FieldSum, boundary_points,
                              cell_points, graph_norm, l2_norm, local_dofs, ndofs,
                              trace_kind, trace_values)
from derham_trace.mesh import classify
from derham_trace.projections import (CellMaskedField, alpha_eval, apply_P0, apply_Pi,
                                      apply_Pib, apply_Pib3, canonical_dof_matrix,
                                      interior_project, locality_check, pib_bound_ratio)
from derham_trace.spaces import EnrichedSpace, WhitneySpace
from derham_trace.studies import pib_bound_constants


def _one(level):
    return AnalyticField(0, lambda x: np.ones(len(x)), lambda x: np.zeros((len(x), 3)))


def test_alpha_of_constant_is_one(cube2, bp2):
    for v in cube2.boundary_vertices[:8]:
        assert alpha_eval(bp2, 0, int(v), _one(0)) == pytest.approx(1.0, abs=1e-12)


def test_alpha_of_interior_simplex_rejected(cube2, bp2):
    v = int(np.nonzero(~cube2.boundary_vertex_mask)[0][0])
    with pytest.raises(NotBoundarySimplex):
        alpha_eval(bp2, 0, v, _one(0))


@pytest.mark.parametrize("level", [0, 1, 2])
def test_alpha_dual_to_whitney(cube2, bp2, level):
    anchors = bp2.alpha.anchors(level)
    G = bp2.alpha.matrix(level, WhitneySpace(cube2, level)).toarray()[:, anchors]
    assert np.abs(G - np.eye(len(anchors))).max() <= 1e-12
    # the field route agrees with the matrix route
    u = DiscreteField.basis(cube2, level, int(anchors[3]))
    assert np.allclose(bp2.alpha(level, u), G[:, 3], atol=1e-13)


@pytest.mark.parametrize("level", [0, 1, 2])
def test_alpha_vanishes_on_bubbles(bp2, level):
    assert np.abs(bp2.alpha(level, bubble(level))).max() <= 1e-9


@pytest.mark.parametrize("level", [0, 1, 2])
def test_P0_on_basis_and_bubble(cube2, bp2, level):
    for s in cube2.boundary_simplices(level)[:6]:
        u = DiscreteField.basis(cube2, level, int(s))
        assert np.abs(apply_P0(bp2, level, u).coeffs - u.coeffs).max() <= 1e-12
    assert np.abs(apply_Pib(bp2, level, bubble(level)).coeffs).max() <= 1e-9


@pytest.mark.parametrize("level", [0, 1, 2])
def test_pib_support(cube2, bp2, level):
    inner = classify(cube2).interior_cell_mask[level]
    for u in polynomials(level) + [trig(level)]:
        c = apply_Pib(bp2, level, u).coeffs
        assert np.all(c[local_dofs(cube2, level)[inner]] == 0)


def test_pib3(cube2, bp2):
    pts = cell_points(cube2)
    one = AnalyticField(3, lambda x: np.ones(len(x)))
    assert np.allclose(apply_Pib3(bp2, one).value(pts), 1.0)
    u = trig(3)
    P = apply_Pib3(bp2, u)
    assert abs(pts.weights @ P.value(pts) - pts.weights @ u.value(pts)) <= 1e-10
    for t in range(len(cube2.cells)):
        assert l2_norm(P, cube2, [t]) <= l2_norm(u, cube2, [t]) + 1e-14


@pytest.mark.parametrize("level", [0, 1, 2])
def test_pib_trace_commuting(cube2, bp2, level):
    spts = boundary_points(cube2)
    cp = cell_points(cube2)
    for u in polynomials(level):
        a = apply_Pib(bp2, level, u).d()
        b = apply_Pib(bp2, level + 1, gradient_of(level, u))
        if level < 2:
            k = trace_kind(level + 1)
            r = trace_values(k, a, spts) - trace_values(k, b, spts)
            res = np.sqrt(spts.weights @ (r * r if r.ndim == 1 else (r * r).sum(1)))
        else:
            res = abs(cp.weights @ (a.value(cp) - b.value(cp)))
        assert res <= 1e-9 * graph_norm(u, cube2)


@pytest.mark.parametrize("level", [0, 1, 2])
def test_pib_preserves_discrete_traces(cube2, bp2, rng, level):
    spts = boundary_points(cube2)
    u, _ = admissible(cube2, level, rng)
    k = trace_kind(level)
    r = trace_values(k, apply_Pib(bp2, level, u), spts) - trace_values(k, u, spts)
    assert np.abs(r).max() <= 1e-9 * graph_norm(u, cube2)


@pytest.mark.parametrize("level", [0, 1, 2, 3])
def test_interior_projection(cube2, pi2, rng, level):
    ip = pi2.interior
    spts = boundary_points(cube2)
    ids = ip.partitions.interior_simplices[level] if level < 3 else np.arange(len(cube2.cells))
    c = np.zeros(ndofs(cube2, level))
    c[ids] = rng.standard_normal(len(ids))
    if level == 3:
        c -= cube2.signs * cube2.volumes * (cube2.signs @ c) / cube2.volumes.sum()
    u = DiscreteField(cube2, level, c)
    assert np.abs(interior_project(ip, level, u).coeffs - c).max() <= 1e-12
    if level < 3:
        out = interior_project(ip, level, trig(level))
        assert np.abs(trace_values(trace_kind(level), out, spts)).max() <= 1e-13


@pytest.mark.parametrize("level", [0, 1, 2])
def test_interior_commutes_on_bubbles(pi2, level):
    ip = pi2.interior
    b = bubble(level)
    lhs = interior_project(ip, level, b).d().coeffs
    rhs = interior_project(ip, level + 1, gradient_of(level, b)).coeffs
    assert np.abs(lhs - rhs).max() <= 1e-9 * graph_norm(b, pi2.mesh)


@pytest.mark.parametrize("level", [0, 1, 2])
def test_composed_on_bubble(pi2, bp2, level):
    b = bubble(level)
    assert np.allclose(apply_Pi(pi2, level, b).coeffs,
                       interior_project(pi2.interior, level, b).coeffs, atol=1e-12)


@pytest.mark.parametrize("level", [0, 1, 2, 3])
def test_composed_projection_on_basis(cube2, pi2, level):
    n = ndofs(cube2, level)
    M = pi2.matrix(level, WhitneySpace(cube2, level)).toarray()
    assert np.abs(M - np.eye(n)).max() <= 1e-10
    for s in range(0, n, 11):
        u = DiscreteField.basis(cube2, level, s)
        assert np.abs(apply_Pi(pi2, level, u).coeffs - u.coeffs).max() <= 1e-10


@pytest.mark.parametrize("level", [0, 1, 2])
def test_composed_trace_and_commuting(cube2, pi2, rng, level):
    spts = boundary_points(cube2)
    cp = cell_points(cube2)
    u, vh = admissible(cube2, level, rng)
    scale = graph_norm(u, cube2)
    Pu = apply_Pi(pi2, level, u)
    k = trace_kind(level)
    r = trace_values(k, Pu, spts) - trace_values(k, u, spts)
    assert np.sqrt(spts.weights @ (r * r if r.ndim == 1 else (r * r).sum(1))) <= 1e-9 * scale
    du = derivative_of_admissible(level, vh)
    diff = Pu.d().value(cp) - apply_Pi(pi2, level + 1, du).value(cp)
    assert np.sqrt(cp.weights @ (diff * diff if diff.ndim == 1 else (diff * diff).sum(1))) <= 1e-9 * scale


@pytest.mark.parametrize("level", [0, 1, 2])
def test_matrix_route_matches_field_route(cube2, pi2, rng, level):
    S = EnrichedSpace(cube2, level, 2)
    x = rng.standard_normal(S.ndofs)
    field = S.field(x)
    assert np.allclose(pi2.matrix(level, S) @ x, apply_Pi(pi2, level, field).coeffs, atol=1e-11)


def test_canonical_dof_matrix_on_whitney(cube2):
    for level in range(4):
        C = canonical_dof_matrix(level, WhitneySpace(cube2, level)).toarray()
        assert np.abs(C - np.eye(len(C))).max() <= 1e-12


def test_locality_level3(cube2, pi2):
    # no boundary 3-simplices, so every cell is far for level 3; at this size
    # the second extended star may cover the whole mesh
    from derham_trace.mesh import classify
    es2 = classify(cube2).es2(0)
    same, changed = locality_check(pi2, 3, trig(3), 0, polynomials(3)[3])
    assert same
    assert changed == (len(es2) < len(cube2.cells))


def test_masked_field_zero_on_masked_cells(cube2):
    u = trig(0)
    m = CellMaskedField(u, cube2, [0, 1, 2])
    pts = cell_points(cube2, [0, 1, 2, 3])
    v = m.value(pts)
    assert np.all(v[pts.cells < 3] == 0) and np.all(v[pts.cells == 3] == u.value(pts)[pts.cells == 3])


def test_level2_functionals_read_vertex_touching_cells(cube2, bp2):
    """Face functionals see cells that touch the boundary only at a vertex.

    With the neighbourhood restricted to cells containing a boundary face the
    boundary operator depends on data outside it; widening to all cells
    touching the boundary removes that dependence.
    """
    restricted = pib_bound_constants(bp2, 2, domain="restricted")
    support = pib_bound_constants(bp2, 2, domain="support")
    assert any(np.isinf(v) for v in restricted.values())
    assert all(np.isfinite(v) for v in support.values())


@pytest.mark.parametrize("level", [0, 1, 2])
def test_fixed_field_ratio_below_sup_constant(cube2, bp2, level):
    sup = max(pib_bound_constants(bp2, level).values())
    # the sup constant bounds every field of the test space; the sqrt-sum
    # denominator is at most sqrt(2) times the plain sum
    S = EnrichedSpace(cube2, level, 2)
    u = S.field(np.random.default_rng(level).standard_normal(S.ndofs))
    assert pib_bound_ratio(bp2, level, u) <= np.sqrt(2) * sup * (1 + 1e-9)
