import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from derham_trace.fem import (Points, barycentric, boundary_points, cell_points, simplex_points,
                              trace_kind, trace_values)
from derham_trace.spaces import EnrichedSpace, WhitneySpace, gram


def _counts(mesh):
    return len(mesh.vertices), len(mesh.edges), len(mesh.faces), len(mesh.cells)


def test_order2_dimensions(cube2):
    V, E, F, T = _counts(cube2)
    expected = [V + E, 2 * E + 2 * F, 3 * F + 3 * T, 4 * T]
    assert [EnrichedSpace(cube2, l, 2).ndofs for l in range(4)] == expected
    assert EnrichedSpace(cube2, 0, 2).ndofs == 125


def test_order1_is_whitney(cube2):
    pts = cell_points(cube2, None, 2)
    for level in range(4):
        S, W = EnrichedSpace(cube2, level, 1), WhitneySpace(cube2, level)
        assert S.ndofs == W.ndofs
        a = [m.toarray() for m in S.basis_matrix(pts)]
        b = [m.toarray() for m in W.basis_matrix(pts)]
        # same span; with order 1 the bases agree up to the dof numbering
        A, B = np.vstack(a), np.vstack(b)
        X, *_ = np.linalg.lstsq(A, B, rcond=None)
        assert np.abs(A @ X - B).max() <= 1e-10
        assert np.allclose(np.abs(X).sum(0), 1.0)


def test_bad_order(cube1):
    with pytest.raises(ValueError):
        EnrichedSpace(cube1, 0, 0)


@pytest.mark.parametrize("level", [0, 1, 2])
def test_conformity_across_interior_faces(cube2, level):
    S = EnrichedSpace(cube2, level, 2)
    x = np.random.default_rng(level).standard_normal(S.ndofs)
    u = S.field(x)
    faces = np.nonzero(cube2.face_cells[:, 1] >= 0)[0]
    left, _ = simplex_points(cube2, 2, faces, 4, hosts=cube2.face_cells[faces, 0])
    right, nq = simplex_points(cube2, 2, faces, 4, hosts=cube2.face_cells[faces, 1])
    a, b = u.value(left), u.value(right)
    fv = cube2.vertices[cube2.faces[faces]]
    n = np.cross(fv[:, 1] - fv[:, 0], fv[:, 2] - fv[:, 0])
    n = np.repeat(n / np.linalg.norm(n, axis=1)[:, None], nq, axis=0)
    if level == 0:
        assert np.abs(a - b).max() <= 1e-12
        return
    if level == 1:
        jump = np.cross(n, a - b)
    else:
        jump = np.einsum("ij,ij->i", n, a - b)
    assert np.abs(jump).max() <= 1e-11


@pytest.mark.parametrize("level", [0, 1, 2])
def test_derivative_by_finite_differences(cube1, level):
    S = EnrichedSpace(cube1, level, 2)
    u = S.field(np.random.default_rng(7).standard_normal(S.ndofs))
    pts = cell_points(cube1, [0, 3], 2)
    x = pts.x
    eps = 1e-5

    def at(y):
        return u.value(Points(cube1, pts.cells, barycentric(cube1, pts.cells, y)))

    J = np.stack([(at(x + eps * e) - at(x - eps * e)) / (2 * eps) for e in np.eye(3)], axis=-1)
    if level == 0:
        fd = J
    elif level == 1:
        fd = np.stack([J[:, 2, 1] - J[:, 1, 2], J[:, 0, 2] - J[:, 2, 0], J[:, 1, 0] - J[:, 0, 1]], 1)
    else:
        fd = J[:, 0, 0] + J[:, 1, 1] + J[:, 2, 2]
    assert np.abs(u.dvalue(pts) - fd).max() <= 1e-6 * max(1.0, np.abs(fd).max())


def test_trace_dofs_count(cube2):
    spts = boundary_points(cube2)
    for level in range(3):
        S = EnrichedSpace(cube2, level, 2)
        x = np.zeros(S.ndofs)
        x[~S.trace_dofs] = 1.0
        assert np.abs(trace_values(trace_kind(level), S.field(x), spts)).max() <= 1e-12


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 3), st.integers(1, 3))
def test_gram_spd(level, order):
    from derham_trace.mesh import gen_structured_cube
    S = EnrichedSpace(gen_structured_cube(1), level, order)
    M = gram(S).toarray()
    assert np.allclose(M, M.T)
    assert np.linalg.eigvalsh(M).min() > 0
