import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from derham_trace.errors import NonManifold, NotBoundarySimplex, ParseError
from derham_trace.mesh import (Mesh, annulus_faces, build_mesh, check_contractibility,
                               classify, gen_cube_with_hole, gen_structured_cube,
                               parse_mesh, parse_mesh_text, patch_is_disc,
                               shape_regularity, write_mesh)

UNIT_TET = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])


def test_single_tet_tables():
    m = build_mesh(UNIT_TET, [[0, 1, 2, 3]])
    assert m.counts == (4, 6, 4, 1)
    assert len(m.boundary_faces) == 4
    parts = classify(m)
    for l in range(3):
        assert parts.boundary_cell_mask[l].all()


def test_two_tets_share_interior_face():
    verts = np.vstack([UNIT_TET, [[1.0, 1, 1]]])
    m = build_mesh(verts, [[0, 1, 2, 3], [1, 2, 3, 4]])
    shared = m.find_simplex((1, 2, 3))
    assert shared is not None and not m.is_boundary(2, shared)
    assert (m.face_cells[shared] >= 0).sum() == 2


def test_three_cells_on_one_face_rejected():
    verts = np.vstack([UNIT_TET, [[1.0, 1, 1]], [[-1.0, -1, -1]]])
    with pytest.raises(NonManifold):
        build_mesh(verts, [[0, 1, 2, 3], [1, 2, 3, 4], [1, 2, 3, 5]])


def _brute_kuhn_counts():
    # enumerate the six monotone lattice paths of the unit cube by hand
    corners = list(itertools.product((0, 1), repeat=3))
    cells = set()
    for perm in itertools.permutations(range(3)):
        p = [0, 0, 0]
        path = [tuple(p)]
        for axis in perm:
            p[axis] = 1
            path.append(tuple(p))
        cells.add(tuple(sorted(corners.index(q) for q in path)))
    edges = {e for c in cells for e in itertools.combinations(c, 2)}
    faces = {f for c in cells for f in itertools.combinations(c, 3)}
    return len(corners), len(edges), len(faces), len(cells)


def test_kuhn_cube_counts_match_enumeration(cube1):
    assert cube1.counts == _brute_kuhn_counts() == (8, 19, 18, 6)
    assert len(cube1.boundary_faces) == 12


@pytest.mark.parametrize("n", [1, 2, 3])
def test_structured_cube_counts(n):
    m = gen_structured_cube(n)
    assert len(m.cells) == 6 * n ** 3
    assert m.nv == (n + 1) ** 3
    assert len(m.boundary_faces) == 12 * n ** 2


def test_incidence_examples(cube1):
    m = cube1
    e = m.find_simplex((0, 1))
    assert m.incidence(1, e, 1) == 1 and m.incidence(1, e, 0) == -1
    f = m.faces[0]
    signs = [m.incidence(2, 0, m.find_simplex(tuple(np.delete(f, j)))) for j in range(3)]
    assert signs == [1, -1, 1]
    assert np.all(np.asarray(m.d[0].sum(axis=1)).ravel() == 0)


def test_incidence_complex_exact(cube2):
    assert abs(cube2.d[1] @ cube2.d[0]).max() == 0
    assert abs(cube2.d[2] @ cube2.d[1]).max() == 0


def test_regular_tet_shape_ratio():
    s = np.sqrt(2.0)
    reg = np.array([[1, 0, -1 / s], [-1, 0, -1 / s], [0, 1, 1 / s], [0, -1, 1 / s]])
    assert shape_regularity(build_mesh(reg, [[0, 1, 2, 3]])) == pytest.approx(np.sqrt(6.0))


def test_kuhn_shape_ratio_closed_form(cube1, cube2):
    # Kuhn tet: diameter sqrt(3), volume 1/6, surface 1 + sqrt(2)
    inradius = 3 * (1 / 6) / (1 + np.sqrt(2))
    expected = np.sqrt(3) / (2 * inradius)
    assert shape_regularity(cube1) == pytest.approx(expected, rel=1e-12)
    assert shape_regularity(cube2) == pytest.approx(expected, rel=1e-12)


def test_boundary_closed_manifold(cube2):
    m = cube2
    per_edge = np.bincount(m.face_edges[m.boundary_faces].ravel(), minlength=len(m.edges))
    assert np.all(per_edge[m.boundary_edges] == 2)


def test_partitions_nested():
    for n in (1, 2, 3):
        p = classify(gen_structured_cube(n))
        assert not np.any(p.boundary_cell_mask[2] & ~p.boundary_cell_mask[1])
        assert not np.any(p.boundary_cell_mask[1] & ~p.boundary_cell_mask[0])


def test_far_cells_first_appear_at_n7():
    for n in (4, 6):
        p = classify(gen_structured_cube(n))
        assert not any(p.far_cell_mask[l].any() for l in range(3))
    p = classify(gen_structured_cube(7))
    assert all(p.far_cell_mask[l].any() for l in range(3))


def _es2_oracle(m, cell):
    vs = set(m.cells[cell].tolist())
    first = {t for t in range(len(m.cells)) if vs & set(m.cells[t].tolist())}
    vs1 = set(m.cells[list(first)].ravel().tolist())
    return sorted(t for t in range(len(m.cells)) if vs1 & set(m.cells[t].tolist()))


@pytest.mark.parametrize("n", [2, 3])
def test_es2_and_restricted_star_against_oracle(n):
    m = gen_structured_cube(n)
    p = classify(m)
    for cell in range(0, len(m.cells), 7):
        es2 = _es2_oracle(m, cell)
        assert p.es2(cell).tolist() == es2
        assert m.extended_star(3, cell, 2).tolist() == es2
        for l in range(3):
            restricted = [t for t in es2 if p.boundary_cell_mask[l][t]]
            assert p.es2_restricted(cell, l).tolist() == restricted
        # far iff the restricted second star is empty
        for l in range(3):
            assert p.far_cell_mask[l][cell] == (len(p.es2_restricted(cell, l)) == 0)


def test_star_chain(cube2):
    m = cube2
    for dim in range(4):
        for sid in range(0, len(m.simplices(dim)), 5):
            s0 = set(m.star(dim, sid).tolist())
            s1 = set(m.extended_star(dim, sid, 1).tolist())
            s2 = set(m.extended_star(dim, sid, 2).tolist())
            assert s0 <= s1 <= s2


def test_extended_boundary_star_is_union_of_vertex_stars(cube2):
    m = cube2
    for f in m.boundary_faces[:10]:
        union = set()
        for v in m.faces[f]:
            union |= set(m.boundary_star(0, int(v)).tolist())
        assert set(m.extended_boundary_star(2, int(f)).tolist()) == union


def test_boundary_vertex_star_equals_extended(cube2):
    m = cube2
    for v in m.boundary_vertices:
        assert np.array_equal(m.boundary_star(0, int(v)), m.extended_boundary_star(0, int(v)))


def test_interior_simplex_rejected(cube2):
    v = int(np.nonzero(~cube2.boundary_vertex_mask)[0][0])
    with pytest.raises(NotBoundarySimplex):
        cube2.boundary_star(0, v)


def test_contractibility(cube2):
    m = cube2
    for dim in range(3):
        for sid in m.boundary_simplices(dim):
            assert check_contractibility(m, (dim, int(sid)))
    ring = annulus_faces(m)
    assert ring is not None and not patch_is_disc(m, ring)


def test_cube_with_hole_has_two_boundary_components():
    m = gen_cube_with_hole(3, (1, 2))
    nv, ne, nf, nt = m.counts
    assert nv - ne + nf - nt == 2          # ball minus a ball
    assert len(m.boundary_faces) == 12 * 9 + 12


def test_mesh_round_trip(tmp_path, cube2):
    p = tmp_path / "c.mesh"
    write_mesh(cube2, p)
    m = parse_mesh(p)
    assert np.array_equal(m.cells, cube2.cells)
    assert np.array_equal(m.faces, cube2.faces)
    assert np.array_equal(m.vertices, cube2.vertices)


@pytest.mark.parametrize("text, line", [
    (["4 x"], 1),
    (["4 1", "0 0 0", "1 0 0", "0 1 0", "0 0 1", "0 1 2"], 6),
    (["4 1", "0 0 0", "1 0 0", "0 1 0", "0 0 1", "0 1 2 9"], 6),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ParseError) as exc:
        parse_mesh_text(text)
    assert exc.value.line == line


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.5, 2.0), min_size=3, max_size=3),
       st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_shape_ratio_invariant_under_similarity(scale, shift):
    # uniform scaling and translation keep h/theta
    m = gen_structured_cube(1)
    s = scale[0]
    moved = Mesh(m.vertices * s + np.array(shift), m.cells)
    assert shape_regularity(moved) == pytest.approx(shape_regularity(m), rel=1e-9)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 3))
def test_euler_characteristic_of_ball(n):
    nv, ne, nf, nt = gen_structured_cube(n).counts
    assert nv - ne + nf - nt == 1
