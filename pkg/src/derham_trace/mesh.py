"""Tetrahedral simplicial complex with sorted-vertex orientation.

Every simplex is stored as a strictly increasing tuple of global vertex
indices, so orientation is implicit and incidence numbers reduce to the
parity of the position of the omitted vertex.
"""
from itertools import combinations, permutations

import numpy as np
import scipy.sparse as sp

from .errors import (DanglingVertex, DegenerateCell, NonManifold,
                     NotBoundarySimplex, ParseError)

# local sub-simplex tables of a sorted tetrahedron
LOCAL_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
LOCAL_FACES = ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))   # face j omits j
# local edges of a sorted triangle, edge j omits vertex j
TRI_EDGES = ((1, 2), (0, 2), (0, 1))


def _unique_rows(rows):
    uniq, inv = np.unique(rows, axis=0, return_inverse=True)
    return uniq, inv.reshape(-1)


def _incidence_matrix(parents, n_children, child_ids):
    # parents: (np, k+1) sorted tuples; child_ids[:, j] = id of child omitting j
    n_par, width = child_ids.shape
    rows = np.repeat(np.arange(n_par), width)
    signs = np.tile([(-1.0) ** j for j in range(width)], n_par)
    return sp.csr_matrix((signs, (rows, child_ids.ravel())),
                         shape=(n_par, n_children))


class Mesh:
    """Immutable tetrahedral mesh with derived simplex tables.

    Attributes
    ----------
    vertices : (nv, 3) float array
    cells, faces, edges : sorted index tuples as int arrays
    cell_faces : (nt, 4) face ids, column j is the face omitting local vertex j
    cell_edges : (nt, 6) edge ids in ``LOCAL_EDGES`` order
    face_edges : (nf, 3) edge ids, column j omits local vertex j
    d : list of sparse incidence matrices, ``d[l]`` maps l- to (l+1)-simplices
    """

    def __init__(self, vertices, cells, check=True):
        vertices = np.asarray(vertices, dtype=float)
        cells = np.sort(np.asarray(cells, dtype=np.int64), axis=1)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise ValueError("vertices must have shape (n, 3)")
        if cells.ndim != 2 or cells.shape[1] != 4:
            raise ValueError("cells must have shape (m, 4)")
        nv = len(vertices)
        if cells.size and (cells.min() < 0 or cells.max() >= nv):
            raise IndexError("cell vertex index out of range")
        self.vertices = vertices
        self.cells = cells
        nt = len(cells)

        # faces and edges
        fr = np.stack([cells[:, list(f)] for f in LOCAL_FACES], axis=1)
        self.faces, inv = _unique_rows(fr.reshape(-1, 3))
        self.cell_faces = inv.reshape(nt, 4)
        er = np.stack([cells[:, list(e)] for e in LOCAL_EDGES], axis=1)
        self.edges, inv = _unique_rows(er.reshape(-1, 2))
        self.cell_edges = inv.reshape(nt, 6)
        self._edge_index = {tuple(e): i for i, e in enumerate(self.edges.tolist())}
        self._face_index = {tuple(f): i for i, f in enumerate(self.faces.tolist())}
        self.face_edges = np.array(
            [[self._edge_index[(f[a], f[b])] for a, b in TRI_EDGES]
             for f in self.faces.tolist()], dtype=np.int64).reshape(-1, 3)

        nf, ne = len(self.faces), len(self.edges)
        edge_vertices = np.column_stack([self.edges[:, 1], self.edges[:, 0]])
        self.d = [
            _incidence_matrix(self.edges, nv, edge_vertices),
            _incidence_matrix(self.faces, ne, self.face_edges),
            _incidence_matrix(self.cells, nf, self.cell_faces),
        ]

        # cofaces of faces
        counts = np.bincount(self.cell_faces.ravel(), minlength=nf)
        if check and counts.max(initial=0) > 2:
            bad = int(np.argmax(counts))
            raise NonManifold(f"face {tuple(self.faces[bad])} has {counts[bad]} cells")
        self.face_cells = -np.ones((nf, 2), dtype=np.int64)
        fill = np.zeros(nf, dtype=np.int64)
        for t, row in enumerate(self.cell_faces):
            for f in row:
                self.face_cells[f, fill[f]] = t
                fill[f] += 1

        # geometry
        p = vertices[cells]
        jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0], p[:, 3] - p[:, 0]], axis=2)
        det = np.linalg.det(jac) if nt else np.zeros(0)
        self.volumes = np.abs(det) / 6.0
        self.signs = np.sign(det)
        edge_len = np.linalg.norm(vertices[self.edges[:, 1]] - vertices[self.edges[:, 0]], axis=1)
        self.edge_lengths = edge_len
        if check and nt:
            scale = edge_len[self.cell_edges].max(axis=1) ** 3
            bad = np.nonzero(self.volumes <= 1e-13 * scale)[0]
            if len(bad):
                raise DegenerateCell(f"cell {int(bad[0])} {tuple(cells[bad[0]])} has zero volume")
        used = np.zeros(nv, dtype=bool)
        used[cells.ravel()] = True
        if check and not used.all():
            raise DanglingVertex(f"vertex {int(np.argmin(used))} belongs to no cell")
        self.grad_bary = np.linalg.inv(jac).copy() if nt else np.zeros((0, 3, 3))
        # rows of inv(jac) are grads of lambda_1..3
        g123 = self.grad_bary
        self.grad_bary = np.concatenate([-g123.sum(axis=1, keepdims=True), g123], axis=1)

        # boundary classification
        self.boundary_face_mask = counts == 1
        self.boundary_faces = np.nonzero(self.boundary_face_mask)[0]
        self.boundary_edge_mask = np.zeros(ne, dtype=bool)
        self.boundary_edge_mask[self.face_edges[self.boundary_faces].ravel()] = True
        self.boundary_vertex_mask = np.zeros(nv, dtype=bool)
        self.boundary_vertex_mask[self.faces[self.boundary_faces].ravel()] = True
        self.boundary_edges = np.nonzero(self.boundary_edge_mask)[0]
        self.boundary_vertices = np.nonzero(self.boundary_vertex_mask)[0]
        if check:
            bcount = np.bincount(self.face_edges[self.boundary_faces].ravel(), minlength=ne)
            bad = np.nonzero(self.boundary_edge_mask & (bcount != 2))[0]
            if len(bad):
                raise NonManifold(f"boundary edge {tuple(self.edges[bad[0]])} "
                                  f"lies in {bcount[bad[0]]} boundary faces")

        # outward unit normals of boundary faces
        self.face_normals = self._face_normals()
        self.outward_normals = np.zeros((nf, 3))
        for f in self.boundary_faces:
            t = self.face_cells[f, 0]
            j = int(np.nonzero(self.cell_faces[t] == f)[0][0])
            n = self.face_normals[f]
            opp = vertices[cells[t, j]] - vertices[self.faces[f, 0]]
            self.outward_normals[f] = -n if np.dot(n, opp) > 0 else n

        # vertex -> cells adjacency (sparse, nt x nv)
        self.cell_vertex = sp.csr_matrix(
            (np.ones(4 * nt), (np.repeat(np.arange(nt), 4), cells.ravel())), shape=(nt, nv))
        self.vertex_cells = [np.sort(self.cell_vertex.T.tocsr()[v].indices) for v in range(nv)]
        self.diameters = self._diameters()

    # ------------------------------------------------------------------ tables
    @property
    def nv(self):
        return len(self.vertices)

    @property
    def counts(self):
        return (len(self.vertices), len(self.edges), len(self.faces), len(self.cells))

    def simplices(self, dim):
        return [np.arange(self.nv)[:, None], self.edges, self.faces, self.cells][dim]

    def simplex_id(self, verts):
        """Id of the simplex with the given vertex set (any order)."""
        key = tuple(sorted(int(v) for v in verts))
        if len(key) == 1:
            return key[0]
        if len(key) == 2:
            return self._edge_index[key]
        if len(key) == 3:
            return self._face_index[key]
        cid = np.nonzero((self.cells == np.array(key)).all(axis=1))[0]
        if not len(cid):
            raise KeyError(key)
        return int(cid[0])

    def find_simplex(self, verts):
        try:
            return self.simplex_id(verts)
        except KeyError:
            return None

    def incidence(self, dim, parent, child):
        """Incidence number of a (dim-1)-simplex ``child`` in ``parent``."""
        if not 1 <= dim <= 3:
            raise ValueError("parent dimension must be 1, 2 or 3")
        return int(self.d[dim - 1][parent, child])

    def is_boundary(self, dim, sid):
        masks = [self.boundary_vertex_mask, self.boundary_edge_mask,
                 self.boundary_face_mask, np.zeros(len(self.cells), bool)]
        return bool(masks[dim][sid])

    def boundary_simplices(self, dim):
        return [self.boundary_vertices, self.boundary_edges, self.boundary_faces,
                np.zeros(0, dtype=np.int64)][dim]

    def _face_normals(self):
        p = self.vertices[self.faces]
        n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        self.face_areas = 0.5 * np.linalg.norm(n, axis=1)
        return n / np.linalg.norm(n, axis=1)[:, None]

    # ------------------------------------------------------------------ stars
    def star(self, dim, sid):
        """Cells containing the simplex."""
        verts = self.simplices(dim)[sid]
        cells = self.vertex_cells[int(verts[0])]
        for v in verts[1:]:
            cells = np.intersect1d(cells, self.vertex_cells[int(v)])
        return cells

    def cells_touching(self, verts):
        verts = np.unique(np.asarray(verts, dtype=np.int64))
        if not len(verts):
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate([self.vertex_cells[v] for v in verts]))

    def extended_star(self, dim, sid, k=1):
        """es^k: es^0 is the simplex itself (returned as its vertex set's
        star when dim == 3, i.e. the cell), es^k touches clos(es^{k-1})."""
        if k == 0:
            return self.star(dim, sid)
        verts = self.simplices(dim)[sid]
        cells = self.cells_touching(verts)
        for _ in range(k - 1):
            cells = self.cells_touching(self.cells[cells].ravel())
        return cells

    def boundary_star(self, dim, sid):
        """Boundary faces containing a boundary simplex."""
        if not self.is_boundary(dim, sid):
            raise NotBoundarySimplex(f"simplex {dim}:{sid} is not on the boundary")
        verts = set(int(v) for v in self.simplices(dim)[sid])
        bf = self.boundary_faces
        keep = [f for f in bf if verts.issubset(self.faces[f].tolist())]
        return np.array(keep, dtype=np.int64)

    def extended_boundary_star(self, dim, sid):
        """Boundary faces touching a boundary simplex (union of vertex stars)."""
        if not self.is_boundary(dim, sid):
            raise NotBoundarySimplex(f"simplex {dim}:{sid} is not on the boundary")
        verts = self.simplices(dim)[sid]
        return np.unique(np.concatenate([self.boundary_star(0, int(v)) for v in verts]))

    # ------------------------------------------------------------------ sizes
    def _diameters(self):
        h_cell = self.edge_lengths[self.cell_edges].max(axis=1) if len(self.cells) else np.zeros(0)
        h_face = self.edge_lengths[self.face_edges].max(axis=1)
        h_vert = np.zeros(self.nv)
        for v in range(self.nv):
            vs = np.unique(self.cells[self.vertex_cells[v]])
            p = self.vertices[vs]
            diff = p[:, None, :] - p[None, :, :]
            h_vert[v] = np.sqrt((diff ** 2).sum(-1).max())
        return [h_vert, self.edge_lengths.copy(), h_face, h_cell]

    def h(self, dim, sid):
        return float(self.diameters[dim][sid])


def build_mesh(vertices, tets):
    return Mesh(vertices, tets)


def _surface_areas(mesh):
    p = mesh.vertices[mesh.cells]
    total = np.zeros(len(mesh.cells))
    for f in LOCAL_FACES:
        q = p[:, list(f)]
        total += 0.5 * np.linalg.norm(np.cross(q[:, 1] - q[:, 0], q[:, 2] - q[:, 0]), axis=1)
    return total


def cell_shape_ratios(mesh):
    """h_tau / theta_tau with theta the inscribed ball diameter."""
    inradius = 3.0 * mesh.volumes / _surface_areas(mesh)
    return mesh.diameters[3] / (2.0 * inradius)


def shape_regularity(mesh):
    return float(cell_shape_ratios(mesh).max())


# ---------------------------------------------------------------------- patches
PATCH_KINDS = ("star", "extended_star", "boundary_star",
               "extended_boundary_star", "omega_restricted")


class PatchIndex:
    """Resolved neighbourhood of an anchor simplex."""

    def __init__(self, kind, anchor, items, k=None, level=None):
        self.kind = kind
        self.anchor = anchor
        self.items = np.asarray(items, dtype=np.int64)
        self.k = k
        self.level = level

    @property
    def is_surface(self):
        return self.kind in ("boundary_star", "extended_boundary_star")

    def __repr__(self):
        return f"PatchIndex({self.kind}, anchor={self.anchor}, n={len(self.items)})"


def patch(mesh, anchor, kind, k=1, level=None, partitions=None):
    """Resolve a neighbourhood; ``anchor`` is a ``(dim, id)`` pair."""
    dim, sid = anchor
    if kind == "star":
        items = mesh.star(dim, sid)
    elif kind == "extended_star":
        items = mesh.extended_star(dim, sid, k)
    elif kind == "boundary_star":
        items = mesh.boundary_star(dim, sid)
    elif kind == "extended_boundary_star":
        items = mesh.extended_boundary_star(dim, sid)
    elif kind == "omega_restricted":
        parts = partitions if partitions is not None else classify(mesh)
        cells = mesh.extended_star(dim, sid, k)
        items = cells[parts.boundary_cell_mask[level][cells]]
    else:
        raise ValueError(f"unknown patch kind {kind!r}")
    return PatchIndex(kind, anchor, items, k=k, level=level)


class MeshPartitions:
    """Cell partitions driven by the boundary simplices of each level.

    ``boundary_cell_mask[l]`` marks cells containing a boundary l-simplex,
    ``far_cell_mask[l]`` marks cells whose second extended star avoids all of
    those, the complement being ``near_cell_mask[l]``.
    """

    def __init__(self, mesh):
        nt = len(mesh.cells)
        self.boundary_simplices = [mesh.boundary_simplices(l) for l in range(4)]
        self.interior_simplices = []
        sub_tables = [mesh.cells, mesh.cell_edges, mesh.cell_faces,
                      np.arange(nt)[:, None]]
        bmasks = [mesh.boundary_vertex_mask, mesh.boundary_edge_mask,
                  mesh.boundary_face_mask, np.zeros(nt, bool)]
        adj = (mesh.cell_vertex @ mesh.cell_vertex.T).tocsr()
        adj.data[:] = 1.0
        adj2 = (adj @ adj).tocsr()
        self._es2 = adj2
        self.boundary_cell_mask = []
        self.far_cell_mask = []
        for l in range(4):
            self.interior_simplices.append(np.nonzero(~bmasks[l])[0])
            m = bmasks[l][sub_tables[l]].any(axis=1)
            self.boundary_cell_mask.append(m)
            hits = adj2 @ m.astype(float)
            self.far_cell_mask.append(hits == 0)
        self.near_cell_mask = [~m for m in self.far_cell_mask]
        self.interior_cell_mask = [~m for m in self.boundary_cell_mask]

    def es2(self, cell):
        return np.sort(self._es2[cell].indices)

    def es2_restricted(self, cell, level):
        cells = np.sort(self._es2[cell].indices)
        return cells[self.boundary_cell_mask[level][cells]]


def classify(mesh):
    return MeshPartitions(mesh)


# ---------------------------------------------------------------------- topology
def closure_counts(mesh, faces):
    """(V, E, F) of the closure of a set of mesh faces."""
    tris = mesh.faces[np.asarray(faces, dtype=np.int64)]
    verts = np.unique(tris)
    edges = np.unique(mesh.face_edges[np.asarray(faces, dtype=np.int64)])
    return len(verts), len(edges), len(tris)


def faces_connected(mesh, faces):
    faces = list(faces)
    if not faces:
        return False
    parent = {f: f for f in faces}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    by_vertex = {}
    for f in faces:
        for v in mesh.faces[f]:
            by_vertex.setdefault(int(v), []).append(f)
    for group in by_vertex.values():
        r = find(group[0])
        for f in group[1:]:
            parent[find(f)] = r
    return len({find(f) for f in faces}) == 1


def check_contractibility(mesh, anchor):
    """Connected and Euler characteristic one on clos(esb(anchor))."""
    dim, sid = anchor
    faces = mesh.extended_boundary_star(dim, sid)
    return patch_is_disc(mesh, faces)


def patch_is_disc(mesh, faces):
    V, E, F = closure_counts(mesh, faces)
    return faces_connected(mesh, faces) and V - E + F == 1


# ---------------------------------------------------------------------- generation
def kuhn_cube_cells(n):
    """Cells of the Kuhn split of an n^3 grid of the unit cube."""
    idx = lambda i, j, k: i + (n + 1) * (j + (n + 1) * k)
    cells = []
    for k in range(n):
        for j in range(n):
            for i in range(n):
                base = np.array([i, j, k])
                for perm in permutations(range(3)):
                    p = base.copy()
                    tet = [idx(*p)]
                    for axis in perm:
                        p[axis] += 1
                        tet.append(idx(*p))
                    cells.append(sorted(tet))
    return np.array(cells, dtype=np.int64)


def cube_vertices(n):
    g = np.linspace(0.0, 1.0, n + 1)
    z, y, x = np.meshgrid(g, g, g, indexing="ij")
    return np.column_stack([x.ravel(), y.ravel(), z.ravel()])


def gen_structured_cube(n):
    if n < 1:
        raise ValueError("n must be positive")
    return Mesh(cube_vertices(n), kuhn_cube_cells(n))


def gen_cube_with_hole(n, hole):
    """Kuhn cube with the subcubes in index range ``hole`` (lo, hi) removed."""
    lo, hi = hole
    verts = cube_vertices(n)
    cells = kuhn_cube_cells(n)
    centroid = verts[cells].mean(axis=1) * n
    inside = np.all((centroid > lo) & (centroid < hi), axis=1)
    cells = cells[~inside]
    used = np.unique(cells)
    remap = -np.ones(len(verts), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return Mesh(verts[used], remap[cells])


# ---------------------------------------------------------------------- text IO
def write_mesh(mesh, path, parent=None):
    with open(path, "w") as fh:
        fh.write(f"{mesh.nv} {len(mesh.cells)}\n")
        for x in mesh.vertices:
            fh.write(" ".join(repr(float(c)) for c in x) + "\n")
        for c in mesh.cells:
            fh.write(" ".join(str(int(i)) for i in c) + "\n")
    if parent is not None:
        with open(str(path) + ".parent", "w") as fh:
            for s, p in enumerate(parent):
                fh.write(f"{s} {int(p)}\n")


def parse_mesh(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    return parse_mesh_text(lines)


def parse_mesh_text(lines):
    content = [(i + 1, ln.split()) for i, ln in enumerate(lines) if ln.strip()]
    if not content:
        raise ParseError("empty mesh file", 1)
    lineno, head = content[0]
    if len(head) != 2:
        raise ParseError("expected '<num_vertices> <num_tets>'", lineno)
    try:
        nv, nt = int(head[0]), int(head[1])
    except ValueError:
        raise ParseError("counts must be integers", lineno) from None
    if nv < 0 or nt < 0:
        raise ParseError("counts must be non-negative", lineno)
    if len(content) < 1 + nv + nt:
        raise ParseError(f"expected {nv} vertices and {nt} cells, file too short",
                         content[-1][0])
    verts = np.zeros((nv, 3))
    for i in range(nv):
        lineno, tok = content[1 + i]
        if len(tok) != 3:
            raise ParseError("vertex line needs 3 coordinates", lineno)
        try:
            verts[i] = [float(t) for t in tok]
        except ValueError:
            raise ParseError("bad coordinate", lineno) from None
    cells = np.zeros((nt, 4), dtype=np.int64)
    for i in range(nt):
        lineno, tok = content[1 + nv + i]
        if len(tok) != 4:
            raise ParseError("cell line needs 4 indices", lineno)
        try:
            cells[i] = [int(t) for t in tok]
        except ValueError:
            raise ParseError("bad vertex index", lineno) from None
        if cells[i].min() < 0 or cells[i].max() >= nv:
            raise ParseError(f"vertex index out of range 0..{nv - 1}", lineno)
    return Mesh(verts, cells)


def annulus_faces(mesh):
    """Boundary faces around a cube face centre vertex minus its own star.

    The ring ``esb(neighbours) \\ stb(v)`` is an annulus with Euler
    characteristic zero; used as a negative contractibility fixture.
    """
    best = None
    for v in mesh.boundary_vertices:
        ring = set(mesh.boundary_star(0, int(v)).tolist())
        nbrs = set(np.unique(mesh.faces[list(ring)]).tolist()) - {int(v)}
        outer = set()
        for w in nbrs:
            outer |= set(mesh.boundary_star(0, w).tolist())
        ann = sorted(outer - ring)
        if faces_connected(mesh, ann):
            V, E, F = closure_counts(mesh, ann)
            if V - E + F == 0:
                best = ann
                break
    return best
