"""Boundary Alfeld split and bulk Worsey-Farin split."""
import numpy as np

from .mesh import LOCAL_FACES, Mesh, write_mesh


class AlfeldBoundaryMesh:
    """Barycentric 3-split of every boundary face.

    Vertex table: the parent vertices followed by one barycenter per boundary
    face (in boundary-face order).  ``tris`` are sorted index triples.
    """

    def __init__(self, mesh):
        self.parent_mesh = mesh
        bf = mesh.boundary_faces
        nv = mesh.nv
        bary = mesh.vertices[mesh.faces[bf]].mean(axis=1)
        self.vertices = np.vstack([mesh.vertices, bary])
        tris, parent = [], []
        for k, f in enumerate(bf):
            a, b, c = mesh.faces[f]
            m = nv + k
            for t in ((a, b, m), (a, c, m), (b, c, m)):
                tris.append(sorted(t))
                parent.append(f)
        self.tris = np.array(tris, dtype=np.int64).reshape(-1, 3)
        self.parent_face = np.array(parent, dtype=np.int64)
        self.barycenter_vertex = dict(zip(bf.tolist(), range(nv, nv + len(bf))))

    @property
    def areas(self):
        p = self.vertices[self.tris]
        return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)

    def children(self, face):
        return np.nonzero(self.parent_face == face)[0]


class WorseyFarinMesh(Mesh):
    """Conforming 12-tet split of every cell (cell and face barycenters).

    New vertices: cell barycenters (cell order), then face barycenters (face
    order).  ``parent_cell[s]`` is the parent of sub-cell ``s`` and
    ``children[t]`` lists the 12 sub-cells of ``t``.
    """

    def __init__(self, mesh):
        nv, nt = mesh.nv, len(mesh.cells)
        cb = mesh.vertices[mesh.cells].mean(axis=1)
        fb = mesh.vertices[mesh.faces].mean(axis=1)
        verts = np.vstack([mesh.vertices, cb, fb])
        sub = []
        parent = []
        for t in range(nt):
            c = nv + t
            for j, lf in enumerate(LOCAL_FACES):
                f = mesh.cell_faces[t, j]
                fv = nv + nt + f
                p, q, r = mesh.cells[t, list(lf)]
                for a, b in ((p, q), (p, r), (q, r)):
                    sub.append(sorted((a, b, fv, c)))
                    parent.append(t)
        super().__init__(verts, np.array(sub, dtype=np.int64))
        self.parent_mesh = mesh
        self.parent_cell = np.array(parent, dtype=np.int64)
        self.children = np.arange(12 * nt, dtype=np.int64).reshape(nt, 12)
        self.cell_barycenter_vertex = np.arange(nv, nv + nt)
        self.face_barycenter_vertex = np.arange(nv + nt, nv + nt + len(mesh.faces))
        self._boundary_restriction()

    def _boundary_restriction(self):
        base = self.parent_mesh
        nv, nt = base.nv, len(base.cells)
        # parent face of each WF boundary face: the face whose barycenter it holds
        bf = self.boundary_faces
        top = self.faces[bf].max(axis=1)
        self.boundary_parent_face = top - nv - nt
        alf = AlfeldBoundaryMesh(base)
        to_alf = np.arange(len(self.vertices))
        for f, m in alf.barycenter_vertex.items():
            to_alf[nv + nt + f] = m
        key = {tuple(t): i for i, t in enumerate(alf.tris.tolist())}
        self.alfeld = alf
        self.boundary_to_alfeld = np.array(
            [key[tuple(sorted(to_alf[self.faces[f]]))] for f in bf], dtype=np.int64)

    def parent_of(self, sub):
        return int(self.parent_cell[sub])


def alfeld_boundary_split(mesh):
    return AlfeldBoundaryMesh(mesh)


def worsey_farin_split(mesh):
    return WorseyFarinMesh(mesh)


def parent_of(split, sub):
    return split.parent_of(sub)


def write_split_mesh(wf, path):
    write_mesh(wf, path, parent=wf.parent_cell)
