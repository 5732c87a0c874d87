"""Whitney forms, canonical degrees of freedom, fields and traces.

Fields are evaluated on :class:`Points`, which carry physical coordinates
together with a host cell and barycentric coordinates in some mesh.  Discrete
fields evaluate their Whitney expansions from (lambda, grad lambda) of the host
cell; analytic fields only look at coordinates.
"""
import numpy as np
import scipy.sparse as sp

from .errors import LevelMismatch
from .mesh import LOCAL_EDGES, LOCAL_FACES
from .quadrature import simplex_rule

DEFAULT_DEGREE = 6
NLOC = (4, 6, 4, 1)
VECTOR_LEVEL = (False, True, True, False)


# ---------------------------------------------------------------------- points
class Points:
    """Evaluation points with host cells in ``mesh``."""

    def __init__(self, mesh, cells, bary, weights=None):
        self.mesh = mesh
        self.cells = np.asarray(cells, dtype=np.int64)
        self.bary = np.asarray(bary, dtype=float)
        self.x = np.einsum("ni,nij->nj", self.bary, mesh.vertices[mesh.cells[self.cells]])
        self.weights = weights
        self._views = {}

    def __len__(self):
        return len(self.cells)

    def on(self, mesh):
        """The same physical points hosted by cells of ``mesh``.

        Supported when ``mesh`` is this mesh, its Worsey-Farin split, or the
        parent of a split mesh.
        """
        if mesh is self.mesh:
            return self
        key = id(mesh)
        if key not in self._views:
            view = self._rehost(mesh)
            # surface data (normals, Alfeld hosts) travels with the points
            for attr in ("normals", "faces", "tri", "tri_bary"):
                if hasattr(self, attr):
                    setattr(view, attr, getattr(self, attr))
            self._views[key] = view
        return self._views[key]

    def _rehost(self, mesh):
        parent = getattr(self.mesh, "parent_cell", None)
        if parent is not None and self.mesh.parent_mesh is mesh:
            cells = parent[self.cells]
            return Points(mesh, cells, barycentric(mesh, cells, self.x), self.weights)
        if getattr(mesh, "parent_mesh", None) is self.mesh:
            children = mesh.children[self.cells]          # (n, 12)
            best = np.zeros(len(self), dtype=np.int64)
            score = -np.inf * np.ones(len(self))
            for j in range(children.shape[1]):
                b = barycentric(mesh, children[:, j], self.x)
                m = b.min(axis=1)
                better = m > score
                best[better] = children[better, j]
                score[better] = m[better]
            return Points(mesh, best, barycentric(mesh, best, self.x), self.weights)
        raise ValueError("cannot rehost points on an unrelated mesh")


def barycentric(mesh, cells, x):
    p0 = mesh.vertices[mesh.cells[cells, 0]]
    g = mesh.grad_bary[cells]                    # (n, 4, 3)
    lam = np.einsum("nij,nj->ni", g[:, 1:], x - p0)
    return np.column_stack([1.0 - lam.sum(axis=1), lam])


def cell_points(mesh, cells=None, degree=DEFAULT_DEGREE):
    """Quadrature points on cells, weights include the cell volume."""
    if cells is None:
        cells = np.arange(len(mesh.cells))
    cells = np.asarray(cells, dtype=np.int64)
    rule = simplex_rule(3, degree)
    nq = rule.npoints
    hosts = np.repeat(cells, nq)
    bary = np.tile(rule.bary, (len(cells), 1))
    w = (np.tile(rule.weights, len(cells)) * 6.0 * np.repeat(mesh.volumes[cells], nq))
    return Points(mesh, hosts, bary, w)


def _embed_bary(local_bary, positions):
    # local_bary (nq, k+1), positions (m, k+1) local vertex positions in host cell
    m, k1 = positions.shape
    nq = len(local_bary)
    out = np.zeros((m, nq, 4))
    rows = np.arange(m)[:, None]
    for j in range(k1):
        out[rows, :, positions[:, j:j + 1]] += local_bary[None, :, j]
    return out


def default_hosts(mesh, dim, sids):
    """A containing cell for each simplex (lowest cell id)."""
    if dim == 3:
        return np.asarray(sids, dtype=np.int64)
    if dim == 2:
        return mesh.face_cells[sids, 0]
    if dim == 0:
        return np.array([mesh.vertex_cells[int(v)][0] for v in sids], dtype=np.int64)
    e = mesh.edges[sids]
    return np.array([np.intersect1d(mesh.vertex_cells[int(a)], mesh.vertex_cells[int(b)])[0]
                     for a, b in e], dtype=np.int64)


def simplex_points(mesh, dim, sids, degree=DEFAULT_DEGREE, hosts=None):
    """Quadrature points on sub-simplices, hosted by a containing cell.

    Weights are the simplex measure times reference weights.  Returns the
    points and the number of points per simplex.
    """
    sids = np.asarray(sids, dtype=np.int64)
    simp = mesh.simplices(dim)[sids]
    if hosts is None:
        hosts = default_hosts(mesh, dim, sids)
    hosts = np.asarray(hosts, dtype=np.int64)
    cv = mesh.cells[hosts]
    positions = np.array([[int(np.nonzero(c == v)[0][0]) for v in s]
                          for c, s in zip(cv, simp)], dtype=np.int64).reshape(len(sids), dim + 1)
    rule = simplex_rule(dim, degree)
    nq = rule.npoints
    bary = _embed_bary(rule.bary, positions).reshape(-1, 4)
    if dim == 0:
        meas = np.ones(len(sids))
    elif dim == 1:
        meas = mesh.edge_lengths[sids]
    elif dim == 2:
        meas = mesh.face_areas[sids] * 2.0
    else:
        meas = mesh.volumes[sids] * 6.0
    w = np.tile(rule.weights, len(sids)) * np.repeat(meas, nq)
    return Points(mesh, np.repeat(hosts, nq), bary, w), nq


# ---------------------------------------------------------------------- Whitney
def whitney_local(level, bary, grads, signs=None, volumes=None):
    """Local Whitney basis and exterior derivative at points.

    bary : (n, 4), grads : (n, 4, 3) per point.  Returns values of shape
    (n, nloc) or (n, nloc, 3) and derivatives shaped like the next level.
    """
    n = len(bary)
    if level == 0:
        return bary.copy(), grads.copy()
    if level == 1:
        val = np.empty((n, 6, 3))
        dval = np.empty((n, 6, 3))
        for k, (i, j) in enumerate(LOCAL_EDGES):
            val[:, k] = bary[:, i, None] * grads[:, j] - bary[:, j, None] * grads[:, i]
            dval[:, k] = 2.0 * np.cross(grads[:, i], grads[:, j])
        return val, dval
    if level == 2:
        val = np.empty((n, 4, 3))
        dval = np.empty((n, 4))
        for k, (i, j, m) in enumerate(LOCAL_FACES):
            gi, gj, gm = grads[:, i], grads[:, j], grads[:, m]
            val[:, k] = 2.0 * (bary[:, i, None] * np.cross(gj, gm)
                               - bary[:, j, None] * np.cross(gi, gm)
                               + bary[:, m, None] * np.cross(gi, gj))
            dval[:, k] = 6.0 * np.einsum("ni,ni->n", gi, np.cross(gj, gm))
        return val, dval
    if level == 3:
        return (signs / volumes)[:, None], np.zeros((n, 0))
    raise LevelMismatch(f"level {level} outside 0..3")


def local_dofs(mesh, level):
    """(nt, nloc) global dof ids of the local Whitney functions."""
    return [mesh.cells, mesh.cell_edges, mesh.cell_faces,
            np.arange(len(mesh.cells))[:, None]][level]


def ndofs(mesh, level):
    return mesh.counts[level]


def basis_at(mesh, level, pts):
    """Local basis values/derivatives at points hosted in ``mesh``."""
    pts = pts.on(mesh)
    grads = mesh.grad_bary[pts.cells]
    return whitney_local(level, pts.bary, grads, mesh.signs[pts.cells], mesh.volumes[pts.cells])


def basis_matrix(mesh, level, pts, derivative=False):
    """Sparse evaluation matrices, one per component: (npts, ndofs)."""
    pts = pts.on(mesh)
    val, dval = basis_at(mesh, level, pts)
    arr = dval if derivative else val
    ids = local_dofs(mesh, level)[pts.cells]
    n, nloc = ids.shape
    rows = np.repeat(np.arange(n), nloc)
    shape = (n, ndofs(mesh, level))
    if arr.ndim == 2:
        comps = [arr]
    else:
        comps = [arr[..., c] for c in range(3)]
    return [sp.csr_matrix((c.ravel(), (rows, ids.ravel())), shape=shape) for c in comps]


# ---------------------------------------------------------------------- spaces and fields
class FeSpace:
    """Lowest-order space of a given level on a mesh.

    With ``interior=True`` only dofs of interior simplices are kept; for
    level 3 this means the zero-mean subspace is represented by all cells.
    """

    def __init__(self, mesh, level, interior=False):
        if level not in (0, 1, 2, 3):
            raise LevelMismatch(f"level {level} outside 0..3")
        self.mesh = mesh
        self.level = level
        self.interior = interior
        n = ndofs(mesh, level)
        if interior and level < 3:
            mask = [mesh.boundary_vertex_mask, mesh.boundary_edge_mask,
                    mesh.boundary_face_mask][level]
            self.dofs = np.nonzero(~mask)[0]
        else:
            self.dofs = np.arange(n)

    @property
    def dim(self):
        return len(self.dofs)

    def full(self, coeffs):
        """Coefficients on the reduced dof list -> full simplex vector."""
        out = np.zeros(ndofs(self.mesh, self.level))
        out[self.dofs] = coeffs
        return out


class Field:
    """Anything evaluable on Points together with its exterior derivative."""
    level = None

    def value(self, pts):
        raise NotImplementedError

    def dvalue(self, pts):
        raise NotImplementedError

    def __add__(self, other):
        return FieldSum([(1.0, self), (1.0, other)])

    def __sub__(self, other):
        return FieldSum([(1.0, self), (-1.0, other)])

    def __rmul__(self, c):
        return FieldSum([(float(c), self)])


class AnalyticField(Field):
    """Field given by callables of (n, 3) coordinates."""

    def __init__(self, level, f, df=None, ddf=None, name="", degree=None):
        self.level = level
        self.f = f
        self.df = df
        self.ddf = ddf
        self.name = name
        self.degree = degree

    def value(self, pts):
        return np.asarray(self.f(pts.x), dtype=float)

    def dvalue(self, pts):
        if self.df is None:
            raise ValueError(f"field {self.name!r} has no derivative")
        return np.asarray(self.df(pts.x), dtype=float)

    def __repr__(self):
        return f"AnalyticField(level={self.level}, {self.name})"


class FieldSum(Field):
    def __init__(self, terms):
        flat = []
        for c, f in terms:
            if isinstance(f, FieldSum):
                flat.extend((c * c2, f2) for c2, f2 in f.terms)
            else:
                flat.append((c, f))
        levels = {f.level for _, f in flat}
        if len(levels) != 1:
            raise LevelMismatch(f"cannot combine fields of levels {sorted(levels)}")
        self.terms = flat
        self.level = levels.pop()

    def value(self, pts):
        return sum(c * f.value(pts) for c, f in self.terms)

    def dvalue(self, pts):
        return sum(c * f.dvalue(pts) for c, f in self.terms)


class DiscreteField(Field):
    """Whitney expansion over all simplices of a level (full coefficient vector)."""

    def __init__(self, mesh, level, coeffs):
        self.mesh = mesh
        self.level = level
        self.coeffs = np.asarray(coeffs, dtype=float)
        if self.coeffs.shape != (ndofs(mesh, level),):
            raise ValueError(f"expected {ndofs(mesh, level)} coefficients, got {self.coeffs.shape}")

    @classmethod
    def basis(cls, mesh, level, sid):
        c = np.zeros(ndofs(mesh, level))
        c[sid] = 1.0
        return cls(mesh, level, c)

    def _eval(self, pts, derivative):
        pts = pts.on(self.mesh)
        val, dval = basis_at(self.mesh, self.level, pts)
        arr = dval if derivative else val
        c = self.coeffs[local_dofs(self.mesh, self.level)[pts.cells]]
        if arr.ndim == 3:
            return np.einsum("nk,nkc->nc", c, arr)
        return np.einsum("nk,nk->n", c, arr)

    def value(self, pts):
        return self._eval(pts, False)

    def dvalue(self, pts):
        if self.level == 3:
            raise LevelMismatch("level-3 fields have no derivative")
        return self._eval(pts, True)

    def d(self):
        return d_apply(self.level, self)


def d_apply(level, u):
    if level > 2:
        raise LevelMismatch("no exterior derivative above level 2")
    if u.level != level:
        raise LevelMismatch(f"field level {u.level} != {level}")
    return DiscreteField(u.mesh, level + 1, u.mesh.d[level] @ u.coeffs)


def zero_field(mesh, level):
    return DiscreteField(mesh, level, np.zeros(ndofs(mesh, level)))


# ---------------------------------------------------------------------- dofs
def _dof_pairing(level, vals, pts, mesh, dim, sids, nq):
    n = len(sids)
    if level == 0:
        return vals.reshape(n, nq)[:, 0]
    w = pts.weights.reshape(n, nq)
    if level == 1:
        e = mesh.edges[sids]
        t = mesh.vertices[e[:, 1]] - mesh.vertices[e[:, 0]]
        t /= np.linalg.norm(t, axis=1)[:, None]
        integrand = np.einsum("nqc,nc->nq", vals.reshape(n, nq, 3), t)
    elif level == 2:
        integrand = np.einsum("nqc,nc->nq", vals.reshape(n, nq, 3), mesh.face_normals[sids])
    else:
        integrand = vals.reshape(n, nq) * mesh.signs[sids][:, None]
    return (integrand * w).sum(axis=1)


def canonical_dofs(level, field, sids=None, degree=DEFAULT_DEGREE, mesh=None):
    """Canonical dofs of ``field`` on the level-simplices ``sids``."""
    if field.level != level:
        raise LevelMismatch(f"field level {field.level} != dof level {level}")
    mesh = mesh if mesh is not None else field.mesh
    if sids is None:
        sids = np.arange(ndofs(mesh, level))
    sids = np.asarray(sids, dtype=np.int64)
    if not len(sids):
        return np.zeros(0)
    pts, nq = simplex_points(mesh, level, sids, degree=degree)
    return _dof_pairing(level, field.value(pts), pts, mesh, level, sids, nq)


def canonical_dof(sid, field, mesh, level=None):
    level = field.level if level is None else level
    return float(canonical_dofs(level, field, [sid], mesh=mesh)[0])


def interpolate_canonical(space, field, degree=DEFAULT_DEGREE):
    coeffs = np.zeros(ndofs(space.mesh, space.level))
    coeffs[space.dofs] = canonical_dofs(space.level, field, space.dofs, degree, mesh=space.mesh)
    return DiscreteField(space.mesh, space.level, coeffs)


# ---------------------------------------------------------------------- inner products
def _dot(a, b):
    return a * b if a.ndim == 1 else np.einsum("nc,nc->n", a, b)


def l2_inner(a, b, mesh, cells=None, degree=DEFAULT_DEGREE, derivative=False):
    pts = cell_points(mesh, cells, degree)
    if derivative:
        return float(np.dot(pts.weights, _dot(a.dvalue(pts), b.dvalue(pts))))
    return float(np.dot(pts.weights, _dot(a.value(pts), b.value(pts))))


def l2_norm(u, mesh, cells=None, degree=DEFAULT_DEGREE):
    return np.sqrt(max(l2_inner(u, u, mesh, cells, degree), 0.0))


def graph_norm(u, mesh, cells=None, degree=DEFAULT_DEGREE):
    pts = cell_points(mesh, cells, degree)
    v = u.value(pts)
    s = np.dot(pts.weights, _dot(v, v))
    if u.level < 3:
        dv = u.dvalue(pts)
        s += np.dot(pts.weights, _dot(dv, dv))
    return float(np.sqrt(s))


def cellwise_sq_norms(u, mesh, degree=DEFAULT_DEGREE, derivative=False):
    pts = cell_points(mesh, None, degree)
    v = u.dvalue(pts) if derivative else u.value(pts)
    return np.bincount(pts.cells, weights=pts.weights * _dot(v, v), minlength=len(mesh.cells))


# ---------------------------------------------------------------------- traces
class SurfacePoints(Points):
    """Points on boundary faces with outward normals."""

    def __init__(self, mesh, cells, bary, weights, normals, faces):
        super().__init__(mesh, cells, bary, weights)
        self.normals = normals
        self.faces = faces


def boundary_points(mesh, faces=None, degree=DEFAULT_DEGREE):
    """Quadrature points on boundary faces of ``mesh`` (weights = area)."""
    if faces is None:
        faces = mesh.boundary_faces
    faces = np.asarray(faces, dtype=np.int64)
    pts, nq = simplex_points(mesh, 2, faces, degree=degree)
    normals = np.repeat(mesh.outward_normals[faces], nq, axis=0)
    return SurfacePoints(mesh, pts.cells, pts.bary, pts.weights, normals,
                         np.repeat(faces, nq))


TRACE_KINDS = ("tr0", "tr1", "tr1perp", "tr2")


def trace_values(kind, u, spts, derivative=False):
    """Evaluate a trace of ``u`` (or of ``d u``) at surface points."""
    v = u.dvalue(spts) if derivative else u.value(spts)
    n = spts.normals
    if kind == "tr0":
        return v
    if kind == "tr1":
        return v - np.einsum("nc,nc->n", v, n)[:, None] * n
    if kind == "tr1perp":
        return np.cross(n, v)
    if kind == "tr2":
        return np.einsum("nc,nc->n", v, n)
    raise ValueError(kind)


def trace_kind(level):
    if level == 3:
        raise LevelMismatch("level 3 has no pointwise trace")
    return ("tr0", "tr1", "tr2")[level]


class TraceField:
    """Per-boundary-face evaluable trace of a bulk field."""

    def __init__(self, level, u, kind=None):
        if level == 3:
            raise LevelMismatch("level 3 has no pointwise trace")
        if u.level != level:
            raise LevelMismatch(f"field level {u.level} != {level}")
        self.level = level
        self.u = u
        self.kind = kind or trace_kind(level)

    def __call__(self, spts):
        return trace_values(self.kind, self.u, spts)


def trace_of(level, u, perp=False):
    if perp and level != 1:
        raise LevelMismatch("twisted trace exists for level 1 only")
    return TraceField(level, u, "tr1perp" if perp else None)


def boundary_l2_norm(level, u, mesh, degree=DEFAULT_DEGREE):
    spts = boundary_points(mesh, degree=degree)
    t = trace_values(trace_kind(level), u, spts)
    return float(np.sqrt(np.dot(spts.weights, _dot(t, t))))
