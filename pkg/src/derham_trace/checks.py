"""Check suites shared by the command line and the acceptance tests.

Every suite returns a list of :class:`Check` records.  A record passes when
its measured value is at most its tolerance; ratio-stability records store
the max/min spread across refinements as the value.
"""
import time
from dataclasses import asdict, dataclass

import numpy as np

from .catalog import admissible, derivative_of_admissible, gradient_of, polynomials
from .errors import NotContractible
from .fem import (DiscreteField, boundary_points, canonical_dofs, cell_points, graph_norm,
                  local_dofs, ndofs, trace_kind, trace_values)
from .mesh import check_contractibility, classify, gen_structured_cube, shape_regularity

DEFAULT_TOLS = {
    "complex.incidence": 0.0,
    "complex.dd": 1e-12,
    "complex.whitney_duality": 1e-12,
    "surface.whitney_stokes": 1e-9,
    "surface.trace_commuting": 1e-9,
    "surface.exactness": 0.0,
    "surface.preimage": 1e-10,
    "surface.poincare_stability": 1.25,
    "weights.duality": 1e-10,
    "weights.derivative": 1e-10,
    "weights.pou": 1e-9,
    "projections.pib_trace_commuting": 1e-9,
    "projections.pib_support": 0.0,
    "projections.pib3_integral": 1e-10,
    "projections.projection": 1e-10,
    "projections.trace_preservation": 1e-9,
    "projections.commuting": 1e-9,
    "projections.locality": 0.0,
    "lift.trace_dofs": 1e-9,
    "minmin.nested": 1e-10,
    "scaling.stability": 1.25,
}


@dataclass
class Check:
    id: str
    anchor: str
    value: float
    tol: float
    passed: bool
    seconds: float

    def record(self):
        out = asdict(self)
        out["pass"] = out.pop("passed")
        return {k: out[k] for k in ("id", "anchor", "value", "tol", "pass", "seconds")}


class Suite:
    """Collects checks; tolerances are looked up by id prefix."""

    def __init__(self, tols=None):
        self.tols = dict(DEFAULT_TOLS)
        self.overrides = dict(tols or {})
        self.checks = []
        self.constants = {}
        self._t = time.perf_counter()

    def tol(self, cid):
        """Longest matching override, else longest matching default."""
        for table in (self.overrides, self.tols):
            best = None
            for key in table:
                if cid == key or cid.startswith(key + "."):
                    if best is None or len(key) > len(best):
                        best = key
            if best is not None:
                return table[best]
        raise KeyError(f"no tolerance for check {cid}")

    def add(self, cid, anchor, value, tol=None):
        now = time.perf_counter()
        tol = self.tol(cid) if tol is None else tol
        value = float(value)
        self.checks.append(Check(cid, anchor, value, tol, bool(value <= tol), now - self._t))
        self._t = now
        return self.checks[-1]

    @property
    def ok(self):
        return all(c.passed for c in self.checks)


def _l2(r, w):
    sq = r * r if r.ndim == 1 else (r * r).sum(axis=1)
    return float(np.sqrt(w @ sq))


# ---------------------------------------------------------------- mesh
def check_mesh(suite, mesh):
    nv, ne, nf, nt = mesh.counts
    euler = nv - ne + nf - nt
    bfaces = mesh.boundary_faces
    per_edge = np.bincount(mesh.face_edges[bfaces].ravel(), minlength=ne)[mesh.boundary_edges]
    suite.add("mesh.boundary_manifold", "every boundary edge has two boundary faces",
              np.abs(per_edge - 2).max(initial=0), 0)
    cof = (mesh.face_cells >= 0).sum(axis=1)
    suite.add("mesh.face_cofaces", "one coface on the boundary, two inside",
              int(np.sum(cof[bfaces] != 1) + np.sum(np.delete(cof, bfaces) != 2)), 0)
    rho = shape_regularity(mesh)
    suite.add("mesh.shape_regularity", "finite shape-regularity parameter",
              0.0 if np.isfinite(rho) and rho > 0 else 1.0, 0)
    suite.constants["rho"] = rho
    suite.constants["euler_characteristic"] = int(euler)
    parts = classify(mesh)
    nest = int(np.sum(parts.boundary_cell_mask[2] & ~parts.boundary_cell_mask[1])
               + np.sum(parts.boundary_cell_mask[1] & ~parts.boundary_cell_mask[0]))
    suite.add("mesh.partition_nesting", "boundary cell classes are nested", nest, 0)
    suite.constants["far_cells"] = [int(m.sum()) for m in parts.far_cell_mask[:3]]


# ---------------------------------------------------------------- complex
def check_complex(suite, mesh, rng, levels=(0, 1, 2, 3)):
    d = mesh.d
    inc = max(abs(d[1] @ d[0]).max(), abs(d[2] @ d[1]).max())
    suite.add("complex.incidence", "incidence products vanish", inc)
    cp = cell_points(mesh, degree=2)
    for level in (0, 1):
        if level not in levels:
            continue
        X = rng.standard_normal((ndofs(mesh, level), 20))
        dd = np.abs(d[level + 1] @ (d[level] @ X)).max()
        # second route: pointwise derivative of the derivative field
        pw = max(np.abs(DiscreteField(mesh, level, x).d().dvalue(cp)).max() for x in X.T)
        suite.add(f"complex.dd.level{level}", "d of d on random coefficients", max(dd, pw))
    for level in levels:
        n = ndofs(mesh, level)
        G = np.column_stack([canonical_dofs(level, DiscreteField.basis(mesh, level, s))
                             for s in range(n)])
        suite.add(f"complex.whitney_duality.level{level}", "canonical dofs of Whitney forms",
                  np.abs(G - np.eye(n)).max())


# ---------------------------------------------------------------- surface
def _tangent_frames(normals):
    a = np.where(np.abs(normals[:, :1]) < 0.9, [[1.0, 0, 0]], [[0, 1.0, 0]])
    t1 = np.cross(normals, a)
    t1 /= np.linalg.norm(t1, axis=1)[:, None]
    return t1, np.cross(normals, t1)


class _At:
    def __init__(self, x):
        self.x = x


def _in_plane_derivatives(u, x, t1, t2, eps=1e-3):
    """Fourth-order central differences of ``u`` along two tangent directions."""
    def diff(t):
        f = lambda k: u.value(_At(x + k * eps * t))
        return (8 * (f(1) - f(-1)) - (f(2) - f(-2))) / (12 * eps)
    return diff(t1), diff(t2)


def surface_derivative_residuals(mesh, fields, degree=6):
    """Trace-derivative commuting residuals at surface quadrature points
    (max absolute value relative to the field's graph norm).

    The surface derivatives are finite differences in the face plane; the
    bulk side is the exact derivative of the field.
    """
    spts = boundary_points(mesh, degree=degree)
    n = spts.normals
    t1, t2 = _tangent_frames(n)
    x = spts.x
    out = {"sgrad": 0.0, "scurl": 0.0, "sdiv": 0.0}
    for u in fields[0]:
        a, b = _in_plane_derivatives(u, x, t1, t2)
        sg = a[:, None] * t1 + b[:, None] * t2
        r = sg - trace_values("tr1", gradient_of(0, u), spts)
        out["sgrad"] = max(out["sgrad"], np.abs(r).max() / max(graph_norm(u, mesh), 1.0))
    for u in fields[1]:
        a, b = _in_plane_derivatives(u, x, t1, t2)
        curl_n = trace_values("tr2", u, spts, derivative=True)
        sc = np.einsum("nc,nc->n", a, t2) - np.einsum("nc,nc->n", b, t1)
        # twisted trace n x u, differentiated in the same frame
        sd = (np.einsum("nc,nc->n", np.cross(n, a), t1) + np.einsum("nc,nc->n", np.cross(n, b), t2))
        scale = max(graph_norm(u, mesh), 1.0)
        out["scurl"] = max(out["scurl"], np.abs(sc - curl_n).max() / scale)
        out["sdiv"] = max(out["sdiv"], np.abs(sd + curl_n).max() / scale)
    return out


def whitney_stokes_residuals(mesh, degree=6):
    """Surface derivatives of traced Whitney forms against incidence sums.

    The left side uses the surface basis, the right side the traces of the
    bulk Whitney forms.
    """
    from .surface import SurfaceMesh, surface_derivative_values
    S = SurfaceMesh(mesh)
    spts = S.points(degree=degree)
    res = [0.0, 0.0]
    for v in range(len(S.verts)):
        c = np.zeros(len(S.verts))
        c[v] = 1.0
        lhs = surface_derivative_values(S, 0, c, spts)
        rhs = DiscreteField(mesh, 1, mesh.d[0][:, S.verts[v]].toarray().ravel())
        res[0] = max(res[0], np.abs(lhs - trace_values("tr1", rhs, spts)).max())
    for e in range(len(S.edges)):
        c = np.zeros(len(S.edges))
        c[e] = 1.0
        lhs = surface_derivative_values(S, 1, c, spts)
        rhs = DiscreteField(mesh, 2, mesh.d[1][:, S.edges[e]].toarray().ravel())
        res[1] = max(res[1], np.abs(lhs - trace_values("tr2", rhs, spts)).max())
    return res


def check_surface(suite, mesh, ns=(1, 2, 3)):
    from .studies import POINCARE_VARIANTS, compare_classes, poincare_sweep
    from .surface import BoundaryComplex, exactness_report, min_norm_preimage
    from .splits import worsey_farin_split
    r0, r1 = whitney_stokes_residuals(mesh)
    suite.add("surface.whitney_stokes.sgrad", "sgrad of vertex traces is an incidence sum", r0)
    suite.add("surface.whitney_stokes.scurl", "scurl of edge traces is an incidence sum", r1)
    from .catalog import trig
    fields = {l: polynomials(l) + [trig(l)] for l in (0, 1)}
    for k, v in surface_derivative_residuals(mesh, fields).items():
        suite.add(f"surface.trace_commuting.{k}", "surface derivative of a trace", v)

    bc = BoundaryComplex(mesh, worsey_farin_split(mesh))
    bad = 0
    worst = 0.0
    for dim in range(3):
        for sid in mesh.boundary_simplices(dim):
            if not check_contractibility(mesh, (dim, int(sid))):
                raise NotContractible(f"boundary star of ({dim}, {sid}) is not a disc")
            P = bc.patch(dim, int(sid))
            rep = exactness_report(P)
            bad += sum(not ok for ok in rep.values())
            for tag in ("sgrad", "scurl", "srot", "sdiv"):
                D = P.ops[tag]
                rng = np.random.default_rng(int(sid) + 1000 * dim)
                target = D @ rng.standard_normal(D.shape[1])
                x = min_norm_preimage(P, tag, target)
                worst = max(worst, np.abs(D @ x - target).max() / max(np.abs(target).max(), 1e-300))
    suite.add("surface.exactness", "rank chains of local surface sequences", bad)
    suite.add("surface.preimage", "minimum-norm preimage residual", worst)

    per_n = {}
    for n in ns:
        by_class, per_dim = poincare_sweep(gen_structured_cube(n))
        per_n[n] = by_class
        suite.constants.setdefault("poincare_max_by_dim", {})[n] = {
            v: {str(k): c for k, c in d.items()} for v, d in per_dim.items()}
    for variant in POINCARE_VARIANTS:
        sp, shared = compare_classes({n: per_n[n][variant] for n in ns})
        suite.constants.setdefault("poincare_shared_classes", {})[variant] = shared
        suite.add(f"surface.poincare_stability.{variant}",
                  "Poincare constants per anchor class across refinements",
                  sp if shared else np.inf)


# ---------------------------------------------------------------- weights
def check_weights(suite, mesh, ws=None):
    from .weights import WeightSet, derivative_residuals, duality_gram, partition_of_unity_error
    ws = ws if ws is not None else WeightSet(mesh)
    for level in range(3):
        G = duality_gram(ws, level)
        suite.add(f"weights.duality.level{level}", "weights dual to traced Whitney forms",
                  np.abs(G - np.eye(len(G))).max())
    r1, r2 = derivative_residuals(ws)
    suite.add("weights.derivative.edge", "scurl of edge weights vs vertex weights", r1)
    suite.add("weights.derivative.face", "srot of face weights vs edge weights", r2)
    suite.add("weights.pou", "face weights form a partition of unity", partition_of_unity_error(ws))
    return ws


# ---------------------------------------------------------------- projections
def check_boundary_projector(suite, bp, levels=(0, 1, 2, 3)):
    mesh = bp.mesh
    spts = boundary_points(mesh)
    cp = cell_points(mesh)
    parts = classify(mesh)
    for level in levels:
        if level == 3:
            worst = 0.0
            for u in polynomials(3):
                scale = max(np.sqrt(cp.weights @ u.value(cp) ** 2), 1e-300)
                worst = max(worst, abs(bp(3, u).coeffs @ mesh.signs - cp.weights @ u.value(cp)) / scale)
            suite.add("projections.pib3_integral", "cell means keep the domain integral", worst)
            continue
        comm = 0.0
        supp = 0.0
        for u in polynomials(level):
            Pu = bp(level, u)
            a = Pu.d()
            b = bp(level + 1, gradient_of(level, u))
            scale = graph_norm(u, mesh)
            if level < 2:
                k = trace_kind(level + 1)
                r = _l2(trace_values(k, a, spts) - trace_values(k, b, spts), spts.weights)
            else:
                r = abs(cp.weights @ (a.value(cp) - b.value(cp)))
            comm = max(comm, r / scale)
            inner = parts.interior_cell_mask[level]
            supp = max(supp, np.abs(Pu.coeffs[local_dofs(mesh, level)[inner]]).max(initial=0.0))
        suite.add(f"projections.pib_trace_commuting.level{level}",
                  "boundary projector commutes with derivatives on traces", comm)
        suite.add(f"projections.pib_support.level{level}",
                  "boundary projector vanishes away from the boundary", supp)


def check_projection(suite, pi, rng, levels=(0, 1, 2, 3), locality_mesh=None):
    from .catalog import polynomials as polys, trig
    from .projections import CommutingProjection, locality_check
    mesh = pi.mesh
    spts = boundary_points(mesh)
    for level in levels:
        n = ndofs(mesh, level)
        err = 0.0
        for s in range(n):
            err = max(err, np.abs(pi(level, DiscreteField.basis(mesh, level, s)).coeffs
                                  - np.eye(n)[s]).max())
        suite.add(f"projections.projection.level{level}", "identity on every basis field", err)
        if level == 3:
            continue
        u, vh = admissible(mesh, level, rng)
        Pu = pi(level, u)
        scale = graph_norm(u, mesh)
        k = trace_kind(level)
        tr = _l2(trace_values(k, Pu, spts) - trace_values(k, u, spts), spts.weights)
        suite.add(f"projections.trace_preservation.level{level}",
                  "discrete traces are preserved", tr / scale)
        du = derivative_of_admissible(level, vh)
        cp = cell_points(mesh)
        diff = Pu.d().value(cp) - pi(level + 1, du).value(cp)
        suite.add(f"projections.commuting.level{level}", "projection commutes with d",
                  _l2(diff, cp.weights) / scale)
    if locality_mesh is None:
        return
    far_pi = locality_mesh if isinstance(locality_mesh, CommutingProjection) else CommutingProjection(locality_mesh)
    parts = classify(far_pi.mesh)
    for level in levels:
        far = np.nonzero(parts.far_cell_mask[level])[0]
        if not len(far):
            suite.add(f"projections.locality.level{level}", "no far cells on this mesh", np.inf)
            continue
        same, changed = locality_check(far_pi, level, trig(level), int(far[0]), polys(level)[3])
        # the perturbation must change something, else the test is vacuous
        suite.add(f"projections.locality.level{level}", "local coefficients depend on es2 only",
                  0.0 if (same and changed) else 1.0)


# ---------------------------------------------------------------- applications
def check_lift(suite, pi, rng, levels=(0, 1, 2)):
    from .applications import ExtensionOperator, lift
    mesh = pi.mesh
    for level in levels:
        E = ExtensionOperator(mesh, level)
        vh = DiscreteField(mesh, level, rng.standard_normal(ndofs(mesh, level)))
        rep = lift(pi, level, vh, E)
        suite.add(f"lift.trace_dofs.level{level}", "lifted field keeps the trace dofs",
                  rep.trace_dof_error)
        suite.constants.setdefault("lift_ratio", {})[level] = rep.ratio


def check_minmin(suite, mesh, rng, levels=(0, 1, 2)):
    from .applications import min_min_compare
    for level in levels:
        vh = DiscreteField(mesh, level, rng.standard_normal(ndofs(mesh, level)))
        rep = min_min_compare(mesh, level, vh, vh.d())
        suite.add(f"minmin.nested.level{level}", "enriched minimum below discrete minimum",
                  max(rep.mu - rep.mu_h, 0.0) / max(rep.scale, 1e-300))
        suite.constants.setdefault("minmin_ratio", {})[level] = rep.ratio


def check_scaling(suite, ns=(1, 2, 3), levels=(0, 1, 2), log=None):
    from .studies import scaling_study, spread
    study = scaling_study(ns, levels, log=log)
    table = {}
    for name in ("weights", "pib", "stab", "lift", "minmin"):
        for level in levels:
            vals = [study[n][name][level] for n in ns]
            table.setdefault(name, {})[level] = vals
            sp = spread(vals) if all(np.isfinite(vals)) else np.inf
            suite.add(f"scaling.stability.{name}.level{level}",
                      "measured constant stable across refinements", sp)
    for n in ns:
        for level in levels:
            suite.add(f"minmin.nested.n{n}.level{level}",
                      "enriched minimum below discrete minimum", study[n]["nested"][level])
    suite.constants["scaling"] = {k: {str(l): v for l, v in d.items()} for k, d in table.items()}
    return study
