"""Measured constants and refinement studies.

Generic constants of the stability estimates are measured as suprema over
finite test spaces (generalized eigenvalue problems), which bound the
ratio of every single test field from above.  Local quantities are also
grouped by anchor similarity class: anchors whose patches coincide after
translation and scaling by the anchor size share a class, and the
constants of one class are comparable across refinements.
"""
import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .applications import lift_constant, min_min_compare, min_min_constant, sup_ratio
from .fem import DiscreteField, cell_points, ndofs
from .mesh import classify, gen_structured_cube
from .projections import BoundaryProjector, CommutingProjection, neighbourhood
from .spaces import DerivativeSpace, EnrichedSpace, WhitneySpace, local_grams
from .surface import POINCARE_VARIANTS, BoundaryComplex, poincare_constant
from .weights import WeightSet

ROUND = 6


def similarity_key(dim, points, center, h):
    """Class key of a patch: vertex positions relative to the anchor, in units of h."""
    p = np.round((np.asarray(points) - center) / h, ROUND) + 0.0
    p = p[np.lexsort(p.T[::-1])]
    return (dim,) + tuple(map(tuple, p))


def compare_classes(per_level, factor=1.25):
    """Max/min spread of each class present at two or more levels.

    ``per_level`` maps a level label to ``{key: value}``.  Returns
    ``(worst_spread, n_shared_classes)``.
    """
    merged = {}
    for vals in per_level.values():
        for k, v in vals.items():
            merged.setdefault(k, []).append(v)
    spreads = [max(v) / min(v) for v in merged.values() if len(v) >= 2 and min(v) > 0]
    return (max(spreads) if spreads else 1.0), len(spreads)


def spread(values):
    values = [v for v in values if v > 0]
    return max(values) / min(values) if values else 1.0


# ---------------------------------------------------------------- Poincare
def poincare_sweep(mesh, bc=None):
    """Constants of every variant on every boundary patch, keyed by class."""
    if bc is None:
        from .splits import worsey_farin_split
        bc = BoundaryComplex(mesh, worsey_farin_split(mesh))
    out = {v: {} for v in POINCARE_VARIANTS}
    per_dim = {v: {} for v in POINCARE_VARIANTS}
    for dim in range(3):
        for sid in mesh.boundary_simplices(dim):
            P = bc.patch(dim, int(sid))
            verts = np.unique(mesh.faces[bc.base.faces[P.faces]])
            center = mesh.vertices[mesh.simplices(dim)[sid]].mean(axis=0)
            key = similarity_key(dim, mesh.vertices[verts], center, P.h)
            for variant in POINCARE_VARIANTS:
                c = poincare_constant(P, variant).constant
                out[variant][key] = max(out[variant].get(key, 0.0), c)
                per_dim[variant][dim] = max(per_dim[variant].get(dim, 0.0), c)
    return out, per_dim


# ---------------------------------------------------------------- weights
def local_size(mesh, dim, sid):
    """Largest cell diameter in the star of a simplex."""
    return float(mesh.diameters[3][mesh.star(dim, sid)].max())


def weight_norms(ws):
    """``|zeta_r|_{L2(boundary)} h_r^(1-l)`` per level, ``h_r`` the local mesh size."""
    A = ws.bc.alf
    spts = A.points()
    out = {}
    for level in range(3):
        V = ws.values(level, spts)
        sq = (V ** 2).sum(-1) if V.ndim == 3 else V ** 2
        nrm = np.sqrt(sq @ spts.weights)
        h = np.array([local_size(ws.mesh, level, int(s)) for s in ws.anchors(level)])
        out[level] = nrm * h ** (1 - level)
    return out


# ---------------------------------------------------------------- projections
def pib_bound_constants(bp, level, order=2, domain="support"):
    """Per boundary-touching cell: sup over the enriched space of
    ``|Pi_bnd u|_cell / (|u|^2 + h^2 |du|^2)^(1/2)`` on the second extended
    star restricted as in :func:`dependence_mask`.  Returns
    ``{cell: constant}``; ``inf`` flags a dependence on data outside that
    neighbourhood."""
    mesh = bp.mesh
    parts = classify(mesh)
    S = EnrichedSpace(mesh, level, order)
    W = WhitneySpace(mesh, level)
    Pb = bp.matrix(level, S).tocsr()
    MW, _ = local_grams(W)
    MS, KS = local_grams(S)
    out = {}
    for t in np.nonzero(parts.boundary_cell_mask[level])[0]:
        nb = neighbourhood(parts, t, level, domain)
        J = np.unique(S.cell_dofs[nb])
        loc = {g: i for i, g in enumerate(J)}
        Pt = Pb[W.cell_dofs[t]]
        if Pt.nnz and not np.isin(Pt.tocoo().col, J).all():
            out[int(t)] = np.inf
            continue
        h2 = mesh.diameters[3][t] ** 2
        B = np.zeros((len(J), len(J)))
        for c in nb:
            ids = [loc[g] for g in S.cell_dofs[c]]
            B[np.ix_(ids, ids)] += MS[c] + h2 * KS[c]
        P = Pt[:, J].toarray()
        X = sla.cho_solve(sla.cho_factor(B), P.T)
        R = sla.sqrtm(MW[t]).real
        H = R @ P @ X @ R.T
        out[int(t)] = float(np.sqrt(max(np.linalg.eigvalsh(0.5 * (H + H.T)).max(), 0.0)))
    return out


def pib_classes(mesh, level, consts, domain="support"):
    parts = classify(mesh)
    out = {}
    for t, c in consts.items():
        nb = neighbourhood(parts, t, level, domain)
        verts = np.unique(mesh.cells[nb])
        key = similarity_key(level, mesh.vertices[verts], mesh.vertices[mesh.cells[t]].mean(axis=0),
                             mesh.diameters[3][t])
        out[key] = max(out.get(key, 0.0), c)
    return out


def l2_stability_constant(pi, level, order=2, degree=6):
    """sup of ``|Pi u| / |u|`` over ``u`` with discrete derivative, drawn
    from the Whitney space plus derivatives of the enriched space below."""
    mesh = pi.mesh
    W = WhitneySpace(mesh, level)
    pts = cell_points(mesh, None, degree)
    w = sp.diags(pts.weights)
    MW = sum(B.T @ w @ B for B in W.basis_matrix(pts)).toarray()
    if level in (0, 3):
        if level == 0:
            return 1.0
        S = EnrichedSpace(mesh, 3, order)
        Pi = pi.matrix(3, S).toarray()
        G = sum(B.T @ w @ B for B in S.basis_matrix(pts)).toarray()
        return sup_ratio(Pi.T @ MW @ Pi, G)
    D = DerivativeSpace(EnrichedSpace(mesh, level - 1, order))
    span = [sp.hstack([a, b]).tocsr() for a, b in zip(W.basis_matrix(pts), D.basis_matrix(pts))]
    G = sum(B.T @ w @ B for B in span).toarray()
    Pi = np.hstack([np.eye(W.ndofs), pi.matrix(level, D).toarray()])
    return sup_ratio(Pi.T @ MW @ Pi, G)


# ---------------------------------------------------------------- refinement study
def scaling_study(ns=(1, 2, 3), levels=(0, 1, 2), order=2, log=None, seed=0):
    """Measured constants per refinement level.

    Returns ``{n: record}`` with weight norms, boundary-operator constants
    (max and per class), L2-stability, lifting and min-min constants, and
    the nesting violation ``max(mu - mu_h, 0) / scale`` of a random min-min
    run per level.
    """
    rng = np.random.default_rng(seed)
    out = {}
    for n in ns:
        mesh = gen_structured_cube(n)
        ws = WeightSet(mesh)
        bp = BoundaryProjector(mesh, ws)
        pi = CommutingProjection(mesh, boundary=bp)
        rec = {"weights": {l: float(v.max()) for l, v in weight_norms(ws).items()},
               "pib": {}, "pib_classes": {}, "stab": {}, "lift": {}, "minmin": {},
               "nested": {}}
        for l in levels:
            consts = pib_bound_constants(bp, l, order)
            rec["pib"][l] = max(consts.values())
            rec["pib_classes"][l] = pib_classes(mesh, l, consts)
            rec["stab"][l] = l2_stability_constant(pi, l, order)
            rec["lift"][l] = lift_constant(pi, l)
            rec["minmin"][l] = min_min_constant(mesh, l, order)
            vh = DiscreteField(mesh, l, rng.standard_normal(ndofs(mesh, l)))
            rep = min_min_compare(mesh, l, vh, vh.d(), order)
            rec["nested"][l] = max(rep.mu - rep.mu_h, 0.0) / rep.scale
            if log:
                log(f"n={n} level={l} pib={rec['pib'][l]:.4g} stab={rec['stab'][l]:.4g} "
                    f"lift={rec['lift'][l]:.4g} minmin={rec['minmin'][l]:.4g}")
        out[n] = rec
    return out
