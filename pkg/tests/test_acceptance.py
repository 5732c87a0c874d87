"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import time

import numpy as np
import pytest

from derham_trace import checks as C
from derham_trace.mesh import classify, gen_cube_with_hole, gen_structured_cube
from derham_trace.projections import BoundaryProjector, CommutingProjection
from derham_trace.weights import WeightSet, partition_of_unity_error


VERDICTS = []


def _verdict(k, suite, prefixes, seconds, limit, extra=""):
    recs = [c for c in suite.checks if c.id.startswith(prefixes)]
    bad = [f"{c.id}={c.value:.3g}>{c.tol:g}" for c in recs if not c.passed]
    ok = bool(recs) and not bad and seconds < limit
    detail = "; ".join(bad) if bad else f"{len(recs)} checks"
    line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}, {seconds:.1f}s (limit {limit}s)"
    VERDICTS.append(line + extra)
    print("\n" + line + extra)
    assert recs, "no checks recorded"
    assert not bad, detail
    assert seconds < limit


@pytest.fixture(scope="module")
def mesh():
    return gen_structured_cube(2)


def test_criterion_1_complex_algebra(mesh):
    suite = C.Suite()
    t = time.perf_counter()
    C.check_complex(suite, mesh, np.random.default_rng(0))
    _verdict(1, suite, ("complex.incidence", "complex.dd"), time.perf_counter() - t, 5)


def test_criterion_2_whitney_duality(mesh):
    suite = C.Suite()
    t = time.perf_counter()
    C.check_complex(suite, mesh, np.random.default_rng(0))
    _verdict(2, suite, ("complex.whitney_duality",), time.perf_counter() - t, 10)


def test_criterion_3_surface_identities(mesh):
    suite = C.Suite()
    t = time.perf_counter()
    r0, r1 = C.whitney_stokes_residuals(mesh)
    suite.add("surface.whitney_stokes.sgrad", "sgrad of vertex traces", r0)
    suite.add("surface.whitney_stokes.scurl", "scurl of edge traces", r1)
    from derham_trace.catalog import polynomials, trig
    fields = {l: polynomials(l) + [trig(l)] for l in (0, 1)}
    for k, v in C.surface_derivative_residuals(mesh, fields).items():
        suite.add(f"surface.trace_commuting.{k}", "surface derivative of a trace", v)
    _verdict(3, suite, ("surface.whitney_stokes", "surface.trace_commuting"),
             time.perf_counter() - t, 10)


def test_criterion_4_local_exactness_and_poincare(mesh):
    suite = C.Suite()
    t = time.perf_counter()
    C.check_surface(suite, mesh, ns=(1, 2, 3))
    _verdict(4, suite, ("surface.exactness", "surface.preimage", "surface.poincare_stability"),
             time.perf_counter() - t, 60)


@pytest.fixture(scope="module")
def weight_suite(mesh):
    suite = C.Suite()
    t = time.perf_counter()
    ws = C.check_weights(suite, mesh)
    return suite, time.perf_counter() - t, ws


def test_criterion_5_weight_duality(weight_suite):
    suite, seconds, _ = weight_suite
    _verdict(5, suite, ("weights.duality",), seconds, 60)


def test_criterion_6_derivative_relations(weight_suite):
    suite, seconds, _ = weight_suite
    _verdict(6, suite, ("weights.derivative",), seconds, 30)


def test_criterion_7_partition_of_unity(weight_suite):
    suite, seconds, _ = weight_suite
    t = time.perf_counter()
    # two-component boundary: a cube with a cubic hole; the hole needs n=3
    holed = gen_cube_with_hole(3, (1, 2))
    suite.add("weights.pou.hole", "face weights form a partition of unity",
              partition_of_unity_error(WeightSet(holed)))
    _verdict(7, suite, ("weights.pou",), seconds + time.perf_counter() - t, 30)


def test_criterion_8_boundary_projector(mesh):
    suite = C.Suite()
    t = time.perf_counter()
    C.check_boundary_projector(suite, BoundaryProjector(mesh, WeightSet(mesh)))
    _verdict(8, suite, ("projections.pib",), time.perf_counter() - t, 60)


def test_criterion_9_composed_projection(mesh):
    suite = C.Suite()
    t = time.perf_counter()
    pi = CommutingProjection(mesh)
    # cells far from the boundary for every level first appear at n=7
    far = gen_structured_cube(7)
    assert all(classify(far).far_cell_mask[l].any() for l in range(3))
    C.check_projection(suite, pi, np.random.default_rng(0), locality_mesh=far)
    _verdict(9, suite, ("projections.projection", "projections.trace_preservation",
                        "projections.commuting", "projections.locality"),
             time.perf_counter() - t, 120)


def test_criterion_10_scaling():
    suite = C.Suite()
    t = time.perf_counter()
    C.check_scaling(suite, ns=(1, 2, 3))
    table = suite.constants["scaling"]
    lines = [f"  {name} level {l}: " + ", ".join(f"{v:.4g}" for v in vals)
             for name, d in table.items() for l, vals in d.items()]
    _verdict(10, suite, ("scaling.stability", "minmin.nested"), time.perf_counter() - t, 600,
             extra="\n" + "\n".join(lines))
