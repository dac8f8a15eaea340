"""Acceptance criteria AC1-AC7, each run at its stated tolerance and time budget.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""

import functools
import json
import math
import time

import numpy as np
import pytest
import scipy.linalg

from invbound.cli import main
from invbound.einsum import contract_dense
from invbound.families import (
    builtin_family,
    check_invariance,
    eval_family,
    fallback_families,
    jacobian_fd,
    loads_family,
    scale_behavior,
)
from invbound.groups import GroupSpec, act, derive_seed, haar_sample, infinitesimal_act, skew_from_coefficients
from invbound.orbits import orbit_distance, separability_probe
from invbound.rank import (
    BOUND_ONLY,
    IRREDUCIBLE,
    CertifyConfig,
    certify,
    generic_rank,
    lower_bound,
    orbit_tangent,
    quotient_dim_estimate,
)
from invbound.tensors import TensorSpaceSpec, dim_space, is_traceless, orthonormal_basis, random_tensor

from conftest import unit_random
from test_einsum import arrays_of, loop_eval, random_context, random_expr

O3 = GroupSpec("O", 3)
ST33 = TensorSpaceSpec("St", 3, 3)
SEED = 0xC0FFEE
AC6_BUDGET = 300.0
_ac6_elapsed = []


def rng_for(k):
    return np.random.default_rng(derive_seed(SEED, k))


@functools.lru_cache(maxsize=None)
def gated_family():
    """First of ST33_DEFAULT and its documented fallbacks whose generic rank equals its size."""
    base = builtin_family("ST33_DEFAULT")
    for fam in [base, *fallback_families(base)]:
        res = generic_rank(fam, 100, rng_for(40))
        if res.rank == len(fam) and res.fraction >= 0.95:
            return fam, res
    raise AssertionError("no candidate passed the rank gate")


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def test_ac1_dimension_table(report):
    with Timer() as t:
        ok = dim_space(TensorSpaceSpec("S", 3, 3)) == 10 and dim_space(ST33) == 7
        for m in range(2, 7):
            for n in range(2, 6):
                ok &= dim_space(TensorSpaceSpec("St", m, n)) == math.comb(n + m - 1, n - 1) - math.comb(n + m - 3, n - 1)
    report("AC1 dimension table", ok and t.elapsed < 1.0, f"exact match, {t.elapsed:.3f}s")
    assert ok and t.elapsed < 1.0


def test_ac2_lower_bounds(report):
    with Timer() as t:
        st = lower_bound(ST33, O3)
        s = lower_bound(TensorSpaceSpec("S", 3, 3), O3)
    ok = (st, s) == (4, 7) and t.elapsed < 1.0
    report("AC2 lower bounds", ok, f"St(3,3)/O(3) -> {st}, S(3,3)/O(3) -> {s}, {t.elapsed:.3f}s")
    assert ok


def test_ac3_quotient_estimates(report):
    with Timer() as t:
        st = quotient_dim_estimate(ST33, O3, 100, rng_for(30))
        s33 = quotient_dim_estimate(TensorSpaceSpec("S", 3, 3), O3, 100, rng_for(31))
        s23 = quotient_dim_estimate(TensorSpaceSpec("S", 2, 3), O3, 100, rng_for(32))
    ok = (st.max_orbit_dim, st.estimate, s33.estimate, s23.estimate) == (3, 4, 7, 3) and t.elapsed < 10.0
    report(
        "AC3 quotient-dimension estimates",
        ok,
        f"St(3,3) max orbit {st.max_orbit_dim} est {st.estimate}, S(3,3) {s33.estimate}, S(2,3) {s23.estimate}, "
        f"{t.elapsed:.2f}s",
    )
    assert ok


def test_ac4_rank_gate(report):
    with Timer() as t:
        default = generic_rank(builtin_family("ST33_DEFAULT"), 100, rng_for(40))
        fam, res = gated_family()
        s23 = generic_rank(builtin_family("S23_CLASSICAL"), 100, rng_for(41))
    ok = res.rank == 4 and res.fraction >= 0.95 and s23.rank == 3 and s23.fraction >= 0.95 and t.elapsed < 30.0
    report(
        "AC4 rank gate",
        ok,
        f"ST33_DEFAULT rank {default.rank} ({default.fraction:.2f}); gate passed by {fam.name} "
        f"rank {res.rank} ({res.fraction:.2f}); S23_CLASSICAL rank {s23.rank} ({s23.fraction:.2f}), {t.elapsed:.1f}s",
    )
    assert ok


def test_ac5_end_to_end_certificate(report, capsys):
    with Timer() as t:
        code = main(["certify", "--family", "ST33_DEFAULT"])
    out, _ = capsys.readouterr()
    doc = json.loads(out)
    ok = (
        code == 0
        and doc["verdict"] == IRREDUCIBLE
        and doc["r"] == doc["lower_bound"] == 4
        and doc["invariance_deviation"] <= 1e-9
        and doc["samples"]["invariance"] == 1000
        and t.elapsed < 120.0
    )
    report(
        "AC5 certify ST33_DEFAULT",
        ok,
        f"exit {code}, {doc['verdict']} via {doc['family']}, r={doc['r']} bound={doc['lower_bound']}, "
        f"deviation {doc['invariance_deviation']:.1e}, degrees {doc['degrees']} "
        f"(mismatch flagged: {doc['degree_mismatch']}), {t.elapsed:.1f}s",
    )
    assert ok


def _ac6(report, label, ok, detail, elapsed):
    _ac6_elapsed.append(elapsed)
    report(f"AC6 {label}", ok, f"{detail}, {elapsed:.2f}s")
    assert ok


def test_ac6_homomorphism_and_norm(report):
    rng = rng_for(60)
    hom = nrm = 0.0
    with Timer() as t:
        for _ in range(1000):
            g1, g2 = haar_sample(O3, rng), haar_sample(O3, rng)
            a = random_tensor(ST33, rng)
            lhs = act(g2, act(g1, a))
            hom = max(hom, np.max(np.abs(lhs.values - act(g2 @ g1, a).values)))
            nrm = max(nrm, abs(act(g1, a).norm() - a.norm()))
    _ac6(report, "homomorphism/norm", hom <= 1e-10 and nrm <= 1e-10, f"max {hom:.1e} / {nrm:.1e} over 1000", t.elapsed)


def test_ac6_tracelessness(report):
    rng = rng_for(61)
    with Timer() as t:
        bad = sum(not is_traceless(act(haar_sample(O3, rng), random_tensor(ST33, rng)), 1e-10) for _ in range(1000))
    _ac6(report, "tracelessness preserved", bad == 0, f"{bad} failures over 1000", t.elapsed)


def test_ac6_infinitesimal_action(report):
    rng = rng_for(62)
    h, worst = 1e-6, 0.0
    with Timer() as t:
        for _ in range(100):
            a = random_tensor(ST33, rng)
            w = skew_from_coefficients(rng.standard_normal(3), 3)
            fd = (act(scipy.linalg.expm(h * w), a) - act(scipy.linalg.expm(-h * w), a)) * (0.5 / h)
            worst = max(worst, np.max(np.abs(fd.values - infinitesimal_act(w, a).values)))
    _ac6(report, "infinitesimal action vs FD", worst <= 1e-5, f"max {worst:.1e} over 100", t.elapsed)


def test_ac6_tangent_annihilation(report):
    fam, _ = gated_family()
    rng = rng_for(63)
    basis = orthonormal_basis(ST33)
    worst = 0.0
    with Timer() as t:
        for _ in range(100):
            a = unit_random(ST33, rng)
            worst = max(worst, np.max(np.abs(jacobian_fd(fam, a, basis) @ orbit_tangent(a, O3, ST33))))
    _ac6(report, "gradient-tangent annihilation", worst <= 1e-6, f"max |J.T| {worst:.1e} over 100 ({fam.name})", t.elapsed)


def test_ac6_homogeneity(report):
    fam, _ = gated_family()
    rng = rng_for(64)
    degs = np.array(fam.degrees)
    worst = 0.0
    with Timer() as t:
        for _ in range(100):
            a = random_tensor(ST33, rng)
            base = eval_family(fam, a)
            for lam in (-2.0, -1.0, 0.5, 3.0):
                want = lam**degs * base
                worst = max(worst, np.max(np.abs(scale_behavior(fam, a, lam) - want) / np.abs(want)))
    _ac6(report, "homogeneity", worst <= 1e-10, f"max relative {worst:.1e}", t.elapsed)


def test_ac6_einsum_oracle(report):
    rng = rng_for(65)
    worst = 0.0
    with Timer() as t:
        for _ in range(200):
            expr = random_expr(rng)
            arrays = arrays_of(random_context(rng))
            ref, scale = loop_eval(expr, arrays, 3)
            got = contract_dense(expr, arrays.__getitem__, 3)
            denom = np.maximum(np.maximum(np.abs(ref), scale), 1e-300)
            worst = max(worst, float(np.max(np.abs(got - ref) / denom, initial=0.0)))
    _ac6(report, "einsum vs nested loops", worst <= 1e-12, f"max relative {worst:.1e} over 200", t.elapsed)


def test_ac6_planted_recovery(report):
    rng = rng_for(66)
    dists = []
    with Timer() as t:
        for _ in range(100):
            a = random_tensor(ST33, rng)
            dists.append(orbit_distance(a, act(haar_sample(O3, rng), a), O3).distance)
    fails = sum(d > 1e-6 for d in dists)
    _ac6(report, "planted orbit recovery", fails == 0, f"{fails} failures, worst {max(dists):.1e} over 100", t.elapsed)


def test_ac6_separability_probe(report):
    fam, _ = gated_family()
    with Timer() as t:
        rep = separability_probe(fam, 200, rng_for(67))
    n = sum(rep.pairs_tested.values())
    ok = rep.verdict == "NO_VIOLATIONS" and n == 600
    _ac6(report, "separability probe", ok, f"{len(rep.violations)} violations over {n} pairs ({fam.name})", t.elapsed)


def test_ac6_total_time(report):
    total = sum(_ac6_elapsed)
    ok = len(_ac6_elapsed) == 8 and total < AC6_BUDGET
    report("AC6 property suites total", ok, f"{len(_ac6_elapsed)} suites, {total:.1f}s (budget {AC6_BUDGET:.0f}s)")
    assert ok


def test_ac7_negative_controls(report):
    with Timer() as t:
        cert = certify(builtin_family("ST33_DEFAULT").subset(["J2", "J4"]), CertifyConfig())
        bad = loads_family("space St 3 3\ngroup O 3\ninv bad 1 = A_111\n")
        inv = check_invariance(bad, unit_random(ST33, rng_for(70)), 1000, 1e-9, rng_for(71))
    ok = cert.verdict == BOUND_ONLY and not inv.passed and inv.max_deviation > 0.1 and t.elapsed < 30.0
    report(
        "AC7 negative controls",
        ok,
        f"{{J2,J4}} -> {cert.verdict}; A_111 deviation {inv.max_deviation:.2f}, {t.elapsed:.1f}s",
    )
    assert ok
