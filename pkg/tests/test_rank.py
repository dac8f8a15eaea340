import json

import numpy as np
import pytest

from invbound.families import builtin_family, jacobian_fd, loads_family
from invbound.groups import GroupSpec, derive_seed, infinitesimal_act, so_generators
from invbound.rank import (
    BOUND_ONLY,
    CANDIDATE_GATED,
    GATE_FAILED,
    IRREDUCIBLE,
    CertifyConfig,
    certify,
    decide_verdict,
    generic_rank,
    jacobian_report,
    lower_bound,
    numerical_rank,
    orbit_dim,
    orbit_tangent,
    quotient_dim_estimate,
)
from invbound.tensors import SymTensor, TensorSpaceSpec, coords, dim_space, orthonormal_basis, random_tensor

O3 = GroupSpec("O", 3)
ST33 = TensorSpaceSpec("St", 3, 3)
S33 = TensorSpaceSpec("S", 3, 3)
S23 = TensorSpaceSpec("S", 2, 3)
FAST = dict(rank_samples=20, quotient_samples=20, invariance_samples=50)


def test_numerical_rank():
    assert numerical_rank(np.zeros((4, 3)))[0] == 0
    assert numerical_rank(np.eye(3))[0] == 3
    assert numerical_rank(np.diag([1.0, 1e-9, 0.0]))[0] == 1
    assert numerical_rank(np.diag([1.0, 1e-7, 0.0]))[0] == 2
    assert numerical_rank(np.diag([1.0, 1e-7]), tol=1e-6)[0] == 1


def test_orbit_dim_examples(rng):
    assert orbit_dim(SymTensor.zeros(3, 3), O3).orbit_dim == 0
    assert orbit_dim(SymTensor.identity(3), O3).orbit_dim == 0
    rep = orbit_dim(random_tensor(ST33, rng), O3, space=ST33)
    assert rep.orbit_dim == 3
    assert rep.tangent.shape == (7, 3)
    # degenerate matrix with a repeated eigenvalue: stabilizer O(2) x O(1), orbit dim 2
    assert orbit_dim(SymTensor.from_dense(np.diag([1.0, 1.0, 2.0])), O3).orbit_dim == 2


def test_orbit_tangent_matches_direct_coordinates(rng):
    a = random_tensor(ST33, rng)
    basis = orthonormal_basis(ST33)
    direct = np.array([coords(infinitesimal_act(w, a), basis) for w in so_generators(3)]).T
    assert np.allclose(orbit_tangent(a, O3, ST33), direct, atol=1e-13)
    # ambient S(3,3) gives the same rank
    assert orbit_dim(a, O3).orbit_dim == orbit_dim(a, O3, space=ST33).orbit_dim


@pytest.mark.parametrize("space,expected", [(ST33, 4), (S33, 7), (S23, 3), (TensorSpaceSpec("St", 2, 3), 2)])
def test_quotient_estimate(space, expected):
    est = quotient_dim_estimate(space, O3, 100, np.random.default_rng(3))
    assert est.estimate == expected
    assert est.max_orbit_dim == 3
    assert all(d <= 3 for d in est.orbit_dims)
    assert est.estimate >= dim_space(space) - 3
    assert est.estimate < dim_space(space)


def test_quotient_estimate_rejects_zero_samples():
    with pytest.raises(ValueError):
        quotient_dim_estimate(ST33, O3, 0)


@pytest.mark.parametrize(
    "space,group,expected",
    [(ST33, O3, 4), (S33, O3, 7), (TensorSpaceSpec("St", 2, 3), O3, 2), (S23, GroupSpec("SO", 3), 3)],
)
def test_lower_bound(space, group, expected):
    assert lower_bound(space, group) == expected


@pytest.mark.parametrize("space,group", [(TensorSpaceSpec("S", 1, 3), O3), (TensorSpaceSpec("S", 1, 4), GroupSpec("O", 4))])
def test_lower_bound_hypothesis(space, group):
    with pytest.raises(ValueError, match="dim V > dim G"):
        lower_bound(space, group)


def test_generic_rank_examples():
    f = builtin_family("ST33_DEFAULT")
    assert generic_rank(f.subset(["J2"]), 10, np.random.default_rng(1)).rank == 1
    res = generic_rank(builtin_family("S23_CLASSICAL"), 50, np.random.default_rng(1))
    assert res.rank == 3 and res.fraction >= 0.95
    with pytest.raises(ValueError):
        generic_rank(f, 0)


def test_default_j8_is_functionally_dependent():
    # E lies in span(I, B, B^2) on St(3,3), so J8 is a function of J2, J4, J6 and the default gate fails
    res = generic_rank(builtin_family("ST33_DEFAULT"), 30, np.random.default_rng(4))
    assert res.rank == 3


def test_jacobian_rank_plus_orbit_dim(rng):
    f = builtin_family("ST33_DEFAULT")
    basis = orthonormal_basis(ST33)
    for _ in range(20):
        a = random_tensor(ST33, rng)
        a = a * (1 / a.norm())
        rep = jacobian_report(f, a)
        orb = orbit_dim(a, O3, space=ST33)
        assert np.max(np.abs(rep.jacobian @ orb.tangent)) <= 1e-6
        assert rep.rank + orb.orbit_dim <= 7
        assert rep.rank <= min(len(f), 7)
        assert np.array_equal(rep.jacobian, jacobian_fd(f, a, basis))


def test_ranks_are_scale_invariant():
    rng = np.random.default_rng(8)
    f = builtin_family("S23_CLASSICAL")
    g = builtin_family("ST33_DEFAULT")
    for _ in range(50):
        t = random_tensor(S23, rng)
        a = random_tensor(ST33, rng)
        assert jacobian_report(f, t).rank == jacobian_report(f, t * 2.0).rank
        assert jacobian_report(g, a).rank == jacobian_report(g, a * 2.0).rank
        assert orbit_dim(a, O3).orbit_dim == orbit_dim(a * 2.0, O3).orbit_dim


@pytest.mark.parametrize(
    "r,bound,rank,quotient,invariant,expected",
    [
        (4, 4, 4, 4, True, IRREDUCIBLE),
        (4, 4, 3, 4, True, GATE_FAILED),
        (4, 4, 4, 4, False, GATE_FAILED),
        (2, 4, 2, 4, True, BOUND_ONLY),
        (5, 4, 4, 4, True, CANDIDATE_GATED),
        (11, 7, 7, 7, True, CANDIDATE_GATED),
        (11, 7, 6, 7, True, GATE_FAILED),
    ],
)
def test_decide_verdict(r, bound, rank, quotient, invariant, expected):
    assert decide_verdict(r, bound, rank, quotient, invariant) == expected


def test_certify_s23():
    cert = certify(builtin_family("S23_CLASSICAL"), CertifyConfig(**FAST))
    assert cert.verdict == IRREDUCIBLE
    assert (cert.n, cert.d, cert.lower_bound, cert.r, cert.generic_rank) == (6, 3, 3, 3, 3)
    assert cert.invariance_passed


def test_certify_bound_only():
    cert = certify(builtin_family("ST33_DEFAULT").subset(["J2", "J4"]), CertifyConfig(**FAST))
    assert cert.verdict == BOUND_ONLY
    assert cert.r == 2 and cert.lower_bound == 4
    assert "cannot be a polynomial function basis" in cert.statement


def test_certify_gate_failure_without_fallbacks():
    cert = certify(builtin_family("ST33_DEFAULT"), CertifyConfig(try_fallbacks=False, **FAST))
    assert cert.verdict == GATE_FAILED
    assert cert.generic_rank == 3


def test_certify_non_invariant_family():
    bad = loads_family("space St 3 3\ngroup O 3\ninv bad 1 = A_111\n")
    cert = certify(bad, CertifyConfig(**FAST))
    assert cert.verdict == GATE_FAILED
    assert not cert.invariance_passed and cert.invariance_deviation > 0.1


def test_certify_rejects_mismatched_space():
    with pytest.raises(ValueError):
        certify(builtin_family("S23_CLASSICAL"), CertifyConfig(**FAST), space=ST33)


def test_certificate_is_reproducible():
    cfg = CertifyConfig(seed=123, **FAST)
    f = builtin_family("S23_CLASSICAL")
    a, b = certify(f, cfg).to_json(), certify(f, cfg).to_json()
    assert a == b
    doc = json.loads(a)
    for key in ("seed", "tolerances", "samples", "tool_version", "verdict", "lower_bound", "generic_rank"):
        assert key in doc
    assert doc["seed"] == 123
    assert derive_seed(123, 0) != derive_seed(123, 1)
