"""Orbit dimensions, quotient-dimension estimates, generic Jacobian rank and bound certificates.

The lower bound for the size of a polynomial function basis is
``dim V - dim G``.  Everything here is numerical evidence around that integer:
the orbit tangent rank says how large the quotient really is, and the Jacobian
rank of a family says whether it can possibly separate generic orbits.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .families import (
    InvariantFamily,
    check_invariance,
    expected_degrees,
    fallback_families,
    jacobian_fd,
)
from .groups import GroupSpec, derive_seed, group_dim, infinitesimal_act_dense, so_generators
from .tensors import (
    SymTensor,
    TensorSpaceSpec,
    coords,
    dim_space,
    orbit_weights,
    orthonormal_basis,
    random_tensor,
)

RANK_TOL = 1e-8
DEFAULT_SEED = 0xC0FFEE


def numerical_rank(mat, tol: float = RANK_TOL) -> tuple[int, np.ndarray]:
    """Count singular values above ``tol * sigma_max``; an all-zero matrix has rank 0."""
    s = np.linalg.svd(np.atleast_2d(np.asarray(mat, dtype=float)), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0, s
    return int(np.sum(s > tol * s[0])), s


def _ambient(a: SymTensor, space: TensorSpaceSpec | None) -> TensorSpaceSpec:
    # S(m,n) contains every symmetric tensor; the tangent rank does not depend on the ambient choice
    return space if space is not None else TensorSpaceSpec("S", a.order, a.dim)


@dataclass
class OrbitReport:
    coords: np.ndarray
    tangent: np.ndarray
    singular_values: np.ndarray
    orbit_dim: int
    tol: float

    def to_dict(self) -> dict:
        return {
            "coords": self.coords.tolist(),
            "tangent": self.tangent.tolist(),
            "singular_values": self.singular_values.tolist(),
            "orbit_dim": self.orbit_dim,
            "tol": self.tol,
        }


def orbit_tangent(a: SymTensor, group: GroupSpec, space: TensorSpaceSpec | None = None) -> np.ndarray:
    """dim(V) x dim(G) matrix of coordinates of the infinitesimal action along each generator."""
    space = _ambient(a, space)
    basis = orthonormal_basis(space)
    mat = basis.matrix
    w = orbit_weights(a.order, a.dim)
    dense = a.dense()
    cols = []
    for gen in so_generators(group.dim):
        t = SymTensor.from_dense(infinitesimal_act_dense(gen, dense), check=False)
        cols.append(mat @ (w * t.values))
    return np.array(cols).T


def orbit_dim(a: SymTensor, group: GroupSpec, tol: float = RANK_TOL, space: TensorSpaceSpec | None = None) -> OrbitReport:
    space = _ambient(a, space)
    tangent = orbit_tangent(a, group, space)
    r, s = numerical_rank(tangent, tol)
    return OrbitReport(coords(a, orthonormal_basis(space)), tangent, s, r, tol)


@dataclass
class QuotientDimEstimate:
    space: TensorSpaceSpec
    group: GroupSpec
    num_samples: int
    max_orbit_dim: int
    estimate: int
    orbit_dims: list[int]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["space"], d["group"] = str(self.space), str(self.group)
        return d


def quotient_dim_estimate(
    space: TensorSpaceSpec,
    group: GroupSpec,
    num_samples: int = 100,
    rng: np.random.Generator | None = None,
    tol: float = RANK_TOL,
) -> QuotientDimEstimate:
    """dim(V) minus the largest orbit dimension seen over Gaussian samples."""
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    rng = np.random.default_rng(DEFAULT_SEED) if rng is None else rng
    dims = [orbit_dim(random_tensor(space, rng), group, tol, space).orbit_dim for _ in range(num_samples)]
    top = max(dims)
    return QuotientDimEstimate(space, group, num_samples, top, dim_space(space) - top, dims)


def lower_bound(space: TensorSpaceSpec, group: GroupSpec) -> int:
    """dim V - dim G, defined only when dim V > dim G."""
    n, d = dim_space(space), group_dim(group)
    if n <= d:
        raise ValueError(
            f"lower bound needs dim V > dim G, but dim {space} = {n} <= dim {group} = {d}"
        )
    return n - d


@dataclass
class JacobianReport:
    family: str
    coords: np.ndarray
    jacobian: np.ndarray
    singular_values: np.ndarray
    rank: int
    tol: float

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "coords": self.coords.tolist(),
            "jacobian": self.jacobian.tolist(),
            "singular_values": self.singular_values.tolist(),
            "rank": self.rank,
            "tol": self.tol,
        }


def jacobian_report(family: InvariantFamily, a: SymTensor, tol: float = RANK_TOL) -> JacobianReport:
    basis = orthonormal_basis(family.space)
    jac = jacobian_fd(family, a, basis)
    r, s = numerical_rank(jac, tol)
    return JacobianReport(family.name, coords(a, basis), jac, s, r, tol)


@dataclass
class GenericRank:
    rank: int
    fraction: float
    reports: list[JacobianReport]


def generic_rank(
    family: InvariantFamily,
    num_samples: int = 100,
    rng: np.random.Generator | None = None,
    tol: float = RANK_TOL,
) -> GenericRank:
    """Max Jacobian rank over Gaussian samples, with the fraction of samples attaining it."""
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    rng = np.random.default_rng(DEFAULT_SEED) if rng is None else rng
    reports = [jacobian_report(family, random_tensor(family.space, rng), tol) for _ in range(num_samples)]
    ranks = [r.rank for r in reports]
    top = max(ranks)
    return GenericRank(top, ranks.count(top) / len(ranks), reports)


# ---------------------------------------------------------------------------
# certificates

BOUND_ONLY = "BOUND_ONLY"
CANDIDATE_GATED = "FUNCTION_BASIS_CANDIDATE_GATED"
IRREDUCIBLE = "IRREDUCIBLE_BY_COUNT"
GATE_FAILED = "GATE_FAILED"


@dataclass(frozen=True)
class CertifyConfig:
    seed: int = DEFAULT_SEED
    rank_samples: int = 100
    rank_tol: float = RANK_TOL
    quotient_samples: int = 100
    invariance_samples: int = 1000
    inv_tol: float = 1e-9
    try_fallbacks: bool = True


@dataclass
class BoundCertificate:
    space: str
    group: str
    n: int
    d: int
    lower_bound: int
    quotient_estimate: int
    family: str
    r: int
    members: list[dict]
    degrees: list[int]
    expected_degrees: list[int] | None
    degree_mismatch: bool
    generic_rank: int
    rank_fraction: float
    invariance_deviation: float
    invariance_passed: bool
    verdict: str
    statement: str
    candidates_tried: list[dict] = field(default_factory=list)
    seed: int = DEFAULT_SEED
    tolerances: dict = field(default_factory=dict)
    samples: dict = field(default_factory=dict)
    tool_version: str = __version__

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def decide_verdict(r: int, bound: int, rank: int, quotient: int, invariant: bool) -> str:
    # a family larger than the quotient can at best reach rank = quotient dimension
    if not invariant or rank < min(r, quotient):
        return GATE_FAILED
    if r == bound and rank == r:
        return IRREDUCIBLE
    if r > bound and rank == quotient:
        return CANDIDATE_GATED
    return BOUND_ONLY


def _statement(verdict: str, r: int, bound: int, rank: int, name: str) -> str:
    if verdict == IRREDUCIBLE:
        return (
            f"{name} has {r} invariants, equal to the lower bound {bound}, full generic Jacobian rank "
            f"and passed the invariance check; a function basis of this size cannot drop a member, "
            f"so it is irreducible if it is a function basis."
        )
    if verdict == CANDIDATE_GATED:
        return f"{name} has {r} > {bound} invariants and reaches the quotient dimension {rank} in rank; candidate only."
    if verdict == GATE_FAILED:
        return f"{name} failed the gate (generic rank {rank} for {r} members, or invariance failed)."
    return f"{name} has {r} < {bound} invariants and cannot be a polynomial function basis."


def _certify_one(family: InvariantFamily, config: CertifyConfig, bound: int, quotient: int):
    rank = generic_rank(
        family, config.rank_samples, np.random.default_rng(derive_seed(config.seed, 1)), config.rank_tol
    )
    inv_rng = np.random.default_rng(derive_seed(config.seed, 2))
    sample = random_tensor(family.space, inv_rng)
    inv = check_invariance(family, sample, config.invariance_samples, config.inv_tol, inv_rng)
    verdict = decide_verdict(len(family), bound, rank.rank, quotient, inv.passed)
    return rank, inv, verdict


def certify(
    family: InvariantFamily,
    config: CertifyConfig = CertifyConfig(),
    space: TensorSpaceSpec | None = None,
    group: GroupSpec | None = None,
) -> BoundCertificate:
    """Run the bound, quotient estimate, rank gate and invariance check, and assemble a certificate.

    When the rank gate fails and the family has documented fallbacks, they are
    tried in order and the certificate records every candidate.
    """
    if space is not None and space != family.space:
        raise ValueError(f"family lives on {family.space}, not {space}")
    if group is not None and group != family.group:
        raise ValueError(f"family is invariant under {family.group}, not {group}")
    bound = lower_bound(family.space, family.group)
    qe = quotient_dim_estimate(
        family.space,
        family.group,
        config.quotient_samples,
        np.random.default_rng(derive_seed(config.seed, 0)),
        config.rank_tol,
    )
    candidates = [family] + (fallback_families(family) if config.try_fallbacks else [])
    tried = []
    for cand in candidates:
        rank, inv, verdict = _certify_one(cand, config, bound, qe.estimate)
        tried.append(
            {
                "family": cand.name,
                "members": [m.name for m in cand.members],
                "generic_rank": rank.rank,
                "rank_fraction": rank.fraction,
                "invariance_deviation": inv.max_deviation,
                "verdict": verdict,
            }
        )
        if verdict != GATE_FAILED:
            break
    expected = expected_degrees(cand)
    return BoundCertificate(
        space=str(cand.space),
        group=str(cand.group),
        n=dim_space(cand.space),
        d=group_dim(cand.group),
        lower_bound=bound,
        quotient_estimate=qe.estimate,
        family=cand.name,
        r=len(cand),
        members=[{"name": m.name, "degree": m.degree, "expr": str(m.expr)} for m in cand.members],
        degrees=list(cand.degrees),
        expected_degrees=None if expected is None else list(expected),
        degree_mismatch=expected is not None and tuple(cand.degrees) != expected,
        generic_rank=rank.rank,
        rank_fraction=rank.fraction,
        invariance_deviation=inv.max_deviation,
        invariance_passed=inv.passed,
        verdict=verdict,
        statement=_statement(verdict, len(cand), bound, rank.rank, cand.name),
        candidates_tried=tried,
        seed=config.seed,
        tolerances={"rank_tol": config.rank_tol, "inv_tol": config.inv_tol},
        samples={
            "rank": config.rank_samples,
            "quotient": config.quotient_samples,
            "invariance": config.invariance_samples,
        },
    )
