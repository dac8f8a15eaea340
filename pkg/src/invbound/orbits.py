"""Orbit equivalence by direct minimization over the group, and a separability probe.

``orbit_distance`` minimizes f(R) = ||R.A - B||^2 over SO(n) from many starts.
Each step moves R <- exp(w) R, with w built from central-difference
derivatives of f along exp(t w_k) R.  Steps are Barzilai-Borwein trial lengths
cut back by halving until the Armijo condition holds, so the objective never
increases.  All starts advance together as one batch.

Starts per sheet: the identity, the eigenframe alignments of the covariant
matrices C_ij = A_i... A_j... of both tensors (exact for planted pairs with
distinct eigenvalues), and the best Haar samples out of a larger pool.

For O(n) the second sheet is handled by also aligning P.A to B, with P a
reflection (for odd n and odd order this is just -A).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .families import InvariantFamily, eval_family, relative_gap
from .groups import (
    GroupSpec,
    act,
    act_dense_batch,
    derive_seed,
    expm,
    haar_sample,
    reflection,
    skew_from_coefficients,
    so_generators,
)
from .tensors import SymTensor, random_tensor, tensor_to_dict, traceless_project


@dataclass(frozen=True)
class OrbitConfig:
    num_starts: int = 32
    max_iters: int = 200
    step_tol: float = 1e-10
    fd_step: float = 1e-6
    armijo: float = 1e-4
    max_halvings: int = 40
    pool_factor: int = 8
    seed: int = 0xC0FFEE


@dataclass
class AlignmentResult:
    best_g: np.ndarray
    distance: float
    starts_used: int
    refine_iterations: int
    converged: bool
    history: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "best_g": self.best_g.tolist(),
            "distance": self.distance,
            "starts_used": self.starts_used,
            "refine_iterations": self.refine_iterations,
            "converged": self.converged,
        }


def _objective(rs: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """||R_k . A_k - B||^2 per row; ``a`` is one tensor, or one per row when it has an extra axis."""
    res = act_dense_batch(rs, a, stacked=a.ndim == b.ndim + 1) - b
    return np.sum(res.reshape(len(rs), -1) ** 2, axis=1)


def _minimize_so(a_list, b, starts, config: OrbitConfig):
    """Batched descent: every (sheet, start) pair is one row of the batch.

    ``starts`` has shape (num_sheets, num_starts, n, n).
    """
    n = starts.shape[-1]
    gens = so_generators(n)
    p = len(gens)
    h = config.fd_step
    e_plus = np.array([expm(h * w) for w in gens])
    e_minus = np.array([expm(-h * w) for w in gens])

    nsheet, nstart = starts.shape[:2]
    K = nsheet * nstart
    R = starts.reshape(K, n, n).copy()
    sheet = np.repeat(np.arange(nsheet), nstart)
    scale = max(max(float(np.sum(a**2)) for a in a_list) + float(np.sum(b**2)), 1e-300)

    a_stack = np.array(a_list)

    def f(rs, idx):
        return _objective(rs, a_stack[sheet[idx]], b)

    def grad(rs, idx):
        k = len(idx)
        # rows: for each generator, the plus and minus perturbations of every start
        plus = np.einsum("gab,kbc->gkac", e_plus, rs).reshape(-1, n, n)
        minus = np.einsum("gab,kbc->gkac", e_minus, rs).reshape(-1, n, n)
        rep = np.tile(idx, p)
        fp = f(plus, rep).reshape(p, k)
        fm = f(minus, rep).reshape(p, k)
        return ((fp - fm) / (2 * h)).T

    idx_all = np.arange(K)
    fval = f(R, idx_all)
    g = grad(R, idx_all)
    active = np.ones(K, dtype=bool)
    converged = np.zeros(K, dtype=bool)
    iters = np.zeros(K, dtype=int)
    alpha = np.full(K, 1.0 / scale)
    history = [fval.copy()]

    for _ in range(config.max_iters):
        gn = np.linalg.norm(g, axis=1)
        done = active & (gn == 0.0)
        converged[done] = True
        active &= ~done
        if not active.any():
            break
        idx = np.flatnonzero(active)
        a_try = alpha[idx].copy()
        # cap trial rotation angle at 1 radian
        a_try = np.minimum(a_try, 1.0 / gn[idx])
        accepted = np.zeros(len(idx), dtype=bool)
        new_R = R[idx].copy()
        new_f = fval[idx].copy()
        steps = np.zeros((len(idx), p))
        pending = np.arange(len(idx))
        for _h in range(config.max_halvings):
            # a trial step below the step tolerance counts as convergence
            pending = pending[a_try[pending] * gn[idx[pending]] >= config.step_tol]
            if not pending.size:
                break
            ii = idx[pending]
            step = -a_try[pending, None] * g[ii]
            cand = expm(skew_from_coefficients(step, n)) @ R[ii]
            fc = f(cand, ii)
            ok = fc <= fval[ii] - config.armijo * a_try[pending] * gn[ii] ** 2
            sel = pending[ok]
            new_R[sel], new_f[sel], steps[sel], accepted[sel] = cand[ok], fc[ok], step[ok], True
            pending = pending[~ok]
            a_try[pending] *= 0.5
        # no acceptable decrease: numerical floor reached
        stuck = idx[~accepted]
        converged[stuck] = True
        active[stuck] = False

        acc = idx[accepted]
        if acc.size:
            R[acc] = new_R[accepted]
            fval[acc] = new_f[accepted]
            iters[acc] += 1
            s = steps[accepted]
            g_new = grad(R[acc], acc)
            y = g_new - g[acc]
            sy = np.sum(s * y, axis=1)
            ss = np.sum(s * s, axis=1)
            bb = np.where(sy > 0, ss / np.where(sy > 0, sy, 1.0), 1.0 / scale)
            alpha[acc] = bb
            g[acc] = g_new
            small = np.linalg.norm(s, axis=1) < config.step_tol
            converged[acc[small]] = True
            active[acc[small]] = False
        history.append(fval.copy())

    return R, sheet, fval, iters, converged, np.array(history)


def _sheets(a: np.ndarray, group: GroupSpec):
    """Tensors whose SO-orbits together make up the group orbit, with the matrix mapping A to each."""
    n, m = group.dim, a.ndim
    eye = np.eye(n)
    if group.kind == "SO":
        return [a], [eye]
    if n % 2 == 1:
        if m % 2 == 0:
            return [a], [eye]  # -I fixes even order and -I . SO(n) is the other sheet
        return [a, -a], [eye, -eye]
    p = reflection(n)
    pa = act_dense_batch(p[None], a)[0]
    return [a, pa], [eye, p]


def _covariant_frame(t: np.ndarray) -> np.ndarray:
    """Eigenvectors (ascending) of C_ij = sum over the other slots of T_i.. T_j.."""
    if t.ndim == 1:
        c = np.outer(t, t)
    else:
        flat = t.reshape(t.shape[0], -1)
        c = flat @ flat.T
    return np.linalg.eigh(c)[1]


def _frame_starts(a: np.ndarray, b: np.ndarray) -> list[np.ndarray]:
    va, vb = _covariant_frame(a), _covariant_frame(b)
    n = len(va)
    out = []
    for signs in itertools.product((1.0, -1.0), repeat=n):
        r = (vb * np.array(signs)) @ va.T
        if np.linalg.det(r) > 0:
            out.append(r)
    return out


def _starts(a: np.ndarray, b: np.ndarray, pool: np.ndarray, num: int) -> np.ndarray:
    n = pool.shape[-1]
    fixed = [np.eye(n)] + _frame_starts(a, b)
    rest = max(num - len(fixed), 0)
    fpool = _objective(pool, a, b)
    order = np.lexsort((np.arange(len(pool)), fpool))[:rest]
    return np.concatenate([np.array(fixed[:num]), pool[order]])


def orbit_distance(a: SymTensor, b: SymTensor, group: GroupSpec, config: OrbitConfig = OrbitConfig(),
                   record_history: bool = False) -> AlignmentResult:
    """min over g in the group of ||g.A - B||, by multi-start local search."""
    if (a.order, a.dim) != (b.order, b.dim):
        raise ValueError(f"space mismatch: (m={a.order}, n={a.dim}) vs (m={b.order}, n={b.dim})")
    if a.dim != group.dim:
        raise ValueError(f"tensor dim {a.dim} does not match {group}")
    rng = np.random.default_rng(config.seed)
    so = GroupSpec("SO", group.dim)
    pool = np.array([haar_sample(so, rng) for _ in range(config.pool_factor * config.num_starts)])
    a_list, sheet_mats = _sheets(a.dense(), group)
    bd = b.dense()
    starts = np.array([_starts(x, bd, pool, config.num_starts) for x in a_list])
    R, sheet, fval, iters, conv, hist = _minimize_so(a_list, bd, starts, config)
    # lexicographic (distance, row index) selection keeps the result order-independent
    k = int(np.lexsort((np.arange(len(fval)), fval))[0])
    best_g = R[k] @ sheet_mats[sheet[k]]
    return AlignmentResult(
        best_g=best_g,
        distance=float(np.sqrt(max(fval[k], 0.0))),
        starts_used=len(fval),
        refine_iterations=int(iters[k]),
        converged=bool(conv[k]),
        history=hist[:, k].tolist() if record_history else [],
    )


def same_orbit(a: SymTensor, b: SymTensor, group: GroupSpec, eps: float | None = None,
               config: OrbitConfig = OrbitConfig()) -> bool:
    if eps is None:
        eps = 1e-6 * max(1.0, a.norm())
    return orbit_distance(a, b, group, config).distance <= eps


# ---------------------------------------------------------------------------
# separability probe


@dataclass
class Violation:
    population: str
    a: SymTensor
    b: SymTensor
    invariant_gap: float
    orbit_distance: float

    def to_dict(self) -> dict:
        return {
            "population": self.population,
            "a": tensor_to_dict(self.a),
            "b": tensor_to_dict(self.b),
            "invariant_gap": self.invariant_gap,
            "orbit_distance": self.orbit_distance,
        }


@dataclass
class SeparabilityProbeReport:
    family: str
    pairs_tested: dict
    violations: list[Violation]
    max_same_orbit_gap: float
    invariance_ok: bool
    verdict: str
    eps_inv: float
    eps_orb: float
    note: str = (
        "violations are candidate counterexamples only: the optimizer may have missed the global "
        "minimum, and a finite family can be falsified but never proven to separate orbits"
    )

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "pairs_tested": self.pairs_tested,
            "violations": [v.to_dict() for v in self.violations],
            "max_same_orbit_gap": self.max_same_orbit_gap,
            "invariance_ok": self.invariance_ok,
            "verdict": self.verdict,
            "eps_inv": self.eps_inv,
            "eps_orb": self.eps_orb,
            "note": self.note,
        }


def _unit(t: SymTensor) -> SymTensor:
    nrm = t.norm()
    return t * (1.0 / nrm) if nrm > 0 else t


def _perturbation(family: InvariantFamily, rng) -> SymTensor:
    d = random_tensor(family.space, rng)
    return d if family.space.kind != "St" else traceless_project(d)


def separability_probe(
    family: InvariantFamily,
    num_pairs: int = 200,
    rng: np.random.Generator | None = None,
    eps_inv: float = 1e-8,
    eps_orb: float = 1e-2,
    config: OrbitConfig = OrbitConfig(),
) -> SeparabilityProbeReport:
    """Look for pairs with matching invariants but distinct orbits.

    Three populations of ``num_pairs`` each: same-orbit pairs (A, g.A),
    independent pairs on the unit sphere, and near pairs (A, A + 1e-3 D).
    Unit-sphere sampling fixes the scale, so a family missing anything beyond
    the norm shows up as equal invariants on distinct orbits.
    """
    rng = np.random.default_rng(config.seed) if rng is None else rng
    violations: list[Violation] = []
    same_gap = 0.0
    k = 0

    def check(pop, a, b):
        nonlocal k
        gap = float(np.max(relative_gap(eval_family(family, a), eval_family(family, b))))
        cfg = OrbitConfig(**{**config.__dict__, "seed": derive_seed(config.seed, k)})
        k += 1
        dist = orbit_distance(a, b, family.group, cfg).distance
        if gap <= eps_inv and dist >= eps_orb:
            violations.append(Violation(pop, a, b, gap, dist))
        return gap

    for _ in range(num_pairs):
        a = _unit(random_tensor(family.space, rng))
        g = haar_sample(family.group, rng)
        same_gap = max(same_gap, check("same_orbit", a, act(g, a)))
    for _ in range(num_pairs):
        check("independent", _unit(random_tensor(family.space, rng)), _unit(random_tensor(family.space, rng)))
    for _ in range(num_pairs):
        a = _unit(random_tensor(family.space, rng))
        check("near", a, a + 1e-3 * _unit(_perturbation(family, rng)))

    invariance_ok = same_gap <= 1e-9
    if not invariance_ok:
        verdict = "INVARIANCE_FAILED"
    elif violations:
        verdict = "VIOLATIONS_FOUND"
    else:
        verdict = "NO_VIOLATIONS"
    return SeparabilityProbeReport(
        family.name,
        {"same_orbit": num_pairs, "independent": num_pairs, "near": num_pairs},
        violations,
        same_gap,
        invariance_ok,
        verdict,
        eps_inv,
        eps_orb,
    )
