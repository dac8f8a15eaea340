"""O(n) / SO(n): the tensor action, Haar sampling and the Lie algebra so(n)."""

from __future__ import annotations

import math
import string
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .tensors import SymTensor

GROUP_KINDS = ("O", "SO")


@dataclass(frozen=True)
class GroupSpec:
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in GROUP_KINDS:
            raise ValueError(f"unknown group kind {self.kind!r}; expected one of {GROUP_KINDS}")
        if self.dim < 2:
            raise ValueError(f"group dimension n must be >= 2, got {self.dim}")

    def __str__(self):
        return f"{self.kind}({self.dim})"


def group_dim(spec: GroupSpec) -> int:
    """Manifold dimension n(n-1)/2, the same for O(n) and SO(n)."""
    return spec.dim * (spec.dim - 1) // 2


def is_orthogonal(g, kind: str = "O", tol: float = 1e-10) -> bool:
    g = np.asarray(g, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        return False
    if np.max(np.abs(g.T @ g - np.eye(len(g)))) > tol:
        return False
    det = np.linalg.det(g)
    if kind == "SO":
        return abs(det - 1.0) <= tol
    return min(abs(det - 1.0), abs(det + 1.0)) <= tol


def derive_seed(parent: int, index: int) -> int:
    """Seed-splitting rule for per-task generators: a SeedSequence keyed by (parent, index)."""
    ss = np.random.SeedSequence(entropy=int(parent), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def haar_sample(spec: GroupSpec, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed element via sign-corrected QR of a Gaussian matrix."""
    n = spec.dim
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    q = q * signs
    if spec.kind == "SO" and np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def so_generators(n: int) -> list[np.ndarray]:
    """Elementary skew matrices E_pq - E_qp for p < q, lexicographic in (p, q)."""
    if n < 2:
        raise ValueError(f"so(n) needs n >= 2, got {n}")
    gens = []
    for p in range(n):
        for q in range(p + 1, n):
            w = np.zeros((n, n))
            w[p, q] = 1.0
            w[q, p] = -1.0
            gens.append(w)
    return gens


def skew_from_coefficients(c, n: int) -> np.ndarray:
    """Combine generator coefficients into a skew matrix; ``c`` may carry leading batch axes."""
    c = np.asarray(c, dtype=float)
    out = np.zeros(c.shape[:-1] + (n, n))
    k = 0
    for p in range(n):
        for q in range(p + 1, n):
            out[..., p, q] = c[..., k]
            out[..., q, p] = -c[..., k]
            k += 1
    return out


_TAYLOR_TERMS = 14
_SCALE_TARGET = 0.5


def expm(a) -> np.ndarray:
    """Matrix exponential by scaling and squaring around a truncated Taylor series.

    Works on a single matrix or a stack ``(..., n, n)``.  After scaling the
    1-norm is at most 0.5, where 14 Taylor terms are accurate to double precision.
    """
    a = np.asarray(a, dtype=float)
    norm = float(np.max(np.sum(np.abs(a), axis=-2))) if a.size else 0.0
    s = max(0, math.ceil(math.log2(norm / _SCALE_TARGET))) if norm > _SCALE_TARGET else 0
    x = a / (2.0**s)
    eye = np.broadcast_to(np.eye(a.shape[-1]), a.shape)
    term = eye.copy()
    out = eye.copy()
    for k in range(1, _TAYLOR_TERMS + 1):
        term = term @ x / k
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


# ---------------------------------------------------------------------------
# actions on dense arrays (any tensor, symmetric or not) and on SymTensor


@lru_cache(maxsize=None)
def _slot_subscripts(order: int, slot: int) -> str:
    letters = string.ascii_lowercase[:order]
    out = letters[:slot] + "z" + letters[slot + 1 :]
    return f"z{letters[slot]},{letters}->{out}"


def act_dense(g, t) -> np.ndarray:
    """(g.T)_{j1..jm} = sum g_{j1 i1} ... g_{jm im} T_{i1..im} for an arbitrary dense array."""
    g = np.asarray(g, dtype=float)
    t = np.asarray(t, dtype=float)
    for slot in range(t.ndim):
        t = np.einsum(_slot_subscripts(t.ndim, slot), g, t)
    return t


def act_dense_batch(gs, t, stacked: bool = False) -> np.ndarray:
    """Apply a stack ``gs`` of shape (K, n, n) to one dense tensor, or row-wise to K tensors.

    Returns shape (K, n, ..., n).
    """
    gs = np.asarray(gs, dtype=float)
    t = np.asarray(t, dtype=float)
    k, n = gs.shape[0], gs.shape[-1]
    gt = np.swapaxes(gs, 1, 2)
    out = t if stacked else np.broadcast_to(t, (k,) + t.shape)
    # rotate slots: move the leading slot last, contract it, repeat m times
    for _ in range(out.ndim - 1):
        out = np.moveaxis(out, 1, -1)
        out = np.matmul(out.reshape(k, -1, n), gt).reshape(out.shape)
    return out


def act(g, a: SymTensor) -> SymTensor:
    g = np.asarray(g, dtype=float)
    if g.shape != (a.dim, a.dim):
        raise ValueError(f"matrix shape {g.shape} does not match tensor dim {a.dim}")
    return SymTensor.from_dense(act_dense(g, a.dense()), check=False)


def infinitesimal_act_dense(w, t) -> np.ndarray:
    """Derivative at t=0 of exp(t w).T: the Leibniz sum over slots of w applied in that slot."""
    w = np.asarray(w, dtype=float)
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for slot in range(t.ndim):
        out = out + np.einsum(_slot_subscripts(t.ndim, slot), w, t)
    return out


def infinitesimal_act(w, a: SymTensor) -> SymTensor:
    w = np.asarray(w, dtype=float)
    if w.shape != (a.dim, a.dim):
        raise ValueError(f"generator shape {w.shape} does not match tensor dim {a.dim}")
    return SymTensor.from_dense(infinitesimal_act_dense(w, a.dense()), check=False)


def reflection(n: int) -> np.ndarray:
    """diag(-1, 1, ..., 1): a representative of the det = -1 sheet of O(n)."""
    p = np.eye(n)
    p[0, 0] = -1.0
    return p
