"""Symmetric tensors with canonical storage, traceless subspaces and bases.

A symmetric tensor of order ``m`` and dimension ``n`` is stored as one value per
symmetry class, i.e. per non-decreasing multi-index.  Indices are 0-based in
memory and 1-based in the JSON file format.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

SPACE_KINDS = ("T", "S", "St")

# membership tolerance for unit-scale tensors
DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class TensorSpaceSpec:
    kind: str
    order: int
    dim: int

    def __post_init__(self):
        if self.kind not in SPACE_KINDS:
            raise ValueError(f"unknown space kind {self.kind!r}; expected one of {SPACE_KINDS}")
        if self.order < 1 or self.dim < 1:
            raise ValueError(f"order and dim must be >= 1, got m={self.order}, n={self.dim}")
        if self.kind == "St" and self.order < 2:
            raise ValueError("St requires order >= 2: tracelessness needs an index pair")

    def __str__(self):
        return f"{self.kind}({self.order},{self.dim})"


def dim_space(spec: TensorSpaceSpec) -> int:
    """Dimension of T(m,n), S(m,n) or St(m,n) as a real vector space."""
    m, n = spec.order, spec.dim
    if spec.kind == "T":
        return n**m
    sym = math.comb(n + m - 1, n - 1)
    if spec.kind == "S":
        return sym
    return sym - math.comb(n + m - 3, n - 1)


# ---------------------------------------------------------------------------
# canonical index bookkeeping


@lru_cache(maxsize=None)
def canonical_indices(order: int, dim: int) -> tuple[tuple[int, ...], ...]:
    """Non-decreasing multi-indices in lexicographic order."""
    return tuple(itertools.combinations_with_replacement(range(dim), order))


@lru_cache(maxsize=None)
def _position_map(order: int, dim: int) -> np.ndarray:
    # full index tuple (row-major) -> position in the canonical list
    lookup = {idx: k for k, idx in enumerate(canonical_indices(order, dim))}
    pos = np.empty(dim**order, dtype=np.intp)
    for flat, idx in enumerate(itertools.product(range(dim), repeat=order)):
        pos[flat] = lookup[tuple(sorted(idx))]
    pos.setflags(write=False)
    return pos


@lru_cache(maxsize=None)
def _first_occurrence(order: int, dim: int) -> np.ndarray:
    # flat row-major offset of each canonical index inside the dense array
    flat = np.array(
        [np.ravel_multi_index(idx, (dim,) * order) if order else 0 for idx in canonical_indices(order, dim)],
        dtype=np.intp,
    )
    flat.setflags(write=False)
    return flat


@lru_cache(maxsize=None)
def orbit_weights(order: int, dim: int) -> np.ndarray:
    """Number of full index tuples in each symmetry class (multinomial coefficients)."""
    w = []
    for idx in canonical_indices(order, dim):
        counts = np.bincount(np.asarray(idx, dtype=np.intp), minlength=dim) if order else []
        w.append(math.factorial(order) // math.prod(math.factorial(int(c)) for c in counts))
    out = np.array(w, dtype=float)
    out.setflags(write=False)
    return out


def canonical(index: Iterable[int]) -> tuple[int, ...]:
    return tuple(sorted(index))


# ---------------------------------------------------------------------------
# SymTensor


@dataclass(frozen=True, eq=False)
class SymTensor:
    """Fully symmetric real tensor; ``values[k]`` belongs to ``canonical_indices(order, dim)[k]``.

    ``order == 0`` is allowed and holds a single scalar (the result of tracing
    a matrix, for instance).
    """

    order: int
    dim: int
    values: np.ndarray

    def __post_init__(self):
        if self.order < 0 or self.dim < 1:
            raise ValueError(f"bad shape m={self.order}, n={self.dim}")
        vals = np.array(self.values, dtype=float).reshape(-1)
        expected = len(canonical_indices(self.order, self.dim))
        if vals.size != expected:
            raise ValueError(f"expected {expected} stored values for m={self.order}, n={self.dim}, got {vals.size}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, order: int, dim: int) -> "SymTensor":
        return cls(order, dim, np.zeros(len(canonical_indices(order, dim))))

    @classmethod
    def identity(cls, dim: int) -> "SymTensor":
        return cls.from_dense(np.eye(dim))

    @classmethod
    def from_dense(cls, dense, check: bool = True, tol: float = DEFAULT_TOL) -> "SymTensor":
        """Wrap an already symmetric dense array.  Use :func:`symmetrize` for arbitrary input."""
        arr = np.asarray(dense, dtype=float)
        m = arr.ndim
        n = arr.shape[0] if m else 1
        if any(s != n for s in arr.shape):
            raise ValueError(f"dense array must have shape (n,)*m, got {arr.shape}")
        if check and m >= 2:
            vals = arr.reshape(-1)
            # compare every entry against the representative value of its class
            rep = arr.reshape(-1)[_first_occurrence(m, n)][_position_map(m, n)]
            if np.max(np.abs(vals - rep), initial=0.0) > tol:
                raise ValueError("dense array is not symmetric; use symmetrize()")
        return cls(m, n, arr.reshape(-1)[_first_occurrence(m, n)])

    def dense(self) -> np.ndarray:
        if self.order == 0:
            return np.array(self.values[0])
        return self.values[_position_map(self.order, self.dim)].reshape((self.dim,) * self.order)

    def __getitem__(self, index) -> float:
        if isinstance(index, int):
            index = (index,)
        if len(index) != self.order:
            raise IndexError(f"expected {self.order} indices, got {len(index)}")
        if any(not 0 <= i < self.dim for i in index):
            raise IndexError(f"index {index} out of range for dim {self.dim}")
        k = _canonical_lookup(self.order, self.dim)[canonical(index)]
        return float(self.values[k])

    def norm(self) -> float:
        return math.sqrt(max(frobenius_inner(self, self), 0.0))

    def _like(self, values) -> "SymTensor":
        return SymTensor(self.order, self.dim, values)

    def __add__(self, other: "SymTensor") -> "SymTensor":
        _check_same_shape(self, other)
        return self._like(self.values + other.values)

    def __sub__(self, other: "SymTensor") -> "SymTensor":
        _check_same_shape(self, other)
        return self._like(self.values - other.values)

    def __neg__(self) -> "SymTensor":
        return self._like(-self.values)

    def __mul__(self, scalar: float) -> "SymTensor":
        return self._like(float(scalar) * self.values)

    __rmul__ = __mul__

    def allclose(self, other: "SymTensor", atol: float = DEFAULT_TOL) -> bool:
        return (self.order, self.dim) == (other.order, other.dim) and bool(
            np.max(np.abs(self.values - other.values), initial=0.0) <= atol
        )

    def __repr__(self):
        return f"SymTensor(order={self.order}, dim={self.dim}, values={np.array2string(self.values, precision=4)})"


@lru_cache(maxsize=None)
def _canonical_lookup(order: int, dim: int) -> dict:
    return {idx: k for k, idx in enumerate(canonical_indices(order, dim))}


def _check_same_shape(a: SymTensor, b: SymTensor):
    if (a.order, a.dim) != (b.order, b.dim):
        raise ValueError(f"shape mismatch: (m={a.order}, n={a.dim}) vs (m={b.order}, n={b.dim})")


def symmetrize(dense) -> SymTensor:
    """Average an arbitrary ``(n,)*m`` array over all slot permutations."""
    arr = np.asarray(dense, dtype=float)
    if arr.ndim and any(s != arr.shape[0] for s in arr.shape):
        raise ValueError(f"dense array must have shape (n,)*m, got {arr.shape}")
    return SymTensor.from_dense(symmetrize_dense(arr), check=False)


def symmetrize_dense(arr: np.ndarray) -> np.ndarray:
    m = arr.ndim
    if m < 2:
        return np.array(arr, dtype=float)
    perms = list(itertools.permutations(range(m)))
    if all(np.array_equal(np.transpose(arr, p), arr) for p in perms[1:]):
        return np.array(arr, dtype=float)  # already symmetric: return it bit-for-bit
    acc = np.zeros_like(arr, dtype=float)
    for p in perms:
        acc = acc + np.transpose(arr, p)
    return acc / len(perms)


def frobenius_inner(a: SymTensor, b: SymTensor) -> float:
    """Sum over all n**m index tuples of a*b, computed class by class."""
    _check_same_shape(a, b)
    return float(np.dot(orbit_weights(a.order, a.dim) * a.values, b.values))


def trace_vector(a: SymTensor) -> SymTensor:
    """Contract the first two slots; any pair gives the same result for symmetric input."""
    if a.order < 2:
        raise ValueError(f"trace needs order >= 2, got {a.order}")
    t = np.trace(a.dense(), axis1=0, axis2=1)
    return SymTensor.from_dense(t, check=False)


def is_traceless(a: SymTensor, tol: float = DEFAULT_TOL) -> bool:
    if a.order < 2:
        raise ValueError(f"tracelessness needs order >= 2, got {a.order}")
    return bool(np.max(np.abs(trace_vector(a).values), initial=0.0) <= tol)


def traceless_project(a: SymTensor) -> SymTensor:
    """Orthogonal projection of a symmetric tensor of order 2 or 3 onto its traceless part."""
    n = a.dim
    if n < 2:
        raise ValueError("traceless projection needs dim >= 2")
    if a.order == 2:
        tr = float(trace_vector(a).values[0])
        return SymTensor.from_dense(a.dense() - (tr / n) * np.eye(n), check=False)
    if a.order == 3:
        t = trace_vector(a).values
        d = np.eye(n)
        corr = (
            np.einsum("ij,k->ijk", d, t)
            + np.einsum("jk,i->ijk", d, t)
            + np.einsum("ki,j->ijk", d, t)
        )
        return SymTensor.from_dense(a.dense() - corr / (n + 2), check=False)
    raise ValueError(f"traceless projection is implemented for orders 2 and 3 only, got {a.order}")


def in_space(a: SymTensor, spec: TensorSpaceSpec, tol: float = DEFAULT_TOL) -> bool:
    if (a.order, a.dim) != (spec.order, spec.dim):
        return False
    if spec.kind == "St":
        return is_traceless(a, tol)
    return True


# ---------------------------------------------------------------------------
# orthonormal bases and coordinates


@dataclass(frozen=True, eq=False)
class SubspaceBasis:
    space: TensorSpaceSpec
    elements: tuple[SymTensor, ...]

    def __len__(self):
        return len(self.elements)

    @property
    def matrix(self) -> np.ndarray:
        """Rows are canonical value vectors of the basis elements."""
        return np.array([e.values for e in self.elements])

    def gram(self) -> np.ndarray:
        return np.array([[frobenius_inner(a, b) for b in self.elements] for a in self.elements])


@lru_cache(maxsize=None)
def orthonormal_basis(spec: TensorSpaceSpec, drop_tol: float = 1e-10) -> SubspaceBasis:
    """Deterministic basis: lexicographic unit tensors, projected for St, then Gram-Schmidt."""
    if spec.kind not in ("S", "St"):
        raise ValueError(f"orthonormal_basis supports S and St only, got {spec.kind}")
    if spec.kind == "St" and spec.order not in (2, 3):
        raise ValueError("St bases are available for orders 2 and 3 only")
    m, n = spec.order, spec.dim
    ncan = len(canonical_indices(m, n))
    w = orbit_weights(m, n)
    out: list[SymTensor] = []
    for k in range(ncan):
        # symmetrized unit tensor for class k: 1/|class| on each member
        vals = np.zeros(ncan)
        vals[k] = 1.0 / w[k]
        v = SymTensor(m, n, vals)
        if spec.kind == "St":
            v = traceless_project(v)
        x = v.values.copy()
        # modified Gram-Schmidt, twice for stability
        for _ in range(2):
            for e in out:
                x = x - np.dot(w * e.values, x) * e.values
        nrm = math.sqrt(max(np.dot(w * x, x), 0.0))
        if nrm > drop_tol:
            out.append(SymTensor(m, n, x / nrm))
    return SubspaceBasis(spec, tuple(out))


def coords(a: SymTensor, basis: SubspaceBasis, tol: float = 1e-9) -> np.ndarray:
    """Coordinates of ``a`` in an orthonormal basis; rejects tensors outside its span."""
    sp = basis.space
    if (a.order, a.dim) != (sp.order, sp.dim):
        raise ValueError(f"tensor (m={a.order}, n={a.dim}) does not belong to {sp}")
    mat = basis.matrix
    w = orbit_weights(a.order, a.dim)
    x = mat @ (w * a.values)
    resid = a.values - x @ mat
    if np.max(np.abs(resid), initial=0.0) > tol:
        raise ValueError(f"tensor lies outside {sp} (residual {np.max(np.abs(resid)):.3g})")
    return x


def from_coords(x: Sequence[float], basis: SubspaceBasis) -> SymTensor:
    x = np.asarray(x, dtype=float)
    if x.shape != (len(basis),):
        raise ValueError(f"expected {len(basis)} coordinates, got shape {x.shape}")
    sp = basis.space
    return SymTensor(sp.order, sp.dim, x @ basis.matrix)


def random_tensor(spec: TensorSpaceSpec, rng: np.random.Generator) -> SymTensor:
    """Unit-Gaussian coordinates in the orthonormal basis of the space."""
    basis = orthonormal_basis(spec)
    return from_coords(rng.standard_normal(len(basis)), basis)


# ---------------------------------------------------------------------------
# JSON tensor files


def tensor_to_dict(a: SymTensor) -> dict:
    entries = [
        [[i + 1 for i in idx], float(v)]
        for idx, v in zip(canonical_indices(a.order, a.dim), a.values)
        if v != 0.0
    ]
    return {"order": a.order, "dim": a.dim, "entries": entries}


def tensor_from_dict(obj: dict) -> SymTensor:
    try:
        m, n, entries = int(obj["order"]), int(obj["dim"]), obj["entries"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"tensor record needs 'order', 'dim' and 'entries': {exc}") from None
    if m < 0 or n < 1:
        raise ValueError(f"bad tensor shape m={m}, n={n}")
    lookup = _canonical_lookup(m, n)
    vals = np.zeros(len(lookup))
    seen = set()
    for k, entry in enumerate(entries):
        try:
            idx, v = entry
            idx = [int(i) for i in idx]
            v = float(v)
        except (TypeError, ValueError):
            raise ValueError(f"entry {k}: expected [[i1,...,im], value], got {entry!r}") from None
        if len(idx) != m:
            raise ValueError(f"entry {k}: expected {m} indices, got {len(idx)}")
        if any(not 1 <= i <= n for i in idx):
            raise ValueError(f"entry {k}: index {idx} out of range 1..{n}")
        key = canonical(i - 1 for i in idx)
        if key in seen:
            raise ValueError(f"entry {k}: duplicate symmetry class {[i + 1 for i in key]}")
        seen.add(key)
        vals[lookup[key]] = v
    return SymTensor(m, n, vals)


def dump_tensor(a: SymTensor) -> str:
    return json.dumps(tensor_to_dict(a))


def load_tensor(path) -> SymTensor:
    with open(path) as fh:
        return tensor_from_dict(json.load(fh))


def save_tensor(a: SymTensor, path):
    with open(path, "w") as fh:
        fh.write(dump_tensor(a) + "\n")
