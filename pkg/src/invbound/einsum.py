"""A tiny Einstein-summation language for polynomial tensor invariants.

Expressions are whitespace-separated factors ``Name_labels``, e.g.
``"A_ipq A_jpq"``.  A label occurring once is free, twice is summed.  A digit
1-9 in place of a label pins that slot to a fixed 1-based index (``A_111``),
which is how non-invariant controls are written.  Two builtins exist: ``d``
(Kronecker delta) and ``e`` (Levi-Civita, n = 3 only).

Evaluation is deliberately naive: all factors are broadcast over the full
label grid, multiplied left to right, and the bound labels are accumulated
sequentially in alphabetical row-major order, exactly as a nested loop with
the alphabetically-last label innermost would do.
"""

from __future__ import annotations

import itertools
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .tensors import SymTensor, symmetrize_dense

BUILTINS = {"d": 2, "e": 3}
MAX_LABELS = 12

_FACTOR_RE = re.compile(r"^([A-Za-z][A-Za-z0-9]*)_([a-z1-9]+)$")
_LET_RE = re.compile(r"^([A-Za-z][A-Za-z0-9]*)_([a-z]+)$")


class ExprError(ValueError):
    pass


@dataclass(frozen=True)
class Factor:
    symbol: str
    labels: str

    def __str__(self):
        return f"{self.symbol}_{self.labels}"


@dataclass(frozen=True)
class ContractionExpr:
    factors: tuple[Factor, ...]

    @property
    def label_counts(self) -> Counter:
        return Counter(ch for f in self.factors for ch in f.labels if ch.isalpha())

    @property
    def free(self) -> tuple[str, ...]:
        return tuple(sorted(k for k, v in self.label_counts.items() if v == 1))

    @property
    def bound(self) -> tuple[str, ...]:
        return tuple(sorted(k for k, v in self.label_counts.items() if v == 2))

    @property
    def symbols(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(f.symbol for f in self.factors))

    def __str__(self):
        return " ".join(str(f) for f in self.factors)


def parse(text: str) -> ContractionExpr:
    tokens = text.split()
    if not tokens:
        raise ExprError("empty expression")
    factors = []
    for tok in tokens:
        m = _FACTOR_RE.match(tok)
        if m is None:
            raise ExprError(f"malformed factor {tok!r}; expected Name_labels with labels in a-z or 1-9")
        sym, labels = m.groups()
        if sym in BUILTINS and len(labels) != BUILTINS[sym]:
            raise ExprError(f"builtin {sym!r} takes {BUILTINS[sym]} labels, got {len(labels)} in {tok!r}")
        factors.append(Factor(sym, labels))
    expr = ContractionExpr(tuple(factors))
    counts = expr.label_counts
    over = sorted(k for k, v in counts.items() if v > 2)
    if over:
        raise ExprError(f"label(s) {', '.join(over)} used more than twice in {text!r}")
    if len(counts) > MAX_LABELS:
        raise ExprError(f"{len(counts)} distinct labels exceed the cap of {MAX_LABELS}")
    return expr


@dataclass(frozen=True)
class LetBinding:
    name: str
    indices: str
    expr: ContractionExpr

    def __post_init__(self):
        if self.name in BUILTINS:
            raise ExprError(f"cannot rebind builtin {self.name!r}")
        if sorted(self.indices) != list(self.expr.free) or len(set(self.indices)) != len(self.indices):
            raise ExprError(
                f"let {self.name}_{self.indices}: indices must be the free labels {''.join(self.expr.free)!r}"
            )
        if self.name in self.expr.symbols:
            raise ExprError(f"recursive binding of {self.name!r}")

    def __str__(self):
        return f"{self.name}_{self.indices} = {self.expr}"


def parse_let(text: str) -> LetBinding:
    """Parse ``"B_ij = A_ipq A_jpq"``."""
    lhs, sep, rhs = text.partition("=")
    if not sep:
        raise ExprError(f"let binding needs '=': {text!r}")
    m = _LET_RE.match(lhs.strip())
    if m is None:
        raise ExprError(f"malformed let target {lhs.strip()!r}")
    return LetBinding(m.group(1), m.group(2), parse(rhs))


# ---------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class EvalContext:
    tensors: Mapping[str, SymTensor]
    dim: int

    def __post_init__(self):
        for name, t in self.tensors.items():
            if name in BUILTINS:
                raise ExprError(f"tensor name {name!r} clashes with a builtin")
            if t.dim != self.dim:
                raise ExprError(f"tensor {name!r} has dim {t.dim}, context dim is {self.dim}")


@dataclass
class _Evaluator:
    dense: dict
    dim: int
    lets: dict
    cache: bool = True
    _memo: dict = field(default_factory=dict)

    def tensor(self, symbol: str) -> np.ndarray:
        if symbol == "d":
            return np.eye(self.dim)
        if symbol == "e":
            if self.dim != 3:
                raise ExprError(f"Levi-Civita symbol is defined for n = 3 only, context has n = {self.dim}")
            return levi_civita3()
        if symbol in self.lets:
            if self.cache and symbol in self._memo:
                return self._memo[symbol]
            b = self.lets[symbol]
            val = self.contract(b.expr)
            # lay out axes in the binding's declared order, then symmetrize
            perm = [b.expr.free.index(ch) for ch in b.indices]
            val = symmetrize_dense(np.transpose(val, perm)) if val.ndim else val
            if self.cache:
                self._memo[symbol] = val
            return val
        if symbol in self.dense:
            return self.dense[symbol]
        raise ExprError(f"unresolved symbol {symbol!r}")

    def contract(self, expr: ContractionExpr) -> np.ndarray:
        return contract_dense(expr, self.tensor, self.dim)


def contract_dense(expr: ContractionExpr, lookup, dim: int) -> np.ndarray:
    """Evaluate ``expr`` with ``lookup(symbol) -> dense array``; output axes follow ``expr.free``."""
    labels = sorted(expr.label_counts)
    axis = {ch: k for k, ch in enumerate(labels)}
    grid = (dim,) * len(labels)
    prod = None
    for f in expr.factors:
        arr = np.asarray(lookup(f.symbol), dtype=float)
        if arr.ndim != len(f.labels):
            raise ExprError(f"{f}: symbol {f.symbol!r} has order {arr.ndim}, used with {len(f.labels)} labels")
        if arr.ndim and arr.shape[0] != dim:
            raise ExprError(f"{f}: dimension {arr.shape[0]} does not match n = {dim}")
        letters = f.labels
        if not f.labels.isalpha():
            fixed = [int(ch) - 1 if ch.isdigit() else slice(None) for ch in f.labels]
            if any(isinstance(i, int) and i >= dim for i in fixed):
                raise ExprError(f"{f}: fixed index out of range for n = {dim}")
            arr = arr[tuple(fixed)]
            letters = "".join(ch for ch in f.labels if ch.isalpha())
        uniq = "".join(dict.fromkeys(letters))
        if len(uniq) < len(letters):
            arr = np.einsum(f"{letters}->{uniq}", arr)  # diagonal of a self-contraction
        order = sorted(uniq, key=axis.__getitem__)
        arr = np.transpose(arr, [uniq.index(ch) for ch in order])
        shape = [1] * len(labels)
        for ch in order:
            shape[axis[ch]] = dim
        arr = arr.reshape(shape)
        prod = arr if prod is None else prod * arr
    prod = np.broadcast_to(prod, grid)
    free = expr.free
    nfree = len(free)
    perm = [axis[ch] for ch in free] + [axis[ch] for ch in labels if ch not in free]
    flat = np.transpose(prod, perm).reshape(dim**nfree, -1)
    # strictly sequential accumulation, first bound label outermost
    acc = np.cumsum(flat, axis=1)[:, -1] if flat.shape[1] > 1 else flat[:, 0].copy()
    return acc.reshape((dim,) * nfree) if nfree else np.array(acc[0])


def evaluate(expr: ContractionExpr, ctx: EvalContext, lets: Sequence[LetBinding] = (), cache: bool = True):
    """Evaluate to a float (no free labels) or a symmetrized :class:`SymTensor`."""
    let_map = _let_map(lets, ctx.tensors)
    ev = _Evaluator({k: v.dense() for k, v in ctx.tensors.items()}, ctx.dim, let_map, cache)
    for b in lets:  # evaluated once, in order
        ev.tensor(b.name)
    out = ev.contract(expr)
    if out.ndim == 0:
        return float(out)
    return SymTensor.from_dense(symmetrize_dense(out), check=False)


def evaluate_dense(expr: ContractionExpr, dense: Mapping[str, np.ndarray], dim: int,
                   lets: Sequence[LetBinding] = (), cache: bool = True, memo: dict | None = None):
    """Fast path on raw arrays; ``memo`` lets several expressions share cached let values."""
    ev = _Evaluator(dict(dense), dim, {b.name: b for b in lets}, cache)
    if memo is not None and cache:
        ev._memo = memo
    return ev.contract(expr)


def _let_map(lets, tensors) -> dict:
    out = {}
    for b in lets:
        if b.name in tensors or b.name in out:
            raise ExprError(f"let name {b.name!r} shadows an existing symbol")
        for s in b.expr.symbols:
            if s not in BUILTINS and s not in tensors and s not in out:
                raise ExprError(f"let {b.name!r} refers to {s!r} before it is defined")
        out[b.name] = b
    return out


def polynomial_degree(expr: ContractionExpr, lets: Sequence[LetBinding], symbol: str) -> int:
    """Occurrences of ``symbol`` after inlining every let binding."""
    let_map = {b.name: b for b in lets}

    def deg(e: ContractionExpr, seen=()) -> int:
        total = 0
        for f in e.factors:
            if f.symbol == symbol:
                total += 1
            elif f.symbol in let_map:
                if f.symbol in seen:
                    raise ExprError(f"recursive let {f.symbol!r}")
                total += deg(let_map[f.symbol].expr, seen + (f.symbol,))
        return total

    return deg(expr)


_EPS3 = None


def levi_civita3() -> np.ndarray:
    global _EPS3
    if _EPS3 is None:
        e = np.zeros((3, 3, 3))
        for p in itertools.permutations(range(3)):
            # sign = parity of the permutation
            inv = sum(1 for a, b in itertools.combinations(p, 2) if a > b)
            e[p] = -1.0 if inv % 2 else 1.0
        e.setflags(write=False)
        _EPS3 = e
    return _EPS3
