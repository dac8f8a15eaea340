"""Named families of scalar invariants, their evaluation map, gradients and invariance checks.

Family file format (whitespace-separated, ``#`` starts a comment)::

    name ST33_DEFAULT
    space St 3 3
    group O 3
    let B_ij = A_ipq A_jpq
    inv J2 2 = A_ijk A_ijk

The input tensor is the single symbol that is neither a builtin nor a let.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .einsum import (
    BUILTINS,
    ContractionExpr,
    ExprError,
    LetBinding,
    evaluate_dense,
    parse,
    parse_let,
    polynomial_degree,
)
from .groups import GroupSpec, act_dense, haar_sample
from .tensors import (
    SubspaceBasis,
    SymTensor,
    TensorSpaceSpec,
    coords,
    from_coords,
    in_space,
)


class FamilyParseError(ValueError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        self.line, self.col = line, col
        where = f"line {line}, column {col}: " if line else ""
        super().__init__(where + msg)


@dataclass(frozen=True)
class Member:
    name: str
    expr: ContractionExpr
    degree: int


@dataclass(frozen=True)
class InvariantFamily:
    name: str
    space: TensorSpaceSpec
    group: GroupSpec
    lets: tuple[LetBinding, ...]
    members: tuple[Member, ...]
    variable: str = field(init=False)

    def __post_init__(self):
        if not self.members:
            raise ExprError(f"family {self.name!r} has no members")
        if self.space.dim != self.group.dim:
            raise ExprError(f"space {self.space} and group {self.group} act on different dimensions")
        let_names = {b.name for b in self.lets}
        syms = set()
        for b in self.lets:
            syms.update(b.expr.symbols)
        for mem in self.members:
            syms.update(mem.expr.symbols)
        inputs = sorted(syms - let_names - set(BUILTINS))
        if len(inputs) != 1:
            raise ExprError(f"family {self.name!r} must use exactly one input tensor symbol, found {inputs}")
        object.__setattr__(self, "variable", inputs[0])
        for mem in self.members:
            if mem.expr.free:
                raise ExprError(f"member {mem.name} is not a scalar: free labels {''.join(mem.expr.free)}")
            deg = polynomial_degree(mem.expr, self.lets, self.variable)
            if deg != mem.degree:
                raise ExprError(f"member {mem.name}: declared degree {mem.degree}, expression has degree {deg}")

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(m.degree for m in self.members)

    def __len__(self):
        return len(self.members)

    def subset(self, names, name: str | None = None) -> "InvariantFamily":
        chosen = tuple(m for m in self.members if m.name in set(names))
        return InvariantFamily(name or f"{self.name}[{','.join(names)}]", self.space, self.group, self.lets, chosen)

    def with_members(self, members, name: str) -> "InvariantFamily":
        return InvariantFamily(name, self.space, self.group, self.lets, tuple(members))


# ---------------------------------------------------------------------------
# builtin families


def _member(name, text, degree):
    return Member(name, parse(text), degree)


_ST33_LETS = (
    parse_let("B_ij = A_ipq A_jpq"),
    parse_let("E_ij = A_ipq A_jrs A_kpr A_kqs"),
)

_ST33_CORE = (
    _member("J2", "A_ijk A_ijk", 2),
    _member("J4", "B_ij B_ij", 4),
    _member("J6", "B_ij B_jk B_ki", 6),
)

# Replacement top-degree members, tried in order when the default J8 fails the
# rank gate.  On St(3,3) the quartic E lies in span(I, B, B^2), so members
# built from B and E alone cannot lift the rank; J10 couples A to B directly.
ST33_FALLBACK_MEMBERS = (
    _member("J8b", "E_ij B_jk B_ki", 8),
    _member("J10", "A_ijk A_lmn B_il B_jm B_kp B_pn", 10),
)

EXPECTED_DEGREES = {("St", 3, 3, 3): (2, 4, 6, 8)}


def builtin_family(family_id: str) -> InvariantFamily:
    if family_id == "ST33_DEFAULT":
        return InvariantFamily(
            "ST33_DEFAULT",
            TensorSpaceSpec("St", 3, 3),
            GroupSpec("O", 3),
            _ST33_LETS,
            _ST33_CORE + (_member("J8", "E_ij E_ij", 8),),
        )
    if family_id == "S23_CLASSICAL":
        return InvariantFamily(
            "S23_CLASSICAL",
            TensorSpaceSpec("S", 2, 3),
            GroupSpec("O", 3),
            (),
            (
                _member("I1", "T_ii", 1),
                _member("I2", "T_ij T_ij", 2),
                _member("I3", "T_ij T_jk T_ki", 3),
            ),
        )
    raise KeyError(f"unknown builtin family {family_id!r}; known: ST33_DEFAULT, S23_CLASSICAL")


BUILTIN_IDS = ("ST33_DEFAULT", "S23_CLASSICAL")


def fallback_families(family: InvariantFamily) -> list[InvariantFamily]:
    """Alternative member sets for ST33_DEFAULT, replacing its top-degree member."""
    if family.name != "ST33_DEFAULT":
        return []
    core = family.members[:-1]
    return [family.with_members(core + (m,), f"ST33_DEFAULT+{m.name}") for m in ST33_FALLBACK_MEMBERS]


def expected_degrees(family: InvariantFamily):
    sp, g = family.space, family.group
    return EXPECTED_DEGREES.get((sp.kind, sp.order, sp.dim, g.dim))


# ---------------------------------------------------------------------------
# evaluation


def eval_dense(family: InvariantFamily, dense: np.ndarray) -> np.ndarray:
    """The evaluation map on a raw array, no membership check."""
    memo: dict = {}
    ctx = {family.variable: dense}
    n = family.space.dim
    return np.array([float(evaluate_dense(m.expr, ctx, n, family.lets, memo=memo)) for m in family.members])


def eval_family(family: InvariantFamily, a: SymTensor, tol: float = 1e-9) -> np.ndarray:
    if not in_space(a, family.space, tol):
        raise ValueError(f"tensor (m={a.order}, n={a.dim}) is not in {family.space}")
    return eval_dense(family, a.dense())


def scale_behavior(family: InvariantFamily, a: SymTensor, lam: float) -> np.ndarray:
    if lam == 0:
        raise ValueError("scale factor must be nonzero")
    return eval_family(family, a * lam)


def relative_gap(u, v) -> np.ndarray:
    """Componentwise |u - v| / max(1, |u|)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return np.abs(u - v) / np.maximum(1.0, np.abs(u))


def jacobian_fd(family: InvariantFamily, a: SymTensor, basis: SubspaceBasis, h: float | None = None) -> np.ndarray:
    """Central-difference Jacobian of the evaluation map in the coordinates of ``basis``."""
    if h is None:
        h = 1e-6 * max(1.0, a.norm())
    if h <= 0:
        raise ValueError("step h must be positive")
    x = coords(a, basis)
    jac = np.empty((len(family), len(basis)))
    for j in range(len(basis)):
        e = np.zeros(len(basis))
        e[j] = h
        fp = eval_dense(family, from_coords(x + e, basis).dense())
        fm = eval_dense(family, from_coords(x - e, basis).dense())
        jac[:, j] = (fp - fm) / (2 * h)
    return jac


@dataclass
class InvarianceReport:
    max_deviation: float
    worst_member: str | None
    worst_g: np.ndarray | None
    num_samples: int
    tol: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "max_deviation": self.max_deviation,
            "worst_member": self.worst_member,
            "worst_g": None if self.worst_g is None else self.worst_g.tolist(),
            "num_samples": self.num_samples,
            "tol": self.tol,
            "passed": self.passed,
        }


def check_invariance(
    family: InvariantFamily,
    a: SymTensor,
    num_samples: int,
    tol: float = 1e-9,
    rng: np.random.Generator | None = None,
) -> InvarianceReport:
    """Monte-Carlo check of p(g.A) == p(A) over Haar-sampled g, deviations relative to max(1, |p(A)|)."""
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    base = eval_family(family, a)
    dense = a.dense()
    worst, worst_g, worst_member = 0.0, None, None
    for _ in range(num_samples):
        g = haar_sample(family.group, rng)
        gap = relative_gap(base, eval_dense(family, act_dense(g, dense)))
        k = int(np.argmax(gap))
        if gap[k] > worst or worst_g is None:
            worst, worst_g, worst_member = float(gap[k]), g, family.members[k].name
    return InvarianceReport(worst, worst_member, worst_g, num_samples, tol, worst <= tol)


# ---------------------------------------------------------------------------
# family files


def dumps_family(family: InvariantFamily) -> str:
    sp, g = family.space, family.group
    lines = [
        f"name {family.name}",
        f"space {sp.kind} {sp.order} {sp.dim}",
        f"group {g.kind} {g.dim}",
    ]
    lines += [f"let {b}" for b in family.lets]
    lines += [f"inv {m.name} {m.degree} = {m.expr}" for m in family.members]
    return "\n".join(lines) + "\n"


def save_family(family: InvariantFamily, path):
    with open(path, "w") as fh:
        fh.write(dumps_family(family))


def loads_family(text: str, default_name: str = "family") -> InvariantFamily:
    name, space, group = default_name, None, None
    lets: list[LetBinding] = []
    members: list[Member] = []
    where: dict[str, tuple[int, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        col = len(line) - len(line.lstrip()) + 1
        head, _, rest = line.strip().partition(" ")
        rest = rest.strip()
        try:
            if head == "name":
                if not rest or len(rest.split()) != 1:
                    raise FamilyParseError("expected 'name <id>'", lineno, col)
                name = rest
            elif head == "space":
                parts = rest.split()
                if len(parts) != 3:
                    raise FamilyParseError("expected 'space <T|S|St> <order> <dim>'", lineno, col)
                space = TensorSpaceSpec(parts[0], int(parts[1]), int(parts[2]))
            elif head == "group":
                parts = rest.split()
                if len(parts) != 2:
                    raise FamilyParseError("expected 'group <O|SO> <dim>'", lineno, col)
                group = GroupSpec(parts[0], int(parts[1]))
            elif head == "let":
                lets.append(parse_let(rest))
            elif head == "inv":
                lhs, sep, rhs = rest.partition("=")
                parts = lhs.split()
                if not sep or len(parts) != 2:
                    raise FamilyParseError("expected 'inv <name> <degree> = <expression>'", lineno, col)
                members.append(Member(parts[0], parse(rhs), int(parts[1])))
                where[parts[0]] = (lineno, col)
            else:
                raise FamilyParseError(f"unknown directive {head!r}", lineno, col)
        except FamilyParseError:
            raise
        except ValueError as exc:  # includes ExprError
            raise FamilyParseError(str(exc), lineno, col) from None
    if space is None:
        raise FamilyParseError("missing 'space' line")
    if group is None:
        raise FamilyParseError("missing 'group' line")
    if not members:
        raise FamilyParseError("no 'inv' lines")
    try:
        return InvariantFamily(name, space, group, tuple(lets), tuple(members))
    except ExprError as exc:
        # point at the offending member line when the message names one
        msg = str(exc)
        hit = next((where[m] for m in where if msg.startswith(f"member {m}:") or msg.startswith(f"member {m} ")), None)
        raise FamilyParseError(msg, *(hit or (0, 0))) from None


def load_family(path) -> InvariantFamily:
    with open(path) as fh:
        return loads_family(fh.read())


def resolve_family(ref: str) -> InvariantFamily:
    """A builtin id or a path to a family file."""
    if ref in BUILTIN_IDS:
        return builtin_family(ref)
    return load_family(ref)
