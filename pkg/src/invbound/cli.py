"""Command-line entry point: ``invbound <subcommand> ...``.

Exit codes: 0 success, 1 a check failed, 2 usage or input errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .families import FamilyParseError, check_invariance, eval_family, resolve_family
from .groups import GroupSpec, act, derive_seed, group_dim, haar_sample, is_orthogonal
from .orbits import OrbitConfig, orbit_distance, separability_probe
from .rank import (
    DEFAULT_SEED,
    IRREDUCIBLE,
    RANK_TOL,
    CertifyConfig,
    certify,
    generic_rank,
    lower_bound,
    quotient_dim_estimate,
)
from .tensors import (
    TensorSpaceSpec,
    dim_space,
    load_tensor,
    random_tensor,
    tensor_to_dict,
    traceless_project,
)


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    seed: int = DEFAULT_SEED
    rank_tol: float = RANK_TOL
    inv_tol: float = 1e-9
    orbit_eps: float = 1e-6
    samples: int | None = None
    out: str | None = None

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        return cls(
            args.command,
            args.seed,
            args.rank_tol,
            args.inv_tol,
            args.orbit_eps,
            getattr(args, "samples", None),
            args.out,
        )

    def echo(self) -> dict:
        """Settings that determine the result; the output path is left out so files do not depend on it."""
        d = asdict(self)
        d.pop("out")
        return d

    def header(self) -> str:
        return "# " + " ".join(f"{k}={v}" for k, v in self.echo().items()) + f" version={__version__}"


def _int_list(text: str) -> list[int]:
    """'3', '2,3' or '2-6'."""
    out = []
    try:
        for part in text.split(","):
            lo, sep, hi = part.partition("-")
            out.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, list or range, got {text!r}") from None
    return out


def _space(args) -> TensorSpaceSpec:
    if args.order is None or args.dim is None:
        raise UsageError("--order and --dim are required")
    return TensorSpaceSpec(args.space, args.order, args.dim)


def _group(args, n: int) -> GroupSpec:
    return GroupSpec(args.group, n)


def _emit(text: str, cfg: RunConfig):
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# subcommands


def cmd_dims(args, cfg):
    rows = []
    for m in args.order:
        for n in args.dim:
            rows.append((args.space, m, n, dim_space(TensorSpaceSpec(args.space, m, n))))
    if len(rows) == 1:
        _emit(str(rows[0][3]), cfg)
    else:
        _emit("\n".join(f"{k} {m} {n} {d}" for k, m, n, d in rows), cfg)
    return 0


def cmd_bound(args, cfg):
    space = _space(args)
    group = _group(args, space.dim)
    _emit(f"{dim_space(space)} {group_dim(group)} {lower_bound(space, group)}", cfg)
    return 0


def cmd_certify(args, cfg):
    family = resolve_family(args.family)
    config = CertifyConfig(
        seed=cfg.seed,
        rank_samples=args.samples,
        rank_tol=cfg.rank_tol,
        quotient_samples=args.samples,
        invariance_samples=args.invariance_samples,
        inv_tol=cfg.inv_tol,
        try_fallbacks=not args.no_fallbacks,
    )
    cert = certify(family, config)
    _emit(cert.to_json(), cfg)
    return 0 if cert.verdict == IRREDUCIBLE else 1


def cmd_eval(args, cfg):
    family = resolve_family(args.family)
    vals = eval_family(family, load_tensor(args.tensor))
    _emit(cfg.header() + "\n" + " ".join(format(v + 0.0, ".17g") for v in vals), cfg)
    return 0


def _tensor_doc(t, cfg, **extra) -> str:
    doc = tensor_to_dict(t)
    doc["config"] = cfg.echo()
    doc.update(extra)
    return _json(doc)


def cmd_act(args, cfg):
    t = load_tensor(args.tensor)
    if args.matrix:
        with open(args.matrix) as fh:
            g = np.array(json.load(fh), dtype=float)
        if not is_orthogonal(g, args.group):
            raise UsageError(f"matrix in {args.matrix} is not in {args.group}({t.dim})")
    else:
        g = haar_sample(GroupSpec(args.group, t.dim), np.random.default_rng(cfg.seed))
    _emit(_tensor_doc(act(g, t), cfg, matrix=g.tolist()), cfg)
    return 0


def cmd_project(args, cfg):
    _emit(_tensor_doc(traceless_project(load_tensor(args.tensor)), cfg), cfg)
    return 0


def cmd_random(args, cfg):
    space = _space(args)
    if space.kind == "T":
        raise UsageError("random tensors are drawn from S or St")
    _emit(_tensor_doc(random_tensor(space, np.random.default_rng(cfg.seed)), cfg), cfg)
    return 0


def cmd_orbit_distance(args, cfg):
    a, b = load_tensor(args.a), load_tensor(args.b)
    res = orbit_distance(a, b, GroupSpec(args.group, a.dim), OrbitConfig(num_starts=args.starts, seed=cfg.seed))
    eps = cfg.orbit_eps * max(1.0, a.norm())
    report = {"config": cfg.echo(), "same_orbit": res.distance <= eps, "eps": eps, **res.to_dict()}
    if cfg.out:
        _emit(_json(report), cfg)
    print(format(res.distance, ".6e"))
    return 0


def cmd_probe(args, cfg):
    family = resolve_family(args.family)
    rep = separability_probe(
        family,
        args.samples,
        np.random.default_rng(cfg.seed),
        eps_inv=args.eps_inv,
        eps_orb=args.eps_orb,
        config=OrbitConfig(seed=derive_seed(cfg.seed, 1)),
    )
    _emit(_json({"config": cfg.echo(), **rep.to_dict()}), cfg)
    return 0 if rep.verdict == "NO_VIOLATIONS" else 1


def cmd_rank(args, cfg):
    family = resolve_family(args.family)
    res = generic_rank(family, args.samples, np.random.default_rng(cfg.seed), cfg.rank_tol)
    doc = {"config": cfg.echo(), "family": family.name, "r": len(family), "rank": res.rank, "fraction": res.fraction}
    _emit(_json(doc), cfg)
    return 0


def cmd_quotient_dim(args, cfg):
    space = _space(args)
    est = quotient_dim_estimate(space, _group(args, space.dim), args.samples, np.random.default_rng(cfg.seed),
                                cfg.rank_tol)
    _emit(f"{dim_space(space)} {est.max_orbit_dim} {est.estimate}", cfg)
    return 0


def cmd_invariance(args, cfg):
    family = resolve_family(args.family)
    rng = np.random.default_rng(cfg.seed)
    t = load_tensor(args.tensor) if args.tensor else random_tensor(family.space, rng)
    rep = check_invariance(family, t, args.samples, cfg.inv_tol, rng)
    _emit(_json({"config": cfg.echo(), "family": family.name, **rep.to_dict()}), cfg)
    return 0 if rep.passed else 1


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--rank-tol", type=float, default=RANK_TOL)
    common.add_argument("--inv-tol", type=float, default=1e-9)
    common.add_argument("--orbit-eps", type=float, default=1e-6)
    common.add_argument("--out")

    space = argparse.ArgumentParser(add_help=False)
    space.add_argument("--space", choices=["T", "S", "St"], required=True)
    space.add_argument("--order", type=int)
    space.add_argument("--dim", type=int)

    group = argparse.ArgumentParser(add_help=False)
    group.add_argument("--group", choices=["O", "SO"], default="O")

    parser = argparse.ArgumentParser(prog="invbound", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dims", parents=[common], help="dimension of T/S/St over an (m, n) grid")
    p.add_argument("--space", choices=["T", "S", "St"], required=True)
    p.add_argument("--order", type=_int_list, required=True)
    p.add_argument("--dim", type=_int_list, required=True)
    p.set_defaults(func=cmd_dims)

    p = sub.add_parser("bound", parents=[common, space, group], help="print dim V, dim G and the lower bound")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("certify", parents=[common], help="certify a family against the lower bound")
    p.add_argument("--family", required=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--invariance-samples", type=int, default=1000)
    p.add_argument("--no-fallbacks", action="store_true")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("eval", parents=[common], help="evaluate a family on a tensor file")
    p.add_argument("--family", required=True)
    p.add_argument("--tensor", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("act", parents=[common, group], help="apply a group element (given or Haar-sampled)")
    p.add_argument("--tensor", required=True)
    p.add_argument("--matrix", help="JSON file with an n x n row-major matrix")
    p.set_defaults(func=cmd_act)

    p = sub.add_parser("project", parents=[common], help="traceless projection of a tensor file")
    p.add_argument("--tensor", required=True)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("random", parents=[common, space], help="random tensor with Gaussian coordinates")
    p.set_defaults(func=cmd_random)

    p = sub.add_parser("orbit-distance", parents=[common, group], help="min over g of ||g.A - B||")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--starts", type=int, default=32)
    p.set_defaults(func=cmd_orbit_distance)

    p = sub.add_parser("probe", parents=[common], help="separability probe of a family")
    p.add_argument("--family", required=True)
    p.add_argument("--samples", type=int, default=200, help="pairs per population")
    p.add_argument("--eps-inv", type=float, default=1e-8)
    p.add_argument("--eps-orb", type=float, default=1e-2)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("rank", parents=[common], help="generic Jacobian rank of a family")
    p.add_argument("--family", required=True)
    p.add_argument("--samples", type=int, default=100)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("quotient-dim", parents=[common, space, group], help="sampled estimate of dim V/G")
    p.add_argument("--samples", type=int, default=100)
    p.set_defaults(func=cmd_quotient_dim)

    p = sub.add_parser("invariance", parents=[common], help="Monte-Carlo invariance check of a family")
    p.add_argument("--family", required=True)
    p.add_argument("--tensor")
    p.add_argument("--samples", type=int, default=1000)
    p.set_defaults(func=cmd_invariance)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = RunConfig.from_args(args)
    try:
        return args.func(args, cfg)
    except (UsageError, FamilyParseError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"invbound {args.command}: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
