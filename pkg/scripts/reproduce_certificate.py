"""Certify the builtin families and the {J2, J4} control, writing one JSON certificate per run."""

import argparse
import pathlib
import time

from invbound.families import builtin_family
from invbound.rank import DEFAULT_SEED, CertifyConfig, certify


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED)
    ap.add_argument("--samples", type=int, default=100)
    ap.add_argument("--invariance-samples", type=int, default=1000)
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path("results"))
    args = ap.parse_args()

    cfg = CertifyConfig(
        seed=args.seed,
        rank_samples=args.samples,
        quotient_samples=args.samples,
        invariance_samples=args.invariance_samples,
    )
    runs = {
        "st33_default": builtin_family("ST33_DEFAULT"),
        "s23_classical": builtin_family("S23_CLASSICAL"),
        "st33_j2_j4": builtin_family("ST33_DEFAULT").subset(["J2", "J4"]),
    }
    args.out.mkdir(parents=True, exist_ok=True)
    for key, fam in runs.items():
        t0 = time.perf_counter()
        cert = certify(fam, cfg)
        (args.out / f"{key}.json").write_text(cert.to_json() + "\n")
        print(f"{key:14s} {cert.verdict:32s} r={cert.r} bound={cert.lower_bound} "
              f"rank={cert.generic_rank} via {cert.family}  ({time.perf_counter() - t0:.1f}s)")
        for cand in cert.candidates_tried[:-1]:
            print(f"{'':14s}   rejected {cand['family']}: rank {cand['generic_rank']}, {cand['verdict']}")


if __name__ == "__main__":
    main()
