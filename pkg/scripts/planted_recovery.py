"""How often does the orbit oracle miss a planted alignment, as a function of the start count?"""

import argparse
import time

import numpy as np

from invbound.groups import GroupSpec, act, haar_sample
from invbound.orbits import OrbitConfig, orbit_distance
from invbound.tensors import TensorSpaceSpec, random_tensor


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pairs", type=int, default=100)
    ap.add_argument("--starts", type=int, nargs="+", default=[1, 4, 8, 32])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--eps", type=float, default=1e-6)
    args = ap.parse_args()

    space, group = TensorSpaceSpec("St", 3, 3), GroupSpec("O", 3)
    rng = np.random.default_rng(args.seed)
    pairs = []
    for _ in range(args.pairs):
        a = random_tensor(space, rng)
        pairs.append((a, act(haar_sample(group, rng), a)))

    print(f"{'starts':>6} {'misses':>6} {'worst':>10} {'median':>10} {'sec':>6}")
    for k in args.starts:
        t0 = time.perf_counter()
        d = np.array([orbit_distance(a, b, group, OrbitConfig(num_starts=k)).distance for a, b in pairs])
        print(f"{k:>6} {int(np.sum(d > args.eps)):>6} {d.max():>10.2e} {np.median(d):>10.2e} "
              f"{time.perf_counter() - t0:>6.1f}")


if __name__ == "__main__":
    main()
