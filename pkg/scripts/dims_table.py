"""Print dim S(m,n), dim St(m,n), the O(n) dimension and the resulting lower bound over a grid."""

import argparse

from invbound.groups import GroupSpec, group_dim
from invbound.tensors import TensorSpaceSpec, dim_space


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--orders", type=int, nargs=2, default=(2, 6), metavar=("LO", "HI"))
    ap.add_argument("--dims", type=int, nargs=2, default=(2, 5), metavar=("LO", "HI"))
    args = ap.parse_args()

    print(f"{'m':>2} {'n':>2} {'dim S':>6} {'dim St':>6} {'dim G':>5} {'S bound':>7} {'St bound':>8}")
    for m in range(args.orders[0], args.orders[1] + 1):
        for n in range(args.dims[0], args.dims[1] + 1):
            s = dim_space(TensorSpaceSpec("S", m, n))
            st = dim_space(TensorSpaceSpec("St", m, n))
            d = group_dim(GroupSpec("O", n))
            # the bound is only defined when dim V > dim G
            sb = s - d if s > d else "-"
            stb = st - d if st > d else "-"
            print(f"{m:>2} {n:>2} {s:>6} {st:>6} {d:>5} {sb:>7} {stb:>8}")


if __name__ == "__main__":
    main()
