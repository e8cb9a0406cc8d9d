"""Scattering error against a relative error injected into each pipeline's airlight."""
from _common import parser, print_sweep, save_sweep

from hazescatter.sweeps import airlight_error_sweep


def main():
    p = parser(__doc__)
    p.add_argument("--values", default="0,0.05,0.1,0.15,0.2")
    p.add_argument("--base-noise", type=float, default=0.0)
    a = p.parse_args()
    res = airlight_error_sweep(
        tuple(float(v) for v in a.values.split(",")),
        trials=a.trials, seed=a.seed, base_noise=a.base_noise, jobs=a.jobs,
    )
    print_sweep(res)
    mean = res.mean()
    for k, alg in enumerate(res.spec.algorithms):
        col = mean[:, k]
        ratio = col.max() / col.min() if col.min() > 0 else float("inf")
        print(f"{alg}: max/min {ratio:.3g}")
    save_sweep(res, a.out)


if __name__ == "__main__":
    main()
