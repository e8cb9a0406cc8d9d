"""Scattering error of every pipeline against image noise."""
from _common import parser, print_sweep, save_sweep

from hazescatter.sweeps import noise_sweep


def main():
    p = parser(__doc__)
    p.add_argument("--values", default="0,0.05,0.1,0.15,0.2")
    a = p.parse_args()
    res = noise_sweep(tuple(float(v) for v in a.values.split(",")), trials=a.trials, seed=a.seed, jobs=a.jobs)
    print_sweep(res)
    save_sweep(res, a.out)


if __name__ == "__main__":
    main()
