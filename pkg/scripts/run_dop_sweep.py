"""Scattering error against the relative error in the assumed degree of polarization.

Only the polarization pipeline uses the DOP, so the other columns should stay flat.
"""
from _common import parser, print_sweep, save_sweep

from hazescatter.sweeps import dop_sweep


def main():
    p = parser(__doc__)
    p.add_argument("--values", default="0,0.1,0.2,0.3,0.4,0.5")
    p.add_argument("--base-noise", type=float, default=0.0)
    p.add_argument("--dop", type=float, default=1.0, help="true degree of polarization")
    a = p.parse_args()
    res = dop_sweep(
        tuple(float(v) for v in a.values.split(",")),
        trials=a.trials, seed=a.seed, base_noise=a.base_noise, dop=a.dop, jobs=a.jobs,
    )
    print_sweep(res)
    save_sweep(res, a.out)


if __name__ == "__main__":
    main()
