"""Colour Optimization transmittance error by true transmittance and image noise."""
import csv

from _common import parser

from hazescatter.sweeps import TransmittanceSpec, transmittance_table


def main():
    p = parser(__doc__)
    p.add_argument("--noise", default="0,0.01,0.05,0.1")
    a = p.parse_args()
    spec = TransmittanceSpec(noise=tuple(float(v) for v in a.noise.split(",")), trials=a.trials, seed=a.seed)
    table = transmittance_table(spec, jobs=a.jobs)
    print("   tau " + " ".join(f"sigma={s:<7g}" for s in spec.noise))
    for lvl, row in zip(spec.levels, table):
        print(f"{lvl:>6.1f} " + " ".join(f"{v:>13.5g}" for v in row))
    if a.out is not None:
        a.out.mkdir(parents=True, exist_ok=True)
        with open(a.out / "transmittance.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["transmittance"] + [f"sigma_{s:g}" for s in spec.noise])
            for lvl, row in zip(spec.levels, table):
                w.writerow([lvl] + [repr(float(v)) for v in row])


if __name__ == "__main__":
    main()
