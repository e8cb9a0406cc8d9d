"""Shared argument handling for the experiment scripts."""
import argparse
import json
from pathlib import Path


def parser(description: str, trials: int = 20) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--trials", type=int, default=trials)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", type=Path, default=None, help="directory for CSV/JSON results")
    return p


def save_sweep(result, out: Path | None) -> None:
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    result.write_csv(out / "trials.csv")
    result.write_summary_csv(out / "summary.csv")
    (out / "summary.json").write_text(json.dumps(result.summary(), indent=2) + "\n")


def print_sweep(result) -> None:
    spec = result.spec
    mean = result.mean()
    print(f"{spec.variable:>14} " + " ".join(f"{a:>10}" for a in spec.algorithms))
    for g, v in enumerate(spec.values):
        print(f"{v:>14.3f} " + " ".join(f"{m:>10.4g}" for m in mean[g]))
