"""Command-line entry point.

Every subcommand writes into ``--out`` through a temporary sibling directory
that replaces the target only after the command succeeds, so a failed run
leaves no partial output.  Each output directory gets a ``run.json`` record
with the full configuration, the seed and library versions.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import json
import math
import platform
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .cdc import CdcConfig, cdc_solve, scattering_error
from .co import CoConfig, co_solve, normalize_illumination, resolve_airlight
from .core import ImageSequence, Rect, make_patch_grid
from .dehaze_dark import WindowSpec, dark_channel, dehaze_dc, estimate_airlight_dc
from .dehaze_dichromatic import dichromatic_pipeline
from .dehaze_pol import DEFAULT_BIAS, dehaze_pol, estimate_sky_params
from .errors import HazeError
from .evaluate import depth_error, depth_rms, distance_ratio, rescaled_depth_error, welch_t_test
from .hazesim import (
    TWO_WEATHER_BETAS,
    TWO_WEATHER_HORIZON,
    PROTOCOL_AIRLIGHTS,
    PROTOCOL_BETAS,
    PROTOCOL_DEPTH_RANGE,
    DepthRange,
    HazeParams,
    two_weather_pair,
    random_scene,
    simulate_haze,
    simulate_polarized_pair,
    with_windows,
)
from .imageio import list_images, read_gray, read_image, write_image, write_raw
from .radiometry import ResponseCurve, delinearize, linearize
from .registration import ControlPoints, estimate_affine, invert, residual_rms, warp
from .sweeps import ALGORITHMS, VARIABLES, SweepSpec, TransmittanceSpec, fmt, run_sweep, transmittance_table
from .theory import CURVES, sample_curve

PRESETS = {
    "sequence": dict(
        size=100, patch=10, betas=list(PROTOCOL_BETAS), airlights=list(PROTOCOL_AIRLIGHTS),
        depth_lo=PROTOCOL_DEPTH_RANGE[0], depth_hi=PROTOCOL_DEPTH_RANGE[1], noise=0.0, windows=[0],
    ),
    "two-weather": dict(size=200, patch=50, windows=[0]),
}


class UsageError(Exception):
    pass


# JSON with 17 significant digits ----------------------------------------------

def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return format(x, ".17g") if math.isfinite(x) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, Path):
        return json.dumps(str(obj))
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if dataclasses.is_dataclass(obj):
        return _encode(dataclasses.asdict(obj), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with every float written to 17 significant digits."""
    return _encode(obj, indent, 0) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


# Helpers -----------------------------------------------------------------------

def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).split(",") if v.strip()]


def _rect(text) -> Rect:
    try:
        return Rect.parse(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected r0,r1,c0,c1, got {text!r}")


def _existing(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"no such file or directory: {p}")
    return p


def _save_image(out: Path, stem: str, img, bits: int = 16) -> None:
    """Lossless ``.hzb`` plus a viewable PNG clipped to [0, 1]."""
    write_raw(out / f"{stem}.hzb", img)
    write_image(out / f"{stem}.png", img, bits)


def _save_map(out: Path, stem: str, m) -> None:
    """Raw map plus a PNG rescaled to the map's maximum."""
    m = np.asarray(m, dtype=np.float64)
    write_raw(out / f"{stem}.hzb", m)
    top = np.max(m[np.isfinite(m)]) if np.any(np.isfinite(m)) else 0.0
    write_image(out / f"{stem}.png", m / top if top > 0 else m, 16)


def _read_stack(directory) -> list[Path]:
    """Images of a directory, preferring lossless ``.hzb`` files when present."""
    files = list_images(directory)
    raw = [f for f in files if f.suffix.lower() == ".hzb"]
    return raw or files


def _load_airlight(spec: str):
    if not spec.startswith("explicit:"):
        return None
    path = _existing(spec.split(":", 1)[1])
    data = json.loads(path.read_text())
    if isinstance(data, dict):
        data = data.get("airlights", data.get("airlight"))
    if data is None:
        raise UsageError(f"{path} has no 'airlights' entry")
    return np.asarray(data, dtype=np.float64)


# Subcommands -------------------------------------------------------------------

def cmd_simulate(a, out: Path) -> dict:
    if a.preset == "two-weather":
        truth, e1, e2, a_hat = two_weather_pair(a.seed, a.inverse_square, a.noise, tuple(_ints(a.windows)))
        _save_image(out, "e1", e1)
        _save_image(out, "e2", e2)
        write_raw(out / "radiance.hzb", truth.radiance)
        _save_map(out, "depth", truth.depth_map)
        record = {"kind": "dichromatic", "a_hat": a_hat, "horizons": list(TWO_WEATHER_HORIZON),
                  "betas": list(TWO_WEATHER_BETAS), "depths": truth.depths, "patch": truth.grid.patch_height,
                  "size": truth.grid.height, "noise": a.noise, "inverse_square": a.inverse_square, "seed": a.seed}
        write_json(out / "truth.json", record)
        return record
    betas, airlights = _floats(a.betas), _floats(a.airlights)
    truth = random_scene(a.size, a.size, a.patch, DepthRange(a.depth_lo, a.depth_hi), a.seed)
    if a.windows:
        truth = with_windows(truth, _ints(a.windows))
    params = HazeParams(tuple(betas), tuple(airlights), a.noise)
    seq = simulate_haze(truth, params, a.seed)
    (out / "images").mkdir()
    (out / "tmaps").mkdir()
    T = params.transmissions(truth.depths)
    for i, img in enumerate(seq.images):
        _save_image(out / "images", f"img_{i:03d}", img)
        _save_image(out / "tmaps", f"t_{i:03d}", truth.grid.expand(T[i]))
    if a.dop is not None:
        (out / "pol").mkdir()
        for i, (b, air) in enumerate(zip(betas, airlights)):
            best, worst = simulate_polarized_pair(truth, b, air, a.dop, a.noise, a.seed, i)
            _save_image(out / "pol", f"best_{i:03d}", best)
            _save_image(out / "pol", f"worst_{i:03d}", worst)
    write_raw(out / "radiance.hzb", truth.radiance)
    _save_map(out, "depth", truth.depth_map)
    record = {"kind": "haze", "betas": betas, "airlights": airlights, "depths": truth.depths,
              "size": a.size, "patch": a.patch, "noise": a.noise, "dop": a.dop, "seed": a.seed}
    write_json(out / "truth.json", record)
    return record


def cmd_dehaze_pol(a, out: Path) -> dict:
    best, worst = read_image(_existing(a.best)), read_image(_existing(a.worst))
    est = estimate_sky_params(best, worst, a.sky, a.bias)
    res = dehaze_pol(best, worst, est, a.t_min)
    _save_image(out, "dehazed", res.dehazed)
    _save_image(out, "airlight", res.airlight)
    _save_image(out, "transmission", res.transmission)
    _save_map(out, "depth", res.scaled_depth)
    record = {"p": est.p, "a_inf": est.a_inf, "bias": est.bias}
    write_json(out / "pol.json", record)
    return record


def cmd_dehaze_dc(a, out: Path) -> dict:
    img = read_image(_existing(a.input))
    win = WindowSpec.parse(a.window, a.mode)
    A = estimate_airlight_dc(img, dark_channel(img, win), a.percentile)
    res = dehaze_dc(img, win, A, a.t_min)
    _save_image(out, "dehazed", res.dehazed)
    _save_map(out, "transmission", res.transmission)
    _save_map(out, "depth", res.scaled_depth)
    record = {"airlight": res.airlight, "window": [win.height, win.width], "mode": win.mode}
    write_json(out / "dc.json", record)
    return record


def cmd_dehaze_dich(a, out: Path) -> dict:
    e1, e2 = read_image(_existing(a.e1)), read_image(_existing(a.e2))
    cube = None if a.cube == "auto" else float(a.cube)
    fit = dichromatic_pipeline(e1, e2, weighted=not a.unweighted, cube_dim=cube)
    res = fit.result
    _save_image(out, "dehazed", res.dehazed / max(float(np.max(res.dehazed)), 1e-300))
    write_raw(out / "dehazed.hzb", res.dehazed)
    _save_map(out, "dot_depth", res.dot_depth)
    _save_map(out, "alpha", res.alpha)
    record = {"a_hat": fit.a_hat, "a_inf1": fit.horizon.a_inf1, "a_inf2": fit.horizon.a_inf2,
              "anchors": int(res.anchors.size), "inverse_square": a.inverse_square}
    write_json(out / "dich.json", record)
    return record


def cmd_co(a, out: Path) -> dict:
    files = _read_stack(_existing(a.seq))
    explicit = _load_airlight(a.airlight)
    seq = ImageSequence.from_images([read_image(f) for f in files])
    if a.foreground is not None:
        seq = normalize_illumination(seq, a.foreground)
    if a.airlight == "brightest":
        cfg_mode, pct = "brightest", 0.0
    elif a.airlight.startswith("p:"):
        cfg_mode, pct = "percentile", float(a.airlight[2:])
    elif explicit is not None:
        cfg_mode, pct = "explicit", 0.0
    else:
        raise UsageError(f"bad --airlight {a.airlight!r}; use brightest, p:<fraction> or explicit:<file.json>")
    cfg = CoConfig(patch_size=a.patch, tol=a.tol, max_iters=a.max_iters, airlight_mode=cfg_mode,
                   percentile=pct, clamp=a.clamp)
    A = resolve_airlight(seq, cfg, explicit)
    h, w = seq.shape
    grid = make_patch_grid(h, w, a.patch)
    res = co_solve(seq, A, cfg, grid=grid, jobs=a.jobs)
    (out / "tmaps").mkdir()
    for i, t in enumerate(res.transmission.values):
        m = grid.expand(t)
        write_raw(out / "tmaps" / f"t_{i:03d}.hzb", m)
        write_image(out / "tmaps" / f"t_{i:03d}.png", m, 16)
    _save_image(out, "radiance", res.radiance)
    with open(out / "objective.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["iteration", "objective"])
        for k, v in enumerate(res.objective_trace):
            wr.writerow([k, fmt(v)])
    record = {"inputs": [f.name for f in files], "airlight": A, "clamp_index": res.transmission.clamp_index,
              "iterations": int(np.max(res.iterations)), "converged": bool(res.converged)}
    write_json(out / "co.json", record)
    return record


def cmd_cdc(a, out: Path) -> dict:
    files = _read_stack(_existing(a.tmaps))
    T = np.stack([read_gray(f) for f in files])
    seq = None
    if a.seq is not None:
        seq = np.stack([read_image(f) for f in _read_stack(_existing(a.seq))])
    res = cdc_solve(T, CdcConfig(tol=a.tol, max_iters=a.max_iters), a.clamp_index, seq)
    depth = res.depth.values
    write_raw(out / "depth.hzb", depth)
    top = float(depth.max())
    write_image(out / "depth.png", depth / top if top > 0 else depth, 16)
    record = {"betas": res.scatter.betas, "clamp_index": res.scatter.clamp_index,
              "rescaled_betas": res.scatter.rescaled(), "iterations": res.iterations,
              "converged": res.converged, "objective": res.objective_trace[-1]}
    write_json(out / "betas.json", record)
    return record


def cmd_sweep(a, out: Path) -> dict:
    values = tuple(_floats(a.values)) if a.values is not None else None
    if a.variable == "transmittance":
        kw = {"trials": a.trials, "seed": a.seed}
        if values is not None:
            kw["levels"] = values
        if a.noise_levels is not None:
            kw["noise"] = tuple(_floats(a.noise_levels))
        spec = TransmittanceSpec(**kw)
        table = transmittance_table(spec, a.jobs)
        with open(out / "transmittance.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["transmittance"] + [f"sigma_{fmt(s)}" for s in spec.noise])
            for lvl, row in zip(spec.levels, table):
                wr.writerow([fmt(lvl)] + [fmt(x) for x in row])
        record = {"levels": spec.levels, "noise": spec.noise, "mean_error": table}
        write_json(out / "summary.json", record)
        return record
    defaults = {"image_noise": (0.0, 0.05, 0.1, 0.15, 0.2), "dop_error": (0.0, 0.1, 0.2, 0.3, 0.4, 0.5),
                "airlight_error": (0.0, 0.05, 0.1, 0.15, 0.2)}
    algs = tuple(a.algorithms.split(",")) if isinstance(a.algorithms, str) else tuple(a.algorithms)
    unknown = [x for x in algs if x not in ALGORITHMS]
    if unknown:
        raise UsageError(f"unknown algorithms {unknown}; choose from {', '.join(ALGORITHMS)}")
    spec = SweepSpec(a.variable, values or defaults[a.variable], trials=a.trials, seed=a.seed,
                     algorithms=algs, base_noise=a.base_noise, dop=a.dop)
    res = run_sweep(spec, a.jobs)
    res.write_csv(out / "trials.csv")
    res.write_summary_csv(out / "summary.csv")
    record = res.summary()
    write_json(out / "summary.json", record)
    return record


def cmd_theory(a, out: Path) -> dict:
    deg, vals = sample_curve(a.curve, a.g, a.step)
    with open(out / f"{a.curve}.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["theta", "value"])
        for d, v in zip(deg, vals):
            wr.writerow([fmt(d), fmt(v)])
    return {"curve": a.curve, "g": a.g, "samples": len(deg)}


def cmd_register(a, out: Path) -> dict:
    img = read_image(_existing(a.moving))
    cp = ControlPoints.from_json(_existing(a.points))
    t = estimate_affine(cp)
    aligned = warp(img, invert(t))
    _save_image(out, "aligned", aligned)
    record = {"affine": t, "residual_rms": residual_rms(t, cp)}
    write_json(out / "transform.json", record)
    return record


def _curve(spec: str) -> ResponseCurve:
    if spec == "identity":
        return ResponseCurve.identity_log()
    if spec.startswith("gamma"):
        g = float(spec.split(":", 1)[1]) if ":" in spec else 2.2
        return ResponseCurve.gamma(g)
    return ResponseCurve.from_csv(_existing(spec))


def cmd_linearize(a, out: Path) -> dict:
    curve = _curve(a.curve)
    src = _existing(a.input)
    if a.inverse:
        codes = delinearize(read_image(src), curve, a.shutter)
        write_image(out / "codes.png", codes.astype(np.float64) / 255.0, 8)
        return {"shutter": a.shutter, "direction": "delinearize"}
    import cv2

    raw = cv2.imread(str(src), cv2.IMREAD_UNCHANGED)
    if raw is None or raw.dtype != np.uint8:
        raise UsageError(f"{src} must be an 8-bit image")
    if raw.ndim == 2:
        raw = np.repeat(raw[..., None], 3, axis=2)
    codes = raw[..., 2::-1]
    lin = linearize(codes, curve, a.shutter)
    write_raw(out / "linear.hzb", lin)
    return {"shutter": a.shutter, "direction": "linearize", "max": float(lin.max())}


def _load_depth(path) -> np.ndarray:
    p = _existing(path)
    if p.suffix == ".json":
        t = json.loads(p.read_text())
        grid = make_patch_grid(t["size"], t["size"], t["patch"])
        return grid.expand(np.asarray(t["depths"], dtype=np.float64))
    return read_gray(p)


def cmd_compare(a, out: Path) -> dict:
    record = {}
    if a.betas is not None:
        if a.truth is None:
            raise UsageError("--betas needs --truth")
        est = json.loads(_existing(a.betas).read_text())["betas"]
        truth = json.loads(_existing(a.truth).read_text())["betas"]
        record["scattering_error"] = scattering_error(np.asarray(est, float), truth)
    if a.depth is not None:
        d = _load_depth(a.depth)
        if a.truth_depth is not None or (a.truth is not None and a.betas is None):
            ref = _load_depth(a.truth_depth or a.truth)
            record["depth_error"] = depth_error(d, ref)
            record["depth_rms"] = depth_rms(d, ref)
            record["rescaled_depth_error"], record["rescaled_depth_rms"] = rescaled_depth_error(d, ref)
        if a.far is not None and a.near is not None:
            record["distance_ratio"] = distance_ratio(d, a.far, a.near)
    if a.welch is not None:
        xa, xb = (np.loadtxt(_existing(p), delimiter=",", ndmin=1) for p in a.welch)
        w = welch_t_test(xa, xb)
        record["welch"] = {"t": w.t_stat, "dof": w.dof, "p_two_tail": w.p_two_tail, "p_one_tail": w.p_one_tail}
    if not record:
        raise UsageError("nothing to compare; give --betas/--truth, --depth or --welch")
    write_json(out / "compare.json", record)
    return record


# Parser ------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(2, f"\n{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("-o", "--out", default="out", help="output directory (replaced atomically)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps and per-patch solvers")
    g.add_argument("--config", help="TOML file of flat key = value overrides")
    return p


def build_parser() -> _Parser:
    common = _common()
    parser = _Parser(prog="hazescatter", description="Atmospheric scattering from hazy image sequences.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_, description=help_, parents=[common])
        sp.set_defaults(func=func, _parser=sp)
        return sp

    sp = add("simulate", cmd_simulate, "Render a hazy sequence with known ground truth.")
    sp.add_argument("--preset", choices=sorted(PRESETS))
    sp.add_argument("--size", type=int, default=100)
    sp.add_argument("--patch", type=int, default=10)
    sp.add_argument("--betas", default=",".join(map(str, PROTOCOL_BETAS)))
    sp.add_argument("--airlights", default=",".join(map(str, PROTOCOL_AIRLIGHTS)))
    sp.add_argument("--depth-lo", type=float, default=PROTOCOL_DEPTH_RANGE[0])
    sp.add_argument("--depth-hi", type=float, default=PROTOCOL_DEPTH_RANGE[1])
    sp.add_argument("--noise", type=float, default=0.0)
    sp.add_argument("--dop", type=float, default=None, help="also render polarizer pairs")
    sp.add_argument("--windows", default="", help="patch indices given a zero red channel")
    sp.add_argument("--inverse-square", action="store_true", help="two-weather preset only")

    sp = add("dehaze-pol", cmd_dehaze_pol, "Polarization-based dehazing of a best/worst pair.")
    sp.add_argument("--best", required=True)
    sp.add_argument("--worst", required=True)
    sp.add_argument("--sky", type=_rect, required=True, help="r0,r1,c0,c1 (zero-based, half-open)")
    sp.add_argument("--bias", type=float, default=DEFAULT_BIAS)
    sp.add_argument("--t-min", type=float, default=1e-20)

    sp = add("dehaze-dc", cmd_dehaze_dc, "Dark-channel dehazing of one image.")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--window", default="10x10")
    sp.add_argument("--mode", choices=("tiled", "sliding"), default="tiled")
    sp.add_argument("--percentile", type=float, default=0.0)
    sp.add_argument("--t-min", type=float, default=1e-20)

    sp = add("dehaze-dich", cmd_dehaze_dich, "Dichromatic dehazing of a two-weather pair.")
    sp.add_argument("--e1", required=True)
    sp.add_argument("--e2", required=True)
    sp.add_argument("--cube", default="auto")
    sp.add_argument("--unweighted", action="store_true", help="plain least-squares horizon fit")
    sp.add_argument("--inverse-square", action="store_true",
                    help="record that the scene follows inverse-square falloff (ratios are unaffected)")

    sp = add("co", cmd_co, "Colour Optimization over an image sequence.")
    sp.add_argument("--seq", required=True)
    sp.add_argument("--patch", type=int, default=10)
    sp.add_argument("--tol", type=float, default=1e-5)
    sp.add_argument("--max-iters", type=int, default=500)
    sp.add_argument("--airlight", default="brightest", help="brightest | p:<fraction> | explicit:<file.json>")
    sp.add_argument("--foreground", type=_rect, default=None)
    sp.add_argument("--clamp", choices=("auto", "darkest", "none"), default="auto")

    sp = add("cdc", cmd_cdc, "Split transmission maps into betas and a depthmap.")
    sp.add_argument("--tmaps", required=True)
    sp.add_argument("--tol", type=float, default=1e-5)
    sp.add_argument("--max-iters", type=int, default=500)
    sp.add_argument("--clamp-index", type=int, default=None)
    sp.add_argument("--seq", default=None, help="image sequence used to pick the brightest image")

    sp = add("sweep", cmd_sweep, "Monte Carlo accuracy sweeps.")
    sp.add_argument("--variable", choices=VARIABLES + ("transmittance",), default="image_noise")
    sp.add_argument("--values", default=None)
    sp.add_argument("--trials", type=int, default=20)
    sp.add_argument("--algorithms", default=",".join(ALGORITHMS))
    sp.add_argument("--base-noise", type=float, default=0.0)
    sp.add_argument("--dop", type=float, default=1.0)
    sp.add_argument("--noise-levels", default=None, help="transmittance table only")

    sp = add("theory", cmd_theory, "Sample a phase or polarization curve as CSV.")
    sp.add_argument("--curve", choices=sorted(CURVES), default="rayleigh")
    sp.add_argument("--g", type=float, default=0.0)
    sp.add_argument("--step", type=float, default=1.0)

    sp = add("register", cmd_register, "Align an image to a base frame from control points.")
    sp.add_argument("--moving", required=True)
    sp.add_argument("--points", required=True)

    sp = add("linearize", cmd_linearize, "Convert 8-bit codes to linear irradiance (or back).")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--curve", default="identity", help="identity | gamma[:g] | curve.csv")
    sp.add_argument("--shutter", type=float, default=1.0)
    sp.add_argument("--inverse", action="store_true")

    sp = add("compare", cmd_compare, "Score estimates against ground truth.")
    sp.add_argument("--betas")
    sp.add_argument("--truth")
    sp.add_argument("--depth")
    sp.add_argument("--truth-depth")
    sp.add_argument("--far", type=_rect)
    sp.add_argument("--near", type=_rect)
    sp.add_argument("--welch", nargs=2, metavar=("A.csv", "B.csv"))
    return parser


def _apply_config(parser: _Parser, args, argv):
    try:
        import tomllib as tomli
    except ImportError:
        import tomli

    sp = args._parser
    try:
        cfg = tomli.loads(_existing(args.config).read_text())
    except tomli.TOMLDecodeError as exc:
        raise UsageError(f"bad config {args.config}: {exc}")
    dests = {a.dest for a in sp._actions}
    overrides = {}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest not in dests or dest in ("config", "help"):
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        overrides[dest] = value
    sp.set_defaults(**overrides)
    return parser.parse_args(argv)


def _apply_preset(args, argv) -> None:
    if getattr(args, "preset", None) is None:
        return
    given = {tok.split("=")[0].lstrip("-").replace("-", "_") for tok in argv if tok.startswith("--")}
    for k, v in PRESETS[args.preset].items():
        if k not in given:
            setattr(args, k, v)


def _config_record(args) -> dict:
    return {k: v for k, v in vars(args).items() if not k.startswith("_") and k != "func"}


def _versions() -> dict:
    import scipy

    return {"hazescatter": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config:
            args = _apply_config(parser, args, argv)
        _apply_preset(args, argv)
        if args.jobs < 1:
            raise UsageError("--jobs must be at least 1")
    except UsageError as exc:
        args._parser.error(str(exc))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=f".{out.name}.tmp-", dir=out.parent))
    try:
        with np.errstate(divide="ignore", invalid="ignore"):
            result = args.func(args, stage)
        run = {"command": args.command, "argv": argv, "config": _config_record(args), "seed": args.seed,
               "versions": _versions(), "result": result,
               "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}
        write_json(stage / "run.json", run)
    except UsageError as exc:
        shutil.rmtree(stage, ignore_errors=True)
        args._parser.error(str(exc))
    except HazeError as exc:
        shutil.rmtree(stage, ignore_errors=True)
        print(f"hazescatter {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except BaseException:
        shutil.rmtree(stage, ignore_errors=True)
        raise
    _swap(stage, out)
    print(f"wrote {out}")
    return 0


def _swap(stage: Path, out: Path) -> None:
    if out.exists():
        old = Path(tempfile.mkdtemp(prefix=f".{out.name}.old-", dir=out.parent))
        old.rmdir()
        out.rename(old)
        stage.rename(out)
        shutil.rmtree(old, ignore_errors=True)
    else:
        stage.rename(out)


dispatch = main


if __name__ == "__main__":
    sys.exit(main())
