"""Acceptance checks, one test per criterion.

Every test records a one-line verdict that is printed in the
"acceptance criteria" block of the pytest terminal summary, then asserts.
Tolerances are fixed here; a criterion the implementation does not meet
fails rather than being relaxed.
"""
import math
import time
from pathlib import Path

import numpy as np
import pytest

from hazescatter.cdc import CdcConfig, cdc_gradients, cdc_objective, cdc_solve, scattering_error
from hazescatter.co import CoConfig, co_gradients, co_objective, co_solve
from hazescatter.core import Rect
from hazescatter.dehaze_dark import WindowSpec, dark_channel
from hazescatter.dehaze_dichromatic import dichromatic_pipeline
from hazescatter.dehaze_pol import PolEstimate, dehaze_pol
from hazescatter.evaluate import distance_ratio, welch_from_stats
from hazescatter.hazesim import (
    TWO_WEATHER_AIRLIGHT_RGB,
    TWO_WEATHER_HORIZON,
    PROTOCOL_AIRLIGHTS,
    PROTOCOL_BETAS,
    DepthRange,
    HazeParams,
    two_weather_pair,
    random_scene,
    simulate_haze,
    simulate_polarized_pair,
    unit_rgb,
)
from hazescatter.registration import ControlPoints, apply, compose, estimate_affine, invert
from hazescatter.sweeps import (
    TransmittanceSpec,
    airlight_error_sweep,
    dop_sweep,
    noise_sweep,
    transmittance_table,
)
from hazescatter.theory import rayleigh_dop, rayleigh_phase, sphere_average
from oracles import brute_dark, random_dark_case

# Reference transmittance errors: the noise-free column, tau = 0.1 .. 0.9.
REF_NOISE_FREE = (0.042413, 0.058594, 0.07703, 0.10345, 0.18084, 0.13892, 0.10241, 0.13017, 0.18003)
# Reference errors at tau = 0.1 for sigma = 0, 0.01, 0.05, 0.1.
REF_TAU01 = (0.042413, 0.69682, 1.1652, 1.6013)
FACTOR = 2.5
EXACT = 1e-6
# Errors below this are numerically zero and carry no trend.
FLOOR = 1e-6
TIGHT = CdcConfig(tol=1e-12, max_iters=20000)


def _within_factor(values, ref, factor=FACTOR) -> bool:
    r = np.asarray(values) / np.asarray(ref)
    return bool(np.all((r >= 1 / factor) & (r <= factor)))


def _spread(series) -> float:
    """max/min of a mean-error series with values under FLOOR treated as zero."""
    s = np.asarray(series, dtype=float)
    if np.all(s < FLOOR):
        return 1.0
    lo = s.min()
    return math.inf if lo < FLOOR else float(s.max() / lo)


def _fmt(values) -> str:
    return "[" + ", ".join(f"{v:.4g}" for v in values) + "]"


def test_criterion_01_noise_free_transmittance(acceptance):
    t0 = time.perf_counter()
    col = transmittance_table(TransmittanceSpec(noise=(0.0,), trials=20))[:, 0]
    dt = time.perf_counter() - t0
    ok = _within_factor(col, REF_NOISE_FREE) and dt < 60
    acceptance(1, ok, f"noise-free errors {_fmt(col)} within {FACTOR}x of reference, {dt:.1f} s (< 60 s)")
    assert ok


def test_criterion_02_transmittance_vs_noise(acceptance):
    row = transmittance_table(TransmittanceSpec(levels=(0.1,), trials=20))[0]
    monotone = bool(np.all(np.diff(row) > 0))
    close = _within_factor(row, REF_TAU01)
    ratios = np.asarray(row) / np.asarray(REF_TAU01)
    acceptance(
        2,
        monotone and close,
        f"tau=0.1 errors {_fmt(row)} (monotone={monotone}); ratio to reference {_fmt(ratios)}, need within {FACTOR}x",
    )
    assert monotone
    assert close


def test_criterion_03_cdc_exact_transmittance(acceptance):
    truth = random_scene(100, 100, 10, DepthRange(1.0, 20.0), seed=11)
    params = HazeParams.protocol()
    T = params.transmissions(truth.depths)
    t0 = time.perf_counter()
    res = cdc_solve(T, TIGHT)
    dt = time.perf_counter() - t0
    beta_err = float(np.max(np.abs(res.scatter.rescaled() - np.asarray(PROTOCOL_BETAS) / max(PROTOCOL_BETAS))))
    # the pinned beta is one, so the depthmap carries that time's true beta
    z = res.depth.values / PROTOCOL_BETAS[res.scatter.clamp_index]
    depth_err = float(np.max(np.abs(z - truth.depths) / truth.depths))
    ok = beta_err <= EXACT and depth_err <= EXACT and dt < 5
    acceptance(3, ok, f"beta error {beta_err:.2e}, relative depth error {depth_err:.2e} (<= 1e-6), {dt:.2f} s (< 5 s)")
    assert ok


def test_criterion_04_pol_exact_with_true_sky(acceptance):
    truth = random_scene(100, 100, 10, DepthRange(1.0, 20.0), seed=5)
    errs = []
    for p in (0.3, 0.6, 1.0):
        T = []
        for b, a in zip(PROTOCOL_BETAS, PROTOCOL_AIRLIGHTS):
            best, worst = simulate_polarized_pair(truth, b, a, p)
            T.append(truth.grid.reduce_mean(dehaze_pol(best, worst, PolEstimate.exact(p, a)).transmission.mean(axis=2)))
        errs.append(scattering_error(cdc_solve(np.stack(T), TIGHT).scatter, PROTOCOL_BETAS))
    ok = max(errs) <= EXACT
    acceptance(4, ok, f"scattering errors at p = 0.3, 0.6, 1.0: {_fmt(errs)} (<= 1e-6)")
    assert ok


def test_criterion_05_dark_channel_floor(acceptance):
    res = noise_sweep(values=(0.0,), trials=20, algorithms=("CO-CDC", "DC-CDC"))
    co, dc = res.series("CO-CDC")[0], res.series("DC-CDC")[0]
    ok = dc > 5 * co
    acceptance(5, ok, f"noise-free DC-CDC {dc:.4g} vs CO-CDC {co:.4g}, ratio {dc / co:.1f} (> 5)")
    assert ok


def test_criterion_06_dichromatic_two_weather_scene(acceptance):
    a_true = unit_rgb(TWO_WEATHER_AIRLIGHT_RGB)
    worst = {"angle": 0.0, "horizon": 0.0, "depth": 0.0, "time": 0.0}
    for seed in range(3):
        truth, e1, e2, _ = two_weather_pair(seed=seed)
        t0 = time.perf_counter()
        fit = dichromatic_pipeline(e1, e2)
        worst["time"] = max(worst["time"], time.perf_counter() - t0)
        cross = float(np.linalg.norm(np.cross(fit.a_hat, a_true)))
        worst["angle"] = max(worst["angle"], math.atan2(cross, abs(float(fit.a_hat @ a_true))))
        h = np.array([fit.horizon.a_inf1, fit.horizon.a_inf2])
        worst["horizon"] = max(worst["horizon"], float(np.max(np.abs(h / TWO_WEATHER_HORIZON - 1))))
        z = truth.depth_map
        rel = fit.result.dot_depth / fit.result.dot_depth.max()
        worst["depth"] = max(worst["depth"], float(np.max(np.abs(rel - z / z.max()))))
    ok = worst["angle"] <= EXACT and worst["horizon"] <= EXACT and worst["depth"] <= EXACT and worst["time"] < 5
    acceptance(
        6,
        ok,
        f"angle {worst['angle']:.1e} rad, horizon rel {worst['horizon']:.1e}, relative depth {worst['depth']:.1e} "
        f"(<= 1e-6), slowest run {worst['time']:.2f} s (< 5 s)",
    )
    assert ok


def test_criterion_07_error_sensitivity_sweeps(acceptance):
    t0 = time.perf_counter()
    air = airlight_error_sweep(trials=20)
    dop = dop_sweep(trials=20)
    dt = time.perf_counter() - t0
    a = {alg: _spread(air.series(alg)) for alg in air.spec.algorithms}
    d = {alg: _spread(dop.series(alg)) for alg in dop.spec.algorithms}
    air_ok = a["POL-CDC"] <= 1.5 and a["CO-CDC"] <= 1.5 and a["DICH-CDC"] >= 3 and a["DC-CDC"] >= 3
    dop_ok = d["POL-CDC"] > 1.5 and all(d[k] <= 1.5 for k in d if k != "POL-CDC")
    ok = air_ok and dop_ok and dt < 600
    detail = (
        "airlight max/min " + ", ".join(f"{k} {v:.3g}" for k, v in a.items())
        + " (need POL, CO <= 1.5; DICH, DC >= 3); DOP max/min "
        + ", ".join(f"{k} {v:.3g}" for k, v in d.items())
        + f" (only POL > 1.5); {dt:.0f} s (< 600 s)"
    )
    acceptance(7, ok, detail)
    assert dop_ok and dt < 600
    assert air_ok


def test_criterion_08_welch_example(acceptance):
    w = welch_from_stats(281.0014, 2235.04, 21, 277.9033, 2313.86, 21)
    ok = abs(w.t_stat - 0.2105) <= 1e-3 and abs(w.p_two_tail - 0.8343) <= 1e-3
    acceptance(8, ok, f"t = {w.t_stat:.4f} (0.2105 +- 0.001), p = {w.p_two_tail:.4f} (0.8343 +- 0.001)")
    assert ok


def _fd(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2 * h)
    return g


def _rel(a, b) -> float:
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def test_criterion_09_properties(acceptance):
    checks = {}
    rng = np.random.default_rng(9)

    # CO and CDC analytic gradients against central differences
    truth = random_scene(4, 4, 2, DepthRange(1.0, 8.0), seed=9)
    params = HazeParams((0.1, 0.2, 0.3), (0.5, 0.7, 0.9), 0.02)
    seq = simulate_haze(truth, params, 9)
    A = np.asarray(params.airlights)
    T, R = rng.uniform(0.1, 0.9, (3, 4)), rng.uniform(0, 1, (4, 4, 3))
    dT, dR = co_gradients(T, R, seq, A, truth.grid)
    g_co = max(
        _rel(dT, _fd(lambda t: co_objective(t, R, seq, A, truth.grid), T)),
        _rel(dR, _fd(lambda r: co_objective(T, r, seq, A, truth.grid), R)),
    )
    b, z, L = rng.uniform(0.1, 1, 4), rng.uniform(0.5, 3, 6), rng.uniform(0, 3, (4, 6))
    db, dz = cdc_gradients(b, z, L)
    g_cdc = max(_rel(db, _fd(lambda v: cdc_objective(v, z, L), b)), _rel(dz, _fd(lambda v: cdc_objective(b, v, L), z)))
    checks["gradients"] = max(g_co, g_cdc) <= 1e-5

    # objective traces never increase
    big = random_scene(20, 20, 5, DepthRange(1.0, 8.0), seed=4)
    noisy = simulate_haze(big, HazeParams((0.1, 0.2, 0.3), (0.5, 0.7, 0.9), 0.05), 4)
    co = co_solve(noisy, np.array([0.5, 0.7, 0.9]), CoConfig(patch_size=5))
    cdc = cdc_solve(co.transmission)
    checks["traces"] = bool(np.all(np.diff(co.objective_trace) <= 1e-12) and np.all(np.diff(cdc.objective_trace) <= 1e-12))

    checks["rayleigh"] = abs(sphere_average(rayleigh_phase) - 1.0) <= 1e-6 and rayleigh_dop(math.pi / 2) == 1.0

    drng = np.random.default_rng(2024)
    dark_ok = True
    for k in range(50):
        img, h, w, mode = random_dark_case(drng, k)
        dark_ok &= bool(np.array_equal(dark_channel(img, WindowSpec(h, w, mode)), brute_dark(img, h, w, mode)))
    checks["dark channel"] = dark_ok

    c, s = math.cos(0.7), math.sin(0.7)
    t = np.array([[1.3 * c, -1.3 * s, 12.0], [1.3 * s, 1.3 * c, -7.5]])
    pts = rng.uniform(-100, 100, (8, 2))
    fit = estimate_affine(ControlPoints(pts, apply(t, pts)))
    checks["affine"] = (
        float(np.max(np.abs(apply(invert(t), apply(t, pts)) - pts))) <= 1e-9
        and np.allclose(compose(invert(t), t), np.eye(3)[:2], atol=1e-9)
        and float(np.max(np.abs(fit - t))) <= 1e-9
    )

    one = noise_sweep(values=(0.0, 0.1), trials=3, size=40, patch=10, jobs=1)
    eight = noise_sweep(values=(0.0, 0.1), trials=3, size=40, patch=10, jobs=8)
    checks["jobs 1 vs 8"] = all(
        np.array_equal(getattr(one, m), getattr(eight, m), equal_nan=True) for m in ("scatter", "depth", "depth_rms")
    )

    ok = all(checks.values())
    acceptance(9, ok, "; ".join(f"{k}: {'ok' if v else 'FAILED'}" for k, v in checks.items()))
    assert ok


def test_criterion_10_real_photographs_documented(acceptance):
    readme = (Path(__file__).resolve().parents[1] / "README.md").read_text()
    documented = "not reproducible" in readme.lower() and "distance_ratio" in readme
    depth = np.full((20, 20), 2.0)
    depth[:10] = 6.0
    ratio = distance_ratio(depth, Rect(0, 10, 0, 20), Rect(10, 20, 0, 20))
    ok = documented and ratio == pytest.approx(3.0, rel=1e-15)
    acceptance(
        10,
        ok,
        "real-photograph results are not reproducible without the original images; "
        f"README documents this and the distance_ratio tool for user data (ratio check {ratio:.3g})",
    )
    assert ok
