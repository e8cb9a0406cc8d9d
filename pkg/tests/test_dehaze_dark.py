import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hazescatter.dehaze_dark import SLIDING_DEFAULT, WindowSpec, dark_channel, dehaze_dc, estimate_airlight_dc
from hazescatter.errors import InvalidAirlight
from hazescatter.hazesim import DepthRange, HazeParams, random_scene, simulate_haze
from oracles import brute_dark, random_dark_case


def test_dark_channel_matches_brute_force_on_50_images():
    rng = np.random.default_rng(2024)
    for k in range(50):
        img, h, w, mode = random_dark_case(rng, k)
        assert np.array_equal(dark_channel(img, WindowSpec(h, w, mode)), brute_dark(img, h, w, mode))


def test_zero_in_every_window():
    img = np.full((20, 20, 3), 0.6)
    img[::10, ::10, 1] = 0.0
    assert np.all(dark_channel(img, WindowSpec(10, 10)) == 0)


@pytest.mark.parametrize("win", [WindowSpec(10, 10), SLIDING_DEFAULT])
def test_constant_gray(win):
    assert np.all(dark_channel(np.full((20, 20, 3), 0.7), win) == 0.7)


def test_window_parse():
    assert WindowSpec.parse("13x9", "sliding") == WindowSpec(13, 9, "sliding")


def test_airlight_from_sky():
    img = np.full((20, 20, 3), 0.2)
    img[:5] = 0.9
    assert np.array_equal(estimate_airlight_dc(img, dark_channel(img, SLIDING_DEFAULT)), [0.9] * 3)


def test_airlight_ignores_isolated_white_object():
    img = np.full((30, 30, 3), 0.1)
    img[:10] = 0.85
    img[25, 25] = 1.0
    A = estimate_airlight_dc(img, dark_channel(img, WindowSpec(5, 5, "sliding")))
    assert np.allclose(A, 0.85)


def test_airlight_ties_first_in_scan_order():
    img = np.zeros((4, 4, 3))
    dark = np.zeros((4, 4))
    dark[1, 2] = dark[3, 0] = 1.0
    img[1, 2] = [0.5, 0.2, 0.3]
    img[3, 0] = [0.3, 0.2, 0.5]
    assert np.array_equal(estimate_airlight_dc(img, dark), [0.5, 0.2, 0.3])


def test_airlight_percentile_matches_sort():
    rng = np.random.default_rng(0)
    img = rng.uniform(size=(20, 20, 3))
    dark = rng.uniform(size=(20, 20))
    order = np.argsort(-dark.ravel(), kind="stable")[:4]
    assert np.allclose(estimate_airlight_dc(img, dark, 0.01), img.reshape(-1, 3)[order].mean(axis=0))


def test_pure_airlight_saturates():
    img = np.full((10, 10, 3), 0.8)
    res = dehaze_dc(img, WindowSpec(10, 10), 0.8)
    assert np.all(res.transmission == 1e-20)
    assert np.allclose(res.scaled_depth, -np.log(1e-20))


def test_black_pixel_window_is_clear():
    rng = np.random.default_rng(1)
    img = rng.uniform(0.2, 0.6, size=(10, 10, 3))
    img[4, 4] = 0.0
    res = dehaze_dc(img, WindowSpec(10, 10), 0.9)
    assert np.all(res.transmission == 1.0)
    assert np.array_equal(res.dehazed, img)
    assert np.all(res.scaled_depth == 0)


def test_nonpositive_airlight():
    with pytest.raises(InvalidAirlight):
        dehaze_dc(np.ones((10, 10, 3)), WindowSpec(10, 10), 0.0)


def test_simulation_overestimates_haze():
    truth = random_scene(100, 100, 10, DepthRange(1.0, 20.0), seed=5)
    seq = simulate_haze(truth, HazeParams.protocol())
    win = WindowSpec(10, 10)
    res = dehaze_dc(seq.images[0], win, 0.5)
    est = truth.grid.reduce_mean(res.scaled_depth)
    true = 0.1 * truth.depths
    assert np.all(est >= true - 1e-12)
    assert np.mean(est - true) > 1e-3


@given(st.integers(0, 2**32 - 1), st.floats(0.3, 1.0))
def test_dehazed_inverts_formation_where_dark_is_exact(seed, a):
    rng = np.random.default_rng(seed)
    R = rng.uniform(size=(10, 10, 3))
    R[3, 7, 2] = 0.0
    t = 0.4
    img = R * t + a * (1 - t)
    res = dehaze_dc(img, WindowSpec(10, 10), a)
    assert np.allclose(res.transmission, t, atol=1e-12)
    assert np.allclose(res.dehazed, R, atol=1e-10)
