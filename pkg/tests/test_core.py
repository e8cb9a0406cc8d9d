import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hazescatter.core import (
    ImageSequence,
    Rect,
    TransmissionSeries,
    derive_rng,
    linear_image,
    make_patch_grid,
    patch_mean,
)
from hazescatter.errors import InvalidImage, NonDivisiblePatch, OutOfBounds


def test_grid_100_by_10():
    g = make_patch_grid(100, 100, 10)
    assert g.n_patches == 100
    assert g.coordinates[0] == (1, 10, 1, 10)
    assert g.coordinates[-1] == (91, 100, 91, 100)


def test_single_patch_grid():
    g = make_patch_grid(4, 4, 4)
    assert g.coordinates == [(1, 4, 1, 4)]


def test_grid_covers_image_exactly_once():
    g = make_patch_grid(40, 40, 10)
    cover = np.zeros((40, 40), dtype=int)
    for r0, r1, c0, c1 in g.coordinates:
        cover[r0 - 1 : r1, c0 - 1 : c1] += 1
    assert g.n_patches == 16
    assert np.all(cover == 1)


def test_grid_rejects_non_divisible():
    with pytest.raises(NonDivisiblePatch):
        make_patch_grid(100, 100, 7)


@given(
    rows=st.integers(1, 5),
    cols=st.integers(1, 5),
    ph=st.integers(1, 4),
    pw=st.integers(1, 4),
    seed=st.integers(0, 2**32 - 1),
)
def test_patch_reshape_round_trip(rows, cols, ph, pw, seed):
    g = make_patch_grid(rows * ph, cols * pw, ph, pw)
    a = np.random.default_rng(seed).normal(size=(g.height, g.width, 3))
    assert np.array_equal(g.from_patches(g.to_patches(a)), a)


@given(rows=st.integers(1, 4), cols=st.integers(1, 4), ps=st.integers(1, 5))
def test_expand_then_reduce_is_identity(rows, cols, ps):
    g = make_patch_grid(rows * ps, cols * ps, ps)
    v = np.arange(g.n_patches, dtype=float)
    assert np.array_equal(g.reduce_mean(g.expand(v)), v)


def test_patch_mean_constant():
    img = np.full((6, 6, 3), 0.5)
    assert np.array_equal(patch_mean(img, Rect(0, 6, 0, 6)), [0.5, 0.5, 0.5])


def test_patch_mean_symmetric_red():
    img = np.zeros((2, 2, 3))
    img[..., 0] = [[0, 1], [0, 1]]
    assert patch_mean(img, Rect(0, 2, 0, 2))[0] == 0.5


def test_patch_mean_matches_loop(rng):
    img = rng.uniform(size=(10, 10, 3))
    ref = np.zeros(3)
    for r in range(10):
        for c in range(10):
            ref += img[r, c]
    assert np.allclose(patch_mean(img, Rect(0, 10, 0, 10)), ref / 100, rtol=0, atol=1e-12)


def test_patch_mean_out_of_bounds():
    with pytest.raises(OutOfBounds):
        patch_mean(np.zeros((4, 4, 3)), Rect(0, 5, 0, 4))


def test_rect_inclusive_conversion():
    assert Rect.from_inclusive(1, 10, 1, 10) == Rect(0, 10, 0, 10)
    assert Rect.parse("2,5,3,9") == Rect(2, 5, 3, 9)


def test_linear_image_scales_integers():
    img = linear_image(np.full((2, 2, 3), 255, dtype=np.uint8))
    assert img.dtype == np.float64 and np.all(img == 1.0)
    assert not img.flags.writeable


@pytest.mark.parametrize("bad", [np.zeros((3, 3)), np.zeros((2, 2, 4)), np.full((2, 2, 3), np.nan)])
def test_linear_image_rejects(bad):
    with pytest.raises(InvalidImage):
        linear_image(bad)


def test_sequence_validation():
    seq = ImageSequence.from_images([np.zeros((4, 4, 3))] * 3, airlight=[1, 2, 3])
    assert len(seq) == 3 and seq.shape == (4, 4)
    with pytest.raises(InvalidImage):
        ImageSequence.from_images([np.zeros((4, 4, 3))] * 3, airlight=[1, 2])


def test_derive_rng_independent_of_call_order():
    a = derive_rng(7, 1, 2).normal(size=4)
    derive_rng(7, 3).normal(size=100)
    b = derive_rng(7, 1, 2).normal(size=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, derive_rng(7, 2, 1).normal(size=4))


def test_transmission_series_maps():
    g = make_patch_grid(4, 4, 2)
    ts = TransmissionSeries(np.arange(8.0).reshape(2, 4), grid=g)
    m = ts.maps()
    assert m.shape == (2, 4, 4)
    assert m[1, 3, 3] == 7.0
