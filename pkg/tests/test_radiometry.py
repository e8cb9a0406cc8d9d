import numpy as np
import pytest

from hazescatter.errors import InvalidCurve, InvalidShutter
from hazescatter.radiometry import ResponseCurve, delinearize, linearize

CODES = np.arange(256, dtype=np.uint8)


def _img(codes):
    return np.repeat(np.asarray(codes, dtype=np.uint8).reshape(1, -1, 1), 3, axis=2)


def test_identity_curve_full_code():
    c = ResponseCurve.identity_log()
    assert linearize(_img([255]), c, 1.0)[0, 0, 0] == 1.0
    assert linearize(_img([255]), c, 0.5)[0, 0, 0] == 2.0


def test_inverse_of_full_code():
    c = ResponseCurve.identity_log()
    assert delinearize(np.ones((1, 1, 3)), c, 1.0)[0, 0, 0] == 255


def test_zero_irradiance_maps_to_code_zero():
    c = ResponseCurve.identity_log()
    assert delinearize(np.zeros((1, 1, 3)), c, 1.0)[0, 0, 0] == 0


@pytest.mark.parametrize("curve", [ResponseCurve.identity_log(), ResponseCurve.gamma(2.2), ResponseCurve.gamma(1.3)])
@pytest.mark.parametrize("shutter", [1.0, 0.25, 3.0])
def test_code_round_trip_all_codes(curve, shutter):
    img = _img(CODES)
    back = delinearize(linearize(img, curve, shutter), curve, shutter)
    assert np.array_equal(back, img)


def test_random_irradiance_round_trip_within_one_code(rng):
    c = ResponseCurve.gamma(2.2)
    e = rng.uniform(1e-3, 1.0, size=(20, 20, 3))
    codes = delinearize(e, c, 1.0)
    back = delinearize(linearize(codes, c, 1.0), c, 1.0)
    assert np.max(np.abs(back.astype(int) - codes.astype(int))) <= 1
    ideal = 255.0 * e ** (1 / 2.2)
    assert np.max(np.abs(codes - ideal)) <= 1.0


def test_non_monotone_curve_rejected():
    g = np.tile(np.linspace(-5, 0, 256), (3, 1))
    g[1, 100] = g[1, 99] - 1
    with pytest.raises(InvalidCurve):
        ResponseCurve(g)


def test_bad_shutter():
    with pytest.raises(InvalidShutter):
        linearize(_img([10]), ResponseCurve.identity_log(), 0.0)


def test_csv_round_trip(tmp_path):
    c = ResponseCurve.gamma(1.8)
    p = tmp_path / "curve.csv"
    c.to_csv(p)
    assert np.array_equal(ResponseCurve.from_csv(p).g, c.g)
