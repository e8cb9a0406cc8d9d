"""Single-scattering phase functions and the Rayleigh polarization curve.

These are reference curves only; none of the estimators consume them.
"""
from __future__ import annotations

import numpy as np

from .errors import InvalidAsymmetry


def _angle(theta) -> np.ndarray:
    th = np.asarray(theta, dtype=np.float64)
    if np.any(th < 0) or np.any(th > np.pi):
        raise ValueError("scattering angle must lie in [0, pi]")
    return th


def rayleigh_phase(theta):
    """``3/4 (1 + cos^2 theta)``; averages to one over the sphere."""
    c = np.cos(_angle(theta))
    return 0.75 * (1.0 + c * c)


def rayleigh_dop(theta):
    """Degree of linear polarization of Rayleigh-scattered light."""
    th = _angle(theta)
    s, c = np.sin(th), np.cos(th)
    return (s * s) / (1.0 + c * c)


def henyey_greenstein(theta, g: float):
    if not -1.0 < g < 1.0:
        raise InvalidAsymmetry(f"asymmetry g={g} must satisfy |g| < 1")
    c = np.cos(_angle(theta))
    return (1.0 - g * g) / (1.0 + g * g - 2.0 * g * c) ** 1.5


def sphere_average(f, n: int = 2001) -> float:
    """``(1/4pi)`` times the integral of an axially symmetric ``f(theta)`` over the sphere."""
    from scipy.integrate import simpson

    th = np.linspace(0.0, np.pi, n)
    return float(0.5 * simpson(f(th) * np.sin(th), x=th))


CURVES = {
    "rayleigh": lambda th, g: rayleigh_phase(th),
    "rayleigh-dop": lambda th, g: rayleigh_dop(th),
    "hg": lambda th, g: henyey_greenstein(th, g),
}


def sample_curve(name: str, g: float = 0.0, step_deg: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Curve values at ``step_deg`` spacing over [0, 180] degrees; returns (degrees, values)."""
    if name not in CURVES:
        raise ValueError(f"unknown curve {name!r}; choose from {sorted(CURVES)}")
    deg = np.arange(0.0, 180.0 + step_deg / 2, step_deg)
    return deg, np.asarray(CURVES[name](np.deg2rad(np.minimum(deg, 180.0)), g), dtype=np.float64)
