"""Exception hierarchy.

Every domain failure raises a subclass of :class:`HazeError`; the CLI maps
these to exit code 1.
"""


class HazeError(Exception):
    """Base class for all domain errors raised by hazescatter."""


class InvalidImage(HazeError, ValueError):
    pass


class NonDivisiblePatch(HazeError, ValueError):
    pass


class OutOfBounds(HazeError, IndexError):
    pass


class InvalidShutter(HazeError, ValueError):
    pass


class InvalidCurve(HazeError, ValueError):
    pass


class DegenerateConfiguration(HazeError, ValueError):
    pass


class InvalidAsymmetry(HazeError, ValueError):
    pass


class InvalidUnitVector(HazeError, ValueError):
    pass


class ZeroSkyIrradiance(HazeError, ValueError):
    pass


class DegenerateDOP(HazeError, ValueError):
    pass


class InvalidAirlight(HazeError, ValueError):
    pass


class DegenerateScene(HazeError, ValueError):
    pass


class DegeneratePoint(HazeError, ValueError):
    pass


class CollinearSamples(HazeError, ValueError):
    pass


class InvalidCube(HazeError, ValueError):
    pass


class NoAnchorFound(HazeError, ValueError):
    pass


class ZeroForeground(HazeError, ValueError):
    pass


class NoConvergence(HazeError, RuntimeError):
    """Raised only on request; solvers normally flag non-convergence."""


class AllOpaque(HazeError, ValueError):
    pass


class LengthMismatch(HazeError, ValueError):
    pass


class ShapeMismatch(HazeError, ValueError):
    pass


class DegenerateSample(HazeError, ValueError):
    pass


class ZeroNearDepth(HazeError, ValueError):
    pass
