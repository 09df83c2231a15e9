class CarnotError(Exception):
    """Base class for errors raised by carnot_kit."""


class DimensionMismatch(CarnotError, ValueError):
    pass


class NotGradedError(CarnotError, ValueError):
    """A homogeneous quantity was requested for a non-graded subspace."""


class HomomorphismError(CarnotError, ValueError):
    pass


class CharacteristicPointError(CarnotError, ValueError):
    """The horizontal gradient vanishes, so no tangent group exists there."""


class NotOnSurfaceError(CarnotError, ValueError):
    pass
