"""Maximal functions of kernel operators on finite measure spaces, with Lorentz-norm bounds."""

from .family import *  # noqa: F401,F403
from .interpolation import *  # noqa: F401,F403
from .kernels import *  # noqa: F401,F403
from .lorentz import *  # noqa: F401,F403
from .maximal import *  # noqa: F401,F403
from .measure import *  # noqa: F401,F403
from .operator import *  # noqa: F401,F403

from . import family, interpolation, kernels, lorentz, maximal, measure, operator

__version__ = "0.1.0"

__all__ = (
    measure.__all__ + lorentz.__all__ + operator.__all__ + family.__all__
    + maximal.__all__ + interpolation.__all__ + kernels.__all__
)
