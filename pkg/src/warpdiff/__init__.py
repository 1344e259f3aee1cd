"""warpdiff: flow-guided rescaling alignment and densely guided diffusion
sampling for video super-resolution experiments."""

from .errors import (FormatError, InvalidArgumentError, SingularScheduleError,
                     WarpdiffError)
from .flow import FlowConfig, FlowField
from .tensor import Tensor

__version__ = "0.1.0"

__all__ = [
    "FlowConfig",
    "FlowField",
    "FormatError",
    "InvalidArgumentError",
    "SingularScheduleError",
    "Tensor",
    "WarpdiffError",
    "__version__",
]
