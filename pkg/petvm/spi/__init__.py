"""The stochastic procedure interface and the builtin procedure library."""

from .builtins import builtin_sps
from .psp import ESR, PSP, Args, DeterministicPSP, FunctionPSP, RandomPSP, Request
from .sp import SP, SPAux, SPRecord

__all__ = [
    "ESR",
    "PSP",
    "SP",
    "Args",
    "DeterministicPSP",
    "FunctionPSP",
    "RandomPSP",
    "Request",
    "SPAux",
    "SPRecord",
    "builtin_sps",
]
