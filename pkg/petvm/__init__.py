"""petvm - a probabilistic programming virtual machine with programmable inference."""

from importlib.metadata import PackageNotFoundError, version

from .config import EngineConfig
from .engine import Directive, Engine, InstructionResult
from .exceptions import InstructionFailed, PetVMError
from .syntax import parse_instruction, parse_script

__all__ = [
    "Engine",
    "EngineConfig",
    "Directive",
    "InstructionResult",
    "PetVMError",
    "InstructionFailed",
    "parse_instruction",
    "parse_script",
]

try:
    __version__ = version("petvm")
except PackageNotFoundError:
    __version__ = "0.0.0+unknown"
