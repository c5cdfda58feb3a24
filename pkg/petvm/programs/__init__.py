"""Example programs shipped with the package."""

from __future__ import annotations

from importlib import resources

__all__ = ["PROGRAM_SUFFIX", "list_programs", "load_program"]

PROGRAM_SUFFIX = ".vnt"


def list_programs() -> list[str]:
    """Names of the bundled programs, sorted."""
    root = resources.files(__name__)
    return sorted(
        entry.name[: -len(PROGRAM_SUFFIX)] for entry in root.iterdir() if entry.name.endswith(PROGRAM_SUFFIX)
    )


def load_program(name: str) -> str:
    """Source text of a bundled program.

    Raises:
        KeyError: no program is bundled under ``name``.
    """
    if name not in list_programs():
        raise KeyError(f"No bundled program named {name!r}; available: {', '.join(list_programs())}")
    return resources.files(__name__).joinpath(name + PROGRAM_SUFFIX).read_text(encoding="utf-8")
