"""CLI command modules."""

from __future__ import annotations

import contextlib
import logging
from collections.abc import Iterator
from typing import Any

import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape

from petvm.exceptions import InstructionFailed, PetVMError

__all__ = ["cli_errors", "configure_logging", "safe_str"]

_console = Console()


def safe_str(value: Any) -> str:
    """Stringify and Rich-escape a value so it renders literally.

    Model values print with square brackets in places (vectors, instruction
    echoes) that Rich would otherwise read as markup.
    """
    return escape(str(value))


def configure_logging(verbose: bool) -> None:
    """Route library logging through Rich on stderr; DEBUG when verbose, WARNING otherwise."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


@contextlib.contextmanager
def cli_errors() -> Iterator[None]:
    """Convert VM errors into a red one-line message and exit code 1.

    ``InstructionFailed`` already carries the directive index in its text, so
    it is printed as is; anything else is prefixed with its class name.
    """
    try:
        yield
    except InstructionFailed as exc:
        _console.print(f"[red]Error: {safe_str(exc)}[/red]")
        raise typer.Exit(1) from exc
    except PetVMError as exc:
        _console.print(f"[red]{type(exc).__name__}: {safe_str(exc)}[/red]")
        raise typer.Exit(1) from exc
