"""The ``run`` command: execute a script file or a bundled program."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import typer

from petvm.cli.commands import cli_errors, configure_logging
from petvm.engine import Engine, InstructionResult
from petvm.programs import list_programs, load_program

__all__ = ["read_script", "run_command"]


def read_script(script: str) -> str:
    """Source of ``script``, which is either a path or a bundled program name.

    An existing file wins over a bundled program of the same name.
    """
    path = Path(script)
    if path.is_file():
        return path.read_text(encoding="utf-8")
    if script in list_programs():
        return load_program(script)
    raise typer.BadParameter(
        f"{script} is neither a file nor a bundled program (see 'petvm programs')", param_hint="SCRIPT"
    )


def _render(result: InstructionResult, as_json: bool) -> str:
    if as_json:
        return json.dumps(result.to_json())
    return f"{result.index}: {result.value}"


def run_command(
    script: str = typer.Argument(help="Path to a script, or the name of a bundled program"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Seed for the random stream (default: PETVM_SEED)"),
    as_json: bool = typer.Option(True, "--json/--text", help="Print values as JSON lines or as 'index: value'"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Log transitions and directives to stderr"),
) -> None:
    """Run every instruction of a script, printing the value of each ASSUME, PREDICT and SAMPLE."""
    configure_logging(verbose)
    text = read_script(script)
    engine = Engine(seed)
    with cli_errors():
        for result in engine.iter_execute(text):
            if result.has_value:
                typer.echo(_render(result, as_json))
