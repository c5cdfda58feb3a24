"""Main entry point for the petvm CLI."""

from __future__ import annotations

import typer
from rich.console import Console

from .commands import safe_str
from .commands.repl import repl_command
from .commands.run import run_command

app = typer.Typer(
    name="petvm",
    help="petvm - run probabilistic programs and their inference instructions",
    no_args_is_help=True,
)
console = Console()


def _print_version() -> None:
    from petvm import __version__

    typer.echo(f"petvm {__version__}")


def _version_callback(value: bool) -> None:
    """Handle --version and exit early."""
    if value:
        _print_version()
        raise typer.Exit()


@app.callback()
def main(
    version: bool = typer.Option(
        False,
        "--version",
        help="Show the CLI version and exit.",
        callback=_version_callback,
        is_eager=True,
    ),
) -> None:
    """petvm CLI root callback."""


@app.command()
def version() -> None:
    """Show the CLI version."""
    _print_version()


@app.command()
def programs() -> None:
    """List the bundled example programs."""
    from petvm.programs import list_programs

    for name in list_programs():
        console.print(safe_str(name))


app.command("run")(run_command)
app.command("repl")(repl_command)


if __name__ == "__main__":
    app()
