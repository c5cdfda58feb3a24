"""The ``repl`` command: an interactive session over one engine."""

from __future__ import annotations

import shlex
from pathlib import Path
from typing import Callable, Optional

import typer
from rich.console import Console
from rich.table import Table

from petvm.cli.commands import configure_logging, safe_str
from petvm.engine import Engine
from petvm.exceptions import PetVMError
from petvm.export import export_dot
from petvm.syntax import parse_scope_block

__all__ = ["ReplSession", "repl_command"]

console = Console()

PROMPT = "petvm> "
CONTINUATION_PROMPT = "...    "

HELP_TEXT = """\
Enter instructions such as [ASSUME x (normal 0 1)]; an instruction may span lines.
Meta commands:
  :trace-dot FILE              write the trace as Graphviz DOT
  :scaffold SCOPE BLOCK FILE   write the trace with the scaffold of (SCOPE, BLOCK) highlighted
  :stats                       show node, choice and transition counters
  :seed N                      reseed the random stream
  :help                        show this message
  :quit                        leave the session"""


def _is_complete(text: str) -> bool:
    """True once every opened bracket is closed; comments are ignored."""
    depth = 0
    for line in text.splitlines():
        for ch in line.split(";", 1)[0]:
            if ch == "[":
                depth += 1
            elif ch == "]":
                depth -= 1
    return depth <= 0


class ReplSession:
    """Reads instructions and meta commands line by line and reports on one engine."""

    def __init__(self, engine: Engine, console: Console):
        self.engine = engine
        self.console = console
        self._meta: dict[str, Callable[[list[str]], None]] = {
            ":trace-dot": self._trace_dot,
            ":scaffold": self._scaffold,
            ":stats": self._stats,
            ":seed": self._seed,
            ":help": self._help,
        }

    def run(self, read: Callable[[str], str]) -> None:
        buffer = ""
        while True:
            try:
                line = read(CONTINUATION_PROMPT if buffer else PROMPT)
            except (EOFError, KeyboardInterrupt):
                self.console.print()
                return
            if not buffer and line.strip().startswith(":"):
                if not self.handle_meta(line.strip()):
                    return
                continue
            buffer = f"{buffer}\n{line}" if buffer else line
            if _is_complete(buffer):
                self.execute(buffer)
                buffer = ""

    def execute(self, text: str) -> None:
        """Run the instructions in ``text``, printing values and errors inline."""
        if not text.strip():
            return
        try:
            for result in self.engine.iter_execute(text):
                if result.has_value:
                    self.console.print(f"{result.index}: {safe_str(result.value)}")
        except PetVMError as exc:
            self.console.print(f"[red]{type(exc).__name__}: {safe_str(exc)}[/red]")

    def handle_meta(self, line: str) -> bool:
        """Run one meta command; returns False when the session should end."""
        try:
            words = shlex.split(line)
        except ValueError as exc:
            self.console.print(f"[red]{safe_str(exc)}[/red]")
            return True
        name, args = words[0], words[1:]
        if name in (":quit", ":q", ":exit"):
            return False
        handler = self._meta.get(name)
        if handler is None:
            self.console.print(f"[red]Unknown command {safe_str(name)}; try :help[/red]")
            return True
        try:
            handler(args)
        except PetVMError as exc:
            self.console.print(f"[red]{type(exc).__name__}: {safe_str(exc)}[/red]")
        except (OSError, ValueError) as exc:
            self.console.print(f"[red]{safe_str(exc)}[/red]")
        return True

    def _usage(self, args: list[str], count: int, usage: str) -> bool:
        if len(args) != count:
            self.console.print(f"[yellow]Usage: {usage}[/yellow]")
            return False
        return True

    def _trace_dot(self, args: list[str]) -> None:
        if not self._usage(args, 1, ":trace-dot FILE"):
            return
        Path(args[0]).write_text(self.engine.trace_dot(), encoding="utf-8")
        self.console.print(f"Wrote {safe_str(args[0])}")

    def _scaffold(self, args: list[str]) -> None:
        if not self._usage(args, 3, ":scaffold SCOPE BLOCK FILE"):
            return
        scope, block = parse_scope_block(args[0], args[1])
        scaffold = self.engine.scaffold(scope, block)
        Path(args[2]).write_text(export_dot(self.engine.trace, scaffold), encoding="utf-8")
        self.console.print(
            f"Wrote {safe_str(args[2])} (drg {len(scaffold.drg)}, absorbing {len(scaffold.absorbing)}, "
            f"brush {len(scaffold.brush)})"
        )

    def _stats(self, args: list[str]) -> None:
        table = Table(show_header=True, padding=(0, 2))
        table.add_column("Counter")
        table.add_column("Value", justify="right")
        for key, value in self.engine.stats().items():
            table.add_row(key, str(value))
        self.console.print(table)

    def _seed(self, args: list[str]) -> None:
        if not self._usage(args, 1, ":seed N"):
            return
        self.engine.reseed(int(args[0]))
        self.console.print(f"Seed set to {int(args[0])}")

    def _help(self, args: list[str]) -> None:
        self.console.print(safe_str(HELP_TEXT))


def repl_command(
    seed: Optional[int] = typer.Option(None, "--seed", help="Seed for the random stream (default: PETVM_SEED)"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Log transitions and directives to stderr"),
) -> None:
    """Start an interactive session."""
    configure_logging(verbose)
    console.print("petvm interactive session; :help lists meta commands, :quit or Ctrl-D leaves")
    ReplSession(Engine(seed), console).run(console.input)
