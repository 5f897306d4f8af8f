# SPDX-License-Identifier: MIT

"""rich rendering of run details, residual tables and warnings."""

import warnings

from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from ..core.core_basics import DispersiveGuardWarning
from ..core.effective import EffectiveSystem, RateFit
from .config import format_float
from .sweep import SweepPoint


def _fmt(value: float | None) -> str:
    return "-" if value is None else f"{value:.6g}"


class CLIConsole:
    """Console for displaying run progress and results."""

    def __init__(self, console: Console | None = None):
        self.console: Console = console or Console()

    def print(self, message: str, color: str = "blue", bold: bool = False):
        message = f"[bold]{message}[/bold]" if bold else message
        message = f"[{color}]{message}[/{color}]"
        self.console.print(message)

    def print_run_details(
        self,
        command: str,
        model: str,
        config_file: str | None,
        output_dir: str,
        order: int,
        apply_rwa: bool,
        vacuum: str | None,
    ):
        self.console.print(
            Panel(
                f"""[bold]Command:[/bold] {command}
[bold]Model:[/bold] {model}
[bold]Config File:[/bold] {config_file or "-"}
[bold]Output Directory:[/bold] {output_dir}
[bold]Truncation Order:[/bold] {order}
[bold]RWA:[/bold] {"on" if apply_rwa else "off"}
[bold]Vacuum Reduction:[/bold] {vacuum or "none"}""",
                title="Run Details",
                border_style="blue",
            )
        )

    def print_residuals(self, title: str, residuals: dict[str, float], tol: float | None = None):
        table = Table(title=title)
        table.add_column("Check", style="cyan")
        table.add_column("Residual", style="green")
        if tol is not None:
            table.add_column("Status")
        for name, value in residuals.items():
            row = [name, _fmt(value)]
            if tol is not None:
                row.append("[green]pass[/green]" if value <= tol else "[red]fail[/red]")
            table.add_row(*row)
        self.console.print(table)

    def print_dissipators(self, eff: EffectiveSystem, fits: list[RateFit]):
        table = Table(title=f"Effective dissipators (epsilon = {format_float(eff.epsilon)})")
        table.add_column("Order", style="cyan")
        table.add_column("Label")
        table.add_column("Kind")
        table.add_column("Closed-form rate", style="green")
        table.add_column("Derived rate", style="green")
        table.add_column("Printed rate", style="yellow")
        derived = {f.label: f for f in fits}
        for d in eff.dissipators:
            fit = derived.get(d.label)
            table.add_row(
                str(d.order_tag.value),
                d.label + (" *" if d.partially_resonant else ""),
                d.kind.value,
                _fmt(d.rate),
                _fmt(fit.derived_rate if fit else None),
                _fmt(fit.printed_rate if fit else None),
            )
        self.console.print(table)

    def print_sweep(self, points: list[SweepPoint], slopes: dict[str, float]):
        table = Table(title="Epsilon sweep")
        for column in ("epsilon", "H residual", "rate fit", "dynamics error", "status"):
            table.add_column(column)
        for p in sorted(points, key=lambda p: p.index):
            status = "[green]ok[/green]" if p.success else f"[red]{p.error}[/red]"
            table.add_row(*(_fmt(v) for v in p.row()), status)
        self.console.print(table)
        self.print_residuals("Log-log slopes", slopes)

    def print_warnings(self, caught: list[warnings.WarningMessage]):
        if not caught:
            return
        lines = [
            f"[{'magenta' if issubclass(w.category, DispersiveGuardWarning) else 'yellow'}]"
            f"{w.category.__name__}[/]: {w.message}"
            for w in caught
        ]
        self.console.print(Panel("\n".join(lines), title="Warnings", border_style="yellow"))

    def print_error(self, message: str, exit_code: int):
        self.console.print(
            Panel(f"[red]{message}[/red]", title=f"Error (exit {exit_code})", border_style="red")
        )
