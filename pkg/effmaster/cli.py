# SPDX-License-Identifier: MIT

"""Command Line Interface for effmaster."""

import asyncio
import inspect
import sys
import warnings
from collections.abc import Callable
from pathlib import Path

import click
from dotenv import load_dotenv
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from . import __version__
from .core import presets_registry
from .core.core_basics import EngineError
from .core.deformed_su2 import DeformedAlgebra
from .pipeline import (
    PRESET_DEFAULTS,
    build_model,
    derive,
    evolve,
    exit_code_for,
    oracle_sweep,
    record_derivation,
    record_evolution,
    record_verification,
    verify,
)
from .utils.cli_console import CLIConsole
from .utils.config import DEFAULT_CONFIG_FILE, Config, format_float, resolve_config_value
from .utils.run_recorder import RunRecorder
from .utils.sweep import SweepRunner, aggregate, log_log_slope

# Load environment variables
_ = load_dotenv()

console = Console()

VERIFY_TOL = 1e-12


def load_config(config_file: str = DEFAULT_CONFIG_FILE, out: str | None = None) -> Config:
    """Read the config file and apply CLI / environment overrides for the output directory and step."""
    config = Config(config_file)
    overrides: dict[str, str] = {}
    resolved_out = resolve_config_value(out, config.run.outputs.dir, "EFFMASTER_OUT")
    if resolved_out is not None:
        overrides["outputs.dir"] = str(resolved_out)
    resolved_dt = resolve_config_value(None, config.run.evolve.dt, "EFFMASTER_DT")
    if resolved_dt is not None:
        overrides["evolve.dt"] = format_float(float(resolved_dt))
    return config.with_overrides(**overrides)


def _load_or_exit(config_file: str, out: str | None = None) -> Config:
    try:
        return load_config(config_file, out)
    except EngineError as e:
        console.print(f"[red]Invalid configuration: {e.message}[/red]")
        sys.exit(1)


def execute(
    command: str,
    config: Config,
    body: Callable[[RunRecorder, CLIConsole], int],
    order: int | None = None,
    rwa: bool | None = None,
    vacuum: str | None = None,
) -> int:
    """Run one command with recording, warning capture and exit-code mapping."""
    run = config.run
    out_dir = Path(run.outputs.dir)
    cli_console = CLIConsole(console)
    cli_console.print_run_details(
        command,
        run.model.name,
        config.config_file,
        str(out_dir),
        order or run.flags.truncation_order,
        run.flags.apply_rwa if rwa is None else rwa,
        vacuum or run.flags.vacuum_reduction,
    )
    recorder = RunRecorder(out_dir, config.header_lines())
    recorder.start_recording(command)
    exit_code = 0
    error: str | None = None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            exit_code = body(recorder, cli_console)
        except EngineError as e:
            exit_code = exit_code_for(e)
            error = e.message
            cli_console.print_error(f"{type(e).__name__}: {e.message}", exit_code)
    for w in caught:
        recorder.record_warning(f"{w.category.__name__}: {w.message}")
    cli_console.print_warnings(caught)
    recorder.finalize_recording(exit_code == 0, exit_code, error)
    if exit_code == 0:
        console.print(f"\n[green]Outputs written to: {out_dir}[/green]")
    return exit_code


def run_options(func: Callable[..., None]) -> Callable[..., None]:
    """Options shared by every run command."""
    func = click.option(
        "--vacuum-reduce",
        "vacuum",
        help="Put this factor (index or name) in vacuum and trace it out",
    )(func)
    func = click.option("--rwa/--no-rwa", default=None, help="Apply the rotating-wave filter")(func)
    func = click.option("--order", type=click.IntRange(1, 2), help="Truncation order in epsilon")(func)
    func = click.option("--out", help="Output directory (or set EFFMASTER_OUT)")(func)
    func = click.option(
        "--config", "config_file", help="Path to configuration file", default=DEFAULT_CONFIG_FILE
    )(func)
    return func


@click.group()
@click.version_option(version=__version__)
def cli():
    """effmaster - effective Hamiltonians and master equations from small nonlinear rotations."""
    pass


@cli.command(name="verify")
@run_options
def verify_cmd(
    config_file: str,
    out: str | None = None,
    order: int | None = None,
    rwa: bool | None = None,
    vacuum: str | None = None,
):
    """Check the deformed su(2) relations and extract the structure polynomial."""
    config = _load_or_exit(config_file, out)

    def body(recorder: RunRecorder, cli_console: CLIConsole) -> int:
        _, alg = build_model(config.run)
        result = verify(alg, config.run.flags.max_degree)
        record_verification(recorder, result)
        cli_console.print_residuals("Algebra residuals", result.residuals.as_dict(), VERIFY_TOL)
        if result.algebra is not None:
            _print_blocks(result.algebra)
            cli_console.print_residuals(
                "Polynomial reconstruction", {"max block residual": result.reconstruction}
            )
        if not result.passed:
            cli_console.print(f"Verification failed: {result.error}", "red", bold=True)
            return 1
        return 0

    sys.exit(execute("verify", config, body, order, rwa, vacuum))


def _print_blocks(alg: DeformedAlgebra):
    table = Table(title="Structure polynomial per N-block")
    table.add_column("N", style="cyan")
    table.add_column("Coefficients (ascending)", style="green")
    table.add_column("Fit residual")
    for block in alg.blocks:
        coeffs = (
            ", ".join(f"{c:.6g}" for c in block.poly_coeffs)
            if block.fitted
            else "[yellow]truncation tainted[/yellow]"
        )
        table.add_row(f"{block.n_value:g}", coeffs, f"{block.fit_residual:.3g}")
    console.print(table)


@cli.command(name="derive")
@run_options
def derive_cmd(
    config_file: str,
    out: str | None = None,
    order: int | None = None,
    rwa: bool | None = None,
    vacuum: str | None = None,
):
    """Derive the effective Hamiltonian and dissipators."""
    config = _load_or_exit(config_file, out)

    def body(recorder: RunRecorder, cli_console: CLIConsole) -> int:
        result = derive(config.run, order, rwa, vacuum)
        record_derivation(recorder, result)
        cli_console.print_dissipators(result.effective, result.rate_fits)
        cli_console.print_residuals(
            "Oracle residuals",
            {
                "hamiltonian": result.hamiltonian_residual,
                "spectral": result.spectral_residual,
                "rate fit": result.rate_fit_residual,
                "guard ratio": result.guard_ratio,
            },
        )
        couplings = config.run.sweep.g
        if couplings:
            rows = oracle_sweep(config, couplings)
            eps = [abs(r[0]) for r in rows]
            slope = log_log_slope(eps, [r[1] for r in rows])
            spectral_slope = log_log_slope(eps, [r[2] for r in rows])
            recorder.write_csv(
                "oracle_sweep.csv",
                ["epsilon", "hamiltonian_residual", "spectral_residual"],
                rows,
                [f"hamiltonian_slope = {format_float(slope)}",
                 f"spectral_slope = {format_float(spectral_slope)}"],
            )
            cli_console.print_residuals(
                "Oracle log-log slopes", {"hamiltonian": slope, "spectral": spectral_slope}
            )
        return 0

    sys.exit(execute("derive", config, body, order, rwa, vacuum))


@cli.command(name="evolve")
@run_options
def evolve_cmd(
    config_file: str,
    out: str | None = None,
    order: int | None = None,
    rwa: bool | None = None,
    vacuum: str | None = None,
):
    """Integrate the exact and effective master equations and compare them."""
    config = _load_or_exit(config_file, out)

    def body(recorder: RunRecorder, cli_console: CLIConsole) -> int:
        derivation = derive(config.run, order, rwa, vacuum)
        record_derivation(recorder, derivation)
        result = evolve(config.run, derivation)
        record_evolution(recorder, result)
        final = result.comparison_rows[-1]
        cli_console.print_residuals(
            f"Comparison at t = {final[0]:.6g}",
            {"trace distance": final[1], "guard ratio": final[2]},
        )
        return 0

    sys.exit(execute("evolve", config, body, order, rwa, vacuum))


@cli.command(name="sweep")
@run_options
def sweep_cmd(
    config_file: str,
    out: str | None = None,
    order: int | None = None,
    rwa: bool | None = None,
    vacuum: str | None = None,
):
    """Run derive + evolve over `sweep.g` concurrently and fit log-log slopes."""
    config = _load_or_exit(config_file, out)

    def body(recorder: RunRecorder, cli_console: CLIConsole) -> int:
        couplings = config.run.sweep.g
        if not couplings:
            raise EngineError("sweep.g is empty; give a comma list of couplings")
        runner = SweepRunner(config, recorder.output_dir, order, rwa, vacuum)
        workers = config.run.sweep.workers
        if workers > 1:
            points = asyncio.run(runner.parallel_run(couplings, workers))
        else:
            points = asyncio.run(runner.sequential_run(couplings))
        slopes = aggregate(recorder, points)
        cli_console.print_sweep(points, slopes)
        return max((p.exit_code for p in points), default=0)

    sys.exit(execute("sweep", config, body, order, rwa, vacuum))


@cli.command()
@click.option("--config", "config_file", help="Path to configuration file", default=DEFAULT_CONFIG_FILE)
def show_config(config_file: str):
    """Show the canonical configuration, defaults included."""
    if not Path(config_file).exists():
        console.print(
            Panel(
                f"""[yellow]No configuration file found at: {config_file}[/yellow]

Using default settings and environment variables.""",
                title="Configuration Status",
                border_style="yellow",
            )
        )
    config = _load_or_exit(config_file)

    table = Table(title="Configuration")
    table.add_column("Key", style="cyan")
    table.add_column("Value", style="green")
    for key, value in sorted(config.flat().items()):
        table.add_row(key, value)
    console.print(table)


@cli.command()
def presets():
    """Show available model presets and their default parameters."""
    table = Table(title="Available Presets")
    table.add_column("Preset", style="cyan")
    table.add_column("Parameters", style="green")
    table.add_column("Description")

    for name, preset in presets_registry.items():
        params = [p for p in inspect.signature(preset).parameters if p != "guard_threshold"]
        defaults = PRESET_DEFAULTS[name]
        table.add_row(
            name,
            ", ".join(f"{p}={defaults[p]:g}" if p in defaults else p for p in params),
            (inspect.getdoc(preset) or "").splitlines()[0] if inspect.getdoc(preset) else "",
        )
    console.print(table)


def main():
    """Main entry point for the CLI."""
    cli()


if __name__ == "__main__":
    main()
