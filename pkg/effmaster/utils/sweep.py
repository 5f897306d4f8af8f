# SPDX-License-Identifier: MIT

"""Concurrent epsilon sweeps: one worker per coupling value, sequential aggregation."""

import asyncio
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..core.core_basics import EngineError, EngineWarning
from ..pipeline import derive, evolve, exit_code_for, record_derivation, record_evolution
from .config import Config, format_float
from .run_recorder import RunRecorder

SWEEP_COLUMNS = ["epsilon", "hamiltonian_residual", "dissipator_rate_fit", "dynamics_error_at_T"]


@dataclass
class SweepPoint:
    index: int
    g: float
    epsilon: float = float("nan")
    hamiltonian_residual: float = float("nan")
    dissipator_rate_fit: float = float("nan")
    dynamics_error_at_T: float = float("nan")
    error: str | None = None
    exit_code: int = 0

    @property
    def success(self) -> bool:
        return self.error is None

    def row(self) -> list[float]:
        return [
            self.epsilon,
            self.hamiltonian_residual,
            self.dissipator_rate_fit,
            self.dynamics_error_at_T,
        ]


def log_log_slope(x: list[float], y: list[float]) -> float:
    """Least-squares slope of log y against log x; nan with fewer than two usable points."""
    pairs = [(a, b) for a, b in zip(x, y, strict=True) if a > 0 and b > 0 and math.isfinite(b)]
    if len({a for a, _ in pairs}) < 2:
        return float("nan")
    lx = np.log([a for a, _ in pairs])
    ly = np.log([b for _, b in pairs])
    return float(np.polyfit(lx, ly, 1)[0])


def is_monotone_decreasing(values: list[float]) -> bool:
    finite = [v for v in values if math.isfinite(v)]
    return all(b <= a for a, b in zip(finite, finite[1:]))


class SweepRunner:
    """Runs derive + evolve for each coupling value of `sweep.g` in worker threads."""

    def __init__(
        self,
        config: Config,
        output_dir: str | Path,
        order: int | None = None,
        apply_rwa: bool | None = None,
        vacuum: str | None = None,
        dt: float | None = None,
    ):
        self.config: Config = config
        self.output_dir: Path = Path(output_dir)
        self.order: int | None = order
        self.apply_rwa: bool | None = apply_rwa
        self.vacuum: str | None = vacuum
        self.dt: float | None = dt
        self._semaphore: asyncio.Semaphore | None = None

    def compute_point(self, index: int, g: float) -> SweepPoint:
        """Derive and evolve one point, writing into its own `point_<index>` directory."""
        point = SweepPoint(index=index, g=g)
        config = self.config.with_overrides(**{"model.g": format_float(g)})
        recorder = RunRecorder(self.output_dir / f"point_{index}", config.header_lines())
        recorder.start_recording(f"sweep point {index}")
        try:
            derivation = derive(config.run, self.order, self.apply_rwa, self.vacuum)
            point.epsilon = derivation.effective.epsilon
            point.hamiltonian_residual = derivation.hamiltonian_residual
            point.dissipator_rate_fit = derivation.max_rate_error()
            record_derivation(recorder, derivation)
            evolution = evolve(config.run, derivation, self.dt)
            point.dynamics_error_at_T = evolution.final_trace_distance
            record_evolution(recorder, evolution)
        except EngineError as e:
            point.error = e.message
            point.exit_code = exit_code_for(e)
            recorder.finalize_recording(False, point.exit_code, e.message)
            return point
        recorder.finalize_recording(True, 0)
        return point

    async def run_point(self, index: int, g: float) -> SweepPoint:
        assert self._semaphore is not None
        async with self._semaphore:
            return await asyncio.to_thread(self.compute_point, index, g)

    async def parallel_run(self, couplings: list[float], workers: int) -> list[SweepPoint]:
        """Execute sweep points in parallel"""
        self._semaphore = asyncio.Semaphore(workers)
        return await asyncio.gather(
            *[self.run_point(i, g) for i, g in enumerate(couplings)]
        )

    async def sequential_run(self, couplings: list[float]) -> list[SweepPoint]:
        """Execute sweep points in sequence"""
        return [self.compute_point(i, g) for i, g in enumerate(couplings)]


def aggregate(recorder: RunRecorder, points: list[SweepPoint]) -> dict[str, float]:
    """Write `sweep.csv` and `slopes.csv`; returns the fitted slopes."""
    ordered = sorted(points, key=lambda p: p.index)
    recorder.write_csv(
        "sweep.csv", [*SWEEP_COLUMNS, "error"], [[*p.row(), p.error or ""] for p in ordered]
    )
    eps = [abs(p.epsilon) for p in ordered]
    slopes = {
        name: log_log_slope(eps, [p.row()[k] for p in ordered])
        for k, name in enumerate(SWEEP_COLUMNS)
        if k > 0
    }
    if len(ordered) < 2:
        warnings.warn(
            "sweep has a single point; slopes are undefined and written as nan",
            EngineWarning,
            stacklevel=2,
        )
    by_eps = sorted((p for p in ordered if p.success), key=lambda p: abs(p.epsilon))
    monotone = is_monotone_decreasing([p.dynamics_error_at_T for p in reversed(by_eps)])
    recorder.write_csv(
        "slopes.csv",
        ["quantity", "slope"],
        list(slopes.items()),
        [f"dynamics_error_monotone_in_epsilon = {'true' if monotone else 'false'}"],
    )
    return slopes
