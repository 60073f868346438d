"""The two experiments: a step-size sweep at fixed final time and a
long-time integration at fixed step size.

Both compare a run-precision integration against a reference of the same
scheme at the same step size in a much wider format, which isolates
truncation error; the analytic solution then splits total error into
truncation and round-off channels.  The full-scale version (T = 1e4 with
steps down to 1e-7, i.e. 1e11 steps) is not desk-feasible in emulated
arithmetic; the default sweep is scaled to T = 100, where the V shape of
total error versus step size survives because it is set by the balance of
per-step round-off against dt**order, not by T.

Sweep legs are independent and may run in worker processes; records are
assembled in descending-dt order, so output is deterministic regardless of
scheduling.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .analysis import error_separation
from .fpcore import PrecisionConfig, QUAD, SINGLE
from .oscillator import OscillatorParams, analytic_solution, _as_fraction
from .schemes import (
    SamplingPlan,
    Scheme,
    Trajectory,
    integrate,
    integrate_pair,
    num_steps,
)

STATUS_OK = "ok"
STATUS_SKIPPED_GUARD = "skipped_guard"

DESK_DT_LIST = tuple(
    Fraction(s) for s in ("1e-1", "3e-2", "1e-2", "3e-3", "1e-3", "3e-4", "1e-4", "3e-5", "1e-5")
)
DESK_MAX_STEPS = 20_000_000


@dataclass(frozen=True, slots=True)
class SweepConfig:
    """Configuration of a step-size sweep."""

    scheme: Scheme = Scheme.MIDPOINT_IMPLICIT
    params: OscillatorParams = OscillatorParams()
    t_end: Fraction = Fraction(100)
    dt_list: tuple[Fraction, ...] = DESK_DT_LIST
    run_precision: PrecisionConfig = SINGLE
    ref_precision: PrecisionConfig = QUAD
    max_steps: int = DESK_MAX_STEPS

    def __post_init__(self):
        object.__setattr__(self, "t_end", _as_fraction(self.t_end))
        object.__setattr__(self, "dt_list", tuple(_as_fraction(dt) for dt in self.dt_list))
        if self.ref_precision.significand_bits <= self.run_precision.significand_bits:
            raise ValueError("reference precision must be strictly wider than run precision")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        if not self.dt_list:
            raise ValueError("dt_list is empty")
        if any(dt <= 0 for dt in self.dt_list):
            raise ValueError("step sizes must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass(frozen=True, slots=True)
class SweepRecord:
    """One sweep row: error norms at t_end for one step size.  Error fields
    are None when the leg was skipped by the step-count guard."""

    dt: Fraction
    n_steps: int
    e_total: Optional[Fraction]
    e_trunc: Optional[Fraction]
    e_round: Optional[Fraction]
    wall_time_s: float
    status: str = STATUS_OK


@dataclass(frozen=True, slots=True)
class TimeSeriesRecord:
    """One long-run row: round-off and truncation error norms at time t."""

    t: Fraction
    e_round: Fraction
    e_trunc: Fraction


def reference_trajectory(
    scheme: Scheme,
    params: OscillatorParams,
    dt,
    t_end,
    ref_precision: PrecisionConfig,
    sampling: SamplingPlan = SamplingPlan.final_only(),
    max_steps: int = DESK_MAX_STEPS,
) -> Trajectory:
    """Same scheme, same dt, wide precision: the truncation-only channel."""
    return integrate(scheme, params, dt, t_end, ref_precision, sampling, max_steps)


def _sweep_leg(cfg: SweepConfig, dt: Fraction) -> SweepRecord:
    n = num_steps(cfg.t_end, dt)
    if n < 1 or n > cfg.max_steps:
        return SweepRecord(dt, n, None, None, None, 0.0, STATUS_SKIPPED_GUARD)
    started = time.perf_counter()
    run, ref = integrate_pair(
        cfg.scheme, cfg.params, dt, cfg.t_end,
        cfg.run_precision, cfg.ref_precision,
        SamplingPlan.final_only(), cfg.max_steps,
    )
    triple = error_separation(
        run.final_state, ref.final_state, analytic_solution(cfg.params, run.final_state.t)
    )
    wall = time.perf_counter() - started
    return SweepRecord(
        dt, n, triple.total.norm, triple.truncation.norm, triple.roundoff.norm, wall
    )


def stepsize_sweep(cfg: SweepConfig, jobs: Optional[int] = None) -> list[SweepRecord]:
    """Run every leg of the sweep and return records in descending-dt order.

    ``jobs`` > 1 runs legs in worker processes; the data columns of the
    result do not depend on jobs.  Guard-tripped legs are reported with
    status=skipped_guard rather than failing the sweep.
    """
    dts = sorted(set(cfg.dt_list), reverse=True)
    if jobs is None:
        jobs = 1
    if jobs <= 1 or len(dts) == 1:
        return [_sweep_leg(cfg, dt) for dt in dts]
    workers = min(jobs, len(dts), os.cpu_count() or 1)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        records = list(pool.map(_sweep_leg, [cfg] * len(dts), dts))
    return records


def _sample_steps(n: int, count: int, spacing: str) -> tuple[int, ...]:
    if spacing == "linear":
        raw = (round(i * n / count) for i in range(1, count + 1))
    elif spacing == "log":
        raw = (round(n ** (i / count)) for i in range(1, count + 1))
    else:
        raise ValueError(f"spacing must be 'linear' or 'log', got {spacing!r}")
    steps = sorted({max(1, s) for s in raw} | {n})
    return tuple(steps)


def longtime_run(
    scheme: Scheme,
    params: OscillatorParams,
    dt,
    t_end,
    run_precision: PrecisionConfig,
    ref_precision: PrecisionConfig,
    sample_count: int,
    spacing: str = "log",
    max_steps: int = DESK_MAX_STEPS,
) -> list[TimeSeriesRecord]:
    """Integrate run and reference in lockstep, recording the round-off and
    truncation error norms at ``sample_count`` log- or linearly-spaced
    times."""
    if sample_count < 2:
        raise ValueError("sample_count must be >= 2")
    if ref_precision.significand_bits <= run_precision.significand_bits:
        raise ValueError("reference precision must be strictly wider than run precision")
    dt = _as_fraction(dt)
    t_end = _as_fraction(t_end)
    n = num_steps(t_end, dt)
    steps = _sample_steps(max(n, 1), sample_count, spacing)
    run, ref = integrate_pair(
        scheme, params, dt, t_end, run_precision, ref_precision,
        SamplingPlan.at(steps), max_steps,
    )
    out = []
    for (i, s_run), (j, s_ref) in zip(run.samples, ref.samples):
        assert i == j
        if i == 0:
            continue
        triple = error_separation(s_run, s_ref, analytic_solution(params, s_run.t))
        out.append(TimeSeriesRecord(s_run.t, triple.roundoff.norm, triple.truncation.norm))
    return out
