"""Monte Carlo orchestration over stochastic trajectories.

Runs N independent realizations of the noisy dynamics, aggregates fidelity,
overlap, Bures-angle, and raw-state statistics with standard errors, and
provides the pass/fail checks that compare those statistics against the
analytic expectation identities and the fidelity lower bound.

Trajectories are processed in fixed-size batches whose increment streams
depend only on (master seed, trajectory index); batches are reduced in index
order with an exact parallel-moments merge, so results are bitwise
reproducible regardless of thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from noisebound import bounds
from noisebound.qcore import StateVector
from noisebound.sde import (
    NoiseChannel,
    Schedule,
    StepperKind,
    _ideal_states,
    _StepperPlan,
    require_valid_channels,
    time_grid,
    wiener_increments,
)

# Batch size is a fixed constant: deriving it from the worker count would let
# parallelism change the reduction order and break bitwise reproducibility.
_BATCH = 2048

_STDERR_FLOOR = 1e-9


@dataclass(frozen=True)
class EnsembleConfig:
    """Monte Carlo run parameters.

    ``record_grid`` lists the snapshot times for statistics; by default the
    run records 11 evenly spaced times from 0 to T.  Snapshot times are
    snapped to the integration grid.
    """

    n_traj: int
    dt: float
    master_seed: int
    stepper: StepperKind = StepperKind.UNITARY
    record_grid: tuple = ()

    def __post_init__(self):
        if self.n_traj < 2:
            raise ValueError("n_traj must be >= 2 for standard errors to exist")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


@dataclass(frozen=True)
class EnsembleStats:
    """Snapshot statistics of one ensemble run.

    All arrays are indexed by snapshot time.  ``mean_raw_state`` is the
    componentwise average of the un-renormalized state vectors and is only
    populated for the Euler-Maruyama stepper, where the trajectories carry
    the raw Ito process.
    """

    times: np.ndarray
    mean_fidelity: np.ndarray
    stderr_fidelity: np.ndarray
    mean_re_overlap: np.ndarray
    stderr_re_overlap: np.ndarray
    mean_abs_overlap: np.ndarray
    stderr_abs_overlap: np.ndarray
    mean_bures_angle: np.ndarray
    stderr_bures_angle: np.ndarray
    mean_raw_state: np.ndarray | None
    stderr_raw_state: np.ndarray | None
    ideal_states: np.ndarray
    n_traj: int
    dt: float
    master_seed: int
    stepper: StepperKind

    @property
    def final_time(self) -> float:
        return float(self.times[-1])


class _Moments:
    """Streaming mean and scatter with an exact batch merge (Chan's update)."""

    def __init__(self, shape, dtype=float):
        self.n = 0
        self.mean = np.zeros(shape, dtype=dtype)
        self.m2 = np.zeros(shape, dtype=float)

    def merge(self, batch: np.ndarray) -> None:
        nb = batch.shape[0]
        bmean = batch.mean(axis=0)
        bm2 = np.square(np.abs(batch - bmean)).sum(axis=0)
        total = self.n + nb
        delta = bmean - self.mean
        self.mean = self.mean + delta * (nb / total)
        self.m2 = self.m2 + bm2 + np.square(np.abs(delta)) * (self.n * nb / total)
        self.n = total

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.m2, 0.0) / (self.n * (self.n - 1)))


def _record_steps(T: float, n_steps: int, dt: float, record_grid) -> np.ndarray:
    if len(record_grid) == 0:
        times = np.linspace(0.0, T, 11)
    else:
        times = np.asarray(record_grid, dtype=float)
        if times.min() < 0 or times.max() > T * (1 + 1e-12):
            raise ValueError("record_grid times must lie within [0, T]")
    steps = np.unique(np.clip(np.rint(times / dt).astype(np.int64), 0, n_steps))
    return steps


def run_ensemble(
    h: Schedule,
    channels: Sequence[NoiseChannel],
    s0: StateVector,
    T: float,
    cfg: EnsembleConfig,
) -> EnsembleStats:
    """Simulate ``cfg.n_traj`` trajectories and aggregate snapshot statistics.

    The ideal reference |psi(t)> is computed once and shared; fidelity and
    overlap statistics compare each trajectory against it at equal times.
    Identical configurations produce bitwise-identical statistics.
    """
    require_valid_channels(channels)
    if s0.dim != h.dim:
        raise ValueError(f"state dimension {s0.dim} != Hamiltonian dimension {h.dim}")
    n_steps, dt_used = time_grid(T, cfg.dt)
    rec_steps = _record_steps(T, n_steps, dt_used, cfg.record_grid)
    rec_times = rec_steps * dt_used
    ideal = _ideal_states(h, s0, rec_times, dt_used)
    plan = _StepperPlan(h, channels, n_steps, dt_used, cfg.stepper)

    n_rec = rec_steps.size
    fid = _Moments(n_rec)
    re_ov = _Moments(n_rec)
    abs_ov = _Moments(n_rec)
    bures = _Moments(n_rec)
    raw = _Moments((n_rec, s0.dim), dtype=complex) if cfg.stepper is StepperKind.EULER_MARUYAMA else None

    n_chan = len(channels)
    psi0 = s0.amplitudes
    for start in range(0, cfg.n_traj, _BATCH):
        stop = min(start + _BATCH, cfg.n_traj)
        dws = np.empty((stop - start, n_steps, n_chan))
        for i, traj in enumerate(range(start, stop)):
            dws[i] = wiener_increments(cfg.master_seed, traj, n_steps, n_chan, dt_used)
        states = plan.run(psi0, dws, rec_steps)
        overlap = np.einsum("rd,nrd->nr", ideal.conj(), states)
        overlap0 = np.einsum("d,nrd->nr", psi0.conj(), states)
        fid.merge(np.abs(overlap) ** 2)
        re_ov.merge(overlap.real)
        abs_ov.merge(np.abs(overlap))
        bures.merge(np.arccos(np.clip(np.abs(overlap0), 0.0, 1.0)))
        if raw is not None:
            raw.merge(states)

    return EnsembleStats(
        times=rec_times,
        mean_fidelity=fid.mean,
        stderr_fidelity=fid.stderr,
        mean_re_overlap=re_ov.mean,
        stderr_re_overlap=re_ov.stderr,
        mean_abs_overlap=abs_ov.mean,
        stderr_abs_overlap=abs_ov.stderr,
        mean_bures_angle=bures.mean,
        stderr_bures_angle=bures.stderr,
        mean_raw_state=None if raw is None else raw.mean,
        stderr_raw_state=None if raw is None else raw.stderr,
        ideal_states=ideal,
        n_traj=cfg.n_traj,
        dt=dt_used,
        master_seed=cfg.master_seed,
        stepper=cfg.stepper,
    )


@dataclass(frozen=True)
class CheckRow:
    time: float
    observed: float
    expected: float
    stderr: float


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one statistical comparison across snapshot times."""

    name: str
    passed: bool
    tolerance_sigmas: float
    worst_time: float
    worst_excess_sigmas: float
    rows: tuple = field(repr=False, default=())

    def message(self) -> str:
        verdict = "pass" if self.passed else "FAIL"
        return (
            f"{self.name}: {verdict} (worst {self.worst_excess_sigmas:+.2f} sigma beyond "
            f"the {self.tolerance_sigmas:g}-sigma allowance, at t = {self.worst_time:.6g})"
        )


def _report(name, tolerance_sigmas, rows, excesses) -> CheckReport:
    worst = int(np.argmax(excesses))
    return CheckReport(
        name=name,
        passed=bool(excesses[worst] <= 0.0),
        tolerance_sigmas=tolerance_sigmas,
        worst_time=rows[worst].time,
        worst_excess_sigmas=float(excesses[worst]),
        rows=tuple(rows),
    )


def check_overlap_decay(
    stats: EnsembleStats,
    channels: Sequence[NoiseChannel],
    tolerance_sigmas: float = 3.0,
) -> CheckReport:
    """Compare E[Re<psi|phi>] against exp(-(1/2) sum_j integral gamma_j^2).

    Passes iff the absolute difference stays within ``tolerance_sigmas``
    standard errors at every snapshot (with a 1e-9 floor so that exact
    noiseless agreement is not rejected for having zero variance).
    """
    rows, excesses = [], []
    for i, t in enumerate(stats.times):
        action = sum(bounds.integrate_gamma_squared(ch.strength, float(t)) for ch in channels)
        expected = math.exp(-0.5 * action)
        observed = float(stats.mean_re_overlap[i])
        sigma = float(stats.stderr_re_overlap[i])
        allowed = tolerance_sigmas * sigma + _STDERR_FLOOR
        rows.append(CheckRow(float(t), observed, expected, sigma))
        excesses.append((abs(observed - expected) - allowed) / max(sigma, _STDERR_FLOOR))
    return _report("overlap decay", tolerance_sigmas, rows, excesses)


def check_bound(
    stats: EnsembleStats,
    reports: Sequence[bounds.BoundReport],
    tolerance_sigmas: float = 3.0,
) -> CheckReport:
    """Verify E[F(t)] >= F* at every snapshot, up to Monte Carlo error.

    Passes iff mean_fidelity + tolerance_sigmas * stderr >= f_star
    everywhere (1e-12 absolute slack for the exact-equality snapshots).
    """
    if len(reports) != stats.times.size:
        raise ValueError("need one BoundReport per snapshot time")
    rows, excesses = [], []
    for i, (t, rep) in enumerate(zip(stats.times, reports)):
        if abs(rep.t - t) > 1e-9 * max(1.0, stats.final_time):
            raise ValueError(f"bound report at t = {rep.t} does not match snapshot t = {t}")
        observed = float(stats.mean_fidelity[i])
        sigma = float(stats.stderr_fidelity[i])
        shortfall = rep.f_star - (observed + tolerance_sigmas * sigma) - 1e-12
        rows.append(CheckRow(float(t), observed, rep.f_star, sigma))
        excesses.append(shortfall / max(sigma, _STDERR_FLOOR))
    return _report("fidelity lower bound", tolerance_sigmas, rows, excesses)


def check_expectation_state(
    stats: EnsembleStats,
    ideal_final: StateVector,
    channels: Sequence[NoiseChannel],
    tolerance_sigmas: float = 3.0,
) -> CheckReport:
    """Compare E[|phi(T)>] against exp(-(1/2) integral gamma^2) |psi(T)>.

    Requires Euler-Maruyama statistics: the identity concerns the raw Ito
    process, and the unitary stepper's renormalized exponential steps carry
    an O(dt) scheme bias in this average, so it is rejected here.
    """
    if stats.stepper is not StepperKind.EULER_MARUYAMA or stats.mean_raw_state is None:
        raise ValueError(
            "expectation-state check needs raw Euler-Maruyama statistics; "
            "rerun the ensemble with StepperKind.EULER_MARUYAMA"
        )
    t_final = stats.final_time
    action = sum(bounds.integrate_gamma_squared(ch.strength, t_final) for ch in channels)
    expected = math.exp(-0.5 * action) * ideal_final.amplitudes
    observed = stats.mean_raw_state[-1]
    sigma = stats.stderr_raw_state[-1]
    deviation = np.abs(observed - expected)
    allowed = tolerance_sigmas * sigma + _STDERR_FLOOR
    excesses = (deviation - allowed) / np.maximum(sigma, _STDERR_FLOOR)
    rows = [
        CheckRow(t_final, float(np.abs(observed[c])), float(np.abs(expected[c])), float(sigma[c]))
        for c in range(observed.size)
    ]
    worst = int(np.argmax(excesses))
    return CheckReport(
        name="expectation state",
        passed=bool(excesses[worst] <= 0.0),
        tolerance_sigmas=tolerance_sigmas,
        worst_time=t_final,
        worst_excess_sigmas=float(excesses[worst]),
        rows=tuple(rows),
    )
