"""Time evolution: ideal Schroedinger propagation and Ito stochastic trajectories.

The noisy state obeys the Ito stochastic Schroedinger equation

    d|phi> = -(i H(t) dt + (gamma^2(t)/2) dt + i B(t) dW(t)) |phi>,

with independent Wiener increments per noise channel (dW^2 = dt) and noise
generators constrained by the local-noise condition B(t)^2 = gamma(t)^2 I.
Two steppers are provided: a norm-conserving unitary-exponential update
exp(-i(H dt + sum_j B_j dW_j)), which agrees with the Ito equation to
O(dt^(3/2)), and a raw Euler-Maruyama update that keeps the un-renormalized
Ito process (needed when averaging the raw state vector).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from noisebound import _kernels
from noisebound.qcore import HermitianOperator, StateVector, expm_hermitian

NOISE_CONDITION_TOL = 1e-8

_DOMAIN_TOL = 1e-9


class StepperKind(enum.Enum):
    UNITARY = "unitary"
    EULER_MARUYAMA = "em"


@dataclass(frozen=True)
class Schedule:
    """Time profile on [0, T]: a Hamiltonian/noise generator or a noise strength.

    kind
        "constant": one value on [0, T].
        "piecewise": left-continuous segments between strictly increasing
        boundaries covering [0, T]; evaluation uses the segment containing t.
        "sampled": values on a strictly increasing time grid starting at 0;
        evaluation interpolates linearly between samples.

    Values are either all ``HermitianOperator`` (same dimension) or all
    nonnegative floats (noise strengths, gamma >= 0).
    """

    kind: str
    times: np.ndarray
    values: tuple

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = tuple(self.values)
        if self.kind not in ("constant", "piecewise", "sampled"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if times.ndim != 1 or times.size < 2:
            raise ValueError("schedule needs at least a start and end time")
        if times[0] != 0.0:
            raise ValueError("schedule must start at t = 0")
        if np.any(np.diff(times) <= 0):
            raise ValueError("schedule times must be strictly increasing")
        expected = times.size - 1 if self.kind in ("constant", "piecewise") else times.size
        if len(values) != expected:
            raise ValueError(f"schedule has {len(values)} values, expected {expected}")
        if all(isinstance(v, HermitianOperator) for v in values):
            dims = {v.dim for v in values}
            if len(dims) != 1:
                raise ValueError("schedule operators must share one dimension")
        else:
            try:
                values = tuple(float(v) for v in values)
            except (TypeError, ValueError):
                raise ValueError("schedule values must be HermitianOperator or floats") from None
            if any(v < 0 for v in values):
                raise ValueError("noise strengths must satisfy gamma(t) >= 0")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        self.times.setflags(write=False)

    @classmethod
    def constant(cls, value, duration: float) -> "Schedule":
        return cls("constant", np.array([0.0, float(duration)]), (value,))

    @classmethod
    def piecewise(cls, boundaries, values) -> "Schedule":
        return cls("piecewise", np.asarray(boundaries, dtype=float), tuple(values))

    @classmethod
    def sampled(cls, times, values) -> "Schedule":
        return cls("sampled", np.asarray(times, dtype=float), tuple(values))

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    @property
    def is_operator(self) -> bool:
        return isinstance(self.values[0], HermitianOperator)

    @property
    def dim(self) -> int:
        if not self.is_operator:
            raise ValueError("scalar schedule has no operator dimension")
        return self.values[0].dim

    def _check_domain(self, t: float) -> float:
        tol = _DOMAIN_TOL * max(1.0, self.duration)
        if t < -tol or t > self.duration + tol:
            raise ValueError(f"time {t} outside schedule domain [0, {self.duration}]")
        return min(max(t, 0.0), self.duration)

    def at(self, t: float):
        """Value at time t (left-continuous for piecewise segments)."""
        t = self._check_domain(t)
        if self.kind == "constant":
            return self.values[0]
        if self.kind == "piecewise":
            i = int(np.searchsorted(self.times, t, side="right")) - 1
            return self.values[min(max(i, 0), len(self.values) - 1)]
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        i = min(max(i, 0), self.times.size - 2)
        w = (t - self.times[i]) / (self.times[i + 1] - self.times[i])
        a, b = self.values[i], self.values[i + 1]
        if self.is_operator:
            return HermitianOperator((1.0 - w) * a.entries + w * b.entries)
        return (1.0 - w) * a + w * b

    def sup(self, t: float) -> float:
        """Largest scalar value attained on [0, t]."""
        if self.is_operator:
            raise ValueError("sup is defined for strength schedules only")
        t = self._check_domain(t)
        if self.kind == "constant":
            return self.values[0]
        vals = np.asarray(self.values, dtype=float)
        if self.kind == "piecewise":
            last = int(np.searchsorted(self.times, t, side="left"))
            return max(float(vals[: max(1, last)].max()), float(self.at(t)))
        # linear interpolation attains its extrema at the sample points
        inside = self.times <= t + _DOMAIN_TOL * max(1.0, self.duration)
        sup = float(vals[inside].max()) if inside.any() else 0.0
        return max(sup, float(self.at(t)))


@dataclass(frozen=True)
class NoiseChannel:
    """Stochastic noise term: generator B(t) and its strength profile gamma(t).

    The generator carries the full operator including strength, e.g.
    B = gamma * S_x; the separate strength schedule is what the analytic
    bounds integrate and what the local-noise condition B^2 = gamma^2 I
    is validated against.
    """

    generator: Schedule
    strength: Schedule

    def __post_init__(self):
        if not self.generator.is_operator:
            raise ValueError("channel generator must be an operator schedule")
        if self.strength.is_operator:
            raise ValueError("channel strength must be a scalar schedule")
        if abs(self.generator.duration - self.strength.duration) > _DOMAIN_TOL:
            raise ValueError("generator and strength schedules must cover the same [0, T]")

    @classmethod
    def constant(cls, generator: HermitianOperator, gamma: float, duration: float) -> "NoiseChannel":
        return cls(Schedule.constant(generator, duration), Schedule.constant(float(gamma), duration))

    @property
    def dim(self) -> int:
        return self.generator.dim

    @property
    def duration(self) -> float:
        return self.generator.duration


@dataclass(frozen=True)
class NoiseValidation:
    """Worst deviation from B(t)^2 = gamma(t)^2 I over the sampled times."""

    ok: bool
    max_deviation: float
    worst_time: float
    tolerance: float

    def message(self) -> str:
        verdict = "satisfies" if self.ok else "violates"
        return (
            f"noise channel {verdict} B(t)^2 = gamma(t)^2 I: "
            f"max deviation {self.max_deviation:.3e} at t = {self.worst_time:.6g} "
            f"(tolerance {self.tolerance:.1e})"
        )


class NoiseConditionError(ValueError):
    """Raised when a channel violates the local-noise condition."""

    def __init__(self, report: NoiseValidation):
        super().__init__(report.message())
        self.report = report


def validate_noise(channel: NoiseChannel, n_samples: int = 101) -> NoiseValidation:
    """Check B(t)^2 = gamma(t)^2 I at uniformly spaced times.

    Returns the worst deviation and where it occurs; ``ok`` is False when the
    deviation exceeds ``NOISE_CONDITION_TOL``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    times = np.linspace(0.0, channel.duration, n_samples)
    eye = np.eye(channel.dim)
    worst, worst_t = 0.0, 0.0
    for t in times:
        b = channel.generator.at(t).entries
        g = channel.strength.at(t)
        dev = float(np.max(np.abs(b @ b - g * g * eye)))
        if dev > worst:
            worst, worst_t = dev, float(t)
    return NoiseValidation(worst <= NOISE_CONDITION_TOL, worst, worst_t, NOISE_CONDITION_TOL)


def require_valid_channels(channels: Sequence[NoiseChannel], n_samples: int = 101) -> None:
    for ch in channels:
        report = validate_noise(ch, n_samples)
        if not report.ok:
            raise NoiseConditionError(report)


@dataclass(frozen=True)
class Trajectory:
    """One stochastic realization on a fixed time grid.

    ``states[k]`` is the state after k steps; ``increments[k, j]`` is channel
    j's Wiener increment over step k (Gaussian, mean 0, variance dt).  The
    pair (seed, trajectory_index) fully determines the realization.
    """

    times: np.ndarray
    states: np.ndarray
    increments: np.ndarray
    seed: int
    trajectory_index: int

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def trajectory_seed(master_seed: int, trajectory_index: int) -> np.random.SeedSequence:
    """Substream key for one trajectory: a pure function of (seed, index)."""
    return np.random.SeedSequence(master_seed, spawn_key=(trajectory_index,))


def wiener_increments(
    master_seed: int, trajectory_index: int, n_steps: int, n_channels: int, dt: float
) -> np.ndarray:
    """Independent Gaussian increments, shape (n_steps, n_channels), variance dt.

    Drawn from a counter-based Philox stream keyed by (master_seed,
    trajectory_index), so the result never depends on execution order or on
    how trajectories are batched.
    """
    gen = np.random.Generator(np.random.Philox(trajectory_seed(master_seed, trajectory_index)))
    return gen.standard_normal((n_steps, n_channels)) * math.sqrt(dt)


def time_grid(T: float, dt: float) -> tuple[int, float]:
    """Number of steps and the snapped step size dividing [0, T] exactly."""
    if T <= 0:
        raise ValueError("T must be positive")
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = max(1, int(round(T / dt)))
    return n, T / n


def _operator_tables(schedule: Schedule, lefts: np.ndarray):
    """Lookup table (S,d,d) plus per-step indices for left-endpoint evaluation."""
    if schedule.kind == "constant":
        table = schedule.values[0].entries[None, :, :]
        idx = np.zeros(lefts.size, dtype=np.int64)
    elif schedule.kind == "piecewise":
        table = np.stack([v.entries for v in schedule.values])
        idx = np.clip(
            np.searchsorted(schedule.times, lefts, side="right") - 1, 0, len(schedule.values) - 1
        ).astype(np.int64)
    else:
        table = np.stack([schedule.at(t).entries for t in lefts])
        idx = np.arange(lefts.size, dtype=np.int64)
    return np.ascontiguousarray(table, dtype=np.complex128), idx


def _scalar_steps(schedule: Schedule, lefts: np.ndarray) -> np.ndarray:
    if schedule.kind == "constant":
        return np.full(lefts.size, schedule.values[0], dtype=float)
    if schedule.kind == "piecewise":
        idx = np.clip(
            np.searchsorted(schedule.times, lefts, side="right") - 1, 0, len(schedule.values) - 1
        )
        return np.asarray(schedule.values, dtype=float)[idx]
    return np.array([schedule.at(t) for t in lefts], dtype=float)


class _StepperPlan:
    """Precomputed step tables for one (H, channels, grid, stepper) combination."""

    def __init__(
        self,
        h: Schedule,
        channels: Sequence[NoiseChannel],
        n_steps: int,
        dt: float,
        kind: StepperKind,
    ):
        if not h.is_operator:
            raise ValueError("Hamiltonian schedule must be operator-valued")
        T = n_steps * dt
        tol = _DOMAIN_TOL * max(1.0, T)
        if h.duration < T - tol:
            raise ValueError(f"Hamiltonian schedule covers [0, {h.duration}], needs [0, {T}]")
        for ch in channels:
            if ch.duration < T - tol:
                raise ValueError("noise channel schedule does not cover [0, T]")
            if ch.dim != h.dim:
                raise ValueError(f"channel dimension {ch.dim} != Hamiltonian dimension {h.dim}")
        self.kind = kind
        self.dim = h.dim
        self.n_steps = n_steps
        self.n_channels = len(channels)
        self.dt = dt
        lefts = np.arange(n_steps) * dt
        h_tab, h_idx = _operator_tables(h, lefts)

        b_tabs, b_idxs = [], []
        for ch in channels:
            tab, idx = _operator_tables(ch.generator, lefts)
            b_tabs.append(-1j * tab)
            b_idxs.append(idx)
        if channels:
            s_max = max(t.shape[0] for t in b_tabs)
            self._b_tab = np.zeros((len(channels), s_max, self.dim, self.dim), dtype=np.complex128)
            for j, tab in enumerate(b_tabs):
                self._b_tab[j, : tab.shape[0]] = tab
            self._b_idx = np.stack(b_idxs)
        else:
            self._b_tab = np.zeros((0, 1, self.dim, self.dim), dtype=np.complex128)
            self._b_idx = np.zeros((0, n_steps), dtype=np.int64)

        if kind is StepperKind.UNITARY:
            self._a_tab = -1j * dt * h_tab
            self._a_idx = h_idx
        else:
            # Euler-Maruyama drift I - (i H + sum_j gamma_j^2/2 I) dt, deduplicated
            # over the combined (H segment, strengths) key per step.
            g2 = np.stack([_scalar_steps(ch.strength, lefts) ** 2 for ch in channels]) if channels else np.zeros((0, n_steps))
            key = np.column_stack([h_idx.astype(float), g2.T]) if channels else h_idx[:, None].astype(float)
            uniq, inverse = np.unique(key, axis=0, return_inverse=True)
            eye = np.eye(self.dim, dtype=np.complex128)
            drift = np.empty((uniq.shape[0], self.dim, self.dim), dtype=np.complex128)
            for s, row in enumerate(uniq):
                h_mat = h_tab[int(row[0])]
                g2sum = float(row[1:].sum())
                drift[s] = eye - (1j * h_mat + 0.5 * g2sum * eye) * dt
            self._a_tab = drift
            self._a_idx = inverse.astype(np.int64)

    def run(self, psi0: np.ndarray, dws: np.ndarray, record_steps: np.ndarray) -> np.ndarray:
        """Advance a batch; returns states of shape (n_batch, n_records, dim)."""
        n_batch = dws.shape[0]
        if dws.shape[1] != self.n_steps or dws.shape[2] != self.n_channels:
            raise ValueError("increment array shape does not match the plan")
        out = np.empty((n_batch, record_steps.size, self.dim), dtype=np.complex128)
        kernel = (
            _kernels.unitary_batch
            if self.kind is StepperKind.UNITARY
            else _kernels.euler_maruyama_batch
        )
        kernel(
            self._a_tab,
            self._a_idx,
            self._b_tab,
            self._b_idx,
            np.ascontiguousarray(dws),
            np.ascontiguousarray(psi0, dtype=np.complex128),
            np.ascontiguousarray(record_steps, dtype=np.int64),
            out,
        )
        return out


def _ideal_states(h: Schedule, s0: StateVector, times: Sequence[float], dt: float) -> np.ndarray:
    """Ideal |psi(t)> at the requested times, shape (len(times), dim).

    Constant and piecewise schedules use one exact exponential per segment;
    sampled schedules step at size dt with left-endpoint evaluation.
    """
    if not h.is_operator:
        raise ValueError("Hamiltonian schedule must be operator-valued")
    times = np.asarray(times, dtype=float)
    tol = _DOMAIN_TOL * max(1.0, h.duration)
    if times.size and (times.min() < -tol or times.max() > h.duration + tol):
        raise ValueError(f"requested times outside schedule domain [0, {h.duration}]")
    out = np.empty((times.size, h.dim), dtype=np.complex128)

    if h.kind in ("constant", "piecewise"):
        boundaries = h.times
        order = np.argsort(times)
        u_acc = np.eye(h.dim, dtype=complex)
        seg = 0
        seg_start = 0.0
        for pos in order:
            t = min(max(float(times[pos]), 0.0), h.duration)
            while seg + 1 < len(h.values) and boundaries[seg + 1] <= t:
                u_acc = (
                    expm_hermitian(h.values[seg], -1j * (boundaries[seg + 1] - seg_start)) @ u_acc
                )
                seg += 1
                seg_start = float(boundaries[seg])
            u_t = expm_hermitian(h.values[seg], -1j * (t - seg_start)) @ u_acc
            out[pos] = u_t @ s0.amplitudes
        return out

    t_max = float(times.max()) if times.size else 0.0
    if t_max == 0.0:
        out[:] = s0.amplitudes
        return out
    n, dt_used = time_grid(t_max, dt)
    steps = np.rint(times / dt_used).astype(int)
    psi = s0.amplitudes.copy()
    for k in range(n + 1):
        hits = np.nonzero(steps == k)[0]
        if hits.size:
            out[hits] = psi
        if k < n:
            psi = expm_hermitian(h.at(k * dt_used), -1j * dt_used) @ psi
    return out


def ideal_propagate(h: Schedule, s0: StateVector, T: float, dt: float) -> StateVector:
    """Integrate d|psi>/dt = -i H(t) |psi> from 0 to T.

    Exact (single exponential per constant segment) for constant and
    piecewise schedules; first-order stepping at size dt for sampled ones.
    """
    if T < 0:
        raise ValueError("T must be nonnegative")
    if T == 0:
        return s0
    amps = _ideal_states(h, s0, [T], dt)[0]
    return StateVector(amps)


def noisy_step(
    state,
    h: HermitianOperator,
    channels: Sequence[tuple[HermitianOperator, float]],
    dt: float,
    dWs: Sequence[float],
    kind: StepperKind,
) -> np.ndarray:
    """One reference step of the noisy dynamics; returns raw amplitudes.

    ``channels`` holds (B_j, gamma_j) pairs evaluated at the step's left
    endpoint.  The unitary kind applies exp(-i(H dt + sum_j B_j dW_j)) and
    conserves the norm; the Euler-Maruyama kind applies the raw Ito update
    without renormalization.
    """
    if len(dWs) != len(channels):
        raise ValueError(f"got {len(dWs)} increments for {len(channels)} channels")
    amps = state.amplitudes if isinstance(state, StateVector) else np.asarray(state, dtype=complex)
    if kind is StepperKind.UNITARY:
        gen = h * dt
        for (b, _), dw in zip(channels, dWs):
            gen = gen + b * float(dw)
        return expm_hermitian(gen, -1j) @ amps
    drift = -1j * h.entries @ amps
    decay = sum(g * g for _, g in channels)
    new = amps + (drift - 0.5 * decay * amps) * dt
    for (b, _), dw in zip(channels, dWs):
        new = new - 1j * float(dw) * (b.entries @ amps)
    return new


def simulate_trajectory(
    h: Schedule,
    channels: Sequence[NoiseChannel],
    s0: StateVector,
    T: float,
    dt: float,
    seed: int,
    kind: StepperKind = StepperKind.UNITARY,
    trajectory_index: int = 0,
) -> Trajectory:
    """One stochastic realization, recorded at every grid point.

    The increment stream is a pure function of (seed, trajectory_index), so
    repeated calls are bitwise identical and ensemble runs can batch
    trajectories in any order.  Raises ``NoiseConditionError`` if a channel
    violates the local-noise condition.
    """
    require_valid_channels(channels)
    if s0.dim != h.dim:
        raise ValueError(f"state dimension {s0.dim} != Hamiltonian dimension {h.dim}")
    n, dt_used = time_grid(T, dt)
    plan = _StepperPlan(h, channels, n, dt_used, kind)
    dws = wiener_increments(seed, trajectory_index, n, len(channels), dt_used)
    states = plan.run(s0.amplitudes, dws[None, :, :], np.arange(n + 1, dtype=np.int64))[0]
    return Trajectory(
        times=np.linspace(0.0, T, n + 1),
        states=states,
        increments=dws,
        seed=int(seed),
        trajectory_index=int(trajectory_index),
    )
