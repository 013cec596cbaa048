"""Built-in experiment presets.

Each preset fixes a control Hamiltonian, an initial state, a control time
T = pi/(2u), and one or more noise-channel layouts swept over a gamma grid:

  fig1a       qubit bit flip |1> -> |0> under H = u S_y, noise gamma S_x
  fig1b       same control with two noises gamma S_x and gamma S_z
  fig2a       two-qubit SWAP under the exchange Hamiltonian, run twice per
              gamma with local noise gamma S_x (x) I and global noise
              gamma S_x (x) S_x
  fig2b       SWAP with the two local noises gamma S_x (x) I and gamma I (x) S_x
  qsl-report  the qubit bit flip on a small gamma grid including zero,
              intended for the speed-limit report
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from noisebound.qcore import HermitianOperator, StateVector, ket, pauli, tensor
from noisebound.sde import NoiseChannel, Schedule, StepperKind

DEFAULT_GAMMA_GRID = tuple(round(0.1 * k, 10) for k in range(1, 16))
DEFAULT_N_TRAJ = 10_000
DEFAULT_SEED = 0
DEFAULT_STEPS = 2000  # dt = T / 2000 unless overridden


@dataclass(frozen=True)
class ExperimentPreset:
    """A named sweep: physical setup plus ensemble defaults.

    ``variants`` are noise layouts run per gamma; single-layout presets
    have one unlabeled variant.
    """

    name: str
    gamma_grid: tuple
    u: float
    n_traj: int
    dt: float | None  # None means T / DEFAULT_STEPS
    seed: int
    stepper: StepperKind
    hamiltonian: Callable[[float], HermitianOperator]
    initial: Callable[[], StateVector]
    variants: tuple  # of (label, channel_builder(gamma, u, T) -> list[NoiseChannel])

    def duration(self) -> float:
        return float(np.pi / (2.0 * self.u))

    def step_size(self) -> float:
        return self.dt if self.dt is not None else self.duration() / DEFAULT_STEPS

    def hamiltonian_schedule(self) -> Schedule:
        return Schedule.constant(self.hamiltonian(self.u), self.duration())

    def channels(self, gamma: float, label: str) -> list:
        for variant_label, builder in self.variants:
            if variant_label == label:
                return builder(gamma, self.duration())
        raise ValueError(f"preset {self.name} has no variant {label!r}")

    def row_label(self, variant: str) -> str:
        return f"{self.name}-{variant}" if variant else self.name


def _qubit_hamiltonian(u: float) -> HermitianOperator:
    return u * pauli("Y")


def _swap_hamiltonian(u: float) -> HermitianOperator:
    xx = tensor(pauli("X"), pauli("X"))
    yy = tensor(pauli("Y"), pauli("Y"))
    zz = tensor(pauli("Z"), pauli("Z"))
    return -0.5 * u * (xx + yy + zz)


def _single(op: HermitianOperator) -> Callable:
    def build(gamma: float, duration: float):
        return [NoiseChannel.constant(gamma * op, gamma, duration)]

    return build


def _pair(op1: HermitianOperator, op2: HermitianOperator) -> Callable:
    def build(gamma: float, duration: float):
        return [
            NoiseChannel.constant(gamma * op1, gamma, duration),
            NoiseChannel.constant(gamma * op2, gamma, duration),
        ]

    return build


def _registry() -> dict:
    x, z = pauli("X"), pauli("Z")
    eye = pauli("I")
    x1 = tensor(x, eye)
    x2 = tensor(eye, x)
    xx = tensor(x, x)
    common = dict(
        gamma_grid=DEFAULT_GAMMA_GRID,
        u=1.0,
        n_traj=DEFAULT_N_TRAJ,
        dt=None,
        seed=DEFAULT_SEED,
        stepper=StepperKind.UNITARY,
    )
    return {
        "fig1a": ExperimentPreset(
            name="fig1a",
            hamiltonian=_qubit_hamiltonian,
            initial=lambda: ket("1"),
            variants=(("", _single(x)),),
            **common,
        ),
        "fig1b": ExperimentPreset(
            name="fig1b",
            hamiltonian=_qubit_hamiltonian,
            initial=lambda: ket("1"),
            variants=(("", _pair(x, z)),),
            **common,
        ),
        "fig2a": ExperimentPreset(
            name="fig2a",
            hamiltonian=_swap_hamiltonian,
            initial=lambda: ket("+0"),
            variants=(("local", _single(x1)), ("global", _single(xx))),
            **common,
        ),
        "fig2b": ExperimentPreset(
            name="fig2b",
            hamiltonian=_swap_hamiltonian,
            initial=lambda: ket("+0"),
            variants=(("", _pair(x1, x2)),),
            **common,
        ),
        "qsl-report": ExperimentPreset(
            name="qsl-report",
            hamiltonian=_qubit_hamiltonian,
            initial=lambda: ket("1"),
            variants=(("", _single(x)),),
            **{**common, "gamma_grid": (0.0, 0.25, 0.5, 1.0)},
        ),
    }


PRESET_NAMES = tuple(_registry().keys())


def get_preset(
    name: str,
    gamma_grid: Sequence[float] | None = None,
    u: float | None = None,
    n_traj: int | None = None,
    dt: float | None = None,
    seed: int | None = None,
    stepper: StepperKind | None = None,
) -> ExperimentPreset:
    """Look up a preset by name, applying any overrides."""
    registry = _registry()
    if name not in registry:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    preset = registry[name]
    overrides = {
        k: v
        for k, v in dict(
            gamma_grid=None if gamma_grid is None else tuple(float(g) for g in gamma_grid),
            u=u,
            n_traj=n_traj,
            dt=dt,
            seed=seed,
            stepper=stepper,
        ).items()
        if v is not None
    }
    preset = replace(preset, **overrides)
    _validate_gamma_grid(preset.gamma_grid)
    if preset.u <= 0:
        raise ValueError("u must be positive")
    return preset


def _validate_gamma_grid(grid: Sequence[float]) -> None:
    if len(grid) == 0:
        raise ValueError("gamma grid must be nonempty")
    if any(g < 0 for g in grid):
        raise ValueError("gamma values must be nonnegative")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("gamma grid must be strictly increasing")
