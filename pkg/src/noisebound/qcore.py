"""Dense complex linear algebra for small quantum systems.

States, Hermitian operators, Pauli constructions, tensor products, and the
handful of scalar functionals (fidelity, Bures angle, variance) that the
simulation and bound machinery is built on.  Everything is dense and
immutable; the systems of interest are a few qubits at most.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Validation thresholds.  These guard construction of domain objects; they
# are numerical-hygiene limits, not physical parameters.
NORM_TOL = 1e-10
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10

_PAULI = {
    "I": np.array([[1, 0], [0, 1]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

_KET_CHARS = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "-": np.array([1, -1], dtype=complex) / np.sqrt(2),
}


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StateVector:
    """Normalized pure state in a d-dimensional Hilbert space.

    The constructor validates normalization to within ``NORM_TOL``; raw
    (un-normalized) vectors such as ensemble averages are handled as plain
    arrays elsewhere, never as ``StateVector`` instances.
    """

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.size < 2:
            raise ValueError(f"state must be a vector of dim >= 2, got shape {amps.shape}")
        nrm = np.linalg.norm(amps)
        if abs(nrm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized: |norm - 1| = {abs(nrm - 1.0):.3e}")
        object.__setattr__(self, "amplitudes", _freeze(amps))

    @classmethod
    def normalized(cls, amplitudes) -> "StateVector":
        """Build a state from any nonzero vector by rescaling it."""
        amps = np.asarray(amplitudes, dtype=complex)
        nrm = np.linalg.norm(amps)
        if nrm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(amps / nrm)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def overlap(self, other: "StateVector") -> complex:
        """Inner product <self|other>."""
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class HermitianOperator:
    """d x d Hermitian matrix (Hamiltonians, noise generators, observables)."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator must be square, got shape {m.shape}")
        dev = np.max(np.abs(m - m.conj().T))
        if dev > HERMITIAN_TOL:
            raise ValueError(f"operator is not Hermitian: max deviation {dev:.3e}")
        object.__setattr__(self, "entries", _freeze(m))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __add__(self, other: "HermitianOperator") -> "HermitianOperator":
        return HermitianOperator(self.entries + other.entries)

    def __sub__(self, other: "HermitianOperator") -> "HermitianOperator":
        return HermitianOperator(self.entries - other.entries)

    def __mul__(self, scalar: float) -> "HermitianOperator":
        # Hermiticity is only closed under real scaling.
        if isinstance(scalar, complex) and scalar.imag != 0:
            raise ValueError("scaling a Hermitian operator requires a real factor")
        return HermitianOperator(self.entries * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "HermitianOperator":
        return HermitianOperator(-self.entries)

    def apply(self, state: StateVector) -> np.ndarray:
        """Matrix-vector product; returns raw amplitudes."""
        if self.dim != state.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {state.dim}")
        return self.entries @ state.amplitudes

    def expectation(self, state: StateVector) -> float:
        """<s|op|s>, real for Hermitian operators."""
        return float(np.real(np.vdot(state.amplitudes, self.apply(state))))


@dataclass(frozen=True)
class DensityMatrix:
    """Positive-semidefinite unit-trace matrix; here always a pure-state projector."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(m)
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"density matrix trace {tr} is not 1")
        if np.linalg.eigvalsh(m).min() < -PSD_TOL:
            raise ValueError("density matrix has a negative eigenvalue")
        object.__setattr__(self, "entries", _freeze(m))

    @classmethod
    def from_state(cls, state: StateVector) -> "DensityMatrix":
        return cls(np.outer(state.amplitudes, state.amplitudes.conj()))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def pauli(which: str) -> HermitianOperator:
    """One of the 2x2 Pauli matrices X, Y, Z, or the identity I.

    Basis convention: |0> = [1, 0]^T, |1> = [0, 1]^T, with
    X = |0><1| + |1><0|, Y = i(|1><0| - |0><1|), Z = |0><0| - |1><1|.
    """
    key = which.strip().upper()
    if key not in _PAULI:
        raise ValueError(f"unknown Pauli name {which!r}; expected one of I, X, Y, Z")
    return HermitianOperator(_PAULI[key])


def identity(dim: int) -> HermitianOperator:
    return HermitianOperator(np.eye(dim, dtype=complex))


def tensor(a, b):
    """Kronecker product of two operators or two states.

    The first factor addresses the leftmost (most significant) qubit:
    ``tensor(X, I)`` flips the first qubit of a two-qubit register.
    """
    if isinstance(a, HermitianOperator) and isinstance(b, HermitianOperator):
        return HermitianOperator(np.kron(a.entries, b.entries))
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        return StateVector(np.kron(a.amplitudes, b.amplitudes))
    raise TypeError("tensor expects two HermitianOperator or two StateVector arguments")


def ket(label: str) -> StateVector:
    """Product state from a character string, e.g. ket("1"), ket("+0").

    Characters: '0', '1', '+' = (|0>+|1>)/sqrt(2), '-' = (|0>-|1>)/sqrt(2).
    The leftmost character is the most significant qubit, matching the
    ``tensor`` ordering.
    """
    if not label:
        raise ValueError("ket label must be nonempty")
    amps = np.array([1.0], dtype=complex)
    for ch in label:
        if ch not in _KET_CHARS:
            raise ValueError(f"invalid ket character {ch!r}; expected 0, 1, + or -")
        amps = np.kron(amps, _KET_CHARS[ch])
    return StateVector(amps)


def fidelity(a: StateVector, b: StateVector) -> float:
    """Squared overlap |<a|b>|^2 between two normalized states.

    Symmetric in its arguments and invariant under a global phase on
    either one.  Raises ``ValueError`` on dimension mismatch.
    """
    return abs(a.overlap(b)) ** 2


def bures_angle(a: StateVector, b: StateVector) -> float:
    """arccos|<a|b>|, the geodesic angle between pure states, in [0, pi/2].

    The overlap magnitude is clamped to [0, 1] before the arccos so that
    rounding slightly above 1 cannot produce NaN.
    """
    return float(np.arccos(min(1.0, abs(a.overlap(b)))))


def variance(op: HermitianOperator, state: StateVector) -> float:
    """<s|op^2|s> - <s|op|s>^2, floored at zero against rounding."""
    if op.dim != state.dim:
        raise ValueError(f"dimension mismatch: {op.dim} vs {state.dim}")
    vec = op.entries @ state.amplitudes
    second = float(np.real(np.vdot(vec, vec)))
    first = float(np.real(np.vdot(state.amplitudes, vec)))
    return max(0.0, second - first**2)


def expm_hermitian(h: HermitianOperator, scale: complex) -> np.ndarray:
    """exp(scale * h) for Hermitian h, via eigendecomposition.

    Exact up to floating point for Hermitian input; for purely imaginary
    ``scale`` the result is unitary to the same accuracy.

    Parameters
    ----------
    h : HermitianOperator
        Matrix to exponentiate.
    scale : complex
        Scalar multiplier inside the exponential, e.g. ``-1j * dt``.

    Returns
    -------
    np.ndarray
        Dense d x d complex matrix exp(scale * h).
    """
    w, v = np.linalg.eigh(h.entries)
    return (v * np.exp(scale * w)) @ v.conj().T
