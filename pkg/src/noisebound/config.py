"""Custom-model config files.

Flat ``key = value`` text with ``#`` comments and four section kinds::

    [hamiltonian]
    term = -0.5 X@X          # coefficient, then a Pauli tensor string
    term = -0.5 Y@Y
    term = -0.5 Z@Z

    [channel.1]
    operator = X@I           # noise generator direction, a Pauli string
    gamma = sweep            # or a fixed nonnegative number

    [control]
    initial = +0             # ket label: one of 0 1 + - per qubit
    duration = 1.5707963267948966
    gammas = 0.1, 0.2, 0.3   # sweep grid; required iff some gamma = sweep
    name = custom            # CSV row label (optional)

    [ensemble]
    n_traj = 10000           # optional overrides
    dt = 0.00078539816339745
    seed = 7
    stepper = unitary        # or em

Operators are Pauli tensor strings (``@`` separates factors); channel
operators may also be sums of such strings, e.g. ``X@I + I@X``, which are
then accepted or rejected by the local-noise validation at run time.
Parse errors carry the offending line number.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from noisebound.presets import DEFAULT_N_TRAJ, DEFAULT_SEED, DEFAULT_STEPS, _validate_gamma_grid
from noisebound.qcore import HermitianOperator, StateVector, ket, pauli, tensor
from noisebound.sde import NoiseChannel, Schedule, StepperKind


class ConfigError(ValueError):
    """Config file problem, annotated with the line it came from."""

    def __init__(self, message: str, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")
        self.line = line


@dataclass
class _ChannelSpec:
    operator: HermitianOperator | None = None
    gamma: float | str | None = None
    line: int = 0


@dataclass
class ModelSpec:
    """Parsed custom model, ready to drive a sweep."""

    hamiltonian: HermitianOperator
    initial: StateVector
    duration: float
    channel_ops: tuple  # of (operator, gamma_mode) with gamma_mode float | "sweep"
    gammas: tuple  # sweep grid; single-entry grid for fully fixed channels
    label: str
    n_traj: int
    dt: float
    seed: int | None
    stepper: StepperKind

    @property
    def dim(self) -> int:
        return self.hamiltonian.dim

    def hamiltonian_schedule(self) -> Schedule:
        return Schedule.constant(self.hamiltonian, self.duration)

    def channels(self, gamma: float) -> list:
        out = []
        for op, mode in self.channel_ops:
            g = gamma if mode == "sweep" else float(mode)
            out.append(NoiseChannel.constant(g * op, g, self.duration))
        return out


def parse_pauli_string(text: str, line: int | None = None) -> HermitianOperator:
    """Tensor product of Pauli factors, e.g. "X", "X@I", "X@X"."""
    factors = [f.strip().upper() for f in text.split("@")]
    try:
        op = pauli(factors[0])
        for name in factors[1:]:
            op = tensor(op, pauli(name))
    except ValueError as exc:
        raise ConfigError(f"bad Pauli string {text!r}: {exc}", line) from None
    return op


def parse_operator_sum(text: str, line: int | None = None) -> HermitianOperator:
    """Sum of Pauli strings, e.g. "X@I + I@X".

    Sums are accepted so that candidate noise generators can be written down
    and then accepted or rejected by the local-noise validation.
    """
    terms = [parse_pauli_string(tok, line) for tok in text.split("+")]
    dims = {t.dim for t in terms}
    if len(dims) != 1:
        raise ConfigError(f"operator terms in {text!r} act on different dimensions", line)
    return HermitianOperator(sum(t.entries for t in terms))


def _parse_lines(text: str):
    """Yield (line_number, section, key, value) for every assignment."""
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if not section:
                raise ConfigError("empty section name", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        if section is None:
            raise ConfigError("assignment before any [section] header", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        yield lineno, section, key.lower(), value


def _as_float(value: str, key: str, line: int) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {value!r}", line) from None


def _as_int(value: str, key: str, line: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {value!r}", line) from None


def parse_model_text(text: str) -> ModelSpec:
    terms: list = []
    channels: dict[str, _ChannelSpec] = {}
    control: dict = {}
    ensemble: dict = {}

    for lineno, section, key, value in _parse_lines(text):
        if section == "hamiltonian":
            if key != "term":
                raise ConfigError(f"[hamiltonian] only accepts 'term' lines, got {key!r}", lineno)
            parts = value.split(None, 1)
            if len(parts) != 2:
                raise ConfigError("term needs a coefficient and a Pauli string", lineno)
            coeff = _as_float(parts[0], "term coefficient", lineno)
            terms.append((coeff, parse_pauli_string(parts[1], lineno)))
        elif section.startswith("channel."):
            spec = channels.setdefault(section[len("channel."):], _ChannelSpec(line=lineno))
            if key == "operator":
                spec.operator = parse_operator_sum(value, lineno)
            elif key == "gamma":
                spec.gamma = "sweep" if value.lower() == "sweep" else _as_float(value, "gamma", lineno)
                if spec.gamma != "sweep" and spec.gamma < 0:
                    raise ConfigError("gamma must be nonnegative", lineno)
            else:
                raise ConfigError(f"unknown channel key {key!r}", lineno)
        elif section == "control":
            if key not in ("initial", "duration", "gammas", "name"):
                raise ConfigError(f"unknown [control] key {key!r}", lineno)
            control[key] = (value, lineno)
        elif section == "ensemble":
            if key not in ("n_traj", "dt", "seed", "stepper"):
                raise ConfigError(f"unknown [ensemble] key {key!r}", lineno)
            ensemble[key] = (value, lineno)
        else:
            raise ConfigError(f"unknown section [{section}]", lineno)

    if not terms:
        raise ConfigError("missing [hamiltonian] section with at least one term")
    dims = {op.dim for _, op in terms}
    if len(dims) != 1:
        raise ConfigError("hamiltonian terms act on different dimensions")
    h = HermitianOperator(sum(c * op.entries for c, op in terms))

    if "initial" not in control:
        raise ConfigError("[control] needs an 'initial' state")
    if "duration" not in control:
        raise ConfigError("[control] needs a 'duration'")
    value, lineno = control["initial"]
    try:
        initial = ket(value)
    except ValueError as exc:
        raise ConfigError(str(exc), lineno) from None
    if initial.dim != h.dim:
        raise ConfigError(
            f"initial state dimension {initial.dim} != hamiltonian dimension {h.dim}", lineno
        )
    value, lineno = control["duration"]
    duration = _as_float(value, "duration", lineno)
    if duration <= 0:
        raise ConfigError("duration must be positive", lineno)

    channel_ops = []
    any_sweep = False
    for name in sorted(channels, key=lambda s: channels[s].line):
        spec = channels[name]
        if spec.operator is None:
            raise ConfigError(f"[channel.{name}] is missing an operator", spec.line)
        if spec.gamma is None:
            raise ConfigError(f"[channel.{name}] is missing a gamma", spec.line)
        if spec.operator.dim != h.dim:
            raise ConfigError(
                f"[channel.{name}] operator dimension {spec.operator.dim} != {h.dim}", spec.line
            )
        any_sweep = any_sweep or spec.gamma == "sweep"
        channel_ops.append((spec.operator, spec.gamma))

    if "gammas" in control:
        value, lineno = control["gammas"]
        try:
            gammas = tuple(float(tok) for tok in value.replace(",", " ").split())
            _validate_gamma_grid(gammas)
        except ValueError as exc:
            raise ConfigError(f"bad gammas list: {exc}", lineno) from None
        if not any_sweep and channel_ops:
            raise ConfigError("gammas given but no channel has gamma = sweep", lineno)
    else:
        if any_sweep:
            raise ConfigError("a channel uses gamma = sweep but [control] has no gammas list")
        fixed = [g for _, g in channel_ops if g != "sweep"]
        gammas = (float(fixed[0]) if fixed else 0.0,)

    label = control.get("name", ("custom", 0))[0]

    n_traj = DEFAULT_N_TRAJ
    if "n_traj" in ensemble:
        n_traj = _as_int(ensemble["n_traj"][0], "n_traj", ensemble["n_traj"][1])
    dt = duration / DEFAULT_STEPS
    if "dt" in ensemble:
        dt = _as_float(ensemble["dt"][0], "dt", ensemble["dt"][1])
        if dt <= 0:
            raise ConfigError("dt must be positive", ensemble["dt"][1])
    seed = None
    if "seed" in ensemble:
        seed = _as_int(ensemble["seed"][0], "seed", ensemble["seed"][1])
    stepper = StepperKind.UNITARY
    if "stepper" in ensemble:
        value, lineno = ensemble["stepper"]
        try:
            stepper = StepperKind(value.lower())
        except ValueError:
            raise ConfigError(f"stepper must be 'unitary' or 'em', got {value!r}", lineno) from None

    return ModelSpec(
        hamiltonian=h,
        initial=initial,
        duration=duration,
        channel_ops=tuple(channel_ops),
        gammas=gammas,
        label=label,
        n_traj=n_traj,
        dt=dt,
        seed=seed,
        stepper=stepper,
    )


def parse_model_file(path) -> ModelSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_model_text(fh.read())
