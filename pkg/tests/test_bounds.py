import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisebound.bounds import (
    BoundReport,
    control_time_lower_bound,
    fidelity_lower_bound,
    fidelity_lower_bound_profile,
    gamma_max_bound,
    integrate_gamma_squared,
    qsl_time,
)
from noisebound.qcore import ket, pauli, tensor
from noisebound.sde import NoiseChannel, Schedule

T = math.pi / 2


# ------------------------------------------------------------- integration


def test_integral_zero_strength():
    assert integrate_gamma_squared(Schedule.constant(0.0, T), T) == 0.0


def test_integral_constant_closed_form():
    assert integrate_gamma_squared(Schedule.constant(0.5, T), T) == pytest.approx(
        0.25 * T, abs=1e-15
    )
    assert integrate_gamma_squared(Schedule.constant(0.5, T), T) == pytest.approx(0.392699, abs=1e-6)
    assert integrate_gamma_squared(Schedule.constant(1.0, T), T) == pytest.approx(T, abs=1e-15)


def test_integral_piecewise_partial_segment():
    sched = Schedule.piecewise([0.0, 1.0, 3.0], [1.0, 2.0])
    assert integrate_gamma_squared(sched, 0.5) == pytest.approx(0.5)
    assert integrate_gamma_squared(sched, 2.0) == pytest.approx(1.0 + 4.0)
    assert integrate_gamma_squared(sched, 3.0) == pytest.approx(1.0 + 8.0)


def test_integral_outside_domain():
    with pytest.raises(ValueError, match="domain"):
        integrate_gamma_squared(Schedule.constant(1.0, T), 2 * T)


def test_integral_sampled_matches_analytic():
    # gamma(t) = t sampled densely: integral of t^2 is t^3/3, and the
    # per-segment Simpson rule is exact for the quadratic integrand
    times = np.linspace(0.0, 2.0, 41)
    sched = Schedule.sampled(times, times)
    assert integrate_gamma_squared(sched, 2.0) == pytest.approx(8.0 / 3.0, rel=1e-12)
    assert integrate_gamma_squared(sched, 1.3) == pytest.approx(1.3**3 / 3.0, rel=1e-10)


def test_integral_sampled_vs_piecewise_consistency():
    # a flat profile expressed both ways must agree to closed form
    flat_pw = Schedule.piecewise([0.0, 1.0], [0.8])
    flat_sm = Schedule.sampled([0.0, 0.5, 1.0], [0.8, 0.8, 0.8])
    a = integrate_gamma_squared(flat_pw, 1.0)
    b = integrate_gamma_squared(flat_sm, 1.0)
    assert a == pytest.approx(0.64, rel=1e-12)
    assert b == pytest.approx(a, rel=1e-10)


# ------------------------------------------------------------------ bounds


def test_bound_equality_at_zero_time():
    rep = fidelity_lower_bound([Schedule.constant(0.9, T)], 0.0)
    assert rep.f_star == 1.0
    assert rep.integral_gamma_sq == 0.0


def test_bound_single_channel_qubit_point():
    rep = fidelity_lower_bound([Schedule.constant(0.5, T)], T)
    assert rep.f_star == pytest.approx(math.exp(-0.25 * T), rel=1e-14)
    assert rep.gamma_max == pytest.approx(0.5)


def test_bound_two_equal_channels():
    one = fidelity_lower_bound([Schedule.constant(0.5, T)], T)
    two = fidelity_lower_bound([Schedule.constant(0.5, T)] * 2, T)
    assert two.f_star == pytest.approx(one.f_star**2, rel=1e-12)
    assert two.per_channel == (one.integral_gamma_sq,) * 2


def test_bound_report_invariant():
    with pytest.raises(ValueError, match="inconsistent"):
        BoundReport(f_star=0.5, integral_gamma_sq=0.1, gamma_max=1.0, t=1.0, per_channel=(0.1,))


def test_channel_additivity_is_exact_product():
    a = Schedule.piecewise([0.0, 0.7, T], [0.3, 0.9])
    b = Schedule.constant(0.4, T)
    ab = fidelity_lower_bound([a, b], T)
    fa, fb = fidelity_lower_bound([a], T), fidelity_lower_bound([b], T)
    assert ab.f_star == pytest.approx(fa.f_star * fb.f_star, rel=1e-12)


def test_gamma_max_bound_values():
    assert gamma_max_bound(0.0, 5.0) == 1.0
    assert gamma_max_bound(1.0, T) == pytest.approx(0.207880, abs=1e-6)
    # for constant strength the coarse bound and the integral bound coincide
    rep = fidelity_lower_bound([Schedule.constant(0.7, T)], T)
    assert gamma_max_bound(0.7, T) == pytest.approx(rep.f_star, rel=1e-14)


def test_gamma_max_dominance():
    sched = Schedule.piecewise([0.0, 0.5, 1.0, T], [0.2, 1.1, 0.6])
    rep = fidelity_lower_bound([sched], T)
    assert gamma_max_bound(sched.sup(T), T) <= rep.f_star + 1e-15


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    n_seg=st.integers(1, 5),
    t_frac=st.floats(0.1, 1.0),
)
def test_property_monotonicity_and_dominance(seed, n_seg, t_frac):
    rng = np.random.default_rng(seed)
    bounds_t = np.concatenate([[0.0], np.sort(rng.uniform(0.1, 2.0, n_seg - 1)) if n_seg > 1 else [], [2.0]])
    vals = rng.uniform(0.0, 1.5, n_seg)
    sched = Schedule.piecewise(bounds_t, vals)
    t1 = 2.0 * t_frac
    t0 = 0.5 * t1
    f0 = fidelity_lower_bound([sched], t0).f_star
    f1 = fidelity_lower_bound([sched], t1).f_star
    assert f1 <= f0 + 1e-12  # nonincreasing in t
    scaled = Schedule.piecewise(bounds_t, vals * 1.3)
    assert fidelity_lower_bound([scaled], t1).f_star <= f1 + 1e-12  # nonincreasing in gamma
    assert gamma_max_bound(sched.sup(t1), t1) <= f1 + 1e-12


# -------------------------------------------------------------- control time


def test_control_time_values():
    assert control_time_lower_bound(0.7, 1.0) == 0.0
    assert control_time_lower_bound(1.0, math.exp(-T)) == pytest.approx(T, rel=1e-12)
    assert control_time_lower_bound(0.5, 0.5) == pytest.approx(2.772589, abs=1e-6)


def test_control_time_errors():
    with pytest.raises(ValueError, match="gamma_max"):
        control_time_lower_bound(0.0, 0.5)
    with pytest.raises(ValueError, match="target"):
        control_time_lower_bound(1.0, 0.0)
    with pytest.raises(ValueError, match="target"):
        control_time_lower_bound(1.0, 1.5)


# --------------------------------------------------------------------- QSL


def qubit_h(u=1.0):
    return Schedule.constant(u * pauli("Y"), T)


def test_qsl_noiseless_qubit():
    rep = qsl_time(qubit_h(), [], ket("1"), math.pi / 2)
    assert rep.t_qsl == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert rep.max_dev_h == pytest.approx(1.0, abs=1e-12)
    assert not rep.multi_channel


def test_qsl_with_noise_channel():
    gamma = 0.5
    ch = NoiseChannel.constant(gamma * pauli("X"), gamma, T)
    rep = qsl_time(qubit_h(), [ch], ket("1"), math.pi / 2)
    assert rep.t_qsl == pytest.approx(1 / (math.sqrt(2) * (1 + gamma)), rel=1e-12)
    assert rep.max_dev_b == pytest.approx(gamma, abs=1e-12)


def test_qsl_zero_angle():
    rep = qsl_time(qubit_h(), [], ket("1"), 0.0)
    assert rep.t_qsl == 0.0


def test_qsl_zero_denominator_is_infinite():
    h = Schedule.constant(1.0 * pauli("Z"), T)  # |1> is an eigenstate: no deviation
    rep = qsl_time(h, [], ket("1"), math.pi / 4)
    assert math.isinf(rep.t_qsl)


def test_qsl_rejects_angle_outside_range():
    with pytest.raises(ValueError, match="Bures angle"):
        qsl_time(qubit_h(), [], ket("1"), 2.0)
    with pytest.raises(ValueError, match="n_grid"):
        qsl_time(qubit_h(), [], ket("1"), 1.0, n_grid=1)


def test_qsl_multichannel_flag_and_sum():
    chs = [
        NoiseChannel.constant(0.3 * tensor(pauli("X"), pauli("I")), 0.3, T),
        NoiseChannel.constant(0.4 * tensor(pauli("I"), pauli("X")), 0.4, T),
    ]
    h = Schedule.constant(
        -0.5
        * (
            tensor(pauli("X"), pauli("X"))
            + tensor(pauli("Y"), pauli("Y"))
            + tensor(pauli("Z"), pauli("Z"))
        ),
        T,
    )
    rep = qsl_time(h, chs, ket("+0"), 1.0)
    assert rep.multi_channel
    # <X(x)I> = 1 on |+0>, so that channel contributes zero deviation (up to
    # sqrt-amplified rounding); <I(x)X> = 0 contributes its full strength
    assert rep.max_dev_b == pytest.approx(0.4, abs=1e-7)


def test_profile_times_match():
    times = [0.0, 0.3, T]
    reps = fidelity_lower_bound_profile([Schedule.constant(0.5, T)], times)
    assert [r.t for r in reps] == times
    assert reps[0].f_star == 1.0
