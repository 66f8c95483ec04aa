import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from qdcascade.errors import CalibrationError, InvalidArgument
from qdcascade.experiments import fringe_visibility
from qdcascade.model import Drive, PhysicalParams
from qdcascade.pulses import (PulseSequence, calibrate_pi, echo_triple, ramsey_pair,
                              sequence_emission, single)
from qdcascade.qcore import DensityMatrix
from qdcascade.solver import REPETITION_PERIOD, evolve

P = PhysicalParams()
G = DensityMatrix.pure("g")


def test_sequence_is_sorted_and_shares_laser():
    seq = PulseSequence([Drive(1.0, t_center=10.0), Drive(2.0, t_center=-5.0)])
    assert [d.t_center for d in seq.drives] == [-5.0, 10.0]
    with pytest.raises(InvalidArgument):
        PulseSequence([Drive(1.0, delta_b=0.1), Drive(1.0, delta_b=0.2)])
    with pytest.raises(InvalidArgument):
        PulseSequence([Drive(1.0, sigma=3.0), Drive(1.0)])


def test_dark_single_pulse():
    pxx, px = sequence_emission(single(0.0), P)
    assert (pxx, px) == (0.0, 0.0)


@given(phase=st.floats(-math.pi, math.pi))
def test_single_pulse_phase_is_global(phase):
    a = evolve(G, -20, 20, single(1.7, phase=phase), P).final
    b = evolve(G, -20, 20, single(1.7), P).final
    assert np.max(np.abs(np.diag(a.data - b.data))) <= 1e-9


def test_ramsey_pair_layout():
    seq = ramsey_pair(1.2, 50.0, 0.4, 0.01)
    assert [d.t_center for d in seq.drives] == [0.0, 50.0]
    assert [d.phase for d in seq.drives] == [0.0, 0.4]
    assert {d.omega_peak for d in seq.drives} == {1.2}
    assert seq.delta_b == 0.01
    with pytest.raises(InvalidArgument, match="overlap"):
        ramsey_pair(1.2, 10.0, 0.0)
    assert len(ramsey_pair(1.2, 0.0, 0.0, allow_overlap=True)) == 2


def test_echo_triple_layout():
    seq = echo_triple(1.2, 100.0, 0.7)
    assert [d.t_center for d in seq.drives] == [0.0, 50.0, 100.0]
    assert seq.drives[1].omega_peak / seq.drives[0].omega_peak == math.sqrt(2.0)
    assert [d.phase for d in seq.drives] == [0.0, 0.0, 0.7]
    assert [d.phase for d in echo_triple(1.2, 100.0, 0.7, phase_on="middle").drives] == [0.0, 0.7, 0.0]
    with pytest.raises(InvalidArgument):
        echo_triple(1.2, 20.0, 0.0)


def test_ramsey_zero_amplitude_is_dark():
    assert sequence_emission(ramsey_pair(0.0, 40.0, 1.0), P) == (0.0, 0.0)


def test_ramsey_phase_controls_emission(cal_closed, tight):
    q = P.closed()
    hi = sequence_emission(ramsey_pair(cal_closed.omega_half, 20.0, 0.0), q, tight)[0]
    lo = sequence_emission(ramsey_pair(cal_closed.omega_half, 20.0, math.pi / 2), q, tight)[0]
    assert hi > 0.95 and lo < 0.05


def test_ramsey_long_delay_washes_out():
    q = P.replace(gamma_b=0.0, gamma_x=0.0, k=0.0)
    cal = calibrate_pi(q)
    phases = np.arange(8) * math.pi / 8
    sig = [sequence_emission(ramsey_pair(cal.omega_half, 1500.0, ph), q)[0] for ph in phases]
    vis, mean, _ = fringe_visibility(phases, sig)
    assert vis < 1e-3
    assert mean == pytest.approx(0.5, abs=0.02)


@settings(max_examples=15)
@given(phase=st.floats(0, 2 * math.pi), tau=st.floats(13, 200))
def test_only_relative_phase_matters(phase, tau):
    a = sequence_emission(ramsey_pair(1.3, tau, phase, phase_on="first"), P)
    b = sequence_emission(ramsey_pair(1.3, tau, -phase), P)
    assert abs(a[0] - b[0]) <= 1e-9


@settings(max_examples=15)
@given(phase=st.floats(0, math.pi), tau=st.floats(30, 200))
def test_fringe_period_is_pi_for_long_pulses(phase, tau):
    # with sigma = 8 ps no exciton coherence survives the pulse, so the
    # single-photon component of the fringe is below round-off
    kw = dict(sigma=8.0)
    q = P.replace(gamma_b=0.0, gamma_x=0.0)
    a = sequence_emission(ramsey_pair(0.92, 2 * tau, phase, **kw), q)[0]
    b = sequence_emission(ramsey_pair(0.92, 2 * tau, phase + math.pi, **kw), q)[0]
    assert abs(a - b) <= 1e-6


def test_fringe_period_residual_comes_from_exciton_coherence():
    """At sigma = 4 ps the pulse leaves a small exciton coherence whose phase
    follows the single-photon carrier phase, so shifting by pi changes the
    emission slightly; the effect vanishes for longer pulses."""
    q = P.closed()
    diffs = []
    for sigma in (4.0, 6.0, 8.0):
        om = 1.3 * math.sqrt(4.0 / sigma)
        a = sequence_emission(ramsey_pair(om, 60.0, 0.7, sigma=sigma), q)[0]
        b = sequence_emission(ramsey_pair(om, 60.0, 0.7 + math.pi, sigma=sigma), q)[0]
        diffs.append(abs(a - b))
    assert diffs[0] > 1e-6 > diffs[1] > diffs[2]
    rho = evolve(G, -20, 20, single(om * math.sqrt(sigma / 4.0)), q).final
    assert abs(rho.coherence("g", "x")) > 1e-4


def test_dark_gb_coherence_decay():
    q = P.replace(gamma_b=0.0, gamma_x=0.0, k=0.0)
    cal = calibrate_pi(q)
    times = np.linspace(30.0, 330.0, 7)
    tr = evolve(G, -20, 330, single(cal.omega_half), q, sample_times=np.concatenate([[-20.0], times]))
    mag = np.abs(tr.states[1:, 0, 2])
    rate = (q.gamma_db + q.gamma_dx) / 2
    assert mag / mag[0] == pytest.approx(np.exp(-rate * (times - times[0])), rel=1e-6)


def _fringe_phase(phases, signal):
    design = np.column_stack([np.ones_like(phases), np.cos(2 * phases), np.sin(2 * phases)])
    c = np.linalg.lstsq(design, signal, rcond=None)[0]
    return math.atan2(c[2], c[1])


def test_echo_refocuses_static_detuning(cal_closed, tight):
    q = P.closed()
    phases = np.arange(8) * math.pi / 8
    tau = 200.0
    echo, ramsey = [], []
    for delta in (-0.01, 0.0, 0.004, 0.01):
        e = [sequence_emission(echo_triple(cal_closed.omega_half, tau, ph), q, tight, delta_b=delta)[0]
             for ph in phases]
        r = [sequence_emission(ramsey_pair(cal_closed.omega_half, tau, ph), q, tight, delta_b=delta)[0]
             for ph in phases]
        echo.append(_fringe_phase(phases, np.array(e)))
        ramsey.append(_fringe_phase(phases, np.array(r)))
    spread = lambda x: np.ptp(np.unwrap(x))
    assert spread(echo) < 0.1
    assert spread(ramsey) > 2.0


def test_calibrate_pi(cal_full):
    assert cal_full.omega_half < cal_full.omega_pi
    pmax = sequence_emission(single(cal_full.omega_pi), P)[0]
    for d in (-0.01, 0.01):
        assert sequence_emission(single(cal_full.omega_pi * (1 + d)), P)[0] < pmax
    half = sequence_emission(single(cal_full.omega_half), P)[0]
    assert half == pytest.approx(pmax / 2, rel=1e-3)


def test_calibrate_pi_matches_dressed_state_area():
    """For k = 0 the inversion condition is that the light-shift-corrected
    two-level area, the integral of (sqrt(delta_e^2 + 2 Omega(t)^2) - delta_e) / 2,
    equals pi."""
    q = P.replace(k=0.0)
    cal = calibrate_pi(q)
    t = np.linspace(-30, 30, 20001)
    om = cal.omega_pi * np.exp(-2 * math.log(2) * t ** 2 / 16)
    area = trapezoid((np.sqrt(q.delta_e ** 2 + 2 * om ** 2) - q.delta_e) / 2, t)
    assert area == pytest.approx(math.pi, rel=0.03)


def test_calibrate_pi_delta_e_scaling():
    q = P.replace(k=0.0)
    a = calibrate_pi(q).omega_pi
    b = calibrate_pi(q.replace(delta_e=2 * q.delta_e), search_range=(0.1, 6.0)).omega_pi
    assert b / a == pytest.approx(math.sqrt(2), rel=0.05)


def test_calibrate_pi_without_maximum():
    with pytest.raises(CalibrationError):
        calibrate_pi(P, search_range=(0.1, 1.0))


def test_pulse_window_default_period():
    tr = evolve(G, -20, REPETITION_PERIOD, single(1.9), P)
    assert tr.final[0, 0].real > 0.99
