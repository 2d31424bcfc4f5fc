import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import liouvillian_steady_state, rk4_lindblad, rk4_lindblad_path
from qhyp.dynamics import (
    CoarseStepError,
    ConditionalState,
    OverlapState,
    SignalStep,
    counting_step,
    homodyne_step,
    hybrid_step,
    lindblad_evolve,
    lindblad_step,
    monitored_step,
    simulate_ensemble,
    simulate_record,
    steady_state,
    two_sided_step,
)
from qhyp.inference import overlap_curve
from qhyp.model import DetectionScheme, Hypothesis, ground_state, two_level_rabi
from qhyp.qmatrix import LOWERING, projector

DT = 1e-3
FIG2_TRUE = two_level_rabi(2.0, 1.0)
EXCITED = projector(1)
PLUS = np.full((2, 2), 0.5, dtype=complex)


def ops(h: Hypothesis):
    return h.hamiltonian, list(h.collapse_ops)


# -- Lindblad ---------------------------------------------------------------


def test_ground_state_stationary_without_drive():
    rho = lindblad_step(ground_state(), two_level_rabi(0.0, 1.0), DT)
    assert np.array_equal(rho, ground_state())


def test_excited_decay_law():
    rho = lindblad_evolve(EXCITED, two_level_rabi(0.0, 1.0), [10_000], 1e-4)[0]
    assert abs(rho[1, 1].real - math.exp(-1.0)) < 1e-6


def test_driven_state_approaches_oracle_fixed_point():
    hyp = two_level_rabi(2.0, 1.0)
    rho = lindblad_evolve(ground_state(), hyp, [5_000], 1e-2)[0]
    assert np.max(np.abs(rho - liouvillian_steady_state(*ops(hyp)))) < 1e-6


def test_steady_state_undriven():
    assert np.allclose(steady_state(two_level_rabi(0.0, 1.0)), ground_state(), atol=1e-12)


def test_steady_state_matches_long_time_integration():
    hyp = two_level_rabi(2.0, 1.0)
    long_time = rk4_lindblad(*ops(hyp), ground_state(), 50.0, 1e-2)
    assert np.max(np.abs(steady_state(hyp) - long_time)) < 1e-6


def test_steady_state_frozen_value():
    # derived from the independent Liouvillian solve
    ss = steady_state(two_level_rabi(2.0, 1.0))
    assert np.allclose(ss, [[5 / 9, 2j / 9], [-2j / 9, 4 / 9]], atol=1e-12)


def test_steady_state_unitary_is_not_unique():
    with pytest.raises(ValueError, match="non-unique steady state"):
        steady_state(two_level_rabi(2.0, 0.0))


def test_lindblad_trace_per_step_and_drift():
    hyp = two_level_rabi(3.0, 1.0)
    rho = ground_state()
    for _ in range(100):
        nxt = lindblad_step(rho, hyp, DT)
        assert abs(np.trace(nxt) - np.trace(rho)) < 1e-12
        rho = nxt
    rho = lindblad_evolve(ground_state(), hyp, [100_000], DT)[0]
    assert abs(np.trace(rho) - 1.0) < 1e-7


def test_lindblad_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension mismatch"):
        lindblad_step(np.eye(3) / 3, FIG2_TRUE, DT)


def test_lindblad_against_rk4_at_finite_time():
    hyp = two_level_rabi(4.0, 1.0)
    ours = lindblad_evolve(ground_state(), hyp, [1000, 3000], DT)
    times, path = rk4_lindblad_path(*ops(hyp), ground_state(), 3.0, DT)
    assert np.max(np.abs(ours[0] - path[1000])) < 1e-9
    assert np.max(np.abs(ours[1] - path[3000])) < 1e-9


# -- counting ---------------------------------------------------------------


def test_counting_ground_no_drive_unchanged():
    c = counting_step(ConditionalState(ground_state()), two_level_rabi(0.0, 1.0), 1.0, 0, DT)
    assert np.array_equal(c.rho, ground_state())
    assert c.log_weight == 0.0


@given(st.floats(0.01, 1.0), st.floats(-5, 5))
def test_jump_resets_to_ground(pe, omega):
    rho = np.array([[1 - pe, 0.1 * math.sqrt(pe * (1 - pe))], [0.1 * math.sqrt(pe * (1 - pe)), pe]], dtype=complex)
    c = counting_step(ConditionalState(rho), two_level_rabi(omega, 1.0), 1.0, 1, DT)
    assert np.allclose(c.rho, ground_state(), atol=1e-15)
    # click factor includes dt: log(p) with p = <c^dag c> dt at the start of the step
    assert c.log_weight == pytest.approx(math.log(pe * DT), rel=1e-12)


def test_impossible_click_gives_minus_inf():
    c = counting_step(ConditionalState(ground_state()), two_level_rabi(0.0, 1.0), 1.0, 1, DT)
    assert c.impossible
    assert np.isfinite(c.rho).all()


def test_counting_rejects_bad_increment():
    with pytest.raises(ValueError):
        counting_step(ConditionalState(ground_state()), FIG2_TRUE, 1.0, 2, DT)


@given(st.lists(st.integers(0, 1), min_size=1, max_size=40), st.floats(-6, 6))
def test_counting_eta_zero_is_lindblad(record, omega):
    hyp = two_level_rabi(omega, 1.0)
    cond = ConditionalState(ground_state())
    rho = ground_state()
    for dN in record:
        cond = counting_step(cond, hyp, 0.0, dN, DT)
        rho = lindblad_step(rho, hyp, DT)
        assert np.max(np.abs(cond.rho - rho)) < 1e-14
    assert cond.log_weight == 0.0 or record.count(1) > 0


def test_counting_eta_zero_no_click_increment_zero():
    cond = counting_step(ConditionalState(EXCITED), FIG2_TRUE, 0.0, 0, DT)
    assert cond.log_weight == 0.0


# -- homodyne ---------------------------------------------------------------


@given(st.lists(st.floats(-0.2, 0.2), min_size=1, max_size=40), st.floats(-3, 3))
def test_homodyne_eta_zero_is_lindblad(record, phi):
    hyp = FIG2_TRUE
    cond = ConditionalState(ground_state())
    rho = ground_state()
    for dY in record:
        cond = homodyne_step(cond, hyp, 0.0, phi, dY, DT)
        rho = lindblad_step(rho, hyp, DT)
        assert np.max(np.abs(cond.rho - rho)) < 1e-14
    assert cond.log_weight == 0.0


@given(st.floats(-1.0, 1.0), st.floats(-3.2, 3.2))
def test_homodyne_ground_first_step_uninformative(dY, phi):
    cond = homodyne_step(ConditionalState(ground_state()), FIG2_TRUE, 1.0, phi, dY, DT)
    assert cond.log_weight == 0.0


def test_homodyne_likelihood_factor():
    # <X> = 2 Re(e^{-i phi} Tr(c rho)) = 1 for |+>, phi = 0
    cond = homodyne_step(ConditionalState(PLUS), FIG2_TRUE, 1.0, 0.0, 0.02, DT)
    assert cond.log_weight == pytest.approx(math.log1p(0.02), rel=1e-12)


def test_homodyne_degenerate_step_is_subdivided():
    cond = homodyne_step(ConditionalState(PLUS), FIG2_TRUE, 1.0, 0.0, -1.5, DT)
    assert cond.degenerate_steps == 1
    assert np.isfinite(cond.log_weight)
    assert abs(np.trace(cond.rho) - 1) < 1e-12
    assert np.min(np.linalg.eigvalsh(cond.rho)) > -1e-12


def test_homodyne_mean_signal_matches_lindblad():
    scheme = DetectionScheme("homodyne", eta=1.0, phi=-math.pi / 2, dt=DT)
    ens = simulate_ensemble(FIG2_TRUE, ground_state(), scheme, 1000, 11, [(0, k) for k in range(5000)])
    rate = ens.dY[-1] / DT
    rho = rk4_lindblad(*ops(FIG2_TRUE), ground_state(), 1.0 - DT, DT)
    expected = 2 * (np.exp(1j * math.pi / 2) * np.trace(LOWERING @ rho)).real
    se = rate.std() / math.sqrt(len(rate))
    assert abs(rate.mean() - expected) < 3 * se


# -- hybrid -----------------------------------------------------------------


records = st.lists(st.tuples(st.integers(0, 1), st.floats(-0.1, 0.1)), min_size=1, max_size=30)


@given(records, st.floats(0.0, 1.0))
def test_hybrid_beta_zero_equals_counting(record, eta):
    hyp = FIG2_TRUE
    hyb = DetectionScheme("hybrid", eta=eta, beta=0.0, phi=0.4, dt=DT)
    cnt = DetectionScheme("counting", eta=eta, dt=DT)
    a = b = ConditionalState(projector(1) * 0.5 + projector(0) * 0.5)
    for dN, dY in record:
        a = hybrid_step(a, hyp, hyb, SignalStep(dN, dY))
        b = monitored_step(b, hyp, cnt, SignalStep(dN=dN))
        assert np.array_equal(a.rho, b.rho)
        assert a.log_weight == b.log_weight or (a.impossible and b.impossible)


@given(records, st.floats(0.0, 1.0), st.floats(-3, 3))
def test_hybrid_beta_one_equals_homodyne(record, eta, phi):
    hyp = FIG2_TRUE
    hyb = DetectionScheme("hybrid", eta=eta, beta=1.0, phi=phi, dt=DT)
    a = b = ConditionalState(ground_state())
    for _, dY in record:
        a = hybrid_step(a, hyp, hyb, SignalStep(0, dY))
        b = homodyne_step(b, hyp, eta, phi, dY, DT)
        assert np.array_equal(a.rho, b.rho)
        assert a.log_weight == b.log_weight


def test_hybrid_step_needs_hybrid_scheme():
    with pytest.raises(ValueError):
        hybrid_step(ConditionalState(ground_state()), FIG2_TRUE, DetectionScheme("counting"), SignalStep(0))


# -- records ----------------------------------------------------------------


def test_no_drive_no_clicks():
    rec = simulate_record(two_level_rabi(0.0, 1.0), ground_state(), DetectionScheme("counting"), 3000, 5)
    assert rec.dY is None
    assert not rec.dN.any()


def test_eta_zero_no_clicks():
    rec = simulate_record(two_level_rabi(4.0, 1.0), ground_state(), DetectionScheme("counting", eta=0.0), 3000, 5)
    assert not rec.dN.any()


def test_record_is_deterministic():
    s = DetectionScheme("hybrid", beta=0.3, phi=0.2)
    a = simulate_record(FIG2_TRUE, ground_state(), s, 500, 42, (1, 7))
    b = simulate_record(FIG2_TRUE, ground_state(), s, 500, 42, (1, 7))
    c = simulate_record(FIG2_TRUE, ground_state(), s, 500, 42, (1, 8))
    assert np.array_equal(a.dN, b.dN) and np.array_equal(a.dY, b.dY)
    assert not np.array_equal(a.dY, c.dY)
    assert len(a.steps) == a.n_steps == 500


def test_record_matches_ensemble_row():
    s = DetectionScheme("counting")
    ens = simulate_ensemble(FIG2_TRUE, ground_state(), s, 2000, 9, [(0, k) for k in range(4)])
    rec = simulate_record(FIG2_TRUE, ground_state(), s, 2000, 9, (0, 2))
    assert np.array_equal(rec.dN, ens.dN[:, 2])


def test_coarse_step_rejected():
    fast = two_level_rabi(0.0, 200.0)
    with pytest.raises(CoarseStepError, match="dt too coarse"):
        simulate_record(fast, EXCITED, DetectionScheme("counting", dt=1e-3), 10, 1)


def test_total_counts_match_lindblad_integral():
    scheme = DetectionScheme("counting", eta=1.0, dt=DT)
    ens = simulate_ensemble(FIG2_TRUE, ground_state(), scheme, 5000, 2024, [(0, k) for k in range(10_000)])
    totals = ens.dN.sum(axis=0)
    # gamma * integral of the excited population, trapezoid on the RK4 path
    _, path = rk4_lindblad_path(*ops(FIG2_TRUE), ground_state(), 5.0, DT)
    pe = np.array([r[1, 1].real for r in path])
    expected = float(np.sum(pe[:-1]) * DT)  # click probability uses the state at the start of each step
    se = totals.std() / math.sqrt(len(totals))
    assert abs(totals.mean() - expected) < 3 * se


@pytest.mark.parametrize("kind", ["counting", "homodyne"])
def test_positivity_and_purity_along_trajectories(kind):
    scheme = DetectionScheme(kind, eta=1.0, phi=-math.pi / 2, dt=DT)
    keep = np.arange(0, 5001, 5)
    ens = simulate_ensemble(FIG2_TRUE, ground_state(), scheme, 5000, 77, [(0, k) for k in range(100)], keep)
    eig = np.linalg.eigvalsh(ens.states)
    assert eig.min() >= -1e-6
    purity = np.einsum("tbij,tbji->tb", ens.states, ens.states).real
    assert purity.min() >= 1 - 1e-6


def test_imperfect_detection_loses_purity():
    scheme = DetectionScheme("counting", eta=0.5, dt=DT)
    ens = simulate_ensemble(FIG2_TRUE, ground_state(), scheme, 2000, 3, [(0, 0)], [2000])
    rho = ens.states[0, 0]
    assert np.trace(rho @ rho).real < 0.99


# -- two-sided evolution ----------------------------------------------------


def test_two_sided_identical_hypotheses_keep_unit_trace():
    ov = OverlapState(ground_state())
    for _ in range(2000):
        ov = two_sided_step(ov, FIG2_TRUE, FIG2_TRUE, 1e-3)
        assert abs(ov.overlap - 1) < 1e-9


def test_two_sided_undriven_pair():
    a, b = two_level_rabi(0.0, 1.0), two_level_rabi(0.0, 1.0)
    ov = overlap_curve(a, b, ground_state(), np.linspace(0, 5, 11))
    assert np.allclose(ov, 1.0, atol=1e-12)


def test_two_sided_pairs_coincide():
    t = np.linspace(0, 5, 51)
    curves = [
        np.abs(overlap_curve(two_level_rabi(a, 1.0), two_level_rabi(b, 1.0), ground_state(), t))
        for a, b in [(0, 4), (-2, 2), (2, 6)]
    ]
    assert np.max(np.abs(curves[0] - curves[1])) < 1e-6
    assert np.max(np.abs(curves[0] - curves[2])) < 1e-6
    assert np.all(np.abs(curves[0]) <= 1 + 1e-8)


def test_two_sided_dimension_mismatch():
    h3 = Hypothesis("big", np.zeros((3, 3)), (np.zeros((3, 3)),), 0.5)
    with pytest.raises(ValueError, match="dimension mismatch"):
        two_sided_step(OverlapState(ground_state()), FIG2_TRUE, h3, DT)
