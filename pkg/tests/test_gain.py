import numpy as np
import pytest

from delayest.augment import build_augmented_pa
from delayest.gain import (GainMatrix, SynthesisError, TauStar, closed_loop_augmented,
                           closed_loop_delay_free, convergence_rate, delay_test_matrix,
                           design_gain, design_gain_delay_tolerant, delay_test_bound,
                           stability_report, tau_star)
from delayest.model import SensorNetwork, assign_delays, generate_network, generate_system
from delayest.observability import dbar_c

# two sensors, each measuring one state of an unstable 2-state plant
P2 = np.array([[0.75, 0.25], [0.5, 0.5]])
A2 = np.array([[1.1, 1.0], [0.0, 0.9]])
C2 = np.eye(2)
L2 = np.array([[0.5, 0.25], [0.2, 0.6]])
K2 = GainMatrix.from_output_gains(L2, C2)
D2 = dbar_c(C2)

# rho((I - KD)(P kron A^(tau+1))) computed in 40-digit arithmetic
ORACLE_RHO = {0: 0.72065846009953590547, 1: 0.67865532163722306205,
              2: 0.62176478798534131821, 3: 0.55707420130453712244,
              9: 0.98997178983209430356, 10: 1.1019063856874939930}
ORACLE_BOUND = {1: 0.82380539063374856145, 2: 0.85351018462510049176,
                3: 0.86392941597798752439}


def test_gain_matrix_from_output_gains():
    c = np.array([[2.0, 0.0, 0.0], [0.0, 1.0, 1.0]])
    l = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    g = GainMatrix.from_output_gains(l, c)
    np.testing.assert_allclose(g.output_gains(c), l)
    assert g.assembled.shape == (6, 6) and g.n_sensors == 2
    assert np.all(GainMatrix.zeros(2, 3).assembled == 0)


def test_closed_loop_matches_oracle():
    m = closed_loop_delay_free(P2, A2, K2, D2)
    assert np.max(np.abs(np.linalg.eigvals(m))) == pytest.approx(ORACLE_RHO[0], abs=1e-12)
    for tau, rho in ORACLE_RHO.items():
        got = np.max(np.abs(np.linalg.eigvals(delay_test_matrix(P2, A2, K2, D2, tau))))
        assert got == pytest.approx(rho, abs=1e-10)


def test_bound_and_rate_match_oracle():
    for tau, b in ORACLE_BOUND.items():
        assert delay_test_bound(P2, A2, K2, D2, tau) == pytest.approx(b, abs=1e-12)
        assert convergence_rate(P2, A2, K2, D2, tau) == pytest.approx(1 - b, abs=1e-12)


def test_tau_star_matches_oracle():
    ts = tau_star(P2, A2, K2, D2)
    assert ts == TauStar(9, False)
    assert str(ts) == "9" and ts.covers(9) and not ts.covers(10)


def test_tau_star_saturates_for_stable_plant():
    ts = tau_star(P2, 0.5 * np.eye(2), K2, D2, tau_max=20)
    assert ts.saturated and ts.value == 20 and str(ts) == ">=20"
    assert ts.to_json() == ">=20"


def test_tau_star_needs_stabilizing_gain():
    with pytest.raises(ValueError):
        tau_star(P2, A2, GainMatrix.zeros(2, 2), D2)


def test_augmented_closed_loop_equals_bound_when_all_entries_delayed():
    net = SensorNetwork(P2)
    for tau in range(0, 6):
        pa = build_augmented_pa(P2, A2, assign_delays(net, "homogeneous_full", tau))
        rho = np.max(np.abs(np.linalg.eigvals(closed_loop_augmented(pa, K2, D2))))
        assert rho == pytest.approx(delay_test_bound(P2, A2, K2, D2, tau), abs=1e-10)


def test_augmented_closed_loop_without_delay_is_delay_free_loop():
    net = SensorNetwork(P2)
    pa = build_augmented_pa(P2, A2, assign_delays(net, "homogeneous", 0))
    np.testing.assert_allclose(closed_loop_augmented(pa, K2, D2),
                               closed_loop_delay_free(P2, A2, K2, D2), atol=1e-15)


def test_stability_report_fields():
    rep = stability_report(P2, A2, K2, D2, taus=[0, 3])
    d = rep.to_dict()
    assert set(d) == {"rho", "tau_star", "bounds", "rates"}
    assert d["tau_star"] == 9
    assert d["bounds"]["3"] == pytest.approx(ORACLE_BOUND[3], abs=1e-12)
    assert d["rates"]["0"] == pytest.approx(1 - ORACLE_RHO[0], abs=1e-12)


def _instance(seed):
    sys = generate_system(6, 4, 1.04, seed)
    net = generate_network(4, "cycle", seed)
    return net.p, sys.a, sys.c_rows


def test_design_gain_is_verified_independently():
    p, a, c = _instance(1)
    gain, rep = design_gain(p, a, c, seed=1)
    closed = np.kron(p, a) - gain.assembled @ dbar_c(c) @ np.kron(p, a)
    rho = np.max(np.abs(np.linalg.eigvals(closed)))
    assert rho < 0.99 and rho == pytest.approx(rep.rho_closed_loop, abs=1e-12)
    # block structure: K_i only acts through C_i
    for k, ci in zip(gain.blocks, c):
        np.testing.assert_allclose(k @ (np.eye(6) - np.outer(ci, ci)), 0.0, atol=1e-14)


def test_design_gain_does_not_depend_on_workers():
    p, a, c = _instance(4)
    g1, _ = design_gain(p, a, c, seed=3, workers=1)
    g2, _ = design_gain(p, a, c, seed=3, workers=2)
    for b1, b2 in zip(g1.blocks, g2.blocks):
        np.testing.assert_array_equal(b1, b2)


def _steady_variance(p, a, c, gain, q, r, steps=4000):
    """Iterate the error covariance recursion until it settles."""
    n_sensors, n = c.shape
    closed = closed_loop_delay_free(p, a, gain, dbar_c(c))
    kd = gain.assembled @ dbar_c(c)
    kdt = np.hstack([gain.assembled[:, i * n:(i + 1) * n] @ c[i][:, None] for i in range(n_sensors)])
    ones = np.kron(np.ones((n_sensors, 1)), np.eye(n))
    forcing = (np.eye(n * n_sensors) - kd) @ ones
    w = q * forcing @ forcing.T + r * kdt @ kdt.T
    cov = np.zeros_like(w)
    for _ in range(steps):
        cov = closed @ cov @ closed.T + w
    return np.trace(cov) / n_sensors


def test_noise_phase_lowers_steady_state_error():
    p, a, c = _instance(1)
    raw, raw_rep = design_gain(p, a, c, seed=1, noise=None)
    tuned, rep = design_gain(p, a, c, seed=1, noise=(0.004, 0.004))
    assert rep.rho_closed_loop < 0.99
    v_raw = _steady_variance(p, a, c, raw, 0.004, 0.004)
    v_tuned = _steady_variance(p, a, c, tuned, 0.004, 0.004)
    assert v_tuned < v_raw


def test_design_gain_rejects_unobservable_pair():
    p = np.array([[0.5, 0.5], [0.5, 0.5]])
    a = np.diag([2.0, 3.0])
    c = np.array([[1.0, 0.0], [1.0, 0.0]])
    with pytest.raises(SynthesisError, match="not observable"):
        design_gain(p, a, c)


def test_design_gain_reports_exhausted_budget():
    p, a, c = _instance(0)
    with pytest.raises(SynthesisError) as info:
        design_gain(p, a, c, margin=0.9, restarts=1, batch=1)
    assert info.value.best_rho >= 0.1 and info.value.best_gain is not None


def test_delay_tolerant_design_reaches_requested_delay():
    p, a, c = _instance(1)
    gain, rep = design_gain_delay_tolerant(p, a, c, tau_1=3, seed=1)
    assert rep.tau_star.value >= 3
    for tau in range(4):
        assert np.max(np.abs(np.linalg.eigvals(delay_test_matrix(p, a, gain, dbar_c(c), tau)))) < 1
