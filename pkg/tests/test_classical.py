import numpy as np
import pytest

from semiwave import potentials as pots
from semiwave.classical import (cond1_scale, initial_state, integrate_flow,
                                linearization_check, lyapunov_fit,
                                symplectic_residuals)
from semiwave.errors import Cond1Drift


def test_harmonic_closed_form(harmonic_traj):
    s = harmonic_traj.state_at(np.pi / 2)
    assert s.a[0] == pytest.approx(np.cos(np.pi / 2), abs=1e-9)
    assert s.eta[0] == pytest.approx(-np.sin(np.pi / 2), abs=1e-9)
    assert s.A[0, 0] == pytest.approx(np.exp(1j * np.pi / 2), abs=1e-9)
    assert s.B[0, 0] == pytest.approx(np.exp(1j * np.pi / 2), abs=1e-9)
    assert s.S == pytest.approx(-np.sin(2 * (np.pi / 2)) / 4, abs=1e-9)


def test_free_flight_closed_form():
    f = pots.Polynomial(1, {})
    tr = integrate_flow(f, initial_state(0.5, 2.0), 3.0, tol=1e-11)
    s = tr.state_at(3.0)
    assert s.a[0] == pytest.approx(0.5 + 2.0 * 3.0, abs=1e-10)
    assert s.A[0, 0] == pytest.approx(1.0 + 3.0j, abs=1e-10)
    assert s.B[0, 0] == pytest.approx(1.0, abs=1e-12)
    assert s.S == pytest.approx(3.0 * 4.0 / 2.0, abs=1e-10)


def test_double_well_hyperbolic_matrices():
    dw = pots.double_well()
    tr = integrate_flow(dw, initial_state(0.0, 0.0), 6.0, tol=1e-12)
    for t in (1.0, 3.0, 6.0):
        s = tr.state_at(t)
        assert abs(s.a[0]) < 1e-13
        # Hessian -1 at the fixed point: A = cosh t + i sinh t exactly
        want = np.cosh(t) + 1j * np.sinh(t)
        assert s.A[0, 0] == pytest.approx(want, rel=1e-9)


def test_cond1_preserved(quartic_traj):
    assert quartic_traj.max_cond1_residual() < 1e-9


def test_initial_cond1_violation_rejected():
    q = pots.quartic_well()
    bad = initial_state(0.0, 0.0, A=[[1.0]], B=[[2.0]])
    with pytest.raises(Cond1Drift):
        integrate_flow(q, bad, 1.0)


def test_energy_conservation(quartic_traj):
    assert quartic_traj.energy_drift() < 1e-10 * 1.0 / 1e-1


def test_positive_definite_width_matrix():
    q = pots.quartic_well()
    tr = integrate_flow(q, initial_state(1.0, 0.0), 2.0, tol=1e-12)
    for t in np.linspace(0.25, 2.0, 8):
        s = tr.state_at(t)
        M = np.real(s.B @ np.linalg.inv(s.A))
        assert np.all(np.linalg.eigvalsh(M) > 0)
        assert np.abs(np.linalg.inv(M) - s.A @ s.A.conj().T).max() < 1e-10


def test_time_reversal():
    q = pots.quartic_well()
    tol = 1e-10
    tr = integrate_flow(q, initial_state(1.0, 0.0), 2.0, tol=tol)
    back = integrate_flow(q, tr.state_at(2.0), 0.0, tol=tol)
    s = back.state_at(0.0)
    err = max(abs(s.a[0] - 1.0), abs(s.eta[0]),
              np.abs(s.A - np.eye(1)).max(), np.abs(s.B - np.eye(1)).max(),
              abs(s.S))
    assert err < 100 * tol


def test_interpolant_reproduces_nodes(quartic_traj):
    for i in (0, len(quartic_traj.ts) // 2, -1):
        t = quartic_traj.ts[i]
        s = quartic_traj.state_at(t)
        node = quartic_traj.states[i]
        assert np.abs(s.A - node.A).max() < 1e-13
        assert np.abs(s.a - node.a).max() < 1e-13


def test_detA_branch_accumulates(harmonic_traj):
    # det A = exp(i t): two full turns over t in [0, 2 pi] would alias without
    # branch tracking
    assert harmonic_traj.detA_arg(2 * np.pi) == pytest.approx(2 * np.pi, abs=1e-8)
    assert harmonic_traj.detA_arg(np.pi / 2) == pytest.approx(np.pi / 2, abs=1e-8)


def test_linearization_quadratic_exact():
    h = pots.harmonic()
    assert linearization_check(h, initial_state(1.0, 0.0), 2.0, 1e-5, tol=1e-11) < 1e-6
    f = pots.Polynomial(1, {})
    assert linearization_check(f, initial_state(0.5, 2.0), 2.0, 1e-5, tol=1e-11) < 1e-8


def test_linearization_quartic_second_order():
    q = pots.quartic_well()
    d1 = linearization_check(q, initial_state(1.0, 0.0), 2.0, 2e-3)
    d2 = linearization_check(q, initial_state(1.0, 0.0), 2.0, 1e-3)
    assert d1 / d2 == pytest.approx(4.0, rel=0.35)


def test_lyapunov_fits():
    dw = pots.double_well()
    fit = lyapunov_fit(integrate_flow(dw, initial_state(0.0, 0.0), 10.0, tol=1e-10))
    assert fit.rate == pytest.approx(1.0, rel=0.05)
    assert not fit.polynomial_like

    h = pots.harmonic()
    fith = lyapunov_fit(integrate_flow(h, initial_state(1.0, 0.0), 2 * np.pi, tol=1e-10))
    assert abs(fith.rate) < 1e-3

    f = pots.Polynomial(1, {})
    fitf = lyapunov_fit(integrate_flow(f, initial_state(0.0, 1.0), 10.0, tol=1e-10))
    assert fitf.polynomial_like


def test_trajectory_json_roundtrip(harmonic_traj):
    d = harmonic_traj.to_json_dict()
    assert len(d["t"]) == len(d["a"]) == len(d["S"]) == len(d["arg_detA"])
    assert d["schema_version"] == 1
    import json
    json.dumps(d)


def test_residual_scale():
    A = 50.0 * np.eye(2)
    B = np.eye(2) / 50.0
    assert cond1_scale(A, B) == pytest.approx(2.0)
    r1, r2 = symplectic_residuals(np.eye(2, dtype=complex), np.eye(2, dtype=complex))
    assert r1 == r2 == 0.0
