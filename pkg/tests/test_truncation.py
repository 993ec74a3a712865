import numpy as np
import pytest

from semiwave import potentials as pots
from semiwave.basis import BasisCoefficients, evaluate_phi0, frame_at, WavepacketFrame
from semiwave.classical import initial_state, integrate_flow
from semiwave.errors import (DegenerateProfile, EmptyWindow, FrameMismatch,
                             GridTooCoarse)
from semiwave.hierarchy import integrate_hierarchy
from semiwave.oracle import GridSpec, apply_hamiltonian, grid_norm, l2_error, propagate
from semiwave.truncation import (TruncationPlan, assemble_wavefunction,
                                 choose_l, combined_coefficients,
                                 ehrenfest_schedule, empirical_plan,
                                 fixed_plan, kappa_window, localization_mass,
                                 residual_norm)


def test_choose_l_fixed():
    assert choose_l(0.05, g=0.5) == 10
    assert choose_l(0.6, g=0.5) == 1          # clamped
    assert choose_l(0.1, g=0.4) == 4


def test_choose_l_empirical():
    assert choose_l(0.1, profile=[1.0, 0.0, 0.0]) == 1
    assert choose_l(0.1, profile=[1.0, 0.3, 0.1, 0.15, 0.2]) == 2
    with pytest.raises(DegenerateProfile):
        choose_l(0.1, profile=[1.0, 1.2, 0.1])
    with pytest.raises(ValueError):
        choose_l(0.1)


def test_plans():
    p = fixed_plan(0.05, 0.5)
    assert p.l == 10 and p.mode == "fixed_g"
    e = empirical_plan(0.1, [1.0, 0.2, 0.05, 0.06])
    assert e.l == 2
    with pytest.raises(ValueError):
        TruncationPlan(mode="fixed_g", l=3, hbar=0.1, g=0.5)


@pytest.fixture(scope="module")
def harmonic_setup():
    h = pots.harmonic()
    hbar = 0.1
    tr = integrate_flow(h, initial_state(1.0, 0.0), 1.0, tol=1e-11)
    fr0 = frame_at(tr, 0.0, hbar)
    c0 = BasisCoefficients.from_pairs(
        fr0, [[[0], 1 / np.sqrt(2), 0.0], [[1], 1 / np.sqrt(2), 0.0]])
    hh = integrate_hierarchy(tr, h, c0, l=3, tol=1e-11)
    return h, hbar, tr, hh


def test_harmonic_assembly_exact(harmonic_setup):
    h, hbar, tr, hh = harmonic_setup
    grid = GridSpec(d=1, center=(0.5,), halfwidths=(5.0,),
                    points_per_axis=2048, dt=2e-4)
    x = grid.mesh()
    psi0 = assemble_wavefunction(hh, 0.0, hbar, 3, x)
    psi_o = propagate(grid, h, psi0, hbar, 1.0)[0]
    for l in (1, 2, 3):
        psi_a = assemble_wavefunction(hh, 1.0, hbar, l, x)
        assert l2_error(psi_a, psi_o, grid).raw < 1e-6


def test_assembly_is_linear(harmonic_setup):
    h, hbar, tr, hh = harmonic_setup
    x = np.linspace(-4, 5, 512)
    psi = assemble_wavefunction(hh, 0.7, hbar, 3, x)
    comb = combined_coefficients(hh, 0.7, hbar, 3)
    assert np.isfinite(psi).all() and np.linalg.norm(comb) > 0
    # doubling the combined coefficients doubles the wavefunction: check by
    # assembling the layer sum directly
    psi_manual = np.zeros_like(psi)
    from semiwave.basis import evaluate_basis
    from semiwave.multiindex import enumerate_upto
    fr = frame_at(tr, 0.7, hbar)
    tab = evaluate_basis(fr, hh.J + 6, x)
    order = enumerate_upto(1, hh.J + 6)
    pos = {j: i for i, j in enumerate(order)}
    for i, j in enumerate(hh.basis.indices):
        if sum(j) <= hh.J + 6:
            psi_manual += comb[i] * tab[pos[j]]
    psi_manual *= np.exp(1j * fr.S / hbar)
    assert np.abs(psi - psi_manual).max() < 1e-12


def test_assembled_norm_near_one(quartic_traj):
    # the expansion does not generate normalized wavepackets; the defect is
    # O(sqrt(hbar)) through the first correction layer
    q = pots.quartic_well()
    for hbar in (0.1, 0.025):
        fr0 = frame_at(quartic_traj, 0.0, hbar)
        hh = integrate_hierarchy(quartic_traj, q, BasisCoefficients.delta(fr0),
                                 l=3, tol=1e-11)
        n = np.linalg.norm(combined_coefficients(hh, 1.0, hbar, 3))
        assert abs(n - 1.0) < 2.0 * np.sqrt(hbar)
    # deviation shrinks with hbar
    fr0 = frame_at(quartic_traj, 0.0, 0.1)


def test_frame_mismatch_detected(harmonic_setup):
    h, hbar, tr, hh = harmonic_setup
    bad = WavepacketFrame(A=[[1.0]], B=[[1.0]], hbar=hbar, a=[9.0], eta=[0.0])
    with pytest.raises(FrameMismatch):
        assemble_wavefunction(hh, 0.5, hbar, 2, np.linspace(-3, 3, 64), frame=bad)


def test_residual_zero_for_harmonic(harmonic_setup):
    h, hbar, tr, hh = harmonic_setup
    x = np.linspace(-5, 6, 2048)
    assert residual_norm(hh, 0.5, h, hbar, 2, x) < 1e-12


def test_residual_zero_for_free():
    f = pots.Polynomial(1, {})
    hbar = 0.1
    tr = integrate_flow(f, initial_state(0.0, 1.0), 1.0, tol=1e-11)
    fr0 = frame_at(tr, 0.0, hbar)
    hh = integrate_hierarchy(tr, f, BasisCoefficients.delta(fr0), l=2, tol=1e-11)
    x = np.linspace(-5, 6, 2048)
    assert residual_norm(hh, 1.0, f, hbar, 2, x) < 1e-12


def test_residual_matches_time_difference_oracle(quartic_traj):
    q = pots.quartic_well()
    hbar, l, t = 0.1, 2, 0.9
    fr0 = frame_at(quartic_traj, 0.0, hbar)
    hh = integrate_hierarchy(quartic_traj, q, BasisCoefficients.delta(fr0),
                             l=l, tol=1e-11)
    grid = GridSpec(d=1, center=(0.3,), halfwidths=(6.0,),
                    points_per_axis=4096, dt=1e-4)
    x = grid.mesh()
    r = residual_norm(hh, t, q, hbar, l, x)
    dt = 1e-5
    dpsi = (assemble_wavefunction(hh, t + dt, hbar, l, x)
            - assemble_wavefunction(hh, t - dt, hbar, l, x)) / (2 * dt)
    hpsi = apply_hamiltonian(grid, q, assemble_wavefunction(hh, t, hbar, l, x), hbar)
    r_oracle = grid_norm(1j * hbar * dpsi - hpsi, grid)
    assert r == pytest.approx(r_oracle, rel=0.05)


def test_residual_grid_too_coarse(quartic_traj):
    q = pots.quartic_well()
    hbar, l = 0.05, 2
    fr0 = frame_at(quartic_traj, 0.0, hbar)
    hh = integrate_hierarchy(quartic_traj, q, BasisCoefficients.delta(fr0),
                             l=l, tol=1e-10)
    x = np.linspace(-4, 5, 40)   # far below 16 points per packet width
    with pytest.raises(GridTooCoarse):
        residual_norm(hh, 1.0, q, hbar, l, x)


def test_localization_trivial_cases():
    fr = WavepacketFrame(A=[[1.0]], B=[[1.0]], hbar=0.1, a=[0.0], eta=[0.0])
    x = np.linspace(-12, 12, 8192)
    psi = evaluate_phi0(fr, x)
    assert localization_mass(psi, x, [0.0], 10 * np.sqrt(0.1)) < 1e-10
    assert localization_mass(psi, x, [0.0], 0.0) == pytest.approx(1.0, abs=1e-8)
    masses = [localization_mass(psi, x, [0.0], b) for b in (0.25, 0.5, 1.0)]
    assert masses[0] >= masses[1] >= masses[2]


def test_localization_needs_margin():
    fr = WavepacketFrame(A=[[1.0]], B=[[1.0]], hbar=0.1, a=[0.0], eta=[0.0])
    x = np.linspace(-2, 2, 512)
    psi = evaluate_phi0(fr, x)
    with pytest.raises(GridTooCoarse):
        localization_mass(psi, x, [0.0], 1.0)


def test_ehrenfest_schedule_values():
    s = ehrenfest_schedule(1 / 8.0, 1.0, 0.0, 1.0, 0.01, kappa=7.0)
    assert s.T == pytest.approx(np.log(100.0) / 8.0, rel=1e-12)
    assert s.g == pytest.approx(0.01 ** (7.0 / 8.0), rel=1e-12)
    assert s.l == max(1, int(np.floor(s.g / 0.01)))


def test_ehrenfest_window():
    with pytest.raises(EmptyWindow):
        ehrenfest_schedule(1.0, 1.0, 1.0, 1.0, 0.1)
    lo, hi = kappa_window(0.1, 1.0, 0.0, 1.0)
    assert (lo, hi) == (6.0, 10.0)
    # T' = (1 - eps)/(6 lambda) admissible when tau -> 0
    lam, eps = 0.8, 0.01
    lo, hi = kappa_window((1 - eps) / (6 * lam), lam, 0.0, 1.0)
    assert lo < hi
    with pytest.raises(EmptyWindow):
        kappa_window(1.0 / (6 * 0.8), 0.8, 0.0, 1.0)   # eps = 0 closes it


def test_schedule_midpoint_default():
    s = ehrenfest_schedule(0.1, 1.0, 0.0, 1.0, 0.05)
    assert s.kappa == pytest.approx(8.0)
    assert s.T == pytest.approx(0.1 * np.log(20.0))
