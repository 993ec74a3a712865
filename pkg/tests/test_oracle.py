import numpy as np
import pytest

from semiwave import potentials as pots
from semiwave.basis import WavepacketFrame, evaluate_phi0
from semiwave.errors import LeakageDetected
from semiwave.oracle import (GridSpec, apply_hamiltonian, grid_inner,
                             grid_norm, l2_error, orbit_grid, propagate)


def test_gridspec_validation():
    with pytest.raises(ValueError):
        GridSpec(d=3, center=(0, 0, 0), halfwidths=(1, 1, 1),
                 points_per_axis=64, dt=1e-3)
    with pytest.raises(ValueError):
        GridSpec(d=1, center=(0,), halfwidths=(1,), points_per_axis=100, dt=1e-3)


def test_free_gaussian_dispersion():
    hbar, sigma, k0, t = 1.0, 1.0, 1.5, 2.0
    grid = GridSpec(d=1, center=(3.0,), halfwidths=(24.0,),
                    points_per_axis=4096, dt=1e-3)
    x = grid.mesh()[:, 0]
    psi0 = (np.pi * sigma**2) ** -0.25 * np.exp(-x**2 / (2 * sigma**2) + 1j * k0 * x)
    psi = propagate(grid, pots.Polynomial(1, {}), psi0, hbar, t)[0]
    s = sigma**2 + 1j * hbar * t
    exact = ((np.pi * sigma**2) ** -0.25 * np.sqrt(sigma**2 / s)
             * np.exp(-(x - hbar * k0 * t) ** 2 / (2 * s)
                      + 1j * k0 * x - 0.5j * hbar * k0**2 * t))
    assert l2_error(psi, exact, grid).raw < 1e-9


def test_harmonic_revival():
    h = pots.harmonic()
    grid = GridSpec(d=1, center=(0.0,), halfwidths=(14.0,),
                    points_per_axis=2048, dt=2e-4)
    x = grid.mesh()
    fr = WavepacketFrame(A=[[1.0]], B=[[1.0]], hbar=1.0, a=[1.0], eta=[0.0])
    psi0 = evaluate_phi0(fr, x)
    psi = propagate(grid, h, psi0, 1.0, 2 * np.pi)[0]
    assert abs(abs(grid_inner(psi, psi0, grid)) - 1.0) < 1e-8


def test_norm_preservation_10k_steps():
    q = pots.quartic_well()
    grid = GridSpec(d=1, center=(0.0,), halfwidths=(8.0,),
                    points_per_axis=1024, dt=1e-4)
    x = grid.mesh()
    fr = WavepacketFrame(A=[[1.0]], B=[[1.0]], hbar=0.5, a=[0.5], eta=[0.0])
    psi0 = evaluate_phi0(fr, x)
    psi = propagate(grid, q, psi0, 0.5, 1.0)[0]   # 10^4 steps
    assert abs(grid_norm(psi, grid) - grid_norm(psi0, grid)) < 1e-11


def test_dt_second_order():
    q = pots.quartic_well()
    hbar = 0.5
    fr = WavepacketFrame(A=[[1.0]], B=[[1.0]], hbar=hbar, a=[1.0], eta=[0.0])
    errs = []
    for dt in (4e-3, 2e-3):
        grid = GridSpec(d=1, center=(0.0,), halfwidths=(8.0,),
                        points_per_axis=2048, dt=dt)
        x = grid.mesh()
        psi0 = evaluate_phi0(fr, x)
        psi = propagate(grid, q, psi0, hbar, 1.0)[0]
        fine = GridSpec(d=1, center=(0.0,), halfwidths=(8.0,),
                        points_per_axis=2048, dt=dt / 16)
        ref = propagate(fine, q, psi0, hbar, 1.0)[0]
        errs.append(l2_error(psi, ref, grid).raw)
    assert np.log2(errs[0] / errs[1]) >= 1.9


def test_l2_error_basics():
    grid = GridSpec(d=1, center=(0.0,), halfwidths=(12.0,),
                    points_per_axis=2048, dt=1e-3)
    x = grid.mesh()
    fr = WavepacketFrame(A=[[1.0]], B=[[1.0]], hbar=1.0, a=[0.0], eta=[0.0])
    from semiwave.basis import evaluate_basis
    tab = evaluate_basis(fr, 1, x)
    assert l2_error(tab[0], tab[0], grid).raw == 0.0
    flip = l2_error(tab[0], -tab[0], grid)
    assert flip.raw == pytest.approx(2.0, abs=1e-9)
    assert flip.phase_optimized < 1e-7
    assert l2_error(tab[0], tab[1], grid).raw == pytest.approx(np.sqrt(2), abs=1e-9)


def test_leakage_detected():
    f = pots.Polynomial(1, {})
    grid = GridSpec(d=1, center=(0.0,), halfwidths=(3.0,),
                    points_per_axis=256, dt=1e-3)
    x = grid.mesh()[:, 0]
    psi0 = np.exp(-((x - 2.8) ** 2))   # sits on the boundary band
    with pytest.raises(LeakageDetected):
        propagate(grid, f, psi0, 1.0, 0.1)


def test_snapshots_at_multiple_times():
    h = pots.harmonic()
    grid = GridSpec(d=1, center=(0.0,), halfwidths=(10.0,),
                    points_per_axis=1024, dt=5e-4)
    x = grid.mesh()
    fr = WavepacketFrame(A=[[1.0]], B=[[1.0]], hbar=1.0, a=[1.0], eta=[0.0])
    psi0 = evaluate_phi0(fr, x)
    snaps = propagate(grid, h, psi0, 1.0, 1.0, t_eval=[0.0, 0.5, 1.0])
    assert len(snaps) == 3
    assert np.abs(snaps[0] - psi0).max() < 1e-14
    two_step = propagate(grid, h, snaps[1], 1.0, 1.0, t_start=0.5)[0]
    assert np.abs(two_step - snaps[2]).max() < 1e-10


def test_2d_propagation_norm_and_revival():
    h2 = pots.Polynomial(2, {(2, 0): 0.5, (0, 2): 0.5})
    grid = GridSpec(d=2, center=(0.0, 0.0), halfwidths=(9.0, 9.0),
                    points_per_axis=128, dt=1e-3)
    pts = grid.mesh()
    fr = WavepacketFrame(A=np.eye(2), B=np.eye(2), hbar=1.0,
                         a=[0.7, -0.3], eta=[0.0, 0.5])
    psi0 = evaluate_phi0(fr, pts.reshape(-1, 2)).reshape(128, 128)
    psi = propagate(grid, h2, psi0, 1.0, 2 * np.pi)[0]
    assert grid_norm(psi, grid) == pytest.approx(1.0, abs=1e-9)
    assert abs(abs(grid_inner(psi, psi0, grid)) - 1.0) < 1e-6


def test_spectral_hamiltonian_on_eigenstate():
    h = pots.harmonic()
    grid = GridSpec(d=1, center=(0.0,), halfwidths=(10.0,),
                    points_per_axis=1024, dt=1e-3)
    x = grid.mesh()
    fr = WavepacketFrame(A=[[1.0]], B=[[1.0]], hbar=1.0, a=[0.0], eta=[0.0])
    psi = evaluate_phi0(fr, x)
    hpsi = apply_hamiltonian(grid, h, psi, 1.0)
    # ground state: H psi = (hbar omega / 2) psi
    assert np.abs(hpsi - 0.5 * psi).max() < 1e-10


def test_orbit_grid_covers_orbit(quartic_traj):
    grid = orbit_grid(quartic_traj, 0.1, 1024, 1e-4)
    assert grid.halfwidths[0] > 1.0
    assert grid.kinetic_check(0.1) > 0
