"""Registry of runtime invariant checks behind the `validate` subcommand.

Each check returns a margin: the measured quantity divided by its allowed
bound, so margin <= 1 passes.  Checks marked exact hold in exact arithmetic
(combinatorics, ladder algebra, constructed sparsity) and survive any
tolerance tightening; the rest are quadrature- or integrator-limited and
are expected to fail when tolerances are tightened 100x.  That partition is
the documented fragility map.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial

import numpy as np

from . import basis as basis_mod
from . import potentials as pots
from .basis import (BasisCoefficients, WavepacketFrame, apply_lowering,
                    apply_position, apply_raising, evaluate_basis,
                    evaluate_phi0, frame_at, quadrature_box)
from .classical import (initial_state, integrate_flow, linearization_check,
                        lyapunov_fit, symplectic_residuals)
from .errors import EmptyWindow, MissingDecayMetadata
from .hierarchy import apply_potential_term, bound_constants, integrate_hierarchy
from .multiindex import (count_exact_degree, count_upto, enumerate_upto,
                         factorial_ratio, hockey_stick_holds,
                         shell_growth_bound_holds)
from .oracle import GridSpec, apply_hamiltonian, grid_inner, grid_norm, l2_error, propagate
from .scattering import classical_asymptotics, smatrix_apply
from .truncation import (assemble_wavefunction, choose_l, ehrenfest_schedule,
                         kappa_window, localization_mass, residual_norm)


@dataclass
class CheckResult:
    name: str
    module: str
    passed: bool
    margin: float
    exact: bool
    detail: str = ""


_REGISTRY = []


def check(name, module, exact=False):
    def deco(fn):
        _REGISTRY.append((name, module, exact, fn))
        return fn
    return deco


def _random_frame_1d(rng, hbar):
    r = rng.uniform(0.5, 2.0)
    theta = rng.uniform(0, 2 * np.pi)
    beta = rng.uniform(-1.0, 1.0)
    A = np.array([[r * np.exp(1j * theta)]])
    B = (1.0 + 1j * beta) / np.conj(A)
    return WavepacketFrame(A=A, B=B, hbar=hbar, a=[rng.uniform(-1, 1)],
                           eta=[rng.uniform(-1, 1)],
                           detA_arg=float(np.angle(A[0, 0])))


# -- multiindex --------------------------------------------------------------


@check("graded enumeration counts and prefix", "multiindex", exact=True)
def _enum(tolscale, rng):
    ok = True
    for d in (1, 2, 3):
        for N in (0, 1, 4):
            idx = enumerate_upto(d, N)
            ok &= len(idx) == count_upto(d, N)
            ok &= len(set(idx)) == len(idx)
            if N >= 1:
                ok &= idx[: count_upto(d, N - 1)] == enumerate_upto(d, N - 1)
    ok &= count_exact_degree(3, 3) == 10 == comb(3 + 2, 3 - 1)
    return 0.0 if ok else 2.0


@check("hockey-stick identity (q <= 11)", "multiindex", exact=True)
def _hockey(tolscale, rng):
    ok = all(hockey_stick_holds(q, p)
             for q in range(2, 12) for p in range(2, q + 2))
    return 0.0 if ok else 2.0


@check("shell growth inequality (d <= 4, q <= 10)", "multiindex", exact=True)
def _shell(tolscale, rng):
    ok = all(shell_growth_bound_holds(d, q, n)
             for d in range(1, 5) for q in range(0, 11) for n in range(0, q + 1))
    return 0.0 if ok else 2.0


# -- classical ---------------------------------------------------------------


@check("harmonic flow closed form", "classical")
def _harm_flow(tolscale, rng):
    h = pots.harmonic()
    tr = integrate_flow(h, initial_state(1.0, 0.0), np.pi / 2, tol=1e-11)
    s = tr.state_at(np.pi / 2)
    err = max(abs(s.a[0] - np.cos(np.pi / 2)), abs(s.eta[0] + np.sin(np.pi / 2)),
              abs(s.A[0, 0] - np.exp(1j * np.pi / 2)),
              abs(s.S - (-np.sin(np.pi) / 4)))
    return err / (1e-9 * tolscale)


@check("symplectic residual preservation", "classical")
def _cond1(tolscale, rng):
    q = pots.quartic_well()
    tr = integrate_flow(q, initial_state(1.0, 0.0), 2.0, tol=1e-11)
    return tr.max_cond1_residual() / (1e-9 * tolscale)


@check("energy conservation", "classical")
def _energy(tolscale, rng):
    q = pots.quartic_well()
    tr = integrate_flow(q, initial_state(1.0, 0.5), 3.0, tol=1e-11)
    return tr.energy_drift() / (3e-10 * tolscale)


@check("Re(B A^-1) positive with (Re B A^-1)^-1 = A A*", "classical")
def _pd(tolscale, rng):
    q = pots.quartic_well()
    tr = integrate_flow(q, initial_state(1.0, 0.0), 2.0, tol=1e-12)
    worst = 0.0
    for t in np.linspace(0.2, 2.0, 7):
        s = tr.state_at(t)
        M = np.real(s.B @ np.linalg.inv(s.A))
        if np.any(np.linalg.eigvalsh(M) <= 0):
            return 2.0
        worst = max(worst, float(np.abs(np.linalg.inv(M) - s.A @ s.A.conj().T).max()))
    return worst / (1e-10 * tolscale)


@check("time reversal returns initial state", "classical")
def _rev(tolscale, rng):
    q = pots.quartic_well()
    tol = 1e-10
    tr = integrate_flow(q, initial_state(1.0, 0.0), 2.0, tol=tol)
    back = integrate_flow(q, tr.state_at(2.0), 0.0, tol=tol)
    s = back.state_at(0.0)
    err = max(abs(s.a[0] - 1.0), abs(s.eta[0]),
              float(np.abs(s.A - np.eye(1)).max()),
              float(np.abs(s.B - np.eye(1)).max()), abs(s.S))
    return err / (100 * tol * tolscale)


@check("tangent-flow identity for A(t)", "classical")
def _linz(tolscale, rng):
    h = pots.harmonic()
    dev = linearization_check(h, initial_state(1.0, 0.0), 2.0, 1e-5, tol=1e-11)
    return dev / (1e-6 * tolscale)


@check("hyperbolic growth rate fit", "classical")
def _lyap(tolscale, rng):
    dw = pots.double_well()
    fit = lyapunov_fit(integrate_flow(dw, initial_state(0.0, 0.0), 10.0, tol=1e-10))
    return abs(fit.rate - 1.0) / (0.05 * tolscale)


# -- basis -------------------------------------------------------------------


@check("orthonormality on quadrature grid", "basis")
def _gram(tolscale, rng):
    worst = 0.0
    for hbar in (1.0, 0.1):
        fr = _random_frame_1d(rng, hbar)
        center, half = quadrature_box(fr, 8)
        x = np.linspace(center[0] - half, center[0] + half, 4096)
        tab = evaluate_basis(fr, 8, x)
        G = tab @ tab.conj().T * (x[1] - x[0])
        worst = max(worst, float(np.abs(G - np.eye(len(G))).max()))
    return worst / (1e-6 * tolscale)


@check("ladder exactness: lower(raise) = j_m + 1", "basis", exact=True)
def _ladder(tolscale, rng):
    # the squared ladder factors are exact integers; the float composition
    # is then correct to a couple of ulp
    fr = WavepacketFrame(A=np.eye(2), B=np.eye(2), hbar=0.3, a=[0, 0], eta=[0, 0])
    j = (2, 1)
    c = BasisCoefficients(frame=fr, data={j: 1.0 + 0.5j}, support=3)
    for m in range(2):
        fac = np.sqrt(j[m] + 1.0)
        if int(round(fac * fac)) != j[m] + 1:
            return 2.0
        up = apply_raising(fr, m, c)
        down = apply_lowering(fr, m, up)
        got = down.get(j)
        want = c.get(j) * (j[m] + 1)
        if abs(got - want) > 4 * np.finfo(float).eps * abs(want):
            return 2.0
    return 0.0


@check("ladder commutator [lower_m, raise_n] = delta", "basis")
def _comm(tolscale, rng):
    worst = 0.0
    for d in (1, 2, 3):
        fr = WavepacketFrame(A=np.eye(d), B=np.eye(d), hbar=0.7,
                             a=[0] * d, eta=[0] * d)
        data = {}
        for j in enumerate_upto(d, 5):
            data[j] = complex(rng.standard_normal(), rng.standard_normal())
        c = BasisCoefficients(frame=fr, data=data, support=5)
        nrm = c.norm()
        for m in range(d):
            for n in range(d):
                lhs1 = apply_raising(fr, n, apply_lowering(fr, m, c))
                lhs2 = apply_lowering(fr, m, apply_raising(fr, n, c))
                delta = 1.0 if m == n else 0.0
                keys = set(lhs1.data) | set(lhs2.data) | set(c.data)
                err = max(abs(lhs2.get(j) - lhs1.get(j) - delta * c.get(j))
                          for j in keys)
                worst = max(worst, err / nrm)
    return worst / (1e-12 * tolscale)


@check("position-operator quadrature oracle", "basis")
def _pos(tolscale, rng):
    fr = WavepacketFrame(A=[[1.0]], B=[[1.0]], hbar=1.0, a=[0.0], eta=[0.0])
    out = apply_position(fr, 0, BasisCoefficients.delta(fr))
    x = np.linspace(-12, 12, 4096)
    tab = evaluate_basis(fr, 1, x)
    overlap = np.sum(np.conj(tab[1]) * x * tab[0]) * (x[1] - x[0])
    err = abs(out.get((1,)) - overlap)
    return err / (1e-8 * tolscale)


@check("matrix-element band and size bounds", "basis")
def _esgaus(tolscale, rng):
    fr = _random_frame_1d(rng, 0.4)
    hbar = fr.hbar
    anorm = float(np.abs(fr.A[0, 0]))
    worst = 0.0
    for m_ord in (1, 2, 3):
        for k in range(7):
            c = BasisCoefficients(frame=fr, data={(k,): 1.0 + 0j}, support=k)
            v = c
            for _ in range(m_ord):
                v = apply_position(fr, 0, v)
            for j in range(7):
                el = v.get((j,))
                if abs(j - k) > m_ord and abs(el) > 1e-13:
                    return 2.0
                cap = (hbar ** (m_ord / 2.0) * (np.sqrt(2.0)) ** m_ord
                       * anorm ** m_ord
                       * np.sqrt(factorial_ratio(k + m_ord, k)))
                worst = max(worst, abs(el) / cap)
    return worst


@check("position power operator norm bound", "basis")
def _opnorm(tolscale, rng):
    fr = _random_frame_1d(rng, 0.3)
    n, m_ord = 6, 2
    cols = []
    for k in range(n + 1):
        c = BasisCoefficients(frame=fr, data={(k,): 1.0 + 0j}, support=k)
        for _ in range(m_ord):
            c = apply_position(fr, 0, c)
        col = np.zeros(n + m_ord + 1, dtype=complex)
        for (j,), val in c.data.items():
            col[j] = val
        cols.append(col)
    M = np.array(cols).T
    # power iteration on M* M
    v = rng.standard_normal(n + 1) + 1j * rng.standard_normal(n + 1)
    v /= np.linalg.norm(v)
    for _ in range(200):
        w = M.conj().T @ (M @ v)
        v = w / np.linalg.norm(w)
    sigma = float(np.sqrt(np.linalg.norm(M.conj().T @ (M @ v))))
    cap = ((np.sqrt(2 * fr.hbar) * 1 * np.abs(fr.A[0, 0])) ** m_ord
           * np.sqrt(factorial_ratio(n + m_ord, n)))
    return sigma / cap


@check("position uncertainty of excited states", "basis")
def _uncert(tolscale, rng):
    fr = _random_frame_1d(rng, 0.5)
    center, half = quadrature_box(fr, 6)
    x = np.linspace(center[0] - half, center[0] + half, 8192)
    tab = evaluate_basis(fr, 6, x)
    dx = x[1] - x[0]
    worst = 0.0
    for j in range(7):
        p = np.abs(tab[j]) ** 2
        mean = np.sum(x * p) * dx
        var = np.sum((x - mean) ** 2 * p) * dx
        want = np.sqrt((j + 0.5) * fr.hbar) * np.abs(fr.A[0, 0])
        worst = max(worst, abs(np.sqrt(var) - want))
    return worst / (1e-8 * tolscale)


@check("ground-state branch through a quarter period", "basis")
def _branch(tolscale, rng):
    h = pots.harmonic()
    tr = integrate_flow(h, initial_state(0.0, 0.0), np.pi / 2, tol=1e-11)
    fr = frame_at(tr, np.pi / 2, 1.0)
    val = evaluate_phi0(fr, [[0.0]])[0]
    err = abs(val - np.pi ** -0.25 * np.exp(-1j * np.pi / 4))
    return err / (1e-9 * tolscale)


# -- potentials --------------------------------------------------------------


@check("polynomial and gaussian Taylor oracles", "potentials", exact=True)
def _taylor(tolscale, rng):
    q = pots.quartic_well()
    t = q.taylor_coeffs([1.0], 4)
    if abs(t[(3,)] - 0.4) > 1e-14 or abs(t[(4,)] - 0.1) > 1e-14:
        return 2.0
    h = pots.harmonic()
    th = h.taylor_coeffs([0.7], 6)
    if any(abs(th[(k,)]) > 0 for k in range(3, 7)):
        return 2.0
    g = pots.GaussianSum(1, [1.0], [[0.0]], [[1.0]])
    tg = g.taylor_coeffs([0.0], 6)
    if abs(tg[(6,)] + 1.0 / 6.0) > 1e-14:
        return 2.0
    return 0.0


@check("Taylor polynomial reproduces values to degree 5", "potentials")
def _taylor_consist(tolscale, rng):
    g = pots.GaussianSum(1, [2.0], [[0.3]], [[1.2]])
    a = np.array([0.9])
    t = g.taylor_coeffs(a, 4)
    errs = []
    for h in (0.1, 0.05):
        pred = sum(c * h ** m[0] for m, c in t.items())
        errs.append(abs(float(g.value(a + h)) - pred))
    order = np.log2(errs[0] / errs[1])
    return 0.0 if order > 4.5 else 2.0


@check("finite differences match analytic derivatives", "potentials")
def _fd(tolscale, rng):
    g = pots.GaussianSum(1, [1.5], [[0.2]], [[0.9]])
    a = np.array([0.5])
    grad = g.gradient(a)[0]
    errs = []
    for h in (1e-3, 5e-4):
        fd = (float(g.value(a + h)) - float(g.value(a - h))) / (2 * h)
        errs.append(abs(fd - grad))
    order = np.log2(errs[0] / errs[1])
    return 0.0 if order > 1.9 else 2.0


@check("decay certificates", "potentials", exact=True)
def _decay(tolscale, rng):
    g = pots.GaussianSum(1, [1.0], [[0.0]], [[1.0]],
                         decay=pots.DecayMetadata(2.0, 4.0, 4.0))
    if pots.decay_check(g, 10.0, n_samples=201) > 1.0:
        return 2.0
    if pots.decay_check(pots.free_potential(), 5.0, n_samples=31) != 0.0:
        return 2.0
    try:
        pots.decay_check(pots.quartic_well(), 5.0)
        return 2.0
    except MissingDecayMetadata:
        return 0.0


# -- hierarchy ---------------------------------------------------------------


def _quartic_hierarchy(l=5, p_resolved=True, tol=1e-10):
    q = pots.quartic_well()
    tr = integrate_flow(q, initial_state(1.0, 0.0), 1.0, tol=1e-11)
    fr = frame_at(tr, 0.0, 0.1)
    h = integrate_hierarchy(tr, q, BasisCoefficients.delta(fr), l=l,
                            p_resolved=p_resolved, tol=tol)
    return q, tr, h


@check("harmonic cascade vanishes identically", "hierarchy", exact=True)
def _harm_cascade(tolscale, rng):
    h = pots.harmonic()
    tr = integrate_flow(h, initial_state(1.0, 0.0), 1.0, tol=1e-10)
    fr = frame_at(tr, 0.0, 0.1)
    hh = integrate_hierarchy(tr, h, BasisCoefficients.delta(fr), l=4)
    worst = max(hh.layer_norm(k, 1.0) for k in range(1, 4))
    return 0.0 if worst == 0.0 else 2.0


@check("layer support never exceeds J + 3k", "hierarchy", exact=True)
def _sparsity(tolscale, rng):
    _, _, h = _quartic_hierarchy()
    return 0.0 if h.support_violation() == 0.0 else 2.0


@check("cascade never reads hbar", "hierarchy", exact=True)
def _hbar_free(tolscale, rng):
    q = pots.quartic_well()
    out = []
    for hbar in (0.1, 0.05):
        fr = WavepacketFrame(A=[[1.0]], B=[[1.0]], hbar=hbar, a=[1.0], eta=[0.0])
        r = apply_potential_term(q.taylor_shell([1.0], 3), fr, 3,
                                 BasisCoefficients.delta(fr))
        out.append(r.data)
    same = set(out[0]) == set(out[1]) and all(out[0][j] == out[1][j] for j in out[0])
    return 0.0 if same else 2.0


@check("per-p split telescopes to the layer", "hierarchy")
def _telescope(tolscale, rng):
    _, _, h = _quartic_hierarchy()
    return h.telescope_error() / (1e-10 * tolscale)


@check("factorial-growth layer bound", "hierarchy")
def _cor_bound(tolscale, rng):
    q, tr, h = _quartic_hierarchy()
    bounds = bound_constants(tr, q)
    return float(np.max(h.corollary_margins(bounds)))


@check("per-p layer bound (k <= 4)", "hierarchy")
def _p_bound(tolscale, rng):
    q, tr, h = _quartic_hierarchy()
    bounds = bound_constants(tr, q)
    margins = h.part_margins(bounds)
    return max(v for (k, p), v in margins.items() if k <= 4)


@check("cascade linearity under binary scaling", "hierarchy", exact=True)
def _linear(tolscale, rng):
    q = pots.quartic_well()
    tr = integrate_flow(q, initial_state(1.0, 0.0), 1.0, tol=1e-10)
    fr = frame_at(tr, 0.0, 0.1)
    c1 = BasisCoefficients(frame=fr, data={(0,): 1.0 + 0j}, support=0)
    c2 = BasisCoefficients(frame=fr, data={(0,): 2.0 + 0j}, support=0)
    h1 = integrate_hierarchy(tr, q, c1, l=4, tol=1e-9)
    h2 = integrate_hierarchy(tr, q, c2, l=4, tol=1e-9)
    for k in range(1, 4):
        if not np.array_equal(2.0 * h1.layer_dense(k, 1.0), h2.layer_dense(k, 1.0)):
            return 2.0
    return 0.0


# -- truncation --------------------------------------------------------------


@check("truncation rules and degenerate profile", "truncation", exact=True)
def _choose(tolscale, rng):
    if choose_l(0.05, g=0.5) != 10 or choose_l(0.6, g=0.5) != 1:
        return 2.0
    if choose_l(0.1, profile=[1.0, 0.0, 0.0]) != 1:
        return 2.0
    try:
        choose_l(0.1, profile=[1.0, 1.5, 0.2])
        return 2.0
    except Exception:
        return 0.0


@check("harmonic assembly is the exact solution", "truncation")
def _harm_exact(tolscale, rng):
    h = pots.harmonic()
    hbar = 0.1
    tr = integrate_flow(h, initial_state(1.0, 0.0), 1.0, tol=1e-11)
    fr = frame_at(tr, 0.0, hbar)
    c0 = BasisCoefficients.from_pairs(
        fr, [[[0], 1 / np.sqrt(2), 0.0], [[1], 1 / np.sqrt(2), 0.0]])
    hh = integrate_hierarchy(tr, h, c0, l=3, tol=1e-11)
    grid = GridSpec(d=1, center=(0.5,), halfwidths=(5.0,),
                    points_per_axis=2048, dt=2e-4)
    x = grid.mesh()
    psi0 = assemble_wavefunction(hh, 0.0, hbar, 3, x)
    psi_o = propagate(grid, h, psi0, hbar, 1.0)[0]
    psi_a = assemble_wavefunction(hh, 1.0, hbar, 3, x)
    return l2_error(psi_a, psi_o, grid).raw / (1e-6 * tolscale)


@check("defect vanishes for quadratic potentials", "truncation")
def _resid_zero(tolscale, rng):
    h = pots.harmonic()
    hbar = 0.1
    tr = integrate_flow(h, initial_state(1.0, 0.0), 1.0, tol=1e-11)
    fr = frame_at(tr, 0.0, hbar)
    hh = integrate_hierarchy(tr, h, BasisCoefficients.delta(fr), l=2, tol=1e-11)
    x = np.linspace(-5, 6, 2048)
    r = residual_norm(hh, 0.5, h, hbar, 2, x)
    return r / (1e-12 * tolscale)


@check("defect matches the time-difference oracle", "truncation")
def _resid_oracle(tolscale, rng):
    q = pots.quartic_well()
    hbar, l, t = 0.1, 2, 1.0
    tr = integrate_flow(q, initial_state(1.0, 0.0), 1.2, tol=1e-11)
    fr = frame_at(tr, 0.0, hbar)
    hh = integrate_hierarchy(tr, q, BasisCoefficients.delta(fr), l=l, tol=1e-11)
    grid = GridSpec(d=1, center=(0.3,), halfwidths=(6.0,),
                    points_per_axis=4096, dt=1e-4)
    x = grid.mesh()
    r = residual_norm(hh, t, q, hbar, l, x)
    dt = 1e-5
    plus = assemble_wavefunction(hh, t + dt, hbar, l, x)
    minus = assemble_wavefunction(hh, t - dt, hbar, l, x)
    dpsi = (plus - minus) / (2 * dt)
    hpsi = apply_hamiltonian(grid, q, assemble_wavefunction(hh, t, hbar, l, x), hbar)
    r_oracle = grid_norm(1j * hbar * dpsi - hpsi, grid)
    return abs(r - r_oracle) / (0.05 * r_oracle * tolscale)


@check("localization mass basics", "truncation")
def _loc(tolscale, rng):
    fr = WavepacketFrame(A=[[1.0]], B=[[1.0]], hbar=0.1, a=[0.0], eta=[0.0])
    x = np.linspace(-12, 12, 8192)
    psi = evaluate_phi0(fr, x)
    b_tail = 10 * np.sqrt(0.1)
    tail = localization_mass(psi, x, [0.0], b_tail)
    full = localization_mass(psi, x, [0.0], 0.0)
    masses = [localization_mass(psi, x, [0.0], b) for b in (0.25, 0.5, 1.0)]
    mono = all(m1 >= m2 for m1, m2 in zip(masses, masses[1:]))
    ok = tail < 1e-10 and abs(full - 1.0) < 1e-8 and mono
    return 0.0 if ok else 2.0


@check("long-time schedule window", "truncation", exact=True)
def _ehren(tolscale, rng):
    s = ehrenfest_schedule(1 / 8.0, 1.0, 0.0, 1.0, 0.01, kappa=7.0)
    if abs(s.T - np.log(100.0) / 8.0) > 1e-12 or abs(s.g - 0.01 ** (7 / 8)) > 1e-12:
        return 2.0
    try:
        ehrenfest_schedule(1.0, 1.0, 1.0, 1.0, 0.1)
        return 2.0
    except EmptyWindow:
        pass
    # T' = (1 - eps) / (6 lambda) admissible as tau -> 0
    lam, eps = 1.3, 0.05
    kappa_window((1 - eps) / (6 * lam), lam, 0.0, 1.0)
    return 0.0


# -- oracle ------------------------------------------------------------------


@check("free Gaussian dispersion closed form", "oracle")
def _free_disp(tolscale, rng):
    hbar, sigma, k0 = 1.0, 1.0, 1.5
    grid = GridSpec(d=1, center=(3.0,), halfwidths=(24.0,),
                    points_per_axis=4096, dt=1e-3)
    x = grid.mesh()[:, 0]
    psi0 = (np.pi * sigma**2) ** -0.25 * np.exp(-x**2 / (2 * sigma**2) + 1j * k0 * x)
    t = 2.0
    free = pots.Polynomial(1, {})
    psi = propagate(grid, free, psi0, hbar, t)[0]
    s = sigma**2 + 1j * hbar * t
    exact = ((np.pi * sigma**2) ** -0.25 * np.sqrt(sigma**2 / s)
             * np.exp(-(x - hbar * k0 * t) ** 2 / (2 * s)
                      + 1j * k0 * x - 0.5j * hbar * k0**2 * t))
    return l2_error(psi, exact, grid).raw / (1e-9 * tolscale)


@check("coherent-state revival after one period", "oracle")
def _revival(tolscale, rng):
    h = pots.harmonic()
    hbar = 1.0
    grid = GridSpec(d=1, center=(0.0,), halfwidths=(14.0,),
                    points_per_axis=2048, dt=2e-4)
    x = grid.mesh()
    fr = WavepacketFrame(A=[[1.0]], B=[[1.0]], hbar=hbar, a=[1.0], eta=[0.0])
    psi0 = evaluate_phi0(fr, x)
    psi = propagate(grid, h, psi0, hbar, 2 * np.pi)[0]
    ov = abs(grid_inner(psi, psi0, grid))
    return abs(ov - 1.0) / (1e-8 * tolscale)


@check("norm drift over 10^4 split steps", "oracle")
def _drift(tolscale, rng):
    q = pots.quartic_well()
    grid = GridSpec(d=1, center=(0.0,), halfwidths=(8.0,),
                    points_per_axis=1024, dt=1e-4)
    x = grid.mesh()
    fr = WavepacketFrame(A=[[1.0]], B=[[1.0]], hbar=0.5, a=[0.5], eta=[0.0])
    psi0 = evaluate_phi0(fr, x)
    psi = propagate(grid, q, psi0, 0.5, 1.0)[0]
    return abs(grid_norm(psi, grid) - grid_norm(psi0, grid)) / (1e-11 * tolscale)


@check("second-order accuracy in dt", "oracle")
def _dt_order(tolscale, rng):
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
        grid_f = GridSpec(d=1, center=(0.0,), halfwidths=(8.0,),
                          points_per_axis=2048, dt=dt / 16)
        ref = propagate(grid_f, q, psi0, hbar, 1.0)[0]
        errs.append(l2_error(psi, ref, grid).raw)
    order = np.log2(errs[0] / errs[1])
    return 0.0 if order >= 1.9 else 2.0


@check("distance basics: zero, sign flip, orthogonality", "oracle")
def _l2(tolscale, rng):
    grid = GridSpec(d=1, center=(0.0,), halfwidths=(12.0,),
                    points_per_axis=2048, dt=1e-3)
    x = grid.mesh()
    fr = WavepacketFrame(A=[[1.0]], B=[[1.0]], hbar=1.0, a=[0.0], eta=[0.0])
    tab = evaluate_basis(fr, 1, x)
    e0 = l2_error(tab[0], tab[0], grid)
    e1 = l2_error(tab[0], -tab[0], grid)
    e2 = l2_error(tab[0], tab[1], grid)
    ok = (e0.raw == 0.0 and abs(e1.raw - 2.0) < 1e-9
          and e1.phase_optimized < 1e-7 and abs(e2.raw - np.sqrt(2)) < 1e-9)
    return 0.0 if ok else 2.0


# -- scattering --------------------------------------------------------------


@check("free potential gives the identity map", "scattering", exact=True)
def _free_id(tolscale, rng):
    free = pots.free_potential()
    past, _ = classical_asymptotics(free, initial_state(0.5, 2.0), "past", tol=1e-10)
    res = smatrix_apply({(0,): 1.0 + 0j}, past, free, 0.1, g=0.3)
    ok = (res.unitarity_deviation == 0.0 and abs(res.future.S) < 1e-12
          and np.allclose(res.future.a, [0.5]) and np.allclose(res.future.eta, [2.0]))
    return 0.0 if ok else 2.0


@check("energy conservation links asymptotic momenta", "scattering")
def _energy_link(tolscale, rng):
    gb = pots.gaussian_barrier()
    fut_t, _ = classical_asymptotics(gb, initial_state(-10.0, 3.0), "future", tol=1e-9)
    fut_r, _ = classical_asymptotics(gb, initial_state(-10.0, 2.0), "future", tol=1e-9)
    err = max(abs(fut_t.eta[0] - 3.0), abs(fut_r.eta[0] + 2.0))
    return err / (1e-7 * tolscale)


@check("extracted matrices satisfy the normalization", "scattering")
def _asym_cond1(tolscale, rng):
    gb = pots.gaussian_barrier()
    fut, _ = classical_asymptotics(gb, initial_state(-8.0, 4.0), "future", tol=1e-9)
    past, _ = classical_asymptotics(gb, initial_state(-8.0, 4.0), "past", tol=1e-9)
    worst = max(*fut.cond1_residuals(), *past.cond1_residuals())
    return worst / (1e-8 * tolscale)


@check("forward run from extracted past matches the future", "scattering")
def _scatter_rev(tolscale, rng):
    from .scattering import seed_state_from_past
    gb = pots.gaussian_barrier()
    tol = 1e-9
    init = initial_state(-8.0, 4.0)
    fut0, _ = classical_asymptotics(gb, init, "future", tol=tol)
    past, _ = classical_asymptotics(gb, init, "past", tol=tol)
    fut1, _ = classical_asymptotics(gb, seed_state_from_past(past, -20.0),
                                    "future", tol=tol)
    gap = max(float(np.abs(fut0.a - fut1.a).max()),
              float(np.abs(fut0.eta - fut1.eta).max()),
              float(np.abs(fut0.A - fut1.A).max()),
              float(np.abs(fut0.B - fut1.B).max()), abs(fut0.S - fut1.S))
    return gap / (10 * tol * tolscale)


def run_all(tolerance_scale: float = 1.0, seed: int = 20240817,
            modules=None) -> list[CheckResult]:
    """Run the registry; tolerance_scale < 1 tightens every tolerance."""
    results = []
    for name, module, exact, fn in _REGISTRY:
        if modules and module not in modules:
            continue
        rng = np.random.default_rng(seed)
        try:
            margin = float(fn(tolerance_scale, rng))
            passed = margin <= 1.0
            detail = ""
        except Exception as exc:          # noqa: BLE001 - reported, not hidden
            margin = float("inf")
            passed = False
            detail = f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name=name, module=module, passed=passed,
                                   margin=margin, exact=exact, detail=detail))
    return results


def fragile_names() -> set:
    """Checks expected to fail under 100x tighter tolerances."""
    return {name for name, module, exact, fn in _REGISTRY if not exact}


def exact_names() -> set:
    return {name for name, module, exact, fn in _REGISTRY if exact}
