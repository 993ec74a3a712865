"""Order-by-order coefficient cascade of the hbar^(1/2) expansion.

Writing the solution as exp(iS/hbar) sum_j c_j(t, hbar) phi_j with
c = sum_k hbar^(k/2) c_k(t), the layers solve the triangular system

    i dc_0/dt = 0,
    i dc_n/dt = sum_{k=0}^{n-1} K_{n+2-k}(t) c_k(t),      n >= 1,

where K_q(t) = sum_{|m|=q} (D^m V)(a(t))/m! X(t)^m and X_i(t) is the
hbar-free matrix of (x_i - a_i)/sqrt(hbar) in the moving basis:
X_i = 2^{-1/2} sum_p ( A_ip(t) raising_p + conj(A_ip(t)) lowering_p ).
Nothing here reads hbar; the same layers serve every hbar.

Each K_q grows multi-index support by exactly q, so layer k lives on
|j| <= J + 3k; that sparsity is enforced by construction and asserted.

Every layer also splits by the number p of potential-term applications:

    i d/dt c_k^[1] = K_{k+2} c_0,
    i d/dt c_k^[p] = sum_{n=p-1}^{k-1} K_{k+2-n} c_n^[p-1],   2 <= p <= k,

with sum_p c_k^[p] = c_k.  Layers and split parts are integrated jointly
in one adaptive state vector so the telescoping holds to roundoff, and the
split parts feed the per-p norm bound verifier.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial

import numpy as np
from scipy.integrate import solve_ivp

from .basis import BasisCoefficients, WavepacketFrame, apply_position_scaled
from .classical import Trajectory
from .errors import FrameMismatch, NotPResolved, StepSizeUnderflow, SupportOverflow
from .multiindex import (GradedBasis, count_upto, enumerate_upto,
                         factorial_ratio, graded_basis, iter_exact_degree)
from .potentials import PotentialModel

_SUPPORT_BUDGET = 4_000_000


def apply_potential_term(taylor: dict, frame: WavepacketFrame, k: int,
                         coeffs: BasisCoefficients) -> BasisCoefficients:
    """Apply K_k = sum_{|m|=k} (D^m V(a)/m!) X^m to a coefficient vector.

    taylor maps multi-indices to normalized coefficients D^m V(a)/m! and must
    cover |m| = k.  Matrix-free: sequential scaled-position applications along
    each axis of m, so the support grows by exactly k.  Entries never depend
    on frame.hbar.
    """
    if k < 3:
        raise ValueError(f"potential terms start at order 3, got {k}")
    if not frame.matches(coeffs.frame):
        raise FrameMismatch("coefficients belong to a different frame")
    total: dict = {}
    for m in iter_exact_degree(frame.d, k):
        w = taylor.get(m, 0.0)
        if w == 0.0:
            continue
        v = coeffs
        for axis, mi in enumerate(m):
            for _ in range(mi):
                v = apply_position_scaled(frame, axis, v)
        for j, c in v.data.items():
            total[j] = total.get(j, 0.0) + w * c
    total = {j: c for j, c in total.items() if c != 0.0}
    return BasisCoefficients(frame=frame, data=total, support=coeffs.support + k)


class _CascadeOperator:
    """Dense ladder kernels on one graded index space."""

    def __init__(self, basis: GradedBasis):
        self.basis = basis
        self.d = basis.d
        self.maps = [basis.ladder_maps(axis) for axis in range(basis.d)]

    def position_apply(self, A: np.ndarray, vec: np.ndarray, axis: int) -> np.ndarray:
        out = np.zeros_like(vec)
        inv_sqrt2 = 1.0 / np.sqrt(2.0)
        for p in range(self.d):
            src, dst, fac = self.maps[p]
            if A[axis, p] != 0.0:
                out[dst] += (A[axis, p] * inv_sqrt2) * (fac * vec[src])
                out[src] += (np.conj(A[axis, p]) * inv_sqrt2) * (fac * vec[dst])
        return out

    def power_table(self, A: np.ndarray, vec: np.ndarray, max_extra: int) -> dict:
        """X^m vec for every |m| <= max_extra, each computed once."""
        zero = tuple([0] * self.d)
        table = {zero: vec}
        for m in enumerate_upto(self.d, max_extra):
            if sum(m) == 0:
                continue
            axis = next(i for i, mi in enumerate(m) if mi > 0)
            parent = list(m)
            parent[axis] -= 1
            table[m] = self.position_apply(A, table[tuple(parent)], axis)
        return table


@dataclass(frozen=True)
class CascadeBounds:
    """Computed constants feeding the layer-norm bound verifiers.

    taylor_sup  : max(1, sup_t sup_n delta^|n| |D^n V(a(t))| / n!)
    frame_gain  : max(1, sup_t sqrt(2) d ||A(t)|| / delta)
    cubic_count : number of multi-indices with |m| = 3, C(d+2, d-1)
    growth_base : 1 + taylor_sup * frame_gain^2 * T
    """

    taylor_sup: float
    frame_gain: float
    cubic_count: int
    growth_base: float
    delta: float
    probe_order: int
    probe_exact: bool


def bound_constants(traj: Trajectory, pot: PotentialModel, delta: float = 1.0,
                    n_probe: int | None = None, n_samples: int | None = None) -> CascadeBounds:
    """Evaluate the bound constants along a trajectory.

    For polynomial potentials the supremum over derivative orders is a finite
    max, hence exact; otherwise a finite probe up to n_probe approximates it
    and the result is flagged accordingly.
    """
    if n_probe is None:
        n_probe = pot.max_taylor_order if pot.max_taylor_order is not None else 40
    probe_exact = pot.max_taylor_order is not None and n_probe >= pot.max_taylor_order
    lo, hi = traj.span
    if n_samples is None:
        n_samples = max(129, 4 * len(traj.ts))
    times = np.linspace(lo, hi, n_samples)
    d1 = 1.0
    d2 = 1.0
    for t in times:
        s = traj.state_at(t)
        t_coeffs = pot.taylor_coeffs(s.a, n_probe)
        local = max((delta ** sum(m)) * abs(c) for m, c in t_coeffs.items())
        d1 = max(d1, local)
        d2 = max(d2, np.sqrt(2.0) * traj.d * np.linalg.norm(s.A, 2) / delta)
    T = hi - lo
    return CascadeBounds(
        taylor_sup=float(d1), frame_gain=float(d2),
        cubic_count=comb(traj.d + 2, traj.d - 1),
        growth_base=float(1.0 + d1 * d2**2 * T),
        delta=delta, probe_order=n_probe, probe_exact=probe_exact,
    )


class CoefficientHierarchy:
    """Time-sampled layers c_k (and optional per-p parts) on one orbit."""

    def __init__(self, traj, pot, J, l, basis, times, c0, layers, parts, sol,
                 t0, tol):
        self.traj = traj
        self.pot = pot
        self.J = J
        self.l = l
        self.d = basis.d
        self.basis = basis
        self.times = times
        self.c0 = c0
        self.layers = layers          # (l, n_times, size); layer 0 constant
        self.parts = parts            # {(k, p): (n_times, size)} or None
        self._sol = sol
        self.t0 = t0
        self.tol = tol

    @property
    def p_resolved(self) -> bool:
        return self.parts is not None

    # -- access -------------------------------------------------------------

    def _state_slices(self):
        size = self.basis.size
        slices = {}
        off = 0
        for k in range(1, self.l):
            slices[("c", k)] = slice(off, off + size)
            off += size
        if self.p_resolved:
            for k in range(1, self.l):
                for p in range(1, k + 1):
                    slices[("part", k, p)] = slice(off, off + size)
                    off += size
        return slices, off

    def layer_dense(self, k: int, t: float) -> np.ndarray:
        """Dense layer vector on the shared graded index space."""
        if k == 0:
            return self.c0.copy()
        z = self._sol(t)
        slices, _ = self._state_slices()
        return z[slices[("c", k)]].copy()

    def part_dense(self, k: int, p: int, t: float) -> np.ndarray:
        if not self.p_resolved:
            raise NotPResolved("hierarchy was integrated without the p-split")
        z = self._sol(t)
        slices, _ = self._state_slices()
        return z[slices[("part", k, p)]].copy()

    def layer_map(self, k: int, t: float) -> dict:
        """Layer as a sparse multi-index map, trimmed to |j| <= J + 3k."""
        vec = self.layer_dense(k, t)
        bound = self.J + 3 * k
        out = {}
        for i, j in enumerate(self.basis.indices):
            if vec[i] != 0.0 and sum(j) <= bound:
                out[j] = vec[i]
        return out

    def layer_norm(self, k: int, t: float) -> float:
        return float(np.linalg.norm(self.layer_dense(k, t)))

    def sup_layer_norm(self, k: int) -> float:
        if k == 0:
            return float(np.linalg.norm(self.c0))
        idx = self._layer_index(k)
        return float(np.max(np.linalg.norm(self.layers[idx], axis=1)))

    def _layer_index(self, k):
        return k

    def norm_profile(self, hbar: float) -> np.ndarray:
        """hbar^(k/2) sup_t ||c_k(t)|| for k = 0 .. l-1."""
        return np.array([
            hbar ** (k / 2.0) * self.sup_layer_norm(k) for k in range(self.l)
        ])

    # -- invariants -----------------------------------------------------------

    def support_violation(self) -> float:
        """Largest |entry| found beyond |j| > J + 3k; must be exactly 0."""
        worst = 0.0
        for k in range(self.l):
            bound = self.J + 3 * k
            mask = self.basis.degrees > bound
            if not np.any(mask):
                continue
            vals = self.layers[k][:, mask] if k > 0 else self.c0[np.newaxis, mask]
            worst = max(worst, float(np.max(np.abs(vals))))
        if self.p_resolved:
            for (k, p), block in self.parts.items():
                mask = self.basis.degrees > self.J + k + 2 * p
                if np.any(mask):
                    worst = max(worst, float(np.max(np.abs(block[:, mask]))))
        return worst

    def telescope_error(self) -> float:
        """max_k max_t || sum_p c_k^[p](t) - c_k(t) || / max(1, ||c_k(t)||).

        Scaled by the layer norm: high layers grow like k!^(1/2) factors, so
        their representable absolute resolution is eps * ||c_k||; parts and
        layer are integrated jointly, keeping the defect at roundoff level.
        """
        if not self.p_resolved:
            raise NotPResolved("hierarchy was integrated without the p-split")
        worst = 0.0
        for k in range(1, self.l):
            total = sum(self.parts[(k, p)] for p in range(1, k + 1))
            diff = np.linalg.norm(total - self.layers[k], axis=1)
            scale = np.maximum(np.linalg.norm(self.layers[k], axis=1), 1.0)
            worst = max(worst, float(np.max(diff / scale)))
        return worst

    def corollary_margins(self, bounds: CascadeBounds) -> np.ndarray:
        """ratio of ||c_k(t)|| to its factorial-growth bound, per layer.

        The bound: ((J+3k)!/J!)^(1/2) frame_gain^k cubic_count^k / k!
                   * (1 + taylor_sup frame_gain^2 (t - t0))^k.
        """
        out = np.zeros(self.l)
        for k in range(1, self.l):
            pref = (np.sqrt(factorial_ratio(self.J + 3 * k, self.J))
                    * bounds.frame_gain**k * bounds.cubic_count**k
                    / factorial(k))
            worst = 0.0
            for i, t in enumerate(self.times):
                tau = abs(t - self.t0)
                cap = pref * (1.0 + bounds.taylor_sup * bounds.frame_gain**2 * tau) ** k
                nrm = float(np.linalg.norm(self.layers[k][i]))
                if cap > 0:
                    worst = max(worst, nrm / cap)
            out[k] = worst
        return out

    def part_margins(self, bounds: CascadeBounds) -> dict:
        """ratio of ||c_k^[p](t)|| to the per-p bound
        C(k-1, p-1) taylor_sup^p frame_gain^(k+2p) cubic_count^k
        ((J+k+2p)!/J!)^(1/2) tau^p / p!."""
        if not self.p_resolved:
            raise NotPResolved("hierarchy was integrated without the p-split")
        out = {}
        for (k, p), block in self.parts.items():
            pref = (comb(k - 1, p - 1) * bounds.taylor_sup**p
                    * bounds.frame_gain ** (k + 2 * p) * bounds.cubic_count**k
                    * np.sqrt(factorial_ratio(self.J + k + 2 * p, self.J)))
            worst = 0.0
            for i, t in enumerate(self.times):
                tau = abs(t - self.t0)
                if tau == 0.0:
                    continue
                cap = pref * tau**p / factorial(p)
                nrm = float(np.linalg.norm(block[i]))
                if cap > 0:
                    worst = max(worst, nrm / cap)
            out[(k, p)] = worst
        return out

    def to_json_dict(self) -> dict:
        snap = {
            "schema_version": 1,
            "J": self.J, "l": self.l, "d": self.d, "t0": self.t0,
            "times": list(map(float, self.times)),
            "layers": [],
        }
        for k in range(self.l):
            per_t = []
            for i, t in enumerate(self.times):
                vec = self.c0 if k == 0 else self.layers[k][i]
                entries = [
                    [list(j), float(vec[n].real), float(vec[n].imag)]
                    for n, j in enumerate(self.basis.indices)
                    if vec[n] != 0.0
                ]
                per_t.append(entries)
            snap["layers"].append(per_t)
        return snap


def dense_from_coeffs(c0: BasisCoefficients, basis: GradedBasis) -> np.ndarray:
    vec = np.zeros(basis.size, dtype=complex)
    for j, c in c0.data.items():
        vec[basis.position[j]] = c
    return vec


def integrate_hierarchy(traj: Trajectory, pot: PotentialModel,
                        c0_init: BasisCoefficients, l: int,
                        p_resolved: bool = False, tol: float = 1e-10,
                        t_span=None, t_eval=None,
                        max_step: float = np.inf) -> CoefficientHierarchy:
    """Integrate l layers of the cascade along a trajectory.

    c0_init must be supported on |j| <= J; layers k >= 1 start at zero.  The
    same embedded 5(4) scheme as the classical flow runs on one joint state
    vector driven by the trajectory interpolant, so one error control governs
    layers and split parts alike.
    """
    J = c0_init.support
    d = traj.d
    max_degree = J + 3 * max(l - 1, 0)
    n_entries = count_upto(d, max_degree) * max(l, 1)
    if p_resolved:
        n_entries *= l
    if n_entries > _SUPPORT_BUDGET:
        raise SupportOverflow(
            f"cascade would hold ~{n_entries:.2e} coefficients; "
            f"budget is {_SUPPORT_BUDGET:.1e}"
        )
    basis = graded_basis(d, max_degree)
    op = _CascadeOperator(basis)
    c0 = dense_from_coeffs(c0_init, basis)
    c0_norm = float(np.linalg.norm(c0))

    if t_span is None:
        lo, hi = traj.span
        t_span = (traj.init.t, hi if traj.init.t == lo else lo)
    t0, t1 = t_span
    size = basis.size
    n_layer_blocks = l - 1
    part_keys = []
    if p_resolved:
        part_keys = [(k, p) for k in range(1, l) for p in range(1, k + 1)]
    n_blocks = n_layer_blocks + len(part_keys)
    if n_blocks == 0 or l == 1:
        times = np.asarray(t_eval if t_eval is not None else np.linspace(t0, t1, 9))
        layers = np.zeros((l, len(times), size), dtype=complex)
        sol = _ConstantSolution(np.zeros(0, dtype=complex))
        h = CoefficientHierarchy(traj, pot, J, l, basis, times, c0, layers,
                                 {} if p_resolved else None, sol, t0, tol)
        return h

    max_order = l + 1

    def rhs(t, z):
        state = traj.state_at(t)
        shells = pot.taylor_coeffs(state.a, max_order)
        A = state.A
        blocks = z.reshape(n_blocks, size)
        dz = np.zeros_like(blocks)
        # power tables for c_0 and the layers
        tables = [op.power_table(A, c0, max_order)]
        for k in range(1, l):
            extra = l + 1 - k
            tables.append(op.power_table(A, blocks[k - 1], extra) if extra > 0 else {})
        for n in range(1, l):
            acc = np.zeros(size, dtype=complex)
            for k in range(n):
                q = n + 2 - k
                for m in iter_exact_degree(d, q):
                    w = shells.get(m, 0.0)
                    if w != 0.0:
                        acc += w * tables[k][m]
            dz[n - 1] = -1j * acc
        if p_resolved:
            part_index = {key: n_layer_blocks + i for i, key in enumerate(part_keys)}
            part_tables = {}
            for key in part_keys:
                k, p = key
                extra = l + 1 - k
                if extra > 0:
                    part_tables[key] = op.power_table(A, blocks[part_index[key]], extra)
            for key in part_keys:
                k, p = key
                acc = np.zeros(size, dtype=complex)
                if p == 1:
                    q = k + 2
                    for m in iter_exact_degree(d, q):
                        w = shells.get(m, 0.0)
                        if w != 0.0:
                            acc += w * tables[0][m]
                else:
                    for n in range(p - 1, k):
                        q = k + 2 - n
                        src = part_tables[(n, p - 1)]
                        for m in iter_exact_degree(d, q):
                            w = shells.get(m, 0.0)
                            if w != 0.0:
                                acc += w * src[m]
                dz[part_index[key]] = -1j * acc
        return dz.ravel()

    z0 = np.zeros(n_blocks * size, dtype=complex)
    sol = solve_ivp(rhs, (t0, t1), z0, method="RK45", rtol=tol,
                    atol=tol * max(c0_norm, 1e-30) * 0.1,
                    dense_output=True, t_eval=t_eval, max_step=max_step)
    if not sol.success:
        raise StepSizeUnderflow(f"cascade integration failed: {sol.message}")
    times = sol.t.copy()
    order = np.argsort(times)
    times = times[order]

    layers = np.zeros((l, len(times), size), dtype=complex)
    for i, oi in enumerate(order):
        blocks = sol.y[:, oi].reshape(n_blocks, size)
        for k in range(1, l):
            layers[k][i] = blocks[k - 1]
    parts = None
    if p_resolved:
        parts = {}
        for idx, key in enumerate(part_keys):
            block = np.zeros((len(times), size), dtype=complex)
            for i, oi in enumerate(order):
                block[i] = sol.y[:, oi].reshape(n_blocks, size)[n_layer_blocks + idx]
            parts[key] = block

    return CoefficientHierarchy(traj, pot, J, l, basis, times, c0, layers,
                                parts, sol.sol, t0, tol)


class _ConstantSolution:
    """Dense-output stand-in when only the constant layer exists."""

    def __init__(self, vec):
        self._vec = vec

    def __call__(self, t):
        return self._vec
