"""Classical and variational dynamics driving the wavepacket frames.

Integrates the coupled system

    da/dt   = eta
    deta/dt = -grad V(a)
    dA/dt   = i B
    dB/dt   = i Hess V(a) A
    dS/dt   = eta^2 / 2 - V(a)

with an embedded Runge-Kutta 5(4) pair (PI step control, dense output).
The pair (A, B) must satisfy the symplectic normalization

    A^t B - B^t A = 0,      A* B + B* A = 2 I,

which the flow preserves; the residuals are monitored, never re-projected,
so a drifting residual surfaces as an error instead of being masked.
The continuous argument of det A is tracked along the trajectory so that
square-root branches downstream never jump.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import Cond1Drift, SemiwaveError, StepSizeUnderflow
from .potentials import PotentialModel


@dataclass(frozen=True)
class ClassicalState:
    t: float
    a: np.ndarray
    eta: np.ndarray
    A: np.ndarray
    B: np.ndarray
    S: float

    @property
    def d(self) -> int:
        return len(self.a)


def initial_state(a, eta, A=None, B=None, t=0.0, S=0.0) -> ClassicalState:
    """Build a state from (possibly scalar) data; A, B default to identity."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    d = len(a)
    A = np.eye(d, dtype=complex) if A is None else np.asarray(A, dtype=complex).reshape(d, d)
    B = np.eye(d, dtype=complex) if B is None else np.asarray(B, dtype=complex).reshape(d, d)
    return ClassicalState(t=float(t), a=a, eta=eta, A=A, B=B, S=float(S))


def symplectic_residuals(A, B):
    """(skew residual, normalization residual) of the pair (A, B)."""
    d = A.shape[0]
    r1 = np.linalg.norm(A.T @ B - B.T @ A)
    r2 = np.linalg.norm(A.conj().T @ B + B.conj().T @ A - 2.0 * np.eye(d))
    return r1, r2


def cond1_scale(A, B) -> float:
    """Scale for the residuals: they are bilinear in (A, B), so their
    floating-point floor grows like ||A|| ||B|| on hyperbolic orbits."""
    return max(1.0, float(np.linalg.norm(A) * np.linalg.norm(B)))


def energy(pot: PotentialModel, state: ClassicalState) -> float:
    return 0.5 * float(np.dot(state.eta, state.eta)) + float(pot.value(state.a))


def _pack(state: ClassicalState) -> np.ndarray:
    d = state.d
    y = np.empty(2 * d + 4 * d * d + 1)
    y[:d] = state.a
    y[d:2 * d] = state.eta
    o = 2 * d
    y[o:o + d * d] = state.A.real.ravel()
    y[o + d * d:o + 2 * d * d] = state.A.imag.ravel()
    y[o + 2 * d * d:o + 3 * d * d] = state.B.real.ravel()
    y[o + 3 * d * d:o + 4 * d * d] = state.B.imag.ravel()
    y[-1] = state.S
    return y


def _unpack(t: float, y: np.ndarray, d: int) -> ClassicalState:
    o = 2 * d
    dd = d * d
    A = (y[o:o + dd] + 1j * y[o + dd:o + 2 * dd]).reshape(d, d)
    B = (y[o + 2 * dd:o + 3 * dd] + 1j * y[o + 3 * dd:o + 4 * dd]).reshape(d, d)
    return ClassicalState(t=float(t), a=y[:d].copy(), eta=y[d:2 * d].copy(),
                          A=A, B=B, S=float(y[-1]))


def _flow_rhs(pot: PotentialModel, d: int):
    dd = d * d

    def rhs(t, y):
        a = y[:d]
        eta = y[d:2 * d]
        o = 2 * d
        Ar = y[o:o + dd].reshape(d, d)
        Ai = y[o + dd:o + 2 * dd].reshape(d, d)
        v, grad, hess = pot.local_quadratic(a)
        dy = np.empty_like(y)
        dy[:d] = eta
        dy[d:2 * d] = -grad
        # dA/dt = iB  ->  Re' = -Im(B), Im' = Re(B)
        dy[o:o + dd] = -y[o + 3 * dd:o + 4 * dd]
        dy[o + dd:o + 2 * dd] = y[o + 2 * dd:o + 3 * dd]
        # dB/dt = i Hess A
        dy[o + 2 * dd:o + 3 * dd] = -(hess @ Ai).ravel()
        dy[o + 3 * dd:o + 4 * dd] = (hess @ Ar).ravel()
        dy[-1] = 0.5 * float(np.dot(eta, eta)) - v
        return dy

    return rhs


class Trajectory:
    """Dense-output solution of the classical system on one time span.

    States are exposed in ascending time regardless of integration
    direction. The continuous argument of det A is anchored to the
    principal value at the initial state.
    """

    def __init__(self, pot, init, sol, ts, states, tol):
        self.pot = pot
        self.init = init
        self.tol = tol
        self.d = init.d
        self._sol = sol
        order = np.argsort(ts)
        self.ts = ts[order]
        self.states = [states[i] for i in order]
        self._build_phase_table()

    # -- evaluation --------------------------------------------------------

    def state_at(self, t: float) -> ClassicalState:
        lo, hi = self.span
        if not (lo - 1e-12 <= t <= hi + 1e-12):
            raise ValueError(f"time {t} outside trajectory span {self.span}")
        return _unpack(t, self._sol(t), self.d)

    @property
    def span(self):
        return float(self.ts[0]), float(self.ts[-1])

    def position(self, t):
        return self.state_at(t).a

    def frame_matrices(self, t):
        s = self.state_at(t)
        return s.A, s.B

    # -- det A branch tracking ---------------------------------------------

    def _raw_arg(self, t) -> float:
        return float(np.angle(np.linalg.det(self.state_at(t).A)))

    def _build_phase_table(self):
        ts = list(self.ts)
        args = [self._raw_arg(t) for t in ts]
        # refine until adjacent arguments differ by < pi/2 modulo 2*pi;
        # the initial samples are solver steps, so the true phase cannot
        # rotate by ~2*pi inside one interval
        for _ in range(24):
            jumps = [
                i for i in range(len(ts) - 1)
                if abs(_wrap_pi(args[i + 1] - args[i])) > 0.5 * np.pi
            ]
            if not jumps:
                break
            for i in reversed(jumps):
                tm = 0.5 * (ts[i] + ts[i + 1])
                ts.insert(i + 1, tm)
                args.insert(i + 1, self._raw_arg(tm))
        else:
            raise SemiwaveError("could not resolve det A phase continuity")
        ts = np.array(ts)
        args = np.unwrap(np.array(args))
        anchor = int(np.argmin(np.abs(ts - self.init.t)))
        shift = self._raw_arg(self.init.t) - args[anchor]
        # shift is a multiple of 2*pi up to roundoff
        shift = 2.0 * np.pi * np.round(shift / (2.0 * np.pi))
        self._phase_ts = ts
        self._phase_args = args + shift

    def detA_arg(self, t) -> float:
        """Continuously tracked argument of det A(t)."""
        i = int(np.clip(np.searchsorted(self._phase_ts, t) - 1, 0,
                        len(self._phase_ts) - 1))
        # pick the nearer neighbor to keep the local jump small
        if i + 1 < len(self._phase_ts) and abs(self._phase_ts[i + 1] - t) < abs(self._phase_ts[i] - t):
            i += 1
        return self._phase_args[i] + _wrap_pi(self._raw_arg(t) - self._phase_args[i])

    # -- diagnostics ---------------------------------------------------------

    def max_cond1_residual(self, scaled: bool = False) -> float:
        worst = 0.0
        for s in self.states:
            r = max(symplectic_residuals(s.A, s.B))
            if scaled:
                r /= cond1_scale(s.A, s.B)
            worst = max(worst, r)
        return worst

    def energy_drift(self) -> float:
        e = [energy(self.pot, s) for s in self.states]
        return float(np.max(e) - np.min(e))

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "tol": self.tol,
            "t": self.ts.tolist(),
            "a": [s.a.tolist() for s in self.states],
            "eta": [s.eta.tolist() for s in self.states],
            "A_re": [s.A.real.tolist() for s in self.states],
            "A_im": [s.A.imag.tolist() for s in self.states],
            "B_re": [s.B.real.tolist() for s in self.states],
            "B_im": [s.B.imag.tolist() for s in self.states],
            "S": [s.S for s in self.states],
            "arg_detA": [self.detA_arg(t) for t in self.ts],
        }


def _wrap_pi(x: float) -> float:
    return (x + np.pi) % (2.0 * np.pi) - np.pi


def integrate_flow(pot: PotentialModel, init: ClassicalState, t_end: float,
                   tol: float = 1e-10, max_step: float = np.inf) -> Trajectory:
    """Integrate the classical system from init.t to t_end (either direction).

    Every emitted state keeps the symplectic-normalization residuals below
    10 * tol; a violation raises Cond1Drift, which signals that tol is too
    loose rather than being silently repaired.  max_step guards against
    stepping across a short-range interaction region from far away, where
    giant free-flight steps can straddle the bump with every stage outside.
    """
    r1, r2 = symplectic_residuals(init.A, init.B)
    if max(r1, r2) > 1e-8:
        raise Cond1Drift(
            f"initial (A, B) violate the normalization: residuals {r1:.2e}, {r2:.2e}"
        )
    if t_end == init.t:
        raise ValueError("empty integration span")
    sol = solve_ivp(
        _flow_rhs(pot, init.d), (init.t, t_end), _pack(init),
        method="RK45", rtol=tol, atol=tol * 1e-2, dense_output=True,
        max_step=max_step,
    )
    if not sol.success:
        raise StepSizeUnderflow(f"classical flow failed: {sol.message}")
    states = [_unpack(t, sol.y[:, i], init.d) for i, t in enumerate(sol.t)]
    traj = Trajectory(pot, init, sol.sol, sol.t.copy(), states, tol)
    worst = traj.max_cond1_residual(scaled=True)
    # drift accumulates with the span, like the energy defect
    allowance = 10.0 * tol * max(1.0, abs(t_end - init.t))
    if worst > allowance:
        raise Cond1Drift(
            f"scaled normalization residual {worst:.3e} exceeds {allowance:.1e}"
        )
    return traj


def linearization_check(pot, init, t_end, eps, tol=1e-10, n_times=9) -> float:
    """Max relative deviation of A(t) from the finite-difference tangent flow.

    A(t) should equal  (da(t)/da(0)) A(0) + i (da(t)/deta(0)) B(0);
    the Jacobians are central differences of the (a, eta) flow at step eps.
    """
    d = init.d
    base = integrate_flow(pot, init, t_end, tol)
    times = np.linspace(init.t, t_end, n_times)[1:]

    def flow_positions(state0):
        traj = integrate_flow(pot, state0, t_end, tol)
        return np.array([traj.state_at(t).a for t in times])

    Ja = np.empty((len(times), d, d))
    Je = np.empty((len(times), d, d))
    for k in range(d):
        da = np.zeros(d)
        da[k] = eps
        plus = flow_positions(initial_state(init.a + da, init.eta, init.A, init.B, t=init.t))
        minus = flow_positions(initial_state(init.a - da, init.eta, init.A, init.B, t=init.t))
        Ja[:, :, k] = (plus - minus) / (2.0 * eps)
        plus = flow_positions(initial_state(init.a, init.eta + da, init.A, init.B, t=init.t))
        minus = flow_positions(initial_state(init.a, init.eta - da, init.A, init.B, t=init.t))
        Je[:, :, k] = (plus - minus) / (2.0 * eps)

    worst = 0.0
    for i, t in enumerate(times):
        s = base.state_at(t)
        predicted = Ja[i] @ init.A + 1j * Je[i] @ init.B
        dev = np.linalg.norm(s.A - predicted) / max(1.0, np.linalg.norm(s.A))
        worst = max(worst, dev)
    return worst


@dataclass(frozen=True)
class LyapunovFit:
    rate: float
    log_prefactor: float
    rms_residual: float
    polynomial_like: bool

    @property
    def degenerate(self) -> bool:
        return self.rate <= 0.0


def lyapunov_fit(traj: Trajectory) -> LyapunovFit:
    """Least-squares fit of log ||A(t)|| = log N + rate * t on the second half.

    If log ||A|| is explained better by c0 + c1 log t than by a line in t,
    the growth is polynomial and the fit is flagged; the rate is still
    reported and the caller decides.
    """
    lo, hi = traj.span
    ts = np.linspace(0.5 * (lo + hi), hi, 33)
    norms = np.array([np.linalg.norm(traj.state_at(t).A, 2) for t in ts])
    logs = np.log(norms)
    coef = np.polyfit(ts, logs, 1)
    resid = logs - np.polyval(coef, ts)
    rms = float(np.sqrt(np.mean(resid**2)))
    polynomial_like = False
    if np.all(ts > 0):
        coef_log = np.polyfit(np.log(ts), logs, 1)
        resid_log = logs - np.polyval(coef_log, np.log(ts))
        rms_log = float(np.sqrt(np.mean(resid_log**2)))
        spread = float(np.max(logs) - np.min(logs))
        if spread > 1e-6 and rms_log < 0.5 * rms:
            polynomial_like = True
    return LyapunovFit(rate=float(coef[0]), log_prefactor=float(coef[1]),
                       rms_residual=rms, polynomial_like=polynomial_like)
