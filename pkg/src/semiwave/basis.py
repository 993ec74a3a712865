"""Gaussian wavepacket basis: evaluation, ladder and position operators.

The basis functions phi_j(A, B, hbar, a, eta, .) are generated from the
normalized complex Gaussian

    phi_0 = pi^(-d/4) hbar^(-d/4) (det A)^(-1/2)
            exp{ -<(x-a), B A^-1 (x-a)>/(2 hbar) + i <eta, x-a>/hbar }

by repeated application of the raising operators

    R_m = (2 hbar)^(-1/2) [ sum_n conj(B)_nm (x_n - a_n)
                            - i sum_n conj(A)_nm (-i hbar d/dx_n - eta_n) ],

with phi_j = (j!)^(-1/2) R_1^{j_1} ... R_d^{j_d} phi_0.  In the scaled
variable xi = (x - a)/sqrt(hbar) each phi_j is a polynomial times phi_0,
and the normalization conditions on (A, B) collapse the raising operator to

    P  ->  sqrt(2) (A^-1 xi)_m P  -  2^(-1/2) (A* grad_xi P)_m ,

which is how the polynomial factors are built here.  The square root of
det A uses the continuously tracked argument carried by the frame, never a
principal branch.

On coefficient vectors the operators act exactly:

    raising:   out[j + e_m] = sqrt(j_m + 1) c_j
    lowering:  out[j - e_m] = sqrt(j_m) c_j
    x_i - a_i = sqrt(hbar/2) sum_p ( A_ip raising_p + conj(A_ip) lowering_p )

so position application grows the support bound by exactly one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FrameMismatch, SingularA
from .multiindex import enumerate_upto

_DET_FLOOR = 1e-12
_TOL_SYMPL = 1e-8


@dataclass(frozen=True)
class WavepacketFrame:
    """Parameters of the phi_j basis at one instant."""

    A: np.ndarray
    B: np.ndarray
    hbar: float
    a: np.ndarray
    eta: np.ndarray
    S: float = 0.0
    detA_arg: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "A", np.asarray(self.A, dtype=complex))
        object.__setattr__(self, "B", np.asarray(self.B, dtype=complex))
        object.__setattr__(self, "a", np.atleast_1d(np.asarray(self.a, dtype=float)))
        object.__setattr__(self, "eta", np.atleast_1d(np.asarray(self.eta, dtype=float)))
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")
        d = len(self.a)
        A, B = self.A.reshape(d, d), self.B.reshape(d, d)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        r1 = np.linalg.norm(A.T @ B - B.T @ A)
        r2 = np.linalg.norm(A.conj().T @ B + B.conj().T @ A - 2 * np.eye(d))
        scale = max(1.0, float(np.linalg.norm(A) * np.linalg.norm(B)))
        if max(r1, r2) > _TOL_SYMPL * scale:
            raise ValueError(
                f"(A, B) violate the normalization conditions: {r1:.2e}, {r2:.2e}"
            )
        det = np.linalg.det(A)
        if abs(det) < _DET_FLOOR:
            raise SingularA(f"|det A| = {abs(det):.2e} below threshold")
        if abs(np.exp(1j * self.detA_arg) * abs(det) - det) > 1e-10 * max(1.0, abs(det)):
            raise ValueError("detA_arg inconsistent with det A")

    @property
    def d(self) -> int:
        return len(self.a)

    def matches(self, other: "WavepacketFrame") -> bool:
        return (
            self.hbar == other.hbar
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.B, other.B)
            and np.array_equal(self.a, other.a)
            and np.array_equal(self.eta, other.eta)
        )


def frame_from_state(state, hbar: float, detA_arg=None) -> WavepacketFrame:
    if detA_arg is None:
        detA_arg = float(np.angle(np.linalg.det(state.A)))
    return WavepacketFrame(A=state.A, B=state.B, hbar=hbar, a=state.a,
                           eta=state.eta, S=state.S, detA_arg=detA_arg)


def frame_at(traj, t: float, hbar: float) -> WavepacketFrame:
    """Frame along a trajectory with the branch-tracked det A argument."""
    return frame_from_state(traj.state_at(t), hbar, detA_arg=traj.detA_arg(t))


@dataclass
class BasisCoefficients:
    """Sparse map multi-index -> complex amplitude on one frame.

    support is the declared bound: every stored key has |j| <= support.
    """

    frame: WavepacketFrame
    data: dict = field(default_factory=dict)
    support: int = 0

    def __post_init__(self):
        for j in self.data:
            if sum(j) > self.support:
                raise ValueError(f"entry {j} beyond declared support {self.support}")

    def norm(self) -> float:
        return float(np.sqrt(sum(abs(c) ** 2 for c in self.data.values())))

    def get(self, j) -> complex:
        return self.data.get(tuple(j), 0.0 + 0.0j)

    def to_pairs(self):
        """JSON form: list of (multi-index, re, im), graded order."""
        keys = sorted(self.data, key=lambda j: (sum(j), j))
        return [[list(j), self.data[j].real, self.data[j].imag] for j in keys]

    @classmethod
    def from_pairs(cls, frame, pairs, support=None):
        data = {tuple(int(x) for x in j): complex(re, im) for j, re, im in pairs}
        if support is None:
            support = max((sum(j) for j in data), default=0)
        return cls(frame=frame, data=data, support=support)

    @classmethod
    def delta(cls, frame, j=None):
        d = frame.d
        j = tuple([0] * d) if j is None else tuple(j)
        return cls(frame=frame, data={j: 1.0 + 0.0j}, support=sum(j))


def _require_same_frame(frame, coeffs):
    if not frame.matches(coeffs.frame):
        raise FrameMismatch("coefficients belong to a different frame")


def apply_raising(frame: WavepacketFrame, axis: int, coeffs: BasisCoefficients) -> BasisCoefficients:
    _require_same_frame(frame, coeffs)
    out = {}
    for j, c in coeffs.data.items():
        up = list(j)
        up[axis] += 1
        out[tuple(up)] = out.get(tuple(up), 0.0) + np.sqrt(j[axis] + 1.0) * c
    return BasisCoefficients(frame=frame, data=out, support=coeffs.support + 1)


def apply_lowering(frame: WavepacketFrame, axis: int, coeffs: BasisCoefficients) -> BasisCoefficients:
    _require_same_frame(frame, coeffs)
    out = {}
    for j, c in coeffs.data.items():
        if j[axis] == 0:
            continue
        down = list(j)
        down[axis] -= 1
        out[tuple(down)] = out.get(tuple(down), 0.0) + np.sqrt(float(j[axis])) * c
    return BasisCoefficients(frame=frame, data=out, support=coeffs.support + 1)


def apply_position_scaled(frame: WavepacketFrame, axis: int, coeffs: BasisCoefficients) -> BasisCoefficients:
    """Apply the hbar-free operator representing (x_i - a_i)/sqrt(hbar)."""
    _require_same_frame(frame, coeffs)
    out = {}
    A = frame.A

    def accumulate(j, c):
        out[j] = out.get(j, 0.0) + c

    for j, c in coeffs.data.items():
        for p in range(frame.d):
            up = list(j)
            up[p] += 1
            accumulate(tuple(up), (A[axis, p] / np.sqrt(2.0)) * np.sqrt(j[p] + 1.0) * c)
            if j[p] > 0:
                down = list(j)
                down[p] -= 1
                accumulate(tuple(down),
                           (np.conj(A[axis, p]) / np.sqrt(2.0)) * np.sqrt(float(j[p])) * c)
    out = {j: c for j, c in out.items() if c != 0.0}
    return BasisCoefficients(frame=frame, data=out, support=coeffs.support + 1)


def apply_position(frame: WavepacketFrame, axis: int, coeffs: BasisCoefficients) -> BasisCoefficients:
    """Apply (x_i - a_i) on coefficient vectors; support grows by one."""
    scaled = apply_position_scaled(frame, axis, coeffs)
    data = {j: np.sqrt(frame.hbar) * c for j, c in scaled.data.items()}
    return BasisCoefficients(frame=frame, data=data, support=coeffs.support + 1)


# -- pointwise evaluation ---------------------------------------------------


def _points_2d(frame, points):
    pts = np.asarray(points, dtype=float)
    if frame.d == 1 and (pts.ndim == 1 or pts.shape[-1] != 1):
        pts = pts.reshape(-1, 1)
    else:
        pts = pts.reshape(-1, frame.d)
    return pts


def evaluate_phi0(frame: WavepacketFrame, points) -> np.ndarray:
    """Ground-state values; branch of (det A)^(-1/2) from the tracked argument."""
    pts = _points_2d(frame, points)
    det = np.linalg.det(frame.A)
    if abs(det) < _DET_FLOOR:
        raise SingularA(f"|det A| = {abs(det):.2e}")
    root = abs(det) ** (-0.5) * np.exp(-0.5j * frame.detA_arg)
    BAinv = frame.B @ np.linalg.inv(frame.A)
    dx = pts - frame.a
    quad = np.einsum("ni,ij,nj->n", dx, BAinv, dx)
    phase = dx @ frame.eta
    pref = np.pi ** (-frame.d / 4.0) * frame.hbar ** (-frame.d / 4.0) * root
    return pref * np.exp(-quad / (2.0 * frame.hbar) + 1j * phase / frame.hbar)


def basis_polynomials(frame: WavepacketFrame, max_degree: int) -> dict:
    """Polynomial factors P_j in xi = (x-a)/sqrt(hbar), for all |j| <= max_degree.

    Built by applying the raising operator symbolically:
    P_{j+e_m} = ( sqrt(2) (A^-1 xi)_m P_j - 2^{-1/2} (A* grad P_j)_m ) / sqrt(j_m+1).
    """
    d = frame.d
    Ainv = np.linalg.inv(frame.A)
    Acon = np.conj(frame.A)
    polys = {tuple([0] * d): {tuple([0] * d): 1.0 + 0.0j}}
    for j in enumerate_upto(d, max_degree):
        if sum(j) == 0:
            continue
        m = next(i for i, ji in enumerate(j) if ji > 0)
        parent = list(j)
        parent[m] -= 1
        P = polys[tuple(parent)]
        out: dict = {}
        for mono, c in P.items():
            for i in range(d):
                w = np.sqrt(2.0) * Ainv[m, i] * c
                if w != 0.0:
                    up = list(mono)
                    up[i] += 1
                    up = tuple(up)
                    out[up] = out.get(up, 0.0) + w
            for n in range(d):
                if mono[n] > 0:
                    w = -(1.0 / np.sqrt(2.0)) * Acon[n, m] * mono[n] * c
                    down = list(mono)
                    down[n] -= 1
                    down = tuple(down)
                    out[down] = out.get(down, 0.0) + w
        scale = 1.0 / np.sqrt(float(parent[m] + 1))
        polys[j] = {mono: scale * c for mono, c in out.items() if c != 0.0}
    return polys


def evaluate_basis(frame: WavepacketFrame, max_degree: int, points) -> np.ndarray:
    """Matrix of phi_j values, one row per multi-index |j| <= max_degree
    in graded order, one column per point."""
    pts = _points_2d(frame, points)
    phi0 = evaluate_phi0(frame, pts)
    xi = (pts - frame.a) / np.sqrt(frame.hbar)
    powers = [
        np.vander(xi[:, i], max_degree + 1, increasing=True).T
        for i in range(frame.d)
    ]
    polys = basis_polynomials(frame, max_degree)
    order = enumerate_upto(frame.d, max_degree)
    out = np.empty((len(order), pts.shape[0]), dtype=complex)
    for row, j in enumerate(order):
        vals = np.zeros(pts.shape[0], dtype=complex)
        for mono, c in polys[j].items():
            term = np.full(pts.shape[0], c)
            for i, p in enumerate(mono):
                if p:
                    term = term * powers[i][p]
            vals += term
        out[row] = vals * phi0
    return out


def evaluate_state(frame: WavepacketFrame, coeffs: BasisCoefficients, points) -> np.ndarray:
    """sum_j c_j phi_j(x); no action phase attached."""
    _require_same_frame(frame, coeffs)
    if not coeffs.data:
        pts = _points_2d(frame, points)
        return np.zeros(pts.shape[0], dtype=complex)
    table = evaluate_basis(frame, coeffs.support, points)
    order = enumerate_upto(frame.d, coeffs.support)
    pos = {j: i for i, j in enumerate(order)}
    out = np.zeros(table.shape[1], dtype=complex)
    for j, c in coeffs.data.items():
        out += c * table[pos[j]]
    return out


def quadrature_box(frame: WavepacketFrame, max_degree: int):
    """(center, halfwidth) such that Gaussian tails are below ~1e-14.

    Half-width max(10, sqrt(2 max_degree + d) + 6) * sqrt(hbar) ||A||.
    """
    width = max(10.0, np.sqrt(2.0 * max_degree + frame.d) + 6.0)
    scale = np.sqrt(frame.hbar) * np.linalg.norm(frame.A, 2)
    return frame.a.copy(), float(width * scale)
