"""Potential models with exact normalized Taylor-coefficient oracles.

Every model supplies V, its gradient and Hessian, and the normalized Taylor
coefficients D^m V(a) / m! to arbitrary order through analytic recurrences,
never numerical differentiation: the coefficient cascade consumes orders far
beyond what finite differences could deliver. Models that decay at infinity
may declare short-range metadata (beta, v0, v1) certifying

    |D^m V(x)| <= v0 * v1^|m| * m! / <x>^(beta + |m|),   <x> = sqrt(1 + x^2),

which the scattering machinery requires.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import MissingDecayMetadata, UnsupportedOrder
from .multiindex import enumerate_upto, iter_exact_degree, multi_factorial

_MAX_RECURRENCE_ORDER = 400


@dataclass(frozen=True)
class DecayMetadata:
    """Declared short-range decay triple (beta > 1, v0 > 0, v1 > 0)."""

    beta: float
    v0: float
    v1: float


class PotentialModel:
    """Common interface; concrete models implement value/taylor_coeffs."""

    kind = "abstract"

    def __init__(self, d: int, decay: DecayMetadata | None = None):
        self.d = d
        self.decay = decay

    # -- required surface -------------------------------------------------

    def value(self, x):
        raise NotImplementedError

    def taylor_coeffs(self, a, max_order: int) -> dict:
        """Map multi-index m -> D^m V(a) / m! for all |m| <= max_order."""
        raise NotImplementedError

    # degree of the polynomial, or None when the Taylor series never ends
    max_taylor_order: int | None = None

    # -- shared helpers (same code path as taylor_coeffs, orders 0-2) -----

    def local_quadratic(self, a):
        """(V, grad V, Hess V) at a from one degree-2 Taylor evaluation."""
        t = self.taylor_coeffs(a, 2)
        d = self.d
        zero = tuple([0] * d)
        v = t.get(zero, 0.0)
        g = np.zeros(d)
        h = np.zeros((d, d))
        for i in range(d):
            e = tuple(1 if k == i else 0 for k in range(d))
            g[i] = t.get(e, 0.0)
            for k in range(i, d):
                m = list(e)
                m[k] += 1
                # D^m V = m! * t_m ;  m! is 2 on the diagonal, 1 off it
                fac = 2.0 if i == k else 1.0
                h[i, k] = h[k, i] = fac * t.get(tuple(m), 0.0)
        return v, g, h

    def gradient(self, a):
        return self.local_quadratic(a)[1]

    def hessian(self, a):
        return self.local_quadratic(a)[2]

    def taylor_shell(self, a, order: int) -> dict:
        """Normalized coefficients restricted to |m| = order."""
        full = self.taylor_coeffs(a, order)
        return {m: c for m, c in full.items() if sum(m) == order}

    def _as_points(self, x):
        x = np.asarray(x, dtype=float)
        if self.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., np.newaxis]
        return x


class Polynomial(PotentialModel):
    """V(x) = sum_n coeffs[n] * x^n over multi-indices n."""

    kind = "polynomial"

    def __init__(self, d: int, coeffs: dict, decay: DecayMetadata | None = None):
        coeffs = {tuple(m): float(c) for m, c in coeffs.items() if c != 0.0}
        if decay is not None and coeffs:
            # only V = 0 satisfies the decay hypothesis among polynomials
            raise ValueError(
                "polynomial potentials never satisfy the short-range decay "
                "hypothesis; drop the decay metadata"
            )
        super().__init__(d, decay)
        self.coeffs = coeffs
        self.max_taylor_order = max((sum(m) for m in coeffs), default=0)

    def value(self, x):
        pts = self._as_points(x)
        out = np.zeros(pts.shape[:-1])
        for m, c in self.coeffs.items():
            term = np.full(pts.shape[:-1], c)
            for i, mi in enumerate(m):
                if mi:
                    term = term * pts[..., i] ** mi
            out += term
        return out

    def taylor_coeffs(self, a, max_order: int) -> dict:
        a = np.atleast_1d(np.asarray(a, dtype=float))
        out: dict = {}
        for n, c in self.coeffs.items():
            for m in enumerate_upto(self.d, min(sum(n), max_order)):
                if any(mi > ni for mi, ni in zip(m, n)):
                    continue
                w = c
                for i in range(self.d):
                    w *= comb(n[i], m[i]) * a[i] ** (n[i] - m[i])
                out[m] = out.get(m, 0.0) + w
        for m in enumerate_upto(self.d, max_order):
            out.setdefault(m, 0.0)
        return out


class GaussianSum(PotentialModel):
    """V(x) = sum_g amp_g * exp(-sum_i (x_i - c_gi)^2 / w_gi^2)."""

    kind = "gaussian_sum"
    max_taylor_order = None

    def __init__(self, d, amplitudes, centers, widths, decay=None):
        super().__init__(d, decay)
        self.amplitudes = np.atleast_1d(np.asarray(amplitudes, dtype=float))
        self.centers = np.asarray(centers, dtype=float).reshape(-1, d)
        self.widths = np.asarray(widths, dtype=float).reshape(-1, d)
        if not (len(self.amplitudes) == len(self.centers) == len(self.widths)):
            raise ValueError("amplitudes, centers, widths must have equal length")
        if np.any(self.widths <= 0):
            raise ValueError("widths must be positive")

    def value(self, x):
        pts = self._as_points(x)
        out = np.zeros(pts.shape[:-1])
        for amp, c, w in zip(self.amplitudes, self.centers, self.widths):
            u2 = np.sum(((pts - c) / w) ** 2, axis=-1)
            out += amp * np.exp(-u2)
        return out

    @staticmethod
    def _scaled_hermite(u: float, n_max: int) -> np.ndarray:
        """t_n = H_n(u) / n! via the overflow-free recurrence
        t_{n+1} = (2 u t_n - 2 t_{n-1}) / (n + 1)."""
        t = np.empty(n_max + 1)
        t[0] = 1.0
        if n_max >= 1:
            t[1] = 2.0 * u
        for n in range(1, n_max):
            t[n + 1] = (2.0 * u * t[n] - 2.0 * t[n - 1]) / (n + 1)
        return t

    def taylor_coeffs(self, a, max_order: int) -> dict:
        if max_order > _MAX_RECURRENCE_ORDER:
            raise UnsupportedOrder(
                f"taylor order {max_order} exceeds recurrence guard "
                f"{_MAX_RECURRENCE_ORDER}"
            )
        a = np.atleast_1d(np.asarray(a, dtype=float))
        out = {m: 0.0 for m in enumerate_upto(self.d, max_order)}
        for amp, c, w in zip(self.amplitudes, self.centers, self.widths):
            u0 = (a - c) / w
            # per-axis normalized derivative factors of exp(-u^2):
            # d^n/dx^n -> (-1)^n H_n(u0) e^{-u0^2} / (n! w^n)
            axis_fac = []
            for i in range(self.d):
                t = self._scaled_hermite(u0[i], max_order)
                signs = (-1.0) ** np.arange(max_order + 1)
                axis_fac.append(signs * t * np.exp(-u0[i] ** 2) / w[i] ** np.arange(max_order + 1))
            for m in out:
                prod = amp
                for i, mi in enumerate(m):
                    prod *= axis_fac[i][mi]
                out[m] += prod
        return out


def polynomial_1d(coeffs_by_power) -> Polynomial:
    """Convenience: 1-D polynomial from {power: coefficient}."""
    return Polynomial(1, {(p,): c for p, c in coeffs_by_power.items()})


def harmonic(omega2: float = 1.0) -> Polynomial:
    """V = omega2 * x^2 / 2 in one dimension."""
    return polynomial_1d({2: omega2 / 2.0})


def quartic_well(quartic: float = 0.1, omega2: float = 1.0) -> Polynomial:
    """V = omega2 x^2/2 + quartic x^4, the anharmonic testbed."""
    return polynomial_1d({2: omega2 / 2.0, 4: quartic})


def double_well(barrier: float = 0.25, separation: float = 1.0) -> Polynomial:
    """V = barrier * (x^2 - separation^2)^2; hyperbolic point at the origin."""
    s2 = separation**2
    return polynomial_1d({0: barrier * s2**2, 2: -2.0 * barrier * s2, 4: barrier})


def free_potential(d: int = 1, decay: DecayMetadata | None = None) -> Polynomial:
    """V = 0; the only polynomial allowed to carry decay metadata."""
    pot = Polynomial(d, {})
    pot.decay = decay or DecayMetadata(beta=2.0, v0=1.0, v1=1.0)
    return pot


def gaussian_barrier(height=4.0, width=1.0, d=1, decay=None) -> GaussianSum:
    """Single Gaussian bump; default decay triple verified by decay_check."""
    if decay is None:
        decay = DecayMetadata(beta=2.0, v0=4.0 * max(height, 1.0), v1=4.0 / min(width, 1.0))
    return GaussianSum(d, [height], [[0.0] * d], [[width] * d], decay=decay)


def decay_check(pot: PotentialModel, halfwidth: float, n_samples: int = 401,
                max_order: int = 4) -> float:
    """Worst ratio |D^m V(x)| <x>^(beta+|m|) / (v0 v1^|m| m!) over a sample box.

    A result <= 1 means the declared triple certifies the sampled points.
    """
    if pot.decay is None:
        raise MissingDecayMetadata(
            f"{pot.kind} potential declares no decay triple"
        )
    beta, v0, v1 = pot.decay.beta, pot.decay.v0, pot.decay.v1
    axes = [np.linspace(-halfwidth, halfwidth, n_samples)] * pot.d
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, pot.d)
    worst = 0.0
    for x in mesh:
        t = pot.taylor_coeffs(x, max_order)
        xnorm2 = float(np.dot(x, x))
        bracket = np.sqrt(1.0 + xnorm2)
        for m, c in t.items():
            # t_m = D^m V / m!  so |D^m V| / m! = |t_m|
            order = sum(m)
            ratio = abs(c) * bracket ** (beta + order) / (v0 * v1**order)
            worst = max(worst, ratio)
    return worst


def bounded_below_estimate(pot: PotentialModel, halfwidth: float,
                           n_samples: int = 201) -> float:
    """Coarse-grid minimum of V; advisory only."""
    axes = [np.linspace(-halfwidth, halfwidth, n_samples)] * pot.d
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return float(np.min(pot.value(mesh)))
