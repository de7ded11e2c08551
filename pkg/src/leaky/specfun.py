"""Special functions and quadrature.

Everything here is self-contained: J1 by power series / Hankel expansion,
the Fourier transform of the semicircle profile, the lattice Bessel series
``sum_r J1(2 pi r y) / r`` with an analytic tail, and a vectorised adaptive
Gauss-Legendre integrator used by the quasimode norms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np

X_SWITCH = 16.0
_SERIES_TERMS = 60
_HANKEL_TERMS = 30


# ---------------------------------------------------------------- Bessel J1

@lru_cache(maxsize=None)
def hankel_coefficients(n_terms: int = _HANKEL_TERMS) -> np.ndarray:
    """Coefficients a_k(1) of the Hankel expansion of order one."""
    a = np.empty(n_terms)
    a[0] = 1.0
    for k in range(1, n_terms):
        a[k] = a[k - 1] * (4.0 - (2 * k - 1) ** 2) / (8.0 * k)
    return a


def _j1_series(x: np.ndarray) -> np.ndarray:
    # extended precision absorbs the cancellation near x = X_SWITCH
    xl = x.astype(np.longdouble)
    q = -(xl / 2) ** 2
    term = xl / 2
    total = term.copy()
    for k in range(1, _SERIES_TERMS):
        term = term * q / (k * (k + 1))
        total += term
    return total.astype(float)


def _j1_hankel(x: np.ndarray) -> np.ndarray:
    a = hankel_coefficients()
    inv = 1.0 / x
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    power = np.ones_like(x)
    for k in range(_HANKEL_TERMS):
        term = a[k] * power
        if k % 2 == 0:
            p += (-1) ** (k // 2) * term
        else:
            q += (-1) ** ((k - 1) // 2) * term
        power = power * inv
    w = x - 0.75 * math.pi
    return np.sqrt(2.0 / (math.pi * x)) * (p * np.cos(w) - q * np.sin(w))


def bessel_j1(x):
    """Bessel function J1, odd in x.

    Power series (in long double) for |x| <= 16, Hankel asymptotic
    expansion beyond. Accepts scalars or arrays.
    """
    arr = np.asarray(x, dtype=float)
    ax = np.abs(arr)
    out = np.empty_like(ax)
    small = ax <= X_SWITCH
    if np.any(small):
        out[small] = _j1_series(ax[small])
    if np.any(~small):
        out[~small] = _j1_hankel(ax[~small])
    out = np.where(arr < 0, -out, out)
    if out.ndim == 0:
        return float(out)
    return out


def profile_transform(y):
    """Fourier transform of F(x) = sqrt(max(1 - x^2, 0)).

    Equals J1(2 pi y) / (2 y), with the limit pi/2 at y = 0.
    """
    arr = np.asarray(y, dtype=float)
    safe = np.where(arr == 0.0, 1.0, arr)
    out = np.where(arr == 0.0, math.pi / 2, bessel_j1(2 * math.pi * safe) / (2 * safe))
    if out.ndim == 0:
        return float(out)
    return out


# ---------------------------------------------------------------- quadrature

class QuadratureError(RuntimeError):
    """Adaptive quadrature ran out of depth before reaching its tolerance."""

    def __init__(self, message: str, value, error_estimate: float):
        super().__init__(f"{message} (best value {value!r}, error estimate {error_estimate:.3e})")
        self.value = value
        self.error_estimate = error_estimate


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-12
    abs_tol: float = 1e-15
    max_depth: int = 60
    nodes_per_panel: int = 15

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.nodes_per_panel < 4:
            raise ValueError("nodes_per_panel must be at least 4")
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")


@lru_cache(maxsize=None)
def _gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _panel_rule(f, lo, hi, n):
    """Coarse and two-half Gauss-Legendre values on each panel (vectorised)."""
    x, w = _gauss_legendre(n)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    coarse_nodes = mid[:, None] + half[:, None] * x[None, :]
    q = 0.5 * half
    left_nodes = (lo + q)[:, None] + q[:, None] * x[None, :]
    right_nodes = (mid + q)[:, None] + q[:, None] * x[None, :]
    nodes = np.concatenate([coarse_nodes, left_nodes, right_nodes], axis=1)
    vals = np.asarray(f(nodes.ravel())).reshape(nodes.shape)
    coarse = half * (vals[:, :n] @ w)
    fine = q * (vals[:, n:2 * n] @ w + vals[:, 2 * n:] @ w)
    scale = np.abs(half) * (np.abs(vals[:, :n]) @ w)
    return coarse, fine, scale


def integrate(f: Callable, a: float, b: float, spec: QuadratureSpec | None = None,
              breakpoints=()) -> tuple:
    """Adaptive integral of a vectorised function over [a, b].

    Each panel is integrated by an n-point Gauss-Legendre rule and by the
    same rule on its two halves; the difference is the panel's error
    estimate and the finer value is kept. Panels with the largest errors
    are bisected until the summed estimate meets
    ``max(abs_tol, rel_tol * |value|)``. ``f`` may be complex valued.

    Returns ``(value, error_estimate)``; raises QuadratureError when
    ``max_depth`` is exhausted.
    """
    spec = spec or QuadratureSpec()
    if not b > a:
        raise ValueError("integrate requires a < b")
    n = spec.nodes_per_panel
    edges = np.unique(np.concatenate([[a, b], [p for p in breakpoints if a < p < b]]))
    lo, hi = edges[:-1].astype(float), edges[1:].astype(float)
    depth = np.zeros(lo.size, dtype=int)

    done_val = []
    done_err = []
    eps = np.finfo(float).eps
    while True:
        coarse, fine, scale = _panel_rule(f, lo, hi, n)
        err = np.abs(fine - coarse)
        floor = 50 * eps * scale
        err = np.where(err < floor, floor, err)
        total = np.sum(np.asarray(done_val)) + np.sum(fine) if done_val else np.sum(fine)
        total_err = sum(done_err) + float(np.sum(err))
        target = max(spec.abs_tol, spec.rel_tol * abs(total))
        if total_err <= target:
            return _as_scalar(total), total_err
        # bisect panels whose error exceeds their share of the remaining budget
        budget = max(target - sum(done_err), 0.0)
        share = budget / max(lo.size, 1)
        split = (err > share) & (err > floor)
        if not np.any(split):
            # every remaining panel is at its roundoff floor
            return _as_scalar(total), total_err
        if np.any(depth[split] >= spec.max_depth):
            raise QuadratureError("quadrature did not converge", _as_scalar(total), total_err)
        keep = ~split
        done_val.extend(fine[keep].tolist())
        done_err.extend(err[keep].tolist())
        mid = 0.5 * (lo[split] + hi[split])
        lo, hi = np.concatenate([lo[split], mid]), np.concatenate([mid, hi[split]])
        depth = np.concatenate([depth[split] + 1, depth[split] + 1])


def _as_scalar(v):
    v = complex(v)
    return v.real if v.imag == 0.0 else v


# ------------------------------------------------ lattice Bessel series

class SeriesError(RuntimeError):
    """The Bessel series could not be evaluated to the requested tolerance."""


@lru_cache(maxsize=None)
def _bernoulli_even(count: int) -> tuple:
    """B_2, B_4, ..., B_{2 count} divided by their factorials."""
    # Akiyama-Tanigawa
    m_max = 2 * count
    a = [Fraction(0)] * (m_max + 1)
    bern = []
    for m in range(m_max + 1):
        a[m] = Fraction(1, m + 1)
        for j in range(m, 0, -1):
            a[j - 1] = j * (a[j - 1] - a[j])
        bern.append(a[0])
    return tuple(float(bern[2 * j] / math.factorial(2 * j)) for j in range(1, count + 1))


def _power_integral(s: float, theta: float, start: float) -> complex:
    """Integral of x^-s exp(i theta x) over [start, inf), s > 1."""
    if theta == 0.0:
        return start ** (1.0 - s) / (s - 1.0)
    sign = 1.0 if theta > 0 else -1.0
    kappa = abs(theta) * start
    spec = QuadratureSpec(rel_tol=1e-13, abs_tol=1e-300)

    # contour x = start + i*sign*start*u; split u in [0,1] and u = 1/w^2
    def near(u):
        return (1.0 + 1j * sign * u) ** (-s) * np.exp(-kappa * u)

    def far(w):
        w = np.asarray(w)
        safe = np.where(w == 0.0, 1.0, w)
        val = 2.0 * safe ** (2 * s - 3) * (safe ** 2 + 1j * sign) ** (-s) * np.exp(-kappa / safe ** 2)
        return np.where(w == 0.0, 0.0, val)

    v1, _ = integrate(near, 0.0, 1.0, spec)
    v2, _ = integrate(far, 0.0, 1.0, spec)
    return 1j * sign * np.exp(1j * theta * start) * start ** (1.0 - s) * (v1 + v2)


def oscillatory_power_tail(s: float, theta: float, start: int, tol: float = 1e-16,
                           max_terms: int = 40) -> tuple:
    """sum_{r >= start} r^-s exp(i theta r) by Euler-Maclaurin.

    ``theta`` is reduced to (-pi, pi] first so the Bernoulli terms decay
    geometrically. Returns ``(value, error_estimate)``.
    """
    theta = math.remainder(theta, 2 * math.pi)
    phase = np.exp(1j * theta * start)
    value = _power_integral(s, theta, start) + 0.5 * start ** (-s) * phase
    bern = _bernoulli_even(max_terms)
    # derivative of order p at start: phase * sum_l C(p,l)(i theta)^(p-l)(-1)^l (s)_l start^(-s-l)
    last = abs(value)
    for j in range(1, max_terms + 1):
        p = 2 * j - 1
        deriv = 0.0 + 0.0j
        poch = 1.0
        for l in range(p + 1):
            if l > 0:
                poch *= s + l - 1
            deriv += math.comb(p, l) * (1j * theta) ** (p - l) * (-1) ** l * poch * start ** (-s - l)
        term = bern[j - 1] * deriv * phase
        value -= term
        last = abs(term)
        if last < tol:
            break
    return complex(value), last


def bessel_series(y: float, tol: float = 1e-10, max_hankel: int = 16) -> tuple:
    """sum_{r >= 1} J1(2 pi r y) / r for y > 0.

    The first ``N`` terms are summed directly; for r >= N (argument >= 40)
    J1 is replaced by its Hankel expansion and each resulting oscillatory
    power sum is evaluated by Euler-Maclaurin. Hankel terms are added until
    the next one is below ``tol / 100``. Returns ``(value, error_estimate)``.
    """
    if not y > 0:
        raise ValueError("bessel_series needs y > 0")
    theta = 2 * math.pi * y
    # phase per step mod 2 pi, from the exact fractional part of y: the tail
    # has a sqrt(phase) branch point, so 2 pi y reduced in floating point
    # would turn integer y into a spurious 1e-14 phase and a 1e-8 error
    phase_step = 2 * math.pi * math.remainder(y, 1.0)
    start = max(100, math.ceil(40.0 / theta))
    if start > 10 ** 7:
        raise SeriesError(f"y = {y} too small for the direct part of the series")
    r = np.arange(1, start, dtype=float)
    head = float(np.sum(bessel_j1(theta * r) / r))

    a = hankel_coefficients()
    prefactor = np.exp(-0.75j * math.pi) / (math.pi * math.sqrt(y))
    tail = 0.0 + 0.0j
    err = 0.0
    for k in range(max_hankel + 1):
        # crude bound on sum_{r>=N} of the k-th Hankel term
        bound = abs(a[k]) * theta ** (-k) * 2 * start ** (-(k + 0.5)) / (k + 0.5)
        if k == max_hankel or abs(prefactor) * bound < tol * 1e-2:
            err += bound
            break
        coef = (1j) ** k * a[k] * theta ** (-k)
        g, g_err = oscillatory_power_tail(k + 1.5, phase_step, start, tol=tol * 1e-3)
        tail += coef * g
        err += abs(coef) * g_err
    value = head + float(np.real(prefactor * tail))
    err = abs(prefactor) * err + 1e-15 * (abs(head) + 1.0) * math.sqrt(start)
    if err > tol:
        raise SeriesError(f"Bessel series error estimate {err:.2e} exceeds tol {tol:.2e}")
    return value, err
