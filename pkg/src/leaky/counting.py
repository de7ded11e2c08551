"""Exact lattice counts of the decoupled spectrum and the Weyl asymptotics.

Counting is strict everywhere: a lattice value equal to lambda is not
counted. Every comparison is made on the same floating expression
``n*n*mu + m*m*xi < lam`` so that exact-equality lambdas behave predictably.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .domain import LeakyDomain, area_constant
from .specfun import bessel_series

BOUNDARIES = ("dirichlet", "neumann_sides")


def _count_m(base: np.ndarray, xi, lam: float, m_min: int = 1) -> np.ndarray:
    """Per-row count of integers m >= m_min with base + m*m*xi < lam."""
    base = np.asarray(base, dtype=float)
    xi = np.broadcast_to(np.asarray(xi, dtype=float), base.shape)
    room = np.maximum(lam - base, 0.0)
    m = np.floor(np.sqrt(room / xi)).astype(np.int64)
    # fix the float guess against the exact strict test
    for _ in range(3):
        too_big = (m >= m_min) & ~(base + (m * m) * xi < lam)
        m = np.where(too_big, m - 1, m)
        nxt = m + 1
        room_more = base + (nxt * nxt) * xi < lam
        m = np.where(room_more, nxt, m)
    return np.maximum(m - m_min + 1, 0)


def _rows(mu: np.ndarray, lam: float):
    """(rectangle index, n) pairs with n*n*mu_i < lam."""
    idx, ns = [], []
    for k, mu_k in enumerate(mu):
        if not mu_k < lam:
            break
        n_max = int(math.isqrt(int(lam / mu_k)) + 2)
        n = np.arange(1, n_max + 1, dtype=np.int64)
        n = n[(n * n) * mu_k < lam]
        idx.append(np.full(n.size, k))
        ns.append(n)
    if not idx:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=np.int64)
    return np.concatenate(idx), np.concatenate(ns)


def truncation_incomplete(domain: LeakyDomain, lam: float) -> bool:
    """True when rectangles beyond the truncation could contribute below lam."""
    return bool(domain.mu[-1] < lam)


def count_tail_dirichlet(domain: LeakyDomain, lam: float) -> int:
    """#{(i, m, n) : n^2 mu_i + m^2 xi_i < lam} over the instantiated rectangles."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    k, n = _rows(domain.mu, lam)
    if k.size == 0:
        return 0
    base = (n * n) * domain.mu[k]
    return int(np.sum(_count_m(base, domain.xi[k], lam)))


def count_tail_neumann(domain: LeakyDomain, lam: float) -> int:
    """Dirichlet count plus #{(n, i) : n^2 mu_i < lam} (the m = 0 modes)."""
    k, _ = _rows(domain.mu, lam)
    return count_tail_dirichlet(domain, lam) + int(k.size)


def head_count(domain: LeakyDomain, lam: float, boundary: str = "dirichlet") -> int:
    """Exact count for the head rectangle.

    ``neumann_sides`` puts Neumann conditions on both vertical sides, which
    adds the m = 0 modes.
    """
    if boundary not in BOUNDARIES:
        raise ValueError(f"boundary must be one of {BOUNDARIES}")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    mu0 = math.pi ** 2 / domain.head_height ** 2
    xi0 = math.pi ** 2 / domain.head_width ** 2
    if not mu0 < lam:
        return 0
    n = np.arange(1, math.isqrt(int(lam / mu0)) + 3, dtype=np.int64)
    n = n[(n * n) * mu0 < lam]
    base = (n * n) * mu0
    m_min = 1 if boundary == "dirichlet" else 0
    return int(np.sum(_count_m(base, xi0, lam, m_min=m_min)))


def count_dirichlet(domain: LeakyDomain, lam: float) -> int:
    return head_count(domain, lam, "dirichlet") + count_tail_dirichlet(domain, lam)


def count_neumann(domain: LeakyDomain, lam: float) -> int:
    return head_count(domain, lam, "neumann_sides") + count_tail_neumann(domain, lam)


def brute_force_count(mu, xi, lam: float, m_min: int = 1) -> int:
    """Triple loop over (i, n, m); the reference the fast counters are checked against."""
    total = 0
    for mu_i, xi_i in zip(mu, xi):
        n = 1
        while n * n * mu_i < lam:
            m = m_min
            while n * n * mu_i + m * m * xi_i < lam:
                total += 1
                m += 1
            n += 1
    return total


# -- Weyl asymptotics -------------------------------------------------------

class WeylError(RuntimeError):
    """The Bessel series tail could not be brought below tolerance."""


@dataclass(frozen=True)
class WeylEstimate:
    lam: float
    leading: float
    length_term: float
    bessel_term: float
    effective_length: float
    error_estimate: float

    @property
    def value(self) -> float:
        return self.leading + self.length_term + self.bessel_term


def effective_length(domain: LeakyDomain, lam: float) -> float:
    """L(lambda) = 2 sum of ell_i over rectangles with delta_i sqrt(lambda) > pi."""
    active = domain.delta * math.sqrt(lam) > math.pi
    return float(2.0 * np.sum(domain.ell[active]))


def weyl_estimate(domain: LeakyDomain, lam: float, tol: float = 1e-8, area: float | None = None) -> WeylEstimate:
    """Area/(4 pi) lam - L/(4 pi) sqrt(lam) + sqrt(lam)/(2 pi) sum_i ell_i sum_r J1(2 r delta_i sqrt(lam))/r.

    ``area`` defaults to the total area of the truncated domain. Each inner
    r-series is evaluated to ``tol``; WeylError is raised if that fails.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    area = domain.total_area if area is None else area
    root = math.sqrt(lam)
    length = effective_length(domain, lam)
    bessel = 0.0
    err = 0.0
    for delta_i, ell_i in zip(domain.delta, domain.ell):
        if not delta_i * root > math.pi:
            continue
        try:
            s, e = bessel_series(delta_i * root / math.pi, tol=tol)
        except RuntimeError as exc:
            raise WeylError(f"lambda={lam}: {exc}") from exc
        bessel += ell_i * s
        err += ell_i * e
    scale = root / (2 * math.pi)
    return WeylEstimate(lam=lam, leading=area / (4 * math.pi) * lam, length_term=-length / (4 * math.pi) * root,
                        bessel_term=scale * bessel, effective_length=length, error_estimate=scale * err)


# -- Poisson identity --------------------------------------------------------

class PoissonMismatch(RuntimeError):
    pass


@dataclass(frozen=True)
class PoissonCheck:
    ratio: float
    lhs: float
    rhs: float
    series_error: float

    @property
    def difference(self) -> float:
        return self.lhs - self.rhs


def poisson_check(mu_i: float, lam: float, tol: float = 1e-8) -> PoissonCheck:
    """Both sides of sum_n F(n sqrt(mu/lam)) = (pi/2) y + sum_r J1(2 pi r y)/r, y = sqrt(lam/mu).

    The left side runs over all integers n (including 0 and negatives);
    F(x) = sqrt(max(1 - x^2, 0)). Raises PoissonMismatch if the sides
    differ by more than ``tol``.
    """
    if not (mu_i > 0 and lam > 0):
        raise ValueError("mu_i and lambda must be positive")
    y = math.sqrt(lam / mu_i)
    n_max = int(math.floor(y))
    n = np.arange(-n_max, n_max + 1, dtype=float)
    lhs = float(np.sum(np.sqrt(np.maximum(1.0 - (n / y) ** 2, 0.0))))
    series, err = bessel_series(y, tol=tol * 1e-2)
    rhs = math.pi / 2 * y + series
    check = PoissonCheck(ratio=y * y, lhs=lhs, rhs=rhs, series_error=err)
    if abs(check.difference) > tol:
        raise PoissonMismatch(f"ratio {y * y}: |lhs - rhs| = {abs(check.difference):.3e} > {tol:.1e}")
    return check


# -- scans, censuses, windows ------------------------------------------------

def _workers() -> int:
    try:
        return max(1, int(os.environ.get("LEAKY_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class CountingScan:
    lambda_grid: np.ndarray
    n_dirichlet: np.ndarray
    n_neumann: np.ndarray
    weyl_leading: np.ndarray
    effective_length_term: np.ndarray
    bessel_term: np.ndarray
    truncation_flag: np.ndarray
    weyl_error: np.ndarray = field(repr=False)

    @property
    def weyl(self) -> np.ndarray:
        return self.weyl_leading + self.effective_length_term + self.bessel_term

    @property
    def remainder(self) -> np.ndarray:
        return self.n_dirichlet - self.weyl

    @property
    def remainder_over_sqrt_lambda(self) -> np.ndarray:
        return self.remainder / np.sqrt(self.lambda_grid)

    def rows(self):
        rem = self.remainder
        rem_s = self.remainder_over_sqrt_lambda
        for k, lam in enumerate(self.lambda_grid):
            yield dict(lambda_=float(lam), N_D=int(self.n_dirichlet[k]), N_N=int(self.n_neumann[k]),
                       weyl_leading=float(self.weyl_leading[k]), length_term=float(self.effective_length_term[k]),
                       bessel_term=float(self.bessel_term[k]), remainder=float(rem[k]),
                       remainder_over_sqrt_lambda=float(rem_s[k]), truncation_flag=int(self.truncation_flag[k]))


def lambda_grid(lambda_min: float, lambda_max: float, points: int, geometric: bool = True) -> np.ndarray:
    if not (0 < lambda_min < lambda_max) or points < 2:
        raise ValueError("need 0 < lambda_min < lambda_max and at least two points")
    if geometric:
        return np.geomspace(lambda_min, lambda_max, points)
    return np.linspace(lambda_min, lambda_max, points)


def scan(domain: LeakyDomain, lambdas, tol: float = 1e-8) -> CountingScan:
    """Exact counts and the three-term Weyl asymptotic on a lambda grid."""
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(np.diff(lambdas) <= 0):
        raise ValueError("lambda grid must be increasing")

    def one(lam):
        w = weyl_estimate(domain, lam, tol=tol)
        return (count_dirichlet(domain, lam), count_neumann(domain, lam), w.leading, w.length_term,
                w.bessel_term, truncation_incomplete(domain, lam), w.error_estimate)

    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        cols = list(zip(*pool.map(one, lambdas)))
    return CountingScan(lambda_grid=lambdas, n_dirichlet=np.array(cols[0], dtype=np.int64),
                        n_neumann=np.array(cols[1], dtype=np.int64), weyl_leading=np.array(cols[2]),
                        effective_length_term=np.array(cols[3]), bessel_term=np.array(cols[4]),
                        truncation_flag=np.array(cols[5], dtype=bool), weyl_error=np.array(cols[6]))


def quasimode_census(domain: LeakyDomain, lam: float, kind: str = "BB", C1: float | None = None,
                     M0: int = 1) -> int:
    """Number of quasi-eigenvalues below lam with restricted mode numbers.

    ``bb``: m, n <= M0. ``BB``: m xi_i <= C1 (order-zero quasimodes).
    """
    if kind == "bb":
        if M0 < 1:
            raise ValueError("M0 must be at least 1")
        total = 0
        for mu_i, xi_i in zip(domain.mu, domain.xi):
            for n in range(1, M0 + 1):
                for m in range(1, M0 + 1):
                    if n * n * mu_i + m * m * xi_i < lam:
                        total += 1
        return total
    if kind != "BB":
        raise ValueError("census kind must be 'bb' or 'BB'")
    if C1 is None or not C1 > 0:
        raise ValueError("BB census needs C1 > 0")
    k, n = _rows(domain.mu, lam)
    if k.size == 0:
        return 0
    xi = domain.xi[k]
    cap = np.floor(C1 / xi).astype(np.int64)
    cap = np.where((cap + 1) * xi <= C1, cap + 1, cap)
    cap = np.where(cap * xi > C1, cap - 1, cap)
    free = _count_m((n * n) * domain.mu[k], xi, lam)
    return int(np.sum(np.minimum(free, np.maximum(cap, 0))))


def rectangles_below(domain: LeakyDomain, lam: float) -> int:
    """#{i : mu_i < lam}."""
    return int(np.sum(domain.mu < lam))


def window_count(domain: LeakyDomain, lam: float, sigma_window: float, include_head: bool = True) -> int:
    """Lattice values in [lam, lam + sigma_window)."""
    if not sigma_window > 0:
        raise ValueError("window width must be positive")
    upper = lam + sigma_window

    def count(x):
        if not x > 0:
            return 0
        c = count_tail_dirichlet(domain, x)
        return c + (head_count(domain, x) if include_head else 0)

    return count(upper) - count(lam)


def cluster_table(domain: LeakyDomain, half_widths, centers=None, include_head: bool = True) -> list:
    """Counts in the windows [c_i - w_i, c_i + w_i) around mu_{i,1,1} (or given centres)."""
    rows = []
    for k, w in enumerate(half_widths):
        i = k + 1
        c = (domain.mu[k] + domain.xi[k]) if centers is None else centers[k]
        lo = c - w
        rows.append(dict(i=i, center=float(c), half_width=float(w),
                         count=window_count(domain, lo, 2 * w, include_head=include_head) if lo > 0
                         else window_count(domain, 1e-300, c + w, include_head=include_head)))
    return rows


def least_squares_slope(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(np.polyfit(x, y, 1)[0])


def density_ratio(domain: LeakyDomain, lam: float) -> float:
    """Tail count / lam divided by area_constant / (4 pi)."""
    return count_tail_dirichlet(domain, lam) / lam / (area_constant(domain) / (4 * math.pi))
