"""Bouncing-ball quasimodes on the tail rectangles.

psi_{i,m,n}(x, y) = chi((x - a_i)/ell_i) sin(pi m (x - a_i)/ell_i) sin(pi n y/delta_i)

All norms reduce to one-dimensional integrals in u = (x - a_i)/ell_i since
the y-integral of sin^2 is delta_i / 2. Only the two edge intervals of the
cutoff need quadrature; the plateau part is done in closed form.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .domain import LeakyDomain
from .mollifier import Mollifier
from .specfun import QuadratureSpec, integrate


class QuasimodeIndex(NamedTuple):
    i: int
    m: int
    n: int

    @classmethod
    def parse(cls, text: str) -> "QuasimodeIndex":
        parts = [int(p) for p in str(text).split(",")]
        if len(parts) != 3:
            raise ValueError(f"index must look like i,m,n; got {text!r}")
        return cls(*parts)


def _check(domain: LeakyDomain, index) -> QuasimodeIndex:
    index = QuasimodeIndex(*index)
    if not 1 <= index.i <= domain.truncation:
        raise ValueError(f"rectangle index {index.i} outside 1..{domain.truncation}")
    if index.m < 1 or index.n < 1:
        raise ValueError("mode numbers m, n must be positive")
    return index


def _rect(domain, i):
    a = domain.a
    return float(a[i - 1]), float(domain.ell[i - 1]), float(domain.delta[i - 1])


def quasi_eigenvalue(domain: LeakyDomain, index) -> float:
    """n^2 mu_i + m^2 xi_i."""
    i, m, n = _check(domain, index)
    return n * n * float(domain.mu[i - 1]) + m * m * float(domain.xi[i - 1])


def quasi_eigenvalue_geometric(domain: LeakyDomain, index) -> float:
    """pi^2 ((m/ell_i)^2 + (n/delta_i)^2), same value from the side lengths."""
    i, m, n = _check(domain, index)
    _, ell, delta = _rect(domain, i)
    return math.pi ** 2 * ((m / ell) ** 2 + (n / delta) ** 2)


def evaluate(domain: LeakyDomain, mollifier: Mollifier, index, x, y):
    i, m, n = _check(domain, index)
    a, ell, delta = _rect(domain, i)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    u = (x - a) / ell
    inside = (u >= 0) & (u <= 1) & (y >= 0) & (y <= delta)
    val = mollifier.chi(u) * np.sin(math.pi * m * u) * np.sin(math.pi * n * y / delta)
    out = np.where(inside, val, 0.0)
    return out if out.ndim else float(out)


def _residual_profile(mollifier, m, u):
    """2 pi m chi' cos(pi m u) + chi'' sin(pi m u)."""
    arg = math.pi * m * u
    return 2 * math.pi * m * mollifier.chi_prime(u) * np.cos(arg) + mollifier.chi_double_prime(u) * np.sin(arg)


def residual(domain: LeakyDomain, mollifier: Mollifier, index, x, y):
    """(Delta + mu_{i,m,n}) psi_{i,m,n} in closed form."""
    i, m, n = _check(domain, index)
    a, ell, delta = _rect(domain, i)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    u = (x - a) / ell
    inside = (u >= 0) & (u <= 1) & (y >= 0) & (y <= delta)
    val = _residual_profile(mollifier, m, u) * np.sin(math.pi * n * y / delta) / ell ** 2
    out = np.where(inside, val, 0.0)
    return out if out.ndim else float(out)


def _edge_integral(f, mollifier, m, tol, lo=0.0, hi=1.0):
    """Integral of f over the parts of the cutoff edges inside [lo, hi]."""
    spec = QuadratureSpec(rel_tol=tol, abs_tol=1e-300)
    value, err = 0.0, 0.0
    for e0, e1 in mollifier.edges:
        a, b = max(e0, lo), min(e1, hi)
        if b <= a:
            continue
        # one 15-node panel per half-period of sin(pi m u) or finer
        pieces = max(2, math.ceil((b - a) * 2 * m))
        v, e = integrate(f, a, b, spec, breakpoints=np.linspace(a, b, pieces + 1)[1:-1])
        value += v
        err += e
    return value, err


def _plateau_sin2(m, lo, hi):
    """Closed-form integral of sin^2(pi m u) over [lo, hi]."""
    w = 2 * math.pi * m
    return (hi - lo) / 2 - (math.sin(w * hi) - math.sin(w * lo)) / (2 * w)


def _profile_norm2(mollifier, m, tol, lo=0.0):
    """Integral of chi(u)^2 sin^2(pi m u) over [lo, 1] and its error estimate."""
    eps = mollifier.eps
    p0, p1 = max(lo, eps), 1.0 - eps
    plateau = _plateau_sin2(m, p0, p1) if p1 > p0 else 0.0
    edge, err = _edge_integral(lambda u: mollifier.chi(u) ** 2 * np.sin(math.pi * m * u) ** 2,
                               mollifier, m, tol, lo=lo)
    return plateau + edge, err


@dataclass(frozen=True)
class QuasimodeReport:
    index: QuasimodeIndex
    quasi_eigenvalue: float
    norm: float
    residual_norm: float
    discrepancy: float
    support: tuple
    xi: float
    error_estimate: float

    @property
    def disc_over_m_xi(self) -> float:
        return self.discrepancy / (self.index.m * self.xi)

    def as_row(self) -> dict:
        i, m, n = self.index
        return dict(i=i, m=m, n=n, mu=self.quasi_eigenvalue, norm=self.norm,
                    residual=self.residual_norm, discrepancy=self.discrepancy,
                    disc_over_m_xi=self.disc_over_m_xi)


def report(domain: LeakyDomain, mollifier: Mollifier, index, quadrature_tol: float = 1e-10) -> QuasimodeReport:
    """Norm, residual norm and discrepancy of one quasimode.

    ``error_estimate`` is the relative quadrature error bound on the
    discrepancy.
    """
    if not quadrature_tol > 0:
        raise ValueError("quadrature_tol must be positive")
    index = _check(domain, index)
    i, m, n = index
    a, ell, delta = _rect(domain, i)
    n2, n2_err = _profile_norm2(mollifier, m, quadrature_tol)
    r2, r2_err = _edge_integral(lambda u: _residual_profile(mollifier, m, u) ** 2, mollifier, m, quadrature_tol)
    norm = math.sqrt(delta / 2 * ell * n2)
    res = math.sqrt(delta / 2 * r2 / ell ** 3)
    rel_err = 0.5 * (n2_err / n2 + r2_err / r2)
    return QuasimodeReport(index=index, quasi_eigenvalue=quasi_eigenvalue(domain, index), norm=norm,
                           residual_norm=res, discrepancy=res / norm,
                           support=(a, a + ell, 0.0, delta), xi=float(domain.xi[i - 1]),
                           error_estimate=rel_err)


def discrepancy(domain, mollifier, index, quadrature_tol: float = 1e-10) -> float:
    return report(domain, mollifier, index, quadrature_tol).discrepancy


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("LEAKY_THREADS", "1")))
    except ValueError:
        return 1


def scan(domain: LeakyDomain, mollifier: Mollifier, i_max: int, m_max: int, n_max: int,
         quadrature_tol: float = 1e-10) -> list:
    """Reports for every (i, m, n) up to the given caps, in lexicographic order."""
    indices = [QuasimodeIndex(i, m, n) for i in range(1, i_max + 1)
               for m in range(1, m_max + 1) for n in range(1, n_max + 1)]
    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        return list(pool.map(lambda ix: report(domain, mollifier, ix, quadrature_tol), indices))


def overlap(domain: LeakyDomain, mollifier: Mollifier, idx_a, idx_b, quadrature_tol: float = 1e-10,
            normalized: bool = False) -> float:
    """<psi_A, psi_B> over the domain.

    Exactly zero when the rectangles or the transverse modes differ. For
    m != m' only the cutoff edges contribute, and the integrand is written
    as (chi^2 - 1)(cos(pi(m-m')u) - cos(pi(m+m')u)) to avoid cancellation.
    """
    A, B = _check(domain, idx_a), _check(domain, idx_b)
    if A.i != B.i or A.n != B.n:
        return 0.0
    _, ell, delta = _rect(domain, A.i)
    if A.m == B.m:
        n2, _ = _profile_norm2(mollifier, A.m, quadrature_tol)
        return 1.0 if normalized else delta / 2 * ell * n2
    d, s = A.m - B.m, A.m + B.m

    def f(u):
        return (mollifier.chi(u) ** 2 - 1.0) * (np.cos(math.pi * d * u) - np.cos(math.pi * s * u))

    val, _ = _edge_integral(f, mollifier, s, quadrature_tol)
    if not normalized:
        return ell * delta / 4 * val
    na, _ = _profile_norm2(mollifier, A.m, quadrature_tol)
    nb, _ = _profile_norm2(mollifier, B.m, quadrature_tol)
    return val / 2 / math.sqrt(na * nb)


def tail_mass(domain: LeakyDomain, mollifier: Mollifier, index, x_cut: float,
              quadrature_tol: float = 1e-10) -> float:
    """||psi||_{x > x_cut} / ||psi||, a ratio of norms (not squared)."""
    i, m, n = _check(domain, index)
    a, ell, _ = _rect(domain, i)
    if x_cut <= a:
        return 1.0
    if x_cut >= a + ell:
        return 0.0
    u_cut = (x_cut - a) / ell
    total, _ = _profile_norm2(mollifier, m, quadrature_tol)
    part, _ = _profile_norm2(mollifier, m, quadrature_tol, lo=u_cut)
    return math.sqrt(max(part, 0.0) / total)


def overlap_constant(domain: LeakyDomain, mollifier: Mollifier, pairs: Iterable, quadrature_tol: float = 1e-12):
    """Smallest C with |normalized overlap| <= C min(eps, 1/|m - m'|) over ``pairs``.

    Returns ``(C, rows)`` where rows hold (idx_a, idx_b, overlap, ratio).
    """
    rows = []
    for A, B in pairs:
        ov = overlap(domain, mollifier, A, B, quadrature_tol, normalized=True)
        ref = min(mollifier.eps, 1.0 / abs(A[1] - B[1]))
        rows.append((QuasimodeIndex(*A), QuasimodeIndex(*B), ov, abs(ov) / ref))
    return max(r[3] for r in rows), rows
