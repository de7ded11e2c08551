"""Smooth cutoff of the unit interval with closed-form derivatives."""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .specfun import _gauss_legendre

_TABLE_CELLS = 1024
_CELL_NODES = 20


def bump(s):
    """exp(-1/(s(1-s))) on (0, 1), zero elsewhere."""
    s = np.asarray(s, dtype=float)
    inside = (s > 0.0) & (s < 1.0)
    safe = np.where(inside, s, 0.5)
    with np.errstate(over="ignore", divide="ignore"):
        return np.where(inside, np.exp(-1.0 / (safe * (1.0 - safe))), 0.0)


@lru_cache(maxsize=None)
def _phi_table():
    """Cumulative integral of ``bump`` at the nodes k / _TABLE_CELLS."""
    x, w = _gauss_legendre(_CELL_NODES)
    edges = np.linspace(0.0, 1.0, _TABLE_CELLS + 1)
    lo, hi = edges[:-1], edges[1:]
    nodes = 0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * x[None, :]
    cells = 0.5 * (hi - lo) * (bump(nodes) @ w)
    table = np.concatenate([[0.0], np.cumsum(cells)])
    table.flags.writeable = False
    return table


def phi(t):
    """Phi(t) = integral of the bump from 0 to t, for t in [0, 1]."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    table = _phi_table()
    cell = np.minimum((t * _TABLE_CELLS).astype(int), _TABLE_CELLS - 1)
    left = cell / _TABLE_CELLS
    x, w = _gauss_legendre(_CELL_NODES)
    half = 0.5 * (t - left)
    nodes = (left + half)[..., None] + half[..., None] * x
    return table[cell] + half * (bump(nodes) @ w)


PHI_ONE = float(_phi_table()[-1])


def step(t):
    """Smooth step S(t) = Phi(t)/Phi(1): 0 for t <= 0, 1 for t >= 1."""
    return phi(t) / PHI_ONE


def step_prime(t):
    return bump(t) / PHI_ONE


def step_double_prime(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    safe = np.where(inside, t, 0.5)
    factor = (1.0 - 2.0 * safe) / (safe * (1.0 - safe)) ** 2
    return np.where(inside, step_prime(safe) * factor, 0.0)


class Mollifier:
    """Cutoff chi equal to 1 on [eps, 1-eps] and 0 outside [0, 1].

    On the left edge chi(x) = S(x/eps), on the right edge S((1-x)/eps),
    where S is the normalised integral of exp(-1/(s(1-s))). chi is C^infinity
    and symmetric about 1/2.
    """

    def __init__(self, eps: float = 0.1):
        eps = float(eps)
        if not 0.0 < eps < 0.5:
            raise ValueError(f"mollifier edge width must lie in (0, 1/2), got {eps}")
        self.eps = eps
        self.normalizer = PHI_ONE

    def __repr__(self):
        return f"Mollifier(eps={self.eps})"

    def _edge(self, x):
        x = np.asarray(x, dtype=float)
        left = x < 0.5
        t = np.where(left, x, 1.0 - x) / self.eps
        return x, left, t

    def chi(self, x):
        x, _, t = self._edge(x)
        out = np.where((x <= 0.0) | (x >= 1.0), 0.0, step(t))
        return out if out.ndim else float(out)

    def chi_prime(self, x):
        x, left, t = self._edge(x)
        sign = np.where(left, 1.0, -1.0)
        out = sign * step_prime(t) / self.eps
        return out if out.ndim else float(out)

    def chi_double_prime(self, x):
        _, _, t = self._edge(x)
        out = step_double_prime(t) / self.eps ** 2
        return out if out.ndim else float(out)

    @property
    def derivative_constant(self) -> float:
        """eps * sup|chi'|, a property of the profile alone."""
        return math.exp(-4.0) / PHI_ONE

    @property
    def edges(self) -> tuple:
        """The two intervals where chi is not locally constant."""
        return (0.0, self.eps), (1.0 - self.eps, 1.0)
