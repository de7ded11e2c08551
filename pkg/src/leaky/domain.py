"""Staircase domains: a rectangular head followed by shrinking rectangles.

A domain family fixes the heights through mu_i = pi^2 / delta_i^2 and the
rectangle areas through A_i = tau(mu_i) / h(mu_i); the lengths follow as
ell_i = A_i / delta_i and xi_i = pi^2 / ell_i^2.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

PI2 = math.pi ** 2
KINDS = ("algebraic", "logarithmic", "intro_powerlaw", "explicit_list")


class DomainError(ValueError):
    """Invalid family parameters or an inconsistent domain."""


@dataclass(frozen=True)
class ParameterFamily:
    """Parameters of one of the built-in domain families.

    ``algebraic``: h(x) = x^beta, tau(x) = x^-alpha_prime, mu_i = pi^2 i^mu_power.
    ``logarithmic``: h(x) = sqrt(x)/log^gamma(1+x), tau(x) = log^-alpha_prime(x),
    mu_i = pi^2 exp(i).
    ``intro_powerlaw``: delta_i = i^-(1+sigma), ell_i = i^rho directly.
    ``explicit_list``: mu_list given; lengths from xi_list when present,
    otherwise from tau(x) = x^-alpha_prime and h(x) = x^beta.
    An explicit ``mu_list`` overrides the default sequence of any kind except
    ``intro_powerlaw``.
    """

    kind: str
    beta: float = 0.0
    gamma: float = 1.0
    alpha_prime: float = 0.0
    sigma: float = 1.0
    rho: float = 0.5
    mu_power: float = 4.0
    mu_list: Optional[tuple] = None
    xi_list: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown family kind {self.kind!r}; expected one of {KINDS}")
        if self.mu_list is not None:
            object.__setattr__(self, "mu_list", tuple(float(m) for m in self.mu_list))
        if self.xi_list is not None:
            object.__setattr__(self, "xi_list", tuple(float(m) for m in self.xi_list))
        if self.kind == "algebraic":
            if not 0.0 <= self.beta < 0.5:
                raise DomainError(f"algebraic family needs 0 <= beta < 1/2, got {self.beta}")
            if not self.alpha_prime > 0:
                raise DomainError("algebraic family needs alpha_prime > 0")
            if not self.mu_power > 0:
                raise DomainError("mu_power must be positive")
        elif self.kind == "logarithmic":
            if not self.gamma > 0:
                raise DomainError("logarithmic family needs gamma > 0")
            if not self.alpha_prime > 0:
                raise DomainError("logarithmic family needs alpha_prime > 0")
        elif self.kind == "intro_powerlaw":
            if not self.sigma > self.rho > 0:
                raise DomainError(f"intro family needs sigma > rho > 0, got sigma={self.sigma}, rho={self.rho}")
        else:
            if not self.mu_list:
                raise DomainError("explicit_list family needs a non-empty mu_list")
            if not 0.0 <= self.beta < 0.5 or self.alpha_prime < 0:
                raise DomainError("explicit_list needs 0 <= beta < 1/2 and alpha_prime >= 0")
            if self.xi_list is not None and len(self.xi_list) != len(self.mu_list):
                raise DomainError("xi_list and mu_list lengths differ")
        if self.mu_list is not None:
            mu = np.asarray(self.mu_list)
            if np.any(mu <= 0) or np.any(np.diff(mu) < 0):
                raise DomainError("mu_list must be positive and non-decreasing")

    # -- the two shaping functions ------------------------------------------
    def h(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "logarithmic":
            return np.sqrt(x) / np.log1p(x) ** self.gamma
        if self.kind in ("algebraic", "explicit_list"):
            return x ** self.beta
        raise DomainError("intro_powerlaw family has no h function")

    def tau(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "logarithmic":
            return np.log(x) ** (-self.alpha_prime)
        if self.kind in ("algebraic", "explicit_list"):
            return x ** (-self.alpha_prime)
        raise DomainError("intro_powerlaw family has no tau function")

    @property
    def has_shape_functions(self) -> bool:
        return self.kind != "intro_powerlaw"

    def mu_sequence(self, truncation: int) -> np.ndarray:
        if self.mu_list is not None:
            if truncation > len(self.mu_list):
                raise DomainError(f"truncation {truncation} exceeds the {len(self.mu_list)} given mu values")
            return np.asarray(self.mu_list[:truncation])
        i = np.arange(1, truncation + 1, dtype=float)
        if self.kind == "algebraic":
            return PI2 * i ** self.mu_power
        if self.kind == "logarithmic":
            return PI2 * np.exp(i)
        return PI2 * i ** (2 * (1 + self.sigma))

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        for name in ("beta", "gamma", "alpha_prime", "sigma", "rho", "mu_power"):
            d[name] = getattr(self, name)
        if self.mu_list is not None:
            d["mu_list"] = list(self.mu_list)
        if self.xi_list is not None:
            d["xi_list"] = list(self.xi_list)
        return d


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class LeakyDomain:
    """A truncated staircase domain.

    The head D_0 = (0, head_width) x (0, head_height); rectangle i occupies
    [a_i, a_{i+1}) x (0, delta_i). All four sequences are stored so that
    whichever pair was given is kept bit-exact.
    """

    head_width: float
    head_height: float
    delta: np.ndarray
    ell: np.ndarray
    mu: np.ndarray
    xi: np.ndarray
    family: Optional[ParameterFamily] = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("delta", "ell", "mu", "xi"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        n = self.delta.size
        if n < 1 or not (self.ell.size == self.mu.size == self.xi.size == n):
            raise DomainError("domain needs at least one rectangle and equal-length sequences")
        if np.any(self.delta <= 0) or np.any(self.ell <= 0):
            raise DomainError("rectangle heights and lengths must be positive")
        if np.any(np.diff(self.delta) >= 0):
            raise DomainError("rectangle heights must be strictly decreasing")
        if not self.head_width > 0:
            raise DomainError("head width must be positive")
        if self.head_height < self.delta[0]:
            raise DomainError("head height must be at least delta_1")
        if not np.allclose(self.mu * self.delta ** 2, PI2, rtol=1e-12, atol=0):
            raise DomainError("mu and delta are inconsistent")
        if not np.allclose(self.xi * self.ell ** 2, PI2, rtol=1e-12, atol=0):
            raise DomainError("xi and ell are inconsistent")

    @property
    def truncation(self) -> int:
        return int(self.delta.size)

    @property
    def a(self) -> np.ndarray:
        """Rectangle left edges a_1..a_{I+1}; a_{I+1} is the far end."""
        return _frozen(self.head_width + np.concatenate([[0.0], np.cumsum(self.ell)]))

    @property
    def rect_areas(self) -> np.ndarray:
        return self.ell * self.delta

    @property
    def tail_area(self) -> float:
        return float(np.sum(self.rect_areas))

    @property
    def head_area(self) -> float:
        return self.head_width * self.head_height

    @property
    def total_area(self) -> float:
        return self.head_area + self.tail_area

    def height_at(self, x):
        """The right-continuous profile f(x) (0 beyond the truncation)."""
        x = np.asarray(x, dtype=float)
        a = self.a
        idx = np.searchsorted(a, x, side="right") - 1
        heights = np.concatenate([[self.head_height], self.delta, [0.0]])
        out = heights[np.clip(idx + 1, 0, heights.size - 1)]
        return np.where(x <= 0, 0.0, out)

    def to_dict(self) -> dict:
        return {
            "kind": self.family.kind if self.family else "explicit_list",
            "family": self.family.to_dict() if self.family else None,
            "truncation": self.truncation,
            "head": {"a1": self.head_width, "delta0": self.head_height},
            "a": self.a.tolist(),
            "delta": self.delta.tolist(),
            "ell": self.ell.tolist(),
            "mu": self.mu.tolist(),
            "xi": self.xi.tolist(),
            "rect_areas": self.rect_areas.tolist(),
            "tail_area": self.tail_area,
            "head_area": self.head_area,
            "total_area": self.total_area,
            "area_constant": area_constant(self),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _merge_ties(mu: np.ndarray, ell: np.ndarray):
    """Merge equal consecutive mu values, summing their lengths."""
    keep_mu, keep_ell = [mu[0]], [ell[0]]
    for m, l in zip(mu[1:], ell[1:]):
        if m == keep_mu[-1]:
            keep_ell[-1] += l
        else:
            keep_mu.append(m)
            keep_ell.append(l)
    return np.array(keep_mu), np.array(keep_ell)


def _check_shape_functions(family: ParameterFamily, mu: np.ndarray) -> None:
    h, tau = family.h(mu), family.tau(mu)
    if np.any(np.diff(h) < 0) or np.any(h > np.sqrt(mu) * (1 + 1e-12)):
        raise DomainError(f"{family.kind}: h must be increasing with h(x) <= sqrt(x) on the mu range")
    if np.any(tau <= 0) or np.any(np.diff(tau) > 0):
        raise DomainError(f"{family.kind}: tau must be positive and decreasing on the mu range")


def build_domain(family: ParameterFamily, truncation: int, head_width: float = 1.0,
                 head_height: Optional[float] = None) -> LeakyDomain:
    """Instantiate the first ``truncation`` rectangles of a family.

    The head defaults to 1 x 2 delta_1.
    """
    if int(truncation) != truncation or truncation < 1:
        raise DomainError(f"truncation must be a positive integer, got {truncation}")
    truncation = int(truncation)

    if family.kind == "intro_powerlaw":
        i = np.arange(1, truncation + 1, dtype=float)
        delta = i ** (-(1 + family.sigma))
        ell = i ** family.rho
        mu, xi = PI2 / delta ** 2, PI2 / ell ** 2
    else:
        mu = family.mu_sequence(truncation)
        if family.xi_list is not None:
            xi = np.asarray(family.xi_list[:truncation])
            ell = math.pi / np.sqrt(xi)
            if np.any(np.diff(mu) == 0):
                mu, ell = _merge_ties(mu, ell)
                xi = PI2 / ell ** 2
        else:
            delta = math.pi / np.sqrt(mu)
            ell = family.tau(mu) / (family.h(mu) * delta)
            if np.any(np.diff(mu) == 0):
                mu, ell = _merge_ties(mu, ell)
            xi = PI2 / ell ** 2
        delta = math.pi / np.sqrt(mu)
        if family.xi_list is None:
            _check_shape_functions(family, mu)
    if head_height is None:
        head_height = 2.0 * float(delta[0])
    return LeakyDomain(head_width=float(head_width), head_height=float(head_height),
                       delta=delta, ell=ell, mu=mu, xi=xi, family=family)


def area_constant(domain: LeakyDomain) -> float:
    """pi^2 sum_i (mu_i xi_i)^(-1/2), the area of the rectangle union."""
    return float(PI2 * np.sum(1.0 / np.sqrt(domain.mu * domain.xi)))


def eps_ratio(domain: LeakyDomain) -> np.ndarray:
    """xi_i / (h(mu_i)^2 / (mu_i tau(mu_i)^2)); identically pi^4 for built families."""
    fam = domain.family
    if fam is None or not fam.has_shape_functions or fam.xi_list is not None:
        raise DomainError("eps_ratio needs a family with h and tau")
    mu = domain.mu
    return domain.xi / (fam.h(mu) ** 2 / (mu * fam.tau(mu) ** 2))


def tau_partial_sums(domain: LeakyDomain) -> np.ndarray:
    fam = domain.family
    if fam is None or not fam.has_shape_functions:
        raise DomainError("tau_partial_sums needs a family with tau")
    return np.cumsum(fam.tau(domain.mu))


# -- JSON ingestion and presets ---------------------------------------------

PRESETS = {
    "intro": dict(kind="intro_powerlaw", sigma=1.0, rho=0.5, truncation=10),
    "algebraic": dict(kind="algebraic", beta=0.1, alpha_prime=0.6, mu_power=4.0, truncation=20),
    "logarithmic": dict(kind="logarithmic", gamma=1.5, alpha_prime=1.5, truncation=12),
    "unit": dict(kind="explicit_list", mu_list=[PI2], xi_list=[PI2], truncation=1),
    "two_step": dict(kind="explicit_list", mu_list=[PI2, 4 * PI2],
                     xi_list=[PI2 / 16, PI2 / 16], truncation=2),
}

_FAMILY_FIELDS = ("kind", "beta", "gamma", "alpha_prime", "sigma", "rho", "mu_power", "mu_list", "xi_list")


def domain_from_config(cfg: dict) -> LeakyDomain:
    """Build a domain from the JSON family schema.

    Accepts ``{"kind", "beta", "gamma", "alpha_prime", "sigma", "rho",
    "mu_list", "xi_list", "truncation", "head": {"a1", "delta0"}}`` and also
    the summary emitted by :meth:`LeakyDomain.to_dict`, which is re-read as an
    explicit list with identical mu and xi.
    """
    cfg = dict(cfg)
    head = cfg.get("head") or {}
    if "mu" in cfg and "xi" in cfg:
        family = ParameterFamily(kind="explicit_list", mu_list=tuple(cfg["mu"]), xi_list=tuple(cfg["xi"]))
        truncation = len(cfg["mu"])
    else:
        kw = {k: cfg[k] for k in _FAMILY_FIELDS if cfg.get(k) is not None}
        if "kind" not in kw:
            raise DomainError("family config needs a 'kind'")
        family = ParameterFamily(**kw)
        truncation = cfg.get("truncation")
        if truncation is None:
            if family.mu_list is None:
                raise DomainError("family config needs a 'truncation'")
            truncation = len(family.mu_list)
    return build_domain(family, truncation, head_width=head.get("a1", 1.0), head_height=head.get("delta0"))


def preset_config(name: str, **overrides) -> dict:
    if name not in PRESETS:
        raise DomainError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    cfg = dict(PRESETS[name])
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    return cfg


def preset(name: str, **overrides) -> LeakyDomain:
    return domain_from_config(preset_config(name, **overrides))
