"""Finite-difference check of the quasimode lemmas on a truncated domain.

The staircase is cut at a rectangle boundary by a Dirichlet wall and
discretised with the 5-point Laplacian on a grid aligned with every step.
Eigenpairs come from shift-invert Lanczos (ARPACK) at sigma = 0. Quasimodes
sampled on the grid are expanded in the numerical eigenbasis to test the
eigenvalue-location, ring and mass-leak inequalities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from . import quasimode
from .domain import LeakyDomain
from .mollifier import Mollifier

MAX_UNKNOWNS = 200_000
MIN_ROWS = 8


class SolverError(RuntimeError):
    """Eigensolver failure or a mesh that cannot support the request."""


class SpectrumRangeError(ValueError):
    """A quantity needs eigenvalues beyond the computed part of the spectrum."""


class CompletenessError(RuntimeError):
    def __init__(self, captured: float, required: float):
        super().__init__(f"computed eigenpairs capture {captured:.4f} of the quasimode mass; need {required}")
        self.captured = captured


def _units(value: float, h: float, what: str) -> int:
    k = round(value / h)
    if abs(k * h - value) > 1e-9 * max(1.0, value):
        raise SolverError(f"{what} = {value} is not a multiple of the mesh size {h}")
    return int(k)


@dataclass(frozen=True, eq=False)
class GridSpectrum:
    mesh_size: float
    truncation_x: float
    x_start: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)
    geometry_mask: np.ndarray = field(repr=False)
    node_x: np.ndarray = field(repr=False)
    node_y: np.ndarray = field(repr=False)
    matrix: sp.csr_matrix = field(repr=False)

    @property
    def num_unknowns(self) -> int:
        return int(self.node_x.size)

    @property
    def eigenvalue_budget(self) -> np.ndarray:
        return discretization_budget(self.eigenvalues, self.mesh_size)

    def inner(self, u, v):
        return self.mesh_size ** 2 * (u @ v)

    def gram_defect(self) -> float:
        g = self.mesh_size ** 2 * (self.eigenvectors.T @ self.eigenvectors)
        return float(np.max(np.abs(g - np.eye(g.shape[0]))))


def discretization_budget(lam, h: float):
    """h^2 lam^2 / 12, the 5-point stencil error on a rectangle mode of eigenvalue lam."""
    return h * h * np.asarray(lam, dtype=float) ** 2 / 12.0


def build_grid(domain: LeakyDomain, mesh_size: float, truncation_x: Optional[float] = None,
               include_head: bool = True):
    """Interior nodes of the truncated staircase and the 5-point Laplacian (-Delta_h).

    Returns ``(matrix, node_x, node_y, mask, x_start)``.
    """
    h = float(mesh_size)
    a = domain.a
    if truncation_x is None:
        truncation_x = float(a[-1])
    last = np.flatnonzero(np.isclose(a[1:], truncation_x, rtol=1e-12, atol=1e-12))
    if last.size == 0:
        raise SolverError(f"truncation_x = {truncation_x} is not a rectangle boundary a_i (i >= 2)")
    n_rect = int(last[0]) + 1
    x_start = 0.0 if include_head else float(a[0])
    heights = [domain.head_height] if include_head else []
    edges = [0.0] if include_head else []
    heights += list(domain.delta[:n_rect])
    edges += list(a[:n_rect])
    if min(heights) / h - 1 < MIN_ROWS:
        raise SolverError(f"mesh {h} leaves fewer than {MIN_ROWS} interior rows in the thinnest rectangle")
    edge_u = [_units(e - x_start, h, "step position") for e in edges]
    height_u = [_units(d, h, "rectangle height") for d in heights]
    nx = _units(truncation_x - x_start, h, "truncation")
    ny = max(height_u)

    # column j (x = x_start + j h) belongs to the last step starting at or before it
    cols = np.arange(nx + 1)
    step = np.searchsorted(np.array(edge_u), cols, side="right") - 1
    col_height = np.array(height_u)[np.clip(step, 0, len(height_u) - 1)]
    jj, kk = np.meshgrid(cols, np.arange(ny + 1), indexing="ij")
    mask = (jj > 0) & (jj < nx) & (kk > 0) & (kk < col_height[:, None])

    n = int(mask.sum())
    if n > MAX_UNKNOWNS:
        raise SolverError(f"{n} unknowns exceed the cap of {MAX_UNKNOWNS}")
    ids = -np.ones(mask.shape, dtype=np.int64)
    ids[mask] = np.arange(n)

    rows, cols_, vals = [np.arange(n)], [np.arange(n)], [np.full(n, 4.0)]
    for dj, dk in ((1, 0), (0, 1)):
        src = ids[: ids.shape[0] - dj, : ids.shape[1] - dk]
        dst = ids[dj:, dk:]
        both = (src >= 0) & (dst >= 0)
        s, d = src[both], dst[both]
        rows += [s, d]
        cols_ += [d, s]
        vals += [-np.ones(s.size), -np.ones(s.size)]
    matrix = sp.csr_matrix((np.concatenate(vals) / h ** 2, (np.concatenate(rows), np.concatenate(cols_))),
                           shape=(n, n))
    node_x = x_start + jj[mask] * h
    node_y = kk[mask] * h
    return matrix, node_x.astype(float), node_y.astype(float), mask, x_start


def solve(domain: LeakyDomain, mesh_size: float, num_eigs: int, truncation_x: Optional[float] = None,
          include_head: bool = True, seed: int = 0) -> GridSpectrum:
    """Lowest ``num_eigs`` Dirichlet eigenpairs of the discretised truncated domain.

    Eigenvectors are normalised with weight h^2.
    """
    matrix, node_x, node_y, mask, x_start = build_grid(domain, mesh_size, truncation_x, include_head)
    n = matrix.shape[0]
    if num_eigs < 1 or num_eigs > n // 4:
        raise SolverError(f"mesh with {n} unknowns is too coarse for {num_eigs} eigenpairs")
    v0 = np.random.default_rng(seed).standard_normal(n)
    try:
        vals, vecs = eigsh(matrix.tocsc(), k=num_eigs, sigma=0.0, which="LM", v0=v0, tol=1e-13)
    except ArpackNoConvergence as exc:
        raise SolverError(f"eigensolver did not converge: {exc}") from exc
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    # one Rayleigh-Ritz pass to restore orthonormality inside clusters
    q, _ = np.linalg.qr(vecs)
    small = q.T @ (matrix @ q)
    vals, rot = np.linalg.eigh(0.5 * (small + small.T))
    vecs = q @ rot
    vecs /= mesh_size
    vals.flags.writeable = False
    if truncation_x is None:
        truncation_x = float(domain.a[-1])
    return GridSpectrum(mesh_size=float(mesh_size), truncation_x=float(truncation_x), x_start=x_start,
                        eigenvalues=vals, eigenvectors=vecs, geometry_mask=mask, node_x=node_x,
                        node_y=node_y, matrix=matrix)


def nearest_eigenvalue(spec: GridSpectrum, mu: float) -> tuple:
    """Closest computed eigenvalue to ``mu`` and its distance."""
    if mu > spec.eigenvalues[-1]:
        raise SpectrumRangeError(f"mu = {mu} beyond the computed spectrum (max {spec.eigenvalues[-1]:.4f})")
    k = int(np.argmin(np.abs(spec.eigenvalues - mu)))
    lam = float(spec.eigenvalues[k])
    return lam, abs(lam - mu)


def sample_quasimode(spec: GridSpectrum, domain: LeakyDomain, mollifier: Mollifier, index) -> np.ndarray:
    return np.asarray(quasimode.evaluate(domain, mollifier, index, spec.node_x, spec.node_y))


@dataclass(frozen=True)
class ClusterWindowConfig:
    b: float = 2.0
    k_max: int = 4

    def __post_init__(self):
        if not self.b > 1:
            raise ValueError("window factor b must exceed 1")
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")


@dataclass(frozen=True)
class RingReport:
    index: tuple
    b: float
    quasi_eigenvalue: float
    discrepancy: float
    budget: float
    eps_grid: float
    grid_discrepancy: float
    window: tuple
    k: int
    captured: float
    outside_mass: float
    bound: float
    slack: float
    nearest: float
    distance: float

    @property
    def holds(self) -> bool:
        return self.outside_mass <= self.bound * (1 + self.slack)

    @property
    def cluster_ok(self) -> bool:
        return self.k >= 1

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["index"] = list(self.index)
        d["window"] = list(self.window)
        d["holds"] = self.holds
        return d


def _window(spec, domain, mollifier, index, b, quadrature_tol):
    rep = quasimode.report(domain, mollifier, index, quadrature_tol)
    mu = rep.quasi_eigenvalue
    budget = float(discretization_budget(mu, spec.mesh_size))
    eps_grid = rep.discrepancy + budget
    lo, hi = mu - b * eps_grid, mu + b * eps_grid
    if hi > spec.eigenvalues[-1]:
        raise SpectrumRangeError(f"window [{lo:.3f}, {hi:.3f}] extends past the computed spectrum "
                                 f"(max {spec.eigenvalues[-1]:.3f}); request more eigenpairs")
    return rep, budget, eps_grid, (lo, hi)


def ring_inequality(spec: GridSpectrum, domain: LeakyDomain, mollifier: Mollifier, index,
                    window: ClusterWindowConfig = ClusterWindowConfig(), completeness_min: float = 0.99,
                    quadrature_tol: float = 1e-10) -> RingReport:
    """Mass of the sampled quasimode outside J = [mu - b eps, mu + b eps], normalised.

    Mass on eigenpairs that were not computed is counted as outside, so the
    reported fraction never understates the left-hand side.
    """
    index = quasimode.QuasimodeIndex(*index)
    rep, budget, eps_grid, (lo, hi) = _window(spec, domain, mollifier, index, window.b, quadrature_tol)
    psi = sample_quasimode(spec, domain, mollifier, index)
    norm2 = spec.inner(psi, psi)
    coeff = spec.mesh_size ** 2 * (spec.eigenvectors.T @ psi)
    captured = float(np.sum(coeff ** 2) / norm2)
    if captured < completeness_min:
        raise CompletenessError(captured, completeness_min)
    in_j = (spec.eigenvalues >= lo) & (spec.eigenvalues <= hi)
    inside = float(np.sum(coeff[in_j] ** 2) / norm2)
    resid = spec.matrix @ psi - rep.quasi_eigenvalue * psi
    grid_disc = math.sqrt(spec.inner(resid, resid) / norm2)
    nearest, dist = nearest_eigenvalue(spec, rep.quasi_eigenvalue)
    return RingReport(index=tuple(index), b=window.b, quasi_eigenvalue=rep.quasi_eigenvalue,
                      discrepancy=rep.discrepancy, budget=budget, eps_grid=eps_grid, grid_discrepancy=grid_disc,
                      window=(lo, hi), k=int(in_j.sum()), captured=captured, outside_mass=max(1.0 - inside, 0.0),
                      bound=window.b ** -2, slack=1.0 - captured, nearest=nearest, distance=dist)


@dataclass(frozen=True)
class LeakReport:
    index: tuple
    b: float
    x_cut: float
    k: int
    phi_tail_mass: float
    psi_tail_ratio: float
    lower_bound: float
    slack: float
    tail_masses: tuple

    @property
    def holds(self) -> bool:
        return self.phi_tail_mass >= self.lower_bound - self.slack

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["index"] = list(self.index)
        d["tail_masses"] = list(self.tail_masses)
        d["holds"] = self.holds
        return d


def leak_witness(spec: GridSpectrum, domain: LeakyDomain, mollifier: Mollifier, index,
                 window: ClusterWindowConfig = ClusterWindowConfig(), x_cut: Optional[float] = None,
                 slack: float = 0.05, quadrature_tol: float = 1e-10) -> LeakReport:
    """Largest ||phi_j||_{x > x_cut} over eigenvalues in J against (1/sqrt k)(||psi||_A/||psi|| - 1/b).

    Both sides are norms, not squared masses. ``x_cut`` defaults to a_1.
    """
    index = quasimode.QuasimodeIndex(*index)
    if x_cut is None:
        x_cut = float(domain.a[0])
    a_i = float(domain.a[index.i - 1])
    if not x_cut <= a_i:
        raise ValueError(f"x_cut = {x_cut} must not exceed a_{index.i} = {a_i}")
    _, _, _, (lo, hi) = _window(spec, domain, mollifier, index, window.b, quadrature_tol)
    in_j = np.flatnonzero((spec.eigenvalues >= lo) & (spec.eigenvalues <= hi))
    k = int(in_j.size)
    if k == 0:
        raise SolverError(f"window [{lo:.3f}, {hi:.3f}] holds no eigenvalue; solver or budget failure")
    beyond = spec.node_x > x_cut
    vecs = spec.eigenvectors[:, in_j]
    tails = np.sqrt(spec.mesh_size ** 2 * np.sum(vecs[beyond] ** 2, axis=0))
    ratio = quasimode.tail_mass(domain, mollifier, index, x_cut, quadrature_tol)
    bound = (ratio - 1.0 / window.b) / math.sqrt(k)
    return LeakReport(index=tuple(index), b=window.b, x_cut=float(x_cut), k=k, phi_tail_mass=float(tails.max()),
                      psi_tail_ratio=ratio, lower_bound=bound, slack=slack, tail_masses=tuple(tails.tolist()))
