"""Continuous subadditive cocycles over an irrational circle rotation.

A cocycle is given by its generator, a batch map (n, phases) -> f_n(phases)
with f_{n+m}(x) <= f_n(x) + f_m(x + n*omega).  The module carries the
truncated series metric on such cocycles, the Lyapunov functional, and
numerical probes of the uniform convergence of (1/n) f_n from above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .cocycle import log_norms_at
from .sampling import SamplingFunction


@dataclass(frozen=True)
class SubadditiveCocycle:
    """Generator-backed subadditive cocycle over rotation by omega."""

    generator: Callable[[int, np.ndarray], np.ndarray]
    omega: float
    tag: str = ""

    def values(self, n: int, phases) -> np.ndarray:
        if n < 1:
            raise ValueError("cocycle depth must be >= 1")
        xs = np.asarray(phases, dtype=np.float64)
        out = np.asarray(self.generator(n, xs), dtype=np.float64)
        if out.shape != xs.shape:
            raise ValueError("generator must return one value per phase")
        return out

    def value(self, n: int, x: float) -> float:
        return float(self.values(n, np.array([x]))[0])


def schrodinger_cocycle(f: SamplingFunction, omega: float,
                        energy: float) -> SubadditiveCocycle:
    """f_n(x) = ln ||A_n(x)|| for the transfer cocycle at the given energy."""

    def gen(n: int, xs: np.ndarray) -> np.ndarray:
        return log_norms_at(f, omega, energy, n, xs)

    return SubadditiveCocycle(generator=gen, omega=omega,
                              tag=f"schrodinger(E={energy})")


def additive_cocycle(c: float, omega: float) -> SubadditiveCocycle:
    """f_n(x) = n*c, the additive (hence subadditive) constant cocycle."""

    def gen(n: int, xs: np.ndarray) -> np.ndarray:
        return np.full(xs.shape, n * c)

    return SubadditiveCocycle(generator=gen, omega=omega, tag=f"additive({c})")


def shifted_cocycle(base: SubadditiveCocycle, c: float) -> SubadditiveCocycle:
    """g_n = f_n + c; stays subadditive for c <= 0, used as a probe input."""

    def gen(n: int, xs: np.ndarray) -> np.ndarray:
        return base.values(n, xs) + c

    return SubadditiveCocycle(generator=gen, omega=base.omega,
                              tag=f"{base.tag}+{c}")


def subadditivity_defect(c: SubadditiveCocycle, n: int, m: int,
                         phases) -> float:
    """max over phases of f_{n+m}(x) - f_n(x) - f_m(x + n w); <= 0 ideally."""
    xs = np.asarray(phases, dtype=np.float64)
    whole = c.values(n + m, xs)
    parts = c.values(n, xs) + c.values(m, np.mod(xs + n * c.omega, 1.0))
    return float(np.max(whole - parts))


def _uniform_grid(m_theta: int) -> np.ndarray:
    if m_theta < 1:
        raise ValueError("m_theta must be >= 1")
    return np.arange(m_theta) / m_theta


@dataclass(frozen=True)
class GammaDistance:
    """Truncated series distance with its rigorous tail bound."""

    value: float
    tail_bound: float
    n_max: int

    def __float__(self) -> float:
        return self.value


def gamma_metric(f: SubadditiveCocycle, g: SubadditiveCocycle, n_max: int,
                 m_theta: int) -> GammaDistance:
    """sum_{n<=n_max} 2^-n ||g_n - f_n||_0 / (1 + ||g_n - f_n||_0).

    Sup norms are estimated on a uniform grid of m_theta phases; the
    discarded tail is below 2^-n_max, reported alongside the value.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    grid = _uniform_grid(m_theta)
    total = 0.0
    for n in range(1, n_max + 1):
        sup = float(np.max(np.abs(g.values(n, grid) - f.values(n, grid))))
        total += 2.0 ** (-n) * sup / (1.0 + sup)
    return GammaDistance(value=total, tail_bound=2.0 ** (-n_max), n_max=n_max)


def lambda_estimate(c: SubadditiveCocycle, n: int, m_theta: int) -> float:
    """(1/n) grid average of f_n; an upper proxy for the Lyapunov functional."""
    grid = _uniform_grid(m_theta)
    return float(np.mean(c.values(n, grid))) / n


def _depth_ladder(n: int) -> list[int]:
    out = []
    d = n
    while d >= 1:
        out.append(d)
        d //= 2
    return out


def lambda_best(c: SubadditiveCocycle, n: int, m_theta: int) -> float:
    """Min of lambda_estimate over the halving depth ladder ending at n.

    The infimum characterization makes every depth an upper bound, so the
    minimum is the sharpest available estimate (and includes depth n).
    """
    return min(lambda_estimate(c, d, m_theta) for d in _depth_ladder(n))


def furman_gap(c: SubadditiveCocycle, n: int, m_theta: int) -> float:
    """sup over the grid of (1/n) f_n minus the best Lyapunov estimate."""
    grid = _uniform_grid(m_theta)
    sup = float(np.max(c.values(n, grid))) / n
    return sup - lambda_best(c, n, m_theta)


@dataclass(frozen=True)
class ProbeRow:
    tag: str
    distance: GammaDistance
    sup_gap: float
    n: int
    m_theta: int


def uniform_usc_probe(f: SubadditiveCocycle,
                      perturbations: Sequence[SubadditiveCocycle],
                      n: int, m_theta: int,
                      metric_n_max: int = 20,
                      metric_m_theta: int = 512) -> list[ProbeRow]:
    """For each perturbed cocycle g: (distance to f, sup (1/n) g_n - Lambda(f)).

    A uniformly-upper-semicontinuous Lyapunov functional keeps the second
    column small once the distance is small and n is large.
    """
    grid = _uniform_grid(m_theta)
    lam = lambda_best(f, n, m_theta)
    rows = []
    for g in perturbations:
        dist = gamma_metric(f, g, metric_n_max, metric_m_theta)
        sup = float(np.max(g.values(n, grid))) / n
        rows.append(ProbeRow(tag=g.tag, distance=dist, sup_gap=sup - lam,
                             n=n, m_theta=m_theta))
    return rows
