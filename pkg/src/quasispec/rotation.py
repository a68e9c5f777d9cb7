"""Continued fractions, rational approximants, and circle-rotation utilities.

Frequencies are reduced mod 1, so every expansion starts with a_0 = 0 and
the quotient list holds a_1, a_2, ...  Expansions can be built either from
a float (Gauss map, noise-limited) or from an explicit quotient list; the
latter is what experiments use for the golden mean and friends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

DEFAULT_CF_TOL = 1e-12
MAX_QUOTIENTS = 64


def frac(x):
    """Fractional part in [0, 1); works on scalars and arrays."""
    return np.mod(x, 1.0)


def circle_norm(x):
    """Distance to the nearest integer, min(frac(x), 1 - frac(x))."""
    f = np.mod(x, 1.0)
    return np.minimum(f, 1.0 - f)


def circle_dist(x, y):
    """Distance between two points of the circle R/Z."""
    return circle_norm(x - y)


@dataclass(frozen=True)
class Approximant:
    """One truncation p/q of a continued fraction, with 1-based index."""

    p: int
    q: int
    index: int

    def __post_init__(self):
        if self.q <= 0:
            raise ValueError("approximant denominator must be positive")
        if math.gcd(self.p, self.q) != 1:
            raise ValueError(f"approximant {self.p}/{self.q} is not reduced")

    @property
    def value(self) -> float:
        return self.p / self.q

    def as_fraction(self) -> Fraction:
        return Fraction(self.p, self.q)


@dataclass(frozen=True)
class ContinuedFraction:
    """A frequency in [0,1) together with its partial quotients.

    exact_rational is set when the expansion terminated (remainder below
    tolerance), in which case (p, q) reproduces the value exactly.
    """

    value: float
    quotients: tuple[int, ...]
    exact_rational: Optional[tuple[int, int]] = None

    def __post_init__(self):
        for a in self.quotients:
            if a < 1:
                raise ValueError("partial quotients must be >= 1")

    @classmethod
    def from_quotients(cls, quotients: Sequence[int],
                       rational: bool = False) -> "ContinuedFraction":
        """Build from an explicit quotient list (exact mode).

        With rational=False the list is treated as a truncation of an
        infinite expansion, so the frequency counts as irrational even
        though the stored float value is the finite reconstruction.
        """
        qs = tuple(int(a) for a in quotients)
        value = reconstruct(qs)
        exact = None
        if rational:
            p, q = _final_pq(qs)
            exact = (p, q)
        return cls(value=value, quotients=qs, exact_rational=exact)

    @property
    def is_rational(self) -> bool:
        return self.exact_rational is not None

    def deepest(self) -> Approximant:
        return approximants(self)[-1]


def _final_pq(quotients: Sequence[int]) -> tuple[int, int]:
    p_prev, q_prev = 1, 0
    p, q = 0, 1
    for a in quotients:
        p, p_prev = a * p + p_prev, p
        q, q_prev = a * q + q_prev, q
    return p, q


def reconstruct(quotients: Sequence[int]) -> float:
    """Float value of [0; a_1, ..., a_n]."""
    r = 0.0
    for a in reversed(quotients):
        r = 1.0 / (a + r)
    return r


def cf_expand(x: float, max_terms: int = MAX_QUOTIENTS,
              tol: float = DEFAULT_CF_TOL) -> ContinuedFraction:
    """Expand x mod 1 by the Gauss map.

    Stops when the fractional remainder drops below tol (the expansion is
    then declared exactly rational) or after max_terms quotients.
    """
    if not math.isfinite(x):
        raise ValueError("cannot expand a non-finite number")
    if max_terms < 1:
        raise ValueError("max_terms must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    value = x % 1.0
    quotients: list[int] = []
    y = value
    exact = None
    for _ in range(max_terms):
        if y < tol:
            exact = _final_pq(quotients)
            break
        inv = 1.0 / y
        a = int(math.floor(inv))
        quotients.append(a)
        y = inv - a
    else:
        if y < tol:
            exact = _final_pq(quotients)
    return ContinuedFraction(value=value, quotients=tuple(quotients),
                             exact_rational=exact)


def approximants(cf: ContinuedFraction) -> list[Approximant]:
    """All truncations p_n/q_n of cf, n = 1..len(quotients)."""
    if not cf.quotients:
        raise ValueError("continued fraction has no quotients")
    out = []
    p_prev, q_prev = 1, 0
    p, q = 0, 1
    for n, a in enumerate(cf.quotients, start=1):
        p, p_prev = a * p + p_prev, p
        q, q_prev = a * q + q_prev, q
        out.append(Approximant(p=p, q=q, index=n))
    return out


@dataclass(frozen=True)
class DiophantineReport:
    """Best empirical constant C with ||n w|| > C / n^(1+kappa) up to N."""

    kappa: float
    c_lower: float
    verified_up_to: int


def diophantine_check(cf: ContinuedFraction, kappa: float,
                      n_max: int) -> DiophantineReport:
    """Exhaustive scan of ||n w|| * n^(1+kappa) over 1 <= n <= n_max.

    Works in double precision; for n_max up to ~1e7 the rounding error in
    n*w stays far below the golden-mean scale of ||n w||.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    if cf.is_rational:
        raise ValueError("Diophantine condition is about irrational frequencies")
    omega = cf.value
    c_lower = math.inf
    chunk = 1_000_000
    for lo in range(1, n_max + 1, chunk):
        n = np.arange(lo, min(lo + chunk, n_max + 1), dtype=np.float64)
        vals = circle_norm(n * omega) * n ** (1.0 + kappa)
        m = float(vals.min())
        if m < c_lower:
            c_lower = m
    return DiophantineReport(kappa=kappa, c_lower=c_lower, verified_up_to=n_max)


def orbit_hits_interval(theta: float, omega: float, approx: Approximant,
                        prev_q: int, interval: tuple[float, float]) -> int:
    """Smallest j >= 0 with theta + j*omega landing in the interval (mod 1).

    Requires the interval longer than 1/q_n; the returned j is then at most
    q_n + q_{n-1} - 1 provided (approx, prev_q) are consecutive approximant
    denominators of omega.
    """
    lo, hi = interval
    length = hi - lo
    if length <= 0:
        raise ValueError("interval must have positive length")
    if length <= 1.0 / approx.q:
        raise ValueError(
            f"interval length {length} is not above 1/q_n = 1/{approx.q}")
    if length >= 1.0:
        return 0
    bound = approx.q + prev_q - 1
    for j in range(bound + 1):
        u = (theta + j * omega - lo) % 1.0
        if u <= length:
            return j
    raise RuntimeError(
        "no orbit point found within q_n + q_{n-1} - 1 steps; "
        "check that approx/prev_q are consecutive approximants of omega")


def golden_mean(depth: int = 40) -> ContinuedFraction:
    """The golden mean (sqrt(5)-1)/2 in exact quotient form."""
    return ContinuedFraction.from_quotients((1,) * depth)
