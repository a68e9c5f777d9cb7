"""Period-1 sampling functions generating quasiperiodic potentials.

Families: the cosine potential 2*lam*cos(2 pi theta), real trigonometric
polynomials, and a Weierstrass-type gamma-Holder function that is rough at
every scale.  Fejer smoothing maps any of them to a trigonometric polynomial
with the classical O(N^-gamma) sup-norm error for gamma < 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .rotation import frac

WEIERSTRASS_DEFAULT_DEPTH = 24


def _as_theta(theta):
    arr = np.asarray(theta, dtype=np.float64)
    return arr, arr.ndim == 0


class SamplingFunction:
    """Base class; subclasses provide _eval on arrays in [0, 1)."""

    holder_gamma: float
    sup_norm: float

    def eval(self, theta):
        arr, scalar = _as_theta(theta)
        out = self._eval(np.mod(arr, 1.0))
        return float(out) if scalar else out

    def __call__(self, theta):
        return self.eval(theta)

    def _eval(self, x):
        raise NotImplementedError

    def descriptor(self) -> dict:
        raise NotImplementedError

    def fourier_degree(self) -> Optional[int]:
        """Exact trigonometric degree, or None for rough functions."""
        return None


@dataclass(frozen=True)
class Cosine(SamplingFunction):
    """f(theta) = 2*lam*cos(2 pi theta), the almost Mathieu potential."""

    lam: float

    def _eval(self, x):
        return 2.0 * self.lam * np.cos(2.0 * np.pi * x)

    @property
    def holder_gamma(self) -> float:
        return 1.0

    @property
    def sup_norm(self) -> float:
        return 2.0 * abs(self.lam)

    def fourier_degree(self):
        return 1

    def descriptor(self):
        return {"kind": "cosine", "lambda": self.lam}


@dataclass(frozen=True)
class TrigPolynomial(SamplingFunction):
    """Real trig polynomial sum_j c_j e^{2 pi i j theta}, |j| <= degree.

    Stored one-sided: coeffs[j] holds c_j for j >= 0 and c_{-j} = conj(c_j)
    is implied, which keeps evaluation exactly real.
    """

    coeffs: tuple[complex, ...]

    def __post_init__(self):
        if not self.coeffs:
            raise ValueError("need at least the constant coefficient")
        if abs(self.coeffs[0].imag) > 1e-12:
            raise ValueError("constant coefficient must be real")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def _eval(self, x):
        z = np.exp(2j * np.pi * x)
        acc = np.zeros_like(z)
        for j in range(self.degree, 0, -1):
            acc = (acc + self.coeffs[j]) * z
        return self.coeffs[0].real + 2.0 * acc.real

    @property
    def holder_gamma(self) -> float:
        return 1.0

    @property
    def sup_norm(self) -> float:
        return abs(self.coeffs[0]) + 2.0 * sum(abs(c) for c in self.coeffs[1:])

    def fourier_degree(self):
        return self.degree

    def descriptor(self):
        return {"kind": "trigpoly",
                "coeffs": [[c.real, c.imag] for c in self.coeffs]}


@dataclass(frozen=True)
class WeierstrassHolder(SamplingFunction):
    """W_gamma(theta) = sum_{j=0}^{depth} 2^{-gamma j} cos(2 pi 2^j theta).

    gamma-Holder and nowhere smoother; depth 24 pushes the top frequency
    past double-precision grid resolution.  sup_norm is the triangle-
    inequality bound sum 2^{-gamma j}, not the exact supremum.
    """

    gamma: float
    depth: int = WEIERSTRASS_DEFAULT_DEPTH

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")

    def _eval(self, x):
        out = np.zeros_like(x)
        for j in range(self.depth + 1):
            out += 2.0 ** (-self.gamma * j) * np.cos(2.0 * np.pi * (2 ** j) * x)
        return out

    @property
    def holder_gamma(self) -> float:
        return self.gamma

    @property
    def sup_norm(self) -> float:
        return sum(2.0 ** (-self.gamma * j) for j in range(self.depth + 1))

    def descriptor(self):
        return {"kind": "weierstrass", "gamma": self.gamma, "depth": self.depth}


@dataclass(frozen=True)
class Scaled(SamplingFunction):
    """coupling * base(theta); keeps the Holder class of the base."""

    base: SamplingFunction
    coupling: float

    def _eval(self, x):
        return self.coupling * self.base._eval(x)

    @property
    def holder_gamma(self) -> float:
        return self.base.holder_gamma

    @property
    def sup_norm(self) -> float:
        return abs(self.coupling) * self.base.sup_norm

    def fourier_degree(self):
        return self.base.fourier_degree()

    def descriptor(self):
        d = dict(self.base.descriptor())
        d["coupling"] = d.get("coupling", 1.0) * self.coupling
        return d


@dataclass(frozen=True)
class Shifted(SamplingFunction):
    """base(theta + shift)."""

    base: SamplingFunction
    shift: float

    def _eval(self, x):
        return self.base._eval(np.mod(x + self.shift, 1.0))

    @property
    def holder_gamma(self) -> float:
        return self.base.holder_gamma

    @property
    def sup_norm(self) -> float:
        return self.base.sup_norm

    def fourier_degree(self):
        return self.base.fourier_degree()

    def descriptor(self):
        d = dict(self.base.descriptor())
        d["shift"] = d.get("shift", 0.0) + self.shift
        return d


ZERO = TrigPolynomial(coeffs=(0j,))


def evaluate(f: SamplingFunction, theta):
    """Value of f at frac(theta)."""
    return f.eval(theta)


def fourier_coefficients(f: SamplingFunction, n_max: int) -> np.ndarray:
    """c_j for j = 0..n_max by the composite trapezoid rule.

    Uses M = 8*(n_max+1) uniform points; on a periodic uniform grid the
    trapezoid rule coincides with the DFT, so it is exact for trig
    polynomials of degree <= n_max.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    m = 8 * (n_max + 1)
    vals = f.eval(np.arange(m) / m)
    spec = np.fft.fft(vals) / m
    return spec[: n_max + 1]


def fejer_smooth(f: SamplingFunction, n: int) -> TrigPolynomial:
    """Degree-n Fejer mean: coefficients damped by (1 - |j|/(n+1))."""
    if n < 0:
        raise ValueError("n must be >= 0")
    coeffs = fourier_coefficients(f, n)
    weights = 1.0 - np.arange(n + 1) / (n + 1.0)
    damped = coeffs * weights
    damped[0] = complex(damped[0].real, 0.0)
    return TrigPolynomial(coeffs=tuple(complex(c) for c in damped))


def holder_seminorm(f: SamplingFunction, gamma: float, grid: int) -> float:
    """Empirical gamma-Holder seminorm on a uniform grid.

    Scans dyadic separations d = 2^-s (down to one grid cell) and takes the
    worst ratio |f(x) - f(y)| / d^gamma over all grid pairs at that
    separation; d is measured as circle distance.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must be in (0, 1]")
    if grid < 2:
        raise ValueError("grid must be >= 2")
    xs = np.arange(grid) / grid
    vals = f.eval(xs)
    best = 0.0
    offset = grid // 2
    while offset >= 1:
        d = offset / grid
        diffs = np.abs(vals - np.roll(vals, -offset))
        ratio = float(diffs.max()) / d ** gamma
        if ratio > best:
            best = ratio
        offset //= 2
    return best


def from_descriptor(desc: dict) -> SamplingFunction:
    """Build a sampling function from its JSON descriptor."""
    d = dict(desc)
    kind = d.pop("kind", None)
    coupling = d.pop("coupling", 1.0)
    shift = d.pop("shift", 0.0)
    if kind == "cosine":
        f: SamplingFunction = Cosine(lam=float(d.pop("lambda")))
    elif kind == "weierstrass":
        f = WeierstrassHolder(gamma=float(d.pop("gamma")),
                              depth=int(d.pop("depth", WEIERSTRASS_DEFAULT_DEPTH)))
    elif kind == "trigpoly":
        coeffs = tuple(complex(re, im) for re, im in d.pop("coeffs"))
        f = TrigPolynomial(coeffs=coeffs)
    else:
        raise ValueError(f"unknown sampling-function kind {kind!r}")
    if d:
        raise ValueError(f"unused sampling descriptor fields {sorted(d)}")
    if shift != 0.0:
        f = Shifted(base=f, shift=shift)
    if coupling != 1.0:
        f = Scaled(base=f, coupling=coupling)
    return f
