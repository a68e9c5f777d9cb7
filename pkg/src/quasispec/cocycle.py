"""Schrodinger transfer-matrix cocycle over circle rotation.

The one-step matrix at phase theta is [[E - f(theta), -1], [1, 0]]; k-step
products are carried in renormalized form (a matrix of norm order one plus
an accumulated natural-log scale) so depths of 1e5 and beyond stay finite.
Matrix size is fixed at 2x2 and the norm is the operator 2-norm, computed
in closed form from the singular values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import _kernels
from .rotation import frac
from .sampling import SamplingFunction, fejer_smooth


class NearSingularRestriction(RuntimeError):
    """Finite-box restriction too close to an eigenvalue to invert."""


def _opnorm(a: float, b: float, c: float, d: float) -> float:
    fro2 = a * a + b * b + c * c + d * d
    det = a * d - b * c
    disc = fro2 * fro2 - 4.0 * det * det
    if disc < 0.0:
        disc = 0.0
    return math.sqrt(0.5 * (fro2 + math.sqrt(disc)))


def _opnorm_vec(a, b, c, d):
    fro2 = a * a + b * b + c * c + d * d
    det = a * d - b * c
    disc = np.maximum(fro2 * fro2 - 4.0 * det * det, 0.0)
    return np.sqrt(0.5 * (fro2 + np.sqrt(disc)))


@dataclass(frozen=True)
class Mat2:
    m11: float
    m12: float
    m21: float
    m22: float

    @classmethod
    def identity(cls) -> "Mat2":
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def from_array(cls, arr) -> "Mat2":
        return cls(float(arr[0, 0]), float(arr[0, 1]),
                   float(arr[1, 0]), float(arr[1, 1]))

    def as_array(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]])

    def det(self) -> float:
        return self.m11 * self.m22 - self.m12 * self.m21

    def norm(self) -> float:
        return _opnorm(self.m11, self.m12, self.m21, self.m22)

    def mul(self, other: "Mat2") -> "Mat2":
        return Mat2(
            self.m11 * other.m11 + self.m12 * other.m21,
            self.m11 * other.m12 + self.m12 * other.m22,
            self.m21 * other.m11 + self.m22 * other.m21,
            self.m21 * other.m12 + self.m22 * other.m22,
        )

    def adjugate(self) -> "Mat2":
        return Mat2(self.m22, -self.m12, -self.m21, self.m11)


@dataclass(frozen=True)
class LogMat:
    """A 2x2 matrix stored as exp(log_scale) * mat with ||mat|| in [1/2, 2]."""

    mat: Mat2
    log_scale: float

    @classmethod
    def identity(cls) -> "LogMat":
        return cls(mat=Mat2.identity(), log_scale=0.0)

    def log_norm(self) -> float:
        return self.log_scale + math.log(self.mat.norm())

    def det(self) -> float:
        """Determinant of the represented matrix (may overflow for huge scales)."""
        return self.mat.det() * math.exp(2.0 * self.log_scale)

    def to_array(self) -> np.ndarray:
        """Raw matrix; overflows once log_scale exceeds ~700."""
        return math.exp(self.log_scale) * self.mat.as_array()

    def inverse(self) -> "LogMat":
        det = self.mat.det()
        if det == 0.0:
            raise ZeroDivisionError("singular matrix")
        adj = self.mat.adjugate()
        # (e^s M)^-1 = e^{-s} adj(M)/det(M); fold det into the scale
        sign = 1.0 if det > 0 else -1.0
        scale = -self.log_scale - math.log(abs(det))
        mat = Mat2(sign * adj.m11, sign * adj.m12, sign * adj.m21, sign * adj.m22)
        return LogMat(mat=mat, log_scale=scale)


def energy_window(f: SamplingFunction) -> tuple[float, float]:
    """Spectral inclusion window [-2 - sup|f|, 2 + sup|f|]."""
    return (-2.0 - f.sup_norm, 2.0 + f.sup_norm)


def transfer_matrix(f: SamplingFunction, energy: float, theta: float) -> Mat2:
    return Mat2(energy - f.eval(theta), -1.0, 1.0, 0.0)


def iterate(f: SamplingFunction, omega: float, energy: float, theta: float,
            k: int) -> LogMat:
    """k-step cocycle product A(theta+(k-1)w) ... A(theta) as a LogMat.

    Negative k follows the inverse convention A_{-k}(theta) =
    (A_k(theta - k w))^{-1}.
    """
    if k == 0:
        return LogMat.identity()
    if k < 0:
        return iterate(f, omega, energy, theta + k * omega, -k).inverse()
    a, b, c, d = 1.0, 0.0, 0.0, 1.0
    scale = 0.0
    for n in range(k):
        v = energy - f.eval(theta + n * omega)
        a, b, c, d = v * a - c, v * b - d, a, b
        nrm = _opnorm(a, b, c, d)
        if nrm < 0.5 or nrm > 2.0:
            inv = 1.0 / nrm
            a *= inv
            b *= inv
            c *= inv
            d *= inv
            scale += math.log(nrm)
    return LogMat(mat=Mat2(a, b, c, d), log_scale=scale)


def theta_samples(m: int, mode: str = "uniform", omega: float = 0.0,
                  theta0: float = 0.0) -> np.ndarray:
    """m equidistributed phases: a uniform grid or a rotation orbit."""
    if m < 1:
        raise ValueError("need at least one theta sample")
    if mode == "uniform":
        return theta0 + np.arange(m) / m
    if mode == "orbit":
        return frac(theta0 + np.arange(m) * omega)
    raise ValueError(f"unknown theta sampling mode {mode!r}")


def log_norms_at(f: SamplingFunction, omega: float, energy: float, k: int,
                 thetas) -> np.ndarray:
    """ln ||A_k(theta)|| at arbitrary phases, batched over thetas."""
    if k < 1:
        raise ValueError("k must be >= 1")
    grid = np.asarray(thetas, dtype=np.float64)
    m = grid.size
    a = np.ones(m)
    b = np.zeros(m)
    c = np.zeros(m)
    d = np.ones(m)
    logs = np.zeros(m)
    every = _kernels.renorm_interval(abs(energy) + f.sup_norm)
    since = 0
    for i in range(k):
        v = energy - f.eval(grid + i * omega)
        a, b, c, d = v * a - c, v * b - d, a, b
        since += 1
        if since >= every:
            since = 0
            s = np.abs(a) + np.abs(b) + np.abs(c) + np.abs(d)
            logs += np.log(s)
            inv = 1.0 / s
            a *= inv
            b *= inv
            c *= inv
            d *= inv
    return logs + np.log(_opnorm_vec(a, b, c, d))


def _log_norms_uniform(f, omega, energy, k, m, theta0=0.0):
    return log_norms_at(f, omega, energy, k, theta0 + np.arange(m) / m)


def log_norms_multi(f: SamplingFunction, omega: float, energies,
                    k: int, m_theta: int, mode: str = "orbit",
                    theta0: float = 0.0) -> np.ndarray:
    """ln ||A_k(theta)|| on the theta grid, one row per energy."""
    if k < 1:
        raise ValueError("k must be >= 1")
    e_arr = np.atleast_1d(np.asarray(energies, dtype=np.float64))
    if mode == "orbit":
        fvals = f.eval(theta0 + np.arange(m_theta + k - 1) * omega)
        vmax = float(np.abs(e_arr).max()) + f.sup_norm
        every = _kernels.renorm_interval(vmax)
        return _kernels.orbit_log_norms(e_arr, fvals, k, m_theta, every)
    if mode == "uniform":
        rows = [_log_norms_uniform(f, omega, float(e), k, m_theta, theta0)
                for e in e_arr]
        return np.vstack(rows)
    raise ValueError(f"unknown theta sampling mode {mode!r}")


def log_norms(f, omega, energy, k, m_theta, mode="orbit", theta0=0.0):
    return log_norms_multi(f, omega, [energy], k, m_theta, mode, theta0)[0]


def lyapunov_estimate(f: SamplingFunction, omega: float, energy: float,
                      k: int, m_theta: int, mode: str = "orbit",
                      theta0: float = 0.0) -> float:
    """(1/k) average of ln ||A_k|| over the theta samples.

    Over-estimates the true exponent up to quadrature error, by the
    infimum characterization of the subadditive limit.
    """
    ln = log_norms(f, omega, energy, k, m_theta, mode, theta0)
    return float(np.mean(ln)) / k


def uniform_upper_check(f: SamplingFunction, omega: float, energy: float,
                        k: int, m_theta: int, mode: str = "uniform",
                        theta0: float = 0.0) -> tuple[float, float]:
    """(sup, avg) of (1/k) ln ||A_k|| over the theta grid."""
    ln = log_norms(f, omega, energy, k, m_theta, mode, theta0)
    return float(ln.max()) / k, float(np.mean(ln)) / k


def level_set_measure(f: SamplingFunction, omega: float, energy: float,
                      t: float, k: int, m_theta: int, mode: str = "uniform",
                      theta0: float = 0.0) -> float:
    """Fraction of the theta grid with (1/k) ln ||A_k|| above t."""
    ln = log_norms(f, omega, energy, k, m_theta, mode, theta0)
    return float(np.mean(ln / k > t))


@dataclass
class LyapunovProfile:
    """Lyapunov estimates over an energy grid at a fixed depth."""

    energies: np.ndarray
    values: np.ndarray
    sup_over_theta: np.ndarray
    k: int
    theta_samples: int
    mode: str


def lyapunov_profile(f: SamplingFunction, omega: float, energies,
                     k: int, m_theta: int, mode: str = "orbit",
                     theta0: float = 0.0,
                     chunk: int = 64) -> LyapunovProfile:
    e_arr = np.asarray(energies, dtype=np.float64)
    values = np.empty(e_arr.size)
    sups = np.empty(e_arr.size)
    for lo in range(0, e_arr.size, chunk):
        hi = min(lo + chunk, e_arr.size)
        ln = log_norms_multi(f, omega, e_arr[lo:hi], k, m_theta, mode, theta0)
        values[lo:hi] = ln.mean(axis=1) / k
        sups[lo:hi] = ln.max(axis=1) / k
    return LyapunovProfile(energies=e_arr, values=values, sup_over_theta=sups,
                           k=k, theta_samples=m_theta, mode=mode)


@dataclass(frozen=True)
class EnergyShift:
    """Perturb the energy: E -> E + delta."""

    delta: float


@dataclass(frozen=True)
class FejerReplace:
    """Replace the sampling function by its degree-N Fejer mean."""

    degree: int


Perturbation = Union[EnergyShift, FejerReplace]


@dataclass
class PerturbationProfile:
    """sup-norm cocycle error versus the uniform growth bound, per depth."""

    ks: np.ndarray
    err: np.ndarray
    bound: np.ndarray
    log_err: np.ndarray
    log_bound: np.ndarray
    delta0: float
    epsilon: float


def perturbation_profile(f: SamplingFunction, omega: float, energy: float,
                         perturbation: Perturbation, k_max: int, m_theta: int,
                         epsilon: float = 0.1, mode: str = "uniform",
                         theta0: float = 0.0) -> PerturbationProfile:
    """Track sup_theta ||A_k - D_k|| for k = 1..k_max on the theta grid.

    The bound column is delta0 * exp(k (L_est(k) + epsilon)) where L_est(k)
    is the depth-k uniform upper estimate sup_theta (1/k) ln ||A_k|| (the
    quantity that converges to the exponent from above uniformly; a mean-
    based estimate provably fails at small k, where the error carries a
    k-prefactor that epsilon alone does not absorb) and delta0 is the
    largest one-step difference seen on the sampled sites.  Both cocycles
    share one per-theta scale so their difference is formed exactly.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    grid = theta_samples(m_theta, mode, omega, theta0)
    if isinstance(perturbation, EnergyShift):
        f_pert = None
        e_pert = energy + perturbation.delta
    elif isinstance(perturbation, FejerReplace):
        f_pert = fejer_smooth(f, perturbation.degree)
        e_pert = energy
    else:
        raise TypeError(f"unsupported perturbation {perturbation!r}")

    m = m_theta
    a11, a12, a21, a22 = np.ones(m), np.zeros(m), np.zeros(m), np.ones(m)
    d11, d12, d21, d22 = np.ones(m), np.zeros(m), np.zeros(m), np.ones(m)
    logs = np.zeros(m)
    vmax = abs(energy) + f.sup_norm + (abs(e_pert - energy))
    every = max(1, _kernels.renorm_interval(vmax) // 2)
    since = 0
    delta0 = 0.0
    log_err = np.empty(k_max)
    lyap = np.empty(k_max)
    for i in range(k_max):
        site = grid + i * omega
        va = energy - f.eval(site)
        if f_pert is None:
            vd = va + (e_pert - energy)
        else:
            vd = energy - f_pert.eval(site)
        delta0 = max(delta0, float(np.abs(va - vd).max()))
        a11, a12, a21, a22 = va * a11 - a21, va * a12 - a22, a11, a12
        d11, d12, d21, d22 = vd * d11 - d21, vd * d12 - d22, d11, d12
        diff = _opnorm_vec(a11 - d11, a12 - d12, a21 - d21, a22 - d22)
        with np.errstate(divide="ignore"):
            log_err[i] = float(np.max(logs + np.log(diff)))
        lyap[i] = float(np.max(logs + np.log(_opnorm_vec(a11, a12, a21, a22))))
        lyap[i] /= i + 1
        since += 1
        if since >= every:
            since = 0
            s = (np.abs(a11) + np.abs(a12) + np.abs(a21) + np.abs(a22)
                 + np.abs(d11) + np.abs(d12) + np.abs(d21) + np.abs(d22))
            logs += np.log(s)
            inv = 1.0 / s
            a11 *= inv; a12 *= inv; a21 *= inv; a22 *= inv
            d11 *= inv; d12 *= inv; d21 *= inv; d22 *= inv
    ks = np.arange(1, k_max + 1)
    log_bound = (math.log(delta0) if delta0 > 0 else -math.inf) \
        + ks * (lyap + epsilon)
    with np.errstate(over="ignore"):
        err = np.exp(log_err)
        bound = np.exp(log_bound)
    return PerturbationProfile(ks=ks, err=err, bound=bound, log_err=log_err,
                               log_bound=log_bound, delta0=delta0,
                               epsilon=epsilon)


def perturbation_error(f: SamplingFunction, omega: float, energy: float,
                       perturbation: Perturbation, k: int, m_theta: int,
                       epsilon: float = 0.1, mode: str = "uniform",
                       theta0: float = 0.0) -> tuple[float, float]:
    """(measured sup error, growth bound) at depth k; see perturbation_profile."""
    if isinstance(perturbation, EnergyShift) and perturbation.delta == 0.0:
        return 0.0, 0.0
    prof = perturbation_profile(f, omega, energy, perturbation, k, m_theta,
                                epsilon, mode, theta0)
    return float(prof.err[-1]), float(prof.bound[-1])


def det_truncated(f: SamplingFunction, omega: float, theta: float,
                  energy: float, k: int) -> float:
    """det(E*I - h restricted to sites 0..k-1) by the three-term recurrence.

    Raw double arithmetic; intended for moderate k (the determinant grows
    exponentially with k).
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    p_prev, p = 0.0, 1.0  # P_{-1}, P_0
    for n in range(1, k + 1):
        p, p_prev = (energy - f.eval(theta + (n - 1) * omega)) * p - p_prev, p
    return p


def restricted_matrix(f: SamplingFunction, omega: float, theta: float,
                      u: int, v: int) -> np.ndarray:
    """Dense tridiagonal restriction of the operator to sites u..v."""
    if v < u:
        raise ValueError("interval must satisfy u <= v")
    n = v - u + 1
    h = np.zeros((n, n))
    sites = theta + (u + np.arange(n)) * omega
    np.fill_diagonal(h, f.eval(sites))
    idx = np.arange(n - 1)
    h[idx, idx + 1] = 1.0
    h[idx + 1, idx] = 1.0
    return h


COND_LIMIT = 1e12


def green_restricted(f: SamplingFunction, omega: float, theta: float,
                     energy: float, interval: tuple[int, int],
                     i: int, j: int) -> float:
    """Entry (i, j) of (h_[u,v] - E)^(-1), with a conditioning guard."""
    u, v = interval
    if not (u <= i <= v and u <= j <= v):
        raise ValueError("sites must lie inside the interval")
    m = restricted_matrix(f, omega, theta, u, v)
    m[np.diag_indices_from(m)] -= energy
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise NearSingularRestriction(
            f"restriction to [{u}, {v}] is near-singular at E={energy}"
            f" (cond ~ {cond:.2e})")
    rhs = np.zeros(v - u + 1)
    rhs[j - u] = 1.0
    return float(np.linalg.solve(m, rhs)[i - u])


def cocycle_det_identity_check(f: SamplingFunction, omega: float, theta: float,
                               energy: float, k: int) -> float:
    """Residual between the k-step product and its determinant expression.

    Compares A_k(theta) against [[P_k(th), -P_{k-1}(th+w)], [P_{k-1}(th),
    -P_{k-2}(th+w)]], two independent computations of the same matrix.
    Returns max entry difference relative to the matrix magnitude.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    prod = iterate(f, omega, energy, theta, k)
    raw = prod.to_array()
    claimed = np.array([
        [det_truncated(f, omega, theta, energy, k),
         -det_truncated(f, omega, theta + omega, energy, k - 1)],
        [det_truncated(f, omega, theta, energy, k - 1),
         -det_truncated(f, omega, theta + omega, energy, k - 2)],
    ])
    scale = max(1.0, float(np.abs(raw).max()))
    return float(np.abs(raw - claimed).max()) / scale
