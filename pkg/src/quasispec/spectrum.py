"""Band spectra at rational frequencies and their convergence diagnostics.

For frequency p/q the union spectrum over phases is the energy set where
the period-q transfer-matrix trace (the discriminant) has minimum modulus
at most 2 over theta.  The scan walks an energy grid, takes the minimum of
log|trace| over a theta grid that is a multiple of q (so the rotation acts
by an integer index shift), and sharpens each band edge by bisection.
Positive-Lyapunov regions come from thresholding a Lyapunov profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import MutableMapping, Optional, Sequence

import numpy as np

from . import _kernels, intervals
from .cocycle import LyapunovProfile, energy_window, iterate, lyapunov_profile
from .intervals import IntervalSet
from .rotation import Approximant, ContinuedFraction, approximants
from .sampling import SamplingFunction

LN2 = math.log(2.0)
EDGE_TOL = 1e-10
ROUGH_BASE_GRID = 4096
REFINE_MARGIN = 0.35  # log-units above ln 2 that trigger local theta refinement
REFINE_SUBDIV = 16


class EmptySpectrumError(RuntimeError):
    """Scan found no spectrum at all; the configuration is broken."""


@dataclass
class SpectrumRecord:
    """Computed union spectrum of a rational-frequency operator.

    The band set has at most q components for an adequately resolved theta
    grid; undersampling rough potentials can split bands, which the local
    refinement pass counteracts (see the refined flag).
    """

    frequency: Approximant
    bands: IntervalSet
    e_res: float
    theta_grid: int
    refined: bool


@dataclass
class LPlusRecord:
    """Energies whose Lyapunov estimate clears the threshold chi."""

    chi: float
    region: IntervalSet
    profile: LyapunovProfile


def default_theta_grid(f: SamplingFunction, q: int) -> int:
    """Theta-grid size: resolves the degree-q*deg discriminant exactly for
    trig polynomials, else a rough-potential default rounded to a multiple
    of q so orbit shifts stay on the grid."""
    deg = f.fourier_degree()
    if deg is not None:
        return 8 * q * (1 + deg)
    return q * math.ceil(ROUGH_BASE_GRID / q)


def discriminant(f: SamplingFunction, pq: Approximant, energy: float,
                 theta: float) -> float:
    """Trace of the q-step transfer product at frequency p/q."""
    lm = iterate(f, pq.p / pq.q, energy, theta, pq.q)
    return math.exp(lm.log_scale) * (lm.mat.m11 + lm.mat.m22)


def _disc_signed_at(f, omega, energy, q, thetas):
    """(sign, log|.|) of the discriminant at arbitrary phases."""
    t = np.asarray(thetas, dtype=np.float64)
    a = np.ones(t.size)
    b = np.zeros(t.size)
    c = np.zeros(t.size)
    d = np.ones(t.size)
    logs = np.zeros(t.size)
    every = _kernels.renorm_interval(abs(energy) + f.sup_norm)
    since = 0
    for j in range(q):
        v = energy - f.eval(t + j * omega)
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
    tr = a + d
    with np.errstate(divide="ignore"):
        return np.sign(tr), logs + np.log(np.abs(tr))


def _disc_log_at(f, omega, energy, q, thetas):
    """log |discriminant| at arbitrary phases (exact f evaluations)."""
    _, logmag = _disc_signed_at(f, omega, energy, q, thetas)
    return logmag


def _le_two(sign, logmag):
    """value = sign*exp(logmag) <= 2, elementwise on (sign, log) pairs."""
    return (sign < 0.5) | (logmag <= LN2)


def _ge_minus_two(sign, logmag):
    """value >= -2, elementwise on (sign, log) pairs."""
    return (sign > -0.5) | (logmag <= LN2)


class _DiscScanner:
    """Shared state for scanning one (f, p/q) pair over many energies.

    Membership test: E is in the union spectrum iff the trace range over
    theta meets [-2, 2], i.e. min_theta tr <= 2 and max_theta tr >= -2
    (intermediate value theorem on the circle).  This is equivalent to
    min_theta |tr| <= 2 but numerically robust: at positive exponent the
    sub-2 dips of |tr| are exponentially narrow in theta while the signed
    extremes are smooth grid-limits.  Grid membership never produces false
    positives, only misses marginal edge slivers.
    """

    def __init__(self, f: SamplingFunction, pq: Approximant,
                 theta_grid: int = 0, refine: Optional[bool] = None):
        q = pq.q
        requested = theta_grid if theta_grid else default_theta_grid(f, q)
        self.ntheta = q * math.ceil(requested / q)
        self.rough = f.fourier_degree() is None
        if refine is None:
            refine = self.rough
        self.refine = refine
        self.f = f
        self.pq = pq
        self.omega = pq.p / q
        # midpoint offset for rough potentials dodges exact dyadic aliasing
        offset = 0.5 if self.rough else 0.0
        self.thetas = (np.arange(self.ntheta) + offset) / self.ntheta
        fbuf = f.eval(self.thetas)
        self.fbuf2 = np.concatenate([fbuf, fbuf])
        step = (pq.p * (self.ntheta // q)) % self.ntheta
        self.offs = (np.arange(q, dtype=np.int64) * step) % self.ntheta
        lo, hi = energy_window(f)
        self.window = (lo, hi)
        self.renorm = _kernels.renorm_interval(max(abs(lo), abs(hi)) + f.sup_norm)

    def trace_ranges(self, energies):
        """Per energy: (sign, log) of the trace extremes over the grid and
        the extremizing grid indices."""
        e_arr = np.ascontiguousarray(np.atleast_1d(energies), dtype=np.float64)
        return _kernels.disc_scan(e_arr, self.fbuf2, self.ntheta, self.offs,
                                  self.renorm)

    def _polish(self, energy: float, arg: int):
        """(sign, log) trace values on a refined grid around theta[arg]."""
        h = 1.0 / self.ntheta
        center = self.thetas[arg]
        steps = np.arange(1, REFINE_SUBDIV) / REFINE_SUBDIV * h
        cand = np.concatenate([center - steps, center + steps])
        return _disc_signed_at(self.f, self.omega, energy, self.pq.q, cand)

    def membership(self, energies) -> np.ndarray:
        mn_s, mn_l, mx_s, mx_l, amn, amx = self.trace_ranges(energies)
        e_arr = np.atleast_1d(np.asarray(energies, dtype=np.float64))
        lo_ok = _le_two(mn_s, mn_l)
        hi_ok = _ge_minus_two(mx_s, mx_l)
        if self.refine:
            member = lo_ok & hi_ok
            margin = LN2 + REFINE_MARGIN
            low_miss = (~member) & (~lo_ok) & (mn_l <= margin)
            high_miss = (~member) & (~hi_ok) & (mx_l <= margin)
            for i in np.nonzero(low_miss | high_miss)[0]:
                if low_miss[i]:
                    sgn, lg = self._polish(float(e_arr[i]), int(amn[i]))
                    lo_ok[i] |= bool(np.any(_le_two(sgn, lg)))
                if high_miss[i]:
                    sgn, lg = self._polish(float(e_arr[i]), int(amx[i]))
                    hi_ok[i] |= bool(np.any(_ge_minus_two(sgn, lg)))
        return lo_ok & hi_ok

    def is_member(self, energy: float) -> bool:
        return bool(self.membership(np.array([energy]))[0])


def _bisect_edge(scanner: _DiscScanner, e_out: float, e_in: float) -> float:
    """Band edge between an outside and an inside energy, to EDGE_TOL."""
    for _ in range(200):
        if abs(e_in - e_out) <= EDGE_TOL:
            break
        mid = 0.5 * (e_out + e_in)
        if scanner.is_member(mid):
            e_in = mid
        else:
            e_out = mid
    return 0.5 * (e_out + e_in)


def spectrum_rational(f: SamplingFunction, pq: Approximant, e_res: float,
                      theta_grid: int = 0,
                      refine: Optional[bool] = None) -> SpectrumRecord:
    """Union spectrum of the frequency-p/q operator as an interval set.

    Scans the spectral window on an e_res grid, marks energies whose trace
    range over theta meets [-2, 2] (equivalently, min |discriminant| at
    most 2), and bisects each band edge to EDGE_TOL.
    """
    if e_res <= 0:
        raise ValueError("e_res must be positive")
    scanner = _DiscScanner(f, pq, theta_grid, refine)
    lo, hi = scanner.window
    n_res = int(round((hi - lo) / e_res))
    grid = lo + np.arange(-1, n_res + 2) * e_res
    in_band = scanner.membership(grid)
    if not in_band.any():
        raise EmptySpectrumError(
            f"no spectrum found for {pq.p}/{pq.q} at e_res={e_res}")
    bands = []
    idx = np.nonzero(in_band)[0]
    run_start = idx[0]
    prev = idx[0]
    runs = []
    for i in idx[1:]:
        if i == prev + 1:
            prev = i
            continue
        runs.append((run_start, prev))
        run_start = prev = i
    runs.append((run_start, prev))
    for i0, i1 in runs:
        left = float(grid[i0])
        if i0 > 0:
            left = _bisect_edge(scanner, float(grid[i0 - 1]), left)
        right = float(grid[i1])
        if i1 < grid.size - 1:
            right = _bisect_edge(scanner, float(grid[i1 + 1]), right)
        bands.append((left, right))
    record = SpectrumRecord(
        frequency=pq,
        bands=intervals.normalize(bands),
        e_res=e_res,
        theta_grid=scanner.ntheta,
        refined=scanner.refine,
    )
    return record


def l_plus_set(f: SamplingFunction, omega_cf: ContinuedFraction, chi: float,
               e_res: float, k: int, m_theta: int,
               mode: str = "orbit") -> LPlusRecord:
    """Threshold a Lyapunov profile at chi, fattened by one grid cell."""
    if chi <= 0:
        raise ValueError("chi must be positive")
    lo, hi = energy_window(f)
    n_res = max(1, int(round((hi - lo) / e_res)))
    grid = lo + np.arange(n_res + 1) * e_res
    profile = lyapunov_profile(f, omega_cf.value, grid, k=k, m_theta=m_theta,
                               mode=mode)
    hot = profile.values > chi
    region = intervals.normalize(
        [(float(e) - e_res, float(e) + e_res) for e in grid[hot]],
        merge_tol=0.0)
    return LPlusRecord(chi=chi, region=region, profile=profile)


def _ladder(cf: ContinuedFraction, q_min: int, q_max: int) -> list[Approximant]:
    apps = [a for a in approximants(cf) if q_min <= a.q <= q_max]
    if not apps:
        raise ValueError(f"no approximants with q in [{q_min}, {q_max}]")
    return apps


def spectra_for(f: SamplingFunction, apps: Sequence[Approximant],
                e_res: float, theta_grid: int = 0,
                memo: Optional[MutableMapping] = None) -> list[SpectrumRecord]:
    """Spectra for a list of approximants, memoized across calls."""
    out = []
    for a in apps:
        key = (a.p, a.q, e_res, theta_grid)
        if memo is not None and key in memo:
            out.append(memo[key])
            continue
        rec = spectrum_rational(f, a, e_res, theta_grid)
        if memo is not None:
            memo[key] = rec
        out.append(rec)
    return out


@dataclass
class ConvergenceRow:
    index: int
    p: int
    q: int
    measure: float
    measure_lplus: float
    dist_next: float
    dist_next_lplus: float
    gap_deepest: float
    gap_deepest_lplus: float


def convergence_table(f: SamplingFunction, omega_cf: ContinuedFraction,
                      q_min: int, q_max: int, chi: float, e_res: float,
                      theta_grid: int = 0,
                      lplus: Optional[LPlusRecord] = None,
                      lyap_e_res: float = 0.0, lyap_k: int = 4000,
                      lyap_m_theta: int = 4000,
                      memo: Optional[MutableMapping] = None
                      ) -> list[ConvergenceRow]:
    """Per-approximant measures and distances toward the deepest spectrum.

    Reports both the plain union spectrum and its intersection with the
    positive-Lyapunov region, since the limit statements concern the
    latter while the raw measures stay meaningful at zero exponent.
    """
    apps = _ladder(omega_cf, q_min, q_max)
    if len(apps) < 2:
        raise ValueError("need at least two approximants")
    if lplus is None:
        lo, hi = energy_window(f)
        if lyap_e_res <= 0:
            lyap_e_res = (hi - lo) / 256
        lplus = l_plus_set(f, omega_cf, chi, lyap_e_res, lyap_k, lyap_m_theta)
    records = spectra_for(f, apps, e_res, theta_grid, memo)
    clipped = [intervals.intersection(r.bands, lplus.region) for r in records]
    deepest, deepest_lp = records[-1].bands, clipped[-1]
    rows = []
    for i, (a, rec, clip) in enumerate(zip(apps, records, clipped)):
        if i + 1 < len(records):
            dist_next = intervals.one_sided(rec.bands, records[i + 1].bands)
            if clip.is_empty:
                dist_next_lp = math.nan
            else:
                dist_next_lp = intervals.one_sided(clip, records[i + 1].bands)
        else:
            dist_next = math.nan
            dist_next_lp = math.nan
        rows.append(ConvergenceRow(
            index=a.index, p=a.p, q=a.q,
            measure=rec.bands.measure,
            measure_lplus=clip.measure,
            dist_next=dist_next,
            dist_next_lplus=dist_next_lp,
            gap_deepest=intervals.setwise_gap(rec.bands, deepest),
            gap_deepest_lplus=intervals.setwise_gap(clip, deepest_lp),
        ))
    return rows


@dataclass
class HolderPair:
    index: int
    q_a: int
    q_b: int
    domega: float
    dist: float


@dataclass
class HolderFit:
    beta_hat: float
    pairs: list[HolderPair]
    use_l_plus: bool
    chi: float


def holder_fit(f: SamplingFunction, omega_cf: ContinuedFraction,
               q_min: int, q_max: int, use_l_plus: bool = False,
               chi: float = 0.5, e_res: float = 1e-3, theta_grid: int = 0,
               lplus: Optional[LPlusRecord] = None,
               lyap_e_res: float = 0.0, lyap_k: int = 4000,
               lyap_m_theta: int = 4000,
               memo: Optional[MutableMapping] = None) -> HolderFit:
    """Empirical Holder exponent of spectrum motion in the frequency.

    For consecutive approximant pairs, regress log one-sided distance on
    log frequency gap; pairs with zero distance are dropped (their log is
    undefined) and at least three surviving pairs are required.
    """
    apps = _ladder(omega_cf, q_min, q_max)
    if len(apps) < 4:
        raise ValueError("need at least four approximants to form three pairs")
    if use_l_plus and lplus is None:
        lo, hi = energy_window(f)
        if lyap_e_res <= 0:
            lyap_e_res = (hi - lo) / 256
        lplus = l_plus_set(f, omega_cf, chi, lyap_e_res, lyap_k, lyap_m_theta)
    records = spectra_for(f, apps, e_res, theta_grid, memo)
    pairs = []
    for i in range(len(apps) - 1):
        a, b = apps[i], apps[i + 1]
        source = records[i].bands
        if use_l_plus:
            source = intervals.intersection(source, lplus.region)
            if source.is_empty:
                continue
        dist = intervals.one_sided(source, records[i + 1].bands)
        domega = abs(a.p / a.q - b.p / b.q)
        if dist <= 0.0:
            continue
        pairs.append(HolderPair(index=a.index, q_a=a.q, q_b=b.q,
                                domega=domega, dist=dist))
    if len(pairs) < 3:
        raise ValueError(
            f"only {len(pairs)} usable pairs after dropping zero distances")
    x = np.log([p.domega for p in pairs])
    y = np.log([p.dist for p in pairs])
    beta_hat = float(np.polyfit(x, y, 1)[0])
    return HolderFit(beta_hat=beta_hat, pairs=pairs, use_l_plus=use_l_plus,
                     chi=chi)
