import math

import numpy as np
import pytest

from quasispec import intervals as iv
from quasispec import spectrum as sp
from quasispec.rotation import Approximant, approximants, golden_mean
from quasispec.sampling import Cosine, TrigPolynomial, WeierstrassHolder, ZERO

GOLDEN_CF = golden_mean()
ONE_OVER_1 = Approximant(p=0, q=1, index=1)


def golden_app(q):
    return next(a for a in approximants(GOLDEN_CF) if a.q == q)


def test_discriminant_free_q1_is_energy():
    for e in (-1.5, 0.0, 2.3):
        assert sp.discriminant(ZERO, ONE_OVER_1, e, 0.37) == pytest.approx(e)


def test_discriminant_cosine_q2_formula():
    # symbolic product: trace = E^2 - 4 lam^2 cos^2(2 pi theta) - 2
    lam = 1.3
    f = Cosine(lam)
    half = Approximant(p=1, q=2, index=2)
    rng = np.random.default_rng(12)
    for _ in range(20):
        e = rng.uniform(-5, 5)
        th = rng.uniform(0, 1)
        expect = e * e - 4 * lam * lam * math.cos(2 * math.pi * th) ** 2 - 2
        assert sp.discriminant(f, half, e, th) == pytest.approx(expect, rel=1e-9, abs=1e-9)


def test_discriminant_invariant_under_orbit_shift():
    f = Cosine(2.0)
    pq = Approximant(p=2, q=5, index=3)
    rng = np.random.default_rng(13)
    for _ in range(10):
        e = rng.uniform(-6, 6)
        th = rng.uniform(0, 1)
        a = sp.discriminant(f, pq, e, th)
        b = sp.discriminant(f, pq, e, th + 1.0 / 5.0)
        assert a == pytest.approx(b, rel=1e-9, abs=1e-9)


def test_spectrum_q1_cosine_band():
    lam = 2.0
    rec = sp.spectrum_rational(Cosine(lam), ONE_OVER_1, e_res=1e-3)
    assert len(rec.bands) == 1
    lo, hi = rec.bands.intervals[0]
    assert lo == pytest.approx(-2 - 2 * lam, abs=1e-8)
    assert hi == pytest.approx(2 + 2 * lam, abs=1e-8)
    assert rec.bands.measure == pytest.approx(4 + 4 * lam, abs=1e-7)


def test_spectrum_q2_cosine_band():
    lam = 2.0
    rec = sp.spectrum_rational(Cosine(lam), Approximant(1, 2, 2), e_res=1e-3)
    expect = 2 * math.sqrt(1 + lam * lam)
    assert rec.bands.intervals[0][0] == pytest.approx(-expect, abs=1e-8)
    assert rec.bands.intervals[-1][1] == pytest.approx(expect, abs=1e-8)
    assert rec.bands.measure == pytest.approx(2 * expect, abs=1e-7)


def test_spectrum_q2_critical_measure():
    rec = sp.spectrum_rational(Cosine(1.0), Approximant(1, 2, 2), e_res=1e-3)
    assert rec.bands.measure == pytest.approx(4 * math.sqrt(2.0), abs=1e-6)


def _floquet_oracle(f, pq, n_theta=40, n_phase=33):
    """Brute force: eigenvalues of the q x q periodic block, Bloch phase
    swept over a grid, unioned over theta.

    Band branch j is a continuous function on the (theta, phase) torus, so
    band j of the union spectrum is the full range of that branch; taking
    per-theta ranges instead would undercount whenever individual bands
    are thin but sweep widely with theta."""
    q = pq.q
    omega = pq.p / q
    lo = np.full(q, np.inf)
    hi = np.full(q, -np.inf)
    for th in np.arange(n_theta) / n_theta:
        diags = f.eval(th + np.arange(q) * omega)
        for phase in np.linspace(0.0, math.pi, n_phase):
            h = np.zeros((q, q), dtype=complex)
            np.fill_diagonal(h, diags)
            if q == 1:
                h[0, 0] += 2.0 * math.cos(phase)
            else:
                idx = np.arange(q - 1)
                h[idx, idx + 1] = 1.0
                h[idx + 1, idx] = 1.0
                h[0, q - 1] += np.exp(-1j * phase)
                h[q - 1, 0] += np.exp(1j * phase)
            eigs = np.linalg.eigvalsh(h)
            lo = np.minimum(lo, eigs)
            hi = np.maximum(hi, eigs)
    return iv.normalize(list(zip(lo, hi)), merge_tol=1e-9)


@pytest.mark.parametrize("q,lam", [(2, 2.0), (5, 2.0), (8, 1.0)])
def test_spectrum_matches_floquet_oracle(q, lam):
    f = Cosine(lam)
    pq = golden_app(q)
    e_res = 1e-3
    rec = sp.spectrum_rational(f, pq, e_res=e_res)
    oracle = _floquet_oracle(f, pq, n_theta=64, n_phase=65)
    assert rec.bands.measure == pytest.approx(
        oracle.measure, abs=2 * e_res * max(len(rec.bands), 1) + 2e-2)
    # scan bands must sit inside a slightly fattened oracle set
    assert iv.one_sided(rec.bands, iv.fatten(oracle, 2 * e_res)) < 2 * e_res


def test_band_count_at_most_q():
    f = Cosine(1.0)
    for q in (2, 3, 5, 8, 13):
        rec = sp.spectrum_rational(f, golden_app(q), e_res=1e-3)
        assert len(rec.bands) <= q


def test_theta_refinement_grows_bands():
    f = Cosine(3.0)
    pq = golden_app(8)
    coarse = sp.spectrum_rational(f, pq, e_res=1e-3, theta_grid=8 * 8)
    fine = sp.spectrum_rational(f, pq, e_res=1e-3, theta_grid=32 * 8)
    assert fine.bands.measure >= coarse.bands.measure - 1e-9
    assert iv.one_sided(coarse.bands, fine.bands) < 1e-6


def test_measure_lower_bound_sanity():
    lam = 2.0
    for q in (3, 5, 8):
        rec = sp.spectrum_rational(Cosine(lam), golden_app(q), e_res=1e-3)
        assert rec.bands.measure >= 4 * abs(1 - lam) - 1e-6


def test_rough_potential_spectrum_runs_with_refinement():
    f = WeierstrassHolder(gamma=0.5, depth=12)
    rec = sp.spectrum_rational(f, golden_app(5), e_res=5e-3)
    assert rec.refined
    assert not rec.bands.is_empty
    assert len(rec.bands) <= 5
    lo, hi = rec.bands.hull
    assert lo >= -2 - f.sup_norm - 1e-6 and hi <= 2 + f.sup_norm + 1e-6


def test_empty_spectrum_raises(monkeypatch):
    def all_out(e_vals, fbuf2, ntheta, offs, renorm):
        # every trace pinned at +10: range never meets [-2, 2]
        n = np.atleast_1d(e_vals).size
        ones = np.ones(n)
        logs = np.full(n, math.log(10.0))
        zeros = np.zeros(n, dtype=np.int64)
        return ones, logs, ones, logs, zeros, zeros

    monkeypatch.setattr(sp._kernels, "disc_scan", all_out)
    with pytest.raises(sp.EmptySpectrumError):
        sp.spectrum_rational(Cosine(1.0), ONE_OVER_1, e_res=0.5)


def test_l_plus_free_potential_empty():
    rec = sp.l_plus_set(ZERO, GOLDEN_CF, chi=0.5, e_res=0.25, k=500,
                        m_theta=200)
    assert rec.region.is_empty


def test_l_plus_strong_coupling_covers_window():
    f = Cosine(3.0)
    rec = sp.l_plus_set(f, GOLDEN_CF, chi=0.5, e_res=0.25, k=1500, m_theta=800)
    lo, hi = rec.region.hull
    wlo, whi = -8.0, 8.0
    assert lo <= wlo and hi >= whi
    assert len(rec.region) == 1


def test_l_plus_monotone_in_chi():
    f = Cosine(2.0)
    small = sp.l_plus_set(f, GOLDEN_CF, chi=0.3, e_res=0.25, k=800, m_theta=400)
    large = sp.l_plus_set(f, GOLDEN_CF, chi=0.6, e_res=0.25, k=800, m_theta=400)
    if not large.region.is_empty:
        assert iv.one_sided(large.region, small.region) == 0.0


def test_convergence_table_small_golden():
    f = Cosine(2.0)
    memo = {}
    rows = sp.convergence_table(f, GOLDEN_CF, q_min=1, q_max=8, chi=0.5,
                                e_res=1e-3, lyap_k=800, lyap_m_theta=400,
                                memo=memo)
    assert [r.q for r in rows] == [1, 2, 3, 5, 8]
    assert rows[0].measure == pytest.approx(12.0, abs=1e-6)
    assert rows[1].measure == pytest.approx(4 * math.sqrt(5.0), abs=1e-6)
    meas = [r.measure for r in rows]
    assert all(a >= b - 1e-9 for a, b in zip(meas, meas[1:]))
    # strong coupling: the exponent clears chi, so the clipped and raw
    # measures agree
    assert rows[0].measure_lplus == pytest.approx(rows[0].measure, abs=1e-9)
    assert math.isnan(rows[-1].dist_next)
    assert rows[-1].gap_deepest == 0.0
    assert len(memo) == 5


def test_convergence_table_requires_two_approximants():
    with pytest.raises(ValueError):
        sp.convergence_table(Cosine(2.0), GOLDEN_CF, q_min=1, q_max=1,
                             chi=0.5, e_res=1e-2)


def test_holder_fit_identical_spectra_errors():
    # constant potential: every rational spectrum is [c-2, c+2], so all
    # pair distances vanish and the fit must refuse
    f = TrigPolynomial(coeffs=(0.7 + 0j,))
    with pytest.raises(ValueError):
        sp.holder_fit(f, GOLDEN_CF, q_min=1, q_max=13, e_res=1e-3)


def test_holder_fit_smoke_cosine():
    f = Cosine(3.0)
    memo = {}
    fit = sp.holder_fit(f, GOLDEN_CF, q_min=2, q_max=21, e_res=1e-3,
                        memo=memo)
    assert len(fit.pairs) >= 3
    assert math.isfinite(fit.beta_hat)
    assert fit.beta_hat > 0.0


def test_default_theta_grid_rules():
    assert sp.default_theta_grid(Cosine(1.0), 5) == 8 * 5 * 2
    n = sp.default_theta_grid(WeierstrassHolder(0.5, 24), 7)
    assert n % 7 == 0 and n >= 4096
