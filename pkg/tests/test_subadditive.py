import math

import numpy as np
import pytest

from quasispec.cocycle import lyapunov_estimate
from quasispec.rotation import golden_mean
from quasispec.sampling import Cosine
from quasispec.subadditive import (
    GammaDistance,
    SubadditiveCocycle,
    additive_cocycle,
    furman_gap,
    gamma_metric,
    lambda_best,
    lambda_estimate,
    schrodinger_cocycle,
    shifted_cocycle,
    subadditivity_defect,
    uniform_usc_probe,
)

GOLDEN = golden_mean().value


def linear_cocycle(slope, omega):
    # f_n(x) = n * slope, through the generic constructor
    return additive_cocycle(slope, omega)


def test_gamma_metric_zero_on_diagonal():
    f = additive_cocycle(1.3, GOLDEN)
    assert gamma_metric(f, f, 30, 64).value == 0.0


def test_gamma_metric_below_one():
    f = additive_cocycle(0.0, GOLDEN)
    g = additive_cocycle(1e9, GOLDEN)
    assert gamma_metric(f, g, 50, 16).value < 1.0


def test_gamma_metric_partial_sum_oracle():
    # oracle: direct partial sum of 2^-n * n/(1+n); the full series
    # telescopes to 2 - 2 ln 2, an independent closed-form check
    expected = sum(2.0 ** (-n) * n / (1.0 + n) for n in range(1, 41))
    assert expected == pytest.approx(2.0 - 2.0 * math.log(2.0), abs=1e-11)
    f = additive_cocycle(0.0, GOLDEN)
    g = additive_cocycle(1.0, GOLDEN)
    got = gamma_metric(f, g, 40, 32)
    assert got.value == pytest.approx(expected, rel=1e-12)
    assert got.tail_bound == 2.0 ** (-40)


def test_gamma_metric_symmetry_and_triangle():
    f = additive_cocycle(0.0, GOLDEN)
    g = schrodinger_cocycle(Cosine(1.0), GOLDEN, 0.5)
    h = additive_cocycle(0.7, GOLDEN)
    n_max, m = 12, 64
    dfg = gamma_metric(f, g, n_max, m).value
    assert dfg == pytest.approx(gamma_metric(g, f, n_max, m).value)
    dgh = gamma_metric(g, h, n_max, m).value
    dfh = gamma_metric(f, h, n_max, m).value
    assert dfh <= dfg + dgh + 1e-12


def test_lambda_estimate_trivials():
    assert lambda_estimate(additive_cocycle(0.0, GOLDEN), 17, 32) == 0.0
    for n in (1, 5, 40):
        assert lambda_estimate(additive_cocycle(2.5, GOLDEN), n, 32) == \
            pytest.approx(2.5)


def test_lambda_matches_cocycle_interface():
    f = Cosine(3.0)
    energy = 0.5
    c = schrodinger_cocycle(f, GOLDEN, energy)
    n, m = 120, 256
    via_subadditive = lambda_estimate(c, n, m)
    via_cocycle = lyapunov_estimate(f, GOLDEN, energy, n, m, mode="uniform")
    assert via_subadditive == pytest.approx(via_cocycle, abs=1e-9)


def test_lambda_doubling_consistency():
    c = schrodinger_cocycle(Cosine(3.0), GOLDEN, 0.2)
    n, m = 150, 200
    est_n = lambda_estimate(c, n, m)
    est_2n = lambda_estimate(c, 2 * n, m)
    assert 2 * n * est_2n <= 2 * n * est_n + 0.5


def test_subadditivity_defect_schrodinger():
    c = schrodinger_cocycle(Cosine(2.0), GOLDEN, 1.0)
    rng = np.random.default_rng(11)
    for _ in range(10):
        n, m = int(rng.integers(1, 30)), int(rng.integers(1, 30))
        xs = rng.uniform(0, 1, size=8)
        assert subadditivity_defect(c, n, m, xs) <= 1e-9


def test_furman_gap_trivials():
    assert furman_gap(additive_cocycle(0.0, GOLDEN), 25, 64) == 0.0
    assert furman_gap(additive_cocycle(3.0, GOLDEN), 25, 64) == \
        pytest.approx(0.0, abs=1e-12)


def test_furman_gap_nonnegative():
    c = schrodinger_cocycle(Cosine(3.0), GOLDEN, 0.5)
    gap = furman_gap(c, 200, 128)
    assert gap >= -1e-12


def test_furman_gap_schrodinger_converges():
    # coupling-3 cosine at an in-window energy: the gap closes by n = 3000
    c = schrodinger_cocycle(Cosine(3.0), GOLDEN, 0.5)
    gap = furman_gap(c, 3000, 2000)
    assert gap < 0.05


def test_usc_probe_self_equals_furman_gap():
    c = schrodinger_cocycle(Cosine(2.0), GOLDEN, 0.3)
    n, m = 150, 128
    rows = uniform_usc_probe(c, [c], n, m)
    assert rows[0].sup_gap == pytest.approx(furman_gap(c, n, m), abs=1e-12)
    assert rows[0].distance.value == 0.0


def test_usc_probe_constant_shift():
    c = additive_cocycle(1.0, GOLDEN)
    shift = -0.4  # negative keeps subadditivity
    g = shifted_cocycle(c, shift)
    n, m = 50, 64
    rows = uniform_usc_probe(c, [g], n, m)
    assert rows[0].sup_gap == pytest.approx(shift / n, abs=1e-12)


def test_usc_probe_energy_perturbation():
    f = Cosine(3.0)
    base = schrodinger_cocycle(f, GOLDEN, 0.5)
    near = schrodinger_cocycle(f, GOLDEN, 0.5 + 1e-6)
    rows = uniform_usc_probe(base, [near], 3000, 1000,
                             metric_n_max=12, metric_m_theta=128)
    assert rows[0].sup_gap < 0.05
    assert rows[0].distance.value < 0.01


def test_generator_shape_validation():
    bad = SubadditiveCocycle(generator=lambda n, xs: np.zeros(3), omega=GOLDEN)
    with pytest.raises(ValueError):
        bad.values(2, np.zeros(5))
    with pytest.raises(ValueError):
        additive_cocycle(0.0, GOLDEN).values(0, np.zeros(3))


def test_lambda_best_includes_depth_n():
    c = schrodinger_cocycle(Cosine(3.0), GOLDEN, 0.5)
    assert lambda_best(c, 64, 64) <= lambda_estimate(c, 64, 64) + 1e-15
