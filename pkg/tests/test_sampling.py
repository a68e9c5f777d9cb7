import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quasispec.sampling import (
    Cosine,
    Scaled,
    Shifted,
    TrigPolynomial,
    WeierstrassHolder,
    ZERO,
    fejer_smooth,
    fourier_coefficients,
    from_descriptor,
    holder_seminorm,
)

coeff = st.tuples(st.floats(-2, 2), st.floats(-2, 2)).map(lambda t: complex(*t))
trig_polys = st.lists(coeff, min_size=1, max_size=6).map(
    lambda cs: TrigPolynomial(coeffs=(complex(cs[0].real, 0.0),) + tuple(cs[1:])))


def test_cosine_values():
    f = Cosine(lam=1.0)
    assert f.eval(0.0) == pytest.approx(2.0)
    assert f.eval(0.25) == pytest.approx(0.0, abs=1e-12)
    assert f.sup_norm == 2.0


def test_weierstrass_value_at_zero_geometric_sum():
    # oracle: finite geometric sum with ratio 2^{-1/2}
    r = 2.0 ** (-0.5)
    expected = (1.0 - r ** 25) / (1.0 - r)
    f = WeierstrassHolder(gamma=0.5, depth=24)
    assert f.eval(0.0) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(3.41362, abs=5e-6)
    assert f.sup_norm == pytest.approx(expected, rel=1e-12)


def test_periodicity():
    for f in (Cosine(2.0), WeierstrassHolder(0.5, 10),
              TrigPolynomial(coeffs=(1.0 + 0j, 0.5 - 0.25j))):
        xs = np.linspace(0, 1, 17)
        assert np.allclose(f.eval(xs + 1.0), f.eval(xs), atol=1e-12)


def test_trigpoly_evaluation_matches_direct_sum():
    cs = (0.3 + 0j, 0.5 - 0.2j, -0.1 + 0.4j)
    f = TrigPolynomial(coeffs=cs)
    xs = np.linspace(0, 1, 11)
    direct = np.zeros(11, dtype=complex)
    for j, c in enumerate(cs):
        direct += c * np.exp(2j * np.pi * j * xs)
        if j > 0:
            direct += np.conj(c) * np.exp(-2j * np.pi * j * xs)
    assert np.max(np.abs(direct.imag)) < 1e-12
    assert np.allclose(f.eval(xs), direct.real, atol=1e-12)


def test_trigpoly_requires_real_constant():
    with pytest.raises(ValueError):
        TrigPolynomial(coeffs=(1j,))


def test_fejer_of_constant_is_constant():
    f = TrigPolynomial(coeffs=(2.5 + 0j,))
    for n in (0, 1, 7):
        g = fejer_smooth(f, n)
        xs = np.linspace(0, 1, 13)
        assert np.allclose(g.eval(xs), 2.5, atol=1e-12)


def test_fejer_damps_cosine_by_half():
    # cos(2 pi theta) has c_1 = 1/2; N=1 weight is 1 - 1/2
    f = TrigPolynomial(coeffs=(0j, 0.5 + 0j))
    g = fejer_smooth(f, 1)
    xs = np.linspace(0, 1, 50)
    assert np.allclose(g.eval(xs), 0.5 * np.cos(2 * np.pi * xs), atol=1e-12)


@given(trig_polys)
def test_fejer_exact_damping_identity(f):
    n = f.degree + 2
    g = fejer_smooth(f, n)
    weights = [1.0 - j / (n + 1.0) for j in range(n + 1)]
    for j in range(n + 1):
        c_in = f.coeffs[j] if j <= f.degree else 0j
        assert g.coeffs[j] == pytest.approx(weights[j] * c_in, abs=1e-12)


@given(trig_polys)
def test_fejer_is_sup_norm_contraction(f):
    xs = np.arange(4096) / 4096
    n = 4
    g = fejer_smooth(f, n)
    assert np.max(np.abs(g.eval(xs))) <= np.max(np.abs(f.eval(xs))) + 1e-9


@given(trig_polys, trig_polys)
def test_fejer_linearity(f, g):
    n = max(f.degree, g.degree)
    both = TrigPolynomial(coeffs=tuple(
        (f.coeffs[j] if j <= f.degree else 0j)
        + (g.coeffs[j] if j <= g.degree else 0j)
        for j in range(n + 1)))
    lhs = fejer_smooth(both, n)
    ff, gg = fejer_smooth(f, n), fejer_smooth(g, n)
    xs = np.linspace(0, 1, 31)
    assert np.allclose(lhs.eval(xs), ff.eval(xs) + gg.eval(xs), atol=1e-10)


def test_fejer_error_decay_for_weierstrass():
    f = WeierstrassHolder(gamma=0.5, depth=24)
    xs = np.arange(10_000) / 10_000
    ref = f.eval(xs)
    ns = [8, 16, 32, 64, 128]
    errs = [np.max(np.abs(ref - fejer_smooth(f, n).eval(xs))) for n in ns]
    slope = np.polyfit(np.log(ns), np.log(errs), 1)[0]
    assert -0.8 < slope < -0.25
    assert errs[-1] < errs[0]


def test_holder_seminorm_constant_zero():
    assert holder_seminorm(TrigPolynomial(coeffs=(1.0 + 0j,)), 0.5, 256) == 0.0


def test_holder_seminorm_cosine_lipschitz():
    f = TrigPolynomial(coeffs=(0j, 0.5 + 0j))  # cos(2 pi theta)
    s = holder_seminorm(f, 1.0, 1 << 12)
    assert 6.0 <= s <= 2 * np.pi


def test_holder_seminorm_diverges_above_class():
    f = WeierstrassHolder(gamma=0.5, depth=24)
    coarse = holder_seminorm(f, 0.6, 1 << 10)
    fine = holder_seminorm(f, 0.6, 1 << 16)
    assert fine > 1.5 * coarse


def test_holder_seminorm_stable_within_class():
    f = WeierstrassHolder(gamma=0.5, depth=24)
    coarse = holder_seminorm(f, 0.5, 1 << 10)
    fine = holder_seminorm(f, 0.5, 1 << 16)
    assert fine <= 2.0 * coarse


def test_scaled_and_shifted():
    base = Cosine(lam=1.5)
    f = Scaled(base=base, coupling=2.0)
    assert f.eval(0.0) == pytest.approx(6.0)
    assert f.sup_norm == pytest.approx(6.0)
    g = Shifted(base=base, shift=0.25)
    assert g.eval(0.0) == pytest.approx(base.eval(0.25))


def test_descriptor_roundtrip():
    for f in (Cosine(lam=2.0),
              WeierstrassHolder(gamma=0.5, depth=24),
              Scaled(base=WeierstrassHolder(gamma=0.5, depth=24), coupling=5.0),
              TrigPolynomial(coeffs=(0.5 + 0j, 1.0 - 0.5j))):
        g = from_descriptor(f.descriptor())
        xs = np.linspace(0, 1, 40)
        assert np.allclose(f.eval(xs), g.eval(xs), atol=1e-12)


def test_descriptor_rejects_unknown():
    with pytest.raises(ValueError):
        from_descriptor({"kind": "sawtooth"})
    with pytest.raises(ValueError):
        from_descriptor({"kind": "cosine", "lambda": 1.0, "typo": 2})


def test_fourier_coefficients_exact_for_low_degree():
    f = TrigPolynomial(coeffs=(0.25 + 0j, 0.5 - 0.1j, 0.0 + 0.3j))
    cs = fourier_coefficients(f, 4)
    assert cs[0] == pytest.approx(0.25, abs=1e-12)
    assert cs[1] == pytest.approx(0.5 - 0.1j, abs=1e-12)
    assert cs[2] == pytest.approx(0.3j, abs=1e-12)
    assert abs(cs[3]) < 1e-12 and abs(cs[4]) < 1e-12


def test_zero_function():
    assert ZERO.eval(0.37) == 0.0
    assert ZERO.sup_norm == 0.0
