import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fblmac import (CodeSpec, DomainError, PcModel, chi, error_prob, log_success_prob,
                    make_channel, q_function, success_prob)

mpmath.mp.dps = 40


def q_oracle(x: float) -> float:
    """Gaussian upper tail by direct quadrature of the density."""
    density = lambda t: mpmath.exp(-t * t / 2) / mpmath.sqrt(2 * mpmath.pi)
    return float(mpmath.quad(density, [x, x + 10, mpmath.inf]))


def dispersion_oracle(snr) -> float:
    s = mpmath.mpf(snr)
    return float(s / 2 * (s + 2) / (s + 1) ** 2 * (1 / mpmath.log(2)) ** 2)


@pytest.mark.parametrize("x", np.linspace(-8, 8, 81))
def test_q_function_matches_quadrature(x):
    assert abs(q_function(float(x)) - q_oracle(float(x))) <= 1e-10


def test_q_function_array_matches_scalar():
    xs = np.linspace(-8, 8, 33)
    vec = q_function(xs)
    assert vec.shape == xs.shape
    scalar = np.array([q_function(float(x)) for x in xs])
    assert np.allclose(vec, scalar, rtol=1e-14, atol=0)


def test_channel_basics():
    assert make_channel(1).capacity == 0.5
    assert make_channel(3).capacity == 1.0
    assert make_channel(1).dispersion == pytest.approx(dispersion_oracle(1), abs=1e-14)
    assert make_channel(1).dispersion == pytest.approx(0.780513, abs=1e-6)


@pytest.mark.parametrize("snr", [0, -1, math.nan, math.inf])
def test_channel_rejects_bad_snr(snr):
    with pytest.raises(DomainError):
        make_channel(snr)


@given(st.floats(1e-6, 1e4))
def test_channel_positive_and_exact(snr):
    ch = make_channel(snr)
    assert ch.capacity > 0 and ch.dispersion > 0
    assert ch.capacity == 0.5 * math.log2(1 + snr)


def test_channel_vanishes_at_low_snr():
    ch = make_channel(1e-12)
    assert ch.capacity < 1e-11 and ch.dispersion < 1e-11


def test_code_spec():
    assert CodeSpec(100, 1000, 3).payload == 300
    for bad in [(0, 10, 1), (1, 0, 1), (1, 1, 0), (1.5, 10, 1)]:
        with pytest.raises(DomainError):
            CodeSpec(*bad)


def test_chi_examples():
    ch = make_channel(1)
    n = 1000
    assert chi(n * ch.capacity, n, ch) == 0
    assert chi(457, n, ch) == pytest.approx(43 / math.sqrt(780.5133678771029), rel=1e-12)
    assert chi(457, n, ch) == pytest.approx(1.539, abs=1e-3)
    b = n * ch.capacity + math.sqrt(n * ch.dispersion)
    assert chi(b, n, ch) == pytest.approx(-1, abs=1e-12)


def test_success_prob_examples():
    ch = make_channel(1)
    n = 1000
    assert success_prob(500, n, ch) == 0.5
    b = 500 - 3 * math.sqrt(n * ch.dispersion)
    assert success_prob(b, n, ch) == pytest.approx(1 - q_oracle(3), abs=1e-12)
    x = 0.5 * math.log2(1000) / math.sqrt(n * ch.dispersion)
    assert x == pytest.approx(0.17836, abs=1e-5)
    third = success_prob(500, n, ch, PcModel.THIRD)
    assert third == pytest.approx(1 - q_oracle(x), abs=1e-12)
    assert third == pytest.approx(0.5708, abs=1e-4)


def test_error_prob_examples():
    ch = make_channel(1)
    assert error_prob(500, 1000, ch) == 0.5
    assert error_prob(1e-9, 1000, ch) < 1e-50


@settings(max_examples=200)
@given(st.floats(0.01, 100), st.integers(1, 5000), st.floats(0, 4), st.sampled_from(list(PcModel)))
def test_complement(snr, n, frac, model):
    ch = make_channel(snr)
    b = frac * n * ch.capacity
    assert success_prob(b, n, ch, model) + error_prob(b, n, ch, model) == pytest.approx(1, abs=1e-15)


@settings(max_examples=200)
@given(st.floats(-8, 8), st.floats(0.05, 20), st.integers(10, 5000))
def test_point_symmetry(x, snr, n):
    ch = make_channel(snr)
    c, s = n * ch.capacity, math.sqrt(n * ch.dispersion)
    total = success_prob(c - x * s, n, ch) + success_prob(c + x * s, n, ch)
    assert total == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("snr", [0.2, 0.5, 1, 2, 10])
@pytest.mark.parametrize("n", [10, 100, 1000])
@pytest.mark.parametrize("model", list(PcModel))
def test_success_prob_decreasing_in_payload(snr, n, model):
    ch = make_channel(snr)
    b = np.arange(1, int(3 * n * ch.capacity) + 1)
    pc = success_prob(b, n, ch, model)
    steps = np.diff(pc)
    assert np.all(steps <= 0)
    # strict wherever neighbouring values are resolvable in double precision
    live = (pc[:-1] < 1 - 1e-12) & (pc[1:] > 1e-300)
    assert np.all(steps[live] < 0)
    pe = error_prob(b, n, ch, model)
    live = (pe[1:] > 1e-300) & (pe[:-1] < 1 - 1e-12)
    assert np.all(np.diff(pe)[live] > 0)


@settings(max_examples=200)
@given(st.floats(0.01, 50), st.floats(0.01, 50), st.integers(10, 3000), st.floats(0.01, 0.99))
def test_success_prob_increasing_in_snr(s1, s2, n, frac):
    lo, hi = sorted((s1, s2))
    if hi - lo < 1e-6:
        return
    a, b = make_channel(lo), make_channel(hi)
    payload = frac * n * a.capacity
    pa, pb = success_prob(payload, n, a), success_prob(payload, n, b)
    assert pb >= pa
    if pa < 1.0:
        assert pb > pa


def test_log_success_prob_consistent():
    ch = make_channel(0.5)
    b = np.arange(1, 600)
    with np.errstate(divide="ignore"):
        direct = np.log(success_prob(b, 1000, ch))
    assert np.allclose(log_success_prob(b, 1000, ch)[direct > -700], direct[direct > -700],
                       rtol=1e-12, atol=1e-14)
    # stays finite deep in the tail where the plain probability underflows
    assert np.isfinite(log_success_prob(5000, 1000, ch))


def test_rejects_bad_blocklength():
    with pytest.raises(DomainError):
        success_prob(10, 0, make_channel(1))
