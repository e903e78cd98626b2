import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from cascade_hawkes import truncexp


def _quad(f, x, T):
    # the density is concentrated within a few scales of zero; split there
    cut = min(T, 50 * x)
    head, _ = integrate.quad(f, 0, cut, limit=200)
    tail = integrate.quad(f, cut, T, limit=200)[0] if cut < T else 0.0
    return head + tail


@given(x=st.floats(0.05, 1e4), T=st.floats(0.1, 1e4))
@settings(max_examples=60, deadline=None)
def test_pdf_integrates_to_one(x, T):
    total = _quad(lambda t: truncexp.pdf(t, x, T), x, T)
    assert total == pytest.approx(1.0, rel=1e-7)


@given(x=st.floats(0.05, 1e4), T=st.floats(0.1, 1e4), u=st.floats(0, 1))
@settings(max_examples=80, deadline=None)
def test_ppf_inverts_cdf(x, T, u):
    t = truncexp.ppf(u, x, T)
    assert 0 <= t <= T * (1 + 1e-12)
    assert truncexp.cdf(t, x, T) == pytest.approx(u, abs=1e-9)


def test_pdf_at_zero_matches_hand_value():
    # 1/1000 / (1 - e^-6)
    assert truncexp.pdf(0.0, 1000.0, 6000.0) == pytest.approx(0.001 / (1 - np.exp(-6)), rel=1e-14)


def test_mean_closed_form():
    # x - T e^{-T/x} / (1 - e^{-T/x}) for x=1000, T=6000
    expected = 1000 - 6000 * np.exp(-6) / (1 - np.exp(-6))
    assert truncexp.mean(1000.0, 6000.0) == pytest.approx(expected, rel=1e-13)
    assert truncexp.mean(1000.0, 6000.0) == pytest.approx(985.0905, abs=1e-4)


@pytest.mark.parametrize("x, T", [(1e6, 10.0), (1e-3, 10.0), (5.0, 10.0)])
def test_mean_limits(x, T):
    m = truncexp.mean(x, T)
    value = _quad(lambda t: t * truncexp.pdf(t, x, T), x, T)
    assert m == pytest.approx(value, rel=1e-8, abs=1e-12)


def test_sample_mean_matches_closed_form():
    rng = np.random.default_rng(3)
    draws = truncexp.sample(rng, 200_000, 1000.0, 6000.0)
    se = draws.std() / np.sqrt(draws.size)
    assert abs(draws.mean() - truncexp.mean(1000.0, 6000.0)) < 3 * se
    assert draws.max() <= 6000.0


def test_fit_scale_untruncated_limit():
    rng = np.random.default_rng(0)
    t = rng.exponential(5.0, size=4000)
    t = t[t < 1e4]
    x = truncexp.fit_scale(t, np.ones_like(t), 1e4)
    assert x == pytest.approx(t.mean(), rel=0.01)


def test_fit_scale_matches_grid_search_single_point():
    T = 100.0
    t, w = np.array([T / 3]), np.array([1.0])
    x = truncexp.fit_scale(t, w, T, tol=1e-10)
    grid = np.linspace(x * 0.999, x * 1.001, 20001)
    ll = [truncexp.logpdf(t, g, T)[0] for g in grid]
    assert x == pytest.approx(grid[int(np.argmax(ll))], abs=grid[1] - grid[0])


def test_fit_scale_at_half_window_is_not_identified():
    # a lone point at T/2 has a score that never crosses zero: the likelihood
    # keeps rising toward the uniform limit x -> infinity
    with pytest.raises(truncexp.ScaleNotIdentified):
        truncexp.fit_scale(np.array([50.0]), np.array([1.0]), 100.0)


@pytest.mark.parametrize("t, w", [
    (np.array([1.0, 2.0]), np.array([0.0, 0.0])),
    (np.array([80.0, 90.0]), np.array([1.0, 1.0])),
])
def test_fit_scale_errors(t, w):
    with pytest.raises(truncexp.ScaleNotIdentified):
        truncexp.fit_scale(t, w, 100.0)
