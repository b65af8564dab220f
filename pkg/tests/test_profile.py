import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from revcut.errors import DomainError, EvaluationError, ProfileClassError
from revcut.profile import (GALLERY, WarpingProfile, analyze, cached_analysis, curvature,
                            get_profile, xi)

ALL = sorted(GALLERY)


# Curvatures at t=0 worked out by hand from m(0) and m''(0).
@pytest.mark.parametrize("name, K0", [
    ("gauss", 2.0),       # m''(0) = -2
    ("sech", 1.0),        # m''(0) = -1
    ("logneck", 1.0),     # m''(0) = 1 - 2 = -1
    ("coshneck", 1 / 3),  # m(0) = 3, m''(0) = 1 - 2
    ("catenoid", -1.0),   # m''(0) = 1
    ("flat", 0.0),
])
def test_curvature_at_equator(name, K0):
    assert curvature(get_profile(name), 0.0) == pytest.approx(K0, abs=1e-14)


def test_gauss_curvature_closed_form():
    t = np.linspace(-3, 3, 61)
    assert np.allclose(curvature(get_profile("gauss"), t), 2 - 4 * t**2, atol=1e-12)


def test_flat_curvature_is_zero_everywhere():
    t = np.linspace(-5, 5, 11)
    assert np.all(curvature(get_profile("flat"), t) == 0.0)


def test_curvature_rejects_non_finite():
    bad = WarpingProfile("bad", lambda t: np.ones_like(t) * 1.0,
                         lambda t: 0.0 * t, lambda t: np.full_like(np.asarray(t, float), np.nan))
    with pytest.raises(EvaluationError, match="t=0.5"):
        curvature(bad, 0.5)


@pytest.mark.parametrize("name", ALL)
def test_derivatives_match_finite_differences(name):
    p = get_profile(name)
    t = np.linspace(-2.0, 2.0, 17)
    errs = []
    for h in (1e-3, 5e-4):
        fd1 = (p.m(t + h) - p.m(t - h)) / (2 * h)
        fd2 = (p.m(t + h) - 2 * p.m(t) + p.m(t - h)) / h**2
        errs.append((np.max(np.abs(fd1 - p.m_prime(t))), np.max(np.abs(fd2 - p.m_double_prime(t)))))
    assert errs[1][0] < 1e-6 and errs[1][1] < 1e-5
    if errs[0][0] > 1e-11:
        assert errs[1][0] / errs[0][0] < 0.3  # second order


@pytest.mark.parametrize("name", ALL)
def test_even_and_flat_at_equator(name):
    p = get_profile(name)
    assert abs(float(p.m_prime(0.0))) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(ALL), st.floats(-30, 30, allow_nan=False))
def test_evenness(name, t):
    p = get_profile(name)
    m = float(p.m(t))
    assert abs(m - float(p.m(-t))) <= 1e-12 * (1 + abs(m))


def test_unknown_profile():
    with pytest.raises(ValueError, match="unknown profile"):
        get_profile("torus")


def test_bad_parameter():
    with pytest.raises(ValueError):
        get_profile("coshneck", c=0.5)
    with pytest.raises(ValueError):
        get_profile("gauss", b=1.0)


def test_analyze_gauss():
    an = analyze(get_profile("gauss"))
    assert math.isinf(an.t0)
    assert an.inf_m < 1e-300 and an.inf_m_truncated
    assert an.t1 == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert an.K0 == 2.0
    assert an.in_main_class
    assert an.hypotheses["K_decreasing"]


def test_analyze_sech():
    an = analyze(get_profile("sech"))
    assert math.isinf(an.t0)
    assert an.t1 == pytest.approx(math.asinh(1.0), abs=1e-12)  # K = 1 - 2 sech^2
    assert an.in_main_class


def test_analyze_logneck():
    an = analyze(get_profile("logneck"))
    # m'(t) = t (t^2 - 1) / (1 + t^2)
    assert an.t0 == pytest.approx(1.0, abs=1e-12)
    assert an.inf_m == pytest.approx(1.5 - math.log(2), abs=1e-14)
    assert 0 < an.t1 < an.t0
    # K rises again beyond t ~ 1.26, so the monotonicity flag is honestly false
    assert not an.hypotheses["K_decreasing"]
    assert not an.in_main_class


def test_analyze_coshneck():
    an = analyze(get_profile("coshneck"))
    # m' = sinh t (1 - 2 / cosh^2 t) vanishes at cosh^2 t = 2
    assert an.t0 == pytest.approx(math.acosh(math.sqrt(2)), abs=1e-12)
    assert an.inf_m == pytest.approx(2 * math.sqrt(2), abs=1e-12)
    assert 0 < an.t1 < an.t0
    assert an.in_main_class


@pytest.mark.parametrize("name", ["catenoid", "flat"])
def test_analyze_nonpositive(name):
    an = analyze(get_profile(name))
    assert an.in_nonpositive_class
    assert not an.hypotheses["K0_positive"]
    assert an.t0 == 0.0 and an.t1 is None


def test_analysis_serialises_infinite_t0_as_null():
    d = analyze(get_profile("gauss")).to_dict()
    assert d["t0"] is None
    assert set(d["hypotheses_ok"]) == {"even", "positive", "K0_positive", "K_decreasing",
                                       "nonpositive_curvature_everywhere"}


def test_analyze_rejects_multiple_sign_changes():
    wavy = WarpingProfile("wavy", lambda t: 2 + np.cos(t), lambda t: -np.sin(t),
                          lambda t: -np.cos(t))
    with pytest.raises(ProfileClassError, match="changes sign"):
        analyze(wavy, t_max=10)


def test_analyze_rejects_increasing_then_decreasing():
    bump = WarpingProfile("bump", lambda t: 2 - np.exp(-t**2), lambda t: 2 * t * np.exp(-t**2),
                          lambda t: (2 - 4 * t**2) * np.exp(-t**2))
    # m' > 0 on (0, inf): no sign change, m never decreases, t0 = 0
    assert analyze(bump).t0 == 0.0
    hump = WarpingProfile("hump", lambda t: 3 + t**2 * np.exp(-t**2),
                          lambda t: (2 * t - 2 * t**3) * np.exp(-t**2),
                          lambda t: (2 - 10 * t**2 + 4 * t**4) * np.exp(-t**2))
    with pytest.raises(ProfileClassError, match="increasing to decreasing"):
        analyze(hump)


def test_analyze_preconditions():
    p = get_profile("gauss")
    with pytest.raises(ValueError):
        analyze(p, t_max=0)
    with pytest.raises(ValueError):
        analyze(p, grid_n=50)


@pytest.mark.parametrize("name", ["logneck", "coshneck"])
def test_curvature_sign_structure(name):
    p = get_profile(name)
    an = analyze(p)
    g = np.linspace(0, an.t_max, 10001)
    K = curvature(p, g)
    assert np.all(K[g <= an.t1] >= -1e-10)
    assert np.all(K[g >= an.t1] <= 1e-10)


def test_xi_closed_form_gauss():
    assert xi(get_profile("gauss"), math.exp(-1)) == pytest.approx(1.0, rel=1e-13)


def test_xi_near_top_is_small():
    p = get_profile("gauss")
    assert xi(p, 1 - 1e-10) < 2e-5


def test_xi_logneck_inverse():
    p = get_profile("logneck")
    assert xi(p, float(p.m(0.5))) == pytest.approx(0.5, abs=1e-12)


def test_xi_domain_errors():
    p = get_profile("gauss")
    with pytest.raises(DomainError, match=">= m"):
        xi(p, 1.0)
    with pytest.raises(DomainError, match="inf m"):
        xi(get_profile("logneck"), 0.5)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(["gauss", "sech", "logneck", "coshneck"]), st.floats(0.02, 0.98))
def test_xi_inverts_m(name, frac):
    p = get_profile(name)
    an = cached_analysis(p)
    top = 3.0 if math.isinf(an.t0) else an.t0
    u = frac * top
    assert abs(xi(p, float(p.m(u)), an) - u) <= 1e-10


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_xi_decreasing(a, b):
    p = get_profile("sech")
    if abs(a - b) < 1e-6:
        return
    lo, hi = sorted((a, b))
    assert xi(p, lo) > xi(p, hi)
