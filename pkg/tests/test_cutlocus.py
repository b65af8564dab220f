import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from revcut.cutlocus import (CutKind, classify, cover_description, cut_point_on_cover,
                             empty_on_cover, project_cover_cut_set)
from revcut.errors import AmbiguousClassificationError, DomainError, UnsupportedProfileError
from revcut.geodesics import integrate, jacobi_first_zero, return_point
from revcut.profile import cached_analysis, get_profile
from revcut.quadrature import geodesic_length_l, phi

PHI_GAUSS_03 = 2.274029395103783  # phi(m(0.3)) = phi(exp(-0.09)) for m = exp(-t^2)


def test_gauss_arc():
    d = classify(get_profile("gauss"), t_q=-0.3)
    assert d.kind is CutKind.MERIDIAN_AND_PARALLEL_ARC
    assert d.parallel_level == 0.3
    lo, hi = d.theta_arc
    assert lo == pytest.approx(PHI_GAUSS_03, abs=1e-10)
    assert lo + hi == pytest.approx(2 * math.pi, abs=1e-15)
    assert not d.boundary_extrapolated
    assert d.phi_at_q < math.pi - 2 * d.phi_error


def test_sech_off_equator_is_meridian_only():
    d = classify(get_profile("sech"), t_q=-0.3)
    assert d.kind is CutKind.MERIDIAN_ONLY
    assert d.phi_at_q > math.pi + 2 * d.phi_error


def test_sech_equator_is_ambiguous():
    # the equatorial limit of phi is exactly pi for sech
    with pytest.raises(AmbiguousClassificationError) as info:
        classify(get_profile("sech"), t_q=0.0)
    kinds = {c.kind for c in info.value.candidates}
    assert kinds == {CutKind.MERIDIAN_ONLY, CutKind.MERIDIAN_AND_PARALLEL_ARC}


def test_equator_uses_extrapolated_limit():
    d = classify(get_profile("gauss"), t_q=0.0)
    assert d.boundary_extrapolated
    assert d.phi_at_q == pytest.approx(math.pi / math.sqrt(2), abs=1e-6)
    assert d.parallel_level == 0.0 and math.copysign(1, d.parallel_level) == 1


def test_coshneck_inside_and_outside_strip():
    p = get_profile("coshneck")
    t0 = cached_analysis(p).t0
    assert classify(p, t_q=0.0).kind is CutKind.MERIDIAN_AND_PARALLEL_ARC
    assert classify(p, t_q=-t0).kind is CutKind.MERIDIAN_ONLY
    assert classify(p, t_q=1.2).kind is CutKind.MERIDIAN_ONLY


def test_logneck_needs_relaxation():
    p = get_profile("logneck")
    with pytest.raises(UnsupportedProfileError, match="K_decreasing"):
        classify(p, t_q=1.5)
    d = classify(p, t_q=1.5, strict=False)
    assert d.kind is CutKind.MERIDIAN_ONLY
    assert d.relaxed == ("K_decreasing",)
    assert d.to_dict()["relaxed_hypotheses"] == ["K_decreasing"]


@pytest.mark.parametrize("t_q", [-2.0, -0.5, 0.0, 0.7, 3.0])
def test_nonpositive_profiles_meridian_only(t_q):
    for name in ("catenoid", "flat"):
        assert classify(get_profile(name), t_q=t_q).kind is CutKind.MERIDIAN_ONLY


def test_profile_in_neither_class():
    from revcut.profile import WarpingProfile
    # positively curved at t=0 and decreasing on t > 0, but not even:
    # m = exp(g), g = -t^2 - 0.1 t^3 / (1 + t^2)
    from revcut.profile import analyze
    g1 = lambda t: -2 * t - 0.1 * (t**4 + 3 * t**2) / (1 + t**2) ** 2
    g2 = lambda t: -2 - 0.1 * (6 * t - 2 * t**3) / (1 + t**2) ** 3
    m = lambda t: np.exp(-t**2 - 0.1 * t**3 / (1 + t**2))
    skew = WarpingProfile("skew", m, lambda t: g1(t) * m(t),
                          lambda t: (g2(t) + g1(t) ** 2) * m(t))
    with pytest.raises(UnsupportedProfileError, match="even"):
        classify(skew, analyze(skew, t_max=5.0), t_q=0.2, strict=False)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 1.5))
def test_mirror_symmetry(t):
    p = get_profile("gauss")
    a = classify(p, t_q=t)
    b = classify(p, t_q=-t)
    assert a.kind is b.kind
    if a.kind is CutKind.MERIDIAN_AND_PARALLEL_ARC:
        assert a.parallel_level == -b.parallel_level
        assert a.theta_arc == b.theta_arc
        assert a.mirrored().parallel_level == b.parallel_level


def test_json_shape():
    d = classify(get_profile("gauss"), t_q=-0.3).to_dict()
    assert set(d) == {"kind", "t_q", "parallel_level", "theta_arc", "phi_at_q",
                      "boundary_extrapolated"}
    assert d["kind"] == "MeridianAndParallelArc"


def test_cover_endpoint():
    p = get_profile("gauss")
    u = 0.3
    cp = cut_point_on_cover(p, u, float(p.m(u)))
    assert cp.t == u
    assert cp.theta == pytest.approx(PHI_GAUSS_03, abs=1e-10)


@pytest.mark.parametrize("nu", [0.3, 0.5, 0.7])
def test_cover_distance_matches_integration(nu):
    p = get_profile("gauss")
    cp = cut_point_on_cover(p, 0.3, nu)
    r = return_point(p, 0.3, nu)
    assert cp.distance == pytest.approx(r.alpha.arclength, abs=1e-6)
    assert cp.theta == pytest.approx(r.beta.delta_theta, abs=1e-6)


def test_cover_sweep_is_monotone():
    p = get_profile("gauss")
    mu = float(p.m(0.3))
    nus = np.linspace(0.2, mu, 15)
    thetas = [cut_point_on_cover(p, 0.3, nu).theta for nu in nus]
    assert np.all(np.diff(thetas) < 0)
    assert thetas[-1] == pytest.approx(PHI_GAUSS_03, abs=1e-10)
    assert thetas[0] == pytest.approx(phi(p, 0.2).value, abs=1e-12)


def test_cover_domain_errors():
    p = get_profile("gauss")
    with pytest.raises(DomainError):
        cut_point_on_cover(p, 0.3, 0.95)
    with pytest.raises(DomainError):
        cut_point_on_cover(p, -0.3, 0.5)
    with pytest.raises(DomainError):
        cut_point_on_cover(get_profile("coshneck"), 0.5, 2.8)


def test_empty_on_cover():
    assert empty_on_cover(get_profile("logneck"), -2.0)
    assert not empty_on_cover(get_profile("coshneck"), 0.0)
    assert not empty_on_cover(get_profile("gauss"), -25.0)
    assert cover_description(get_profile("logneck"), -2.0).kind is CutKind.EMPTY_ON_COVER


def test_cover_description_arc():
    d = cover_description(get_profile("gauss"), -0.3)
    assert d.theta_arc[0] == pytest.approx(PHI_GAUSS_03, abs=1e-10)
    assert math.isinf(d.theta_arc[1])


def test_cover_projects_to_cylinder_arc():
    d = classify(get_profile("gauss"), t_q=-0.3)
    pieces = project_cover_cut_set(d.phi_at_q)
    assert pieces == [d.theta_arc]
    assert project_cover_cut_set(3.5) == []


@pytest.mark.parametrize("nu", [0.3, 0.6, 0.9])
def test_cut_point_no_later_than_conjugate_point(nu):
    p = get_profile("gauss")
    tr = integrate(p, (-0.3, 0.0), nu, -1, s_max=8.0)
    s_conj = jacobi_first_zero(p, tr)
    assert s_conj is not None
    assert s_conj >= geodesic_length_l(p, nu).value - 1e-4
