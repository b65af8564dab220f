"""Closed-form cut loci of points on the cylinder and on its universal cover.

For a base point q = (t_q, 0) on a profile whose curvature is positive on the
equator and nonincreasing away from it:

* if |t_q| < t0 and phi(m(t_q)) < pi, the cut locus is the opposite meridian
  theta = pi together with the arc of the mirrored parallel t = -t_q between
  theta = phi(m(t_q)) and 2 pi - phi(m(t_q));
* otherwise it is the opposite meridian alone.

Profiles with K <= 0 everywhere have no conjugate points, and the cut locus is
again the opposite meridian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Tuple

from .errors import AmbiguousClassificationError, DomainError, UnsupportedProfileError
from .profile import ProfileAnalysis, WarpingProfile, cached_analysis
from .quadrature import DEFAULT_TOL, geodesic_length_l, phi, phi_upper_limit


class CutKind(str, Enum):
    MERIDIAN_ONLY = "MeridianOnly"
    MERIDIAN_AND_PARALLEL_ARC = "MeridianAndParallelArc"
    EMPTY_ON_COVER = "EmptyOnCover"


@dataclass(frozen=True)
class CutLocusDescription:
    kind: CutKind
    t_q: float
    theta_q: float = 0.0
    parallel_level: Optional[float] = None
    theta_arc: Optional[Tuple[float, float]] = None
    phi_at_q: Optional[float] = None
    phi_error: float = 0.0
    boundary_extrapolated: bool = False
    # hypotheses that failed on the grid but were waived by the caller
    relaxed: Tuple[str, ...] = field(default=())

    def mirrored(self) -> "CutLocusDescription":
        """Description for the base point reflected through the equator."""
        level = None if self.parallel_level is None else -self.parallel_level
        return replace(self, t_q=-self.t_q, parallel_level=level)

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "t_q": self.t_q}
        if self.parallel_level is not None:
            out["parallel_level"] = self.parallel_level
        if self.theta_arc is not None:
            out["theta_arc"] = list(self.theta_arc)
        if self.phi_at_q is not None:
            out["phi_at_q"] = self.phi_at_q
        out["boundary_extrapolated"] = self.boundary_extrapolated
        if self.relaxed:
            out["relaxed_hypotheses"] = list(self.relaxed)
        return out


def _phi_at(profile, t_q, tol, an):
    """phi(m(t_q)) with its error; the equator uses the one-sided limit."""
    if t_q == 0.0:
        lim = phi_upper_limit(profile, tol=tol, analysis=an)
        return lim.value, lim.est_error, True
    r = phi(profile, float(profile.m(t_q)), tol, analysis=an)
    return r.value, r.est_error, False


def classify(
    profile: WarpingProfile,
    analysis: Optional[ProfileAnalysis] = None,
    t_q: float = 0.0,
    tol: float = DEFAULT_TOL,
    strict: bool = True,
) -> CutLocusDescription:
    """Cut locus of q = (t_q, 0) on the cylinder.

    With ``strict=False`` a failed grid check of "K nonincreasing" is waived
    (and recorded in ``relaxed``) when it is the only failing hypothesis.
    """
    an = analysis or cached_analysis(profile)
    h = an.hypotheses
    t_q = float(t_q)
    if an.in_nonpositive_class:
        return CutLocusDescription(CutKind.MERIDIAN_ONLY, t_q)

    relaxed: Tuple[str, ...] = ()
    if not an.in_main_class:
        missing = [k for k in ("even", "positive", "K0_positive", "K_decreasing") if not h[k]]
        if strict or missing != ["K_decreasing"]:
            raise UnsupportedProfileError(
                f"{profile.label()} fails {', '.join(missing)} and is not "
                "nonpositively curved"
            )
        relaxed = ("K_decreasing",)

    if abs(t_q) >= an.t0:
        return CutLocusDescription(CutKind.MERIDIAN_ONLY, t_q, relaxed=relaxed)

    value, err, extrapolated = _phi_at(profile, t_q, tol, an)
    margin = 2.0 * err
    if abs(value - math.pi) <= margin:
        candidates = [
            CutLocusDescription(CutKind.MERIDIAN_ONLY, t_q, phi_at_q=value, phi_error=err,
                                boundary_extrapolated=extrapolated, relaxed=relaxed),
            CutLocusDescription(CutKind.MERIDIAN_AND_PARALLEL_ARC, t_q, 0.0, 0.0 - t_q,
                                (value, 2 * math.pi - value), value, err, extrapolated,
                                relaxed),
        ]
        raise AmbiguousClassificationError(
            f"phi(m({t_q!r}))={value!r} is within {margin:.2e} of pi", candidates
        )
    if value > math.pi:
        return CutLocusDescription(CutKind.MERIDIAN_ONLY, t_q, phi_at_q=value,
                                   phi_error=err, boundary_extrapolated=extrapolated,
                                   relaxed=relaxed)
    return CutLocusDescription(CutKind.MERIDIAN_AND_PARALLEL_ARC, t_q, 0.0, 0.0 - t_q,
                               (value, 2 * math.pi - value), value, err, extrapolated,
                               relaxed)


@dataclass(frozen=True)
class CoverCutPoint:
    t: float
    theta: float
    distance: float
    theta_error: float
    distance_error: float


def cut_point_on_cover(
    profile: WarpingProfile,
    u: float,
    nu: float,
    tol: float = DEFAULT_TOL,
    analysis: Optional[ProfileAnalysis] = None,
) -> CoverCutPoint:
    """Cut point of q = (-u, 0) along the two geodesics with Clairaut constant nu.

    Both meet again at (u, phi(nu)) after length l(nu); sweeping nu over
    (inf m, m(u)] traces the cover cut locus {t = u, theta >= phi(m(u))}.
    """
    an = analysis or cached_analysis(profile)
    if not (0.0 < u < an.t0):
        raise DomainError(f"u={u!r} must lie in (0, t0={an.t0!r})")
    mu = float(profile.m(u))
    if nu > mu:
        raise DomainError(f"nu={nu!r} > m(u)={mu!r}: outside the cut-point range")
    if nu <= an.inf_m:
        raise DomainError(f"nu={nu!r} <= inf m={an.inf_m!r}")
    p = phi(profile, nu, tol, analysis=an)
    ln = geodesic_length_l(profile, nu, tol, analysis=an)
    return CoverCutPoint(u, p.value, ln.value, p.est_error, ln.est_error)


def empty_on_cover(
    profile: WarpingProfile,
    t_q: float,
    analysis: Optional[ProfileAnalysis] = None,
) -> bool:
    """True when q lies outside the strip |t| < t0, where no cut point exists."""
    an = analysis or cached_analysis(profile)
    return abs(t_q) >= an.t0


def cover_description(
    profile: WarpingProfile,
    t_q: float,
    tol: float = DEFAULT_TOL,
    analysis: Optional[ProfileAnalysis] = None,
) -> CutLocusDescription:
    """Cover-side counterpart of :func:`classify` (only the EmptyOnCover case is closed)."""
    an = analysis or cached_analysis(profile)
    if empty_on_cover(profile, t_q, an):
        return CutLocusDescription(CutKind.EMPTY_ON_COVER, float(t_q))
    if t_q == 0.0:
        raise DomainError("cover cut locus of an equator point is not parametrised here")
    u = abs(t_q)
    p = phi(profile, float(profile.m(u)), tol, analysis=an)
    return CutLocusDescription(CutKind.MERIDIAN_AND_PARALLEL_ARC, float(t_q), 0.0, 0.0 - t_q,
                               (p.value, math.inf), p.value, p.est_error)


def project_cover_cut_set(phi_end: float) -> List[Tuple[float, float]]:
    """Fold the cover cut set onto the cylinder.

    Only lifts with |theta| <= pi are shortest, so the projection of
    {theta >= phi_end} and its mirror {theta <= -phi_end} is the union of
    [phi_end, pi] and [pi, 2 pi - phi_end], merged.
    """
    if phi_end > math.pi:
        return []
    two_pi = 2 * math.pi
    pieces = sorted([(phi_end, math.pi), ((-math.pi) % two_pi, (-phi_end) % two_pi)])
    merged = [list(pieces[0])]
    for lo, hi in pieces[1:]:
        if lo <= merged[-1][1] + 1e-12:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return [tuple(x) for x in merged]
