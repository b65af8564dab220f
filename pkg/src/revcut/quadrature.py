"""Half-period phi(nu) and half-period length l(nu) of geodesics.

For a geodesic with Clairaut constant nu leaving the equator,

    phi(nu) = 2 * int_0^xi nu / (m sqrt(m^2 - nu^2)) dt
    l(nu)   = 2 * int_0^xi m / sqrt(m^2 - nu^2) dt

where xi = xi(nu) is the tangency height.  Both integrands blow up like
(xi - t)^(-1/2); the substitution t = xi - w^2 turns them into smooth
integrands on [0, sqrt(xi)] that adaptive Gauss-Kronrod handles to 1e-10.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .errors import DomainError, QuadratureError, SingularityError
from .profile import ProfileAnalysis, WarpingProfile, cached_analysis, xi

DEFAULT_TOL = 1e-10
_EPS = np.finfo(float).eps


class QuadResult(NamedTuple):
    value: float
    est_error: float


@dataclass(frozen=True)
class BoundaryValue:
    """One-sided limit of phi at an end of its open domain."""

    value: float
    est_error: float
    extrapolated: bool = True
    samples: tuple = ()
    asymptotic: Optional[float] = None


def _domain(profile: WarpingProfile, nu: float, analysis: Optional[ProfileAnalysis]):
    an = analysis or cached_analysis(profile)
    if not (an.inf_m < nu < an.m0):
        side = "above m(0)" if nu >= an.m0 else "below inf m"
        raise DomainError(
            f"nu={nu!r} outside ({an.inf_m!r}, {an.m0!r}) ({side}) for {profile.label()}"
        )
    return an


def _tangency(profile, nu, an):
    x = xi(profile, nu, an)
    slope = abs(float(profile.m_prime(x)))
    # a degenerate root is only located to ~sqrt(eps), leaving a residual slope
    if slope <= 1e-8 * max(1.0, nu):
        raise SingularityError(
            f"m'(xi)={slope:.3g} at xi={x!r}: nu={nu!r} sits on a critical parallel"
        )
    return x, slope


def _gap(profile, nu, x, slope, t, w=None):
    """m(t) - nu, kept positive below the tangency against roundoff."""
    d = np.asarray(profile.m(t), dtype=float) - nu
    if w is None:
        return np.where(d > 0, d, slope * np.abs(x - np.asarray(t)))
    return np.where(d > 0, d, slope * np.square(w))


def _kernel(kind, m, gap, nu):
    root = np.sqrt(gap * (m + nu))
    if kind == "phi":
        return nu / (m * root)
    if kind == "l":
        return m / root
    return root / m  # "l_regular": sqrt(m^2 - nu^2) / m


def _half_integral(profile, nu, kind, tol, method, an):
    x, slope = _tangency(profile, nu, an)
    with warnings.catch_warnings():
        # an exhausted subdivision budget still yields an honest error estimate
        warnings.simplefilter("ignore", IntegrationWarning)
        val, err = _quad_half(profile, nu, kind, tol, method, x, slope)
    if not err <= tol:
        raise QuadratureError(
            f"{kind} at nu={nu!r}: error estimate {err:.2e} exceeds tol {tol:.2e} "
            f"(m'(xi)={slope:.2e})"
        )
    return val, err


def _quad_half(profile, nu, kind, tol, method, x, slope):
    if method == "substitution":
        def f(w):
            t = x - w * w
            m = float(profile.m(t))
            return 2.0 * w * _kernel(kind, m, float(_gap(profile, nu, x, slope, t, w)), nu)

        val, err = quad(f, 0.0, math.sqrt(x), epsabs=tol, epsrel=0.0, limit=500)
    elif method == "direct":
        # QAGS with Wynn extrapolation resolves the endpoint singularity by bisection
        def f(t):
            m = float(profile.m(t))
            return _kernel(kind, m, float(_gap(profile, nu, x, slope, t)), nu)

        val, err = quad(f, 0.0, x, epsabs=tol, epsrel=0.0, limit=1000)
    else:
        raise ValueError(f"unknown quadrature method {method!r}")
    return val, err


def phi(
    profile: WarpingProfile,
    nu: float,
    tol: float = DEFAULT_TOL,
    method: str = "substitution",
    analysis: Optional[ProfileAnalysis] = None,
) -> QuadResult:
    """theta-advance between consecutive equator crossings, with error estimate."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    an = _domain(profile, nu, analysis)
    val, err = _half_integral(profile, nu, "phi", tol / 2, method, an)
    return QuadResult(2.0 * val, 2.0 * err + 4 * _EPS * abs(val))


def geodesic_length_l(
    profile: WarpingProfile,
    nu: float,
    tol: float = DEFAULT_TOL,
    method: str = "substitution",
    analysis: Optional[ProfileAnalysis] = None,
) -> QuadResult:
    """Arclength of the same half-period arc.

    Also evaluates l = 2 int sqrt(m^2-nu^2)/m dt + nu*phi(nu) and raises
    QuadratureError if the two forms disagree beyond their combined error.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    an = _domain(profile, nu, analysis)
    val, err = _half_integral(profile, nu, "l", tol / 2, method, an)
    l1, e1 = 2.0 * val, 2.0 * err + 4 * _EPS * abs(val)

    reg, ereg = _half_integral(profile, nu, "l_regular", tol / 2, method, an)
    ph = phi(profile, nu, tol, method, an)
    l2 = 2.0 * reg + nu * ph.value
    e2 = 2.0 * ereg + nu * ph.est_error + 4 * _EPS * abs(l2)
    # QUADPACK's estimates are heuristic and run optimistic near the
    # tolerance floor; the check is a guard against gross errors
    if abs(l1 - l2) > 10.0 * max(e1 + e2, tol) + 64 * _EPS * abs(l1):
        raise QuadratureError(
            f"l({nu!r}) forms disagree: {l1!r} vs {l2!r} (errors {e1:.2e}, {e2:.2e})"
        )
    return QuadResult(l1, max(e1, abs(l1 - l2)))


def check_derivative_identity(
    profile: WarpingProfile,
    nu: float,
    h: float,
    tol: float = 1e-12,
    analysis: Optional[ProfileAnalysis] = None,
) -> float:
    """|dl/dnu - nu dphi/dnu| from central differences with step h."""
    an = analysis or cached_analysis(profile)
    if not (an.inf_m < nu - h and nu + h < an.m0):
        raise DomainError(f"[{nu - h!r}, {nu + h!r}] leaves ({an.inf_m!r}, {an.m0!r})")
    lp = geodesic_length_l(profile, nu + h, tol, analysis=an).value
    lm = geodesic_length_l(profile, nu - h, tol, analysis=an).value
    pp = phi(profile, nu + h, tol, analysis=an).value
    pm = phi(profile, nu - h, tol, analysis=an).value
    return abs((lp - lm) / (2 * h) - nu * (pp - pm) / (2 * h))


# ---------------------------------------------------------------------------
# Limits at the ends of (inf m, m(0))
# ---------------------------------------------------------------------------

def richardson(values, ratio: float = 2.0):
    """Neville table for samples at steps h, h/ratio, h/ratio^2, ...

    Returns the extrapolated value and the last correction as error proxy.
    """
    table = [list(values)]
    for j in range(1, len(values)):
        prev = table[-1]
        f = ratio ** j
        table.append([prev[i + 1] + (prev[i + 1] - prev[i]) / (f - 1.0)
                      for i in range(len(prev) - 1)])
    best = table[-1][0]
    err = abs(best - table[-2][-1]) if len(table) > 1 else math.inf
    return best, err


def phi_upper_limit(
    profile: WarpingProfile,
    eps: Optional[float] = None,
    levels: int = 5,
    tol: float = DEFAULT_TOL,
    analysis: Optional[ProfileAnalysis] = None,
) -> BoundaryValue:
    """phi(m(0)-) by Richardson extrapolation over nu = m0 (1 - 2^-k eps).

    The small-oscillation value pi / (m0 sqrt(K0)) is attached for comparison
    when K0 > 0.
    """
    an = analysis or cached_analysis(profile)
    if eps is None:
        eps = min(0.05, 0.1 * (an.m0 - an.inf_m) / an.m0)
    nus = [an.m0 * (1.0 - eps * 2.0 ** -k) for k in range(levels)]
    res = [phi(profile, nu, tol, analysis=an) for nu in nus]
    value, err = richardson([r.value for r in res])
    err += sum(r.est_error for r in res)
    asym = math.pi / (an.m0 * math.sqrt(an.K0)) if an.K0 > 0 else None
    return BoundaryValue(value, err, True, tuple(zip(nus, (r.value for r in res))), asym)


def phi_lower_limit(
    profile: WarpingProfile,
    delta: float = 1e-6,
    tol: float = 1e-5,
    analysis: Optional[ProfileAnalysis] = None,
) -> BoundaryValue:
    """phi just above inf m, at nu = inf m + delta (m0 - inf m).

    For a finite t0 the true limit diverges (the geodesic spirals onto the
    critical parallel); the returned value is only the one-sided sample.
    m - nu cancels in double precision next to the neck, hence the loose
    default tol.
    """
    an = analysis or cached_analysis(profile)
    nu = an.inf_m + delta * (an.m0 - an.inf_m)
    r = phi(profile, nu, tol, analysis=an)
    return BoundaryValue(r.value, r.est_error, True, ((nu, r.value),))


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------

@dataclass
class PhiTable:
    nu_grid: np.ndarray
    phi_values: np.ndarray
    l_values: np.ndarray
    est_error: np.ndarray
    est_error_l: np.ndarray
    monotone: bool
    l_monotone: bool
    partial: bool = False
    failures: List[str] = field(default_factory=list)

    COLUMNS = ("nu", "phi", "l", "est_err_phi", "est_err_l")

    def rows(self):
        return zip(self.nu_grid, self.phi_values, self.l_values,
                   self.est_error, self.est_error_l)

    def to_dict(self) -> dict:
        return {
            "columns": list(self.COLUMNS),
            "rows": [[float(v) for v in row] for row in self.rows()],
            "monotone": self.monotone,
            "l_monotone": self.l_monotone,
            "partial": self.partial,
            "failures": list(self.failures),
        }

    def to_csv(self, fmt=lambda x: format(float(x), ".17g")) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for row in self.rows():
            w.writerow([fmt(v) for v in row])
        return buf.getvalue()


def monotonicity_violations(values, errors) -> List[int]:
    """Indices i with values[i+1] > values[i] + errors[i] + errors[i+1]."""
    v = np.asarray(values, dtype=float)
    e = np.asarray(errors, dtype=float)
    ok = np.isfinite(v)
    bad = (v[1:] > v[:-1] + e[:-1] + e[1:]) & ok[1:] & ok[:-1]
    return [int(i) for i in np.flatnonzero(bad)]


def middle_band(analysis: ProfileAnalysis, fraction: float = 0.8):
    """Central ``fraction`` of (inf m, m0)."""
    span = analysis.m0 - analysis.inf_m
    pad = 0.5 * (1.0 - fraction) * span
    return analysis.inf_m + pad, analysis.m0 - pad


def build_phi_table(
    profile: WarpingProfile,
    nu_min: float,
    nu_max: float,
    n: int,
    tol: float = DEFAULT_TOL,
    analysis: Optional[ProfileAnalysis] = None,
) -> PhiTable:
    """Tabulate phi and l on a uniform nu grid and flag monotonicity."""
    an = analysis or cached_analysis(profile)
    if n < 2:
        raise ValueError("n must be at least 2")
    if not (an.inf_m < nu_min < nu_max < an.m0):
        raise DomainError(
            f"need inf m < nu_min < nu_max < m0, got {nu_min!r}, {nu_max!r} "
            f"with ({an.inf_m!r}, {an.m0!r})"
        )
    grid = np.linspace(nu_min, nu_max, n)
    ph = np.full(n, np.nan)
    ll = np.full(n, np.nan)
    eph = np.full(n, np.nan)
    el = np.full(n, np.nan)
    failures = []
    for i, nu in enumerate(grid):
        try:
            ph[i], eph[i] = phi(profile, nu, tol, analysis=an)
            ll[i], el[i] = geodesic_length_l(profile, nu, tol, analysis=an)
        except Exception as exc:  # recorded per entry; the table is marked partial
            failures.append(f"nu={nu!r}: {exc}")
    monotone = not monotonicity_violations(ph, eph)
    strict = ph[1:] < ph[:-1] - (eph[1:] + eph[:-1])
    l_ok = ll[1:] < ll[:-1]
    l_monotone = bool(np.all(l_ok[strict]))
    return PhiTable(grid, ph, ll, eph, el, monotone, l_monotone,
                    bool(failures), failures)
