"""Warping functions m(t) of a cylinder of revolution dt^2 + m(t)^2 dtheta^2.

A :class:`WarpingProfile` carries closed-form first and second derivatives so
that quadrature near the turning parallels does not inherit finite-difference
noise.  :func:`analyze` derives the constants every other module needs (m(0),
inf m, the end t0 of the decreasing region, the curvature zero t1) and checks
the curvature hypotheses on a uniform grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, EvaluationError, ProfileClassError

DEFAULT_T_MAX = 30.0
DEFAULT_GRID_N = 10_000

HYPOTHESIS_FLAGS = (
    "even",
    "positive",
    "K0_positive",
    "K_decreasing",
    "nonpositive_curvature_everywhere",
)


@dataclass(frozen=True)
class WarpingProfile:
    """Radius m(t) of the parallel at height t, with its first two derivatives.

    All three callables accept floats or numpy arrays.
    """

    name: str
    m: Callable
    m_prime: Callable
    m_double_prime: Callable
    params: Tuple[Tuple[str, float], ...] = ()
    # closed-form -m''/m, for profiles whose m underflows inside the window
    K: Optional[Callable] = None

    def param_dict(self) -> Dict[str, float]:
        return dict(self.params)

    def label(self) -> str:
        if not self.params:
            return self.name
        inner = ", ".join(f"{k}={v:g}" for k, v in self.params)
        return f"{self.name}({inner})"


@dataclass(frozen=True)
class ProfileAnalysis:
    m0: float
    inf_m: float
    t0: float  # math.inf when m' < 0 on the whole sampled half-line
    t1: Optional[float]
    K0: float
    hypotheses: Dict[str, bool] = field(hash=False)
    t_max: float = DEFAULT_T_MAX
    grid_n: int = DEFAULT_GRID_N
    # inf m was read off at t_max rather than at a critical point
    inf_m_truncated: bool = False

    @property
    def in_main_class(self) -> bool:
        """Even, positive, K(0) > 0 and K nonincreasing on [0, t_max]."""
        h = self.hypotheses
        return h["even"] and h["positive"] and h["K0_positive"] and h["K_decreasing"]

    @property
    def in_nonpositive_class(self) -> bool:
        h = self.hypotheses
        return h["even"] and h["positive"] and h["nonpositive_curvature_everywhere"]

    def to_dict(self) -> dict:
        return {
            "m0": self.m0,
            "inf_m": self.inf_m,
            "t0": None if math.isinf(self.t0) else self.t0,
            "t1": self.t1,
            "K0": self.K0,
            "hypotheses_ok": dict(self.hypotheses),
            "t_max": self.t_max,
            "grid_n": self.grid_n,
            "inf_m_truncated": self.inf_m_truncated,
        }


# ---------------------------------------------------------------------------
# Gallery
# ---------------------------------------------------------------------------

def _gauss(a: float = 1.0) -> WarpingProfile:
    if a <= 0:
        raise ValueError("gauss: a must be positive")

    def m(t):
        return np.exp(-a * np.square(t))

    def mp(t):
        return -2.0 * a * t * m(t)

    def mpp(t):
        return (4.0 * a * a * np.square(t) - 2.0 * a) * m(t)

    def K(t):
        return 2.0 * a - 4.0 * a * a * np.square(t)

    return WarpingProfile("gauss", m, mp, mpp, (("a", float(a)),), K)


def _sech(b: float = 1.0) -> WarpingProfile:
    if b <= 0:
        raise ValueError("sech: b must be positive")

    def m(t):
        return 1.0 / np.cosh(b * t)

    def mp(t):
        return -b * m(t) * np.tanh(b * t)

    def mpp(t):
        s = m(t)
        return b * b * s * (np.square(np.tanh(b * t)) - np.square(s))

    return WarpingProfile("sech", m, mp, mpp, (("b", float(b)),))


def _logneck() -> WarpingProfile:
    def m(t):
        return 1.0 + 0.5 * np.square(t) - np.log1p(np.square(t))

    def mp(t):
        t2 = np.square(t)
        return t * (t2 - 1.0) / (1.0 + t2)

    def mpp(t):
        t2 = np.square(t)
        return 1.0 - 2.0 * (1.0 - t2) / np.square(1.0 + t2)

    return WarpingProfile("logneck", m, mp, mpp, ())


def _coshneck(c: float = 2.0) -> WarpingProfile:
    if c <= 1:
        raise ValueError("coshneck: c must exceed 1 for positive equatorial curvature")

    def m(t):
        return np.cosh(t) + c / np.cosh(t)

    def mp(t):
        return np.sinh(t) - c * np.tanh(t) / np.cosh(t)

    def mpp(t):
        s = 1.0 / np.cosh(t)
        return np.cosh(t) + c * s * (np.square(np.tanh(t)) - np.square(s))

    return WarpingProfile("coshneck", m, mp, mpp, (("c", float(c)),))


def _catenoid(c: float = 1.0) -> WarpingProfile:
    if c <= 0:
        raise ValueError("catenoid: c must be positive")

    def m(t):
        return np.sqrt(c * c + np.square(t))

    def mp(t):
        return t / m(t)

    def mpp(t):
        return c * c / m(t) ** 3

    return WarpingProfile("catenoid", m, mp, mpp, (("c", float(c)),))


def _flat(r: float = 1.0) -> WarpingProfile:
    if r <= 0:
        raise ValueError("flat: r must be positive")

    def m(t):
        return np.full_like(np.asarray(t, dtype=float), r)[()]

    def zero(t):
        return np.zeros_like(np.asarray(t, dtype=float))[()]

    return WarpingProfile("flat", m, zero, zero, (("r", float(r)),))


GALLERY: Dict[str, Callable[..., WarpingProfile]] = {
    "gauss": _gauss,
    "sech": _sech,
    "logneck": _logneck,
    "coshneck": _coshneck,
    "catenoid": _catenoid,
    "flat": _flat,
}


def get_profile(name: str, **params: float) -> WarpingProfile:
    """Build a gallery profile by name, e.g. ``get_profile("gauss", a=2)``."""
    try:
        factory = GALLERY[name]
    except KeyError:
        raise ValueError(
            f"unknown profile {name!r}; choose from {', '.join(sorted(GALLERY))}"
        ) from None
    try:
        return factory(**{k: float(v) for k, v in params.items()})
    except TypeError as exc:
        raise ValueError(f"bad parameters for profile {name!r}: {exc}") from None


# ---------------------------------------------------------------------------
# Curvature and analysis
# ---------------------------------------------------------------------------

def curvature(profile: WarpingProfile, t):
    """Gaussian curvature -m''(t)/m(t) on the parallel at height t."""
    if profile.K is not None:
        return np.asarray(profile.K(t), dtype=float)[()]
    mpp = np.asarray(profile.m_double_prime(t), dtype=float)
    m = np.asarray(profile.m(t), dtype=float)
    bad = ~(np.isfinite(mpp) & np.isfinite(m))
    if np.any(bad):
        where = np.asarray(t, dtype=float)
        where = where[bad][0] if where.ndim else float(where)
        raise EvaluationError(f"{profile.label()}: non-finite m or m'' at t={where!r}")
    return (0.0 - mpp / m)[()]


def _first_sign_change(values: np.ndarray, grid: np.ndarray):
    """Indices (i, i+1) bracketing each strict sign change, zeros skipped."""
    signs = np.sign(values)
    nz = np.flatnonzero(signs)
    if nz.size < 2:
        return signs, []
    flips = np.flatnonzero(signs[nz[1:]] != signs[nz[:-1]])
    return signs, [(nz[i], nz[i + 1]) for i in flips]


def _positive(m: np.ndarray) -> bool:
    """m > 0, allowing an underflowed tail that decays to exactly zero."""
    if np.all(m > 0):
        return True
    if np.any(m < 0):
        return False
    first = int(np.argmin(m > 0))
    return bool(first > 0 and np.all(m[first:] == 0) and m[first - 1] < 1e-290)


def analyze(
    profile: WarpingProfile,
    t_max: float = DEFAULT_T_MAX,
    grid_n: int = DEFAULT_GRID_N,
) -> ProfileAnalysis:
    """Derive m(0), inf m, t0, t1, K(0) and the hypothesis flags.

    t0 is the unique positive zero of m', ``math.inf`` if m' < 0 throughout
    (0, t_max], and 0.0 if m is nowhere decreasing.  A profile whose m'
    changes sign more than once, or from + to -, raises ProfileClassError.
    """
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    if grid_n < 100:
        raise ValueError("grid_n must be at least 100")

    grid = np.linspace(0.0, t_max, grid_n + 1)
    m = np.asarray(profile.m(grid), dtype=float)
    m_neg = np.asarray(profile.m(-grid), dtype=float)
    mp = np.asarray(profile.m_prime(grid), dtype=float)
    if not (np.all(np.isfinite(m)) and np.all(np.isfinite(mp))):
        bad = grid[~(np.isfinite(m) & np.isfinite(mp))][0]
        raise EvaluationError(f"{profile.label()}: non-finite m or m' at t={bad!r}")
    K = np.asarray(curvature(profile, grid), dtype=float)

    m0 = float(m[0])
    K0 = float(K[0])

    # treat roundoff-level derivatives as zero so m == const has no sign
    mp_clean = np.where(np.abs(mp) <= 1e-14 * (1.0 + np.abs(m)), 0.0, mp)
    signs, changes = _first_sign_change(mp_clean[1:], grid[1:])
    nonzero = signs[signs != 0]
    inf_m_truncated = False
    if len(changes) > 1:
        raise ProfileClassError(
            f"{profile.label()}: m' changes sign {len(changes)} times on (0, {t_max}]; "
            "profile outside the supported classes"
        )
    if len(changes) == 1:
        i, j = changes[0]
        if nonzero[0] > 0:
            raise ProfileClassError(
                f"{profile.label()}: m' turns from increasing to decreasing; "
                "profile outside the supported classes"
            )
        a, b = grid[1:][i], grid[1:][j]
        t0 = brentq(lambda x: float(profile.m_prime(x)), a, b, xtol=1e-14, rtol=8.9e-16)
        inf_m = float(profile.m(t0))
    elif nonzero.size and nonzero[0] < 0:
        t0 = math.inf
        inf_m = float(m[-1])
        inf_m_truncated = True
    else:
        t0 = 0.0
        inf_m = m0

    t1 = None
    upper = t_max if math.isinf(t0) else t0
    inside = (grid > 0) & (grid <= upper)
    if np.any(inside):
        _, kchanges = _first_sign_change(K[inside], grid[inside])
        if kchanges and t0 > 0:
            gi = grid[inside]
            i, j = kchanges[0]
            t1 = brentq(lambda x: float(curvature(profile, x)), gi[i], gi[j],
                        xtol=1e-14, rtol=8.9e-16)

    scale = 1.0 + np.abs(K)
    hypotheses = {
        "even": bool(np.all(np.abs(m - m_neg) <= 1e-12 * (1.0 + np.abs(m)))),
        "positive": _positive(m) and _positive(m_neg),
        "K0_positive": K0 > 0,
        "K_decreasing": bool(np.all(np.diff(K) <= 1e-12 * scale[1:])),
        "nonpositive_curvature_everywhere": bool(np.all(K <= 1e-12)),
    }
    return ProfileAnalysis(
        m0=m0,
        inf_m=inf_m,
        t0=float(t0),
        t1=None if t1 is None else float(t1),
        K0=K0,
        hypotheses=hypotheses,
        t_max=float(t_max),
        grid_n=int(grid_n),
        inf_m_truncated=inf_m_truncated,
    )


@lru_cache(maxsize=64)
def cached_analysis(profile: WarpingProfile) -> ProfileAnalysis:
    """Default-grid analysis, memoised per profile object."""
    return analyze(profile)


def xi(profile: WarpingProfile, nu: float, analysis: Optional[ProfileAnalysis] = None) -> float:
    """Least positive height where m(t) = nu."""
    an = analysis or cached_analysis(profile)
    if nu >= an.m0:
        raise DomainError(f"nu={nu!r} >= m(0)={an.m0!r}: no tangency parallel")
    if nu <= an.inf_m:
        raise DomainError(f"nu={nu!r} <= inf m={an.inf_m!r}: geodesic never turns")
    upper = an.t_max if math.isinf(an.t0) else an.t0
    return brentq(lambda t: float(profile.m(t)) - nu, 0.0, upper,
                  xtol=1e-15, rtol=8.9e-16, maxiter=200)
