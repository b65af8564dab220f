"""Unit-speed geodesics on the cylinder and on its universal cover.

The integrator works on the regular system

    t'' = nu^2 m'(t) / m(t)^3,   theta' = nu / m(t)^2

which is smooth through the turning parallels where t' changes sign.  Steps
are classical RK4 at a fixed arclength step; turning points and parallel
crossings inside a step are located on the cubic Hermite interpolant built
from the states and derivatives at both ends of the step (error O(h^4)).

Everything is vectorised over a batch of geodesics so a fan of thousands of
initial directions costs one numpy pass per step.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, IntegrationAccuracyError, NonArrivalError
from .profile import WarpingProfile, curvature

DEFAULT_STEP = 1e-3
DRIFT_LIMIT = 1e-6


@dataclass(frozen=True)
class GeodesicState:
    s: float
    t: float
    theta: float
    dt_ds: float
    nu: float


class Event(NamedTuple):
    kind: str  # "turn" or "level"
    s: float
    t: float
    theta: float
    dt_ds: float
    level: Optional[float] = None


@dataclass
class GeodesicTrace:
    """Sampled geodesic; arrays share one arclength axis."""

    s: np.ndarray
    t: np.ndarray
    theta: np.ndarray
    dt_ds: np.ndarray
    nu: float
    step: float
    turning_points: List[Tuple[float, float]] = field(default_factory=list)
    events: List[Event] = field(default_factory=list)

    @property
    def total_length(self) -> float:
        return float(self.s[-1])

    @property
    def states(self) -> List[GeodesicState]:
        return [GeodesicState(float(a), float(b), float(c), float(d), self.nu)
                for a, b, c, d in zip(self.s, self.t, self.theta, self.dt_ds)]

    def crossings(self, level: float) -> List[Event]:
        return [e for e in self.events if e.kind == "level" and e.level == level]

    def to_csv(self, fmt=lambda x: format(float(x), ".17g")) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("s", "t", "theta", "dt_ds"))
        for row in zip(self.s, self.t, self.theta, self.dt_ds):
            w.writerow([fmt(v) for v in row])
        return buf.getvalue()


def clairaut_constant(profile: WarpingProfile, t: float, eta: float) -> float:
    """m(t) cos(eta), eta measured from the parallel direction d/dtheta."""
    return float(profile.m(t)) * math.cos(eta)


# ---------------------------------------------------------------------------
# Core stepping
# ---------------------------------------------------------------------------

def _rhs(profile, t, v, nu, nu2, meridian):
    m = np.asarray(profile.m(t), dtype=float)
    mp = np.asarray(profile.m_prime(t), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        inv2 = 1.0 / (m * m)
        dv = nu2 * mp * inv2 / m
        dth = nu * inv2
    if meridian is not None:
        # nu == 0 exactly: m may underflow far out and 0/0 must read as 0
        dv = np.where(meridian, 0.0, dv)
        dth = np.where(meridian, 0.0, dth)
    return v, dv, dth


def _hermite(y0, d0, y1, d1, h, sigma):
    s2 = sigma * sigma
    s3 = s2 * sigma
    return ((2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + sigma) * h * d0
            + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * d1)


def _hermite_root(y0, d0, y1, d1, h):
    f = lambda x: _hermite(y0, d0, y1, d1, h, x)
    f0, f1 = f(0.0), f(1.0)
    if f0 == 0.0:
        return 0.0
    if f1 == 0.0 or f0 * f1 > 0:
        return 1.0
    return brentq(f, 0.0, 1.0, xtol=1e-15, rtol=8.9e-16)


class _Batch:
    """Fixed-step RK4 state for n geodesics sharing one profile."""

    def __init__(self, profile, t0, theta0, v0, nu):
        self.profile = profile
        self.t = np.array(t0, dtype=float)
        self.th = np.array(theta0, dtype=float)
        self.v = np.array(v0, dtype=float)
        self.nu = np.array(nu, dtype=float)
        self.nu2 = self.nu * self.nu
        zero = self.nu == 0.0
        self.meridian = zero if np.any(zero) else None
        self.s = 0.0
        self.d = self._f(self.t, self.v)

    def _f(self, t, v):
        return _rhs(self.profile, t, v, self.nu, self.nu2, self.meridian)

    def step(self, h):
        t, v, th = self.t, self.v, self.th
        k1t, k1v, k1h = self.d
        k2t, k2v, k2h = self._f(t + 0.5 * h * k1t, v + 0.5 * h * k1v)
        k3t, k3v, k3h = self._f(t + 0.5 * h * k2t, v + 0.5 * h * k2v)
        k4t, k4v, k4h = self._f(t + h * k3t, v + h * k3v)
        c = h / 6.0
        old = (t, v, th, self.d)
        self.t = t + c * (k1t + 2 * k2t + 2 * k3t + k4t)
        self.v = v + c * (k1v + 2 * k2v + 2 * k3v + k4v)
        self.th = th + c * (k1h + 2 * k2h + 2 * k3h + k4h)
        self.d = self._f(self.t, self.v)
        self.s += h
        return old

    def locate(self, old, h, i, kind, level=None):
        """Event for geodesic i inside the step that just finished."""
        t0, v0, th0, (dt0, dv0, dh0) = old
        dt1, dv1, dh1 = self.d
        if kind == "turn":
            sig = _hermite_root(v0[i], dv0[i], self.v[i], dv1[i], h)
        else:
            sig = _hermite_root(t0[i] - level, dt0[i], self.t[i] - level, dt1[i], h)
        t = _hermite(t0[i], dt0[i], self.t[i], dt1[i], h, sig)
        th = _hermite(th0[i], dh0[i], self.th[i], dh1[i], h, sig)
        v = _hermite(v0[i], dv0[i], self.v[i], dv1[i], h, sig)
        if kind == "level":
            t = level
        return Event(kind, self.s - h + sig * h, float(t), float(th), float(v), level)


def _speed_drift(profile, t, v, nu):
    m = np.asarray(profile.m(t), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        tang = np.where(nu == 0.0, 0.0, np.square(nu / m))
    return np.abs(np.square(v) + tang - 1.0)


def conservation_drift(profile: WarpingProfile, trace: GeodesicTrace) -> Tuple[float, float]:
    """Worst Clairaut and unit-speed defects along a trace.

    The Clairaut value is m cos(eta) with eta the angle between the
    integrated velocity (t', m theta') and the parallel, i.e.
    m^2 theta' / |gamma'|; it differs from nu only through the speed error.
    """
    m = np.asarray(profile.m(trace.t), dtype=float)
    nu = np.float64(trace.nu)
    tang = np.where(nu == 0.0, 0.0, np.square(nu / m)) if nu != 0.0 else 0.0
    speed = np.sqrt(np.square(trace.dt_ds) + tang)
    clairaut = float(np.max(np.abs(nu / speed - nu)))
    drift = float(np.max(_speed_drift(profile, trace.t, trace.dt_ds, nu)))
    return clairaut, drift


def integrate_batch(
    profile: WarpingProfile,
    t0,
    theta0,
    v0,
    nu,
    s_max: float,
    step: float = DEFAULT_STEP,
    record_every: int = 1,
    levels: Sequence[float] = (),
    check_drift: bool = True,
) -> List[GeodesicTrace]:
    """Integrate n geodesics from arrays of initial data.

    ``v0`` is the initial dt/ds and ``nu`` the Clairaut constant of each
    geodesic; the caller is responsible for v0^2 + (nu/m)^2 = 1.
    """
    if not (s_max > 0 and step > 0):
        raise ValueError("s_max and step must be positive")
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    n = nu.size
    bt = _Batch(profile, np.broadcast_to(t0, n), np.broadcast_to(theta0, n),
                np.broadcast_to(v0, n), nu)
    nsteps = int(math.ceil(s_max / step - 1e-9))
    nrec = nsteps // record_every + 1 + (1 if nsteps % record_every else 0)
    S = np.empty(nrec)
    T = np.empty((nrec, n))
    TH = np.empty((nrec, n))
    V = np.empty((nrec, n))
    S[0], T[0], TH[0], V[0] = 0.0, bt.t, bt.th, bt.v
    events = [[] for _ in range(n)]
    r = 1
    for k in range(1, nsteps + 1):
        old = bt.step(step)
        flips = np.flatnonzero(old[1] * bt.v < 0)
        for i in flips:
            events[i].append(bt.locate(old, step, i, "turn"))
        for lev in levels:
            for i in np.flatnonzero((old[0] - lev) * (bt.t - lev) < 0):
                events[i].append(bt.locate(old, step, i, "level", lev))
        if k % record_every == 0 or k == nsteps:
            S[r], T[r], TH[r], V[r] = bt.s, bt.t, bt.th, bt.v
            r += 1
    if check_drift:
        drift = _speed_drift(profile, T, V, nu[None, :])
        worst = float(np.nanmax(drift)) if drift.size else 0.0
        if not np.isfinite(worst) or worst > DRIFT_LIMIT:
            raise IntegrationAccuracyError(
                f"unit-speed drift {worst:.3g} exceeds {DRIFT_LIMIT:g}; reduce step={step!r}"
            )
    traces = []
    for i in range(n):
        ev = sorted(events[i], key=lambda e: e.s)
        traces.append(GeodesicTrace(
            S[:r].copy(), T[:r, i].copy(), TH[:r, i].copy(), V[:r, i].copy(),
            float(nu[i]), step * record_every,
            [(e.s, e.t) for e in ev if e.kind == "turn"], ev,
        ))
    return traces


def initial_slope(profile: WarpingProfile, t: float, nu: float, sign0: int) -> float:
    m = float(profile.m(t))
    if abs(nu) > m * (1 + 1e-12):
        raise DomainError(f"|nu|={abs(nu)!r} exceeds m({t!r})={m!r}")
    return math.copysign(math.sqrt(max(m * m - nu * nu, 0.0)) / m, sign0)


def integrate(
    profile: WarpingProfile,
    start: Tuple[float, float],
    nu: float,
    sign0: int = 1,
    s_max: float = 10.0,
    step: float = DEFAULT_STEP,
    levels: Sequence[float] = (),
    until: Optional[Callable[[Event], bool]] = None,
    record_every: int = 1,
    check_drift: bool = True,
) -> GeodesicTrace:
    """One geodesic from ``start = (t, theta)`` with Clairaut constant nu.

    ``sign0`` picks the initial sign of dt/ds.  Parallel crossings of each
    value in ``levels`` and all turning points are recorded as events; when
    ``until`` returns True for an event the trace is cut there and ends
    exactly at the event.
    """
    if sign0 not in (1, -1):
        raise ValueError("sign0 must be +1 or -1")
    t_start, th_start = start
    v0 = initial_slope(profile, t_start, nu, sign0)
    if until is None:
        return integrate_batch(profile, t_start, th_start, v0, nu, s_max, step,
                               record_every, levels, check_drift)[0]

    bt = _Batch(profile, [t_start], [th_start], [v0], [nu])
    nsteps = int(math.ceil(s_max / step - 1e-9))
    S, T, TH, V = [0.0], [float(t_start)], [float(th_start)], [v0]
    events: List[Event] = []
    for k in range(1, nsteps + 1):
        old = bt.step(step)
        new = []
        if old[1][0] * bt.v[0] < 0:
            new.append(bt.locate(old, step, 0, "turn"))
        for lev in levels:
            if (old[0][0] - lev) * (bt.t[0] - lev) < 0:
                new.append(bt.locate(old, step, 0, "level", lev))
        new.sort(key=lambda e: e.s)
        hit = None
        for e in new:
            events.append(e)
            if until(e):
                hit = e
                break
        if hit is not None:
            S.append(hit.s)
            T.append(hit.t)
            TH.append(hit.theta)
            V.append(hit.dt_ds)
            break
        if k % record_every == 0:
            S.append(bt.s)
            T.append(float(bt.t[0]))
            TH.append(float(bt.th[0]))
            V.append(float(bt.v[0]))
    trace = GeodesicTrace(np.array(S), np.array(T), np.array(TH), np.array(V),
                          float(nu), step * record_every,
                          [(e.s, e.t) for e in events if e.kind == "turn"], events)
    if check_drift:
        worst = float(np.max(_speed_drift(profile, trace.t, trace.dt_ds, np.float64(nu))))
        if worst > DRIFT_LIMIT:
            raise IntegrationAccuracyError(
                f"unit-speed drift {worst:.3g} exceeds {DRIFT_LIMIT:g}; reduce step={step!r}"
            )
    return trace


# ---------------------------------------------------------------------------
# Returns to a parallel
# ---------------------------------------------------------------------------

class Arrival(NamedTuple):
    delta_theta: float
    arclength: float


@dataclass(frozen=True)
class ReturnPoint:
    """Where alpha (leaving downwards) and beta (leaving upwards) reach t = u."""

    u: float
    nu: float
    alpha: Arrival
    beta: Arrival


def first_return(
    profile: WarpingProfile,
    nu: float,
    sign0: int = 1,
    step: float = DEFAULT_STEP,
    s_max: float = 100.0,
) -> Arrival:
    """theta-advance and arclength from the equator back to the equator."""
    tr = integrate(profile, (0.0, 0.0), nu, sign0, s_max, step, levels=(0.0,),
                   until=lambda e: e.kind == "level")
    hits = tr.crossings(0.0)
    if not hits:
        raise NonArrivalError(f"nu={nu!r}: no return to the equator within s={s_max!r}")
    return Arrival(hits[0].theta, hits[0].s)


def _arrival_after_turn(profile, u, nu, sign0, step, s_max):
    seen_turn = [False]

    def until(e):
        if e.kind == "turn":
            seen_turn[0] = True
            return False
        # beta climbs through t = u before it turns at xi(nu); only the
        # crossing on the way back down counts
        return sign0 < 0 or seen_turn[0]

    tr = integrate(profile, (-u, 0.0), nu, sign0, s_max, step, levels=(u,), until=until)
    last = tr.events[-1] if tr.events else None
    if last is None or last.kind != "level" or not until(last):
        raise NonArrivalError(
            f"nu={nu!r} geodesic from t={-u!r} (sign {sign0:+d}) never reached t={u!r} "
            f"within s={s_max!r}"
        )
    return Arrival(last.theta, last.s)


def return_point(
    profile: WarpingProfile,
    u: float,
    nu: float,
    step: float = DEFAULT_STEP,
    s_max: float = 100.0,
) -> ReturnPoint:
    """Both geodesics from (-u, 0) with constant nu, up to their arrival at t = u."""
    if not u > 0:
        raise DomainError("u must be positive")
    alpha = _arrival_after_turn(profile, u, nu, -1, step, s_max)
    beta = _arrival_after_turn(profile, u, nu, 1, step, s_max)
    return ReturnPoint(u, nu, alpha, beta)


# ---------------------------------------------------------------------------
# Jacobi fields
# ---------------------------------------------------------------------------

def jacobi_first_zeros(
    profile: WarpingProfile,
    traces: Sequence[GeodesicTrace],
    horizon: Optional[float] = None,
    step: Optional[float] = None,
) -> List[Optional[float]]:
    """First s > 0 where J'' + K(t(s)) J = 0, J(0)=0, J'(0)=1 vanishes.

    The geodesic is re-integrated from each trace's initial state together
    with J, at the trace's own step unless ``step`` is given.  None means no
    zero before the horizon (default: each trace's length).
    """
    if not traces:
        return []
    lengths = np.array([tr.total_length for tr in traces])
    if horizon is None:
        horizon = float(lengths.max())
    elif np.any(lengths < horizon * (1 - 1e-12)):
        warnings.warn(
            f"horizon {horizon!r} exceeds trace length {float(lengths.min())!r}; "
            "conjugate-point search is truncated to the trace",
            RuntimeWarning,
            stacklevel=2,
        )
    h = step or min(tr.step for tr in traces)
    h = min(h, DEFAULT_STEP)
    stop = np.minimum(lengths, horizon)
    n = len(traces)
    bt = _Batch(profile, [tr.t[0] for tr in traces], [tr.theta[0] for tr in traces],
                [tr.dt_ds[0] for tr in traces], [tr.nu for tr in traces])
    J = np.zeros(n)
    Jp = np.ones(n)

    def kf(t):
        return np.asarray(curvature(profile, t), dtype=float)

    K = kf(bt.t)
    zeros: List[Optional[float]] = [None] * n
    open_ = np.ones(n, dtype=bool)
    nsteps = int(math.ceil(float(stop.max()) / h - 1e-9))
    for _ in range(nsteps):
        # Jacobi stages need t at the RK4 stage points; advance t, v in lockstep
        t, v = bt.t, bt.v
        k1t, k1v, _ = bt.d
        t2 = t + 0.5 * h * k1t
        k2t, k2v, _ = bt._f(t2, v + 0.5 * h * k1v)
        t3 = t + 0.5 * h * k2t
        k3t, k3v, _ = bt._f(t3, v + 0.5 * h * k2v)
        t4 = t + h * k3t
        K2, K3, K4 = kf(t2), kf(t3), kf(t4)
        a1, b1 = Jp, -K * J
        a2, b2 = Jp + 0.5 * h * b1, -K2 * (J + 0.5 * h * a1)
        a3, b3 = Jp + 0.5 * h * b2, -K3 * (J + 0.5 * h * a2)
        a4, b4 = Jp + h * b3, -K4 * (J + h * a3)
        Jn = J + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        Jpn = Jp + h / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
        s0 = bt.s
        bt.step(h)
        Kn = kf(bt.t)
        hit = open_ & (J * Jn < 0) & (bt.s <= stop + 1e-12)
        for i in np.flatnonzero(hit):
            sig = _hermite_root(J[i], Jp[i], Jn[i], Jpn[i], h)
            zeros[i] = s0 + sig * h
            open_[i] = False
        J, Jp, K = Jn, Jpn, Kn
        open_ &= bt.s < stop
        if not open_.any():
            break
    return zeros


def jacobi_first_zero(
    profile: WarpingProfile,
    trace: GeodesicTrace,
    horizon: Optional[float] = None,
) -> Optional[float]:
    """First conjugate point along ``trace`` (see :func:`jacobi_first_zeros`)."""
    return jacobi_first_zeros(profile, [trace], horizon)[0]
