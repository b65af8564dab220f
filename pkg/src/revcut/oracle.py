"""Brute-force cut points from a dense fan of geodesics.

Nothing here touches the half-period integrals: distances come from the
integrator alone.  Each recorded sample of each fan geodesic is
extrapolated to the centre of its (t, theta) cell with the first-order
estimate

    s + <gamma'(s), c - x>_g = s + dt/ds * (t_c - t) + nu * (theta_c - theta)

and the estimates are kept per cell and per arrival-direction bin.  A
geodesic stops minimising where a family arriving from a clearly different
direction (more than ``exclude`` bins away) reaches the same cell no later
than it does; the crossing of that length difference through zero is the
empirical cut point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .cutlocus import CutKind, CutLocusDescription, classify
from .errors import ResolutionError
from .geodesics import DEFAULT_STEP, GeodesicTrace, integrate_batch
from .profile import WarpingProfile, cached_analysis
from .quadrature import geodesic_length_l

TWO_PI = 2.0 * math.pi

DEFAULT_FAN = 2000
DEFAULT_SPATIAL_EPS = 1e-2
DEFAULT_LENGTH_EPS = 1e-3
DEFAULT_WINDOW = 3.0


@dataclass
class Fan:
    profile: WarpingProfile
    t_q: float
    theta_q: float
    etas: np.ndarray
    traces: List[GeodesicTrace]

    def __len__(self):
        return len(self.traces)

    @property
    def nus(self) -> np.ndarray:
        return np.array([tr.nu for tr in self.traces])

    @property
    def spacing(self) -> float:
        return self.traces[0].step


def fan_angles(n: int) -> np.ndarray:
    """n directions -pi + 2 pi k / n, k = 1..n; contains 0, pi and +-pi/2 when 4 | n."""
    return -math.pi + TWO_PI * np.arange(1, n + 1) / n


def build_fan(
    profile: WarpingProfile,
    q: Tuple[float, float],
    n_geodesics: int = DEFAULT_FAN,
    s_max: float = 12.0,
    step: float = DEFAULT_STEP,
    record_every: int = 10,
) -> Fan:
    """Geodesics from q in n uniformly spaced directions eta (angle to d/dtheta)."""
    if n_geodesics < 4:
        raise ValueError("n_geodesics must be at least 4")
    t_q, theta_q = q
    etas = fan_angles(n_geodesics)
    c, s = np.cos(etas), np.sin(etas)
    # exact zeros for the meridian and equator-tangent directions
    c[np.abs(c) < 1e-12] = 0.0
    s[np.abs(s) < 1e-12] = 0.0
    nus = float(profile.m(t_q)) * c
    traces = integrate_batch(profile, t_q, theta_q, s, nus, s_max, step, record_every)
    return Fan(profile, float(t_q), float(theta_q), etas, traces)


# ---------------------------------------------------------------------------
# Distance field
# ---------------------------------------------------------------------------

@dataclass
class DistanceField:
    t_edges: np.ndarray
    theta_edges: np.ndarray
    dist: np.ndarray  # (nt, ntheta): min arrival estimate at the cell centre
    argmin_count: np.ndarray  # distinct fan geodesics within length_eps of dist
    by_direction: np.ndarray  # (nt * ntheta, bins)
    source: np.ndarray  # sample achieving each by_direction entry, -1 if none
    cover: bool

    @property
    def t_centres(self):
        return 0.5 * (self.t_edges[1:] + self.t_edges[:-1])

    @property
    def theta_centres(self):
        return 0.5 * (self.theta_edges[1:] + self.theta_edges[:-1])

    @property
    def cell_radius(self) -> float:
        return 0.5 * math.hypot(self.t_edges[1] - self.t_edges[0],
                                self.theta_edges[1] - self.theta_edges[0])


@dataclass
class _Samples:
    """Flattened, refined fan samples in trace-major, arclength order."""
    trace: np.ndarray
    S: np.ndarray
    T: np.ndarray
    TH: np.ndarray
    V: np.ndarray
    nu: np.ndarray  # per trace
    cell: np.ndarray
    bin: np.ndarray
    est: np.ndarray
    valid: np.ndarray
    tracked: np.ndarray  # sample lies before the trace left the window or outran the lattice
    it: np.ndarray
    ith: np.ndarray


MAX_REFINE = 16


def _refine(fan, cell, theta_scale):
    """Insert linear sub-samples so consecutive points are at most half a cell apart.

    Segments needing more than MAX_REFINE pieces (deep cusps where theta spins
    faster than the lattice can follow) are refined to the cap and flagged.
    """
    S = fan.traces[0].s
    T = np.stack([tr.t for tr in fan.traces])
    TH = np.stack([tr.theta for tr in fan.traces])
    V = np.stack([tr.dt_ds for tr in fan.traces])
    n, ns = T.shape
    jump = np.maximum(np.abs(np.diff(T, axis=1)), np.abs(np.diff(TH, axis=1)) * theta_scale)
    need = np.ceil(jump / (0.5 * cell)).astype(np.int64)
    coarse = need > MAX_REFINE
    reps = np.clip(need, 1, MAX_REFINE)
    reps = np.concatenate([reps, np.ones((n, 1), dtype=np.int64)], axis=1).ravel()
    coarse = np.concatenate([coarse, np.zeros((n, 1), dtype=bool)], axis=1).ravel()

    seg = np.repeat(np.arange(n * ns), reps)
    start = np.repeat(np.cumsum(reps) - reps, reps)
    frac = (np.arange(seg.size) - start) / np.repeat(reps, reps)
    nxt = np.minimum(seg + 1, n * ns - 1)
    last = (seg % ns) == ns - 1
    nxt = np.where(last, seg, nxt)

    def lerp(a):
        a = a.ravel()
        return a[seg] + frac * (a[nxt] - a[seg])

    Sf = np.broadcast_to(S, (n, ns))
    return (seg // ns, lerp(Sf), lerp(T), lerp(TH), lerp(V), coarse[seg])


def _rasterise(fan, cell, window, cover, theta_window, bins, s_min):
    nt = int(round(2 * window / cell))
    t_edges = np.linspace(-window, window, nt + 1)
    if cover:
        lo, hi = theta_window
        nth = int(round((hi - lo) / cell))
        th_edges = np.linspace(lo, hi, nth + 1)
    else:
        nth = int(round(TWO_PI / cell))
        th_edges = np.linspace(0.0, TWO_PI, nth + 1)
    dt_cell = t_edges[1] - t_edges[0]
    dth_cell = th_edges[1] - th_edges[0]

    trace, S, T, TH, V, coarse = _refine(fan, cell, dt_cell / dth_cell)
    nus = fan.nus
    nu = nus[trace]
    th = TH if cover else np.mod(TH, TWO_PI)

    it = np.floor((T - t_edges[0]) / dt_cell).astype(np.int64)
    ith = np.floor((th - th_edges[0]) / dth_cell).astype(np.int64)
    if not cover:
        ith = np.mod(ith, nth)
    inside = (it >= 0) & (it < nt) & (ith >= 0) & (ith < nth)
    valid = inside & (S >= s_min)
    it = np.clip(it, 0, nt - 1)
    ith = np.clip(ith, 0, nth - 1)
    tc = t_edges[0] + (it + 0.5) * dt_cell
    thc = th_edges[0] + (ith + 0.5) * dth_cell
    dth = thc - th
    if not cover:
        dth = np.mod(dth + math.pi, TWO_PI) - math.pi
    est = S + V * (tc - T) + nu * dth

    # a trace is tracked until its first exit from the window or first
    # unresolved segment; later detections could only be late ones
    lost = (~inside | coarse).astype(np.int64)
    first = np.searchsorted(trace, np.arange(len(nus)))
    lost_before = np.cumsum(lost) - np.repeat(np.cumsum(lost)[first] - lost[first],
                                              np.diff(np.append(first, trace.size)))
    tracked = lost_before == 0

    m = np.asarray(fan.profile.m(T), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        tang = np.where(nu == 0.0, 0.0, nu / m)
    psi = np.arctan2(tang, V)
    b = np.floor((psi + math.pi) / (TWO_PI / bins)).astype(np.int64) % bins

    samples = _Samples(trace, S, T, TH, V, nus, it * nth + ith, b, est, valid, tracked,
                       it, ith)
    return samples, t_edges, th_edges


def _exclusive_min(D, exclude):
    """Per bin, the minimum over bins more than ``exclude`` bins away (circularly).

    Returns the minima and the bin each came from.
    """
    bins = D.shape[1]
    out = np.full_like(D, np.inf)
    arg = np.zeros(D.shape, dtype=np.int64)
    base = np.arange(bins)
    better = np.empty(D.shape, dtype=bool)
    for off in range(exclude + 1, bins - exclude):
        rolled = np.roll(D, -off, axis=1)
        np.less(rolled, out, out=better)
        np.copyto(out, rolled, where=better)
        np.copyto(arg, (base + off) % bins, where=better)
    return out, arg


def distance_field(
    fan: Fan,
    cell: float = DEFAULT_SPATIAL_EPS,
    length_eps: float = DEFAULT_LENGTH_EPS,
    window: float = DEFAULT_WINDOW,
    cover: bool = False,
    theta_window: Tuple[float, float] = (-TWO_PI, TWO_PI),
    bins: int = 72,
    s_min: float = 0.0,
    spread: int = 1,
    _samples: Optional[_Samples] = None,
    _edges=None,
) -> DistanceField:
    """Empirical d(q, .) on a (t, theta) lattice over [-window, window]."""
    if _samples is None:
        smp, t_edges, th_edges = _rasterise(fan, cell, window, cover, theta_window, bins, s_min)
    else:
        smp, (t_edges, th_edges) = _samples, _edges
    nt, nth = len(t_edges) - 1, len(th_edges) - 1
    dt_cell = t_edges[1] - t_edges[0]
    dth_cell = th_edges[1] - th_edges[0]
    D = np.full((nt * nth, bins), np.inf)
    v = smp.valid
    it, ith, est, b = smp.it[v], smp.ith[v], smp.est[v], smp.bin[v]
    V, nu = smp.V[v], smp.nu[smp.trace[v]]
    # each estimate also covers the neighbouring cells, so a family whose
    # rays spread wider than a cell still reaches every cell it sweeps
    for di in range(-spread, spread + 1):
        for dj in range(-spread, spread + 1):
            jt = it + di
            jth = ith + dj
            if cover:
                ok = (jt >= 0) & (jt < nt) & (jth >= 0) & (jth < nth)
            else:
                ok = (jt >= 0) & (jt < nt)
                jth = np.mod(jth, nth)
            e = np.maximum(est[ok] + V[ok] * (di * dt_cell) + nu[ok] * (dj * dth_cell), 0.0)
            np.minimum.at(D, (jt[ok] * nth + jth[ok], b[ok]), e)
    src = np.full(D.shape, -1, dtype=np.int64)
    ids = np.flatnonzero(v)
    for di in range(-spread, spread + 1):
        for dj in range(-spread, spread + 1):
            jt = it + di
            jth = ith + dj
            if cover:
                ok = (jt >= 0) & (jt < nt) & (jth >= 0) & (jth < nth)
            else:
                ok = (jt >= 0) & (jt < nt)
                jth = np.mod(jth, nth)
            e = np.maximum(est[ok] + V[ok] * (di * dt_cell) + nu[ok] * (dj * dth_cell), 0.0)
            c = jt[ok] * nth + jth[ok]
            won = e == D[c, b[ok]]
            src[c[won], b[ok][won]] = ids[ok][won]
    dist = D.min(axis=1)

    near = v & (smp.est <= dist[smp.cell] + length_eps)
    pairs = np.unique(np.stack([smp.cell[near], smp.trace[near]]), axis=1)
    counts = np.bincount(pairs[0], minlength=nt * nth)
    return DistanceField(t_edges, th_edges, dist.reshape(nt, nth),
                         counts.reshape(nt, nth), D, src, cover)


# ---------------------------------------------------------------------------
# Cut points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EmpiricalCutPoint:
    trace_id: int
    nu: float
    s_cut: float
    t: float
    theta: float  # folded into [0, 2 pi) unless the fan was analysed on the cover


def empirical_cut_points(
    fan: Fan,
    epsilon: float = DEFAULT_SPATIAL_EPS,
    length_eps: float = DEFAULT_LENGTH_EPS,
    window: float = DEFAULT_WINDOW,
    cover: bool = False,
    theta_window: Tuple[float, float] = (-TWO_PI, TWO_PI),
    bins: int = 72,
    exclude: int = 1,
    s_min: float = 0.5,
    return_field: bool = False,
):
    """First non-minimising point of every fan geodesic, or nothing for rays.

    ``epsilon`` is the cell size of the spatial lattice; it may not be finer
    than the fan's sample spacing.  A geodesic is only followed while it
    stays inside the window and the lattice resolves it.  Samples closer
    than ``s_min`` to the base point are ignored, so the field returned with
    ``return_field`` does not cover that ball.
    """
    if epsilon < fan.spacing * (1 - 1e-9):
        raise ResolutionError(
            f"epsilon={epsilon!r} is below the sample spacing {fan.spacing!r}"
        )
    smp, t_edges, th_edges = _rasterise(fan, epsilon, window, cover, theta_window, bins, s_min)
    field_ = distance_field(fan, epsilon, length_eps, window, cover, theta_window, bins,
                            s_min, _samples=smp, _edges=(t_edges, th_edges))
    other, other_bin = _exclusive_min(field_.by_direction, exclude)
    # compare at the sample itself: its own distance is s, the competing
    # family's is carried from the cell centre along that family's direction
    src = field_.source[smp.cell, other_bin[smp.cell, smp.bin]]
    src = np.where(src < 0, 0, src)
    tc = t_edges[0] + (smp.it + 0.5) * (t_edges[1] - t_edges[0])
    thc = th_edges[0] + (smp.ith + 0.5) * (th_edges[1] - th_edges[0])
    dth = smp.TH - thc
    if not cover:
        dth = np.mod(dth + math.pi, TWO_PI) - math.pi
    rival = (other[smp.cell, smp.bin] + smp.V[src] * (smp.T - tc)
             + smp.nu[smp.trace[src]] * dth)
    excess = smp.S - rival
    excess[~smp.valid | ~np.isfinite(excess)] = np.nan
    excess[~smp.tracked] = np.nan

    points = []
    bounds = np.searchsorted(smp.trace, np.arange(len(fan) + 1))
    for j in range(len(fan)):
        a, z = bounds[j], bounds[j + 1]
        e = excess[a:z]
        hits = np.flatnonzero(e > length_eps)
        if hits.size == 0:
            continue
        # a sharp sign change right before the hit is a two-minimizer
        # crossing; a slow drift at noise level is resolved at length_eps
        k = hits[0]
        k1 = k
        while k1 > 0 and np.isfinite(e[k1 - 1]) and e[k1 - 1] > 0.0:
            k1 -= 1
        sharp = (k1 > 0 and np.isfinite(e[k1 - 1])
                 and smp.S[a + k] - smp.S[a + k1 - 1] <= 2.0 * epsilon)
        if sharp:
            k0 = k1 - 1
            w = e[k0] / (e[k0] - e[k1])
        elif k > 0 and np.isfinite(e[k - 1]):
            k0, k1 = k - 1, k
            w = (length_eps - e[k0]) / (e[k1] - e[k0])
        else:
            k0 = k1 = k
            w = 0.0
        i0, i1 = a + k0, a + k1
        s_cut = smp.S[i0] + w * (smp.S[i1] - smp.S[i0])
        t = smp.T[i0] + w * (smp.T[i1] - smp.T[i0])
        th = smp.TH[i0] + w * (smp.TH[i1] - smp.TH[i0])
        if not cover:
            th = th % TWO_PI
        points.append(EmpiricalCutPoint(j, float(smp.nu[j]), float(s_cut), float(t), float(th)))
    if return_field:
        return points, field_
    return points

# ---------------------------------------------------------------------------
# Comparison with the closed form
# ---------------------------------------------------------------------------

def _wrap(x):
    return (x + math.pi) % TWO_PI - math.pi


def distance_to_prediction(pred: CutLocusDescription, t: float, theta: float) -> Tuple[float, str]:
    """Coordinate distance from (t, theta) to the predicted cut set on the cylinder."""
    if pred.kind is CutKind.EMPTY_ON_COVER:
        return math.inf, "none"
    best = abs(_wrap(theta - math.pi))
    where = "meridian"
    if pred.kind is CutKind.MERIDIAN_AND_PARALLEL_ARC:
        lo, hi = pred.theta_arc
        th = theta % TWO_PI
        dth = 0.0 if lo <= th <= hi else min(abs(_wrap(th - lo)), abs(_wrap(th - hi)))
        d = math.hypot(t - pred.parallel_level, dth)
        if d < best:
            best, where = d, "arc"
    return best, where


@dataclass
class VerifyReport:
    prediction: CutLocusDescription
    tol_space: float
    entries: List[dict] = field(default_factory=list)
    violations: List[dict] = field(default_factory=list)
    unmatched: List[dict] = field(default_factory=list)
    onset: Optional[dict] = None

    @property
    def max_deviation(self) -> float:
        return max((e["deviation"] for e in self.entries), default=0.0)

    @property
    def ok(self) -> bool:
        return not self.violations and not self.unmatched

    def to_dict(self) -> dict:
        return {
            "prediction": self.prediction.to_dict(),
            "tol_space": self.tol_space,
            "per_trace": self.entries,
            "summary": {
                "n_cut_points": len(self.entries),
                "max_deviation": self.max_deviation,
                "violations": len(self.violations) + len(self.unmatched),
                "off_set": self.violations,
                "unmatched_samples": self.unmatched,
                "onset": self.onset,
            },
        }


def default_meridian_samples(pred: CutLocusDescription, window: float) -> List[float]:
    """Heights on the opposite meridian the empirical set must reach."""
    span = min(1.0, window)
    return [float(x) for x in np.linspace(-span, span, 5)]


def compare(
    prediction: CutLocusDescription,
    empirical: Sequence[EmpiricalCutPoint],
    tol_space: float = 2e-2,
    profile: Optional[WarpingProfile] = None,
    meridian_samples: Optional[Sequence[float]] = None,
) -> VerifyReport:
    """Check empirical cut points against a closed-form description.

    Every empirical point must lie within ``tol_space`` of the predicted set;
    arc endpoints and meridian points at ``meridian_samples`` must each have
    an empirical point within ``tol_space``.  With ``profile`` given, cut
    points on the arc also carry the predicted distance l(|nu|).
    """
    rep = VerifyReport(prediction, tol_space)
    arc = prediction.kind is CutKind.MERIDIAN_AND_PARALLEL_ARC
    an = cached_analysis(profile) if profile is not None else None
    for p in empirical:
        dev, where = distance_to_prediction(prediction, p.t, p.theta)
        entry = {"trace_id": p.trace_id, "nu": p.nu, "s_cut": p.s_cut,
                 "point": [p.t, p.theta], "nearest": where,
                 "predicted_distance": None, "deviation": dev}
        if arc and where == "arc" and an is not None:
            u = prediction.parallel_level
            if an.inf_m < abs(p.nu) <= float(profile.m(u)):
                lval = geodesic_length_l(profile, abs(p.nu), analysis=an).value
                entry["predicted_distance"] = lval
                entry["length_deviation"] = abs(p.s_cut - lval)
        rep.entries.append(entry)
        if not dev <= tol_space:
            rep.violations.append(entry)

    pts = np.array([[p.t, p.theta] for p in empirical]) if empirical else np.zeros((0, 2))

    def nearest(t, theta):
        if not len(pts):
            return math.inf
        d = np.hypot(pts[:, 0] - t, np.abs(_wrap(pts[:, 1] - theta)))
        return float(d.min())

    samples = []
    if arc:
        lo, hi = prediction.theta_arc
        samples += [("arc_start", prediction.parallel_level, lo),
                    ("arc_end", prediction.parallel_level, hi)]
    if prediction.kind is not CutKind.EMPTY_ON_COVER:
        ts = meridian_samples if meridian_samples is not None else default_meridian_samples(
            prediction, 1.0)
        samples += [("meridian", float(t), math.pi) for t in ts]
    for name, t, th in samples:
        d = nearest(t, th)
        if not d <= tol_space:
            rep.unmatched.append({"sample": name, "point": [t, th], "nearest": d})

    if arc:
        u = prediction.parallel_level
        lo = prediction.theta_arc[0]
        on_level = [min(p.theta, TWO_PI - p.theta) for p in empirical
                    if abs(p.t - u) <= tol_space
                    and abs(_wrap(p.theta - math.pi)) > tol_space]
        onset = min(on_level) if on_level else None
        rep.onset = {"expected": lo, "observed": onset,
                     "deviation": None if onset is None else abs(onset - lo)}
    return rep


def verify(
    profile: WarpingProfile,
    t_q: float,
    n_geodesics: int = DEFAULT_FAN,
    s_max: float = 12.0,
    step: float = DEFAULT_STEP,
    epsilon: float = DEFAULT_SPATIAL_EPS,
    length_eps: float = DEFAULT_LENGTH_EPS,
    tol_space: float = 2e-2,
    window: float = DEFAULT_WINDOW,
    strict: bool = True,
    meridian_samples: Optional[Sequence[float]] = None,
    prediction: Optional[CutLocusDescription] = None,
) -> Tuple[VerifyReport, List[EmpiricalCutPoint]]:
    """Classify q = (t_q, 0), shoot a fan from it and compare."""
    pred = prediction or classify(profile, t_q=t_q, strict=strict)
    fan = build_fan(profile, (t_q, 0.0), n_geodesics, s_max, step)
    pts = empirical_cut_points(fan, epsilon, length_eps, window)
    return compare(pred, pts, tol_space, profile, meridian_samples), pts
