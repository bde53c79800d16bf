"""
Pathwise solution of the random time-change system ``tau' = x + Zcal(tau)``.

The diagonal part of every positive component is a one-dimensional problem
``tau_i' = x_i + g(tau_i)`` with ``g`` piecewise linear between nodes and jump
times. It is solved exactly by inverting ``A(s) = int ds / (x + g)``
segment by segment. The off-diagonal increasing parts are replaced by their
dyadic lower/upper approximants, which are piecewise constant, so the full
system is a finite pasting of diagonal solutions. Refining the dyadic level
squeezes the lower and upper solutions together.
"""

from __future__ import annotations

import logging
import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .levy import CadlagPath, HorizonExceeded, SplitPath, dyadic_approximant

log = logging.getLogger(__name__)

DEFAULT_TAU_TOL = 1e-4
DEFAULT_LEVEL0 = 4
DEFAULT_LEVEL_CAP = 22
DEFAULT_PASTE_CAP = 10**6
POSITIVITY_SLACK = 1e-10

# segment kinds
_REGULAR, _SQRT_HIT, _LINEAR_APPROACH, _STUCK = 0, 1, 2, 3


class PastingLimitExceeded(RuntimeError):
    pass


class ConvergenceFailure(RuntimeError):
    def __init__(self, level, gap):
        super().__init__(f"dyadic level {level} reached with sandwich gap {gap:.3e}")
        self.level = level
        self.gap = gap


class PositivityError(RuntimeError):
    pass


def _log1p_ratio(z):
    """``log1p(z) / z`` with the removable singularity at 0."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-8
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 - 0.5 * z, np.log1p(safe) / safe)


def _expm1_ratio(z):
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-8
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 + 0.5 * z, np.expm1(safe) / safe)


def _durations(a, b, L, diffusive):
    """Traversal time of segments whose field goes linearly from ``a`` to ``b``.

    A field reaching zero inside a segment is absorbing. For a diffusive
    coordinate the approach to zero is modelled as a square-root profile, which
    is hit in finite time ``2 L* / a``; otherwise the linear profile is only
    approached asymptotically.
    """
    dur = np.full(a.shape, np.inf)
    kind = np.full(a.shape, _STUCK, dtype=np.int8)
    live = a > 0
    reg = live & (b > 0)
    if np.any(reg):
        ar = a[reg]
        dur[reg] = L[reg] / ar * _log1p_ratio((b[reg] - ar) / ar)
        kind[reg] = _REGULAR
    cross = live & (b <= 0)
    if np.any(cross):
        if diffusive:
            dur[cross] = 2.0 * L[cross] / (a[cross] - b[cross])
            kind[cross] = _SQRT_HIT
        else:
            kind[cross] = _LINEAR_APPROACH
    return dur, kind


def _duration(a, b, L, diffusive):
    """Scalar version of ``_durations``."""
    if a <= 0:
        return math.inf, _STUCK
    if b > 0:
        z = (b - a) / a
        ratio = 1.0 - 0.5 * z if abs(z) < 1e-8 else math.log1p(z) / z
        return L / a * ratio, _REGULAR
    if diffusive:
        return 2.0 * L / (a - b), _SQRT_HIT
    return math.inf, _LINEAR_APPROACH


class DiagonalProfile:
    """One-dimensional cadlag profile, piecewise linear between ``bounds``.

    Segment ``k`` is ``[bounds[k], bounds[k+1])`` with right value ``ga[k]`` at
    its start and left value ``gb[k]`` at its end. Jumps sit on boundaries.
    """

    def __init__(self, bounds, ga, gb, diffusive=False):
        self.bounds = np.asarray(bounds, dtype=float)
        self.ga = np.asarray(ga, dtype=float)
        self.gb = np.asarray(gb, dtype=float)
        self.diffusive = bool(diffusive)

    @classmethod
    def from_arrays(cls, nodes, values, jump_times=(), jump_sizes=(), diffusive=False, extra_bounds=()):
        nodes = np.asarray(nodes, dtype=float)
        values = np.asarray(values, dtype=float)
        jt = np.asarray(jump_times, dtype=float)
        js = np.asarray(jump_sizes, dtype=float)
        extra = np.asarray(extra_bounds, dtype=float)
        inside = lambda v: v[(v > nodes[0]) & (v < nodes[-1])]
        bounds = np.union1d(nodes, np.concatenate([inside(jt), inside(extra)]))
        cont = np.interp(bounds, nodes, values)
        cum = np.concatenate([[0.0], np.cumsum(js)])
        jr = cum[np.searchsorted(jt, bounds, side="right")]
        return cls(bounds, cont[:-1] + jr[:-1], cont[1:] + jr[:-1], diffusive)

    @classmethod
    def from_split(cls, sp: SplitPath):
        grid, jt, js = sp.tilde.coordinate(sp.index)
        nodes = np.arange(grid.shape[0]) * sp.tilde.mesh
        # every jump of the full driver is a boundary so that X jumps land on
        # exact segment ends
        return cls.from_arrays(nodes, grid, jt, js, sp.diffusive, extra_bounds=sp.parent.jump_times)

    @property
    def end(self):
        return float(self.bounds[-1])

    def value(self, s):
        s = np.asarray(s, dtype=float)
        k = np.clip(np.searchsorted(self.bounds, s, side="right") - 1, 0, len(self.ga) - 1)
        L = self.bounds[k + 1] - self.bounds[k]
        return self.ga[k] + (self.gb[k] - self.ga[k]) * (s - self.bounds[k]) / L


@dataclass
class Walk:
    """Diagonal solution from ``tau0`` with constant shift ``x``, segment by segment.

    Times are measured from the start of the walk.
    """

    tau0: float
    lo: np.ndarray
    L: np.ndarray
    a: np.ndarray
    b: np.ndarray
    dur: np.ndarray
    kind: np.ndarray
    cum: np.ndarray  # time at the start of each segment
    reached: bool = False  # the target position was reached
    absorbed_time: float = math.inf
    absorbed_pos: float = math.nan

    @property
    def total_time(self):
        """Time to traverse every recorded segment (inf when absorbed)."""
        if not self.dur.size:
            return 0.0
        return float(self.cum[-1] + self.dur[-1])

    def position(self, e):
        e = np.asarray(e, dtype=float)
        if not self.lo.size:
            return np.full(e.shape, self.tau0)
        j = np.clip(np.searchsorted(self.cum, e, side="right") - 1, 0, self.lo.size - 1)
        el = np.maximum(e - self.cum[j], 0.0)
        lo, L, a, b, kind, dur = self.lo[j], self.L[j], self.a[j], self.b[j], self.kind[j], self.dur[j]
        el = np.minimum(el, dur)
        out = np.array(lo, dtype=float, copy=True)
        lin = (kind == _REGULAR) | (kind == _LINEAR_APPROACH)
        if np.any(lin):
            c = (b[lin] - a[lin]) / L[lin]
            out[lin] = lo[lin] + a[lin] * el[lin] * _expm1_ratio(c * el[lin])
        hit = kind == _SQRT_HIT
        if np.any(hit):
            Lx = L[hit] * a[hit] / (a[hit] - b[hit])
            frac = np.clip(1.0 - a[hit] * el[hit] / (2.0 * Lx), 0.0, 1.0)
            out[hit] = lo[hit] + Lx * (1.0 - frac * frac)
        # segments traversed completely end exactly on their right boundary
        full = (kind == _REGULAR) & (el >= dur)
        out[full] = lo[full] + L[full]
        return out

    def position_at(self, e):
        """Scalar ``position``."""
        n = self.lo.size
        if not n:
            return self.tau0
        j = min(max(bisect_right(self.cum, e) - 1, 0), n - 1)
        kind = self.kind[j]
        dur = self.dur[j]
        el = min(max(e - self.cum[j], 0.0), dur)
        lo, L, a, b = self.lo[j], self.L[j], self.a[j], self.b[j]
        if kind == _REGULAR:
            if el >= dur:
                return float(lo + L)
        elif kind == _STUCK:
            return float(lo)
        elif kind == _SQRT_HIT:
            Lx = L * a / (a - b)
            frac = min(max(1.0 - a * el / (2.0 * Lx), 0.0), 1.0)
            return float(lo + Lx * (1.0 - frac * frac))
        z = (b - a) / L * el
        ratio = 1.0 + 0.5 * z if abs(z) < 1e-8 else math.expm1(z) / z
        return float(lo + a * el * ratio)

    def time_at(self, s):
        """Time at which the walk reaches position ``s`` (inf if never)."""
        s = float(s)
        if s <= self.tau0:
            return 0.0
        if not self.lo.size:
            return math.inf
        j = int(np.searchsorted(self.lo, s, side="right") - 1)
        lo, L, a, b, kind = self.lo[j], self.L[j], self.a[j], self.b[j], self.kind[j]
        if s >= lo + L:
            return math.inf if j == self.lo.size - 1 and not self.reached else float(self.cum[j] + self.dur[j])
        p = s - lo
        if kind == _STUCK:
            return math.inf
        if kind == _SQRT_HIT:
            Lx = L * a / (a - b)
            if p >= Lx:
                return math.inf
            return float(self.cum[j] + 2.0 * Lx / a * (1.0 - math.sqrt(1.0 - p / Lx)))
        bp = a + (b - a) * p / L
        if bp <= 0:
            return math.inf
        return float(self.cum[j] + p / a * _log1p_ratio((bp - a) / a))


def walk(profile: DiagonalProfile, x, tau0, until_time=None, until_pos=None, limit=None, block=None) -> Walk:
    """Advance the diagonal solution until a time span elapses or a position is reached.

    Raises HorizonExceeded if the profile (or ``limit``) ends first and the
    solution is not absorbed before that.
    """
    if block is None:
        w = _walk_short(profile, x, tau0, until_time, until_pos, limit)
        if w is not None:
            return w
        block = 16 if until_pos is not None else 256
    end = profile.end if limit is None else min(profile.end, limit)
    cap = end if until_pos is None else min(end, until_pos)
    bounds, ga, gb = profile.bounds, profile.ga, profile.gb
    K = ga.size
    parts = []
    t_acc = 0.0
    r = float(tau0)
    k = int(np.clip(np.searchsorted(bounds, r, side="right") - 1, 0, K - 1))
    reached = False
    absorbed_time, absorbed_pos = math.inf, math.nan
    if (until_pos is not None and until_pos <= r) or (until_time is not None and until_time <= 0):
        reached = until_pos is not None
        empty = np.empty(0)
        return Walk(r, empty, empty, empty, empty, empty, np.empty(0, np.int8), empty, reached)
    while True:
        if r >= cap:
            if until_pos is not None and cap == until_pos:
                reached = True
                break
            raise HorizonExceeded(max(cap * 2.0, cap + 1.0), end)
        idx = np.arange(k, min(k + block, K))
        s0 = bounds[idx]
        s1 = bounds[idx + 1]
        Lf = s1 - s0
        lo = s0.copy()
        lo[0] = r
        hi = np.minimum(s1, cap)
        valid = lo < cap
        idx, s0, s1, Lf, lo, hi = idx[valid], s0[valid], s1[valid], Lf[valid], lo[valid], hi[valid]
        slope = (gb[idx] - ga[idx]) / Lf
        a = x + ga[idx] + slope * (lo - s0)
        a[lo == s0] = x + ga[idx][lo == s0]
        b = x + ga[idx] + slope * (hi - s0)
        b[hi == s1] = x + gb[idx][hi == s1]
        L = hi - lo
        dur, kind = _durations(a, b, L, profile.diffusive)
        cum = t_acc + np.concatenate([[0.0], np.cumsum(dur[:-1])])
        stop = None
        absorbing = np.flatnonzero(kind != _REGULAR)
        if absorbing.size:
            stop = int(absorbing[0])
        if until_time is not None:
            over = np.flatnonzero(cum + dur >= until_time)
            if over.size and (stop is None or over[0] < stop):
                stop = int(over[0])
        if stop is not None:
            sl = slice(0, stop + 1)
            parts.append((lo[sl], L[sl], a[sl], b[sl], dur[sl], kind[sl], cum[sl]))
            kd = kind[stop]
            if kd == _SQRT_HIT:
                absorbed_time = float(cum[stop] + dur[stop])
                absorbed_pos = float(lo[stop] + L[stop] * a[stop] / (a[stop] - b[stop]))
            elif kd == _STUCK:
                absorbed_time = float(cum[stop])
                absorbed_pos = float(lo[stop])
            if until_pos is not None and kd == _REGULAR and hi[stop] >= until_pos:
                reached = True
            break
        parts.append((lo, L, a, b, dur, kind, cum))
        t_acc = float(cum[-1] + dur[-1])
        r = float(hi[-1])
        k = int(idx[-1]) + 1
        block = min(block * 4, 4096)
        if k >= K and r < cap:
            raise HorizonExceeded(max(end * 2.0, end + 1.0), end)
    cols = [np.concatenate(c) for c in zip(*parts)] if parts else [np.empty(0)] * 7
    return Walk(float(tau0), *cols[:5], cols[5].astype(np.int8), cols[6], reached, absorbed_time, absorbed_pos)


def _walk_short(profile, x, tau0, until_time, until_pos, limit, max_segments=8):
    """Scalar ``walk``; None if more than ``max_segments`` segments are needed."""
    end = profile.end if limit is None else min(profile.end, limit)
    cap = end if until_pos is None else min(end, until_pos)
    bounds, ga, gb = profile.bounds, profile.ga, profile.gb
    K = ga.size
    r = float(tau0)
    if (until_pos is not None and until_pos <= r) or (until_time is not None and until_time <= 0):
        return None
    k = min(max(int(np.searchsorted(bounds, r, side="right")) - 1, 0), K - 1)
    rows = []
    t_acc = 0.0
    reached = False
    absorbed_time, absorbed_pos = math.inf, math.nan
    for _ in range(max_segments + 1):
        if r >= cap:
            if until_pos is not None and cap == until_pos:
                reached = True
                break
            raise HorizonExceeded(max(cap * 2.0, cap + 1.0), end)
        if len(rows) == max_segments:
            return None
        s0, s1 = float(bounds[k]), float(bounds[k + 1])
        g0, g1 = float(ga[k]), float(gb[k])
        slope = (g1 - g0) / (s1 - s0)
        a = x + g0 if r == s0 else x + g0 + slope * (r - s0)
        hi = min(s1, cap)
        b = x + g1 if hi == s1 else x + g0 + slope * (hi - s0)
        L = hi - r
        dur, kind = _duration(a, b, L, profile.diffusive)
        rows.append((r, L, a, b, dur, kind, t_acc))
        if kind != _REGULAR:
            if kind == _SQRT_HIT:
                absorbed_time = t_acc + dur
                absorbed_pos = r + L * a / (a - b)
            elif kind == _STUCK:
                absorbed_time, absorbed_pos = t_acc, r
            break
        if until_time is not None and t_acc + dur >= until_time:
            break
        t_acc += dur
        r = hi
        k += 1
        if k >= K and r < cap:
            raise HorizonExceeded(max(end * 2.0, end + 1.0), end)
    lo, L, a, b, dur, kind, cum = (np.array(c) for c in zip(*rows))
    return Walk(float(tau0), lo, L, a, b, dur, kind.astype(np.int8), cum, reached, absorbed_time, absorbed_pos)


@dataclass
class DiagonalSolution:
    """``tau(t)`` on ``[t0, T]`` for a single diagonal equation."""

    t0: float
    T: float
    walk: Walk

    def evaluate(self, t):
        return self.walk.position(np.asarray(t, dtype=float) - self.t0)

    @property
    def absorbed_at(self):
        t = self.t0 + self.walk.absorbed_time
        return t if t <= self.T else None

    def time_at(self, s):
        return self.t0 + self.walk.time_at(s)


def solve_diagonal(profile: DiagonalProfile, x_i, t0, tau0, T) -> DiagonalSolution:
    """Solve ``tau' = x_i + g(tau)``, ``tau(t0) = tau0`` on ``[t0, T]``."""
    if x_i < 0:
        raise ValueError("x_i must be nonnegative")
    return DiagonalSolution(t0, T, walk(profile, x_i, tau0, until_time=T - t0))


# ---------------------------------------------------------------------------
# pasted solutions
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    """Continuous time change for each positive component, stored as walk pieces."""

    T: float
    starts: list  # starts[i]: array of piece start times for component i
    walks: list  # walks[i]: list of Walk

    @property
    def m(self):
        return len(self.walks)

    def evaluate(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((t.size, self.m))
        for i in range(self.m):
            starts = self.starts[i]
            p = np.searchsorted(starts, t, side="right") - 1
            p = np.clip(p, 0, len(starts) - 1)
            pieces = np.unique(p)
            if pieces.size * 4 > t.size:
                walks = self.walks[i]
                out[:, i] = [walks[q].position_at(tt - starts[q]) for q, tt in zip(p.tolist(), t.tolist())]
                continue
            for q in pieces:
                sel = p == q
                out[sel, i] = self.walks[i][q].position(t[sel] - starts[q])
        return out

    def time_at(self, i, s):
        """First time at which component ``i`` reaches internal time ``s``."""
        starts, walks = self.starts[i], self.walks[i]
        tau_starts = [w.tau0 for w in walks]
        q = int(np.searchsorted(tau_starts, s, side="left")) - 1
        # a piece may start exactly at s; then its start time is the answer
        if q + 1 < len(walks) and tau_starts[q + 1] == s:
            return float(starts[q + 1])
        q = max(q, 0)
        return float(starts[q] + walks[q].time_at(s))

    def absorbed_at(self, i):
        t = self.starts[i][-1] + self.walks[i][-1].absorbed_time
        return float(t) if t <= self.T else None


@dataclass
class TimeChangeSolution:
    output_grid: np.ndarray
    tau: np.ndarray  # shape (len(output_grid), m)
    trajectory: Trajectory
    level: int
    direction: str = "up"
    gap: float = 0.0
    n_pastes: int = 0
    n_bumps: int = 0
    paste_times: np.ndarray = field(default_factory=lambda: np.empty(0))


def _tie(t_hit, t_star):
    return t_hit <= t_star + 4 * np.finfo(float).eps * max(1.0, abs(t_star))


def solve_pasted(drivers, x, level, direction, T, times=None, paste_cap=DEFAULT_PASTE_CAP) -> TimeChangeSolution:
    """Pasting of diagonal solutions with the off-diagonal parts frozen at dyadic levels.

    ``drivers[i]`` is the split path of the i-th positive driver. Between two
    change points of the approximants the system is decoupled; at each change
    the crossing components restart with the bumped shift.
    """
    m = len(drivers)
    x = np.asarray(x, dtype=float).copy()
    if x.shape != (m,) or np.any(x < 0):
        raise ValueError("x must be a nonnegative vector with one entry per driver")
    profiles = [DiagonalProfile.from_split(sp) for sp in drivers]
    approx = [dyadic_approximant(sp, level, direction) for sp in drivers]
    events = [ap.change_points() for ap in approx]
    limits = [min(p.end, ap.horizon) for p, ap in zip(profiles, approx)]
    C = x + sum(ap.initial() for ap in approx)
    tau = np.zeros(m)
    t = 0.0
    ptr = [0] * m
    starts: list[list[float]] = [[] for _ in range(m)]
    walks: list[list[Walk]] = [[] for _ in range(m)]
    t_hit = [math.inf] * m
    cover = [0.0] * m  # time up to which the current piece is known
    stale = [True] * m
    sig = [math.inf] * m
    pastes = bumps = 0
    paste_times = []

    def add_piece(i, t0, w):
        starts[i].append(t0)
        walks[i].append(w)

    def absorbing(w):
        return w.kind.size and w.kind[-1] != _REGULAR

    while True:
        for i in range(m):
            if not stale[i]:
                continue
            et = events[i][0]
            sig[i] = float(et[ptr[i]]) if ptr[i] < et.size else math.inf
            if math.isfinite(sig[i]):
                w = walk(profiles[i], C[i], tau[i], until_pos=sig[i], limit=limits[i])
                if not w.reached and not absorbing(w):
                    raise HorizonExceeded(limits[i] * 2.0, limits[i])
                t_hit[i] = t + w.total_time if w.reached else math.inf
                cover[i] = t_hit[i]
                add_piece(i, t, w)
                stale[i] = False
            else:
                t_hit[i] = math.inf
        t_star = min(t_hit)
        t_lim = min(T, t_star)
        # components without pending change points only advance as far as needed
        for i in range(m):
            if math.isfinite(sig[i]) or (not stale[i] and cover[i] >= t_lim):
                continue
            if stale[i]:
                t0, r0 = t, tau[i]
            else:
                t0 = cover[i]
                r0 = walks[i][-1].position_at(t0 - starts[i][-1])
            w = walk(profiles[i], C[i], r0, until_time=t_lim - t0, limit=limits[i])
            add_piece(i, t0, w)
            cover[i] = math.inf if absorbing(w) else t_lim
            stale[i] = False
        if t_star >= T:
            break
        crossing = [i for i in range(m) if _tie(t_hit[i], t_star)]
        for i in range(m):
            if i in crossing:
                tau[i] = sig[i]
            else:
                tau[i] = walks[i][-1].position_at(t_star - starts[i][-1])
        C_old = C.copy()
        for k in crossing:
            delta = events[k][1][ptr[k]]
            C = C + delta
            ptr[k] += 1
            bumps += int(np.any(delta != 0))
        for i in range(m):
            if i in crossing or C[i] != C_old[i]:
                stale[i] = True
        t = t_star
        pastes += 1
        paste_times.append(t)
        if pastes > paste_cap:
            raise PastingLimitExceeded(f"more than {paste_cap} pastes on [0, {T}] at level {level}")
    traj = Trajectory(T, [np.asarray(s) for s in starts], walks)
    grid = default_grid(T) if times is None else np.asarray(times, dtype=float)
    return TimeChangeSolution(
        grid, traj.evaluate(grid), traj, level, direction, 0.0, pastes, bumps, np.asarray(paste_times)
    )


def default_grid(T, n=512):
    return np.linspace(0.0, T, n)


def _is_trivial(drivers):
    """True when every increasing part vanishes on the positive coordinates."""
    for sp in drivers:
        others = [k for k in range(sp.m) if k != sp.index]
        if not others:
            continue
        nt = sp.notilde
        if nt.grid_values[:, others].any() or nt.jump_sizes[:, others].any():
            return False
    return True


def solve_converged(
    drivers,
    x,
    T,
    tol=DEFAULT_TAU_TOL,
    times=None,
    level0=DEFAULT_LEVEL0,
    level_cap=DEFAULT_LEVEL_CAP,
    paste_cap=DEFAULT_PASTE_CAP,
) -> TimeChangeSolution:
    """Refine the dyadic level until the lower and upper solutions are ``tol`` apart.

    Returns the lower solution with the achieved gap recorded.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if _is_trivial(drivers):
        sol = solve_pasted(drivers, x, level0, "up", T, times, paste_cap)
        sol.gap = 0.0
        return sol
    prev_up = prev_down = None
    gap = math.inf
    for level in range(level0, level_cap + 1):
        up = solve_pasted(drivers, x, level, "up", T, times, paste_cap)
        down = solve_pasted(drivers, x, level, "down", T, times, paste_cap)
        slack = 1e-9 * max(1.0, float(np.max(np.abs(down.tau))))
        if prev_up is not None:
            if np.any(up.tau < prev_up.tau - slack) or np.any(down.tau > prev_down.tau + slack):
                raise AssertionError(f"dyadic refinement lost monotonicity at level {level}")
        gap = float(np.max(down.tau - up.tau))
        log.debug("level %d: gap %.3e, pastes %d/%d", level, gap, up.n_pastes, down.n_pastes)
        if gap <= tol:
            up.gap = gap
            return up
        prev_up, prev_down = up, down
    raise ConvergenceFailure(level_cap, gap)


# ---------------------------------------------------------------------------
# assembly of the process
# ---------------------------------------------------------------------------


@dataclass
class ProcessPath:
    """Process values on a strictly increasing grid; ``X_left`` holds left limits."""

    output_grid: np.ndarray
    X: np.ndarray
    X_left: np.ndarray
    x0: np.ndarray
    tau: np.ndarray
    absorbed_at: list
    events: np.ndarray  # True where the process jumps
    m: int
    clamped: int = 0
    warnings: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.X.shape[1]

    def at(self, t):
        """Values at times that belong to the output grid."""
        idx = np.searchsorted(self.output_grid, t)
        if np.any(self.output_grid[np.clip(idx, 0, self.output_grid.size - 1)] != t):
            raise KeyError("requested time not on the output grid")
        return self.X[idx]


def assemble(drivers: list[CadlagPath], sol: TimeChangeSolution, x0, include_jumps=True) -> ProcessPath:
    """``X(t) = x0 + sum_k Z^(k)(tau^(k)(t))`` on the output grid.

    With ``include_jumps`` the grid is enlarged by every time at which a time
    change crosses a jump of its driver, and left limits are recorded there.
    """
    x0 = np.asarray(x0, dtype=float)
    m = len(drivers)
    traj = sol.trajectory
    T = traj.T
    grid = sol.output_grid
    tau = sol.tau
    pinned = []  # (time, component, exact internal time)
    if include_jumps:
        tau_T = traj.evaluate([T])[0]
        for k, Z in enumerate(drivers):
            for s in Z.jump_times[Z.jump_times <= tau_T[k]]:
                t = traj.time_at(k, float(s))
                if 0 < t <= T:
                    pinned.append((t, k, float(s)))
        if pinned:
            extra = np.array([p[0] for p in pinned])
            grid = np.union1d(grid, extra)
            tau = traj.evaluate(grid)
    tau = np.maximum.accumulate(tau, axis=0)
    events = np.zeros(grid.size, bool)
    for t, k, s in pinned:
        j = int(np.searchsorted(grid, t))
        tau[j, k] = s
        events[j] = True
    X = np.tile(x0, (grid.size, 1))
    X_left = X.copy()
    for k, Z in enumerate(drivers):
        X += Z.evaluate(tau[:, k])
        X_left += Z.left_limit(tau[:, k])
    clamped = 0
    pos = X[:, :m]
    if np.any(pos < -POSITIVITY_SLACK) or np.any(X_left[:, :m] < -POSITIVITY_SLACK):
        raise PositivityError(f"positive component below {-POSITIVITY_SLACK}: min {pos.min():.3e}")
    for arr in (X, X_left):
        neg = arr[:, :m] < 0
        if np.any(neg):
            clamped += int(neg.sum())
            arr[:, :m][neg] = 0.0
    if clamped:
        log.info("clamped %d slightly negative values to zero", clamped)
    absorbed = [traj.absorbed_at(i) for i in range(m)]
    return ProcessPath(grid, X, X_left, x0, tau, absorbed, events, m, clamped)
