"""Graphical construction and replay of the renewal contact process.

The process lives on the integer interval [-L, L].  Every vertex carries
the renewal marks of an independent recovery clock; every ordered pair of
neighbors carries the points of an independent rate-lambda Poisson clock
("arrows", pointing from the source to the target).  A trial freezes all
this randomness in a :class:`GraphicalSample`; evolving an initial
infected set is then a deterministic replay of the merged event stream.

Tie-break: recoveries are processed before arrows at equal timestamps.
Random samples produce ties with probability zero, but hand-built and
lattice-degenerate configurations can hit them, and block arguments over
open time windows need the convention to be exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from numba import njit

from .constants import DEFAULT_MARK_CAP
from .distributions import InterarrivalSpec, sample_renewal_marks_batch
from .errors import BracketError, ValidationError
from .streams import derive_stream

__all__ = [
    "GraphicalSample",
    "Trajectory",
    "SurvivalReport",
    "LambdaCEstimate",
    "build_graphical_sample",
    "assemble_sample",
    "thin_arrows",
    "evolve",
    "has_infection_path",
    "survival_probability",
    "estimate_lambda_c",
]

_Z95 = 1.959963984540054

# event kinds in the merged stream; recovery sorts first at equal times
_KIND_RECOVERY = 0
_KIND_ARROW = 1

# trajectory log entries
EVENT_RECOVERED = 0
EVENT_INFECTED = 1


@dataclass(frozen=True)
class GraphicalSample:
    """Frozen randomness of one finite-box trial.

    Vertex positions -L..L map to indices 0..2L.  Directed edge `i`
    (0 <= i < n-1) points from index i to i+1; edge `n-1+i` points from
    index i+1 to i.  `mark_times`/`mark_ptr` and `arrow_times`/`arrow_ptr`
    are CSR layouts over vertices and directed edges; the `event_*` arrays
    hold the same data merged into one time-sorted stream (recoveries
    before arrows at equal times) so replay is a single linear scan.
    """

    spec: Optional[InterarrivalSpec]
    infection_rate: float
    box_half_width: int
    horizon: float
    seed: Optional[int]
    mark_times: np.ndarray
    mark_ptr: np.ndarray
    arrow_times: np.ndarray
    arrow_ptr: np.ndarray
    event_time: np.ndarray
    event_kind: np.ndarray
    event_src: np.ndarray
    event_dst: np.ndarray

    @property
    def n_vertices(self) -> int:
        return 2 * self.box_half_width + 1

    def vertex_index(self, x: int) -> int:
        if not -self.box_half_width <= x <= self.box_half_width:
            raise ValidationError(
                f"vertex {x} outside box [-{self.box_half_width}, {self.box_half_width}]"
            )
        return int(x) + self.box_half_width

    def _edge_id(self, x: int, y: int) -> int:
        i = self.vertex_index(x)
        j = self.vertex_index(y)
        if j == i + 1:
            return i
        if j == i - 1:
            return self.n_vertices - 1 + j
        raise ValidationError(f"({x}, {y}) is not an ordered neighbor pair")

    def recovery_marks(self, x: int) -> np.ndarray:
        i = self.vertex_index(x)
        return self.mark_times[self.mark_ptr[i] : self.mark_ptr[i + 1]]

    def arrow_times_between(self, x: int, y: int) -> np.ndarray:
        e = self._edge_id(x, y)
        return self.arrow_times[self.arrow_ptr[e] : self.arrow_ptr[e + 1]]

    def has_mark_at(self, x: int, t: float) -> bool:
        """Exact-time membership test, used by lattice block events."""
        marks = self.recovery_marks(x)
        k = np.searchsorted(marks, t, side="left")
        return bool(k < marks.shape[0] and marks[k] == t)

    def has_mark_in(self, x: int, lo: float, hi: float) -> bool:
        """Any recovery mark of x in the half-open window (lo, hi]."""
        marks = self.recovery_marks(x)
        a = np.searchsorted(marks, lo, side="right")
        b = np.searchsorted(marks, hi, side="right")
        return bool(b > a)


def _merge_events(
    mark_times: np.ndarray,
    mark_owner: np.ndarray,
    arrow_times: np.ndarray,
    arrow_edge: np.ndarray,
    n: int,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    n_marks = mark_times.shape[0]
    n_arrows = arrow_times.shape[0]
    time = np.concatenate([mark_times, arrow_times])
    kind = np.empty(n_marks + n_arrows, dtype=np.int8)
    kind[:n_marks] = _KIND_RECOVERY
    kind[n_marks:] = _KIND_ARROW
    src = np.empty(n_marks + n_arrows, dtype=np.int32)
    dst = np.empty(n_marks + n_arrows, dtype=np.int32)
    src[:n_marks] = mark_owner
    dst[:n_marks] = -1
    right = arrow_edge < n - 1
    src[n_marks:] = np.where(right, arrow_edge, arrow_edge - (n - 1) + 1)
    dst[n_marks:] = np.where(right, arrow_edge + 1, arrow_edge - (n - 1))
    order = np.lexsort((kind, time))
    return time[order], kind[order], src[order], dst[order]


def _build_from_arrays(
    spec: Optional[InterarrivalSpec],
    infection_rate: float,
    box_half_width: int,
    horizon: float,
    seed: Optional[int],
    mark_times: np.ndarray,
    mark_owner: np.ndarray,
    arrow_times: np.ndarray,
    arrow_edge: np.ndarray,
) -> GraphicalSample:
    n = 2 * box_half_width + 1
    mark_counts = np.bincount(mark_owner, minlength=n) if mark_times.size else np.zeros(n, dtype=np.int64)
    mark_ptr = np.concatenate(([0], np.cumsum(mark_counts))).astype(np.int64)
    n_edges = 2 * (n - 1)
    arrow_counts = (
        np.bincount(arrow_edge, minlength=n_edges) if arrow_times.size else np.zeros(n_edges, dtype=np.int64)
    )
    arrow_ptr = np.concatenate(([0], np.cumsum(arrow_counts))).astype(np.int64)
    ev_t, ev_k, ev_s, ev_d = _merge_events(mark_times, mark_owner, arrow_times, arrow_edge, n)
    return GraphicalSample(
        spec=spec,
        infection_rate=float(infection_rate),
        box_half_width=int(box_half_width),
        horizon=float(horizon),
        seed=seed,
        mark_times=np.asarray(mark_times, dtype=np.float64),
        mark_ptr=mark_ptr,
        arrow_times=np.asarray(arrow_times, dtype=np.float64),
        arrow_ptr=arrow_ptr,
        event_time=ev_t,
        event_kind=ev_k,
        event_src=ev_s,
        event_dst=ev_d,
    )


def build_graphical_sample(
    spec: InterarrivalSpec,
    infection_rate: float,
    box_half_width: int,
    horizon: float,
    seed: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    cap: int = DEFAULT_MARK_CAP,
) -> GraphicalSample:
    """Draw all recovery marks and arrows for one trial.

    Generation order is fixed (marks for all vertices first, then arrow
    counts, then arrow positions) so a given generator state always yields
    the same sample.  Passing `seed` uses substream 0 of that seed; a
    caller running many trials passes its own per-trial `rng` instead.
    """
    if infection_rate < 0:
        raise ValidationError("infection_rate must be nonnegative")
    if box_half_width < 0:
        raise ValidationError("box_half_width must be nonnegative")
    if horizon <= 0:
        raise ValidationError("horizon must be positive")
    if rng is None:
        if seed is None:
            raise ValidationError("either seed or rng is required")
        rng = derive_stream(int(seed), 0)
    n = 2 * box_half_width + 1
    batch = sample_renewal_marks_batch(spec, horizon, n, rng, cap=cap)

    n_edges = 2 * (n - 1)
    if infection_rate > 0 and n_edges > 0:
        counts = rng.poisson(infection_rate * horizon, size=n_edges)
        total = int(counts.sum())
        # 1 - U keeps times in (0, T], matching the mark convention
        times = horizon * (1.0 - rng.random(total))
        edges = np.repeat(np.arange(n_edges, dtype=np.int64), counts)
        order = np.lexsort((times, edges))
        arrow_times = times[order]
        arrow_edge = edges[order]
    else:
        arrow_times = np.empty(0, dtype=np.float64)
        arrow_edge = np.empty(0, dtype=np.int64)

    return _build_from_arrays(
        spec,
        infection_rate,
        box_half_width,
        horizon,
        seed,
        batch.times,
        batch.owners.astype(np.int64),
        arrow_times,
        arrow_edge,
    )


def assemble_sample(
    box_half_width: int,
    horizon: float,
    recovery_marks: Optional[dict] = None,
    arrows: Optional[dict] = None,
    infection_rate: float = 0.0,
    spec: Optional[InterarrivalSpec] = None,
) -> GraphicalSample:
    """Hand-built sample from explicit mark/arrow lists.

    `recovery_marks` maps vertex position to an increasing list of times;
    `arrows` maps an ordered pair (x, y) with |x-y| = 1 to a list of times.
    Times past the horizon are kept; replay simply never reaches them.
    """
    if box_half_width < 0:
        raise ValidationError("box_half_width must be nonnegative")
    if horizon <= 0:
        raise ValidationError("horizon must be positive")
    n = 2 * box_half_width + 1
    mark_t: list = []
    mark_o: list = []
    for x, ts in sorted((recovery_marks or {}).items()):
        idx = int(x) + box_half_width
        if not 0 <= idx < n:
            raise ValidationError(f"vertex {x} outside box")
        prev = 0.0
        for t in ts:
            t = float(t)
            if t <= prev:
                raise ValidationError(f"marks at vertex {x} must be strictly increasing and positive")
            prev = t
            mark_t.append(t)
            mark_o.append(idx)
    arrow_t: list = []
    arrow_e: list = []
    for (x, y), ts in sorted((arrows or {}).items()):
        i = int(x) + box_half_width
        j = int(y) + box_half_width
        if not (0 <= i < n and 0 <= j < n):
            raise ValidationError(f"pair ({x}, {y}) outside box")
        if j == i + 1:
            e = i
        elif j == i - 1:
            e = n - 1 + j
        else:
            raise ValidationError(f"({x}, {y}) is not an ordered neighbor pair")
        prev = 0.0
        for t in ts:
            t = float(t)
            if t <= prev:
                raise ValidationError(f"arrows on ({x}, {y}) must be strictly increasing and positive")
            prev = t
            arrow_t.append(t)
            arrow_e.append(e)
    order = np.lexsort((np.asarray(arrow_t), np.asarray(arrow_e))) if arrow_t else np.empty(0, dtype=np.int64)
    return _build_from_arrays(
        spec,
        infection_rate,
        box_half_width,
        horizon,
        None,
        np.asarray(mark_t, dtype=np.float64),
        np.asarray(mark_o, dtype=np.int64),
        np.asarray(arrow_t, dtype=np.float64)[order],
        np.asarray(arrow_e, dtype=np.int64)[order],
    )


def thin_arrows(sample: GraphicalSample, keep_probability: float, rng: np.random.Generator) -> GraphicalSample:
    """Independently keep each arrow with the given probability.

    Thinning a rate-lambda Poisson clock by q yields a rate-q*lambda
    clock, so the result is a coupled sample at a lower infection rate
    with identical recovery marks.
    """
    if not 0.0 <= keep_probability <= 1.0:
        raise ValidationError("keep_probability must lie in [0, 1]")
    keep = rng.random(sample.arrow_times.shape[0]) < keep_probability
    n = sample.n_vertices
    edge_of = np.repeat(
        np.arange(2 * (n - 1), dtype=np.int64), np.diff(sample.arrow_ptr)
    )
    mark_owner = np.repeat(np.arange(n, dtype=np.int64), np.diff(sample.mark_ptr))
    return _build_from_arrays(
        sample.spec,
        sample.infection_rate * keep_probability,
        sample.box_half_width,
        sample.horizon,
        None,
        sample.mark_times,
        mark_owner,
        sample.arrow_times[keep],
        edge_of[keep],
    )


@njit(cache=True)
def _replay(
    ev_time,
    ev_kind,
    ev_src,
    ev_dst,
    n,
    init,
    t_max,
    stop_on_boundary,
    snap_times,
):
    infected = np.zeros(n, np.bool_)
    for i in range(init.shape[0]):
        infected[init[i]] = True
    m = ev_time.shape[0]
    log_t = np.empty(m, np.float64)
    log_v = np.empty(m, np.int32)
    log_k = np.empty(m, np.int8)
    cnt = 0
    n_snap = snap_times.shape[0]
    snaps = np.zeros((n_snap, n), np.bool_)
    si = 0
    boundary = infected[0] or infected[n - 1]
    stop = boundary and stop_on_boundary
    e = 0
    while e < m and not stop:
        t = ev_time[e]
        if t > t_max:
            break
        while si < n_snap and snap_times[si] < t:
            snaps[si] = infected
            si += 1
        if ev_kind[e] == _KIND_RECOVERY:
            v = ev_src[e]
            if infected[v]:
                infected[v] = False
                log_t[cnt] = t
                log_v[cnt] = v
                log_k[cnt] = EVENT_RECOVERED
                cnt += 1
        else:
            u = ev_src[e]
            w = ev_dst[e]
            if infected[u] and not infected[w]:
                infected[w] = True
                log_t[cnt] = t
                log_v[cnt] = w
                log_k[cnt] = EVENT_INFECTED
                cnt += 1
                if w == 0 or w == n - 1:
                    boundary = True
                    if stop_on_boundary:
                        stop = True
        e += 1
    while si < n_snap:
        snaps[si] = infected
        si += 1
    return infected, log_t[:cnt].copy(), log_v[:cnt].copy(), log_k[:cnt].copy(), boundary, snaps


@dataclass(frozen=True)
class Trajectory:
    """Replay output: the state-change log plus the final infected set.

    The log records only actual changes: an arrow into an already-infected
    vertex and a mark at a healthy vertex leave no entry.  `snapshots[i]`
    is the indicator row of the infected set after all events with time
    <= `snapshot_times[i]` have been processed.
    """

    times: np.ndarray
    vertices: np.ndarray
    kinds: np.ndarray
    initial: np.ndarray
    final_infected: np.ndarray
    boundary_hit: bool
    horizon: float
    box_half_width: int
    snapshot_times: np.ndarray
    snapshots: np.ndarray

    @property
    def n_events(self) -> int:
        return int(self.times.shape[0])

    def infected_at(self, t: float) -> np.ndarray:
        """Sorted infected positions after all events with time <= t."""
        n = 2 * self.box_half_width + 1
        state = np.zeros(n, dtype=bool)
        state[self.initial + self.box_half_width] = True
        k = np.searchsorted(self.times, t, side="right")
        for i in range(k):
            state[self.vertices[i] + self.box_half_width] = self.kinds[i] == EVENT_INFECTED
        return np.flatnonzero(state) - self.box_half_width

    def extinction_time(self) -> float:
        """First time the infected set becomes empty, inf if it never does."""
        count = int(np.unique(self.initial).shape[0])
        if count == 0:
            return 0.0
        for i in range(self.times.shape[0]):
            count += 1 if self.kinds[i] == EVENT_INFECTED else -1
            if count == 0:
                return float(self.times[i])
        return math.inf


def _as_index_array(sample: GraphicalSample, initial: Iterable[int]) -> np.ndarray:
    idx = sorted({sample.vertex_index(x) for x in initial})
    return np.asarray(idx, dtype=np.int64)


_EMPTY_F64 = np.empty(0, dtype=np.float64)


def evolve(
    sample: GraphicalSample,
    initial: Iterable[int],
    t_max: Optional[float] = None,
    stop_on_boundary: bool = False,
    snapshot_times: Optional[Sequence[float]] = None,
) -> Trajectory:
    """Replay the merged event stream from an initial infected set.

    At a recovery mark the vertex (if infected) becomes healthy; at an
    arrow time the target becomes infected if the source is infected.
    Recoveries win ties.  With `stop_on_boundary`, replay freezes at the
    first infection of a box-edge vertex (the remaining snapshots repeat
    the frozen state).
    """
    if t_max is None:
        t_max = sample.horizon
    init = _as_index_array(sample, initial)
    snaps_in = (
        np.asarray(snapshot_times, dtype=np.float64) if snapshot_times is not None else _EMPTY_F64
    )
    if snaps_in.size and np.any(np.diff(snaps_in) < 0):
        raise ValidationError("snapshot_times must be nondecreasing")
    infected, log_t, log_v, log_k, boundary, snaps = _replay(
        sample.event_time,
        sample.event_kind,
        sample.event_src,
        sample.event_dst,
        sample.n_vertices,
        init,
        float(t_max),
        bool(stop_on_boundary),
        snaps_in,
    )
    return Trajectory(
        times=log_t,
        vertices=log_v - sample.box_half_width,
        kinds=log_k,
        initial=init - sample.box_half_width,
        final_infected=np.flatnonzero(infected) - sample.box_half_width,
        boundary_hit=bool(boundary),
        horizon=float(t_max),
        box_half_width=sample.box_half_width,
        snapshot_times=snaps_in,
        snapshots=snaps,
    )


def has_infection_path(
    sample: GraphicalSample,
    source: Tuple[int, float],
    target: Tuple[int, float],
) -> bool:
    """Whether infection can travel from (x, s) to (y, t) inside the sample.

    True iff a piecewise-constant path starting at x at time s reaches y
    by time t, jumping along arrows and never sitting on a recovery mark.
    Only events strictly inside (s, t) count: a mark at exactly s or t
    does not block, an arrow at exactly s or t is not available.  Block
    constructions over open time windows rely on this convention.
    """
    x, s = source
    y, t = target
    if not s < t:
        raise ValidationError("source time must precede target time")
    xi = sample.vertex_index(x)
    yi = sample.vertex_index(y)
    lo = int(np.searchsorted(sample.event_time, s, side="right"))
    hi = int(np.searchsorted(sample.event_time, t, side="left"))
    infected, _, _, _, _, _ = _replay(
        sample.event_time[lo:hi],
        sample.event_kind[lo:hi],
        sample.event_src[lo:hi],
        sample.event_dst[lo:hi],
        sample.n_vertices,
        np.asarray([xi], dtype=np.int64),
        math.inf,
        False,
        _EMPTY_F64,
    )
    return bool(infected[yi])


@dataclass(frozen=True)
class SurvivalReport:
    """Monte Carlo survival estimate with a 95% confidence halfwidth."""

    estimate: float
    ci_halfwidth: float
    boundary_fraction: float
    trials: int
    survivals: int
    boundary_hits: int
    boundary_policy: str


def survival_probability(
    spec: InterarrivalSpec,
    infection_rate: float,
    box_half_width: int,
    horizon: float,
    trials: int,
    seed: int,
    boundary_policy: str = "stop",
    stream_offset: int = 0,
    cap: int = DEFAULT_MARK_CAP,
) -> SurvivalReport:
    """Fraction of trials whose infection from {0} is alive at the horizon.

    Policy "stop": a trial that touches the box edge terminates early and
    counts as survived (the finite box cannot certify extinction beyond
    it).  Policy "run": replay continues to the horizon and survival
    means a nonempty final set; boundary contact is still flagged.  Trial
    `i` always uses derived stream `stream_offset + i`, so estimates are
    independent of worker scheduling.
    """
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    if boundary_policy not in ("stop", "run"):
        raise ValidationError("boundary_policy must be 'stop' or 'run'")
    survivals = 0
    boundary_hits = 0
    for i in range(trials):
        rng = derive_stream(seed, stream_offset + i)
        sample = build_graphical_sample(
            spec, infection_rate, box_half_width, horizon, rng=rng, cap=cap
        )
        traj = evolve(sample, (0,), stop_on_boundary=(boundary_policy == "stop"))
        if traj.boundary_hit:
            boundary_hits += 1
        if traj.final_infected.size > 0 or (boundary_policy == "stop" and traj.boundary_hit):
            survivals += 1
    p_hat = survivals / trials
    halfwidth = _Z95 * math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / trials)
    return SurvivalReport(
        estimate=p_hat,
        ci_halfwidth=halfwidth,
        boundary_fraction=boundary_hits / trials,
        trials=trials,
        survivals=survivals,
        boundary_hits=boundary_hits,
        boundary_policy=boundary_policy,
    )


@dataclass(frozen=True)
class LambdaCEstimate:
    """Bisection output: the midpoint and the final bracketing estimates."""

    value: float
    lo: float
    hi: float
    survival_lo: SurvivalReport
    survival_hi: SurvivalReport
    evaluations: int
    survival_threshold: float


def estimate_lambda_c(
    spec: InterarrivalSpec,
    box_half_width: int,
    horizon: float,
    trials: int,
    bracket: Tuple[float, float],
    survival_threshold: float,
    seed: int,
    boundary_policy: str = "stop",
    cap: int = DEFAULT_MARK_CAP,
) -> LambdaCEstimate:
    """Bisect the infection rate until the survival proxy crosses a threshold.

    Requires survival below the threshold at the lower bracket end and
    above it at the upper end; otherwise raises BracketError carrying both
    endpoint estimates.  Stops once the bracket width falls below 5% of
    the initial width.  Each survival evaluation consumes its own block of
    `trials` derived streams, so repeated runs are reproducible.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not 0.0 <= lo < hi:
        raise ValidationError("bracket must satisfy 0 <= lo < hi")
    if not 0.0 < survival_threshold < 1.0:
        raise ValidationError("survival_threshold must lie in (0, 1)")

    evaluations = 0

    def run(rate: float) -> SurvivalReport:
        nonlocal evaluations
        report = survival_probability(
            spec,
            rate,
            box_half_width,
            horizon,
            trials,
            seed,
            boundary_policy=boundary_policy,
            stream_offset=evaluations * trials,
            cap=cap,
        )
        evaluations += 1
        return report

    s_lo = run(lo)
    s_hi = run(hi)
    if s_lo.estimate >= survival_threshold or s_hi.estimate <= survival_threshold:
        raise BracketError(
            "survival bracket does not straddle the threshold "
            f"(lo {s_lo.estimate:.4f}, hi {s_hi.estimate:.4f}, threshold {survival_threshold})",
            lo_estimate=s_lo.estimate,
            hi_estimate=s_hi.estimate,
        )
    width_stop = 0.05 * (hi - lo)
    while hi - lo > width_stop:
        mid = 0.5 * (lo + hi)
        s_mid = run(mid)
        if s_mid.estimate >= survival_threshold:
            hi, s_hi = mid, s_mid
        else:
            lo, s_lo = mid, s_mid
    return LambdaCEstimate(
        value=0.5 * (lo + hi),
        lo=lo,
        hi=hi,
        survival_lo=s_lo,
        survival_hi=s_hi,
        evaluations=evaluations,
        survival_threshold=survival_threshold,
    )
