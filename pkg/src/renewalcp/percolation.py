"""Oriented percolation on the wedge, block-induced bond models, and
dual contours.

The wedge has vertices (x, y) with -y <= x <= y, x + y even, 0 <= y <= H,
and oriented edges (x, y) -> (x +/- 1, y + 1).  Bond models attach an
open/closed state to every edge; the two induced models read those states
off a contact-process graphical sample, so that an open percolation
cluster forces a surviving infection (the coupling audit checks this
sample by sample).  A finite origin cluster is certified by a dual
contour crossing only closed edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .constants import CLOSURE_THRESHOLD, DEFAULT_MARK_CAP
from .contact import GraphicalSample, build_graphical_sample, evolve, has_infection_path
from .distributions import InterarrivalSpec, sample_renewal_marks_batch
from .errors import UndecidableAtHeightError, ValidationError
from .streams import derive_stream

__all__ = [
    "WedgeGraph",
    "WedgeBondConfig",
    "ClusterResult",
    "DualContour",
    "ContourCheck",
    "IidBondModel",
    "InducedArithmeticModel",
    "InducedWindowModel",
    "RegenerativeColumnModel",
    "JointClosureReport",
    "CovarianceReport",
    "PercolationReport",
    "CouplingAudit",
    "build_wedge",
    "sample_iid_bonds",
    "induced_bonds_arithmetic",
    "induced_bonds_window",
    "explore_cluster",
    "percolation_probability",
    "sample_percolation_trials",
    "check_property_I",
    "check_property_II",
    "find_dual_contour",
    "validate_contour",
    "audit_block_coupling",
]

_Z95 = 1.959963984540054

UP_LEFT = 0
UP_RIGHT = 1


# ---------------------------------------------------------------------------
# wedge graph


@dataclass(frozen=True)
class WedgeGraph:
    """Explicit enumeration of the wedge up to height H.

    Vertices are sorted by (row, x); row y occupies the contiguous id
    range [y(y+1)/2, y(y+1)/2 + y].  Edge ids group the two out-edges of
    each vertex: the vertex at row y, offset c has its up-left edge at
    id y(y+1) + 2c and its up-right edge at that plus one.
    """

    height: int
    vertices: np.ndarray
    edges: np.ndarray
    edge_col: np.ndarray
    edge_dir: np.ndarray
    edge_row: np.ndarray
    edge_source_x: np.ndarray

    @property
    def n_vertices(self) -> int:
        return (self.height + 1) * (self.height + 2) // 2

    @property
    def n_edges(self) -> int:
        return self.height * (self.height + 1)

    def contains(self, x: int, y: int) -> bool:
        return 0 <= y <= self.height and -y <= x <= y and (x + y) % 2 == 0

    def vertex_id(self, x: int, y: int) -> int:
        if not self.contains(x, y):
            raise ValidationError(f"({x}, {y}) is not a wedge vertex")
        return y * (y + 1) // 2 + (x + y) // 2

    def vertex_at(self, vid: int) -> Tuple[int, int]:
        return int(self.vertices[vid, 0]), int(self.vertices[vid, 1])

    def row_slice(self, y: int) -> slice:
        off = y * (y + 1) // 2
        return slice(off, off + y + 1)

    def edge_id(self, x: int, y: int, direction: int) -> int:
        if direction not in (UP_LEFT, UP_RIGHT):
            raise ValidationError("direction must be UP_LEFT or UP_RIGHT")
        if not self.contains(x, y) or y >= self.height:
            raise ValidationError(f"no edges out of ({x}, {y})")
        return y * (y + 1) + (x + y) + direction

    def row_edge_ids(self, y: int, direction: int) -> np.ndarray:
        base = y * (y + 1) + direction
        return np.arange(base, base + 2 * (y + 1), 2)

    def edges_in_column(self, col: int) -> np.ndarray:
        ids = np.flatnonzero(self.edge_col == col)
        return ids[np.argsort(self.edge_row[ids], kind="stable")]


def build_wedge(height: int) -> WedgeGraph:
    """Enumerate vertices, edges, and column tags up to the height cap."""
    if height < 1:
        raise ValidationError("height must be at least 1")
    verts = []
    for y in range(height + 1):
        for c in range(y + 1):
            verts.append((2 * c - y, y))
    vertices = np.asarray(verts, dtype=np.int64)
    n_edges = height * (height + 1)
    edges = np.empty((n_edges, 2), dtype=np.int64)
    edge_col = np.empty(n_edges, dtype=np.int64)
    edge_dir = np.empty(n_edges, dtype=np.int8)
    edge_row = np.empty(n_edges, dtype=np.int64)
    edge_src_x = np.empty(n_edges, dtype=np.int64)
    eid = 0
    for y in range(height):
        off = y * (y + 1) // 2
        off_up = (y + 1) * (y + 2) // 2
        for c in range(y + 1):
            x = 2 * c - y
            src = off + c
            # up-left: (x, y) -> (x - 1, y + 1), column x - 1
            edges[eid] = (src, off_up + c)
            edge_col[eid] = x - 1
            edge_dir[eid] = UP_LEFT
            edge_row[eid] = y
            edge_src_x[eid] = x
            eid += 1
            # up-right: (x, y) -> (x + 1, y + 1), column x
            edges[eid] = (src, off_up + c + 1)
            edge_col[eid] = x
            edge_dir[eid] = UP_RIGHT
            edge_row[eid] = y
            edge_src_x[eid] = x
            eid += 1
    return WedgeGraph(
        height=height,
        vertices=vertices,
        edges=edges,
        edge_col=edge_col,
        edge_dir=edge_dir,
        edge_row=edge_row,
        edge_source_x=edge_src_x,
    )


@dataclass(frozen=True)
class WedgeBondConfig:
    """Open/closed state for every wedge edge."""

    wedge: WedgeGraph
    open_edges: np.ndarray

    def __post_init__(self):
        if self.open_edges.shape != (self.wedge.n_edges,):
            raise ValidationError("config size must equal the edge count")

    def is_open(self, eid: int) -> bool:
        return bool(self.open_edges[eid])


# ---------------------------------------------------------------------------
# cluster exploration


@dataclass(frozen=True)
class ClusterResult:
    """Forward cluster of a vertex plus the row-H contact flag."""

    wedge: WedgeGraph
    vertex_ids: np.ndarray
    reached_top: bool

    @property
    def size(self) -> int:
        return int(self.vertex_ids.shape[0])


def explore_cluster(config: WedgeBondConfig, origin: Tuple[int, int] = (0, 0)) -> ClusterResult:
    """All vertices reachable from the origin along open oriented edges.

    Edges only point upward, so reachability is a single sweep up the
    rows; reached_top reports whether the cluster meets row H.
    """
    wedge = config.wedge
    H = wedge.height
    x0, y0 = origin
    vid0 = wedge.vertex_id(x0, y0)
    reach = np.zeros(wedge.n_vertices, dtype=bool)
    reach[vid0] = True
    for y in range(y0, H):
        row = reach[wedge.row_slice(y)]
        if not row.any():
            break
        open_l = config.open_edges[wedge.row_edge_ids(y, UP_LEFT)]
        open_r = config.open_edges[wedge.row_edge_ids(y, UP_RIGHT)]
        nxt = reach[wedge.row_slice(y + 1)]
        nxt[:-1] |= row & open_l
        nxt[1:] |= row & open_r
    reached_top = bool(reach[wedge.row_slice(H)].any())
    return ClusterResult(
        wedge=wedge, vertex_ids=np.flatnonzero(reach), reached_top=reached_top
    )


def _sweep_reached_top(wedge: WedgeGraph, open_matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized multi-trial sweep: reached-top flags and cluster sizes."""
    n = open_matrix.shape[0]
    reach = np.ones((n, 1), dtype=bool)
    sizes = np.ones(n, dtype=np.int64)
    for y in range(wedge.height):
        open_l = open_matrix[:, wedge.row_edge_ids(y, UP_LEFT)]
        open_r = open_matrix[:, wedge.row_edge_ids(y, UP_RIGHT)]
        nxt = np.zeros((n, y + 2), dtype=bool)
        nxt[:, :-1] = reach & open_l
        nxt[:, 1:] |= reach & open_r
        reach = nxt
        sizes += reach.sum(axis=1)
    return reach.any(axis=1), sizes


# ---------------------------------------------------------------------------
# bond models


class IidBondModel:
    """Each edge open independently with probability p."""

    def __init__(self, p: float, height: int):
        if not 0.0 < p < 1.0:
            raise ValidationError("p must lie in (0, 1)")
        self.p = float(p)
        self.height = int(height)
        self.wedge = build_wedge(height)

    def sample_configs(self, trials: int, rng: np.random.Generator) -> np.ndarray:
        return rng.random((trials, self.wedge.n_edges)) < self.p

    def sample_config(self, rng: np.random.Generator) -> WedgeBondConfig:
        return WedgeBondConfig(self.wedge, self.sample_configs(1, rng)[0])


def sample_iid_bonds(p: float, height: int, seed: int) -> WedgeBondConfig:
    """One independent-bond configuration, deterministic in the seed."""
    model = IidBondModel(p, height)
    return model.sample_config(derive_stream(seed, 0))


def _poisson_tail_at_least(n: int, x: float) -> float:
    """P(Poisson(x) >= n) by summing the complementary pmf."""
    if n <= 0:
        return 1.0
    if x <= 0:
        return 0.0
    if x > 700.0:
        return 1.0  # below-tail mass underflows double precision here
    term = math.exp(-x)
    total = term
    for i in range(1, n):
        term *= x / i
        total += term
    return max(0.0, 1.0 - total)


def _window_index(times: np.ndarray, window: float) -> np.ndarray:
    # right-closed windows ((l)w, (l+1)w]: a mark exactly at l*w belongs
    # to window l-1
    return np.ceil(times / window).astype(np.int64) - 1


class InducedArithmeticModel:
    """Block bond model read off an arithmetic-law contact sample.

    Blocks B_k = {kM, ..., kM + M - 1} and lattice windows of length d
    (the law's span).  The edge out of (k, l) toward k +/- 1 is open when
    the relay event across the open window holds and the target block
    keeps a mark-free vertex at the window's right end.
    """

    def __init__(
        self,
        spec: InterarrivalSpec,
        infection_rate: float,
        block_size: int,
        height: int,
        cap: int = DEFAULT_MARK_CAP,
    ):
        if not spec.is_arithmetic:
            raise ValidationError("the induced block model needs an arithmetic law")
        if block_size < 1:
            raise ValidationError("block_size must be at least 1")
        if infection_rate <= 0:
            raise ValidationError("infection_rate must be positive")
        self.spec = spec
        self.infection_rate = float(infection_rate)
        self.block_size = int(block_size)
        self.height = int(height)
        self.span = float(spec.span)
        self.cap = cap
        self.p = 1.0 - CLOSURE_THRESHOLD
        self.wedge = build_wedge(height)
        self.box_half_width = (self.height + 3) * self.block_size - 1
        self.horizon = (self.height + 1) * self.span

    # -- full route -------------------------------------------------------

    def sample_graphical(self, rng: np.random.Generator) -> GraphicalSample:
        return build_graphical_sample(
            self.spec,
            self.infection_rate,
            self.box_half_width,
            self.horizon,
            rng=rng,
            cap=self.cap,
        )

    def induced_config(self, sample: GraphicalSample) -> WedgeBondConfig:
        return induced_bonds_arithmetic(sample, self.block_size, self.span, self.height)

    def sample_config(self, rng: np.random.Generator) -> WedgeBondConfig:
        return self.induced_config(self.sample_graphical(rng))

    # -- coupling interface -------------------------------------------------

    def initial_infected(self) -> Tuple[int, ...]:
        return (0,)

    def lattice_times(self) -> np.ndarray:
        return self.span * np.arange(self.height + 1)

    def invariant_vertices(self, block: int) -> range:
        M = self.block_size
        return range(block * M, (block + 1) * M)

    # -- fast exact sampler -------------------------------------------------

    def relay_failure_probability(self) -> float:
        """P(the relay chain across 2M - 1 edges misses the open window)."""
        n_steps = 2 * self.block_size - 1
        return 1.0 - _poisson_tail_at_least(n_steps, self.infection_rate * self.span)

    def sample_configs(
        self, trials: int, rng: np.random.Generator, chunk: int = 20_000
    ) -> np.ndarray:
        """Distributionally exact sampler that skips the graphical replay.

        Relay events across one window use pairwise disjoint arrow clocks
        (wedge columns step by two, so their vertex ranges are disjoint,
        and opposite directions use opposite clocks), hence they are iid
        Bernoulli across edges and windows.  Block events share real
        renewal chains per vertex, preserving all dependence along
        columns.
        """
        H, M = self.height, self.block_size
        wedge = self.wedge
        n_v = (2 * H + 1) * M  # vertices -H*M .. (H+1)*M - 1
        p_relay = 1.0 - self.relay_failure_probability()
        # per-edge target block index (shifted by +H) and window
        target_k = wedge.edge_source_x + np.where(wedge.edge_dir == UP_RIGHT, 1, -1)
        tgt = (target_k + H).astype(np.int64)
        lvl = wedge.edge_row.astype(np.int64)
        out = np.empty((trials, wedge.n_edges), dtype=bool)
        done = 0
        while done < trials:
            m = min(chunk, trials - done)
            batch = sample_renewal_marks_batch(
                self.spec, H * self.span, m * n_v, rng, cap=self.cap
            )
            has_mark = np.zeros(m * n_v * H, dtype=bool)
            steps = batch.steps
            keep = steps <= H
            has_mark[batch.owners[keep] * H + (steps[keep] - 1)] = True
            # B[trial, block, window]: some block vertex without a mark
            no_mark = ~has_mark.reshape(m, 2 * H + 1, M, H)
            block_ok = no_mark.any(axis=2)
            relay = rng.random((m, wedge.n_edges)) < p_relay
            out[done : done + m] = relay & block_ok[:, tgt, lvl]
            done += m
        return out


def induced_bonds_arithmetic(
    sample: GraphicalSample, block_size: int, span: float, height: int
) -> WedgeBondConfig:
    """Evaluate the arithmetic block events on one graphical sample.

    The edge out of (k, l) toward k + 1 is open when an infection path
    runs from vertex kM to vertex (k+2)M - 1 inside the open window
    (l*d, (l+1)*d) and some vertex of block k + 1 has no renewal mark at
    time (l+1)*d.  The mirrored event (path (k+1)M - 1 -> (k-1)M, block
    k - 1 mark-free) opens the edge toward k - 1.
    """
    if sample.spec is None or not sample.spec.is_arithmetic:
        raise ValidationError("sample must carry an arithmetic interarrival law")
    if not math.isclose(sample.spec.span, span, rel_tol=0.0, abs_tol=1e-12):
        raise ValidationError("span does not match the sample's law")
    M = int(block_size)
    if M < 1:
        raise ValidationError("block_size must be at least 1")
    if sample.horizon < (height + 1) * span - 1e-9:
        raise ValidationError("sample horizon too short for this height")
    L = sample.box_half_width
    if L < (height + 2) * M or L < (height + 3) * M - 1:
        raise ValidationError("sample box too narrow for this height")
    wedge = build_wedge(height)
    open_edges = np.zeros(wedge.n_edges, dtype=bool)
    for eid in range(wedge.n_edges):
        k = int(wedge.edge_source_x[eid])
        l = int(wedge.edge_row[eid])
        t_lo, t_hi = l * span, (l + 1) * span
        if wedge.edge_dir[eid] == UP_RIGHT:
            relay = has_infection_path(
                sample, (k * M, t_lo), ((k + 2) * M - 1, t_hi)
            )
            target = k + 1
        else:
            relay = has_infection_path(
                sample, ((k + 1) * M - 1, t_lo), ((k - 1) * M, t_hi)
            )
            target = k - 1
        if not relay:
            continue
        block_ok = any(
            not sample.has_mark_at(v, t_hi)
            for v in range(target * M, (target + 1) * M)
        )
        open_edges[eid] = block_ok
    return WedgeBondConfig(wedge, open_edges)


class InducedWindowModel:
    """Window bond model read off a general-law contact sample.

    Windows are the half-open intervals (l*nu, (l+1)*nu].  The edge out
    of (k, l) toward k +/- 1 is open when at least one arrow k -> k +/- 1
    lands in window l and both endpoint vertices are mark-free on it.
    """

    def __init__(
        self,
        spec: InterarrivalSpec,
        infection_rate: float,
        window: float,
        height: int,
        cap: int = DEFAULT_MARK_CAP,
    ):
        if window <= 0:
            raise ValidationError("window must be positive")
        if infection_rate <= 0:
            raise ValidationError("infection_rate must be positive")
        self.spec = spec
        self.infection_rate = float(infection_rate)
        self.window = float(window)
        self.height = int(height)
        self.cap = cap
        self.p = 1.0 - CLOSURE_THRESHOLD
        self.wedge = build_wedge(height)
        self.box_half_width = self.height + 1
        self.horizon = (self.height + 1) * self.window

    def sample_graphical(self, rng: np.random.Generator) -> GraphicalSample:
        return build_graphical_sample(
            self.spec,
            self.infection_rate,
            self.box_half_width,
            self.horizon,
            rng=rng,
            cap=self.cap,
        )

    def induced_config(self, sample: GraphicalSample) -> WedgeBondConfig:
        return induced_bonds_window(sample, self.window, self.height)

    def sample_config(self, rng: np.random.Generator) -> WedgeBondConfig:
        return self.induced_config(self.sample_graphical(rng))

    def initial_infected(self) -> Tuple[int, ...]:
        return (0,)

    def lattice_times(self) -> np.ndarray:
        return self.window * np.arange(self.height + 1)

    def invariant_vertices(self, block: int) -> range:
        return range(block, block + 1)

    def arrow_failure_probability(self) -> float:
        return math.exp(-self.infection_rate * self.window)

    def sample_configs(
        self, trials: int, rng: np.random.Generator, chunk: int = 50_000
    ) -> np.ndarray:
        """Distributionally exact sampler without full graphical replay.

        Arrow events are iid Bernoulli across (ordered pair, window)
        cells because they read disjoint stretches of independent Poisson
        clocks; mark-free events come from real renewal marks shared
        between the edges that touch the same vertex.
        """
        H = self.height
        wedge = self.wedge
        n_v = 2 * H + 1  # vertices -H .. H
        p_arrow = -math.expm1(-self.infection_rate * self.window)
        src = (wedge.edge_source_x + H).astype(np.int64)
        tgt = src + np.where(wedge.edge_dir == UP_RIGHT, 1, -1)
        lvl = wedge.edge_row.astype(np.int64)
        out = np.empty((trials, wedge.n_edges), dtype=bool)
        done = 0
        while done < trials:
            m = min(chunk, trials - done)
            batch = sample_renewal_marks_batch(
                self.spec, H * self.window, m * n_v, rng, cap=self.cap
            )
            marked = np.zeros(m * n_v * H, dtype=bool)
            w = _window_index(batch.times, self.window)
            keep = (w >= 0) & (w < H)
            marked[batch.owners[keep] * H + w[keep]] = True
            free = ~marked.reshape(m, n_v, H)
            arrows = rng.random((m, wedge.n_edges)) < p_arrow
            out[done : done + m] = arrows & free[:, src, lvl] & free[:, tgt, lvl]
            done += m
        return out


def induced_bonds_window(
    sample: GraphicalSample, window: float, height: int
) -> WedgeBondConfig:
    """Evaluate the window block events on one graphical sample."""
    if window <= 0:
        raise ValidationError("window must be positive")
    if sample.horizon < (height + 1) * window - 1e-12:
        raise ValidationError("sample horizon too short for this height")
    if sample.box_half_width < height + 1:
        raise ValidationError("sample box too narrow for this height")
    wedge = build_wedge(height)
    open_edges = np.zeros(wedge.n_edges, dtype=bool)
    for eid in range(wedge.n_edges):
        k = int(wedge.edge_source_x[eid])
        l = int(wedge.edge_row[eid])
        target = k + 1 if wedge.edge_dir[eid] == UP_RIGHT else k - 1
        t_lo, t_hi = l * window, (l + 1) * window
        arrows = sample.arrow_times_between(k, target)
        a = np.searchsorted(arrows, t_lo, side="right")
        b = np.searchsorted(arrows, t_hi, side="right")
        if b == a:
            continue
        if sample.has_mark_in(k, t_lo, t_hi) or sample.has_mark_in(target, t_lo, t_hi):
            continue
        open_edges[eid] = True
    return WedgeBondConfig(wedge, open_edges)


class RegenerativeColumnModel:
    """Synthetic dependent model with the closed-edge regeneration law.

    Within one column, edges are sampled bottom-up: after a closed edge
    the closure probability resets to the base value, after an open edge
    it rises by the bias.  Every conditional closure probability is at
    most base + bias, so joint closures over k colinear edges are bounded
    by (base + bias)^k and the model is admissible at p = 1 - base - bias.
    Distinct columns are sampled independently.
    """

    def __init__(self, base_closure: float, bias: float, height: int):
        if not 0.0 < base_closure < 1.0:
            raise ValidationError("base_closure must lie in (0, 1)")
        if bias < 0.0 or base_closure + bias >= 1.0:
            raise ValidationError("bias must be nonnegative with base + bias < 1")
        self.base_closure = float(base_closure)
        self.bias = float(bias)
        self.height = int(height)
        self.wedge = build_wedge(height)
        self.p = 1.0 - (base_closure + bias)
        self._columns = [
            self.wedge.edges_in_column(c)
            for c in range(-height, height)
            if self.wedge.edges_in_column(c).size
        ]

    def sample_configs(self, trials: int, rng: np.random.Generator) -> np.ndarray:
        out = np.empty((trials, self.wedge.n_edges), dtype=bool)
        c0, c1 = self.base_closure, self.base_closure + self.bias
        for ids in self._columns:
            u = rng.random((trials, ids.size))
            prev_open = np.zeros(trials, dtype=bool)
            for i, eid in enumerate(ids):
                prob_closed = np.where(prev_open, c1, c0)
                is_open = u[:, i] >= prob_closed
                out[:, eid] = is_open
                prev_open = is_open
        return out

    def sample_config(self, rng: np.random.Generator) -> WedgeBondConfig:
        return WedgeBondConfig(self.wedge, self.sample_configs(1, rng)[0])


# ---------------------------------------------------------------------------
# statistical property checks


def chunk_plan(trials: int, max_chunks: int = 64) -> List[Tuple[int, int]]:
    """(worker index, trial count) pairs covering `trials` in order.

    Every chunked sampler in this module follows this decomposition, so a
    caller running chunks on its own pool reproduces the serial results
    exactly by merging in worker-index order.
    """
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    n_chunks = min(trials, max_chunks)
    base = trials // n_chunks
    extra = trials % n_chunks
    return [(i, base + (1 if i < extra else 0)) for i in range(n_chunks)]


def sample_percolation_chunk(
    model, worker: int, chunk_trials: int, seed: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Reached-top flags and cluster sizes for one worker's chunk.

    Worker `i` always consumes derive_stream(seed, i), independent of
    scheduling order.
    """
    block = model.sample_configs(chunk_trials, derive_stream(seed, worker))
    return _sweep_reached_top(model.wedge, block)


def _model_configs_chunked(model, trials: int, seed: int):
    """Yield config chunks with worker-independent derived streams."""
    for i, m in chunk_plan(trials):
        if m == 0:
            continue
        yield model.sample_configs(m, derive_stream(seed, i))


@dataclass(frozen=True)
class JointClosureReport:
    """MC joint-closure estimate against the (1-p)^k admissibility bound."""

    k: int
    edge_ids: Tuple[int, ...]
    estimate: float
    bound: float
    standard_error: float
    passes: bool
    trials: int
    p: float


def default_colinear_edges(wedge: WedgeGraph, k: int, column: int = 0) -> np.ndarray:
    ids = wedge.edges_in_column(column)
    if ids.size < k:
        raise ValidationError(
            f"column {column} holds only {ids.size} edges; need {k}"
        )
    return ids[:k]


def check_property_I(
    model,
    k: int,
    trials: int,
    seed: int,
    edge_ids: Optional[Sequence[int]] = None,
) -> JointClosureReport:
    """Joint closure of k colinear edges versus the admissibility bound.

    Passes iff the estimate minus three standard errors stays at or below
    (1 - p)^k, with p the model's declared admissibility level.
    """
    if not 1 <= k <= 4:
        raise ValidationError("k must lie in 1..4")
    wedge = model.wedge
    if edge_ids is None:
        ids = default_colinear_edges(wedge, k)
    else:
        ids = np.asarray(list(edge_ids), dtype=np.int64)
        if ids.size != k or np.unique(ids).size != k:
            raise ValidationError("edge_ids must hold k distinct edges")
        if np.unique(wedge.edge_col[ids]).size != 1:
            raise ValidationError("edges must share one column")
    hits = 0
    total = 0
    for block in _model_configs_chunked(model, trials, seed):
        closed = ~block[:, ids]
        hits += int(closed.all(axis=1).sum())
        total += block.shape[0]
    est = hits / total
    se = math.sqrt(max(est * (1.0 - est), 0.0) / total)
    bound = (1.0 - model.p) ** k
    return JointClosureReport(
        k=k,
        edge_ids=tuple(int(i) for i in ids),
        estimate=est,
        bound=bound,
        standard_error=se,
        passes=(est - 3.0 * se) <= bound,
        trials=total,
        p=model.p,
    )


@dataclass(frozen=True)
class CovarianceReport:
    """MC covariance of two edge states against a 4-SE tolerance.

    standard_error is the score-form SE of the covariance estimator
    under the independence null, sqrt(p1 q1 p2 q2 / n).  The empirical
    influence-function variance is useless here: with open fractions
    near one the rare double-closure cell dominates the variance, and a
    sample with zero such closures would report an SE twenty times too
    small and flag pure noise as dependence.
    """

    edge_ids: Tuple[int, int]
    column_gap: int
    covariance: float
    standard_error: float
    p_first: float
    p_second: float
    p_joint: float
    passes: bool
    informational: bool
    trials: int


def default_gap_pair(wedge: WedgeGraph, gap: int) -> Tuple[int, int]:
    a = wedge.edges_in_column(0)
    b = wedge.edges_in_column(gap)
    if a.size == 0 or b.size == 0:
        raise ValidationError(f"no edges available at column gap {gap}")
    return int(a[0]), int(b[0])


def check_property_II(
    model,
    gap: int,
    trials: int,
    seed: int,
    edge_ids: Optional[Tuple[int, int]] = None,
) -> CovarianceReport:
    """Covariance of two edges at the given column gap.

    Gaps of at least 2 carry a pass/fail verdict (|cov| within 4 SE of
    zero); a gap of 1 is measured but reported as informational, since
    adjacent columns may legitimately share a renewal clock.
    """
    if gap < 1:
        raise ValidationError("gap must be at least 1")
    wedge = model.wedge
    if edge_ids is None:
        e1, e2 = default_gap_pair(wedge, gap)
    else:
        e1, e2 = int(edge_ids[0]), int(edge_ids[1])
    actual = abs(int(wedge.edge_col[e1]) - int(wedge.edge_col[e2]))
    if actual != gap:
        raise ValidationError(f"edges sit at column gap {actual}, not {gap}")
    n11 = n10 = n01 = n00 = 0
    for block in _model_configs_chunked(model, trials, seed):
        x = block[:, e1]
        y = block[:, e2]
        n11 += int((x & y).sum())
        n10 += int((x & ~y).sum())
        n01 += int((~x & y).sum())
        n00 += int((~x & ~y).sum())
    total = n11 + n10 + n01 + n00
    p1 = (n11 + n10) / total
    p2 = (n11 + n01) / total
    p11 = n11 / total
    cov = p11 - p1 * p2
    se = math.sqrt(p1 * (1.0 - p1) * p2 * (1.0 - p2) / total)
    passes = abs(cov) <= 4.0 * se if se > 0 else cov == 0.0
    return CovarianceReport(
        edge_ids=(e1, e2),
        column_gap=gap,
        covariance=cov,
        standard_error=se,
        p_first=p1,
        p_second=p2,
        p_joint=p11,
        passes=passes,
        informational=gap < 2,
        trials=total,
    )


@dataclass(frozen=True)
class PercolationReport:
    """MC frequency of clusters that reach the top row."""

    estimate: float
    ci_halfwidth: float
    trials: int
    height: int


def sample_percolation_trials(
    model, trials: int, seed: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Per-trial reached-top flags and cluster sizes for the origin."""
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    flags = np.empty(trials, dtype=bool)
    sizes = np.empty(trials, dtype=np.int64)
    done = 0
    for block in _model_configs_chunked(model, trials, seed):
        f, s = _sweep_reached_top(model.wedge, block)
        flags[done : done + f.size] = f
        sizes[done : done + f.size] = s
        done += f.size
    return flags, sizes


def percolation_probability(
    model, height: int, trials: int, seed: int
) -> PercolationReport:
    """MC estimate of P(cluster of the origin reaches row H)."""
    if height != model.wedge.height:
        raise ValidationError("height does not match the model's wedge")
    flags, _ = sample_percolation_trials(model, trials, seed)
    est = float(flags.mean())
    half = _Z95 * math.sqrt(max(est * (1.0 - est), 0.0) / trials)
    return PercolationReport(
        estimate=est, ci_halfwidth=half, trials=trials, height=height
    )


# ---------------------------------------------------------------------------
# dual contours

_STEP_OF_DELTA = {
    (1, 1): "ne",
    (1, -1): "se",
    (-1, -1): "sw",
    (-1, 1): "nw",
}
# clockwise cyclic order of the four diagonal directions
_CW_ORDER = ["ne", "se", "sw", "nw"]
_REVERSE = {"ne": "sw", "se": "nw", "sw": "ne", "nw": "se"}
_DELTA_OF_STEP = {v: k for k, v in _STEP_OF_DELTA.items()}


def dual_contains(x: int, z: int) -> bool:
    """Membership in the dual vertex set (the shifted wedge minus its tip)."""
    if (x + z) % 2 == 0:
        return False
    if (x, z) == (0, -1):
        return False
    return z >= -1 and -(z + 1) <= x <= z + 1


def on_left_side(x: int, z: int) -> bool:
    return x == -(z + 1) and z >= 0


def on_right_side(x: int, z: int) -> bool:
    return x == z + 1 and z >= 0


@dataclass(frozen=True)
class DualContour:
    """Self-avoiding dual path from the left to the right wedge side.

    `crossed_edge_ids[i]` names the primal edge crossed by step i when
    that step is diagonal-up-right ("ne", crossing an up-left primal
    edge) or diagonal-down-right ("se", crossing an up-right primal
    edge); the two leftward step types cross nothing that must be
    closed and carry None.
    """

    points: Tuple[Tuple[int, int], ...]
    steps: Tuple[str, ...]
    crossed_edge_ids: Tuple[Optional[int], ...]

    @property
    def n_steps(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class ContourCheck:
    valid: bool
    reasons: Tuple[str, ...]


def validate_contour(contour: DualContour, config: WedgeBondConfig) -> ContourCheck:
    """Structural and crossing checks for an extracted contour."""
    wedge = config.wedge
    reasons: List[str] = []
    pts = contour.points
    if (
        len(pts) != len(contour.steps) + 1
        or len(contour.crossed_edge_ids) != len(contour.steps)
        or len(pts) < 2
    ):
        return ContourCheck(valid=False, reasons=("point/step count mismatch",))
    if len(set(pts)) != len(pts):
        reasons.append("path revisits a dual vertex")
    for x, z in pts:
        if not dual_contains(x, z):
            reasons.append(f"({x}, {z}) outside the dual vertex set")
            break
    if not on_left_side(*pts[0]):
        reasons.append("start not on the left side")
    if not on_right_side(*pts[-1]):
        reasons.append("end not on the right side")
    for x, z in pts[1:-1]:
        if on_left_side(x, z) or on_right_side(x, z):
            reasons.append("interior point touches a wedge side")
            break
    for i, step in enumerate(contour.steps):
        dx = pts[i + 1][0] - pts[i][0]
        dz = pts[i + 1][1] - pts[i][1]
        if _STEP_OF_DELTA.get((dx, dz)) != step:
            reasons.append(f"step {i} type does not match its displacement")
            continue
        eid = contour.crossed_edge_ids[i]
        x, z = pts[i]
        if step in ("ne", "se"):
            try:
                if step == "ne":
                    want = wedge.edge_id(x + 1, z, UP_LEFT)
                else:
                    want = wedge.edge_id(x, z - 1, UP_RIGHT)
            except ValidationError:
                reasons.append(f"step {i} crosses no wedge edge")
                continue
            if eid != want:
                reasons.append(f"step {i} crossing id mismatch")
            elif config.open_edges[eid]:
                reasons.append(f"step {i} crosses an open edge")
        elif eid is not None:
            reasons.append(f"leftward step {i} should not cross")
    return ContourCheck(valid=not reasons, reasons=tuple(reasons))


def _boundary_segments(
    config: WedgeBondConfig, cluster: ClusterResult
) -> Dict[Tuple[int, int], List[Tuple[Tuple[int, int], str]]]:
    """Directed cell-boundary steps, keyed by their starting dual point.

    Each cluster vertex owns a diamond cell; sides against non-cluster
    territory are boundary.  Directions are chosen so the cluster stays
    on the right, which makes every upper side a rightward (closed-edge
    crossing) step and every lower side a leftward (free) step.
    """
    wedge = config.wedge
    in_cluster = np.zeros(wedge.n_vertices, dtype=bool)
    in_cluster[cluster.vertex_ids] = True

    def blocked(x: int, y: int) -> bool:
        return not (wedge.contains(x, y) and in_cluster[wedge.vertex_id(x, y)])

    out: Dict[Tuple[int, int], List[Tuple[Tuple[int, int], str]]] = {}

    def add(frm: Tuple[int, int], to: Tuple[int, int], step: str):
        out.setdefault(frm, []).append((to, step))

    for vid in cluster.vertex_ids:
        x, y = wedge.vertex_at(int(vid))
        if blocked(x - 1, y + 1):  # upper-left side, crossing the up-left edge
            add((x - 1, y), (x, y + 1), "ne")
        if blocked(x + 1, y + 1):  # upper-right side, crossing the up-right edge
            add((x, y + 1), (x + 1, y), "se")
        if blocked(x + 1, y - 1):  # lower-right side
            add((x + 1, y), (x, y - 1), "sw")
        if blocked(x - 1, y - 1):  # lower-left side
            add((x, y - 1), (x - 1, y), "nw")
    return out


def find_dual_contour(
    config: WedgeBondConfig, height: Optional[int] = None
) -> DualContour:
    """Extract a dual contour certifying that the origin cluster is finite.

    Walks the outer boundary of the cluster's cell union clockwise from
    the tip, takes the arc between the last left-side point before the
    first right-side point, and erases loops at pinch points.  Raises
    UndecidableAtHeightError when the cluster touches row H, since no
    contour inside this wedge can then separate it.
    """
    wedge = config.wedge
    if height is not None and height != wedge.height:
        raise ValidationError("height does not match the config's wedge")
    cluster = explore_cluster(config)
    if cluster.reached_top:
        raise UndecidableAtHeightError(
            f"origin cluster reaches row {wedge.height}; raise the height cap"
        )
    segments = _boundary_segments(config, cluster)

    # clockwise walk from the tip corner below the origin cell
    start = (0, -1)
    walk_pts = [start]
    walk_steps: List[str] = []
    here = start
    prev_step: Optional[str] = None
    while True:
        choices = segments[here]
        if len(choices) == 1 or prev_step is None:
            nxt, step = choices[0]
        else:
            # pinch point: first candidate clockwise from the reversed
            # incoming direction keeps the walk on the same face
            ridx = _CW_ORDER.index(_REVERSE[prev_step])
            by_step = {s: (p, s) for p, s in choices}
            for off in range(1, 5):
                cand = _CW_ORDER[(ridx + off) % 4]
                if cand in by_step:
                    nxt, step = by_step[cand]
                    break
        walk_pts.append(nxt)
        walk_steps.append(step)
        prev_step = step
        here = nxt
        if here == start:
            break

    first_right = next(
        i for i, p in enumerate(walk_pts) if on_right_side(*p)
    )
    last_left = max(
        i for i, p in enumerate(walk_pts[:first_right]) if on_left_side(*p)
    )
    pts = walk_pts[last_left : first_right + 1]
    steps = walk_steps[last_left:first_right]

    # loop erasure: truncate back to the first visit on any revisit
    seen: Dict[Tuple[int, int], int] = {}
    clean_pts: List[Tuple[int, int]] = []
    clean_steps: List[str] = []
    for i, p in enumerate(pts):
        if p in seen:
            j = seen[p]
            for q in clean_pts[j + 1 :]:
                del seen[q]
            del clean_pts[j + 1 :]
            del clean_steps[j:]
        else:
            seen[p] = len(clean_pts)
            clean_pts.append(p)
            if i > 0:
                clean_steps.append(steps[i - 1])
            continue
        if i > 0 and len(clean_pts) - 1 != seen[p]:
            raise AssertionError("loop erasure bookkeeping failed")

    crossed: List[Optional[int]] = []
    for i, step in enumerate(clean_steps):
        x, z = clean_pts[i]
        if step == "ne":
            crossed.append(wedge.edge_id(x + 1, z, UP_LEFT))
        elif step == "se":
            crossed.append(wedge.edge_id(x, z - 1, UP_RIGHT))
        else:
            crossed.append(None)
    return DualContour(
        points=tuple(clean_pts),
        steps=tuple(clean_steps),
        crossed_edge_ids=tuple(crossed),
    )


# ---------------------------------------------------------------------------
# coupling audit


@dataclass(frozen=True)
class CouplingAudit:
    """Sample-by-sample check that open clusters force live infections."""

    trials: int
    reached_top_trials: int
    cluster_vertex_checks: int
    violations: int
    open_fraction: float


def audit_block_coupling(model, trials: int, seed: int) -> CouplingAudit:
    """Replay each induced trial and verify the block-survival invariant.

    For every vertex (k, l) of the origin's open cluster, the paired
    contact trajectory (started from the model's initial set) must show
    an infected vertex among `model.invariant_vertices(k)` at lattice
    time l.  reached_top trials in particular certify an infection alive
    at the top-row time.
    """
    times = model.lattice_times()
    reached = 0
    checks = 0
    violations = 0
    open_edges = 0
    total_edges = 0
    for t in range(trials):
        rng = derive_stream(seed, t)
        sample = model.sample_graphical(rng)
        config = model.induced_config(sample)
        open_edges += int(config.open_edges.sum())
        total_edges += config.open_edges.size
        cluster = explore_cluster(config)
        if cluster.reached_top:
            reached += 1
        traj = evolve(sample, model.initial_infected(), snapshot_times=times)
        L = sample.box_half_width
        for vid in cluster.vertex_ids:
            k, l = config.wedge.vertex_at(int(vid))
            row = traj.snapshots[l]
            ok = any(row[v + L] for v in model.invariant_vertices(k))
            checks += 1
            if not ok:
                violations += 1
    return CouplingAudit(
        trials=trials,
        reached_top_trials=reached,
        cluster_vertex_checks=checks,
        violations=violations,
        open_fraction=open_edges / max(total_edges, 1),
    )
