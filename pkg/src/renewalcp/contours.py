"""Admissible contour paths in the quadrant and the closure-weight series.

An admissible path of length n is a self-avoiding lattice path in the
closed quadrant that starts at (0, k) with 1 <= k <= n - 1, immediately
steps right, keeps every intermediate vertex at height >= 1, and ends
with a single downward step (l, 1) -> (l, 0) for some l >= 1.  c_n
counts them; the weight series assigns each path epsilon^(n/4) and is
summable exactly in closed form.

These quadrant paths are the wedge's dual contours in friendlier
coordinates: (u, w) -> (u - w, u + w - 1) sends starts onto the left
wedge side, ends onto the right side, and the four unit steps onto the
four diagonal dual steps.  quadrant_to_dual applies that map.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterator, List, Optional, Tuple, Union

from .errors import SeriesDivergenceError, ValidationError

__all__ = [
    "AdmissiblePath",
    "CountBoundReport",
    "SeriesReport",
    "MIN_LENGTH",
    "MAX_LENGTH",
    "enumerate_contours",
    "count_contours",
    "count_contours_oracle",
    "count_relaxed_walks",
    "count_bound_check",
    "counting_bound",
    "is_admissible",
    "peierls_series",
    "peierls_closed_form",
    "threshold_check",
    "quadrant_to_dual",
    "rightward_step_count",
    "parity_class_sizes",
]

MIN_LENGTH = 2
MAX_LENGTH = 14

_STEPS = ((1, 0), (0, -1), (0, 1), (-1, 0))


@dataclass(frozen=True)
class AdmissiblePath:
    """Vertex list (v_0, ..., v_n) of one admissible quadrant path."""

    vertices: Tuple[Tuple[int, int], ...]

    @property
    def n_steps(self) -> int:
        return len(self.vertices) - 1

    @property
    def start_height(self) -> int:
        return self.vertices[0][1]

    @property
    def end_column(self) -> int:
        return self.vertices[-1][0]


def is_admissible(vertices) -> bool:
    """Check the five path conditions directly, with no shortcuts."""
    pts = list(vertices)
    n = len(pts) - 1
    if n < MIN_LENGTH:
        return False
    if len(set(pts)) != len(pts):
        return False
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        if abs(x1 - x0) + abs(y1 - y0) != 1:
            return False
    if any(x < 0 or y < 0 for x, y in pts):
        return False
    k = pts[0][1]
    if pts[0] != (0, k) or not 1 <= k <= n - 1:
        return False
    if pts[1] != (1, k):
        return False
    if any(y < 1 for _, y in pts[1:-1]):
        return False
    l = pts[-1][0]
    return l >= 1 and pts[-2] == (l, 1) and pts[-1] == (l, 0)


def _check_length(n: int) -> None:
    if not MIN_LENGTH <= n <= MAX_LENGTH:
        raise ValidationError(
            f"path length must lie in {MIN_LENGTH}..{MAX_LENGTH}, got {n}"
        )


def _walk(
    x: int,
    y: int,
    steps_left: int,
    visited: set,
    trail: Optional[List[Tuple[int, int]]],
    sink: Optional[List[AdmissiblePath]],
) -> int:
    # steps_left counts steps still to take, the final downward one
    # included; the path may only touch y = 0 on that last step
    if steps_left == 1:
        if y == 1 and x >= 1:
            if sink is not None:
                sink.append(AdmissiblePath(tuple(trail) + ((x, 0),)))
            return 1
        return 0
    found = 0
    for dx, dy in _STEPS:
        nx, ny = x + dx, y + dy
        if nx < 0 or ny < 1 or ny > steps_left - 1:
            continue
        if (nx, ny) in visited:
            continue
        visited.add((nx, ny))
        if trail is not None:
            trail.append((nx, ny))
        found += _walk(nx, ny, steps_left - 1, visited, trail, sink)
        if trail is not None:
            trail.pop()
        visited.remove((nx, ny))
    return found


def _count_for_start(n: int, k: int, sink: Optional[List[AdmissiblePath]]) -> int:
    visited = {(0, k), (1, k)}
    trail = [(0, k), (1, k)] if sink is not None else None
    return _walk(1, k, n - 1, visited, trail, sink)


def enumerate_contours(n: int) -> List[AdmissiblePath]:
    """All admissible paths of length n, grouped by starting height."""
    _check_length(n)
    out: List[AdmissiblePath] = []
    for k in range(1, n):
        _count_for_start(n, k, out)
    return out


def count_contours(n: int) -> int:
    """c_n without storing the paths; per-start subtotals summed."""
    _check_length(n)
    return sum(_count_for_start(n, k, None) for k in range(1, n))


def count_contours_oracle(n: int) -> int:
    """Independent count by non-backtracking step sequences.

    Walks the step tree in coordinates relative to the start, pruning
    only what is start-independent (quadrant edge, self-intersection),
    and resolves the starting height at each leaf: the final vertex
    sits at absolute height 0, so k is minus its relative height.
    """
    _check_length(n)
    path = [(0, 0), (1, 0)]
    occupied = {(0, 0), (1, 0)}
    total = 0

    def rec(steps_left: int) -> int:
        if steps_left == 0:
            if path[-1][1] != path[-2][1] - 1:
                return 0  # last step must be downward
            k = -path[-1][1]
            if not 1 <= k <= n - 1:
                return 0
            if path[-1][0] < 1:
                return 0
            if min(y for _, y in path[1:-1]) < 1 - k:
                return 0
            return 1
        x, y = path[-1]
        hits = 0
        for dx, dy in _STEPS:
            nxt = (x + dx, y + dy)
            if nxt[0] < 0 or nxt in occupied:
                continue
            path.append(nxt)
            occupied.add(nxt)
            hits += rec(steps_left - 1)
            occupied.remove(nxt)
            path.pop()
        return hits

    total = rec(n - 1)
    return total


def count_relaxed_walks(n: int) -> int:
    """Walks kept by the proof's relaxation: forbid only the immediate
    backtrack.  Counted by a transfer recursion over the last step, not
    by the closed formula, so the (n-1)*3^(n-2) bound is checkable."""
    _check_length(n)
    by_last = {0: 1}  # first step is fixed; index into _STEPS
    for _ in range(n - 2):
        nxt = {}
        for last, cnt in by_last.items():
            lx, ly = _STEPS[last]
            for j, (dx, dy) in enumerate(_STEPS):
                if (dx, dy) == (-lx, -ly):
                    continue
                nxt[j] = nxt.get(j, 0) + cnt
        by_last = nxt
    return (n - 1) * sum(by_last.values())


def counting_bound(n: int) -> int:
    return (n - 1) * 3 ** (n - 2)


@dataclass(frozen=True)
class CountBoundReport:
    n: int
    count: int
    bound: int
    ok: bool


def count_bound_check(n: int) -> CountBoundReport:
    """c_n against the (n-1)*3^(n-2) counting bound."""
    c = count_contours(n)
    b = counting_bound(n)
    return CountBoundReport(n=n, count=c, bound=b, ok=c <= b)


# ---------------------------------------------------------------------------
# weight series


def _as_positive_fraction(value) -> Fraction:
    try:
        frac = Fraction(value)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"not a usable weight: {value!r}") from exc
    if frac <= 0:
        raise ValidationError("weight must be positive")
    return frac


def _exact_fourth_root(frac: Fraction) -> Optional[Fraction]:
    def iroot4(m: int) -> Optional[int]:
        r = round(m ** 0.25)
        for cand in (r - 1, r, r + 1):
            if cand >= 0 and cand ** 4 == m:
                return cand
        return None

    p = iroot4(frac.numerator)
    q = iroot4(frac.denominator)
    if p is None or q is None:
        return None
    return Fraction(p, q)


def _require_convergent(frac: Fraction) -> None:
    # the series has ratio 3 * eps^(1/4); divergence iff eps >= 3^-4
    if 81 * frac >= 1:
        raise SeriesDivergenceError(
            f"series diverges for weight {float(frac)} >= 3^-4"
        )


def peierls_closed_form(epsilon) -> Union[Fraction, float]:
    """S(epsilon) = r^2 / (1 - 3r)^2 with r the fourth root of epsilon.

    Returns an exact Fraction whenever epsilon has a rational fourth
    root (all dyadic 2^-4j weights do), a float otherwise.
    """
    frac = _as_positive_fraction(epsilon)
    _require_convergent(frac)
    r = _exact_fourth_root(frac)
    if r is not None:
        return (r * r) / (1 - 3 * r) ** 2
    rf = float(frac) ** 0.25
    return rf * rf / (1.0 - 3.0 * rf) ** 2


Number = Union[Fraction, float]


@dataclass(frozen=True)
class SeriesReport:
    """Partial sum, exact tail, and closed form; Fractions whenever the
    fourth root of the weight is rational, floats otherwise."""

    epsilon: float
    n_max: int
    partial_sum: Number
    tail_bound: Number
    closed_form: Number

    @property
    def total(self) -> Number:
        return self.partial_sum + self.tail_bound


def peierls_series(epsilon, n_max: int) -> SeriesReport:
    """Partial sum of sum_n (n-1) 3^(n-2) epsilon^(n/4) plus its tail.

    The tail past n_max is summed exactly (the remainder of a
    differentiated geometric series), so partial_sum + tail_bound
    reproduces the closed form.  Rational arithmetic keeps the boundary
    weight honest: at 2^-8 the partial sum must sit strictly below one,
    a distinction double precision cannot hold past a few dozen terms.
    """
    frac = _as_positive_fraction(epsilon)
    _require_convergent(frac)
    if n_max < 2:
        raise ValidationError("n_max must be at least 2")
    r_exact = _exact_fourth_root(frac)
    if r_exact is not None:
        r: Number = r_exact
        one: Number = Fraction(1)
    else:
        r = float(frac) ** 0.25
        one = 1.0
    t = 3 * r
    partial = r * r * 0  # zero of the working type
    weight = r * r  # (n-1) t^(n-2) r^2 at n = 2
    for n in range(2, n_max + 1):
        partial += (n - 1) * weight
        weight *= t
    # sum_{m >= M} (m+1) t^m = t^M ((M+1) - M t) / (1-t)^2 with M = n_max - 1
    M = n_max - 1
    tail = r * r * t ** M * ((M + 1) - M * t) / (one - t) ** 2
    closed = r * r / (one - t) ** 2
    return SeriesReport(
        epsilon=float(frac),
        n_max=n_max,
        partial_sum=partial,
        tail_bound=tail,
        closed_form=closed,
    )


def threshold_check(epsilon) -> bool:
    """Whether the series value is strictly below one.

    Reports the formula verbatim; a divergent series is simply not
    below one.  The dyadic boundary weight 2^-8 lands exactly on one
    and therefore fails the strict inequality.
    """
    frac = _as_positive_fraction(epsilon)
    if 81 * frac >= 1:
        return False
    return peierls_closed_form(frac) < 1


# ---------------------------------------------------------------------------
# correspondence with the wedge dual


def quadrant_to_dual(path: AdmissiblePath) -> Tuple[Tuple[int, int], ...]:
    """Map quadrant vertices onto wedge-dual vertices.

    (u, w) -> (u - w, u + w - 1) takes (0, k) to the left side point
    (-k, k - 1), (l, 0) to the right side point (l, l - 1), and the
    unit steps right/down/up/left onto the dual steps that cross an
    up-left edge, cross an up-right edge, or slide freely.
    """
    return tuple((u - w, u + w - 1) for u, w in path.vertices)


def rightward_step_count(path: AdmissiblePath) -> int:
    """Steps that cross a wedge edge under the dual correspondence:
    quadrant right-steps and down-steps."""
    count = 0
    for (x0, y0), (x1, y1) in zip(path.vertices, path.vertices[1:]):
        if (x1 - x0, y1 - y0) in ((1, 0), (0, -1)):
            count += 1
    return count


def parity_class_sizes(path: AdmissiblePath) -> Tuple[int, int]:
    """Crossing steps split by the parity of the crossed edge's column.

    The crossed column equals u - w at the step's start, the dual
    x-coordinate under the correspondence above.  Returns (even, odd).
    """
    even = odd = 0
    for (x0, y0), (x1, y1) in zip(path.vertices, path.vertices[1:]):
        if (x1 - x0, y1 - y0) in ((1, 0), (0, -1)):
            if (x0 - y0) % 2 == 0:
                even += 1
            else:
                odd += 1
    return even, odd
