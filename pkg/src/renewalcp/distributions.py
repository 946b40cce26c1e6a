"""Interarrival laws for renewal recovery clocks.

A law is described by an `InterarrivalSpec`: a purely atomic part (finite
list of positive atoms) plus at most one continuous family, with masses
summing to one.  Supported continuous families:

* `Exponential(rate)`
* `UniformInterval(lo, hi)`
* `CantorShiftGeometric(q)` -- X + G - 1 where X is the Cantor-measure
  draw on [0, 1] and G is geometric on {1, 2, ...} with success
  probability q.  Singular continuous, unbounded support, no atoms.
* `TabulatedCdf(knots)` -- piecewise-linear CDF sampled by inverse
  transform.

Specs are immutable after validation and safe to share across threads.
Samplers take a `numpy.random.Generator`; estimators elsewhere derive
their own generators per chunk (see `streams`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .constants import DEFAULT_MARK_CAP
from .errors import ResourceLimitError, ValidationError

CANTOR_DIGITS = 64  # ternary depth of the Cantor sampler

_ZERO_RESAMPLE_ROUNDS = 100


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        if not (self.rate > 0.0 and math.isfinite(self.rate)):
            raise ValidationError("exponential rate must be positive and finite")


@dataclass(frozen=True)
class UniformInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (0.0 <= self.lo < self.hi and math.isfinite(self.hi)):
            raise ValidationError("uniform interval requires 0 <= lo < hi < inf")


@dataclass(frozen=True)
class CantorShiftGeometric:
    q: float = 0.5

    def __post_init__(self):
        if not (0.0 < self.q < 1.0):
            raise ValidationError("geometric parameter q must lie in (0, 1)")


@dataclass(frozen=True)
class TabulatedCdf:
    """Piecewise-linear CDF given as ((x0, F0), ..., (xk, Fk)), Fk == 1.

    A positive F0 puts an atom of mass F0 at x0; flat segments put gaps in
    the support.  Sampling is inverse transform with linear interpolation.
    """

    knots: tuple

    def __post_init__(self):
        knots = tuple((float(x), float(f)) for x, f in self.knots)
        object.__setattr__(self, "knots", knots)
        if len(knots) < 2:
            raise ValidationError("tabulated cdf needs at least two knots")
        xs = [x for x, _ in knots]
        fs = [f for _, f in knots]
        if any(b < a for a, b in zip(xs, xs[1:])):
            raise ValidationError("tabulated cdf x-knots must be non-decreasing")
        if any(b < a for a, b in zip(fs, fs[1:])):
            raise ValidationError("tabulated cdf F-knots must be non-decreasing")
        if fs[-1] != 1.0:
            raise ValidationError("tabulated cdf must end at F == 1")
        if fs[0] < 0.0:
            raise ValidationError("tabulated cdf F-knots must be nonnegative")
        if xs[0] < 0.0:
            raise ValidationError("tabulated cdf support must be nonnegative")


ContinuousPart = Union[Exponential, UniformInterval, CantorShiftGeometric, TabulatedCdf]


@dataclass(frozen=True)
class InterarrivalSpec:
    """Validated interarrival law: atoms plus an optional continuous part.

    `atoms` is a tuple of (point, mass) with strictly increasing positive
    points and strictly positive masses; `continuous_mass` is the weight
    of `continuous`.  Total mass must equal one within 1e-12.  `span` is
    set only for arithmetic laws (every atom an integer multiple of it)
    and unlocks exact lattice arithmetic downstream.
    """

    atoms: tuple
    continuous: Optional[ContinuousPart] = None
    continuous_mass: float = 0.0
    span: Optional[float] = None

    def __post_init__(self):
        atoms = tuple((float(p), float(m)) for p, m in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        for point, mass in atoms:
            if not (point > 0.0 and math.isfinite(point)):
                raise ValidationError("atom points must be positive and finite")
            if not (mass > 0.0):
                raise ValidationError("atom masses must be strictly positive")
        points = [p for p, _ in atoms]
        if any(b <= a for a, b in zip(points, points[1:])):
            raise ValidationError("atom points must be strictly increasing")
        if not (0.0 <= self.continuous_mass <= 1.0):
            raise ValidationError("continuous_mass must lie in [0, 1]")
        if (self.continuous is None) != (self.continuous_mass == 0.0):
            raise ValidationError(
                "continuous part and continuous_mass must be present together"
            )
        if self.continuous is not None and not isinstance(
            self.continuous,
            (Exponential, UniformInterval, CantorShiftGeometric, TabulatedCdf),
        ):
            raise ValidationError(
                "continuous part must be an Exponential, UniformInterval, "
                "CantorShiftGeometric, or TabulatedCdf instance"
            )
        total = sum(m for _, m in atoms) + self.continuous_mass
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(f"masses sum to {total!r}, expected 1 within 1e-12")
        if self.span is not None:
            if not (self.span > 0.0):
                raise ValidationError("span must be positive")
            for point, _ in atoms:
                k = point / self.span
                if abs(k - round(k)) > 1e-9 * max(1.0, abs(k)):
                    raise ValidationError(
                        "span set but atom %r is not a multiple of it" % point
                    )

    @property
    def atomic_mass(self) -> float:
        return sum(m for _, m in self.atoms)

    @property
    def is_arithmetic(self) -> bool:
        return self.span is not None and self.continuous is None

    def atom_multipliers(self) -> np.ndarray:
        """Integer lattice positions of the atoms (arithmetic laws only)."""
        if self.span is None:
            raise ValidationError("law has no arithmetic span")
        return np.array([round(p / self.span) for p, _ in self.atoms], dtype=np.int64)


@dataclass(frozen=True)
class MeanValue:
    """Mean of an interarrival law; `infinite` marks a non-integrable law."""

    value: float
    infinite: bool = False


# ---------------------------------------------------------------------------
# constructors


def dirac(point: float) -> InterarrivalSpec:
    return InterarrivalSpec(atoms=((point, 1.0),), span=float(point))


def arithmetic(masses, span: float = 1.0) -> InterarrivalSpec:
    """Law on span * {1, 2, ...}; `masses` maps multiplier -> probability."""
    if isinstance(masses, Mapping):
        pairs = sorted(masses.items())
    else:
        pairs = sorted((int(k), float(m)) for k, m in masses)
    for k, _ in pairs:
        if int(k) != k or k < 1:
            raise ValidationError("arithmetic multipliers must be integers >= 1")
    atoms = tuple((span * int(k), float(m)) for k, m in pairs)
    return InterarrivalSpec(atoms=atoms, span=float(span))


def exponential(rate: float) -> InterarrivalSpec:
    return InterarrivalSpec(atoms=(), continuous=Exponential(rate), continuous_mass=1.0)


def uniform_interval(lo: float, hi: float) -> InterarrivalSpec:
    return InterarrivalSpec(
        atoms=(), continuous=UniformInterval(lo, hi), continuous_mass=1.0
    )


def cantor_geometric(q: float = 0.5) -> InterarrivalSpec:
    return InterarrivalSpec(
        atoms=(), continuous=CantorShiftGeometric(q), continuous_mass=1.0
    )


def tabulated(knots: Iterable) -> InterarrivalSpec:
    return InterarrivalSpec(
        atoms=(), continuous=TabulatedCdf(tuple(knots)), continuous_mass=1.0
    )


def mixture(p: float, z_atoms, y_continuous) -> InterarrivalSpec:
    """Atomic law Z with probability p, continuous law Y with 1 - p.

    `z_atoms` lists (point, mass) for Z itself; masses must sum to one.
    `y_continuous` is a continuous-part instance, or a purely continuous
    spec (e.g. from `exponential` / `uniform_interval`), which unwraps.
    """
    if not (0.0 < p < 1.0):
        raise ValidationError("mixture weight p must lie in (0, 1)")
    if isinstance(y_continuous, InterarrivalSpec):
        if y_continuous.atoms or y_continuous.continuous is None:
            raise ValidationError(
                "mixture continuous component must be a purely continuous law"
            )
        y_continuous = y_continuous.continuous
    z_atoms = sorted((float(pt), float(m)) for pt, m in z_atoms)
    z_total = sum(m for _, m in z_atoms)
    if abs(z_total - 1.0) > 1e-12:
        raise ValidationError("atomic component masses must sum to 1")
    atoms = tuple((pt, p * m) for pt, m in z_atoms)
    return InterarrivalSpec(atoms=atoms, continuous=y_continuous, continuous_mass=1.0 - p)


# ---------------------------------------------------------------------------
# JSON descriptors (the on-disk format used by the CLI)


def spec_from_json(obj) -> InterarrivalSpec:
    """Build a spec from a JSON-style dict descriptor.

    Recognised forms:
      {"type": "arithmetic", "span": d, "masses": [[k, m], ...]}
      {"type": "exponential", "rate": r}
      {"type": "uniform", "lo": a, "hi": b}
      {"type": "cantor_geometric", "q": q}
      {"type": "mixture", "p": p, "atomic": [[x, m], ...],
       "continuous": <descriptor>}
      {"type": "tabulated", "knots": [[x, F], ...]}
      {"type": "dirac", "point": a}
    """
    if not isinstance(obj, Mapping):
        raise ValidationError("distribution descriptor must be an object")
    kind = obj.get("type")
    known = {
        "arithmetic": {"type", "span", "masses"},
        "exponential": {"type", "rate"},
        "uniform": {"type", "lo", "hi"},
        "cantor_geometric": {"type", "q"},
        "mixture": {"type", "p", "atomic", "continuous"},
        "tabulated": {"type", "knots"},
        "dirac": {"type", "point"},
    }
    if kind not in known:
        raise ValidationError(f"unknown distribution type {kind!r}")
    extra = set(obj) - known[kind]
    if extra:
        raise ValidationError(f"unknown fields for {kind!r}: {sorted(extra)}")
    if kind == "arithmetic":
        return arithmetic(obj["masses"], span=float(obj.get("span", 1.0)))
    if kind == "exponential":
        return exponential(float(obj["rate"]))
    if kind == "uniform":
        return uniform_interval(float(obj["lo"]), float(obj["hi"]))
    if kind == "cantor_geometric":
        return cantor_geometric(float(obj.get("q", 0.5)))
    if kind == "tabulated":
        return tabulated(tuple((float(x), float(f)) for x, f in obj["knots"]))
    if kind == "dirac":
        return dirac(float(obj["point"]))
    # mixture
    cont = _continuous_from_json(obj["continuous"])
    return mixture(float(obj["p"]), obj["atomic"], cont)


def _continuous_from_json(obj) -> ContinuousPart:
    kind = obj.get("type")
    if kind == "exponential":
        return Exponential(float(obj["rate"]))
    if kind == "uniform":
        return UniformInterval(float(obj["lo"]), float(obj["hi"]))
    if kind == "cantor_geometric":
        return CantorShiftGeometric(float(obj.get("q", 0.5)))
    if kind == "tabulated":
        return TabulatedCdf(tuple((float(x), float(f)) for x, f in obj["knots"]))
    raise ValidationError(f"unknown continuous distribution type {kind!r}")


def spec_to_json(spec: InterarrivalSpec):
    """Inverse of `spec_from_json` up to descriptor normalisation."""
    if spec.is_arithmetic:
        mult = spec.atom_multipliers()
        return {
            "type": "arithmetic",
            "span": spec.span,
            "masses": [[int(k), m] for k, (_, m) in zip(mult, spec.atoms)],
        }
    cont = _continuous_to_json(spec.continuous) if spec.continuous else None
    if not spec.atoms:
        return cont
    p = spec.atomic_mass
    return {
        "type": "mixture",
        "p": p,
        "atomic": [[pt, m / p] for pt, m in spec.atoms],
        "continuous": cont,
    }


def _continuous_to_json(part: ContinuousPart):
    if isinstance(part, Exponential):
        return {"type": "exponential", "rate": part.rate}
    if isinstance(part, UniformInterval):
        return {"type": "uniform", "lo": part.lo, "hi": part.hi}
    if isinstance(part, CantorShiftGeometric):
        return {"type": "cantor_geometric", "q": part.q}
    return {"type": "tabulated", "knots": [list(k) for k in part.knots]}


# ---------------------------------------------------------------------------
# means


def mean(spec: InterarrivalSpec) -> MeanValue:
    """Exact mean where the family allows it; tabulated laws use the
    (exact) trapezoid of the piecewise-linear survival function."""
    total = sum(p * m for p, m in spec.atoms)
    part = spec.continuous
    if part is None:
        return MeanValue(total)
    if isinstance(part, Exponential):
        cont = 1.0 / part.rate
    elif isinstance(part, UniformInterval):
        cont = 0.5 * (part.lo + part.hi)
    elif isinstance(part, CantorShiftGeometric):
        # E[Cantor] = 1/2, E[G] = 1/q, shifted down by one.
        cont = 0.5 + 1.0 / part.q - 1.0
    else:
        knots = part.knots
        x0, f0 = knots[0]
        cont = x0 * f0  # atom at the first knot, if any
        for (xa, fa), (xb, fb) in zip(knots, knots[1:]):
            cont += 0.5 * (xa + xb) * (fb - fa)
    return MeanValue(total + spec.continuous_mass * cont)


# ---------------------------------------------------------------------------
# sampling


def sample_cantor(rng, depth: int = CANTOR_DIGITS) -> float:
    """One draw from the Cantor measure: sum of 2 * B_i / 3**i, B_i iid
    fair bits, truncated at `depth` ternary digits."""
    bits = rng.integers(0, 2, size=depth)
    return _cantor_from_bits(bits[None, :])[0]


def _cantor_from_bits(bits: np.ndarray) -> np.ndarray:
    depth = bits.shape[1]
    weights = 2.0 * np.power(3.0, -np.arange(1, depth + 1))
    return bits @ weights


def _sample_continuous(part: ContinuousPart, size: int, rng) -> np.ndarray:
    if isinstance(part, Exponential):
        return rng.exponential(1.0 / part.rate, size=size)
    if isinstance(part, UniformInterval):
        return rng.uniform(part.lo, part.hi, size=size)
    if isinstance(part, CantorShiftGeometric):
        bits = rng.integers(0, 2, size=(size, CANTOR_DIGITS))
        return _cantor_from_bits(bits) + rng.geometric(part.q, size=size) - 1.0
    # TabulatedCdf: inverse transform on the piecewise-linear CDF.
    xs = np.array([x for x, _ in part.knots])
    fs = np.array([f for _, f in part.knots])
    return np.interp(rng.random(size), fs, xs)


def sample_batch(spec: InterarrivalSpec, size: int, rng) -> np.ndarray:
    """`size` iid draws.  Zero draws (numerical underflow at the support
    edge) are rejected and resampled; the law itself has no mass at 0."""
    out = np.empty(size)
    p_at = spec.atomic_mass
    branch = rng.random(size)
    take_atom = branch < p_at
    n_at = int(take_atom.sum())
    if n_at:
        points = np.array([p for p, _ in spec.atoms])
        cum = np.cumsum([m for _, m in spec.atoms])
        idx = np.searchsorted(cum, branch[take_atom], side="right")
        idx = np.minimum(idx, len(points) - 1)
        out[take_atom] = points[idx]
    n_cont = size - n_at
    if n_cont:
        out[~take_atom] = _sample_continuous(spec.continuous, n_cont, rng)
    for _ in range(_ZERO_RESAMPLE_ROUNDS):
        bad = out <= 0.0
        if not bad.any():
            return out
        out[bad] = sample_batch(spec, int(bad.sum()), rng)
    raise ResourceLimitError("interarrival sampler kept producing zeros")


def sample_interarrival(spec: InterarrivalSpec, rng) -> float:
    """One positive interarrival draw."""
    return float(sample_batch(spec, 1, rng)[0])


def sample_multiplier_batch(spec: InterarrivalSpec, size: int, rng) -> np.ndarray:
    """Integer lattice draws for an arithmetic law (value = span * draw)."""
    if not spec.is_arithmetic:
        raise ValidationError("multiplier sampling needs an arithmetic law")
    mult = spec.atom_multipliers()
    cum = np.cumsum([m for _, m in spec.atoms])
    idx = np.searchsorted(cum, rng.random(size) * cum[-1], side="right")
    return mult[np.minimum(idx, len(mult) - 1)]


# ---------------------------------------------------------------------------
# renewal marks


@dataclass(frozen=True)
class MarkBatch:
    """Flat renewal marks for a batch of independent processes.

    `times[i]` belongs to process `owners[i]`; within one owner the times
    are strictly increasing and the flat arrays are sorted owner-major.
    `steps` carries the exact integer lattice positions for arithmetic
    laws, else None.
    """

    times: np.ndarray
    owners: np.ndarray
    n_processes: int
    horizon: float
    steps: Optional[np.ndarray] = None

    def per_process(self) -> list:
        out = []
        counts = np.bincount(self.owners, minlength=self.n_processes)
        offsets = np.concatenate(([0], np.cumsum(counts)))
        for i in range(self.n_processes):
            out.append(self.times[offsets[i] : offsets[i + 1]])
        return out

    def per_process_steps(self) -> Optional[list]:
        if self.steps is None:
            return None
        counts = np.bincount(self.owners, minlength=self.n_processes)
        offsets = np.concatenate(([0], np.cumsum(counts)))
        return [
            self.steps[offsets[i] : offsets[i + 1]] for i in range(self.n_processes)
        ]


def _guard_expected_marks(spec, horizon, n_processes, cap):
    mv = mean(spec)
    if mv.infinite or mv.value <= 0:
        return
    expected = n_processes * (horizon / mv.value + 1.0)
    if expected > cap:
        raise ResourceLimitError(
            f"expected {expected:.3g} renewal marks exceeds cap {cap:.3g}"
        )


def sample_renewal_marks_batch(
    spec: InterarrivalSpec,
    horizon: float,
    n_processes: int,
    rng,
    cap: int = DEFAULT_MARK_CAP,
) -> MarkBatch:
    """Renewal marks on (0, horizon] for `n_processes` independent clocks.

    The time origin is not a mark.  Arithmetic laws accumulate integer
    lattice steps so marks are exact multiples of the span.
    """
    if horizon < 0:
        raise ValidationError("horizon must be nonnegative")
    _guard_expected_marks(spec, horizon, n_processes, cap)
    times_parts, owner_parts, step_parts = [], [], []
    arithmetic_law = spec.is_arithmetic
    if arithmetic_law:
        span = spec.span
        n_max = int(math.floor(horizon / span + 1e-9))
        sums = np.zeros(n_processes, dtype=np.int64)
        active = np.arange(n_processes)
        while active.size:
            draw = sample_multiplier_batch(spec, active.size, rng)
            sums[active] += draw
            alive = sums[active] <= n_max
            hit = active[alive]
            times_parts.append(span * sums[hit].astype(float))
            owner_parts.append(hit)
            step_parts.append(sums[hit].copy())
            active = hit
    else:
        sums = np.zeros(n_processes)
        active = np.arange(n_processes)
        while active.size:
            draw = sample_batch(spec, active.size, rng)
            sums[active] += draw
            alive = sums[active] <= horizon
            hit = active[alive]
            times_parts.append(sums[hit].copy())
            owner_parts.append(hit)
            active = hit
    if times_parts:
        times = np.concatenate(times_parts)
        owners = np.concatenate(owner_parts).astype(np.int64)
        steps = np.concatenate(step_parts) if arithmetic_law else None
    else:
        times = np.empty(0)
        owners = np.empty(0, dtype=np.int64)
        steps = np.empty(0, dtype=np.int64) if arithmetic_law else None
    order = np.lexsort((times, owners))
    times = times[order]
    owners = owners[order]
    if steps is not None:
        steps = steps[order]
    return MarkBatch(times, owners, n_processes, float(horizon), steps)


def sample_renewal_marks(
    spec: InterarrivalSpec, horizon: float, rng, cap: int = DEFAULT_MARK_CAP
) -> np.ndarray:
    """Sorted renewal marks of a single clock on (0, horizon]."""
    return sample_renewal_marks_batch(spec, horizon, 1, rng, cap=cap).times
