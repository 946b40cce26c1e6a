"""Renewal measures: exact lattice recursion, atomic convolution series,
and Monte Carlo window-mass criteria.

The renewal measure of an interarrival law mu is U = sum of its n-fold
convolutions, n >= 0; U(B) is the expected number of renewal epochs in B
(the n = 0 term is the unit at 0 and never enters half-open windows
(a, a+kappa] with a >= 0).  Three computation routes live here:

* exact recursion u_k on the lattice for arithmetic laws,
* truncated convolution series for the atomic part (the atomic part of
  U is the series over convolutions of the atomic part of mu alone,
  since convolving anything with a continuous measure is continuous),
* Monte Carlo interval/window estimates for the full measure.

Pass/fail window reports compare against half the closure threshold
(see `constants`).  Monte Carlo reports are conservative: the decision
adds the 95% CI half-width, and window sups are estimated with covering
windows one fine bin longer than requested, so the grid maximum is an
upper estimate of the sup over all real-valued window positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .constants import DEFAULT_MARK_CAP, DEFAULT_MASS_TOLERANCE, HALF_CLOSURE_THRESHOLD
from .distributions import (
    InterarrivalSpec,
    mean,
    sample_renewal_marks_batch,
)
from .errors import ResourceLimitError, ValidationError

_Z95 = 1.959963984540054  # two-sided 95% normal quantile
_EDGE_SLACK = 1e-9  # guards bin assignment against float noise at edges

MassInput = Union[Mapping, Iterable, InterarrivalSpec]


# ---------------------------------------------------------------------------
# exact lattice recursion


@dataclass(frozen=True)
class RenewalMassTable:
    """Masses u_k = U({span * k}) for k = 0..K, u_0 = 1."""

    span: float
    masses: np.ndarray
    source: str  # exact-recursion | truncated-convolution | monte-carlo

    def __post_init__(self):
        if self.source == "exact-recursion" and self.masses[0] != 1.0:
            raise ValidationError("exact recursion tables start at u_0 = 1")
        if (np.asarray(self.masses) < 0).any():
            raise ValidationError("renewal masses must be nonnegative")


@dataclass(frozen=True)
class SupMassReport:
    value: float
    at_index: int
    degenerate: bool  # single-support-point laws fall outside the mass bound


def _as_mass_function(masses: MassInput):
    if isinstance(masses, InterarrivalSpec):
        if not masses.is_arithmetic:
            raise ValidationError("lattice recursion needs an arithmetic law")
        mult = masses.atom_multipliers()
        return {int(k): m for k, (_, m) in zip(mult, masses.atoms)}
    if isinstance(masses, Mapping):
        pairs = masses.items()
    else:
        pairs = masses
    out = {}
    for k, m in pairs:
        if int(k) != k or k < 1:
            raise ValidationError("mass function support must be integers >= 1")
        out[int(k)] = float(m)
    return out


def arithmetic_renewal_masses(
    masses: MassInput, count: int, span: float = 1.0
) -> RenewalMassTable:
    """u_0 = 1, u_k = sum_j f_j u_{k-j}: expected renewals at lattice site k."""
    f = _as_mass_function(masses)
    if not f:
        raise ValidationError("empty mass function")
    total = sum(f.values())
    if abs(total - 1.0) > 1e-9:
        raise ValidationError(f"mass function sums to {total!r}, expected 1")
    if count < 1:
        raise ValidationError("count must be >= 1")
    u = np.zeros(count + 1)
    u[0] = 1.0
    support = sorted(f)
    for k in range(1, count + 1):
        acc = 0.0
        for j in support:
            if j > k:
                break
            acc += f[j] * u[k - j]
        u[k] = acc
    return RenewalMassTable(span=float(span), masses=u, source="exact-recursion")


def renewal_mass_limit(masses: MassInput, span: float = 1.0) -> float:
    """Long-run lattice mass span/m (the discrete renewal limit)."""
    f = _as_mass_function(masses)
    m = span * sum(k * v for k, v in f.items())
    return span / m


def sup_arithmetic_mass(table: RenewalMassTable, k_min: int = 1) -> SupMassReport:
    """Largest u_k over k >= k_min, flagging degenerate (single-atom) laws.

    Degenerate laws hit 1.0 infinitely often, so the sup certifies
    nothing for them; callers must branch on the flag.
    """
    if table.source != "exact-recursion":
        raise ValidationError("sup over lattice masses needs an exact table")
    if k_min < 1:
        raise ValidationError("k_min must be >= 1")
    tail = table.masses[k_min:]
    if tail.size == 0:
        raise ValidationError("table shorter than k_min")
    at = int(np.argmax(tail)) + k_min
    # u_k = 1 recurs exactly on multiples of the support point for
    # degenerate laws; detect via a unit mass anywhere past 0.
    degenerate = bool(np.any(tail >= 1.0))
    return SupMassReport(value=float(table.masses[at]), at_index=at, degenerate=degenerate)


def choose_block_exponent(
    sup_mass: float, threshold: float = HALF_CLOSURE_THRESHOLD
) -> int:
    """Smallest M with sup_mass**M < threshold."""
    if not (0.0 < sup_mass < 1.0):
        raise ValidationError("need 0 < sup_mass < 1 to pick a block exponent")
    m = 1
    value = sup_mass
    while value >= threshold:
        m += 1
        value *= sup_mass
        if m > 10_000:
            raise ResourceLimitError("block exponent search did not converge")
    return m


# ---------------------------------------------------------------------------
# atomic convolution series


@dataclass(frozen=True)
class AtomicMeasure:
    """Truncated atomic part of the renewal measure on (0, infinity).

    `truncation_deficit` bounds the total mass of all omitted
    convolution orders; every conservative decision adds it.
    """

    points: np.ndarray
    masses: np.ndarray
    truncation_deficit: float

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())


def _extract_atoms(source) -> tuple:
    if isinstance(source, InterarrivalSpec):
        pairs = source.atoms
    else:
        pairs = tuple((float(p), float(m)) for p, m in source)
    points = np.array([p for p, _ in pairs])
    masses = np.array([m for _, m in pairs])
    return points, masses


def convolve_atoms(a: tuple, b: tuple, decimals: int = 12) -> tuple:
    """Convolution of two finite atomic measures given as (points, masses).

    Points within 10**-decimals collapse to one atom.
    """
    pa, ma = a
    pb, mb = b
    if len(pa) == 0 or len(pb) == 0:
        return np.empty(0), np.empty(0)
    grid = np.round(pa[:, None] + pb[None, :], decimals).ravel()
    wts = (ma[:, None] * mb[None, :]).ravel()
    points, inverse = np.unique(grid, return_inverse=True)
    masses = np.zeros(points.size)
    np.add.at(masses, inverse, wts)
    return points, masses


def atomic_renewal_measure(
    source,
    mass_tolerance: float = DEFAULT_MASS_TOLERANCE,
    max_atoms: int = 200_000,
) -> AtomicMeasure:
    """Sum of n-fold convolutions (n >= 1) of the atomic part of mu.

    Truncates once the omitted tail p**(n+1)/(1-p) drops below
    `mass_tolerance` (p = total atomic mass).  The n = 0 unit at 0 is
    excluded; windows (a, a+kappa] with a >= 0 never see it.
    """
    points, masses = _extract_atoms(source)
    if mass_tolerance <= 0:
        raise ValidationError("mass_tolerance must be positive")
    if points.size == 0:
        return AtomicMeasure(np.empty(0), np.empty(0), 0.0)
    p_at = float(masses.sum())
    if p_at >= 1.0 - 1e-15:
        raise ValidationError(
            "atomic mass 1 makes the convolution series non-summable in "
            "total mass; use arithmetic_renewal_masses for lattice laws"
        )
    total_points = points.copy()
    total_masses = masses.copy()
    gen = (points, masses)
    n = 1
    while p_at ** (n + 1) / (1.0 - p_at) >= mass_tolerance:
        gen = convolve_atoms(gen, (points, masses))
        gp, gm = gen
        merged = np.concatenate([total_points, gp])
        wts = np.concatenate([total_masses, gm])
        uniq, inverse = np.unique(np.round(merged, 12), return_inverse=True)
        acc = np.zeros(uniq.size)
        np.add.at(acc, inverse, wts)
        total_points, total_masses = uniq, acc
        if total_points.size > max_atoms:
            raise ResourceLimitError(
                f"atomic series exceeded {max_atoms} support points"
            )
        n += 1
    deficit = p_at ** (n + 1) / (1.0 - p_at)
    return AtomicMeasure(total_points, total_masses, float(deficit))


# ---------------------------------------------------------------------------
# window reports


@dataclass(frozen=True)
class WindowReport:
    """Supremum of window masses (a, a + kappa] against a threshold.

    For exact atomic reports, `sup_estimate` already includes the
    truncation deficit and `ci_halfwidth` is 0, so `passes` is exactly
    `sup_estimate < threshold`.  Monte Carlo reports keep the raw
    estimate in `sup_estimate` and decide on estimate + CI half-width
    (conservative); both conventions give passes == (decision value <
    threshold).
    """

    kappa: float
    sup_estimate: float
    window_start: float
    threshold: float
    passes: bool
    ci_halfwidth: float = 0.0
    source: str = "exact-atomic"

    @property
    def decision_value(self) -> float:
        return self.sup_estimate + self.ci_halfwidth


def sup_window_mass(
    measure: AtomicMeasure,
    kappa: float,
    threshold: float = HALF_CLOSURE_THRESHOLD,
) -> WindowReport:
    """Exact sup over a >= 0 of the truncated measure's (a, a+kappa] mass.

    The sup is attained by a window whose right end sits at an atom:
    sliding any window down until its right end hits its largest atom
    never loses mass.  Candidates are therefore a_j = max(q_j - kappa, 0)
    over atoms q_j.  The truncation deficit is added to the result.
    """
    if kappa <= 0:
        raise ValidationError("kappa must be positive")
    deficit = measure.truncation_deficit
    if measure.points.size == 0:
        return WindowReport(
            kappa=kappa,
            sup_estimate=deficit,
            window_start=0.0,
            threshold=threshold,
            passes=deficit < threshold,
        )
    points = measure.points
    csum = np.concatenate(([0.0], np.cumsum(measure.masses)))
    starts = np.maximum(points - kappa, 0.0)
    lo = np.searchsorted(points, starts, side="right")
    hi = np.searchsorted(points, starts + kappa, side="right")
    # float slack must never exclude the anchoring atom itself
    hi = np.maximum(hi, np.arange(1, points.size + 1))
    window_mass = csum[hi] - csum[lo]
    best = int(np.argmax(window_mass))
    sup = float(window_mass[best]) + deficit
    return WindowReport(
        kappa=kappa,
        sup_estimate=sup,
        window_start=float(starts[best]),
        threshold=threshold,
        passes=sup < threshold,
    )


def atomic_window_masses(
    measure: AtomicMeasure, starts: np.ndarray, kappa: float
) -> np.ndarray:
    """Exact masses of (a, a+kappa] for each a in `starts`."""
    if measure.points.size == 0:
        return np.zeros(len(starts))
    csum = np.concatenate(([0.0], np.cumsum(measure.masses)))
    lo = np.searchsorted(measure.points, starts, side="right")
    hi = np.searchsorted(measure.points, np.asarray(starts) + kappa, side="right")
    return csum[hi] - csum[lo]


# ---------------------------------------------------------------------------
# Monte Carlo estimates


@dataclass(frozen=True)
class IntervalEstimate:
    value: float
    ci_halfwidth: float
    standard_error: float
    trials: int


def mc_interval_mass(
    spec: InterarrivalSpec,
    a: float,
    b: float,
    trials: int,
    rng,
    cap: int = DEFAULT_MARK_CAP,
) -> IntervalEstimate:
    """Monte Carlo estimate of U((a, b]) = E[# renewal epochs in (a, b]].

    95% normal-approximation half-width; exact per-trial counts.
    """
    if not (0.0 <= a < b):
        raise ValidationError("need 0 <= a < b")
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    counts = np.zeros(trials, dtype=np.int64)
    done = 0
    while done < trials:
        n = min(trials - done, _chunk_trials(spec, b, cap))
        batch = sample_renewal_marks_batch(spec, b, n, rng, cap=cap)
        inside = (batch.times > a) & (batch.times <= b)
        counts[done : done + n] = np.bincount(batch.owners[inside], minlength=n)
        done += n
    value = counts.mean()
    se = counts.std(ddof=1) / math.sqrt(trials) if trials > 1 else 0.0
    return IntervalEstimate(
        value=float(value),
        ci_halfwidth=float(_Z95 * se),
        standard_error=float(se),
        trials=trials,
    )


def _chunk_trials(spec: InterarrivalSpec, horizon: float, budget: float) -> int:
    # keep each chunk near 2e6 expected marks so flat arrays stay small
    mv = mean(spec)
    per_trial = 1.0 if mv.infinite else horizon / mv.value + 1.0
    return max(1000, int(min(budget, 2_000_000) / max(per_trial, 1.0)))


@dataclass(frozen=True)
class WindowProfile:
    """Window-mass estimates over a start grid.

    Windows are ((j*step, j*step + bins_per_window*step]); means and
    standard errors are per window.  `window` records the realized
    window length bins_per_window * step.
    """

    starts: np.ndarray
    means: np.ndarray
    standard_errors: np.ndarray
    window: float
    step: float
    trials: int


def window_mass_profile(
    spec: InterarrivalSpec,
    window: float,
    t_max: float,
    trials: int,
    rng,
    bins_per_window: int = 4,
    cap: int = DEFAULT_MARK_CAP,
) -> WindowProfile:
    """Estimate U((a, a+window]) on the grid a = j * (window/bins_per_window).

    One pass of renewal samples feeds every window: per-bin totals give
    the means, and same-trial mark pairs closer than the window length
    give the exact second moments (count^2 = count + 2 * pairs inside).
    """
    if window <= 0 or t_max <= window:
        raise ValidationError("need 0 < window < t_max")
    if trials < 2:
        raise ValidationError("trials must be >= 2")
    step = window / bins_per_window
    k_bins = bins_per_window
    n_bins = int(math.ceil(t_max / step - _EDGE_SLACK))
    horizon = n_bins * step
    n_windows = n_bins - k_bins + 1
    if n_windows < 1:
        raise ValidationError("t_max leaves no complete window")
    bin_totals = np.zeros(n_bins)
    pair_diff = np.zeros(n_windows + 1)
    done = 0
    while done < trials:
        n = min(trials - done, _chunk_trials(spec, horizon, cap))
        batch = sample_renewal_marks_batch(spec, horizon, n, rng, cap=cap)
        idx = np.ceil(batch.times / step - _EDGE_SLACK).astype(np.int64) - 1
        np.clip(idx, 0, n_bins - 1, out=idx)
        bin_totals += np.bincount(idx, minlength=n_bins)
        _accumulate_window_pairs(
            batch.times, batch.owners, window, step, n_windows, pair_diff
        )
        done += n
    csum = np.concatenate(([0.0], np.cumsum(bin_totals)))
    window_totals = csum[k_bins:] - csum[:-k_bins]
    means = window_totals / trials
    pair_totals = np.cumsum(pair_diff)[:n_windows]
    second_moment = (window_totals + 2.0 * pair_totals) / trials
    variance = np.maximum(second_moment - means**2, 0.0)
    ses = np.sqrt(variance / trials)
    starts = step * np.arange(n_windows)
    return WindowProfile(
        starts=starts,
        means=means,
        standard_errors=ses,
        window=k_bins * step,
        step=step,
        trials=trials,
    )


def _accumulate_window_pairs(times, owners, window, step, n_windows, pair_diff):
    """Range-add, for every same-trial mark pair (t1 < t2) with
    t2 - t1 < window, the grid starts a = j*step with a < t1 and
    t2 <= a + window (the windows containing both marks)."""
    lag = 1
    while lag < times.size:
        t1 = times[:-lag]
        t2 = times[lag:]
        close = (owners[:-lag] == owners[lag:]) & (t2 - t1 < window)
        if not close.any():
            break
        lo = np.ceil((t2[close] - window) / step - _EDGE_SLACK).astype(np.int64)
        np.clip(lo, 0, n_windows, out=lo)
        hi = np.ceil(t1[close] / step - _EDGE_SLACK).astype(np.int64)
        np.clip(hi, 0, n_windows, out=hi)
        keep = lo < hi
        np.add.at(pair_diff, lo[keep], 1.0)
        np.add.at(pair_diff, hi[keep], -1.0)
        lag += 1


def _grid_span(spec: InterarrivalSpec) -> float:
    mv = mean(spec)
    if mv.infinite:
        return 200.0
    return min(20.0 * mv.value, 200.0)


def _covering_window_report(
    spec: InterarrivalSpec,
    kappa: float,
    trials: int,
    rng,
    threshold: float,
    subtract_atomic: Optional[AtomicMeasure] = None,
    bins_per_window: int = 4,
) -> WindowReport:
    """Upper MC estimate of sup over ALL a of the (a, a+kappa] mass.

    Estimates windows one fine bin longer than kappa on the aligned
    grid; every real-valued window position is contained in one of
    them, so the grid maximum (plus CI) soundly upper-bounds the sup.
    """
    step = kappa / bins_per_window
    t_max = _grid_span(spec) + (bins_per_window + 1) * step
    profile = window_mass_profile(
        spec,
        window=(bins_per_window + 1) * step,
        t_max=t_max,
        trials=trials,
        rng=rng,
        bins_per_window=bins_per_window + 1,
    )
    means = profile.means
    if subtract_atomic is not None:
        means = means - atomic_window_masses(
            subtract_atomic, profile.starts, profile.window
        )
        means = np.maximum(means, 0.0)
    best = int(np.argmax(means))
    est = float(means[best])
    ci = float(_Z95 * profile.standard_errors[best])
    return WindowReport(
        kappa=kappa,
        sup_estimate=est,
        window_start=float(profile.starts[best]),
        threshold=threshold,
        passes=(est + ci) < threshold,
        ci_halfwidth=ci,
        source="monte-carlo",
    )


@dataclass(frozen=True)
class DiagnosticReport:
    """Smallest window length whose continuous-part sup fell below epsilon."""

    epsilon: float
    found_delta: Optional[float]
    reports: tuple


def continuous_window_diagnostic(
    spec: InterarrivalSpec,
    epsilon: float,
    deltas: Optional[Sequence] = None,
    trials: int = 100_000,
    rng=None,
    mass_tolerance: float = DEFAULT_MASS_TOLERANCE,
) -> DiagnosticReport:
    """Scan window lengths for sup_a U_cont((a, a+delta]) < epsilon.

    U_cont is estimated as the full MC window mass minus the exact
    (truncated) atomic part.  Purely atomic laws pass at the first
    delta with supremum 0.  Failure to find a delta is a report, not
    an error.
    """
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    if rng is None:
        raise ValidationError("an explicit rng is required")
    if deltas is None:
        deltas = [epsilon * 0.5**j for j in range(0, 13)]
    if spec.continuous is None:
        report = WindowReport(
            kappa=float(deltas[0]),
            sup_estimate=0.0,
            window_start=0.0,
            threshold=epsilon,
            passes=True,
        )
        return DiagnosticReport(epsilon, float(deltas[0]), (report,))
    atomic = (
        atomic_renewal_measure(spec, mass_tolerance) if spec.atoms else None
    )
    reports = []
    for delta in deltas:
        report = _covering_window_report(
            spec,
            float(delta),
            trials,
            rng,
            threshold=epsilon,
            subtract_atomic=atomic,
        )
        reports.append(report)
        if report.passes:
            return DiagnosticReport(epsilon, float(delta), tuple(reports))
    return DiagnosticReport(epsilon, None, tuple(reports))


@dataclass(frozen=True)
class BoundedCriterionReport:
    """Atomic window check plus the transferred full-measure window scale.

    `nu` is the first dyadic fraction of kappa whose full-measure
    window sup (upper MC estimate + CI) stays below the threshold;
    `u_nu` is that conservative bound, the quantity the percolation
    comparison consumes.
    """

    atomic_report: WindowReport
    nu: Optional[float]
    u_nu: Optional[float]
    full_report: Optional[WindowReport]
    passes: bool
    threshold: float


def check_bounded_criterion(
    spec: InterarrivalSpec,
    kappa: float,
    mass_tolerance: float = DEFAULT_MASS_TOLERANCE,
    trials: int = 150_000,
    rng=None,
    max_depth: int = 16,
    threshold: float = HALF_CLOSURE_THRESHOLD,
) -> BoundedCriterionReport:
    """Atomic window criterion, then transfer to the full measure.

    Stage 1 checks sup_a U_at((a, a+kappa]) < threshold exactly.  If it
    holds, stage 2 searches nu = kappa * 2**-j, j = 0..max_depth, for a
    full-measure window sup below the same threshold (upper MC estimate
    + CI).  Exhausting the grid is reported as not-found, never as a
    disproof.
    """
    if rng is None:
        raise ValidationError("an explicit rng is required")
    atomic = atomic_renewal_measure(spec, mass_tolerance)
    atomic_report = sup_window_mass(atomic, kappa, threshold)
    if not atomic_report.passes:
        return BoundedCriterionReport(
            atomic_report=atomic_report,
            nu=None,
            u_nu=None,
            full_report=None,
            passes=False,
            threshold=threshold,
        )
    last = None
    for j in range(max_depth + 1):
        nu = kappa * 0.5**j
        report = _covering_window_report(spec, nu, trials, rng, threshold)
        last = report
        if report.passes:
            return BoundedCriterionReport(
                atomic_report=atomic_report,
                nu=nu,
                u_nu=report.decision_value,
                full_report=report,
                passes=True,
                threshold=threshold,
            )
    return BoundedCriterionReport(
        atomic_report=atomic_report,
        nu=None,
        u_nu=None,
        full_report=last,
        passes=False,
        threshold=threshold,
    )
