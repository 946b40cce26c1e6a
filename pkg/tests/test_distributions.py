"""Interarrival law validation, means, and samplers."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from renewalcp import distributions as dist
from renewalcp.errors import ResourceLimitError, ValidationError
from renewalcp.streams import derive_stream


class StubBitGen:
    """Deterministic stand-in for a Generator, feeding fixed Cantor bits."""

    def __init__(self, bits):
        self.bits = list(bits)

    def integers(self, lo, hi, size):
        assert (lo, hi) == (0, 2)
        if isinstance(size, tuple):
            n = size[0] * size[1]
            return np.array(self.bits[:n]).reshape(size)
        return np.array(self.bits[:size])


def test_dirac_spec():
    spec = dist.dirac(2.0)
    assert spec.atoms == ((2.0, 1.0),)
    assert spec.is_arithmetic
    assert dist.mean(spec).value == 2.0


def test_atoms_must_be_positive():
    with pytest.raises(ValidationError):
        dist.InterarrivalSpec(atoms=((0.0, 1.0),))
    with pytest.raises(ValidationError):
        dist.InterarrivalSpec(atoms=((-1.0, 1.0),))


def test_masses_must_sum_to_one():
    with pytest.raises(ValidationError):
        dist.InterarrivalSpec(atoms=((1.0, 0.7),))
    with pytest.raises(ValidationError):
        dist.arithmetic({1: 0.5, 2: 0.4})


def test_atom_points_strictly_increasing():
    with pytest.raises(ValidationError):
        dist.InterarrivalSpec(atoms=((1.0, 0.5), (1.0, 0.5)))


def test_continuous_mass_consistency():
    with pytest.raises(ValidationError):
        dist.InterarrivalSpec(atoms=((1.0, 1.0),), continuous_mass=0.3)
    with pytest.raises(ValidationError):
        dist.InterarrivalSpec(
            atoms=(), continuous=dist.Exponential(1.0), continuous_mass=0.0
        )


def test_span_must_divide_atoms():
    with pytest.raises(ValidationError):
        dist.InterarrivalSpec(atoms=((1.0, 0.5), (2.5, 0.5)), span=1.0)


def test_arithmetic_mean_exact():
    spec = dist.arithmetic({1: 0.5, 2: 0.5})
    assert dist.mean(spec).value == 1.5
    assert list(spec.atom_multipliers()) == [1, 2]


def test_exponential_mean():
    assert dist.mean(dist.exponential(2.0)).value == 0.5


def test_uniform_mean():
    assert dist.mean(dist.uniform_interval(0.0, 1.0)).value == 0.5


def test_cantor_geometric_mean():
    # E = 1/2 + 1/q - 1; q = 1/2 gives 3/2.
    assert dist.mean(dist.cantor_geometric(0.5)).value == 1.5
    assert dist.mean(dist.cantor_geometric(0.25)).value == 0.5 + 4.0 - 1.0


def test_mixture_mean():
    spec = dist.mixture(0.5, [(1.0, 1.0)], dist.Exponential(1.0))
    assert dist.mean(spec).value == pytest.approx(1.0)
    assert spec.atomic_mass == pytest.approx(0.5)


def test_mixture_unwraps_pure_continuous_spec():
    via_part = dist.mixture(0.3, [(1.0, 1.0)], dist.UniformInterval(0.0, 1.0))
    via_spec = dist.mixture(0.3, [(1.0, 1.0)], dist.uniform_interval(0.0, 1.0))
    assert via_spec == via_part
    assert dist.mean(via_spec).value == pytest.approx(0.3 + 0.7 * 0.5)


def test_mixture_rejects_non_continuous_spec():
    with pytest.raises(ValidationError):
        dist.mixture(0.3, [(1.0, 1.0)], dist.dirac(1.0))
    with pytest.raises(ValidationError):
        dist.mixture(0.3, [(1.0, 1.0)], dist.mixture(0.5, [(2.0, 1.0)], dist.Exponential(1.0)))


def test_spec_rejects_foreign_continuous_part():
    with pytest.raises(ValidationError):
        dist.InterarrivalSpec(atoms=(), continuous=object(), continuous_mass=1.0)


def test_tabulated_mean_trapezoid():
    # Uniform on [0, 1] as a two-knot table.
    spec = dist.tabulated([(0.0, 0.0), (1.0, 1.0)])
    assert dist.mean(spec).value == pytest.approx(0.5)
    # Atom of mass 1/2 at x = 1 plus uniform tail on [1, 2].
    spec = dist.tabulated([(1.0, 0.5), (2.0, 1.0)])
    assert dist.mean(spec).value == pytest.approx(1.0 * 0.5 + 1.5 * 0.5)


def test_cantor_sampler_digit_expansion():
    # All-zero bits give 0.0; bits (1, 0, 1, 0) at depth 4 give
    # 2/3 + 2/27 = 20/27.
    assert dist.sample_cantor(StubBitGen([0] * 8), depth=8) == 0.0
    got = dist.sample_cantor(StubBitGen([1, 0, 1, 0]), depth=4)
    assert got == pytest.approx(20.0 / 27.0, abs=1e-15)


def test_cantor_geometric_support_gap():
    # The Cantor set omits (1/3, 2/3); shifted copies inherit the gap.
    rng = derive_stream(7, 0)
    draws = dist.sample_batch(dist.cantor_geometric(0.5), 20000, rng)
    frac = draws - np.floor(draws)
    in_gap = (frac > 1.0 / 3.0 + 1e-9) & (frac < 2.0 / 3.0 - 1e-9)
    assert not in_gap.any()
    assert draws.min() > 0.0


def test_arithmetic_sampler_frequencies():
    rng = derive_stream(11, 0)
    spec = dist.arithmetic({1: 0.5, 2: 0.5})
    draws = dist.sample_batch(spec, 1_000_000, rng)
    assert set(np.unique(draws)) == {1.0, 2.0}
    assert abs((draws == 1.0).mean() - 0.5) < 0.002


def test_sampler_positivity():
    rng = derive_stream(13, 0)
    for spec in [
        dist.exponential(4.0),
        dist.uniform_interval(0.0, 0.5),
        dist.cantor_geometric(0.5),
        dist.mixture(0.3, [(0.25, 1.0)], dist.UniformInterval(0.0, 1.0)),
    ]:
        draws = dist.sample_batch(spec, 50_000, rng)
        assert (draws > 0.0).all()


def test_exponential_sampler_ks():
    rng = derive_stream(17, 0)
    draws = np.sort(dist.sample_batch(dist.exponential(1.0), 1_000_000, rng))
    grid = np.arange(1, draws.size + 1) / draws.size
    ks = np.abs(grid - (1.0 - np.exp(-draws))).max()
    assert ks < 0.005


def test_renewal_marks_dirac():
    rng = derive_stream(19, 0)
    marks = dist.sample_renewal_marks(dist.dirac(1.0), 3.5, rng)
    assert list(marks) == [1.0, 2.0, 3.0]
    marks = dist.sample_renewal_marks(dist.dirac(2.0), 1.9, rng)
    assert list(marks) == []


def test_renewal_marks_arithmetic_exact_lattice():
    rng = derive_stream(23, 0)
    batch = dist.sample_renewal_marks_batch(
        dist.arithmetic({1: 0.5, 2: 0.5}), 50.0, 200, rng
    )
    assert batch.steps is not None
    # Marks are exact integer multiples of the span: float equality holds.
    assert (batch.times == batch.steps.astype(float)).all()
    for per in batch.per_process():
        assert (np.diff(per) > 0).all()
        assert per.size == 0 or (per[0] >= 1.0 and per[-1] <= 50.0)


def test_renewal_marks_rate():
    # Unit-rate Poisson process: expected count over [0, 10] is 10.
    rng = derive_stream(29, 0)
    batch = dist.sample_renewal_marks_batch(dist.exponential(1.0), 10.0, 100_000, rng)
    mean_count = batch.times.size / batch.n_processes
    assert abs(mean_count - 10.0) < 0.05


def test_renewal_marks_cap():
    rng = derive_stream(31, 0)
    with pytest.raises(ResourceLimitError):
        dist.sample_renewal_marks_batch(dist.exponential(1.0), 1e9, 1000, rng, cap=10**6)


def test_mark_batch_owner_major_order():
    rng = derive_stream(37, 0)
    batch = dist.sample_renewal_marks_batch(dist.exponential(1.0), 5.0, 50, rng)
    assert (np.diff(batch.owners) >= 0).all()
    same_owner = np.diff(batch.owners) == 0
    assert (np.diff(batch.times)[same_owner] > 0).all()


def test_json_round_trip():
    descriptors = [
        {"type": "arithmetic", "span": 0.5, "masses": [[1, 0.5], [2, 0.5]]},
        {"type": "exponential", "rate": 2.0},
        {"type": "uniform", "lo": 0.0, "hi": 1.0},
        {"type": "cantor_geometric", "q": 0.5},
        {
            "type": "mixture",
            "p": 0.25,
            "atomic": [[1.0, 1.0]],
            "continuous": {"type": "exponential", "rate": 1.0},
        },
    ]
    for desc in descriptors:
        spec = dist.spec_from_json(desc)
        again = dist.spec_from_json(dist.spec_to_json(spec))
        assert again == spec
        json.dumps(dist.spec_to_json(spec))  # serialisable


def test_json_rejects_unknown_fields():
    with pytest.raises(ValidationError):
        dist.spec_from_json({"type": "exponential", "rate": 1.0, "scale": 2.0})
    with pytest.raises(ValidationError):
        dist.spec_from_json({"type": "gamma", "shape": 2.0})
    with pytest.raises(ValidationError):
        dist.spec_from_json(["exponential", 1.0])


@given(
    st.lists(
        st.tuples(
            st.integers(min_value=1, max_value=30),
            st.floats(min_value=0.01, max_value=1.0),
        ),
        min_size=1,
        max_size=6,
        unique_by=lambda t: t[0],
    )
)
@settings(max_examples=50, deadline=None)
def test_arithmetic_constructor_normalises(pairs):
    total = sum(m for _, m in pairs)
    masses = {k: m / total for k, m in pairs}
    spec = dist.arithmetic(masses, span=0.25)
    assert spec.is_arithmetic
    assert abs(sum(m for _, m in spec.atoms) - 1.0) <= 1e-9
    mv = dist.mean(spec)
    assert mv.value == pytest.approx(
        0.25 * sum(k * m for k, m in masses.items()), rel=1e-12
    )


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_stream_determinism(seed):
    a = derive_stream(seed, 3).random(4)
    b = derive_stream(seed, 3).random(4)
    assert (a == b).all()
    c = derive_stream(seed, 4).random(4)
    assert not (a == c).all()
