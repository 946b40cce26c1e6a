"""Contour enumeration, the counting bound, and the weight series."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from renewalcp.contours import (
    AdmissiblePath,
    count_bound_check,
    count_contours,
    count_contours_oracle,
    count_relaxed_walks,
    counting_bound,
    enumerate_contours,
    is_admissible,
    parity_class_sizes,
    peierls_closed_form,
    peierls_series,
    quadrant_to_dual,
    rightward_step_count,
    threshold_check,
)
from renewalcp.errors import SeriesDivergenceError, ValidationError

# agreed by the depth-first enumerator and the step-sequence oracle
KNOWN_COUNTS = {
    2: 1,
    3: 2,
    4: 4,
    5: 10,
    6: 25,
    7: 64,
    8: 160,
    9: 408,
    10: 1034,
    11: 2648,
    12: 6760,
}


def test_length_two_is_the_tip_path():
    paths = enumerate_contours(2)
    assert len(paths) == 1
    assert paths[0].vertices == ((0, 1), (1, 1), (1, 0))


def test_length_three_paths():
    got = sorted(p.vertices for p in enumerate_contours(3))
    assert got == [
        ((0, 1), (1, 1), (2, 1), (2, 0)),
        ((0, 2), (1, 2), (1, 1), (1, 0)),
    ]


def test_enumerator_agrees_with_oracle():
    for n, expected in KNOWN_COUNTS.items():
        assert count_contours(n) == expected
        assert count_contours_oracle(n) == expected


def test_enumeration_has_no_duplicates():
    for n in range(2, 10):
        paths = enumerate_contours(n)
        assert len({p.vertices for p in paths}) == len(paths)


def test_enumerated_paths_are_admissible():
    for n in range(2, 11):
        for p in enumerate_contours(n):
            assert is_admissible(p.vertices), p.vertices
            assert p.n_steps == n


def test_length_validation():
    for bad in (1, 0, -3, 15, 100):
        with pytest.raises(ValidationError):
            enumerate_contours(bad)
        with pytest.raises(ValidationError):
            count_contours(bad)


def test_relaxed_walk_count_equals_bound():
    # the recursion over last directions must land exactly on the
    # closed formula the counting bound uses
    for n in range(2, 15):
        assert count_relaxed_walks(n) == counting_bound(n)


def test_relaxed_walks_by_brute_force():
    # tiny-n cross-check of the transfer recursion: walk every
    # direction sequence and reject only immediate backtracks
    steps = ((1, 0), (0, -1), (0, 1), (-1, 0))

    def brute(n):
        total = 0
        seqs = [[(1, 0)]]
        for _ in range(n - 2):
            seqs = [
                s + [d]
                for s in seqs
                for d in steps
                if d != (-s[-1][0], -s[-1][1])
            ]
        return (n - 1) * len(seqs)

    for n in range(2, 8):
        assert count_relaxed_walks(n) == brute(n)


def test_relaxation_dominates_admissible_count():
    for n in range(2, 13):
        assert count_contours(n) <= count_relaxed_walks(n)


def test_count_bound_check_rows():
    r2 = count_bound_check(2)
    assert (r2.count, r2.bound, r2.ok) == (1, 1, True)
    r3 = count_bound_check(3)
    assert (r3.count, r3.bound, r3.ok) == (2, 6, True)
    r14 = count_bound_check(14)
    assert r14.bound == 6908733
    assert r14.ok


def test_start_heights_cover_full_range():
    # every k in 1..n-1 contributes at least one path
    for n in (4, 6, 8):
        ks = {p.start_height for p in enumerate_contours(n)}
        assert ks == set(range(1, n))


def test_is_admissible_rejects_broken_paths():
    good = ((0, 2), (1, 2), (1, 1), (1, 0))
    assert is_admissible(good)
    # start not on the axis
    assert not is_admissible(((1, 2), (2, 2), (2, 1), (2, 0)))
    # start height outside 1..n-1
    assert not is_admissible(((0, 3), (1, 3), (1, 2), (1, 1), (1, 0))[:4])
    # first step not rightward
    assert not is_admissible(((0, 2), (0, 1), (1, 1), (1, 0)))
    # intermediate dips to the floor
    assert not is_admissible(((0, 1), (1, 1), (1, 0), (2, 0), (2, 1), (2, 0)))
    # last step not downward
    assert not is_admissible(((0, 1), (1, 1), (2, 1), (3, 1)))
    # ends in column zero
    assert not is_admissible(((0, 1), (1, 1), (0, 1), (0, 0)))
    # revisit
    assert not is_admissible(((0, 1), (1, 1), (1, 2), (1, 1), (1, 0)))
    # teleport
    assert not is_admissible(((0, 1), (1, 1), (3, 1), (3, 0)))
    # too short
    assert not is_admissible(((0, 1), (1, 1)))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 9), st.data())
def test_enumerated_sample_admissible_property(n, data):
    paths = enumerate_contours(n)
    p = data.draw(st.sampled_from(paths))
    assert is_admissible(p.vertices)
    # dropping the last vertex always breaks admissibility
    assert not is_admissible(p.vertices[:-1])


def test_parity_decomposition_up_to_twelve():
    # crossing steps make up at least half of each path, and the larger
    # column-parity class at least a quarter
    for n in range(2, 13):
        for p in enumerate_contours(n):
            r = rightward_step_count(p)
            assert 2 * r >= n
            even, odd = parity_class_sizes(p)
            assert even + odd == r
            assert 4 * max(even, odd) >= n


def test_quadrant_to_dual_tip_case():
    (p,) = enumerate_contours(2)
    assert quadrant_to_dual(p) == ((-1, 0), (0, 1), (1, 0))


def test_quadrant_to_dual_matches_boundary_walk():
    # the all-closed wedge contour and the length-2 admissible path are
    # the same object in two coordinate systems
    from renewalcp.percolation import WedgeBondConfig, build_wedge, find_dual_contour

    w = build_wedge(2)
    ct = find_dual_contour(WedgeBondConfig(w, np.zeros(w.n_edges, dtype=bool)))
    (p,) = enumerate_contours(2)
    assert quadrant_to_dual(p) == ct.points


def test_dual_images_live_in_dual_lattice():
    from renewalcp.percolation import dual_contains, on_left_side, on_right_side

    for n in range(2, 9):
        for p in enumerate_contours(n):
            img = quadrant_to_dual(p)
            assert len(set(img)) == len(img)
            assert on_left_side(*img[0])
            assert on_right_side(*img[-1])
            for (x0, z0), (x1, z1) in zip(img, img[1:]):
                assert abs(x1 - x0) == 1 and abs(z1 - z0) == 1
            for x, z in img:
                assert dual_contains(x, z)


# ---------------------------------------------------------------------------
# weight series


def test_closed_form_exact_boundary():
    s = peierls_closed_form(2 ** -8)
    assert isinstance(s, Fraction)
    assert s == 1


def test_closed_form_exact_small():
    s = peierls_closed_form(2 ** -12)
    assert s == Fraction(1, 25)


def test_closed_form_float_values():
    assert peierls_closed_form(0.001) == pytest.approx(0.1453003244, abs=1e-9)
    s9 = peierls_closed_form(2 ** -9)
    assert isinstance(s9, float)
    assert 0 < s9 < 1


def test_closed_form_zero_limit():
    assert peierls_closed_form(1e-30) == pytest.approx(0.0, abs=1e-14)


def test_closed_form_monotone():
    grid = [1e-8, 1e-6, 1e-4, 5e-4, 2e-3, 2 ** -8, 5e-3, 0.01, 0.012]
    values = [peierls_closed_form(e) for e in grid]
    assert all(a < b for a, b in zip(values, values[1:]))


def test_divergence_and_validation():
    with pytest.raises(SeriesDivergenceError):
        peierls_closed_form(Fraction(1, 81))
    with pytest.raises(SeriesDivergenceError):
        peierls_closed_form(0.02)
    with pytest.raises(ValidationError):
        peierls_closed_form(0.0)
    with pytest.raises(ValidationError):
        peierls_closed_form(-1e-3)
    with pytest.raises(SeriesDivergenceError):
        peierls_series(0.5, 10)
    with pytest.raises(ValidationError):
        peierls_series(2 ** -12, 1)


def test_threshold_check_values():
    for eps in (2 ** -9, 2 ** -10, 2 ** -12):
        assert threshold_check(eps)
    assert not threshold_check(2 ** -8)  # equality, not strict
    # the formula is reported verbatim: the fourth root of 0.01 is
    # about 0.316, driving the series above one despite convergence
    assert peierls_closed_form(0.01) > 1
    assert not threshold_check(0.01)
    # divergent weights are simply not below one
    assert not threshold_check(0.5)
    with pytest.raises(ValidationError):
        threshold_check(0.0)


def test_series_exact_at_dyadic_boundary():
    rep = peierls_series(2 ** -8, 400)
    assert isinstance(rep.partial_sum, Fraction)
    assert Fraction(999, 1000) < rep.partial_sum < 1
    assert rep.partial_sum + rep.tail_bound == rep.closed_form == 1


def test_series_exact_identity_small_weight():
    rep = peierls_series(2 ** -12, 60)
    assert rep.partial_sum + rep.tail_bound == rep.closed_form
    assert float(rep.partial_sum) == pytest.approx(0.04, abs=1e-9)
    assert float(rep.tail_bound) < 1e-20


def test_series_float_fallback_consistent():
    rep = peierls_series(2 ** -9, 50)
    assert isinstance(rep.partial_sum, float)
    assert abs(rep.total - rep.closed_form) < 1e-12


def test_series_minimal_n_max():
    rep = peierls_series(2 ** -12, 2)
    assert rep.partial_sum == Fraction(1, 64)  # single n = 2 term, r^2
    assert rep.partial_sum + rep.tail_bound == rep.closed_form


def test_series_partial_sums_increase_with_n_max():
    vals = [peierls_series(0.001, m).partial_sum for m in (2, 5, 10, 30, 80)]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    assert vals[-1] <= peierls_closed_form(0.001)
