import pytest

from dejean_growth.counting import (
    Guard,
    count_dejean_exact,
    count_Fm_by_class,
    iter_Fm_orbits,
    naive_count_dejean,
    oracle_Fm_counts,
    oracle_G_counts,
    oracle_Hj,
    oracle_Lm_paths,
)
from dejean_growth.language_graph import GuardExceeded
from dejean_growth.words import AlphabetParams, is_dejean

# frozen from the naive filter
K5_SEQUENCE = [5, 20, 60, 120, 240, 360, 480, 600, 840, 1080]


def test_k5_sequence_from_oracle():
    assert naive_count_dejean(AlphabetParams(5), 10) == K5_SEQUENCE
    assert count_dejean_exact(AlphabetParams(5), 10) == K5_SEQUENCE


def test_k6_start():
    assert count_dejean_exact(AlphabetParams(6), 2) == [6, 30]


@pytest.mark.parametrize("k", [5, 6, 7, 8])
def test_symmetry_count_matches_naive(k):
    params = AlphabetParams(k)
    assert count_dejean_exact(params, 9) == naive_count_dejean(params, 9)


def test_guard_trips():
    with pytest.raises(GuardExceeded):
        count_dejean_exact(AlphabetParams(5), 30, Guard(max_nodes=100))


def test_class_counts_match_oracle(q56):
    counts = count_Fm_by_class(q56, 14)
    assert counts[0].n == 6 and counts[0].counts == [1] * q56.s
    for c in counts:
        assert c.counts == oracle_Fm_counts(q56, c.n)
    totals = [sum(c.counts) for c in counts]
    assert totals == [3, 4, 5, 7, 9, 12, 16, 16, 19]
    for a, b in zip(totals, totals[1:]):
        assert b <= 4 * a


def test_class_counts_parallel_identical(q56):
    one = count_Fm_by_class(q56, 16)
    two = count_Fm_by_class(q56, 16, workers=2)
    assert [c.counts for c in one] == [c.counts for c in two]


def test_orbit_words_are_dejean(q56):
    for v in iter_Fm_orbits(q56, 12):
        assert is_dejean(v, q56.params)


def test_path_oracle_small_lengths(q56):
    a, b = q56.reps[0], q56.reps[1]
    assert oracle_Lm_paths(q56, a, a, 6) == 1
    assert oracle_Lm_paths(q56, a, b, 6) == 0
    for c, d, tau in q56.edges:
        from dejean_growth.words import apply_perm
        assert oracle_Lm_paths(q56, q56.reps[c], apply_perm(tau, q56.reps[d]), 7) == 1


def test_H_partition_and_lower_period(q56):
    p0 = 7 - 7 // 5
    for n in range(6, 21):
        H = oracle_Hj(q56, n)
        assert all(j >= p0 for j in H)
        G = oracle_G_counts(q56, n)
        F = oracle_Fm_counts(q56, n + 1)
        total_H = [sum(H[j][i] for j in H) for i in range(q56.s)]
        assert [g - h for g, h in zip(G, total_H)] == F
