import itertools

import pytest

from dejean_growth.counting import naive_count_dejean
from dejean_growth.language_graph import (
    build_class_graph,
    build_descendant_graph,
    enumerate_dejean_classes,
    enumerate_dejean_length,
    full_survivor_words,
    iter_orbit_representatives,
    prune_closed,
    read_graph_cache,
    write_graph_cache,
)
from dejean_growth.words import apply_perm, compose, is_trimmed


def test_level_sizes(k5):
    assert len(enumerate_dejean_length(k5, 1).words) == 5
    assert len(enumerate_dejean_length(k5, 5).words) == 240
    assert len(enumerate_dejean_length(k5, 7).words) == naive_count_dejean(k5, 7)[-1]


def test_orbit_reps_are_normalized(k5):
    reps = list(iter_orbit_representatives(k5, 8))
    assert len(reps) == len(set(reps))
    for r in reps:
        seen = []
        for a in r:
            if a not in seen:
                seen.append(a)
        assert seen == list(range(len(seen)))


def test_classes_are_trimmed_and_cover_level(k5):
    classes = enumerate_dejean_classes(k5, 8)
    assert all(is_trimmed(c, k5) for c in classes)
    assert len(classes) * 120 == len(enumerate_dejean_length(k5, 8).words)


def test_descendant_graph_structure(k5):
    g = build_descendant_graph(enumerate_dejean_length(k5, 6))
    words = g.level.words
    edges = sum(len(s) for s in g.succ)
    assert edges == naive_count_dejean(k5, 7)[-1]
    for u, vs in enumerate(g.succ):
        assert len(vs) <= 4
        for v in vs:
            assert words[u][1:] == words[v][:-1]


def test_prune_examples():
    # 0 <-> 1 cycle, 2 is a dead end, 3 only feeds the cycle
    succ = [[1], [0, 2], [], [0]]
    assert prune_closed(succ) == [0, 1]
    assert prune_closed([[0]]) == [0]


def test_quotient_matches_word_level_pruning(k5, q56):
    g = build_descendant_graph(enumerate_dejean_length(k5, 6))
    alive = prune_closed(g.succ)
    words = g.level.words
    assert len(alive) == q56.s_hat
    alive_set = {words[i] for i in alive}
    assert set(full_survivor_words(q56)) == alive_set
    # reconstruct every word-level edge from voltages
    direct = {(words[u], words[v]) for u in alive for v in g.succ[u] if words[v] in alive_set}
    lifted = set()
    for c, d, tau in q56.edges:
        for sigma in itertools.permutations(range(5)):
            lifted.add((apply_perm(sigma, q56.reps[c]),
                        apply_perm(compose(sigma, tau), q56.reps[d])))
    assert lifted == direct


def test_delta_is_zero_one_with_nonzero_margins(q56):
    d = q56.delta
    assert d.max() == 1
    assert (d.sum(axis=0) >= 1).all() and (d.sum(axis=1) >= 1).all()


def test_k8_m18_has_31_classes(q818):
    assert q818.s == 31


def test_cache_roundtrip(tmp_path, q56):
    path = tmp_path / "g.txt"
    write_graph_cache(q56, path)
    back = read_graph_cache(path)
    assert back.reps == q56.reps and back.edges == q56.edges


def test_class_graph_requires_m_above_k(k5):
    with pytest.raises(ValueError):
        build_class_graph(k5, 5)


def test_locate_inverts_trimming(q56):
    for c, rep in enumerate(q56.reps):
        for sigma in list(itertools.permutations(range(5)))[:10]:
            assert q56.locate(apply_perm(sigma, rep)) == (c, sigma)
