import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dejean_growth.words import (
    AlphabetParams,
    WordDomainError,
    apply_perm,
    compose,
    exponent,
    extension_safe,
    format_word,
    identity,
    invert,
    is_dejean,
    is_prohibited,
    is_rarefied,
    is_trimmed,
    minimal_period,
    normalize_first_occurrence,
    parse_word,
    trim_canonicalize,
)

K5 = AlphabetParams(5)


def w(text, k=5):
    return parse_word(text, k)


def brute_period(v):
    return next(p for p in range(1, len(v) + 1) if all(v[i] == v[i + p] for i in range(len(v) - p)))


def brute_dejean(v, params):
    return not any(is_prohibited(v[i:j], params)
                   for i in range(len(v)) for j in range(i + 2, len(v) + 1))


def all_dejean(params, n_max):
    level = [()]
    out = []
    for _ in range(n_max):
        level = [u + (a,) for u in level for a in range(params.k) if is_dejean(u + (a,), params)]
        out.extend(level)
    return out


def test_threshold():
    p = AlphabetParams(7)
    assert p.threshold == Fraction(7, 6)
    assert p.window(6) == 8
    with pytest.raises(WordDomainError):
        AlphabetParams(1)


def test_parse_roundtrip():
    assert parse_word("abcde", 5) == (0, 1, 2, 3, 4)
    assert format_word((4, 2, 1, 0, 3)) == "ecbad"
    with pytest.raises(WordDomainError):
        parse_word("abf", 5)


@pytest.mark.parametrize("text,p", [("aaaa", 1), ("abcde", 5), ("abcab", 3)])
def test_minimal_period_examples(text, p):
    assert minimal_period(w(text)) == p


@pytest.mark.parametrize("text,e", [("aa", Fraction(2)), ("aba", Fraction(3, 2)),
                                    ("abcab", Fraction(5, 3))])
def test_exponent_examples(text, e):
    assert exponent(w(text)) == e


def test_prohibited_examples():
    assert not is_prohibited(w("abcda"), K5)
    assert is_prohibited(w("aba"), K5)
    for k in range(3, 11):
        assert is_prohibited((0, 1, 2, 0, 1, 2), AlphabetParams(k))


def test_dejean_examples():
    assert is_dejean(w("abcd"), K5)
    assert not is_dejean(w("abca"), K5)
    assert is_dejean(w("abcda"), K5)


def test_extension_examples():
    assert not extension_safe(w("abc"), 0, K5)
    assert extension_safe(w("abc"), 3, K5)


def test_extension_agrees_with_full_check_k5_up_to_10():
    for u in all_dejean(K5, 9):
        for a in range(5):
            assert extension_safe(u, a, K5) == is_dejean(u + (a,), K5)


def test_dejean_words_are_rarefied():
    assert is_rarefied(w("abcda"), K5)
    assert not is_rarefied(w("abca"), K5)
    assert all(is_rarefied(u, K5) for u in all_dejean(K5, 10))


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(0, 2), min_size=1, max_size=14))
def test_period_matches_brute_force(v):
    assert minimal_period(v) == brute_period(v)


@settings(max_examples=300, deadline=None)
@given(st.integers(5, 8).flatmap(
    lambda k: st.tuples(st.just(k), st.lists(st.integers(0, k - 1), min_size=1, max_size=12))))
def test_dejean_matches_all_factor_scan(case):
    k, v = case
    params = AlphabetParams(k)
    assert is_dejean(v, params) == brute_dejean(tuple(v), params)


def test_trim_example():
    t, sigma = trim_canonicalize(w("ecbad"), K5)
    assert t[-4:] == (0, 1, 2, 3)
    assert apply_perm(sigma, w("ecbad")) == t
    assert is_trimmed(t, K5)


def test_trim_idempotent():
    t, _ = trim_canonicalize(w("ecbad"), K5)
    assert trim_canonicalize(t, K5) == (t, identity(5))


def test_trim_is_isomorphism_invariant():
    base = next(u for u in all_dejean(K5, 10) if len(u) == 10)
    images = {trim_canonicalize(apply_perm(s, base), K5)[0]
              for s in itertools.permutations(range(5))}
    assert len(images) == 1


def test_trim_rejects_non_rarefied():
    with pytest.raises(WordDomainError):
        trim_canonicalize(w("abca"), K5)


@settings(max_examples=200, deadline=None)
@given(st.permutations(range(6)), st.permutations(range(6)))
def test_permutation_algebra(s, t):
    s, t = tuple(s), tuple(t)
    assert compose(s, invert(s)) == identity(6)
    v = (0, 1, 2, 3, 4, 5, 1)
    assert apply_perm(compose(s, t), v) == apply_perm(s, apply_perm(t, v))


def test_first_occurrence_normalization():
    assert normalize_first_occurrence(w("dcdab")) == (0, 1, 0, 2, 3)
