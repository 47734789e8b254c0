import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphlet_gibbs.exact import (
    ComputableProb,
    ExactCoin,
    RandomSource,
    as_rational,
    bernoulli_computable,
    bernoulli_exact,
    compare_intervals,
    euler_e,
    exp_neg,
    exp_pos,
    geometric_failures,
    iroot,
    rational_power,
    splitmix_word,
    uniform_int,
)
from _fixtures import four_sigma


def test_as_rational_forms():
    assert as_rational("3/16") == Fraction(3, 16)
    assert as_rational("0.125") == Fraction(1, 8)
    assert as_rational(2) == 2
    with pytest.raises(TypeError):
        as_rational(0.1)
    with pytest.raises(ValueError):
        as_rational("abc")


def test_stream_replay_and_spawn():
    a, b = RandomSource(42), RandomSource(42)
    assert [a.next_word() for _ in range(100)] == [b.next_word() for _ in range(100)]
    assert a.bits_consumed == b.bits_consumed == 6400
    assert RandomSource(42).spawn(1).next_word() != RandomSource(42).spawn(2).next_word()
    assert RandomSource(1).next_word() == splitmix_word(1, 0)


def test_counter_handoff():
    a = RandomSource(5)
    a.next_word()
    c = a.take_counter()
    b = RandomSource(5)
    b.set_counter(c + 3, 3)
    a.set_counter(c, 0)
    for _ in range(3):
        a.next_word()
    assert a.next_word() == b.next_word()


def test_bernoulli_trivial_cases():
    src = RandomSource(1)
    assert not any(bernoulli_exact(0, src) for _ in range(1000))
    assert all(bernoulli_exact(1, src) for _ in range(1000))


class _FixedWords(RandomSource):
    """Feeds prescribed 64-bit words (the comparison uses their complement)."""

    def __init__(self, words):
        super().__init__(0)
        self._words = list(words)

    def next_word(self):
        return self._words.pop(0)


def test_bernoulli_half_reads_first_bit():
    # C = ~W; the leading bit of C decides p = 1/2 at once
    mask = (1 << 64) - 1
    assert bernoulli_exact(Fraction(1, 2), _FixedWords([mask ^ 0])) is True
    assert bernoulli_exact(Fraction(1, 2), _FixedWords([mask ^ (1 << 63)])) is False


@pytest.mark.parametrize("p", [Fraction(1, 4), Fraction(3, 16), Fraction(40, 41)])
def test_bernoulli_frequency(p):
    src = RandomSource(7)
    n = 100_000
    coin = ExactCoin(p)
    hits = sum(coin.flip(src) for _ in range(n))
    assert abs(hits / n - float(p)) <= four_sigma(float(p), n)


def test_bernoulli_computable_matches_constant():
    src = RandomSource(3)
    third = ComputableProb(lambda bits: (Fraction(1, 3), Fraction(1, 3)))
    n = 20_000
    assert abs(sum(bernoulli_computable(third, src) for _ in range(n)) / n - 1 / 3) < four_sigma(1 / 3, n)


def test_bernoulli_computable_exp_minus_one():
    src = RandomSource(11)
    p = exp_neg(1)
    n = 100_000
    mean = sum(bernoulli_computable(p, src) for _ in range(n)) / n
    assert abs(mean - math.exp(-1)) < 0.006


def test_bernoulli_computable_near_zero():
    src = RandomSource(2)
    tiny = exp_neg(200)
    assert not any(bernoulli_computable(tiny, src) for _ in range(2000))


def test_uniform_int_small_cases():
    src = RandomSource(9)
    assert all(uniform_int(1, src) == 0 for _ in range(100))
    mask = (1 << 64) - 1
    # n = 2 uses the leading bit of the word
    assert uniform_int(2, _FixedWords([1 << 63])) == 1
    assert uniform_int(2, _FixedWords([mask >> 1])) == 0


def test_uniform_int_three_way():
    src = RandomSource(13)
    n = 300_000
    counts = [0, 0, 0]
    for _ in range(n):
        counts[uniform_int(3, src)] += 1
    for c in counts:
        assert abs(c / n - 1 / 3) < 0.005


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=1, max_value=10 ** 12), st.integers(min_value=0, max_value=2 ** 32))
def test_uniform_int_in_range(n, seed):
    src = RandomSource(seed)
    for _ in range(5):
        assert 0 <= uniform_int(n, src) < n


def test_geometric_mean():
    src = RandomSource(17)
    r = Fraction(3, 4)
    n = 50_000
    mean = sum(geometric_failures(r, src) for _ in range(n)) / n
    assert abs(mean - 3) < 0.1


def test_exp_and_e_bounds():
    lo, hi = euler_e().refine(80)
    assert lo <= Fraction(math.e) + Fraction(1, 10 ** 12) and hi >= Fraction(math.e) - Fraction(1, 10 ** 12)
    assert hi - lo <= Fraction(1, 2 ** 80)
    lo, hi = exp_neg(Fraction(3, 2)).refine(60)
    assert float(lo) == pytest.approx(math.exp(-1.5), abs=1e-15)
    assert float(exp_pos(3)) == pytest.approx(math.exp(3), rel=1e-14)


def test_refinements_nest():
    p = exp_neg(Fraction(7, 3))
    prev = p.refine(8)
    for bits in (16, 32, 64, 128):
        cur = p.refine(bits)
        assert prev[0] <= cur[0] <= cur[1] <= prev[1]
        prev = cur


def test_rational_power_and_root():
    assert iroot(10 ** 30, 3) == 10 ** 10
    assert iroot(26, 3) == 2
    lo, hi = rational_power(Fraction(26, 25), Fraction(2, 3)).refine(60)
    assert float(lo) == pytest.approx((26 / 25) ** (2 / 3), rel=1e-14)
    assert rational_power(Fraction(11, 10), 1).is_exact()


def test_compare_intervals():
    assert compare_intervals(exp_neg(1), ComputableProb.exact(Fraction(1, 2))) < 0
    assert compare_intervals(euler_e(), ComputableProb.exact(Fraction(27, 10))) > 0


def test_malformed_refinement_rejected():
    bad = ComputableProb(lambda bits: (Fraction(1, 2), Fraction(1, 3)))
    with pytest.raises(ValueError):
        bad.refine(4)
    wide = ComputableProb(lambda bits: (Fraction(0), Fraction(1)))
    with pytest.raises(ValueError):
        wide.refine(4)
