"""Exact probability kernel: rationals, refinable reals and a replayable bit source.

Every "with probability p" decision in the package goes through this module.
A uniform real U in [0, 1) is produced lazily, 64 bits at a time, and compared
against the exact value of p; floating point never decides an outcome.

Bit convention: a stream word W is read as the complemented word C = ~W, and
U = 0.C1 C2 ... in binary.  With this convention a Bernoulli(1/2) draw returns
true exactly when the first stream bit is 1.
"""

from __future__ import annotations

import math
import os
from fractions import Fraction
from typing import Callable, Optional, Tuple, Union

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

RationalLike = Union[Fraction, int, str]


def as_rational(x: RationalLike) -> Fraction:
    """Exact conversion; strings may be 'N/D' or a decimal literal."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("boolean is not a rational")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        s = x.strip()
        try:
            return Fraction(s)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not an exact rational: {x!r}") from exc
    if isinstance(x, float):
        raise TypeError("floats are not accepted as exact parameters; pass 'N/D' or a Fraction")
    raise TypeError(f"cannot convert {type(x).__name__} to a rational")


# ---------------------------------------------------------------------------
# random source


def _splitmix_block(seed: int, start: int, count: int) -> np.ndarray:
    # word i = mix(seed + (i + 1) * GOLDEN), all arithmetic mod 2^64
    with np.errstate(over="ignore"):
        idx = np.arange(start + 1, start + 1 + count, dtype=np.uint64)
        z = np.uint64(seed) + idx * np.uint64(GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return z


def splitmix_word(seed: int, index: int) -> int:
    """Scalar reference for word `index` of the stream with `seed`."""
    z = (seed + (index + 1) * GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class RandomSource:
    """Counter-based SplitMix64 stream treated as ideal randomness.

    The stream is a pure function of (seed, word index), so replay is exact and
    sub-streams are obtained by hashing a key into a fresh seed.  Bits are
    consumed most-significant first from each 64-bit word.
    """

    __slots__ = ("seed", "_counter", "_block", "_block_start", "_block_pos", "_block_size",
                 "_bitbuf", "_bitcount", "words_consumed")

    def __init__(self, seed: int):
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise TypeError("seed must be an integer")
        if not 0 <= seed <= MASK64:
            raise ValueError("seed must fit in 64 unsigned bits")
        self.seed = seed
        self._counter = 0  # index of the next word to hand out
        self._block: list = []
        self._block_start = 0
        self._block_pos = 0
        self._block_size = 16
        self._bitbuf = 0
        self._bitcount = 0
        self.words_consumed = 0

    @classmethod
    def from_entropy(cls) -> "RandomSource":
        return cls(int.from_bytes(os.urandom(8), "little"))

    def spawn(self, key: int) -> "RandomSource":
        """Independent sub-stream keyed by a non-negative integer."""
        mixed = splitmix_word(self.seed ^ 0x5851F42D4C957F2D, key & MASK64)
        mixed = splitmix_word(mixed, (key >> 64) & MASK64)
        return RandomSource(mixed)

    # -- raw words ----------------------------------------------------------
    def next_word(self) -> int:
        pos = self._block_pos
        if pos >= len(self._block):
            self._refill()
            pos = 0
        self._block_pos = pos + 1
        self._counter += 1
        self.words_consumed += 1
        return self._block[pos]

    def _refill(self) -> None:
        # adaptive block size: small for short-lived sources, large for hungry ones
        size = self._block_size
        self._block = _splitmix_block(self.seed, self._counter, size).tolist()
        self._block_start = self._counter
        self._block_pos = 0
        if size < 8192:
            self._block_size = size * 4

    @property
    def counter(self) -> int:
        return self._counter

    def take_counter(self) -> int:
        """Hand the word position to an external consumer; buffered bits are dropped."""
        self._bitbuf = 0
        self._bitcount = 0
        return self._counter

    def set_counter(self, counter: int, words_used: int = 0) -> None:
        if counter < self._counter:
            raise ValueError("counter can only move forward")
        self._counter = counter
        self._block = []
        self._block_pos = 0
        self.words_consumed += words_used

    # -- bits ---------------------------------------------------------------
    def next_bits(self, k: int) -> int:
        """k fresh bits as an integer (first bit most significant)."""
        if k <= 0:
            return 0
        while self._bitcount < k:
            self._bitbuf = (self._bitbuf << 64) | self.next_word()
            self._bitcount += 64
        self._bitcount -= k
        out = self._bitbuf >> self._bitcount
        self._bitbuf &= (1 << self._bitcount) - 1
        return out

    def next_bit(self) -> int:
        return self.next_bits(1)

    @property
    def bits_consumed(self) -> int:
        return 64 * self.words_consumed - self._bitcount


# ---------------------------------------------------------------------------
# exact Bernoulli draws


def _check_prob(p: Fraction) -> None:
    if p < 0 or p > 1:
        raise ValueError(f"probability outside [0,1]: {p}")


def bernoulli_exact(p: RationalLike, src: RandomSource) -> bool:
    """True with probability exactly p (a rational in [0,1])."""
    p = as_rational(p)
    _check_prob(p)
    if p == 0:
        return False
    if p == 1:
        return True
    num, den = p.numerator, p.denominator
    while True:
        scaled = num << 64
        t, num = divmod(scaled, den)
        c = MASK64 ^ src.next_word()
        if c < t:
            return True
        if c > t:
            return False
        if num == 0:
            return False


class ExactCoin:
    """A Bernoulli(p) coin with its first 64-bit threshold precomputed."""

    __slots__ = ("p", "_t", "_rem", "_den", "_const")

    def __init__(self, p: RationalLike):
        p = as_rational(p)
        _check_prob(p)
        self.p = p
        self._const: Optional[bool] = None
        if p == 0:
            self._const = False
        elif p == 1:
            self._const = True
        self._den = p.denominator
        self._t, self._rem = divmod(p.numerator << 64, self._den)

    def flip(self, src: RandomSource) -> bool:
        if self._const is not None:
            return self._const
        c = MASK64 ^ src.next_word()
        if c < self._t:
            return True
        if c > self._t:
            return False
        num = self._rem
        den = self._den
        while num:
            t, num = divmod(num << 64, den)
            c = MASK64 ^ src.next_word()
            if c < t:
                return True
            if c > t:
                return False
        return False


def uniform_int(n: int, src: RandomSource) -> int:
    """Exactly uniform integer in [0, n) by rejection on ceil(log2 n)-bit blocks."""
    if n < 1:
        raise ValueError("uniform_int needs n >= 1")
    if n == 1:
        return 0
    k = (n - 1).bit_length()
    while True:
        x = src.next_bits(k)
        if x < n:
            return x


def geometric_failures(r: Fraction, src: RandomSource) -> int:
    """Number G >= 0 with P(G >= k) = r^k exactly, for a rational r in [0, 1).

    Inversion: G = #{k >= 1 : U < r^k}.  A float guess locates the candidate
    and exact rational comparisons with a lazily refined U confirm it.
    """
    if r < 0 or r >= 1:
        raise ValueError("geometric ratio must lie in [0,1)")
    if r == 0:
        return 0
    # U in [c/2^b, (c+1)/2^b)
    c = MASK64 ^ src.next_word()
    b = 64
    log_r = math.log(r.numerator) - math.log(r.denominator)
    while True:
        u_mid = (c + 0.5) / (1 << b) if b <= 1000 else 0.0
        if u_mid > 0.0:
            guess = max(0, int(math.floor(math.log(u_mid) / log_r)))
        else:
            guess = 0
        k = guess
        # find k with r^(k+1) <= U < r^k, adjusting the guess exactly
        resolved = True
        while True:
            rk = r ** k
            lo_ok = _u_below(c, b, rk)  # U < r^k ?
            if lo_ok is None:
                resolved = False
                break
            if not lo_ok:
                if k == 0:
                    raise AssertionError("U >= 1 is impossible")
                k -= 1
                continue
            hi = _u_below(c, b, rk * r)  # U < r^(k+1) ?
            if hi is None:
                resolved = False
                break
            if hi:
                k += 1
                continue
            return k
        if not resolved:
            c = (c << 64) | (MASK64 ^ src.next_word())
            b += 64


def _u_below(c: int, b: int, x: Fraction) -> Optional[bool]:
    # is U < x given U in [c/2^b, (c+1)/2^b)?  None when undecided
    if (c + 1) * x.denominator <= x.numerator << b:
        return True
    if c * x.denominator >= x.numerator << b:
        return False
    return None


# ---------------------------------------------------------------------------
# lazily refinable reals


Interval = Tuple[Fraction, Fraction]


def _dyadic_floor(x: Fraction, bits: int) -> Fraction:
    return Fraction((x.numerator << bits) // x.denominator, 1 << bits)


def _dyadic_ceil(x: Fraction, bits: int) -> Fraction:
    return Fraction(-((-x.numerator << bits) // x.denominator), 1 << bits)


class ComputableProb:
    """A non-negative real given by nested rational intervals.

    `refine(bits)` returns (lo, hi) with lo <= value <= hi and hi - lo <= 2^-bits.
    Results are cached and intersected, so successive answers are nested.
    Values used as probabilities must lie in [0, 1]; products and helpers may
    build larger intermediate reals (e, powers above one).
    """

    __slots__ = ("_fn", "_bits", "_lo", "_hi", "label")

    def __init__(self, fn: Callable[[int], Interval], label: str = ""):
        self._fn = fn
        self._bits = -1
        self._lo: Fraction = Fraction(0)
        self._hi: Fraction = Fraction(0)
        self.label = label

    @classmethod
    def exact(cls, x: RationalLike) -> "ComputableProb":
        x = as_rational(x)
        if x < 0:
            raise ValueError("ComputableProb values are non-negative")
        obj = cls(lambda bits: (x, x), label=str(x))
        obj._bits = 1 << 30
        obj._lo = obj._hi = x
        return obj

    def is_exact(self) -> bool:
        return self._lo == self._hi and self._bits >= (1 << 30)

    def refine(self, bits: int) -> Interval:
        if bits <= self._bits:
            return self._lo, self._hi
        lo, hi = self._fn(bits)
        if not isinstance(lo, Fraction) or not isinstance(hi, Fraction):
            lo, hi = Fraction(lo), Fraction(hi)
        if lo > hi:
            raise ValueError(f"malformed interval from {self.label or 'refinement'}: lo > hi")
        if hi - lo > Fraction(1, 1 << bits):
            raise ValueError(f"refinement of {self.label or 'value'} failed to shrink to 2^-{bits}")
        if self._bits >= 0:
            lo, hi = max(lo, self._lo), min(hi, self._hi)
            if lo > hi:
                raise ValueError(f"refinements of {self.label or 'value'} are not nested")
        if lo < 0:
            lo = Fraction(0)
        self._bits, self._lo, self._hi = bits, lo, hi
        return lo, hi

    def upper_bound(self) -> Fraction:
        return self.refine(max(self._bits, 8))[1]

    def __float__(self) -> float:
        lo, hi = self.refine(max(self._bits, 60))
        return float((lo + hi) / 2)

    def __repr__(self) -> str:
        return f"ComputableProb({self.label or float(self):.6g})"

    # -- combinators ----------------------------------------------------------
    def __mul__(self, other: "ComputableProb | RationalLike") -> "ComputableProb":
        if not isinstance(other, ComputableProb):
            other = ComputableProb.exact(other)
        return product(self, other)

    __rmul__ = __mul__


def product(*factors: ComputableProb) -> ComputableProb:
    """Product of non-negative computable reals."""
    if all(f.is_exact() for f in factors):
        v = Fraction(1)
        for f in factors:
            v *= f._lo
        return ComputableProb.exact(v)
    ubs = [f.refine(2)[1] for f in factors]
    # width of a product of k intervals is bounded by sum_i w_i * prod_{j != i} (ub_j + 1)
    big = 1
    for ub in ubs:
        big *= math.ceil(ub) + 1
    extra = big.bit_length() + len(factors).bit_length() + 1

    def fn(bits: int) -> Interval:
        lo, hi = Fraction(1), Fraction(1)
        for f in factors:
            a, b = f.refine(bits + extra)
            lo *= a
            hi *= b
        return _dyadic_floor(lo, bits + 2), _dyadic_ceil(hi, bits + 2)

    return ComputableProb(fn, label="*".join(f.label for f in factors if f.label))


def _exp_neg_unit(y: Fraction, prec: int) -> Interval:
    # e^{-y} for 0 <= y <= 1 bracketed by consecutive partial sums of the alternating series
    term = Fraction(1)
    s = Fraction(1)
    k = 0
    tol = Fraction(1, 1 << prec)
    while True:
        k += 1
        term = term * y / k
        nxt = s - term if k % 2 else s + term
        if term <= tol:
            return (min(s, nxt), max(s, nxt))
        s = nxt


def exp_neg(x: RationalLike) -> ComputableProb:
    """e^{-x} for a rational x >= 0, as a computable probability."""
    x = as_rational(x)
    if x < 0:
        raise ValueError("exp_neg needs x >= 0")
    if x == 0:
        return ComputableProb.exact(1)
    n = max(1, math.ceil(x))
    y = x / n

    def fn(bits: int) -> Interval:
        prec = bits + 2 * n.bit_length() + 8
        lo_f, hi_f = _exp_neg_unit(y, prec + 2)
        lo = (lo_f.numerator << prec) // lo_f.denominator
        hi = -((-hi_f.numerator << prec) // hi_f.denominator)
        lo_p, hi_p = _fixed_pow(lo, hi, n, prec)
        return Fraction(lo_p, 1 << prec), Fraction(hi_p, 1 << prec)

    return ComputableProb(fn, label=f"exp(-{x})")


def _fixed_pow(lo: int, hi: int, n: int, prec: int) -> Tuple[int, int]:
    # (lo/2^prec)^n and (hi/2^prec)^n with downward / upward rounding
    one = 1 << prec
    rlo, rhi = one, one
    blo, bhi = lo, hi
    while n:
        if n & 1:
            rlo = (rlo * blo) >> prec
            rhi = -((-(rhi * bhi)) >> prec)
        n >>= 1
        if n:
            blo = (blo * blo) >> prec
            bhi = -((-(bhi * bhi)) >> prec)
    return rlo, rhi


def euler_e() -> ComputableProb:
    """The constant e (exceeds one; used inside condition checks only)."""

    def fn(bits: int) -> Interval:
        s = Fraction(0)
        term = Fraction(1)
        k = 0
        tol = Fraction(1, 1 << (bits + 2))
        while True:
            s += term
            k += 1
            term /= k
            # remaining tail < 2 * term
            if 2 * term <= tol:
                return s, s + 2 * term

    return ComputableProb(fn, label="e")


def exp_pos(x: RationalLike) -> ComputableProb:
    """e^{x} for rational x >= 0."""
    inner = exp_neg(x)

    def fn(bits: int) -> Interval:
        extra = 4
        while True:
            lo, hi = inner.refine(bits + extra)
            if lo > 0:
                out_lo, out_hi = 1 / hi, 1 / lo
                if out_hi - out_lo <= Fraction(1, 1 << bits):
                    return _dyadic_floor(out_lo, bits + 2), _dyadic_ceil(out_hi, bits + 2)
            extra += 8

    return ComputableProb(fn, label=f"exp({as_rational(x)})")


def iroot(a: int, k: int) -> int:
    """floor(a^(1/k)) for a >= 0."""
    if a < 0 or k < 1:
        raise ValueError("iroot needs a >= 0, k >= 1")
    if a < 2 or k == 1:
        return a
    x = 1 << ((a.bit_length() + k - 1) // k)
    while True:
        y = ((k - 1) * x + a // x ** (k - 1)) // k
        if y >= x:
            break
        x = y
    while x ** k > a:
        x -= 1
    while (x + 1) ** k <= a:
        x += 1
    return x


def rational_power(x: RationalLike, exponent: RationalLike) -> ComputableProb:
    """x^(a/b) for rational x >= 0 and rational exponent a/b >= 0."""
    x = as_rational(x)
    e = as_rational(exponent)
    if x < 0 or e < 0:
        raise ValueError("rational_power needs non-negative base and exponent")
    v = x ** e.numerator
    b = e.denominator
    if b == 1:
        return ComputableProb.exact(v)
    # magnitude guard so bits of precision translate to an absolute width
    mag = max(1, math.ceil(v)).bit_length()

    def fn(bits: int) -> Interval:
        prec = bits + mag + 2
        scaled = (v.numerator << (prec * b)) // v.denominator
        r = iroot(scaled, b)
        return Fraction(r, 1 << prec), Fraction(r + 1, 1 << prec)

    return ComputableProb(fn, label=f"{x}^({e})")


def bernoulli_computable(p: ComputableProb, src: RandomSource, max_words: int = 64) -> bool:
    """True with probability exactly equal to the real value of p.

    U is extended one word at a time and p is refined until U's dyadic cell
    lies strictly on one side of p's interval.
    """
    if p.is_exact():
        return bernoulli_exact(p._lo, src)
    c = MASK64 ^ src.next_word()
    w = 1
    while True:
        b = 64 * w
        lo, hi = p.refine(b + 2)
        if lo > 1:
            raise ValueError(f"probability {p.label or ''} exceeds 1")
        # U in [c/2^b, (c+1)/2^b)
        if (c + 1) * lo.denominator <= lo.numerator << b:
            return True
        if c * hi.denominator >= hi.numerator << b:
            return False
        if w >= max_words:
            raise ValueError(f"refinement of {p.label or 'probability'} did not separate from U")
        c = (c << 64) | (MASK64 ^ src.next_word())
        w += 1


def compare_intervals(a: ComputableProb, b: ComputableProb, max_bits: int = 4096) -> int:
    """Sign of a - b, refining until the intervals separate."""
    bits = 16
    while bits <= max_bits:
        alo, ahi = a.refine(bits)
        blo, bhi = b.refine(bits)
        if ahi < blo:
            return -1
        if alo > bhi:
            return 1
        bits *= 2
    raise ValueError("values could not be separated at the precision cap")
