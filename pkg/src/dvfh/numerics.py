"""Exact rational arithmetic on the binary unit interval.

Everything on the encode/decode path is computed with arbitrary-precision
rationals (``fractions.Fraction``); there is no floating point here.  The
module provides the dyadic truncation/remainder operators, interval depth
and subdivision on the dyadic grid, rescaling, descending-order
permutations, and interval/arc intersection on the unit circle.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

Rational = Fraction

ZERO = Fraction(0)
ONE = Fraction(1)
HALF = Fraction(1, 2)


def parse_rational(text: str) -> Fraction:
    """Parse a "num/den" (or plain integer/decimal) string into a Fraction."""
    return Fraction(text.strip())


def format_rational(r: Fraction) -> str:
    """Serialize a Fraction as "num/den" (always with an explicit denominator)."""
    return f"{r.numerator}/{r.denominator}"


def floor_bits_int(r: Fraction, l: int) -> int:
    """The integer floor(2^l * r)."""
    return (r.numerator << l) // r.denominator


def floor_bits(r: Fraction, l: int) -> Fraction:
    """First l bits of the binary expansion of r in [0,1), as 2^-l * floor(2^l r).

    Satisfies floor_bits(r, l) <= r < floor_bits(r, l) + 2^-l.
    """
    if l < 0:
        raise ValueError("bit count must be nonnegative")
    return Fraction(floor_bits_int(r, l), 1 << l)


def frac_after(r: Fraction, l: int) -> Fraction:
    """The value of the bits after position l: 2^l r - floor(2^l r), in [0,1).

    Exact complement of floor_bits: r == floor_bits(r, l) + 2^-l * frac_after(r, l).
    """
    if l < 0:
        raise ValueError("bit count must be nonnegative")
    return Fraction((r.numerator << l) % r.denominator, r.denominator)


def frac_mod1(r: Fraction) -> Fraction:
    """r minus its integer floor, in [0,1)."""
    return Fraction(r.numerator % r.denominator, r.denominator)


def floor_neg_log2(x: Fraction) -> int:
    """The unique l >= 0 with 2^-(l+1) < x <= 2^-l, for x in (0, 1].

    Computed by integer comparisons only.
    """
    num, den = x.numerator, x.denominator
    if num <= 0 or num > den:
        raise ValueError(f"argument must lie in (0, 1], got {x}")
    l = (den // num).bit_length() - 1
    while (num << l) > den:
        l -= 1
    while (num << (l + 1)) <= den:
        l += 1
    return l


def bits_of(value: int, width: int) -> tuple[int, ...]:
    """width bits of a nonnegative integer, most significant first."""
    return tuple((value >> (width - 1 - i)) & 1 for i in range(width))


def frac_lt(a: Fraction, b: Fraction) -> bool:
    """a < b by integer cross-multiplication.

    Fraction.__lt__ dispatches through the numbers ABC on every call; the
    codec compares endpoints hundreds of times per block, so the hot loops
    use these direct forms.
    """
    return a.numerator * b.denominator < b.numerator * a.denominator


def frac_le(a: Fraction, b: Fraction) -> bool:
    """a <= b by integer cross-multiplication (see frac_lt)."""
    return a.numerator * b.denominator <= b.numerator * a.denominator


@dataclass(frozen=True, slots=True)
class UnitInterval:
    """Half-open sub-interval [lo, hi) of the unit interval, 0 <= lo < hi <= 1."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self) -> None:
        if self.lo.numerator < 0 or not frac_lt(self.lo, self.hi) or self.hi > ONE:
            raise ValueError(f"invalid interval [{self.lo}, {self.hi})")

    @property
    def length(self) -> Fraction:
        return self.hi - self.lo

    def contains(self, r: Fraction) -> bool:
        return frac_le(self.lo, r) and frac_lt(r, self.hi)

    def intersect(self, other: "UnitInterval") -> Optional["UnitInterval"]:
        lo = other.lo if frac_lt(self.lo, other.lo) else self.lo
        hi = other.hi if frac_lt(other.hi, self.hi) else self.hi
        if not frac_lt(lo, hi):
            return None
        return UnitInterval(lo, hi)

    def overlaps(self, other: "UnitInterval") -> bool:
        return frac_lt(self.lo, other.hi) and frac_lt(other.lo, self.hi)

    def __str__(self) -> str:
        return f"[{self.lo}, {self.hi})"


FULL_INTERVAL = UnitInterval(ZERO, ONE)


@dataclass(frozen=True, slots=True)
class CircularArc:
    """Arc {<start + u> : 0 <= u < length} on the unit circle, length in (0, 1]."""

    start: Fraction
    length: Fraction

    def __post_init__(self) -> None:
        if not (ZERO <= self.start < ONE):
            raise ValueError(f"arc start must lie in [0,1), got {self.start}")
        if not (ZERO < self.length <= ONE):
            raise ValueError(f"arc length must lie in (0,1], got {self.length}")

    @property
    def end(self) -> Fraction:
        """Endpoint <start + length>; equals 0 when the arc closes exactly at 1."""
        return frac_mod1(self.start + self.length)

    @property
    def wraps(self) -> bool:
        return self.start + self.length > ONE

    def contains(self, r: Fraction) -> bool:
        if not self.wraps:
            return self.start <= r < self.start + self.length
        return r >= self.start or r < self.end

    def as_interval(self) -> UnitInterval:
        """Linear view [start, start+length); valid only for non-wrapping arcs."""
        if self.wraps:
            raise ValueError(f"arc {self} wraps past 1 and has no linear view")
        return UnitInterval(self.start, self.start + self.length)

    def __str__(self) -> str:
        return f"arc(start={self.start}, length={self.length})"


Span = Union[UnitInterval, CircularArc]


def span_length(span: Span) -> Fraction:
    return span.length


@dataclass(frozen=True, slots=True)
class Permutation:
    """Bijection on {0..m-1} with its inverse; forward[k] is the rank-k index."""

    forward: tuple[int, ...]
    inverse: tuple[int, ...]

    def __post_init__(self) -> None:
        m = len(self.forward)
        if sorted(self.forward) != list(range(m)) or len(self.inverse) != m:
            raise ValueError("not a permutation")
        for k, i in enumerate(self.forward):
            if self.inverse[i] != k:
                raise ValueError("inverse does not match forward")


def rank_desc(values: Sequence[Fraction]) -> Permutation:
    """Descending-order permutation; ties broken by ascending index.

    forward[k] is the index of the k-th largest value.  The tie convention is
    the one shared by encoder and decoder, so it must never change.
    """
    m = len(values)
    if m < 1:
        raise ValueError("need at least one value")
    forward = tuple(sorted(range(m), key=lambda i: values[i], reverse=True))
    inverse = [0] * m
    for k, i in enumerate(forward):
        inverse[i] = k
    return Permutation(forward, tuple(inverse))


def _span_depth(lo: Fraction, hi: Fraction, m: int) -> int:
    """Largest l >= 0 with hi <= floor_bits(lo, l) + m * 2^-l.

    hi may exceed 1 (circular spans); the formula is shared by intervals
    (lo, hi literal) and arcs (lo=start, hi=start+length).
    """
    length = hi - lo
    num, den = length.numerator, length.denominator
    # The condition forces m * 2^-l >= length, so search downward from the
    # largest l with m * den >= num * 2^l; it is guaranteed to hold within a
    # couple of steps once 2^-l >= length / (m - 1).
    l = (m * den // num).bit_length() - 1
    while (num << l) > m * den:
        l -= 1
    lo_num, lo_den = lo.numerator, lo.denominator
    hi_num, hi_den = hi.numerator, hi.denominator
    while l >= 0:
        q = (lo_num << l) // lo_den  # floor(2^l * lo)
        if hi_num << l <= (q + m) * hi_den:
            return l
        l -= 1
    raise AssertionError(f"no depth found for [{lo}, {hi}) with m={m}")


def interval_depth(interval: UnitInterval, m: int) -> int:
    """Largest l such that the interval fits under m dyadic cells of depth l
    anchored at floor_bits(lo, l)."""
    if m < 2:
        raise ValueError("alphabet size must be at least 2")
    return _span_depth(interval.lo, interval.hi, m)


def arc_depth(arc: CircularArc, m: int) -> int:
    """Circular generalization of interval_depth for wrapping arcs."""
    if m < 2:
        raise ValueError("alphabet size must be at least 2")
    return _span_depth(arc.start, arc.start + arc.length, m)


def subdivide(interval: UnitInterval, l0: int, m: int) -> list[Optional[UnitInterval]]:
    """Split an interval over the m dyadic cells of depth l0 anchored at
    floor_bits(lo, l0).

    Piece i is the intersection with cell i; absent pieces are None.  The
    caller must pass l0 = interval_depth(interval, m); maximality of l0
    guarantees between 2 and m nonempty pieces.
    """
    scale = 1 << l0
    q0 = floor_bits_int(interval.lo, l0)
    pieces: list[Optional[UnitInterval]] = [None] * m
    count = 0
    for i in range(m):
        cell_lo = Fraction(q0 + i, scale)
        if cell_lo >= interval.hi:
            break
        cell_hi = Fraction(q0 + i + 1, scale)
        lo = max(interval.lo, cell_lo)
        hi = min(interval.hi, cell_hi)
        if lo < hi:
            pieces[i] = UnitInterval(lo, hi)
            count += 1
    assert 2 <= count <= m, f"subdivision produced {count} pieces (depth not maximal?)"
    return pieces


class CircularDepthError(ValueError):
    """A wrapped arc cannot be subdivided: the m cells of depth l0 would
    overlap after wrapping (requires m > 2^l0, i.e. a region of probability
    close to 1)."""


def subdivide_arc(arc: CircularArc, l0: int, m: int) -> list[Optional[UnitInterval]]:
    """Subdivision of an arc over cells enumerated circularly from the cell
    containing the arc start, wrapping mod 1.

    Non-wrapping arcs reduce to the linear subdivision.  For wrapping arcs
    every resulting piece is still a linear interval (each dyadic cell is
    linear and, with m <= 2^l0 cells, no cell meets both ends of the arc).
    """
    if not arc.wraps:
        return subdivide(arc.as_interval(), l0, m)
    scale = 1 << l0
    if m > scale:
        raise CircularDepthError(
            f"cannot place {m} cells of width 2^-{l0} on the circle without overlap"
        )
    q0 = floor_bits_int(arc.start, l0)
    head = UnitInterval(arc.start, ONE)
    tail_hi = arc.end
    tail = UnitInterval(ZERO, tail_hi) if tail_hi > ZERO else None
    pieces: list[Optional[UnitInterval]] = [None] * m
    count = 0
    for i in range(m):
        q = (q0 + i) % scale
        cell = UnitInterval(Fraction(q, scale), Fraction(q + 1, scale))
        piece_h = cell.intersect(head)
        piece_t = cell.intersect(tail) if tail is not None else None
        assert piece_h is None or piece_t is None, "cell meets both ends of the arc"
        piece = piece_h if piece_h is not None else piece_t
        if piece is not None:
            pieces[i] = piece
            count += 1
    assert 2 <= count <= m, f"arc subdivision produced {count} pieces"
    return pieces


def rescale(interval: UnitInterval, l1: int) -> UnitInterval:
    """Map an interval inside a single depth-l1 dyadic cell onto the unit
    interval: [<lo>_l1, <hi>_l1), with an upper endpoint of 0 read as 1.

    The caller guarantees the single-cell property (asserted); the result has
    length 2^l1 times the input length.
    """
    q_lo = floor_bits_int(interval.lo, l1)
    assert interval.hi * (1 << l1) <= q_lo + 1, (
        f"{interval} straddles a depth-{l1} cell boundary"
    )
    new_lo = frac_after(interval.lo, l1)
    new_hi = frac_after(interval.hi, l1)
    if new_hi == ZERO:
        new_hi = ONE
    return UnitInterval(new_lo, new_hi)


@dataclass(frozen=True, slots=True)
class Intersection:
    """Result of intersecting a linear interval with a circular arc."""

    kind: str  # "empty" | "single" | "disconnected"
    piece: Optional[Span] = None
    pieces: tuple[UnitInterval, ...] = ()

    @property
    def is_empty(self) -> bool:
        return self.kind == "empty"


EMPTY_INTERSECTION = Intersection("empty")


def arc_intersect(interval: UnitInterval, arc: CircularArc) -> Intersection:
    """Exact intersection of a linear interval (viewed on the circle) with an
    arc.

    A connected result is Single: a linear interval unless it covers the
    point 0 in its interior, in which case it is a CircularArc.  Two
    components yield Disconnected, reported with both pieces.
    """
    if not arc.wraps:
        piece = interval.intersect(arc.as_interval())
        if piece is None:
            return EMPTY_INTERSECTION
        return Intersection("single", piece)
    head = interval.intersect(UnitInterval(arc.start, ONE))
    tail_hi = arc.end
    tail = interval.intersect(UnitInterval(ZERO, tail_hi)) if tail_hi > ZERO else None
    if head is None and tail is None:
        return EMPTY_INTERSECTION
    if head is None:
        return Intersection("single", tail)
    if tail is None:
        return Intersection("single", head)
    if head.hi == ONE and tail.lo == ZERO:
        # Connected through 0: a genuine arc with 0 in its interior.
        return Intersection("single", CircularArc(head.lo, head.length + tail.length))
    return Intersection("disconnected", None, (head, tail))
