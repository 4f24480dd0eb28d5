"""Delayed variable-to-fixed homophonic encoder and decoder.

Each output block carries n symbols.  The encoder picks the tail x_2^n of a
block so that its cumulative region contains the unread bit expansion r, then
splits the surviving interval over a dyadic grid; the index of the grid piece
holding r rides on the *next* block's first symbol, which is why the decoder
releases a block's bits only after seeing its successor (one-block delay) and
why a trailing flush block is mandatory for finite messages.

Bits are read lazily: the candidate set for r starts at the full interval and
halves per peeked bit; once the sequence and the piece are pinned down,
exactly l1 bits are consumed and the rest replay in the next block.

The standard variant signals the piece index through a rank permutation of
the first-symbol distribution; the shifted variant transmits it directly and
rotates each first symbol's cumulative law by a per-symbol offset.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .model import BlockModel, Decided, ModelError, Region, RegionRefiner
from .numerics import (
    FULL_INTERVAL,
    HALF,
    ONE,
    ZERO,
    CircularArc,
    CircularDepthError,
    Span,
    UnitInterval,
    arc_depth,
    arc_intersect,
    bits_of,
    floor_bits_int,
    floor_neg_log2,
    frac_lt,
    frac_mod1,
    interval_depth,
    rank_desc,
    rescale,
    subdivide,
    subdivide_arc,
)
from .shift import ShiftTable

INITIAL_PIECE_INDEX = 0  # shifted variant: fixed initial i*, shared by both ends


class DisconnectedIntersectionError(RuntimeError):
    """Shifted-variant geometry failure: the interval and the rotated region
    meet in two components (or the wrapped arc cannot be subdivided).
    Proceeding would silently break unique decodability, so the encoder
    aborts the stream instead."""

    def __init__(self, block_index: int, detail: str) -> None:
        super().__init__(f"block {block_index}: {detail}")
        self.block_index = block_index


class TruncatedStreamError(RuntimeError):
    """Fewer decoded bits than the message length requires."""


class BlockBudgetError(RuntimeError):
    """Encoding exceeded the block budget before consuming the message."""


@dataclass(frozen=True, slots=True)
class Variant:
    """Standard (rank-coded first symbol) or shifted (direct piece index with
    rotated cumulative laws)."""

    shift: Optional[ShiftTable] = None

    @property
    def shifted(self) -> bool:
        return self.shift is not None

    @property
    def name(self) -> str:
        return "shifted" if self.shifted else "standard"


STANDARD = Variant()


def shifted_variant(table: ShiftTable) -> Variant:
    return Variant(table)


class BitSource:
    """Replayable bit stream with a consume cursor.

    Backed either by a finite message (implicitly padded with zeros, which
    keeps every r exactly rational) or by an on-demand provider such as a
    seeded generator.  Peeked bits are materialized once and replay until
    consumed; consumed positions never rewind.
    """

    def __init__(self, message: Optional[Sequence[int]] = None,
                 provider: Optional[Callable[[], int]] = None) -> None:
        self._bits: list[int] = []
        self._provider = provider
        self._cursor = 0
        if message is not None:
            for b in message:
                if b not in (0, 1):
                    raise ValueError(f"message bits must be 0 or 1, got {b!r}")
                self._bits.append(b)
        self._message_len = len(self._bits)

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "BitSource":
        """Finite message followed by infinite zero padding."""
        return cls(message=bits)

    @classmethod
    def from_rng(cls, rng) -> "BitSource":
        """Unbounded stream of fresh uniform bits from a seeded generator."""
        return cls(provider=lambda: rng.getrandbits(1))

    def _materialize(self, index: int) -> None:
        while len(self._bits) <= index:
            self._bits.append(self._provider() if self._provider is not None else 0)

    def peek(self, offset: int) -> int:
        self._materialize(self._cursor + offset)
        return self._bits[self._cursor + offset]

    def consume(self, count: int) -> None:
        if count < 0:
            raise ValueError("cannot consume a negative number of bits")
        self._materialize(self._cursor + count - 1)
        self._cursor += count

    @property
    def position(self) -> int:
        """1-based index of the next unconsumed bit (the t of the stream)."""
        return self._cursor + 1

    @property
    def bits_consumed(self) -> int:
        return self._cursor

    def bit_slice(self, start: int, stop: int) -> tuple[int, ...]:
        """Materialized bits for 1-based positions [start, stop)."""
        if stop > start:
            self._materialize(stop - 2)
        return tuple(self._bits[start - 1:stop - 1])

    def tail_value(self, position: int) -> Optional[Fraction]:
        """Exact value of 0.b_t b_{t+1}... from a 1-based position; only
        finite (zero-padded) sources have one."""
        if self._provider is not None:
            return None
        start = position - 1
        if start >= self._message_len:
            return ZERO
        value = 0
        for b in self._bits[start:self._message_len]:
            value = (value << 1) | b
        return Fraction(value, 1 << (self._message_len - start))


@dataclass(frozen=True, slots=True)
class BlockTrace:
    """Observer record of one encoded block (the j-th)."""

    index: int
    codeword: tuple[int, ...]
    t_start: int
    interval_before: UnitInterval
    region: Region
    span: Span  # the surviving intersection I'
    depth: int  # l0
    pieces: tuple[Optional[UnitInterval], ...]
    piece_index: int  # i*
    bit_count: int  # l1
    rank_next: int  # k handed to the next block
    consumed: tuple[int, ...]
    interval_after: UnitInterval


class Encoder:
    """Single-threaded encoding state machine over one bit source."""

    def __init__(self, model: BlockModel, source: BitSource,
                 variant: Variant = STANDARD, *, record_traces: bool = False) -> None:
        if variant.shifted and len(variant.shift.values) != model.m:
            raise ModelError("shift table size does not match the alphabet")
        self.model = model
        self.source = source
        self.variant = variant
        self.interval = FULL_INTERVAL
        self.rank = 0
        self.piece_index = INITIAL_PIECE_INDEX
        self.blocks_encoded = 0
        self.traces: list[BlockTrace] = []
        self._record_traces = record_traces

    def encode_block(self) -> tuple[int, ...]:
        model, src = self.model, self.source
        interval = self.interval
        t_start = src.position
        if self.variant.shifted:
            x1 = self.piece_index
            shift = self.variant.shift[x1]
        else:
            x1 = model.first_symbol_order.forward[self.rank]
            shift = ZERO

        # Narrow the candidate window over r (peeked bits intersected with
        # the known constraint r in I) until the tail sequence is decided.
        refiner = RegionRefiner(model, x1, shift)
        num = 0
        width_log = 0
        outcome: Optional[Decided] = None
        while outcome is None:
            cand = self._candidate(interval, num, width_log)
            outcome = refiner.advance(cand)
            if outcome is None:
                num = (num << 1) | src.peek(width_log)
                width_log += 1
        region = outcome.region

        # Surviving interval I' = I intersected with the (rotated) region.
        span: Span
        if self.variant.shifted:
            arc = CircularArc(frac_mod1(region.lower - shift), region.width)
            inter = arc_intersect(interval, arc)
            if inter.kind == "disconnected":
                raise DisconnectedIntersectionError(
                    self.blocks_encoded + 1,
                    f"interval {interval} and rotated region {arc} are disconnected",
                )
            assert inter.kind == "single", "r lies in both sets; intersection nonempty"
            span = inter.piece
        else:
            linear = interval.intersect(region.as_interval())
            assert linear is not None, "r lies in both sets; intersection nonempty"
            span = linear

        if isinstance(span, CircularArc):
            depth = arc_depth(span, model.m)
            try:
                pieces = subdivide_arc(span, depth, model.m)
            except CircularDepthError as exc:
                raise DisconnectedIntersectionError(self.blocks_encoded + 1, str(exc)) from exc
        else:
            depth = interval_depth(span, model.m)
            pieces = subdivide(span, depth, model.m)

        # Keep peeking until exactly one piece can still hold r.
        while True:
            lo, hi = self._window(num, width_log)
            live = [i for i, pc in enumerate(pieces)
                    if pc is not None and frac_lt(pc.lo, hi) and frac_lt(lo, pc.hi)]
            if len(live) == 1:
                piece_index = live[0]
                break
            num = (num << 1) | src.peek(width_log)
            width_log += 1

        piece = pieces[piece_index]
        bit_count = floor_neg_log2(piece.length)
        interval_after = rescale(piece, bit_count)
        lengths = [pc.length if pc is not None else ZERO for pc in pieces]
        rank_next = rank_desc(lengths).inverse[piece_index]
        consumed = tuple(src.peek(i) for i in range(bit_count))
        src.consume(bit_count)
        value = 0
        for b in consumed:
            value = (value << 1) | b
        assert value == floor_bits_int(piece.lo, bit_count), (
            "consumed bits must be the truncated lower bound of the chosen piece"
        )

        codeword = (x1,) + outcome.sequence
        self.blocks_encoded += 1
        if self._record_traces:
            self.traces.append(BlockTrace(
                index=self.blocks_encoded,
                codeword=codeword,
                t_start=t_start,
                interval_before=interval,
                region=region,
                span=span,
                depth=depth,
                pieces=tuple(pieces),
                piece_index=piece_index,
                bit_count=bit_count,
                rank_next=rank_next,
                consumed=consumed,
                interval_after=interval_after,
            ))
        self.interval = interval_after
        self.rank = rank_next
        self.piece_index = piece_index
        return codeword

    @staticmethod
    def _candidate(interval: UnitInterval, num: int, width_log: int) -> UnitInterval:
        if width_log == 0:
            return interval
        scale = 1 << width_log
        r_lo = Fraction(num, scale)
        r_hi = Fraction(num + 1, scale)
        lo = r_lo if frac_lt(interval.lo, r_lo) else interval.lo
        hi = r_hi if frac_lt(r_hi, interval.hi) else interval.hi
        return UnitInterval(lo, hi)

    @staticmethod
    def _window(num: int, width_log: int) -> tuple[Fraction, Fraction]:
        if width_log == 0:
            return ZERO, ONE
        scale = 1 << width_log
        return Fraction(num, scale), Fraction(num + 1, scale)


class Decoder:
    """Single-threaded decoding state machine.

    Corrupted codewords are legal inputs: every geometric failure falls back
    to a deterministic recovery (the exception step uses the received block's
    own region, degenerate shifted geometry widens to the full interval, an
    impossible piece index emits nothing and resets).  Diagnostics count how
    often each path fired.
    """

    def __init__(self, model: BlockModel, variant: Variant = STANDARD) -> None:
        if variant.shifted and len(variant.shift.values) != model.m:
            raise ModelError("shift table size does not match the alphabet")
        self.model = model
        self.variant = variant
        self.interval = FULL_INTERVAL
        self.pieces: Optional[tuple[Optional[UnitInterval], ...]] = None
        self.blocks_decoded = 0
        self.boundaries: list[int] = []  # boundaries[j-1] is t-hat at block j
        self.diagnostics = {
            "exception": 0,
            "disconnected": 0,
            "degenerate": 0,
            "empty_piece": 0,
            "empty_region": 0,
        }

    def decode_block(self, codeword: Sequence[int]) -> list[int]:
        model = self.model
        codeword = tuple(codeword)
        if len(codeword) != model.n:
            raise ModelError(f"codeword must have {model.n} symbols, got {len(codeword)}")
        for sym in codeword:
            model._check_symbol(sym)

        emitted: list[int] = []
        if self.pieces is not None:
            # Recover the previous block's piece from this block's first
            # symbol, release its bits, and advance the interval.
            if self.variant.shifted:
                piece_index = codeword[0]
            else:
                rank = model.first_symbol_order.inverse[codeword[0]]
                lengths = [pc.length if pc is not None else ZERO for pc in self.pieces]
                piece_index = rank_desc(lengths).forward[rank]
            piece = self.pieces[piece_index]
            if piece is None:
                # Only reachable on corrupted streams: an empty piece carries
                # no bits; reset the interval to keep decoding total.
                self.diagnostics["empty_piece"] += 1
                self.interval = FULL_INTERVAL
            else:
                bit_count = floor_neg_log2(piece.length)
                emitted = list(bits_of(floor_bits_int(piece.lo, bit_count), bit_count))
                self.interval = rescale(piece, bit_count)

        self._absorb(codeword)
        self.blocks_decoded += 1
        previous = self.boundaries[-1] if self.boundaries else 1
        self.boundaries.append(previous + len(emitted))
        return emitted

    def _absorb(self, codeword: tuple[int, ...]) -> None:
        """Process the current block: intersect, apply the exception step,
        and subdivide for the next block's piece lookup."""
        model = self.model
        x1 = codeword[0]
        region = model.region_bounds(x1, codeword[1:])
        span: Optional[Span]
        if region.is_empty:
            # Corrupted symbol sequence with zero target probability; no
            # region to fall back on, so restart from the full interval.
            self.diagnostics["empty_region"] += 1
            span = FULL_INTERVAL
        elif self.variant.shifted:
            arc = CircularArc(frac_mod1(region.lower - self.variant.shift[x1]), region.width)
            inter = arc_intersect(self.interval, arc)
            if inter.kind == "single":
                span = inter.piece
            else:
                if inter.kind == "disconnected":
                    self.diagnostics["disconnected"] += 1
                else:
                    self.diagnostics["exception"] += 1
                span = arc  # exception step: keep the received block's region
        else:
            linear = self.interval.intersect(region.as_interval())
            if linear is None:
                self.diagnostics["exception"] += 1
                span = region.as_interval()
            else:
                span = linear

        self.pieces = self._subdivide_total(span)

    def _subdivide_total(self, span: Span) -> tuple[Optional[UnitInterval], ...]:
        model = self.model
        if isinstance(span, CircularArc):
            try:
                return tuple(subdivide_arc(span, arc_depth(span, model.m), model.m))
            except CircularDepthError:
                # Unsubdividable wrapped arc (needs a region of probability
                # beyond 1/2 plus adversarial alignment); widen to the whole
                # interval so decoding stays total.
                self.diagnostics["degenerate"] += 1
                span = FULL_INTERVAL
        return tuple(subdivide(span, interval_depth(span, model.m), model.m))


@dataclass(frozen=True, slots=True)
class EncodeResult:
    codewords: tuple[tuple[int, ...], ...]
    traces: tuple[BlockTrace, ...]
    data_bits_consumed: int
    total_bits_consumed: int
    block_bit_counts: tuple[int, ...]


def encode_message(
    model: BlockModel,
    message: Sequence[int],
    variant: Variant = STANDARD,
    *,
    max_blocks: Optional[int] = None,
    record_traces: bool = True,
) -> EncodeResult:
    """Encode a finite message: data blocks until every message bit is
    consumed, then exactly one flush block (the delay structure releases a
    block's bits only at its successor).  Padding bits are zeros."""
    message = list(message)
    budget = max_blocks if max_blocks is not None else len(message) + 16
    source = BitSource.from_bits(message)
    encoder = Encoder(model, source, variant, record_traces=record_traces)
    codewords: list[tuple[int, ...]] = []
    bit_counts: list[int] = []
    while source.bits_consumed < len(message):
        if len(codewords) >= budget:
            raise BlockBudgetError(
                f"{len(codewords)} blocks did not consume a {len(message)}-bit message"
            )
        before = source.bits_consumed
        codewords.append(encoder.encode_block())
        bit_counts.append(source.bits_consumed - before)
    data_bits = source.bits_consumed
    before = source.bits_consumed
    codewords.append(encoder.encode_block())  # flush
    bit_counts.append(source.bits_consumed - before)
    return EncodeResult(
        codewords=tuple(codewords),
        traces=tuple(encoder.traces),
        data_bits_consumed=data_bits,
        total_bits_consumed=source.bits_consumed,
        block_bit_counts=tuple(bit_counts),
    )


def decode_message(
    model: BlockModel,
    codewords: Sequence[Sequence[int]],
    message_length: int,
    variant: Variant = STANDARD,
) -> list[int]:
    """Concatenated block emissions truncated to the message length."""
    if len(codewords) < 1:
        raise TruncatedStreamError("no codewords to decode")
    decoder = Decoder(model, variant)
    bits: list[int] = []
    for codeword in codewords:
        bits.extend(decoder.decode_block(codeword))
    if len(bits) < message_length:
        raise TruncatedStreamError(
            f"decoded {len(bits)} bits, message needs {message_length}"
        )
    return bits[:message_length]


@dataclass(frozen=True, slots=True)
class InjectResult:
    bits: tuple[int, ...]
    boundaries: tuple[int, ...]  # t-hat at block 1..J
    diagnostics: dict


def inject_and_decode(
    model: BlockModel,
    codewords: Sequence[Sequence[int]],
    j0: int,
    y: Sequence[int],
    variant: Variant = STANDARD,
) -> InjectResult:
    """Decode the stream with block j0 (1-based) replaced by y, returning the
    emissions and per-block emission boundaries so callers can test where the
    decoded suffix realigns with the true one."""
    if not (1 <= j0 <= len(codewords)):
        raise ValueError(f"j0 must be in 1..{len(codewords)}, got {j0}")
    y = tuple(y)
    if len(y) != model.n:
        raise ModelError(f"replacement block must have {model.n} symbols")
    decoder = Decoder(model, variant)
    bits: list[int] = []
    for j, codeword in enumerate(codewords, start=1):
        bits.extend(decoder.decode_block(y if j == j0 else codeword))
    return InjectResult(
        bits=tuple(bits),
        boundaries=tuple(decoder.boundaries),
        diagnostics=dict(decoder.diagnostics),
    )


def check_traces(
    model: BlockModel,
    traces: Sequence[BlockTrace],
    source: BitSource,
    variant: Variant = STANDARD,
) -> None:
    """Replay encoder traces through every structural invariant; raises
    AssertionError on the first violation.  With a zero-padded source the
    membership checks on r are exact rational comparisons."""
    expected_t = 1
    for trace in traces:
        I = trace.interval_before
        assert I.length > HALF, f"block {trace.index}: |I| = {I.length} <= 1/2"
        for iv in (I, trace.interval_after):
            assert (iv.lo == ZERO and iv.hi > HALF) or (iv.hi == ONE and iv.lo < HALF), (
                f"block {trace.index}: interval {iv} not of the form [a,1), [0,b) or [0,1)"
            )
        assert trace.t_start == expected_t, (
            f"block {trace.index}: t_start {trace.t_start} != expected {expected_t}"
        )
        expected_t += trace.bit_count

        count = sum(1 for pc in trace.pieces if pc is not None)
        assert 2 <= count <= model.m, f"block {trace.index}: {count} pieces"
        total = sum((pc.length for pc in trace.pieces if pc is not None), ZERO)
        assert total == trace.span.length, f"block {trace.index}: pieces do not tile I'"
        if isinstance(trace.span, CircularArc):
            assert trace.depth == arc_depth(trace.span, model.m)
        else:
            assert trace.depth == interval_depth(trace.span, model.m)

        piece = trace.pieces[trace.piece_index]
        assert piece is not None, f"block {trace.index}: chosen piece is empty"
        assert trace.bit_count == floor_neg_log2(piece.length)
        assert trace.consumed == bits_of(
            floor_bits_int(piece.lo, trace.bit_count), trace.bit_count
        ), f"block {trace.index}: consumed bits are not the truncated piece bound"
        assert trace.interval_after == rescale(piece, trace.bit_count)

        lengths = [pc.length if pc is not None else ZERO for pc in trace.pieces]
        assert rank_desc(lengths).forward[trace.rank_next] == trace.piece_index, (
            f"block {trace.index}: rank does not invert to the chosen piece"
        )

        r = source.tail_value(trace.t_start)
        if r is not None:
            assert I.contains(r), f"block {trace.index}: r = {r} outside I = {I}"
            assert piece.contains(r), f"block {trace.index}: r outside the chosen piece"
            shift = variant.shift[trace.codeword[0]] if variant.shifted else ZERO
            rotated = frac_mod1(r + shift)
            assert trace.region.lower <= rotated < trace.region.upper, (
                f"block {trace.index}: rotated r outside the decided region"
            )
