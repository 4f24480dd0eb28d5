"""Per-block target distributions and their exact cumulative geometry.

A block model describes the law of one n-symbol output block as a strictly
positive first-symbol marginal plus sequential conditional distributions for
positions 2..n (symbols within a block need not be i.i.d.; blocks are
independent across the stream).  Cumulative bounds, the lazy inverse CDF and
the shifted variants are all exact rational computations; entropies are the
only floating-point quantities and never touch the codec path.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator, Optional, Sequence

from .numerics import (
    ONE,
    ZERO,
    CircularArc,
    Permutation,
    UnitInterval,
    format_rational,
    frac_le,
    frac_lt,
    frac_mod1,
    parse_rational,
    rank_desc,
)

DEFAULT_ENUMERATION_CAP = 1 << 20


class ModelError(ValueError):
    """Invalid model configuration or out-of-range symbol."""


@dataclass(frozen=True, slots=True)
class Region:
    """Cumulative slot [lower, upper) owned by one sequence; width equals the
    sequence's conditional probability.  Empty (lower == upper) for
    zero-probability sequences."""

    lower: Fraction
    upper: Fraction

    @property
    def width(self) -> Fraction:
        return self.upper - self.lower

    @property
    def is_empty(self) -> bool:
        return self.lower == self.upper

    def as_interval(self) -> UnitInterval:
        if self.is_empty:
            raise ValueError("empty region has no interval view")
        return UnitInterval(self.lower, self.upper)


@dataclass(frozen=True, slots=True)
class Decided:
    """Outcome of an inverse-region query: the unique sequence whose region
    contains the whole candidate set, with that region."""

    sequence: tuple[int, ...]
    region: Region


def _check_distribution(row: Sequence[Fraction], m: int, what: str, *, positive: bool) -> tuple[Fraction, ...]:
    row = tuple(Fraction(p) for p in row)
    if len(row) != m:
        raise ModelError(f"{what} must have {m} entries, got {len(row)}")
    for p in row:
        if p < 0 or (positive and p <= 0):
            raise ModelError(f"{what} entries must be {'positive' if positive else 'nonnegative'}, got {p}")
    if sum(row) != ONE:
        raise ModelError(f"{what} must sum to exactly 1, got {sum(row)}")
    return row


class BlockModel:
    """Target distribution for one output block.

    ``conditional(x1, prefix)`` returns the law of the next symbol given the
    first symbol and the within-block prefix x_2..x_{k-1}.  ``context_key``
    canonicalizes (x1, prefix) so rows can be cached (an i.i.d. model has a
    single context, a Markov model one per recent history).
    """

    def __init__(
        self,
        alphabet_size: int,
        block_length: int,
        first_symbol_dist: Sequence[Fraction],
        conditional: Callable[[int, tuple[int, ...]], Sequence[Fraction]],
        *,
        kind: str = "custom",
        config: Optional[dict] = None,
        context_key: Optional[Callable[[int, tuple[int, ...]], object]] = None,
    ) -> None:
        if alphabet_size < 2:
            raise ModelError(f"alphabet size must be >= 2, got {alphabet_size}")
        if block_length < 2:
            raise ModelError(f"block length must be >= 2, got {block_length}")
        self.m = alphabet_size
        self.n = block_length
        self.first_symbol_dist = _check_distribution(
            first_symbol_dist, alphabet_size, "first-symbol distribution", positive=True
        )
        self._conditional = conditional
        self._context_key = context_key or (lambda x1, prefix: (x1, prefix))
        self.kind = kind
        self.config = config
        self.first_symbol_order: Permutation = rank_desc(self.first_symbol_dist)
        self._cum_cache: dict[object, tuple[tuple[Fraction, ...], tuple[Fraction, ...]]] = {}
        self._p_max: Optional[Fraction] = None

    # -- conditional rows ---------------------------------------------------

    def conditional(self, x1: int, prefix: tuple[int, ...]) -> tuple[Fraction, ...]:
        """Distribution of the next symbol given x1 and the prefix x_2..x_{k-1}."""
        self._check_symbol(x1)
        return self._row(self._context_key(x1, prefix), x1, prefix)[0]

    def _row(self, key: object, x1: int, prefix: tuple[int, ...]):
        cached = self._cum_cache.get(key)
        if cached is None:
            row = _check_distribution(
                self._conditional(x1, prefix), self.m, "conditional distribution", positive=False
            )
            acc = ZERO
            cums = [ZERO]
            for p in row:
                acc += p
                cums.append(acc)
            cached = (row, tuple(cums))
            self._cum_cache[key] = cached
        return cached

    def _check_symbol(self, x: int) -> None:
        if not (0 <= x < self.m):
            raise ModelError(f"symbol {x} out of range for alphabet of size {self.m}")

    # -- regions ------------------------------------------------------------

    def region_bounds(self, x1: int, sequence: Sequence[int]) -> Region:
        """Cumulative slot of x_2^n given x1, accumulated symbol by symbol in
        O(n*m) rational operations.  The all-zeros sequence starts at 0."""
        self._check_symbol(x1)
        sequence = tuple(sequence)
        if len(sequence) != self.n - 1:
            raise ModelError(f"sequence must have {self.n - 1} symbols, got {len(sequence)}")
        lo = ZERO
        width = ONE
        prefix: tuple[int, ...] = ()
        for sym in sequence:
            self._check_symbol(sym)
            row, cums = self._row(self._context_key(x1, prefix), x1, prefix)
            lo += width * cums[sym]
            width *= row[sym]
            if width == ZERO:
                return Region(lo, lo)
            prefix = prefix + (sym,)
        return Region(lo, lo + width)

    def shifted_region_bounds(self, x1: int, sequence: Sequence[int], shift: Fraction) -> CircularArc:
        """Region rotated by -shift on the unit circle; same length, start
        <lower - shift>.  Degenerates to a plain interval when it does not
        wrap (see CircularArc.as_interval)."""
        region = self.region_bounds(x1, sequence)
        if region.is_empty:
            raise ModelError("zero-probability sequence has no shifted arc")
        return CircularArc(frac_mod1(region.lower - shift), region.width)

    def inverse_region(self, x1: int, candidate: UnitInterval) -> Optional[Decided]:
        """Sequence whose region contains all of the candidate set, or None
        (more bits needed) as soon as the candidate straddles a child
        boundary."""
        return RegionRefiner(self, x1).advance(candidate)

    def shifted_inverse_region(
        self, x1: int, candidate: UnitInterval, shift: Fraction
    ) -> Optional[Decided]:
        """inverse_region applied to the rotation <candidate + shift>; a
        wrapped rotation must decide the same sequence on both pieces."""
        return RegionRefiner(self, x1, shift).advance(candidate)

    # -- whole-block statistics ----------------------------------------------

    def enumerate_sequences(self) -> Iterator[tuple[int, ...]]:
        """All x_2^n in lexicographic order (m^(n-1) of them)."""
        seq = [0] * (self.n - 1)
        while True:
            yield tuple(seq)
            i = len(seq) - 1
            while i >= 0 and seq[i] == self.m - 1:
                seq[i] = 0
                i -= 1
            if i < 0:
                return
            seq[i] += 1

    def sequence_count(self) -> int:
        return self.m ** (self.n - 1)

    def p_max(self, cap: int = DEFAULT_ENUMERATION_CAP) -> Fraction:
        """Exact max over x1 and x_2^n of the conditional block probability."""
        if self._p_max is None:
            self._p_max = self._compute_p_max(cap)
        return self._p_max

    def _compute_p_max(self, cap: int) -> Fraction:
        if self.kind == "iid":
            row = self.conditional(0, ())
            return max(row) ** (self.n - 1)
        if self.kind == "markov":
            return max(self._markov_p_max(x1) for x1 in range(self.m))
        if self.sequence_count() > cap:
            raise ModelError(
                f"p_max enumeration over {self.sequence_count()} sequences exceeds cap {cap}"
            )
        best = ZERO
        for x1 in range(self.m):
            for seq in self.enumerate_sequences():
                width = self.region_bounds(x1, seq).width
                if width > best:
                    best = width
        return best

    def _markov_p_max(self, x1: int) -> Fraction:
        # Forward pass collects the reachable contexts per position (deduped
        # through context_key, so the state space stays m^order); the
        # backward pass maximizes the product of per-step probabilities.
        layers: list[dict[object, tuple[int, ...]]] = []
        frontier: list[tuple[int, ...]] = [()]
        for _pos in range(2, self.n + 1):
            layer: dict[object, tuple[int, ...]] = {}
            for prefix in frontier:
                layer.setdefault(self._context_key(x1, prefix), prefix)
            layers.append(layer)
            frontier = [
                prefix + (sym,) for prefix in layer.values() for sym in range(self.m)
            ]
        value: dict[object, Fraction] = {}
        for layer in reversed(layers):
            new_value: dict[object, Fraction] = {}
            for key, prefix in layer.items():
                row, _ = self._row(key, x1, prefix)
                cand = ZERO
                for sym in range(self.m):
                    p = row[sym]
                    if p == ZERO:
                        continue
                    tail = value.get(self._context_key(x1, prefix + (sym,)), ONE)
                    if p * tail > cand:
                        cand = p * tail
                new_value[key] = cand
            value = new_value
        return value[self._context_key(x1, ())]

    def cond_entropy(self, x1: int, cap: int = DEFAULT_ENUMERATION_CAP) -> float:
        """H(X_2^n | X_1 = x1) in bits.  Analysis-only floating point."""
        self._check_symbol(x1)
        if self.kind == "iid":
            row = self.conditional(x1, ())
            return (self.n - 1) * _entropy_bits(row)
        if self.kind == "markov":
            return self._markov_cond_entropy(x1)
        if self.sequence_count() > cap:
            raise ModelError(
                f"entropy enumeration over {self.sequence_count()} sequences exceeds cap {cap}"
            )
        total = 0.0
        for seq in self.enumerate_sequences():
            w = self.region_bounds(x1, seq).width
            if w > ZERO:
                total -= float(w) * math.log2(float(w))
        return total

    def _markov_cond_entropy(self, x1: int) -> float:
        # Chain rule: sum over positions of the entropy of the conditional
        # row, weighted by the (float) probability of reaching its context.
        alpha: dict[object, tuple[tuple[int, ...], float]] = {
            self._context_key(x1, ()): ((), 1.0)
        }
        total = 0.0
        for _pos in range(2, self.n + 1):
            nxt: dict[object, tuple[tuple[int, ...], float]] = {}
            for key, (prefix, weight) in alpha.items():
                row, _ = self._row(key, x1, prefix)
                total += weight * _entropy_bits(row)
                for sym in range(self.m):
                    p = float(row[sym])
                    if p == 0.0:
                        continue
                    nkey = self._context_key(x1, prefix + (sym,))
                    if nkey in nxt:
                        nxt[nkey] = (nxt[nkey][0], nxt[nkey][1] + weight * p)
                    else:
                        nxt[nkey] = (prefix + (sym,), weight * p)
            alpha = nxt
        return total

    def min_cond_entropy(self, cap: int = DEFAULT_ENUMERATION_CAP) -> float:
        return min(self.cond_entropy(x1, cap) for x1 in range(self.m))

    def block_entropy(self, cap: int = DEFAULT_ENUMERATION_CAP) -> float:
        """H(X^n) in bits: first-symbol entropy plus averaged conditionals."""
        total = _entropy_bits(self.first_symbol_dist)
        for x1 in range(self.m):
            total += float(self.first_symbol_dist[x1]) * self.cond_entropy(x1, cap)
        return total

    def digest(self) -> bytes:
        """SHA-256 of the canonical configuration; identifies the model in
        codeword containers."""
        if self.config is None:
            raise ModelError("model was not built from a configuration; no canonical digest")
        return config_digest(self.config)


def _entropy_bits(row: Sequence[Fraction]) -> float:
    total = 0.0
    for p in row:
        fp = float(p)
        if fp > 0.0:
            total -= fp * math.log2(fp)
    return total


class RegionRefiner:
    """Incremental inverse CDF: maintains the region of the current prefix
    and extends it one symbol at a time while the candidate set fits inside a
    single child region (arithmetic-decoder style).

    ``advance`` may be called repeatedly with ever-narrower candidate sets;
    work already done on outer symbols is never repeated.
    """

    __slots__ = ("model", "x1", "shift", "_prefix", "_lo", "_width", "_done", "_children")

    def __init__(self, model: BlockModel, x1: int, shift: Fraction = ZERO) -> None:
        model._check_symbol(x1)
        if not (ZERO <= shift < ONE):
            raise ModelError(f"shift must lie in [0,1), got {shift}")
        self.model = model
        self.x1 = x1
        self.shift = shift
        self._prefix: tuple[int, ...] = ()
        self._lo = ZERO
        self._width = ONE
        self._done = len(self._prefix) == model.n - 1
        self._children: Optional[list[tuple[int, Fraction, Fraction]]] = None

    def _rotated(self, candidate: UnitInterval) -> tuple[UnitInterval, ...]:
        if self.shift == ZERO:
            return (candidate,)
        lo = candidate.lo + self.shift
        hi = candidate.hi + self.shift
        if hi <= ONE:
            return (UnitInterval(lo, hi),)
        if lo >= ONE:
            return (UnitInterval(lo - ONE, hi - ONE),)
        # Rotation wraps: both pieces must fit in the same child region.
        return (UnitInterval(lo, ONE), UnitInterval(ZERO, hi - ONE))

    def _level_children(self) -> list[tuple[int, Fraction, Fraction]]:
        # Child bounds only change when the prefix deepens, not when the
        # candidate narrows, so they are computed once per level.
        if self._children is None:
            model = self.model
            row, cums = model._row(
                model._context_key(self.x1, self._prefix), self.x1, self._prefix
            )
            lo, width = self._lo, self._width
            kids: list[tuple[int, Fraction, Fraction]] = []
            prev = lo
            for sym in range(model.m):
                if row[sym] == ZERO:
                    continue
                hi = lo + width * cums[sym + 1]
                kids.append((sym, prev, hi))
                prev = hi
            self._children = kids
        return self._children

    def advance(self, candidate: UnitInterval) -> Optional[Decided]:
        pieces = self._rotated(candidate)
        target = pieces[0].lo
        while not self._done:
            chosen = None
            for sym, child_lo, child_hi in self._level_children():
                if frac_le(child_lo, target) and frac_lt(target, child_hi):
                    chosen = (sym, child_lo, child_hi)
                    break
            if chosen is None:
                return None  # candidate reaches outside the prefix region
            sym, child_lo, child_hi = chosen
            if not all(
                frac_le(child_lo, p.lo) and frac_le(p.hi, child_hi) for p in pieces
            ):
                return None  # straddles a child boundary: need more bits
            self._prefix = self._prefix + (sym,)
            self._lo = child_lo
            self._width = child_hi - child_lo
            self._children = None
            self._done = len(self._prefix) == self.model.n - 1
        return Decided(self._prefix, Region(self._lo, self._lo + self._width))


# -- configurations ----------------------------------------------------------


def iid_model(probs: Sequence[Fraction | str], n: int) -> BlockModel:
    """All n symbols i.i.d. with the given distribution."""
    row = tuple(parse_rational(p) if isinstance(p, str) else Fraction(p) for p in probs)
    config = {"type": "iid", "probs": [format_rational(p) for p in row]}
    return BlockModel(
        len(row), n, row,
        lambda x1, prefix: row,
        kind="iid", config=config,
        context_key=lambda x1, prefix: (),
    )


def markov_model(
    order: int,
    initial: Sequence[Fraction | str],
    transition,
    n: int,
) -> BlockModel:
    """Order-k Markov chain within the block: the first symbol follows
    ``initial``; each later symbol conditions on the previous min(k, seen)
    symbols, the table being indexed by the history oldest-first.  Histories
    shorter than k are left-padded with their own oldest symbol.
    """
    if order < 1:
        raise ModelError(f"Markov order must be >= 1, got {order}")
    init = tuple(parse_rational(p) if isinstance(p, str) else Fraction(p) for p in initial)
    m = len(init)

    def parse_table(node, depth):
        if depth == 0:
            return _check_distribution(
                tuple(parse_rational(p) if isinstance(p, str) else Fraction(p) for p in node),
                m, "transition row", positive=False,
            )
        if len(node) != m:
            raise ModelError(f"transition table level has {len(node)} entries, expected {m}")
        return tuple(parse_table(child, depth - 1) for child in node)

    table = parse_table(transition, order)

    def history(x1: int, prefix: tuple[int, ...]) -> tuple[int, ...]:
        full = (x1,) + prefix
        h = full[-order:]
        if len(h) < order:
            h = (h[0],) * (order - len(h)) + h
        return h

    def row_for(x1: int, prefix: tuple[int, ...]) -> tuple[Fraction, ...]:
        node = table
        for sym in history(x1, prefix):
            node = node[sym]
        return node

    def dump_table(node, depth):
        if depth == 0:
            return [format_rational(p) for p in node]
        return [dump_table(child, depth - 1) for child in node]

    config = {
        "type": "markov",
        "order": order,
        "initial": [format_rational(p) for p in init],
        "transition": dump_table(table, order),
    }
    return BlockModel(
        m, n, init, row_for,
        kind="markov", config=config,
        context_key=lambda x1, prefix: history(x1, prefix),
    )


def table_model(probs: dict[str, Fraction | str], n: int, m: Optional[int] = None) -> BlockModel:
    """Explicit joint distribution over length-n digit strings."""
    parsed: dict[tuple[int, ...], Fraction] = {}
    max_sym = 0
    for key, p in probs.items():
        if len(key) != n:
            raise ModelError(f"table key {key!r} must have length {n}")
        seq = tuple(int(ch) for ch in key)
        max_sym = max(max_sym, *seq)
        parsed[seq] = parse_rational(p) if isinstance(p, str) else Fraction(p)
    m = m if m is not None else max_sym + 1
    if m > 10:
        raise ModelError("table models use single-digit keys; alphabet size must be <= 10")
    if sum(parsed.values()) != ONE:
        raise ModelError("table probabilities must sum to exactly 1")
    # Prefix masses for conditional rows.
    mass: dict[tuple[int, ...], Fraction] = {}
    for seq, p in parsed.items():
        for k in range(n + 1):
            pre = seq[:k]
            mass[pre] = mass.get(pre, ZERO) + p
    first = tuple(mass.get((x,), ZERO) for x in range(m))

    def row_for(x1: int, prefix: tuple[int, ...]) -> tuple[Fraction, ...]:
        pre = (x1,) + prefix
        parent = mass.get(pre, ZERO)
        if parent == ZERO:
            # Unreachable context (zero-probability prefix): any valid row
            # works because the accumulated width is already zero.
            return tuple(Fraction(1, m) for _ in range(m))
        return tuple(mass.get(pre + (x,), ZERO) / parent for x in range(m))

    config = {
        "type": "table",
        "m": m,
        "n": n,
        "probs": {k: format_rational(parsed[tuple(int(c) for c in k)]) for k in sorted(probs)},
    }
    return BlockModel(m, n, first, row_for, kind="table", config=config)


def model_from_config(config: dict, n: Optional[int] = None) -> BlockModel:
    """Instantiate a BlockModel from its JSON configuration.  ``n`` is
    required for iid/markov configs; table configs carry their own."""
    kind = config.get("type")
    if kind == "iid":
        if n is None:
            raise ModelError("block length n is required for iid configs")
        return iid_model(config["probs"], n)
    if kind == "markov":
        if n is None:
            raise ModelError("block length n is required for markov configs")
        return markov_model(config["order"], config["initial"], config["transition"], n)
    if kind == "table":
        table_n = config["n"]
        if n is not None and n != table_n:
            raise ModelError(f"table config has n={table_n}, got --n {n}")
        return table_model(config["probs"], table_n, config.get("m"))
    raise ModelError(f"unknown model type {kind!r}")


def load_model(path: str, n: Optional[int] = None) -> BlockModel:
    with open(path, "r", encoding="utf-8") as fh:
        config = json.load(fh)
    return model_from_config(config, n)


def canonical_config_bytes(config: dict) -> bytes:
    return json.dumps(config, sort_keys=True, separators=(",", ":")).encode("utf-8")


def config_digest(config: dict) -> bytes:
    return hashlib.sha256(canonical_config_bytes(config)).digest()
