"""Encoder/decoder state machines: worked traces, roundtrips, corruption."""

import random
from fractions import Fraction

import pytest

from dvfh.codec import (
    STANDARD,
    BitSource,
    BlockBudgetError,
    Decoder,
    DisconnectedIntersectionError,
    Encoder,
    TruncatedStreamError,
    check_traces,
    decode_message,
    encode_message,
    inject_and_decode,
    shifted_variant,
)
from dvfh.model import iid_model, markov_model, table_model
from dvfh.numerics import FULL_INTERVAL, UnitInterval
from dvfh.seeding import spawn_rng
from dvfh.shift import ShiftTable, compute_shift_table

F = Fraction

SKEWED2 = iid_model(["3/4", "1/4"], 2)


def random_model(rng, m, n):
    weights = [rng.randrange(1, 12) for _ in range(m)]
    total = sum(weights)
    return iid_model([F(w, total) for w in weights], n)


class TestBitSource:
    def test_peek_then_consume_replays(self):
        src = BitSource.from_bits([1, 0, 1, 1])
        assert [src.peek(i) for i in range(6)] == [1, 0, 1, 1, 0, 0]
        src.consume(2)
        assert src.position == 3
        assert [src.peek(i) for i in range(3)] == [1, 1, 0]

    def test_zero_padding_is_infinite(self):
        src = BitSource.from_bits([])
        assert [src.peek(i) for i in range(16)] == [0] * 16

    def test_tail_value_exact(self):
        src = BitSource.from_bits([1, 0, 1, 1])
        assert src.tail_value(1) == F(11, 16)
        assert src.tail_value(3) == F(3, 4)
        assert src.tail_value(5) == 0
        assert src.tail_value(99) == 0

    def test_rng_source_has_no_exact_tail(self):
        src = BitSource.from_rng(spawn_rng(0, "bits"))
        assert src.tail_value(1) is None
        first = [src.peek(i) for i in range(8)]
        again = [src.peek(i) for i in range(8)]
        assert first == again

    def test_bit_slice(self):
        src = BitSource.from_bits([1, 0, 1, 1])
        assert src.bit_slice(2, 5) == (0, 1, 1)
        assert src.bit_slice(4, 7) == (1, 0, 0)

    def test_rejects_bad_bits(self):
        with pytest.raises(ValueError):
            BitSource.from_bits([0, 2])


class TestWorkedTrace:
    """Block-by-block values of encoding the message 1011 with the skewed
    binary model at n=2, frozen from a hand evaluation of the algorithm."""

    def test_block_values(self):
        result = encode_message(SKEWED2, [1, 0, 1, 1])
        assert result.codewords == ((0, 0), (1, 1), (0, 0))
        t1, t2, t3 = result.traces

        assert t1.codeword == (0, 0)
        assert t1.interval_before == FULL_INTERVAL
        assert (t1.region.lower, t1.region.upper) == (F(0), F(3, 4))
        assert t1.depth == 1
        assert t1.pieces == (UnitInterval(F(0), F(1, 2)), UnitInterval(F(1, 2), F(3, 4)))
        assert t1.piece_index == 1
        assert t1.bit_count == 2
        assert t1.consumed == (1, 0)
        assert t1.rank_next == 1
        assert t1.interval_after == FULL_INTERVAL

        assert t2.codeword == (1, 1)
        assert (t2.region.lower, t2.region.upper) == (F(3, 4), F(1))
        assert t2.depth == 3
        assert t2.pieces == (UnitInterval(F(3, 4), F(7, 8)), UnitInterval(F(7, 8), F(1)))
        assert t2.piece_index == 0
        assert t2.bit_count == 3
        assert t2.consumed == (1, 1, 0)
        assert t2.rank_next == 0  # tie between equal pieces breaks to index 0

        assert t3.codeword == (0, 0)
        assert t3.bit_count == 1
        assert result.data_bits_consumed == 5
        assert result.block_bit_counts == (2, 3, 1)

    def test_decoder_emissions(self):
        decoder = Decoder(SKEWED2)
        assert decoder.decode_block((0, 0)) == []
        assert decoder.decode_block((1, 1)) == [1, 0]
        assert decoder.decode_block((0, 0)) == [1, 1, 0]
        assert decoder.boundaries == [1, 3, 6]

    def test_roundtrip(self):
        result = encode_message(SKEWED2, [1, 0, 1, 1])
        assert decode_message(SKEWED2, result.codewords, 4) == [1, 0, 1, 1]

    def test_trace_invariants(self):
        message = [1, 0, 1, 1]
        result = encode_message(SKEWED2, message)
        check_traces(SKEWED2, result.traces, BitSource.from_bits(message))


class TestMessageFraming:
    def test_empty_message_is_one_flush_block(self):
        result = encode_message(SKEWED2, [])
        assert len(result.codewords) == 1
        assert decode_message(SKEWED2, result.codewords, 0) == []

    def test_uniform_blocks_consume_exactly_n(self):
        model = iid_model(["1/2", "1/2"], 8)
        message = [spawn_rng(5, "u").getrandbits(1) for _ in range(64)]
        result = encode_message(model, message)
        assert len(result.codewords) == 9  # 8 data blocks + flush
        assert result.block_bit_counts == (8,) * 9
        for trace in result.traces:
            assert trace.interval_before == FULL_INTERVAL

    def test_uniform_n2_consumes_two_bits_per_block(self):
        model = iid_model(["1/2", "1/2"], 2)
        rng = spawn_rng(6, "u")
        message = [rng.getrandbits(1) for _ in range(40)]
        result = encode_message(model, message)
        assert all(count == 2 for count in result.block_bit_counts)
        for trace in result.traces:
            assert trace.interval_after == FULL_INTERVAL

    def test_truncated_stream_detected(self):
        result = encode_message(SKEWED2, [1, 0, 1, 1])
        with pytest.raises(TruncatedStreamError):
            decode_message(SKEWED2, result.codewords[:-1], 4)
        with pytest.raises(TruncatedStreamError):
            decode_message(SKEWED2, [], 0)

    def test_block_budget(self):
        with pytest.raises(BlockBudgetError):
            encode_message(SKEWED2, [1] * 64, max_blocks=2)


class TestRoundtrips:
    def test_randomized_models_both_variants(self):
        rng = random.Random(20240)
        for trial in range(25):
            m = rng.choice([2, 3, 4])
            n = rng.choice([2, 3, 5, 8])
            model = random_model(rng, m, n)
            length = rng.randrange(0, 160)
            message = [rng.getrandbits(1) for _ in range(length)]

            result = encode_message(model, message)
            assert decode_message(model, result.codewords, length) == message
            check_traces(model, result.traces, BitSource.from_bits(message))

            table = compute_shift_table(model, seed=trial)
            variant = shifted_variant(table)
            result = encode_message(model, message, variant)
            assert decode_message(model, result.codewords, length, variant) == message
            check_traces(model, result.traces, BitSource.from_bits(message), variant)

    def test_markov_and_table_models(self):
        rng = random.Random(7)
        markov = markov_model(1, ["1/3", "2/3"], [["3/5", "2/5"], ["1/6", "5/6"]], 6)
        table = table_model({"000": "1/4", "001": "1/8", "010": "1/8",
                             "100": "1/4", "111": "1/4"}, 3)
        for model in (markov, table):
            message = [rng.getrandbits(1) for _ in range(120)]
            result = encode_message(model, message)
            assert decode_message(model, result.codewords, 120) == message
            check_traces(model, result.traces, BitSource.from_bits(message))

    def test_encoder_decoder_state_agreement(self):
        rng = spawn_rng(11, "agree")
        source = BitSource.from_rng(rng)
        model = iid_model(["2/5", "2/5", "1/5"], 4)
        encoder = Encoder(model, source, record_traces=True)
        decoder = Decoder(model)
        codewords = [encoder.encode_block() for _ in range(30)]
        for cw in codewords:
            decoder.decode_block(cw)
        # After each block the decoder's interval and pieces mirror the
        # encoder trace exactly on an uncorrupted stream.
        last = encoder.traces[-1]
        assert decoder.pieces == last.pieces
        assert decoder.diagnostics["exception"] == 0


class TestShiftedGeometry:
    def test_wrapped_arcs_roundtrip(self):
        # A deliberately non-breakpoint offset forces rotated regions to wrap
        # and exercises the circular subdivision on both ends.
        model = SKEWED2
        table = ShiftTable((F(1, 3), F(0)), "approx")
        variant = shifted_variant(table)
        rng = random.Random(3)
        for length in (0, 7, 33, 64):
            message = [rng.getrandbits(1) for _ in range(length)]
            result = encode_message(model, message, variant)
            assert decode_message(model, result.codewords, length, variant) == message
            check_traces(model, result.traces, BitSource.from_bits(message), variant)

    def test_disconnected_intersection_aborts(self):
        # Offset 1/2 sits strictly inside the region [0, 3/4), so the rotated
        # region wraps; with the interval [1/8, 1) the intersection has two
        # components and the encoder must refuse to continue.
        model = SKEWED2
        table = ShiftTable((F(1, 2), F(0)), "approx")
        encoder = Encoder(model, BitSource.from_bits([1, 1]), shifted_variant(table))
        encoder.interval = UnitInterval(F(1, 8), F(1))
        with pytest.raises(DisconnectedIntersectionError):
            encoder.encode_block()

    def test_decoder_absorbs_disconnected_geometry(self):
        model = SKEWED2
        table = ShiftTable((F(1, 2), F(0)), "approx")
        variant = shifted_variant(table)
        decoder = Decoder(model, variant)
        decoder.pieces = (UnitInterval(F(1, 8), F(5, 8)), UnitInterval(F(5, 8), F(1)))
        decoder.interval = UnitInterval(F(1, 8), F(1))
        decoder.decode_block((0, 0))  # would be disconnected; falls back
        assert decoder.diagnostics["disconnected"] == 1
        assert decoder.pieces is not None


class TestCorruption:
    def _encoded(self, model, length, seed):
        rng = spawn_rng(seed, "corrupt-bits")
        message = [rng.getrandbits(1) for _ in range(length)]
        return message, encode_message(model, message)

    def test_identity_injection_is_lossless(self):
        model = iid_model(["3/4", "1/4"], 8)
        message, result = self._encoded(model, 100, 1)
        out = inject_and_decode(model, result.codewords, 3, result.codewords[2])
        assert list(out.bits[:100]) == message
        assert out.diagnostics["exception"] == 0

    def test_exception_branch_fires_and_decoding_continues(self):
        model = SKEWED2
        message, result = self._encoded(model, 60, 2)
        hit = False
        for sym0 in range(2):
            for sym1 in range(2):
                out = inject_and_decode(model, result.codewords, 3, (sym0, sym1))
                if out.diagnostics["exception"] > 0:
                    hit = True
                assert len(out.boundaries) == len(result.codewords)
        assert hit, "no corruption triggered the empty-intersection branch"

    def test_empty_piece_resets_decoder(self):
        # With a 4-letter alphabet at most m pieces exist but often fewer;
        # a corrupted first symbol can then point at an absent piece.
        model = iid_model(["2/5", "1/5", "1/5", "1/5"], 3)
        message, result = self._encoded(model, 80, 3)
        hits = 0
        for j0 in range(2, len(result.codewords)):
            for sym in range(4):
                corrupted = (sym,) + result.codewords[j0 - 1][1:]
                out = inject_and_decode(model, result.codewords, j0, corrupted)
                hits += out.diagnostics["empty_piece"]
        assert hits > 0

    def test_zero_probability_block_absorbed(self):
        model = table_model({"00": "3/4", "11": "1/4"}, 2)
        message, result = self._encoded(model, 30, 4)
        out = inject_and_decode(model, result.codewords, 2, (0, 1))  # impossible block
        assert out.diagnostics["empty_region"] == 1
        assert len(out.bits) >= 0  # decoding stayed total

    def test_uniform_model_always_realigns(self):
        # Dyadic regions mean every piece is a full cell: after a corrupted
        # block the decoder state snaps back immediately, for any injection.
        model = iid_model(["1/2", "1/2"], 4)
        message, result = self._encoded(model, 80, 5)
        blocks = len(result.codewords)
        t = [tr.t_start for tr in result.traces] + [
            result.traces[-1].t_start + result.traces[-1].bit_count
        ]
        source = BitSource.from_bits(message)
        j0 = 3
        for a in range(2):
            for b in range(2):
                for c in range(2):
                    for d in range(2):
                        out = inject_and_decode(model, result.codewords, j0, (a, b, c, d))
                        for k in range(1, blocks - j0):
                            enc_bits = source.bit_slice(t[j0 + k - 1], t[blocks - 1])
                            dec = out.bits[out.boundaries[j0 + k - 1] - 1:
                                           out.boundaries[blocks - 1] - 1]
                            assert enc_bits == dec


class TestUniformityOfR:
    def test_chi_square_within_interval(self):
        from scipy.stats import chisquare

        model = iid_model(["3/4", "1/4"], 4)
        rng = spawn_rng(99, "chi")
        source = BitSource.from_rng(rng)
        encoder = Encoder(model, source, record_traces=True)
        samples = []
        for _ in range(4000):
            t = source.position
            encoder.encode_block()
            # 40 materialized bits give r to ~1e-12, plenty for binning.
            bits = source.bit_slice(t, t + 40)
            r = sum(b / 2.0 ** (i + 1) for i, b in enumerate(bits))
            trace = encoder.traces[-1]
            iv = trace.interval_before
            u = (r - float(iv.lo)) / float(iv.length)
            samples.append(min(0.999999, max(0.0, u)))
        counts = [0] * 16
        for u in samples:
            counts[int(u * 16)] += 1
        stat = chisquare(counts)
        assert stat.pvalue > 0.001
