"""Target distributions: regions, inverse lookups, statistics, configs."""

import json
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dvfh.model import (
    BlockModel,
    ModelError,
    canonical_config_bytes,
    config_digest,
    iid_model,
    markov_model,
    model_from_config,
    table_model,
)
from dvfh.numerics import CircularArc, UnitInterval, frac_mod1

F = Fraction

SKEWED = iid_model(["3/4", "1/4"], 2)


def all_regions(model, x1):
    return [(seq, model.region_bounds(x1, seq)) for seq in model.enumerate_sequences()]


def brute_inverse(model, x1, candidate):
    for seq, region in all_regions(model, x1):
        if region.is_empty:
            continue
        if region.lower <= candidate.lo and candidate.hi <= region.upper:
            return seq
    return None


@pytest.fixture(scope="module")
def zoo():
    """A few structurally different models, all small enough to enumerate."""
    return [
        SKEWED,
        iid_model(["1/2", "1/2"], 3),
        iid_model(["2/5", "2/5", "1/5"], 4),
        markov_model(
            1, ["1/2", "1/2"],
            [["2/3", "1/3"], ["1/4", "3/4"]],
            5,
        ),
        table_model({"000": "1/4", "001": "1/8", "010": "1/8",
                     "100": "1/4", "111": "1/4"}, 3),
    ]


class TestRegionBounds:
    def test_examples(self):
        r = SKEWED.region_bounds(0, (0,))
        assert (r.lower, r.upper) == (F(0), F(3, 4))
        r = SKEWED.region_bounds(1, (1,))
        assert (r.lower, r.upper) == (F(3, 4), F(1))
        uniform3 = iid_model(["1/2", "1/2"], 3)
        r = uniform3.region_bounds(0, (1, 0))
        assert (r.lower, r.upper) == (F(1, 2), F(3, 4))

    def test_regions_tile_unit_interval(self, zoo):
        for model in zoo:
            for x1 in range(model.m):
                cursor = F(0)
                for seq, region in all_regions(model, x1):
                    assert region.lower == cursor
                    assert region.width >= 0
                    cursor = region.upper
                assert cursor == 1

    def test_width_is_conditional_probability(self, zoo):
        for model in zoo:
            for x1 in range(model.m):
                for seq, region in all_regions(model, x1):
                    prob = F(1)
                    prefix = ()
                    for sym in seq:
                        prob *= model.conditional(x1, prefix)[sym]
                        prefix += (sym,)
                    assert region.width == prob

    def test_rejects_bad_inputs(self):
        with pytest.raises(ModelError):
            SKEWED.region_bounds(2, (0,))
        with pytest.raises(ModelError):
            SKEWED.region_bounds(0, (0, 0))


class TestInverseRegion:
    def test_examples(self):
        out = SKEWED.inverse_region(0, UnitInterval(F(5, 8), F(3, 4)))
        assert out is not None and out.sequence == (0,)
        assert (out.region.lower, out.region.upper) == (F(0), F(3, 4))
        assert SKEWED.inverse_region(0, UnitInterval(F(1, 2), F(1))) is None
        out = SKEWED.inverse_region(1, UnitInterval(F(3, 4), F(13, 16)))
        assert out is not None and out.sequence == (1,)

    @given(st.data())
    @settings(max_examples=250, deadline=None)
    def test_matches_brute_force(self, data):
        models = [
            SKEWED,
            iid_model(["2/5", "2/5", "1/5"], 4),
            markov_model(1, ["1/2", "1/2"], [["2/3", "1/3"], ["1/4", "3/4"]], 5),
            table_model({"000": "1/4", "001": "1/8", "010": "1/8",
                         "100": "1/4", "111": "1/4"}, 3),
        ]
        model = data.draw(st.sampled_from(models))
        x1 = data.draw(st.integers(min_value=0, max_value=model.m - 1))
        a = data.draw(st.fractions(min_value=0, max_value=F(99, 100), max_denominator=200))
        b = data.draw(st.fractions(min_value=0, max_value=1, max_denominator=200))
        if a == b:
            b = a + F(1, 211)
        candidate = UnitInterval(min(a, b), max(a, b))
        expected = brute_inverse(model, x1, candidate)
        out = model.inverse_region(x1, candidate)
        if expected is None:
            assert out is None
        else:
            assert out is not None and out.sequence == expected
            region = model.region_bounds(x1, expected)
            assert (out.region.lower, out.region.upper) == (region.lower, region.upper)

    def test_skips_zero_width_children(self):
        model = table_model({"00": "1/2", "11": "1/2"}, 2)
        out = model.inverse_region(0, UnitInterval(F(1, 4), F(1, 2)))
        assert out is not None and out.sequence == (0,)


class TestShiftedRegions:
    def test_examples(self):
        arc = SKEWED.shifted_region_bounds(0, (0,), F(0))
        assert (arc.start, arc.length) == (F(0), F(3, 4))
        arc = SKEWED.shifted_region_bounds(1, (1,), F(1, 2))
        assert (arc.start, arc.length) == (F(1, 4), F(1, 4))
        arc = SKEWED.shifted_region_bounds(0, (0,), F(1, 2))
        assert (arc.start, arc.length) == (F(1, 2), F(3, 4))
        assert arc.wraps

    def test_rotation_preserves_length(self, zoo):
        shifts = [F(0), F(1, 3), F(7, 8)]
        for model in zoo:
            for x1 in range(model.m):
                for seq, region in all_regions(model, x1):
                    if region.is_empty:
                        continue
                    for s in shifts:
                        arc = model.shifted_region_bounds(x1, seq, s)
                        assert arc.length == region.width
                        assert arc.start == frac_mod1(region.lower - s)

    def test_shifted_inverse_examples(self):
        out = SKEWED.shifted_inverse_region(0, UnitInterval(F(0), F(1, 8)), F(3, 4))
        assert out is not None and out.sequence == (1,)
        assert SKEWED.shifted_inverse_region(0, UnitInterval(F(0), F(1, 2)), F(3, 4)) is None

    @given(st.data())
    @settings(max_examples=120, deadline=None)
    def test_zero_shift_equals_plain_inverse(self, data):
        model = data.draw(st.sampled_from([SKEWED, iid_model(["2/5", "2/5", "1/5"], 3)]))
        x1 = data.draw(st.integers(min_value=0, max_value=model.m - 1))
        a = data.draw(st.fractions(min_value=0, max_value=F(9, 10), max_denominator=64))
        w = data.draw(st.fractions(min_value=F(1, 64), max_value=F(1, 10), max_denominator=64))
        candidate = UnitInterval(a, min(a + w, F(1)) if a + w > a else a + F(1, 64))
        plain = model.inverse_region(x1, candidate)
        shifted = model.shifted_inverse_region(x1, candidate, F(0))
        assert (plain is None) == (shifted is None)
        if plain is not None:
            assert plain.sequence == shifted.sequence


class TestPMax:
    def test_examples(self):
        assert SKEWED.p_max() == F(3, 4)
        assert iid_model(["3/4", "1/4"], 16).p_max() == F(3, 4) ** 15
        for n in (2, 5, 9):
            assert iid_model(["1/2", "1/2"], n).p_max() == F(1, 2 ** (n - 1))

    def test_matches_enumeration(self, zoo):
        for model in zoo:
            best = max(
                region.width
                for x1 in range(model.m)
                for _seq, region in all_regions(model, x1)
            )
            assert model.p_max() == best


class TestCondEntropy:
    def test_examples(self):
        h_quarter = -(0.25 * math.log2(0.25) + 0.75 * math.log2(0.75))
        model = iid_model(["3/4", "1/4"], 9)
        assert model.cond_entropy(0) == pytest.approx(8 * h_quarter, abs=1e-12)
        assert model.cond_entropy(0) == pytest.approx(6.4902, abs=5e-4)
        for n in (2, 4, 7):
            assert iid_model(["1/2", "1/2"], n).cond_entropy(1) == pytest.approx(n - 1)
        deterministic = table_model({"01": "1/2", "10": "1/2"}, 2)
        assert deterministic.cond_entropy(0) == pytest.approx(0.0)

    def test_markov_matches_enumeration(self):
        model = markov_model(1, ["1/2", "1/2"], [["2/3", "1/3"], ["1/4", "3/4"]], 5)
        for x1 in range(2):
            brute = 0.0
            for _seq, region in all_regions(model, x1):
                w = float(region.width)
                if w > 0:
                    brute -= w * math.log2(w)
            assert model.cond_entropy(x1) == pytest.approx(brute, abs=1e-12)

    def test_block_entropy_iid(self):
        model = iid_model(["3/4", "1/4"], 6)
        h = -(0.25 * math.log2(0.25) + 0.75 * math.log2(0.75))
        assert model.block_entropy() == pytest.approx(6 * h, abs=1e-12)


class TestValidation:
    def test_first_symbol_must_be_positive(self):
        with pytest.raises(ModelError):
            iid_model(["1", "0"], 2)
        with pytest.raises(ModelError):
            table_model({"00": "1/2", "01": "1/2"}, 2)  # second symbol never first

    def test_distributions_must_sum_to_one(self):
        with pytest.raises(ModelError):
            iid_model(["1/2", "1/3"], 2)
        with pytest.raises(ModelError):
            table_model({"00": "1/2", "11": "1/3"}, 2)
        with pytest.raises(ModelError):
            markov_model(1, ["1/2", "1/2"], [["1/2", "1/3"], ["1/2", "1/2"]], 3)

    def test_dimension_checks(self):
        with pytest.raises(ModelError):
            iid_model(["1"], 4)
        with pytest.raises(ModelError):
            iid_model(["1/2", "1/2"], 1)

    def test_conditional_zeros_allowed(self):
        model = table_model({"00": "3/4", "11": "1/4"}, 2)
        assert model.region_bounds(0, (1,)).is_empty


class TestConfigs:
    def test_json_round_trip(self, tmp_path):
        config = {"type": "iid", "probs": ["3/4", "1/4"]}
        path = tmp_path / "model.json"
        path.write_text(json.dumps(config))
        model = model_from_config(json.loads(path.read_text()), 4)
        assert model.m == 2 and model.n == 4
        assert model.config == config

    def test_markov_config(self):
        config = {
            "type": "markov", "order": 1,
            "initial": ["1/2", "1/2"],
            "transition": [["2/3", "1/3"], ["1/4", "3/4"]],
        }
        model = model_from_config(config, 6)
        assert model.conditional(0, ()) == (F(2, 3), F(1, 3))
        assert model.conditional(1, (0,)) == (F(2, 3), F(1, 3))
        assert model.conditional(0, (1,)) == (F(1, 4), F(3, 4))

    def test_markov_order2_early_positions(self):
        rows = [
            [[F(1, 2), F(1, 2)], [F(1, 3), F(2, 3)]],
            [[F(1, 4), F(3, 4)], [F(1, 5), F(4, 5)]],
        ]
        model = markov_model(2, ["1/2", "1/2"], rows, 5)
        # One symbol of history: the left pad repeats the oldest symbol.
        assert model.conditional(1, ()) == (F(1, 5), F(4, 5))
        assert model.conditional(0, (1,)) == (F(1, 3), F(2, 3))
        assert model.conditional(0, (1, 0)) == (F(1, 4), F(3, 4))

    def test_table_config_requires_matching_n(self):
        config = {"type": "table", "n": 3,
                  "probs": {"000": "1/2", "111": "1/2"}}
        model = model_from_config(config, None)
        assert model.n == 3
        with pytest.raises(ModelError):
            model_from_config(config, 4)

    def test_unknown_type(self):
        with pytest.raises(ModelError):
            model_from_config({"type": "gauss"}, 2)

    def test_digest_is_canonical(self):
        a = {"type": "iid", "probs": ["3/4", "1/4"]}
        b = {"probs": ["3/4", "1/4"], "type": "iid"}
        assert config_digest(a) == config_digest(b)
        assert canonical_config_bytes(a) == canonical_config_bytes(b)
        c = {"type": "iid", "probs": ["1/4", "3/4"]}
        assert config_digest(a) != config_digest(c)

    def test_model_digest_requires_config(self):
        custom = BlockModel(2, 2, [F(1, 2), F(1, 2)], lambda x1, p: (F(1, 2), F(1, 2)))
        with pytest.raises(ModelError):
            custom.digest()
        assert len(SKEWED.digest()) == 32
