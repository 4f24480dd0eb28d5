"""Exact-arithmetic delayed variable-to-fixed homophonic coding.

Invertibly maps uniform message bits onto fixed-length symbol blocks that
follow a prescribed target distribution, with a one-block decoding delay,
bounded per-block divergence from the target, and geometric decay of
decoding-error propagation.  All codec arithmetic is exact rational.
"""

from .codec import (
    STANDARD,
    BitSource,
    BlockBudgetError,
    BlockTrace,
    Decoder,
    DisconnectedIntersectionError,
    EncodeResult,
    Encoder,
    TruncatedStreamError,
    Variant,
    check_traces,
    decode_message,
    encode_message,
    inject_and_decode,
    shifted_variant,
)
from .model import (
    BlockModel,
    Decided,
    ModelError,
    Region,
    RegionRefiner,
    iid_model,
    load_model,
    markov_model,
    model_from_config,
    table_model,
)
from .numerics import (
    CircularArc,
    Permutation,
    Rational,
    UnitInterval,
    arc_intersect,
    floor_bits,
    floor_neg_log2,
    frac_after,
    frac_mod1,
    interval_depth,
    rank_desc,
    rescale,
    subdivide,
)
from .shift import ShiftTable, StepFunction, build_step_function, compute_shift_table

__all__ = [
    "BitSource",
    "BlockBudgetError",
    "BlockModel",
    "BlockTrace",
    "CircularArc",
    "Decided",
    "Decoder",
    "DisconnectedIntersectionError",
    "EncodeResult",
    "Encoder",
    "ModelError",
    "Permutation",
    "Rational",
    "Region",
    "RegionRefiner",
    "STANDARD",
    "ShiftTable",
    "StepFunction",
    "TruncatedStreamError",
    "UnitInterval",
    "Variant",
    "arc_intersect",
    "build_step_function",
    "check_traces",
    "compute_shift_table",
    "decode_message",
    "encode_message",
    "floor_bits",
    "floor_neg_log2",
    "frac_after",
    "frac_mod1",
    "iid_model",
    "inject_and_decode",
    "interval_depth",
    "load_model",
    "markov_model",
    "model_from_config",
    "rank_desc",
    "rescale",
    "shifted_variant",
    "subdivide",
    "table_model",
]

__version__ = "0.1.0"
