"""Shift tables for the rate-guaranteed variant of the code.

The shifted codec rotates each first symbol's cumulative distribution by a
per-symbol offset s in [0,1).  The offsets that restore the provable rate
bound are the extremizers of G(s) = integral over [0,s) of (f - mean f),
where f(r) is the negative log probability of the sequence owning r.  G is
piecewise linear, so its extrema sit on region breakpoints: the first
symbol's offset maximizes G, the last symbol's minimizes it, and middle
symbols keep 0 (the rate argument there holds for any offset).

Breakpoints are exact rationals, so shift values stay exact on the codec
path; only the extremum comparisons use floating point (G involves
logarithms).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .model import DEFAULT_ENUMERATION_CAP, BlockModel, ModelError
from .numerics import ZERO, format_rational, parse_rational
from .seeding import spawn_rng

ARG_MAX = "argmax"
ARG_MIN = "argmin"


@dataclass(frozen=True, slots=True)
class StepFunction:
    """Piecewise-constant f on [0,1): breakpoints ascending from 0 to 1, one
    value per piece (the negative log2 probability of that piece's
    sequence)."""

    breakpoints: tuple[Fraction, ...]
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.breakpoints) != len(self.values) + 1:
            raise ValueError("need exactly one more breakpoint than values")
        if self.breakpoints[0] != 0 or self.breakpoints[-1] != 1:
            raise ValueError("breakpoints must start at 0 and end at 1")
        for a, b in zip(self.breakpoints, self.breakpoints[1:]):
            if a >= b:
                raise ValueError("breakpoints must be strictly ascending")

    def mean(self) -> float:
        """Average of f over [0,1); equals the conditional block entropy."""
        return sum(
            float(b - a) * v
            for a, b, v in zip(self.breakpoints, self.breakpoints[1:], self.values)
        )

    def cumulative_gaps(self) -> list[float]:
        """G evaluated at every breakpoint (G(0) = 0, G(1) = 0 up to float
        rounding)."""
        fbar = self.mean()
        out = [0.0]
        acc = 0.0
        for a, b, v in zip(self.breakpoints, self.breakpoints[1:], self.values):
            acc += float(b - a) * (v - fbar)
            out.append(acc)
        return out


def build_step_function(
    model: BlockModel, x1: int, cap: int = DEFAULT_ENUMERATION_CAP
) -> StepFunction:
    """Exact step function for one first symbol: one piece per
    positive-probability sequence in lexicographic order."""
    if model.sequence_count() > cap:
        raise ModelError(
            f"step function enumeration over {model.sequence_count()} sequences "
            f"exceeds cap {cap}; use the approximate optimizer"
        )
    breakpoints = [ZERO]
    values: list[float] = []
    for seq in model.enumerate_sequences():
        region = model.region_bounds(x1, seq)
        if region.is_empty:
            continue
        breakpoints.append(region.upper)
        values.append(-math.log2(float(region.width)))
    return StepFunction(tuple(breakpoints), tuple(values))


def optimize_shift(stepfn: StepFunction, mode: str) -> Fraction:
    """Extremizing breakpoint of G over [0,1); ties broken by smallest s.

    G is piecewise linear, so scanning breakpoints (1 excluded, 0 included)
    is exact up to the floating comparison of G values.
    """
    if mode not in (ARG_MAX, ARG_MIN):
        raise ValueError(f"mode must be {ARG_MAX!r} or {ARG_MIN!r}")
    gaps = stepfn.cumulative_gaps()
    best_s = stepfn.breakpoints[0]
    best_g = gaps[0]
    for s, g in zip(stepfn.breakpoints[1:-1], gaps[1:-1]):
        if (mode == ARG_MAX and g > best_g) or (mode == ARG_MIN and g < best_g):
            best_s, best_g = s, g
    return best_s


def optimize_shift_approx(
    model: BlockModel, x1: int, mode: str, sample_count: int, seed: int
) -> Fraction:
    """Monte Carlo stand-in for optimize_shift when enumeration is
    infeasible: samples sequences from the conditional law, estimates G at
    their region boundaries, and returns the best sampled breakpoint.
    Deterministic given the seed."""
    if mode not in (ARG_MAX, ARG_MIN):
        raise ValueError(f"mode must be {ARG_MAX!r} or {ARG_MIN!r}")
    if sample_count < 1:
        raise ValueError("sample count must be at least 1")
    rng = spawn_rng(seed, "shift", x1, mode)
    fbar = model.cond_entropy(x1)
    samples: list[tuple[Fraction, float]] = []
    for _ in range(sample_count):
        prefix: tuple[int, ...] = ()
        for _pos in range(model.n - 1):
            row = model.conditional(x1, prefix)
            sym = rng.choices(range(model.m), weights=[float(p) for p in row])[0]
            prefix = prefix + (sym,)
        region = model.region_bounds(x1, prefix)
        samples.append((region.upper, -math.log2(float(region.width))))
    # G(s) = E[1{F(X) <= s} (f(X) - fbar)] over X ~ P(.|x1); with s running
    # over the sampled boundaries this is a prefix mean in sorted order.
    samples.sort(key=lambda pair: pair[0])
    best_s = ZERO
    best_g = 0.0  # G(0) = 0
    acc = 0.0
    for i, (s, f) in enumerate(samples):
        acc += f - fbar
        g = acc / sample_count
        if i + 1 < len(samples) and s == samples[i + 1][0]:
            continue  # evaluate each distinct boundary once, at its last copy
        if s < 1 and (
            (mode == ARG_MAX and g > best_g) or (mode == ARG_MIN and g < best_g)
        ):
            best_s, best_g = s, g
    return best_s


@dataclass(frozen=True, slots=True)
class ShiftTable:
    """One offset per first symbol; provenance records whether the offsets
    came from exact breakpoint enumeration or sampling."""

    values: tuple[Fraction, ...]
    provenance: str  # "exact" | "approx"

    def __post_init__(self) -> None:
        for s in self.values:
            if not (0 <= s < 1):
                raise ValueError(f"shift values must lie in [0,1), got {s}")
        if self.provenance not in ("exact", "approx"):
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def __getitem__(self, x1: int) -> Fraction:
        return self.values[x1]

    def to_config(self) -> dict:
        return {
            "s": [format_rational(s) for s in self.values],
            "mode": self.provenance,
        }

    def digest(self) -> bytes:
        payload = json.dumps(self.to_config(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).digest()

    @classmethod
    def from_config(cls, config: dict) -> "ShiftTable":
        return cls(tuple(parse_rational(s) for s in config["s"]), config["mode"])

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_config(), fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "ShiftTable":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_config(json.load(fh))


def identity_shift_table(m: int) -> ShiftTable:
    return ShiftTable((ZERO,) * m, "exact")


def compute_shift_table(
    model: BlockModel,
    *,
    cap: int = DEFAULT_ENUMERATION_CAP,
    sample_count: int = 4096,
    seed: int = 0,
    mode: Optional[str] = None,
) -> ShiftTable:
    """Build the full table: argmax offset for symbol 0, argmin for symbol
    m-1, zero for the rest.  ``mode`` forces "exact" or "approx"; the default
    picks exact whenever the sequence count fits under the cap."""
    exact = model.sequence_count() <= cap if mode is None else (mode == "exact")
    values = [ZERO] * model.m
    if exact:
        values[0] = optimize_shift(build_step_function(model, 0, cap), ARG_MAX)
        values[model.m - 1] = optimize_shift(
            build_step_function(model, model.m - 1, cap), ARG_MIN
        )
    else:
        values[0] = optimize_shift_approx(model, 0, ARG_MAX, sample_count, seed)
        values[model.m - 1] = optimize_shift_approx(
            model, model.m - 1, ARG_MIN, sample_count, seed
        )
    return ShiftTable(tuple(values), "exact" if exact else "approx")
