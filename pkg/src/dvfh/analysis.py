"""Analytic bounds, exact small-case oracles, and Monte Carlo experiments.

Experiments are deterministic: every trial derives its generator from the
master seed and its own index, chunks are fixed by the configuration (never
by the worker count), and results merge in chunk order, so any parallelism
level produces bit-identical output.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .codec import (
    INITIAL_PIECE_INDEX,
    STANDARD,
    BitSource,
    Encoder,
    Variant,
    inject_and_decode,
    shifted_variant,
)
from .model import (
    DEFAULT_ENUMERATION_CAP,
    BlockModel,
    ModelError,
    canonical_config_bytes,
    model_from_config,
)
from .numerics import ZERO, rank_desc
from .seeding import spawn_rng
from .shift import ShiftTable

WILSON_Z = 3.0  # acceptance margins are 3 sigma throughout


# -- analytic bounds ----------------------------------------------------------


def divergence_bound_standard(first_dist: Sequence[Fraction]) -> float:
    """Per-block max-divergence bound of the standard variant, in bits:
    log2 max_i 2 / ((i+1) * p_(i)) over the descending order p_(0) >= ..."""
    order = rank_desc(list(first_dist))
    best = max(
        Fraction(2) / ((i + 1) * first_dist[order.forward[i]])
        for i in range(len(first_dist))
    )
    return math.log2(best)


def divergence_bound_shifted(first_dist: Sequence[Fraction]) -> float:
    """Per-block max-divergence bound of the shifted variant, in bits:
    log2(2 / min p)."""
    return math.log2(float(Fraction(2) / min(first_dist)))


def error_prop_bound(p_max: Fraction, k: int) -> float:
    """(4 p_max)^k: probability that a single corrupted block still affects
    decoding k blocks later.  k = 0 carries no guarantee (returns 1);
    values >= 1 are vacuous."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k == 0:
        return 1.0
    return float(Fraction(4) * p_max) ** k


def rate_bound_shifted(model: BlockModel) -> float:
    """Lower bound on the mean consumed bits per block for the shifted
    variant with optimal offsets: min_x H(X_2^n | X_1=x) - log2((m-1)/2)."""
    return model.min_cond_entropy() - math.log2((model.m - 1) / 2)


def wilson_interval(successes: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    """Wilson score interval for a binomial rate."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    phat = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (phat + z2 / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / trials + z2 / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


# -- exact first-block oracle -------------------------------------------------


def first_block_exact_distribution(
    model: BlockModel,
    cap: int = DEFAULT_ENUMERATION_CAP,
    first_symbol: Optional[int] = None,
) -> dict[tuple[int, ...], Fraction]:
    """Exact law of the first emitted block.

    With the initial interval covering everything, r is uniform on [0,1) and
    the block outcome is constant on each cumulative region, so the law
    follows by enumerating regions (a cell decomposition, no sampling): the
    first symbol is deterministic (the most probable one for the standard
    variant; pass the fixed initial index for the shifted variant) and the
    tail follows its conditional law.
    """
    if model.sequence_count() > cap:
        raise ModelError(
            f"enumeration over {model.sequence_count()} sequences exceeds cap {cap}"
        )
    x1 = model.first_symbol_order.forward[0] if first_symbol is None else first_symbol
    dist: dict[tuple[int, ...], Fraction] = {}
    for seq in model.enumerate_sequences():
        width = model.region_bounds(x1, seq).width
        if width > ZERO:
            dist[(x1,) + seq] = width
    return dist


def first_block_divergence_exact(
    model: BlockModel,
    cap: int = DEFAULT_ENUMERATION_CAP,
    first_symbol: Optional[int] = None,
) -> float:
    """Exact max log2 ratio between the first block's law and the target."""
    dist = first_block_exact_distribution(model, cap, first_symbol)
    best = None
    for codeword, p in dist.items():
        target = model.first_symbol_dist[codeword[0]] * model.region_bounds(
            codeword[0], codeword[1:]
        ).width
        ratio = p / target
        if best is None or ratio > best:
            best = ratio
    return math.log2(float(best))


def block_probability(model: BlockModel, codeword: Sequence[int]) -> Fraction:
    """Target probability of one whole block."""
    return model.first_symbol_dist[codeword[0]] * model.region_bounds(
        codeword[0], tuple(codeword[1:])
    ).width


# -- experiment plumbing ------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """Bundle of everything a benchmark needs; identical configs yield
    bit-identical outputs at any worker count."""

    model_config: dict
    n: int
    variant: str = "standard"
    shift_config: Optional[dict] = None
    blocks: int = 10_000
    samples: int = 100_000
    trials: int = 100_000
    m_blocks: int = 2
    j0: int = 2
    k_max: int = 3
    seed: int = 0
    workers: int = 1

    def build(self) -> tuple[BlockModel, Variant]:
        return _build(self.model_config, self.n, self.variant, self.shift_config)


_BUILD_CACHE: dict = {}


def _build(model_config: dict, n: int, variant_name: str, shift_config: Optional[dict]):
    key = (
        canonical_config_bytes(model_config),
        n,
        variant_name,
        canonical_config_bytes(shift_config) if shift_config else None,
    )
    cached = _BUILD_CACHE.get(key)
    if cached is None:
        model = model_from_config(model_config, n)
        if variant_name == "shifted":
            if shift_config is None:
                raise ModelError("shifted variant requires a shift table")
            variant = shifted_variant(ShiftTable.from_config(shift_config))
        else:
            variant = STANDARD
        cached = (model, variant)
        _BUILD_CACHE[key] = cached
    return cached


def _run_chunks(worker, chunk_args: list, workers: int) -> list:
    if workers <= 1 or len(chunk_args) <= 1:
        return [worker(args) for args in chunk_args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, chunk_args))


def _chunk_ranges(total: int, chunks: int) -> list[tuple[int, int]]:
    chunks = max(1, min(chunks, total))
    base, extra = divmod(total, chunks)
    ranges = []
    start = 0
    for c in range(chunks):
        size = base + (1 if c < extra else 0)
        ranges.append((start, start + size))
        start += size
    return ranges


# -- redundancy ---------------------------------------------------------------


@dataclass(frozen=True)
class RedundancyResult:
    n: int
    blocks: int
    mean_bits: float  # mean consumed bits per block (the mean l1)
    entropy_per_symbol: float
    redundancy: float  # mean_bits / n - entropy_per_symbol
    stderr: float  # standard error of redundancy (chain means), per symbol
    stderr_bits: float  # standard error of mean_bits


def _redundancy_chain(args) -> list[int]:
    model_config, n, variant_name, shift_config, seed, chain, count = args
    model, variant = _build(model_config, n, variant_name, shift_config)
    rng = spawn_rng(seed, "redundancy", n, variant_name, chain)
    source = BitSource.from_rng(rng)
    encoder = Encoder(model, source, variant)
    counts = []
    for _ in range(count):
        before = source.bits_consumed
        encoder.encode_block()
        counts.append(source.bits_consumed - before)
    return counts


REDUNDANCY_CHAINS = 32  # fixed chain count: chains are the parallel unit


def measure_redundancy(cfg: ExperimentConfig) -> RedundancyResult:
    """Mean consumed bits per block over independently seeded chains of
    sequential encodings of fresh uniform bits."""
    model, _ = cfg.build()
    ranges = _chunk_ranges(cfg.blocks, REDUNDANCY_CHAINS)
    args = [
        (cfg.model_config, cfg.n, cfg.variant, cfg.shift_config, cfg.seed, c, stop - start)
        for c, (start, stop) in enumerate(ranges)
    ]
    chain_counts = _run_chunks(_redundancy_chain, args, cfg.workers)
    all_counts = [l1 for chain in chain_counts for l1 in chain]
    blocks = len(all_counts)
    mean_bits = sum(all_counts) / blocks
    # Chains are independent; their means estimate the variance of the
    # overall mean without assuming independence inside a chain.
    chain_means = [sum(chain) / len(chain) for chain in chain_counts if chain]
    if len(chain_means) >= 2:
        grand = sum(chain_means) / len(chain_means)
        var = sum((m - grand) ** 2 for m in chain_means) / (len(chain_means) - 1)
        stderr_bits = math.sqrt(var / len(chain_means))
    else:
        mu = mean_bits
        var = sum((x - mu) ** 2 for x in all_counts) / max(1, blocks - 1)
        stderr_bits = math.sqrt(var / blocks)
    h_sym = model.block_entropy() / model.n
    return RedundancyResult(
        n=cfg.n,
        blocks=blocks,
        mean_bits=mean_bits,
        entropy_per_symbol=h_sym,
        redundancy=mean_bits / model.n - h_sym,
        stderr=stderr_bits / model.n,
        stderr_bits=stderr_bits,
    )


# -- divergence ---------------------------------------------------------------


@dataclass(frozen=True)
class DivergenceReport:
    m_blocks: int
    samples: int  # 0 for the exact single-block oracle
    estimate: float
    ci_lo: float
    ci_hi: float
    analytic_bound: float
    method: str


def _divergence_chunk(args) -> Counter:
    model_config, n, variant_name, shift_config, m_blocks, seed, start, stop = args
    model, variant = _build(model_config, n, variant_name, shift_config)
    hist: Counter = Counter()
    for trial in range(start, stop):
        rng = spawn_rng(seed, "divergence", trial)
        source = BitSource.from_rng(rng)
        encoder = Encoder(model, source, variant)
        outcome = tuple(sym for _ in range(m_blocks) for sym in encoder.encode_block())
        hist[outcome] += 1
    return hist


DIVERGENCE_CHUNKS = 64


def estimate_divergence(cfg: ExperimentConfig, cap: int = DEFAULT_ENUMERATION_CAP) -> DivergenceReport:
    """Per-block max-divergence estimate over the first m_blocks blocks.

    m_blocks = 1 uses the exact cell-decomposition oracle (no sampling);
    m_blocks >= 2 histograms Monte Carlo encodings and reports per-outcome
    Wilson bounds on the max statistic.
    """
    model, variant = cfg.build()
    bound = (
        divergence_bound_shifted(model.first_symbol_dist)
        if variant.shifted
        else divergence_bound_standard(model.first_symbol_dist)
    )
    if cfg.m_blocks < 1:
        raise ValueError("m_blocks must be at least 1")
    if cfg.m_blocks == 1:
        first = INITIAL_PIECE_INDEX if variant.shifted else None
        est = first_block_divergence_exact(model, cap, first)
        return DivergenceReport(1, 0, est, est, est, bound, "exact-enumeration")

    if model.sequence_count() ** cfg.m_blocks * model.m ** cfg.m_blocks > cap:
        raise ModelError("outcome space too large for the divergence histogram")
    ranges = _chunk_ranges(cfg.samples, DIVERGENCE_CHUNKS)
    args = [
        (cfg.model_config, cfg.n, cfg.variant, cfg.shift_config, cfg.m_blocks,
         cfg.seed, start, stop)
        for (start, stop) in ranges
    ]
    hist: Counter = Counter()
    for part in _run_chunks(_divergence_chunk, args, cfg.workers):
        hist.update(part)
    total = sum(hist.values())

    estimate = ci_lo = ci_hi = -math.inf
    for outcome, count in sorted(hist.items()):
        target = Fraction(1)
        for j in range(cfg.m_blocks):
            target *= block_probability(model, outcome[j * model.n:(j + 1) * model.n])
        ft = float(target)
        w_lo, w_hi = wilson_interval(count, total)
        estimate = max(estimate, math.log2(count / total / ft))
        ci_lo = max(ci_lo, math.log2(w_lo / ft) if w_lo > 0 else -math.inf)
        ci_hi = max(ci_hi, math.log2(w_hi / ft))
    scale = 1.0 / cfg.m_blocks
    return DivergenceReport(
        cfg.m_blocks, total, scale * estimate, scale * ci_lo, scale * ci_hi,
        bound, f"wilson-z{WILSON_Z:g}-per-outcome",
    )


# -- error propagation --------------------------------------------------------


@dataclass(frozen=True)
class ErrorPropRow:
    k: int
    trials: int
    failures: int
    rate: float
    wilson_lo: float
    wilson_hi: float
    bound: Optional[float]  # None when 4*p_max >= 1 (vacuous)


def _error_prop_chunk(args) -> list[int]:
    model_config, n, variant_name, shift_config, j0, k_max, seed, start, stop = args
    model, variant = _build(model_config, n, variant_name, shift_config)
    total_blocks = j0 + k_max + 2
    failures = [0] * k_max
    for trial in range(start, stop):
        bit_rng = spawn_rng(seed, "errprop", trial, "bits")
        source = BitSource.from_rng(bit_rng)
        encoder = Encoder(model, source, variant)
        codewords = []
        bounds = [1]
        for _ in range(total_blocks):
            codewords.append(encoder.encode_block())
            bounds.append(source.position)
        y_rng = spawn_rng(seed, "errprop", trial, "corrupt")
        y = tuple(y_rng.randrange(model.m) for _ in range(model.n))
        result = inject_and_decode(model, codewords, j0, y, variant)
        # Suffix comparison horizon: the decoder has emitted the bits of
        # blocks 1..total_blocks-1 when the stream ends.
        for k in range(1, k_max + 1):
            enc_bits = source.bit_slice(bounds[j0 + k - 1], bounds[total_blocks - 1])
            dec_bits = result.bits[result.boundaries[j0 + k - 1] - 1:
                                   result.boundaries[total_blocks - 1] - 1]
            h = min(len(enc_bits), len(dec_bits))
            if h == 0 or enc_bits[:h] != dec_bits[:h]:
                failures[k - 1] += 1
    return failures


ERROR_PROP_CHUNKS = 64


def error_propagation_experiment(cfg: ExperimentConfig) -> list[ErrorPropRow]:
    """Corrupt block j0 with a uniformly random block, decode, and test
    whether the decoded suffix realigns with the true bit stream k blocks
    later, for k = 1..k_max."""
    model, _ = cfg.build()
    if cfg.j0 < 1:
        raise ValueError("j0 must be at least 1")
    four_pmax = 4 * model.p_max()
    ranges = _chunk_ranges(cfg.trials, ERROR_PROP_CHUNKS)
    args = [
        (cfg.model_config, cfg.n, cfg.variant, cfg.shift_config, cfg.j0, cfg.k_max,
         cfg.seed, start, stop)
        for (start, stop) in ranges
    ]
    totals = [0] * cfg.k_max
    for part in _run_chunks(_error_prop_chunk, args, cfg.workers):
        for i, f in enumerate(part):
            totals[i] += f
    rows = []
    for k in range(1, cfg.k_max + 1):
        f = totals[k - 1]
        lo, hi = wilson_interval(f, cfg.trials)
        bound = float(four_pmax) ** k if four_pmax < 1 else None
        rows.append(ErrorPropRow(k, cfg.trials, f, f / cfg.trials, lo, hi, bound))
    return rows


# -- mutual information for 4-ASK over AWGN -----------------------------------

ASK4_POINTS = (-3.0, -1.0, 1.0, 3.0)
SNR_CONVENTIONS = ("average-power", "fixed-amplitude")
PINNED_SNR_CONVENTION = "average-power"  # matches the reference values below
REFERENCE_SNR_DB = 10.0
REFERENCE_MI_UNIFORM = 1.582
REFERENCE_MI_SHAPED = 1.628
REFERENCE_SHAPED_DIST = (0.33, 0.17)


def _ask4_probs(dist) -> tuple[float, float, float, float]:
    if isinstance(dist, str):
        if dist != "uniform":
            raise ValueError(f"unknown distribution {dist!r}")
        return (0.25, 0.25, 0.25, 0.25)
    p_inner, p_outer = (float(dist[0]), float(dist[1]))
    if p_inner <= 0 or p_outer <= 0:
        raise ValueError("amplitude probabilities must be positive")
    if abs(2 * (p_inner + p_outer) - 1.0) > 1e-9:
        raise ValueError("distribution must be symmetric and sum to 1: 2*(P(a)+P(3a)) == 1")
    return (p_outer, p_inner, p_inner, p_outer)


def awgn_ask4_mutual_information(
    snr_db: float, dist="uniform", convention: str = PINNED_SNR_CONVENTION
) -> float:
    """I(X;Y) in bits for 4-ASK input {-3a,-a,a,3a} over Gaussian noise.

    ``convention`` fixes how the SNR ties amplitude to noise variance:
    "average-power" scales noise to the given distribution's own mean power
    (the pinned convention); "fixed-amplitude" keeps the uniform input's
    power as the reference regardless of the distribution.
    """
    from scipy.integrate import quad

    probs = _ask4_probs(dist)
    if convention not in SNR_CONVENTIONS:
        raise ValueError(f"convention must be one of {SNR_CONVENTIONS}")
    snr_lin = 10.0 ** (snr_db / 10.0)
    if convention == "average-power":
        power = sum(p * x * x for p, x in zip(probs, ASK4_POINTS))
    else:
        power = sum(x * x for x in ASK4_POINTS) / 4.0
    sigma = math.sqrt(power / snr_lin)
    norm = 1.0 / (sigma * math.sqrt(2.0 * math.pi))

    def density(y: float) -> float:
        return norm * sum(
            p * math.exp(-((y - x) ** 2) / (2.0 * sigma * sigma))
            for p, x in zip(probs, ASK4_POINTS)
        )

    total = 0.0
    for p, x in zip(probs, ASK4_POINTS):
        def integrand(y: float, x: float = x) -> float:
            comp = norm * math.exp(-((y - x) ** 2) / (2.0 * sigma * sigma))
            if comp <= 0.0:
                return 0.0
            return comp * (math.log2(comp) - math.log2(density(y)))

        value, _err = quad(
            integrand, x - 14.0 * sigma, x + 14.0 * sigma, epsabs=1e-9, limit=300
        )
        total += p * value
    return total


def pin_snr_convention(tolerance: float = 0.005) -> str:
    """Identify the SNR convention that reproduces the reference mutual
    information values (uniform first, then the shaped distribution)."""
    for convention in SNR_CONVENTIONS:
        uniform = awgn_ask4_mutual_information(REFERENCE_SNR_DB, "uniform", convention)
        shaped = awgn_ask4_mutual_information(
            REFERENCE_SNR_DB, REFERENCE_SHAPED_DIST, convention
        )
        if (
            abs(uniform - REFERENCE_MI_UNIFORM) <= tolerance
            and abs(shaped - REFERENCE_MI_SHAPED) <= tolerance
        ):
            return convention
    raise RuntimeError("no SNR convention reproduces the reference values")
