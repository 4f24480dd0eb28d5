"""Command-line interface.

Subcommands: encode, decode, bounds, shift-optimize, bench-redundancy,
bench-divergence, bench-error-prop, awgn-ask.  Model files are the single
source of distribution truth; containers store only digests.  Every command
is deterministic given its arguments (benchmarks derive all randomness from
--seed, independently of --workers).

Exit codes: 0 success, 1 model validation or digest mismatch, 2 I/O,
3 disconnected-intersection abort of the shifted encoder.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from typing import Optional, Sequence

from . import analysis
from .codec import (
    STANDARD,
    DisconnectedIntersectionError,
    TruncatedStreamError,
    Variant,
    decode_message,
    encode_message,
    shifted_variant,
)
from .container import ContainerError, pack_container, unpack_container
from .model import BlockModel, ModelError, config_digest, model_from_config
from .shift import ShiftTable, compute_shift_table

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_DISCONNECTED = 3


class _CliError(Exception):
    def __init__(self, code: int, message: str) -> None:
        super().__init__(message)
        self.code = code


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise _CliError(EXIT_IO, f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise _CliError(EXIT_VALIDATION, f"{path} is not valid JSON: {exc}") from exc


def _load_model(path: str, n: Optional[int]) -> tuple[BlockModel, dict]:
    config = _load_json(path)
    model = model_from_config(config, n)
    return model, config


def _load_variant(args, model: BlockModel) -> Variant:
    name = getattr(args, "variant", "standard")
    shift_path = getattr(args, "shift", None)
    if name == "shifted":
        if not shift_path:
            raise _CliError(EXIT_VALIDATION, "--variant shifted requires --shift TABLE.json")
        table = ShiftTable.from_config(_load_json(shift_path))
        if len(table.values) != model.m:
            raise _CliError(EXIT_VALIDATION, "shift table size does not match the alphabet")
        return shifted_variant(table)
    if shift_path:
        raise _CliError(EXIT_VALIDATION, "--shift is only meaningful with --variant shifted")
    return STANDARD


def _read_bits(path: str, as_bits: bool) -> list[int]:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise _CliError(EXIT_IO, f"cannot read {path}: {exc}") from exc
    if as_bits:
        text = raw.decode("ascii", errors="strict").split()
        joined = "".join(text)
        if set(joined) - {"0", "1"}:
            raise _CliError(EXIT_VALIDATION, f"{path} must contain only 0/1 characters")
        return [int(c) for c in joined]
    bits = []
    for byte in raw:
        for i in range(7, -1, -1):
            bits.append((byte >> i) & 1)
    return bits


def _write_bits(path: str, bits: Sequence[int], as_bits: bool) -> None:
    try:
        if as_bits:
            with open(path, "w", encoding="ascii") as fh:
                fh.write("".join(str(b) for b in bits))
                fh.write("\n")
            return
        if len(bits) % 8 != 0:
            raise _CliError(
                EXIT_VALIDATION,
                f"message length {len(bits)} is not a whole number of bytes; use --output-bits",
            )
        out = bytearray()
        for i in range(0, len(bits), 8):
            byte = 0
            for b in bits[i:i + 8]:
                byte = (byte << 1) | b
            out.append(byte)
        with open(path, "wb") as fh:
            fh.write(out)
    except OSError as exc:
        raise _CliError(EXIT_IO, f"cannot write {path}: {exc}") from exc


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise _CliError(EXIT_IO, f"cannot write {path}: {exc}") from exc


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _model_hash(config: dict) -> str:
    return config_digest(config).hex()[:16]


# -- commands -----------------------------------------------------------------


def _cmd_encode(args) -> int:
    model, config = _load_model(args.model, args.n)
    variant = _load_variant(args, model)
    bits = _read_bits(args.input, args.input_bits)
    result = encode_message(model, bits, variant, record_traces=False)
    shift_digest = variant.shift.digest()[:8] if variant.shifted else None
    payload = pack_container(
        result.codewords,
        variant=variant.name,
        alphabet_size=model.m,
        block_length=model.n,
        message_length=len(bits),
        model_digest=config_digest(config)[:8],
        shift_digest=shift_digest,
    )
    try:
        with open(args.output, "wb") as fh:
            fh.write(payload)
    except OSError as exc:
        raise _CliError(EXIT_IO, f"cannot write {args.output}: {exc}") from exc
    print(f"blocks={len(result.codewords)} consumed={result.data_bits_consumed}")
    return EXIT_OK


def _cmd_decode(args) -> int:
    try:
        with open(args.input, "rb") as fh:
            payload = fh.read()
    except OSError as exc:
        raise _CliError(EXIT_IO, f"cannot read {args.input}: {exc}") from exc
    header, codewords = unpack_container(payload)
    config = _load_json(args.model)
    model = model_from_config(config, header.block_length)
    if model.m != header.alphabet_size:
        raise _CliError(EXIT_VALIDATION, "model alphabet does not match the container")
    if config_digest(config)[:8] != header.model_digest:
        raise _CliError(EXIT_VALIDATION, "model digest mismatch: wrong model for this container")
    if header.variant == "shifted":
        if not args.shift:
            raise _CliError(EXIT_VALIDATION, "container uses the shifted variant; pass --shift")
        table = ShiftTable.from_config(_load_json(args.shift))
        if table.digest()[:8] != header.shift_digest:
            raise _CliError(EXIT_VALIDATION, "shift table digest mismatch")
        variant = shifted_variant(table)
    else:
        variant = STANDARD
    bits = decode_message(model, codewords, header.message_length, variant)
    _write_bits(args.output, bits, args.output_bits)
    print(f"blocks={len(codewords)} bits={header.message_length}")
    return EXIT_OK


def _cmd_bounds(args) -> int:
    model, config = _load_model(args.model, args.n)
    p_max = model.p_max()
    four = 4 * p_max
    info = {
        "model_hash": _model_hash(config),
        "m": model.m,
        "n": model.n,
        "divergence_bound_standard_bits": analysis.divergence_bound_standard(model.first_symbol_dist),
        "divergence_bound_shifted_bits": analysis.divergence_bound_shifted(model.first_symbol_dist),
        "p_max": f"{p_max.numerator}/{p_max.denominator}",
        "p_max_float": float(p_max),
        "error_propagation": [
            {
                "k": k,
                "bound": (float(four) ** k) if four < 1 else None,
                "vacuous": four >= 1,
            }
            for k in range(1, args.kmax + 1)
        ],
        "min_cond_entropy_bits": model.min_cond_entropy(),
        "shifted_rate_bound_bits": analysis.rate_bound_shifted(model),
    }
    if args.json:
        print(json.dumps(info, sort_keys=True))
        return EXIT_OK
    print(f"model {info['model_hash']} (m={model.m}, n={model.n})")
    print(f"divergence bound (standard): {info['divergence_bound_standard_bits']:.6g} bits/block")
    print(f"divergence bound (shifted):  {info['divergence_bound_shifted_bits']:.6g} bits/block")
    print(f"p_max = {info['p_max']} ~ {info['p_max_float']:.6g}")
    for row in info["error_propagation"]:
        tail = "vacuous" if row["vacuous"] else f"{row['bound']:.6g}"
        print(f"error propagation k={row['k']}: (4 p_max)^k = {tail}")
    print(f"min conditional entropy: {info['min_cond_entropy_bits']:.6g} bits")
    print(f"shifted-variant rate bound: E[bits/block] > {info['shifted_rate_bound_bits']:.6g}")
    return EXIT_OK


def _cmd_shift_optimize(args) -> int:
    model, _config = _load_model(args.model, args.n)
    mode = None if args.mode == "auto" else args.mode
    table = compute_shift_table(
        model, cap=args.cap, sample_count=args.samples, seed=args.seed, mode=mode
    )
    table.save(args.output)
    print(
        f"mode={table.provenance} "
        + " ".join(f"s[{i}]={s.numerator}/{s.denominator}" for i, s in enumerate(table.values))
    )
    return EXIT_OK


def _experiment_config(args, n: int) -> analysis.ExperimentConfig:
    config = _load_json(args.model)
    shift_config = _load_json(args.shift) if getattr(args, "shift", None) else None
    if getattr(args, "variant", "standard") == "shifted" and shift_config is None:
        raise _CliError(EXIT_VALIDATION, "--variant shifted requires --shift TABLE.json")
    return analysis.ExperimentConfig(
        model_config=config,
        n=n,
        variant=getattr(args, "variant", "standard"),
        shift_config=shift_config,
        blocks=getattr(args, "blocks", 10_000),
        samples=getattr(args, "samples", 100_000),
        trials=getattr(args, "trials", 100_000),
        m_blocks=getattr(args, "m_blocks", 2),
        j0=getattr(args, "j0", 2),
        k_max=getattr(args, "kmax", 3),
        seed=args.seed,
        workers=args.workers,
    )


def _cmd_bench_redundancy(args) -> int:
    ns = [int(part) for part in args.n.split(",")]
    rows = []
    summary = []
    for n in ns:
        cfg = _experiment_config(args, n)
        result = analysis.measure_redundancy(cfg)
        rows.append([
            _model_hash(cfg.model_config), cfg.variant, result.n, result.blocks,
            _fmt(result.mean_bits), _fmt(result.entropy_per_symbol),
            _fmt(result.redundancy), _fmt(result.stderr), cfg.seed,
        ])
        summary.append(f"n={n} redundancy={result.redundancy:.6g}")
    _write_csv(
        args.csv,
        ["model_hash", "variant", "n", "blocks", "mean_l1", "H_per_symbol",
         "redundancy", "stderr", "seed"],
        rows,
    )
    print("redundancy: " + "; ".join(summary))
    return EXIT_OK


def _cmd_bench_divergence(args) -> int:
    cfg = _experiment_config(args, args.n)
    report = analysis.estimate_divergence(cfg)
    _write_csv(
        args.csv,
        ["model_hash", "n", "m", "samples", "estimate", "ci_lo", "ci_hi", "analytic_bound"],
        [[
            _model_hash(cfg.model_config), cfg.n, report.m_blocks, report.samples,
            _fmt(report.estimate), _fmt(report.ci_lo), _fmt(report.ci_hi),
            _fmt(report.analytic_bound),
        ]],
    )
    print(
        f"divergence: estimate={report.estimate:.6g} bits/block "
        f"(bound {report.analytic_bound:.6g}, method {report.method})"
    )
    return EXIT_OK


def _cmd_bench_error_prop(args) -> int:
    cfg = _experiment_config(args, args.n)
    rows = analysis.error_propagation_experiment(cfg)
    csv_rows = []
    for row in rows:
        csv_rows.append([
            _model_hash(cfg.model_config), cfg.n, row.trials, cfg.j0, row.k,
            row.failures, _fmt(row.rate), _fmt(row.wilson_lo), _fmt(row.wilson_hi),
            _fmt(row.bound) if row.bound is not None else "NA",
        ])
    _write_csv(
        args.csv,
        ["model_hash", "n", "trials", "j0", "k", "failures", "rate",
         "wilson_lo", "wilson_hi", "bound"],
        csv_rows,
    )
    print("error-prop: " + "; ".join(f"k={r.k} rate={r.rate:.3g}" for r in rows))
    return EXIT_OK


def _cmd_awgn_ask(args) -> int:
    if args.dist == "uniform":
        dist = "uniform"
    else:
        try:
            inner, outer = (float(x) for x in args.dist.split(","))
        except ValueError as exc:
            raise _CliError(
                EXIT_VALIDATION, "--dist must be 'uniform' or 'P(a),P(3a)' like '0.33,0.17'"
            ) from exc
        dist = (inner, outer)
    convention = args.convention
    if convention == "auto":
        convention = analysis.pin_snr_convention()
    try:
        mi = analysis.awgn_ask4_mutual_information(args.snr_db, dist, convention)
    except ValueError as exc:
        raise _CliError(EXIT_VALIDATION, str(exc)) from exc
    if args.json:
        print(json.dumps({
            "snr_db": args.snr_db,
            "dist": args.dist,
            "convention": convention,
            "mutual_information_bits": mi,
        }, sort_keys=True))
    else:
        print(f"I(X;Y) = {mi:.6f} bits (convention: {convention})")
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dvfh",
        description="Exact-arithmetic delayed variable-to-fixed homophonic coding",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_model(p, need_n=True):
        p.add_argument("--model", required=True, help="model configuration JSON")
        if need_n:
            p.add_argument("--n", type=int, default=None, help="block length")

    enc = sub.add_parser("encode", help="encode a message file into a codeword container")
    add_model(enc)
    enc.add_argument("--variant", choices=["standard", "shifted"], default="standard")
    enc.add_argument("--shift", help="shift table JSON (shifted variant)")
    enc.add_argument("--input", required=True)
    enc.add_argument("--input-bits", action="store_true",
                     help="treat the input as ASCII 0/1 text instead of raw bytes")
    enc.add_argument("--output", required=True)
    enc.set_defaults(func=_cmd_encode)

    dec = sub.add_parser("decode", help="decode a codeword container")
    dec.add_argument("--model", required=True)
    dec.add_argument("--shift", help="shift table JSON (shifted containers)")
    dec.add_argument("--input", required=True)
    dec.add_argument("--output", required=True)
    dec.add_argument("--output-bits", action="store_true",
                     help="write ASCII 0/1 text instead of raw bytes")
    dec.set_defaults(func=_cmd_decode)

    bounds = sub.add_parser("bounds", help="print the analytic guarantees for a model")
    add_model(bounds)
    bounds.add_argument("--kmax", type=int, default=4)
    bounds.add_argument("--json", action="store_true")
    bounds.set_defaults(func=_cmd_bounds)

    sopt = sub.add_parser("shift-optimize", help="compute a shift table")
    add_model(sopt)
    sopt.add_argument("--mode", choices=["auto", "exact", "approx"], default="auto")
    sopt.add_argument("--samples", type=int, default=4096)
    sopt.add_argument("--seed", type=int, default=0)
    sopt.add_argument("--cap", type=int, default=1 << 20)
    sopt.add_argument("--output", required=True)
    sopt.set_defaults(func=_cmd_shift_optimize)

    def add_bench(p):
        p.add_argument("--variant", choices=["standard", "shifted"], default="standard")
        p.add_argument("--shift", help="shift table JSON (shifted variant)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--csv", required=True)

    bred = sub.add_parser("bench-redundancy", help="mean input bits per block vs entropy")
    bred.add_argument("--model", required=True)
    bred.add_argument("--n", required=True, help="comma-separated block lengths")
    bred.add_argument("--blocks", type=int, default=10_000)
    add_bench(bred)
    bred.set_defaults(func=_cmd_bench_redundancy)

    bdiv = sub.add_parser("bench-divergence", help="empirical max-divergence estimate")
    add_model(bdiv)
    bdiv.add_argument("--m-blocks", dest="m_blocks", type=int, default=2)
    bdiv.add_argument("--samples", type=int, default=100_000)
    add_bench(bdiv)
    bdiv.set_defaults(func=_cmd_bench_divergence)

    bprop = sub.add_parser("bench-error-prop", help="decoder realignment after corruption")
    add_model(bprop)
    bprop.add_argument("--trials", type=int, default=100_000)
    bprop.add_argument("--j0", type=int, default=2)
    bprop.add_argument("--kmax", type=int, default=3)
    add_bench(bprop)
    bprop.set_defaults(func=_cmd_bench_error_prop)

    awgn = sub.add_parser("awgn-ask", help="4-ASK mutual information over AWGN")
    awgn.add_argument("--snr-db", type=float, default=10.0)
    awgn.add_argument("--dist", default="uniform", help="'uniform' or 'P(a),P(3a)'")
    awgn.add_argument("--convention",
                      choices=["average-power", "fixed-amplitude", "auto"],
                      default="average-power")
    awgn.add_argument("--json", action="store_true")
    awgn.set_defaults(func=_cmd_awgn_ask)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ModelError, ContainerError, TruncatedStreamError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DisconnectedIntersectionError as exc:
        print(f"error: disconnected intersection at {exc}", file=sys.stderr)
        return EXIT_DISCONNECTED
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
