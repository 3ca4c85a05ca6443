from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd
from pydantic import ValidationError

from polarmem.channels import ChannelError, evidence_mpo, ge_params, read_channel_file
from polarmem.codes import (
    CodeError,
    construction_chain,
    first_error_profile,
    frozen_from_profile,
    read_code_file,
    write_code_file,
)
from polarmem.config import (
    DEFAULT_SEED,
    DEFAULT_WORKERS,
    FAMILY_ALIASES,
    MAX_FRAME_ERRORS,
    MAX_FRAMES,
    MAX_WINDOW,
    PRESET_GRIDS,
)
from polarmem.decoder import DecodingError, sc_decode
from polarmem.models import ChannelParams, CodeSpec, SimConfig
from polarmem.simulation import estimate_fer, load_grid, result_row, summarize, sweep
from polarmem.verification import run_checks

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(ValueError):
    """Bad flags or input files; reported with exit code 2."""


def _family(value: str) -> str:
    family = FAMILY_ALIASES.get(value, value)
    if family not in ("polar", "conv-polar"):
        raise argparse.ArgumentTypeError(f"unknown family '{value}' (polar, conv-polar, pc or cpc)")
    return family


def _bits(value: str) -> np.ndarray:
    """Bits given inline ('0110', '0 1 1 0', '0,1,1,0') or as a file holding them."""
    path = Path(value)
    text = path.read_text() if path.is_file() else value
    digits = [c for c in text if not c.isspace() and c != ","]
    if not digits or any(c not in "01" for c in digits):
        raise UsageError(f"received word must be a string of 0/1 bits, got '{value[:40]}'")
    return np.array([int(c) for c in digits], dtype=np.uint8)


# ── Subcommands


def cmd_construct(args) -> int:
    N = 1 << args.n
    if not 0 <= args.k <= N:
        raise UsageError(f"--k {args.k} outside [0, {N}]")
    channel = read_channel_file(args.channel)
    log_e = first_error_profile(args.family, args.n, construction_chain(channel, N, args.mode))
    spec = CodeSpec(family=args.family, n=args.n, frozen=frozen_from_profile(log_e, args.k))

    if args.out:
        write_code_file(spec, args.out, mode=args.mode)
        print(f"[INFO] Wrote {args.out} ({spec.family}, N={spec.N}, k={spec.k})")
    else:
        print(f"[INFO] Frozen positions (1-based): {' '.join(str(i + 1) for i in spec.frozen)}")
    if args.emit_profile:
        frozen = set(spec.frozen)
        profile = pd.DataFrame(
            {
                "position": np.arange(1, N + 1),
                "E": np.exp(log_e),
                "log10_E": log_e / np.log(10.0),
                "frozen": [int(i in frozen) for i in range(N)],
            }
        )
        profile.to_csv(sys.stdout, index=False)
    return EXIT_OK


def cmd_decode(args) -> int:
    spec = read_code_file(args.code)
    channel = read_channel_file(args.channel)
    y = _bits(args.y)
    if len(y) != spec.N:
        raise UsageError(f"received word has {len(y)} bits, code has N={spec.N}")

    result = sc_decode(spec, evidence_mpo(channel, y), engine=args.engine, window_size=args.window, keep_tables=args.verbose)
    if args.verbose:
        for p, table in result.tables:
            probs = table.normalized()
            cells = " ".join(f"{idx:0{table.width}b}"[::-1] + f":{v:.6g}" for idx, v in enumerate(probs))
            print(f"[INFO] window @{p + 1}: {cells}")
    print("u_hat   " + "".join(map(str, result.u_hat)))
    print("message " + "".join(map(str, result.message)))
    logger.info(f"[decode] {result.stats.contractions} merges, {result.stats.cache_hits} cache hits")
    return EXIT_OK


def _sim_channel(args) -> ChannelParams:
    if args.channel:
        try:
            hG, hB, pGB, pBG = ge_params(read_channel_file(args.channel))
        except ChannelError as exc:
            raise UsageError(f"simulate needs a two-state Gilbert-Elliott channel: {exc}") from exc
        return ChannelParams(hG=hG, hB=hB, pGB=pGB, pBG=pBG)
    return ChannelParams(hG=args.hG, hB=args.hB, pGB=args.pGB, pBG=args.pBG)


def cmd_simulate(args) -> int:
    fields = dict(
        family=args.family,
        n=args.n,
        rate=args.rate,
        regime=args.regime,
        channel=_sim_channel(args),
        max_frames=args.frames,
        max_errors=args.max_errors,
        seed=args.seed,
        workers=args.workers,
        interleaver=args.interleaver,
        engine=args.engine,
        window_size=args.window,
        record_timing=args.timings,
    )
    if args.k is not None:
        fields.update(k=args.k, rate=args.k / (1 << args.n))
    cfg = SimConfig(**fields)
    result = estimate_fer(cfg)
    frame = pd.DataFrame([result_row(cfg, result)])
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(args.out, index=False)
        print(f"[INFO] Wrote {args.out}")
    else:
        frame.to_csv(sys.stdout, index=False)
    return EXIT_OK


def _print_summary(results: pd.DataFrame) -> None:
    if results.empty:
        return
    for row in summarize(results).to_dict(orient="records"):
        point = f"{row['family']} n={row['n']} pBG={row['pBG']} pGB={row['pGB']}"
        fers = " ".join(
            f"{r}={row[f'fer_{r}']:.3g}" for r in ("corr", "int", "base") if row[f"fer_{r}"] is not None and not pd.isna(row[f"fer_{r}"])
        )
        if row["corr_beats_base"] is False:
            note = " (CIs overlap)" if row["overlap"] else ""
            print(f"[WARN] {point}: FER_corr >= FER_base{note}  {fers}")
        else:
            note = " (CIs overlap)" if row["overlap"] else ""
            print(f"[INFO] {point}: {fers}{note}")


def cmd_sweep(args) -> int:
    overrides = dict(seed=args.seed, workers=args.workers, record_timing=args.timings)
    if args.frames is not None:
        overrides["max_frames"] = args.frames
    if args.max_errors is not None:
        overrides["max_errors"] = args.max_errors
    grid = load_grid(args.grid, **overrides)
    print(f"[INFO] Sweeping {len(grid)} points from {args.grid}")
    results = sweep(grid, out=args.out, progress=lambda i, cfg: logger.info(f"[sweep] {i + 1}/{len(grid)} {cfg.family} n={cfg.n} {cfg.regime}"))
    if args.out is None:
        results.to_csv(sys.stdout, index=False)
    _print_summary(results)
    failed = int((results["error"].fillna("") != "").sum()) if not results.empty else 0
    if failed:
        print(f"[WARN] {failed} grid points failed; see the error column")
    return EXIT_OK


def cmd_verify(args) -> int:
    report = run_checks(args.level, seed=args.seed)
    for check in report.checks:
        tag = "[INFO]" if check.passed else "[ERROR]"
        print(f"{tag} {'PASS' if check.passed else 'FAIL'} {check.name}: {check.detail} ({check.seconds:.2f}s)")
    return EXIT_OK if report.passed else EXIT_FAILURE


# ── Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polarmem",
        description="Polar and convolutional polar codes over finite-state channels, decoded by tensor contraction.",
    )
    verbose_help = "debug logging; decode also prints window tables"
    parser.add_argument("-v", "--verbose", action="store_true", help=verbose_help)
    # accepted after the subcommand too; SUPPRESS keeps a leading -v from being reset
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS, help=verbose_help)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", parents=[common], help="choose a frozen set from first-error probabilities")
    p.add_argument("--family", type=_family, required=True)
    p.add_argument("--n", type=int, required=True, help="polarization steps, N = 2^n")
    p.add_argument("--k", type=int, required=True, help="information bits")
    p.add_argument("--channel", required=True, help="channel description file")
    p.add_argument("--mode", choices=["iid", "corr"], default="corr")
    p.add_argument("--out", help="code file to write (default: print the frozen set)")
    p.add_argument("--emit-profile", action="store_true", help="print the E(u_i) profile as CSV")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("decode", parents=[common], help="successive-cancellation decode of one received word")
    p.add_argument("--code", required=True, help="code file")
    p.add_argument("--channel", required=True, help="channel description file")
    p.add_argument("--y", required=True, help="received bits, inline or a file")
    p.add_argument("--engine", choices=["fast", "sweep"], default="fast")
    p.add_argument("--window", type=int, choices=range(1, MAX_WINDOW + 1), help="decode window (default per family)")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("simulate", parents=[common], help="FER of one code/channel/regime point")
    p.add_argument("--family", type=_family, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rate", type=float, default=0.5)
    p.add_argument("--k", type=int, help="information bits (overrides --rate)")
    p.add_argument("--regime", choices=["base", "int", "corr"], default="corr")
    p.add_argument("--channel", help="Gilbert-Elliott channel file (overrides the --h*/--p* flags)")
    p.add_argument("--hG", type=float, default=0.0)
    p.add_argument("--hB", type=float, default=0.9)
    p.add_argument("--pGB", type=float, default=0.01)
    p.add_argument("--pBG", type=float, default=0.05)
    p.add_argument("--interleaver", choices=["fresh", "fixed"], default="fresh")
    p.add_argument("--engine", choices=["fast", "sweep"], default="fast")
    p.add_argument("--window", type=int, choices=range(1, MAX_WINDOW + 1))
    _add_budget_flags(p, MAX_FRAMES, MAX_FRAME_ERRORS)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser(
        "sweep",
        parents=[common],
        help="FER sweep over a grid (bursts|fig2a, lengths|fig2b, length_bursts|fig2cd or a CSV file)",
    )
    p.add_argument("--grid", required=True, help=f"preset ({', '.join(PRESET_GRIDS)}) or a CSV file")
    _add_budget_flags(p, None, None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", parents=[common], help="identity, normalization and engine-agreement checks")
    p.add_argument("--level", choices=["quick", "full"], default="quick")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_verify)
    return parser


def _add_budget_flags(p: argparse.ArgumentParser, frames: Optional[int], errors: Optional[int]) -> None:
    p.add_argument("--frames", type=int, default=frames, help="frame budget per point")
    p.add_argument("--max-errors", type=int, default=errors, help="stop a point after this many frame errors")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="base seed (default: $POLARMEM_SEED)")
    p.add_argument("--workers", type=int, default=DEFAULT_WORKERS)
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("--timings", action="store_true", help="fill the seconds column (breaks byte-identical reruns)")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except DecodingError as exc:
        print(f"[ERROR] decoding failed: {exc}")
        return EXIT_FAILURE
    except (UsageError, ChannelError, CodeError, ValidationError, FileNotFoundError) as exc:
        print(f"[ERROR] {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
