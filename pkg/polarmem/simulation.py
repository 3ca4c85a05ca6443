"""
Monte Carlo frame-error-rate estimation for the three decoding regimes:

  base  transmit over the channel with memory, decode as if it were the
        memoryless BSC with the same average crossover
  int   interleave before transmission and de-interleave before the same
        memoryless decoder, which scrambles the bursts
  corr  decode with the true channel chain
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from polarmem.channels import (
    FiniteStateChannel,
    average_crossover,
    bsc,
    evidence_mpo,
    gilbert_elliott,
    lift_memoryless,
    sample_transmission,
)
from polarmem.codes import construct_frozen_set, encode
from polarmem.config import (
    BURST_H,
    BURST_ROWS,
    CSV_COLUMNS,
    ERROR_COLUMN,
    FAMILY_ALIASES,
    FRAME_BATCH,
    PRESET_GRIDS,
    WILSON_Z,
)
from polarmem.decoder import sc_decode
from polarmem.models import ChannelParams, CodeSpec, FerResult, SimConfig, TrialOutcome

logger = logging.getLogger(__name__)

TrialFn = Callable[[SimConfig, int], TrialOutcome]


# ── Single frames


def frame_rng(seed: int, frame: int) -> np.random.Generator:
    """Independent stream for one frame, fixed by (seed, frame index) alone."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(frame,)))


def fixed_interleaver(seed: int, N: int) -> np.ndarray:
    return np.random.default_rng(np.random.SeedSequence(seed)).permutation(N)


def run_trial(
    spec: CodeSpec,
    channel: FiniteStateChannel,
    regime: str,
    rng: np.random.Generator,
    interleaver: Optional[np.ndarray] = None,
    engine: str = "fast",
    window_size: Optional[int] = None,
) -> TrialOutcome:
    message = rng.integers(0, 2, size=spec.k, dtype=np.uint8)
    x = encode(spec, message)

    if regime == "corr":
        y, _ = sample_transmission(channel, x, rng)
        decoder_channel = channel
    elif regime == "base":
        y, _ = sample_transmission(channel, x, rng)
        decoder_channel = lift_memoryless(bsc(average_crossover(channel)))
    elif regime == "int":
        perm = interleaver if interleaver is not None else rng.permutation(spec.N)
        y_sent, _ = sample_transmission(channel, x[perm], rng)
        y = np.empty_like(y_sent)
        y[perm] = y_sent
        decoder_channel = lift_memoryless(bsc(average_crossover(channel)))
    else:
        raise ValueError(f"unknown regime '{regime}' (expected base, int or corr)")

    result = sc_decode(spec, evidence_mpo(decoder_channel, y), engine=engine, window_size=window_size)
    bit_errors = int(np.count_nonzero(result.message != message))
    return TrialOutcome(frame_error=bit_errors > 0, bit_errors=bit_errors, contractions=result.stats.contractions)


# ── Per-point setup (cached per process)


def channel_for(params: ChannelParams) -> FiniteStateChannel:
    return gilbert_elliott(params.hG, params.hB, params.pGB, params.pBG)


@lru_cache(maxsize=64)
def _code_for(family: str, n: int, k: int, params: ChannelParams, mode: str) -> CodeSpec:
    return construct_frozen_set(family, n, k, channel_for(params), mode=mode)


def code_for(cfg: SimConfig) -> CodeSpec:
    """Regime-matched construction: i.i.d. proxy for base/int, true chain for corr."""
    mode = "corr" if cfg.regime == "corr" else "iid"
    return _code_for(cfg.family, cfg.n, cfg.k, cfg.channel, mode)


def decode_frame(cfg: SimConfig, frame: int) -> TrialOutcome:
    spec = code_for(cfg)
    interleaver = fixed_interleaver(cfg.seed, cfg.N) if cfg.regime == "int" and cfg.interleaver == "fixed" else None
    return run_trial(
        spec,
        channel_for(cfg.channel),
        cfg.regime,
        frame_rng(cfg.seed, frame),
        interleaver=interleaver,
        engine=cfg.engine,
        window_size=cfg.window_size,
    )


def _run_batch(args: Tuple[SimConfig, int, int, TrialFn]) -> List[TrialOutcome]:
    cfg, start, stop, trial = args
    return [trial(cfg, frame) for frame in range(start, stop)]


# ── Estimation


def wilson_interval(errors: int, frames: int, z: float = WILSON_Z) -> Tuple[Optional[float], Optional[float]]:
    if frames == 0:
        return None, None
    phat = errors / frames
    denom = 1.0 + z * z / frames
    centre = (phat + z * z / (2 * frames)) / denom
    half = z * math.sqrt(phat * (1 - phat) / frames + z * z / (4 * frames * frames)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def _batches(cfg: SimConfig, trial: TrialFn) -> Iterable[List[TrialOutcome]]:
    """Frame batches in frame order; with several workers, a wave of batches at a time."""
    bounds = [(s, min(s + FRAME_BATCH, cfg.max_frames)) for s in range(0, cfg.max_frames, FRAME_BATCH)]
    if cfg.workers == 1:
        for start, stop in bounds:
            yield _run_batch((cfg, start, stop, trial))
        return
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        for w in range(0, len(bounds), cfg.workers):
            wave = [(cfg, start, stop, trial) for start, stop in bounds[w : w + cfg.workers]]
            yield from pool.map(_run_batch, wave)


def estimate_fer(cfg: SimConfig, trial: Optional[TrialFn] = None) -> FerResult:
    """
    Run frames until the frame budget or the error budget is reached.

    Outcomes are consumed in frame order and the run stops at the exact frame
    where the error budget is met, so the result depends only on the seed.
    """
    trial = trial or decode_frame
    started = time.perf_counter()
    frames = frame_errors = bit_errors = contractions = 0
    if cfg.max_frames > 0:
        if trial is decode_frame:
            code_for(cfg)  # fail early on an unconstructible code
        done = False
        for batch in _batches(cfg, trial):
            for outcome in batch:
                frames += 1
                frame_errors += int(outcome.frame_error)
                bit_errors += outcome.bit_errors
                contractions += outcome.contractions
                if frame_errors >= cfg.max_errors:
                    done = True
                    break
            if done:
                break

    lo, hi = wilson_interval(frame_errors, frames)
    result = FerResult(
        frames=frames,
        frame_errors=frame_errors,
        bit_errors=bit_errors,
        fer=frame_errors / frames if frames else None,
        ci_lo=lo,
        ci_hi=hi,
        seconds=round(time.perf_counter() - started, 3) if cfg.record_timing else None,
        contractions=contractions,
    )
    if result.undefined:
        logger.warning(f"[sim] {cfg.family} n={cfg.n} {cfg.regime}: no frames run, FER undefined")
    else:
        logger.info(
            f"[sim] {cfg.family} n={cfg.n} k={cfg.k} {cfg.regime}: "
            f"{frame_errors}/{frames} frame errors, FER={result.fer:.4g} [{lo:.4g}, {hi:.4g}]"
        )
    return result


# ── Grids and sweeps


def _parse_rate(value) -> float:
    return float(Fraction(str(value).strip()))


def load_grid(source: Union[str, Path], **overrides) -> List[SimConfig]:
    """
    Read a sweep grid (preset name or CSV path).

    Required columns: family, n, rate, regime, hG, hB, pGB, pBG. Optional
    columns: k, max_frames, max_errors. Keyword overrides apply to every row.
    """
    path = PRESET_GRIDS.get(str(source), Path(source))
    if not Path(path).is_file():
        raise FileNotFoundError(f"grid not found: {source}")
    frame = pd.read_csv(path, comment="#", skipinitialspace=True, dtype={"rate": str})
    missing = {"family", "n", "rate", "regime", "hG", "hB", "pGB", "pBG"} - set(frame.columns)
    if missing:
        raise ValueError(f"grid {path} lacks columns {sorted(missing)}")

    configs = []
    for row in frame.to_dict(orient="records"):
        fields = {
            "family": FAMILY_ALIASES.get(row["family"], row["family"]),
            "n": int(row["n"]),
            "rate": _parse_rate(row["rate"]),
            "regime": row["regime"],
            "channel": ChannelParams(hG=row["hG"], hB=row["hB"], pGB=row["pGB"], pBG=row["pBG"]),
        }
        for opt in ("k", "max_frames", "max_errors"):
            if opt in row and not pd.isna(row[opt]):
                fields[opt] = int(row[opt])
        fields.update(overrides)
        configs.append(SimConfig(**fields))
    return configs


def result_row(cfg: SimConfig, result: Optional[FerResult], error: str = "") -> Dict[str, object]:
    ch = cfg.channel
    row: Dict[str, object] = {
        "family": cfg.family,
        "n": cfg.n,
        "rate": round(cfg.rate, 6),
        "regime": cfg.regime,
        "hG": ch.hG,
        "hB": ch.hB,
        "pGB": ch.pGB,
        "pBG": ch.pBG,
        "mean_burst": round(ch.mean_burst, 6),
        "seed": cfg.seed,
    }
    if result is not None:
        row.update(result.model_dump(include={"frames", "frame_errors", "bit_errors", "fer", "ci_lo", "ci_hi", "seconds"}))
    row[ERROR_COLUMN] = error
    return row


def sweep(
    grid: List[SimConfig],
    out: Optional[Union[str, Path]] = None,
    progress: Optional[Callable[[int, SimConfig], None]] = None,
) -> pd.DataFrame:
    """One result row per grid point; a failing point records its error and the sweep goes on."""
    rows = []
    for i, cfg in enumerate(grid):
        if progress is not None:
            progress(i, cfg)
        try:
            rows.append(result_row(cfg, estimate_fer(cfg)))
        except Exception as exc:  # keep the rest of the grid running
            logger.error(f"[sweep] row {i} ({cfg.family} n={cfg.n} {cfg.regime}) failed: {exc}")
            rows.append(result_row(cfg, None, error=f"{type(exc).__name__}: {exc}"))

    frame = pd.DataFrame(rows, columns=CSV_COLUMNS + [ERROR_COLUMN])
    if out is not None:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(out, index=False)
        logger.info(f"[sweep] wrote {len(frame)} rows to {out}")
    return frame


def summarize(results: pd.DataFrame) -> pd.DataFrame:
    """
    Regime ordering per (family, n, rate, channel) point.

    `corr_beats_base` is False when FER_corr >= FER_base; `overlap` flags
    corr/base intervals that intersect, where the ordering is not resolved.
    """
    keys = ["family", "n", "rate", "hG", "hB", "pGB", "pBG"]
    out = []
    ok = results[results[ERROR_COLUMN].fillna("") == ""] if ERROR_COLUMN in results else results
    for key, group in ok.groupby(keys, sort=False):
        by = {r["regime"]: r for r in group.to_dict(orient="records")}
        row = dict(zip(keys, key))
        for regime in ("corr", "int", "base"):
            row[f"fer_{regime}"] = by[regime]["fer"] if regime in by else None
        corr, base = by.get("corr"), by.get("base")
        if corr is not None and base is not None and not pd.isna(corr["fer"]) and not pd.isna(base["fer"]):
            row["corr_beats_base"] = bool(corr["fer"] < base["fer"])
            row["overlap"] = bool(corr["ci_hi"] >= base["ci_lo"] and base["ci_hi"] >= corr["ci_lo"])
        else:
            row["corr_beats_base"] = None
            row["overlap"] = None
        out.append(row)
    return pd.DataFrame(out)


def burst_grid(families: Iterable[str], regimes: Iterable[str], ns: Iterable[int], rate: Union[str, float]) -> pd.DataFrame:
    """Grid rows over the burst-length table (the preset files are instances of this)."""
    rows = [
        {"family": f, "n": n, "rate": rate, "regime": r, "hG": 0.0, "hB": BURST_H, "pGB": pGB, "pBG": pBG}
        for n in ns
        for _, pBG, pGB in BURST_ROWS
        for f in families
        for r in regimes
    ]
    return pd.DataFrame(rows)
