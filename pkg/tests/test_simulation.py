"""Tests for FER estimation, grids and sweeps."""

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_array_equal
from pydantic import ValidationError

from polarmem.config import BURST_ROWS, CSV_COLUMNS, ERROR_COLUMN, PRESET_GRIDS
from polarmem.models import ChannelParams, SimConfig, TrialOutcome
from polarmem.simulation import (
    burst_grid,
    channel_for,
    code_for,
    decode_frame,
    estimate_fer,
    fixed_interleaver,
    frame_rng,
    load_grid,
    result_row,
    run_trial,
    summarize,
    sweep,
    wilson_interval,
)

GE = ChannelParams(hG=0.0, hB=0.9, pGB=0.01, pBG=0.05)


def make_config(**overrides) -> SimConfig:
    fields = dict(family="polar", n=3, rate=0.5, regime="corr", channel=GE, max_frames=100, max_errors=100, seed=7)
    fields.update(overrides)
    return SimConfig(**fields)


def coin_flip(cfg: SimConfig, frame: int) -> TrialOutcome:
    return TrialOutcome(frame_error=bool(frame_rng(cfg.seed, frame).random() < 0.5), bit_errors=0)


class TestWilson:
    def test_no_frames(self):
        assert wilson_interval(0, 0) == (None, None)

    def test_no_errors(self):
        lo, hi = wilson_interval(0, 10)
        assert lo == 0.0
        assert hi == pytest.approx(0.2775, abs=1e-4)

    def test_symmetric_at_half(self):
        lo, hi = wilson_interval(50, 100)
        assert lo < 0.5 < hi
        assert lo + hi == pytest.approx(1.0)

    def test_narrows_with_more_frames(self):
        lo1, hi1 = wilson_interval(10, 100)
        lo2, hi2 = wilson_interval(100, 1000)
        assert hi2 - lo2 < hi1 - lo1


class TestEstimateFer:
    def test_coin_flip_harness(self):
        result = estimate_fer(make_config(max_frames=2000, max_errors=10**6), trial=coin_flip)
        assert result.frames == 2000
        assert abs(result.fer - 0.5) < 0.045
        assert result.ci_lo <= result.fer <= result.ci_hi

    def test_stops_at_exact_error_frame(self):
        cfg = make_config(max_frames=1000, max_errors=10)
        result = estimate_fer(cfg, trial=coin_flip)
        flips = [coin_flip(cfg, f).frame_error for f in range(1000)]
        tenth = [i for i, e in enumerate(flips) if e][9]
        assert result.frame_errors == 10
        assert result.frames == tenth + 1

    def test_zero_frames_is_undefined(self):
        result = estimate_fer(make_config(max_frames=0))
        assert result.undefined
        assert result.fer is None and result.ci_lo is None

    def test_timing_only_on_request(self):
        assert estimate_fer(make_config(max_frames=5), trial=coin_flip).seconds is None
        assert estimate_fer(make_config(max_frames=5, record_timing=True), trial=coin_flip).seconds is not None

    def test_workers_do_not_change_results(self):
        serial = estimate_fer(make_config(max_frames=130, regime="base"))
        parallel = estimate_fer(make_config(max_frames=130, regime="base", workers=2))
        assert serial == parallel

    @pytest.mark.parametrize("regime", ["base", "int", "corr"])
    def test_noiseless_channel_never_fails(self, regime):
        quiet = ChannelParams(hG=0.0, hB=0.0, pGB=0.1, pBG=0.1)
        result = estimate_fer(make_config(family="conv-polar", n=4, regime=regime, channel=quiet, max_frames=64))
        assert result.frames == 64
        assert result.frame_errors == 0

    def test_same_seed_same_frame(self):
        cfg = make_config(regime="int", interleaver="fixed")
        assert decode_frame(cfg, 3) == decode_frame(cfg, 3)


class TestTrials:
    def test_frame_streams_are_independent_of_order(self):
        a = frame_rng(1, 5).random(4)
        frame_rng(1, 4).random(4)
        assert_array_equal(a, frame_rng(1, 5).random(4))
        assert not np.array_equal(a, frame_rng(1, 6).random(4))

    def test_fixed_interleaver_is_a_permutation(self):
        perm = fixed_interleaver(3, 64)
        assert sorted(perm.tolist()) == list(range(64))
        assert_array_equal(perm, fixed_interleaver(3, 64))

    def test_unknown_regime(self):
        cfg = make_config()
        with pytest.raises(ValueError):
            run_trial(code_for(cfg), channel_for(GE), "genie", np.random.default_rng(0))

    def test_outcome_counts(self):
        cfg = make_config(n=4)
        outcome = decode_frame(cfg, 0)
        assert 0 <= outcome.bit_errors <= cfg.k
        assert outcome.frame_error == (outcome.bit_errors > 0)
        assert outcome.contractions > 0


class TestConfig:
    def test_rate_rounds_to_k(self):
        assert make_config(n=4, rate=1 / 3).k == 5
        assert make_config(n=5, rate=1 / 3).k == 11

    def test_explicit_k_wins(self):
        assert make_config(n=4, k=3).k == 3

    def test_rejects_bad_values(self):
        with pytest.raises(ValidationError):
            make_config(regime="genie")
        with pytest.raises(ValidationError):
            make_config(n=3, k=9)
        with pytest.raises(ValidationError):
            ChannelParams(hG=0.0, hB=1.5, pGB=0.1, pBG=0.1)


class TestGrids:
    def test_burst_grid_preset(self):
        grid = load_grid("bursts")
        assert len(grid) == 36
        assert {cfg.n for cfg in grid} == {10}
        assert {cfg.k for cfg in grid} == {512}
        assert {round(cfg.channel.pBG, 3) for cfg in grid} == {row[1] for row in BURST_ROWS}

    def test_length_preset_uses_rate_one_third(self):
        grid = load_grid("lengths")
        assert len(grid) == 14
        assert {cfg.regime for cfg in grid} == {"corr"}
        assert {(cfg.n, cfg.k) for cfg in grid if cfg.family == "polar"} == {
            (4, 5), (5, 11), (6, 21), (7, 43), (8, 85), (9, 171), (10, 341)
        }

    @pytest.mark.parametrize("alias, preset", [("fig2a", "bursts"), ("fig2b", "lengths"), ("fig2cd", "length_bursts")])
    def test_figure_aliases(self, alias, preset):
        assert load_grid(alias) == load_grid(preset)

    def test_fig2a_has_every_burst_point(self):
        assert len(load_grid("fig2a")) == 36

    def test_length_by_burst_preset(self):
        grid = load_grid("length_bursts")
        assert len(grid) == 36
        assert {cfg.n for cfg in grid} == {6, 8, 10}

    @pytest.mark.parametrize(
        "preset, families, regimes, ns",
        [
            ("bursts", ["polar", "conv-polar"], ["base", "int", "corr"], [10]),
            ("length_bursts", ["polar", "conv-polar"], ["corr"], [6, 8, 10]),
        ],
    )
    def test_presets_follow_burst_table(self, preset, families, regimes, ns):
        cols = ["family", "n", "rate", "regime", "hG", "hB", "pGB", "pBG"]
        on_disk = pd.read_csv(PRESET_GRIDS[preset], comment="#", dtype={"rate": str})[cols]
        generated = burst_grid(families, regimes, ns, "1/2")[cols]
        assert on_disk.to_dict(orient="records") == generated.to_dict(orient="records")

    def test_overrides_apply_to_every_row(self):
        grid = load_grid("lengths", max_frames=5, seed=11)
        assert {(cfg.max_frames, cfg.seed) for cfg in grid} == {(5, 11)}

    def test_grid_file_with_optional_columns(self, tmp_path):
        path = tmp_path / "grid.csv"
        path.write_text("family,n,rate,regime,hG,hB,pGB,pBG,k,max_frames\ncpc,3,0.5,base,0,0.9,0.01,0.05,3,20\n")
        (cfg,) = load_grid(path)
        assert (cfg.family, cfg.k, cfg.max_frames) == ("conv-polar", 3, 20)

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "grid.csv"
        path.write_text("family,n,rate\npolar,3,0.5\n")
        with pytest.raises(ValueError):
            load_grid(path)

    def test_missing_grid(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_grid(tmp_path / "none.csv")


class TestSweep:
    def test_empty_grid_writes_header_only(self, tmp_path):
        out = tmp_path / "empty.csv"
        frame = sweep([], out=out)
        assert frame.empty
        assert out.read_text().strip() == ",".join(CSV_COLUMNS + [ERROR_COLUMN])

    def test_failed_point_is_recorded(self):
        stuck = ChannelParams(hG=0.0, hB=0.9, pGB=0.0, pBG=0.0)
        frame = sweep([make_config(channel=stuck, max_frames=10), make_config(max_frames=10)])
        assert len(frame) == 2
        assert "ChannelError" in frame.loc[0, ERROR_COLUMN]
        assert frame.loc[1, ERROR_COLUMN] == ""
        assert frame.loc[1, "frames"] == 10

    def test_rerun_is_byte_identical(self, tmp_path):
        grid = [make_config(max_frames=40), make_config(family="conv-polar", regime="int", max_frames=40)]
        sweep(grid, out=tmp_path / "a.csv")
        sweep(grid, out=tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_result_row_columns(self):
        cfg = make_config()
        row = result_row(cfg, estimate_fer(make_config(max_frames=3), trial=coin_flip))
        assert set(row) == set(CSV_COLUMNS + [ERROR_COLUMN])
        assert row["mean_burst"] == pytest.approx(20.0)


class TestSummarize:
    def _rows(self, fer_corr, ci_corr, fer_base, ci_base):
        base = dict(family="polar", n=10, rate=0.5, hG=0.0, hB=0.9, pGB=0.01, pBG=0.05, error="")
        return pd.DataFrame(
            [
                {**base, "regime": "corr", "fer": fer_corr, "ci_lo": ci_corr[0], "ci_hi": ci_corr[1]},
                {**base, "regime": "base", "fer": fer_base, "ci_lo": ci_base[0], "ci_hi": ci_base[1]},
            ]
        )

    def test_corr_better_and_resolved(self):
        (row,) = summarize(self._rows(0.1, (0.05, 0.15), 0.3, (0.25, 0.35))).to_dict(orient="records")
        assert row["corr_beats_base"]
        assert not row["overlap"]
        assert pd.isna(row["fer_int"])

    def test_corr_worse_with_overlap(self):
        (row,) = summarize(self._rows(0.3, (0.2, 0.4), 0.25, (0.15, 0.35))).to_dict(orient="records")
        assert not row["corr_beats_base"]
        assert row["overlap"]
