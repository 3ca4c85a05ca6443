from pathlib import Path
import os
from dotenv import load_dotenv

load_dotenv()

# Base paths
BASE_DIR = Path(__file__).resolve().parent
PROJECT_ROOT = BASE_DIR.parent
DATA_DIR = PROJECT_ROOT / "data"
GRIDS_DIR = DATA_DIR / "grids"
CHANNELS_DIR = DATA_DIR / "channels"
RESULTS_DIR = PROJECT_ROOT / "results"

# Preset sweep grids (plain CSV, '#' comments allowed)
PRESET_GRIDS = {
    "bursts": GRIDS_DIR / "bursts.csv",
    "lengths": GRIDS_DIR / "lengths.csv",
    "length_bursts": GRIDS_DIR / "length_bursts.csv",
    # figure-style aliases for the same grids
    "fig2a": GRIDS_DIR / "bursts.csv",
    "fig2b": GRIDS_DIR / "lengths.csv",
    "fig2cd": GRIDS_DIR / "length_bursts.csv",
}

# Reproducibility / parallelism (overridable from the environment)
DEFAULT_SEED = int(os.getenv("POLARMEM_SEED", "20190101"))
DEFAULT_WORKERS = int(os.getenv("POLARMEM_WORKERS", "1"))

# Code families
FAMILIES = ("polar", "conv-polar")
FAMILY_ALIASES = {"pc": "polar", "cpc": "conv-polar"}

# --- Decoder ---
# Maximum number of open data-bit axes a block message may carry
MAX_OPEN_AXES = 6
# Largest decode window the CLI and sc_decode accept
MAX_WINDOW = 4
# Default decode window per family (conv-polar decodes 3 bits jointly)
DEFAULT_WINDOW = {"polar": 1, "conv-polar": 3}
# Brute-force oracle guard (2^N enumerations)
BRUTE_FORCE_MAX_N = 12
# Table entries within this relative distance of the maximum count as ties
TIE_RTOL = 1e-9
# Frontier size at which the trellis engine gives up
TRELLIS_MAX_STATES = 1 << 16

# --- Simulation ---
MAX_FRAME_ERRORS = 100
MAX_FRAMES = 100_000
# Frames handed to a worker at once; also the early-stop granularity
FRAME_BATCH = 64
# Two-sided 95% normal quantile for Wilson intervals
WILSON_Z = 1.959964
REGIMES = ("base", "int", "corr")

CSV_COLUMNS = [
    "family", "n", "rate", "regime",
    "hG", "hB", "pGB", "pBG", "mean_burst",
    "frames", "frame_errors", "bit_errors",
    "fer", "ci_lo", "ci_hi", "seed", "seconds",
]
# Extra trailing column carrying per-row failures
ERROR_COLUMN = "error"

# --- Gilbert channel grid ---
# Bad-state crossover used by every burst-length experiment
BURST_H = 0.9
# (mean burst length, pBG, pGB); all rows have rho = pBG / pGB = 5.
# NOTE: burst length 13 uses pBG = 0.075 (not 0.750) so that 1/pBG ~ 13 and rho = 5.
BURST_ROWS = (
    (2.4, 0.400, 0.080),
    (4.0, 0.250, 0.050),
    (7.0, 0.145, 0.029),
    (13.0, 0.075, 0.015),
    (20.0, 0.050, 0.010),
    (40.0, 0.025, 0.005),
)
