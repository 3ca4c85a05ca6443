"""
Self-checks run by `polarmem verify`.

quick: CNOT identities, chain normalization, oracle agreement for N <= 8
full:  quick plus N = 64 agreement of the fast and trellis engines,
       degenerate-memory decoding over 10^3 frames per family,
       the N log N merge-count fit and the d^3 wall-time ratio
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from typing import Callable, List, Optional

import numpy as np

from polarmem.channels import (
    FiniteStateChannel,
    bsc,
    channel_likelihood,
    error_mpo,
    evidence_mpo,
    gilbert_elliott,
    lift_memoryless,
    random_channel,
    sample_transmission,
)
from polarmem.codes import circuit_for, first_error_profile
from polarmem.decoder import brute_force_marginal, sc_decode, trellis_marginal, window_marginal_sweep
from polarmem.models import CheckReport, CheckResult, CodeSpec
from polarmem.tensors import Tensor, cnot, fix_index, ones, outer, point, sum_index

logger = logging.getLogger(__name__)

FAMILIES = ("polar", "conv-polar")

# frames per family for the degenerate-memory check under --level full
FULL_DEGENERATE_FRAMES = 1000


def rel_close(a: np.ndarray, b: np.ndarray, rtol: float) -> bool:
    """Max abs difference within rtol of the largest reference entry."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = max(float(np.max(np.abs(b))), 1e-300)
    return bool(np.max(np.abs(a - b)) <= rtol * scale)


def _timed(name: str, fn: Callable[[], str]) -> CheckResult:
    started = time.perf_counter()
    try:
        detail = fn()
        passed = True
    except AssertionError as exc:
        detail, passed = str(exc) or "assertion failed", False
    except Exception as exc:
        detail, passed = f"{type(exc).__name__}: {exc}", False
    seconds = time.perf_counter() - started
    logger.info(f"[verify] {'PASS' if passed else 'FAIL'} {name} ({seconds:.2f}s) {detail}")
    return CheckResult(name=name, passed=passed, detail=detail, seconds=round(seconds, 3))


# ── Identity and normalization checks


def cnot_identities(gate: Optional[Tensor] = None) -> str:
    """Sum-both-outputs, sum-target and fixed-input identities, bit-exact."""
    gate = gate if gate is not None else cnot()
    both = sum_index(sum_index(gate, 3), 2)
    assert np.array_equal(both.data, outer(ones(2), ones(2)).data), "summing both outputs is not ones x ones"

    wire = sum_index(gate, 3)  # (a, b, c)
    expected = np.einsum("ac,b->abc", np.eye(2), np.ones(2))
    assert np.array_equal(wire.data, expected), "summing the target output does not leave an identity wire"

    for a, b in itertools.product((0, 1), repeat=2):
        fixed = fix_index(fix_index(gate, 0, a), 0, b)
        assert np.array_equal(fixed.data, outer(point(a), point(a ^ b)).data), f"fixed inputs ({a},{b}) misplaced"
    return "16 entries exact"


def chain_normalization(ch: FiniteStateChannel, N: int) -> str:
    """sum_y W_N(y | x) = 1 for every x of length N."""
    worst = 0.0
    words = [np.array(w) for w in itertools.product((0, 1), repeat=N)]
    for x in words:
        total = sum(channel_likelihood(ch, x, y) for y in words)
        worst = max(worst, abs(total - 1.0))
    assert worst <= 1e-12, f"normalization off by {worst:.3g}"
    return f"max deviation {worst:.2g} over {len(words)} inputs"


def error_chain_normalization(ch: FiniteStateChannel, N: int) -> str:
    total = error_mpo(ch, N).contract_summed()
    assert abs(total - 1.0) <= 1e-12, f"error chain sums to {total}"
    return f"{total:.15f}"


# ── Engine agreement


def oracle_agreement(N_values, dims, frames: int, rng: np.random.Generator, rtol: float = 1e-9) -> str:
    """Every SC-step table of the fast, sweep and trellis engines equals brute-force enumeration."""
    compared = 0
    for N, d, family in itertools.product(N_values, dims, FAMILIES):
        n = N.bit_length() - 1
        spec = CodeSpec(family=family, n=n)
        circuit = circuit_for(family, n)
        for _ in range(frames):
            ch = random_channel(d, rng)
            y = rng.integers(0, 2, size=N)
            mpo = evidence_mpo(ch, y)
            result = sc_decode(spec, mpo, keep_tables=True)
            for p, table in result.tables:
                prefix = result.u_hat[:p]
                width = table.width
                brute = brute_force_marginal(circuit, ch, y, prefix, width)
                sweep = window_marginal_sweep(mpo, circuit, prefix, width)
                trellis = trellis_marginal(mpo, circuit, prefix, width)
                assert rel_close(table.absolute(), brute.values, rtol), f"fast != brute ({family} N={N} d={d} p={p})"
                assert rel_close(sweep.absolute(), brute.values, rtol), f"sweep != brute ({family} N={N} d={d} p={p})"
                assert rel_close(trellis.absolute(), brute.values, rtol), f"trellis != brute ({family} N={N} d={d} p={p})"
                compared += 1
    return f"{compared} tables"


def cross_engine(N: int, d: int, frames: int, rng: np.random.Generator, rtol: float = 1e-9) -> str:
    """Fast-engine tables against the trellis and sweep engines, which share no code with it."""
    n = N.bit_length() - 1
    compared = 0
    for family in FAMILIES:
        spec = CodeSpec(family=family, n=n)
        circuit = circuit_for(family, n)
        for _ in range(frames):
            mpo = evidence_mpo(random_channel(d, rng), rng.integers(0, 2, size=N))
            result = sc_decode(spec, mpo, keep_tables=True)
            for p, table in result.tables:
                prefix = result.u_hat[:p]
                for name, other in (
                    ("trellis", trellis_marginal(mpo, circuit, prefix, table.width)),
                    ("sweep", window_marginal_sweep(mpo, circuit, prefix, table.width)),
                ):
                    shift = other.log_scale - table.log_scale
                    ok = rel_close(other.values * math.exp(shift), table.values, rtol)
                    assert ok, f"{family} step {p}: fast != {name}"
                compared += 1
    return f"{compared} tables"


def construction_n2() -> str:
    log_e = first_error_profile("polar", 1, error_mpo(lift_memoryless(bsc(0.1)), 2))
    e = np.exp(log_e)
    assert abs(e[0] - 0.18) <= 1e-12 and abs(e[1] - 0.01) <= 1e-12, f"E = {e.tolist()}"
    return f"E = ({e[0]:.4f}, {e[1]:.4f})"


def degenerate_memory(N: int, frames: int, rng: np.random.Generator) -> str:
    n = N.bit_length() - 1
    h = 0.08
    ch = gilbert_elliott(h, h, 0.02, 0.1)
    flat = lift_memoryless(bsc(h))
    for family in FAMILIES:
        spec = CodeSpec(family=family, n=n, frozen=range(N // 2))
        for _ in range(frames):
            x = circuit_for(family, n).apply(np.where(np.arange(N) < N // 2, 0, rng.integers(0, 2, size=N)))
            y, _ = sample_transmission(ch, x, rng)
            a = sc_decode(spec, evidence_mpo(ch, y)).u_hat
            b = sc_decode(spec, evidence_mpo(flat, y)).u_hat
            assert np.array_equal(a, b), f"{family}: memory-free channel decodes differently"
    return f"{2 * frames} frames identical"


def merge_count_fit(family: str, N_values, rng: np.random.Generator, tol: float = 0.2) -> str:
    """Merges for a full decode divided by N log2 N stay within tol of their mean."""
    ratios = []
    for N in N_values:
        n = N.bit_length() - 1
        ch = random_channel(2, rng)
        mpo = evidence_mpo(ch, rng.integers(0, 2, size=N))
        stats = sc_decode(CodeSpec(family=family, n=n), mpo).stats
        ratios.append(stats.contractions / (N * n))
    c = float(np.mean(ratios))
    assert all(abs(r - c) <= tol * c for r in ratios), f"merge ratios {np.round(ratios, 3).tolist()} vs c={c:.3f}"
    return f"c = {c:.3f} ({', '.join(f'{r:.3f}' for r in ratios)})"


def memory_scaling(N: int, rng: np.random.Generator, bound: float = 10.0) -> str:
    timings = {}
    for d in (2, 4):
        mpo = evidence_mpo(random_channel(d, rng), rng.integers(0, 2, size=N))
        started = time.perf_counter()
        sc_decode(CodeSpec(family="polar", n=N.bit_length() - 1), mpo)
        timings[d] = time.perf_counter() - started
    ratio = timings[4] / max(timings[2], 1e-9)
    assert ratio <= bound, f"d=4 / d=2 wall time ratio {ratio:.2f} > {bound}"
    return f"ratio {ratio:.2f}"


# ── Suites


def run_checks(level: str = "quick", seed: int = 0) -> CheckReport:
    rng = np.random.default_rng(seed)
    ge = gilbert_elliott(0.0, 0.9, 0.01, 0.05)
    checks: List[CheckResult] = [
        _timed("cnot identities", cnot_identities),
        _timed("chain normalization (GE, N=6)", lambda: chain_normalization(ge, 6)),
        _timed("chain normalization (random d=3, N=6)", lambda: chain_normalization(random_channel(3, rng), 6)),
        _timed("error chain normalization", lambda: error_chain_normalization(ge, 16)),
        _timed("first-error values N=2", construction_n2),
        _timed("oracle agreement N<=8", lambda: oracle_agreement((4, 8), (1, 2, 3), 2, rng)),
    ]
    if level == "full":
        checks += [
            _timed("cross-engine N=64 d=3", lambda: cross_engine(64, 3, 5, rng)),
            _timed(
                f"degenerate memory N=256 ({FULL_DEGENERATE_FRAMES} frames)",
                lambda: degenerate_memory(256, FULL_DEGENERATE_FRAMES, rng),
            ),
            _timed("merge count fit (polar)", lambda: merge_count_fit("polar", (64, 128, 256, 512, 1024), rng)),
            _timed("merge count fit (conv-polar)", lambda: merge_count_fit("conv-polar", (64, 128, 256, 512, 1024), rng)),
            _timed("memory scaling d=4 vs d=2", lambda: memory_scaling(256, rng)),
        ]
    return CheckReport(level=level, checks=checks)
