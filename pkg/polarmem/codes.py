"""
Polar and convolutional polar encoders as explicit CNOT circuits, plus
frozen-set construction from first-undetected-error probabilities.

Wire conventions (0-based, per block of size M at offset o):
  - kernel sublayer: CNOT(control=o+2i+1, target=o+2i), i = 0..M/2-1
  - conv-polar shift sublayer: CNOT(control=o+2i+2, target=o+2i+1),
    i = 0..M/2-2 (open boundary, no wrap-around gate)
  - routing: even local positions go to the left half-block, odd ones to
    the right half-block, then each half recurses.
The control is the later wire of each pair because inputs are decided in
natural order; this is the orientation under which the bit channels polarize.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from dotenv import dotenv_values

from polarmem.channels import (
    FiniteStateChannel,
    average_crossover,
    bsc,
    error_mpo,
    lift_memoryless,
)
from polarmem.models import CodeSpec

logger = logging.getLogger(__name__)


class CodeError(ValueError):
    """Inconsistent code parameters, messages or code files."""


class Gate(NamedTuple):
    control: int
    target: int


@dataclass(frozen=True)
class Level:
    """One polarization level: CNOT sublayers followed by the odd/even routing."""

    block_size: int
    sublayers: Tuple[Tuple[Gate, ...], ...]
    route: Tuple[int, ...]  # new wire k takes the value of old wire route[k]

    @cached_property
    def _arrays(self):
        subs = [
            (np.array([g.control for g in gates], dtype=np.int64), np.array([g.target for g in gates], dtype=np.int64))
            for gates in self.sublayers
        ]
        return subs, np.array(self.route, dtype=np.int64)


@dataclass(frozen=True)
class Circuit:
    family: str
    n: int
    levels: Tuple[Level, ...]

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def gate_count(self) -> int:
        return sum(len(gates) for level in self.levels for gates in level.sublayers)

    def apply(self, u: Sequence[int]) -> np.ndarray:
        """Push an input word through the circuit (GF(2) arithmetic)."""
        bits = np.array(u, dtype=np.uint8)
        if bits.shape != (self.N,):
            raise CodeError(f"expected {self.N} input bits, got shape {bits.shape}")
        for level in self.levels:
            subs, route = level._arrays
            for controls, targets in subs:
                bits[targets] ^= bits[controls]
            bits = bits[route]
        return bits


def _block_gates(family: str, M: int, offset: int = 0) -> Tuple[Tuple[Gate, ...], ...]:
    kernel = tuple(Gate(offset + 2 * i + 1, offset + 2 * i) for i in range(M // 2))
    if family == "polar":
        return (kernel,)
    if family == "conv-polar":
        shift = tuple(Gate(offset + 2 * i + 2, offset + 2 * i + 1) for i in range(M // 2 - 1))
        return (kernel, shift)
    raise CodeError(f"unknown code family '{family}'")


def _block_route(M: int, offset: int = 0) -> List[int]:
    return [offset + 2 * k for k in range(M // 2)] + [offset + 2 * k + 1 for k in range(M // 2)]


@lru_cache(maxsize=None)
def circuit_for(family: str, n: int) -> Circuit:
    if n < 1:
        raise CodeError(f"n must be at least 1, got {n}")
    N = 1 << n
    levels = []
    for level in range(n):
        M = N >> level
        per_block = [_block_gates(family, M, b * M) for b in range(1 << level)]
        sublayers = tuple(
            tuple(g for block in per_block for g in block[s]) for s in range(len(per_block[0]))
        )
        route = tuple(k for b in range(1 << level) for k in _block_route(M, b * M))
        levels.append(Level(block_size=M, sublayers=sublayers, route=route))
    return Circuit(family=family, n=n, levels=tuple(levels))


def polar_circuit(n: int) -> Circuit:
    return circuit_for("polar", n)


def cpc_circuit(n: int) -> Circuit:
    return circuit_for("conv-polar", n)


@lru_cache(maxsize=None)
def child_forms(family: str, M: int) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    """
    Linear forms of a block's child inputs over the block's own inputs.

    Returns (left, right): left[t] is a bitmask over the M block inputs whose
    parity is input t of the left child; likewise for the right child.
    """
    forms = [1 << j for j in range(M)]
    for gates in _block_gates(family, M):
        for g in gates:
            forms[g.target] ^= forms[g.control]
    routed = [forms[k] for k in _block_route(M)]
    left, right = tuple(routed[: M // 2]), tuple(routed[M // 2:])
    for t in range(M // 2):
        # the decoder's tail-independence argument relies on this staircase
        assert left[t] & -left[t] == 1 << (2 * t), (family, M, t)
        assert right[t] & -right[t] == 1 << (2 * t + 1), (family, M, t)
    return left, right


def generator_matrix(circuit: Circuit) -> np.ndarray:
    """Row i is the codeword of the i-th unit input."""
    return np.stack([circuit.apply(row) for row in np.eye(circuit.N, dtype=np.uint8)])


def gf2_rank(rows: Iterable[int]) -> int:
    """Rank over GF(2) of integer bit-vectors."""
    return len(gf2_basis(rows))


def gf2_basis(rows: Iterable[int]) -> dict:
    """Echelon basis keyed by leading (highest) bit."""
    basis: dict = {}
    for v in rows:
        while v:
            top = v.bit_length() - 1
            if top not in basis:
                basis[top] = v
                break
            v ^= basis[top]
    return basis


# ── Encoding


def input_word(spec: CodeSpec, message: Sequence[int]) -> np.ndarray:
    """Scatter message bits into the free positions; frozen positions carry frozen_value."""
    message = np.asarray(message, dtype=np.uint8).reshape(-1)
    if len(message) != spec.k:
        raise CodeError(f"message has {len(message)} bits, code carries k={spec.k}")
    u = np.full(spec.N, spec.frozen_value, dtype=np.uint8)
    u[list(spec.free)] = message
    return u


def encode(spec: CodeSpec, message: Sequence[int]) -> np.ndarray:
    return circuit_for(spec.family, spec.n).apply(input_word(spec, message))


# ── Construction


def first_error_profile(family: str, n: int, errmpo) -> np.ndarray:
    """
    Natural-log first-error probabilities log E(u_i) for every position.

    A single successive-cancellation pass with all decisions forced to 0:
    step i reads the table entry with the prefix 0, u_i = 1 and the suffix
    summed, so the block messages of earlier steps are recycled.
    """
    from polarmem.decoder import DecodeState

    circuit = circuit_for(family, n)
    if errmpo.N != circuit.N:
        raise CodeError(f"error chain has {errmpo.N} positions, code has N={circuit.N}")
    state = DecodeState(errmpo, circuit)
    log_e = np.empty(circuit.N)
    for i in range(circuit.N):
        table = state.window_marginal(i, i + 1)
        log_e[i] = table.log_values()[1]
        state.advance([0])
    return log_e


def first_error_probability(spec: CodeSpec, errmpo, i: int) -> float:
    """E(u_i) for one (0-based) position."""
    from polarmem.decoder import DecodeState

    if not 0 <= i < spec.N:
        raise CodeError(f"position {i} outside [0, {spec.N})")
    state = DecodeState(errmpo, circuit_for(spec.family, spec.n), use_cache=False)
    state.advance([0] * i)
    return float(state.window_marginal(i, i + 1).absolute()[1])


def construction_chain(channel: FiniteStateChannel, N: int, mode: str):
    """Error chain used to rank positions: the true channel or its i.i.d. proxy."""
    if mode == "corr":
        return error_mpo(channel, N)
    if mode == "iid":
        return error_mpo(lift_memoryless(bsc(average_crossover(channel))), N)
    raise CodeError(f"unknown construction mode '{mode}' (expected iid or corr)")


def frozen_from_profile(log_e: np.ndarray, k: int) -> Tuple[int, ...]:
    """Freeze the N - k largest E values; ties freeze the larger index first."""
    N = len(log_e)
    if not 0 <= k <= N:
        raise CodeError(f"k={k} outside [0, {N}]")
    # rounded so that values equal up to float noise count as ties
    key = np.round(np.asarray(log_e, dtype=float), 9)
    order = sorted(range(N), key=lambda i: (-key[i], -i))
    return tuple(sorted(order[: N - k]))


def construct_frozen_set(
    family: str,
    n: int,
    k: int,
    channel: FiniteStateChannel,
    mode: str = "corr",
) -> CodeSpec:
    N = 1 << n
    if not 0 <= k <= N:
        raise CodeError(f"k={k} outside [0, {N}]")
    log_e = first_error_profile(family, n, construction_chain(channel, N, mode))
    spec = CodeSpec(family=family, n=n, frozen=frozen_from_profile(log_e, k))
    logger.info(f"[construct] {family} N={N} k={k} mode={mode}: froze {len(spec.frozen)} positions")
    return spec


# ── Code files


def write_code_file(spec: CodeSpec, path: Union[str, Path], mode: Optional[str] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"family={spec.family}", f"n={spec.n}", f"k={spec.k}", f"frozen_value={spec.frozen_value}"]
    if mode:
        lines.append(f"mode={mode}")
    lines.append("# frozen positions, 1-based, one per line")
    lines.extend(str(i + 1) for i in spec.frozen)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_code_file(path: Union[str, Path]) -> CodeSpec:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"code file not found: {path}")
    header, positions = [], []
    for raw in path.read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" in line:
            header.append(line)
        else:
            try:
                positions.append(int(line) - 1)
            except ValueError as exc:
                raise CodeError(f"{path.name}: bad frozen position '{line}'") from exc
    values = dotenv_values(stream=io.StringIO("\n".join(header)))
    try:
        spec = CodeSpec(family=values["family"], n=int(values["n"]), frozen=positions)
    except KeyError as exc:
        raise CodeError(f"{path.name}: missing header field {exc}") from exc
    if len(positions) != len(set(positions)):
        raise CodeError(f"{path.name}: duplicate frozen positions")
    if values.get("k") is not None and int(values["k"]) != spec.k:
        raise CodeError(f"{path.name}: header k={values['k']} but {len(positions)} frozen of N={spec.N}")
    return spec
