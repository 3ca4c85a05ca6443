"""
Successive-cancellation decoding over finite-state channels by contraction
of the encoder circuit against the channel chain.

Four engines compute the same window table
    table[w] = sum over suffixes of P(y, u_<p = prefix, u_[p,q) = w)
with w read little-endian (bit k is position p + k):

  brute_force_marginal   literal enumeration (small N only)
  window_marginal_sweep  per-assignment push-down plus one chain sweep
  trellis_marginal       chain sum over the coset of completions, row by row
  window_marginal_fast   recursive block messages with recycling

The fast engine works on the tree of blocks. A block query (p, q) fixes the
block's inputs [0, p) to their decided values, leaves [p, q) open and sums the
rest. Each child input is a GF(2) form over the parent's inputs; a cached plan
chooses child windows so that the parent's summed inputs map onto the children's
summed inputs uniformly, and enumerates the few remaining shared variables.
Merging two children contracts one memory axis per combination (the d^3 step).

The trellis engine never looks at the circuit's gates. Fixing inputs [0, q)
leaves the codewords offset + span(G rows q..N-1); the rows are brought to a
minimal-span basis (distinct first and last positions) and the chain is swept
once with one state vector per assignment of the rows active at each position.
"""

from __future__ import annotations

import itertools
import logging
import math
from bisect import bisect_left
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np

from polarmem.channels import MPO, FiniteStateChannel, channel_likelihood
from polarmem.codes import Circuit, child_forms, circuit_for, generator_matrix, gf2_basis
from polarmem.config import (
    BRUTE_FORCE_MAX_N,
    DEFAULT_WINDOW,
    MAX_OPEN_AXES,
    MAX_WINDOW,
    TIE_RTOL,
    TRELLIS_MAX_STATES,
)
from polarmem.models import CodeSpec
from polarmem.tensors import Tensor, contract, fix_index, parity, sum_index

logger = logging.getLogger(__name__)

_LN2 = math.log(2.0)


class DecodingError(ValueError):
    """Decoding could not produce a decision (e.g. an all-zero table)."""


class OpenAxisOverflow(DecodingError):
    """A block message would need more open axes than allowed; a scheduling bug."""


# ── Window tables


@dataclass
class MarginalTable:
    """Nonnegative table over 2^w window assignments, stored as values * exp(log_scale)."""

    values: np.ndarray
    log_scale: float = 0.0

    @property
    def width(self) -> int:
        return int(self.values.shape[0]).bit_length() - 1

    def absolute(self) -> np.ndarray:
        return self.values * math.exp(self.log_scale)

    def log_values(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.values) + self.log_scale

    def normalized(self) -> np.ndarray:
        total = self.values.sum()
        if total <= 0:
            raise DecodingError("cannot normalize an all-zero table")
        return self.values / total

    @classmethod
    def rescaled(cls, values: np.ndarray, log_scale: float) -> "MarginalTable":
        top = float(values.max()) if values.size else 0.0
        if top > 0:
            return cls(values / top, log_scale + math.log(top))
        return cls(values, log_scale)


def _window_bounds(prefix: Sequence[int], window: Union[int, Sequence[int]], N: int) -> Tuple[int, int]:
    p = len(prefix)
    if isinstance(window, (int, np.integer)):
        q = p + int(window)
    else:
        positions = list(window)
        if positions != list(range(p, p + len(positions))):
            raise DecodingError(f"window {positions} must be consecutive positions starting at {p}")
        q = p + len(positions)
    if q > N:
        raise DecodingError(f"window [{p}, {q}) runs past N={N}")
    return p, q


# ── Leg states and push-down


@dataclass(frozen=True)
class Fixed:
    bit: int


@dataclass(frozen=True)
class Sum:
    pass


@dataclass(frozen=True)
class Affine:
    """Parity of a set of open variables, xor a constant."""

    vars: FrozenSet[int]
    const: int = 0


LegState = Union[Fixed, Sum, Affine]
SUM = Sum()


def open_leg(j: int) -> Affine:
    return Affine(frozenset({j}), 0)


def _xor(a: LegState, b: LegState) -> LegState:
    if isinstance(a, Fixed) and isinstance(b, Fixed):
        return Fixed(a.bit ^ b.bit)
    if isinstance(a, Fixed):
        a, b = b, a
    if isinstance(b, Fixed):
        return Affine(a.vars, a.const ^ b.bit)
    merged = a.vars ^ b.vars
    if not merged:
        return Fixed(a.const ^ b.const)
    return Affine(merged, a.const ^ b.const)


@dataclass(frozen=True)
class Residual:
    """A summed control feeding a non-summed target: d = sigma xor b stays coupled to c = sigma."""

    sigma: int
    level: int
    gate: Tuple[int, int]


@dataclass(frozen=True)
class PushDownResult:
    legs: Tuple[LegState, ...]
    residuals: Tuple[Residual, ...]


def push_down(
    circuit: Circuit,
    assignment: Sequence[LegState],
    max_open: Optional[int] = None,
) -> PushDownResult:
    """
    Propagate per-input leg states through the circuit to the channel inputs.

    Open variables are numbered by input position; variables introduced for
    residual couplings are numbered from N upwards.
    """
    N = circuit.N
    if len(assignment) != N:
        raise DecodingError(f"assignment has {len(assignment)} legs, circuit has N={N}")
    limit = max_open if max_open is not None else MAX_OPEN_AXES
    legs: List[LegState] = list(assignment)
    residuals: List[Residual] = []
    next_sigma = N

    def _checked(state: LegState) -> LegState:
        if isinstance(state, Affine) and sum(1 for v in state.vars if v < N) > limit:
            raise DecodingError(f"affine leg over {len(state.vars)} open bits exceeds window {limit}")
        return state

    for depth, level in enumerate(circuit.levels):
        for gates in level.sublayers:
            for g in gates:
                a, b = legs[g.control], legs[g.target]
                if isinstance(b, Sum):
                    c, d = a, SUM
                elif isinstance(a, Sum):
                    c = Affine(frozenset({next_sigma}), 0)
                    residuals.append(Residual(next_sigma, depth, (g.control, g.target)))
                    next_sigma += 1
                    d = _xor(c, b)
                else:
                    c, d = a, _xor(a, b)
                legs[g.control], legs[g.target] = c, _checked(d)
        legs = [legs[k] for k in level.route]
    return PushDownResult(tuple(legs), tuple(residuals))


# ── Fast engine: plans


@dataclass(frozen=True)
class _Plan:
    p_left: int
    e_left: int
    p_right: int
    e_right: int
    exponent: int
    sigma_rank: int
    omega_idx: np.ndarray
    left_var: np.ndarray
    right_var: np.ndarray
    onehot: np.ndarray
    left_known: Tuple[int, ...]
    right_known: Tuple[int, ...]


@lru_cache(maxsize=None)
def _prefix_highbits(family: str, M: int) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    out = []
    for forms in child_forms(family, M):
        top, acc = -1, []
        for f in forms:
            top = max(top, f.bit_length() - 1)
            acc.append(top)
        out.append(tuple(acc))
    return out[0], out[1]


def _known_counts(family: str, M: int, p: int) -> Tuple[int, int]:
    """Leading child inputs fully determined by the block's first p inputs."""
    left, right = _prefix_highbits(family, M)
    return bisect_left(left, p), bisect_left(right, p)


def _parity(v: int) -> int:
    return v.bit_count() & 1


@lru_cache(maxsize=None)
def _plan(family: str, M: int, p: int, q: int) -> _Plan:
    left, right = child_forms(family, M)
    half = M // 2
    p_left, p_right = _known_counts(family, M, p)
    known_mask = (1 << p) - 1
    summed = ((1 << M) - 1) ^ ((1 << q) - 1)

    best = None
    for e_left in range(p_left, min(half, p_left + MAX_OPEN_AXES) + 1):
        for e_right in range(p_right, min(half, p_right + MAX_OPEN_AXES) + 1):
            mid = [f & summed for f in left[p_left:e_left] + right[p_right:e_right]]
            # child inputs from `cut` on have distinct lowest bits covering [2*cut, M)
            cut = min(half, max(e_left, e_right, (q + 1) // 2))
            low = (1 << (2 * cut)) - 1
            extra = [f & summed for f in left[e_left:cut] + right[e_right:cut]]
            rank = len(gf2_basis(mid))
            if len(gf2_basis([v & low for v in mid + extra])) != rank + len(extra):
                continue
            cost = (max(e_left - p_left, e_right - p_right), e_left - p_left + e_right - p_right, rank)
            if best is None or cost < best[0]:
                best = (cost, e_left, e_right, mid, rank)
    if best is None:
        raise OpenAxisOverflow(f"no child windows within {MAX_OPEN_AXES} axes for {family} M={M} window [{p}, {q})")

    _, e_left, e_right, mid, rank = best
    exponent = (M - q) - rank - ((half - e_left) + (half - e_right))
    assert exponent >= 0, (family, M, p, q, exponent)
    pivots = sorted(gf2_basis(mid))

    w = q - p
    wl, wr = e_left - p_left, e_right - p_right
    combos = 1 << (w + rank)
    if combos > 1 << MAX_OPEN_AXES:
        raise OpenAxisOverflow(f"{combos} combinations for {family} M={M} window [{p}, {q})")
    omega_idx = np.empty(combos, dtype=np.int64)
    left_var = np.empty(combos, dtype=np.int64)
    right_var = np.empty(combos, dtype=np.int64)
    for c, (omega, kappa) in enumerate(itertools.product(range(1 << w), range(1 << rank))):
        assign = omega << p
        for i, wire in enumerate(pivots):
            if (kappa >> i) & 1:
                assign |= 1 << wire
        omega_idx[c] = omega
        left_var[c] = sum(_parity(left[p_left + j] & assign) << j for j in range(wl))
        right_var[c] = sum(_parity(right[p_right + j] & assign) << j for j in range(wr))
    onehot = np.zeros((combos, 1 << w))
    onehot[np.arange(combos), omega_idx] = 1.0

    return _Plan(
        p_left=p_left,
        e_left=e_left,
        p_right=p_right,
        e_right=e_right,
        exponent=exponent,
        sigma_rank=rank,
        omega_idx=omega_idx,
        left_var=left_var,
        right_var=right_var,
        onehot=onehot,
        left_known=tuple(left[p_left + j] & known_mask for j in range(wl)),
        right_known=tuple(right[p_right + j] & known_mask for j in range(wr)),
    )


# ── Fast engine: state and recursion


@dataclass
class Message:
    """Block message tensor[s_left, s_right, open bits] * exp(log_scale)."""

    tensor: np.ndarray
    log_scale: float = 0.0


@dataclass
class DecodeStats:
    contractions: int = 0  # block merges
    combos: int = 0  # d x d x d products inside merges
    cache_hits: int = 0
    residuals: int = 0  # merges that had to enumerate summed shared variables
    max_entries: int = 0
    per_step: List[int] = field(default_factory=list)


StepHook = Callable[[int, DecodeStats], None]


class DecodeState:
    """
    Decided prefix plus per-block message caches for one frame.

    Every block keeps how many of its inputs are known and their values; a
    block's cache is dropped whenever that assignment grows, so a cached
    message is always keyed by (p, q, values of inputs [0, p)).
    """

    def __init__(self, mpo: MPO, circuit: Circuit, use_cache: bool = True, hook: Optional[StepHook] = None):
        if mpo.N != circuit.N:
            raise DecodingError(f"channel chain has {mpo.N} positions, code has N={circuit.N}")
        self.mpo = mpo
        self.circuit = circuit
        self.family = circuit.family
        self.use_cache = use_cache
        self.hook = hook
        self.stats = DecodeStats()
        n = circuit.n
        self._known_len = [[0] * (1 << level) for level in range(n + 1)]
        self._known_bits = [[0] * (1 << level) for level in range(n + 1)]
        self._cache: Dict[Tuple[int, int], Dict[Tuple[int, int, int], Message]] = {}
        self._max_entries = mpo.d * mpo.d * (1 << MAX_OPEN_AXES)

    @property
    def N(self) -> int:
        return self.circuit.N

    @property
    def position(self) -> int:
        return self._known_len[0][0]

    @property
    def decided(self) -> np.ndarray:
        bits = self._known_bits[0][0]
        return np.array([(bits >> j) & 1 for j in range(self.position)], dtype=np.uint8)

    def advance(self, bits: Sequence[int]) -> None:
        for b in bits:
            if self.position >= self.N:
                raise DecodingError("all positions are already decided")
            self._append(0, 0, int(b) & 1)

    def _append(self, level: int, block: int, bit: int) -> None:
        length = self._known_len[level][block]
        self._known_bits[level][block] |= bit << length
        self._known_len[level][block] = length + 1
        self._cache.pop((level, block), None)
        if level == self.circuit.n:
            return
        M = self.N >> level
        bits = self._known_bits[level][block]
        targets = _known_counts(self.family, M, length + 1)
        for side, (forms, count) in enumerate(zip(child_forms(self.family, M), targets)):
            child = 2 * block + side
            while self._known_len[level + 1][child] < count:
                t = self._known_len[level + 1][child]
                self._append(level + 1, child, _parity(forms[t] & bits))

    def window_marginal(self, p: int, q: int) -> MarginalTable:
        """Root table for window [p, q) given the decided prefix of length p."""
        if p != self.position:
            raise DecodingError(f"window starts at {p} but {self.position} positions are decided")
        if not p <= q <= self.N:
            raise DecodingError(f"bad window [{p}, {q}) for N={self.N}")
        msg = self._query(0, 0, p, q)
        T = msg.tensor
        values = np.einsum("a,abw,b->w", self.mpo.left, T, self.mpo.right)
        return MarginalTable.rescaled(values, msg.log_scale)

    def _query(self, level: int, block: int, p: int, q: int) -> Message:
        if p > self._known_len[level][block]:
            raise DecodingError(f"block ({level}, {block}) queried at p={p} with fewer inputs known")
        bits = self._known_bits[level][block] & ((1 << p) - 1)
        key = (p, q, bits)
        node_cache = self._cache.setdefault((level, block), {})
        if self.use_cache and key in node_cache:
            self.stats.cache_hits += 1
            return node_cache[key]

        if level == self.circuit.n:
            msg = self._leaf(block, p, q, bits)
        else:
            plan = _plan(self.family, self.N >> level, p, q)
            left = self._query(level + 1, 2 * block, plan.p_left, plan.e_left)
            right = self._query(level + 1, 2 * block + 1, plan.p_right, plan.e_right)
            msg = self._merge(plan, left, right, bits)
        if self.use_cache:
            node_cache[key] = msg
        return msg

    def _leaf(self, j: int, p: int, q: int, bits: int) -> Message:
        site = self.mpo.site(j)
        if q == 1 and p == 0:
            data = site.data
        elif q == 1:
            data = fix_index(site, 2, bits & 1).data[:, :, None]
        else:
            data = sum_index(site, 2).data[:, :, None]
        return _rescale(np.array(data), 0.0)

    def _merge(self, plan: _Plan, left: Message, right: Message, bits: int) -> Message:
        c_left = sum(_parity(mask & bits) << j for j, mask in enumerate(plan.left_known))
        c_right = sum(_parity(mask & bits) << j for j, mask in enumerate(plan.right_known))
        L = left.tensor[:, :, plan.left_var ^ c_left]
        R = right.tensor[:, :, plan.right_var ^ c_right]
        merged = np.einsum("abc,bdc->adc", L, R)
        if merged.size > self._max_entries:
            raise OpenAxisOverflow(f"intermediate of {merged.size} entries exceeds d^2 * 2^{MAX_OPEN_AXES}")
        out = merged @ plan.onehot

        self.stats.contractions += 1
        self.stats.combos += len(plan.omega_idx)
        self.stats.max_entries = max(self.stats.max_entries, merged.size)
        if plan.sigma_rank:
            self.stats.residuals += 1
        return _rescale(out, left.log_scale + right.log_scale + plan.exponent * _LN2)


def _rescale(tensor: np.ndarray, log_scale: float) -> Message:
    top = float(tensor.max()) if tensor.size else 0.0
    if top > 0:
        return Message(tensor / top, log_scale + math.log(top))
    return Message(tensor, log_scale)


# ── Engines


def window_marginal_fast(
    state: DecodeState,
    mpo: MPO,
    circuit: Circuit,
    prefix: Sequence[int],
    window: Union[int, Sequence[int]],
) -> MarginalTable:
    """Window table from the recursive engine; `state` is extended to `prefix` if needed."""
    if state.mpo is not mpo or state.circuit is not circuit:
        raise DecodingError("decode state was built for a different chain or circuit")
    p, q = _window_bounds(prefix, window, circuit.N)
    decided = state.decided
    if p < len(decided) or np.any(decided != np.asarray(prefix[: len(decided)], dtype=np.uint8)):
        raise DecodingError("prefix disagrees with the bits already decided in this state")
    state.advance(prefix[len(decided):])
    return state.window_marginal(p, q)


# ── Trellis engine


def minimal_span(rows: Sequence[int]) -> List[int]:
    """
    Basis of span(rows) with pairwise distinct lowest bits and distinct highest bits.

    Dependent rows are dropped. The result is sorted by lowest bit.
    """
    by_start: Dict[int, int] = {}
    for v in rows:
        while v:
            low = (v & -v).bit_length() - 1
            if low not in by_start:
                by_start[low] = v
                break
            v ^= by_start[low]
    out = list(by_start.values())
    while True:
        ends: Dict[int, int] = {}
        clash = None
        for k, v in enumerate(out):
            top = v.bit_length() - 1
            if top in ends:
                clash = (ends[top], k)
                break
            ends[top] = k
        if clash is None:
            break
        a, b = clash
        if (out[a] & -out[a]) > (out[b] & -out[b]):
            a, b = b, a
        # the earlier-starting row keeps its start and loses its end
        out[a] ^= out[b]
    return sorted(out, key=lambda v: v & -v)


@lru_cache(maxsize=None)
def _generator_rows(family: str, n: int) -> Tuple[int, ...]:
    G = generator_matrix(circuit_for(family, n))
    return tuple(int("".join(str(b) for b in row[::-1]), 2) for row in G)


@lru_cache(maxsize=None)
def completion_rows(family: str, n: int, q: int) -> Tuple[int, ...]:
    """Minimal-span basis of the codewords reachable from inputs [q, N)."""
    return tuple(minimal_span(_generator_rows(family, n)[q:]))


def _trellis_sum(mpo: MPO, offset: np.ndarray, rows: Sequence[int]) -> Tuple[float, float]:
    """Sum of the chain over x in offset + span(rows); returns (value, log_scale)."""
    born = {(r & -r).bit_length() - 1: 1 << k for k, r in enumerate(rows)}
    dies = {r.bit_length() - 1: 1 << k for k, r in enumerate(rows)}
    frontier: Dict[int, np.ndarray] = {0: np.asarray(mpo.left, dtype=float)}
    log_scale = 0.0
    for j in range(mpo.N):
        if j in born:
            bit = born[j]
            frontier = {**frontier, **{mask | bit: v for mask, v in frontier.items()}}
            if len(frontier) > TRELLIS_MAX_STATES:
                raise DecodingError(f"trellis needs {len(frontier)} states at position {j}")
        column = sum(1 << k for k, r in enumerate(rows) if (r >> j) & 1)
        # legs[c, b] is the site with x = c xor b
        legs = contract(parity(), [2], mpo.site(j), [2]).data
        b = int(offset[j])
        frontier = {mask: v @ legs[_parity(mask & column), b] for mask, v in frontier.items()}
        if j in dies:
            bit = dies[j]
            merged: Dict[int, np.ndarray] = {}
            for mask, v in frontier.items():
                key = mask & ~bit
                merged[key] = merged[key] + v if key in merged else v
            frontier = merged
        top = max(float(v.max()) for v in frontier.values())
        if top <= 0:
            return 0.0, 0.0
        frontier = {mask: v / top for mask, v in frontier.items()}
        log_scale += math.log(top)
    return float(sum(v @ mpo.right for v in frontier.values())), log_scale


def _combine(values: np.ndarray, logs: np.ndarray) -> MarginalTable:
    with np.errstate(invalid="ignore"):
        live = values > 0
    if not np.any(live):
        return MarginalTable(np.zeros_like(values), 0.0)
    top = logs[live].max()
    return MarginalTable.rescaled(np.where(live, values * np.exp(logs - top), 0.0), top)


def _trellis_entry(mpo: MPO, circuit: Circuit, bits: Sequence[int]) -> Tuple[float, float]:
    q = len(bits)
    offset = circuit.apply(list(bits) + [0] * (circuit.N - q))
    return _trellis_sum(mpo, offset, completion_rows(circuit.family, circuit.n, q))


def trellis_marginal(
    mpo: MPO,
    circuit: Circuit,
    prefix: Sequence[int],
    window: Union[int, Sequence[int]],
) -> MarginalTable:
    """Window table by summing the chain over each assignment's coset of completions."""
    if mpo.N != circuit.N:
        raise DecodingError(f"channel chain has {mpo.N} positions, code has N={circuit.N}")
    p, q = _window_bounds(prefix, window, circuit.N)
    prefix = [int(b) for b in prefix]
    values = np.empty(1 << (q - p))
    logs = np.empty(1 << (q - p))
    for omega in range(1 << (q - p)):
        bits = prefix + [(omega >> k) & 1 for k in range(q - p)]
        values[omega], logs[omega] = _trellis_entry(mpo, circuit, bits)
    return _combine(values, logs)


# ── Sweep engine


def _chain_sweep(mpo: MPO, legs: Sequence[LegState]) -> Tuple[float, float]:
    """Left-to-right contraction with each x leg fixed or summed; returns (value, log_scale)."""
    v = Tensor(mpo.left)
    log_scale = 0.0
    for j, leg in enumerate(legs):
        site = mpo.site(j)
        mat = fix_index(site, 2, leg.bit) if isinstance(leg, Fixed) else sum_index(site, 2)
        v = contract(v, [0], mat, [0])
        top = float(v.data.max())
        if top > 0:
            v = v * (1.0 / top)
            log_scale += math.log(top)
    return float(v.data @ mpo.right), log_scale


def window_marginal_sweep(
    mpo: MPO,
    circuit: Circuit,
    prefix: Sequence[int],
    window: Union[int, Sequence[int]],
    stats: Optional[DecodeStats] = None,
) -> MarginalTable:
    """
    Window table by pushing each assignment down the circuit and sweeping the chain.

    Assignments whose push-down leaves a residual parity coupling are summed
    on the trellis of their completions instead.
    """
    N = circuit.N
    p, q = _window_bounds(prefix, window, N)
    prefix = [int(b) for b in prefix]
    values = np.empty(1 << (q - p))
    logs = np.empty(1 << (q - p))
    for omega in range(1 << (q - p)):
        bits = prefix + [(omega >> k) & 1 for k in range(q - p)]
        assignment = [Fixed(b) for b in bits] + [SUM] * (N - q)
        result = push_down(circuit, assignment)
        if result.residuals:
            if stats is not None:
                stats.residuals += 1
            values[omega], logs[omega] = _trellis_entry(mpo, circuit, bits)
        else:
            values[omega], logs[omega] = _chain_sweep(mpo, result.legs)
    return _combine(values, logs)


def brute_force_marginal(
    spec: Union[CodeSpec, Circuit],
    ch: FiniteStateChannel,
    y: Sequence[int],
    prefix: Sequence[int],
    window: Union[int, Sequence[int]],
) -> MarginalTable:
    """Enumerate every suffix and sum W_N(y | encode(u)); N <= 12."""
    circuit = spec if isinstance(spec, Circuit) else circuit_for(spec.family, spec.n)
    N = circuit.N
    if N > BRUTE_FORCE_MAX_N:
        raise DecodingError(f"brute force limited to N <= {BRUTE_FORCE_MAX_N}, got N={N}")
    if len(y) != N:
        raise DecodingError(f"received word has {len(y)} bits, code has N={N}")
    p, q = _window_bounds(prefix, window, N)
    G = generator_matrix(circuit).astype(np.int64)
    values = np.zeros(1 << (q - p))
    for omega in range(1 << (q - p)):
        for suffix in itertools.product((0, 1), repeat=N - q):
            u = np.array(list(prefix) + [(omega >> k) & 1 for k in range(q - p)] + list(suffix), dtype=np.int64)
            values[omega] += channel_likelihood(ch, (u @ G) % 2, y)
    return MarginalTable(values, 0.0)


# ── SC decoding


@dataclass
class DecodeResult:
    u_hat: np.ndarray
    message: np.ndarray
    stats: DecodeStats
    tables: List[Tuple[int, MarginalTable]] = field(default_factory=list)


def _lex_key(idx: int, width: int) -> Tuple[int, ...]:
    return tuple((idx >> k) & 1 for k in range(width))


def _decide(table: MarginalTable, p: int, q: int, frozen: set, frozen_value: int) -> int:
    width = q - p
    allowed = [
        idx
        for idx in range(1 << width)
        if all(((idx >> k) & 1) == frozen_value for k in range(width) if p + k in frozen)
    ]
    vals = table.values[allowed]
    top = vals.max()
    if not np.isfinite(top) or top <= 0:
        raise DecodingError(f"all-zero table for window [{p}, {q}) (log scale {table.log_scale:.3g})")
    ties = [idx for idx, v in zip(allowed, vals) if v >= top * (1.0 - TIE_RTOL)]
    return min(ties, key=lambda idx: _lex_key(idx, width))


def sc_decode(
    spec: CodeSpec,
    mpo: MPO,
    engine: str = "fast",
    window_size: Optional[int] = None,
    keep_tables: bool = False,
    use_cache: bool = True,
    hook: Optional[StepHook] = None,
) -> DecodeResult:
    """
    Decide the inputs window by window in natural order.

    Frozen positions are forced; windows made only of frozen positions are
    skipped. Inside a window the free bits are maximised jointly, near-ties
    going to the lexicographically smallest assignment.
    """
    circuit = circuit_for(spec.family, spec.n)
    N = spec.N
    if mpo.N != N:
        raise DecodingError(f"received word has {mpo.N} bits, code has N={N}")
    if engine not in ("fast", "sweep"):
        raise DecodingError(f"unknown engine '{engine}' (expected fast or sweep)")
    W = window_size or DEFAULT_WINDOW[spec.family]
    if not 1 <= W <= MAX_WINDOW:
        raise DecodingError(f"window size {W} outside [1, {MAX_WINDOW}]")

    frozen = set(spec.frozen)
    state = DecodeState(mpo, circuit, use_cache=use_cache)
    tables: List[Tuple[int, MarginalTable]] = []
    for step, p in enumerate(range(0, N, W)):
        q = min(p + W, N)
        before = state.stats.contractions
        if all(j in frozen for j in range(p, q)):
            state.advance([spec.frozen_value] * (q - p))
            continue
        if engine == "fast":
            table = state.window_marginal(p, q)
        else:
            table = window_marginal_sweep(mpo, circuit, state.decided, q - p, stats=state.stats)
        idx = _decide(table, p, q, frozen, spec.frozen_value)
        if keep_tables:
            tables.append((p, table))
        state.advance([(idx >> k) & 1 for k in range(q - p)])
        state.stats.per_step.append(state.stats.contractions - before)
        if hook is not None:
            hook(step, state.stats)

    u_hat = state.decided
    message = u_hat[list(spec.free)] if spec.free else np.zeros(0, dtype=np.uint8)
    logger.debug(
        f"[decode] {spec.family} N={N} W={W} engine={engine}: {state.stats.contractions} merges, "
        f"{state.stats.cache_hits} cache hits"
    )
    return DecodeResult(u_hat=u_hat, message=message, stats=state.stats, tables=tables)
