"""
Memoryless and finite-state (Markov) binary channels.

State convention: q[s_next][s_prev] is column-stochastic and the output law
p[y][x][s] uses the state *before* the transition. For Gilbert-Elliott
channels state 0 is Good and state 1 is Bad.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import networkx as nx
import numpy as np
from dotenv import dotenv_values

from polarmem.tensors import Tensor

logger = logging.getLogger(__name__)

_ATOL = 1e-12
GOOD, BAD = 0, 1


class ChannelError(ValueError):
    """Invalid channel parameters or an unsupported operation for this channel."""


class UnboundedBurstError(ChannelError):
    """A Gilbert-Elliott state never leaves, so its mean sojourn is infinite."""


def _check_prob(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ChannelError(f"{name} must lie in [0, 1], got {value}")
    return value


@dataclass(frozen=True)
class MemorylessChannel:
    """w[y][x] = W(Y=y | X=x)."""

    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64)
        if w.shape != (2, 2):
            raise ChannelError(f"memoryless table must be 2x2, got {w.shape}")
        if np.any(w < 0) or np.any(w > 1) or not np.allclose(w.sum(axis=0), 1.0, atol=_ATOL):
            raise ChannelError(f"columns of w must be distributions, got {w.tolist()}")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)


@dataclass(frozen=True)
class FiniteStateChannel:
    """
    Binary-input binary-output channel with d hidden states.

    p: shape (2, 2, d), p[y][x][s]
    q: shape (d, d),    q[s_next][s_prev]
    init: shape (d,),   P(S_0)
    """

    p: np.ndarray
    q: np.ndarray
    init: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=np.float64)
        q = np.array(self.q, dtype=np.float64)
        init = np.array(self.init, dtype=np.float64)
        d = q.shape[0] if q.ndim == 2 else 0
        if d < 1 or q.shape != (d, d):
            raise ChannelError(f"q must be a square d x d table, got shape {q.shape}")
        if p.shape != (2, 2, d):
            raise ChannelError(f"p must have shape (2, 2, {d}), got {p.shape}")
        if init.shape != (d,):
            raise ChannelError(f"init must have length {d}, got shape {init.shape}")
        for name, arr in (("p", p), ("q", q), ("init", init)):
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise ChannelError(f"{name} has negative or non-finite entries")
        if not np.allclose(q.sum(axis=0), 1.0, atol=1e-9):
            raise ChannelError(f"columns of q must sum to 1, got {q.sum(axis=0).tolist()}")
        if not np.allclose(p.sum(axis=0), 1.0, atol=1e-9):
            raise ChannelError("p[., x, s] must sum to 1 over y")
        if not np.isclose(init.sum(), 1.0, atol=1e-9):
            raise ChannelError(f"init must sum to 1, got {init.sum()}")
        for arr in (p, q, init):
            arr.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "init", init)

    @property
    def d(self) -> int:
        return self.q.shape[0]

    def is_symmetric(self) -> bool:
        """True when every per-state law is a binary symmetric channel."""
        return bool(np.allclose(self.p[1, 0, :], self.p[0, 1, :], atol=_ATOL))

    def crossovers(self) -> np.ndarray:
        """Per-state crossover probabilities h_s."""
        if not self.is_symmetric():
            raise ChannelError("per-state laws are not binary symmetric channels")
        return self.p[1, 0, :].copy()

    def transfer(self) -> np.ndarray:
        """T[s_prev, s_next] = q(s_next | s_prev)."""
        return self.q.T


# ── Constructors


def bsc(h: float) -> MemorylessChannel:
    h = _check_prob("h", h)
    return MemorylessChannel(np.array([[1.0 - h, h], [h, 1.0 - h]]))


def lift_memoryless(ch: MemorylessChannel) -> FiniteStateChannel:
    """Embed a memoryless channel as a one-state channel."""
    return FiniteStateChannel(p=ch.w[:, :, None], q=np.ones((1, 1)), init=np.ones(1))


def gilbert_elliott(
    hG: float,
    hB: float,
    pGB: float,
    pBG: float,
    init: Optional[np.ndarray] = None,
) -> FiniteStateChannel:
    """Two-state channel: BSC(hG) in Good, BSC(hB) in Bad."""
    hG, hB = _check_prob("hG", hG), _check_prob("hB", hB)
    pGB, pBG = _check_prob("pGB", pGB), _check_prob("pBG", pBG)
    if hG > hB:
        logger.warning(f"[channel] Good state is noisier than Bad state (hG={hG} > hB={hB})")

    q = np.array([[1.0 - pGB, pBG], [pGB, 1.0 - pBG]])
    p = np.empty((2, 2, 2))
    for s, h in ((GOOD, hG), (BAD, hB)):
        p[:, :, s] = bsc(h).w
    if init is None:
        init = _stationary_of(q)
    return FiniteStateChannel(p=p, q=q, init=np.asarray(init, dtype=np.float64))


def random_channel(d: int, rng: np.random.Generator, symmetric: bool = False) -> FiniteStateChannel:
    """Random d-state channel with Dirichlet transition columns (test instances)."""
    if d < 1:
        raise ChannelError(f"d must be positive, got {d}")
    q = rng.dirichlet(np.ones(d), size=d).T
    flip = rng.uniform(0.05, 0.95, size=(2, d))
    if symmetric:
        flip[1] = 1.0 - flip[0]
    p = np.empty((2, 2, d))
    p[1, :, :] = flip
    p[0, :, :] = 1.0 - flip
    init = rng.dirichlet(np.ones(d))
    return FiniteStateChannel(p=p, q=q, init=init)


# ── State-chain analysis


def _state_graph(q: np.ndarray) -> nx.DiGraph:
    G = nx.DiGraph()
    G.add_nodes_from(range(q.shape[0]))
    for s_next, s_prev in zip(*np.nonzero(q)):
        G.add_edge(int(s_prev), int(s_next))
    return G


def _stationary_of(q: np.ndarray) -> np.ndarray:
    G = _state_graph(q)
    closed = list(nx.attracting_components(G))
    if len(closed) != 1:
        raise ChannelError(f"state chain has {len(closed)} closed classes; stationary law is not unique")
    if not nx.is_strongly_connected(G):
        logger.warning(f"[channel] reducible state chain; stationary law lives on states {sorted(closed[0])}")
    elif not nx.is_aperiodic(G):
        logger.warning("[channel] periodic state chain; stationary law exists but is not a limit")

    d = q.shape[0]
    A = np.vstack([q - np.eye(d), np.ones((1, d))])
    b = np.zeros(d + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def stationary(ch: FiniteStateChannel) -> np.ndarray:
    return _stationary_of(ch.q)


def _two_state(ch: FiniteStateChannel) -> Tuple[float, float]:
    if ch.d != 2:
        raise ChannelError(f"burst statistics need a two-state channel, got d={ch.d}")
    return float(ch.q[BAD, GOOD]), float(ch.q[GOOD, BAD])


def mean_burst_length(ch: FiniteStateChannel) -> float:
    """Expected sojourn in the Bad state, 1 / pBG."""
    _, pBG = _two_state(ch)
    if pBG == 0:
        raise UnboundedBurstError("pBG = 0: the Bad state is absorbing")
    return 1.0 / pBG


def good_bad_ratio(ch: FiniteStateChannel) -> float:
    """Stationary odds P(G)/P(B) = pBG / pGB."""
    pGB, pBG = _two_state(ch)
    if pGB == 0:
        raise UnboundedBurstError("pGB = 0: the Good state is absorbing")
    return pBG / pGB


def average_crossover(ch: FiniteStateChannel) -> float:
    return float(stationary(ch) @ ch.crossovers())


# ── Sampling and likelihoods


def sample_transmission(
    ch: FiniteStateChannel,
    x: np.ndarray,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Send x through the channel.

    Returns (y, states) where states[0] = s_0 and states[j + 1] is the state
    after position j. Position j flips with the law of states[j].
    """
    x = np.asarray(x, dtype=np.int8)
    N = len(x)
    d = ch.d
    states = np.empty(N + 1, dtype=np.int64)
    states[0] = rng.choice(d, p=ch.init)
    if d > 1:
        cum = np.cumsum(ch.q, axis=0)
        draws = rng.random(N)
        for j in range(N):
            col = cum[:, states[j]]
            states[j + 1] = min(int(np.searchsorted(col, draws[j], side="right")), d - 1)
    else:
        states[1:] = 0
    p_one = ch.p[1, x, states[:-1]]
    y = (rng.random(N) < p_one).astype(np.int8)
    return y, states


def channel_likelihood(ch: FiniteStateChannel, x: np.ndarray, y: np.ndarray) -> float:
    """W_N(y | x) marginalised over the state path, O(N d^2)."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if x.shape != y.shape:
        raise ChannelError(f"length mismatch: |x|={len(x)} vs |y|={len(y)}")
    T = ch.transfer()
    v = ch.init.copy()
    for xj, yj in zip(x, y):
        v = (v * ch.p[yj, xj, :]) @ T
    return float(v.sum())


# ── Matrix product operators


@dataclass(frozen=True)
class MPO:
    """
    Chain of rank-3 site tensors sites[j][s_prev, s_next, x].

    `left` (P(S_0)) attaches to the s_prev leg of position 0 and `right`
    (all ones) to the s_next leg of the last position.
    """

    sites: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        for name in ("sites", "left", "right"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def N(self) -> int:
        return self.sites.shape[0]

    @property
    def d(self) -> int:
        return self.sites.shape[1]

    def site(self, j: int) -> Tensor:
        return Tensor(self.sites[j], ("s_prev", "s_next", "x"))

    def contract_fixed(self, x: np.ndarray) -> float:
        """Full chain contraction with every x leg fixed."""
        x = np.asarray(x, dtype=np.int64)
        v = self.left
        for j, xj in enumerate(x):
            v = v @ self.sites[j, :, :, xj]
        return float(v @ self.right)

    def contract_summed(self) -> float:
        v = self.left
        for j in range(self.N):
            v = v @ self.sites[j].sum(axis=2)
        return float(v @ self.right)


class EvidenceMPO(MPO):
    """Channel chain with the received word substituted; open legs are inputs x."""


class ErrorMPO(MPO):
    """Channel chain over additive error bits z (per-state BSC channels)."""


def evidence_mpo(ch: FiniteStateChannel, y: np.ndarray) -> EvidenceMPO:
    y = np.asarray(y, dtype=np.int64)
    py = ch.p[y]  # (N, x, s)
    sites = ch.transfer()[None, :, :, None] * py.transpose(0, 2, 1)[:, :, None, :]
    return EvidenceMPO(sites=sites, left=ch.init, right=np.ones(ch.d))


def error_mpo(ch: FiniteStateChannel, length: int) -> ErrorMPO:
    h = ch.crossovers()
    law = np.stack([1.0 - h, h], axis=1)  # (s, z)
    site = ch.transfer()[:, :, None] * law[:, None, :]
    sites = np.broadcast_to(site, (length,) + site.shape)
    return ErrorMPO(sites=sites, left=ch.init, right=np.ones(ch.d))


# ── Channel description files

ChannelLike = Union[FiniteStateChannel, MemorylessChannel]


def _floats(raw: str) -> np.ndarray:
    return np.array([float(v) for v in raw.replace(";", ",").split(",") if v.strip()])


def _get(values: dict, key: str, default: Optional[str] = None) -> str:
    raw = values.get(key, default)
    if raw is None:
        raise ChannelError(f"channel description is missing '{key}'")
    return raw


def channel_from_dict(values: dict) -> FiniteStateChannel:
    """Build a channel from key/value pairs (the channel file format)."""
    family = (values.get("family") or "").strip().lower()
    try:
        if family in ("ge", "gilbert", "gilbert-elliott"):
            hG = float(_get(values, "hG", "0" if family == "gilbert" else None))
            init = _floats(values["init"]) if values.get("init") else None
            return gilbert_elliott(
                hG, float(_get(values, "hB")), float(_get(values, "pGB")), float(_get(values, "pBG")), init=init
            )
        if family == "bsc":
            return lift_memoryless(bsc(float(_get(values, "h"))))
        if family == "custom":
            d = int(_get(values, "d"))
            q = _floats(_get(values, "q")).reshape(d, d)
            if values.get("flip"):
                flip = _floats(values["flip"])
                p = np.array([[1.0 - flip, flip], [flip, 1.0 - flip]])
            else:
                p = _floats(_get(values, "p")).reshape(2, 2, d)
            init = _floats(values["init"]) if values.get("init") else _stationary_of(q)
            return FiniteStateChannel(p=p, q=q, init=init)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ChannelError):
            raise
        raise ChannelError(f"bad channel description: {exc}") from exc
    raise ChannelError(f"unknown channel family '{family}' (expected ge, gilbert, bsc or custom)")


def read_channel_file(path: Union[str, Path]) -> FiniteStateChannel:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"channel file not found: {path}")
    values = dotenv_values(path)
    logger.debug(f"[channel] {path.name}: {dict(values)}")
    return channel_from_dict(values)


def ge_params(ch: FiniteStateChannel) -> Tuple[float, float, float, float]:
    """(hG, hB, pGB, pBG) of a two-state symmetric channel."""
    pGB, pBG = _two_state(ch)
    h = ch.crossovers()
    return float(h[GOOD]), float(h[BAD]), pGB, pBG
