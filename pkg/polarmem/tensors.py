"""
Dense real tensors and the constant tensors used to build decoding networks.

A Tensor is an immutable row-major numpy array plus optional axis labels.
All operations return new tensors; nothing here renormalizes probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np


class TensorError(ValueError):
    """Invalid axes, extents or index values."""


@dataclass(frozen=True)
class Tensor:
    data: np.ndarray
    labels: Tuple[Optional[str], ...] = field(default=())

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, order="C")
        if not np.all(np.isfinite(arr)):
            raise TensorError("tensor entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        labels = tuple(self.labels) if self.labels else (None,) * arr.ndim
        if len(labels) != arr.ndim:
            raise TensorError(f"{len(labels)} labels for a rank-{arr.ndim} tensor")
        object.__setattr__(self, "labels", labels)

    @property
    def dims(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def rank(self) -> int:
        return self.data.ndim

    @property
    def strides(self) -> Tuple[int, ...]:
        """Element (not byte) strides of the row-major layout."""
        return tuple(s // self.data.itemsize for s in self.data.strides)

    def flat(self) -> np.ndarray:
        return self.data.reshape(-1)

    def scalar(self) -> float:
        if self.rank != 0:
            raise TensorError(f"rank-{self.rank} tensor is not a scalar")
        return float(self.data)

    def __mul__(self, alpha: float) -> "Tensor":
        return Tensor(self.data * alpha, self.labels)

    __rmul__ = __mul__


def _check_axis(A: Tensor, axis: int) -> int:
    if not -A.rank <= axis < A.rank:
        raise TensorError(f"axis {axis} out of range for rank-{A.rank} tensor")
    return axis % A.rank


def contract(A: Tensor, axes_a: Sequence[int], B: Tensor, axes_b: Sequence[int]) -> Tensor:
    """
    Sum over paired axes of A and B.

    Result axes are A's free axes (in order) followed by B's free axes.
    """
    if len(axes_a) != len(axes_b):
        raise TensorError(f"axis lists differ in length: {len(axes_a)} vs {len(axes_b)}")
    axes_a = [_check_axis(A, a) for a in axes_a]
    axes_b = [_check_axis(B, b) for b in axes_b]
    if len(set(axes_a)) != len(axes_a) or len(set(axes_b)) != len(axes_b):
        raise TensorError("duplicate axis in contraction list")
    for a, b in zip(axes_a, axes_b):
        if A.dims[a] != B.dims[b]:
            raise TensorError(f"extent mismatch: A[{a}]={A.dims[a]} vs B[{b}]={B.dims[b]}")

    data = np.tensordot(A.data, B.data, axes=(axes_a, axes_b))
    labels = tuple(l for i, l in enumerate(A.labels) if i not in axes_a) + tuple(
        l for i, l in enumerate(B.labels) if i not in axes_b
    )
    return Tensor(data, labels)


def fix_index(A: Tensor, axis: int, value: int) -> Tensor:
    axis = _check_axis(A, axis)
    if not 0 <= value < A.dims[axis]:
        raise TensorError(f"value {value} out of range for axis {axis} of extent {A.dims[axis]}")
    labels = A.labels[:axis] + A.labels[axis + 1:]
    return Tensor(np.take(A.data, value, axis=axis), labels)


def sum_index(A: Tensor, axis: int) -> Tensor:
    axis = _check_axis(A, axis)
    labels = A.labels[:axis] + A.labels[axis + 1:]
    return Tensor(A.data.sum(axis=axis), labels)


def outer(A: Tensor, B: Tensor) -> Tensor:
    return Tensor(np.multiply.outer(A.data, B.data), A.labels + B.labels)


# ── Constant tensors


def point(bit: int, extent: int = 2) -> Tensor:
    """Point mass on `bit` (a variable fixed to that value)."""
    if not 0 <= bit < extent:
        raise TensorError(f"point value {bit} out of range for extent {extent}")
    data = np.zeros(extent)
    data[bit] = 1.0
    return Tensor(data)


def point0() -> Tensor:
    return point(0)


def point1() -> Tensor:
    return point(1)


def ones(extent: int) -> Tensor:
    if extent < 1:
        raise TensorError(f"extent must be positive, got {extent}")
    return Tensor(np.ones(extent))


@lru_cache(maxsize=1)
def cnot() -> Tensor:
    """cnot[a, b, c, d] = 1 iff c = a and d = a xor b (a is the control)."""
    data = np.zeros((2, 2, 2, 2))
    for a in (0, 1):
        for b in (0, 1):
            data[a, b, a, a ^ b] = 1.0
    return Tensor(data, ("a", "b", "c", "d"))


@lru_cache(maxsize=1)
def parity() -> Tensor:
    """parity[c, b, d] = 1 iff d = c xor b."""
    data = np.zeros((2, 2, 2))
    for c in (0, 1):
        for b in (0, 1):
            data[c, b, c ^ b] = 1.0
    return Tensor(data, ("c", "b", "d"))
