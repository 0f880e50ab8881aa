"""Dense float64 tensors plus a recording tape for reverse-mode gradients.

Tensors are immutable values (the backing numpy array is write-locked), so
they are safe to share; a :class:`GradTape` is single-owner and records the
operations applied through the functions in :mod:`scgir.numeric.ops`.
Calling :func:`backward` on a scalar loss walks the recorded nodes once in
reverse order and returns a gradient for every tensor that appeared on the
tape — exactly zero for tensors the loss does not depend on.
"""

from __future__ import annotations

from typing import Callable, Dict, Sequence

import numpy as np

from ..errors import ContractError, StateError


class Tensor:
    """Immutable row-major array of 64-bit reals."""

    __slots__ = ("_data",)

    def __init__(self, data, copy: bool = True):
        arr = np.array(data, dtype=np.float64, copy=copy, order="C")
        arr.flags.writeable = False
        self._data = arr

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def shape(self) -> tuple:
        return self._data.shape

    @property
    def ndim(self) -> int:
        return self._data.ndim

    @property
    def size(self) -> int:
        return self._data.size

    def item(self) -> float:
        return float(self._data.reshape(-1)[0]) if self.size == 1 else self._raise_item()

    def _raise_item(self):
        raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")

    def all_finite(self) -> bool:
        return bool(np.isfinite(self._data).all())

    def tolist(self):
        return self._data.tolist()

    @staticmethod
    def zeros(shape) -> "Tensor":
        return Tensor(np.zeros(shape), copy=False)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


# A backward rule maps the output gradient to one gradient (or None) per parent.
BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]


class _Node:
    __slots__ = ("out", "parents", "backward")

    def __init__(self, out: Tensor, parents: tuple, backward: BackwardFn):
        self.out = out
        self.parents = parents
        self.backward = backward


class GradTape:
    """Records operations so a later backward pass can replay their adjoints.

    Append order is creation order, which is already a topological order of
    the computation graph; the backward pass therefore visits each node
    exactly once by walking the list in reverse.
    """

    __slots__ = ("_nodes", "_spent")

    def __init__(self):
        self._nodes: list[_Node] = []
        self._spent = False

    def record(self, out: Tensor, parents: Sequence[Tensor], backward: BackwardFn) -> None:
        """Register `out = f(parents)` with its backward rule."""
        self._nodes.append(_Node(out, tuple(parents), backward))

    def reset(self) -> None:
        """Discard all recorded nodes and allow a fresh backward pass."""
        self._nodes.clear()
        self._spent = False

    @property
    def num_recorded(self) -> int:
        return len(self._nodes)


def backward(loss: Tensor, tape: GradTape) -> Dict[Tensor, Tensor]:
    """Reverse-mode gradients of a scalar loss over everything on the tape.

    Returns a map from each tensor that appeared on the tape (outputs and
    parents alike) to its gradient; tensors the loss does not reach get an
    exactly-zero gradient. A tape can be consumed once; reset() rearms it.
    """
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if tape._spent:
        raise StateError("tape already consumed by a backward pass; call reset() first")
    tape._spent = True

    acc: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape._nodes):
        g = acc.get(id(node.out))
        if g is None:
            continue
        parent_grads = node.backward(g)
        for parent, pg in zip(node.parents, parent_grads):
            if pg is None:
                continue
            prev = acc.get(id(parent))
            acc[id(parent)] = pg if prev is None else prev + pg

    result: Dict[Tensor, Tensor] = {}
    for node in tape._nodes:
        for t in (node.out, *node.parents):
            if t not in result:
                g = acc.get(id(t))
                result[t] = Tensor(g) if g is not None else Tensor.zeros(t.shape)
    if loss not in result:
        result[loss] = Tensor(acc[id(loss)])
    return result
