"""Reverse-mode automatic differentiation over dense float64 arrays.

Every arithmetic primitive here is bitwise deterministic: matrix products go
through einsum (fixed per-element accumulation order, independent of how many
rows are in the batch) and reductions accumulate left to right. BLAS gemm
would be faster but reorders accumulation depending on operand sizes, which
breaks the bitwise reproducibility this package promises.
"""

from __future__ import annotations

import itertools

import numpy as np

from .errors import ContractError, DimensionError

_node_ids = itertools.count()

# Active MAC counter, if any. Single-threaded by contract.
_mac_counter = None


class MacCounter:
    """Counts multiply-accumulates of every matmul executed inside a `with` block."""

    def __init__(self):
        self.total = 0

    def __enter__(self):
        global _mac_counter
        self._outer = _mac_counter
        _mac_counter = self
        return self

    def __exit__(self, *exc):
        global _mac_counter
        _mac_counter = self._outer
        return False


def _mm(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # einsum keeps a fixed, sequential accumulation order per output element.
    return np.einsum("ik,kj->ij", x, y)


def _seq_sum(x: np.ndarray) -> np.float64:
    # Left-to-right accumulation, bitwise equal to a streaming loop.
    flat = x.ravel()
    if flat.size == 0:
        return np.float64(0.0)
    return flat.cumsum()[-1]


class Tensor:
    """Dense float64 value, optionally tracked in the differentiation graph.

    Node ids increase monotonically with creation order and inputs are always
    created before outputs, so descending id order is a valid topological
    order for the backward sweep. The graph lives only as parent references
    on output tensors and is discarded with them.
    """

    __slots__ = ("data", "grad", "requires_grad", "node_id", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self.node_id = next(_node_ids)
        self._parents = ()
        self._vjp = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a scalar tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def _track(out_data, parents, vjp) -> Tensor:
    out = Tensor(out_data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._vjp = vjp
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} x {b.shape}")
    if _mac_counter is not None:
        m, k = a.shape
        _mac_counter.total += m * k * b.shape[1]

    def vjp(g):
        return _mm(g, b.data.T), _mm(a.data.T, g)

    return _track(_mm(a.data, b.data), (a, b), vjp)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise DimensionError(f"transpose: need a 2-d tensor, got shape {a.shape}")
    return _track(a.data.T, (a,), lambda g: (g.T,))


def reshape(a: Tensor, shape) -> Tensor:
    old = a.shape
    return _track(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def _binary_shapes(a: Tensor, b: Tensor, kind: str) -> bool:
    """Returns True when b broadcasts as a row vector over a's rows.

    Only the bias-add pattern (n, d) op (d,) is allowed beyond identical
    shapes; anything else is a dimension error.
    """
    if a.shape == b.shape:
        return False
    if a.data.ndim == 2 and b.data.ndim == 1 and a.shape[1] == b.shape[0]:
        return True
    raise DimensionError(f"{kind}: shape mismatch {a.shape} vs {b.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    rowvec = _binary_shapes(a, b, "add")
    if rowvec:
        vjp = lambda g: (g, g.sum(axis=0))
    else:
        vjp = lambda g: (g, g)
    return _track(a.data + b.data, (a, b), vjp)


def sub(a: Tensor, b: Tensor) -> Tensor:
    rowvec = _binary_shapes(a, b, "sub")
    if rowvec:
        vjp = lambda g: (g, -g.sum(axis=0))
    else:
        vjp = lambda g: (g, -g)
    return _track(a.data - b.data, (a, b), vjp)


def mul(a: Tensor, b: Tensor) -> Tensor:
    rowvec = _binary_shapes(a, b, "mul")
    if rowvec:
        vjp = lambda g: (g * b.data, (g * a.data).sum(axis=0))
    else:
        vjp = lambda g: (g * b.data, g * a.data)
    return _track(a.data * b.data, (a, b), vjp)


def elementwise(a: Tensor, b: Tensor, kind: str) -> Tensor:
    ops = {"add": add, "sub": sub, "mul": mul}
    if kind not in ops:
        raise ContractError(f"elementwise: unknown kind {kind!r}")
    return ops[kind](a, b)


def scale(a: Tensor, c: float) -> Tensor:
    """Multiply by a plain (untracked) constant."""
    c = float(c)
    return _track(a.data * c, (a,), lambda g: (g * c,))


def relu(a: Tensor) -> Tensor:
    # Gradient at exactly 0 is 0.
    mask = a.data > 0.0
    return _track(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _track(out, (a,), lambda g: (g * (1.0 - out * out),))


def softplus(a: Tensor) -> Tensor:
    x = a.data
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    sig = np.where(x >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                   np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    return _track(out, (a,), lambda g: (g * sig,))


_ACTIVATIONS = {"relu": relu, "tanh": tanh, "softplus": softplus}


def activation(a: Tensor, kind: str) -> Tensor:
    if kind not in _ACTIVATIONS:
        raise ContractError(f"activation: unknown kind {kind!r}")
    return _ACTIVATIONS[kind](a)


def reduce(a: Tensor, kind: str) -> Tensor:
    """Full reduction to a scalar tensor.

    sum and mean accumulate left to right; l1 is sum(|a_i|) with subgradient
    0 at 0; sq_l2 is sum(a_i^2).
    """
    n = a.data.size
    if kind == "sum":
        out, vjp = _seq_sum(a.data), lambda g: (np.full(a.shape, g),)
    elif kind == "mean":
        out, vjp = _seq_sum(a.data) / n, lambda g: (np.full(a.shape, g / n),)
    elif kind == "l1":
        out, vjp = _seq_sum(np.abs(a.data)), lambda g: (g * np.sign(a.data),)
    elif kind == "sq_l2":
        out, vjp = _seq_sum(a.data * a.data), lambda g: (g * 2.0 * a.data,)
    else:
        raise ContractError(f"reduce: unknown kind {kind!r}")
    return _track(np.asarray(out), (a,), vjp)


def detach(a: Tensor) -> Tensor:
    """Same values, no graph linkage; backward never reaches a's ancestors."""
    return Tensor(a.data.copy())


def backward(loss: Tensor) -> None:
    """Accumulates d(loss)/d(leaf) into `.grad` of every tracked leaf.

    The sweep walks reachable nodes once each, in reverse creation order,
    carrying adjoints in a transient table so that repeated calls (without
    zeroing) add their contributions instead of compounding them.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward: loss must be scalar, got shape {loss.shape}")

    reachable = []
    seen = set()
    stack = [loss]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        reachable.append(node)
        stack.extend(node._parents)

    reachable.sort(key=lambda t: t.node_id, reverse=True)
    adjoint = {id(loss): np.ones_like(loss.data)}
    for node in reachable:
        g = adjoint.pop(id(node), None)
        if g is None or not node.requires_grad:
            continue
        if node._vjp is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._vjp(g)):
            if not parent.requires_grad:
                continue
            key = id(parent)
            if key in adjoint:
                adjoint[key] = adjoint[key] + pg
            else:
                adjoint[key] = pg
