"""Dense float64 tensors with a reverse-mode gradient tape.

Every trainable computation in the package runs through this module. Usage
mirrors a TensorFlow-style tape: operations executed inside a ``with Tape():``
block are recorded when any operand has ``requires_grad`` set, and
``backward(loss)`` replays the record once to populate ``.grad`` on every
reachable gradient-tracked tensor. Outside a tape the same operations run as
plain numpy with no recording overhead.

A tape is single use: a second ``backward`` on the same tape, or recording
new operations after ``backward``, raises ``TapeError``.
"""

from __future__ import annotations

from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .errors import ContractError, DimensionError, TapeError

_EPS_NORM = 1e-12

_ACTIVE_TAPE: Optional["Tape"] = None


class Tape:
    """Ordered record of differentiable operations.

    Nodes are appended in execution order, so the list is already a
    topological order of the computation graph.
    """

    def __init__(self):
        self._nodes: list[_Node] = []
        self._spent = False

    def __enter__(self) -> "Tape":
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise TapeError("a tape is already active; tapes do not nest")
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, exc_type, exc, tb):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None
        return False

    def __len__(self) -> int:
        return len(self._nodes)

    def _record(self, out: "Tensor", parents: tuple["Tensor", ...],
                backward: Callable[[np.ndarray], tuple]) -> None:
        if self._spent:
            raise TapeError("tape already consumed by backward; build a new tape")
        out.tape = self
        out.node_id = len(self._nodes)
        self._nodes.append(_Node(out, parents, backward))


class _Node:
    __slots__ = ("out", "parents", "backward")

    def __init__(self, out, parents, backward):
        self.out = out
        self.parents = parents
        self.backward = backward


class Tensor:
    """Dense real tensor; wraps a float64 numpy array.

    ``requires_grad`` marks the tensor as a gradient target. ``grad`` is
    populated by ``backward`` and holds an array of the same shape.
    """

    __slots__ = ("data", "requires_grad", "grad", "tape", "node_id")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.tape: Optional[Tape] = None
        self.node_id: Optional[int] = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        """Copy of the value with no gradient tracking."""
        return Tensor(self.data.copy(), requires_grad=False)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # operator sugar; all arithmetic routes through the module-level ops
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


TensorLike = Union[Tensor, np.ndarray, float, int, list]


def as_tensor(x: TensorLike) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _apply(parents: Sequence[Tensor], out_data: np.ndarray,
           backward: Callable[[np.ndarray], tuple]) -> Tensor:
    """Wrap ``out_data`` and record the op if a live tape is tracking."""
    requires = any(p.requires_grad for p in parents)
    out = Tensor(out_data, requires_grad=requires)
    if requires and _ACTIVE_TAPE is not None:
        _ACTIVE_TAPE._record(out, tuple(parents), backward)
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape``, inverting numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data

    def backward(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _apply((a, b), out, backward)


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data - b.data

    def backward(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return _apply((a, b), out, backward)


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data

    def backward(g):
        return (_unbroadcast(g * b.data, a.data.shape),
                _unbroadcast(g * a.data, b.data.shape))

    return _apply((a, b), out, backward)


def div(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data

    def backward(g):
        return (_unbroadcast(g / b.data, a.data.shape),
                _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _apply((a, b), out, backward)


def exp(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)

    def backward(g):
        return (g * out,)

    return _apply((a,), out, backward)


def log(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    out = np.log(a.data)

    def backward(g):
        return (g / a.data,)

    return _apply((a,), out, backward)


def sqrt(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.data)

    def backward(g):
        return (g * 0.5 / out,)

    return _apply((a,), out, backward)


def tanh(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)

    def backward(g):
        return (g * (1.0 - out * out),)

    return _apply((a,), out, backward)


def relu(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    out = np.where(mask, a.data, 0.0)

    def backward(g):
        return (g * mask,)

    return _apply((a,), out, backward)


# ---------------------------------------------------------------------------
# linear algebra and structure


def matmul(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return _apply((a, b), out, backward)


def transpose(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    if a.ndim != 2:
        raise DimensionError(f"transpose expects a matrix, got shape {a.shape}")
    out = a.data.T.copy()

    def backward(g):
        return (g.T,)

    return _apply((a,), out, backward)


def tsum(a: TensorLike, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    """Sum over all entries or along one axis."""
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape).copy(),)

    return _apply((a,), out, backward)


def sum_pool(m: TensorLike) -> Tensor:
    """Column-wise sum of a non-empty matrix: (r, d) -> (d,)."""
    m = as_tensor(m)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionError(f"sum_pool expects a non-empty matrix, got shape {m.shape}")
    return tsum(m, axis=0)


def gather_rows(table: TensorLike, ids) -> Tensor:
    """Select rows ``table[ids]``; gradients scatter-add back into the table."""
    table = as_tensor(table)
    idx = np.asarray(ids, dtype=np.intp)
    if table.ndim != 2 or idx.ndim != 1:
        raise DimensionError("gather_rows expects a matrix table and 1-D indices")
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise ContractError("gather_rows index out of range")
    out = table.data[idx]

    def backward(g):
        acc = np.zeros_like(table.data)
        np.add.at(acc, idx, g)
        return (acc,)

    return _apply((table,), out, backward)


def slice_rows(a: TensorLike, start: int, stop: int) -> Tensor:
    a = as_tensor(a)
    if a.ndim != 2:
        raise DimensionError("slice_rows expects a matrix")
    out = a.data[start:stop].copy()

    def backward(g):
        acc = np.zeros_like(a.data)
        acc[start:stop] = g
        return (acc,)

    return _apply((a,), out, backward)


def concat_rows(parts: Iterable[TensorLike]) -> Tensor:
    tensors = [as_tensor(p) for p in parts]
    if not tensors:
        raise DimensionError("concat_rows needs at least one block")
    counts = [t.shape[0] for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=0)
    offsets = np.cumsum([0] + counts)

    def backward(g):
        return tuple(g[offsets[i]:offsets[i + 1]] for i in range(len(tensors)))

    return _apply(tensors, out, backward)


def stack_scalar_matrix(rows: Sequence[Sequence[Tensor]]) -> Tensor:
    """Assemble a grid of recorded scalars into one matrix node.

    Backward hands each scalar its own matrix entry, so a (B, B) similarity
    matrix costs a single tape node instead of B*B concatenations.
    """
    if not rows or not rows[0]:
        raise DimensionError("stack_scalar_matrix needs a non-empty grid")
    width = len(rows[0])
    parents: list[Tensor] = []
    for row in rows:
        if len(row) != width:
            raise DimensionError("ragged scalar grid")
        for cell in row:
            cell = as_tensor(cell)
            if cell.data.size != 1:
                raise DimensionError("grid cells must be scalars")
            parents.append(cell)
    out = np.array([[float(cell.data) for cell in row] for row in rows])

    def backward(g):
        return tuple(np.asarray(g[i // width, i % width]).reshape(p.data.shape)
                     for i, p in enumerate(parents))

    return _apply(parents, out, backward)


# ---------------------------------------------------------------------------
# normalizations


def l2_normalize(a: TensorLike) -> Tensor:
    """Scale a vector, or each row of a matrix, to unit Euclidean norm.

    Rows with norm below 1e-12 map to zeros and receive zero gradient, so
    padded or dead vectors never produce NaN.
    """
    a = as_tensor(a)
    x = a.data
    if x.ndim == 1:
        xm, flat = x[None, :], True
    elif x.ndim == 2:
        xm, flat = x, False
    else:
        raise DimensionError(f"l2_normalize expects 1-D or 2-D input, got {x.shape}")
    norms = np.linalg.norm(xm, axis=1)
    alive = norms >= _EPS_NORM
    safe = np.where(alive, norms, 1.0)
    ym = np.where(alive[:, None], xm / safe[:, None], 0.0)
    out = ym[0] if flat else ym

    def backward(g):
        gm = g[None, :] if flat else g
        dots = np.einsum("ij,ij->i", ym, gm)
        grad = np.where(alive[:, None], (gm - ym * dots[:, None]) / safe[:, None], 0.0)
        return (grad[0] if flat else grad,)

    return _apply((a,), out, backward)


def cosine_sim(u: TensorLike, v: TensorLike) -> Tensor:
    """Cosine similarity of two equal-length vectors (or single-row matrices).

    Returns 0 with zero gradient when either operand has norm below 1e-12.
    """
    u, v = as_tensor(u), as_tensor(v)
    if u.data.size != v.data.size:
        raise DimensionError(f"cosine_sim length mismatch: {u.shape} vs {v.shape}")
    un = l2_normalize(u)
    vn = l2_normalize(v)
    return tsum(mul(un, vn))


def min_max_normalize(m: TensorLike, axis: str = "row") -> Tensor:
    """Rescale each slice to [0, 1] via (x - min) / (max - min).

    ``axis="row"`` normalizes every row over its columns, ``axis="col"``
    every column over its rows. A constant slice maps to all zeros and
    propagates zero gradient (the subgradient at a min==max tie is
    undefined; zero is the stable choice). Elsewhere the op is
    differentiable and participates in gradient flow.
    """
    m = as_tensor(m)
    if m.ndim != 2:
        raise DimensionError(f"min_max_normalize expects a matrix, got {m.shape}")
    if axis not in ("row", "col"):
        raise ContractError(f"axis must be 'row' or 'col', got {axis!r}")
    x = m.data if axis == "row" else m.data.T
    lo = x.min(axis=1, keepdims=True)
    hi = x.max(axis=1, keepdims=True)
    span = hi - lo
    alive = span[:, 0] > 0
    safe = np.where(alive[:, None], span, 1.0)
    y = np.where(alive[:, None], (x - lo) / safe, 0.0)
    jmin = np.argmin(x, axis=1)
    jmax = np.argmax(x, axis=1)
    out = y if axis == "row" else y.T.copy()

    def backward(g):
        gx = g if axis == "row" else g.T
        grad = gx / safe
        gsum = gx.sum(axis=1)
        gysum = np.einsum("ij,ij->i", gx, y)
        rows = np.arange(x.shape[0])
        # min/max entries collect the slice-level terms of the quotient rule
        np.add.at(grad, (rows, jmin), (gysum - gsum) / safe[:, 0])
        np.add.at(grad, (rows, jmax), -gysum / safe[:, 0])
        grad = np.where(alive[:, None], grad, 0.0)
        return (grad if axis == "row" else grad.T,)

    return _apply((m,), out, backward)


def l1_normalize(m: TensorLike, axis: str = "row") -> Tensor:
    """Divide each slice by its element sum so slices sum to one.

    A slice whose sum has magnitude below 1e-12 maps to the uniform
    distribution 1/len with zero gradient, keeping alignment weights a
    valid distribution on degenerate input.
    """
    m = as_tensor(m)
    if m.ndim != 2:
        raise DimensionError(f"l1_normalize expects a matrix, got {m.shape}")
    if axis not in ("row", "col"):
        raise ContractError(f"axis must be 'row' or 'col', got {axis!r}")
    x = m.data if axis == "row" else m.data.T
    s = x.sum(axis=1, keepdims=True)
    alive = np.abs(s[:, 0]) >= _EPS_NORM
    safe = np.where(alive[:, None], s, 1.0)
    y = np.where(alive[:, None], x / safe, 1.0 / x.shape[1])
    out = y if axis == "row" else y.T.copy()

    def backward(g):
        gx = g if axis == "row" else g.T
        gysum = np.einsum("ij,ij->i", gx, y)
        grad = (gx - gysum[:, None]) / safe
        grad = np.where(alive[:, None], grad, 0.0)
        return (grad if axis == "row" else grad.T,)

    return _apply((m,), out, backward)


# ---------------------------------------------------------------------------
# backward pass


def backward(loss: Tensor) -> dict[Tensor, np.ndarray]:
    """Run reverse-mode accumulation from a recorded scalar.

    Populates ``.grad`` on every gradient-tracked tensor reachable from
    ``loss`` and returns the same gradients as a map. The owning tape is
    consumed; a second call raises ``TapeError``.
    """
    if not isinstance(loss, Tensor) or loss.data.size != 1:
        raise ContractError("backward expects a scalar tensor")
    tape = loss.tape
    if tape is None:
        raise TapeError("loss was not recorded on a tape")
    if tape._spent:
        raise TapeError("tape already consumed by backward")
    tape._spent = True

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    holders: dict[int, Tensor] = {id(loss): loss}
    for node in reversed(tape._nodes[: loss.node_id + 1]):
        g_out = grads.get(id(node.out))
        if g_out is None:
            continue
        parent_grads = node.backward(g_out)
        for parent, g in zip(node.parents, parent_grads):
            if g is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + g
            else:
                grads[key] = np.asarray(g, dtype=np.float64)
                holders[key] = parent

    result: dict[Tensor, np.ndarray] = {}
    for key, tensor in holders.items():
        if tensor.requires_grad:
            g = grads[key].reshape(tensor.data.shape)
            tensor.grad = g
            result[tensor] = g
    return result
