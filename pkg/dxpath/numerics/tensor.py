"""
Dense float64 tensors with tape-based reverse-mode differentiation.

Primitives record themselves on the innermost active Tape whenever one of
their inputs requires a gradient. `backward` walks the tape in exact reverse
order of recording and accumulates into the `.grad` of leaf tensors
(Parameters and other leaves created with requires_grad=True).

Tapes are thread-local: each worker thread owns its own stack of tapes.
"""

import contextlib
import threading
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import DxPathError, NonFiniteError, ShapeError, TapeError

_state = threading.local()

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence]


def _tapes() -> List["Tape"]:
    if not hasattr(_state, "tapes"):
        _state.tapes = []
    return _state.tapes


def is_checked() -> bool:
    return getattr(_state, "checked", False)


def set_checked(enabled: bool) -> None:
    """Turn finiteness checks on tensor construction on or off for this thread."""
    _state.checked = bool(enabled)


@contextlib.contextmanager
def checked(enabled: bool = True):
    """Context manager form of set_checked."""
    previous = is_checked()
    set_checked(enabled)
    try:
        yield
    finally:
        set_checked(previous)


def _check_finite(arr: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"Non-finite value produced by {where}")


class Tensor:
    """Row-major float64 array with optional gradient tracking."""

    __array_priority__ = 100

    def __init__(self, data: ArrayLike, requires_grad: bool = False):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.array(data, dtype=np.float64)
        if is_checked():
            _check_finite(self.data, "tensor construction")
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._op: Optional[str] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._op is None

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def __len__(self) -> int:
        return self.data.shape[0]

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise ShapeError("Division is only supported by a constant")
        return mul(self, 1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __neg__(self):
        return neg(self)

    def __getitem__(self, index):
        return take(self, index)


class Parameter(Tensor):
    """Named trainable leaf with a zero-initialized gradient."""

    def __init__(self, name: str, data: ArrayLike):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


@dataclass
class TapeEntry:
    op: str
    output: Tensor
    inputs: Tuple[Tensor, ...]
    vjp: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tape:
    """Ordered record of primitive applications."""

    def __init__(self):
        self.entries: List[TapeEntry] = []
        self._outputs = set()

    def __enter__(self) -> "Tape":
        _tapes().append(self)
        return self

    def __exit__(self, *exc) -> None:
        stack = _tapes()
        if stack and stack[-1] is self:
            stack.pop()

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, tensor: Tensor) -> bool:
        return id(tensor) in self._outputs

    def record(self, entry: TapeEntry) -> None:
        self.entries.append(entry)
        self._outputs.add(id(entry.output))


def active_tape() -> Optional[Tape]:
    stack = _tapes()
    return stack[-1] if stack else None


def as_tensor(x: ArrayLike) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(op: str, data: np.ndarray, inputs: Sequence[Tensor], vjp) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = np.asarray(data, dtype=np.float64)
    if is_checked():
        _check_finite(out.data, op)
    out.requires_grad = False
    out.grad = None
    out._op = None
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out._op = op
        tape.record(TapeEntry(op, out, tuple(inputs), vjp))
    return out


def backward(tape: Tape, loss: Tensor) -> None:
    """
    Populate `.grad` of every leaf that contributed to `loss`.

    Gradients accumulate: calling backward twice without zeroing adds up.

    Raises:
        ShapeError: If loss is not a scalar
        TapeError: If loss was not recorded on `tape`
    """
    if not isinstance(loss, Tensor) or loss.size != 1:
        raise ShapeError("backward needs a scalar loss")
    if loss not in tape:
        raise TapeError("Loss was not recorded on this tape")

    grads = {id(loss): np.ones_like(loss.data)}
    for entry in reversed(tape.entries):
        g = grads.pop(id(entry.output), None)
        if g is None:
            continue
        for inp, gi in zip(entry.inputs, entry.vjp(g)):
            if gi is None or not inp.requires_grad:
                continue
            if inp.is_leaf:
                if inp.grad is None:
                    inp.grad = np.zeros_like(inp.data)
                inp.grad += gi
            else:
                key = id(inp)
                grads[key] = grads[key] + gi if key in grads else gi


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _broadcast_check(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


# Elementwise arithmetic

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("add", a, b)

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result("add", a.data + b.data, (a, b), vjp)


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("sub", a, b)

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _result("sub", a.data - b.data, (a, b), vjp)


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Elementwise (Hadamard) product with broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("mul", a, b)

    def vjp(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _result("mul", a.data * b.data, (a, b), vjp)


def neg(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return _result("neg", -a.data, (a,), lambda g: (-g,))


def exp(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _result("exp", out, (a,), lambda g: (g * out,))


def log(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.data)
    return _result("log", out, (a,), lambda g: (g / a.data,))


def relu(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _result("relu", np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def sigmoid(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _result("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))


def clip(a: ArrayLike, low: float, high: float) -> Tensor:
    """Clamp to [low, high]; the gradient is zero outside the interval."""
    a = as_tensor(a)
    mask = (a.data >= low) & (a.data <= high)
    return _result("clip", np.clip(a.data, low, high), (a,), lambda g: (g * mask,))


# Linear algebra and shape

def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Matrix product with numpy semantics (1-D promotion, batched leading axes)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim == 0 or b.ndim == 0:
        raise ShapeError(f"matmul: scalar operand, shapes {a.shape} and {b.shape}")
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def vjp(g):
        A, B = a.data, b.data
        if A.ndim == 1 and B.ndim == 1:
            return g * B, g * A
        if A.ndim == 1:
            ga = np.matmul(B, g[..., None])[..., 0]
            gb = A[:, None] * g[..., None, :]
        elif B.ndim == 1:
            ga = g[..., None] * B
            gb = np.matmul(np.swapaxes(A, -1, -2), g[..., None])[..., 0]
        else:
            ga = np.matmul(g, np.swapaxes(B, -1, -2))
            gb = np.matmul(np.swapaxes(A, -1, -2), g)
        return _unbroadcast(ga, A.shape), _unbroadcast(gb, B.shape)

    return _result("matmul", out, (a, b), vjp)


def concat(tensors: Sequence[ArrayLike], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat: no inputs")
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError(f"concat: incompatible shapes {[t.shape for t in tensors]} on axis {axis}")
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def vjp(g):
        return np.split(g, sizes, axis=axis)

    return _result("concat", out, tensors, vjp)


def stack(tensors: Sequence[ArrayLike], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("stack: no inputs")
    try:
        out = np.stack([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError(f"stack: incompatible shapes {[t.shape for t in tensors]}")

    def vjp(g):
        return [np.take(g, i, axis=axis) for i in range(len(tensors))]

    return _result("stack", out, tensors, vjp)


def reshape(a: ArrayLike, shape: Tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {a.shape} to {shape}")
    return _result("reshape", out, (a,), lambda g: (g.reshape(a.shape),))


def swapaxes(a: ArrayLike, axis1: int = -1, axis2: int = -2) -> Tensor:
    a = as_tensor(a)
    out = np.swapaxes(a.data, axis1, axis2)
    return _result("swapaxes", out, (a,), lambda g: (np.swapaxes(g, axis1, axis2),))


def _is_basic_index(index) -> bool:
    parts = index if isinstance(index, tuple) else (index,)
    return all(isinstance(p, (int, np.integer, slice)) or p is Ellipsis or p is None for p in parts)


def take(a: ArrayLike, index) -> Tensor:
    """Indexing (ints, slices, ellipsis or integer arrays) as a recorded op."""
    a = as_tensor(a)
    try:
        out = np.array(a.data[index])
    except IndexError as e:
        raise ShapeError(f"take: {e} for shape {a.shape}")
    basic = _is_basic_index(index)

    def vjp(g):
        full = np.zeros_like(a.data)
        if basic:
            full[index] += g
        else:
            np.add.at(full, index, g)
        return (full,)

    return _result("take", out, (a,), vjp)


# Reductions

def sum(a: ArrayLike, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape),)

    return _result("sum", out, (a,), vjp)


def mean(a: ArrayLike, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    count = a.data.size if axis is None else a.data.shape[axis]
    if count == 0:
        raise ShapeError("mean: empty input")
    out = a.data.mean(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, a.shape),)

    return _result("mean", out, (a,), vjp)


# Composite primitives with closed-form gradients

def softmax(a: ArrayLike, axis: int = -1) -> Tensor:
    """
    Numerically stable softmax (max-subtraction).

    Raises:
        ShapeError: On empty input
    """
    a = as_tensor(a)
    if a.size == 0 or a.shape[axis] == 0:
        raise ShapeError("softmax: empty input")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _result("softmax", out, (a,), vjp)


def cosine_similarity(a: ArrayLike, b: ArrayLike) -> Tensor:
    """
    Cosine similarity along the last axis (leading axes broadcast).

    Raises:
        ShapeError: On unequal vector lengths
        DxPathError: If either side contains a zero vector
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim == 0 or b.ndim == 0 or a.shape[-1] != b.shape[-1]:
        raise ShapeError(f"cosine_similarity: incompatible shapes {a.shape} and {b.shape}")
    na = np.linalg.norm(a.data, axis=-1)
    nb = np.linalg.norm(b.data, axis=-1)
    if np.any(na == 0) or np.any(nb == 0):
        raise DxPathError("Cosine similarity is undefined for a zero vector")
    dot = (a.data * b.data).sum(axis=-1)
    denom = na * nb
    out = dot / denom

    def vjp(g):
        ge = np.asarray(g)[..., None]
        c = np.asarray(out)[..., None]
        ga = ge * (b.data / np.asarray(denom)[..., None] - c * a.data / (np.asarray(na)[..., None] ** 2))
        gb = ge * (a.data / np.asarray(denom)[..., None] - c * b.data / (np.asarray(nb)[..., None] ** 2))
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _result("cosine_similarity", out, (a, b), vjp)
