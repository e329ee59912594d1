"""
Dense Tensors with Reverse-Mode Automatic Differentiation

This module provides the numeric core of the toolkit: a float32 ``Tensor``
backed by numpy, a dynamic tape that records every differentiable operation
executed while gradients are enabled, and exactly the operation set the
encoder, generator heads, mask decoder and critic need (convolution,
transposed convolution, dense layers, three activations, channel softmax,
elementwise arithmetic, concatenation, reshaping and reductions).

The tape is rebuilt on every forward pass. ``backward`` replays the recorded
backward rules in reverse execution order and accumulates gradients into leaf
tensors until they are explicitly zeroed.
"""

import itertools
import threading
from contextlib import contextmanager
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np


DEFAULT_DTYPE = np.float32

Scalar = Union[int, float]
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


class ShapeError(ValueError):
    """Raised when operand shapes are inconsistent for an operation."""


class _GradMode(threading.local):
    enabled = True


_grad_mode = _GradMode()
_sequence = itertools.count()


@contextmanager
def no_grad():
    """Context manager that disables tape recording in the current thread."""
    previous = _grad_mode.enabled
    _grad_mode.enabled = False
    try:
        yield
    finally:
        _grad_mode.enabled = previous


def is_grad_enabled() -> bool:
    """Return True when operations are being recorded on the tape."""
    return _grad_mode.enabled


class TapeEntry:
    """One executed operation: its inputs, its backward rule and its position."""

    __slots__ = ("op", "parents", "backward_fn", "seq")

    def __init__(self, op: str, parents: Tuple["Tensor", ...], backward_fn: BackwardFn, seq: int):
        self.op = op
        self.parents = parents
        self.backward_fn = backward_fn
        self.seq = seq


class Tensor:
    """
    Dense n-dimensional array with optional gradient tape participation.

    Leaf tensors created with ``requires_grad=True`` own a same-shape ``grad``
    accumulator (initially zero). Tensors produced by operations carry the
    tape entry that created them while gradients are enabled.
    """

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: str = ""):
        """
        Create a leaf tensor.

        Args:
            data: Array-like payload, copied only when a dtype conversion is needed
            requires_grad: Whether gradients should be accumulated into this tensor
            dtype: numpy dtype (float32 unless asked otherwise)
            name: Optional name used in error messages and checkpoints
        """
        self.data = np.ascontiguousarray(np.asarray(data, dtype=dtype or DEFAULT_DTYPE))
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = np.zeros_like(self.data) if requires_grad else None
        self.name = name
        self._entry: Optional[TapeEntry] = None

    @classmethod
    def _from_op(cls, data: np.ndarray, parents: Sequence["Tensor"], op: str,
                 backward_fn: BackwardFn) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.name = op
        track = _grad_mode.enabled and any(p.requires_grad for p in parents)
        out.requires_grad = track
        out._entry = TapeEntry(op, tuple(parents), backward_fn, next(_sequence)) if track else None
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def op(self) -> Optional[str]:
        """Name of the recorded operation that produced this tensor, if any."""
        return self._entry.op if self._entry is not None else None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        """Return a tensor sharing this data with no tape history."""
        return Tensor(self.data, dtype=self.data.dtype, name=self.name)

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label})"

    # Operator sugar over the registered elementwise operations
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other, like=self), self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return scale(self, -1.0)


def _as_tensor(value, like: Optional[Tensor] = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else DEFAULT_DTYPE
    return Tensor(np.asarray(value, dtype=dtype), dtype=dtype)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# Tape replay
# ---------------------------------------------------------------------------

class Tape:
    """
    Ordered record of the operations reachable from a root tensor.

    Entries are kept in execution order; ``replay`` walks them backwards,
    which is always a valid reverse topological order because every output
    is recorded after its inputs.
    """

    def __init__(self, nodes: List[Tensor]):
        self.nodes = nodes

    @classmethod
    def collect(cls, root: Tensor) -> "Tape":
        seen = set()
        stack = [root]
        nodes: List[Tensor] = []
        while stack:
            tensor = stack.pop()
            if id(tensor) in seen or tensor._entry is None:
                continue
            seen.add(id(tensor))
            nodes.append(tensor)
            stack.extend(tensor._entry.parents)
        nodes.sort(key=lambda t: t._entry.seq)
        return cls(nodes)

    def ops(self) -> List[str]:
        return [node._entry.op for node in self.nodes]

    def __len__(self) -> int:
        return len(self.nodes)

    def replay(self, root: Tensor, seed_grad: np.ndarray) -> None:
        pending: Dict[int, np.ndarray] = {id(root): seed_grad}
        for node in reversed(self.nodes):
            grad = pending.pop(id(node), None)
            if grad is None:
                continue
            entry = node._entry
            parent_grads = entry.backward_fn(grad)
            for parent, parent_grad in zip(entry.parents, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                parent_grad = np.asarray(parent_grad, dtype=parent.dtype)
                if parent_grad.shape != parent.shape:
                    raise ShapeError(
                        f"{entry.op}: backward produced gradient of shape {parent_grad.shape} "
                        f"for an input of shape {parent.shape}"
                    )
                if parent._entry is None:
                    if parent.grad is None:
                        parent.grad = np.zeros_like(parent.data)
                    parent.grad += parent_grad
                elif id(parent) in pending:
                    pending[id(parent)] = pending[id(parent)] + parent_grad
                else:
                    pending[id(parent)] = parent_grad


def backward(loss: Tensor) -> None:
    """
    Populate gradients of every requires_grad ancestor of a scalar loss.

    Gradients accumulate across calls until zeroed with :func:`zero_grads`.

    Raises:
        ShapeError: If the loss is not a single-element tensor
        ValueError: If the loss is not attached to the tape
    """
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    seed = np.ones_like(loss.data)
    if loss._entry is None:
        if not loss.requires_grad:
            raise ValueError("backward called on a tensor that is not on the tape")
        loss.grad = loss.grad + seed if loss.grad is not None else seed
        return
    Tape.collect(loss).replay(loss, seed)


def zero_grads(tensors: Iterable[Tensor]) -> None:
    """Reset gradient accumulators to zero."""
    for tensor in tensors:
        tensor.zero_grad()


def grads_finite(tensors: Iterable[Tensor]) -> bool:
    """True when every populated gradient is free of NaN and Inf."""
    return all(t.grad is None or bool(np.all(np.isfinite(t.grad))) for t in tensors)


# ---------------------------------------------------------------------------
# Elementwise arithmetic, concatenation, reshaping, reductions
# ---------------------------------------------------------------------------

def _broadcast_check(kind: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{kind}: shapes {a.shape} and {b.shape} are not broadcast-compatible")


def add(a, b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b, like=a)
    _broadcast_check("add", a, b)

    def _backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor._from_op(a.data + b.data, (a, b), "add", _backward)


def sub(a, b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b, like=a)
    _broadcast_check("sub", a, b)

    def _backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return Tensor._from_op(a.data - b.data, (a, b), "sub", _backward)


def mul(a, b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b, like=a)
    _broadcast_check("mul", a, b)

    def _backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor._from_op(a.data * b.data, (a, b), "mul", _backward)


def scale(a: Tensor, factor: Scalar) -> Tensor:
    factor = float(factor)

    def _backward(g):
        return (g * factor,)

    return Tensor._from_op(a.data * a.dtype.type(factor), (a,), "scale", _backward)


def elementwise(kind: str, a: Tensor, b) -> Tensor:
    """
    Dispatch one of the elementwise operations by name.

    Args:
        kind: ``"add"``, ``"sub"``, ``"mul"`` or ``"scale"``
        a: Left operand
        b: Right operand (a scalar for ``"scale"``)
    """
    if kind == "scale":
        if isinstance(b, Tensor):
            raise ValueError("scale takes a scalar factor")
        return scale(a, b)
    ops = {"add": add, "sub": sub, "mul": mul}
    if kind not in ops:
        raise ValueError(f"Unknown elementwise operation: {kind}")
    return ops[kind](a, b)


def concat_channels(parts: Sequence[Tensor], axis: int = 1) -> Tensor:
    """Concatenate tensors along the channel axis (axis 1 by default)."""
    if not parts:
        raise ShapeError("concat_channels needs at least one tensor")
    first = parts[0]
    for index, part in enumerate(parts[1:], start=1):
        if part.ndim != first.ndim:
            raise ShapeError(
                f"concat_channels: part {index} has {part.ndim} dims, expected {first.ndim}"
            )
        for dim in range(first.ndim):
            if dim != axis and part.shape[dim] != first.shape[dim]:
                raise ShapeError(
                    f"concat_channels: part {index} has extent {part.shape[dim]} on dim {dim}, "
                    f"expected {first.shape[dim]}"
                )
    sizes = [p.shape[axis] for p in parts]
    boundaries = np.cumsum(sizes)[:-1]

    def _backward(g):
        return tuple(np.split(g, boundaries, axis=axis))

    data = np.concatenate([p.data for p in parts], axis=axis)
    return Tensor._from_op(data, tuple(parts), "concat_channels", _backward)


def slice_channels(x: Tensor, start: int, stop: int) -> Tensor:
    """Take channels ``start:stop`` of axis 1."""
    if x.ndim < 2 or not 0 <= start < stop <= x.shape[1]:
        raise ShapeError(f"slice_channels: range {start}:{stop} invalid for shape {x.shape}")

    def _backward(g):
        full = np.zeros_like(x.data)
        full[:, start:stop] = g
        return (full,)

    return Tensor._from_op(x.data[:, start:stop].copy(), (x,), "slice_channels", _backward)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        data = x.data.reshape(tuple(shape))
    except ValueError:
        raise ShapeError(f"reshape: cannot view shape {x.shape} as {tuple(shape)}")

    def _backward(g):
        return (g.reshape(x.shape),)

    return Tensor._from_op(data, (x,), "reshape", _backward)


def reduce_mean(x: Tensor) -> Tensor:
    """Mean of all entries as a scalar tensor."""
    if x.size == 0:
        raise ShapeError("reduce_mean of an empty tensor")
    count = x.size

    def _backward(g):
        return (np.full(x.shape, g / count, dtype=x.dtype),)

    return Tensor._from_op(np.asarray(x.data.mean(), dtype=x.dtype), (x,), "reduce_mean", _backward)


def reduce_sum(x: Tensor) -> Tensor:
    """Sum of all entries as a scalar tensor."""

    def _backward(g):
        return (np.full(x.shape, g, dtype=x.dtype),)

    return Tensor._from_op(np.asarray(x.data.sum(), dtype=x.dtype), (x,), "reduce_sum", _backward)


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------

def leaky_relu(x: Tensor, alpha: float = 0.2) -> Tensor:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"leaky_relu slope must be in (0, 1), got {alpha}")
    positive = x.data > 0
    slope = np.where(positive, 1.0, alpha).astype(x.dtype)

    def _backward(g):
        return (g * slope,)

    return Tensor._from_op(x.data * slope, (x,), "leaky_relu", _backward)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def _backward(g):
        return (g * (1.0 - out * out),)

    return Tensor._from_op(out, (x,), "tanh", _backward)


def sigmoid(x: Tensor) -> Tensor:
    # tanh form does not overflow for large |x|
    out = (0.5 * (1.0 + np.tanh(0.5 * x.data))).astype(x.dtype)

    def _backward(g):
        return (g * out * (1.0 - out),)

    return Tensor._from_op(out, (x,), "sigmoid", _backward)


def activation(kind: str, x: Tensor, alpha: float = 0.2) -> Tensor:
    """
    Apply an elementwise nonlinearity.

    Args:
        kind: ``"leaky_relu"``, ``"tanh"`` or ``"sigmoid"``
        x: Input tensor
        alpha: Negative slope for leaky_relu
    """
    if kind == "leaky_relu":
        return leaky_relu(x, alpha)
    if kind == "tanh":
        return tanh(x)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ValueError(f"Unknown activation: {kind}")


def softmax_channels(x: Tensor) -> Tensor:
    """Softmax over axis 1 with max-subtraction; outputs are positive and sum to 1."""
    if x.ndim < 2 or x.shape[1] < 1:
        raise ShapeError(f"softmax_channels needs a channel axis, got shape {x.shape}")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    out = exp / exp.sum(axis=1, keepdims=True)

    def _backward(g):
        return (out * (g - (g * out).sum(axis=1, keepdims=True)),)

    return Tensor._from_op(out, (x,), "softmax_channels", _backward)


# ---------------------------------------------------------------------------
# Dense and convolutional layers
# ---------------------------------------------------------------------------

def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Row-wise affine map ``x @ weight.T + bias``."""
    if x.ndim != 2:
        raise ShapeError(f"dense: input must be [N, Din], got shape {x.shape}")
    if weight.ndim != 2 or weight.shape[1] != x.shape[1]:
        raise ShapeError(
            f"dense: Din mismatch, input has {x.shape[1]} features but weight is {weight.shape}"
        )
    if bias.shape != (weight.shape[0],):
        raise ShapeError(f"dense: bias shape {bias.shape} does not match Dout={weight.shape[0]}")

    def _backward(g):
        return g @ weight.data, g.T @ x.data, g.sum(axis=0)

    out = x.data @ weight.data.T + bias.data
    return Tensor._from_op(out, (x, weight, bias), "dense", _backward)


def conv_output_extent(extent: int, kernel: int, stride: int, padding: int) -> int:
    return (extent + 2 * padding - kernel) // stride + 1


def transposed_output_extent(extent: int, kernel: int, stride: int, padding: int) -> int:
    return (extent - 1) * stride - 2 * padding + kernel


def _im2col(padded: np.ndarray, kh: int, kw: int, stride: int, ho: int, wo: int) -> np.ndarray:
    n, c = padded.shape[:2]
    sn, sc, sh, sw = padded.strides
    patches = np.lib.stride_tricks.as_strided(
        padded,
        shape=(n, c, kh, kw, ho, wo),
        strides=(sn, sc, sh, sw, stride * sh, stride * sw),
        writeable=False,
    )
    return patches.reshape(n, c * kh * kw, ho * wo)


def _col2im(cols: np.ndarray, padded_shape: Tuple[int, int, int, int],
            kh: int, kw: int, stride: int, ho: int, wo: int) -> np.ndarray:
    n, c = padded_shape[:2]
    out = np.zeros(padded_shape, dtype=cols.dtype)
    cols = cols.reshape(n, c, kh, kw, ho, wo)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += cols[:, :, i, j]
    return out


def _pad_spatial(data: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return data
    return np.pad(data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def _check_conv_common(op: str, x: Tensor, kernel: Tensor, stride: int, padding: int) -> None:
    if x.ndim != 4:
        raise ShapeError(f"{op}: input must be [N, C, H, W], got shape {x.shape}")
    if kernel.ndim != 4:
        raise ShapeError(f"{op}: kernel must be 4-dimensional, got shape {kernel.shape}")
    if stride < 1:
        raise ShapeError(f"{op}: stride must be positive, got {stride}")
    if padding < 0:
        raise ShapeError(f"{op}: padding must be non-negative, got {padding}")


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """
    2-D cross-correlation with zero padding.

    Args:
        x: Input ``[N, Cin, H, W]``
        kernel: Kernel ``[Cout, Cin, kh, kw]``
        bias: Bias ``[Cout]``
        stride: Step between output samples
        padding: Zero border added on every side

    Returns:
        Output ``[N, Cout, H', W']`` with ``H' = (H + 2*padding - kh) // stride + 1``
    """
    _check_conv_common("conv2d", x, kernel, stride, padding)
    n, cin, h, w = x.shape
    cout, kcin, kh, kw = kernel.shape
    if kcin != cin:
        raise ShapeError(f"conv2d: input has {cin} channels but kernel expects {kcin} (Cin)")
    if bias.shape != (cout,):
        raise ShapeError(f"conv2d: bias shape {bias.shape} does not match Cout={cout}")
    if kh > h + 2 * padding:
        raise ShapeError(f"conv2d: kernel height {kh} exceeds padded input height {h + 2 * padding}")
    if kw > w + 2 * padding:
        raise ShapeError(f"conv2d: kernel width {kw} exceeds padded input width {w + 2 * padding}")

    ho = conv_output_extent(h, kh, stride, padding)
    wo = conv_output_extent(w, kw, stride, padding)
    padded = _pad_spatial(x.data, padding)
    cols = _im2col(padded, kh, kw, stride, ho, wo)
    wmat = kernel.data.reshape(cout, -1)
    out = (np.matmul(wmat, cols) + bias.data[:, None]).reshape(n, cout, ho, wo)

    def _backward(g):
        gm = g.reshape(n, cout, ho * wo)
        g_bias = gm.sum(axis=(0, 2))
        g_kernel = np.tensordot(gm, cols, axes=([0, 2], [0, 2])).reshape(kernel.shape)
        g_padded = _col2im(np.matmul(wmat.T, gm), padded.shape, kh, kw, stride, ho, wo)
        g_x = g_padded[:, :, padding:padding + h, padding:padding + w]
        return g_x, g_kernel, g_bias

    return Tensor._from_op(out, (x, kernel, bias), "conv2d", _backward)


def transposed_conv2d(x: Tensor, kernel: Tensor, bias: Tensor, stride: int = 1,
                      padding: int = 0) -> Tensor:
    """
    Transposed 2-D convolution (the input-gradient of :func:`conv2d`).

    Args:
        x: Input ``[N, Cin, H, W]``
        kernel: Kernel ``[Cin, Cout, kh, kw]``
        bias: Bias ``[Cout]``
        stride: Upsampling stride
        padding: Border cropped from every side of the full output

    Returns:
        Output ``[N, Cout, H'', W'']`` with ``H'' = (H - 1)*stride - 2*padding + kh``
    """
    _check_conv_common("transposed_conv2d", x, kernel, stride, padding)
    n, cin, h, w = x.shape
    kcin, cout, kh, kw = kernel.shape
    if kcin != cin:
        raise ShapeError(f"transposed_conv2d: input has {cin} channels but kernel expects {kcin} (Cin)")
    if bias.shape != (cout,):
        raise ShapeError(f"transposed_conv2d: bias shape {bias.shape} does not match Cout={cout}")
    ho = transposed_output_extent(h, kh, stride, padding)
    wo = transposed_output_extent(w, kw, stride, padding)
    if ho < 1 or wo < 1:
        raise ShapeError(f"transposed_conv2d: padding {padding} leaves an empty output ({ho}x{wo})")

    full_shape = (n, cout, (h - 1) * stride + kh, (w - 1) * stride + kw)
    wmat = kernel.data.reshape(cin, cout * kh * kw)
    xm = x.data.reshape(n, cin, h * w)
    full = _col2im(np.matmul(wmat.T, xm), full_shape, kh, kw, stride, h, w)
    out = full[:, :, padding:padding + ho, padding:padding + wo] + bias.data[:, None, None]

    def _backward(g):
        g_cols = _im2col(_pad_spatial(g, padding), kh, kw, stride, h, w)
        g_x = np.matmul(wmat, g_cols).reshape(x.shape)
        g_kernel = np.tensordot(xm, g_cols, axes=([0, 2], [0, 2])).reshape(kernel.shape)
        return g_x, g_kernel, g.sum(axis=(0, 2, 3))

    return Tensor._from_op(np.ascontiguousarray(out), (x, kernel, bias), "transposed_conv2d", _backward)


# ---------------------------------------------------------------------------
# Finite-difference oracle
# ---------------------------------------------------------------------------

def _scalar_value(value) -> float:
    if isinstance(value, Tensor):
        return value.item()
    return float(value)


def finite_difference_gradient(f: Callable[[Tensor], Union[Tensor, float]], x: Tensor,
                               h: float = 1e-3) -> Tensor:
    """
    Central-difference gradient of a scalar function, in double precision.

    Args:
        f: Deterministic scalar function of one tensor
        x: Point at which to differentiate
        h: Step size

    Returns:
        float64 tensor of ``(f(x + h e_i) - f(x - h e_i)) / 2h``
    """
    if h <= 0:
        raise ValueError(f"finite difference step must be positive, got {h}")
    point = np.array(x.data, dtype=np.float64)
    flat = point.reshape(-1)
    grad = np.zeros_like(flat)
    with no_grad():
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            plus = _scalar_value(f(Tensor(point.copy(), dtype=np.float64)))
            flat[i] = original - h
            minus = _scalar_value(f(Tensor(point.copy(), dtype=np.float64)))
            flat[i] = original
            grad[i] = (plus - minus) / (2.0 * h)
    return Tensor(grad.reshape(point.shape), dtype=np.float64)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Largest absolute deviation scaled by the larger gradient magnitude."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale_ = max(float(np.max(np.abs(analytic), initial=0.0)),
                 float(np.max(np.abs(numeric), initial=0.0)), 1e-12)
    return float(np.max(np.abs(analytic - numeric), initial=0.0)) / scale_


def gradient_check(fn: Callable[..., Tensor], inputs: Sequence[np.ndarray], h: float = 1e-3) -> float:
    """
    Compare backward against central differences for every input of ``fn``.

    Both sides run in float64.

    Args:
        fn: Function of ``len(inputs)`` tensors returning a scalar tensor
        inputs: Point at which to check
        h: Finite-difference step

    Returns:
        Maximum relative error over all inputs
    """
    leaves = [Tensor(np.array(a, dtype=np.float64), requires_grad=True, dtype=np.float64)
              for a in inputs]
    backward(fn(*leaves))
    worst = 0.0
    for index, leaf in enumerate(leaves):
        def partial(candidate: Tensor, index: int = index) -> Tensor:
            args = [candidate if j == index else Tensor(other.data, dtype=np.float64)
                    for j, other in enumerate(leaves)]
            return fn(*args)

        numeric = finite_difference_gradient(partial, leaf, h)
        worst = max(worst, relative_error(leaf.grad, numeric.data))
    return worst
