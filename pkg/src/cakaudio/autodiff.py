"""Reverse-mode automatic differentiation over dense float64 grids.

Every backward rule is written in terms of the public ops, so taking a
gradient can itself be recorded and differentiated again. That is what
lets the Lipschitz gradient penalty (a function of a gradient) be trained
with ordinary backprop.

Conventions:
- |x| has subgradient 0 at x = 0
- every op validates its output for NaN/Inf and raises NonFinite
- graphs are throwaway: build, differentiate, drop
"""

from __future__ import annotations

import contextlib

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .errors import NonFinite, ShapeMismatch

_grad_enabled = True


class no_grad(contextlib.AbstractContextManager):
    """Disable graph recording inside the block (forward values only)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


class Tensor:
    """A dense value plus its position in the expression graph.

    data is always float64. Shape is fixed at creation. Leaf tensors with
    requires_grad=True are the trainable parameters; backward() fills
    their .grad with a plain numpy array.
    """

    __slots__ = ("data", "requires_grad", "grad", "_inputs", "_vjp", "_op")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NonFinite("tensor created with non-finite data")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._inputs: tuple[Tensor, ...] = ()
        self._vjp = None
        self._op = "leaf"

    # -- introspection -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self._op}, grad={self.requires_grad})"

    # -- operator sugar ------------------------------------------------

    def __add__(self, other):
        return add(self, _lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __rtruediv__(self, other):
        return div(_lift(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return pow_const(self, float(p))

    # -- method forms of the common unaries ----------------------------

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def sqrt(self):
        return sqrt(self)

    def sigmoid(self):
        return sigmoid(self)

    def abs(self):
        return abs_(self)

    def leaky_relu(self, slope: float = 0.2):
        return leaky_relu(self, slope)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, shape):
        return reshape(self, shape)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _make(data: np.ndarray, inputs: tuple[Tensor, ...], vjp, op: str) -> Tensor:
    if not np.all(np.isfinite(data)):
        raise NonFinite(f"non-finite result in op '{op}'")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    if _grad_enabled and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out._inputs = inputs
        out._vjp = vjp
        out._op = op
    else:
        out.requires_grad = False
        out._inputs = ()
        out._vjp = None
        out._op = op
    return out


def _sum_to(g: Tensor, shape) -> Tensor:
    """Reduce a broadcast gradient back to the pre-broadcast shape."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = sum_(g, axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = sum_(g, axis=axes, keepdims=True)
    return reshape(g, shape)


# -- elementwise arithmetic --------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _lift(a), _lift(b)
    return _make(
        a.data + b.data,
        (a, b),
        lambda g: (_sum_to(g, a.shape), _sum_to(g, b.shape)),
        "add",
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _lift(a), _lift(b)
    return _make(
        a.data - b.data,
        (a, b),
        lambda g: (_sum_to(g, a.shape), _sum_to(neg(g), b.shape)),
        "sub",
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _lift(a), _lift(b)
    return _make(
        a.data * b.data,
        (a, b),
        lambda g: (_sum_to(mul(g, b), a.shape), _sum_to(mul(g, a), b.shape)),
        "mul",
    )


def div(a: Tensor, b: Tensor) -> Tensor:
    a, b = _lift(a), _lift(b)
    with np.errstate(all="ignore"):
        data = a.data / b.data
    return _make(
        data,
        (a, b),
        lambda g: (
            _sum_to(div(g, b), a.shape),
            _sum_to(neg(div(mul(g, a), mul(b, b))), b.shape),
        ),
        "div",
    )


def neg(a: Tensor) -> Tensor:
    a = _lift(a)
    return _make(-a.data, (a,), lambda g: (neg(g),), "neg")


def pow_const(a: Tensor, p: float) -> Tensor:
    a = _lift(a)
    with np.errstate(all="ignore"):
        data = a.data**p
    return _make(
        data,
        (a,),
        lambda g: (mul(g, mul(Tensor(np.float64(p)), pow_const(a, p - 1.0))),),
        "pow",
    )


def exp(a: Tensor) -> Tensor:
    a = _lift(a)
    with np.errstate(all="ignore"):
        data = np.exp(a.data)
    out = _make(data, (a,), None, "exp")
    if out.requires_grad:
        out._vjp = lambda g: (mul(g, out),)
    return out


def log(a: Tensor) -> Tensor:
    a = _lift(a)
    with np.errstate(all="ignore"):
        data = np.log(a.data)
    return _make(data, (a,), lambda g: (div(g, a),), "log")


def sqrt(a: Tensor) -> Tensor:
    a = _lift(a)
    with np.errstate(all="ignore"):
        data = np.sqrt(a.data)
    out = _make(data, (a,), None, "sqrt")
    if out.requires_grad:
        out._vjp = lambda g: (div(mul(g, Tensor(np.float64(0.5))), out),)
    return out


def sigmoid(a: Tensor) -> Tensor:
    a = _lift(a)
    x = a.data
    val = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out = _make(val, (a,), None, "sigmoid")
    if out.requires_grad:
        out._vjp = lambda g: (mul(g, mul(out, sub(Tensor(np.float64(1.0)), out))),)
    return out


def abs_(a: Tensor) -> Tensor:
    a = _lift(a)
    # np.sign(0) == 0, which is the declared subgradient convention
    sign = Tensor(np.sign(a.data))
    return _make(np.abs(a.data), (a,), lambda g: (mul(g, sign),), "abs")


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    a = _lift(a)
    mask = Tensor(np.where(a.data > 0, 1.0, slope))
    return _make(
        np.where(a.data > 0, a.data, slope * a.data),
        (a,),
        lambda g: (mul(g, mask),),
        "leaky_relu",
    )


# -- reductions and shape ops ------------------------------------------


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = _lift(a)
    axes = _norm_axes(axis, a.ndim)
    data = a.data.sum(axis=axes, keepdims=keepdims)

    def vjp(g):
        if not keepdims and axes is not None:
            kd = list(a.shape)
            for ax in axes:
                kd[ax] = 1
            g = reshape(g, tuple(kd))
        elif not keepdims and axes is None:
            g = reshape(g, (1,) * a.ndim)
        return (broadcast_to(g, a.shape),)

    return _make(np.asarray(data), (a,), vjp, "sum")


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = _lift(a)
    axes = _norm_axes(axis, a.ndim)
    count = a.size if axes is None else int(np.prod([a.shape[i] for i in axes]))
    return mul(sum_(a, axis, keepdims), Tensor(np.float64(1.0 / count)))


def _norm_axes(axis, ndim):
    if axis is None:
        return None
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def broadcast_to(a: Tensor, shape) -> Tensor:
    a = _lift(a)
    shape = tuple(shape)
    data = np.ascontiguousarray(np.broadcast_to(a.data, shape))
    return _make(data, (a,), lambda g: (_sum_to(g, a.shape),), "broadcast")


def reshape(a: Tensor, shape) -> Tensor:
    a = _lift(a)
    shape = tuple(shape)
    return _make(a.data.reshape(shape), (a,), lambda g: (reshape(g, a.shape),), "reshape")


def transpose2d(a: Tensor) -> Tensor:
    a = _lift(a)
    if a.ndim != 2:
        raise ShapeMismatch("transpose2d expects a matrix")
    return _make(np.ascontiguousarray(a.data.T), (a,), lambda g: (transpose2d(g),), "transpose")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of two rank-2 tensors."""
    a, b = _lift(a), _lift(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul shapes {a.shape} x {b.shape}")
    return _make(
        a.data @ b.data,
        (a, b),
        lambda g: (matmul(g, transpose2d(b)), matmul(transpose2d(a), g)),
        "matmul",
    )


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_lift(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)

    def vjp(g):
        outs, start = [], 0
        for t in tensors:
            length = t.shape[axis]
            outs.append(narrow(g, axis, start, length))
            start += length
        return tuple(outs)

    return _make(data, tuple(tensors), vjp, "concat")


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    a = _lift(a)
    index = [slice(None)] * a.ndim
    index[axis] = slice(start, start + length)
    after = a.shape[axis] - start - length
    return _make(
        np.ascontiguousarray(a.data[tuple(index)]),
        (a,),
        lambda g: (pad_axis(g, axis, start, after),),
        "narrow",
    )


def pad_axis(a: Tensor, axis: int, before: int, after: int) -> Tensor:
    a = _lift(a)
    widths = [(0, 0)] * a.ndim
    widths[axis] = (before, after)
    length = a.shape[axis]
    return _make(
        np.pad(a.data, widths),
        (a,),
        lambda g: (narrow(g, axis, before, length),),
        "pad",
    )


# -- convolution --------------------------------------------------------
# conv2d is a cross-correlation with zero padding. Its two partial
# adjoints (input gradient, weight gradient) are primitives of their own,
# and the three ops reference one another in their backward rules, which
# is exactly what makes second derivatives of conv stacks work.


def _out_hw(h, w, k, stride, pad):
    return (h + 2 * pad - k) // stride + 1, (w + 2 * pad - k) // stride + 1


def _im2col(xp: np.ndarray, k: int, stride: int, oh: int, ow: int) -> np.ndarray:
    b, c, _, _ = xp.shape
    s0, s1, s2, s3 = xp.strides
    windows = as_strided(
        xp, shape=(b, c, k, k, oh, ow), strides=(s0, s1, s2, s3, s2 * stride, s3 * stride)
    )
    return windows.reshape(b, c * k * k, oh * ow)


def _col2im(cols: np.ndarray, shape, k: int, stride: int, oh: int, ow: int) -> np.ndarray:
    b, c, hp, wp = shape
    out = np.zeros(shape, dtype=np.float64)
    c6 = cols.reshape(b, c, k, k, oh, ow)
    for u in range(k):
        for v in range(k):
            out[:, :, u : u + (oh - 1) * stride + 1 : stride, v : v + (ow - 1) * stride + 1 : stride] += c6[
                :, :, u, v
            ]
    return out


def _conv_fwd_np(x, w, stride, pad):
    b, c, h, wd = x.shape
    o, _, k, _ = w.shape
    oh, ow = _out_hw(h, wd, k, stride, pad)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = _im2col(xp, k, stride, oh, ow)
    out = np.matmul(w.reshape(o, -1), cols)
    return out.reshape(b, o, oh, ow)


def _conv_dx_np(z, w, hw, stride, pad):
    b, o, oh, ow = z.shape
    _, c, k, _ = w.shape
    h, wd = hw
    cols = np.matmul(w.reshape(o, -1).T, z.reshape(b, o, -1))
    xp = _col2im(cols, (b, c, h + 2 * pad, wd + 2 * pad), k, stride, oh, ow)
    return np.ascontiguousarray(xp[:, :, pad : pad + h, pad : pad + wd])


def _conv_dw_np(z, x, k, stride, pad):
    b, c, h, wd = x.shape
    o, oh, ow = z.shape[1], z.shape[2], z.shape[3]
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = _im2col(xp, k, stride, oh, ow)
    zm = z.reshape(b, o, -1)
    return np.matmul(zm, cols.transpose(0, 2, 1)).sum(axis=0).reshape(o, c, k, k)


def _conv_fwd_op(x: Tensor, w: Tensor, stride: int, pad: int) -> Tensor:
    hw = x.shape[2:]
    k = w.shape[2]
    return _make(
        _conv_fwd_np(x.data, w.data, stride, pad),
        (x, w),
        lambda g: (
            _conv_dx_op(g, w, hw, stride, pad),
            _conv_dw_op(g, x, k, stride, pad),
        ),
        "conv2d",
    )


def _conv_dx_op(z: Tensor, w: Tensor, hw, stride: int, pad: int) -> Tensor:
    k = w.shape[2]
    return _make(
        _conv_dx_np(z.data, w.data, hw, stride, pad),
        (z, w),
        lambda g: (
            _conv_fwd_op(g, w, stride, pad),
            _conv_dw_op(z, g, k, stride, pad),
        ),
        "conv2d_dx",
    )


def _conv_dw_op(z: Tensor, x: Tensor, k: int, stride: int, pad: int) -> Tensor:
    hw = x.shape[2:]
    return _make(
        _conv_dw_np(z.data, x.data, k, stride, pad),
        (z, x),
        lambda g: (
            _conv_fwd_op(x, g, stride, pad),
            _conv_dx_op(z, g, hw, stride, pad),
        ),
        "conv2d_dw",
    )


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, padding: int = 1) -> Tensor:
    """2-D cross-correlation, NCHW layout, square kernel, zero padding.

    x: (B, Cin, H, W), w: (Cout, Cin, k, k), b: (Cout,). With k=3 and
    padding=1 the spatial size is preserved at stride 1 and halved
    (rounded up for even sizes) at stride 2.
    """
    x, w = _lift(x), _lift(w)
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeMismatch("conv2d expects 4-D input and weights")
    if x.shape[1] != w.shape[1]:
        raise ShapeMismatch(f"channel mismatch: input {x.shape[1]}, weights {w.shape[1]}")
    if w.shape[2] != w.shape[3]:
        raise ShapeMismatch("conv2d kernel must be square")
    out = _conv_fwd_op(x, w, stride, padding)
    if b is not None:
        b = _lift(b)
        out = add(out, reshape(b, (1, b.size, 1, 1)))
    return out


# -- norms ---------------------------------------------------------------


def l1_norm(a: Tensor, axis=None) -> Tensor:
    return sum_(abs_(a), axis)


def l2_norm(a: Tensor, axis=None, eps: float = 1e-12) -> Tensor:
    # eps keeps the sqrt differentiable when the argument is exactly zero
    return sqrt(add(sum_(mul(a, a), axis), Tensor(np.float64(eps))))


# -- differentiation ------------------------------------------------------


def _topo(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._inputs:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def grad(output: Tensor, inputs, create_graph: bool = False) -> list[Tensor]:
    """Gradients of a scalar output with respect to the given tensors.

    With create_graph=True the returned gradients are themselves graph
    nodes and can be differentiated again.
    """
    if output.size != 1:
        raise ValueError("grad root must be a scalar")
    order = _topo(output)
    grads: dict[int, Tensor] = {id(output): Tensor(np.ones_like(output.data))}
    ctx = contextlib.nullcontext() if create_graph else no_grad()
    with ctx:
        for node in reversed(order):
            g = grads.get(id(node))
            if g is None or node._vjp is None:
                continue
            for parent, piece in zip(node._inputs, node._vjp(g)):
                if piece is None or not parent.requires_grad:
                    continue
                held = grads.get(id(parent))
                grads[id(parent)] = piece if held is None else add(held, piece)
    result = []
    for t in inputs:
        g = grads.get(id(t))
        result.append(g if g is not None else Tensor(np.zeros_like(t.data)))
    return result


def backward(loss: Tensor) -> None:
    """Populate .grad (plain numpy) on every trainable leaf under loss."""
    leaves = [n for n in _topo(loss) if n._vjp is None and n.requires_grad]
    for leaf, g in zip(leaves, grad(loss, leaves)):
        leaf.grad = g.data
