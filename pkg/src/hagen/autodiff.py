"""Dense float64 tensors with reverse-mode differentiation.

Every array that participates in model math is a :class:`Tensor`.  Operations
record their inputs so that :func:`backward` can push gradients from a scalar
loss back to every participating leaf.  Learnable leaves are wrapped in
:class:`Parameter`, which keeps a persistent gradient accumulator: two
`backward` calls without `zero_grad` in between accumulate exactly twice the
single-call gradient.

Shape discipline is strict: binary elementwise operations accept equal shapes
or a python scalar, nothing else.  Bias addition and gate weighting over
leading batch axes are separate named operations (`add_bias`, `mul_gate`) so
that every remaining shape mismatch fails loudly.

:func:`finite_diff_grad` is the independent gradient oracle used by the test
suite and the `gradcheck` command; it never touches the recorded graph.
"""

from __future__ import annotations

import numpy as np

from .exceptions import ContractError, DimensionError


def _as_f64(data):
    arr = np.asarray(data, dtype=np.float64)
    return arr


class Tensor:
    """A dense float64 array, optionally recorded for differentiation.

    Attributes:
        data: the numpy array holding the values (never shared with callers'
            mutable state unless they mutate `data` deliberately).
        requires_grad: whether gradients flow to/through this tensor.
        grad: for leaves only, the persistent gradient accumulator.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad=False):
        self.data = _as_f64(data)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward_fn = None

    # -- construction helpers -------------------------------------------------

    @classmethod
    def _from_op(cls, data, parents, backward_fn):
        out = cls.__new__(cls)
        out.data = data
        out.requires_grad = any(p.requires_grad for p in parents)
        out.grad = None
        if out.requires_grad:
            out._parents = tuple(parents)
            out._backward_fn = backward_fn
        else:
            out._parents = ()
            out._backward_fn = None
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of shape {self.data.shape}")
        return float(self.data.reshape(()))

    def numpy(self):
        return self.data

    def detach(self):
        """A constant copy that does not participate in differentiation."""
        return Tensor(self.data.copy(), requires_grad=False)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- operator sugar (all strict-shape, see module functions) --------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


class Parameter:
    """Named learnable tensor with a persistent gradient accumulator."""

    __slots__ = ("name", "tensor")

    def __init__(self, name, data):
        self.name = name
        self.tensor = Tensor(data, requires_grad=True)
        self.tensor.grad = np.zeros_like(self.tensor.data)

    @property
    def data(self):
        return self.tensor.data

    @data.setter
    def data(self, value):
        arr = _as_f64(value)
        if arr.shape != self.tensor.data.shape:
            raise DimensionError(
                f"parameter '{self.name}': cannot assign shape {arr.shape} "
                f"over {self.tensor.data.shape}"
            )
        self.tensor.data = arr

    @property
    def grad(self):
        return self.tensor.grad

    @property
    def shape(self):
        return self.tensor.data.shape

    def zero_grad(self):
        self.tensor.grad[...] = 0.0

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


def _coerce(x):
    if isinstance(x, Tensor):
        return x
    if np.isscalar(x):
        return Tensor(np.float64(x))
    raise ContractError(f"expected Tensor or scalar, got {type(x).__name__}")


def _binary_shapes(a, b, opname):
    """Equal shapes, or one side scalar.  Returns (a, b) as tensors."""
    a, b = _coerce(a), _coerce(b)
    if a.data.shape != b.data.shape and a.data.ndim != 0 and b.data.ndim != 0:
        raise DimensionError(
            f"{opname}: operand shapes {a.data.shape} and {b.data.shape} differ"
        )
    return a, b


def _reduce_to(grad, shape):
    # inverse of the scalar-with-tensor broadcast
    if grad.shape == shape:
        return grad
    return grad.sum().reshape(shape)


# -- elementwise -------------------------------------------------------------


def add(a, b):
    a, b = _binary_shapes(a, b, "add")
    out_data = a.data + b.data

    def bwd(g):
        return _reduce_to(g, a.data.shape), _reduce_to(g, b.data.shape)

    return Tensor._from_op(out_data, (a, b), bwd)


def madd(tensors):
    """Sum of equally shaped tensors as a single graph node."""
    tensors = [_coerce(t) for t in tensors]
    if not tensors:
        raise ContractError("madd: needs at least one tensor")
    shape = tensors[0].data.shape
    for t in tensors[1:]:
        if t.data.shape != shape:
            raise DimensionError(
                f"madd: mismatched shapes {shape} vs {t.data.shape}"
            )
    out_data = tensors[0].data.copy()
    for t in tensors[1:]:
        out_data += t.data
    n = len(tensors)

    def bwd(g):
        return (g,) * n

    return Tensor._from_op(out_data, tuple(tensors), bwd)


def sub(a, b):
    a, b = _binary_shapes(a, b, "sub")
    out_data = a.data - b.data

    def bwd(g):
        return _reduce_to(g, a.data.shape), _reduce_to(-g, b.data.shape)

    return Tensor._from_op(out_data, (a, b), bwd)


def mul(a, b):
    """Hadamard product on equal shapes, or scaling by a scalar."""
    a, b = _binary_shapes(a, b, "mul")
    out_data = a.data * b.data

    def bwd(g):
        return _reduce_to(g * b.data, a.data.shape), _reduce_to(g * a.data, b.data.shape)

    return Tensor._from_op(out_data, (a, b), bwd)


def div(a, b):
    a, b = _binary_shapes(a, b, "div")
    out_data = a.data / b.data

    def bwd(g):
        ga = _reduce_to(g / b.data, a.data.shape)
        gb = _reduce_to(-g * a.data / (b.data * b.data), b.data.shape)
        return ga, gb

    return Tensor._from_op(out_data, (a, b), bwd)


def neg(a):
    a = _coerce(a)
    return Tensor._from_op(-a.data, (a,), lambda g: (-g,))


def tanh(a):
    a = _coerce(a)
    out_data = np.tanh(a.data)

    def bwd(g):
        return (g * (1.0 - out_data * out_data),)

    return Tensor._from_op(out_data, (a,), bwd)


def sigmoid(a):
    a = _coerce(a)
    # stable two-branch form, exact for large |x|
    out_data = np.where(
        a.data >= 0,
        1.0 / (1.0 + np.exp(-np.abs(a.data))),
        np.exp(-np.abs(a.data)) / (1.0 + np.exp(-np.abs(a.data))),
    )

    def bwd(g):
        return (g * out_data * (1.0 - out_data),)

    return Tensor._from_op(out_data, (a,), bwd)


def relu(a):
    a = _coerce(a)
    mask = a.data > 0  # gradient at exactly 0 is 0
    out_data = np.where(mask, a.data, 0.0)

    def bwd(g):
        return (g * mask,)

    return Tensor._from_op(out_data, (a,), bwd)


def log(a):
    a = _coerce(a)
    out_data = np.log(a.data)

    def bwd(g):
        return (g / a.data,)

    return Tensor._from_op(out_data, (a,), bwd)


def clip(a, lo, hi):
    """Clamp values to [lo, hi]; gradient is 1 strictly inside, 0 outside."""
    a = _coerce(a)
    out_data = np.clip(a.data, lo, hi)
    mask = (a.data > lo) & (a.data < hi)

    def bwd(g):
        return (g * mask,)

    return Tensor._from_op(out_data, (a,), bwd)


# -- structural --------------------------------------------------------------


def matmul(a, b):
    """Matrix product.

    Accepts 2Dx2D, and the batched forms 2Dx3D / 3Dx2D / 3Dx3D where leading
    axes follow numpy matmul semantics with the 2D operand shared across the
    batch.  Inner extents must agree.
    """
    a, b = _coerce(a), _coerce(b)
    if a.data.ndim not in (2, 3) or b.data.ndim not in (2, 3):
        raise DimensionError(
            f"matmul: operands must be 2D or 3D, got {a.data.shape} @ {b.data.shape}"
        )
    if a.data.shape[-1] != b.data.shape[-2]:
        raise DimensionError(
            f"matmul: inner extents disagree for {a.data.shape} @ {b.data.shape}"
        )
    if (
        a.data.ndim == 3
        and b.data.ndim == 3
        and a.data.shape[0] != b.data.shape[0]
    ):
        raise DimensionError(
            f"matmul: batch extents disagree for {a.data.shape} @ {b.data.shape}"
        )
    out_data = np.matmul(a.data, b.data)
    need_a, need_b = a.requires_grad, b.requires_grad

    def bwd(g):
        ga = gb = None
        if need_a:
            if a.data.ndim == 2 and g.ndim == 3:
                # sum over batch and trailing axis in one contraction
                ga = np.tensordot(g, b.data, axes=([0, 2], [0, 2]))
            else:
                ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        if need_b:
            if b.data.ndim == 2 and g.ndim == 3:
                gb = np.tensordot(a.data, g, axes=([0, 1], [0, 1]))
            else:
                gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return ga, gb

    return Tensor._from_op(out_data, (a, b), bwd)


def transpose(a):
    """Swap the last two axes."""
    a = _coerce(a)
    if a.data.ndim < 2:
        raise DimensionError(f"transpose: needs >= 2 axes, got shape {a.data.shape}")
    out_data = np.swapaxes(a.data, -1, -2)

    def bwd(g):
        return (np.swapaxes(g, -1, -2),)

    return Tensor._from_op(out_data, (a,), bwd)


def reshape(a, shape):
    a = _coerce(a)
    out_data = a.data.reshape(shape)
    in_shape = a.data.shape

    def bwd(g):
        return (g.reshape(in_shape),)

    return Tensor._from_op(out_data, (a,), bwd)


def concat(tensors, axis=-1):
    tensors = [_coerce(t) for t in tensors]
    if not tensors:
        raise ContractError("concat: empty tensor list")
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor._from_op(out_data, tuple(tensors), bwd)


def tsum(a, axis=None, keepdims=False):
    """Summation; `axis=None` reduces to a scalar-shaped tensor."""
    a = _coerce(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)
    in_shape = a.data.shape

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g, in_shape).copy(),)
        gg = g
        if not keepdims:
            axes = (axis,) if isinstance(axis, int) else tuple(axis)
            for ax in sorted(ax % len(in_shape) for ax in axes):
                gg = np.expand_dims(gg, axis=ax)
        return (np.broadcast_to(gg, in_shape).copy(),)

    return Tensor._from_op(out_data, (a,), bwd)


def diag(v):
    """Embed a vector (N,) or column (N,1) as an NxN diagonal matrix."""
    v = _coerce(v)
    flat = v.data.reshape(-1)
    if v.data.ndim not in (1, 2) or (v.data.ndim == 2 and v.data.shape[1] != 1):
        raise DimensionError(f"diag: expected (N,) or (N,1), got {v.data.shape}")
    out_data = np.diag(flat)
    in_shape = v.data.shape

    def bwd(g):
        return (np.diagonal(g).reshape(in_shape).copy(),)

    return Tensor._from_op(out_data, (v,), bwd)


def take_page(theta, m, d):
    """Select the 2D page theta[:, :, m, d] of a 4D filter tensor."""
    theta = _coerce(theta)
    if theta.data.ndim != 4:
        raise DimensionError(f"take_page: expected 4D filter, got {theta.data.shape}")
    out_data = np.ascontiguousarray(theta.data[:, :, m, d])
    full_shape = theta.data.shape

    def bwd(g):
        gt = np.zeros(full_shape)
        gt[:, :, m, d] = g
        return (gt,)

    return Tensor._from_op(out_data, (theta,), bwd)


def flatten_pages(theta):
    """Stack the pages of a 4D filter (F_in, F_out, P, Q) into a 2D matrix of
    shape (P*Q*F_in, F_out), pages ordered (p, q) row-major."""
    theta = _coerce(theta)
    if theta.data.ndim != 4:
        raise DimensionError(f"flatten_pages: expected 4D filter, got {theta.data.shape}")
    f_in, f_out, p, q = theta.data.shape
    out_data = np.ascontiguousarray(
        theta.data.transpose(2, 3, 0, 1)
    ).reshape(p * q * f_in, f_out)

    def bwd(g):
        return (g.reshape(p, q, f_in, f_out).transpose(2, 3, 0, 1),)

    return Tensor._from_op(out_data, (theta,), bwd)


def add_bias(x, b):
    """Add a vector over the trailing axis of `x` (explicit, not broadcasting)."""
    x, b = _coerce(x), _coerce(b)
    if b.data.ndim != 1 or x.data.shape[-1] != b.data.shape[0]:
        raise DimensionError(
            f"add_bias: bias {b.data.shape} does not fit trailing axis of {x.data.shape}"
        )
    out_data = x.data + b.data

    def bwd(g):
        axes = tuple(range(g.ndim - 1))
        return g, g.sum(axis=axes)

    return Tensor._from_op(out_data, (x, b), bwd)


def mul_gate(x, w):
    """Multiply `x` by `w` shared across leading batch axes.

    `w.shape` must equal the trailing axes of `x.shape`; the gradient for `w`
    sums over the leading axes.
    """
    x, w = _coerce(x), _coerce(w)
    k = w.data.ndim
    if k == 0 or x.data.ndim < k or x.data.shape[x.data.ndim - k:] != w.data.shape:
        raise DimensionError(
            f"mul_gate: gate {w.data.shape} does not match trailing axes of {x.data.shape}"
        )
    out_data = x.data * w.data

    def bwd(g):
        axes = tuple(range(g.ndim - k))
        gw = (g * x.data).sum(axis=axes) if axes else g * x.data
        return g * w.data, gw

    return Tensor._from_op(out_data, (x, w), bwd)


def softmax_rows(x):
    """Row-wise softmax of a 2D tensor, computed with max subtraction."""
    x = _coerce(x)
    if x.data.ndim != 2:
        raise DimensionError(f"softmax_rows: expected 2D input, got {x.data.shape}")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=1, keepdims=True)

    def bwd(g):
        inner = (g * out_data).sum(axis=1, keepdims=True)
        return ((g - inner) * out_data,)

    return Tensor._from_op(out_data, (x,), bwd)


# -- reverse pass ------------------------------------------------------------


def backward(loss):
    """Accumulate d(loss)/d(leaf) into every participating leaf's `.grad`.

    `loss` must be scalar-shaped (size 1).  Intermediate gradients are
    transient; only leaves with `requires_grad` keep accumulators, so calling
    `backward` twice on the same loss doubles the leaf gradients exactly.
    """
    if not isinstance(loss, Tensor):
        raise ContractError("backward: loss must be a Tensor")
    if loss.data.size != 1:
        raise ContractError(f"backward: loss must be scalar, got shape {loss.data.shape}")
    if not loss.requires_grad:
        return

    order = _topo_order(loss)
    grads = {id(loss): np.ones_like(loss.data)}
    for node in order:
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward_fn is None:
            if node.requires_grad:
                if node.grad is None:
                    node.grad = np.zeros_like(node.data)
                node.grad += g
            continue
        parent_grads = node._backward_fn(g)
        for parent, pg in zip(node._parents, parent_grads):
            if not parent.requires_grad or pg is None:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg


def _topo_order(root):
    """Reverse topological order of the recorded graph, iteratively."""
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited and parent.requires_grad:
                stack.append((parent, False))
    order.reverse()
    return order


# -- finite-difference oracle ------------------------------------------------


def finite_diff_grad(f, params, eps=1e-5):
    """Central-difference gradients of `f()` with respect to `params`.

    `params` is a sequence of objects with a mutable `.data` ndarray
    (:class:`Parameter` or leaf :class:`Tensor`).  `f` is called with no
    arguments and must return a scalar (float or scalar Tensor) computed from
    the current parameter values; it must be deterministic.
    """
    if not (1e-7 <= eps <= 1e-4):
        raise ContractError(f"finite_diff_grad: eps {eps} outside [1e-7, 1e-4]")

    def evaluate():
        out = f()
        if isinstance(out, Tensor):
            return out.item()
        return float(out)

    base = evaluate()
    if evaluate() != base:
        raise ContractError("finite_diff_grad: f is not deterministic")

    grads = []
    for p in params:
        data = p.data
        g = np.zeros_like(data)
        it = np.nditer(data, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = data[idx]
            data[idx] = orig + eps
            f_plus = evaluate()
            data[idx] = orig - eps
            f_minus = evaluate()
            data[idx] = orig
            g[idx] = (f_plus - f_minus) / (2.0 * eps)
            it.iternext()
        grads.append(g)
    return grads


def gradient_gap(analytic, numeric):
    """max over coordinates of |g_a - g_n| / max(1, |g_a|, |g_n|)."""
    worst = 0.0
    for ga, gn in zip(analytic, numeric):
        denom = np.maximum(1.0, np.maximum(np.abs(ga), np.abs(gn)))
        gap = np.abs(ga - gn) / denom
        if gap.size:
            worst = max(worst, float(gap.max()))
    return worst


def check_gradients(f, params, eps=1e-5):
    """Compare `backward` gradients of f() against the central-difference oracle.

    Returns the worst relative gap.  Leaf accumulators are zeroed before and
    left populated after the analytic pass.
    """
    for p in params:
        if isinstance(p, Parameter):
            p.zero_grad()
        else:
            p.grad = np.zeros_like(p.data)
    loss = f()
    if not isinstance(loss, Tensor):
        raise ContractError("check_gradients: f must return a Tensor loss")
    backward(loss)
    analytic = [np.array(p.grad, copy=True) for p in params]
    numeric = finite_diff_grad(f, params, eps=eps)
    return gradient_gap(analytic, numeric)
