"""Dense float64 tensors with taped reverse-mode differentiation.

The tape is rebuilt on every forward pass (define-by-run): each op attaches
its parents and a vector-Jacobian closure to the output tensor. backward()
walks the tape in reverse topological order and accumulates gradients into
leaf tensors that were created with requires_grad=True.

Broadcasting is restricted to what the networks here need: equal shapes,
scalars, a trailing-shape operand (bias rows), or size-1 axes. Everything
is float64; a tape and its tensors belong to a single thread.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "ShapeError",
    "DomainError",
    "GradientError",
    "no_grad",
    "constant",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "concat",
    "rows",
    "cols",
    "tanh",
    "sigmoid",
    "relu",
    "softplus",
    "exp",
    "log",
    "square",
    "clamp",
    "minimum",
    "mean",
    "tsum",
    "gaussian_reparameterize",
    "backward",
    "Adam",
]


class ShapeError(ValueError):
    """Operand shapes do not conform."""


class DomainError(ValueError):
    """Input outside an op's mathematical domain (e.g. log of <= 0)."""


class GradientError(ValueError):
    """Non-finite gradient reached the optimizer."""


_grad_enabled = True


class no_grad:
    """Context manager that disables tape recording (forward values only)."""

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
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_vjp")

    # make ndarray <op> Tensor defer to the reflected operators below
    __array_ufunc__ = None

    def __init__(self, data, requires_grad=False, name=None):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad) and _grad_enabled
        self.name = name
        self._parents = ()
        self._vjp = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{tag}, requires_grad={self.requires_grad})"

    # operator sugar; scalars and ndarrays are wrapped as constants
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, _as_tensor(other))

    def __rtruediv__(self, other):
        return div(_as_tensor(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))


def constant(data, name=None):
    return Tensor(data, requires_grad=False, name=name)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(out_data, parents, vjp):
    """Create an op output; records the tape node only when a grad is needed."""
    if _grad_enabled and any(p.requires_grad for p in parents):
        out = Tensor(out_data, requires_grad=True)
        out._parents = parents
        out._vjp = vjp
        return out
    return Tensor(out_data)


def _unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to the operand's shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _check_elementwise(a, b, op):
    try:
        return np.broadcast_shapes(a.data.shape, b.data.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.data.shape} and {b.data.shape} do not broadcast") from None


# ---------------------------------------------------------------------------
# arithmetic


def add(a, b):
    _check_elementwise(a, b, "add")
    out = a.data + b.data

    def vjp(g):
        return (_unbroadcast(g, a.data.shape) if a.requires_grad else None,
                _unbroadcast(g, b.data.shape) if b.requires_grad else None)

    return _make(out, (a, b), vjp)


def sub(a, b):
    _check_elementwise(a, b, "sub")
    out = a.data - b.data

    def vjp(g):
        return (_unbroadcast(g, a.data.shape) if a.requires_grad else None,
                _unbroadcast(-g, b.data.shape) if b.requires_grad else None)

    return _make(out, (a, b), vjp)


def mul(a, b):
    _check_elementwise(a, b, "mul")
    out = a.data * b.data

    def vjp(g):
        return (_unbroadcast(g * b.data, a.data.shape) if a.requires_grad else None,
                _unbroadcast(g * a.data, b.data.shape) if b.requires_grad else None)

    return _make(out, (a, b), vjp)


def div(a, b):
    _check_elementwise(a, b, "div")
    if np.any(b.data == 0.0):
        raise DomainError("div: division by zero")
    out = a.data / b.data

    def vjp(g):
        ga = _unbroadcast(g / b.data, a.data.shape) if a.requires_grad else None
        gb = _unbroadcast(-g * out / b.data, b.data.shape) if b.requires_grad else None
        return (ga, gb)

    return _make(out, (a, b), vjp)


def neg(a):
    def vjp(g):
        return (-g,)

    return _make(-a.data, (a,), vjp)


def matmul(a, b):
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: shapes {a.data.shape} and {b.data.shape} do not conform")
    out = a.data @ b.data

    def vjp(g):
        ga = g @ b.data.T if a.requires_grad else None
        gb = a.data.T @ g if b.requires_grad else None
        return (ga, gb)

    return _make(out, (a, b), vjp)


# ---------------------------------------------------------------------------
# shape ops


def concat(tensors, axis=-1):
    tensors = tuple(tensors)
    if not tensors:
        raise ShapeError("concat: no tensors given")
    datas = [t.data for t in tensors]
    try:
        out = np.concatenate(datas, axis=axis)
    except ValueError:
        raise ShapeError(f"concat: shapes {[d.shape for d in datas]} do not align on axis {axis}") from None
    sizes = [d.shape[axis] for d in datas]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        pieces = np.split(g, splits, axis=axis)
        return tuple(p if t.requires_grad else None for p, t in zip(pieces, tensors))

    return _make(out, tensors, vjp)


def rows(a, start, stop):
    """Contiguous row slice a[start:stop] along axis 0."""
    if not (0 <= start <= stop <= a.data.shape[0]):
        raise ShapeError(f"rows: [{start}:{stop}] out of bounds for shape {a.data.shape}")
    out = a.data[start:stop]

    def vjp(g):
        full = np.zeros_like(a.data)
        full[start:stop] = g
        return (full,)

    return _make(out, (a,), vjp)


def cols(a, start, stop):
    """Column slice a[..., start:stop] along the last axis."""
    if not (0 <= start <= stop <= a.data.shape[-1]):
        raise ShapeError(f"cols: [{start}:{stop}] out of bounds for shape {a.data.shape}")
    out = a.data[..., start:stop]

    def vjp(g):
        full = np.zeros_like(a.data)
        full[..., start:stop] = g
        return (full,)

    return _make(out, (a,), vjp)


# ---------------------------------------------------------------------------
# elementwise nonlinearities


def tanh(a):
    out = np.tanh(a.data)

    def vjp(g):
        return (g * (1.0 - out * out),)

    return _make(out, (a,), vjp)


def sigmoid(a):
    out = np.empty_like(a.data)
    pos = a.data >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
    ex = np.exp(a.data[~pos])
    out[~pos] = ex / (1.0 + ex)

    def vjp(g):
        return (g * out * (1.0 - out),)

    return _make(out, (a,), vjp)


def relu(a):
    out = np.maximum(a.data, 0.0)

    def vjp(g):
        return (g * (a.data > 0.0),)

    return _make(out, (a,), vjp)


def softplus(a):
    out = np.logaddexp(0.0, a.data)

    def vjp(g):
        s = np.empty_like(a.data)
        pos = a.data >= 0
        s[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
        ex = np.exp(a.data[~pos])
        s[~pos] = ex / (1.0 + ex)
        return (g * s,)

    return _make(out, (a,), vjp)


def exp(a):
    out = np.exp(a.data)
    if not np.all(np.isfinite(out)):
        raise DomainError("exp: overflow to non-finite value")

    def vjp(g):
        return (g * out,)

    return _make(out, (a,), vjp)


def log(a):
    if np.any(a.data <= 0.0):
        raise DomainError(f"log: input must be positive, min value {a.data.min()}")
    out = np.log(a.data)

    def vjp(g):
        return (g / a.data,)

    return _make(out, (a,), vjp)


def square(a):
    out = a.data * a.data

    def vjp(g):
        return (2.0 * g * a.data,)

    return _make(out, (a,), vjp)


def clamp(a, lo, hi):
    out = np.clip(a.data, lo, hi)

    def vjp(g):
        return (g * ((a.data > lo) & (a.data < hi)),)

    return _make(out, (a,), vjp)


def minimum(a, b):
    _check_elementwise(a, b, "minimum")
    out = np.minimum(a.data, b.data)

    def vjp(g):
        take_a = a.data <= b.data
        ga = _unbroadcast(g * take_a, a.data.shape) if a.requires_grad else None
        gb = _unbroadcast(g * ~take_a, b.data.shape) if b.requires_grad else None
        return (ga, gb)

    return _make(out, (a, b), vjp)


# ---------------------------------------------------------------------------
# reductions


def mean(a):
    out = a.data.mean()
    n = a.data.size

    def vjp(g):
        return (np.full_like(a.data, float(g) / n),)

    return _make(out, (a,), vjp)


def tsum(a, axis=None, keepdims=False):
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return (np.full_like(a.data, float(g)),)
        ga = np.asarray(g)
        if not keepdims:
            ga = np.expand_dims(ga, axis)
        return (np.broadcast_to(ga, a.data.shape).copy(),)

    return _make(out, (a,), vjp)


def gaussian_reparameterize(mu, sigma, eps):
    """z = mu + sigma * eps with eps held constant."""
    eps = eps.data if isinstance(eps, Tensor) else np.asarray(eps, dtype=np.float64)
    return add(mu, mul(sigma, Tensor(eps)))


# ---------------------------------------------------------------------------
# backward + optimizer


def backward(loss):
    """Accumulate d(loss)/d(leaf) into every trainable leaf tensor's .grad."""
    if loss.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.data.shape}")
    if not loss.requires_grad:
        return

    topo = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    flows = {id(loss): np.ones_like(loss.data)}
    for node in reversed(topo):
        g = flows.pop(id(node), None)
        if g is None:
            continue
        if node._vjp is None:
            node.grad = g if node.grad is None else node.grad + g
            continue
        for p, gp in zip(node._parents, node._vjp(g)):
            if gp is None or not p.requires_grad:
                continue
            key = id(p)
            if key in flows:
                flows[key] = flows[key] + gp
            else:
                flows[key] = gp


class Adam:
    """Adam over a named parameter tree (dict name -> Tensor)."""

    def __init__(self, params, lr=3e-4, betas=(0.9, 0.999), eps=1e-8):
        self.params = dict(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise GradientError(f"non-finite gradient for parameter {name!r}")
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def state_arrays(self):
        """Optimizer state as flat named arrays (for checkpointing)."""
        out = {"t": np.array([float(self.t)])}
        for k in self.params:
            out[f"m.{k}"] = self.m[k]
            out[f"v.{k}"] = self.v[k]
        return out

    def load_state_arrays(self, arrays):
        self.t = int(arrays["t"][0])
        for k in self.params:
            self.m[k] = np.array(arrays[f"m.{k}"], dtype=np.float64).reshape(self.m[k].shape)
            self.v[k] = np.array(arrays[f"v.{k}"], dtype=np.float64).reshape(self.v[k].shape)
