"""Reverse-mode automatic differentiation over dense float64 tensors.

Every operation appends one entry to the active :class:`Tape`; entries are
therefore stored in execution order, which is a topological order of the
computation. :func:`backward` replays the record once in reverse. The record
is an explicit object so tests can inspect and assert it.

Tensors are immutable once created, with two sanctioned exceptions: ``grad``
buffers, and in-place parameter updates by the optimizer between passes.
Supported ranks are 0, 1 and 2; broadcasting is limited to scalar-with-tensor
and the explicit row-vector ops, which keeps every gradient rule auditable.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import ContractError, DimensionError, DomainError, ParameterError

_SCALARS = (int, float, np.integer, np.floating)


class Tensor:
    """Dense float64 value participating in the recorded computation."""

    __slots__ = ("data", "requires_grad", "grad", "_entry")

    def __init__(self, data, requires_grad=False):
        arr = np.ascontiguousarray(data, dtype=np.float64)
        if not arr.flags.writeable:
            arr = arr.copy()  # kernels take writable buffers; own the data
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._entry = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def is_leaf(self):
        return self._entry is None

    def item(self):
        if self.size != 1:
            raise ContractError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.item())

    def zero_grad(self):
        self.grad = None

    def detach(self):
        """Same values, outside the recorded computation."""
        return Tensor(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # Operator sugar; every path still records through the module functions.

    def __add__(self, other):
        if isinstance(other, _SCALARS):
            return add_scalar(self, float(other))
        return add(self, other)

    def __radd__(self, other):
        return add_scalar(self, float(other))

    def __sub__(self, other):
        if isinstance(other, _SCALARS):
            return add_scalar(self, -float(other))
        return subtract(self, other)

    def __rsub__(self, other):
        return add_scalar(negate(self), float(other))

    def __mul__(self, other):
        if isinstance(other, _SCALARS):
            return multiply_scalar(self, float(other))
        return multiply(self, other)

    def __rmul__(self, other):
        return multiply_scalar(self, float(other))

    def __truediv__(self, other):
        if isinstance(other, _SCALARS):
            return multiply_scalar(self, 1.0 / float(other))
        return divide(self, other)

    def __rtruediv__(self, other):
        return multiply_scalar(power(self, -1.0), float(other))

    def __neg__(self):
        return negate(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return power(self, float(p))


def tensor(data):
    """Constant tensor (no gradient)."""
    return Tensor(data)


def parameter(data):
    """Learnable tensor (gradient accumulated by backward())."""
    return Tensor(data, requires_grad=True)


def zeros(shape):
    return Tensor(np.zeros(shape))


def ones(shape):
    return Tensor(np.ones(shape))


def eye(n):
    return Tensor(np.eye(n))


def glorot(rng, rows, cols):
    """Glorot-uniform parameter matrix drawn from rng."""
    s = np.sqrt(6.0 / (rows + cols))
    return parameter(rng.uniform(-s, s, size=(rows, cols)))


# -- computation record ---------------------------------------------------


class TapeEntry:
    __slots__ = ("index", "op", "inputs", "output", "grad_fn", "tape")

    def __init__(self, index, op, inputs, output, grad_fn, tape):
        self.index = index
        self.op = op
        self.inputs = inputs
        self.output = output
        self.grad_fn = grad_fn
        self.tape = tape


class Tape:
    """Explicit computation record; operations append in execution order."""

    __slots__ = ("entries",)

    def __init__(self):
        self.entries = []

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.pop()
        return False

    def __len__(self):
        return len(self.entries)

    def ops(self):
        return [e.op for e in self.entries]

    def is_topologically_ordered(self):
        """True when every entry's recorded inputs precede it."""
        for e in self.entries:
            for t in e.inputs:
                src = t._entry
                if src is not None and src.tape is self and src.index >= e.index:
                    return False
        return True


_TAPES = [Tape()]
_GRAD_ENABLED = [True]


def active_tape():
    return _TAPES[-1]


class no_grad:
    """Context manager that disables recording (evaluation passes)."""

    def __enter__(self):
        _GRAD_ENABLED.append(False)
        return self

    def __exit__(self, *exc):
        _GRAD_ENABLED.pop()
        return False


def record(op, inputs, out_data, grad_fn):
    """Wrap a forward result and append its gradient rule to the tape.

    grad_fn maps the output gradient array to one gradient array (or None)
    per input, in order. out_data must already be a C-contiguous float64
    ndarray (every kernel returns one); it is wrapped without re-validation.
    """
    rec = False
    if _GRAD_ENABLED[-1]:
        for t in inputs:
            if t.requires_grad:
                rec = True
                break
    out = Tensor.__new__(Tensor)
    out.data = out_data
    out.requires_grad = rec
    out.grad = None
    out._entry = None
    if rec:
        tape = _TAPES[-1]
        entry = TapeEntry(len(tape.entries), op, tuple(inputs), out, grad_fn, tape)
        tape.entries.append(entry)
        out._entry = entry
    return out


def backward(loss):
    """Populate grad on every reachable requires_grad leaf of the loss.

    Walks the recording tape once in reverse, up to the entry that produced
    the loss. Leaves that took part in the walked computation but do not
    reach the loss get a zero grad. Repeated calls accumulate.
    """
    if not isinstance(loss, Tensor):
        raise ContractError("backward() expects a Tensor loss")
    if loss.size != 1:
        raise ContractError(f"backward() needs a scalar loss, got shape {loss.shape}")
    entry = loss._entry
    if entry is None:
        raise ContractError("loss is not part of a recorded computation")
    tape = entry.tape
    grads = {id(loss): np.ones_like(loss.data)}
    leaves = []
    for e in reversed(tape.entries[: entry.index + 1]):
        for t in e.inputs:
            if t.requires_grad:
                if t._entry is None:
                    leaves.append(t)
                elif t._entry.tape is not tape:
                    raise ContractError(
                        f"input of op {e.op!r} was recorded on a different tape"
                    )
        g = grads.pop(id(e.output), None)
        if g is None:
            continue
        in_grads = e.grad_fn(g)
        for t, ig in zip(e.inputs, in_grads):
            if ig is None or not t.requires_grad:
                continue
            if t._entry is None:
                if t.grad is None:
                    t.grad = np.zeros_like(t.data)
                t.grad += ig
            else:
                prev = grads.get(id(t))
                grads[id(t)] = ig if prev is None else prev + ig
    for t in leaves:
        if t.grad is None:
            t.grad = np.zeros_like(t.data)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _same_shape(a, b, op):
    if a.shape != b.shape:
        raise DimensionError(f"{op}: operand shapes {a.shape} and {b.shape} differ")


# -- matrix operations -----------------------------------------------------


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul needs rank-2 operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: inner dimensions disagree, {a.shape} x {b.shape}")
    K = kernels.active
    out = K.matmul(a.data, b.data)
    ad, bd = a.data, b.data

    def grad_fn(g):
        ga = K.matmul_nt(g, bd) if a.requires_grad else None
        gb = K.matmul_tn(ad, g) if b.requires_grad else None
        return ga, gb

    return record("matmul", (a, b), out, grad_fn)


def transpose(a):
    a = _as_tensor(a)
    if a.ndim != 2:
        raise DimensionError(f"transpose needs a rank-2 operand, got {a.shape}")
    out = np.ascontiguousarray(a.data.T)

    def grad_fn(g):
        return (np.ascontiguousarray(g.T),)

    return record("transpose", (a,), out, grad_fn)


def gram(a):
    """a @ a.T for a rank-2 operand; the hot kernel of pairwise scoring."""
    a = _as_tensor(a)
    if a.ndim != 2:
        raise DimensionError(f"gram needs a rank-2 operand, got {a.shape}")
    K = kernels.active
    ad_ = a.data

    def grad_fn(g):
        # d sum(g * a a^T) / da = (g + g^T) a
        return (K.matmul(K.ew_add(g, np.ascontiguousarray(g.T)), ad_),)

    return record("gram", (a,), K.matmul_nt(ad_, ad_), grad_fn)


def reshape(a, shape):
    a = _as_tensor(a)
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape, dtype=np.int64)) != a.size:
        raise DimensionError(f"cannot reshape {a.shape} to {shape}")
    out = a.data.reshape(shape)
    old = a.shape

    def grad_fn(g):
        return (np.ascontiguousarray(g.reshape(old)),)

    return record("reshape", (a,), out, grad_fn)


def slice1d(a, start, stop):
    a = _as_tensor(a)
    if a.ndim != 1:
        raise DimensionError(f"slice1d needs a rank-1 operand, got {a.shape}")
    n = a.shape[0]
    if not (0 <= start < stop <= n):
        raise DimensionError(f"slice [{start}:{stop}] out of range for length {n}")
    out = a.data[start:stop].copy()

    def grad_fn(g):
        full = np.zeros(n)
        full[start:stop] = g
        return (full,)

    return record("slice", (a,), out, grad_fn)


# -- elementwise -----------------------------------------------------------


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _same_shape(a, b, "add")
    K = kernels.active

    def grad_fn(g):
        return g, g

    return record("add", (a, b), K.ew_add(a.data, b.data), grad_fn)


def subtract(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _same_shape(a, b, "subtract")
    K = kernels.active

    def grad_fn(g):
        return g, K.ew_neg(g)

    return record("subtract", (a, b), K.ew_sub(a.data, b.data), grad_fn)


def multiply(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _same_shape(a, b, "multiply")
    K = kernels.active
    ad, bd = a.data, b.data

    def grad_fn(g):
        ga = K.ew_mul(g, bd) if a.requires_grad else None
        gb = K.ew_mul(g, ad) if b.requires_grad else None
        return ga, gb

    return record("multiply", (a, b), K.ew_mul(ad, bd), grad_fn)


def divide(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _same_shape(a, b, "divide")
    K = kernels.active
    ad, bd = a.data, b.data
    out = K.ew_div(ad, bd)

    def grad_fn(g):
        ga = K.ew_div(g, bd) if a.requires_grad else None
        gb = None
        if b.requires_grad:
            gb = K.ew_neg(K.ew_div(K.ew_mul(g, out), bd))
        return ga, gb

    return record("divide", (a, b), out, grad_fn)


def negate(a):
    a = _as_tensor(a)
    K = kernels.active

    def grad_fn(g):
        return (K.ew_neg(g),)

    return record("negate", (a,), K.ew_neg(a.data), grad_fn)


def add_scalar(a, c):
    a = _as_tensor(a)
    K = kernels.active

    def grad_fn(g):
        return (g,)

    return record("add_scalar", (a,), K.scal_add(a.data, float(c)), grad_fn)


def multiply_scalar(a, c):
    a = _as_tensor(a)
    K = kernels.active
    c = float(c)

    def grad_fn(g):
        return (K.scal_mul(g, c),)

    return record("multiply_scalar", (a,), K.scal_mul(a.data, c), grad_fn)


def rowvec_add(x, v):
    """x + v broadcast across rows; x is (m, n), v is (n,)."""
    x, v = _as_tensor(x), _as_tensor(v)
    if x.ndim != 2 or v.ndim != 1 or x.shape[1] != v.shape[0]:
        raise DimensionError(f"rowvec_add: shapes {x.shape} and {v.shape} do not align")
    K = kernels.active

    def grad_fn(g):
        gx = g if x.requires_grad else None
        gv = K.sum_axis(g, 0) if v.requires_grad else None
        return gx, gv

    return record("rowvec_add", (x, v), K.rowvec_add(x.data, v.data), grad_fn)


def rowvec_multiply(x, v):
    """x * v broadcast across rows; x is (m, n), v is (n,)."""
    x, v = _as_tensor(x), _as_tensor(v)
    if x.ndim != 2 or v.ndim != 1 or x.shape[1] != v.shape[0]:
        raise DimensionError(f"rowvec_multiply: shapes {x.shape} and {v.shape} do not align")
    K = kernels.active
    xd, vd = x.data, v.data

    def grad_fn(g):
        gx = K.rowvec_mul(g, vd) if x.requires_grad else None
        gv = K.sum_axis(K.ew_mul(g, xd), 0) if v.requires_grad else None
        return gx, gv

    return record("rowvec_multiply", (x, v), K.rowvec_mul(xd, vd), grad_fn)


# -- activations -----------------------------------------------------------


def relu(a):
    a = _as_tensor(a)
    K = kernels.active
    ad = a.data

    def grad_fn(g):
        return (K.relu_grad(g, ad),)

    return record("relu", (a,), K.relu(ad), grad_fn)


def sigmoid(a):
    a = _as_tensor(a)
    K = kernels.active
    out = K.sigmoid(a.data)

    def grad_fn(g):
        return (K.sigmoid_grad(g, out),)

    return record("sigmoid", (a,), out, grad_fn)


def softplus(a):
    a = _as_tensor(a)
    K = kernels.active
    ad = a.data

    def grad_fn(g):
        return (K.softplus_grad(g, ad),)

    return record("softplus", (a,), K.softplus(ad), grad_fn)


def exp(a):
    a = _as_tensor(a)
    K = kernels.active
    out = K.exp(a.data)

    def grad_fn(g):
        return (K.ew_mul(g, out),)

    return record("exp", (a,), out, grad_fn)


def log(a):
    a = _as_tensor(a)
    if not np.all(a.data > 0.0):
        raise DomainError("log requires strictly positive entries")
    K = kernels.active
    ad = a.data

    def grad_fn(g):
        return (K.ew_div(g, ad),)

    return record("log", (a,), K.log(ad), grad_fn)


def power(a, p):
    a = _as_tensor(a)
    p = float(p)
    if not (p.is_integer() and p >= 0.0) and not np.all(a.data > 0.0):
        raise DomainError(f"power with exponent {p} requires strictly positive entries")
    K = kernels.active
    ad = a.data

    def grad_fn(g):
        return (K.power_grad(g, ad, p),)

    return record("power", (a,), K.power(ad, p), grad_fn)


def clamp(a, lo, hi):
    """Clip to [lo, hi]; gradient is passed only inside the interval."""
    a = _as_tensor(a)
    lo, hi = float(lo), float(hi)
    if not lo < hi:
        raise ParameterError(f"clamp needs lo < hi, got [{lo}, {hi}]")
    K = kernels.active
    ad = a.data

    def grad_fn(g):
        return (K.clamp_grad(g, ad, lo, hi),)

    return record("clamp", (a,), K.clamp(ad, lo, hi), grad_fn)


# -- reductions ------------------------------------------------------------


def _check_axis(a, axis):
    if a.ndim == 1 and axis == 0:
        return None  # full reduction of a vector
    if a.ndim != 2 or axis not in (0, 1):
        raise DimensionError(f"axis {axis} out of range for shape {a.shape}")
    return axis


def sum(a, axis=None):  # noqa: A001 - mirrors the reduce op-tag
    a = _as_tensor(a)
    K = kernels.active
    if axis is not None:
        axis = _check_axis(a, axis)
    if axis is None:
        out = np.asarray(K.sum_all(a.data))
        shape = a.shape

        def grad_fn(g):
            return (np.full(shape, g.item()),)

        return record("sum", (a,), out, grad_fn)
    m, n = a.shape

    def grad_fn(g):
        return (K.bcast_rows(g, m) if axis == 0 else K.bcast_cols(g, n),)

    return record("sum", (a,), K.sum_axis(a.data, axis), grad_fn)


def mean(a, axis=None):
    a = _as_tensor(a)
    K = kernels.active
    if axis is not None:
        axis = _check_axis(a, axis)
    if axis is None:
        out = np.asarray(K.mean_all(a.data))
        shape = a.shape
        count = a.size

        def grad_fn(g):
            return (np.full(shape, g.item() / count),)

        return record("mean", (a,), out, grad_fn)
    m, n = a.shape
    count = m if axis == 0 else n

    def grad_fn(g):
        gs = K.scal_mul(g, 1.0 / count)
        return (K.bcast_rows(gs, m) if axis == 0 else K.bcast_cols(gs, n),)

    return record("mean", (a,), K.mean_axis(a.data, axis), grad_fn)
