"""Minimal dense-tensor reverse-mode autodiff on numpy buffers.

Tensors wrap row-major float32 arrays (float64 for gradient-check mode; the
dtype of the inputs is preserved through every op). The graph is taped
implicitly through parent links; backward() releases gradients into .grad
buffers in reverse topological order. Broadcasting is restricted to bias-add
and stacked matmul with shared weights.
"""

from __future__ import annotations

import contextlib
from typing import Callable

import numpy as np


class ShapeError(ValueError):
    pass


_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable taping inside the block (inference mode)."""
    global _grad_enabled
    saved = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = saved


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False, dtype=None,
                 _parents=(), _vjp: Callable | None = None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = _parents
        self._vjp = _vjp

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, grad={self.requires_grad})"


def parameter(data, dtype=np.float32) -> Tensor:
    return Tensor(np.asarray(data, dtype=dtype), requires_grad=True)


def constant(data, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=False, dtype=dtype)


def _as_tensor(x, dtype) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _tracked(*tensors) -> bool:
    return _grad_enabled and any(
        t.requires_grad or t._parents for t in tensors if isinstance(t, Tensor))


def _make(data, parents, vjp) -> Tensor:
    if _grad_enabled and any(p.requires_grad or p._parents for p in parents):
        return Tensor(data, _parents=tuple(parents), _vjp=vjp)
    return Tensor(data)


def backward(loss: Tensor):
    """Populate .grad on every reachable requires_grad tensor; tensors not on
    the tape keep grad None (treated as zero by the optimizer)."""
    if loss.size != 1:
        raise ShapeError(f"backward requires a scalar loss, got shape {loss.shape}")

    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.requires_grad:
            node.grad = g if node.grad is None else node.grad + g
        if node._vjp is None:
            continue
        parent_grads = node._vjp(g)
        for p, pg in zip(node._parents, parent_grads):
            if pg is None:
                continue
            if id(p) in grads:
                grads[id(p)] = grads[id(p)] + pg
            else:
                grads[id(p)] = pg


# ----------------------------- core ops -----------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of matrices or stacked matrices (ndim >= 2). When one
    operand has fewer leading dims it is shared across the stack (weight
    sharing) and its gradient sums over the stack."""
    a, b = _as_tensor(a, None), _as_tensor(b, None)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError(f"matmul requires ndim >= 2 operands, got {a.shape} x {b.shape}")

    if b.data.ndim == 2 and a.data.ndim > 2:
        # shared-weight case: collapse the stack into one large product
        lead = a.shape[:-1]
        k = a.shape[-1]
        if k != b.shape[0]:
            raise ShapeError(f"matmul shapes {a.shape} x {b.shape}: inner dims differ")
        a2 = a.data.reshape(-1, k)
        out = (a2 @ b.data).reshape(*lead, b.shape[1])

        def vjp(g):
            g2 = g.reshape(-1, b.shape[1])
            ga = (g2 @ b.data.T).reshape(a.shape)
            gb = a2.T @ g2
            return ga, gb

        return _make(out, (a, b), vjp)

    try:
        out = a.data @ b.data
    except ValueError as e:
        raise ShapeError(f"matmul shapes {a.shape} x {b.shape}: {e}") from e

    def vjp(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        if ga.shape != a.shape:
            ga = ga.sum(axis=tuple(range(ga.ndim - a.data.ndim)))
        if gb.shape != b.shape:
            gb = gb.sum(axis=tuple(range(gb.ndim - b.data.ndim)))
        return ga, gb

    return _make(out, (a, b), vjp)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise add of equal shapes, or bias-add of a trailing-dim vector.
    A non-tracked constant operand may broadcast freely (its gradient is
    never materialized), which keeps additive attention masks cheap."""
    a, b = _as_tensor(a, None), _as_tensor(b, None)
    if a.shape != b.shape:
        bias_ok = b.data.ndim == 1 and a.shape and a.shape[-1] == b.shape[0]
        const_ok = not (b.requires_grad or b._parents)
        if not (bias_ok or const_ok):
            raise ShapeError(f"add shapes differ: {a.shape} vs {b.shape}")
    out = a.data + b.data

    def vjp(g):
        if b.shape == g.shape:
            gb = g
        elif b.requires_grad or b._parents:
            gb = g.sum(axis=tuple(range(g.ndim - 1)))
        else:
            gb = None
        ga = g
        if a.shape != g.shape:  # `a` broadcast against a larger constant
            ga = g.sum(axis=tuple(range(g.ndim - a.data.ndim)))
            for ax, (sa, sg) in enumerate(zip(a.shape, ga.shape)):
                if sa == 1 and sg != 1:
                    ga = ga.sum(axis=ax, keepdims=True)
        return ga, gb

    return _make(out, (a, b), vjp)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return add(a, scale(b, -1.0))


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise (Hadamard) product of equal shapes."""
    a, b = _as_tensor(a, None), _as_tensor(b, None)
    if a.shape != b.shape:
        raise ShapeError(f"mul shapes differ: {a.shape} vs {b.shape}")
    out = a.data * b.data

    def vjp(g):
        return g * b.data, g * a.data

    return _make(out, (a, b), vjp)


def scale(a: Tensor, s: float) -> Tensor:
    a = _as_tensor(a, None)
    out = a.data * a.data.dtype.type(s)

    def vjp(g):
        return (g * a.data.dtype.type(s),)

    return _make(out, (a,), vjp)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t, None) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]

    def vjp(g):
        return tuple(np.split(g, np.cumsum(sizes)[:-1], axis=axis))

    return _make(out, tuple(tensors), vjp)


def slice_(a: Tensor, key) -> Tensor:
    """Basic slicing (slices / ints / tuples thereof); gradient scatters back."""
    a = _as_tensor(a, None)
    out = a.data[key]

    def vjp(g):
        ga = np.zeros_like(a.data)
        ga[key] = g
        return (ga,)

    return _make(out, (a,), vjp)


def reshape(a: Tensor, shape) -> Tensor:
    a = _as_tensor(a, None)
    out = a.data.reshape(shape)

    def vjp(g):
        return (g.reshape(a.shape),)

    return _make(out, (a,), vjp)


def transpose(a: Tensor, axes) -> Tensor:
    a = _as_tensor(a, None)
    out = np.transpose(a.data, axes)
    inv = np.argsort(axes)

    def vjp(g):
        return (np.transpose(g, inv),)

    return _make(out, (a,), vjp)


def relu(a: Tensor) -> Tensor:
    a = _as_tensor(a, None)
    out = np.maximum(a.data, 0)

    def vjp(g):
        return (g * (a.data > 0),)

    return _make(out, (a,), vjp)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    a = _as_tensor(a, None)
    out = a.data - a.data.max(axis=axis, keepdims=True)
    np.exp(out, out=out)
    out /= out.sum(axis=axis, keepdims=True)

    def vjp(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return ((g - dot) * out,)

    return _make(out, (a,), vjp)


def layer_norm(a: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalization over the last axis with learnable gain and shift."""
    a, gamma, beta = _as_tensor(a, None), _as_tensor(gamma, None), _as_tensor(beta, None)
    if gamma.shape != (a.shape[-1],) or beta.shape != (a.shape[-1],):
        raise ShapeError(f"layer_norm parameter shapes {gamma.shape}/{beta.shape} "
                         f"do not match feature dim {a.shape[-1]}")
    mu = a.data.mean(axis=-1, keepdims=True)
    var = ((a.data - mu) ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (a.data - mu) * inv
    out = xhat * gamma.data + beta.data

    def vjp(g):
        d = a.shape[-1]
        ghat = g * gamma.data
        m1 = ghat.mean(axis=-1, keepdims=True)
        m2 = (ghat * xhat).mean(axis=-1, keepdims=True)
        ga = (ghat - m1 - xhat * m2) * inv
        sum_axes = tuple(range(g.ndim - 1))
        return ga, (g * xhat).sum(axis=sum_axes), g.sum(axis=sum_axes)

    return _make(out, (a, gamma, beta), vjp)


def dropout(a: Tensor, rate: float, seed: int, training: bool = True) -> Tensor:
    """Inverted dropout; deterministic for a fixed seed. Identity when the
    rate is zero or training is off."""
    a = _as_tensor(a, None)
    if not training or rate <= 0.0:
        return a
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    rng = np.random.Generator(np.random.PCG64(seed))
    keep = (rng.random(a.shape) >= rate).astype(a.data.dtype) / a.data.dtype.type(1.0 - rate)
    out = a.data * keep

    def vjp(g):
        return (g * keep,)

    return _make(out, (a,), vjp)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Row gather from a (V, D) table; gradient scatter-adds into the table."""
    table = _as_tensor(table, None)
    ids = np.asarray(ids, dtype=np.int64)
    out = table.data[ids]

    def vjp(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        return (gt,)

    return _make(out, (table,), vjp)


def reduce_sum(a: Tensor, axis: int | None = None) -> Tensor:
    a = _as_tensor(a, None)
    out = a.data.sum(axis=axis)

    def vjp(g):
        if axis is None:
            return (np.full_like(a.data, 1.0) * g,)
        return (np.repeat(np.expand_dims(g, axis), a.shape[axis], axis=axis),)

    return _make(out, (a,), vjp)


def reduce_mean(a: Tensor, axis: int | None = None) -> Tensor:
    n = a.data.size if axis is None else a.data.shape[axis]
    return scale(reduce_sum(a, axis), 1.0 / n)


def huber_loss(pred: Tensor, target, delta: float = 1.0) -> Tensor:
    """Elementwise mean of the Huber penalty between prediction and target."""
    pred = _as_tensor(pred, None)
    tgt = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=pred.dtype)
    if tgt.shape != pred.shape:
        raise ShapeError(f"huber_loss shapes differ: {pred.shape} vs {tgt.shape}")
    e = pred.data - tgt
    abs_e = np.abs(e)
    quad = abs_e <= delta
    vals = np.where(quad, 0.5 * e * e, delta * (abs_e - 0.5 * delta))
    out = vals.mean(dtype=pred.dtype)

    def vjp(g):
        de = np.clip(e, -delta, delta) / e.size
        return (g * de.astype(pred.dtype),)

    return _make(np.asarray(out, dtype=pred.dtype), (pred,), vjp)


# ------------------------- optimizer & checks -------------------------


def warmup_schedule(epoch: int, base_lr: float, warmup_epochs: int) -> float:
    """Linear warmup to base_lr over warmup_epochs, constant afterwards."""
    if warmup_epochs <= 0:
        return base_lr
    return base_lr * min(1.0, (epoch + 1) / warmup_epochs)


def adamw_state(params: dict[str, Tensor]) -> dict:
    return {
        "step": 0,
        "m": {k: np.zeros_like(p.data) for k, p in params.items()},
        "v": {k: np.zeros_like(p.data) for k, p in params.items()},
    }


def adamw_step(params: dict[str, Tensor], grads: dict[str, np.ndarray], state: dict,
               lr: float, betas=(0.9, 0.999), eps: float = 1e-8,
               weight_decay: float = 0.01):
    """One decoupled-weight-decay Adam update; missing gradients are zero."""
    b1, b2 = betas
    state["step"] += 1
    t = state["step"]
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        m = state["m"][name]
        v = state["v"][name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        update = (m / bc1) / (np.sqrt(v / bc2) + eps)
        if weight_decay:
            p.data -= p.data.dtype.type(lr * weight_decay) * p.data
        p.data -= p.data.dtype.type(lr) * update.astype(p.data.dtype)


def grad_check(f: Callable[[list[Tensor]], Tensor], params: list[Tensor],
               eps: float = 1e-4, sample: int | None = None, seed: int = 0,
               zero_floor: float = 1e-9) -> float:
    """Max relative error between backward gradients and central differences.

    f must be a deterministic scalar function of the given parameters. With
    sample set, that many coordinates per parameter are probed (deterministic
    in seed); otherwise every coordinate is checked. Coordinates where both
    values sit below zero_floor count as exact: the finite-difference noise
    floor (~1e-11 on unit-scale losses) would otherwise dominate true-zero
    gradients, while any real gradient defect exceeds the floor by orders of
    magnitude.
    """
    for p in params:
        p.zero_grad()
    loss = f(params)
    backward(loss)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    rng = np.random.Generator(np.random.PCG64(seed))
    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.data.reshape(-1)
        n = flat.size
        coords = range(n) if sample is None or sample >= n else \
            sorted(rng.choice(n, size=sample, replace=False).tolist())
        for i in coords:
            orig = flat[i]
            with no_grad():
                flat[i] = orig + eps
                hi = float(f(params).data)
                flat[i] = orig - eps
                lo = float(f(params).data)
            flat[i] = orig
            num = (hi - lo) / (2.0 * eps)
            ana = float(a.reshape(-1)[i])
            if abs(ana) <= zero_floor and abs(num) <= zero_floor:
                continue
            rel = abs(ana - num) / (abs(ana) + abs(num) + 1e-8)
            worst = max(worst, rel)
    return worst
