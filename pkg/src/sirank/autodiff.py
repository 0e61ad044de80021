"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

The operation set is exactly what the wide+deep ranking models need: affine
layers, ReLU, softmax, elementwise log/mul/add, embedding lookup, concat,
row broadcasting and reductions. Everything is float64; forward passes are
pure functions of their inputs.
"""

from __future__ import annotations

from typing import Callable, Iterable, Iterator, Mapping

import numpy as np

from .errors import ContractError, DomainError, ShapeError, TrainingError

Array = np.ndarray


def _as_array(values, shape=None) -> Array:
    out = np.asarray(values, dtype=np.float64)
    if shape is not None:
        out = out.reshape(shape)
    return out


class Tensor:
    """A node in the computation graph.

    Leaf tensors (parameters, inputs) hold data directly; op nodes additionally
    hold a backward closure that scatters an upstream gradient to their
    parents. ``data`` is a float64 ndarray; ``values`` exposes the flat
    row-major view, ``shape`` the dimension list.
    """

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = _as_array(data)
        self.grad: Array | None = np.zeros_like(self.data) if requires_grad else None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[Array], None] | None = None

    @property
    def shape(self) -> list[int]:
        return list(self.data.shape)

    @property
    def values(self) -> Array:
        """Flat row-major view of the stored values."""
        return self.data.reshape(-1)

    def accumulate(self, g: Array) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad[...] = 0.0

    def __repr__(self) -> str:  # pragma: no cover
        tag = f" '{self.name}'" if self.name else ""
        return f"Tensor{tag}(shape={tuple(self.data.shape)}, grad={self.requires_grad})"


def _wrap(x) -> tuple[Array, Tensor | None]:
    """Return (ndarray view, node-or-None). Plain arrays are constants."""
    if isinstance(x, Tensor):
        return x.data, x
    return _as_array(x), None


def _node(data: Array, parents: Iterable[Tensor | None], backward) -> Tensor:
    live = tuple(p for p in parents if p is not None and p.requires_grad)
    out = Tensor(data)
    if live:
        out.requires_grad = True
        out.grad = None
        out._parents = live
        out._backward = backward
    return out


# ---------------------------------------------------------------------------
# operations


def affine(x, weight, bias) -> Tensor:
    """x @ weight + bias for x:(B,I), weight:(I,O), bias:(O,)."""
    xd, xn = _wrap(x)
    wd, wn = _wrap(weight)
    bd, bn = _wrap(bias)
    if xd.ndim != 2 or wd.ndim != 2 or bd.ndim != 1:
        raise ShapeError(
            f"affine expects 2-d input, 2-d weight, 1-d bias; got "
            f"{xd.shape}, {wd.shape}, {bd.shape}"
        )
    if xd.shape[1] != wd.shape[0] or wd.shape[1] != bd.shape[0]:
        raise ShapeError(
            f"affine shape mismatch: input {xd.shape} x weight {wd.shape} + bias {bd.shape}"
        )
    out = xd @ wd + bd

    def backward(g: Array) -> None:
        if xn is not None and xn.requires_grad:
            xn.accumulate(g @ wd.T)
        if wn is not None and wn.requires_grad:
            wn.accumulate(xd.T @ g)
        if bn is not None and bn.requires_grad:
            bn.accumulate(g.sum(axis=0))

    return _node(out, (xn, wn, bn), backward)


def matmul(a, b) -> Tensor:
    """Matrix product of two 2-d tensors."""
    ad, an = _wrap(a)
    bd, bn = _wrap(b)
    if ad.ndim != 2 or bd.ndim != 2 or ad.shape[1] != bd.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {ad.shape} x {bd.shape}")
    out = ad @ bd

    def backward(g: Array) -> None:
        if an is not None and an.requires_grad:
            an.accumulate(g @ bd.T)
        if bn is not None and bn.requires_grad:
            bn.accumulate(ad.T @ g)

    return _node(out, (an, bn), backward)


def add(a, b) -> Tensor:
    """Elementwise sum of two tensors of identical shape."""
    ad, an = _wrap(a)
    bd, bn = _wrap(b)
    if ad.shape != bd.shape:
        raise ShapeError(f"add shape mismatch: {ad.shape} vs {bd.shape}")
    out = ad + bd

    def backward(g: Array) -> None:
        if an is not None and an.requires_grad:
            an.accumulate(g)
        if bn is not None and bn.requires_grad:
            bn.accumulate(g)

    return _node(out, (an, bn), backward)


def mul(a, b) -> Tensor:
    """Elementwise product of two tensors of identical shape."""
    ad, an = _wrap(a)
    bd, bn = _wrap(b)
    if ad.shape != bd.shape:
        raise ShapeError(f"mul shape mismatch: {ad.shape} vs {bd.shape}")
    out = ad * bd

    def backward(g: Array) -> None:
        if an is not None and an.requires_grad:
            an.accumulate(g * bd)
        if bn is not None and bn.requires_grad:
            bn.accumulate(g * ad)

    return _node(out, (an, bn), backward)


def relu(x) -> Tensor:
    """Elementwise max(0, x)."""
    xd, xn = _wrap(x)
    out = np.maximum(xd, 0.0)

    def backward(g: Array) -> None:
        xn.accumulate(g * (xd > 0.0))

    return _node(out, (xn,), backward)


def log(x) -> Tensor:
    """Elementwise natural log; every input must be strictly positive."""
    xd, xn = _wrap(x)
    if not np.all(xd > 0.0):
        raise DomainError("log requires strictly positive inputs")
    out = np.log(xd)

    def backward(g: Array) -> None:
        xn.accumulate(g / xd)

    return _node(out, (xn,), backward)


def stable_softmax(scores: Array) -> Array:
    """Numerically stable softmax of a 1-d array (max-subtraction)."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise DomainError("softmax of an empty vector")
    shifted = scores - scores.max()
    e = np.exp(shifted)
    return e / e.sum()


def softmax(x) -> Tensor:
    """Softmax of a 1-d tensor; output is a probability vector."""
    xd, xn = _wrap(x)
    if xd.ndim != 1:
        raise ShapeError(f"softmax expects a 1-d tensor, got shape {xd.shape}")
    out = stable_softmax(xd)

    def backward(g: Array) -> None:
        xn.accumulate(out * (g - np.dot(g, out)))

    return _node(out, (xn,), backward)


def embedding_lookup(table, index: int, feature: str = "") -> Tensor:
    """Row ``index`` of an embedding table; gradient flows only to that row."""
    td, tn = _wrap(table)
    index = int(index)
    if index < 0 or index >= td.shape[0]:
        label = feature or "embedding"
        raise DomainError(
            f"category id {index} out of range for feature '{label}' "
            f"(cardinality {td.shape[0]})"
        )
    out = td[index].copy()

    def backward(g: Array) -> None:
        if tn.grad is None:
            tn.grad = np.zeros_like(tn.data)
        tn.grad[index] += g

    return _node(out, (tn,), backward)


def concat(parts) -> Tensor:
    """Concatenate 1-d tensors into one vector."""
    wrapped = [_wrap(p) for p in parts]
    datas = [d for d, _ in wrapped]
    if any(d.ndim != 1 for d in datas):
        raise ShapeError("concat expects 1-d tensors")
    out = np.concatenate(datas)
    offsets = np.cumsum([0] + [d.shape[0] for d in datas])

    def backward(g: Array) -> None:
        for (_, node), lo, hi in zip(wrapped, offsets[:-1], offsets[1:]):
            if node is not None and node.requires_grad:
                node.accumulate(g[lo:hi])

    return _node(out, (n for _, n in wrapped), backward)


def concat_cols(parts) -> Tensor:
    """Concatenate 2-d tensors with equal row counts along columns."""
    wrapped = [_wrap(p) for p in parts]
    datas = [d for d, _ in wrapped]
    if any(d.ndim != 2 for d in datas) or len({d.shape[0] for d in datas}) != 1:
        raise ShapeError(f"concat_cols expects 2-d blocks with equal rows, got {[d.shape for d in datas]}")
    out = np.hstack(datas)
    offsets = np.cumsum([0] + [d.shape[1] for d in datas])

    def backward(g: Array) -> None:
        for (_, node), lo, hi in zip(wrapped, offsets[:-1], offsets[1:]):
            if node is not None and node.requires_grad:
                node.accumulate(g[:, lo:hi])

    return _node(out, (n for _, n in wrapped), backward)


def repeat_rows(v, rows: int) -> Tensor:
    """Tile a 1-d tensor into ``rows`` identical rows."""
    vd, vn = _wrap(v)
    if vd.ndim != 1:
        raise ShapeError(f"repeat_rows expects a 1-d tensor, got shape {vd.shape}")
    out = np.tile(vd, (rows, 1))

    def backward(g: Array) -> None:
        vn.accumulate(g.sum(axis=0))

    return _node(out, (vn,), backward)


def reshape(x, shape) -> Tensor:
    xd, xn = _wrap(x)
    out = xd.reshape(shape)

    def backward(g: Array) -> None:
        xn.accumulate(g.reshape(xd.shape))

    return _node(out, (xn,), backward)


def sum_all(x) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    xd, xn = _wrap(x)
    out = np.asarray(xd.sum())

    def backward(g: Array) -> None:
        xn.accumulate(np.full_like(xd, float(g)))

    return _node(out, (xn,), backward)


def attach_loss(scores: Tensor, value: float, score_gradients: Array) -> Tensor:
    """Graft an externally computed loss onto the graph.

    ``value`` and ``score_gradients`` come from a loss routine evaluated on
    ``scores.data``; the returned scalar node backpropagates the given
    gradient into ``scores``.
    """
    grads = _as_array(score_gradients)
    if grads.shape != scores.data.shape:
        raise ShapeError(
            f"loss gradient shape {grads.shape} does not match scores {scores.data.shape}"
        )

    def backward(g: Array) -> None:
        scores.accumulate(float(g) * grads)

    return _node(np.asarray(float(value)), (scores,), backward)


# ---------------------------------------------------------------------------
# parameters, backward pass, optimizer


class ParameterSet:
    """Named leaf tensors, each carrying a gradient of identical shape."""

    def __init__(self):
        self._entries: dict[str, Tensor] = {}

    def add(self, name: str, values) -> Tensor:
        if name in self._entries:
            raise ContractError(f"duplicate parameter name '{name}'")
        t = Tensor(values, requires_grad=True, name=name)
        self._entries[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def items(self):
        return self._entries.items()

    def zero_grads(self) -> None:
        for t in self._entries.values():
            t.zero_grad()

    def snapshot(self) -> dict[str, Array]:
        """Copy of all parameter values, for later restore."""
        return {k: t.data.copy() for k, t in self._entries.items()}

    def restore(self, snap: Mapping[str, Array]) -> None:
        for k, t in self._entries.items():
            t.data[...] = snap[k]

    def n_values(self) -> int:
        return sum(t.data.size for t in self._entries.values())


def backward(loss: Tensor, params: ParameterSet) -> ParameterSet:
    """Reverse-mode accumulation from a scalar loss into parameter gradients."""
    if loss.data.shape != ():
        raise ContractError(f"backward needs a scalar loss, got shape {tuple(loss.data.shape)}")
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    loss.accumulate(np.asarray(1.0))
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    return params


def sgd_step(params: ParameterSet, lr: float) -> ParameterSet:
    """One plain gradient-descent step; gradients are zeroed afterward."""
    for name, t in params.items():
        if t.grad is None:
            continue
        if not np.all(np.isfinite(t.grad)):
            raise TrainingError(f"non-finite gradient in parameter '{name}'")
        t.data -= lr * t.grad
    params.zero_grads()
    return params


def gradient_check(
    loss_fn: Callable[[], Tensor],
    params: ParameterSet,
    h: float = 1e-5,
    samples: int = 50,
    seed: int = 0,
) -> float:
    """Max relative error between analytic gradients and central differences.

    ``loss_fn`` rebuilds the forward graph from the current parameter values
    and must be deterministic; up to ``samples`` coordinates are probed,
    drawn without replacement across all parameters.
    """
    if h <= 0.0:
        raise DomainError("finite-difference step must be positive")
    base = loss_fn()
    again = loss_fn()
    if float(base.data) != float(again.data):
        raise ContractError("loss_fn is not deterministic: two evaluations differ")
    params.zero_grads()
    backward(loss_fn(), params)
    analytic = {k: t.grad.copy() for k, t in params.items()}
    params.zero_grads()

    coords = [(k, i) for k, t in params.items() for i in range(t.data.size)]
    if len(coords) > samples:
        rng = np.random.default_rng(seed)
        picked = rng.choice(len(coords), size=samples, replace=False)
        coords = [coords[i] for i in picked]

    worst = 0.0
    for name, i in coords:
        flat = params[name].data.reshape(-1)
        orig = flat[i]
        flat[i] = orig + h
        hi = float(loss_fn().data)
        flat[i] = orig - h
        lo = float(loss_fn().data)
        flat[i] = orig
        numeric = (hi - lo) / (2.0 * h)
        a = float(analytic[name].reshape(-1)[i])
        err = abs(a - numeric) / max(1.0, abs(a))
        worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# weight initialization (seeded so builds are reproducible)


def init_dense_weight(rng: np.random.Generator, fan_in: int, fan_out: int) -> Array:
    """Uniform in +-sqrt(6/(fan_in+fan_out))."""
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_embedding_table(rng: np.random.Generator, cardinality: int, dim: int) -> Array:
    """Uniform in +-0.05."""
    return rng.uniform(-0.05, 0.05, size=(cardinality, dim))
