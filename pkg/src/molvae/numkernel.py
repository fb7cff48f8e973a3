"""Dense float64 tensors with tape-based reverse-mode differentiation."""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np


class NumericError(ArithmeticError):
    """Base class for numeric failures."""


class ShapeMismatch(NumericError):
    pass


class NotScalar(NumericError):
    pass


class NonFiniteValue(NumericError):
    pass


def _check_finite(arr: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"non-finite value produced by {op}")
    return arr


class Tensor:
    """A node in the computation tape.

    Holds a float64 ndarray; operations record their inputs and a local
    gradient rule so `backward` can accumulate exact reverse-mode gradients.
    """

    __slots__ = ("data", "grad", "_parents", "_grad_fn", "name")

    def __init__(
        self,
        data,
        parents: tuple["Tensor", ...] = (),
        grad_fn: Callable[[np.ndarray], tuple[np.ndarray, ...]] | None = None,
        name: str | None = None,
    ):
        arr = np.asarray(data, dtype=np.float64)
        _check_finite(arr, name or "tensor creation")
        self.data = arr
        self.grad: np.ndarray | None = None
        self._parents = parents
        self._grad_fn = grad_fn
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, name={self.name!r})"

    # -- autodiff --------------------------------------------------------

    def backward(self) -> None:
        """Accumulate gradients of this scalar into every tape ancestor."""
        if self.data.size != 1:
            raise NotScalar(f"backward requires a scalar, got shape {self.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        for node in topo:
            node.grad = np.zeros_like(node.data)
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._grad_fn is None:
                continue
            grads = node._grad_fn(node.grad)
            for parent, g in zip(node._parents, grads):
                if g is not None:
                    parent.grad = parent.grad + g


def constant(data, name: str | None = None) -> Tensor:
    return Tensor(data, name=name)


def _require_2d(t: Tensor, op: str) -> None:
    if t.data.ndim != 2:
        raise ShapeMismatch(f"{op} requires a 2-D tensor, got shape {t.shape}")


# -- primitive operations ------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul shapes {a.shape} x {b.shape}")
    out_data = _check_finite(a.data @ b.data, "matmul")

    def grad_fn(g):
        return (g @ b.data.T, a.data.T @ g)

    return Tensor(out_data, (a, b), grad_fn, "matmul")


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeMismatch(f"add shapes {a.shape} vs {b.shape}")
    return Tensor(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeMismatch(f"sub shapes {a.shape} vs {b.shape}")
    return Tensor(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return Tensor(a.data * c, (a,), lambda g: (g * c,), "scale")


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeMismatch(f"hadamard shapes {a.shape} vs {b.shape}")
    return Tensor(
        a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data), "hadamard"
    )


def transpose(a: Tensor) -> Tensor:
    _require_2d(a, "transpose")
    return Tensor(a.data.T, (a,), lambda g: (g.T,), "transpose")


def concat_rows(tensors: Iterable[Tensor]) -> Tensor:
    ts = list(tensors)
    if not ts:
        raise ShapeMismatch("concat_rows of nothing")
    widths = {t.shape[1] for t in ts if t.data.ndim == 2}
    if any(t.data.ndim != 2 for t in ts) or len(widths) != 1:
        raise ShapeMismatch("concat_rows needs 2-D tensors of equal width")
    out_data = np.concatenate([t.data for t in ts], axis=0)
    offsets = np.cumsum([0] + [t.shape[0] for t in ts])

    def grad_fn(g):
        return tuple(g[offsets[k] : offsets[k + 1]] for k in range(len(ts)))

    return Tensor(out_data, tuple(ts), grad_fn, "concat_rows")


def reduce_sum(a: Tensor, axis: int | None = None) -> Tensor:
    if axis is None:
        out_data = a.data.sum()

        def grad_fn(g):
            return (np.broadcast_to(g, a.shape).copy(),)

    else:
        _require_2d(a, "reduce_sum(axis)")
        out_data = a.data.sum(axis=axis)

        def grad_fn(g):
            return (np.broadcast_to(np.expand_dims(g, axis), a.shape).copy(),)

    return Tensor(out_data, (a,), grad_fn, "reduce_sum")


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    out_data = a.data.reshape(shape)
    return Tensor(out_data, (a,), lambda g: (g.reshape(a.shape),), "reshape")


def exp(a: Tensor) -> Tensor:
    out_data = _check_finite(np.exp(a.data), "exp")
    return Tensor(out_data, (a,), lambda g: (g * out_data,), "exp")


def log(a: Tensor) -> Tensor:
    out_data = _check_finite(np.log(a.data), "log")
    return Tensor(out_data, (a,), lambda g: (g / a.data,), "log")


def square(a: Tensor) -> Tensor:
    return Tensor(a.data * a.data, (a,), lambda g: (2.0 * g * a.data,), "square")


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values; gradient passes through only where unclipped."""
    out_data = np.clip(a.data, lo, hi)
    inside = (a.data > lo) & (a.data < hi)
    return Tensor(out_data, (a,), lambda g: (g * inside,), "clip")


def elu(a: Tensor) -> Tensor:
    """Exponential linear unit with alpha = 1."""
    neg = np.exp(np.minimum(a.data, 0.0)) - 1.0
    out_data = np.where(a.data > 0.0, a.data, neg)
    local = np.where(a.data > 0.0, 1.0, neg + 1.0)
    return Tensor(out_data, (a,), lambda g: (g * local,), "elu")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    """1 / (1 + e^-x) without overflow for large |x|."""
    e = np.exp(-np.abs(x))
    return np.where(x >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))


def softplus(a: Tensor) -> Tensor:
    """log(1 + e^x), computed without overflow; gradient is the logistic."""
    out_data = np.maximum(a.data, 0.0) + np.log1p(np.exp(-np.abs(a.data)))
    local = _sigmoid(a.data)
    return Tensor(out_data, (a,), lambda g: (g * local,), "softplus")


def logistic(a: Tensor) -> Tensor:
    out_data = _sigmoid(a.data)
    local = out_data * (1.0 - out_data)
    return Tensor(out_data, (a,), lambda g: (g * local,), "logistic")


def row_softmax(a: Tensor) -> Tensor:
    """Row-wise softmax, computed with max subtraction for stability."""
    _require_2d(a, "row_softmax")
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=1, keepdims=True)

    def grad_fn(g):
        dot = (g * out_data).sum(axis=1, keepdims=True)
        return (out_data * (g - dot),)

    return Tensor(out_data, (a,), grad_fn, "row_softmax")


# -- parameter store and gradient checking -------------------------------


class ParamStore:
    """Named learnable tensors with fixed shapes."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, data) -> Tensor:
        if name in self._params:
            raise KeyError(f"duplicate parameter {name!r}")
        t = Tensor(data, name=name)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self) -> list[tuple[str, Tensor]]:
        return list(self._params.items())


def backward(loss: Tensor, params: ParamStore) -> dict[str, np.ndarray]:
    """Run reverse mode from `loss`; parameters off the tape get zero gradients."""
    for _, p in params.items():
        p.grad = None
    loss.backward()
    out = {}
    for name, p in params.items():
        out[name] = p.grad if p.grad is not None else np.zeros_like(p.data)
    return out


def grad_check(
    f: Callable[[ParamStore], Tensor],
    params: ParamStore,
    eps: float = 1e-5,
    max_coords: int = 200,
    seed: int = 0,
) -> float:
    """Max relative error of reverse-mode gradients vs central differences.

    Checks all coordinates when the total parameter count is small. Otherwise
    the subset is the `max_coords` coordinates with the largest analytic
    gradient magnitude: a wrong gradient rule shows up there at O(1) relative
    error, while near-zero-gradient coordinates only measure float64
    cancellation noise in the difference quotient.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError(f"eps {eps} outside [1e-7, 1e-3]")
    analytic = backward(f(params), params)
    coords = [
        (name, idx)
        for name, p in params.items()
        for idx in range(p.data.size)
    ]
    if len(coords) > max_coords:
        coords.sort(key=lambda c: -abs(analytic[c[0]].reshape(-1)[c[1]]))
        coords = coords[:max_coords]
    worst = 0.0
    for name, idx in coords:
        flat = params[name].data.reshape(-1)
        orig = flat[idx]
        flat[idx] = orig + eps
        hi = f(params).item()
        flat[idx] = orig - eps
        lo = f(params).item()
        flat[idx] = orig
        numeric = (hi - lo) / (2.0 * eps)
        a = analytic[name].reshape(-1)[idx]
        denom = max(abs(a), abs(numeric), 1e-8)
        worst = max(worst, abs(a - numeric) / denom)
    return worst
