"""Dense float64 forward ops with hand-derived backward rules, Adam, and a
central-difference gradient checker.

Tensors are plain 2-D ``numpy.ndarray`` objects of dtype float64. Each forward
op has a matching ``*_backward`` (or ``*_grad`` for scalar losses) that maps
an upstream gradient to gradients of the inputs. Models compose these by hand
over a fixed computation structure; there is no tape.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterator, Mapping
from dataclasses import dataclass, field

import numpy as np

from tga.errors import (
    DegenerateEmbeddingError,
    DimensionError,
    EmptyGraphError,
    LabelRangeError,
    TrainingDivergedError,
)

ADAM_LR = 1e-3
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


def as_tensor(x) -> np.ndarray:
    """Coerce to a 2-D float64 array; 1-D input becomes a single row."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        return arr.reshape(1, 1)
    if arr.ndim == 1:
        return arr.reshape(1, -1)
    if arr.ndim != 2:
        raise DimensionError(f"expected at most 2 dimensions, got shape {arr.shape}")
    return arr


# --- forward / backward pairs ------------------------------------------------


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def matmul_backward(a: np.ndarray, b: np.ndarray, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return grad @ b.T, a.T @ grad


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, grad: np.ndarray) -> np.ndarray:
    # subgradient 0 at exactly x == 0
    return np.where(x > 0.0, grad, 0.0)


def row_mean(z: np.ndarray) -> np.ndarray:
    """Average over rows, returning a ``1 x cols`` tensor."""
    if z.shape[0] == 0:
        raise EmptyGraphError("cannot average an empty node set")
    return z.mean(axis=0, keepdims=True)


def row_mean_backward(n_rows: int, grad: np.ndarray) -> np.ndarray:
    return np.repeat(grad / n_rows, n_rows, axis=0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # split branches so neither exp overflows
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _norms(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray, float, float]:
    u = np.ravel(u)
    v = np.ravel(v)
    if u.shape != v.shape:
        raise DimensionError(f"cosine of vectors with shapes {u.shape} and {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise DegenerateEmbeddingError("cosine similarity of a zero-norm embedding")
    return u, v, nu, nv


def neg_cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Negative cosine similarity, clipped into [-1, 1]."""
    u, v, nu, nv = _norms(u, v)
    return float(np.clip(-(u @ v) / (nu * nv), -1.0, 1.0))


def neg_cosine_grad(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of ``neg_cosine(u, v)`` with respect to ``u`` and ``v``.

    Returned in the input shapes. With ``c = u.v / (|u||v|)`` the derivative
    of ``-c`` w.r.t. ``u`` is ``-(v / (|u||v|) - c u / |u|^2)``.
    """
    shape_u, shape_v = np.shape(u), np.shape(v)
    u, v, nu, nv = _norms(u, v)
    cos = (u @ v) / (nu * nv)
    gu = -(v / (nu * nv) - cos * u / nu**2)
    gv = -(u / (nu * nv) - cos * v / nv**2)
    return gu.reshape(shape_u), gv.reshape(shape_v)


def _check_label(logits: np.ndarray, label: int) -> np.ndarray:
    logits = np.ravel(logits)
    if not 0 <= int(label) < logits.size:
        raise LabelRangeError(f"label {label} outside 0..{logits.size - 1}")
    return logits


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = np.ravel(logits) - np.max(logits)
    ex = np.exp(shifted)
    return (ex / ex.sum()).reshape(np.shape(logits))


def softmax_cross_entropy(logits: np.ndarray, label: int) -> float:
    flat = _check_label(logits, label)
    shifted = flat - flat.max()
    return float(np.log(np.exp(shifted).sum()) - shifted[int(label)])


def softmax_cross_entropy_grad(logits: np.ndarray, label: int) -> np.ndarray:
    flat = _check_label(logits, label)
    grad = softmax(flat)
    grad[int(label)] -= 1.0
    return grad.reshape(np.shape(logits))


def mae_loss(pred: np.ndarray, target: np.ndarray) -> float:
    pred, target = np.asarray(pred, dtype=np.float64), np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"MAE of shapes {pred.shape} and {target.shape}")
    return float(np.mean(np.abs(pred - target)))


def mae_loss_grad(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    pred, target = np.asarray(pred, dtype=np.float64), np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"MAE of shapes {pred.shape} and {target.shape}")
    return np.sign(pred - target) / pred.size


# --- parameters and optimizer -------------------------------------------------


@dataclass
class Param:
    value: np.ndarray
    grad: np.ndarray = field(init=False)
    m: np.ndarray = field(init=False)
    v: np.ndarray = field(init=False)
    t: int = 0
    trainable: bool = True

    def __post_init__(self):
        self.value = as_tensor(self.value).copy()
        self.grad = np.zeros_like(self.value)
        self.m = np.zeros_like(self.value)
        self.v = np.zeros_like(self.value)


class ParamSet(Mapping[str, Param]):
    """Ordered collection of named parameters with Adam state.

    A ParamSet is mutated by gradient accumulation and :func:`adam_step`; keep
    each instance on one worker at a time.
    """

    def __init__(self, values: Mapping[str, np.ndarray] | None = None):
        self._params: dict[str, Param] = {}
        for name, value in (values or {}).items():
            self.add(name, value)

    def add(self, name: str, value, trainable: bool = True) -> Param:
        if name in self._params:
            raise KeyError(f"duplicate parameter {name!r}")
        param = Param(value, trainable=trainable)
        self._params[name] = param
        return param

    def __getitem__(self, name: str) -> Param:
        return self._params[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def value(self, name: str) -> np.ndarray:
        return self._params[name].value

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: p.value for name, p in self._params.items()}

    def accumulate(self, name: str, grad: np.ndarray, scale: float = 1.0) -> None:
        param = self._params[name]
        param.grad += scale * np.reshape(grad, param.value.shape)

    def zero_grad(self) -> None:
        for param in self._params.values():
            param.grad.fill(0.0)

    def grads(self) -> dict[str, np.ndarray]:
        return {name: p.grad.copy() for name, p in self._params.items()}

    def copy(self) -> ParamSet:
        out = ParamSet()
        for name, p in self._params.items():
            q = out.add(name, p.value, trainable=p.trainable)
            q.grad[...] = p.grad
            q.m[...] = p.m
            q.v[...] = p.v
            q.t = p.t
        return out


def adam_step(
    params: ParamSet,
    lr: float = ADAM_LR,
    betas: tuple[float, float] = ADAM_BETAS,
    eps: float = ADAM_EPS,
) -> ParamSet:
    """Apply one bias-corrected Adam update in place and zero the gradients.

    Parameters flagged ``trainable=False`` keep their values and moments; their
    gradients are still cleared.

    Raises:
        TrainingDivergedError: if any gradient entry is NaN or infinite.
    """
    b1, b2 = betas
    for name, p in params.items():
        if not np.all(np.isfinite(p.grad)):
            raise TrainingDivergedError(f"non-finite gradient for {name!r}")
    for p in params.values():
        if p.trainable:
            p.t += 1
            p.m = b1 * p.m + (1.0 - b1) * p.grad
            p.v = b2 * p.v + (1.0 - b2) * p.grad**2
            m_hat = p.m / (1.0 - b1**p.t)
            v_hat = p.v / (1.0 - b2**p.t)
            p.value = p.value - lr * m_hat / (np.sqrt(v_hat) + eps)
        p.grad.fill(0.0)
    return params


# --- gradient checking --------------------------------------------------------


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst: tuple[str, int] | None
    tol: float
    n_coords: int

    @property
    def passed(self) -> bool:
        return math.isfinite(self.max_rel_error) and self.max_rel_error <= self.tol


def finite_diff_check(
    f: Callable[[ParamSet], float],
    params: ParamSet,
    h: float = 1e-6,
    tol: float = 1e-5,
    grads: Mapping[str, np.ndarray] | None = None,
    floor: float = 1e-4,
) -> GradCheckReport:
    """Compare analytic gradients against central differences of ``f``.

    ``grads`` defaults to the gradients currently accumulated in ``params``.
    The per-coordinate error is ``|a - n| / max(|a|, |n|, floor)``; the floor
    keeps round-off on near-zero coordinates from dominating. Values are
    restored after each probe.
    """
    analytic = {k: np.asarray(v, dtype=np.float64) for k, v in (grads or params.grads()).items()}
    worst_err, worst = 0.0, None
    count = 0
    for name, p in params.items():
        flat = p.value.reshape(-1)
        a_flat = np.reshape(analytic[name], -1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = f(params)
            flat[i] = orig - h
            f_minus = f(params)
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = a_flat[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            if not math.isfinite(err):
                err = math.inf
            if err > worst_err or worst is None:
                worst_err, worst = err, (name, i)
            count += 1
    return GradCheckReport(max_rel_error=worst_err, worst=worst, tol=tol, n_coords=count)
