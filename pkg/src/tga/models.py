"""GCN encoder, projector, contrastive objective and the task-specific model.

Parameters live in flat name -> tensor mappings (usually a
:class:`~tga.numerics.ParamSet`). Names are grouped by prefix:

``encoder.W0`` (N x 64), ``encoder.W1`` (64 x 64)
    the two graph convolution layers;
``projector.{W1,b1,W2,b2}``
    64 -> 64 -> 64 MLP used only by the pretext objective;
``head.{W1,b1,W2,b2}``
    64 -> 32 -> C (or 1 for regression) prediction MLP;
``mask.logits`` (N x N)
    learnable attention mask, applied as ``sigmoid`` then symmetrized.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from tga import numerics as nx
from tga.augment import AugmentedView
from tga.errors import DimensionError
from tga.graphs import BrainGraph

HIDDEN = 64
HEAD_HIDDEN = 32
MASK_INIT_LOGIT = 3.0

ENCODER = ("encoder.W0", "encoder.W1")
PROJECTOR = ("projector.W1", "projector.b1", "projector.W2", "projector.b2")
HEAD = ("head.W1", "head.b1", "head.W2", "head.b2")
MASK = "mask.logits"

TASKS = ("classification", "regression")

Params = Mapping[str, np.ndarray]


def _uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_encoder(n_rois: int, rng: np.random.Generator, hidden: int = HIDDEN) -> dict[str, np.ndarray]:
    return {
        "encoder.W0": _uniform(rng, n_rois, hidden),
        "encoder.W1": _uniform(rng, hidden, hidden),
    }


def init_projector(rng: np.random.Generator, hidden: int = HIDDEN) -> dict[str, np.ndarray]:
    return {
        "projector.W1": _uniform(rng, hidden, hidden),
        "projector.b1": np.zeros((1, hidden)),
        "projector.W2": _uniform(rng, hidden, hidden),
        "projector.b2": np.zeros((1, hidden)),
    }


def init_head(
    rng: np.random.Generator, out_dim: int, hidden: int = HIDDEN, head_hidden: int = HEAD_HIDDEN
) -> dict[str, np.ndarray]:
    return {
        "head.W1": _uniform(rng, hidden, head_hidden),
        "head.b1": np.zeros((1, head_hidden)),
        "head.W2": _uniform(rng, head_hidden, out_dim),
        "head.b2": np.zeros((1, out_dim)),
    }


def init_mask(n_rois: int, logit: float = MASK_INIT_LOGIT) -> dict[str, np.ndarray]:
    return {MASK: np.full((n_rois, n_rois), float(logit))}


# --- encoder -------------------------------------------------------------------


@dataclass
class _EncoderCache:
    mp: np.ndarray
    x: np.ndarray
    w0: np.ndarray
    w1: np.ndarray
    xw: np.ndarray
    h0: np.ndarray
    r0: np.ndarray
    rw: np.ndarray
    h1: np.ndarray


def _encode_forward(mp: np.ndarray, x: np.ndarray, w0: np.ndarray, w1: np.ndarray):
    if x.shape[1] != w0.shape[0]:
        raise DimensionError(
            f"feature width {x.shape[1]} does not match encoder input width {w0.shape[0]}"
        )
    # (mp @ x) @ w0 == mp @ (x @ w0); the right grouping is cheaper
    xw = nx.matmul(x, w0)
    h0 = nx.matmul(mp, xw)
    r0 = nx.relu(h0)
    rw = nx.matmul(r0, w1)
    h1 = nx.matmul(mp, rw)
    z = nx.relu(h1)
    return z, _EncoderCache(mp, x, w0, w1, xw, h0, r0, rw, h1)


def _encode_backward(c: _EncoderCache, dz: np.ndarray, want_mp: bool = False):
    dh1 = nx.relu_backward(c.h1, dz)
    dmp1, drw = nx.matmul_backward(c.mp, c.rw, dh1)
    dr0, dw1 = nx.matmul_backward(c.r0, c.w1, drw)
    dh0 = nx.relu_backward(c.h0, dr0)
    dmp0, dxw = nx.matmul_backward(c.mp, c.xw, dh0)
    _, dw0 = nx.matmul_backward(c.x, c.w0, dxw)
    dmp = dmp0 + dmp1 if want_mp else None
    return dw0, dw1, dmp


def encode(view: AugmentedView, enc: Params) -> np.ndarray:
    """Two-layer GCN: ``ReLU(Â · ReLU(Â · X · W0) · W1)`` over the view's nodes."""
    z, _ = _encode_forward(view.mp_matrix, view.x_view, enc["encoder.W0"], enc["encoder.W1"])
    return z


def graph_embedding(view: AugmentedView, enc: Params) -> np.ndarray:
    return nx.row_mean(encode(view, enc))


# --- projector / head MLPs ----------------------------------------------------------


def _mlp_forward(x, w1, b1, w2, b2, out_relu: bool = False):
    a = nx.matmul(x, w1) + b1
    r = nx.relu(a)
    pre = nx.matmul(r, w2) + b2
    out = nx.relu(pre) if out_relu else pre
    return out, (x, w1, a, r, w2, pre if out_relu else None)


def _mlp_backward(cache, dout):
    x, w1, a, r, w2, pre = cache
    if pre is not None:
        dout = nx.relu_backward(pre, dout)
    dr, dw2 = nx.matmul_backward(r, w2, dout)
    db2 = dout.sum(axis=0, keepdims=True)
    da = nx.relu_backward(a, dr)
    dx, dw1 = nx.matmul_backward(x, w1, da)
    db1 = da.sum(axis=0, keepdims=True)
    return dx, (dw1, db1, dw2, db2)


def project(z: np.ndarray, proj: Params) -> np.ndarray:
    """Projector MLP. The output is rectified like ``z`` itself, so both
    cosine terms of the pretext loss stay in [-1, 0]."""
    out, _ = _mlp_forward(nx.as_tensor(z), *(proj[k] for k in PROJECTOR), out_relu=True)
    return out


# --- contrastive objective ----------------------------------------------------------


def contrastive_loss(z1, z2, p1, p2) -> float:
    """Symmetric negative-cosine loss; each ``z`` is compared with the other
    branch's projection. Lies in [-2, 0] when all inputs are non-negative."""
    return nx.neg_cosine(z1, p2) + nx.neg_cosine(z2, p1)


def contrastive_loss_grad(z1, z2, p1, p2, stop_gradient: bool = True):
    """Gradients ``(dz1, dz2, dp1, dp2)`` of :func:`contrastive_loss`.

    With ``stop_gradient`` the ``z`` arguments are constants, so ``dz1`` and
    ``dz2`` are exact zeros and gradient reaches the encoder only through the
    projections.
    """
    gz1, gp2 = nx.neg_cosine_grad(z1, p2)
    gz2, gp1 = nx.neg_cosine_grad(z2, p1)
    if stop_gradient:
        gz1 = np.zeros_like(gz1)
        gz2 = np.zeros_like(gz2)
    return gz1, gz2, gp1, gp2


def pretext_forward(v1: AugmentedView, v2: AugmentedView, params: Params):
    """Loss value and the caches needed by :func:`pretext_backward`."""
    w0, w1 = params["encoder.W0"], params["encoder.W1"]
    proj = [params[k] for k in PROJECTOR]
    branches = []
    for view in (v1, v2):
        zmat, enc_cache = _encode_forward(view.mp_matrix, view.x_view, w0, w1)
        z = nx.row_mean(zmat)
        p, mlp_cache = _mlp_forward(z, *proj, out_relu=True)
        branches.append((zmat.shape[0], enc_cache, z, p, mlp_cache))
    (_, _, z1, p1, _), (_, _, z2, p2, _) = branches
    return contrastive_loss(z1, z2, p1, p2), branches


def pretext_backward(branches, stop_gradient: bool = True) -> dict[str, np.ndarray]:
    (n1, e1, z1, p1, m1), (n2, e2, z2, p2, m2) = branches
    gz1, gz2, gp1, gp2 = contrastive_loss_grad(z1, z2, p1, p2, stop_gradient)
    grads = {k: 0.0 for k in ENCODER + PROJECTOR}
    for n, enc_cache, gz, gp, mlp_cache in ((n1, e1, gz1, gp1, m1), (n2, e2, gz2, gp2, m2)):
        dz, dproj = _mlp_backward(mlp_cache, gp)
        dz = dz + gz
        dw0, dw1, _ = _encode_backward(enc_cache, nx.row_mean_backward(n, dz))
        grads["encoder.W0"] = grads["encoder.W0"] + dw0
        grads["encoder.W1"] = grads["encoder.W1"] + dw1
        for k, g in zip(PROJECTOR, dproj):
            grads[k] = grads[k] + g
    return grads


def pretext_loss_and_grad(v1, v2, params: Params, stop_gradient: bool = True):
    loss, branches = pretext_forward(v1, v2, params)
    return loss, pretext_backward(branches, stop_gradient)


# --- task-specific model ------------------------------------------------------------------


def effective_mask(logits: np.ndarray) -> np.ndarray:
    m = nx.sigmoid(logits)
    return 0.5 * (m + m.T)


def masked_mp(graph: BrainGraph, mask: Params | None) -> np.ndarray:
    mp = graph.mp_matrix
    if mask is None or MASK not in mask:
        return mp
    logits = mask[MASK]
    if logits.shape != mp.shape:
        raise DimensionError(f"mask shape {logits.shape} does not match graph {mp.shape}")
    return mp * effective_mask(logits)


def masked_encode(graph: BrainGraph, enc: Params, mask: Params | None) -> np.ndarray:
    """Encoder over the full graph with ``Â`` replaced by ``Â ⊙ mask``."""
    z, _ = _encode_forward(masked_mp(graph, mask), graph.features, enc["encoder.W0"], enc["encoder.W1"])
    return z


def predict(graph: BrainGraph, params: Params, task: str = "classification") -> np.ndarray:
    """Logits (``1 x C``) or a ``1 x 1`` score for one graph."""
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    z = nx.row_mean(masked_encode(graph, params, params))
    out, _ = _mlp_forward(z, *(params[k] for k in HEAD))
    return out


def task_loss(out: np.ndarray, target, task: str) -> float:
    if task == "classification":
        return nx.softmax_cross_entropy(out, int(target))
    return nx.mae_loss(out, np.full_like(out, float(target)))


def task_loss_and_grad(graph: BrainGraph, target, params: Params, task: str):
    """Fine-tuning loss for one graph and its gradient for every parameter
    present in ``params`` (mask gradient only if a mask is present)."""
    has_mask = MASK in params
    mp = graph.mp_matrix
    if has_mask:
        logits = params[MASK]
        if logits.shape != mp.shape:
            raise DimensionError(f"mask shape {logits.shape} does not match graph {mp.shape}")
        sig = nx.sigmoid(logits)
        mp_eff = mp * (0.5 * (sig + sig.T))
    else:
        mp_eff = mp
    zmat, enc_cache = _encode_forward(mp_eff, graph.features, params["encoder.W0"], params["encoder.W1"])
    z = nx.row_mean(zmat)
    out, head_cache = _mlp_forward(z, *(params[k] for k in HEAD))

    if task == "classification":
        loss = nx.softmax_cross_entropy(out, int(target))
        dout = nx.softmax_cross_entropy_grad(out, int(target))
    else:
        tgt = np.full_like(out, float(target))
        loss = nx.mae_loss(out, tgt)
        dout = nx.mae_loss_grad(out, tgt)

    dz, dhead = _mlp_backward(head_cache, dout)
    dw0, dw1, dmp = _encode_backward(enc_cache, nx.row_mean_backward(zmat.shape[0], dz), want_mp=has_mask)
    grads = {"encoder.W0": dw0, "encoder.W1": dw1}
    grads.update(zip(HEAD, dhead))
    if has_mask:
        dsym = dmp * mp
        grads[MASK] = 0.5 * (dsym + dsym.T) * sig * (1.0 - sig)
    return loss, grads
