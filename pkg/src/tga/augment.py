"""Topology-aware graph augmentation.

Two importance-weighted perturbations of a brain graph:

* hub-preserving node dropping (``hnd``): a node is dropped with probability
  proportional to ``1 / degree``, so hubs tend to survive;
* weight-dependent edge removing (``wer``): an edge is removed with
  probability proportional to ``1 / |weight|``, so strong connections survive.

``uniform_node`` and ``uniform_edge`` are the same mechanics with flat
probabilities, used as the random-perturbation baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from tga.errors import ConfigError, DegenerateGraphError, InvalidRatioError
from tga.graphs import BrainGraph, normalize_adjacency

NODE_KINDS = ("hnd", "uniform_node")
EDGE_KINDS = ("wer", "uniform_edge")
KINDS = NODE_KINDS + EDGE_KINDS
WEIGHT_FLOOR = 1e-12


@dataclass(frozen=True)
class AugmentStrategy:
    kind: str = "wer"
    alpha: float = 0.1
    beta: float = 0.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown augmentation kind {self.kind!r}; expected one of {KINDS}")
        for name in ("alpha", "beta"):
            ratio = getattr(self, name)
            if not 0.0 <= ratio < 1.0:
                raise InvalidRatioError(f"{name} must lie in [0, 1), got {ratio}")

    @property
    def drops_nodes(self) -> bool:
        return self.kind in NODE_KINDS


@dataclass
class AugmentedView:
    kept_nodes: np.ndarray
    a_aug: np.ndarray
    x_view: np.ndarray
    mp_matrix: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.kept_nodes)


def round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def upper_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column indices of the unordered off-diagonal pairs ``i < j``."""
    return np.triu_indices(n, k=1)


def hnd_probabilities(g: BrainGraph) -> np.ndarray:
    """Node drop distribution ``p_i = (1/d_i) / sum_j (1/d_j)``."""
    d = np.asarray(g.degrees, dtype=np.float64)
    if np.any(d <= 0.0):
        raise DegenerateGraphError(f"nodes {np.flatnonzero(d <= 0).tolist()} have zero degree")
    q = 1.0 / d
    return q / q.sum()


def wer_probabilities(g: BrainGraph) -> np.ndarray:
    """Edge removal distribution over ``upper_pairs`` order, ``p_ij ∝ 1/|a_ij|``."""
    rows, cols = upper_pairs(g.n_nodes)
    q = 1.0 / np.maximum(np.abs(g.adjacency[rows, cols]), WEIGHT_FLOOR)
    return q / q.sum()


def weighted_sample_without_replacement(
    probs: np.ndarray, k: int, rng: np.random.Generator, ordered: bool = True
) -> np.ndarray:
    """Draw a set of ``k`` distinct indices, each draw proportional to
    ``probs`` over the items not yet drawn.

    Uses Gumbel-top-k: the ``k`` largest ``log p + Gumbel`` keys are a sample
    from exactly the successive-renormalization distribution, in one pass.
    With ``ordered`` the indices come back in draw order.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if k == 0:
        return np.empty(0, dtype=np.int64)
    with np.errstate(divide="ignore"):
        keys = np.log(probs) + rng.gumbel(size=probs.size)
    if k < probs.size:
        top = np.argpartition(-keys, k - 1)[:k]
    else:
        top = np.arange(probs.size)
    return top[np.argsort(-keys[top], kind="stable")] if ordered else top


def _count(ratio: float, total: int, what: str) -> int:
    k = round_half_away(ratio * total)
    if k >= total and total > 0:
        raise InvalidRatioError(f"ratio {ratio} removes all {total} {what}")
    return k


def _node_view(g: BrainGraph, kept: np.ndarray) -> AugmentedView:
    a = g.adjacency
    sub = a[kept][:, kept]
    return AugmentedView(
        kept_nodes=kept,
        a_aug=a,
        x_view=g.features[kept],
        mp_matrix=normalize_adjacency(sub),
    )


def sample_node_drop(g: BrainGraph, alpha: float, probs: np.ndarray, rng: np.random.Generator) -> AugmentedView:
    """Drop ``round(alpha * N)`` nodes drawn from ``probs`` without replacement.

    Survivors keep their full ``N``-wide feature rows; only the message
    passing matrix shrinks.
    """
    n = g.n_nodes
    k = _count(alpha, n, "nodes")
    dropped = weighted_sample_without_replacement(probs, k, rng, ordered=False)
    keep_mask = np.ones(n, dtype=bool)
    keep_mask[dropped] = False
    return _node_view(g, np.flatnonzero(keep_mask))


def sample_edge_remove(g: BrainGraph, beta: float, probs: np.ndarray, rng: np.random.Generator) -> AugmentedView:
    """Zero ``round(beta * E)`` unordered pairs (both orientations) of the
    adjacency; the diagonal is never touched.

    The view's features are the rows of the edge-removed adjacency, matching
    ``X = A`` for the perturbed graph.
    """
    n = g.n_nodes
    rows, cols = upper_pairs(n)
    k = _count(beta, rows.size, "edges")
    removed = weighted_sample_without_replacement(probs, k, rng, ordered=False)
    a_aug = g.adjacency.copy()
    a_aug[rows[removed], cols[removed]] = 0.0
    a_aug[cols[removed], rows[removed]] = 0.0
    return AugmentedView(
        kept_nodes=np.arange(n),
        a_aug=a_aug,
        x_view=a_aug,
        mp_matrix=normalize_adjacency(a_aug),
    )


def strategy_probabilities(g: BrainGraph, strategy: AugmentStrategy) -> np.ndarray:
    if strategy.kind == "hnd":
        return hnd_probabilities(g)
    if strategy.kind == "wer":
        return wer_probabilities(g)
    size = g.n_nodes if strategy.drops_nodes else g.n_nodes * (g.n_nodes - 1) // 2
    return np.full(size, 1.0 / size)


def _sample(g: BrainGraph, strategy: AugmentStrategy, probs: np.ndarray, rng) -> AugmentedView:
    if strategy.drops_nodes:
        return sample_node_drop(g, strategy.alpha, probs, rng)
    return sample_edge_remove(g, strategy.beta, probs, rng)


def uniform_perturb(g: BrainGraph, strategy: AugmentStrategy, rng: np.random.Generator) -> AugmentedView:
    """Baseline perturbation: same sampler, flat probabilities."""
    if strategy.kind not in ("uniform_node", "uniform_edge"):
        raise ConfigError(f"uniform_perturb needs a uniform strategy, got {strategy.kind!r}")
    return _sample(g, strategy, strategy_probabilities(g, strategy), rng)


def augment(g: BrainGraph, strategy: AugmentStrategy, rng: np.random.Generator) -> AugmentedView:
    return _sample(g, strategy, strategy_probabilities(g, strategy), rng)


def make_views(
    g: BrainGraph, strategy: AugmentStrategy, rng: np.random.Generator, probs: np.ndarray | None = None
) -> tuple[AugmentedView, AugmentedView]:
    """Two independent draws of the same augmentation, each from its own
    child stream of ``rng``. ``probs`` may be passed in to reuse
    :func:`strategy_probabilities` across epochs."""
    if probs is None:
        probs = strategy_probabilities(g, strategy)
    rng1, rng2 = rng.spawn(2)
    return _sample(g, strategy, probs, rng1), _sample(g, strategy, probs, rng2)


def full_view(g: BrainGraph) -> AugmentedView:
    """The unperturbed graph as a view."""
    return AugmentedView(
        kept_nodes=np.arange(g.n_nodes),
        a_aug=g.adjacency,
        x_view=g.features,
        mp_matrix=g.mp_matrix,
    )
