"""Cost-sensitive multilabel and partial ranking losses with their Bayes
optimal predictors.

A prediction is a tuple of distinct 0-based class indices; its order
matters.  Costs are indexed by 0-based position ``j`` and prediction size
``s``, so ``costs.cost(0, s)`` is the cost of the top slot.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

Prediction = tuple[int, ...]

REGRET_CLAMP = 1e-12
BRUTE_FORCE_MAX_K = 7


class CostStructure:
    """Position/size dependent false-positive costs.

    ``matrix[s, j]`` holds the cost of a false positive at position ``j``
    (0-based) in a prediction of size ``s``; entries with ``j >= s`` are
    unused and kept at zero.
    """

    def __init__(self, matrix, preset: str = "custom"):
        m = np.array(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] + 1:
            raise ValueError("cost matrix must have shape (K + 1, K)")
        K = m.shape[1]
        for s in range(1, K + 1):
            row = m[s, :s]
            if row[0] > 1.0 or row[-1] < 0.0 or np.any(np.diff(row) > 0):
                raise ValueError(f"costs for size {s} must be nonincreasing within [0, 1]")
            m[s, s:] = 0.0
        m[0] = 0.0
        m.setflags(write=False)
        self.matrix = m
        self.preset = preset

    @classmethod
    def constant(cls, K: int) -> "CostStructure":
        m = np.tril(np.ones((K + 1, K)), k=-1)
        return cls(m, "constant")

    @classmethod
    def decreasing(cls, K: int) -> "CostStructure":
        m = np.zeros((K + 1, K))
        for s in range(1, K + 1):
            m[s, :s] = (s - np.arange(s)) / s
        return cls(m, "decreasing")

    @classmethod
    def from_preset(cls, name: str, K: int) -> "CostStructure":
        if name == "constant":
            return cls.constant(K)
        if name == "decreasing":
            return cls.decreasing(K)
        raise ValueError(f"unknown cost preset {name!r}")

    @property
    def n_classes(self) -> int:
        return self.matrix.shape[1]

    @property
    def strictly_decreasing(self) -> bool:
        return all(np.all(np.diff(self.matrix[s, :s]) < 0) for s in range(1, self.n_classes + 1))

    def cost(self, pos: int, size: int) -> float:
        if not 0 <= pos < size <= self.n_classes:
            raise IndexError(f"no cost for position {pos} in size {size}")
        return float(self.matrix[size, pos])

    def __repr__(self):
        return f"CostStructure(K={self.n_classes}, preset={self.preset!r})"


@dataclass(frozen=True)
class LossParams:
    a: float
    costs: CostStructure

    def __post_init__(self):
        if not 0.0 <= self.a <= 1.0:
            raise ValueError(f"a must lie in [0, 1], got {self.a}")

    @property
    def ratio(self) -> float:
        """``a / (1 - a)``; only defined for ``a < 1``."""
        if self.a >= 1.0:
            raise ValueError("reduced loss needs a < 1")
        return self.a / (1.0 - self.a)


def _check_prediction(pred: Sequence[int]) -> Prediction:
    pred = tuple(int(i) for i in pred)
    if len(set(pred)) != len(pred):
        raise ValueError(f"prediction {pred} repeats a class")
    return pred


def hamming(truth: Iterable[int], pred: Iterable[int]) -> int:
    """Size of the symmetric difference between the two label sets."""
    return len(set(truth) ^ set(pred))


# --- the cost-sensitive loss --------------------------------------------------

def loss_ac_full(params: LossParams, truth: Iterable[int], pred: Sequence[int]) -> float:
    """``a`` times the misses plus ``1 - a`` times the position costs of false positives."""
    pred = _check_prediction(pred)
    truth = set(truth)
    s = len(pred)
    fp = sum(params.costs.matrix[s, j] for j, i in enumerate(pred) if i not in truth)
    return params.a * len(truth - set(pred)) + (1.0 - params.a) * float(fp)


def loss_ac_reduced(params: LossParams, truth: Iterable[int], pred: Sequence[int]) -> float:
    """Full loss minus the prediction-independent term ``a * |truth|``."""
    pred = _check_prediction(pred)
    truth = set(truth)
    y = np.array([i in truth for i in pred], dtype=float)
    return _reduced(params, y, len(pred))


def expected_loss_ac(params: LossParams, probs, pred: Sequence[int]) -> float:
    """Expected reduced loss given marginal label probabilities."""
    pred = _check_prediction(pred)
    probs = np.asarray(probs, dtype=float)
    return _reduced(params, probs[list(pred)], len(pred))


def _reduced(params: LossParams, y, s: int) -> float:
    ratio = params.ratio
    if s == 0:
        return 0.0
    c = params.costs.matrix[s, :s]
    return float((1.0 - params.a) * np.sum(c - (ratio + c) * y))


def sort_classes(probs) -> np.ndarray:
    """Classes by nonincreasing probability, ties by ascending index."""
    probs = np.asarray(probs, dtype=float)
    return np.lexsort((np.arange(probs.shape[0]), -probs))


def prefix_losses(params: LossParams, sorted_probs, max_size: int) -> np.ndarray:
    """Expected reduced loss of each sorted prefix of size ``0..max_size``."""
    ratio = params.ratio
    p = np.asarray(sorted_probs, dtype=float)[:max_size]
    C = params.costs.matrix[: max_size + 1, :max_size]
    terms = C - (ratio + C) * p[None, :]
    mask = np.tri(max_size + 1, max_size, k=-1, dtype=bool)
    return (1.0 - params.a) * np.where(mask, terms, 0.0).sum(axis=1)


def bayes_optimal_subset(params: LossParams, probs, size_cap: int | None = None) -> Prediction:
    """Best ordered subset: the best-scoring prefix of the sorted classes.

    Ties between prefix sizes go to the smallest size.  Runs in ``O(K^2)``
    because the costs depend on the prediction size.
    """
    probs = np.asarray(probs, dtype=float)
    K = probs.shape[0]
    cap = K if size_cap is None else min(int(size_cap), K)
    if cap < 0:
        raise ValueError("size_cap must be nonnegative")
    order = sort_classes(probs)
    values = prefix_losses(params, probs[order], cap)
    s = int(np.argmin(values))
    return tuple(int(i) for i in order[:s])


def brute_force_bayes(params: LossParams, probs, size_cap: int | None = None) -> Prediction:
    """Minimize the expected loss over every ordered subset by enumeration."""
    probs = np.asarray(probs, dtype=float)
    K = probs.shape[0]
    if K > BRUTE_FORCE_MAX_K:
        raise ValueError(f"brute force limited to K <= {BRUTE_FORCE_MAX_K}, got {K}")
    cap = K if size_cap is None else min(int(size_cap), K)
    best, best_val = (), 0.0
    for s in range(1, cap + 1):
        for pred in itertools.permutations(range(K), s):
            v = expected_loss_ac(params, probs, pred)
            if v < best_val:
                best, best_val = pred, v
    return best


# --- ranking losses -----------------------------------------------------------

def rank_loss_full(truth: Iterable[int], scores) -> float:
    """Pairs (relevant, irrelevant) ranked the wrong way, ties count 1/2."""
    scores = np.asarray(scores, dtype=float)
    y = np.zeros(scores.shape[0], dtype=bool)
    y[list(truth)] = True
    pos, neg = scores[y], scores[~y]
    if pos.size == 0 or neg.size == 0:
        return 0.0
    diff = pos[:, None] - neg[None, :]
    return float(np.sum(diff < 0) + 0.5 * np.sum(diff == 0))


def scores_from_prediction(pred: Sequence[int], K: int) -> np.ndarray:
    """Scores ``s, s-1, ..., 1`` for the predicted classes and 0 elsewhere."""
    pred = _check_prediction(pred)
    scores = np.zeros(K)
    scores[list(pred)] = np.arange(len(pred), 0, -1)
    return scores


def p_rank_loss(truth: Iterable[int], pred: Sequence[int], size_cap: int) -> float:
    """Inverted pairs inside the prediction plus ``size_cap`` per missed label."""
    pred = _check_prediction(pred)
    if len(pred) > size_cap:
        raise ValueError("prediction longer than size cap")
    truth = set(truth)
    y = [i in truth for i in pred]
    inverted = sum(1 for hi, lo in itertools.combinations(range(len(pred)), 2) if y[lo] and not y[hi])
    return float(inverted + size_cap * len(truth - set(pred)))


def expected_p_rank(probs, pred: Sequence[int], size_cap: int) -> float:
    """Expected partial ranking loss under independent labels."""
    pred = _check_prediction(pred)
    if len(pred) > size_cap:
        raise ValueError("prediction longer than size cap")
    probs = np.asarray(probs, dtype=float)
    q = probs[list(pred)]
    # pair (hi above lo) is inverted when lo is relevant and hi is not
    pairs = np.triu(np.outer(1.0 - q, q), k=1).sum()
    miss = probs.sum() - q.sum()
    return float(pairs + size_cap * miss)


def bayes_optimal_ranking(probs, size_cap: int) -> Prediction:
    """The ``size_cap`` most probable classes, most probable first."""
    probs = np.asarray(probs, dtype=float)
    if not 1 <= size_cap <= probs.shape[0]:
        raise ValueError(f"size_cap must lie in [1, {probs.shape[0]}]")
    return tuple(int(i) for i in sort_classes(probs)[:size_cap])


# --- regret -------------------------------------------------------------------

def regret_round(kind: str, params: LossParams | None, true_probs, pred: Sequence[int],
                 size_cap: int | None = None) -> float:
    """Excess expected loss of ``pred`` over the matching Bayes optimal output."""
    if kind == "ac":
        best = bayes_optimal_subset(params, true_probs, size_cap)
        r = expected_loss_ac(params, true_probs, pred) - expected_loss_ac(params, true_probs, best)
    elif kind == "p_rank":
        if size_cap is None:
            raise ValueError("p_rank regret needs a size cap")
        best = bayes_optimal_ranking(true_probs, size_cap)
        r = expected_p_rank(true_probs, pred, size_cap) - expected_p_rank(true_probs, best, size_cap)
    else:
        raise ValueError(f"unknown regret kind {kind!r}")
    if -REGRET_CLAMP <= r < 0.0:
        return 0.0
    return float(r)
