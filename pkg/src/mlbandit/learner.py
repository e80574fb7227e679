"""Second-order upper-confidence learner for multilabel prediction under
partial feedback, and its full-information counterpart (OBR).

Per-class state is kept in stacked arrays so one round costs a handful of
vectorized numpy calls: ``A`` and ``A_inv`` are ``(K, d, d)`` in full mode
and ``(K, d)`` diagonals in diagonal mode, ``W`` is ``(K, d)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .losses import LossParams, Prediction, bayes_optimal_ranking, bayes_optimal_subset
from .surrogate import SurrogateSpec, clip, eval_g, eval_p

REFRESH_EVERY = 10_000


class ConfigError(ValueError):
    pass


class FeedbackError(ValueError):
    """Feedback is inconsistent with the prediction it answers."""


@dataclass
class ClassState:
    """Snapshot of one class; ``A`` and ``A_inv`` are 1-D in diagonal mode."""

    A: np.ndarray
    A_inv: np.ndarray
    w: np.ndarray
    update_count: int = 0

    @classmethod
    def initial(cls, d: int, diagonal: bool = False) -> "ClassState":
        if diagonal:
            return cls(np.ones(d), np.ones(d), np.zeros(d))
        return cls(np.eye(d), np.eye(d), np.zeros(d))

    @property
    def diagonal(self) -> bool:
        return self.A.ndim == 1


@dataclass(frozen=True)
class LearnerConfig:
    spec: SurrogateSpec
    params: LossParams
    K: int
    d: int
    delta: float = 0.1
    u_bound: float | None = None
    mode: str = "subset"
    matrix_mode: str = "full"
    exploration: str = "ucb"
    # how the adaptive width meets 4R^2: "min" caps it, "max" floors it
    adaptive_cap: str = "min"

    def __post_init__(self):
        if self.K < 1 or self.d < 1:
            raise ConfigError("K and d must be at least 1")
        if self.mode not in ("subset", "ranking"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.matrix_mode not in ("full", "diagonal"):
            raise ConfigError(f"unknown matrix mode {self.matrix_mode!r}")
        if self.exploration not in ("ucb", "none"):
            raise ConfigError(f"unknown exploration {self.exploration!r}")
        if self.adaptive_cap not in ("min", "max"):
            raise ConfigError(f"unknown adaptive cap {self.adaptive_cap!r}")
        if self.exploration == "ucb" and not 0.0 < self.delta < 1.0 / math.e:
            raise ConfigError(f"delta must lie in (0, 1/e) with ucb, got {self.delta}")
        if self.u_bound is not None and self.u_bound < 0:
            raise ConfigError("u_bound must be nonnegative")
        if self.params.costs.n_classes != self.K:
            raise ConfigError("cost structure size does not match K")
        if self.mode == "ranking" and not self.params.costs.strictly_decreasing:
            raise ConfigError("ranking mode needs strictly decreasing costs")
        if self.mode == "subset" and self.params.a >= 1.0:
            raise ConfigError("subset mode needs a < 1")

    @property
    def adaptive(self) -> bool:
        return self.u_bound is None


def width_multiplier(config: LearnerConfig, t: int) -> float:
    """The factor multiplying ``x^T A^{-1} x`` in the squared width at round ``t``."""
    if t < 1:
        raise ValueError("rounds are numbered from 1")
    spec = config.spec
    c1, c2 = spec.c_grad_sq, spec.c_curv
    log_det = config.d * c1 / c2**2 * math.log1p((t - 1) / config.d)
    conc = 12.0 / c2 * (c1 / c2 + 3.0 * spec.loss_at_neg_r) * math.log(config.K * (t + 4) / config.delta)
    if config.adaptive:
        return 2.0 * log_det + conc
    return config.u_bound**2 + log_det + conc


def _widths(config: LearnerConfig, quad, t: int) -> np.ndarray:
    if config.exploration == "none":
        return np.zeros_like(quad)
    eps2 = quad * width_multiplier(config, t)
    if config.adaptive:
        bound = 4.0 * config.spec.radius**2
        eps2 = np.minimum(eps2, bound) if config.adaptive_cap == "min" else np.maximum(eps2, bound)
    return np.sqrt(eps2)


def confidence_width(state: ClassState, x, t: int, config: LearnerConfig) -> float:
    """Upper-confidence width for one class on context ``x`` at round ``t``."""
    x = np.asarray(x, dtype=float)
    quad = _quad_form(state.A_inv, x)
    return float(_widths(config, np.asarray(quad), t))


def _quad_form(A_inv, x):
    if A_inv.ndim == x.ndim:
        return np.sum(A_inv * x * x, axis=-1)
    return np.einsum("...ij,i,j->...", A_inv, x, x)


def project_weights(W, Ainv_x, x, R: float) -> np.ndarray:
    """Mahalanobis projection of each row of ``W`` onto ``{w : |w.x| <= R}``.

    ``Ainv_x`` holds ``A^{-1} x`` for each row.  Rows already feasible are
    returned unchanged.
    """
    W = np.asarray(W, dtype=float)
    m = W @ x
    shift = np.where(m > R, m - R, np.where(m < -R, m + R, 0.0))
    quad = Ainv_x @ x
    coef = np.divide(shift, quad, out=np.zeros_like(shift), where=shift != 0)
    return W - coef[..., None] * Ainv_x


def project(state: ClassState, x, R: float) -> np.ndarray:
    """Project one class's weight vector so its margin on ``x`` lies in ``[-R, R]``."""
    x = np.asarray(x, dtype=float)
    Ainv_x = state.A_inv * x if state.diagonal else state.A_inv @ x
    return project_weights(state.w, Ainv_x, x, R)


@dataclass
class PredictionTrace:
    t: int
    x: np.ndarray
    w_proj: np.ndarray  # (K, d)
    delta_hat: np.ndarray
    eps: np.ndarray
    p_hat: np.ndarray
    prediction: Prediction
    size_cap: int | None = None
    signs: np.ndarray | None = field(default=None, repr=False)


class Learner:
    """Bandit learner; call :meth:`predict` then exactly one update per round."""

    def __init__(self, config: LearnerConfig):
        self.config = config
        K, d = config.K, config.d
        if config.matrix_mode == "diagonal":
            self.A = np.ones((K, d))
            self.A_inv = np.ones((K, d))
        else:
            self.A = np.tile(np.eye(d), (K, 1, 1))
            self.A_inv = np.tile(np.eye(d), (K, 1, 1))
        self.W = np.zeros((K, d))
        self.update_count = np.zeros(K, dtype=int)
        self.t = 0
        self._pending: PredictionTrace | None = None

    @property
    def diagonal(self) -> bool:
        return self.config.matrix_mode == "diagonal"

    def state(self, i: int) -> ClassState:
        return ClassState(self.A[i].copy(), self.A_inv[i].copy(), self.W[i].copy(),
                          int(self.update_count[i]))

    @property
    def states(self) -> list[ClassState]:
        return [self.state(i) for i in range(self.config.K)]

    def _inv_times(self, x):
        if self.diagonal:
            return self.A_inv * x
        return self.A_inv @ x

    def predict(self, x, size_cap: int | None = None) -> tuple[Prediction, PredictionTrace]:
        cfg = self.config
        spec = cfg.spec
        x = np.asarray(x, dtype=float)
        if x.shape != (cfg.d,):
            raise ValueError(f"context must have shape ({cfg.d},)")
        if cfg.mode == "ranking" and size_cap is None:
            raise ValueError("ranking mode needs a size cap")
        if size_cap is not None and not 1 <= size_cap <= cfg.K:
            raise ValueError(f"size cap must lie in [1, {cfg.K}]")
        t = self.t + 1

        Ainv_x = self._inv_times(x)
        W_proj = project_weights(self.W, Ainv_x, x, spec.radius)
        delta_hat = W_proj @ x
        eps = _widths(cfg, Ainv_x @ x, t)
        p_hat = np.asarray(eval_p(spec, clip(spec, delta_hat + eps)), dtype=float).reshape(-1)

        if cfg.mode == "ranking":
            pred = bayes_optimal_ranking(p_hat, size_cap)
        else:
            pred = bayes_optimal_subset(cfg.params, p_hat, size_cap)
        trace = PredictionTrace(t, x, W_proj, delta_hat, eps, p_hat, pred, size_cap)
        self._pending = trace
        return pred, trace

    def update(self, trace: PredictionTrace, observed: Iterable[int]) -> None:
        """Partial-feedback step; ``observed`` must be the relevant predicted classes."""
        observed = set(observed)
        pred = set(trace.prediction)
        if not observed <= pred:
            raise FeedbackError(f"feedback {sorted(observed - pred)} outside the prediction")
        s = np.zeros(self.config.K)
        s[list(pred)] = -1.0
        s[list(observed)] = 1.0
        self._step(trace, s)

    def obr_update(self, trace: PredictionTrace, truth: Iterable[int]) -> None:
        """Full-information step: every class moves toward its true label."""
        s = -np.ones(self.config.K)
        s[list(truth)] = 1.0
        self._step(trace, s)

    def _step(self, trace: PredictionTrace, s: np.ndarray) -> None:
        if trace is not self._pending:
            raise FeedbackError("update does not answer the latest prediction")
        self._pending = None
        trace.signs = s
        spec = self.config.spec
        x = trace.x
        active = np.flatnonzero(s)
        # classes left out only carry over their projected weights
        W = trace.w_proj.copy()

        if active.size:
            if self.diagonal:
                self.A[active] += x * x
                self.A_inv[active] = 1.0 / self.A[active]
                new_inv_x = self.A_inv[active] * x
            else:
                Ainv_x = self.A_inv[active] @ x
                denom = 1.0 + Ainv_x @ x
                self.A_inv[active] -= np.einsum("ki,kj->kij", Ainv_x, Ainv_x) / denom[:, None, None]
                self.A[active] += np.outer(x, x)
                new_inv_x = Ainv_x / denom[:, None]
            sa = s[active]
            g = np.asarray(eval_g(spec, sa * trace.delta_hat[active]), dtype=float).reshape(-1)
            # w <- w' - A^{-1} grad / c'' with grad = -g(s delta') s x
            W[active] += ((g * sa) / spec.c_curv)[:, None] * new_inv_x
            self.update_count[active] += 1
            if not self.diagonal:
                stale = active[self.update_count[active] % REFRESH_EVERY == 0]
                if stale.size:
                    self.A_inv[stale] = np.linalg.inv(self.A[stale])

        self.W = W
        self.t = trace.t
