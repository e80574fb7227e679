"""Convex surrogate losses, their link functions and smoothness constants.

Two surrogates are supported: the square loss on ``D = [-1, 1]`` and the
logistic loss on ``D = [-R, R]``.  Every function accepts scalars or numpy
arrays and returns the same shape.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

DOMAIN_TOL = 1e-9


class SurrogateKind(str, enum.Enum):
    SQUARE = "square"
    LOGISTIC = "logistic"


class DomainError(ValueError):
    """A margin fell outside ``[-R, R]`` by more than the tolerance."""


@dataclass(frozen=True)
class SurrogateSpec:
    """A surrogate loss together with the constants used by the learner.

    Attributes
    ----------
    kind : SurrogateKind
    radius : float
        Half-width ``R`` of the margin domain.
    c_lip : float
        Lipschitz constant of the link ``p`` on the domain.
    c_grad_sq : float
        Uniform bound on the squared first derivative of the loss.
    c_curv : float
        Uniform lower bound on the second derivative of the loss.
    loss_at_neg_r : float
        ``L(-R)``, the largest loss value on the domain.
    """

    kind: SurrogateKind
    radius: float
    c_lip: float
    c_grad_sq: float
    c_curv: float
    loss_at_neg_r: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.kind is SurrogateKind.SQUARE and self.radius != 1.0:
            raise ValueError("square loss requires radius 1")


def square_spec() -> SurrogateSpec:
    return SurrogateSpec(
        kind=SurrogateKind.SQUARE,
        radius=1.0,
        c_lip=0.5,
        c_grad_sq=4.0,
        c_curv=1.0,
        loss_at_neg_r=2.0,
    )


def logistic_spec(radius: float = 1.0) -> SurrogateSpec:
    radius = float(radius)
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    return SurrogateSpec(
        kind=SurrogateKind.LOGISTIC,
        radius=radius,
        c_lip=0.25,
        c_grad_sq=1.0,
        # 1 / (2 (1 + cosh R)) written to stay finite for large R
        c_curv=math.exp(-radius) / (1.0 + math.exp(-radius)) ** 2,
        loss_at_neg_r=float(np.logaddexp(0.0, radius)),
    )


def make_spec(kind: str | SurrogateKind, radius: float | None = None) -> SurrogateSpec:
    """Build a spec by name; ``radius`` is ignored for the square loss."""
    kind = SurrogateKind(kind)
    if kind is SurrogateKind.SQUARE:
        return square_spec()
    return logistic_spec(1.0 if radius is None else radius)


def _check_domain(spec: SurrogateSpec, delta):
    delta = np.asarray(delta, dtype=float)
    if np.any(np.abs(delta) > spec.radius + DOMAIN_TOL):
        bad = delta[np.abs(delta) > spec.radius + DOMAIN_TOL].flat[0]
        raise DomainError(f"margin {bad!r} outside [-{spec.radius}, {spec.radius}]")
    return delta


def _out(value):
    return float(value) if np.ndim(value) == 0 else value


def eval_loss(spec: SurrogateSpec, delta):
    """Return ``L(delta)``."""
    delta = _check_domain(spec, delta)
    if spec.kind is SurrogateKind.SQUARE:
        return _out(0.5 * (1.0 - delta) ** 2)
    # stable ln(1 + e^{-x}) for either sign of x
    return _out(np.logaddexp(0.0, -delta))


def eval_g(spec: SurrogateSpec, delta):
    """Return ``g(delta) = -L'(delta)``."""
    delta = _check_domain(spec, delta)
    if spec.kind is SurrogateKind.SQUARE:
        return _out(1.0 - delta)
    return _out(_sigmoid(-delta))


def eval_curvature(spec: SurrogateSpec, delta):
    """Return ``L''(delta)``."""
    delta = _check_domain(spec, delta)
    if spec.kind is SurrogateKind.SQUARE:
        return _out(np.ones_like(delta))
    s = _sigmoid(delta)
    return _out(s * (1.0 - s))


def eval_p(spec: SurrogateSpec, delta):
    """Return the link value ``g(-delta) / (g(delta) + g(-delta))``."""
    delta = _check_domain(spec, delta)
    if spec.kind is SurrogateKind.SQUARE:
        return _out(np.clip(0.5 * (1.0 + delta), 0.0, 1.0))
    return _out(_sigmoid(delta))


def clip(spec: SurrogateSpec, x):
    """Clip ``x`` to ``[-R, R]``."""
    return _out(np.clip(np.asarray(x, dtype=float), -spec.radius, spec.radius))


def _sigmoid(x):
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
