"""Context and label sources: a synthetic generalized linear model and a
sparse multilabel text format.

Class and feature indices are 0-based in memory.  The text format is
1-based, conversion happens only in :func:`load_dataset` and
:func:`dump_dataset`.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .surrogate import DOMAIN_TOL, SurrogateSpec, eval_p

log = logging.getLogger(__name__)

NORM_TOL = 1e-9


class ModelError(ValueError):
    """The ground-truth model violates its norm or domain constraints."""


class ParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass(frozen=True)
class GroundTruthModel:
    vectors: np.ndarray  # (K, d)
    spec: SurrogateSpec
    norm_bound: float

    def __post_init__(self):
        vectors = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)
        norms = np.linalg.norm(vectors, axis=1)
        if np.any(norms > self.norm_bound + NORM_TOL):
            raise ModelError(f"vector norm {norms.max():.6g} exceeds bound {self.norm_bound}")
        if np.any(norms > self.spec.radius + NORM_TOL):
            raise ModelError(f"vector norm {norms.max():.6g} exceeds radius {self.spec.radius}")

    @property
    def n_classes(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass
class Round:
    context: np.ndarray
    labels: frozenset[int]
    size_cap: int | None = None

    def __post_init__(self):
        self.context = np.asarray(self.context, dtype=float)
        if abs(np.linalg.norm(self.context) - 1.0) > NORM_TOL:
            raise ValueError("context must have unit Euclidean norm")
        self.labels = frozenset(int(i) for i in self.labels)
        if any(i < 0 for i in self.labels):
            raise ValueError("label indices must be nonnegative")
        if self.size_cap is not None and self.size_cap < 1:
            raise ValueError("size_cap must be positive")


def margins(model: GroundTruthModel, context: np.ndarray) -> np.ndarray:
    """Return ``u_i . x`` for every class."""
    m = model.vectors @ np.asarray(context, dtype=float)
    if np.any(np.abs(m) > model.spec.radius + DOMAIN_TOL):
        raise ModelError("margin outside the surrogate domain")
    return m


def marginals(model: GroundTruthModel, context: np.ndarray) -> np.ndarray:
    """Marginal probability of each label given the context."""
    return np.asarray(eval_p(model.spec, margins(model, context)), dtype=float).reshape(-1)


def sample_labels(model: GroundTruthModel, context: np.ndarray, rng: np.random.Generator) -> frozenset[int]:
    """Draw a label set with classes included independently."""
    p = marginals(model, context)
    return frozenset(np.flatnonzero(rng.random(p.shape[0]) < p).tolist())


def gen_context(d: int, rng: np.random.Generator) -> np.ndarray:
    if d < 1:
        raise ValueError("d must be at least 1")
    while True:
        v = rng.standard_normal(d)
        n = np.linalg.norm(v)
        if n > 0:
            return v / n


def gen_ground_truth(K: int, d: int, R: float, rng: np.random.Generator,
                     spec: SurrogateSpec) -> GroundTruthModel:
    """Random directions scaled by radii drawn uniformly from ``[0, R]``.

    ``R`` should not exceed ``spec.radius`` so every unit context yields
    margins inside the domain.
    """
    if K < 1 or d < 1:
        raise ValueError("K and d must be at least 1")
    if not R > 0:
        raise ValueError("R must be positive")
    dirs = np.stack([gen_context(d, rng) for _ in range(K)])
    radii = rng.uniform(0.0, R, size=K)
    return GroundTruthModel(dirs * radii[:, None], spec, float(R))


# --- dataset files -----------------------------------------------------------

@dataclass
class Dataset:
    rounds: list[Round]
    n_classes: int
    dim: int
    skipped: list[tuple[int, str]] = field(default_factory=list)

    def __len__(self):
        return len(self.rounds)

    def __iter__(self):
        return iter(self.rounds)


def _parse_line(line: str, lineno: int):
    if line[:1].isspace():
        label_tok, rest = "", line.split()
    else:
        label_tok, *rest = line.split()
    labels = []
    if label_tok:
        for tok in label_tok.split(","):
            try:
                lab = int(tok)
            except ValueError:
                raise ParseError(lineno, f"bad label {tok!r}") from None
            if lab < 1:
                raise ParseError(lineno, f"label index {lab} is not 1-based")
            labels.append(lab - 1)
    if len(set(labels)) != len(labels):
        raise ParseError(lineno, "repeated label")
    feats = {}
    for tok in rest:
        idx, sep, val = tok.partition(":")
        if not sep:
            raise ParseError(lineno, f"expected index:value, got {tok!r}")
        try:
            f = int(idx)
            v = float(val)
        except ValueError:
            raise ParseError(lineno, f"malformed feature {tok!r}") from None
        if f < 1:
            raise ParseError(lineno, f"feature index {f} is not 1-based")
        if not math.isfinite(v):
            raise ParseError(lineno, f"non-finite feature value {tok!r}")
        feats[f - 1] = v
    return labels, feats


def _is_header(line: str) -> bool:
    toks = line.split()
    return len(toks) == 3 and all(t.isdigit() for t in toks)


def load_dataset(path: str | Path, normalize: bool = True) -> Dataset:
    """Read a multilabel file with lines ``l1,l2,... f:v f:v ...``.

    An optional first non-comment line ``N d K`` declares the dimensions.
    Without it ``K`` and ``d`` are the largest indices seen.  Zero vectors
    cannot be normalized; with ``normalize`` set they are skipped and
    recorded in :attr:`Dataset.skipped`.  Without ``normalize`` every vector
    must already have unit norm.
    """
    path = Path(path)
    raw = []
    header = None
    with open(path, encoding="utf-8", newline=None) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            if line.lstrip().startswith("#"):
                continue
            if header is None and not raw and _is_header(line):
                header = tuple(int(t) for t in line.split())
                continue
            raw.append((lineno, *_parse_line(line, lineno)))

    max_label = max((max(lab) + 1 for _, lab, _ in raw if lab), default=0)
    max_feat = max((max(f) + 1 for _, _, f in raw if f), default=0)
    if header is not None:
        _, d, K = header
        if max_label > K or max_feat > d:
            raise ParseError(0, f"indices exceed header dimensions d={d}, K={K}")
    else:
        d, K = max_feat, max_label

    rounds, skipped = [], []
    for lineno, labels, feats in raw:
        x = np.zeros(d)
        for f, v in feats.items():
            x[f] = v
        n = np.linalg.norm(x)
        if normalize:
            if n == 0:
                log.warning("%s:%d: zero feature vector skipped", path, lineno)
                skipped.append((lineno, "zero feature vector"))
                continue
            x = x / n
        elif abs(n - 1.0) > NORM_TOL:
            raise ParseError(lineno, f"feature vector norm {n:.6g} is not 1")
        rounds.append(Round(x, frozenset(labels)))
    return Dataset(rounds, K, d, skipped)


def dump_dataset(rounds: Iterable[Round], path: str | Path) -> None:
    """Write rounds in the same text format, 1-based, values in full precision."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in rounds:
            labels = ",".join(str(i + 1) for i in sorted(r.labels))
            feats = " ".join(f"{j + 1}:{float(r.context[j])!r}" for j in np.flatnonzero(r.context))
            fh.write(f"{labels} {feats}\n" if labels else f" {feats}\n")
