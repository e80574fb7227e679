"""Online experiment runs over synthetic or file-backed streams, with
per-round metrics and CSV output."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

from . import environment as env
from .learner import ConfigError, Learner, LearnerConfig
from .losses import (
    CostStructure,
    LossParams,
    hamming,
    loss_ac_full,
    p_rank_loss,
    rank_loss_full,
    regret_round,
    scores_from_prediction,
)
from .surrogate import make_spec

CSV_COLUMNS = (
    "t", "loss_ac", "cum_loss_ac", "hamming", "cum_hamming", "rank_loss", "cum_rank_loss",
    "prank_loss", "cum_prank_loss", "regret", "cum_regret", "mean_eps", "pred_size",
)

# called with (t, prediction, what the learner is given, full label set)
FeedbackHook = Callable[[int, tuple, frozenset, frozenset], None]


@dataclass
class ExperimentConfig:
    mode: str = "synthetic"
    data: str | None = None
    T: int | None = None
    K: int = 5
    d: int = 5
    surrogate: str = "square"
    R: float = 1.0
    a: float = 0.5
    costs: str = "constant"
    size_cap: int | Callable[[int], int] | None = None
    delta: float = 0.1
    u_bound: float | None = None
    adaptive_u: bool = False
    matrix_mode: str = "full"
    algorithm: str = "bandit"
    task: str = "subset"
    seed: int = 0
    out: str | None = None

    def validate(self) -> None:
        if self.mode not in ("synthetic", "dataset"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mode == "dataset" and not self.data:
            raise ConfigError("dataset mode needs a data path")
        if self.mode == "synthetic" and self.T is None:
            raise ConfigError("synthetic mode needs a horizon T")
        if self.T is not None and self.T < 0:
            raise ConfigError("T must be nonnegative")
        if self.algorithm not in ("bandit", "obr"):
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.task not in ("subset", "ranking"):
            raise ConfigError(f"unknown task {self.task!r}")
        if self.task == "ranking" and self.size_cap is None:
            raise ConfigError("ranking task needs a size cap")
        if self.task == "ranking" and self.costs != "decreasing":
            raise ConfigError("ranking task needs strictly decreasing costs")
        if self.task == "subset" and not 0.0 <= self.a < 1.0:
            raise ConfigError("subset task needs a in [0, 1)")
        if self.u_bound is not None and self.adaptive_u:
            raise ConfigError("give either a norm bound or the adaptive flag, not both")

    def cap_at(self, t: int) -> int | None:
        if self.size_cap is None or isinstance(self.size_cap, int):
            return self.size_cap
        return int(self.size_cap(t))


@dataclass
class RoundMetrics:
    t: int
    loss_ac: float
    cum_loss_ac: float
    hamming: float
    cum_hamming: float
    rank_loss: float | None = None
    cum_rank_loss: float | None = None
    prank_loss: float | None = None
    cum_prank_loss: float | None = None
    regret: float | None = None
    cum_regret: float | None = None
    mean_eps: float | None = None
    pred_size: int = 0


def _stream(config: ExperimentConfig, spec):
    """Yield ``(x, labels, true_probs or None)`` and report (K, d)."""
    if config.mode == "dataset":
        data = env.load_dataset(config.data)
        rounds = data.rounds if config.T is None else data.rounds[: config.T]
        return data.n_classes, data.dim, ((r.context, r.labels, None) for r in rounds)

    model_ss, ctx_ss, lab_ss = np.random.SeedSequence(config.seed).spawn(3)
    model = env.gen_ground_truth(config.K, config.d, spec.radius, np.random.default_rng(model_ss), spec)
    ctx_rng, lab_rng = np.random.default_rng(ctx_ss), np.random.default_rng(lab_ss)

    def gen() -> Iterator:
        for _ in range(config.T):
            x = env.gen_context(config.d, ctx_rng)
            p = env.marginals(model, x)
            yield x, frozenset(np.flatnonzero(lab_rng.random(p.shape[0]) < p).tolist()), p

    return config.K, config.d, gen()


def build_learner(config: ExperimentConfig, K: int, d: int) -> Learner:
    spec = make_spec(config.surrogate, config.R)
    params = LossParams(config.a, CostStructure.from_preset(config.costs, K))
    u_bound = None
    if not config.adaptive_u:
        # synthetic ground truth is drawn inside the radius-R ball
        u_bound = spec.radius if config.u_bound is None else config.u_bound
    return Learner(LearnerConfig(
        spec=spec,
        params=params,
        K=K,
        d=d,
        delta=config.delta,
        u_bound=u_bound,
        mode=config.task,
        matrix_mode=config.matrix_mode,
        exploration="none" if config.algorithm == "obr" else "ucb",
    ))


def run_experiment(config: ExperimentConfig, on_feedback: FeedbackHook | None = None,
                   learner: Learner | None = None) -> list[RoundMetrics]:
    """Run one online pass and return metrics for every round.

    Losses are scored against the full label set; the learner only ever
    receives the labels it is entitled to.
    """
    config.validate()
    spec = make_spec(config.surrogate, config.R)
    K, d, stream = _stream(config, spec)
    if config.mode == "synthetic" and config.T == 0:
        return []
    if learner is None:
        learner = build_learner(config, K, d)
    params = learner.config.params
    synthetic = config.mode == "synthetic"
    ranking = config.task == "ranking"

    out: list[RoundMetrics] = []
    cum = dict(loss_ac=0.0, hamming=0.0, rank_loss=0.0, prank_loss=0.0, regret=0.0)
    for t, (x, labels, probs) in enumerate(stream, start=1):
        cap = config.cap_at(t)
        if cap is not None:
            cap = min(cap, K)
        pred, trace = learner.predict(x, cap)

        if config.algorithm == "obr":
            given = frozenset(labels)
            if on_feedback:
                on_feedback(t, pred, given, labels)
            learner.obr_update(trace, given)
        else:
            given = frozenset(labels) & frozenset(pred)
            if on_feedback:
                on_feedback(t, pred, given, labels)
            learner.update(trace, given)

        row = dict(
            loss_ac=loss_ac_full(params, labels, pred),
            hamming=float(hamming(labels, pred)),
            rank_loss=None, prank_loss=None, regret=None,
        )
        if not synthetic:
            row["rank_loss"] = rank_loss_full(labels, scores_from_prediction(pred, K))
        if ranking:
            row["prank_loss"] = p_rank_loss(labels, pred, cap)
        if synthetic:
            if ranking:
                row["regret"] = regret_round("p_rank", None, probs, pred, cap)
            else:
                row["regret"] = regret_round("ac", params, probs, pred, cap)
        cums = {}
        for key, val in row.items():
            if val is not None:
                cum[key] += val
                cums["cum_" + key] = cum[key]
            else:
                cums["cum_" + key] = None
        mean_eps = float(np.mean(trace.eps[list(pred)])) if pred else None
        out.append(RoundMetrics(t=t, mean_eps=mean_eps, pred_size=len(pred), **row, **cums))
    return out


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_csv(metrics: Sequence[RoundMetrics], path: str | Path) -> None:
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for m in metrics:
                w.writerow([_fmt(getattr(m, c)) for c in CSV_COLUMNS])
    except OSError as exc:
        raise OSError(f"cannot write metrics to {path}: {exc}") from exc


def read_csv(path: str | Path) -> list[RoundMetrics]:
    """Parse a file written by :func:`write_csv`."""
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for rec in reader:
            vals = {}
            for k, v in rec.items():
                if v == "":
                    vals[k] = None
                elif k in ("t", "pred_size"):
                    vals[k] = int(v)
                else:
                    vals[k] = float(v)
            rows.append(RoundMetrics(**vals))
    return rows


def summarize(metrics: Sequence[RoundMetrics]) -> dict[str, float]:
    """Final cumulative values divided by the number of rounds."""
    if not metrics:
        return {}
    last, n = metrics[-1], len(metrics)
    summary = {"rounds": n}
    for key in ("loss_ac", "hamming", "rank_loss", "prank_loss", "regret"):
        v = getattr(last, "cum_" + key)
        if v is not None:
            summary["avg_" + key] = v / n
    return summary
