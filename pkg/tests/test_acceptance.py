"""Acceptance gate: one PASS/FAIL line per criterion.

Run under pytest (lines appear in the terminal summary) or directly with
``python tests/test_acceptance.py``.
"""
import itertools
import math
import time

import numpy as np
import pytest

from mlbandit import environment as env
from mlbandit.cli import cli_main
from mlbandit.harness import ExperimentConfig, read_csv, run_experiment, summarize
from mlbandit.learner import Learner, LearnerConfig
from mlbandit.losses import (
    CostStructure,
    LossParams,
    bayes_optimal_ranking,
    bayes_optimal_subset,
    brute_force_bayes,
    expected_loss_ac,
    expected_p_rank,
    loss_ac_reduced,
    p_rank_loss,
    regret_round,
)
from mlbandit.surrogate import eval_curvature, eval_g, eval_loss, eval_p, logistic_spec, square_spec

RESULTS: dict[int, tuple[bool, str]] = {}

TITLES = {
    1: "subset oracle matches enumeration",
    2: "ranking oracle matches enumeration",
    3: "closed-form expectations vs Monte Carlo",
    4: "surrogate constant certificates",
    5: "variance inequality",
    6: "one-step certificates and coverage",
    7: "subset regret halves (full and diagonal)",
    8: "ranking regret halves (full and diagonal)",
    9: "bandit Hamming within 2x of OBR",
    10: "numerical hygiene",
    11: "end-to-end CLI determinism",
}


def record(n, ok, detail):
    RESULTS[n] = (bool(ok), detail)
    line = report_line(n)
    print(line)
    assert ok, line


def report_line(n):
    ok, detail = RESULTS[n]
    return f"[{'PASS' if ok else 'FAIL'}] criterion {n:>2}: {TITLES[n]} ({detail})"


def random_costs(K, rng):
    m = np.zeros((K + 1, K))
    for s in range(1, K + 1):
        m[s, :s] = np.sort(rng.uniform(0, 1, s))[::-1]
    return CostStructure(m)


def window_ratio(values):
    """Mean over the last 10% divided by the mean over the first 10%."""
    n = len(values) // 10
    first, last = float(np.mean(values[:n])), float(np.mean(values[-n:]))
    return last / first if first > 0 else math.inf, first, last


def test_criterion_01_subset_oracle():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        K = int(rng.integers(1, 6))
        params = LossParams(rng.uniform(0, 0.95), random_costs(K, rng))
        p = rng.random(K)
        fast = expected_loss_ac(params, p, bayes_optimal_subset(params, p))
        slow = expected_loss_ac(params, p, brute_force_bayes(params, p))
        worst = max(worst, abs(fast - slow))
    elapsed = time.perf_counter() - start
    record(1, worst <= 1e-12 and elapsed < 60, f"max gap {worst:.1e}, {elapsed:.1f}s")


def test_criterion_02_ranking_oracle():
    rng = np.random.default_rng(102)
    start = time.perf_counter()
    worst = -math.inf
    for _ in range(200):
        K = int(rng.integers(1, 6))
        S = int(rng.integers(1, min(K, 3) + 1))
        p = rng.random(K)
        best = expected_p_rank(p, bayes_optimal_ranking(p, S), S)
        floor = min(expected_p_rank(p, seq, S)
                    for n in range(S + 1) for seq in itertools.permutations(range(K), n))
        worst = max(worst, best - floor)
    elapsed = time.perf_counter() - start
    record(2, worst <= 1e-12 and elapsed < 60, f"max excess {worst:.1e}, {elapsed:.1f}s")


def test_criterion_03_monte_carlo():
    rng = np.random.default_rng(103)
    start = time.perf_counter()
    n = 100_000
    worst = 0.0
    for _ in range(20):
        K = int(rng.integers(2, 6))
        S = int(rng.integers(1, K + 1))
        p = rng.random(K)
        params = LossParams(rng.uniform(0, 0.95), random_costs(K, rng))
        rank_pred = tuple(rng.permutation(K)[: rng.integers(0, S + 1)].tolist())
        sub_pred = tuple(rng.permutation(K)[: rng.integers(0, K + 1)].tolist())
        Y = rng.random((n, K)) < p
        # group identical draws so each distinct label set is scored once
        codes = Y @ (1 << np.arange(K))
        counts = np.bincount(codes, minlength=1 << K)
        for fn, closed in (
            (lambda y: p_rank_loss(y, rank_pred, S), expected_p_rank(p, rank_pred, S)),
            (lambda y: loss_ac_reduced(params, y, sub_pred), expected_loss_ac(params, p, sub_pred)),
        ):
            vals = np.array([fn({i for i in range(K) if c >> i & 1}) for c in range(1 << K)])
            mean = counts @ vals / n
            var = counts @ (vals - mean) ** 2 / (n - 1)
            se = math.sqrt(var / n)
            z = abs(mean - closed) / se if se > 0 else (0.0 if mean == closed else math.inf)
            worst = max(worst, z)
    elapsed = time.perf_counter() - start
    record(3, worst <= 3.0 and elapsed < 120, f"max |z| {worst:.2f}, {elapsed:.1f}s")


def test_criterion_04_constants():
    h = 1e-6
    notes, ok = [], True
    for spec in (square_spec(), logistic_spec(1.0)):
        R = spec.radius
        grid = np.linspace(-R, R, 10_000)
        grad_sq = float(np.max(eval_g(spec, grid) ** 2))
        curv = float(np.min(eval_curvature(spec, grid)))
        xs = np.linspace(-R, R - h, 10_000)
        lip = float(np.max((eval_p(spec, xs + h) - eval_p(spec, xs)) / h))
        ok &= grad_sq <= spec.c_grad_sq + 1e-6 and curv >= spec.c_curv - 1e-6 and lip <= spec.c_lip + 1e-6
        notes.append(f"{spec.kind.value}: {grad_sq:.4g}<={spec.c_grad_sq:g}, "
                     f"{curv:.6f}>={spec.c_curv:.6f}, {lip:.4g}<={spec.c_lip:g}")
    sq = square_spec()
    ok &= (sq.c_grad_sq, sq.c_curv, sq.c_lip) == (4.0, 1.0, 0.5)
    lg = logistic_spec(1.0)
    ok &= lg.c_grad_sq == 1.0 and lg.c_lip == 0.25
    ok &= abs(lg.c_curv - 1 / (2 * (1 + math.cosh(1)))) <= 1e-6 and abs(lg.c_curv - 0.196612) <= 1e-6
    record(4, ok, "; ".join(notes))


def test_criterion_05_variance():
    rng = np.random.default_rng(105)
    worst = -math.inf
    for spec in (square_spec(), logistic_spec(1.0)):
        R = spec.radius
        delta = rng.uniform(-R, R, 10_000)
        est = rng.uniform(-R, R, 10_000)
        p = eval_p(spec, delta)
        up = eval_loss(spec, est) - eval_loss(spec, delta)
        down = eval_loss(spec, -est) - eval_loss(spec, -delta)
        mean = p * up + (1 - p) * down
        var = p * (1 - p) * (up - down) ** 2
        worst = max(worst, float(np.max(var - 2 * spec.c_grad_sq / spec.c_curv * mean)))
    record(5, worst <= 1e-9, f"max slack violation {worst:.2e}")


def certificate_run(mode, seed=0, T=5000, K=5, d=5, S=3):
    spec = square_spec()
    costs = "constant" if mode == "subset" else "decreasing"
    params = LossParams(0.5, CostStructure.from_preset(costs, K))
    model_ss, ctx_ss, lab_ss = np.random.SeedSequence(seed).spawn(3)
    model = env.gen_ground_truth(K, d, spec.radius, np.random.default_rng(model_ss), spec)
    ctx_rng, lab_rng = np.random.default_rng(ctx_ss), np.random.default_rng(lab_ss)
    learner = Learner(LearnerConfig(spec, params, K, d, delta=0.1, u_bound=spec.radius, mode=mode))
    violations, worst = 0, -math.inf
    for _ in range(T):
        x = env.gen_context(d, ctx_rng)
        margins, probs = model.vectors @ x, env.marginals(model, x)
        cap = S if mode == "ranking" else None
        pred, trace = learner.predict(x, cap)
        covered = np.abs(margins - trace.delta_hat) <= trace.eps
        violations += int(np.sum(~covered))
        if covered.all():
            eps_sum = float(np.sum(trace.eps[list(pred)]))
            if mode == "ranking":
                gap = regret_round("p_rank", None, probs, pred, S) - 4 * S * spec.c_lip * eps_sum
            else:
                gap = regret_round("ac", params, probs, pred) - 2 * (1 - params.a) * spec.c_lip * eps_sum
            worst = max(worst, gap)
        labels = env.sample_labels(model, x, lab_rng)
        learner.update(trace, labels & set(pred))
    return worst, violations / (K * T)


def test_criterion_06_certificates():
    gap_sub, cov_sub = certificate_run("subset")
    gap_rank, cov_rank = certificate_run("ranking")
    ok = gap_sub <= 1e-9 and gap_rank <= 1e-9 and cov_sub <= 0.1 and cov_rank <= 0.1
    record(6, ok, f"worst gap subset {gap_sub:.3g}, ranking {gap_rank:.3g}; "
                  f"violation rate {cov_sub:.4f}, {cov_rank:.4f}")


def trend_runs(task):
    ratios = []
    for matrix_mode in ("full", "diagonal"):
        for seed in range(1, 6):
            cfg = ExperimentConfig(
                mode="synthetic", T=20_000, K=5, d=5, surrogate="square", a=0.5,
                costs="constant" if task == "subset" else "decreasing",
                size_cap=3 if task == "ranking" else None, task=task,
                matrix_mode=matrix_mode, seed=seed,
            )
            regret = np.array([m.regret for m in run_experiment(cfg)])
            ratios.append((matrix_mode, seed, *window_ratio(regret)))
    return ratios


def trend_detail(ratios):
    worst = max(ratios, key=lambda r: r[2])
    return (f"worst ratio {worst[2]:.3f} ({worst[0]}, seed {worst[1]}: "
            f"{worst[3]:.4f} -> {worst[4]:.4f}); ratios "
            + ", ".join(f"{r[2]:.2f}" for r in ratios))


@pytest.mark.slow
def test_criterion_07_subset_trend():
    start = time.perf_counter()
    ratios = trend_runs("subset")
    elapsed = time.perf_counter() - start
    ok = all(r[2] <= 0.5 for r in ratios) and elapsed < 300
    record(7, ok, f"{trend_detail(ratios)}; {elapsed:.0f}s")


@pytest.mark.slow
def test_criterion_08_ranking_trend():
    ratios = trend_runs("ranking")
    record(8, all(r[2] <= 0.5 for r in ratios), trend_detail(ratios))


@pytest.mark.slow
def test_criterion_09_obr_baseline():
    base = dict(mode="synthetic", T=20_000, K=5, d=5, surrogate="square", a=0.5,
                costs="constant", seed=0)
    bandit = summarize(run_experiment(ExperimentConfig(**base)))["avg_hamming"]
    obr = summarize(run_experiment(ExperimentConfig(**base, algorithm="obr")))["avg_hamming"]
    record(9, bandit <= 2 * obr, f"bandit {bandit:.4f} vs OBR {obr:.4f}, ratio {bandit / obr:.3f}")


def test_criterion_10_hygiene():
    rng = np.random.default_rng(110)
    K, d, n = 3, 6, 10_000
    learner = Learner(LearnerConfig(square_spec(), LossParams(0.5, CostStructure.constant(K)),
                                    K, d, u_bound=1.0))
    margin_ok = True
    errors_before_refresh = None
    for t in range(n + 500):
        x = env.gen_context(d, rng)
        pred, trace = learner.predict(x)
        margin_ok &= bool(np.all(np.abs(trace.delta_hat) <= 1 + 1e-9))
        # mixed feedback: each class gets +1 or -1, so every class updates every round
        learner.obr_update(trace, set(np.flatnonzero(rng.random(K) < 0.5).tolist()))
        if t == n - 2:
            errors_before_refresh = [np.abs(learner.A[i] @ learner.A_inv[i] - np.eye(d)).sum(axis=1).max()
                                     for i in range(K)]
    errors_after = [np.abs(learner.A[i] @ learner.A_inv[i] - np.eye(d)).sum(axis=1).max()
                    for i in range(K)]
    worst = max(errors_before_refresh + errors_after)
    record(10, worst <= 1e-6 and margin_ok,
           f"max ||A A_inv - I||_inf {worst:.1e} over {n - 1} and {n + 500} updates, margins ok={margin_ok}")


def test_criterion_11_cli(tmp_path):
    args = ["--mode", "synthetic", "--T", "1000", "--K", "5", "--d", "5", "--surrogate", "square",
            "--a", "0.5", "--costs", "constant", "--delta", "0.1", "--seed", "7"]
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    codes = (cli_main(args + ["--out", str(first)]), cli_main(args + ["--out", str(second)]))
    same = first.read_bytes() == second.read_bytes()
    rows = len(read_csv(first))
    lines = len(first.read_text().splitlines())
    record(11, codes == (0, 0) and same and rows == 1000 and lines == 1001,
           f"exit codes {codes}, {lines} lines, byte-identical={same}")


if __name__ == "__main__":
    import sys
    import tempfile
    from pathlib import Path

    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                    with tempfile.TemporaryDirectory() as tmp:
                        fn(Path(tmp))
                else:
                    fn()
            except AssertionError:
                pass
    sys.exit(0 if all(ok for ok, _ in RESULTS.values()) else 1)
