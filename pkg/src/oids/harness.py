"""Interaction protocol, seeded batch execution, aggregation and bound checks.

Episodes are simulated *in lockstep*: a batch of R seeds advances one round
at a time with every per-round quantity held in ``(R, ...)`` arrays.  Each
episode still owns an independent random stream, so results do not depend
on how seeds are grouped.

Random stream contract, per episode with seed ``s``:
``rng = numpy.random.Generator(PCG64(s))``, then in order:
theta_0 index ``rng.integers(N)`` (only when the environment does not fix
it), and the length-T arrays ``u_ctx``, ``u_act``, ``u_loss``, ``u_aux``
(``rng.random``) and ``z`` (``rng.standard_normal``).  Contexts, actions
and losses are inverse-CDF transforms of these draws.

Batch seeds are derived with SplitMix64: ``seed_i = mix(base_seed + (i + 1) * 0x9E3779B97F4A7C15)``.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np

from .models import Environment, ModelInconsistencyError
from .objectives import (
    kl_gains,
    predictive_divergences,
    ratio,
    surrogate_gains,
    surrogate_losses,
    surrogate_regrets,
    true_divergences,
)
from .policies import (
    AlgorithmSpec,
    ResolvedAlgorithm,
    e2d_solve,
    greedy_batch,
    igw_batch,
    induced_batch,
    roids_batch,
    sample_actions,
    voids_batch,
)
from .posterior import entropy

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

BASE_COLUMNS = (
    "run_id", "seed", "t", "context", "action", "loss",
    "regret_policy", "regret_action", "cum_regret_policy", "cum_regret_action",
)
DIAG_COLUMNS = ("ir", "adec", "sig", "tig", "ue", "og", "posterior_entropy")
BOUND_TAGS = ("worst_case", "first_order", "subgaussian")


class EpisodeError(RuntimeError):
    """An episode failed; carries the seed and round for reproduction."""

    def __init__(self, seed: int, t: int, reason: str):
        super().__init__(f"episode with seed {seed} failed at round {t}: {reason}")
        self.seed, self.t, self.reason = seed, t, reason


def splitmix64(state: int) -> int:
    z = state & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(base_seed: int, i: int) -> int:
    return splitmix64(base_seed + (i + 1) * _GOLDEN)


def derive_seeds(base_seed: int, reps: int) -> List[int]:
    return [derive_seed(base_seed, i) for i in range(reps)]


@dataclass(eq=False)
class RunTrace:
    """Per-round record of one episode (arrays of length T)."""

    seed: int
    theta0: int
    contexts: np.ndarray
    actions: np.ndarray
    losses: np.ndarray
    regret_policy: np.ndarray
    regret_action: np.ndarray
    support: np.ndarray
    opt_losses: np.ndarray
    policies: Optional[np.ndarray] = None
    diagnostics: Optional[dict] = None
    run_id: int = 0

    @property
    def T(self) -> int:
        return int(self.actions.size)

    @property
    def cum_regret_policy(self) -> np.ndarray:
        return np.cumsum(self.regret_policy)

    @property
    def cum_regret_action(self) -> np.ndarray:
        return np.cumsum(self.regret_action)

    @property
    def final_regret(self) -> float:
        return float(self.regret_policy.sum())

    @property
    def identification_round(self) -> Optional[int]:
        """First round after which the posterior is a point mass (1-based)."""
        hit = np.flatnonzero(self.support == 1)
        return int(hit[0]) + 1 if hit.size else None


# -- the lockstep engine --------------------------------------------------------

def _streams(env: Environment, seeds: Sequence[int], T: int):
    R = len(seeds)
    theta0 = np.empty(R, dtype=int)
    u = np.empty((4, R, T))
    z = np.empty((R, T))
    for r, s in enumerate(seeds):
        rng = np.random.Generator(np.random.PCG64(int(s)))
        theta0[r] = env.true_param if env.true_param is not None else rng.integers(env.model.N)
        for k in range(4):
            u[k, r] = rng.random(T)
        z[r] = rng.standard_normal(T)
    return theta0, u, z


def _policy(res: ResolvedAlgorithm, model, w, ctx, seeds, t):
    R, K = w.shape[0], model.K
    kind = res.kind
    if kind == "uniform":
        return np.full((R, K), 1.0 / K)
    lbar, _ = surrogate_losses(model, w, ctx)
    if kind == "greedy":
        return greedy_batch(lbar)
    if kind in ("fgts", "thompson"):
        return induced_batch(w, model.best[:, ctx].T, K)
    if kind == "igw":
        return igw_batch(lbar, res.gamma)
    if kind == "e2d":
        div = predictive_divergences(model, w, ctx, res.metric)
        L = model.loss_table[:, ctx].swapaxes(0, 1)
        regret = L - L.min(axis=2, keepdims=True)
        pi = np.empty((R, K))
        for r in range(R):
            try:
                pi[r] = e2d_solve(regret[r], div[r], res.gamma)[0]
            except RuntimeError as exc:
                raise EpisodeError(seeds[r], t, str(exc)) from exc
        return pi
    delta = surrogate_regrets(model, w, ctx)
    if kind == "bayes_ids":
        gain = kl_gains(model, w, ctx)
    else:
        gain = surrogate_gains(model, w, ctx, res.metric)
    if kind in ("roids", "roids_sg"):
        return roids_batch(delta, gain, res.mu)
    return voids_batch(delta, gain, lbar)[0]


def _diagnostics(res, model, w, ctx, pi, theta0, L0, opt0):
    metric = res.metric
    delta = surrogate_regrets(model, w, ctx)
    gain = surrogate_gains(model, w, ctx, metric)
    lbar, lstar = surrogate_losses(model, w, ctx)
    r_pi = np.einsum("rk,rk->r", pi, delta)
    g_pi = np.einsum("rk,rk->r", pi, gain)
    tdiv = np.einsum("rn,rnk->rk", w, true_divergences(model, theta0, ctx, metric))
    mu = res.mu if res.mu is not None else math.nan
    pi_f = induced_batch(w, model.best[:, ctx].T, model.K)
    return {
        "ir": ratio(r_pi, g_pi),
        "adec": r_pi - mu * g_pi,
        "sig": g_pi,
        "tig": np.einsum("rk,rk->r", pi, tdiv),
        "ue": np.einsum("rk,rk->r", pi, L0 - lbar),
        "og": lstar - opt0,
        "posterior_entropy": entropy(w),
        "ir_fgts": ratio(np.einsum("rk,rk->r", pi_f, delta), np.einsum("rk,rk->r", pi_f, gain)),
    }


def simulate(
    env: Environment,
    algo: Union[AlgorithmSpec, ResolvedAlgorithm],
    T: int,
    seeds: Sequence[int],
    diagnostics: bool = False,
    record_policy: bool = False,
    run_ids: Optional[Sequence[int]] = None,
) -> List[RunTrace]:
    """Run one episode per seed, all in lockstep; returns traces in seed order."""
    if T < 0:
        raise ValueError("T must be nonnegative")
    model = env.model
    res = algo if isinstance(algo, ResolvedAlgorithm) else algo.resolve(model, max(T, 1))
    seeds = [int(s) for s in seeds]
    R, K = len(seeds), model.K
    run_ids = list(range(R)) if run_ids is None else list(run_ids)
    theta0, (u_ctx, u_act, u_loss, u_aux), z = _streams(env, seeds, T)
    rows = np.arange(R)

    out = {k: np.empty((R, T)) for k in ("loss", "rp", "ra", "opt")}
    ctx_all = np.empty((R, T), dtype=int)
    act_all = np.empty((R, T), dtype=int)
    support = np.empty((R, T), dtype=int)
    pols = np.empty((R, T, K)) if record_policy else None
    diag = {k: np.empty((R, T)) for k in DIAG_COLUMNS + ("ir_fgts",)} if diagnostics else None

    logw = np.full((R, model.N), -math.log(model.N))
    for t in range(T):
        w = np.exp(logw)
        ctx = env.context_from_uniform(u_ctx[:, t])
        try:
            pi = _policy(res, model, w, ctx, seeds, t + 1)
        except EpisodeError:
            raise
        except (ArithmeticError, ValueError) as exc:
            raise EpisodeError(seeds[0], t + 1, str(exc)) from exc
        a = sample_actions(pi, u_act[:, t])
        L = env.losses_from_uniforms(theta0, ctx, a, u_loss[:, t], u_aux[:, t], z[:, t])
        L0 = model.loss_table[theta0, ctx]
        opt0 = model.opt_loss[theta0, ctx]
        if diagnostics:
            for k, v in _diagnostics(res, model, w, ctx, pi, theta0, L0, opt0).items():
                diag[k][:, t] = v
        if record_policy:
            pols[:, t] = pi
        out["rp"][:, t] = np.einsum("rk,rk->r", pi, L0) - opt0
        out["ra"][:, t] = L0[rows, a] - opt0
        out["loss"][:, t] = L
        out["opt"][:, t] = opt0
        ctx_all[:, t] = ctx
        act_all[:, t] = a

        loglik = model.log_likelihood(ctx, a, L)
        with np.errstate(invalid="ignore"):
            step = res.eta * loglik - res.lam * model.opt_loss[:, ctx].T
        new = np.where(np.isneginf(logw) | np.isneginf(loglik), -np.inf, logw + step)
        dead = np.all(np.isneginf(new), axis=1)
        if np.any(dead):
            r = int(np.flatnonzero(dead)[0])
            raise EpisodeError(
                seeds[r], t + 1,
                f"loss {L[r]} on action {a[r]} is impossible under every parameter",
            ) from ModelInconsistencyError("posterior annihilated")
        m = new.max(axis=1, keepdims=True)
        logw = new - (m + np.log(np.exp(new - m).sum(axis=1, keepdims=True)))
        support[:, t] = np.isfinite(logw).sum(axis=1)

    traces = []
    for r in range(R):
        traces.append(RunTrace(
            seed=seeds[r], theta0=int(theta0[r]), contexts=ctx_all[r], actions=act_all[r],
            losses=out["loss"][r], regret_policy=out["rp"][r], regret_action=out["ra"][r],
            support=support[r], opt_losses=out["opt"][r],
            policies=None if pols is None else pols[r],
            diagnostics=None if diag is None else {k: v[r] for k, v in diag.items()},
            run_id=run_ids[r],
        ))
    return traces


def run_episode(env: Environment, algo, T: int, seed: int, diagnostics: bool = False,
                record_policy: bool = False) -> RunTrace:
    return simulate(env, algo, T, [seed], diagnostics, record_policy)[0]


def _simulate_chunk(args):
    env, algo, T, seeds, ids, diagnostics, record_policy = args
    return simulate(env, algo, T, seeds, diagnostics, record_policy, ids)


def run_seeds(env, algo, T, seeds, diagnostics=False, record_policy=False, jobs=1, chunk=None):
    """Simulate many seeds, optionally across processes; results in seed order."""
    seeds = list(seeds)
    ids = list(range(len(seeds)))
    if jobs <= 1 and chunk is None:
        return simulate(env, algo, T, seeds, diagnostics, record_policy, ids)
    size = chunk or max(1, math.ceil(len(seeds) / jobs))
    tasks = [
        (env, algo, T, seeds[i:i + size], ids[i:i + size], diagnostics, record_policy)
        for i in range(0, len(seeds), size)
    ]
    if jobs <= 1:
        parts = [_simulate_chunk(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_simulate_chunk, tasks))
    traces = [tr for part in parts for tr in part]
    return sorted(traces, key=lambda tr: tr.run_id)


# -- aggregation and bounds -------------------------------------------------------

def bound_value(tag: str, K: int, N: int, T: Optional[int] = None,
                L_star: Optional[float] = None, v: float = 1.0) -> float:
    """Closed-form regret bound for a theorem tag."""
    logN = math.log(N)
    if tag == "worst_case":
        if T is None:
            raise ValueError("the worst-case bound needs T")
        return math.sqrt((320 * K + 21) * T * logN)
    if tag == "first_order":
        if L_star is None:
            raise ValueError("the first-order bound needs an L* estimate")
        return math.sqrt((2500 * K + 540) * logN * L_star) + (1250 * K + 270) * logN
    if tag == "subgaussian":
        if T is None:
            raise ValueError("the sub-Gaussian bound needs T")
        return math.sqrt((1 + 80 * max(v, 1.0) * (1 + K)) * T * logN)
    raise ValueError(f"unknown bound tag {tag!r}; expected one of {BOUND_TAGS}")


@dataclass(frozen=True)
class BoundReport:
    tag: str
    value: float
    statistic: float
    satisfied: bool

    def to_dict(self) -> dict:
        return {"tag": self.tag, "value": self.value, "satisfied": self.satisfied}


@dataclass(eq=False)
class AggregateReport:
    algorithm: str
    instance: dict
    T: int
    reps: int
    mean_final_regret: float
    stderr: float
    mean_curve: np.ndarray
    stderr_curve: np.ndarray
    wall_clock: float = 0.0
    bounds: List[BoundReport] = field(default_factory=list)

    @classmethod
    def from_traces(cls, traces: Sequence[RunTrace], algorithm: str, instance: dict,
                    wall_clock: float = 0.0) -> "AggregateReport":
        traces = sorted(traces, key=lambda tr: tr.run_id)
        R = len(traces)
        if R == 0:
            raise ValueError("no traces to aggregate")
        T = traces[0].T
        curves = np.array([tr.cum_regret_policy for tr in traces]).reshape(R, T)
        finals = np.array([tr.final_regret for tr in traces])
        mean_curve = curves.mean(axis=0) if T else np.zeros(0)
        if R > 1:
            se_curve = curves.std(axis=0, ddof=1) / math.sqrt(R)
            se = float(finals.std(ddof=1) / math.sqrt(R))
        else:
            se_curve, se = np.zeros(T), 0.0
        return cls(algorithm, dict(instance), T, R, float(finals.mean()), se,
                   mean_curve, se_curve, wall_clock)

    def summary(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "instance": self.instance,
            "T": self.T,
            "reps": self.reps,
            "mean_final_regret": self.mean_final_regret,
            "stderr": self.stderr,
            "bounds": [b.to_dict() for b in self.bounds],
        }


def bound_check(report, tag: str, K: int, N: int, L_star: Optional[float] = None,
                v: float = 1.0) -> BoundReport:
    """Compare mean final regret + 3 standard errors with the closed-form bound.

    ``report`` is an :class:`AggregateReport` or a summary dict.
    """
    if isinstance(report, dict):
        mean, se, T = report["mean_final_regret"], report["stderr"], report["T"]
    else:
        mean, se, T = report.mean_final_regret, report.stderr, report.T
    value = bound_value(tag, K, N, T, L_star, v)
    stat = mean + 3.0 * se
    return BoundReport(tag, value, stat, bool(stat <= value))


@dataclass(frozen=True)
class BatchConfig:
    env: Environment
    algo: AlgorithmSpec
    T: int
    reps: int = 1
    base_seed: int = 0
    diagnostics: bool = False
    instance: dict = field(default_factory=dict)
    bounds: tuple = ()


def run_batch(config: BatchConfig, jobs: int = 1):
    """Run ``reps`` seeded episodes and aggregate; returns ``(report, traces)``."""
    seeds = derive_seeds(config.base_seed, config.reps)
    start = time.perf_counter()
    traces = run_seeds(config.env, config.algo, config.T, seeds, config.diagnostics, jobs=jobs)
    report = AggregateReport.from_traces(
        traces, config.algo.name, config.instance or config.env.meta,
        time.perf_counter() - start,
    )
    model = config.env.model
    report.bounds = [
        bound_check(report, tag, model.K, model.N, config.algo.L_star, config.algo.v)
        for tag in config.bounds
    ]
    return report, traces


# -- artifacts ------------------------------------------------------------------

def atomic_write(path: Union[str, Path], text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x) -> str:
    return repr(float(x))


def traces_to_csv(traces: Iterable[RunTrace], diagnostics: bool = False) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BASE_COLUMNS + (DIAG_COLUMNS if diagnostics else ()))
    for tr in traces:
        crp, cra = tr.cum_regret_policy, tr.cum_regret_action
        for t in range(tr.T):
            row = [
                tr.run_id, tr.seed, t + 1, int(tr.contexts[t]), int(tr.actions[t]),
                _fmt(tr.losses[t]), _fmt(tr.regret_policy[t]), _fmt(tr.regret_action[t]),
                _fmt(crp[t]), _fmt(cra[t]),
            ]
            if diagnostics:
                row += [_fmt(tr.diagnostics[k][t]) for k in DIAG_COLUMNS]
            writer.writerow(row)
    return buf.getvalue()


def write_csv(path, traces, diagnostics: bool = False) -> None:
    atomic_write(path, traces_to_csv(traces, diagnostics))


def write_summary(path, report: AggregateReport) -> None:
    atomic_write(path, json.dumps(report.summary(), indent=2, sort_keys=True) + "\n")


def read_curves(csv_path) -> dict:
    """Mean and standard error of cumulative expected regret per round from a trace CSV."""
    per_run = {}
    with open(csv_path, newline="") as fh:
        for row in csv.DictReader(fh):
            per_run.setdefault(int(row["run_id"]), []).append(float(row["cum_regret_policy"]))
    if not per_run:
        return {"t": np.zeros(0, dtype=int), "mean": np.zeros(0), "stderr": np.zeros(0)}
    curves = np.array([per_run[k] for k in sorted(per_run)])
    R, T = curves.shape
    se = curves.std(axis=0, ddof=1) / math.sqrt(R) if R > 1 else np.zeros(T)
    return {"t": np.arange(1, T + 1), "mean": curves.mean(axis=0), "stderr": se}
