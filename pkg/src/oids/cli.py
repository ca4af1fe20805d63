"""Run contextual-bandit experiments, replicate the structured examples, check regret bounds.

Subcommands: ``oids run | replicate | export-plot | check-bounds``.

Exit codes: 0 success, 1 an expectation or bound was not met, 2 invalid
input (config, flags, paths), 3 runtime failure during simulation.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence

import jsonschema
import numpy as np

from .catalog import InstanceRecipe, make_revealing_action, make_revelatory_zero, make_sparse_linear
from .harness import (
    BOUND_TAGS,
    AggregateReport,
    BatchConfig,
    EpisodeError,
    atomic_write,
    bound_check,
    derive_seeds,
    read_curves,
    run_batch,
    simulate,
    write_csv,
    write_summary,
)
from .models import ModelInconsistencyError
from .policies import KINDS, LAMBDA_TAGS, AlgorithmSpec, SolverError

EXIT_OK, EXIT_UNMET, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2, 3
OUTPUT_ENV = "OIDS_OUTPUT_DIR"

_number_or = lambda *tags: {"oneOf": [{"type": "number"}, {"enum": list(tags)}]}  # noqa: E731

ALGO_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": list(KINDS)},
        "label": {"type": "string", "minLength": 1},
        "eta": {"type": "number", "exclusiveMinimum": 0},
        "lam": _number_or(*LAMBDA_TAGS),
        "mu": _number_or("auto"),
        "gamma": _number_or("auto"),
        "v": {"type": "number", "exclusiveMinimum": 0},
        "L_star": {"type": "number", "minimum": 0},
        "sg_variant": {"enum": ["proof", "theorem"]},
    },
}

ENV_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["revealing_action", "sparse_linear", "revelatory_zero", "random_bernoulli"]},
        "K": {"type": "integer", "minimum": 2},
        "d": {"type": "integer", "minimum": 2, "maximum": 12},
        "delta": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.5},
        "N": {"type": "integer", "minimum": 2},
        "contexts": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "family": {"enum": ["bernoulli", "gaussian"]},
        "theta0": {"type": "integer", "minimum": 0},
        "binarize": {"type": "boolean"},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["env", "algos", "T"],
    "properties": {
        "name": {"type": "string", "minLength": 1, "pattern": r"^[A-Za-z0-9_.\-]+$"},
        "env": ENV_SCHEMA,
        "algos": {"type": "array", "minItems": 1, "items": ALGO_SCHEMA},
        "T": {"type": "integer", "minimum": 0},
        "reps": {"type": "integer", "minimum": 1},
        "base_seed": {"type": "integer", "minimum": 0},
        "diagnostics": {"type": "boolean"},
        "output_dir": {"type": "string"},
        "bounds": {"type": "array", "items": {"enum": list(BOUND_TAGS)}, "uniqueItems": True},
    },
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    env: dict
    algos: tuple
    T: int
    name: str = "experiment"
    reps: int = 1
    base_seed: int = 0
    diagnostics: bool = False
    output_dir: Optional[str] = None
    bounds: tuple = ()

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        errors = sorted(jsonschema.Draft202012Validator(CONFIG_SCHEMA).iter_errors(doc), key=str)
        if errors:
            lines = []
            for err in errors:
                where = "/".join(str(p) for p in err.absolute_path) or "<root>"
                lines.append(f"{where}: {err.message}")
            raise ConfigError("invalid config:\n  " + "\n  ".join(lines))
        cfg = cls(
            env=dict(doc["env"]),
            algos=tuple(dict(a) for a in doc["algos"]),
            T=doc["T"],
            name=doc.get("name", "experiment"),
            reps=doc.get("reps", 1),
            base_seed=doc.get("base_seed", 0),
            diagnostics=doc.get("diagnostics", False),
            output_dir=doc.get("output_dir"),
            bounds=tuple(doc.get("bounds", ())),
        )
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(doc)

    def validate(self) -> None:
        """Semantic checks beyond the schema (per-kind parameters, hyperparameters)."""
        try:
            env = self.recipe().build()
            for spec in self.algo_specs():
                spec.resolve(env.model, max(self.T, 1))
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from None
        labels = [s.name for s in self.algo_specs()]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"algorithm labels must be unique, got {labels}")
        if "first_order" in self.bounds and any(s.L_star is None for s in self.algo_specs()):
            raise ConfigError("the first_order bound needs L_star on every algorithm")

    def recipe(self) -> InstanceRecipe:
        return InstanceRecipe.from_dict(self.env)

    def algo_specs(self) -> List[AlgorithmSpec]:
        return [AlgorithmSpec.from_dict(a) for a in self.algos]

    def to_dict(self) -> dict:
        doc = {
            "name": self.name,
            "env": dict(self.env),
            "algos": [dict(a) for a in self.algos],
            "T": self.T,
            "reps": self.reps,
            "base_seed": self.base_seed,
            "diagnostics": self.diagnostics,
            "bounds": list(self.bounds),
        }
        if self.output_dir is not None:
            doc["output_dir"] = self.output_dir
        return doc

    def with_seed(self, seed: Optional[int]) -> "ExperimentConfig":
        if seed is None:
            return self
        return replace(self, base_seed=seed)

    def resolve_output_dir(self, override: Optional[str] = None) -> Path:
        return Path(override or self.output_dir or os.environ.get(OUTPUT_ENV) or "results")


def run_experiment(cfg: ExperimentConfig, out_dir: Optional[Path] = None, jobs: int = 1,
                   echo=print) -> List[AggregateReport]:
    """Run every algorithm of ``cfg`` and write ``<label>.csv`` / ``<label>.summary.json``."""
    out = (out_dir or cfg.resolve_output_dir()) / cfg.name
    env = cfg.recipe().build()
    reports = []
    for spec in cfg.algo_specs():
        batch = BatchConfig(env, spec, cfg.T, cfg.reps, cfg.base_seed, cfg.diagnostics,
                            cfg.recipe().to_dict(), cfg.bounds)
        report, traces = run_batch(batch, jobs=jobs)
        write_csv(out / f"{spec.name}.csv", traces, cfg.diagnostics)
        write_summary(out / f"{spec.name}.summary.json", report)
        bounds = ", ".join(f"{b.tag}={b.value:.4g}:{'ok' if b.satisfied else 'VIOLATED'}" for b in report.bounds)
        echo(f"{spec.name:>12}  mean regret {report.mean_final_regret:.6g} ± {report.stderr:.3g}"
             f"  ({report.reps} reps, {report.wall_clock:.1f}s){'  ' + bounds if bounds else ''}")
        reports.append(report)
    atomic_write(out / "config.json", json.dumps(cfg.to_dict(), indent=2) + "\n")
    return reports


# -- replication of the three structured examples ---------------------------------

@dataclass
class Check:
    name: str
    expected: str
    observed: str
    passed: bool


def replicate_revealing(base_seed: int = 0, out: Optional[Path] = None) -> List[Check]:
    K, T = 8, 50
    checks = []
    for theta in range(1, K + 1):
        env = make_revealing_action(K, theta - 1)
        trace = simulate(env, AlgorithmSpec("voids"), T, derive_seeds(base_seed, 1), record_policy=True)[0]
        target = 1 - 2.0 ** -theta
        ok = (
            abs(trace.policies[0][0] - 1) <= 1e-9
            and trace.support[0] == 1
            and abs(trace.final_regret - target) <= 1e-9
        )
        checks.append(Check(f"revealing theta0={theta}", f"regret {target:.10g}",
                            f"regret {trace.final_regret:.10g}", ok))
        if out is not None:
            write_csv(out / "revealing" / f"voids_theta{theta}.csv", [trace])
    return checks


def replicate_sparse(base_seed: int = 0, out: Optional[Path] = None, d: int = 8, reps: int = 16) -> List[Check]:
    T = 20
    limit = int(math.log2(d)) + 1
    traces = simulate(make_sparse_linear(d), AlgorithmSpec("voids"), T, derive_seeds(base_seed, reps))
    checks = []
    for tr in traces:
        k = tr.identification_round
        flat = k is not None and np.all(tr.regret_policy[k:] == 0)
        exact = " (exactly log2 d)" if k is not None and k <= math.log2(d) else ""
        checks.append(Check(f"sparse d={d} seed={tr.seed} theta0=e{tr.theta0}",
                            f"identified by round {limit}, flat after",
                            f"identified at round {k}{exact}", bool(k is not None and k <= limit and flat)))
    if out is not None:
        write_csv(out / "sparse" / "voids.csv", traces)
    return checks


def replicate_revelatory(base_seed: int = 0, out: Optional[Path] = None,
                         K: int = 4, delta: float = 0.1, reps: int = 500, T: int = 500) -> List[Check]:
    env = make_revelatory_zero(K, delta)
    checks = []
    for kind in ("voids", "roids"):
        traces = simulate(env, AlgorithmSpec(kind), T, derive_seeds(base_seed, reps))
        report = AggregateReport.from_traces(traces, kind, env.meta)
        m = report.mean_final_regret
        checks.append(Check(f"revelatory K={K} delta={delta} {kind}", "mean regret in [0.75, 3.0]",
                            f"{m:.4f} ± {report.stderr:.4f}", 0.75 <= m <= 3.0))
        if out is not None:
            write_csv(out / "revelatory" / f"{kind}.csv", traces)
            write_summary(out / "revelatory" / f"{kind}.summary.json", report)
    return checks


REPLICATIONS = {
    "revealing": replicate_revealing,
    "sparse": replicate_sparse,
    "revelatory": replicate_revelatory,
}


def format_checks(checks: Sequence[Check]) -> str:
    w = max(len(c.name) for c in checks)
    lines = [f"{'check':<{w}}  {'result':<6}  observed  [expected]"]
    for c in checks:
        lines.append(f"{c.name:<{w}}  {'PASS' if c.passed else 'FAIL':<6}  {c.observed}  [{c.expected}]")
    return "\n".join(lines)


# -- commands -------------------------------------------------------------------

def cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config).with_seed(args.seed_override)
    run_experiment(cfg, jobs=args.jobs)
    print(f"wrote results to {cfg.resolve_output_dir() / cfg.name}")
    return EXIT_OK


def cmd_replicate(args) -> int:
    out = Path(args.out) if args.out else (Path(os.environ[OUTPUT_ENV]) if os.environ.get(OUTPUT_ENV) else None)
    checks = REPLICATIONS[args.name](args.seed_override or 0, out)
    print(format_checks(checks))
    return EXIT_OK if all(c.passed for c in checks) else EXIT_UNMET


def _trace_files(directory: Path) -> List[Path]:
    if not directory.is_dir():
        raise ConfigError(f"not a directory: {directory}")
    return sorted(p for p in directory.glob("*.csv") if p.name != "plot.csv")


def cmd_export_plot(args) -> int:
    directory = Path(args.dir)
    files = _trace_files(directory)
    if not files:
        raise ConfigError(f"no trace CSV files in {directory}")
    lines = ["algorithm,t,mean_cum_regret,stderr"]
    for path in files:
        curves = read_curves(path)
        for t, m, s in zip(curves["t"], curves["mean"], curves["stderr"]):
            lines.append(f"{path.stem},{int(t)},{float(m)!r},{float(s)!r}")
    target = directory / "plot.csv"
    atomic_write(target, "\n".join(lines) + "\n")
    print(f"wrote {target}")
    return EXIT_OK


def cmd_check_bounds(args) -> int:
    directory = Path(args.dir)
    if not directory.is_dir():
        raise ConfigError(f"not a directory: {directory}")
    summaries = sorted(directory.glob("*.summary.json"))
    if not summaries:
        raise ConfigError(f"no summary files in {directory}")
    tags = args.tags or (["worst_case", "subgaussian"] + (["first_order"] if args.lstar is not None else []))
    if "first_order" in tags and args.lstar is None:
        raise ConfigError("the first_order bound needs --lstar")
    ok = True
    print(f"{'algorithm':<14} {'tag':<12} {'mean+3se':>12} {'bound':>12}  result")
    for path in summaries:
        doc = json.loads(path.read_text())
        for tag in tags:
            b = bound_check(doc, tag, args.k, args.n, args.lstar, args.v)
            ok &= b.satisfied
            print(f"{doc['algorithm']:<14} {tag:<12} {b.statistic:>12.6g} {b.value:>12.6g}  "
                  f"{'ok' if b.satisfied else 'VIOLATED'}")
    return EXIT_OK if ok else EXIT_UNMET


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed-override", type=int, default=None, metavar="N",
                        help="replace the base seed (nothing else changes)")
    parser = argparse.ArgumentParser(prog="oids", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run an experiment from a JSON config")
    p.add_argument("--config", required=True, metavar="PATH")
    p.add_argument("--jobs", type=int, default=1, metavar="N", help="worker processes")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replicate", parents=[common], help="replicate a structured example")
    p.add_argument("name", choices=sorted(REPLICATIONS))
    p.add_argument("--out", metavar="DIR", help="also write traces here")
    p.set_defaults(func=cmd_replicate)

    p = sub.add_parser("export-plot", parents=[common], help="mean regret curves as long-format CSV")
    p.add_argument("dir")
    p.set_defaults(func=cmd_export_plot)

    p = sub.add_parser("check-bounds", parents=[common], help="compare summaries with regret bounds")
    p.add_argument("dir")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--lstar", type=float, default=None)
    p.add_argument("--v", type=float, default=1.0)
    p.add_argument("--tags", nargs="+", choices=BOUND_TAGS, default=None)
    p.set_defaults(func=cmd_check_bounds)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (EpisodeError, ModelInconsistencyError, SolverError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
