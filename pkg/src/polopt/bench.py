"""Benchmark harness: method x politician grids over problem suites.

Each (problem, method) run emits one CSV trace; a manifest records the
config hash and termination reasons (no timing, so reruns are
byte-identical).  Performance profiles report, per method, the fraction
of problems solved within x times the iterations of the per-problem
best method.
"""

import argparse
import hashlib
import json
import os
import re
import sys
from dataclasses import dataclass, field

import numpy as np

from .engine import ContractViolationError, OraclePolitician, run
from .methods import (BFGSMethod, CGMethod, EmptyMethod, GeometricPolitician,
                      GKMethod, SDMethod)
from .problems import (HingeProblem, chain_objective, dataset_to_matrix,
                       hinge_objective, make_hinge_synthetic, parse_libsvm,
                       quadratic_objective)

__all__ = [
    "REGISTRY",
    "BenchConfig",
    "ConfigError",
    "ProfileError",
    "ProfileCurve",
    "build_objective",
    "make_pair",
    "run_suite",
    "performance_profile",
    "main",
]

# Method registry; the "+" suffix attaches the geometric politician.
REGISTRY = ("sd", "sd+", "cg", "gk", "gk+", "bfgs", "bfgs+", "empty+")

CSV_COLUMNS = ("iter", "f", "gradnorm", "alpha",
               "grad_evals", "value_evals", "cum_seconds")
SCHEMA_VERSION = 1

# Relative accuracy defining "solved" when f* is known.
EPS_SMOOTH = 1e-6
EPS_NONSMOOTH = 1e-3


class ConfigError(ValueError):
    """Invalid benchmark configuration; reported before any run starts."""


class ProfileError(ValueError):
    """Performance profile requested on an empty or ragged result set."""


@dataclass(frozen=True)
class ProfileCurve:
    """Grid over [1, 10] and per-method solved fractions (nondecreasing)."""

    x: np.ndarray
    fractions: dict


def make_pair(name):
    """Method instance plus politician for a registry name."""
    if name not in REGISTRY:
        raise ConfigError("unknown method %r (registry: %s)"
                          % (name, ", ".join(REGISTRY)))
    plus = name.endswith("+")
    base = name[:-1] if plus else name
    if base == "sd":
        method = SDMethod()
    elif base == "cg":
        method = CGMethod()
    elif base == "bfgs":
        method = BFGSMethod()
    elif base == "gk":
        # The learning-rate halving rule is active only without the
        # geometric politician.
        method = GKMethod(oracle_mode=not plus)
    else:
        method = EmptyMethod()
    politician = GeometricPolitician() if plus else OraclePolitician()
    return method, politician


_FAMILIES = ("quadratic", "chain", "hinge")


def _validate_problem(spec):
    if not isinstance(spec, dict):
        raise ConfigError("problem spec must be an object, got %r" % (spec,))
    family = spec.get("family")
    if family not in _FAMILIES:
        raise ConfigError("unknown problem family %r (families: %s)"
                          % (family, ", ".join(_FAMILIES)))
    if family == "hinge" and "data" in spec:
        if not os.path.exists(spec["data"]):
            raise ConfigError("dataset file %r not found" % spec["data"])
    elif not isinstance(spec.get("n"), int) or spec["n"] < 1:
        raise ConfigError("problem %r needs a positive integer n" % family)
    if family == "hinge":
        t = spec.get("t", 1.0)
        lam = spec.get("lambda", 1e-4)
        if not t > 0:
            raise ConfigError("hinge t must be positive, got %r" % t)
        if lam < 0:
            raise ConfigError("hinge lambda must be nonnegative, got %r" % lam)


@dataclass
class BenchConfig:
    problems: list
    methods: list
    budget: int = 100
    tol: float = 1e-9
    out: str = "bench_out"

    def __post_init__(self):
        if not self.problems:
            raise ConfigError("no problems configured")
        if not self.methods:
            raise ConfigError("no methods configured")
        for spec in self.problems:
            _validate_problem(spec)
        for name in self.methods:
            if name not in REGISTRY:
                raise ConfigError("unknown method %r (registry: %s)"
                                  % (name, ", ".join(REGISTRY)))
        if not (isinstance(self.budget, int) and self.budget > 0):
            raise ConfigError("budget must be a positive integer")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")

    def resolved(self):
        """Config content that determines results (excludes the out dir)."""
        return {"problems": self.problems, "methods": list(self.methods),
                "budget": self.budget, "tol": self.tol}

    def sha256(self):
        blob = json.dumps(self.resolved(), sort_keys=True,
                          separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def build_objective(spec):
    family = spec["family"]
    if family == "quadratic":
        return quadratic_objective(spec["n"], spec.get("seed", 0),
                                   spec.get("kappa"))
    if family == "chain":
        return chain_objective(spec["n"])
    t = spec.get("t", 1.0)
    lam = spec.get("lambda", 1e-4)
    if "data" in spec:
        with open(spec["data"], encoding="utf-8") as fh:
            ds = parse_libsvm(fh)
        stem = re.sub(r"[^A-Za-z0-9]+", "-",
                      os.path.splitext(os.path.basename(spec["data"]))[0])
        name = "hinge-%s-t%g-l%g" % (stem, t, lam)
    else:
        n = spec["n"]
        seed = spec.get("seed", 0)
        ds = make_hinge_synthetic(spec.get("rows", 2 * n), n, seed)
        name = "hinge-n%d-s%d-t%g-l%g" % (n, seed, t, lam)
    A, b = dataset_to_matrix(ds)
    return hinge_objective(HingeProblem(A=A, b=b, t=t, lam=lam), name=name)


def _solved_at(trace, objective, f0, tol):
    """First politician answer meeting the accuracy target, or None."""
    if objective.f_star is not None:
        eps = EPS_SMOOTH if getattr(objective, "smooth", True) \
            else EPS_NONSMOOTH
        target = objective.f_star + eps * (f0 - objective.f_star)
        for s in trace.steps:
            if s.value <= target:
                return s.k
    else:
        for s in trace.steps:
            if s.grad_norm <= tol:
                return s.k
    return None


def _write_trace_csv(path, trace):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for s in trace.steps:
            fh.write("%d,%s,%s,%s,%d,%d,%s\n" % (
                s.k, repr(float(s.value)), repr(float(s.grad_norm)),
                repr(float(s.alpha)), s.grad_evals, s.value_evals,
                repr(float(s.seconds))))


PLOT_SCRIPT = '''#!/usr/bin/env python3
"""Plot performance profiles from profiles.csv in this directory."""
import csv
import os
import sys


def main():
    here = os.path.dirname(os.path.abspath(__file__))
    with open(os.path.join(here, "profiles.csv"), newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    xs = [float(r[0]) for r in data]
    try:
        import matplotlib.pyplot as plt
    except ImportError:
        sys.exit("matplotlib not available; the numbers are in profiles.csv")
    for j, name in enumerate(header[1:], start=1):
        plt.plot(xs, [float(r[j]) for r in data], label=name)
    plt.xlabel("x (iterations relative to per-problem best)")
    plt.ylabel("fraction of problems solved")
    plt.ylim(0.0, 1.05)
    plt.legend(loc="lower right")
    plt.tight_layout()
    plt.savefig(os.path.join(here, "profiles.png"), dpi=150)
    print(os.path.join(here, "profiles.png"))


if __name__ == "__main__":
    main()
'''


def run_suite(config):
    """Run the full grid, write traces + manifest + profiles, return manifest.

    One CSV per (problem, method) with columns iter, f, gradnorm, alpha,
    grad_evals, value_evals, cum_seconds.  Reruns with the same config
    produce byte-identical files apart from the cum_seconds column.
    """
    os.makedirs(config.out, exist_ok=True)
    runs = []
    counts = {m: [] for m in config.methods}
    for spec in config.problems:
        objective = build_objective(spec)
        x0 = np.zeros(objective.dim)
        f0 = objective.value(x0)
        for mname in config.methods:
            method, politician = make_pair(mname)
            trace = run(method, politician, objective, x0,
                        budget=config.budget, tol=config.tol)
            fname = "%s__%s.csv" % (objective.name, mname)
            _write_trace_csv(os.path.join(config.out, fname), trace)
            solved = _solved_at(trace, objective, f0, config.tol)
            counts[mname].append(solved)
            runs.append({
                "problem": objective.name,
                "method": mname,
                "politician": politician.name,
                "csv": fname,
                "termination": trace.termination,
                "iterations": len(trace.steps),
                "grad_evals": trace.grad_evals,
                "value_evals": trace.value_evals,
                "final_f": float(trace.final().value) if trace.steps
                           else None,
                "solved_at": solved,
            })
    curve = performance_profile(counts, np.linspace(1.0, 10.0, 91))
    with open(os.path.join(config.out, "profiles.csv"), "w",
              newline="") as fh:
        fh.write(",".join(["x"] + list(config.methods)) + "\n")
        for i, x in enumerate(curve.x):
            row = [repr(float(x))]
            row.extend(repr(float(curve.fractions[m][i]))
                       for m in config.methods)
            fh.write(",".join(row) + "\n")
    with open(os.path.join(config.out, "plot_profiles.py"), "w") as fh:
        fh.write(PLOT_SCRIPT)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "csv_columns": list(CSV_COLUMNS),
        "config": config.resolved(),
        "config_sha256": config.sha256(),
        "runs": runs,
    }
    with open(os.path.join(config.out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def performance_profile(counts, x_grid):
    """Fraction of problems solved within x times the per-problem best.

    ``counts`` maps method name to a list of iteration counts, one per
    problem, with None marking did-not-solve (never counted as solved).
    """
    if not counts:
        raise ProfileError("empty result set")
    sizes = {len(v) for v in counts.values()}
    if len(sizes) != 1:
        raise ProfileError("methods report different problem counts")
    total = sizes.pop()
    if total == 0:
        raise ProfileError("empty result set")
    best = []
    for j in range(total):
        vals = [c[j] for c in counts.values() if c[j] is not None]
        best.append(min(vals) if vals else None)
    x = np.asarray(x_grid, dtype=float)
    fractions = {}
    for mname, cnt in counts.items():
        hits = np.zeros_like(x)
        for j in range(total):
            if cnt[j] is not None and best[j] is not None:
                hits += cnt[j] <= x * best[j]
        fractions[mname] = hits / total
    return ProfileCurve(x=x, fractions=fractions)


def _load_config(args):
    base = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                base = json.load(fh)
        except OSError as e:
            raise ConfigError("cannot read config: %s" % e) from None
        except json.JSONDecodeError as e:
            raise ConfigError("config is not valid JSON: %s" % e) from None
        if not isinstance(base, dict):
            raise ConfigError("config root must be a JSON object")
    problems = base.get("problems", [])
    if args.problem:
        spec = {"family": args.problem}
        if args.n is not None:
            spec["n"] = args.n
        if args.seed is not None:
            spec["seed"] = args.seed
        if args.t is not None:
            spec["t"] = args.t
        if args.lam is not None:
            spec["lambda"] = args.lam
        problems = [spec]
    methods = base.get("methods", [])
    if args.method:
        methods = list(args.method)
    return BenchConfig(
        problems=problems,
        methods=methods,
        budget=args.budget if args.budget is not None
               else base.get("budget", 100),
        tol=args.tol if args.tol is not None else base.get("tol", 1e-9),
        out=args.out if args.out is not None
            else base.get("out", "bench_out"),
    )


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="polopt",
        description="first-order method benchmarks with politicians")
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run a benchmark suite")
    runp.add_argument("--config", help="JSON config file")
    runp.add_argument("--problem", help="problem family for a single run")
    runp.add_argument("--n", type=int, help="problem size")
    runp.add_argument("--seed", type=int, help="problem seed")
    runp.add_argument("--method", action="append",
                      help="method name, repeatable (e.g. sd, bfgs+, gk)")
    runp.add_argument("--budget", type=int, help="iteration budget")
    runp.add_argument("--tol", type=float, help="gradient norm tolerance")
    runp.add_argument("--t", type=float, help="hinge smoothing width")
    runp.add_argument("--lambda", type=float, dest="lam",
                      help="hinge regularization")
    runp.add_argument("--out", help="output directory")
    args = parser.parse_args(argv)
    try:
        config = _load_config(args)
        manifest = run_suite(config)
    except ConfigError as e:
        print("config error: %s" % e, file=sys.stderr)
        return 2
    except ContractViolationError as e:
        print("contract violation: %s" % e, file=sys.stderr)
        return 3
    print("wrote %d runs to %s (config %s)"
          % (len(manifest["runs"]), config.out,
             manifest["config_sha256"][:12]))
    return 0


if __name__ == "__main__":
    sys.exit(main())
