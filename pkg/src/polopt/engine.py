"""Driver loop and shared first-order plumbing.

A *method* proposes query points from the history of answered records; a
*politician* turns a query into an answered record that is never worse than
the query.  The driver alternates the two and enforces the contract at
runtime.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FirstOrderRecord",
    "History",
    "Objective",
    "EvalCounter",
    "Answer",
    "OraclePolitician",
    "TraceStep",
    "RunTrace",
    "run",
    "EvaluationError",
    "ContractViolationError",
    "StationaryPoint",
]

# Relative slack for the runtime politician contract f(y) <= f(x).
CONTRACT_SLACK = 1e-12
# An iteration "improves" only if the best value drops by more than this
# (relative); five consecutive non-improving iterations stop the run.
PLATEAU_RTOL = 1e-15
PLATEAU_PATIENCE = 5


class EvaluationError(RuntimeError):
    """Objective returned a non-finite value or gradient."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class ContractViolationError(RuntimeError):
    """A politician answered a point with a strictly larger value."""

    def __init__(self, message, politician=None, iteration=None):
        super().__init__(message)
        self.politician = politician
        self.iteration = iteration


class StationaryPoint(Exception):
    """Raised by a method when the current gradient is exactly zero."""


@dataclass(frozen=True)
class FirstOrderRecord:
    """One answered point with its value and gradient."""

    point: np.ndarray
    value: float
    gradient: np.ndarray


class History:
    """Append-only list of answered records."""

    def __init__(self, records=None):
        self.records = list(records) if records else []

    def append(self, record):
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def __iter__(self):
        return iter(self.records)

    def best(self):
        """Index and record of the smallest value seen so far."""
        i = min(range(len(self.records)), key=lambda j: self.records[j].value)
        return i, self.records[i]


class Objective:
    """Deterministic objective f: R^n -> R with first-order information.

    Parameters
    ----------
    dim : int
        Ambient dimension n.
    value_and_grad : callable
        Maps a point to ``(f(x), grad f(x))``.
    value : callable, optional
        Value-only fast path; defaults to dropping the gradient.
    name : str
        Identifier used in traces and benchmark output.
    f_star, x_star : optional
        Known optimum, when the problem family provides one.
    """

    def __init__(self, dim, value_and_grad, value=None, name="objective",
                 f_star=None, x_star=None):
        self.dim = int(dim)
        self._vg = value_and_grad
        self._v = value
        self.name = name
        self.f_star = f_star
        self.x_star = x_star

    def value_and_grad(self, x):
        return self._vg(x)

    def value(self, x):
        if self._v is not None:
            return self._v(x)
        return self._vg(x)[0]


class EvalCounter:
    """Per-run wrapper that counts charged gradient and value evaluations."""

    def __init__(self, objective):
        self.objective = objective
        self.grad_evals = 0
        self.value_evals = 0

    @property
    def dim(self):
        return self.objective.dim

    def value_and_grad(self, x):
        f, g = self.objective.value_and_grad(x)
        self.grad_evals += 1
        f = float(f)
        g = np.asarray(g, dtype=float)
        if not math.isfinite(f) or not np.all(np.isfinite(g)):
            raise EvaluationError(
                "non-finite value or gradient at %r" % (x,), point=np.array(x))
        return f, g

    def value(self, x):
        f = float(self.objective.value(x))
        self.value_evals += 1
        if not math.isfinite(f):
            raise EvaluationError("non-finite value at %r" % (x,),
                                  point=np.array(x))
        return f

    def record(self, x):
        """Evaluate at x and package the result (one charged gradient)."""
        x = np.array(x, dtype=float)
        f, g = self.value_and_grad(x)
        return FirstOrderRecord(point=x, value=f, gradient=g)


@dataclass
class Answer:
    """A politician's reply: the record plus bookkeeping for the driver."""

    record: FirstOrderRecord
    query_value: float | None = None
    alpha: float = math.nan


class OraclePolitician:
    """Identity politician: answers the queried point itself."""

    name = "oracle"

    def __init__(self):
        self._counter = None

    def reset(self, counter):
        self._counter = counter

    def answer(self, x, history):
        rec = self._counter.record(x)
        return Answer(record=rec, query_value=rec.value, alpha=math.nan)


@dataclass(frozen=True)
class TraceStep:
    k: int
    query: np.ndarray
    point: np.ndarray
    value: float
    grad_norm: float
    alpha: float
    grad_evals: int
    value_evals: int
    seconds: float


@dataclass
class RunTrace:
    """Iteration log of one (method, politician) run."""

    method: str
    politician: str
    steps: list = field(default_factory=list)
    termination: str = "budget"

    @property
    def values(self):
        return np.array([s.value for s in self.steps])

    @property
    def grad_norms(self):
        return np.array([s.grad_norm for s in self.steps])

    def final(self):
        return self.steps[-1]


def run(method, politician, objective, x0, budget, tol=1e-9):
    """Drive ``method`` against ``politician`` on ``objective`` from ``x0``.

    Each iteration asks the method for a query point, lets the politician
    answer it, verifies f(answer) <= f(query) up to relative slack, and
    appends the answered record to the shared history.  Stops on the
    gradient tolerance, exact stationarity, a five-iteration value plateau,
    or the iteration budget.
    """
    x0 = np.array(x0, dtype=float)
    counter = EvalCounter(objective)
    history = History()
    method.reset(counter, x0)
    politician.reset(counter)
    trace = RunTrace(method=getattr(method, "name", "method"),
                     politician=getattr(politician, "name", "politician"))
    best = math.inf
    plateau = 0
    t0 = time.perf_counter()
    for k in range(1, budget + 1):
        try:
            x = method.propose(history)
        except StationaryPoint:
            trace.termination = "stationary"
            break
        ans = politician.answer(x, history)
        rec = ans.record
        if ans.query_value is not None:
            fx = ans.query_value
        elif rec.point.shape == x.shape and np.array_equal(rec.point, x):
            fx = rec.value
        else:
            fx = counter.value(x)
        if rec.value > fx + CONTRACT_SLACK * (1.0 + abs(fx)):
            raise ContractViolationError(
                "politician %r answered f=%.17g above query f=%.17g at "
                "iteration %d" % (trace.politician, rec.value, fx, k),
                politician=trace.politician, iteration=k)
        history.append(rec)
        gn = float(np.linalg.norm(rec.gradient))
        trace.steps.append(TraceStep(
            k=k, query=np.array(x), point=rec.point, value=rec.value,
            grad_norm=gn, alpha=ans.alpha, grad_evals=counter.grad_evals,
            value_evals=counter.value_evals,
            seconds=time.perf_counter() - t0))
        if gn == 0.0:
            trace.termination = "stationary"
            break
        if gn <= tol:
            trace.termination = "gradient_tolerance"
            break
        if best - rec.value < PLATEAU_RTOL * (1.0 + abs(rec.value)):
            plateau += 1
            if plateau >= PLATEAU_PATIENCE:
                trace.termination = "f_plateau"
                break
        else:
            plateau = 0
        best = min(best, rec.value)
    trace.history = history
    trace.grad_evals = counter.grad_evals
    trace.value_evals = counter.value_evals
    return trace
