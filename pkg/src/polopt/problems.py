"""Benchmark objective families and sparse-dataset plumbing.

Three families cover the benchmark suite: random diagonal quadratics
(smooth, known optimum), a chain-structured piecewise function with a
flat kink region (effectively non-smooth at benchmark scale), and
smoothed hinge-loss regression on sparse data in the LIBSVM text
format.  Problems are immutable after construction and evaluations are
pure, so instances can be shared freely across runs.
"""

import math
import re
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .engine import Objective

__all__ = [
    "QuadraticProblem",
    "random_quadratic",
    "quadratic_eval",
    "quadratic_objective",
    "chain_link",
    "chain_link_deriv",
    "chain_eval",
    "chain_objective",
    "HingeProblem",
    "smoothed_hinge",
    "smoothed_hinge_deriv",
    "hinge_eval",
    "hinge_objective",
    "SparseDataset",
    "ParseError",
    "parse_libsvm",
    "serialize_libsvm",
    "dataset_to_matrix",
    "make_hinge_synthetic",
]


# ---------------------------------------------------------------------------
# diagonal quadratics


@dataclass(frozen=True)
class QuadraticProblem:
    """f(x) = (x - c)' D (x - c) with a nonnegative diagonal D.

    The minimizer is ``c`` with value 0.  The Hessian is ``2 D``, so the
    strong convexity modulus is ``2 min(D)`` and the smoothness constant
    is ``2 max(D)``.
    """

    D: np.ndarray
    c: np.ndarray
    seed: int = -1

    @property
    def dim(self):
        return self.D.size

    def kappa(self):
        """Condition number max(D) / min(positive D)."""
        pos = self.D[self.D > 0]
        if pos.size == 0:
            return math.inf
        return float(pos.max() / pos.min())


def random_quadratic(n, seed, kappa=None):
    """Sample a diagonal quadratic; D uniform on [0,1], c standard normal.

    When ``kappa`` is given the diagonal is remapped to [1/kappa, 1] and
    the extreme entries are pinned so the condition number is exact.
    """
    rng = np.random.default_rng(seed)
    d = rng.uniform(0.0, 1.0, size=n)
    c = rng.standard_normal(n)
    if kappa is not None:
        if kappa < 1.0:
            raise ValueError("kappa must be >= 1")
        if n < 2:
            raise ValueError("kappa pinning needs n >= 2")
        lo = 1.0 / kappa
        d = lo + (1.0 - lo) * d
        i_min, i_max = int(np.argmin(d)), int(np.argmax(d))
        if i_min == i_max:
            i_max = (i_min + 1) % n
        d[i_min] = lo
        d[i_max] = 1.0
    d.setflags(write=False)
    c.setflags(write=False)
    return QuadraticProblem(D=d, c=c, seed=seed)


def quadratic_eval(problem, x):
    r = x - problem.c
    return float(problem.D @ (r * r)), 2.0 * problem.D * r


def quadratic_objective(n, seed, kappa=None):
    """Objective wrapper around :func:`random_quadratic`.

    Exposes ``problem``, ``smooth``, ``beta`` (smoothness) and
    ``alpha_true`` (strong convexity; 0 when D has a zero entry).
    """
    prob = random_quadratic(n, seed, kappa)
    name = "quadratic-n%d-s%d" % (n, seed)
    if kappa is not None:
        name += "-k%g" % kappa
    obj = Objective(
        dim=n,
        value_and_grad=lambda x: quadratic_eval(prob, x),
        value=lambda x: quadratic_eval(prob, x)[0],
        name=name,
        f_star=0.0,
        x_star=prob.c,
    )
    obj.problem = prob
    obj.smooth = True
    obj.beta = 2.0 * float(prob.D.max())
    obj.alpha_true = 2.0 * float(prob.D.min())
    return obj


# ---------------------------------------------------------------------------
# chain function with a flat kink


# Link function: zero on [-KNOT, KNOT], asymptotically |z| - KNOT outside,
# with corners rounded at scale SMOOTHING.
KNOT = 0.1
SMOOTHING = 1e-3


def chain_link(z):
    s = np.maximum(np.abs(z) - KNOT, 0.0)
    return np.sqrt(s * s + SMOOTHING * SMOOTHING) - SMOOTHING


def chain_link_deriv(z):
    s = np.maximum(np.abs(z) - KNOT, 0.0)
    return np.sign(z) * s / np.sqrt(s * s + SMOOTHING * SMOOTHING)


def chain_eval(x):
    """Value and gradient of sum of links over consecutive differences.

    f(x) = g(1 - x[0]) + sum_j g(x[j-1] - x[j]) where g is the rounded
    dead-zone link.  Any span-of-gradients method needs at least eleven
    steps to reach the staircase minimizer (1, 0.9, ..., 0.1, 0, ...).
    """
    u = np.concatenate(([1.0 - x[0]], x[:-1] - x[1:]))
    w = chain_link_deriv(u)
    grad = np.append(w[1:], 0.0) - w
    return float(chain_link(u).sum()), grad


def chain_objective(n):
    x_star = np.maximum(1.0 - 0.1 * np.arange(n), 0.0)
    obj = Objective(
        dim=n,
        value_and_grad=chain_eval,
        value=lambda x: chain_eval(x)[0],
        name="chain-n%d" % n,
        f_star=0.0,
        x_star=x_star,
    )
    obj.smooth = False
    return obj


# ---------------------------------------------------------------------------
# smoothed hinge regression


@dataclass(frozen=True)
class HingeProblem:
    """Regularized empirical risk with the smoothed hinge loss.

    f(x) = mean_i phi_t(b_i a_i' x) + (lam/2) |x|^2, where phi_t ramps
    from 0 to slope 1 over the width-t window starting at z = -1.  The
    regularizer makes f lam-strongly convex.
    """

    A: sp.csr_matrix = field(repr=False)
    b: np.ndarray = field(repr=False)
    t: float = 1.0
    lam: float = 1e-4

    def __post_init__(self):
        if not 0.0 < self.t:
            raise ValueError("smoothing width t must be positive")
        if self.lam < 0.0:
            raise ValueError("regularization must be nonnegative")
        if self.A.shape[0] != self.b.size:
            raise ValueError("row/label count mismatch")

    @property
    def dim(self):
        return self.A.shape[1]


def smoothed_hinge(z, t):
    p = np.asarray(z, dtype=float) + 1.0
    return np.where(p <= 0.0, 0.0,
                    np.where(p >= t, p - 0.5 * t, 0.5 * p * p / t))


def smoothed_hinge_deriv(z, t):
    return np.clip((np.asarray(z, dtype=float) + 1.0) / t, 0.0, 1.0)


def hinge_eval(problem, x):
    m = problem.b * (problem.A @ x)
    value = float(np.mean(smoothed_hinge(m, problem.t)))
    value += 0.5 * problem.lam * float(x @ x)
    w = smoothed_hinge_deriv(m, problem.t) * problem.b / problem.b.size
    grad = problem.A.T @ w + problem.lam * x
    return value, np.asarray(grad)


def hinge_objective(problem, name=None):
    """Objective wrapper; ``smooth`` reflects the ramp width t."""
    if name is None:
        name = "hinge-d%d-m%d-t%g-l%g" % (
            problem.dim, problem.b.size, problem.t, problem.lam)
    obj = Objective(
        dim=problem.dim,
        value_and_grad=lambda x: hinge_eval(problem, x),
        value=lambda x: hinge_eval(problem, x)[0],
        name=name,
    )
    obj.problem = problem
    obj.smooth = problem.t > 1e-2
    return obj


# ---------------------------------------------------------------------------
# LIBSVM text format


@dataclass
class SparseDataset:
    """Rows of (label, [(index, value), ...]) with 1-based sorted indices.

    ``dim`` is at least the largest feature index.  ``label_map`` records
    how raw labels were normalized to +/-1, when any were.
    """

    rows: list
    dim: int
    label_map: dict | None = None


class ParseError(ValueError):
    """Malformed dataset text; carries 1-based line and column."""

    def __init__(self, message, line, column):
        super().__init__("line %d, column %d: %s" % (line, column, message))
        self.line = line
        self.column = column


_TOKEN = re.compile(r"\S+")


def parse_libsvm(source):
    """Parse LIBSVM-format text into a :class:`SparseDataset`.

    ``source`` is a string or an iterable of lines.  Lines look like
    ``label idx:val idx:val ...`` with strictly increasing 1-based
    indices.  Blank lines and ``#`` comments are skipped.  Labels are
    normalized by sign to +/-1 (zero counts as negative); a warning is
    emitted if anything other than +/-1 appears.
    """
    if isinstance(source, str):
        lines = source.splitlines()
    else:
        lines = source
    rows = []
    dim = 0
    label_map = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0]
        tokens = _TOKEN.finditer(line)
        first = next(tokens, None)
        if first is None:
            continue
        try:
            raw_label = float(first.group())
        except ValueError:
            raise ParseError("bad label %r" % first.group(),
                             lineno, first.start() + 1) from None
        label = 1.0 if raw_label > 0 else -1.0
        label_map[raw_label] = label
        feats = []
        prev = 0
        for tok in tokens:
            col = tok.start() + 1
            part = tok.group().split(":")
            if len(part) != 2:
                raise ParseError("expected idx:val, got %r" % tok.group(),
                                 lineno, col)
            try:
                idx = int(part[0])
            except ValueError:
                raise ParseError("bad index %r" % part[0], lineno, col) \
                    from None
            try:
                val = float(part[1])
            except ValueError:
                raise ParseError("bad value %r" % part[1],
                                 lineno, col + len(part[0]) + 1) from None
            if idx < 1:
                raise ParseError("index %d < 1" % idx, lineno, col)
            if idx <= prev:
                raise ParseError(
                    "index %d not increasing (previous %d)" % (idx, prev),
                    lineno, col)
            prev = idx
            feats.append((idx, val))
            dim = max(dim, idx)
        rows.append((label, feats))
    remapped = {k: v for k, v in label_map.items() if k != v}
    if remapped:
        warnings.warn("labels %s mapped by sign to +/-1"
                      % sorted(remapped), stacklevel=2)
    return SparseDataset(rows=rows, dim=dim,
                         label_map=label_map if remapped else None)


def serialize_libsvm(dataset):
    """Datasets round-trip: parse(serialize(parse(text))) == parse(text)."""
    out = []
    for label, feats in dataset.rows:
        parts = ["%+g" % label]
        parts.extend("%d:%s" % (idx, repr(val)) for idx, val in feats)
        out.append(" ".join(parts))
    return "\n".join(out) + ("\n" if out else "")


def dataset_to_matrix(dataset, dim=None):
    """CSR matrix of feature rows plus the label vector."""
    if dim is None:
        dim = dataset.dim
    elif dim < dataset.dim:
        raise ValueError("dim %d below max feature index %d"
                         % (dim, dataset.dim))
    ri, ci, data = [], [], []
    for i, (_, feats) in enumerate(dataset.rows):
        for idx, val in feats:
            ri.append(i)
            ci.append(idx - 1)
            data.append(val)
    A = sp.csr_matrix((data, (ri, ci)),
                      shape=(len(dataset.rows), dim), dtype=float)
    b = np.array([label for label, _ in dataset.rows], dtype=float)
    return A, b


def make_hinge_synthetic(n_rows, dim, seed, density=0.3):
    """Separable-ish random sparse dataset with +/-1 labels."""
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(dim)
    rows = []
    for _ in range(n_rows):
        nnz = max(1, rng.binomial(dim, density))
        idx = np.sort(rng.choice(dim, size=nnz, replace=False)) + 1
        val = rng.standard_normal(nnz)
        a = np.zeros(dim)
        a[idx - 1] = val
        score = a @ w + 0.1 * rng.standard_normal()
        label = 1.0 if score >= 0 else -1.0
        rows.append((label, list(zip(idx.tolist(), val.tolist()))))
    return SparseDataset(rows=rows, dim=dim)
