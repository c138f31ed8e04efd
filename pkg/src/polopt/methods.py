"""Query-proposing methods and the geometric politician.

A method proposes the next query point from the answered history; the
politician answers each query with a point that is never worse.  The
geometric politician localizes minimizers inside an intersection of
strong-convexity balls, recenters with the volumetric barrier, and answers
with an exact line search through the query and the center.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .barriers import interior_floor, newton_center
from .engine import Answer, StationaryPoint
from .region import (MARGIN_GAP_TOL, RegionInfeasibleError,
                     largest_feasible_alpha_arrays, margin_arrays,
                     region_arrays)
from .subspace import SubspaceBasis

__all__ = [
    "LineSearchResult",
    "LineSearchDivergenceError",
    "exact_line_search",
    "SDMethod",
    "CGMethod",
    "BFGSMethod",
    "GKMethod",
    "GKState",
    "EmptyMethod",
    "GeometricPolitician",
]

# Expansion cap for bracketing: beyond t = 2^60 the line is declared
# unbounded below.
BRACKET_CAP = 2.0 ** 60
# Relative width at which the 1-d minimization stops.
LS_REL_TOL = 4.0 * np.finfo(float).eps
_GOLD = 0.3819660112501051


class LineSearchDivergenceError(RuntimeError):
    """Objective decreases monotonically through the expansion cap."""


@dataclass
class LineSearchResult:
    t: float
    point: np.ndarray
    value: float
    value_at_a: float
    value_at_b: float
    evals: int


def _brent(phi, bracket, max_iter=120):
    """Golden-section search with parabolic acceleration on a bracket."""
    (ax, fa), (bx, fb), (cx, fc) = bracket
    a, b = (ax, cx) if ax < cx else (cx, ax)
    x = w = v = bx
    fx = fw = fv = fb
    d = e = 0.0
    for _ in range(max_iter):
        xm = 0.5 * (a + b)
        tol1 = LS_REL_TOL * abs(x) + 1e-25
        tol2 = 2.0 * tol1
        if abs(x - xm) <= tol2 - 0.5 * (b - a):
            break
        use_golden = True
        if abs(e) > tol1:
            # Parabola through (x, w, v); exact for quadratic objectives.
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            etemp = e
            e = d
            if (abs(p) < abs(0.5 * q * etemp) and p > q * (a - x)
                    and p < q * (b - x)):
                d = p / q
                u = x + d
                if (u - a) < tol2 or (b - u) < tol2:
                    d = math.copysign(tol1, xm - x)
                use_golden = False
        if use_golden:
            e = (a - x) if x >= xm else (b - x)
            d = _GOLD * e
        u = x + d if abs(d) >= tol1 else x + math.copysign(tol1, d)
        fu = phi(u)
        if fu <= fx:
            if u >= x:
                a = x
            else:
                b = x
            v, w, x = w, x, u
            fv, fw, fx = fw, fx, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, w = w, u
                fv, fw = fw, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
    return x, fx


def exact_line_search(value_fn, a, b):
    """Minimize f over the full line {a + t (b - a), t real}.

    Brackets the minimum by doubling from [0, 1] in whichever direction
    descends, then shrinks with golden-section/parabolic steps until the
    interval width is a few machine epsilons relative.  Returns the best
    point actually evaluated, so the result is never worse than either
    anchor.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    direction = b - a
    evals = [0]
    cache = {}

    def phi(t):
        if t not in cache:
            cache[t] = float(value_fn(a + t * direction))
            evals[0] += 1
        return cache[t]

    if not np.any(direction):
        f0 = phi(0.0)
        return LineSearchResult(t=0.0, point=a.copy(), value=f0,
                                value_at_a=f0, value_at_b=f0, evals=evals[0])

    f0 = phi(0.0)
    f1 = phi(1.0)
    if f1 <= f0:
        lo, mid = 0.0, 1.0
        t = 2.0
        while phi(t) < phi(mid):
            lo, mid = mid, t
            t *= 2.0
            if t > BRACKET_CAP:
                raise LineSearchDivergenceError(
                    "line search: objective decreases beyond t=2^60")
        bracket = ((lo, phi(lo)), (mid, phi(mid)), (t, phi(t)))
    elif phi(-1.0) >= f0:
        bracket = ((-1.0, phi(-1.0)), (0.0, f0), (1.0, f1))
    else:
        lo, mid = 0.0, -1.0
        t = -2.0
        while phi(t) < phi(mid):
            lo, mid = mid, t
            t *= 2.0
            if t < -BRACKET_CAP:
                raise LineSearchDivergenceError(
                    "line search: objective decreases beyond t=-2^60")
        bracket = ((t, phi(t)), (mid, phi(mid)), (lo, phi(lo)))
    _brent(phi, bracket)
    t_best = min(cache, key=lambda tt: (cache[tt], abs(tt)))
    return LineSearchResult(t=t_best, point=a + t_best * direction,
                            value=cache[t_best], value_at_a=f0,
                            value_at_b=f1, evals=evals[0])


def _tip(history):
    rec = history.records[-1]
    if not np.any(rec.gradient):
        raise StationaryPoint
    return rec


class SDMethod:
    """Steepest descent with exact line search."""

    name = "sd"

    def reset(self, counter, x0):
        self._c = counter
        self._x0 = np.array(x0, dtype=float)

    def propose(self, history):
        if len(history) == 0:
            return self._x0.copy()
        rec = _tip(history)
        ls = exact_line_search(self._c.value, rec.point,
                               rec.point - rec.gradient)
        return ls.point


class CGMethod:
    """Nonlinear conjugate gradient, Polak-Ribiere+ with descent restart."""

    name = "cg"

    def reset(self, counter, x0):
        self._c = counter
        self._x0 = np.array(x0, dtype=float)
        self._g_prev = None
        self._d_prev = None
        self.restarts = 0

    def propose(self, history):
        if len(history) == 0:
            return self._x0.copy()
        rec = _tip(history)
        g = rec.gradient
        if self._g_prev is None:
            d = -g
        else:
            beta = max(0.0, float(g @ (g - self._g_prev))
                       / float(self._g_prev @ self._g_prev))
            d = -g + beta * self._d_prev
            if float(d @ g) >= 0.0:
                d = -g
                self.restarts += 1
        self._g_prev = g
        self._d_prev = d
        ls = exact_line_search(self._c.value, rec.point, rec.point + d)
        return ls.point


class BFGSMethod:
    """Full-memory BFGS via the two-loop recursion, exact line search."""

    name = "bfgs"

    # Pairs with curvature below this relative threshold are discarded.
    CURVATURE_RTOL = 1e-14

    def reset(self, counter, x0):
        self._c = counter
        self._x0 = np.array(x0, dtype=float)
        self._pairs = []
        self._cursor = 1
        self.rejected = 0

    def _sync(self, history):
        while self._cursor < len(history):
            prev = history.records[self._cursor - 1]
            cur = history.records[self._cursor]
            s = cur.point - prev.point
            y = cur.gradient - prev.gradient
            sy = float(s @ y)
            if sy > self.CURVATURE_RTOL * np.linalg.norm(s) * np.linalg.norm(y):
                self._pairs.append((s, y, 1.0 / sy))
            else:
                self.rejected += 1
            self._cursor += 1

    def direction(self, g):
        """Two-loop recursion applied to -g over the stored pairs."""
        if not self._pairs:
            return -g
        alphas = []
        q = g.copy()
        for s, y, rho in reversed(self._pairs):
            a = rho * float(s @ q)
            alphas.append(a)
            q -= a * y
        s_l, y_l, _ = self._pairs[-1]
        q *= float(s_l @ y_l) / float(y_l @ y_l)
        for (s, y, rho), a in zip(self._pairs, reversed(alphas)):
            b = rho * float(y @ q)
            q += (a - b) * s
        return -q

    def propose(self, history):
        if len(history) == 0:
            return self._x0.copy()
        rec = _tip(history)
        self._sync(history)
        p = self.direction(rec.gradient)
        if float(p @ rec.gradient) >= 0.0:
            p = -rec.gradient
        ls = exact_line_search(self._c.value, rec.point, rec.point + p)
        return ls.point


@dataclass
class GKState:
    gamma: float = math.nan
    alpha: float = math.nan
    v: np.ndarray | None = None
    x: np.ndarray | None = None
    fx: float = math.nan
    initialized: bool = False
    cursor: int = 0
    oracle_mode: bool = True
    gammas: list = field(default_factory=list)
    betas: list = field(default_factory=list)
    alphas: list = field(default_factory=list)
    star_events: int = 0
    clamp_events: int = 0
    range_clips: int = 0


class GKMethod:
    """Adaptive accelerated gradient descent (Gonzaga-Karas scheme).

    Keeps a momentum point v and a quadratic-model curvature gamma; the
    strong-convexity estimate alpha is learned on the fly from observed
    line-search decreases.  Queries are exact line-search minima over the
    line through the latest gradient-step point and v.  The extra
    alpha <- gamma/2 reset applies only when the politician is the plain
    oracle, where gamma >= alpha is guaranteed.
    """

    def __init__(self, oracle_mode=True):
        self.name = "gk"
        self.oracle_mode = oracle_mode
        self.state = GKState(oracle_mode=oracle_mode)

    def reset(self, counter, x0):
        self._c = counter
        self._x0 = np.array(x0, dtype=float)
        self.state = GKState(oracle_mode=self.oracle_mode)

    def _init_state(self, rec):
        s = self.state
        g = rec.gradient
        ls = exact_line_search(self._c.value, rec.point, rec.point - g)
        delta = rec.value - ls.value
        gg = float(g @ g)
        # Preliminary steepest-descent step seeds alpha the same way the
        # in-loop update does (the /20 rule).
        s.alpha = gg / (20.0 * delta) if delta > 0.0 else 1.0
        s.gamma = 2.0 * s.alpha
        s.v = rec.point.copy()
        s.x = ls.point
        s.fx = ls.value
        s.initialized = True
        s.gammas.append(s.gamma)
        s.alphas.append(s.alpha)

    def _absorb(self, rec):
        """One loop body: gradient step from the answer, model update."""
        s = self.state
        g = rec.gradient
        gg = float(g @ g)
        ls = exact_line_search(self._c.value, rec.point, rec.point - g)
        x_next, f_next = ls.point, ls.value
        if s.oracle_mode and s.alpha >= s.gamma / 1.02:           # (*)
            s.alpha = s.gamma / 2.0
            s.star_events += 1
        delta = rec.value - f_next
        if delta > 0.0 and s.alpha >= gg / (2.0 * delta):
            s.alpha = gg / (20.0 * delta)
        dv = s.v - rec.point
        G = s.gamma * (0.5 * s.alpha * float(dv @ dv) + float(g @ dv))
        A = G + 0.5 * gg + (s.alpha - s.gamma) * (s.fx - rec.value)
        B = ((s.alpha - s.gamma) * (f_next - s.fx)
             - s.gamma * (rec.value - s.fx) - G)
        C = s.gamma * (f_next - s.fx)
        disc = B * B - 4.0 * A * C
        if disc < 0.0:
            disc = 0.0
            s.clamp_events += 1
        root = math.sqrt(disc)
        if A != 0.0:
            beta = (-B + root) / (2.0 * A)
        elif B != 0.0:
            beta = -C / B
        else:
            beta = 0.0
        if beta > 1.0 or beta < 0.0:
            s.range_clips += 1
            beta = min(max(beta, 0.0), 1.0)
        gamma_new = (1.0 - beta) * s.gamma + beta * s.alpha
        s.v = ((1.0 - beta) * s.gamma * s.v
               + beta * (s.alpha * rec.point - g)) / gamma_new
        s.gamma = gamma_new
        s.x = x_next
        s.fx = f_next
        s.gammas.append(s.gamma)
        s.betas.append(beta)
        s.alphas.append(s.alpha)

    def propose(self, history):
        if len(history) == 0:
            return self._x0.copy()
        s = self.state
        if not s.initialized:
            rec0 = history.records[0]
            if not np.any(rec0.gradient):
                raise StationaryPoint
            self._init_state(rec0)
            s.cursor = 1
        for rec in history.records[s.cursor:]:
            if not np.any(rec.gradient):
                raise StationaryPoint
            self._absorb(rec)
        s.cursor = len(history)
        if np.array_equal(s.x, s.v):
            return s.x.copy()
        ls = exact_line_search(self._c.value, s.x, s.v)
        return ls.point


class EmptyMethod:
    """Proposes the previous answer; all progress comes from the politician."""

    name = "empty"

    def reset(self, counter, x0):
        self._x0 = np.array(x0, dtype=float)

    def propose(self, history):
        if len(history) == 0:
            return self._x0.copy()
        return history.records[-1].point.copy()


@dataclass
class PoliticianStats:
    restarts: int = 0
    fallbacks: int = 0
    margin_calls: int = 0
    witness_answers: int = 0
    fail_reasons: list = field(default_factory=list)
    # One entry per centering: (incremental_update, iterations, converged).
    newton: list = field(default_factory=list)


class GeometricPolitician:
    """Ball-intersection localization politician.

    Maintains, in the affine span of the answered points and gradients, the
    intersection of the strong-convexity balls of every record at the
    current alpha, with fval the best answered value.  Each answer line
    searches through the query and the region's volumetric center.  When
    the region empties, alpha drops to a quarter of the largest feasible
    value.  alpha starts at infinity, where the region is the best answered
    point itself.
    """

    def __init__(self, alpha0=math.inf, center_kind="volumetric"):
        self.name = "geometric"
        self.alpha0 = float(alpha0)
        self.center_kind = center_kind

    def reset(self, counter):
        self._c = counter
        self.alpha = self.alpha0
        self._basis = None
        self._points = []       # full-space answered points
        self._grads = []        # full-space gradients
        self._Y = None          # reduced answered points, one row each
        self._G = None          # reduced gradients
        self._V = None          # answered values
        self._k = 0
        self._fval = math.inf
        self._best = 0
        self._best_point = None
        self._center_full = None
        self._dual_w = None
        self._cursor = 0
        self._gen = 0
        self._restarts_at_entry = 0
        self._last_query = None
        self._last_answer = None
        self.stats = PoliticianStats()

    # -- history bookkeeping ------------------------------------------------

    def _pad(self, row, m):
        if row.shape[0] == m:
            return row
        out = np.zeros(m)
        out[:row.shape[0]] = row
        return out

    def _rebuild_reduced(self):
        """Recompute all cached coordinates against the current basis."""
        basis = self._basis
        Qt = basis.Q.T
        k = self._k
        Y = np.zeros((k, basis.m))
        G = np.zeros((k, basis.m))
        for i in range(k):
            Y[i] = Qt @ (self._points[i] - basis.base)
            G[i] = Qt @ self._grads[i]
        self._Y, self._G = Y, G

    def _absorb(self, rec):
        if self._basis is None:
            self._basis = SubspaceBasis(rec.point)
            self._Y = np.zeros((0, 0))
            self._G = np.zeros((0, 0))
            self._V = np.zeros(0)
        basis = self._basis
        p = np.array(rec.point, dtype=float)
        g = np.array(rec.gradient, dtype=float)
        self._points.append(p)
        self._grads.append(g)
        cp, _ = basis.insert(p - basis.base)
        cg, _ = basis.insert(g)
        self._V = np.append(self._V, rec.value)
        if rec.value < self._fval:
            self._fval = rec.value
            self._best = self._k
            self._best_point = p.copy()
        self._k += 1
        if basis.generation != self._gen:
            # Existing columns were rebuilt, so the incremental coordinates
            # (including cp/cg just returned) are stale.
            self._gen = basis.generation
            self._rebuild_reduced()
            return
        m = basis.m
        k = self._k - 1
        Y = np.zeros((k + 1, m))
        Y[:k, :self._Y.shape[1]] = self._Y
        Y[k] = self._pad(cp, m)
        G = np.zeros((k + 1, m))
        G[:k, :self._G.shape[1]] = self._G
        G[k] = self._pad(cg, m)
        self._Y, self._G = Y, G

    def _absorb_own(self, rec):
        self._absorb(rec)
        self._cursor += 1

    def _sync(self, history):
        for rec in history.records[self._cursor:]:
            self._absorb(rec)
            self._cursor += 1

    # -- alpha adaptation ---------------------------------------------------

    def _alpha_cap(self):
        """Finite upper seed for the alpha search when alpha is infinite."""
        b = self._best
        d = self._Y - self._Y[b]
        dist = np.sqrt(np.einsum("ij,ij->i", d, d))
        gn = np.sqrt(np.einsum("ij,ij->i", self._G, self._G))
        mask = dist > 0.0
        if not np.any(mask):
            return 1.0
        caps = 2.0 * (gn[mask] + gn[b]) / dist[mask]
        return 4.0 * float(np.min(caps))

    def _shrink_alpha(self):
        hi = self.alpha if math.isfinite(self.alpha) else self._alpha_cap()
        bar = largest_feasible_alpha_arrays(self._Y, self._V, self._G,
                                            self._fval, hi)
        self.alpha = bar / 4.0
        self.stats.restarts += 1
        if not self.alpha > 1e-306:
            raise RegionInfeasibleError("alpha underflowed; region data is "
                                        "at the noise floor")

    # -- answering ----------------------------------------------------------

    def _fallback_answer(self, x):
        """Degenerate-region escape: best-so-far point or the query itself."""
        self.stats.fallbacks += 1
        fx = self._c.value(x)
        if self._fval <= fx:
            rec = self._c.record(self._best_point)
        else:
            rec = self._c.record(x)
        self._note_progress(x, rec.point)
        self._absorb_own(rec)
        return Answer(record=rec, query_value=fx, alpha=self.alpha)

    def _locate_center(self):
        """Region + center for the current records; None on degeneracy."""
        basis = self._basis
        for _ in range(64):
            if math.isinf(self.alpha):
                if np.all(self._Y == self._Y[self._best]):
                    return self._Y[self._best].copy()
                try:
                    self._shrink_alpha()
                except RegionInfeasibleError:
                    self.stats.fail_reasons.append("alpha_underflow")
                    return None
                continue
            try:
                reg = region_arrays(self._Y, self._V, self._G, self.alpha,
                                    self._fval)
            except RegionInfeasibleError:
                try:
                    self._shrink_alpha()
                except RegionInfeasibleError:
                    self.stats.fail_reasons.append("alpha_underflow")
                    return None
                continue
            floor = interior_floor(reg)
            start = None
            warm_red = None
            if self._center_full is not None:
                warm_red = basis.Q.T @ (self._center_full - basis.base)
                if np.all(reg.slacks(warm_red) > floor):
                    start = warm_red
            if start is None:
                # The best answered point lies on its own ball's boundary
                # and (for alpha below its containment threshold) strictly
                # inside all others, so stepping from it toward its own
                # ball's center gives an interior point without any solve.
                yb = self._Y[self._best]
                target = yb - self._G[self._best] / self.alpha
                t = 0.5
                for _ in range(25):
                    z = yb + t * (target - yb)
                    if np.all(reg.slacks(z) > floor):
                        start = z
                        break
                    t *= 0.5
            if start is None and warm_red is not None:
                # Pull the stale center toward the newest ball's center.
                target = reg.centers[-1]
                t = 0.5
                for _ in range(30):
                    z = warm_red + t * (target - warm_red)
                    if np.all(reg.slacks(z) > floor):
                        start = z
                        break
                    t = 0.5 * (1.0 + t)
            if start is None:
                self.stats.margin_calls += 1
                warm = self._dual_w
                if warm is not None and warm.shape[0] < self._k:
                    warm = np.append(warm, np.zeros(self._k - warm.shape[0]))
                mr = margin_arrays(self._Y, self._V, self._G, self.alpha,
                                   self._fval, warm=warm, max_iter=450)
                self._dual_w = mr.weights
                # The dual value certifies emptiness even when the solve did
                # not close its gap; a converged positive margin does too.
                # Margins inside the solver's resolution stay ambiguous and
                # fall through to the witness test.
                certified_empty = (mr.margin - mr.gap > 0.0
                                   or (mr.converged
                                       and mr.margin > MARGIN_GAP_TOL * mr.scale))
                if certified_empty:
                    try:
                        self._shrink_alpha()
                    except RegionInfeasibleError:
                        self.stats.fail_reasons.append("alpha_underflow")
                        return None
                    continue
                if not np.all(np.isfinite(mr.witness)):
                    self.stats.fail_reasons.append(
                        "witness margin=%.3e gap=%.3e conv=%s"
                        % (mr.margin, mr.gap, mr.converged))
                    return None
                if np.all(reg.slacks(mr.witness) > floor):
                    start = mr.witness
                else:
                    # Ambiguous sliver: no strictly interior point is
                    # resolvable at this precision, but the witness still
                    # pins where the region sits, and the answering line
                    # only needs a second endpoint.
                    self.stats.witness_answers += 1
                    self._center_full = basis.lift(mr.witness)
                    return mr.witness
            alpha_stable = self.stats.restarts == self._restarts_at_entry
            res = newton_center(reg, kind=self.center_kind, start=start)
            self.stats.newton.append((alpha_stable and self._k > 1,
                                      res.iterations, res.converged))
            # On sliver-thin regions the decrement bottoms out above the
            # strict tolerance; the stalled point is still interior (the
            # backtracking never leaves the region) and nearly central,
            # which is all the answering line needs.
            if not res.converged:
                self.stats.fail_reasons.append(
                    "newton iters=%d dec=%.3e" % (res.iterations,
                                                  res.final_decrement))
            self._center_full = basis.lift(res.point)
            return res.point
        self.stats.fail_reasons.append("restart_loop_exhausted")
        return None

    def answer(self, x, history):
        self._sync(history)
        x = np.asarray(x, dtype=float)
        if self._k == 0:
            rec = self._c.record(x)
            self._absorb_own(rec)
            return Answer(record=rec, query_value=rec.value, alpha=self.alpha)
        self._restarts_at_entry = self.stats.restarts
        center_red = self._locate_center()
        if center_red is None:
            return self._fallback_answer(x)
        c_full = self._basis.lift(center_red)
        if not np.any(c_full - x):
            # Query sits exactly on the center (the alpha=inf point region,
            # typically); descend along the best gradient instead so the
            # answer still injects fresh information.
            c_full = x - self._grads[self._best]
        ls = exact_line_search(self._c.value, x, c_full)
        rec = self._c.record(ls.point)
        self._note_progress(x, rec.point)
        self._absorb_own(rec)
        return Answer(record=rec, query_value=ls.value_at_a, alpha=self.alpha)

    def _note_progress(self, query, answered):
        """Quarter alpha when the run reaches a deterministic fixed point.

        If this query and answer repeat the previous pair exactly, the next
        call would recur identically: the records gain nothing new and the
        region cannot change.  Only a smaller alpha (fatter balls, a fresh
        center) can break the loop.
        """
        if (self._last_query is not None
                and np.array_equal(query, self._last_query)
                and np.array_equal(answered, self._last_answer)
                and math.isfinite(self.alpha) and self.alpha > 1e-306):
            self.alpha /= 4.0
        self._last_query = np.array(query)
        self._last_answer = np.array(answered)
