"""Localization regions built from strong-convexity lower bounds.

Each answered record (y, f(y), g) of an alpha-strongly-convex function
confines every point z with f(z) <= fval to the ball

    || z - (y - g/alpha) ||^2  <=  ||g||^2/alpha^2 - (2/alpha)(f(y) - fval).

The region is the intersection of these balls over the history.  Emptiness
is decided through the equivalent constraints

    h_i(z) = f(y_i) + <g_i, z - y_i> + (alpha/2)||z - y_i||^2 - fval <= 0,

whose min-max has a concave quadratic dual over the probability simplex.
"""

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Ball",
    "BallRegion",
    "MarginResult",
    "ball_from_record",
    "build_region",
    "feasibility_margin",
    "largest_feasible_alpha",
    "interior_point",
    "RegionInfeasibleError",
]

# Duality gap at which the min-max feasibility value is accepted.
MARGIN_GAP_TOL = 1e-9
# Relative width of the bisection bracket for the largest feasible alpha.
ALPHA_BISECT_RTOL = 1e-2


class RegionInfeasibleError(RuntimeError):
    """Requested region is empty; the caller should shrink alpha."""


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius_sq: float


def ball_from_record(record, alpha, fval):
    """Lower-bound ball of one record; None when the ball is empty."""
    g = np.asarray(record.gradient, dtype=float)
    y = np.asarray(record.point, dtype=float)
    gnorm_sq = float(g @ g)
    radius_sq = gnorm_sq / alpha ** 2 - (2.0 / alpha) * (record.value - fval)
    if radius_sq < 0.0:
        return None
    return Ball(center=y - g / alpha, radius_sq=radius_sq)


class BallRegion:
    """Intersection of lower-bound balls at a fixed alpha and fval.

    Stores the generating records (points Y, values V, gradients G) next to
    the derived centers and radii: slacks evaluated through the h_i form
    avoid the cancellation of two O(1/alpha^2) terms when alpha is small.
    """

    def __init__(self, centers, radii_sq, alpha, fval,
                 points=None, values=None, gradients=None):
        self.centers = np.atleast_2d(np.asarray(centers, dtype=float))
        self.radii_sq = np.asarray(radii_sq, dtype=float)
        self.alpha = float(alpha)
        self.fval = float(fval)
        self.points = None if points is None else np.atleast_2d(points)
        self.values = None if values is None else np.asarray(values, float)
        self.gradients = (None if gradients is None
                          else np.atleast_2d(gradients))

    @property
    def k(self):
        return self.centers.shape[0]

    @property
    def dim(self):
        return self.centers.shape[1]

    @property
    def balls(self):
        return [Ball(c, r) for c, r in zip(self.centers, self.radii_sq)]

    def slacks(self, x):
        """r_i^2 - ||x - c_i||^2 for every ball, evaluated stably."""
        x = np.asarray(x, dtype=float)
        if self.points is not None and math.isfinite(self.alpha):
            dy = x[None, :] - self.points
            lin = self.values - self.fval + np.einsum("ij,ij->i",
                                                      self.gradients, dy)
            return -(2.0 / self.alpha) * lin - np.einsum("ij,ij->i", dy, dy)
        dc = x[None, :] - self.centers
        return self.radii_sq - np.einsum("ij,ij->i", dc, dc)

    def contains(self, x, slack_tol=0.0):
        return bool(np.all(self.slacks(x) >= -slack_tol))


@dataclass
class MarginResult:
    margin: float
    witness: np.ndarray
    weights: np.ndarray
    gap: float
    converged: bool
    # Magnitude of the constraint data; margins within roughly 1e-9 of zero
    # times this are numerically indistinguishable from a degenerate region.
    scale: float = 1.0


def _project_simplex(v):
    """Euclidean projection onto the probability simplex."""
    k = v.shape[0]
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    idx = np.nonzero(u * np.arange(1, k + 1) > (css - 1.0))[0]
    rho = idx[-1]
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _face_polish(coef, B, c, lam, add_tol):
    """Active-set refinement of the simplex dual; exact on its final face.

    Solves the equality-constrained KKT system on the current support,
    dropping negative weights and admitting violated constraints until the
    multiplier conditions hold.  The quadratic is concave, so the face
    solution is a one-shot linear solve.
    """
    k = c.shape[0]
    support = np.flatnonzero(lam > 1e-10)
    if support.size == 0:
        support = np.array([int(np.argmax(c))])
    for _ in range(3 * k + 10):
        Bs = B[support]
        s = support.size
        kkt = np.empty((s + 1, s + 1))
        kkt[:s, :s] = (Bs @ Bs.T) / coef
        kkt[:s, s] = 1.0
        kkt[s, :s] = 1.0
        kkt[s, s] = 0.0
        rhs = np.append(c[support], 1.0)
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        lam_s, nu = sol[:s], sol[s]
        if np.min(lam_s) < -1e-12:
            if s == 1:
                break
            support = np.delete(support, int(np.argmin(lam_s)))
            continue
        lam = np.zeros(k)
        lam[support] = np.maximum(lam_s, 0.0)
        # Multiplier feasibility for the inactive constraints.
        slack = c - B @ (B.T @ lam) / coef - nu
        slack[support] = -np.inf
        j = int(np.argmax(slack))
        if slack[j] > add_tol:
            support = np.sort(np.append(support, j))
            continue
        break
    return lam


def _min_quadratic_max_affine(coef, B, c, warm=None, need="value",
                              gap_tol=None, max_iter=5000):
    """min_z (coef/2)||z||^2 + max_i (B_i z + c_i) via the simplex dual.

    The dual max_{lam in simplex} c'lam - ||B'lam||^2/(2 coef) is solved by
    accelerated projected gradient ascent.  With need="sign" the loop exits
    as soon as the sign of the min is certified by either the primal upper
    bound or the dual lower bound.
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    c = np.asarray(c, dtype=float)
    k = B.shape[0]
    scale = max(1.0, float(np.max(np.abs(c))))
    if gap_tol is None:
        gap_tol = MARGIN_GAP_TOL * scale

    def primal_dual(lam):
        Btl = B.T @ lam
        z = -Btl / coef
        quad = 0.5 * coef * float(z @ z)
        p = quad + float(np.max(B @ z + c))
        g = float(c @ lam) - quad
        return p, g, z

    if k == 1:
        lam = np.ones(1)
        p, g, z = primal_dual(lam)
        return MarginResult(margin=p, witness=z, weights=lam, gap=0.0,
                            converged=True, scale=scale)

    L = float(np.linalg.norm(B, 2)) ** 2 / coef
    if L <= 1e-300:
        # All linear parts vanish: the dual is linear in lam.
        i = int(np.argmax(c))
        lam = np.zeros(k)
        lam[i] = 1.0
        p, g, z = primal_dual(lam)
        return MarginResult(margin=p, witness=z, weights=lam, gap=0.0,
                            converged=True, scale=scale)

    if warm is not None and warm.shape[0] == k and np.all(warm >= 0):
        lam = _project_simplex(np.asarray(warm, dtype=float))
    else:
        lam = np.full(k, 1.0 / k)
    step = 1.0 / L
    w = lam.copy()
    t_acc = 1.0
    p, g, z = primal_dual(lam)
    best = MarginResult(margin=p, witness=z, weights=lam.copy(),
                        gap=p - g, converged=False, scale=scale)
    g_prev = -math.inf
    for _ in range(max_iter):
        grad = c - B @ (B.T @ w) / coef
        if not np.all(np.isfinite(grad)):
            # Data is out of float range (absurd coef); report best so far
            # unconverged rather than iterating on garbage.
            return best
        lam_new = _project_simplex(w + step * grad)
        p, g, z = primal_dual(lam_new)
        if p < best.margin or not math.isfinite(best.margin):
            best = MarginResult(margin=p, witness=z, weights=lam_new,
                                gap=p - g, converged=False, scale=scale)
        if need == "sign" and (p <= 0.0 or g > 0.0):
            return MarginResult(margin=p, witness=z, weights=lam_new,
                                gap=p - g, converged=True, scale=scale)
        if p - g <= gap_tol:
            return MarginResult(margin=p, witness=z, weights=lam_new,
                                gap=p - g, converged=True, scale=scale)
        if g < g_prev:
            # Momentum restart keeps the ascent monotone enough.
            t_acc = 1.0
            w = lam_new.copy()
        else:
            t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_acc ** 2))
            w = lam_new + ((t_acc - 1.0) / t_next) * (lam_new - lam)
            t_acc = t_next
        g_prev = g
        lam = lam_new
    # Timed out: the first-order ascent has localized the support, so an
    # exact face solve usually closes the remaining gap outright.
    lam_p = _face_polish(coef, B, c, best.weights,
                         1e-12 * max(1.0, scale / max(coef, 1e-300)))
    if np.all(np.isfinite(lam_p)):
        lam_p = _project_simplex(lam_p)
        p, g, z = primal_dual(lam_p)
        if math.isfinite(p) and p - g < best.gap:
            return MarginResult(margin=p, witness=z, weights=lam_p,
                                gap=p - g, converged=p - g <= gap_tol,
                                scale=scale)
    return best


def _records_arrays(records):
    Y = np.array([np.asarray(r.point, dtype=float) for r in records])
    V = np.array([float(r.value) for r in records])
    G = np.array([np.asarray(r.gradient, dtype=float) for r in records])
    return Y, V, G


def margin_arrays(Y, V, G, alpha, fval, warm=None, need="value",
                  gap_tol=None, max_iter=5000):
    """Feasibility min-max over arrays of records (points/values/grads)."""
    # h_i(z) = (alpha/2)||z||^2 + <b_i, z> + c_i with the pieces below.
    B = G - alpha * Y
    c = (V - fval - np.einsum("ij,ij->i", G, Y)
         + 0.5 * alpha * np.einsum("ij,ij->i", Y, Y))
    return _min_quadratic_max_affine(alpha, B, c, warm=warm, need=need,
                                     gap_tol=gap_tol, max_iter=max_iter)


def feasibility_margin(records, alpha, fval, warm=None, need="value"):
    """min_z max_i h_i(z); <= 0 exactly when the region is nonempty."""
    Y, V, G = _records_arrays(records)
    return margin_arrays(Y, V, G, alpha, fval, warm=warm, need=need)


def _best_point_feasible(Y, V, G, alpha, fval):
    """Cheap certificate: does the best recorded point satisfy all h_i?"""
    b = int(np.argmin(V))
    dy = Y[b][None, :] - Y
    h = (V - fval + np.einsum("ij,ij->i", G, dy)
         + 0.5 * alpha * np.einsum("ij,ij->i", dy, dy))
    return bool(np.all(h <= 0.0))


def _containment_seed(Y, V, G, fval):
    """Largest alpha at which every ball still contains the best point."""
    b = int(np.argmin(V))
    dy = Y[b][None, :] - Y
    dist_sq = np.einsum("ij,ij->i", dy, dy)
    numer = 2.0 * (fval - V - np.einsum("ij,ij->i", G, dy))
    mask = dist_sq > 0.0
    if not np.any(mask):
        return None
    vals = numer[mask] / dist_sq[mask]
    seed = float(np.min(vals))
    return seed if seed > 0.0 else None


def largest_feasible_alpha_arrays(Y, V, G, fval, alpha_hi,
                                  rtol=ALPHA_BISECT_RTOL):
    def empty_at(a):
        if _best_point_feasible(Y, V, G, a, fval):
            return False
        mr = margin_arrays(Y, V, G, a, fval, need="sign")
        # Only a converged dual certificate may declare emptiness; an
        # undecided solve at the noise floor must not shrink alpha further.
        return mr.converged and mr.margin > 0.0

    if not empty_at(alpha_hi):
        return alpha_hi
    seed = _containment_seed(Y, V, G, fval)
    lo = min(0.5 * alpha_hi, seed * (1.0 - 1e-9)) if seed else 0.5 * alpha_hi
    guard = 0
    while empty_at(lo):
        lo *= 0.5
        guard += 1
        if guard > 2000:
            raise RegionInfeasibleError(
                "no feasible alpha found down to %.3e" % lo)
    hi = alpha_hi
    # Geometric bisection: the target is relative width, not absolute.
    while hi > lo * (1.0 + rtol):
        mid = math.sqrt(lo * hi)
        if empty_at(mid):
            hi = mid
        else:
            lo = mid
    return lo


def largest_feasible_alpha(records, fval, alpha_hi, rtol=ALPHA_BISECT_RTOL):
    """Largest alpha (up to relative width rtol) with a nonempty region."""
    Y, V, G = _records_arrays(records)
    return largest_feasible_alpha_arrays(Y, V, G, fval, alpha_hi, rtol=rtol)


def region_arrays(Y, V, G, alpha, fval):
    if not math.isfinite(alpha):
        if Y.shape[0] == 1 or np.all(Y == Y[0]):
            return BallRegion(Y[:1], np.zeros(1), alpha, fval,
                              points=Y[:1], values=V[:1], gradients=G[:1])
        raise RegionInfeasibleError(
            "alpha=inf region is empty for distinct records")
    radii_sq = (np.einsum("ij,ij->i", G, G) / alpha ** 2
                - (2.0 / alpha) * (V - fval))
    if np.any(radii_sq < 0.0):
        i = int(np.argmin(radii_sq))
        raise RegionInfeasibleError(
            "ball %d is empty at alpha=%.6g; adapt alpha" % (i, alpha))
    centers = Y - G / alpha
    return BallRegion(centers, radii_sq, alpha, fval,
                      points=Y, values=V, gradients=G)


def build_region(records, alpha, fval, basis=None):
    """BallRegion of the records, optionally in reduced coordinates."""
    Y, V, G = _records_arrays(records)
    if basis is not None:
        Y = np.array([basis.reduce(y) for y in Y])
        G = np.array([basis.reduce(basis.base + g) for g in G])
    return region_arrays(Y, V, G, alpha, fval)


def interior_point(region):
    """A point with positive slack in every ball (Chebyshev-like start)."""
    if region.k == 1:
        return region.centers[0].copy()
    if region.points is not None and math.isfinite(region.alpha):
        res = margin_arrays(region.points, region.values, region.gradients,
                            region.alpha, region.fval)
        return res.witness
    # Ball form: min_z max_i (||z - c_i||^2 - r_i^2) has the same structure.
    B = -2.0 * region.centers
    c = (np.einsum("ij,ij->i", region.centers, region.centers)
         - region.radii_sq)
    res = _min_quadratic_max_affine(2.0, B, c)
    return res.witness
