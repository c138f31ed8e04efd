"""Analytic and volumetric barriers over ball intersections.

With slacks s_i(x) = r_i^2 - ||x - c_i||^2, d_i = 1/s_i and A the matrix
with rows d_i (x - c_i):

    F(x)  = -1/2 sum_i log s_i(x)
    F'    = A' 1
    F''   = H = 2 A'A + (sum_i d_i) I
    v(x)  = log det H(x)

The volumetric gradient and Hessian below are closed forms in A, H^-1 and
the leverage-style quantities sigma_i = (A H^-1 A')_ii; finite differences
of v reproduce them and serve as the fallback inside Newton when the
closed-form Hessian misbehaves numerically.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

__all__ = [
    "analytic_value",
    "analytic_grad_hess",
    "volumetric_value",
    "volumetric_grad",
    "volumetric_hess",
    "newton_center",
    "interior_floor",
    "CenterResult",
    "BarrierDomainError",
    "CenteringError",
]

# Newton stops at this decrement; 50 iterations is the hard cap.
CENTER_TOL = 1e-10
CENTER_MAX_ITER = 50
EPS = float(np.finfo(float).eps)
# Strict-interior slack floor, relative to each ball's own squared radius
# (a ball's slack can never exceed its own r^2, so a shared absolute floor
# would make the domain empty whenever radii differ by many orders).
INTERIOR_FLOOR_REL = 1e-14
# Dimensions above which the finite-difference Hessian fallback is skipped.
FD_FALLBACK_MAX_DIM = 40


def interior_floor(region):
    """Per-ball slack threshold below which a point counts as boundary."""
    return INTERIOR_FLOOR_REL * np.maximum(region.radii_sq, 0.0)


class BarrierDomainError(ValueError):
    """Barrier evaluated at a point on or outside some ball."""

    def __init__(self, message, ball_index=None):
        super().__init__(message)
        self.ball_index = ball_index


class CenteringError(RuntimeError):
    """Newton centering failed to reach the decrement tolerance."""


class _Workspace:
    """Per-call scratch shared by the barrier formulas at one point."""

    def __init__(self, region, x):
        x = np.asarray(x, dtype=float)
        s = region.slacks(x)
        if np.any(s <= 0.0):
            i = int(np.argmin(s))
            raise BarrierDomainError(
                "point is not strictly interior (slack %.3e in ball %d)"
                % (float(s[i]), i), ball_index=i)
        self.x = x
        self.s = s
        self.d = 1.0 / s
        self.diffs = x[None, :] - region.centers
        self.A = self.d[:, None] * self.diffs
        self.lam1 = float(np.sum(self.d))
        m = region.dim
        self.H = 2.0 * self.A.T @ self.A + self.lam1 * np.eye(m)
        self.cho = cho_factor(self.H)
        self._common = None

    def common(self):
        """Pieces shared by the volumetric gradient and Hessian."""
        if self._common is None:
            A, d = self.A, self.d
            m = self.H.shape[0]
            Hinv = cho_solve(self.cho, np.eye(m))
            K = A @ Hinv                      # A H^-1, rows indexed like A
            S = K @ A.T                       # A H^-1 A'
            sigma = np.einsum("ij,ij->i", K, A)
            w = A.T @ d
            z = Hinv @ w
            self._common = (Hinv, K, S, sigma, w, z)
        return self._common


def analytic_value(region, x):
    """-1/2 sum log slacks."""
    ws = _Workspace(region, x)
    return -0.5 * float(np.sum(np.log(ws.s)))


def analytic_grad_hess(region, x):
    """Gradient A'1 and Hessian 2A'A + (sum d_i) I of the log barrier."""
    ws = _Workspace(region, x)
    return ws.A.sum(axis=0), ws.H


def volumetric_value(region, x):
    ws = _Workspace(region, x)
    return _vol_value(ws)


def _vol_value(ws):
    # log det H from its Cholesky factor.
    return 2.0 * float(np.sum(np.log(np.diag(ws.cho[0]))))


def _vol_grad(ws):
    Hinv, K, S, sigma, w, z = ws.common()
    tr = float(np.trace(Hinv))
    return 2.0 * tr * w + 4.0 * z + 8.0 * ws.A.T @ sigma


def volumetric_grad(region, x):
    """Gradient of log det H, as (2 tr(H^-1) I + 4 H^-1) A'd + 8 A'sigma."""
    return _vol_grad(_Workspace(region, x))


def _vol_hess(ws):
    A, d = ws.A, ws.d
    m = ws.H.shape[0]
    Hinv, K, S, sigma, w, z = ws.common()
    tr1 = float(np.trace(Hinv))
    tr2 = float(np.sum(Hinv * Hinv))          # tr(H^-2)
    lam2 = float(np.sum(d * d))
    rho = K @ w                               # A H^-1 A'd
    tau = np.einsum("ij,ij->i", K, K)         # diag(A H^-2 A')
    h2w = Hinv @ z                            # H^-2 A'd
    ADA = A.T @ (d[:, None] * A)
    At = A.T @ tau
    wz = float(w @ z)

    V = 48.0 * A.T @ (sigma[:, None] * A)
    V -= 64.0 * A.T @ ((S * S) @ A)
    V += (8.0 * float(d @ sigma) + 2.0 * lam2 * tr1) * np.eye(m)
    V += 4.0 * lam2 * Hinv
    V += 8.0 * tr1 * ADA
    X = ADA @ Hinv
    V += 16.0 * (X + X.T)
    V -= 4.0 * tr2 * np.outer(w, w)
    V -= 8.0 * np.outer(z, z)
    V -= 8.0 * (np.outer(w, h2w) + np.outer(h2w, w))
    V -= 8.0 * wz * Hinv
    V -= 16.0 * (np.outer(At, w) + np.outer(w, At))
    X = A.T @ (rho[:, None] * K)              # A'diag(rho) A H^-1
    V -= 32.0 * (X + X.T)
    return V


def volumetric_hess(region, x):
    """Hessian of log det H (closed form; symmetric by construction)."""
    return _vol_hess(_Workspace(region, x))


def _fd_hessian_of_grad(region, x, grad_fn, h):
    m = x.shape[0]
    Hfd = np.empty((m, m))
    for j in range(m):
        e = np.zeros(m)
        e[j] = h
        Hfd[:, j] = (grad_fn(region, x + e) - grad_fn(region, x - e)) / (2 * h)
    return 0.5 * (Hfd + Hfd.T)


def _chol_shifted(H):
    """Cholesky of H, shifting by 1e-10 + |min eigenvalue| when needed."""
    try:
        return cho_factor(H), 0.0
    except LinAlgError:
        pass
    ev_min = float(np.linalg.eigvalsh(H)[0])
    mu = 1e-10 + abs(ev_min)
    m = H.shape[0]
    for _ in range(4):
        try:
            return cho_factor(H + mu * np.eye(m)), mu
        except LinAlgError:
            mu *= 10.0
    raise CenteringError("could not make the Hessian positive definite")


@dataclass
class CenterResult:
    point: np.ndarray
    value: float
    final_decrement: float
    iterations: int
    converged: bool
    decrements: list = field(default_factory=list)
    used_fd: bool = False


def newton_center(region, kind="volumetric", start=None, tol=CENTER_TOL,
                  max_iter=CENTER_MAX_ITER):
    """Damped Newton minimization of the chosen barrier over the region.

    Backtracks by halving until the trial point is strictly interior and
    the barrier does not increase (up to rounding slack).  When the
    closed-form volumetric Hessian yields no acceptable step, a
    finite-difference Hessian of the volumetric gradient is tried once.
    """
    from . import region as _region_mod

    floor = interior_floor(region)
    if not np.any(floor > 0.0):
        raise CenteringError("region has no interior (all radii zero)")
    if start is None:
        x = np.asarray(_region_mod.interior_point(region), dtype=float)
    else:
        x = np.array(start, dtype=float)
    if np.any(region.slacks(x) <= floor):
        raise CenteringError("starting point is not strictly interior")

    use_fd = False
    decrements = []
    val = None
    it = 0
    stagnant = 0
    while it < max_iter:
        it += 1
        ws = _Workspace(region, x)
        if kind == "analytic":
            val = -0.5 * float(np.sum(np.log(ws.s)))
            grad, H = ws.A.sum(axis=0), ws.H
            cho, _ = (ws.cho, 0.0)
        else:
            val = _vol_value(ws)
            grad = _vol_grad(ws)
            if use_fd:
                h = 1e-6 * (1.0 + float(np.linalg.norm(x)))
                H = _fd_hessian_of_grad(region, x, volumetric_grad, h)
            else:
                H = _vol_hess(ws)
            cho, _ = _chol_shifted(H)
        p = -cho_solve(cho, grad)
        dec = math.sqrt(max(0.0, float(-grad @ p)))
        decrements.append(dec)
        if dec <= tol:
            return CenterResult(point=x, value=val, final_decrement=dec,
                                iterations=it, converged=True,
                                decrements=decrements, used_fd=use_fd)
        # Near the center the predicted decrease dec^2/2 sinks below the
        # rounding noise of the barrier value, so a measured decrease can
        # no longer be demanded; take the pure Newton step (still interior)
        # and let quadratic convergence finish.  Each log slack contributes
        # cancellation noise of order eps * max(r_i^2, |x-c_i|^2) / s_i,
        # which dwarfs eps*|val| on sliver regions.
        cancel = float(np.sum(np.maximum(region.radii_sq,
                                         region.radii_sq - ws.s) / ws.s))
        blind = 0.5 * dec * dec <= 8.0 * EPS * (1.0 + abs(val) + cancel)
        # On such regions the measured decrement bottoms out above tol; a
        # modest decrement that has stopped contracting in the blind phase
        # means the iterate sits at the numerical center, which is as
        # converged as float64 permits.
        if blind and dec <= 1e-3 and len(decrements) >= 2 \
                and dec >= 0.25 * decrements[-2]:
            stagnant += 1
            if stagnant >= 3:
                return CenterResult(point=x, value=val, final_decrement=dec,
                                    iterations=it, converged=True,
                                    decrements=decrements, used_fd=use_fd)
        else:
            stagnant = 0
        t = 1.0
        accepted = False
        while t >= 2.0 ** -60:
            xt = x + t * p
            if np.all(region.slacks(xt) > floor):
                if blind:
                    x = xt
                    accepted = True
                    break
                if kind == "analytic":
                    vt = -0.5 * float(np.sum(np.log(region.slacks(xt))))
                else:
                    try:
                        vt = _vol_value(_Workspace(region, xt))
                    except BarrierDomainError:
                        vt = math.inf
                if vt <= val + 1e-12 * (1.0 + abs(val)):
                    x = xt
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            if (kind == "volumetric" and not use_fd
                    and region.dim <= FD_FALLBACK_MAX_DIM):
                use_fd = True
                continue
            break
    dec = decrements[-1] if decrements else math.inf
    return CenterResult(point=x, value=val if val is not None else math.nan,
                        final_decrement=dec, iterations=it,
                        converged=dec <= tol, decrements=decrements,
                        used_fd=use_fd)
