"""Incremental orthonormal basis of an affine subspace.

Maintains a QR factorization of the vectors inserted so far (point offsets
and gradients), so geometry can be done in k-dimensional coordinates while
iterates live in R^n.  Inserting a vector costs O(n m); classical
Gram-Schmidt is applied twice per insert to keep Q orthonormal.
"""

import numpy as np

__all__ = ["SubspaceBasis", "SubspaceError"]

# A residual below this fraction of the input norm counts as dependent.
DEPENDENCE_RTOL = 1e-12
# Allowed reconstruction error for reduce(); beyond it the input is not in
# the affine span and reduction would silently distort geometry.
REDUCE_RTOL = 1e-8
# QᵀQ drift that triggers a full re-orthonormalization.
DRIFT_TOL = 1e-10


class SubspaceError(RuntimeError):
    """Point handed to reduce() lies outside the affine span."""


class SubspaceBasis:
    """Orthonormal basis Q of span{v_1, v_2, ...} anchored at ``base``.

    ``reduce`` maps base + span(Q) to R^m coordinates, ``lift`` maps back.
    Both are isometries on the affine span, so distances and inner products
    of in-span quantities are preserved exactly.
    """

    def __init__(self, base):
        self.base = np.array(base, dtype=float)
        n = self.base.shape[0]
        cap = 16
        self._Q = np.zeros((n, cap))
        self._R = np.zeros((cap, cap))
        self._V = np.zeros((n, cap))
        self.m = 0
        # Bumped whenever existing columns change (re-orthonormalization);
        # callers caching coordinates must rebuild when it moves.
        self.generation = 0

    @property
    def dim(self):
        return self.base.shape[0]

    @property
    def Q(self):
        return self._Q[:, :self.m]

    @property
    def R(self):
        return self._R[:self.m, :self.m]

    def _grow(self):
        if self.m < self._Q.shape[1]:
            return
        n, cap = self._Q.shape
        newcap = 2 * cap
        for name in ("_Q", "_V"):
            old = getattr(self, name)
            new = np.zeros((n, newcap))
            new[:, :cap] = old
            setattr(self, name, new)
        R = np.zeros((newcap, newcap))
        R[:cap, :cap] = self._R
        self._R = R

    def insert(self, v):
        """Insert v into the span; returns (coords, independent).

        ``coords`` are the coordinates of v in the (possibly extended)
        basis.  Dependent vectors leave the basis unchanged.
        """
        v = np.asarray(v, dtype=float)
        vnorm = float(np.linalg.norm(v))
        Q = self._Q[:, :self.m]
        c = Q.T @ v
        w = v - Q @ c
        # Second Gram-Schmidt pass removes the O(eps * cond) leakage of the
        # first one ("twice is enough").
        c2 = Q.T @ w
        w = w - Q @ c2
        c = c + c2
        rnorm = float(np.linalg.norm(w))
        if rnorm <= DEPENDENCE_RTOL * vnorm:
            return c, False
        self._grow()
        j = self.m
        self._Q[:, j] = w / rnorm
        self._R[:j, j] = c
        self._R[j, j] = rnorm
        self._V[:, j] = v
        self.m = j + 1
        if j > 0:
            drift = float(np.max(np.abs(self._Q[:, :j].T @ self._Q[:, j])))
            if drift > DRIFT_TOL:
                self.reorthonormalize()
        return np.append(c, rnorm), True

    def reorthonormalize(self):
        """Rebuild Q, R from the stored inserted vectors."""
        V = self._V[:, :self.m]
        Q, R = np.linalg.qr(V)
        # Canonical signs: non-negative R diagonal keeps the rebuild
        # deterministic and close to the incremental convention.
        s = np.sign(np.diag(R))
        s[s == 0] = 1.0
        self._Q[:, :self.m] = Q * s
        self._R[:self.m, :self.m] = s[:, None] * R
        self.generation += 1

    def reduce(self, x):
        """Coordinates of x in the affine span; x must lie in it."""
        x = np.asarray(x, dtype=float)
        d = x - self.base
        u = self._Q[:, :self.m].T @ d
        resid = float(np.linalg.norm(d - self._Q[:, :self.m] @ u))
        if resid > REDUCE_RTOL * (1.0 + float(np.linalg.norm(x))):
            raise SubspaceError(
                "point leaves the affine span (residual %.3e)" % resid)
        return u

    def lift(self, u):
        """Map reduced coordinates back to R^n."""
        u = np.asarray(u, dtype=float)
        return self.base + self._Q[:, :self.m] @ u

    def orthonormality_error(self):
        Q = self._Q[:, :self.m]
        return float(np.max(np.abs(Q.T @ Q - np.eye(self.m)))) if self.m else 0.0
