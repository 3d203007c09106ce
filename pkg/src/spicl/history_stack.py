"""Finite memory of filtered data pairs and the aggregated memory regressor.

The stack keeps N normalized terms built from filtered pairs (Uf, Yf). Their
sums form the memory regressor (Ysum, Usum) whose smallest eigenvalue measures
how informative the stored data is. Insertion follows the two-branch
replacement rule: once the eigenvalue target ybar is met, new data replaces
the oldest entry that keeps the target met; before that, a replacement must
improve the smallest eigenvalue by the factor delta.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import _kernels

_SYM_TOL = 1e-10


class StackEntry(NamedTuple):
    t: float
    Yf: np.ndarray   # (n, p)
    Uf: np.ndarray   # (n,)


class InsertEvent(NamedTuple):
    t: float
    replaced: int    # slot index, -1 while the stack is still filling
    lambda_min: float


def normalized_terms(Yf, Uf, kappa):
    """Normalized contribution of one filtered pair.

    Returns (Yf^T Yf, Yf^T Uf), both divided by 1 + kappa*||Yf||_F^2. The
    Frobenius norm keeps the denominator cheap; it only rescales kappa
    relative to other matrix norms. The denominator is >= 1, so kappa = 0 is
    allowed (no normalization).
    """
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    Yf = np.asarray(Yf, dtype=float)
    Uf = np.asarray(Uf, dtype=float)
    d = 1.0 + kappa * float(np.sum(Yf * Yf))
    A = Yf.T @ Yf
    A = (A + A.T) / (2.0 * d)        # exactly symmetric despite BLAS rounding
    return A, (Yf.T @ Uf) / d


def min_eigenvalue(S):
    """Smallest eigenvalue of a symmetric matrix.

    Validates symmetry to 1e-10 and solves with LAPACK; accurate to ~1e-9
    relative to the matrix norm.
    """
    S = np.asarray(S, dtype=float)
    scale = max(np.abs(S).max(), 1.0)
    if np.abs(S - S.T).max() > _SYM_TOL * scale:
        raise ValueError("matrix is not symmetric within 1e-10")
    return float(np.linalg.eigvalsh(S)[0])


@dataclass
class MemoryRegressor:
    """Aggregated sums over the stack: Ysum (p, p), Usum (p,)."""

    Ysum: np.ndarray
    Usum: np.ndarray
    kappa: float
    lambda_min: float

    def validate(self):
        scale = max(np.abs(self.Ysum).max(), 1.0)
        if np.abs(self.Ysum - self.Ysum.T).max() > 1e-12 * scale:
            raise ValueError("Ysum lost symmetry")
        if self.lambda_min < -1e-10 * scale:
            raise ValueError("Ysum is not positive semidefinite")


@dataclass
class HistoryStack:
    """N-slot stack of filtered pairs with the eigenvalue-driven insert rule."""

    n_slots: int
    kappa: float
    ybar: float
    delta: float
    entries: list = field(default_factory=list)

    def __post_init__(self):
        if self.n_slots < 1:
            raise ValueError("the stack needs at least one slot")
        if self.delta < 1.0:
            raise ValueError("improvement factor delta must be >= 1")
        self._A = None            # (N, p, p) normalized YtY terms, oldest first
        self._b = None            # (N, p) normalized YtU terms
        self._Ysum = None
        self._Usum = None
        self.lambda_min = 0.0

    @property
    def full(self):
        return len(self.entries) == self.n_slots

    def _alloc(self, p):
        self._A = np.zeros((self.n_slots, p, p))
        self._b = np.zeros((self.n_slots, p))
        self._Ysum = np.zeros((p, p))
        self._Usum = np.zeros(p)

    def offer(self, entry: StackEntry) -> Optional[InsertEvent]:
        """Present one candidate; store unconditionally until full, then apply
        the replacement rule. Returns an event on any stack change."""
        A_c, b_c = normalized_terms(entry.Yf, entry.Uf, self.kappa)
        if self._A is None:
            self._alloc(A_c.shape[0])
        if not self.full:
            i = len(self.entries)
            self._A[i] = A_c
            self._b[i] = b_c
            self.entries.append(entry)
            self._rebuild()
            return InsertEvent(entry.t, -1, self.lambda_min)
        accepted, j = self._try_insert_terms(entry, A_c, b_c)
        if not accepted:
            return None
        return InsertEvent(entry.t, j, self.lambda_min)

    def try_insert(self, entry: StackEntry):
        """Replacement rule for a full stack. Returns (accepted, slot or None)."""
        if not self.full:
            raise ValueError("try_insert requires a full stack; use offer() to fill")
        A_c, b_c = normalized_terms(entry.Yf, entry.Uf, self.kappa)
        return self._try_insert_terms(entry, A_c, b_c)

    def _try_insert_terms(self, entry, A_c, b_c):
        j, lnew = _kernels.try_insert_terms(self._A, self._b, self._Ysum,
                                            A_c, b_c, self.lambda_min,
                                            self.ybar, self.delta)
        if j < 0:
            return False, None
        del self.entries[j]
        self.entries.append(entry)
        self._rebuild(lnew)
        return True, int(j)

    def _rebuild(self, lmin=None):
        k = len(self.entries)
        self._Ysum = self._A[:k].sum(axis=0)
        self._Usum = self._b[:k].sum(axis=0)
        if lmin is None:
            lmin = min_eigenvalue(self._Ysum) if k else 0.0
        self.lambda_min = float(lmin)

    def assemble(self) -> MemoryRegressor:
        """Recompute (Ysum, Usum) from the stored entries (scratch build)."""
        if not self.entries:
            if self._Ysum is None:
                raise ValueError("cannot size an empty regressor before any offer")
            p = self._Ysum.shape[0]
            return MemoryRegressor(np.zeros((p, p)), np.zeros(p), self.kappa, 0.0)
        p = self._Ysum.shape[0]
        Ysum = np.zeros((p, p))
        Usum = np.zeros(p)
        for e in self.entries:
            A, b = normalized_terms(e.Yf, e.Uf, self.kappa)
            Ysum += A
            Usum += b
        return MemoryRegressor(Ysum, Usum, self.kappa, min_eigenvalue(Ysum))

    @property
    def mr(self) -> MemoryRegressor:
        """Snapshot of the incrementally maintained regressor."""
        if self._Ysum is None:
            raise ValueError("no data has been offered yet")
        return MemoryRegressor(self._Ysum.copy(), self._Usum.copy(),
                               self.kappa, self.lambda_min)
