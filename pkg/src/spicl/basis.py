"""Candidate-function dictionary: regressor matrix Y(x) and control effectiveness g(x)."""

import numpy as np

from . import _kernels
from .errors import RankDeficiencyError

# cond(G G^T) above this is treated as rank deficient
_COND_LIMIT = 1e12


def monomial_exponents(degree, nvars=2):
    """Exponent table of all monomials of total degree <= degree, graded order.

    Within each degree the first variable's exponent decreases, e.g. for two
    variables and degree 3: 1, x1, x2, x1^2, x1 x2, x2^2, x1^3, x1^2 x2,
    x1 x2^2, x2^3.
    """
    if nvars != 2:
        raise NotImplementedError("only bivariate monomial libraries are shipped")
    rows = []
    for d in range(degree + 1):
        for a in range(d, -1, -1):
            rows.append((a, d - a))
    return np.array(rows, dtype=np.int64)


class BasisLibrary:
    """Dictionary of scalar basis functions plus a layout rule building Y(x).

    Parameters
    ----------
    n : state dimension
    scalar_basis : ordered list of callables R^n -> R
    layout : callable mapping the stacked scalar evaluations (length q) to the
        n-by-p regressor; defaults to the block-diagonal rule where each state
        row carries its own copy of the basis vector (p = n*q).
    exponents : optional (q, 2) integer table; set when the scalar basis is a
        bivariate monomial family, which enables the compiled simulation path.
    """

    def __init__(self, n, scalar_basis, layout=None, exponents=None):
        self.n = int(n)
        self.scalar_basis = list(scalar_basis)
        self.q = len(self.scalar_basis)
        if layout is None:
            layout = block_diagonal_layout(self.n, self.q)
        self.layout = layout
        self.p = layout.p
        self.exponents = exponents

    def eval_phi(self, x):
        """Evaluate the scalar basis at x, in dictionary order."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(
                f"state has shape {x.shape}, library is configured for ({self.n},)")
        if self.exponents is not None:
            out = np.empty(self.q)
            _kernels.eval_monomials(x[0], x[1], self.exponents, out)
            return out
        return np.array([f(x) for f in self.scalar_basis], dtype=float)

    def eval_Y(self, x):
        """Assemble the n-by-p regressor from the scalar evaluations."""
        return self.layout(self.eval_phi(x))


class block_diagonal_layout:
    """Places one copy of the basis vector in each state row's own column block."""

    def __init__(self, n, q):
        self.n = n
        self.q = q
        self.p = n * q

    def __call__(self, phi):
        Y = np.zeros((self.n, self.p))
        for i in range(self.n):
            Y[i, i * self.q:(i + 1) * self.q] = phi
        return Y


def monomial_library(degree=3, n=2):
    """The shipped dictionary: bivariate monomials of total degree <= degree,
    in block-diagonal layout (n rows, p = n * #monomials columns)."""
    exps = monomial_exponents(degree, nvars=2)
    funcs = [_Monomial(int(a), int(b)) for a, b in exps]
    return BasisLibrary(n, funcs, exponents=exps)


class _Monomial:
    """x -> x1^a * x2^b. A class (not a closure) so libraries pickle cleanly."""

    def __init__(self, a, b):
        self.a = a
        self.b = b

    def __call__(self, x):
        return x[0] ** self.a * x[1] ** self.b


class _ConstantMatrix:
    def __init__(self, M):
        self.M = np.asarray(M, dtype=float)

    def __call__(self, x):
        return self.M


class ControlEffectiveness:
    """Input matrix g(x) with a flag marking the identity special case."""

    def __init__(self, g, m, identity=False):
        self.g = g
        self.m = int(m)
        self.identity = bool(identity)

    def __call__(self, x):
        return self.g(x)

    @classmethod
    def identity_matrix(cls, n):
        return cls(_ConstantMatrix(np.eye(n)), m=n, identity=True)

    def min_singular_value(self, states):
        """Smallest singular value of g over sample states (rank-condition probe)."""
        return min(np.linalg.svd(self(np.asarray(x, float)), compute_uv=False)[-1]
                   for x in states)


def right_pseudoinverse(G):
    """Right pseudoinverse G^+ with G G^+ = I for full-row-rank G (n <= m).

    Computed from the QR factorization of G^T, which keeps the residual near
    eps * cond(G); forming G^T (G G^T)^{-1} directly would square the
    conditioning.
    """
    G = np.asarray(G, dtype=float)
    n, m = G.shape
    if n > m:
        raise ValueError(f"expected a wide matrix (n <= m), got {G.shape}")
    Q, R = np.linalg.qr(G.T)
    diag = np.abs(np.diag(R))
    if diag.min() == 0.0 or (diag.max() / diag.min()) ** 2 > _COND_LIMIT:
        raise RankDeficiencyError(
            f"G G^T condition estimate exceeds {_COND_LIMIT:.0e}; "
            "control effectiveness is not full row rank here")
    # G^+ = Q R^{-T}
    return Q @ np.linalg.solve(R.T, np.eye(n))
