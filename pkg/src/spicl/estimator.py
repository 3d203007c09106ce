"""Parameter-estimate update law: projected tracking+memory gradient term
minus the signed sparsity shrink, plus the regularized cost for diagnostics."""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DivergenceError


@dataclass
class EstimatorState:
    """Estimate theta_hat with its gains and projection-set geometry.

    Gamma is stored as its diagonal (the adaptation gain is diagonal positive
    definite by contract). The estimate must satisfy ||theta_hat|| <= r_theta
    + epsilon at all times; update directions returned by this module keep it
    that way.
    """

    theta_hat: np.ndarray
    Gamma_diag: np.ndarray
    gamma: float
    lam: float
    r_theta: float
    epsilon: float

    def __post_init__(self):
        self.theta_hat = np.asarray(self.theta_hat, dtype=float)
        self.Gamma_diag = np.asarray(self.Gamma_diag, dtype=float)
        if np.any(self.Gamma_diag <= 0):
            raise ValueError("Gamma must have strictly positive diagonal entries")
        if self.gamma <= 0:
            raise ValueError("memory-learning gain gamma must be positive")
        if self.lam < 0:
            raise ValueError("sparsity parameter must be nonnegative")
        if self.r_theta <= 0 or self.epsilon <= 0:
            raise ValueError("projection radius and boundary layer must be positive")

    def check_invariant(self, slack=0.0):
        nrm = float(np.linalg.norm(self.theta_hat))
        if nrm > self.r_theta + self.epsilon + slack:
            raise ValueError(
                f"||theta_hat||={nrm:.6g} escaped the projection set "
                f"(radius {self.r_theta + self.epsilon:.6g})")


def cost(theta_hat, mr, lam):
    """L1-regularized quadratic data-fit cost
    J = 0.5 th' Ysum th - th' Usum + lam * ||th||_1."""
    th = np.asarray(theta_hat, dtype=float)
    return float(0.5 * th @ mr.Ysum @ th - th @ mr.Usum + lam * np.abs(th).sum())


def sign_selection(theta_hat):
    """Componentwise sign with the zero selection at zero.

    Picking 0 on the discontinuity makes an exactly-zero component an
    equilibrium of the shrink term and minimizes chatter amplitude.
    """
    return np.sign(np.asarray(theta_hat, dtype=float))


def smooth_projection(theta_hat, v, Gamma_diag, r_theta, epsilon):
    """Project the raw direction v so the estimate cannot leave the ball of
    radius r_theta + epsilon.

    Inside the ball of radius r_theta (or when v already points inward) v is
    returned unchanged; in the boundary layer the outward component is blended
    out, vanishing entirely on the outer shell.
    """
    th = np.asarray(theta_hat, dtype=float)
    v = np.asarray(v, dtype=float)
    gd = np.asarray(Gamma_diag, dtype=float)
    nrm = np.linalg.norm(th)
    lim = r_theta + epsilon
    if nrm > lim * (1.0 + 1e-9):
        raise ValueError(
            f"||theta_hat||={nrm:.6g} already outside the projection domain {lim:.6g}")
    out = np.empty_like(v)
    _kernels.project_direction(th, v, gd, r_theta, epsilon, out)
    return out


def continuous_direction(est, mr, Y, e):
    """Projected part of the update law:
    proj(theta_hat, Gamma (Y'e + gamma (Usum - Ysum theta_hat)), Gamma)."""
    raw = est.Gamma_diag * (Y.T @ e + est.gamma * (mr.Usum - mr.Ysum @ est.theta_hat))
    return smooth_projection(est.theta_hat, raw, est.Gamma_diag,
                             est.r_theta, est.epsilon)


def update_direction(est, mr, Y, e):
    """Full estimate derivative: projected gradient term minus the sparsity
    shrink lam * gamma * Gamma * sign(theta_hat)."""
    dth = continuous_direction(est, mr, Y, e) \
        - est.lam * est.gamma * est.Gamma_diag * sign_selection(est.theta_hat)
    if not np.all(np.isfinite(dth)):
        raise DivergenceError("non-finite estimator update direction")
    return dth
