"""Certainty-equivalence tracking controller and the gain-condition checker."""

from dataclasses import dataclass

import numpy as np

from .basis import right_pseudoinverse


def validate_feedback_gain(K):
    """K must be symmetric positive definite; returns its smallest eigenvalue."""
    K = np.asarray(K, dtype=float)
    scale = max(np.abs(K).max(), 1.0)
    if np.abs(K - K.T).max() > 1e-12 * scale:
        raise ValueError("feedback gain K must be symmetric")
    k = float(np.linalg.eigvalsh(K)[0])
    if k <= 0:
        raise ValueError("feedback gain K must be positive definite")
    return k


def control_input(library, geff, x, x_d, x_d_dot, theta_hat, K):
    """u = g^+(x) (x_d_dot - Y(x) theta_hat - K e) with e = x - x_d."""
    x = np.asarray(x, dtype=float)
    e = x - np.asarray(x_d, dtype=float)
    w = np.asarray(x_d_dot, dtype=float) - library.eval_Y(x) @ theta_hat - K @ e
    if geff.identity:
        return w
    return right_pseudoinverse(geff(x)) @ w


def tracking_error_dynamics(library, x, e, theta_tilde, K):
    """Closed-loop error field e' = -K e + Y(x) theta_tilde (verification aid)."""
    return -np.asarray(K, float) @ np.asarray(e, float) \
        + library.eval_Y(np.asarray(x, float)) @ np.asarray(theta_tilde, float)


@dataclass
class GainReport:
    """Constants and conditions of the ultimate-boundedness analysis.

    The two inequality groups are evaluated under both readings of the
    mass-ratio factor (as printed, m_lo/m_hi, and the proof-consistent
    m_hi/m_lo) because the source statements disagree; both verdicts are
    reported side by side.
    """

    k: float
    alpha: float
    iota: float
    m_lo: float
    m_hi: float
    Y_bar: float
    xd_bar: float
    d_bar: float
    r_e: float
    r: float
    e0_norm: float
    ultimate_bound: float
    cond_initial_error: bool        # ||e(t0)||^2 < r_e^2
    cond_disturbance: bool          # d_bar^2 / k^2 < r_e^2
    cond_radius_printed: bool       # r > (m_lo/m_hi) max(r_e, 2 r_theta + eps)
    cond_margin_printed: bool       # iota/alpha < (m_lo/m_hi) r^2
    cond_radius_proof: bool         # r > (m_hi/m_lo) max(...)
    cond_margin_proof: bool         # iota/alpha < (m_lo/m_hi)... proof form
    all_pass_printed: bool
    all_pass_proof: bool

    def to_text(self):
        lines = [
            f"k (lambda_min K)      = {self.k:.6g}",
            f"alpha = min(k, g*yb)  = {self.alpha:.6g}",
            f"iota  = lam*g*sqrt(p) = {self.iota:.6g}",
            f"m_lo, m_hi            = {self.m_lo:.6g}, {self.m_hi:.6g}",
            f"xd_bar (max ||x_d||)  = {self.xd_bar:.6g}",
            f"Y_bar  (max ||Y||_F)  = {self.Y_bar:.6g}",
            f"d_bar                 = {self.d_bar:.6g}",
            f"r_e, r                = {self.r_e:.6g}, {self.r:.6g}",
            f"||e(t0)||             = {self.e0_norm:.6g}",
            f"ultimate bound        = {self.ultimate_bound:.6g}",
            f"cond ||e0||^2 < r_e^2          : {_pf(self.cond_initial_error)}",
            f"cond d_bar^2/k^2 < r_e^2       : {_pf(self.cond_disturbance)}",
            f"cond radius  (printed ratio)   : {_pf(self.cond_radius_printed)}",
            f"cond margin  (printed ratio)   : {_pf(self.cond_margin_printed)}",
            f"cond radius  (proof ratio)     : {_pf(self.cond_radius_proof)}",
            f"cond margin  (proof ratio)     : {_pf(self.cond_margin_proof)}",
            f"all pass (printed / proof)     : "
            f"{_pf(self.all_pass_printed)} / {_pf(self.all_pass_proof)}",
        ]
        return "\n".join(lines) + "\n"


def _pf(flag):
    return "pass" if flag else "fail"


def desired_trajectory_bound(traj, t_hi=2.0 * np.pi, n_grid=20001):
    """max ||x_d(t)|| over one period, on a fine grid."""
    ts = np.linspace(0.0, t_hi, n_grid)
    best = 0.0
    for t in ts:
        xd, _ = traj(t)
        best = max(best, float(np.hypot(xd[0], xd[1])))
    return best


def regressor_bound(library, radius, n_grid=101):
    """max Frobenius norm of Y over the square box of the given half-width."""
    g = np.linspace(-radius, radius, n_grid)
    best = 0.0
    for a in g:
        for b in g:
            Y = library.eval_Y(np.array([a, b]))
            best = max(best, float(np.sqrt(np.sum(Y * Y))))
    return best


def check_gains(config):
    """Evaluate the stability-analysis constants and conditions for a scenario.

    Advisory: failures are reported, not fatal, since the shipped scenario is
    run with its published constants even where the conservative conditions
    do not hold.
    """
    k = validate_feedback_gain(config.K)
    p = config.library.p
    alpha = min(k, config.gamma * config.ybar)
    iota = config.lam * config.gamma * np.sqrt(p)
    inv_g = 1.0 / config.Gamma_diag
    m_lo = 0.5 * min(1.0, float(inv_g.min()))
    m_hi = 0.5 * max(1.0, float(inv_g.max()))
    xd_bar = desired_trajectory_bound(config.trajectory)
    Y_bar = regressor_bound(config.library, config.r_e + xd_bar)
    d_bar = (2.0 * config.r_theta + config.epsilon) * Y_bar
    xd0, _ = config.trajectory(0.0)
    e0 = float(np.linalg.norm(np.asarray(config.x0, float) - xd0))
    spread = max(config.r_e, 2.0 * config.r_theta + config.epsilon)

    cond_e0 = e0 ** 2 < config.r_e ** 2
    cond_d = d_bar ** 2 / k ** 2 < config.r_e ** 2
    ratio_printed = m_lo / m_hi
    ratio_proof = m_hi / m_lo
    cond_r_printed = config.r > ratio_printed * spread
    cond_m_printed = iota / alpha < ratio_printed * config.r ** 2
    cond_r_proof = config.r > ratio_proof * spread
    cond_m_proof = iota / alpha < ratio_proof * config.r ** 2

    bound = float(np.sqrt((m_hi / m_lo) * (iota / alpha))) if alpha > 0 else np.inf
    return GainReport(
        k=k, alpha=alpha, iota=iota, m_lo=m_lo, m_hi=m_hi,
        Y_bar=Y_bar, xd_bar=xd_bar, d_bar=d_bar,
        r_e=config.r_e, r=config.r, e0_norm=e0,
        ultimate_bound=bound,
        cond_initial_error=cond_e0,
        cond_disturbance=cond_d,
        cond_radius_printed=cond_r_printed,
        cond_margin_printed=cond_m_printed,
        cond_radius_proof=cond_r_proof,
        cond_margin_proof=cond_m_proof,
        all_pass_printed=cond_e0 and cond_d and cond_r_printed and cond_m_printed,
        all_pass_proof=cond_e0 and cond_d and cond_r_proof and cond_m_proof,
    )
