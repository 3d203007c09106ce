"""Scenario definition, closed-loop runs, sparsity sweeps and recovery metrics."""

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import _kernels
from .basis import BasisLibrary, ControlEffectiveness, monomial_library
from .controller import check_gains, control_input, validate_feedback_gain
from .errors import ConfigError, DivergenceError
from .estimator import EstimatorState, continuous_direction, sign_selection
from .history_stack import HistoryStack, MemoryRegressor, StackEntry
from .integrator import rk4_step, HistoryBuffer, _GRID_SNAP

# reference trajectory: component i is sum_j amp[i, j] * sin(freq[i, j] * t)
DEMO_TRAJ_AMP = np.array([[1.0, 0.12, -0.04],
                          [0.95, 0.08, 0.0]])
DEMO_TRAJ_FREQ = np.array([[1.0, 3.0, 5.0],
                           [2.0, 4.0, 6.0]])

# sparse true parameters of the demo plant (block layout, 10 monomials/row)
DEMO_THETA_TRUE = np.array([0.0, -1.0, -1.0, 0, 0, 0, 0, 0, 0, 0,
                            0.0, -0.5, 0, 0, 0, -0.5, 0, -0.5, 0, 0])

DEFAULT_LAMBDA_GRID = (0.0, 1e-5, 1e-4, 1e-3, 5e-3, 1e-2, 5e-2, 1e-1)


def desired_trajectory(t):
    """Demo reference position and velocity at time t; exact derivatives."""
    x1, x2, v1, v2 = _kernels.sinsum_trajectory(
        float(t), DEMO_TRAJ_AMP, DEMO_TRAJ_FREQ)
    return np.array([x1, x2]), np.array([v1, v2])


@dataclass
class SimConfig:
    """Every constant of one closed-loop scenario.

    Defaults reproduce the bundled two-state study: cubic monomial dictionary,
    identity control effectiveness, K = 10 I, Gamma = I, gamma = 0.1,
    kappa = 0.01, window 0.25 s, 100 s horizon at 1 ms steps.
    """

    x0: np.ndarray = field(default_factory=lambda: np.array([0.5, 0.5]))
    theta_true: np.ndarray = field(default_factory=lambda: DEMO_THETA_TRUE.copy())
    theta_hat0: np.ndarray = field(default_factory=lambda: np.zeros(20))
    K: np.ndarray = field(default_factory=lambda: 10.0 * np.eye(2))
    Gamma_diag: np.ndarray = field(default_factory=lambda: np.ones(20))
    gamma: float = 0.1
    lam: float = 1e-2
    kappa: float = 0.01
    ybar: float = 0.5
    delta: float = 1.01
    T_window: float = 0.25
    h: float = 1e-3
    t_final: float = 100.0
    n_slots: int = 20
    r_theta: float = 5.0
    epsilon: float = 0.5
    sparsity_threshold: float = 0.05
    metrics_window: Optional[tuple] = None      # defaults to (0, t_final)
    r_e: float = 1.0
    r: float = 11.0
    decimate: int = 10
    library: BasisLibrary = field(default_factory=monomial_library)
    geff: ControlEffectiveness = field(
        default_factory=lambda: ControlEffectiveness.identity_matrix(2))
    traj_amp: np.ndarray = field(default_factory=lambda: DEMO_TRAJ_AMP.copy())
    traj_freq: np.ndarray = field(default_factory=lambda: DEMO_TRAJ_FREQ.copy())
    engine: str = "auto"

    def __post_init__(self):
        for name in ("x0", "theta_true", "theta_hat0", "K", "Gamma_diag",
                     "traj_amp", "traj_freq"):
            setattr(self, name, np.ascontiguousarray(getattr(self, name), dtype=float))

    def trajectory(self, t):
        x1, x2, v1, v2 = _kernels.sinsum_trajectory(
            float(t), self.traj_amp, self.traj_freq)
        return np.array([x1, x2]), np.array([v1, v2])

    @property
    def n_steps(self):
        return int(round(self.t_final / self.h))

    @property
    def metrics_lo_hi(self):
        if self.metrics_window is None:
            return 0.0, self.t_final
        return float(self.metrics_window[0]), float(self.metrics_window[1])

    def validate(self):
        lib = self.library
        n, p = lib.n, lib.p
        if self.x0.shape != (n,):
            raise ConfigError(f"x0 must have shape ({n},), got {self.x0.shape}")
        if self.theta_true.shape != (p,) or self.theta_hat0.shape != (p,):
            raise ConfigError(f"theta vectors must have length p={p}")
        if self.K.shape != (n, n):
            raise ConfigError(f"K must be {n}x{n}")
        try:
            validate_feedback_gain(self.K)
        except ValueError as exc:
            raise ConfigError(f"[controller].K: {exc}") from exc
        if self.Gamma_diag.shape != (p,) or np.any(self.Gamma_diag <= 0):
            raise ConfigError("Gamma must be a length-p diagonal with positive entries")
        if not (self.t_final > self.T_window > 0):
            raise ConfigError("need t_final > T_window > 0")
        if self.h <= 0 or self.n_steps < 1:
            raise ConfigError("step size must be positive and shorter than the horizon")
        if self.gamma <= 0 or self.lam < 0 or self.kappa < 0:
            raise ConfigError("gains must satisfy gamma > 0, lambda >= 0, kappa >= 0")
        if self.ybar <= 0 or self.delta < 1.0 or self.n_slots < 1:
            raise ConfigError("stack needs ybar > 0, delta >= 1, at least one slot")
        if self.r_theta <= 0 or self.epsilon <= 0:
            raise ConfigError("projection radius and boundary layer must be positive")
        if self.sparsity_threshold <= 0:
            raise ConfigError("sparsity threshold must be positive")
        lo, hi = self.metrics_lo_hi
        if not (0.0 <= lo < hi <= self.t_final + 1e-12):
            raise ConfigError("metrics window must satisfy 0 <= lo < hi <= t_final")
        if self.decimate < 1:
            raise ConfigError("decimation must be a positive integer")
        if self.engine not in ("auto", "fast", "reference"):
            raise ConfigError(f"unknown engine '{self.engine}'")

    @property
    def fast_path_ok(self):
        return (self.library.exponents is not None and self.library.n == 2
                and self.geff.identity)


def demo_config(**overrides):
    """The bundled study scenario; keyword overrides replace single fields."""
    return replace(SimConfig(), **overrides) if overrides else SimConfig()


@dataclass
class RunResult:
    """Recorded series and end-state of one closed-loop run."""

    lam: float
    times: np.ndarray
    e_norm: np.ndarray
    theta_err_norm: np.ndarray
    theta_hat_final: np.ndarray
    events_t: np.ndarray
    events_slot: np.ndarray
    events_lambda_min: np.ndarray
    Ysum_final: np.ndarray
    Usum_final: np.ndarray
    stack_count: int
    lambda_min_final: float
    gain_report: object
    max_theta_hat_norm: float
    lemma1_residual_max: float
    rms_e: float
    max_z_tail: float
    theta_err_p2p_late: float
    t_reach_ybar: Optional[float]
    lambda_min_floor_after_reach: Optional[float]
    wall_time: float

    @property
    def theta_err_final(self):
        return float(self.theta_err_norm[-1])


def run_scenario(config: SimConfig) -> RunResult:
    """Simulate the coupled plant / controller / filters / stack / estimator
    loop on the fixed grid. Raises DivergenceError if the state leaves the
    finite range; otherwise returns the recorded series and diagnostics."""
    config.validate()
    t0 = time.perf_counter()
    use_fast = config.engine == "fast" or (
        config.engine == "auto" and config.fast_path_ok)
    if config.engine == "fast" and not config.fast_path_ok:
        raise ConfigError("fast engine requires the bivariate monomial library "
                          "and identity control effectiveness")
    payload = _fast_loop(config) if use_fast else _reference_loop(config)
    wall = time.perf_counter() - t0

    (rec_t, rec_e, rec_terr, th_final, ev_t, ev_j, ev_l, S_full, U_full,
     count, lmin, max_thn, l1max, sum_e2, n_e2, max_z, p2p_max, p2p_min,
     div_step, t_first, lmin_after) = payload

    if div_step >= 0:
        raise DivergenceError(
            f"state became non-finite at t={div_step * config.h:.6g} s "
            f"(lambda={config.lam:g})", time=div_step * config.h)

    report = check_gains(config)
    return RunResult(
        lam=config.lam,
        times=rec_t, e_norm=rec_e, theta_err_norm=rec_terr,
        theta_hat_final=th_final,
        events_t=ev_t, events_slot=ev_j, events_lambda_min=ev_l,
        Ysum_final=S_full, Usum_final=U_full,
        stack_count=count, lambda_min_final=lmin,
        gain_report=report,
        max_theta_hat_norm=max_thn,
        lemma1_residual_max=l1max,
        rms_e=float(np.sqrt(sum_e2 / n_e2)) if n_e2 else float("nan"),
        max_z_tail=max_z,
        theta_err_p2p_late=(p2p_max - p2p_min) if np.isfinite(p2p_max) else 0.0,
        t_reach_ybar=t_first if t_first >= 0 else None,
        lambda_min_floor_after_reach=lmin_after if t_first >= 0 else None,
        wall_time=wall,
    )


def _fast_loop(config):
    lib = config.library
    q = lib.q
    out = _kernels.simulate_demo(
        config.h, config.n_steps, config.T_window,
        config.x0, config.theta_true, config.theta_hat0,
        lib.exponents, config.traj_amp, config.traj_freq,
        config.K, config.Gamma_diag, config.gamma, config.lam,
        config.r_theta, config.epsilon,
        config.kappa, config.ybar, config.delta, config.n_slots,
        config.decimate,
        *config.metrics_lo_hi,
        0.75 * config.t_final, config.t_final,
        0.9 * config.t_final, config.t_final,
    )
    (rec_t, rec_e, rec_terr, n_out, th, ev_t, ev_j, ev_l, n_ev,
     S, Ub, count, lmin, max_thn, l1max, sum_e2, n_e2, max_z,
     p2p_max, p2p_min, div_step, t_first, lmin_after) = out
    # expand the repeated-block regressor to the full p x p / p forms
    p = 2 * q
    S_full = np.zeros((p, p))
    S_full[:q, :q] = S
    S_full[q:, q:] = S
    U_full = np.concatenate([Ub[0], Ub[1]])
    return (rec_t[:n_out], rec_e[:n_out], rec_terr[:n_out], th,
            ev_t[:n_ev], ev_j[:n_ev], ev_l[:n_ev], S_full, U_full,
            int(count), float(lmin), float(max_thn), float(l1max),
            float(sum_e2), int(n_e2), float(max_z), float(p2p_max),
            float(p2p_min), int(div_step),
            float(t_first), float(lmin_after))


def _reference_loop(config):
    """Module-composed loop; semantically identical to the compiled path."""
    lib, geff = config.library, config.geff
    n, p = lib.n, lib.p
    h, n_steps = config.h, config.n_steps
    theta_true = config.theta_true
    K = config.K

    est = EstimatorState(config.theta_hat0.copy(), config.Gamma_diag,
                         config.gamma, config.lam, config.r_theta,
                         config.epsilon)
    stack = HistoryStack(config.n_slots, config.kappa, config.ybar, config.delta)
    mr = MemoryRegressor(np.zeros((p, p)), np.zeros(p), config.kappa, 0.0)

    xd0, xdd0 = config.trajectory(0.0)
    x = config.x0.copy()
    u0 = control_input(lib, geff, x, xd0, xdd0, est.theta_hat, K)
    gu0 = u0 if geff.identity else geff(x) @ u0
    buf = HistoryBuffer(h, config.T_window, x, lib.eval_Y(x), gu0)

    met_lo, met_hi = config.metrics_lo_hi
    z_lo, z_hi = 0.75 * config.t_final, config.t_final
    p2p_lo, p2p_hi = 0.9 * config.t_final, config.t_final

    rec_t, rec_e, rec_terr = [0.0], [float(np.linalg.norm(x - xd0))], \
        [float(np.linalg.norm(theta_true - est.theta_hat))]
    events = []
    max_thn = float(np.linalg.norm(est.theta_hat))
    l1max = 0.0
    sum_e2, n_e2 = 0.0, 0
    if met_lo <= 0.0 <= met_hi:
        sum_e2, n_e2 = rec_e[0] ** 2, 1
    max_z = 0.0
    p2p_max, p2p_min = -np.inf, np.inf
    div_step = -1
    t_first, lmin_after = -1.0, np.inf

    y = np.concatenate([x, est.theta_hat])

    for k in range(n_steps):
        t = k * h
        shrink = est.lam * est.gamma * est.Gamma_diag * sign_selection(y[n:])

        def field(tt, yy):
            xs, ths = yy[:n], yy[n:]
            xd, xdd = config.trajectory(tt)
            e = xs - xd
            Y = lib.eval_Y(xs)
            u = control_input(lib, geff, xs, xd, xdd, ths, K)
            dx = Y @ theta_true + (u if geff.identity else geff(xs) @ u)
            est_stage = replace(est, theta_hat=ths)
            dth = continuous_direction(est_stage, mr, Y, e) - shrink
            return np.concatenate([dx, dth])

        try:
            y = rk4_step(field, t, y, h)
        except DivergenceError:
            div_step = k + 1
            break
        est.theta_hat = y[n:]

        t1 = (k + 1) * h
        xs = y[:n]
        xd, xdd = config.trajectory(t1)
        Y = lib.eval_Y(xs)
        u = control_input(lib, geff, xs, xd, xdd, est.theta_hat, K)
        buf.push(xs, Y, u if geff.identity else geff(xs) @ u)

        if (k + 1) - config.T_window / h > _GRID_SNAP:
            fp = buf.filtered_pair()
            resid = fp.Uf - fp.Yf @ theta_true
            l1max = max(l1max, float(np.linalg.norm(resid)))
            ev = stack.offer(StackEntry(t1, fp.Yf, fp.Uf))
            if ev is not None:
                events.append(ev)
                mr = stack.mr
                if t_first < 0 and stack.lambda_min >= config.ybar:
                    t_first = t1
            if t_first >= 0:
                lmin_after = min(lmin_after, stack.lambda_min)

        e_now = float(np.linalg.norm(xs - xd))
        terr = float(np.linalg.norm(theta_true - est.theta_hat))
        max_thn = max(max_thn, float(np.linalg.norm(est.theta_hat)))
        if met_lo <= t1 <= met_hi:
            sum_e2 += e_now ** 2
            n_e2 += 1
        if z_lo <= t1 <= z_hi:
            max_z = max(max_z, float(np.hypot(e_now, terr)))
        if p2p_lo <= t1 <= p2p_hi:
            p2p_max = max(p2p_max, terr)
            p2p_min = min(p2p_min, terr)
        if (k + 1) % config.decimate == 0 or k + 1 == n_steps:
            rec_t.append(t1)
            rec_e.append(e_now)
            rec_terr.append(terr)

    if stack.entries:
        mr = stack.mr
    return (np.array(rec_t), np.array(rec_e), np.array(rec_terr),
            est.theta_hat.copy(),
            np.array([e.t for e in events]),
            np.array([e.replaced for e in events], dtype=np.int64),
            np.array([e.lambda_min for e in events]),
            mr.Ysum, mr.Usum, len(stack.entries), stack.lambda_min,
            max_thn, l1max, sum_e2, n_e2, max_z, p2p_max, p2p_min,
            div_step, t_first, lmin_after)


def classify_sparsity(theta_hat, tau):
    """Predicted-nonzero mask: |theta_hat_i| > tau."""
    if tau <= 0:
        raise ValueError("threshold must be positive")
    return np.abs(np.asarray(theta_hat, dtype=float)) > tau


def confusion_counts(predicted, true_mask):
    """Componentwise (TP, FP, FN, TN); positives are nonzero terms."""
    predicted = np.asarray(predicted, dtype=bool)
    true_mask = np.asarray(true_mask, dtype=bool)
    if predicted.shape != true_mask.shape:
        raise ValueError("mask lengths differ")
    tp = int(np.sum(predicted & true_mask))
    fp = int(np.sum(predicted & ~true_mask))
    fn = int(np.sum(~predicted & true_mask))
    tn = int(np.sum(~predicted & ~true_mask))
    return tp, fp, fn, tn


def precision_recall_f1(tp, fp, fn):
    """Standard detection metrics; 0/0 ratios are undefined (None), and the
    F1 score is 0 whenever either input metric is 0 or undefined."""
    if min(tp, fp, fn) < 0:
        raise ValueError("counts must be nonnegative")
    precision = tp / (tp + fp) if tp + fp > 0 else None
    recall = tp / (tp + fn) if tp + fn > 0 else None
    if not precision or not recall:
        f1 = 0.0
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return precision, recall, f1


@dataclass
class SweepRow:
    lam: float
    status: str                  # "ok" or "diverged"
    nonzeros: int
    rms_e: float
    theta_err_final: float
    tp: int
    fp: int
    fn: int
    tn: int
    precision: Optional[float]
    recall: Optional[float]
    f1: float


@dataclass
class SweepReport:
    rows: list
    results: list                # RunResult or None (diverged), in lambda order

    TABLE_COLUMNS = ("lambda", "status", "nonzeros", "rms_e",
                     "theta_err_final", "TP", "FP", "FN", "TN",
                     "precision", "recall", "f1")

    def table_text(self):
        out = ["\t".join(self.TABLE_COLUMNS)]
        for r in self.rows:
            out.append("\t".join([
                _fmt(r.lam), r.status, str(r.nonzeros), _fmt(r.rms_e),
                _fmt(r.theta_err_final), str(r.tp), str(r.fp), str(r.fn),
                str(r.tn), _fmt(r.precision), _fmt(r.recall), _fmt(r.f1)]))
        return "\n".join(out) + "\n"

    def confusion_text(self):
        blocks = []
        for r in self.rows:
            blocks.append(
                f"lambda = {_fmt(r.lam)}\n"
                f"  TP = {r.tp}  FP = {r.fp}  FN = {r.fn}  TN = {r.tn}\n"
                f"  precision = {_fmt(r.precision)}  recall = {_fmt(r.recall)}"
                f"  f1 = {_fmt(r.f1)}\n")
        return "\n".join(blocks)


def _fmt(v):
    if v is None:
        return "--"
    if isinstance(v, float) and not np.isfinite(v):
        return "nan"
    return f"{v:.8g}" if isinstance(v, float) else str(v)


def _sweep_one(args):
    config, lam = args
    cfg = replace(config, lam=lam)
    try:
        return run_scenario(cfg), None
    except DivergenceError as exc:
        return None, exc


def lambda_sweep(config: SimConfig, lambdas=DEFAULT_LAMBDA_GRID,
                 workers=1) -> SweepReport:
    """Run the scenario once per sparsity level; rows come back in grid order
    regardless of worker scheduling. Divergence is recorded per row and the
    sweep continues."""
    lambdas = [float(v) for v in lambdas]
    for v in lambdas:
        if v < 0:
            raise ConfigError("sparsity levels must be nonnegative")
    jobs = [(config, v) for v in lambdas]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_sweep_one, jobs))
    else:
        outcomes = [_sweep_one(j) for j in jobs]

    true_mask = config.theta_true != 0.0
    rows, results = [], []
    for lam, (res, err) in zip(lambdas, outcomes):
        if err is not None:
            rows.append(SweepRow(lam, "diverged", 0, float("nan"), float("nan"),
                                 0, 0, int(true_mask.sum()),
                                 int((~true_mask).sum()), None, 0.0, 0.0))
            results.append(None)
            continue
        mask = classify_sparsity(res.theta_hat_final, config.sparsity_threshold)
        tp, fp, fn, tn = confusion_counts(mask, true_mask)
        precision, recall, f1 = precision_recall_f1(tp, fp, fn)
        rows.append(SweepRow(lam, "ok", int(mask.sum()), res.rms_e,
                             res.theta_err_final, tp, fp, fn, tn,
                             precision, recall, f1))
        results.append(res)
    return SweepReport(rows=rows, results=results)
