import numpy as np
import pytest

from spicl.errors import ConfigError, DivergenceError
from spicl.experiment import (DEMO_THETA_TRUE, classify_sparsity,
                              confusion_counts, demo_config,
                              desired_trajectory, lambda_sweep,
                              precision_recall_f1, run_scenario)


def test_trajectory_starts_at_origin():
    x_d, _ = desired_trajectory(0.0)
    assert np.allclose(x_d, 0.0, atol=1e-15)


def test_trajectory_initial_velocity():
    # termwise differentiation: (1 + 0.36 - 0.20, 1.90 + 0.32)
    _, v = desired_trajectory(0.0)
    assert v == pytest.approx([1.16, 2.22], abs=1e-12)


def test_trajectory_derivative_matches_finite_differences():
    dt = 1e-6
    for t in np.linspace(0.0, 2 * np.pi, 101):
        xp, _ = desired_trajectory(t + dt)
        xm, _ = desired_trajectory(max(t - dt, 0.0))
        denom = (t + dt) - max(t - dt, 0.0)
        fd = (xp - xm) / denom
        _, v = desired_trajectory(t)
        assert np.allclose(fd, v, atol=1e-6)


def test_exact_model_equilibrium():
    # start on the reference with the true parameters: tracking error stays
    # at discretization level and the estimate barely moves
    cfg = demo_config(x0=np.zeros(2), theta_hat0=DEMO_THETA_TRUE.copy(),
                      lam=0.0, t_final=5.0)
    res = run_scenario(cfg)
    assert res.e_norm.max() <= 10 * cfg.h
    assert res.theta_err_norm.max() <= 1e-3


def test_stiffer_feedback_tightens_tracking():
    base = demo_config(lam=0.0, t_final=10.0)
    res1 = run_scenario(base)
    res2 = run_scenario(demo_config(lam=0.0, t_final=10.0, K=100.0 * np.eye(2)))
    assert res2.rms_e < res1.rms_e


def test_run_is_deterministic():
    cfg = demo_config(t_final=3.0)
    a = run_scenario(cfg)
    b = run_scenario(cfg)
    assert np.array_equal(a.e_norm, b.e_norm)
    assert np.array_equal(a.theta_err_norm, b.theta_err_norm)
    assert np.array_equal(a.theta_hat_final, b.theta_hat_final)
    assert np.array_equal(a.events_lambda_min, b.events_lambda_min)


def test_run_divergence_reports_time():
    unstable = np.zeros(20)
    unstable[6] = 50.0                  # strong positive cubic drift
    unstable[19] = 50.0
    cfg = demo_config(theta_true=unstable, t_final=5.0, lam=0.0)
    with pytest.raises(DivergenceError) as err:
        run_scenario(cfg)
    assert err.value.time is not None and 0.0 < err.value.time < 5.0


def test_config_validation_messages():
    with pytest.raises(ConfigError):
        demo_config(t_final=0.1).validate()         # horizon below the window
    with pytest.raises(ConfigError):
        demo_config(K=-np.eye(2)).validate()
    with pytest.raises(ConfigError):
        demo_config(Gamma_diag=np.zeros(20)).validate()
    with pytest.raises(ConfigError):
        demo_config(engine="turbo").validate()


def test_classify_sparsity_cases():
    assert classify_sparsity(np.zeros(20), 0.05).sum() == 0
    mask = classify_sparsity(DEMO_THETA_TRUE, 0.1)
    assert np.where(mask)[0].tolist() == [1, 2, 11, 15, 17]   # support, 0-based
    assert classify_sparsity(DEMO_THETA_TRUE, 2.0).sum() == 0


def test_classify_sparsity_rejects_bad_threshold():
    with pytest.raises(ValueError):
        classify_sparsity(np.zeros(3), 0.0)


def test_confusion_counts_perfect_recovery():
    truth = DEMO_THETA_TRUE != 0
    assert confusion_counts(truth, truth) == (5, 0, 0, 15)


def test_confusion_counts_reference_patterns():
    truth = np.array([True] * 5 + [False] * 15)
    # 12 predicted positives covering the truth: TP=5 FP=7 FN=0 TN=8
    pred = np.array([True] * 12 + [False] * 8)
    assert confusion_counts(pred, truth) == (5, 7, 0, 8)
    # 4 predicted, all true: TP=4 FP=0 FN=1 TN=15
    pred = np.array([True] * 4 + [False] * 16)
    assert confusion_counts(pred, truth) == (4, 0, 1, 15)


def test_confusion_counts_length_mismatch():
    with pytest.raises(ValueError):
        confusion_counts(np.array([True]), np.array([True, False]))


def test_precision_recall_f1_reference_rows():
    p, r, f1 = precision_recall_f1(4, 0, 1)
    assert (p, r) == (1.0, 0.8)
    assert f1 == pytest.approx(0.89, abs=0.005)
    p, r, f1 = precision_recall_f1(5, 7, 0)
    assert p == pytest.approx(0.42, abs=0.005)
    assert r == 1.0
    assert f1 == pytest.approx(0.59, abs=0.005)
    p, r, f1 = precision_recall_f1(0, 0, 5)
    assert p is None and r == 0.0 and f1 == 0.0


def test_precision_recall_f1_rejects_negative():
    with pytest.raises(ValueError):
        precision_recall_f1(-1, 0, 0)


def test_sweep_counts_identity_and_order():
    cfg = demo_config(t_final=2.0)
    grid = [0.0, 1e-2, 1e-1]
    rep = lambda_sweep(cfg, grid)
    assert [row.lam for row in rep.rows] == grid
    for row in rep.rows:
        assert row.tp + row.fp + row.fn + row.tn == 20
        assert row.status == "ok"


def test_sweep_single_lambda_matches_direct_run():
    cfg = demo_config(t_final=2.0)
    rep = lambda_sweep(cfg, [2e-3])
    from dataclasses import replace
    direct = run_scenario(replace(cfg, lam=2e-3))
    row = rep.rows[0]
    assert row.rms_e == direct.rms_e
    assert row.theta_err_final == direct.theta_err_final
    assert np.array_equal(rep.results[0].theta_hat_final, direct.theta_hat_final)


def test_sweep_workers_do_not_change_results():
    cfg = demo_config(t_final=2.0)
    grid = [0.0, 5e-3, 5e-2]
    serial = lambda_sweep(cfg, grid, workers=1)
    parallel = lambda_sweep(cfg, grid, workers=2)
    assert serial.table_text() == parallel.table_text()
    for a, b in zip(serial.results, parallel.results):
        assert np.array_equal(a.theta_hat_final, b.theta_hat_final)
        assert np.array_equal(a.e_norm, b.e_norm)


def test_sweep_records_divergence_and_continues():
    unstable = np.zeros(20)
    unstable[6] = 50.0
    unstable[19] = 50.0
    cfg = demo_config(theta_true=unstable, t_final=2.0)
    rep = lambda_sweep(cfg, [0.0, 1e-2])
    assert all(row.status == "diverged" for row in rep.rows)
    assert rep.results == [None, None]
    text = rep.table_text()
    assert "diverged" in text and text.count("\n") == 3


def test_sweep_rejects_negative_lambda():
    with pytest.raises(ConfigError):
        lambda_sweep(demo_config(t_final=1.0), [-1e-3])
