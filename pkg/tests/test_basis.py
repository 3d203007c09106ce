import numpy as np
import pytest

from spicl.basis import (ControlEffectiveness, monomial_exponents,
                         monomial_library, right_pseudoinverse)
from spicl.errors import RankDeficiencyError

LIB = monomial_library()


def test_monomial_order_matches_dictionary():
    exps = monomial_exponents(3)
    assert exps.tolist() == [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2],
                             [3, 0], [2, 1], [1, 2], [0, 3]]


def test_eval_phi_origin():
    assert LIB.eval_phi(np.array([0.0, 0.0])).tolist() == [1] + [0] * 9


def test_eval_phi_ones():
    assert LIB.eval_phi(np.array([1.0, 1.0])).tolist() == [1.0] * 10


def test_eval_phi_hand_values():
    # direct evaluation of each monomial at (2, -1)
    got = LIB.eval_phi(np.array([2.0, -1.0]))
    assert got.tolist() == [1, 2, -1, 4, -2, 1, 8, -4, 2, -1]


def test_eval_phi_rejects_wrong_dimension():
    with pytest.raises(ValueError):
        LIB.eval_phi(np.array([1.0, 2.0, 3.0]))


def test_eval_Y_shape_and_zero_blocks():
    Y = LIB.eval_Y(np.array([0.3, -0.7]))
    assert Y.shape == (2, 20)
    assert np.all(Y[0, 10:] == 0.0)
    assert np.all(Y[1, :10] == 0.0)
    assert np.array_equal(Y[0, :10], Y[1, 10:])


def test_eval_Y_origin_rows():
    Y = LIB.eval_Y(np.array([0.0, 0.0]))
    row1 = np.zeros(20)
    row1[0] = 1.0
    row2 = np.zeros(20)
    row2[10] = 1.0
    assert np.array_equal(Y[0], row1)
    assert np.array_equal(Y[1], row2)


THETA_TRUE = np.array([0, -1, -1, 0, 0, 0, 0, 0, 0, 0,
                       0, -0.5, 0, 0, 0, -0.5, 0, -0.5, 0, 0], float)


def _drift_oracle(x1, x2):
    # the two plant drift components written out as scalar expressions
    return (-x1 - x2,
            -0.5 * x1 - 0.5 * x2 ** 2 - 0.5 * x1 ** 2 * x2)


def test_regressor_times_theta_at_unit_point():
    got = LIB.eval_Y(np.array([1.0, 0.0])) @ THETA_TRUE
    assert got == pytest.approx([-1.0, -0.5], abs=1e-15)


def test_regressor_times_theta_matches_scalar_oracle(rng):
    for _ in range(100):
        x = rng.uniform(-2, 2, size=2)
        got = LIB.eval_Y(x) @ THETA_TRUE
        want = _drift_oracle(*x)
        assert got == pytest.approx(want, abs=1e-12)


def test_pseudoinverse_identity():
    assert np.allclose(right_pseudoinverse(np.eye(2)), np.eye(2), atol=1e-14)


def test_pseudoinverse_diagonal():
    G = np.array([[2.0, 0.0], [0.0, 4.0]])
    assert np.allclose(right_pseudoinverse(G),
                       np.array([[0.5, 0.0], [0.0, 0.25]]), atol=1e-14)


def test_pseudoinverse_wide_hand_case():
    G = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    # G G^T = diag(2, 1), so G^+ = G^T diag(1/2, 1)
    want = np.array([[0.5, 0.0], [0.0, 1.0], [0.5, 0.0]])
    Gp = right_pseudoinverse(G)
    assert np.allclose(Gp, want, atol=1e-14)
    assert np.abs(G @ Gp - np.eye(2)).max() <= 1e-12


def test_pseudoinverse_residual_up_to_cond_1e6(rng):
    for _ in range(25):
        n = int(rng.integers(2, 6))
        m = n + int(rng.integers(0, 4))
        cond = 10.0 ** rng.uniform(0, 6)
        sv = np.logspace(0, -np.log10(cond), n)
        U, _ = np.linalg.qr(rng.normal(size=(n, n)))
        V, _ = np.linalg.qr(rng.normal(size=(m, n)))
        G = U @ np.diag(sv) @ V.T
        Gp = right_pseudoinverse(G)
        assert np.abs(G @ Gp - np.eye(n)).max() <= 1e-10


def test_pseudoinverse_rank_deficient_raises():
    G = np.array([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0]])
    with pytest.raises(RankDeficiencyError):
        right_pseudoinverse(G)


def test_pseudoinverse_rejects_tall():
    with pytest.raises(ValueError):
        right_pseudoinverse(np.ones((3, 2)))


def test_identity_effectiveness_flag_and_rank():
    geff = ControlEffectiveness.identity_matrix(2)
    assert geff.identity
    assert np.array_equal(geff(np.array([5.0, -3.0])), np.eye(2))
    states = [np.array([a, b]) for a in (-1.5, 0.0, 1.5) for b in (-1.5, 0.0, 1.5)]
    assert geff.min_singular_value(states) > 0.9
