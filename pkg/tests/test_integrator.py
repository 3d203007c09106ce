import numpy as np
import pytest

from spicl.errors import DelayLookupError, DivergenceError
from spicl.integrator import HistoryBuffer, rk4_step


def test_rk4_zero_field():
    y0 = np.array([1.0, -2.0])
    assert np.array_equal(rk4_step(lambda t, y: np.zeros(2), 0.0, y0, 0.1), y0)


def test_rk4_exponential_decay():
    got = rk4_step(lambda t, y: -y, 0.0, np.array([1.0]), 0.1)
    assert got[0] == pytest.approx(0.9048375, abs=1e-7)   # e^{-0.1} to O(h^5)


def test_rk4_constant_field_exact():
    got = rk4_step(lambda t, y: np.ones(1), 0.0, np.zeros(1), 0.001)
    assert got[0] == 0.001


def test_rk4_divergence_carries_time():
    def blow(t, y):
        return np.array([np.inf])
    with pytest.raises(DivergenceError) as err:
        rk4_step(blow, 0.4, np.zeros(1), 0.1)
    assert err.value.time == pytest.approx(0.5)


def _linear_buffer(h, n_steps, xfun, Yfun, gufun):
    buf = HistoryBuffer(h, 0.25, xfun(0.0), Yfun(0.0), gufun(0.0))
    for k in range(1, n_steps + 1):
        t = k * h
        buf.push(xfun(t), Yfun(t), gufun(t))
    return buf


def test_grid_has_no_drift():
    buf = _linear_buffer(1e-3, 1000, lambda t: np.array([t]),
                         lambda t: np.array([[1.0]]), lambda t: np.array([0.0]))
    assert buf.t_now == 1000 * 1e-3      # k*h exactly, not accumulated sums


def test_delayed_state_exact_at_nodes():
    buf = _linear_buffer(0.01, 40, lambda t: np.array([t * t]),
                         lambda t: np.array([[1.0]]), lambda t: np.array([0.0]))
    assert buf.delayed_state(0.25)[0] == 0.25 ** 2


def test_delayed_state_midpoint():
    h = 0.01
    buf = _linear_buffer(h, 2, lambda t: np.array([0.0 if t < h / 2 else 1.0]),
                         lambda t: np.array([[1.0]]), lambda t: np.array([0.0]))
    # samples are x(0)=0, x(h)=1; the midpoint of the interpolant is 0.5
    assert buf.delayed_state(h / 2)[0] == pytest.approx(0.5, abs=1e-12)


def test_delayed_state_quadratic_interpolation_error():
    h = 0.01
    buf = _linear_buffer(h, 40, lambda t: np.array([t * t]),
                         lambda t: np.array([[1.0]]), lambda t: np.array([0.0]))
    got = buf.delayed_state(0.105)[0]
    assert got == pytest.approx(0.011025, abs=h * h)


def test_delayed_state_out_of_range():
    buf = _linear_buffer(0.01, 5, lambda t: np.array([t]),
                         lambda t: np.array([[1.0]]), lambda t: np.array([0.0]))
    with pytest.raises(DelayLookupError):
        buf.delayed_state(-0.3)


def test_filtered_pair_zero_before_window():
    buf = _linear_buffer(1e-3, 100, lambda t: np.array([t]),
                         lambda t: np.array([[1.0]]), lambda t: np.array([0.0]))
    fp = buf.filtered_pair()          # t = 0.1 < T = 0.25
    assert np.all(fp.Yf == 0.0) and np.all(fp.Uf == 0.0)


def test_filtered_pair_constant_trajectory():
    x0 = np.array([0.7, -0.4])
    Y0 = np.array([[1.0, 0.7, -0.4, 0.0], [0.3, 0.0, 0.0, 1.0]])
    buf = HistoryBuffer(1e-3, 0.25, x0, Y0, np.zeros(2))
    for k in range(1, 400):
        buf.push(x0, Y0, np.zeros(2))
    fp = buf.filtered_pair()
    assert np.allclose(fp.Uf, 0.0, atol=1e-14)
    assert np.allclose(fp.Yf, 0.25 * Y0, atol=1e-13)   # trapezoid exact here


def test_filtered_pair_window_identity_second_order():
    # x' = Y(t) theta with Y(t) = [3 t^2], theta = 1, u = 0: the window
    # residual Uf - Yf*theta comes from the trapezoid rule alone, so it
    # must shrink by 4x when h halves.
    theta = 1.0
    resid = {}
    for h in (2e-3, 1e-3):
        n = int(round(0.5 / h))
        buf = _linear_buffer(h, n, lambda t: np.array([t ** 3]),
                             lambda t: np.array([[3.0 * t * t]]),
                             lambda t: np.array([0.0]))
        fp = buf.filtered_pair()
        resid[h] = abs(fp.Uf[0] - fp.Yf[0, 0] * theta)
    ratio = resid[2e-3] / resid[1e-3]
    assert ratio == pytest.approx(4.0, rel=0.05)


def test_filtered_pair_fractional_window():
    # window not an integer multiple of h: interpolated left endpoint
    h = 1e-3
    buf = HistoryBuffer(h, 0.2505, np.zeros(1), np.array([[1.0]]), np.zeros(1))
    for k in range(1, 400):
        t = k * h
        buf.push(np.array([t]), np.array([[1.0]]), np.zeros(1))
    fp = buf.filtered_pair()
    # Yf integrates the constant regressor over the exact window length
    assert fp.Yf[0, 0] == pytest.approx(0.2505, abs=1e-12)
    # x(t) - x(t-T) = T for the linear trajectory
    assert fp.Uf[0] == pytest.approx(0.2505, abs=1e-12)
