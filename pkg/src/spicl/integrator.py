"""Fixed-step integration and the sliding-window state history.

The buffer keeps samples on an exact grid t = t0 + k*h (times are computed as
k*h, never by repeated addition, so the grid cannot drift) together with
trapezoid cumulative integrals of the regressor and of g(x)u. Window
differences of the cumulatives give the filtered pair in O(1) per query.
"""

from typing import NamedTuple

import numpy as np

from .errors import DelayLookupError, DivergenceError

# matches the grid-snap rule used by the compiled loop
_GRID_SNAP = 1e-9


def rk4_step(f, t, y, h):
    """One classical fourth-order Runge-Kutta step of y' = f(t, y).

    Any discontinuous selection inside f must already be frozen by the caller;
    this routine just evaluates the four stages.
    """
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    out = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise DivergenceError(f"non-finite state after step to t={t + h:.6g}",
                              time=t + h)
    return out


class FilteredPair(NamedTuple):
    t: float
    Yf: np.ndarray   # (n, p)
    Uf: np.ndarray   # (n,)


class HistoryBuffer:
    """Ring of (t, x) samples plus cumulative integrals over the step grid.

    push() appends the sample for step k at time t0 + k*h and extends the
    cumulative trapezoid integrals of Y(x(t)) and g(x(t))u(t). Retention is
    the window length plus a small slack; older samples are overwritten.
    """

    def __init__(self, h, T_window, x0, Y0, gu0, t0=0.0):
        if h <= 0 or T_window <= 0:
            raise ValueError("step size and window must be positive")
        self.h = float(h)
        self.T = float(T_window)
        self.t0 = float(t0)
        x0 = np.asarray(x0, dtype=float)
        Y0 = np.asarray(Y0, dtype=float)
        self.n = x0.shape[0]
        self.p = Y0.shape[1]
        steps = max(int(np.ceil(self.T / self.h)), 2)
        self._cap = steps + 10
        self._x = np.zeros((self._cap, self.n))
        self._cumY = np.zeros((self._cap, self.n, self.p))
        self._cumgu = np.zeros((self._cap, self.n))
        self._k = 0                      # index of the newest sample
        self._x[0] = x0
        self._Y_prev = Y0.copy()
        self._gu_prev = np.asarray(gu0, dtype=float).copy()
        self._cumY_now = np.zeros((self.n, self.p))
        self._cumgu_now = np.zeros(self.n)

    @property
    def t_now(self):
        return self.t0 + self._k * self.h

    @property
    def t_oldest(self):
        return self.t0 + max(self._k - self._cap + 1, 0) * self.h

    def push(self, x, Y, gu):
        """Append the sample at the next grid time."""
        x = np.asarray(x, dtype=float)
        Y = np.asarray(Y, dtype=float)
        gu = np.asarray(gu, dtype=float)
        self._cumY_now = self._cumY_now + 0.5 * self.h * (self._Y_prev + Y)
        self._cumgu_now = self._cumgu_now + 0.5 * self.h * (self._gu_prev + gu)
        self._Y_prev = Y.copy()
        self._gu_prev = gu.copy()
        self._k += 1
        slot = self._k % self._cap
        self._x[slot] = x
        self._cumY[slot] = self._cumY_now
        self._cumgu[slot] = self._cumgu_now

    def _locate(self, t_query):
        """Grid position and interpolation weight for t_query."""
        kq = (t_query - self.t0) / self.h
        k_new = self._k
        k_old = max(k_new - self._cap + 1, 0)
        if kq < k_old - _GRID_SNAP or kq > k_new + _GRID_SNAP:
            raise DelayLookupError(
                f"t={t_query:.6g} outside buffered range "
                f"[{self.t_oldest:.6g}, {self.t_now:.6g}]")
        i0 = int(np.floor(kq + _GRID_SNAP))
        i0 = min(max(i0, k_old), k_new)
        w = kq - i0
        if w < _GRID_SNAP or i0 == k_new:
            return i0, 0.0
        return i0, w

    def delayed_state(self, t_query):
        """x(t_query) by linear interpolation; exact at grid points."""
        i0, w = self._locate(t_query)
        s0 = i0 % self._cap
        if w == 0.0:
            return self._x[s0].copy()
        s1 = (i0 + 1) % self._cap
        return (1.0 - w) * self._x[s0] + w * self._x[s1]

    def _cum_at(self, t_query):
        i0, w = self._locate(t_query)
        s0 = i0 % self._cap
        if w == 0.0:
            return self._cumY[s0], self._cumgu[s0]
        s1 = (i0 + 1) % self._cap
        return ((1.0 - w) * self._cumY[s0] + w * self._cumY[s1],
                (1.0 - w) * self._cumgu[s0] + w * self._cumgu[s1])

    def filtered_pair(self, t=None):
        """Window integrals (Yf, Uf) at time t (default: newest sample).

        Zero by definition while t < T; afterwards Yf is the window integral
        of the regressor and Uf = x(t) - x(t-T) - window integral of g(x)u.
        """
        if t is None:
            t = self.t_now
        if t < self.T - _GRID_SNAP * self.h:
            return FilteredPair(t, np.zeros((self.n, self.p)), np.zeros(self.n))
        cumY_t, cumgu_t = self._cum_at(t)
        x_t = self.delayed_state(t)
        cumY_d, cumgu_d = self._cum_at(t - self.T)
        x_d = self.delayed_state(t - self.T)
        return FilteredPair(t, cumY_t - cumY_d, x_t - x_d - (cumgu_t - cumgu_d))
