"""Numba-compiled inner loops.

Everything here is written so it also runs as plain Python when numba is
unavailable (``njit`` degrades to an identity decorator); the compiled and
interpreted paths execute the same statements. The history-stack replacement
rule lives here so the pure-numpy module and the fused simulation loop share
one implementation.
"""

import numpy as np

try:
    from numba import njit

    NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(fn):
            return fn

        return deco


# snap tolerance for "query lands on a grid node", in units of one step
_GRID_SNAP = 1e-9


@njit(cache=True)
def eval_monomials(x1, x2, exps, out):
    """Evaluate bivariate monomials x1^a * x2^b for each row (a, b) of exps."""
    for k in range(exps.shape[0]):
        out[k] = x1 ** exps[k, 0] * x2 ** exps[k, 1]


@njit(cache=True)
def sinsum_trajectory(t, amp, freq):
    """Sum-of-sines reference position and velocity; returns (x1, x2, v1, v2)."""
    x1 = 0.0
    x2 = 0.0
    v1 = 0.0
    v2 = 0.0
    for j in range(amp.shape[1]):
        x1 += amp[0, j] * np.sin(freq[0, j] * t)
        v1 += amp[0, j] * freq[0, j] * np.cos(freq[0, j] * t)
        x2 += amp[1, j] * np.sin(freq[1, j] * t)
        v2 += amp[1, j] * freq[1, j] * np.cos(freq[1, j] * t)
    return x1, x2, v1, v2


@njit(cache=True)
def project_direction(theta, v, gdiag, r_theta, eps, out):
    """Smooth-projection of the update direction v at estimate theta.

    Activation q = (||theta||^2 - r_theta^2) / (eps^2 + 2 eps r_theta) reaches 1
    exactly on the outer shell ||theta|| = r_theta + eps, where the outward
    component of v is cancelled entirely.
    """
    p = theta.shape[0]
    denr = eps * eps + 2.0 * eps * r_theta
    nn = 0.0
    for i in range(p):
        nn += theta[i] * theta[i]
    q = (nn - r_theta * r_theta) / denr
    if q <= 0.0:
        for i in range(p):
            out[i] = v[i]
        return
    gtv = 0.0
    for i in range(p):
        gtv += 2.0 * theta[i] / denr * v[i]
    if gtv <= 0.0:
        for i in range(p):
            out[i] = v[i]
        return
    gg = 0.0
    for i in range(p):
        gi = 2.0 * theta[i] / denr
        gg += gi * gdiag[i] * gi
    coef = q * gtv / gg
    for i in range(p):
        out[i] = v[i] - coef * gdiag[i] * 2.0 * theta[i] / denr


@njit(cache=True)
def try_insert_terms(A_stack, b_stack, Asum, A_c, b_c, lmin_cur, ybar, delta):
    """Replacement rule for a full history stack, on normalized term matrices.

    A_stack holds the per-entry normalized Yf^T Yf terms (oldest first), b_stack
    the matching Yf^T Uf terms flattened per entry. If the eigenvalue target is
    met, the oldest entry whose replacement keeps lambda_min >= ybar is dropped;
    otherwise the first replacement improving lambda_min by the factor delta is
    taken. Accepted entries shift slots j+1..N-1 down and put the candidate
    last. Returns (slot, lambda_min after replacement) with slot=-1 on
    rejection.
    """
    n_slots = A_stack.shape[0]
    rich = lmin_cur >= ybar
    if not rich:
        # lambda_min(Asum - A_j + A_c) <= lambda_min(Asum + A_c) for every j
        # (Weyl monotonicity, A_j >= 0), so one solve can reject the whole scan.
        bound = np.linalg.eigvalsh(Asum + A_c)[0]
        if bound <= delta * lmin_cur:
            return -1, lmin_cur
    for j in range(n_slots):
        lj = np.linalg.eigvalsh(Asum - A_stack[j] + A_c)[0]
        if (rich and lj >= ybar) or (not rich and lj > delta * lmin_cur):
            for k in range(j, n_slots - 1):
                A_stack[k] = A_stack[k + 1]
                b_stack[k] = b_stack[k + 1]
            A_stack[n_slots - 1] = A_c
            b_stack[n_slots - 1] = b_c
            return j, lj
    return -1, lmin_cur


@njit(cache=True)
def _demo_rhs(t, x1, x2, th, exps, amp, freq, K, gdiag, gamma, theta_true,
              S, Ub, r_theta, eps, shrink, phi, v, dth):
    """Closed-loop vector field of the demo family (identity effectiveness).

    Returns (dx1, dx2, u1, u2); the parameter-estimate derivative, including
    the frozen shrink term, is written into dth. phi and v are scratch.
    """
    q = exps.shape[0]
    xd1, xd2, dd1, dd2 = sinsum_trajectory(t, amp, freq)
    e1 = x1 - xd1
    e2 = x2 - xd2
    eval_monomials(x1, x2, exps, phi)
    yh1 = 0.0
    yh2 = 0.0
    yt1 = 0.0
    yt2 = 0.0
    for i in range(q):
        yh1 += phi[i] * th[i]
        yh2 += phi[i] * th[q + i]
        yt1 += phi[i] * theta_true[i]
        yt2 += phi[i] * theta_true[q + i]
    u1 = dd1 - yh1 - (K[0, 0] * e1 + K[0, 1] * e2)
    u2 = dd2 - yh2 - (K[1, 0] * e1 + K[1, 1] * e2)
    dx1 = yt1 + u1
    dx2 = yt2 + u2
    # v = Gamma (Y^T e + gamma (U - Ysum theta_hat)), exploiting the block layout
    for i in range(q):
        s1 = 0.0
        s2 = 0.0
        for j in range(q):
            s1 += S[i, j] * th[j]
            s2 += S[i, j] * th[q + j]
        v[i] = gdiag[i] * (e1 * phi[i] + gamma * (Ub[0, i] - s1))
        v[q + i] = gdiag[q + i] * (e2 * phi[i] + gamma * (Ub[1, i] - s2))
    project_direction(th, v, gdiag, r_theta, eps, dth)
    for i in range(2 * q):
        dth[i] -= shrink[i]
    return dx1, dx2, u1, u2


@njit(cache=True)
def simulate_demo(h, n_steps, T_window, x0, theta_true, theta_hat0, exps,
                  amp, freq, K, gdiag, gamma, lam, r_theta, eps,
                  kappa, ybar, delta, n_slots, decimate,
                  met_lo, met_hi, z_lo, z_hi, p2p_lo, p2p_hi):
    """Fixed-step closed-loop run for the shipped scenario family.

    State (x, theta_hat) advances by classical RK4 with the signum selection
    frozen over each step; sliding-window integrals use trapezoid cumulatives
    over the step grid; the filtered pair at each node past the window is
    offered to the history stack.

    Returns recorded series, stack events, the final estimate and memory
    regressor blocks, and scalar diagnostics (see the caller for unpacking).
    """
    q = exps.shape[0]
    p = 2 * q
    sb = T_window / h                      # window length in steps (may be fractional)
    ring = int(np.ceil(sb)) + 10   # window steps plus retention slack
    n_rec = n_steps // decimate + 1 + (1 if n_steps % decimate else 0)

    rx = np.zeros((ring, 2))
    rcphi = np.zeros((ring, q))
    rcu = np.zeros((ring, 2))

    A_stack = np.zeros((n_slots, q, q))
    b_stack = np.zeros((n_slots, 2 * q))
    S = np.zeros((q, q))
    Ub = np.zeros((2, q))
    count = 0
    lmin = 0.0

    ev_cap = n_steps + n_slots + 2
    ev_t = np.zeros(ev_cap)
    ev_j = np.zeros(ev_cap, dtype=np.int64)
    ev_l = np.zeros(ev_cap)
    n_ev = 0

    rec_t = np.zeros(n_rec)
    rec_e = np.zeros(n_rec)
    rec_terr = np.zeros(n_rec)
    n_out = 0

    th = theta_hat0.copy()
    x1 = x0[0]
    x2 = x0[1]

    phi = np.zeros(q)
    phi_prev = np.zeros(q)
    v = np.zeros(p)
    shrink = np.zeros(p)
    k1t = np.zeros(p)
    k2t = np.zeros(p)
    k3t = np.zeros(p)
    k4t = np.zeros(p)
    tha = np.zeros(p)
    pf = np.zeros(q)
    cphi = np.zeros(q)
    cu = np.zeros(2)

    # step-0 sample and node values
    xd1, xd2, dd1, dd2 = sinsum_trajectory(0.0, amp, freq)
    eval_monomials(x1, x2, exps, phi_prev)
    yh1 = 0.0
    yh2 = 0.0
    for i in range(q):
        yh1 += phi_prev[i] * th[i]
        yh2 += phi_prev[i] * th[q + i]
    u1_prev = dd1 - yh1 - (K[0, 0] * (x1 - xd1) + K[0, 1] * (x2 - xd2))
    u2_prev = dd2 - yh2 - (K[1, 0] * (x1 - xd1) + K[1, 1] * (x2 - xd2))
    rx[0, 0] = x1
    rx[0, 1] = x2

    e_now = np.hypot(x1 - xd1, x2 - xd2)
    terr = 0.0
    for i in range(p):
        d = theta_true[i] - th[i]
        terr += d * d
    terr = np.sqrt(terr)
    rec_t[0] = 0.0
    rec_e[0] = e_now
    rec_terr[0] = terr
    n_out = 1

    max_th_norm = np.sqrt(np.dot(th, th))
    l1_max = 0.0
    sum_e2 = 0.0
    n_e2 = 0
    if met_lo <= 0.0 <= met_hi:
        sum_e2 += e_now * e_now
        n_e2 += 1
    max_z = 0.0
    p2p_max = -np.inf
    p2p_min = np.inf
    div_step = -1
    t_first_rich = -1.0
    lmin_min_after = np.inf

    for k in range(n_steps):
        t = k * h
        for i in range(p):
            sg = 0.0
            if th[i] > 0.0:
                sg = 1.0
            elif th[i] < 0.0:
                sg = -1.0
            shrink[i] = lam * gamma * gdiag[i] * sg

        d1x1, d1x2, _, _ = _demo_rhs(t, x1, x2, th, exps, amp, freq, K, gdiag,
                                     gamma, theta_true, S, Ub, r_theta, eps,
                                     shrink, phi, v, k1t)
        for i in range(p):
            tha[i] = th[i] + 0.5 * h * k1t[i]
        d2x1, d2x2, _, _ = _demo_rhs(t + 0.5 * h, x1 + 0.5 * h * d1x1,
                                     x2 + 0.5 * h * d1x2, tha, exps, amp, freq,
                                     K, gdiag, gamma, theta_true, S, Ub,
                                     r_theta, eps, shrink, phi, v, k2t)
        for i in range(p):
            tha[i] = th[i] + 0.5 * h * k2t[i]
        d3x1, d3x2, _, _ = _demo_rhs(t + 0.5 * h, x1 + 0.5 * h * d2x1,
                                     x2 + 0.5 * h * d2x2, tha, exps, amp, freq,
                                     K, gdiag, gamma, theta_true, S, Ub,
                                     r_theta, eps, shrink, phi, v, k3t)
        for i in range(p):
            tha[i] = th[i] + h * k3t[i]
        d4x1, d4x2, _, _ = _demo_rhs(t + h, x1 + h * d3x1, x2 + h * d3x2, tha,
                                     exps, amp, freq, K, gdiag, gamma,
                                     theta_true, S, Ub, r_theta, eps, shrink,
                                     phi, v, k4t)

        x1 = x1 + h / 6.0 * (d1x1 + 2.0 * d2x1 + 2.0 * d3x1 + d4x1)
        x2 = x2 + h / 6.0 * (d1x2 + 2.0 * d2x2 + 2.0 * d3x2 + d4x2)
        for i in range(p):
            th[i] = th[i] + h / 6.0 * (k1t[i] + 2.0 * k2t[i] + 2.0 * k3t[i] + k4t[i])

        ok = np.isfinite(x1) and np.isfinite(x2)
        if ok:
            for i in range(p):
                if not np.isfinite(th[i]):
                    ok = False
                    break
        if not ok:
            div_step = k + 1
            break

        t1 = (k + 1) * h
        # node values and trapezoid cumulatives
        xd1, xd2, dd1, dd2 = sinsum_trajectory(t1, amp, freq)
        e1 = x1 - xd1
        e2 = x2 - xd2
        eval_monomials(x1, x2, exps, phi)
        yh1 = 0.0
        yh2 = 0.0
        for i in range(q):
            yh1 += phi[i] * th[i]
            yh2 += phi[i] * th[q + i]
        u1 = dd1 - yh1 - (K[0, 0] * e1 + K[0, 1] * e2)
        u2 = dd2 - yh2 - (K[1, 0] * e1 + K[1, 1] * e2)
        for i in range(q):
            cphi[i] += 0.5 * h * (phi_prev[i] + phi[i])
            phi_prev[i] = phi[i]
        cu[0] += 0.5 * h * (u1_prev + u1)
        cu[1] += 0.5 * h * (u2_prev + u2)
        u1_prev = u1
        u2_prev = u2
        slot = (k + 1) % ring
        rx[slot, 0] = x1
        rx[slot, 1] = x2
        for i in range(q):
            rcphi[slot, i] = cphi[i]
        rcu[slot, 0] = cu[0]
        rcu[slot, 1] = cu[1]

        # filtered pair once the window is strictly full
        kq = (k + 1) - sb
        if kq > _GRID_SNAP:
            i0 = int(np.floor(kq + _GRID_SNAP))
            w = kq - i0
            s0 = i0 % ring
            if w < _GRID_SNAP:
                for i in range(q):
                    pf[i] = cphi[i] - rcphi[s0, i]
                uf1 = x1 - rx[s0, 0] - (cu[0] - rcu[s0, 0])
                uf2 = x2 - rx[s0, 1] - (cu[1] - rcu[s0, 1])
            else:
                s1 = (i0 + 1) % ring
                for i in range(q):
                    pf[i] = cphi[i] - ((1.0 - w) * rcphi[s0, i] + w * rcphi[s1, i])
                uf1 = x1 - ((1.0 - w) * rx[s0, 0] + w * rx[s1, 0]) \
                    - (cu[0] - ((1.0 - w) * rcu[s0, 0] + w * rcu[s1, 0]))
                uf2 = x2 - ((1.0 - w) * rx[s0, 1] + w * rx[s1, 1]) \
                    - (cu[1] - ((1.0 - w) * rcu[s0, 1] + w * rcu[s1, 1]))

            r1 = uf1
            r2 = uf2
            for i in range(q):
                r1 -= pf[i] * theta_true[i]
                r2 -= pf[i] * theta_true[q + i]
            res = np.hypot(r1, r2)
            if res > l1_max:
                l1_max = res

            nf2 = 0.0
            for i in range(q):
                nf2 += pf[i] * pf[i]
            dnorm = 1.0 + kappa * 2.0 * nf2
            B_c = np.empty((q, q))
            for i in range(q):
                for j in range(q):
                    B_c[i, j] = pf[i] * pf[j] / dnorm
            c_c = np.empty(2 * q)
            for i in range(q):
                c_c[i] = uf1 * pf[i] / dnorm
                c_c[q + i] = uf2 * pf[i] / dnorm

            changed = False
            if count < n_slots:
                A_stack[count] = B_c
                b_stack[count] = c_c
                count += 1
                jrep = -1
                lnew = -1.0          # recomputed after the rebuild below
                changed = True
            else:
                jrep, lnew = try_insert_terms(A_stack, b_stack, S, B_c, c_c,
                                              lmin, ybar, delta)
                if jrep >= 0:
                    changed = True
            if changed:
                for i in range(q):
                    for j in range(q):
                        s = 0.0
                        for m in range(count):
                            s += A_stack[m, i, j]
                        S[i, j] = s
                for i in range(2 * q):
                    s = 0.0
                    for m in range(count):
                        s += b_stack[m, i]
                    Ub[i // q, i % q] = s
                # replacements reuse the eigenvalue from the acceptance test
                # (the rebuilt sum differs only by summation order)
                lmin = np.linalg.eigvalsh(S)[0] if jrep < 0 else lnew
                ev_t[n_ev] = t1
                ev_j[n_ev] = jrep
                ev_l[n_ev] = lmin
                n_ev += 1
                if t_first_rich < 0.0 and lmin >= ybar:
                    t_first_rich = t1
            if t_first_rich >= 0.0 and lmin < lmin_min_after:
                lmin_min_after = lmin

        # diagnostics
        e_now = np.hypot(e1, e2)
        terr = 0.0
        thn = 0.0
        for i in range(p):
            d = theta_true[i] - th[i]
            terr += d * d
            thn += th[i] * th[i]
        terr = np.sqrt(terr)
        thn = np.sqrt(thn)
        if thn > max_th_norm:
            max_th_norm = thn
        if met_lo <= t1 <= met_hi:
            sum_e2 += e_now * e_now
            n_e2 += 1
        if z_lo <= t1 <= z_hi:
            z = np.sqrt(e_now * e_now + terr * terr)
            if z > max_z:
                max_z = z
        if p2p_lo <= t1 <= p2p_hi:
            if terr > p2p_max:
                p2p_max = terr
            if terr < p2p_min:
                p2p_min = terr
        if (k + 1) % decimate == 0 or k + 1 == n_steps:
            rec_t[n_out] = t1
            rec_e[n_out] = e_now
            rec_terr[n_out] = terr
            n_out += 1

    return (rec_t, rec_e, rec_terr, n_out, th,
            ev_t, ev_j, ev_l, n_ev,
            S, Ub, count, lmin,
            max_th_norm, l1_max, sum_e2, n_e2, max_z,
            p2p_max, p2p_min, div_step, t_first_rich, lmin_min_after)
