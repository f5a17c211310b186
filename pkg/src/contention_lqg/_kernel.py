"""Compiled single-loop episode kernel for the abstracted channel.

The kernel advances the closed loop in error coordinates: the filter error
and the scheduler's prediction error follow their own recursions, driven
only by the injected noise and the success feedback.  This makes the
trigger/success sequences independent of the control gain by construction
(bit-for-bit), while the true state is carried alongside for the direct
cost and divergence monitoring.

All randomness is pre-drawn: per-slot process noise, measurement noise,
one scheduler uniform and one channel uniform.  The scheduler's
exponential threshold is obtained from its uniform by inverse CDF, so one
draw is consumed per slot regardless of the branch taken.
"""
from __future__ import annotations

import numpy as np
from numba import njit

POLICY_PST = 0
POLICY_STETT = 1
POLICY_CETT = 2

ERR_NONE = 0
ERR_STETT_COLLISION = 1
ERR_PSI_NOT_PD = 2


@njit(cache=True)
def _mv(mat, x, out):
    rows, cols = mat.shape
    for i in range(rows):
        acc = 0.0
        for j in range(cols):
            acc += mat[i, j] * x[j]
        out[i] = acc


@njit(cache=True)
def _quad(mat, x):
    n = mat.shape[0]
    acc = 0.0
    for i in range(n):
        row = 0.0
        for j in range(n):
            row += mat[i, j] * x[j]
        acc += x[i] * row
    return acc


@njit(cache=True)
def _outer_add(acc, x):
    n = x.shape[0]
    for i in range(n):
        for j in range(n):
            acc[i, j] += x[i] * x[j]


@njit(cache=True)
def _sandwich(a, mid, scale, add, out, tmp):
    # out = scale * a @ mid @ a.T + add
    n = a.shape[0]
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(n):
                acc += a[i, k] * mid[k, j]
            tmp[i, j] = acc
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(n):
                acc += tmp[i, k] * a[j, k]
            out[i, j] = scale * acc + add[i, j]


@njit(cache=True)
def _chol_quad(psi, e, lower, y):
    """Return e' psi^-1 e via Cholesky, or -1.0 if psi is not PD."""
    n = psi.shape[0]
    for i in range(n):
        for j in range(i + 1):
            acc = psi[i, j]
            for k in range(j):
                acc -= lower[i, k] * lower[j, k]
            if i == j:
                if acc <= 0.0:
                    return -1.0
                lower[i, i] = np.sqrt(acc)
            else:
                lower[i, j] = acc / lower[j, j]
    total = 0.0
    for i in range(n):
        acc = e[i]
        for k in range(i):
            acc -= lower[i, k] * y[k]
        y[i] = acc / lower[i, i]
        total += y[i] * y[i]
    return total


@njit(cache=True)
def episode_kernel(A, B, C, K, L, Y, Qc, R, Phi,
                   policy, p, lam, q,
                   x0, ehat0,
                   w, v, u_sched, u_chan,
                   div_threshold,
                   trig_bins, tot_bins,
                   want_moments, post0_outer, postc_outer, ehat_outer,
                   ebar_d_cnt, ebar_d_sum, ebar_d_sumsq,
                   want_trace, delta_tr, sigma_tr, epred_tr, ebar_tr, x_tr, u_tr):
    T = w.shape[0]
    n = A.shape[0]
    mu = B.shape[1]

    x = x0.copy()
    ehat_pred = ehat0.copy()
    e_carry = np.zeros(n)
    psi = Phi.copy()
    psi_next = np.empty((n, n))
    mtmp = np.empty((n, n))
    chol = np.zeros((n, n))
    solve_buf = np.empty(n)

    cv = np.empty(C.shape[0])
    li = np.empty(n)
    ehat_upd = np.empty(n)
    e_pred = np.empty(n)
    e_upd = np.empty(n)
    ebar = np.empty(n)
    xb = np.empty(n)
    u_vec = np.empty(mu)
    ax = np.empty(n)
    bu = np.empty(n)

    fallback = False
    d = 1            # slots since last success (episode starts as if post-success)
    collided = 0     # collision since last success
    pend = 0         # 0 none, 1 no-trigger, 2 collision (post-success conditioning)

    cost_err = 0.0
    cost_direct = 0.0
    n_trig = 0
    n_succ = 0
    n_coll = 0
    post_tot = 0
    post_trig = 0
    post0_cnt = 0
    postc_cnt = 0
    diverged = 0
    max_norm = 0.0
    err_code = ERR_NONE
    slots_done = T
    d_cap = tot_bins.shape[0]
    d_mom = ebar_d_cnt.shape[0]

    for k in range(T):
        # innovation-driven errors
        for i in range(cv.shape[0]):
            acc = v[k, i]
            for j in range(n):
                acc += C[i, j] * ehat_pred[j]
            cv[i] = acc
        _mv(L, cv, li)
        for i in range(n):
            ehat_upd[i] = ehat_pred[i] - li[i]
            e_pred[i] = e_carry[i] + li[i]

        # conditioning set up on the previous post-success slot
        if pend == 1:
            post0_cnt += 1
            _outer_add(post0_outer, e_pred)
        elif pend == 2:
            postc_cnt += 1
            _outer_add(postc_outer, e_pred)
        pend = 0

        # decision
        if policy == POLICY_PST or fallback:
            delta = u_sched[k] < p
        else:
            if lam <= 0.0:
                delta = False
            else:
                qf = _chol_quad(psi, e_pred, chol, solve_buf)
                if qf < 0.0:
                    err_code = ERR_PSI_NOT_PD
                    slots_done = k
                    break
                r = -np.log1p(-u_sched[k]) / lam
                delta = 0.5 * qf > r
        rho = u_chan[k] < q
        sigma = delta and rho
        coll = delta and not rho

        db = d if d < d_cap else d_cap
        tot_bins[db - 1, collided] += 1
        if delta:
            trig_bins[db - 1, collided] += 1
            n_trig += 1
        if sigma:
            n_succ += 1
        if coll:
            n_coll += 1
        if d == 1:
            post_tot += 1
            if delta:
                post_trig += 1
            if not delta:
                pend = 1
            elif coll:
                pend = 2

        # remote error and costs
        for i in range(n):
            e_upd[i] = 0.0 if sigma else e_pred[i]
            ebar[i] = ehat_upd[i] + e_upd[i]
            xb[i] = x[i] - ebar[i]
        cost_err += _quad(Y, ebar)
        _mv(K, xb, u_vec)
        cost_direct += _quad(Qc, x) + _quad(R, u_vec)

        if want_moments:
            _outer_add(ehat_outer, ehat_upd)
            if d <= d_mom:
                ebar_d_cnt[d - 1] += 1
                for i in range(n):
                    ebar_d_sum[d - 1, i] += ebar[i]
                    ebar_d_sumsq[d - 1, i] += ebar[i] * ebar[i]
        if want_trace:
            delta_tr[k] = 1 if delta else 0
            sigma_tr[k] = 1 if sigma else 0
            for i in range(n):
                epred_tr[k, i] = e_pred[i]
                ebar_tr[k, i] = ebar[i]
                x_tr[k, i] = x[i]
            for i in range(mu):
                u_tr[k, i] = u_vec[i]

        # advance plant and error recursions
        _mv(A, x, ax)
        _mv(B, u_vec, bu)
        for i in range(n):
            x[i] = ax[i] + bu[i] + w[k, i]
        _mv(A, ehat_upd, ax)
        for i in range(n):
            ehat_pred[i] = ax[i] + w[k, i]
        if sigma:
            for i in range(n):
                e_carry[i] = 0.0
        else:
            _mv(A, e_upd, ax)
            for i in range(n):
                e_carry[i] = ax[i]

        # scheduler covariance and mode
        if policy != POLICY_PST:
            if sigma:
                for i in range(n):
                    for j in range(n):
                        psi[i, j] = Phi[i, j]
                fallback = False
            elif not fallback:
                if not delta:
                    _sandwich(A, psi, 1.0 / (1.0 + lam), Phi, psi_next, mtmp)
                    for i in range(n):
                        for j in range(n):
                            psi[i, j] = psi_next[i, j]
                elif coll:
                    if policy == POLICY_STETT:
                        err_code = ERR_STETT_COLLISION
                        slots_done = k + 1
                        break
                    fallback = True

        if sigma:
            d = 1
            collided = 0
        else:
            if d < 2**60:
                d += 1
            if coll:
                collided = 1

        nx = 0.0
        for i in range(n):
            nx += x[i] * x[i]
        nx = np.sqrt(nx)
        if nx > max_norm:
            max_norm = nx
        if nx > div_threshold:
            diverged = 1
            slots_done = k + 1
            break

    return (slots_done, cost_err, cost_direct, n_trig, n_succ, n_coll,
            post_tot, post_trig, post0_cnt, postc_cnt, diverged, max_norm,
            err_code)
