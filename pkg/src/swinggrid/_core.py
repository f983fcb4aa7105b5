"""Compiled kernels for the integration hot loop.

Everything here operates on plain arrays; the object-level API lives in
dynamics.py. Line status codes match grid_model.LineStatus values
(0 = active, 1 = tripped by overload, 2 = removed with a faulted node).

Control layers enter as undirected edge lists (one entry per pair, i < j)
with a per-edge on/off mask and a per-node effective pinning vector, so
cyber co-failures are plain array masks.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def derivs(
    theta, omega, u_int,
    power, inertia, damping, removed,
    li, lj, lk, status,
    pei, pej, pe_on, pxi, gp,
    iei, iej, ie_on, ixi, gi, phase_form,
    dtheta, domega, du,
):
    n = theta.size
    for k in range(n):
        domega[k] = 0.0
        du[k] = 0.0

    # physical coupling K sin(theta_j - theta_i), accumulated per node
    for e in range(li.size):
        if status[e] == 0:
            a = li[e]
            b = lj[e]
            f = lk[e] * np.sin(theta[b] - theta[a])
            domega[a] += f
            domega[b] -= f

    # proportional layer: consensus on frequencies
    up = np.zeros(n)
    for e in range(pei.size):
        if pe_on[e]:
            a = pei[e]
            b = pej[e]
            d = omega[b] - omega[a]
            up[a] += d
            up[b] -= d

    # integral layer: consensus drives du/dt (frequency form) or the
    # input itself (phase-difference form)
    ic = np.zeros(n)
    if phase_form == 1:
        for e in range(iei.size):
            if ie_on[e]:
                a = iei[e]
                b = iej[e]
                d = theta[b] - theta[a]
                ic[a] += d
                ic[b] -= d
    else:
        for e in range(iei.size):
            if ie_on[e]:
                a = iei[e]
                b = iej[e]
                d = omega[b] - omega[a]
                ic[a] += d
                ic[b] -= d

    for k in range(n):
        if removed[k]:
            dtheta[k] = 0.0
            domega[k] = 0.0
            du[k] = 0.0
        else:
            if phase_form == 1:
                u_i_eff = gi * ixi[k] * ic[k]
            else:
                u_i_eff = u_int[k]
                du[k] = gi * ixi[k] * ic[k]
            domega[k] = (
                power[k] - damping[k] * omega[k] + domega[k]
                + gp * pxi[k] * up[k] + u_i_eff
            ) / inertia[k]
            dtheta[k] = omega[k]


@njit(cache=True)
def rk4_advance(
    theta, omega, u_int, dt,
    power, inertia, damping, removed,
    li, lj, lk, status,
    pei, pej, pe_on, pxi, gp,
    iei, iej, ie_on, ixi, gi, phase_form,
):
    """One classical RK4 step in place; topology is frozen for the step."""
    n = theta.size
    k1t = np.empty(n); k1w = np.empty(n); k1u = np.empty(n)
    k2t = np.empty(n); k2w = np.empty(n); k2u = np.empty(n)
    k3t = np.empty(n); k3w = np.empty(n); k3u = np.empty(n)
    k4t = np.empty(n); k4w = np.empty(n); k4u = np.empty(n)
    tt = np.empty(n); tw = np.empty(n); tu = np.empty(n)

    derivs(theta, omega, u_int, power, inertia, damping, removed,
           li, lj, lk, status, pei, pej, pe_on, pxi, gp,
           iei, iej, ie_on, ixi, gi, phase_form, k1t, k1w, k1u)
    for i in range(n):
        tt[i] = theta[i] + 0.5 * dt * k1t[i]
        tw[i] = omega[i] + 0.5 * dt * k1w[i]
        tu[i] = u_int[i] + 0.5 * dt * k1u[i]
    derivs(tt, tw, tu, power, inertia, damping, removed,
           li, lj, lk, status, pei, pej, pe_on, pxi, gp,
           iei, iej, ie_on, ixi, gi, phase_form, k2t, k2w, k2u)
    for i in range(n):
        tt[i] = theta[i] + 0.5 * dt * k2t[i]
        tw[i] = omega[i] + 0.5 * dt * k2w[i]
        tu[i] = u_int[i] + 0.5 * dt * k2u[i]
    derivs(tt, tw, tu, power, inertia, damping, removed,
           li, lj, lk, status, pei, pej, pe_on, pxi, gp,
           iei, iej, ie_on, ixi, gi, phase_form, k3t, k3w, k3u)
    for i in range(n):
        tt[i] = theta[i] + dt * k3t[i]
        tw[i] = omega[i] + dt * k3w[i]
        tu[i] = u_int[i] + dt * k3u[i]
    derivs(tt, tw, tu, power, inertia, damping, removed,
           li, lj, lk, status, pei, pej, pe_on, pxi, gp,
           iei, iej, ie_on, ixi, gi, phase_form, k4t, k4w, k4u)
    sixth = dt / 6.0
    for i in range(n):
        theta[i] += sixth * (k1t[i] + 2.0 * (k2t[i] + k3t[i]) + k4t[i])
        omega[i] += sixth * (k1w[i] + 2.0 * (k2w[i] + k3w[i]) + k4w[i])
        u_int[i] += sixth * (k1u[i] + 2.0 * (k2u[i] + k3u[i]) + k4u[i])


@njit(cache=True)
def find_overloads(theta, li, lj, lk, cap, status, out):
    """Indices of active lines with |flow| strictly above capacity."""
    count = 0
    for e in range(li.size):
        if status[e] == 0:
            f = lk[e] * np.sin(theta[lj[e]] - theta[li[e]])
            if abs(f) > cap[e]:
                out[count] = e
                count += 1
    return count


@njit(cache=True)
def run_segment(
    theta, omega, u_int, start_step, n_steps, dt,
    power, inertia, damping, removed,
    li, lj, lk, cap, status,
    pei, pej, pe_on, pxi, gp,
    iei, iej, ie_on, ixi, gi, phase_form,
    rec_stride, rec_step, rec_theta, rec_omega, rec_uint,
    trip_step, trip_line, n_trips,
):
    """Integrate n_steps, tripping overloaded lines after each step.

    Records post-step states at global steps divisible by rec_stride into
    the rec_* buffers (caller sizes them). Trips append to trip_step /
    trip_line starting at n_trips. Returns (n_trips, n_recorded, bad_step)
    with bad_step = -1 unless a non-finite state aborted the run.
    """
    n = theta.size
    scratch = np.empty(li.size, dtype=np.int64)
    n_rec = 0
    for s in range(n_steps):
        rk4_advance(theta, omega, u_int, dt,
                    power, inertia, damping, removed,
                    li, lj, lk, status,
                    pei, pej, pe_on, pxi, gp,
                    iei, iej, ie_on, ixi, gi, phase_form)
        gstep = start_step + s + 1

        total = 0.0
        for i in range(n):
            total += theta[i] + omega[i] + u_int[i]
        if not np.isfinite(total):
            return n_trips, n_rec, gstep

        hits = find_overloads(theta, li, lj, lk, cap, status, scratch)
        for h in range(hits):
            e = scratch[h]
            status[e] = 1
            trip_step[n_trips] = gstep
            trip_line[n_trips] = e
            n_trips += 1

        if gstep % rec_stride == 0:
            rec_step[n_rec] = gstep
            for i in range(n):
                rec_theta[n_rec, i] = theta[i]
                rec_omega[n_rec, i] = omega[i]
                rec_uint[n_rec, i] = u_int[i]
            n_rec += 1
    return n_trips, n_rec, -1
