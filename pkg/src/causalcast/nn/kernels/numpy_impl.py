"""Pure numpy recurrent sequence kernels (fallback backend).

All arrays are float64 with time as the leading axis: inputs are
(steps, batch, in_dim). Forward kernels return the hidden trajectory with
the initial all-zero state at index 0 plus per-step gate caches; backward
kernels consume those caches and upstream gradients per output step.
"""

from __future__ import annotations

import numpy as np


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def gru_forward(x, wz, wr, wh, uz, ur, uh, bz, br, bh):
    steps, batch, _ = x.shape
    units = wz.shape[1]
    h_seq = np.zeros((steps + 1, batch, units))
    z_seq = np.empty((steps, batch, units))
    r_seq = np.empty((steps, batch, units))
    c_seq = np.empty((steps, batch, units))
    for t in range(steps):
        h = h_seq[t]
        z = _sigmoid(x[t] @ wz + h @ uz + bz)
        r = _sigmoid(x[t] @ wr + h @ ur + br)
        c = np.tanh(x[t] @ wh + (r * h) @ uh + bh)
        z_seq[t], r_seq[t], c_seq[t] = z, r, c
        h_seq[t + 1] = (1.0 - z) * h + z * c
    return h_seq, z_seq, r_seq, c_seq


def gru_backward(dh_out, x, h_seq, z_seq, r_seq, c_seq, wz, wr, wh, uz, ur, uh):
    steps, batch, in_dim = x.shape
    dx = np.empty_like(x)
    dwz, dwr, dwh = np.zeros_like(wz), np.zeros_like(wr), np.zeros_like(wh)
    duz, dur, duh = np.zeros_like(uz), np.zeros_like(ur), np.zeros_like(uh)
    units = wz.shape[1]
    dbz, dbr, dbh = np.zeros(units), np.zeros(units), np.zeros(units)
    carry = np.zeros((batch, units))
    for t in range(steps - 1, -1, -1):
        g = dh_out[t] + carry
        h, z, r, c = h_seq[t], z_seq[t], r_seq[t], c_seq[t]
        da_z = g * (c - h) * z * (1.0 - z)
        da_c = g * z * (1.0 - c * c)
        dh = g * (1.0 - z)
        drh = da_c @ uh.T
        da_r = drh * h * r * (1.0 - r)
        dh = dh + drh * r + da_z @ uz.T + da_r @ ur.T
        dx[t] = da_z @ wz.T + da_r @ wr.T + da_c @ wh.T
        dwz += x[t].T @ da_z
        dwr += x[t].T @ da_r
        dwh += x[t].T @ da_c
        duz += h.T @ da_z
        dur += h.T @ da_r
        duh += (r * h).T @ da_c
        dbz += da_z.sum(axis=0)
        dbr += da_r.sum(axis=0)
        dbh += da_c.sum(axis=0)
        carry = dh
    return dx, dwz, dwr, dwh, duz, dur, duh, dbz, dbr, dbh


def lstm_forward(x, wf, wi, wo, wg, uf, ui, uo, ug, bf, bi, bo, bg):
    steps, batch, _ = x.shape
    units = wf.shape[1]
    h_seq = np.zeros((steps + 1, batch, units))
    c_seq = np.zeros((steps + 1, batch, units))
    f_seq = np.empty((steps, batch, units))
    i_seq = np.empty((steps, batch, units))
    o_seq = np.empty((steps, batch, units))
    g_seq = np.empty((steps, batch, units))
    for t in range(steps):
        h, c = h_seq[t], c_seq[t]
        f = _sigmoid(x[t] @ wf + h @ uf + bf)
        i = _sigmoid(x[t] @ wi + h @ ui + bi)
        o = _sigmoid(x[t] @ wo + h @ uo + bo)
        g = np.tanh(x[t] @ wg + h @ ug + bg)
        f_seq[t], i_seq[t], o_seq[t], g_seq[t] = f, i, o, g
        c_seq[t + 1] = f * c + i * g
        h_seq[t + 1] = o * np.tanh(c_seq[t + 1])
    return h_seq, c_seq, f_seq, i_seq, o_seq, g_seq


def lstm_backward(dh_out, x, h_seq, c_seq, f_seq, i_seq, o_seq, g_seq,
                  wf, wi, wo, wg, uf, ui, uo, ug):
    steps, batch, in_dim = x.shape
    units = wf.shape[1]
    dx = np.empty_like(x)
    dwf, dwi, dwo, dwg = (np.zeros_like(wf), np.zeros_like(wi),
                          np.zeros_like(wo), np.zeros_like(wg))
    duf, dui, duo, dug = (np.zeros_like(uf), np.zeros_like(ui),
                          np.zeros_like(uo), np.zeros_like(ug))
    dbf, dbi, dbo, dbg = (np.zeros(units), np.zeros(units),
                          np.zeros(units), np.zeros(units))
    dh = np.zeros((batch, units))
    dc = np.zeros((batch, units))
    for t in range(steps - 1, -1, -1):
        gh = dh_out[t] + dh
        f, i, o, g = f_seq[t], i_seq[t], o_seq[t], g_seq[t]
        c_prev, h_prev = c_seq[t], h_seq[t]
        tc = np.tanh(c_seq[t + 1])
        da_o = gh * tc * o * (1.0 - o)
        gc = dc + gh * o * (1.0 - tc * tc)
        da_f = gc * c_prev * f * (1.0 - f)
        da_i = gc * g * i * (1.0 - i)
        da_g = gc * i * (1.0 - g * g)
        dc = gc * f
        dh = da_f @ uf.T + da_i @ ui.T + da_o @ uo.T + da_g @ ug.T
        dx[t] = da_f @ wf.T + da_i @ wi.T + da_o @ wo.T + da_g @ wg.T
        dwf += x[t].T @ da_f
        dwi += x[t].T @ da_i
        dwo += x[t].T @ da_o
        dwg += x[t].T @ da_g
        duf += h_prev.T @ da_f
        dui += h_prev.T @ da_i
        duo += h_prev.T @ da_o
        dug += h_prev.T @ da_g
        dbf += da_f.sum(axis=0)
        dbi += da_i.sum(axis=0)
        dbo += da_o.sum(axis=0)
        dbg += da_g.sum(axis=0)
    return (dx, dwf, dwi, dwo, dwg, duf, dui, duo, dug, dbf, dbi, dbo, dbg)
