# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled recurrent sequence kernels.

Same contracts as numpy_impl: time-major float64 arrays, zero initial
states, per-step gate caches. Matrix products go through BLAS dgemm; the
gate nonlinearities are fused C loops, which removes the per-timestep
Python dispatch cost that dominates the numpy backend at these layer sizes.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


cdef inline double _sigmoid(double v) noexcept nogil:
    return 1.0 / (1.0 + exp(-v))


cdef void _gemm(bint ta, bint tb, int m, int n, int k, double alpha,
                double* a, double* b, double beta, double* c) noexcept nogil:
    """Row-major C[m,n] = alpha*op(A)@op(B) + beta*C via Fortran dgemm.

    Works on the transposed problem: the Fortran view of row-major C is
    C^T, and C^T = op(B)^T op(A)^T, so operands swap and flags flip.
    """
    cdef char transa = b'T' if tb else b'N'
    cdef char transb = b'T' if ta else b'N'
    cdef int lda = k if tb else n   # stored column count of B
    cdef int ldb = m if ta else k   # stored column count of A
    cdef int ldc = n
    dgemm(&transa, &transb, &n, &m, &k, &alpha, b, &lda, a, &ldb, &beta, c, &ldc)


def gru_forward(double[:, :, ::1] x,
                double[:, ::1] wz, double[:, ::1] wr, double[:, ::1] wh,
                double[:, ::1] uz, double[:, ::1] ur, double[:, ::1] uh,
                double[::1] bz, double[::1] br, double[::1] bh):
    cdef int steps = x.shape[0], batch = x.shape[1], d = x.shape[2]
    cdef int units = wz.shape[1]
    h_seq_arr = np.zeros((steps + 1, batch, units))
    z_arr = np.empty((steps, batch, units))
    r_arr = np.empty((steps, batch, units))
    c_arr = np.empty((steps, batch, units))
    az_arr = np.empty((batch, units))
    ar_arr = np.empty((batch, units))
    ac_arr = np.empty((batch, units))
    rh_arr = np.empty((batch, units))
    cdef double[:, :, ::1] h_seq = h_seq_arr
    cdef double[:, :, ::1] z_seq = z_arr, r_seq = r_arr, c_seq = c_arr
    cdef double[:, ::1] az = az_arr, ar = ar_arr, ac = ac_arr, rh = rh_arr
    cdef int t, i, j
    cdef double zv, rv, cv

    with nogil:
        for t in range(steps):
            _gemm(0, 0, batch, units, d, 1.0, &x[t, 0, 0], &wz[0, 0], 0.0, &az[0, 0])
            _gemm(0, 0, batch, units, units, 1.0, &h_seq[t, 0, 0], &uz[0, 0], 1.0, &az[0, 0])
            _gemm(0, 0, batch, units, d, 1.0, &x[t, 0, 0], &wr[0, 0], 0.0, &ar[0, 0])
            _gemm(0, 0, batch, units, units, 1.0, &h_seq[t, 0, 0], &ur[0, 0], 1.0, &ar[0, 0])
            for i in range(batch):
                for j in range(units):
                    zv = _sigmoid(az[i, j] + bz[j])
                    rv = _sigmoid(ar[i, j] + br[j])
                    z_seq[t, i, j] = zv
                    r_seq[t, i, j] = rv
                    rh[i, j] = rv * h_seq[t, i, j]
            _gemm(0, 0, batch, units, d, 1.0, &x[t, 0, 0], &wh[0, 0], 0.0, &ac[0, 0])
            _gemm(0, 0, batch, units, units, 1.0, &rh[0, 0], &uh[0, 0], 1.0, &ac[0, 0])
            for i in range(batch):
                for j in range(units):
                    cv = tanh(ac[i, j] + bh[j])
                    c_seq[t, i, j] = cv
                    zv = z_seq[t, i, j]
                    h_seq[t + 1, i, j] = (1.0 - zv) * h_seq[t, i, j] + zv * cv
    return h_seq_arr, z_arr, r_arr, c_arr


def gru_backward(double[:, :, ::1] dh_out, double[:, :, ::1] x,
                 double[:, :, ::1] h_seq,
                 double[:, :, ::1] z_seq, double[:, :, ::1] r_seq, double[:, :, ::1] c_seq,
                 double[:, ::1] wz, double[:, ::1] wr, double[:, ::1] wh,
                 double[:, ::1] uz, double[:, ::1] ur, double[:, ::1] uh):
    cdef int steps = x.shape[0], batch = x.shape[1], d = x.shape[2]
    cdef int units = wz.shape[1]
    dx_arr = np.empty((steps, batch, d))
    dwz_arr = np.zeros((d, units)); dwr_arr = np.zeros((d, units)); dwh_arr = np.zeros((d, units))
    duz_arr = np.zeros((units, units)); dur_arr = np.zeros((units, units)); duh_arr = np.zeros((units, units))
    dbz_arr = np.zeros(units); dbr_arr = np.zeros(units); dbh_arr = np.zeros(units)
    g_arr = np.zeros((batch, units))
    daz_arr = np.empty((batch, units)); dar_arr = np.empty((batch, units)); dac_arr = np.empty((batch, units))
    drh_arr = np.empty((batch, units)); carry_arr = np.zeros((batch, units)); rh_arr = np.empty((batch, units))
    cdef double[:, :, ::1] dx = dx_arr
    cdef double[:, ::1] dwz = dwz_arr, dwr = dwr_arr, dwh = dwh_arr
    cdef double[:, ::1] duz = duz_arr, dur = dur_arr, duh = duh_arr
    cdef double[::1] dbz = dbz_arr, dbr = dbr_arr, dbh = dbh_arr
    cdef double[:, ::1] g = g_arr, daz = daz_arr, dar = dar_arr, dac = dac_arr
    cdef double[:, ::1] drh = drh_arr, carry = carry_arr, rh = rh_arr
    cdef int t, i, j
    cdef double gv, hv, zv, rv, cv, dzv, dcv, drhv

    with nogil:
        for t in range(steps - 1, -1, -1):
            for i in range(batch):
                for j in range(units):
                    gv = dh_out[t, i, j] + carry[i, j]
                    g[i, j] = gv
                    hv = h_seq[t, i, j]
                    zv = z_seq[t, i, j]
                    cv = c_seq[t, i, j]
                    daz[i, j] = gv * (cv - hv) * zv * (1.0 - zv)
                    dac[i, j] = gv * zv * (1.0 - cv * cv)
                    carry[i, j] = gv * (1.0 - zv)
            # drh = dac @ uh^T
            _gemm(0, 1, batch, units, units, 1.0, &dac[0, 0], &uh[0, 0], 0.0, &drh[0, 0])
            for i in range(batch):
                for j in range(units):
                    hv = h_seq[t, i, j]
                    rv = r_seq[t, i, j]
                    dar[i, j] = drh[i, j] * hv * rv * (1.0 - rv)
                    carry[i, j] += drh[i, j] * rv
                    rh[i, j] = rv * hv
                    dbz[j] += daz[i, j]
                    dbr[j] += dar[i, j]
                    dbh[j] += dac[i, j]
            _gemm(0, 1, batch, units, units, 1.0, &daz[0, 0], &uz[0, 0], 1.0, &carry[0, 0])
            _gemm(0, 1, batch, units, units, 1.0, &dar[0, 0], &ur[0, 0], 1.0, &carry[0, 0])
            _gemm(0, 1, batch, d, units, 1.0, &daz[0, 0], &wz[0, 0], 0.0, &dx[t, 0, 0])
            _gemm(0, 1, batch, d, units, 1.0, &dar[0, 0], &wr[0, 0], 1.0, &dx[t, 0, 0])
            _gemm(0, 1, batch, d, units, 1.0, &dac[0, 0], &wh[0, 0], 1.0, &dx[t, 0, 0])
            _gemm(1, 0, d, units, batch, 1.0, &x[t, 0, 0], &daz[0, 0], 1.0, &dwz[0, 0])
            _gemm(1, 0, d, units, batch, 1.0, &x[t, 0, 0], &dar[0, 0], 1.0, &dwr[0, 0])
            _gemm(1, 0, d, units, batch, 1.0, &x[t, 0, 0], &dac[0, 0], 1.0, &dwh[0, 0])
            _gemm(1, 0, units, units, batch, 1.0, &h_seq[t, 0, 0], &daz[0, 0], 1.0, &duz[0, 0])
            _gemm(1, 0, units, units, batch, 1.0, &h_seq[t, 0, 0], &dar[0, 0], 1.0, &dur[0, 0])
            _gemm(1, 0, units, units, batch, 1.0, &rh[0, 0], &dac[0, 0], 1.0, &duh[0, 0])
    return (dx_arr, dwz_arr, dwr_arr, dwh_arr, duz_arr, dur_arr, duh_arr,
            dbz_arr, dbr_arr, dbh_arr)


def lstm_forward(double[:, :, ::1] x,
                 double[:, ::1] wf, double[:, ::1] wi, double[:, ::1] wo, double[:, ::1] wg,
                 double[:, ::1] uf, double[:, ::1] ui, double[:, ::1] uo, double[:, ::1] ug,
                 double[::1] bf, double[::1] bi, double[::1] bo, double[::1] bg):
    cdef int steps = x.shape[0], batch = x.shape[1], d = x.shape[2]
    cdef int units = wf.shape[1]
    h_seq_arr = np.zeros((steps + 1, batch, units))
    c_seq_arr = np.zeros((steps + 1, batch, units))
    f_arr = np.empty((steps, batch, units)); i_arr = np.empty((steps, batch, units))
    o_arr = np.empty((steps, batch, units)); g_arr = np.empty((steps, batch, units))
    af_arr = np.empty((batch, units)); ai_arr = np.empty((batch, units))
    ao_arr = np.empty((batch, units)); ag_arr = np.empty((batch, units))
    cdef double[:, :, ::1] h_seq = h_seq_arr, c_seq = c_seq_arr
    cdef double[:, :, ::1] f_seq = f_arr, i_seq = i_arr, o_seq = o_arr, g_seq = g_arr
    cdef double[:, ::1] af = af_arr, ai = ai_arr, ao = ao_arr, ag = ag_arr
    cdef int t, i, j
    cdef double fv, iv, ov, gv, cv

    with nogil:
        for t in range(steps):
            _gemm(0, 0, batch, units, d, 1.0, &x[t, 0, 0], &wf[0, 0], 0.0, &af[0, 0])
            _gemm(0, 0, batch, units, units, 1.0, &h_seq[t, 0, 0], &uf[0, 0], 1.0, &af[0, 0])
            _gemm(0, 0, batch, units, d, 1.0, &x[t, 0, 0], &wi[0, 0], 0.0, &ai[0, 0])
            _gemm(0, 0, batch, units, units, 1.0, &h_seq[t, 0, 0], &ui[0, 0], 1.0, &ai[0, 0])
            _gemm(0, 0, batch, units, d, 1.0, &x[t, 0, 0], &wo[0, 0], 0.0, &ao[0, 0])
            _gemm(0, 0, batch, units, units, 1.0, &h_seq[t, 0, 0], &uo[0, 0], 1.0, &ao[0, 0])
            _gemm(0, 0, batch, units, d, 1.0, &x[t, 0, 0], &wg[0, 0], 0.0, &ag[0, 0])
            _gemm(0, 0, batch, units, units, 1.0, &h_seq[t, 0, 0], &ug[0, 0], 1.0, &ag[0, 0])
            for i in range(batch):
                for j in range(units):
                    fv = _sigmoid(af[i, j] + bf[j])
                    iv = _sigmoid(ai[i, j] + bi[j])
                    ov = _sigmoid(ao[i, j] + bo[j])
                    gv = tanh(ag[i, j] + bg[j])
                    f_seq[t, i, j] = fv
                    i_seq[t, i, j] = iv
                    o_seq[t, i, j] = ov
                    g_seq[t, i, j] = gv
                    cv = fv * c_seq[t, i, j] + iv * gv
                    c_seq[t + 1, i, j] = cv
                    h_seq[t + 1, i, j] = ov * tanh(cv)
    return h_seq_arr, c_seq_arr, f_arr, i_arr, o_arr, g_arr


def lstm_backward(double[:, :, ::1] dh_out, double[:, :, ::1] x,
                  double[:, :, ::1] h_seq, double[:, :, ::1] c_seq,
                  double[:, :, ::1] f_seq, double[:, :, ::1] i_seq,
                  double[:, :, ::1] o_seq, double[:, :, ::1] g_seq,
                  double[:, ::1] wf, double[:, ::1] wi, double[:, ::1] wo, double[:, ::1] wg,
                  double[:, ::1] uf, double[:, ::1] ui, double[:, ::1] uo, double[:, ::1] ug):
    cdef int steps = x.shape[0], batch = x.shape[1], d = x.shape[2]
    cdef int units = wf.shape[1]
    dx_arr = np.empty((steps, batch, d))
    dwf_arr = np.zeros((d, units)); dwi_arr = np.zeros((d, units))
    dwo_arr = np.zeros((d, units)); dwg_arr = np.zeros((d, units))
    duf_arr = np.zeros((units, units)); dui_arr = np.zeros((units, units))
    duo_arr = np.zeros((units, units)); dug_arr = np.zeros((units, units))
    dbf_arr = np.zeros(units); dbi_arr = np.zeros(units)
    dbo_arr = np.zeros(units); dbg_arr = np.zeros(units)
    daf_arr = np.empty((batch, units)); dai_arr = np.empty((batch, units))
    dao_arr = np.empty((batch, units)); dag_arr = np.empty((batch, units))
    dh_arr = np.zeros((batch, units)); dc_arr = np.zeros((batch, units))
    cdef double[:, :, ::1] dx = dx_arr
    cdef double[:, ::1] dwf = dwf_arr, dwi = dwi_arr, dwo = dwo_arr, dwg = dwg_arr
    cdef double[:, ::1] duf = duf_arr, dui = dui_arr, duo = duo_arr, dug = dug_arr
    cdef double[::1] dbf = dbf_arr, dbi = dbi_arr, dbo = dbo_arr, dbg = dbg_arr
    cdef double[:, ::1] daf = daf_arr, dai = dai_arr, dao = dao_arr, dag = dag_arr
    cdef double[:, ::1] dh = dh_arr, dc = dc_arr
    cdef int t, i, j
    cdef double ghv, gcv, fv, iv, ov, gv, tc

    with nogil:
        for t in range(steps - 1, -1, -1):
            for i in range(batch):
                for j in range(units):
                    ghv = dh_out[t, i, j] + dh[i, j]
                    fv = f_seq[t, i, j]
                    iv = i_seq[t, i, j]
                    ov = o_seq[t, i, j]
                    gv = g_seq[t, i, j]
                    tc = tanh(c_seq[t + 1, i, j])
                    dao[i, j] = ghv * tc * ov * (1.0 - ov)
                    gcv = dc[i, j] + ghv * ov * (1.0 - tc * tc)
                    daf[i, j] = gcv * c_seq[t, i, j] * fv * (1.0 - fv)
                    dai[i, j] = gcv * gv * iv * (1.0 - iv)
                    dag[i, j] = gcv * iv * (1.0 - gv * gv)
                    dc[i, j] = gcv * fv
                    dbf[j] += daf[i, j]
                    dbi[j] += dai[i, j]
                    dbo[j] += dao[i, j]
                    dbg[j] += dag[i, j]
            _gemm(0, 1, batch, units, units, 1.0, &daf[0, 0], &uf[0, 0], 0.0, &dh[0, 0])
            _gemm(0, 1, batch, units, units, 1.0, &dai[0, 0], &ui[0, 0], 1.0, &dh[0, 0])
            _gemm(0, 1, batch, units, units, 1.0, &dao[0, 0], &uo[0, 0], 1.0, &dh[0, 0])
            _gemm(0, 1, batch, units, units, 1.0, &dag[0, 0], &ug[0, 0], 1.0, &dh[0, 0])
            _gemm(0, 1, batch, d, units, 1.0, &daf[0, 0], &wf[0, 0], 0.0, &dx[t, 0, 0])
            _gemm(0, 1, batch, d, units, 1.0, &dai[0, 0], &wi[0, 0], 1.0, &dx[t, 0, 0])
            _gemm(0, 1, batch, d, units, 1.0, &dao[0, 0], &wo[0, 0], 1.0, &dx[t, 0, 0])
            _gemm(0, 1, batch, d, units, 1.0, &dag[0, 0], &wg[0, 0], 1.0, &dx[t, 0, 0])
            _gemm(1, 0, d, units, batch, 1.0, &x[t, 0, 0], &daf[0, 0], 1.0, &dwf[0, 0])
            _gemm(1, 0, d, units, batch, 1.0, &x[t, 0, 0], &dai[0, 0], 1.0, &dwi[0, 0])
            _gemm(1, 0, d, units, batch, 1.0, &x[t, 0, 0], &dao[0, 0], 1.0, &dwo[0, 0])
            _gemm(1, 0, d, units, batch, 1.0, &x[t, 0, 0], &dag[0, 0], 1.0, &dwg[0, 0])
            _gemm(1, 0, units, units, batch, 1.0, &h_seq[t, 0, 0], &daf[0, 0], 1.0, &duf[0, 0])
            _gemm(1, 0, units, units, batch, 1.0, &h_seq[t, 0, 0], &dai[0, 0], 1.0, &dui[0, 0])
            _gemm(1, 0, units, units, batch, 1.0, &h_seq[t, 0, 0], &dao[0, 0], 1.0, &duo[0, 0])
            _gemm(1, 0, units, units, batch, 1.0, &h_seq[t, 0, 0], &dag[0, 0], 1.0, &dug[0, 0])
    return (dx_arr, dwf_arr, dwi_arr, dwo_arr, dwg_arr,
            duf_arr, dui_arr, duo_arr, dug_arr,
            dbf_arr, dbi_arr, dbo_arr, dbg_arr)
