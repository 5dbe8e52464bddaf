# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled propagation kernels (Dormand-Prince 5(4) + fixed RK4).

Mirrors py_backend.py exactly; see that module for the problem encoding.
"""
import numpy as np

from libc.math cimport exp, sqrt, fabs, pow, ceil

BACKEND_NAME = "cython"

cdef double SAFETY = 0.9
cdef double MIN_FACTOR = 0.2
cdef double MAX_FACTOR = 10.0
cdef long MAX_STEPS = 20000000


cdef inline int _seg_index(double[:, ::1] segs, double t) nogil:
    cdef int k
    for k in range(segs.shape[0] - 1):
        if t < segs[k, 1]:
            return k
    return segs.shape[0] - 1


cdef inline void _laws(double[:, ::1] segs, int si, double t,
                       double* om_p, double* om_s, double* dp, double* de) nogil:
    cdef double o0p = segs[si, 2], taup = segs[si, 3]
    cdef double o0s = segs[si, 4], taus = segs[si, 5]
    cdef double tenv = segs[si, 6], d0p = segs[si, 7], d0s = segs[si, 8]
    cdef double alpha = segs[si, 9], tch = segs[si, 10]
    cdef double s = t - tenv, x = t - tch
    om_p[0] = o0p if taup <= 0.0 else o0p * exp(-s * s / (2.0 * taup * taup))
    om_s[0] = o0s if taus <= 0.0 else o0s * exp(-s * s / (2.0 * taus * taus))
    dp[0] = d0p + alpha * x
    de[0] = dp[0] + d0s + alpha * x


cdef void _build_h(double[:, ::1] segs, int si, double t,
                   double[::1] n_i, double[::1] n_r, int rr_index, double v_int,
                   int[:, ::1] bonds_p, int[:, ::1] bonds_s,
                   double[:, ::1] H) nogil:
    cdef double om_p, om_s, dp, de
    cdef int i, j, b, dim = H.shape[0]
    _laws(segs, si, t, &om_p, &om_s, &dp, &de)
    for i in range(dim):
        for j in range(dim):
            H[i, j] = 0.0
    for i in range(dim):
        H[i, i] = dp * n_i[i] + de * n_r[i]
    H[rr_index, rr_index] = H[rr_index, rr_index] + v_int
    for b in range(bonds_p.shape[0]):
        i = bonds_p[b, 0]; j = bonds_p[b, 1]
        H[i, j] = H[i, j] - om_p
        H[j, i] = H[j, i] - om_p
    for b in range(bonds_s.shape[0]):
        i = bonds_s[b, 0]; j = bonds_s[b, 1]
        H[i, j] = H[i, j] - om_s
        H[j, i] = H[j, i] - om_s


cdef void _rhs(int kind, double[:, ::1] segs, int si, double t,
               double[::1] n_i, double[::1] n_r, int rr_index, double v_int,
               int[:, ::1] bonds_p, int[:, ::1] bonds_s,
               double[::1] ch_rate, int[::1] ch_ptr,
               int[::1] ch_src, int[::1] ch_dst, double[::1] damp,
               double complex* y, double complex* out,
               double[:, ::1] H) nogil:
    cdef int dim = H.shape[0]
    cdef int i, j, k, c, p, q, lo, hi
    cdef double complex acc_l, acc_r
    cdef double rate
    _build_h(segs, si, t, n_i, n_r, rr_index, v_int, bonds_p, bonds_s, H)
    if kind == 0:
        # -i H psi
        for i in range(dim):
            acc_l = 0.0
            for k in range(dim):
                acc_l = acc_l + H[i, k] * y[k]
            out[i] = -1j * acc_l
        return
    # -i (H rho - rho H)
    for i in range(dim):
        for j in range(dim):
            acc_l = 0.0
            acc_r = 0.0
            for k in range(dim):
                acc_l = acc_l + H[i, k] * y[k * dim + j]
                acc_r = acc_r + y[i * dim + k] * H[k, j]
            out[i * dim + j] = -1j * (acc_l - acc_r)
    # refill terms: rate * rho[src_p, src_q] -> drho[dst_p, dst_q]
    for c in range(ch_rate.shape[0]):
        rate = ch_rate[c]
        if rate == 0.0:
            continue
        lo = ch_ptr[c]; hi = ch_ptr[c + 1]
        for p in range(lo, hi):
            for q in range(lo, hi):
                out[ch_dst[p] * dim + ch_dst[q]] = out[ch_dst[p] * dim + ch_dst[q]] \
                    + rate * y[ch_src[p] * dim + ch_src[q]]
    # anticommutator damping: -(damp_i + damp_j)/2 * rho_ij
    for i in range(dim):
        for j in range(dim):
            out[i * dim + j] = out[i * dim + j] \
                - 0.5 * (damp[i] + damp[j]) * y[i * dim + j]


cdef double _rms_scaled(double complex* e, double complex* y0, double complex* y1,
                        double rtol, double atol, int n) nogil:
    cdef int m
    cdef double acc = 0.0, sc, a0, a1, ae
    for m in range(n):
        a0 = sqrt(y0[m].real * y0[m].real + y0[m].imag * y0[m].imag)
        a1 = sqrt(y1[m].real * y1[m].real + y1[m].imag * y1[m].imag)
        sc = atol + rtol * (a0 if a0 > a1 else a1)
        ae = sqrt(e[m].real * e[m].real + e[m].imag * e[m].imag)
        acc += (ae / sc) * (ae / sc)
    return sqrt(acc / n)


def _drive(int kind, segs_in, n_i_in, n_r_in, int rr_index, double v_int,
           bonds_p_in, bonds_s_in, ch_rate_in, ch_ptr_in, ch_src_in, ch_dst_in,
           damp_in, y0_in, t_eval_in, double rtol, double atol, double max_step,
           str method, fixed_step_in, int post_mode, int dim):
    """post_mode: 0 none, 1 renormalize (state), 2 symmetrize (density matrix)."""
    cdef double[:, ::1] segs = np.ascontiguousarray(segs_in, dtype=np.float64)
    cdef double[::1] n_i = np.ascontiguousarray(n_i_in, dtype=np.float64)
    cdef double[::1] n_r = np.ascontiguousarray(n_r_in, dtype=np.float64)
    cdef int[:, ::1] bonds_p = np.ascontiguousarray(bonds_p_in, dtype=np.intc).reshape(-1, 2)
    cdef int[:, ::1] bonds_s = np.ascontiguousarray(bonds_s_in, dtype=np.intc).reshape(-1, 2)
    cdef double[::1] ch_rate = np.ascontiguousarray(ch_rate_in, dtype=np.float64)
    cdef int[::1] ch_ptr = np.ascontiguousarray(ch_ptr_in, dtype=np.intc)
    cdef int[::1] ch_src = np.ascontiguousarray(ch_src_in, dtype=np.intc)
    cdef int[::1] ch_dst = np.ascontiguousarray(ch_dst_in, dtype=np.intc)
    cdef double[::1] damp = np.ascontiguousarray(damp_in, dtype=np.float64)

    y0_arr = np.ascontiguousarray(np.asarray(y0_in, dtype=complex).ravel())
    cdef int n = y0_arr.shape[0]
    t_eval = np.ascontiguousarray(t_eval_in, dtype=np.float64)
    cdef int nt = t_eval.shape[0]

    # stop points: samples plus interior segment boundaries
    cdef int kseg, q
    cdef double bb
    cdef bint dup
    extra = []
    for kseg in range(segs.shape[0] - 1):
        bb = segs[kseg, 1]
        if bb <= t_eval[0] or bb >= t_eval[nt - 1]:
            continue
        dup = False
        for q in range(nt):
            if fabs(t_eval[q] - bb) < 1e-12:
                dup = True
                break
        if not dup:
            for q in range(len(extra)):
                if fabs(<double>extra[q] - bb) < 1e-12:
                    dup = True
                    break
        if not dup:
            extra.append(bb)
    all_ev = np.concatenate([t_eval, np.array(extra, dtype=np.float64)])
    all_fl = np.concatenate([np.ones(nt, dtype=np.int8),
                             np.zeros(len(extra), dtype=np.int8)])
    order = np.argsort(all_ev, kind="stable")
    cdef double[::1] events = np.ascontiguousarray(all_ev[order])
    cdef signed char[::1] flags = np.ascontiguousarray(all_fl[order])
    cdef int n_events = events.shape[0]

    out = np.empty((nt, n), dtype=complex)
    cdef double complex[:, ::1] out_v = out
    work = np.empty((11, n), dtype=complex)  # y, ynew, ys, yerr, K0..K6
    cdef double complex[:, ::1] W = work
    Hbuf = np.zeros((dim, dim), dtype=np.float64)
    cdef double[:, ::1] H = Hbuf

    cdef double complex* y = &W[0, 0]
    cdef double complex* ynew = &W[1, 0]
    cdef double complex* ys = &W[2, 0]
    cdef double complex* yerr = &W[3, 0]
    cdef double complex* K[7]
    cdef int s, m, j
    for s in range(7):
        K[s] = &W[4 + s, 0]
    cdef double complex[::1] y0v = y0_arr
    for m in range(n):
        y[m] = y0v[m]
        out_v[0, m] = y[m]

    # Dormand-Prince tableau
    cdef double C[7]
    C[0] = 0.0; C[1] = 1.0 / 5; C[2] = 3.0 / 10; C[3] = 4.0 / 5
    C[4] = 8.0 / 9; C[5] = 1.0; C[6] = 1.0
    cdef double A[7][6]
    for s in range(7):
        for j in range(6):
            A[s][j] = 0.0
    A[1][0] = 1.0 / 5
    A[2][0] = 3.0 / 40; A[2][1] = 9.0 / 40
    A[3][0] = 44.0 / 45; A[3][1] = -56.0 / 15; A[3][2] = 32.0 / 9
    A[4][0] = 19372.0 / 6561; A[4][1] = -25360.0 / 2187
    A[4][2] = 64448.0 / 6561; A[4][3] = -212.0 / 729
    A[5][0] = 9017.0 / 3168; A[5][1] = -355.0 / 33; A[5][2] = 46732.0 / 5247
    A[5][3] = 49.0 / 176; A[5][4] = -5103.0 / 18656
    A[6][0] = 35.0 / 384; A[6][1] = 0.0; A[6][2] = 500.0 / 1113
    A[6][3] = 125.0 / 192; A[6][4] = -2187.0 / 6784; A[6][5] = 11.0 / 84
    cdef double B[7]
    B[0] = 35.0 / 384; B[1] = 0.0; B[2] = 500.0 / 1113; B[3] = 125.0 / 192
    B[4] = -2187.0 / 6784; B[5] = 11.0 / 84; B[6] = 0.0
    cdef double E[7]
    E[0] = 71.0 / 57600; E[1] = 0.0; E[2] = -71.0 / 16695; E[3] = 71.0 / 1920
    E[4] = -17253.0 / 339200; E[5] = 22.0 / 525; E[6] = -1.0 / 40

    cdef long nsteps = 0, nrej = 0, nfev = 0
    cdef double min_step = np.inf
    cdef double t = events[0], t_stop, h, h_try, err, factor, t_new, nrm, d0, d1, d2, h0, h1
    cdef double complex acc, avg
    cdef int si, i_event = 1, i_samp = 1, nsub, ksub, i, jj
    cdef double fixed = -1.0
    cdef bint rk4 = (method == "rk4")
    if fixed_step_in is not None and fixed_step_in > 0:
        fixed = float(fixed_step_in)
    elif rk4:
        fixed = max_step

    if rk4:
        while i_event < n_events:
            t_stop = events[i_event]
            si = _seg_index(segs, t)
            nsub = <int>ceil((t_stop - t) / fixed - 1e-12)
            if nsub < 1:
                nsub = 1
            h = (t_stop - t) / nsub
            for ksub in range(nsub):
                t_new = t + ksub * h
                _rhs(kind, segs, si, t_new, n_i, n_r, rr_index, v_int, bonds_p,
                     bonds_s, ch_rate, ch_ptr, ch_src, ch_dst, damp, y, K[0], H)
                for m in range(n):
                    ys[m] = y[m] + 0.5 * h * K[0][m]
                _rhs(kind, segs, si, t_new + 0.5 * h, n_i, n_r, rr_index, v_int, bonds_p,
                     bonds_s, ch_rate, ch_ptr, ch_src, ch_dst, damp, ys, K[1], H)
                for m in range(n):
                    ys[m] = y[m] + 0.5 * h * K[1][m]
                _rhs(kind, segs, si, t_new + 0.5 * h, n_i, n_r, rr_index, v_int, bonds_p,
                     bonds_s, ch_rate, ch_ptr, ch_src, ch_dst, damp, ys, K[2], H)
                for m in range(n):
                    ys[m] = y[m] + h * K[2][m]
                _rhs(kind, segs, si, t_new + h, n_i, n_r, rr_index, v_int, bonds_p,
                     bonds_s, ch_rate, ch_ptr, ch_src, ch_dst, damp, ys, K[3], H)
                for m in range(n):
                    y[m] = y[m] + (h / 6.0) * (K[0][m] + 2.0 * K[1][m] + 2.0 * K[2][m] + K[3][m])
                _post_accept(post_mode, y, n, dim)
                nsteps += 1
                nfev += 4
                if h < min_step:
                    min_step = h
            t = t_stop
            if flags[i_event]:
                for m in range(n):
                    out_v[i_samp, m] = y[m]
                i_samp += 1
            i_event += 1
        return out.reshape((nt, dim, dim)) if kind == 1 else out, \
            {"steps": nsteps, "rejected": nrej, "min_step": min_step, "rhs_evals": nfev}

    # initial step size (Hairer)
    si = _seg_index(segs, t)
    _rhs(kind, segs, si, t, n_i, n_r, rr_index, v_int, bonds_p, bonds_s,
         ch_rate, ch_ptr, ch_src, ch_dst, damp, y, K[0], H)
    d0 = 0.0
    d1 = 0.0
    for m in range(n):
        nrm = atol + rtol * sqrt(y[m].real * y[m].real + y[m].imag * y[m].imag)
        d0 += (y[m].real * y[m].real + y[m].imag * y[m].imag) / (nrm * nrm)
        d1 += (K[0][m].real * K[0][m].real + K[0][m].imag * K[0][m].imag) / (nrm * nrm)
    d0 = sqrt(d0 / n)
    d1 = sqrt(d1 / n)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    for m in range(n):
        ys[m] = y[m] + h0 * K[0][m]
    _rhs(kind, segs, si, t + h0, n_i, n_r, rr_index, v_int, bonds_p, bonds_s,
         ch_rate, ch_ptr, ch_src, ch_dst, damp, ys, K[1], H)
    d2 = 0.0
    for m in range(n):
        nrm = atol + rtol * sqrt(y[m].real * y[m].real + y[m].imag * y[m].imag)
        acc = K[1][m] - K[0][m]
        d2 += (acc.real * acc.real + acc.imag * acc.imag) / (nrm * nrm)
    d2 = sqrt(d2 / n) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = pow(0.01 / max(d1, d2), 0.2)
    h = min(100 * h0, h1)
    if h > max_step:
        h = max_step
    if h > events[n_events - 1] - events[0]:
        h = events[n_events - 1] - events[0]
    if not h > 0.0:  # zero or NaN: tolerances unusable
        raise RuntimeError(
            f"step size underflow at t={t:.6g} (stiff segment; "
            f"loosen tolerances or shrink the window)")
    nfev += 2

    while i_event < n_events:
        t_stop = events[i_event]
        si = _seg_index(segs, t)
        while t < t_stop - 1e-14 * max(1.0, fabs(t_stop)):
            if nsteps + nrej > MAX_STEPS:
                raise RuntimeError(f"step budget exceeded at t={t:.6g}")
            h_try = h
            if h_try > max_step:
                h_try = max_step
            if h_try > t_stop - t:
                h_try = t_stop - t
            if not h_try >= 1e-13 * max(1.0, fabs(t)):  # also catches NaN
                raise RuntimeError(
                    f"step size underflow at t={t:.6g} (stiff segment; "
                    f"loosen tolerances or shrink the window)")
            _rhs(kind, segs, si, t, n_i, n_r, rr_index, v_int, bonds_p, bonds_s,
                 ch_rate, ch_ptr, ch_src, ch_dst, damp, y, K[0], H)
            for s in range(1, 7):
                for m in range(n):
                    acc = 0.0
                    for j in range(s):
                        if A[s][j] != 0.0:
                            acc = acc + A[s][j] * K[j][m]
                    ys[m] = y[m] + h_try * acc
                _rhs(kind, segs, si, t + C[s] * h_try, n_i, n_r, rr_index, v_int,
                     bonds_p, bonds_s, ch_rate, ch_ptr, ch_src, ch_dst, damp,
                     ys, K[s], H)
            nfev += 7
            for m in range(n):
                acc = 0.0
                for j in range(7):
                    if B[j] != 0.0:
                        acc = acc + B[j] * K[j][m]
                ynew[m] = y[m] + h_try * acc
                acc = 0.0
                for j in range(7):
                    if E[j] != 0.0:
                        acc = acc + E[j] * K[j][m]
                yerr[m] = h_try * acc
            err = _rms_scaled(yerr, y, ynew, rtol, atol, n)
            if err <= 1.0:
                t_new = t + h_try
                if fabs(t_new - t_stop) < 1e-14 * max(1.0, fabs(t_stop)):
                    t_new = t_stop
                t = t_new
                for m in range(n):
                    y[m] = ynew[m]
                _post_accept(post_mode, y, n, dim)
                nsteps += 1
                if h_try < min_step:
                    min_step = h_try
                factor = MAX_FACTOR if err == 0.0 else SAFETY * pow(err, -0.2)
                if factor > MAX_FACTOR:
                    factor = MAX_FACTOR
                if factor < MIN_FACTOR:
                    factor = MIN_FACTOR
                h = h_try * factor
            else:
                nrej += 1
                if err != err:  # NaN error estimate: shrink hard
                    factor = MIN_FACTOR
                else:
                    factor = SAFETY * pow(err, -0.2)
                    if factor < MIN_FACTOR:
                        factor = MIN_FACTOR
                h = h_try * factor
        if flags[i_event]:
            for m in range(n):
                out_v[i_samp, m] = y[m]
            i_samp += 1
        i_event += 1

    return out.reshape((nt, dim, dim)) if kind == 1 else out, \
        {"steps": nsteps, "rejected": nrej, "min_step": min_step, "rhs_evals": nfev}


cdef void _post_accept(int mode, double complex* y, int n, int dim) nogil:
    cdef int i, j
    cdef double nrm = 0.0
    cdef double complex avg
    if mode == 1:
        for i in range(n):
            nrm += y[i].real * y[i].real + y[i].imag * y[i].imag
        nrm = sqrt(nrm)
        if nrm > 0.0:
            for i in range(n):
                y[i] = y[i] / nrm
    elif mode == 2:
        for i in range(dim):
            y[i * dim + i] = y[i * dim + i].real + 0.0j
            for j in range(i + 1, dim):
                avg = 0.5 * (y[i * dim + j] + y[j * dim + i].conjugate())
                y[i * dim + j] = avg
                y[j * dim + i] = avg.conjugate()


def integrate_schrodinger(segs, n_i, n_r, rr_index, v_int, bonds_p, bonds_s,
                          psi0, t_eval, rtol, atol, max_step,
                          method="rk45", fixed_step=None, renormalize=True):
    dim = np.asarray(n_i).shape[0]
    empty_i = np.zeros(0, dtype=np.intc)
    return _drive(0, segs, n_i, n_r, int(rr_index), float(v_int), bonds_p, bonds_s,
                  np.zeros(0), np.zeros(1, dtype=np.intc), empty_i, empty_i,
                  np.zeros(dim), psi0, t_eval, float(rtol), float(atol),
                  float(max_step), method, fixed_step, 1 if renormalize else 0, dim)


def integrate_lindblad(segs, n_i, n_r, rr_index, v_int, bonds_p, bonds_s,
                       ch_rate, ch_ptr, ch_src, ch_dst, damp,
                       rho0, t_eval, rtol, atol, max_step,
                       method="rk45", fixed_step=None, symmetrize=True):
    dim = np.asarray(n_i).shape[0]
    return _drive(1, segs, n_i, n_r, int(rr_index), float(v_int), bonds_p, bonds_s,
                  ch_rate, ch_ptr, ch_src, ch_dst, damp, rho0, t_eval,
                  float(rtol), float(atol), float(max_step), method, fixed_step,
                  2 if symmetrize else 0, dim)
