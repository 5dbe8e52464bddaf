"""Pure-NumPy propagation kernels.

Reference implementation of the hot loops; the compiled backend in
``_cy_core.pyx`` mirrors this module exactly.  Both integrate

    i dpsi/dt = H(t) psi                  (Schrodinger)
    drho/dt  = -i[H(t), rho] + L rho      (Lindblad)

with an embedded Dormand-Prince 5(4) adaptive stepper, or a fixed-step
classical RK4 reference mode for convergence studies.

Problem encoding shared by both backends
----------------------------------------
segs : float64 (nseg, 11) rows [t_lo, t_hi, om0p, tau_p, om0s, tau_s,
    t_env, d0p, d0s, alpha, t_chirp].  A non-positive tau means "frozen
    envelope": the peak value is used at all times.  Detunings follow
    d0 + alpha*(t - t_chirp); the two-photon detuning is their sum.
n_i, n_r : per-state occupation counts of |i> and |r> (diagonal laws).
bonds_p, bonds_s : int32 (n,2) index pairs receiving -Omega_p / -Omega_s.
channels : decay channels as flattened (rate, src->dst) maps plus the
    precomputed total damping diagonal.

Steps never straddle segment boundaries; every boundary and every sample
time is hit exactly.
"""
from __future__ import annotations

import math

import numpy as np

BACKEND_NAME = "python"

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = (
    np.array([], dtype=float),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
)
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
               -17253 / 339200, 22 / 525, -1 / 40])

_SAFETY, _MIN_FACTOR, _MAX_FACTOR = 0.9, 0.2, 10.0
_MAX_STEPS = 20_000_000


class _Problem:
    """Precomputed index structure for fast numpy RHS evaluation."""

    def __init__(self, segs, n_i, n_r, rr_index, v_int, bonds_p, bonds_s,
                 channels=None, damp=None):
        self.segs = np.asarray(segs, dtype=float)
        self.n_i = np.asarray(n_i, dtype=float)
        self.n_r = np.asarray(n_r, dtype=float)
        self.dim = self.n_i.shape[0]
        self.rr_index = int(rr_index)
        self.v_int = float(v_int)
        bp = np.asarray(bonds_p, dtype=np.int64).reshape(-1, 2)
        bs = np.asarray(bonds_s, dtype=np.int64).reshape(-1, 2)
        self.bp_a, self.bp_b = bp[:, 0], bp[:, 1]
        self.bs_a, self.bs_b = bs[:, 0], bs[:, 1]
        self._Hbuf = np.zeros((self.dim, self.dim))
        self._diag = np.arange(self.dim)
        self.channels = []
        if channels is not None:
            ch_rate, ch_ptr, ch_src, ch_dst = channels
            for c in range(len(ch_rate)):
                lo, hi = int(ch_ptr[c]), int(ch_ptr[c + 1])
                src = np.asarray(ch_src[lo:hi], dtype=np.int64)
                dst = np.asarray(ch_dst[lo:hi], dtype=np.int64)
                self.channels.append((float(ch_rate[c]), np.ix_(src, src), np.ix_(dst, dst)))
        if damp is not None:
            d = np.asarray(damp, dtype=float)
            self.damp_mat = 0.5 * (d[:, None] + d[None, :])
        else:
            self.damp_mat = None

    def seg_index(self, t):
        for k in range(self.segs.shape[0] - 1):
            if t < self.segs[k, 1]:
                return k
        return self.segs.shape[0] - 1

    def laws(self, si, t):
        (_, _, o0p, taup, o0s, taus, tenv, d0p, d0s, alpha, tch) = self.segs[si]
        s = t - tenv
        om_p = o0p if taup <= 0 else o0p * math.exp(-s * s / (2 * taup * taup))
        om_s = o0s if taus <= 0 else o0s * math.exp(-s * s / (2 * taus * taus))
        x = t - tch
        dp = d0p + alpha * x
        de = dp + d0s + alpha * x
        return om_p, om_s, dp, de

    def hamiltonian(self, si, t):
        om_p, om_s, dp, de = self.laws(si, t)
        H = self._Hbuf
        H[:] = 0.0
        H[self._diag, self._diag] = dp * self.n_i + de * self.n_r
        H[self.rr_index, self.rr_index] += self.v_int
        H[self.bp_a, self.bp_b] = -om_p
        H[self.bp_b, self.bp_a] = -om_p
        H[self.bs_a, self.bs_b] = -om_s
        H[self.bs_b, self.bs_a] = -om_s
        return H

    def rhs_schrodinger(self, si, t, y):
        H = self.hamiltonian(si, t)
        return -1j * (H @ y)

    def rhs_lindblad(self, si, t, y):
        rho = y.reshape(self.dim, self.dim)
        H = self.hamiltonian(si, t)
        drho = -1j * (H @ rho - rho @ H)
        for rate, src_ix, dst_ix in self.channels:
            drho[dst_ix] += rate * rho[src_ix]
        if self.damp_mat is not None:
            drho -= self.damp_mat * rho
        return drho.ravel()


def _error_norm(err, y_old, y_new, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y_old), np.abs(y_new))
    return math.sqrt(float(np.mean((np.abs(err) / scale) ** 2)))


def _initial_step(rhs, si, t0, y0, f0, rtol, atol, max_step, span):
    # overflow/NaN from unusable tolerances is caught by the caller's h > 0 check
    with np.errstate(over="ignore", invalid="ignore"):
        scale = atol + rtol * np.abs(y0)
        d0 = math.sqrt(float(np.mean((np.abs(y0) / scale) ** 2)))
        d1 = math.sqrt(float(np.mean((np.abs(f0) / scale) ** 2)))
        h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
        f1 = rhs(si, t0 + h0, y0 + h0 * f0)
        d2 = math.sqrt(float(np.mean((np.abs(f1 - f0) / scale) ** 2))) / h0
        if max(d1, d2) <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, max_step, span)


def _merge_events(t_eval, segs):
    """Sorted stop points: every sample plus interior segment boundaries."""
    extra = []
    for k in range(segs.shape[0] - 1):
        b = float(segs[k, 1])
        if not (t_eval[0] < b < t_eval[-1]):
            continue
        if np.abs(t_eval - b).min() < 1e-12:
            continue
        if extra and min(abs(x - b) for x in extra) < 1e-12:
            continue
        extra.append(b)
    all_ev = np.concatenate([t_eval, np.array(extra, dtype=float)])
    all_fl = np.concatenate([np.ones(len(t_eval), dtype=bool),
                             np.zeros(len(extra), dtype=bool)])
    order = np.argsort(all_ev, kind="stable")
    return list(all_ev[order]), list(all_fl[order])


def _drive(problem, rhs, y0, t_eval, rtol, atol, max_step, method,
           fixed_step, post_accept):
    t_eval = np.asarray(t_eval, dtype=float)
    y = np.array(y0, dtype=complex).ravel().copy()
    nt = t_eval.shape[0]
    out = np.empty((nt, y.size), dtype=complex)
    out[0] = y
    events, flags = _merge_events(t_eval, problem.segs)
    stats = {"steps": 0, "rejected": 0, "min_step": math.inf, "rhs_evals": 0}

    if method == "rk4":
        if fixed_step is None or fixed_step <= 0:
            fixed_step = max_step
        i_samp = 1
        t = events[0]
        for ev, samp in zip(events[1:], flags[1:]):
            si = problem.seg_index(t)
            n = max(1, math.ceil((ev - t) / fixed_step - 1e-12))
            h = (ev - t) / n
            for k in range(n):
                tk = t + k * h
                k1 = rhs(si, tk, y)
                k2 = rhs(si, tk + 0.5 * h, y + 0.5 * h * k1)
                k3 = rhs(si, tk + 0.5 * h, y + 0.5 * h * k2)
                k4 = rhs(si, tk + h, y + h * k3)
                y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
                y = post_accept(y)
                stats["steps"] += 1
                stats["rhs_evals"] += 4
                stats["min_step"] = min(stats["min_step"], h)
            t = ev
            if samp:
                out[i_samp] = y
                i_samp += 1
        return out, stats

    # adaptive Dormand-Prince 5(4)
    t = events[0]
    si = problem.seg_index(t)
    f0 = rhs(si, t, y)
    stats["rhs_evals"] += 2
    h = _initial_step(rhs, si, t, y, f0, rtol, atol, max_step, events[-1] - events[0])
    if not h > 0 or math.isnan(h):
        raise RuntimeError(
            f"step size underflow at t={t:.6g} (stiff segment; "
            f"loosen tolerances or shrink the window)")
    i_event = 1
    i_samp = 1
    k = [None] * 7
    while i_event < len(events):
        t_stop = events[i_event]
        si = problem.seg_index(t)
        while t < t_stop - 1e-14 * max(1.0, abs(t_stop)):
            if stats["steps"] + stats["rejected"] > _MAX_STEPS:
                raise RuntimeError(f"step budget exceeded at t={t:.6g}")
            h_try = min(h, max_step, t_stop - t)
            if not h_try >= 1e-13 * max(1.0, abs(t)):  # also catches NaN
                raise RuntimeError(
                    f"step size underflow at t={t:.6g} (stiff segment; "
                    f"loosen tolerances or shrink the window)")
            k[0] = rhs(si, t, y)
            for s in range(1, 7):
                ys = y + h_try * sum(_A[s][j] * k[j] for j in range(s))
                k[s] = rhs(si, t + _C[s] * h_try, ys)
            stats["rhs_evals"] += 7
            y_new = y + h_try * sum(_B[j] * k[j] for j in range(7) if _B[j] != 0.0)
            err_vec = h_try * sum(_E[j] * k[j] for j in range(7) if _E[j] != 0.0)
            err = _error_norm(err_vec, y, y_new, rtol, atol)
            if err <= 1.0:
                t_new = t + h_try
                if abs(t_new - t_stop) < 1e-14 * max(1.0, abs(t_stop)):
                    t_new = t_stop
                t = t_new
                y = post_accept(y_new)
                stats["steps"] += 1
                stats["min_step"] = min(stats["min_step"], h_try)
                factor = _MAX_FACTOR if err == 0.0 else min(
                    _MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * err ** -0.2))
                h = h_try * factor
            else:
                stats["rejected"] += 1
                if math.isnan(err):
                    h = h_try * _MIN_FACTOR
                else:
                    h = h_try * max(_MIN_FACTOR, _SAFETY * err ** -0.2)
        # reached the stop point
        if flags[i_event]:
            out[i_samp] = y
            i_samp += 1
        i_event += 1
    return out, stats


def integrate_schrodinger(segs, n_i, n_r, rr_index, v_int, bonds_p, bonds_s,
                          psi0, t_eval, rtol, atol, max_step,
                          method="rk45", fixed_step=None, renormalize=True):
    problem = _Problem(segs, n_i, n_r, rr_index, v_int, bonds_p, bonds_s)

    def post(y):
        if renormalize:
            nrm = math.sqrt(float(np.sum(np.abs(y) ** 2)))
            if nrm > 0:
                y /= nrm
        return y

    out, stats = _drive(problem, problem.rhs_schrodinger, psi0, t_eval,
                        rtol, atol, max_step, method, fixed_step, post)
    return out, stats


def integrate_lindblad(segs, n_i, n_r, rr_index, v_int, bonds_p, bonds_s,
                       ch_rate, ch_ptr, ch_src, ch_dst, damp,
                       rho0, t_eval, rtol, atol, max_step,
                       method="rk45", fixed_step=None, symmetrize=True):
    problem = _Problem(segs, n_i, n_r, rr_index, v_int, bonds_p, bonds_s,
                       channels=(ch_rate, ch_ptr, ch_src, ch_dst), damp=damp)
    dim = problem.dim

    def post(y):
        if symmetrize:
            rho = y.reshape(dim, dim)
            y = (0.5 * (rho + rho.conj().T)).ravel()
        return y

    rho0 = np.asarray(rho0, dtype=complex).reshape(dim, dim)
    out, stats = _drive(problem, problem.rhs_lindblad, rho0.ravel(), t_eval,
                        rtol, atol, max_step, method, fixed_step, post)
    return out.reshape(-1, dim, dim), stats
