# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled closed-loop integration kernel.

Mirrors ftcsim._loop_py statement-for-statement; the pure-Python loop is
the reference implementation, this module only exists for speed.  Keep the
two in sync.
"""

from libc.math cimport sin, cos, tanh, atanh, exp, sqrt, fabs, pow, floor, isfinite

import numpy as np
cimport numpy as cnp

cnp.import_array()

# scal[] packing (see ftcsim._plan)
DEF S_RHO1 = 0
DEF S_RHO2 = 1
DEF S_EPS_SING = 2
DEF S_LAM_LO = 3
DEF S_LAM_HI = 4
DEF S_GA = 5
DEF S_GB = 6
DEF S_GC = 7
DEF S_EXP_LO = 8
DEF S_EXP_HI = 9
DEF S_PS_MID = 10
DEF S_EPS_G = 11
DEF S_K1 = 12
DEF S_C_LO = 13
DEF S_C_HI = 14
DEF S_SE_LO = 15
DEF S_SE_HI = 16
DEF N_SCAL = 17

DEF K_STEP = 1
DEF K_RAMP = 2
DEF K_SIN = 3
DEF K_TANH = 4
DEF K_NOISY = 5

DEF OMEGA_CLAMP = 1.0 - 1e-9


cdef inline double sgnpow(double x, double e) noexcept:
    if x == 0.0:
        return 0.0
    if x > 0.0:
        return pow(x, e)
    return -pow(-x, e)


cdef inline double _dot(double* a, double* b, int k) noexcept:
    cdef int i
    cdef double s = 0.0
    for i in range(k):
        s += a[i] * b[i]
    return s


cdef inline void _mv(double[:, ::1] A, double* x, double* y, int r, int c) noexcept:
    cdef int i, j
    cdef double s
    for i in range(r):
        s = 0.0
        for j in range(c):
            s += A[i, j] * x[j]
        y[i] = s


cdef int _chol_solve(double* M, double* b, double* x, int n, double* ws) noexcept:
    """Solve M x = b for SPD M (Cholesky, factor stored in ws).
    Returns 0 on success, 1 when M is not numerically SPD."""
    cdef int i, j, k
    cdef double s
    for i in range(n * n):
        ws[i] = 0.0
    for i in range(n):
        for j in range(i + 1):
            s = M[i * n + j]
            for k in range(j):
                s -= ws[i * n + k] * ws[j * n + k]
            if i == j:
                if s <= 0.0 or not isfinite(s):
                    return 1
                ws[i * n + i] = sqrt(s)
            else:
                ws[i * n + j] = s / ws[j * n + j]
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= ws[i * n + k] * x[k]
        x[i] = s / ws[i * n + i]
    for i in range(n - 1, -1, -1):
        s = x[i]
        for k in range(i + 1, n):
            s -= ws[k * n + i] * x[k]
        x[i] = s / ws[i * n + i]
    return 0


cdef void _dyn_terms(int kind, double[::1] pp, double* q, double* qd,
                     double* M, double* D, double* G, int n) noexcept:
    """M, D, G of the selected model (row-major).  Mirrors manipulator.py."""
    cdef double m1, m2, m3, l1, l2, l3, L2v, lc1, lc2, I1, I2
    cdef double Ix2, Ix3, Iy2, Iy3, Iz1, Iz2, Iz3, grav
    cdef double s2, c2, s3, c3, c1, c12, q1d, q2d, q3d, h
    cdef double e3, k22, kxz, a_, b_, c_, e_, f_
    cdef int i

    if kind == 0:
        # two_link: [m1, m2, l1, lc1, lc2, I1, I2, gravity]
        m1 = pp[0]; m2 = pp[1]; l1 = pp[2]; lc1 = pp[3]; lc2 = pp[4]
        I1 = pp[5]; I2 = pp[6]; grav = pp[7]
        c1 = cos(q[0]); s2 = sin(q[1]); c2 = cos(q[1]); c12 = cos(q[0] + q[1])
        q1d = qd[0]; q2d = qd[1]
        M[0] = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2) + I1 + I2
        M[1] = m2 * (lc2 * lc2 + l1 * lc2 * c2) + I2
        M[2] = M[1]
        M[3] = m2 * lc2 * lc2 + I2
        h = -m2 * l1 * lc2 * s2
        D[0] = h * q2d; D[1] = h * (q1d + q2d)
        D[2] = -h * q1d; D[3] = 0.0
        G[0] = (m1 * lc1 + m2 * l1) * grav * c1 + m2 * lc2 * grav * c12
        G[1] = m2 * lc2 * grav * c12
        return

    if kind == 1:
        # solar_tracker: [m2, m3, l2, l3, L2, Ix2, Ix3, Iy2, Iy3, Iz1, Iz2, Iz3, gravity]
        m2 = pp[0]; m3 = pp[1]; l2 = pp[2]; l3 = pp[3]; L2v = pp[4]
        Ix2 = pp[5]; Ix3 = pp[6]; Iy2 = pp[7]; Iy3 = pp[8]
        Iz1 = pp[9]; Iz2 = pp[10]; Iz3 = pp[11]; grav = pp[12]
        s2 = sin(q[1]); c2 = cos(q[1]); s3 = sin(q[2]); c3 = cos(q[2])
        q1d = qd[0]; q2d = qd[1]; q3d = qd[2]
        e3 = c3 * l3 + L2v
        k22 = m2 * l2 * l2 + m3 * e3 * e3
        kxz = Ix3 - Iz3
        M[0] = (s2 * s2 * (k22 + Iy2 + Iy3) + m3 * s3 * s3 * l3 * l3 + Iz1
                + c2 * c2 * (Iz2 + s3 * s3 * Ix3 + c3 * c3 * Iz3))
        M[1] = s3 * c2 * (c3 * kxz - m3 * l3 * e3)
        M[2] = s2 * (m3 * l3 * (l3 + c3 * L2v) - Iy3)
        M[3] = M[1]
        M[4] = k22 + Ix2 + c3 * c3 * Ix3 + s3 * s3 * Iz3
        M[5] = 0.0
        M[6] = M[2]
        M[7] = 0.0
        M[8] = m3 * l3 * l3 + Iy3
        a_ = s3 * c3 * (m3 * l3 * l3 + c2 * c2 * kxz) - s2 * s2 * (m3 * s3 * l3 * e3)
        b_ = s2 * c2 * (k22 + Iy2 + Iy3 - Iz2 - s3 * s3 * Ix3 - c3 * c3 * Iz3)
        c_ = c2 * (m3 * s3 * s3 * l3 * l3 + c3 * c3 * kxz + 0.5 * (Iz3 - Iy3 - Ix3))
        e_ = c2 * (c3 * c3 * kxz - m3 * c3 * l3 * e3 + 0.5 * (Iy3 + Iz3 - Ix3))
        f_ = s3 * (c3 * (Iz3 - Ix3) - m3 * l3 * e3)
        D[0] = a_ * q3d + b_ * q2d
        D[1] = b_ * q1d - s2 * s3 * (c3 * kxz - m3 * l3 * e3) * q2d + c_ * q3d
        D[2] = a_ * q1d + c_ * q2d - m3 * s2 * s3 * l3 * L2v * q3d
        D[3] = -b_ * q1d + e_ * q3d
        D[4] = f_ * q3d
        D[5] = e_ * q1d + f_ * q2d
        D[6] = -a_ * q1d - e_ * q2d
        D[7] = -e_ * q1d + s3 * (m3 * l3 * e3 - c3 * (Iz3 - Ix3)) * q2d
        D[8] = 0.0
        G[0] = 0.0
        G[1] = -grav * (s2 * (m2 * l2 + m3 * e3))
        G[2] = -grav * (m3 * l3 * s3 * c2)
        return

    # constant_inertia: pp holds the diagonal
    for i in range(n * n):
        M[i] = 0.0
        D[i] = 0.0
    for i in range(n):
        M[i * n + i] = pp[i]
        G[i] = 0.0


cdef double _eval_channel(int want_ch, double t,
                          int[::1] kind, int[::1] ch, double[::1] t0,
                          double[:, ::1] par, int[::1] noise_id,
                          double[::1] noise_data, long[::1] noise_start,
                          long[::1] noise_len, double[::1] noise_dt,
                          double[::1] noise_t0) noexcept:
    """Sum of all primitive signals assigned to one channel (0 before onset)."""
    cdef int i, nid
    cdef long k
    cdef double s = 0.0, dt
    for i in range(kind.shape[0]):
        if ch[i] != want_ch or t < t0[i]:
            continue
        if kind[i] == K_STEP:
            s += par[i, 0]
        elif kind[i] == K_RAMP:
            s += par[i, 0] * (t - t0[i])
        elif kind[i] == K_SIN:
            s += par[i, 0] * sin(par[i, 1] * (t - par[i, 3]) + par[i, 2])
        elif kind[i] == K_TANH:
            dt = t - t0[i]
            s += par[i, 0] * tanh(dt * dt / par[i, 1])
        elif kind[i] == K_NOISY:
            nid = noise_id[i]
            k = <long> floor((t - noise_t0[nid]) / noise_dt[nid] + 1e-9)
            if k < 0:
                k = 0
            if k >= noise_len[nid]:
                k = noise_len[nid] - 1
            s += par[i, 0] + noise_data[noise_start[nid] + k]
    return s


cdef inline double _pstar(double ax, double exp_lo, double ps_mid) noexcept:
    if ax < 1.0:
        return 1.0
    if ax > 1.0:
        return exp_lo
    return ps_mid


cdef inline double _gfun(double chi, double[::1] sc) noexcept:
    cdef double ax = fabs(chi)
    cdef double ps = _pstar(ax, sc[S_EXP_LO], sc[S_PS_MID])
    cdef double phi = sc[S_GA] + (1.0 - sc[S_GA]) * exp(-sc[S_GB] * pow(ax, sc[S_GC]))
    return (sc[S_LAM_LO] * sgnpow(chi, ps) + sc[S_LAM_HI] * sgnpow(chi, sc[S_EXP_HI])) / phi


cdef inline double _gdot(double chi, double chi_dot, double[::1] sc) noexcept:
    cdef double ax = fabs(chi)
    cdef double ps = _pstar(ax, sc[S_EXP_LO], sc[S_PS_MID])
    cdef double ebax = exp(-sc[S_GB] * pow(ax, sc[S_GC]))
    cdef double phi = sc[S_GA] + (1.0 - sc[S_GA]) * ebax
    cdef double phi_dot = (-(1.0 - sc[S_GA]) * sc[S_GB] * sc[S_GC]
                           * sgnpow(chi, sc[S_GC] - 1.0) * chi_dot * ebax)
    cdef double num = sc[S_LAM_LO] * sgnpow(chi, ps) + sc[S_LAM_HI] * sgnpow(chi, sc[S_EXP_HI])
    cdef double ax_safe = ax if ax > sc[S_EPS_G] else sc[S_EPS_G]
    cdef double slope = (sc[S_LAM_LO] * ps * pow(ax, ps - 1.0)
                         + sc[S_LAM_HI] * sc[S_EXP_HI] * pow(ax_safe, sc[S_EXP_HI] - 1.0)) / phi
    return -phi_dot / (phi * phi) * num + slope * chi_dot


def run(int n, int m, int model_kind, int baseline, int dhat_meas,
        double h, long n_steps,
        double[::1] scal, double[::1] model_params,
        double[:, ::1] A_v, double[:, ::1] E,
        double[:, ::1] L, double[:, ::1] Lam,
        double[:, ::1] Gam, double[:, ::1] gmm, double[:, ::1] Ups,
        double[::1] mu0, double[::1] muinf, double[::1] dec,
        double[::1] r_amp, double[::1] r_freq, double[::1] r_phase, double[::1] r_off,
        int[::1] sf_kind, int[::1] sf_ch, double[::1] sf_t0, double[:, ::1] sf_par, int[::1] sf_noise,
        int[::1] af_kind, int[::1] af_ch, double[::1] af_t0, double[:, ::1] af_par, int[::1] af_noise,
        double[::1] noise_data, long[::1] noise_start, long[::1] noise_len,
        double[::1] noise_dt, double[::1] noise_t0,
        double[::1] y0, double[:, ::1] out):
    """Integrate the closed loop; fills ``out`` row by row.

    Returns (rows_written, status, fail_time, fail_joint) with status 0 ok,
    1 funnel violation, 2 non-finite state or SPD factorization failure.
    """
    cdef int nst = 7 * n + m + 1
    cdef cnp.ndarray[double, ndim=1] ybuf = np.array(y0, dtype=np.float64, copy=True)
    cdef cnp.ndarray[double, ndim=1] work = np.zeros(80 + 40 * n + 6 * n * n + 8 * m,
                                                     dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] kbuf = np.zeros(5 * nst, dtype=np.float64)
    cdef double* y = <double*> ybuf.data
    cdef double* w = <double*> work.data
    cdef double* ks = <double*> kbuf.data

    cdef int n2 = 2 * n, n3 = 3 * n

    # scratch partitions (sequential, see the size bound above)
    cdef double* yf = w
    cdef double* ytil = yf + n
    cdef double* dhat = ytil + n
    cdef double* fhat = dhat + m
    cdef double* fvals = fhat + m
    cdef double* ups_v = fvals + m
    cdef double* yd = ups_v + n
    cdef double* yd_d = yd + n
    cdef double* yd_dd = yd_d + n
    cdef double* e_v = yd_dd + n
    cdef double* ed_v = e_v + n
    cdef double* z_v = ed_v + n
    cdef double* zd_v = z_v + n
    cdef double* eta_v = zd_v + n
    cdef double* sig_v = eta_v + n
    cdef double* u_v = sig_v + n
    cdef double* ytd = u_v + n
    cdef double* upsd = ytd + n
    cdef double* corr = upsd + n
    cdef double* gz = corr + n
    cdef double* mu_v = gz + n
    cdef double* rr = mu_v + n
    cdef double* Rv = rr + n
    cdef double* Gt = Rv + n
    cdef double* Gh = Gt + n
    cdef double* x2dot = Gh + n
    cdef double* Hh = x2dot + n
    cdef double* reach = Hh + n
    cdef double* vec3a = reach + n
    cdef double* core = vec3a + n3
    cdef double* Mt = core + n3
    cdef double* Dt = Mt + n * n
    cdef double* Mh = Dt + n * n
    cdef double* Dh = Mh + n * n
    cdef double* ws = Dh + n * n

    cdef long step
    cdef int i, j, kk, stage
    cdef double t, ts
    cdef long rows = 0

    cdef double rho1 = scal[S_RHO1], rho2 = scal[S_RHO2], eps_sing = scal[S_EPS_SING]
    cdef double k1g = scal[S_K1], clo = scal[S_C_LO], chi_g = scal[S_C_HI]
    cdef double se_lo = scal[S_SE_LO], se_hi = scal[S_SE_HI]

    cdef double s2n, th, th2, dbeta, beta_hat, ex, muv, mud, mudd, om, one
    cdef double sfac, omd, sdotv, rdotv, ew, arg, dots, th1v, th2v, psiv, V2, xtn, acc

    cdef double* x1
    cdef double* x2
    cdef double* xv
    cdef double* xh
    cdef double* pih
    cdef double* accp
    cdef double* dy

    t = 0.0
    for step in range(n_steps + 1):
        for stage in range(4):
            if stage == 0:
                ts = t
                for i in range(nst):
                    ks[4 * nst + i] = y[i]
            elif stage == 3:
                ts = t + h
                for i in range(nst):
                    ks[4 * nst + i] = y[i] + h * ks[2 * nst + i]
            else:
                ts = t + 0.5 * h
                for i in range(nst):
                    ks[4 * nst + i] = y[i] + 0.5 * h * ks[(stage - 1) * nst + i]

            x1 = ks + 4 * nst
            x2 = x1 + n
            xv = x2 + n
            xh = xv + n
            pih = xh + n3
            beta_hat = pih[m]
            accp = pih + m + 1
            dy = ks + stage * nst

            # ---- faults and measurement ----
            for j in range(m):
                fvals[j] = _eval_channel(j, ts, sf_kind, sf_ch, sf_t0, sf_par, sf_noise,
                                         noise_data, noise_start, noise_len, noise_dt, noise_t0)
            for i in range(n):
                yf[i] = x1[i]
                for j in range(m):
                    yf[i] += E[i, j] * fvals[j]

            # ---- observer quantities ----
            for i in range(n):
                ytil[i] = xv[i] - xh[n2 + i]
            for j in range(m):
                acc = 0.0
                if dhat_meas:
                    for i in range(n):
                        acc += E[i, j] * xv[i]
                else:
                    for i in range(n):
                        acc += E[i, j] * xh[n2 + i]
                dhat[j] = acc
            _mv(Gam, dhat, fhat, m, m)
            for j in range(m):
                dhat[j] = pih[j] + fhat[j]
            _mv(gmm, dhat, fhat, m, m)
            s2n = _dot(ytil, ytil, n)
            th = tanh(s2n / rho1)
            th2 = th * th
            _mv(Ups, ytil, ups_v, n, n)
            if s2n >= eps_sing * eps_sing:
                for i in range(n):
                    ups_v[i] += beta_hat * th2 / s2n * ytil[i]
            else:
                for i in range(n):
                    ups_v[i] += (beta_hat / (rho1 * rho1)) * s2n * ytil[i]
            dbeta = 2.0 * th2 - rho2 * beta_hat

            # ---- reference ----
            for i in range(n):
                arg = r_freq[i] * ts + r_phase[i]
                yd[i] = r_off[i] + r_amp[i] * sin(arg)
                yd_d[i] = r_amp[i] * r_freq[i] * cos(arg)
                yd_dd[i] = -r_amp[i] * r_freq[i] * r_freq[i] * sin(arg)

            if baseline:
                for i in range(n):
                    e_v[i] = yf[i] - yd[i]
                    ed_v[i] = x2[i] - yd_d[i]
                    z_v[i] = e_v[i]
                    zd_v[i] = ed_v[i]
                    eta_v[i] = 0.0
                    gz[i] = _gfun(z_v[i], scal)
                    sig_v[i] = zd_v[i] + gz[i]
                    ex = exp(-dec[i] * ts)
                    mu_v[i] = (mu0[i] - muinf[i]) * ex + muinf[i]
                _dyn_terms(model_kind, model_params, yf, x2, Mh, Dh, Gh, n)
                for i in range(n):
                    reach[i] = (_gdot(z_v[i], zd_v[i], scal)
                                + k1g * sig_v[i] + clo * sgnpow(sig_v[i], se_lo)
                                + chi_g * sgnpow(sig_v[i], se_hi))
                for i in range(n):
                    acc = Gh[i]
                    for j in range(n):
                        acc += Dh[i * n + j] * x2[j] + Mh[i * n + j] * (yd_dd[j] - reach[j])
                    u_v[i] = acc
            else:
                # tracking error and its rate, from the estimate dynamics
                for i in range(n):
                    e_v[i] = xh[i] - yd[i]
                    acc = xh[n + i] - yd_d[i]
                    for j in range(n):
                        acc += L[i, j] * ytil[j] + Lam[i, j] * ups_v[j]
                    ed_v[i] = acc
                # funnel transform
                for i in range(n):
                    ex = exp(-dec[i] * ts)
                    muv = (mu0[i] - muinf[i]) * ex + muinf[i]
                    mud = -dec[i] * (mu0[i] - muinf[i]) * ex
                    mudd = dec[i] * dec[i] * (mu0[i] - muinf[i]) * ex
                    om = e_v[i] / muv
                    if fabs(om) >= 1.0:
                        return rows, 1, ts, i
                    if om > OMEGA_CLAMP:
                        om = OMEGA_CLAMP
                    elif om < -OMEGA_CLAMP:
                        om = -OMEGA_CLAMP
                    mu_v[i] = muv
                    one = 1.0 - om * om
                    z_v[i] = atanh(om)
                    rr[i] = 1.0 / (muv * one)
                    sfac = mud / muv
                    ew = ed_v[i] - sfac * e_v[i]
                    omd = ew / muv
                    sdotv = (mudd * muv - mud * mud) / (muv * muv)
                    rdotv = (-mud * one + 2.0 * muv * om * omd) / ((muv * one) * (muv * one))
                    zd_v[i] = rr[i] * ew
                    Rv[i] = rdotv * ew - rr[i] * (sdotv * e_v[i] + sfac * ed_v[i])
                    eta_v[i] = z_v[i] + accp[i]
                for i in range(n):
                    gz[i] = _gfun(z_v[i], scal)
                    sig_v[i] = zd_v[i] + gz[i] + _gfun(eta_v[i], scal)

                # d(y_tilde)/dt = A_v (yf - xv - x1_hat + xv_hat - E fhat) - L3 ytil - Lam3 ups
                for i in range(n):
                    vec3a[i] = yf[i] - xv[i] - xh[i] + xh[n2 + i]
                    for j in range(m):
                        vec3a[i] -= E[i, j] * fhat[j]
                _mv(A_v, vec3a, ytd, n, n)
                for i in range(n):
                    for j in range(n):
                        ytd[i] -= L[n2 + i, j] * ytil[j] + Lam[n2 + i, j] * ups_v[j]

                # d(upsilon)/dt
                _mv(Ups, ytd, upsd, n, n)
                if s2n >= eps_sing * eps_sing:
                    dots = 2.0 * _dot(ytd, ytil, n)
                    th1v = (2.0 / rho1) * s2n * th * (1.0 - th2) * dots
                    th2v = th2 * dots
                    psiv = (th1v - th2v) / (s2n * s2n)
                    for i in range(n):
                        upsd[i] += (dbeta * th2 / s2n * ytil[i]
                                    + beta_hat * th2 / s2n * ytd[i]
                                    + beta_hat * psiv * ytil[i])
                else:
                    dots = _dot(ytil, ytd, n)
                    for i in range(n):
                        upsd[i] += (beta_hat / (rho1 * rho1) * (s2n * ytd[i] + 2.0 * dots * ytil[i])
                                    + dbeta / (rho1 * rho1) * s2n * ytil[i])

                for i in range(n):
                    acc = -yd_dd[i]
                    for j in range(n):
                        acc += (L[n + i, j] * ytil[j] + L[i, j] * ytd[j]
                                + Lam[n + i, j] * ups_v[j] + Lam[i, j] * upsd[j])
                    corr[i] = acc

                _dyn_terms(model_kind, model_params, xh, xh + n, Mh, Dh, Gh, n)
                for i in range(n):
                    reach[i] = ((Rv[i] + _gdot(z_v[i], zd_v[i], scal)
                                 + _gdot(eta_v[i], zd_v[i] + gz[i], scal)
                                 + k1g * sig_v[i] + clo * sgnpow(sig_v[i], se_lo)
                                 + chi_g * sgnpow(sig_v[i], se_hi)) / rr[i] + corr[i])
                for i in range(n):
                    acc = Gh[i]
                    for j in range(n):
                        acc += Dh[i * n + j] * xh[n + j] - Mh[i * n + j] * reach[j]
                    u_v[i] = acc

            # ---- plant ----
            for i in range(n):
                vec3a[i] = u_v[i] + _eval_channel(i, ts, af_kind, af_ch, af_t0, af_par, af_noise,
                                                  noise_data, noise_start, noise_len,
                                                  noise_dt, noise_t0)
            _dyn_terms(model_kind, model_params, x1, x2, Mt, Dt, Gt, n)
            for i in range(n):
                for j in range(n):
                    vec3a[i] -= Dt[i * n + j] * x2[j]
                vec3a[i] -= Gt[i]
            if _chol_solve(Mt, vec3a, x2dot, n, ws):
                return rows, 2, ts, -1

            # ---- observer dynamics ----
            for i in range(n):
                vec3a[i] = u_v[i] - Gh[i]
                for j in range(n):
                    vec3a[i] -= Dh[i * n + j] * xh[n + j]
            if _chol_solve(Mh, vec3a, Hh, n, ws):
                return rows, 2, ts, -1
            # core = A_a x_hat + H_a + E_a fhat (block structure)
            for i in range(n):
                core[i] = xh[n + i]
                core[n + i] = Hh[i]
                acc = 0.0
                for j in range(n):
                    acc += A_v[i, j] * (xh[j] - xh[n2 + j])
                for j in range(m):
                    for kk in range(n):
                        acc += A_v[i, kk] * E[kk, j] * fhat[j]
                core[n2 + i] = acc

            # ---- pack dy ----
            for i in range(n):
                dy[i] = x2[i]
                dy[n + i] = x2dot[i]
                acc = 0.0
                for j in range(n):
                    acc += A_v[i, j] * (yf[j] - xv[j])
                dy[n2 + i] = acc
            for i in range(n3):
                acc = core[i]
                for j in range(n):
                    acc += L[i, j] * ytil[j] + Lam[i, j] * ups_v[j]
                dy[n3 + i] = acc
            for j in range(m):
                acc = 0.0
                for i in range(n):
                    acc += E[i, j] * core[n2 + i]
                dhat[j] = acc
            for j in range(m):
                acc = 0.0
                for i in range(m):
                    acc += Gam[j, i] * dhat[i]
                dy[6 * n + j] = -acc
            dy[6 * n + m] = dbeta
            for i in range(n):
                dy[6 * n + m + 1 + i] = gz[i]

            # ---- record trace row (stage 0 only) ----
            if stage == 0:
                V2 = 0.5 * _dot(sig_v, sig_v, n)
                xtn = 0.0
                for i in range(n):
                    xtn += ((x1[i] - xh[i]) * (x1[i] - xh[i])
                            + (x2[i] - xh[n + i]) * (x2[i] - xh[n + i])
                            + (xv[i] - xh[n2 + i]) * (xv[i] - xh[n2 + i]))
                xtn = sqrt(xtn)
                out[step, 0] = t
                j = 1
                for i in range(n): out[step, j + i] = x1[i]
                j += n
                for i in range(n): out[step, j + i] = x2[i]
                j += n
                for i in range(n): out[step, j + i] = yf[i]
                j += n
                for i in range(n): out[step, j + i] = xv[i]
                j += n
                for i in range(n): out[step, j + i] = xh[i]
                j += n
                for i in range(n): out[step, j + i] = xh[n + i]
                j += n
                for i in range(n): out[step, j + i] = xh[n2 + i]
                j += n
                for i in range(n): out[step, j + i] = e_v[i]
                j += n
                for i in range(n): out[step, j + i] = mu_v[i]
                j += n
                for i in range(n): out[step, j + i] = z_v[i]
                j += n
                for i in range(n): out[step, j + i] = eta_v[i]
                j += n
                for i in range(n): out[step, j + i] = sig_v[i]
                j += n
                for i in range(n): out[step, j + i] = u_v[i]
                j += n
                for i in range(m): out[step, j + i] = fvals[i]
                j += m
                for i in range(m): out[step, j + i] = fhat[i]
                j += m
                for i in range(m): out[step, j + i] = pih[i]
                j += m
                out[step, j] = beta_hat
                out[step, j + 1] = V2
                out[step, j + 2] = xtn
                j += 3
                for i in range(n): out[step, j + i] = yd[i]
                rows = step + 1
                if step == n_steps:
                    return rows, 0, 0.0, -1

        # ---- combine stages ----
        for i in range(nst):
            y[i] = y[i] + (h / 6.0) * (ks[i] + 2.0 * ks[nst + i]
                                       + 2.0 * ks[2 * nst + i] + ks[3 * nst + i])
            if not isfinite(y[i]):
                return rows, 2, t + h, -1
        t = (step + 1) * h

    return rows, 0, 0.0, -1
