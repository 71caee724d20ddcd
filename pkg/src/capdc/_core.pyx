# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled simulation kernels.

Transliteration of ``capdc._core_py`` (see that module for the algorithm
documentation); the two must stay in lockstep.
"""

import numpy as np
cimport numpy as cnp

from libc.math cimport exp, log, fabs, isfinite, isinf, INFINITY

cdef extern from "complex.h":
    double complex cexp(double complex) nogil
    double creal(double complex) nogil

BACKEND_NAME = "cython"

STATUS_OK = 0
STATUS_CCM = 1
STATUS_NONFINITE = 2
STATUS_UNSTABLE = 3

cdef double _AMB_EPS = 1e-12


cdef inline void _conduct_anchor(
    double complex[:, :, :, :] pinv, Py_ssize_t cfg, Py_ssize_t sidx,
    double x0, double x1, double x2, double vac, double complex* y,
) noexcept nogil:
    cdef double complex d0 = x0
    cdef double complex d1 = x1 - vac
    cdef double complex d2 = x2
    y[0] = pinv[cfg, sidx, 0, 0] * d0 + pinv[cfg, sidx, 0, 1] * d1 + pinv[cfg, sidx, 0, 2] * d2
    y[1] = pinv[cfg, sidx, 1, 0] * d0 + pinv[cfg, sidx, 1, 1] * d1 + pinv[cfg, sidx, 1, 2] * d2
    y[2] = pinv[cfg, sidx, 2, 0] * d0 + pinv[cfg, sidx, 2, 1] * d1 + pinv[cfg, sidx, 2, 2] * d2


cdef inline void _conduct_state(
    double complex[:, :, :, :] p, double complex[:, :, :] lam,
    Py_ssize_t cfg, Py_ssize_t sidx,
    double complex* y, double vac, double tau, double* out,
) noexcept nogil:
    cdef double complex e0 = cexp(lam[cfg, sidx, 0] * tau) * y[0]
    cdef double complex e1 = cexp(lam[cfg, sidx, 1] * tau) * y[1]
    cdef double complex e2 = cexp(lam[cfg, sidx, 2] * tau) * y[2]
    out[0] = creal(p[cfg, sidx, 0, 0] * e0 + p[cfg, sidx, 0, 1] * e1 + p[cfg, sidx, 0, 2] * e2)
    out[1] = creal(p[cfg, sidx, 1, 0] * e0 + p[cfg, sidx, 1, 1] * e1 + p[cfg, sidx, 1, 2] * e2) + vac
    out[2] = creal(p[cfg, sidx, 2, 0] * e0 + p[cfg, sidx, 2, 1] * e1 + p[cfg, sidx, 2, 2] * e2)


def run_switched(
    double l_loop, double c_s, double c_f, double r_series,
    double t_sw, int steps_per_cycle, Py_ssize_t n_half,
    double[:] d1_half, double[:] vdc_half, int[:] cfg_half,
    double[:] r_stage_cfg,
    double complex[:, :, :] lam_cfg,
    double complex[:, :, :, :] p_cfg,
    double complex[:, :, :, :] pinv_cfg,
    double[:] x_init,
    bint closed_loop, double kp, double wc, double d1_min, double d1_max,
    double[:] vref_half, double q0,
    double[:] rec_i, double[:] rec_vcs, double[:] rec_vcf,
    double[:] rec_vac, double[:] rec_d1,
    double[:, :] cyc_state, double[:] cum_ein, double[:] cum_eout,
    signed char[:] half_touch, signed char[:] half_endidle,
    bint check_dcm,
):
    cdef double th = 0.5 * t_sw
    cdef double scan_dt = t_sw / steps_per_cycle
    cdef double tol_t = scan_dt * 1e-6
    cdef Py_ssize_t sph = rec_i.shape[0] // n_half if n_half else 0
    cdef double hstep = th / sph if sph else th

    cdef double x0 = x_init[0], x1 = x_init[1], x2 = x_init[2]
    cdef int mode = 0 if x0 == 0.0 else (1 if x0 > 0.0 else -1)
    cdef double q = q0
    cdef double e_in = 0.0, e_out = 0.0
    cdef long ambiguous = 0
    cdef int status = STATUS_OK
    cdef Py_ssize_t info = -1

    cdef Py_ssize_t half, seg, cfg, c, base, k, sidx
    cdef double r_stage, vdc, pol, d1, err, q_cand, u, width, vac
    cdef double t, t_end, dv, adv, t_wake, t_next, vcf0, span, rc
    cdef double h, tau, lo, hi, midt
    cdef double seg_bounds[4]
    cdef double seg_vac[3]
    cdef double st[3]
    cdef double complex y[3]
    cdef int sigma
    cdef bint touched, done_all = True

    for half in range(n_half):
        cfg = cfg_half[half]
        r_stage = r_stage_cfg[cfg]
        vdc = vdc_half[half]
        pol = 1.0 if half % 2 == 0 else -1.0

        if closed_loop:
            err = vref_half[half] - x2
            q_cand = q + err * th
            u = kp * (err + wc * q_cand)
            if d1_min <= u <= d1_max:
                q = q_cand
                d1 = u
            else:
                d1 = d1_min if u < d1_min else d1_max
        else:
            d1 = d1_half[half]
        d1_half[half] = d1

        if half % 2 == 0:
            c = half // 2
            cyc_state[c, 0] = x0
            cyc_state[c, 1] = x1
            cyc_state[c, 2] = x2
            cum_ein[c] = e_in
            cum_eout[c] = e_out

        base = half * sph
        k = 0
        touched = mode == 0
        width = d1 * th
        seg_bounds[0] = 0.0
        seg_bounds[1] = 0.5 * (th - width)
        seg_bounds[2] = 0.5 * (th + width)
        seg_bounds[3] = th
        seg_vac[0] = 0.0
        seg_vac[1] = pol * vdc
        seg_vac[2] = 0.0

        for seg in range(3):
            t = seg_bounds[seg]
            t_end = seg_bounds[seg + 1]
            if t_end - t <= 0.0:
                continue
            vac = seg_vac[seg]

            while t_end - t > 1e-15 * t_sw:
                if mode == 0:
                    dv = vac - x1
                    adv = fabs(dv)
                    if fabs(adv - x2) <= _AMB_EPS * max(1.0, max(adv, x2)):
                        ambiguous += 1
                    if adv > x2:
                        mode = 1 if dv > 0.0 else -1
                        continue
                    if isinf(r_stage):
                        t_wake = INFINITY
                    elif adv > 0.0 and x2 > adv:
                        t_wake = t + r_stage * c_f * log(x2 / adv)
                    else:
                        t_wake = INFINITY
                    t_next = t_end if t_wake > t_end else t_wake
                    vcf0 = x2
                    span = t_next - t
                    # emit samples in [t, t_next)
                    while k < sph:
                        tau = k * hstep
                        if tau >= t_next:
                            break
                        if tau >= t:
                            rec_i[base + k] = 0.0
                            rec_vcs[base + k] = x1
                            if isinf(r_stage):
                                rec_vcf[base + k] = vcf0
                            else:
                                rec_vcf[base + k] = vcf0 * exp(-(tau - t) / (r_stage * c_f))
                            rec_vac[base + k] = vac
                            rec_d1[base + k] = d1
                        k += 1
                    if not isinf(r_stage):
                        rc = r_stage * c_f
                        x2 = vcf0 * exp(-span / rc)
                        # Pure decay: the load dissipates the capacitor drop.
                        e_out += 0.5 * c_f * (vcf0 * vcf0 - x2 * x2)
                    if t_next < t_end:
                        x2 = adv  # exact crossing value
                        mode = 1 if dv > 0.0 else -1
                    t = t_next
                else:
                    sigma = mode
                    sidx = 0 if sigma > 0 else 1
                    _conduct_anchor(pinv_cfg, cfg, sidx, x0, x1, x2, vac, y)
                    h = t_end - t
                    if h > scan_dt:
                        h = scan_dt

                    _conduct_state(p_cfg, lam_cfg, cfg, sidx, y, vac, h, st)
                    if sigma * st[0] >= 0.0:
                        while k < sph:
                            tau = k * hstep
                            if tau >= t + h:
                                break
                            if tau >= t:
                                _conduct_state(p_cfg, lam_cfg, cfg, sidx, y, vac, tau - t, st)
                                rec_i[base + k] = st[0]
                                rec_vcs[base + k] = st[1]
                                rec_vcf[base + k] = st[2]
                                rec_vac[base + k] = vac
                                rec_d1[base + k] = d1
                            k += 1
                        _conduct_state(p_cfg, lam_cfg, cfg, sidx, y, vac, h, st)
                        e_in += vac * c_s * (st[1] - x1)
                        if not isinf(r_stage):
                            e_out += 0.5 * h * (x2 * x2 + st[2] * st[2]) / r_stage
                        x0 = st[0]
                        x1 = st[1]
                        x2 = st[2]
                        t += h
                    else:
                        lo = 0.0
                        hi = h
                        while hi - lo > tol_t:
                            midt = 0.5 * (lo + hi)
                            _conduct_state(p_cfg, lam_cfg, cfg, sidx, y, vac, midt, st)
                            if sigma * st[0] >= 0.0:
                                lo = midt
                            else:
                                hi = midt
                        tau = 0.5 * (lo + hi)
                        while k < sph:
                            span = k * hstep
                            if span >= t + tau:
                                break
                            if span >= t:
                                _conduct_state(p_cfg, lam_cfg, cfg, sidx, y, vac, span - t, st)
                                rec_i[base + k] = st[0]
                                rec_vcs[base + k] = st[1]
                                rec_vcf[base + k] = st[2]
                                rec_vac[base + k] = vac
                                rec_d1[base + k] = d1
                            k += 1
                        _conduct_state(p_cfg, lam_cfg, cfg, sidx, y, vac, tau, st)
                        e_in += vac * c_s * (st[1] - x1)
                        if not isinf(r_stage):
                            e_out += 0.5 * tau * (x2 * x2 + st[2] * st[2]) / r_stage
                        x0 = 0.0
                        x1 = st[1]
                        x2 = st[2]
                        t += tau
                        touched = True
                        dv = vac - x1
                        adv = fabs(dv)
                        if fabs(adv - x2) <= _AMB_EPS * max(1.0, max(adv, x2)):
                            ambiguous += 1
                        if adv > x2:
                            mode = 1 if dv > 0.0 else -1
                        else:
                            mode = 0

        if not (isfinite(x0) and isfinite(x1) and isfinite(x2)):
            status = STATUS_NONFINITE
            info = half
            done_all = False
            break
        if mode == 0:
            touched = True
            half_endidle[half] = 1
        half_touch[half] = 1 if touched else 0
        if check_dcm and not touched:
            status = STATUS_CCM
            info = half
            done_all = False
            break

    if done_all:
        half = n_half

    if status == STATUS_OK:
        c = n_half // 2
        cyc_state[c, 0] = x0
        cyc_state[c, 1] = x1
        cyc_state[c, 2] = x2
        cum_ein[c] = e_in
        cum_eout[c] = e_out

    return status, int(info), q, int(ambiguous), int(half)


def run_closed_loop(
    double l_s, double c_f, double f_sw,
    bint exact_de,
    bint closed, double kp, double wc, double d1_min, double d1_max, double q_init,
    long[:] seg_nsteps, double[:] seg_h, double[:] seg_vdc, double[:] seg_rstage,
    double[:] seg_iz, double[:] seg_vref, double[:] seg_d1,
    double[:] x_init,
    long record_decim,
    double[:] rec_i, double[:] rec_v, double[:] rec_d1, double[:] rec_q,
    double scale_i, double scale_v,
):
    cdef double two_ls = 2.0 * l_s
    cdef double four_lf = 4.0 * l_s * f_sw

    cdef double i_l = x_init[0]
    cdef double v = x_init[1]
    cdef double q = q_init

    cdef long step = 0
    cdef Py_ssize_t n_rec = 0
    cdef Py_ssize_t n_seg = seg_nsteps.shape[0]
    cdef Py_ssize_t s
    cdef long j
    cdef double h, vdc, rst, iz, vref, d1_open
    cdef double k1i, k1v, k1q, k2i, k2v, k2q, k3i, k3v, k3q, k4i, k4v, k4q
    cdef double e_now, d1_now, u

    for s in range(n_seg):
        h = seg_h[s]
        vdc = seg_vdc[s]
        rst = seg_rstage[s]
        iz = seg_iz[s]
        vref = seg_vref[s]
        d1_open = seg_d1[s]
        for j in range(seg_nsteps[s]):
            if step % record_decim == 0:
                e_now = vref - v
                if closed:
                    u = kp * (e_now + wc * q)
                    d1_now = d1_min if u < d1_min else (d1_max if u > d1_max else u)
                else:
                    d1_now = d1_open
                rec_i[n_rec] = i_l
                rec_v[n_rec] = v
                rec_d1[n_rec] = d1_now
                rec_q[n_rec] = q
                n_rec += 1

            _rk4_rhs(i_l, v, q, vdc, rst, iz, vref, d1_open,
                     closed, kp, wc, d1_min, d1_max, exact_de, four_lf, two_ls, c_f,
                     &k1i, &k1v, &k1q)
            _rk4_rhs(i_l + 0.5 * h * k1i, v + 0.5 * h * k1v, q + 0.5 * h * k1q,
                     vdc, rst, iz, vref, d1_open,
                     closed, kp, wc, d1_min, d1_max, exact_de, four_lf, two_ls, c_f,
                     &k2i, &k2v, &k2q)
            _rk4_rhs(i_l + 0.5 * h * k2i, v + 0.5 * h * k2v, q + 0.5 * h * k2q,
                     vdc, rst, iz, vref, d1_open,
                     closed, kp, wc, d1_min, d1_max, exact_de, four_lf, two_ls, c_f,
                     &k3i, &k3v, &k3q)
            _rk4_rhs(i_l + h * k3i, v + h * k3v, q + h * k3q,
                     vdc, rst, iz, vref, d1_open,
                     closed, kp, wc, d1_min, d1_max, exact_de, four_lf, two_ls, c_f,
                     &k4i, &k4v, &k4q)
            i_l += h * (k1i + 2.0 * k2i + 2.0 * k3i + k4i) / 6.0
            v += h * (k1v + 2.0 * k2v + 2.0 * k3v + k4v) / 6.0
            q += h * (k1q + 2.0 * k2q + 2.0 * k3q + k4q) / 6.0
            step += 1

            if not (isfinite(i_l) and isfinite(v) and isfinite(q)):
                return STATUS_NONFINITE, int(step), q, int(n_rec)
            if fabs(i_l) > 1e3 * scale_i or fabs(v) > 1e3 * scale_v:
                return STATUS_UNSTABLE, int(step), q, int(n_rec)

    vref = seg_vref[n_seg - 1]
    if closed:
        u = kp * ((vref - v) + wc * q)
        d1_now = d1_min if u < d1_min else (d1_max if u > d1_max else u)
    else:
        d1_now = seg_d1[n_seg - 1]
    rec_i[n_rec] = i_l
    rec_v[n_rec] = v
    rec_d1[n_rec] = d1_now
    rec_q[n_rec] = q
    n_rec += 1

    return STATUS_OK, -1, q, int(n_rec)


cdef inline void _rk4_rhs(
    double i_v, double v_v, double q_v,
    double vdc, double rst, double iz, double vref, double d1_open,
    bint closed, double kp, double wc, double d1_min, double d1_max,
    bint exact_de, double four_lf, double two_ls, double c_f,
    double* di, double* dv, double* dq,
) noexcept nogil:
    cdef double e = vref - v_v
    cdef double d1, u, x, de, gv
    cdef bint clamped
    if closed:
        u = kp * (e + wc * q_v)
        if u < d1_min:
            d1 = d1_min
            clamped = True
        elif u > d1_max:
            d1 = d1_max
            clamped = True
        else:
            d1 = u
            clamped = False
    else:
        d1 = d1_open
        clamped = True
    x = four_lf * i_v / (d1 * d1 * vdc)
    if exact_de:
        de = (1.0 - x) / (1.0 + x)
    else:
        de = 1.0 - 2.0 * x
    di[0] = (de * vdc - v_v) / two_ls
    gv = 0.0 if isinf(rst) else v_v / rst
    dv[0] = (i_v - gv + iz) / c_f
    dq[0] = 0.0 if clamped else e
