"""Pure-Python simulation kernels (fallback backend).

Same entry points and semantics as the compiled ``capdc._core`` extension;
selected automatically when the extension is unavailable or when
``CAPDC_BACKEND=python`` is set. Kept in lockstep with ``_core.pyx`` — any
change here must be mirrored there.

Switched kernel
---------------
One converter stage is the series loop (lumped loop inductance, coupling
capacitor) feeding an ideal diode bridge into the filter capacitor and the
per-stage load. Within any diode configuration the network is LTI, so
propagation uses the closed-form eigensolution x(t) = x_eq + Re(P e^{lam t}
Pinv (x0 - x_eq)); diode commutations are located by bisection on the
inductor-current zero crossing, idle-to-conduction wakeups analytically
from the filter-capacitor decay. States per stage: (i, v_cs, v_cf).

Energy bookkeeping is exact where it matters: the source energy per
propagation step is v_ac * C_s * dv_cs (all loop current flows through the
coupling capacitor); output energy integrates v_cf^2/R by trapezoid on the
scan grid (exactly during idle intervals).
"""

from __future__ import annotations

import cmath
import math

BACKEND_NAME = "python"

STATUS_OK = 0
STATUS_CCM = 1
STATUS_NONFINITE = 2
STATUS_UNSTABLE = 3

_AMB_EPS = 1e-12


def _conduct_anchor(P, Pinv, x, vac):
    """Pinv @ (x - x_eq) for the conduction configuration; x_eq = (0, vac, 0)."""
    d0 = x[0]
    d1 = x[1] - vac
    d2 = x[2]
    return (
        Pinv[0][0] * d0 + Pinv[0][1] * d1 + Pinv[0][2] * d2,
        Pinv[1][0] * d0 + Pinv[1][1] * d1 + Pinv[1][2] * d2,
        Pinv[2][0] * d0 + Pinv[2][1] * d1 + Pinv[2][2] * d2,
    )


def _conduct_state(P, lam, y, vac, tau):
    e0 = cmath.exp(lam[0] * tau) * y[0]
    e1 = cmath.exp(lam[1] * tau) * y[1]
    e2 = cmath.exp(lam[2] * tau) * y[2]
    return (
        (P[0][0] * e0 + P[0][1] * e1 + P[0][2] * e2).real,
        (P[1][0] * e0 + P[1][1] * e1 + P[1][2] * e2).real + vac,
        (P[2][0] * e0 + P[2][1] * e1 + P[2][2] * e2).real,
    )


class _Recorder:
    """Emits uniformly spaced samples as propagation sweeps a half cycle."""

    def __init__(self, out, hstep, sph):
        self.out = out  # dict of lists-like arrays
        self.hstep = hstep
        self.sph = sph
        self.base = 0      # record index of the current half cycle start
        self.k = 0         # next local sample index within the half cycle
        self.t0 = 0.0      # global time of the current half cycle start

    def start_half(self, half_index, t0):
        self.base = half_index * self.sph
        self.k = 0
        self.t0 = t0

    def emit_span(self, t_from, t_to, vac, d1, state_at):
        """Record samples with local time in [t_from, t_to)."""
        rec = self.out
        while self.k < self.sph:
            tau = self.k * self.hstep
            if tau >= t_to:
                break
            if tau >= t_from:
                i, vcs, vcf = state_at(tau)
                idx = self.base + self.k
                rec["i"][idx] = i
                rec["vcs"][idx] = vcs
                rec["vcf"][idx] = vcf
                rec["vac"][idx] = vac
                rec["d1"][idx] = d1
            self.k += 1


def run_switched(
    l_loop, c_s, c_f, r_series,
    t_sw, steps_per_cycle, n_half,
    d1_half, vdc_half, cfg_half,
    r_stage_cfg, lam_cfg, p_cfg, pinv_cfg,
    x_init,
    closed_loop, kp, wc, d1_min, d1_max, vref_half, q0,
    rec_i, rec_vcs, rec_vcf, rec_vac, rec_d1,
    cyc_state, cum_ein, cum_eout,
    half_touch, half_endidle,
    check_dcm,
):
    """March ``n_half`` half cycles; fills the preallocated output arrays.

    Returns (status, info, q_final, ambiguous_count, n_half_done) where
    ``info`` is the offending half-cycle index for CCM/non-finite aborts.
    """
    th = 0.5 * t_sw
    scan_dt = t_sw / steps_per_cycle
    tol_t = scan_dt * 1e-6
    sph = rec_i.shape[0] // n_half if n_half else 0
    hstep = th / sph if sph else th

    rec = {"i": rec_i, "vcs": rec_vcs, "vcf": rec_vcf, "vac": rec_vac, "d1": rec_d1}
    recorder = _Recorder(rec, hstep, sph)

    x = [float(x_init[0]), float(x_init[1]), float(x_init[2])]
    mode = 0 if x[0] == 0.0 else (1 if x[0] > 0.0 else -1)
    q = q0
    e_in = 0.0
    e_out = 0.0
    ambiguous = 0
    status = STATUS_OK
    info = -1
    half = 0

    # Complex eigen-data per (cfg, sigma) fetched as nested python lists for
    # scalar-speed access in this backend.
    n_cfg = r_stage_cfg.shape[0]
    lam_tab = [[[complex(lam_cfg[c, s, k]) for k in range(3)] for s in range(2)] for c in range(n_cfg)]
    p_tab = [
        [[[complex(p_cfg[c, s, i, j]) for j in range(3)] for i in range(3)] for s in range(2)]
        for c in range(n_cfg)
    ]
    pinv_tab = [
        [[[complex(pinv_cfg[c, s, i, j]) for j in range(3)] for i in range(3)] for s in range(2)]
        for c in range(n_cfg)
    ]

    for half in range(n_half):
        cfg = int(cfg_half[half])
        r_stage = float(r_stage_cfg[cfg])
        vdc = float(vdc_half[half])
        pol = 1.0 if half % 2 == 0 else -1.0

        if closed_loop:
            err = float(vref_half[half]) - x[2]
            q_cand = q + err * th
            u = kp * (err + wc * q_cand)
            if d1_min <= u <= d1_max:
                q = q_cand
                d1 = u
            else:
                d1 = d1_min if u < d1_min else d1_max
        else:
            d1 = float(d1_half[half])
        d1_half[half] = d1

        if half % 2 == 0:
            c = half // 2
            cyc_state[c, 0] = x[0]
            cyc_state[c, 1] = x[1]
            cyc_state[c, 2] = x[2]
            cum_ein[c] = e_in
            cum_eout[c] = e_out

        recorder.start_half(half, half * th)
        touched = mode == 0
        width = d1 * th
        seg_bounds = (0.0, 0.5 * (th - width), 0.5 * (th + width), th)
        seg_vac = (0.0, pol * vdc, 0.0)

        for seg in range(3):
            t = seg_bounds[seg]
            t_end = seg_bounds[seg + 1]
            if t_end - t <= 0.0:
                continue
            vac = seg_vac[seg]

            while t_end - t > 1e-15 * t_sw:
                if mode == 0:
                    dv = vac - x[1]
                    adv = abs(dv)
                    if abs(adv - x[2]) <= _AMB_EPS * max(1.0, adv, x[2]):
                        ambiguous += 1
                    if adv > x[2]:
                        mode = 1 if dv > 0.0 else -1
                        continue
                    # Idle: v_cs and i frozen, v_cf decays through the load.
                    if math.isinf(r_stage):
                        t_wake = math.inf
                    elif adv > 0.0 and x[2] > adv:
                        t_wake = t + r_stage * c_f * math.log(x[2] / adv)
                    else:
                        t_wake = math.inf
                    t_next = t_end if t_wake > t_end else t_wake
                    vcf0 = x[2]
                    span = t_next - t

                    def idle_state(tau, _t=t, _v=vcf0):
                        if math.isinf(r_stage):
                            return 0.0, x[1], _v
                        return 0.0, x[1], _v * math.exp(-(tau - _t) / (r_stage * c_f))

                    recorder.emit_span(t, t_next, vac, d1, idle_state)
                    if not math.isinf(r_stage):
                        rc = r_stage * c_f
                        x[2] = vcf0 * math.exp(-span / rc)
                        # Pure decay: the load dissipates the capacitor drop.
                        e_out += 0.5 * c_f * (vcf0 * vcf0 - x[2] * x[2])
                    if t_next < t_end:
                        x[2] = adv  # exact crossing value
                        mode = 1 if dv > 0.0 else -1
                    t = t_next
                else:
                    sigma = mode
                    sidx = 0 if sigma > 0 else 1
                    lam = lam_tab[cfg][sidx]
                    pmat = p_tab[cfg][sidx]
                    pinv = pinv_tab[cfg][sidx]
                    y = _conduct_anchor(pmat, pinv, x, vac)
                    h = t_end - t
                    if h > scan_dt:
                        h = scan_dt

                    def state_at(tau, _t=t):
                        return _conduct_state(pmat, lam, y, vac, tau - _t)

                    xi, xcs, xcf = _conduct_state(pmat, lam, y, vac, h)
                    if sigma * xi >= 0.0:
                        recorder.emit_span(t, t + h, vac, d1, state_at)
                        e_in += vac * c_s * (xcs - x[1])
                        if not math.isinf(r_stage):
                            e_out += 0.5 * h * (x[2] * x[2] + xcf * xcf) / r_stage
                        x[0], x[1], x[2] = xi, xcs, xcf
                        t += h
                    else:
                        lo, hi = 0.0, h
                        while hi - lo > tol_t:
                            midt = 0.5 * (lo + hi)
                            im, _, _ = _conduct_state(pmat, lam, y, vac, midt)
                            if sigma * im >= 0.0:
                                lo = midt
                            else:
                                hi = midt
                        tau = 0.5 * (lo + hi)
                        recorder.emit_span(t, t + tau, vac, d1, state_at)
                        _, xcs, xcf = _conduct_state(pmat, lam, y, vac, tau)
                        e_in += vac * c_s * (xcs - x[1])
                        if not math.isinf(r_stage):
                            e_out += 0.5 * tau * (x[2] * x[2] + xcf * xcf) / r_stage
                        x[0], x[1], x[2] = 0.0, xcs, xcf
                        t += tau
                        touched = True
                        dv = vac - x[1]
                        adv = abs(dv)
                        if abs(adv - x[2]) <= _AMB_EPS * max(1.0, adv, x[2]):
                            ambiguous += 1
                        if adv > x[2]:
                            mode = 1 if dv > 0.0 else -1
                        else:
                            mode = 0

        if not (math.isfinite(x[0]) and math.isfinite(x[1]) and math.isfinite(x[2])):
            status = STATUS_NONFINITE
            info = half
            break
        if mode == 0:
            touched = True
            half_endidle[half] = 1
        half_touch[half] = 1 if touched else 0
        if check_dcm and not touched:
            status = STATUS_CCM
            info = half
            break

    else:
        half = n_half

    if status == STATUS_OK:
        c = n_half // 2
        cyc_state[c, 0] = x[0]
        cyc_state[c, 1] = x[1]
        cyc_state[c, 2] = x[2]
        cum_ein[c] = e_in
        cum_eout[c] = e_out

    return status, info, q, ambiguous, half


def run_switched_trapz(
    l_loop, c_s, c_f, r_series,
    t_sw, steps_per_cycle, n_half,
    d1_half, vdc_half, cfg_half,
    r_stage_cfg,
    x_init,
    rec_i, rec_vcs, rec_vcf, rec_vac, rec_d1,
    cyc_state, cum_ein, cum_eout,
    half_touch, half_endidle,
    check_dcm,
):
    """Dense fixed-step trapezoidal cross-check integrator (open loop only).

    Same outputs as :func:`run_switched`; commutation instants are located
    by linear interpolation of the inductor current inside a step, so this
    path is an independent, lower-order route used to validate the exact
    propagation, not a performance path.
    """
    th = 0.5 * t_sw
    dt = t_sw / steps_per_cycle
    sph = rec_i.shape[0] // n_half if n_half else 0
    hstep = th / sph if sph else th

    rec = {"i": rec_i, "vcs": rec_vcs, "vcf": rec_vcf, "vac": rec_vac, "d1": rec_d1}
    recorder = _Recorder(rec, hstep, sph)

    x = [float(x_init[0]), float(x_init[1]), float(x_init[2])]
    mode = 0 if x[0] == 0.0 else (1 if x[0] > 0.0 else -1)
    e_in = 0.0
    e_out = 0.0
    status = STATUS_OK
    info = -1

    def a_matrix(sigma, r_stage):
        g = 0.0 if math.isinf(r_stage) else 1.0 / (c_f * r_stage)
        return (
            (-r_series / l_loop, -1.0 / l_loop, -sigma / l_loop),
            (1.0 / c_s, 0.0, 0.0),
            (sigma / c_f, 0.0, -g),
        )

    def trapz_step(xv, sigma, r_stage, vac, h):
        a = a_matrix(sigma, r_stage)
        rhs = [0.0, 0.0, 0.0]
        for r in range(3):
            rhs[r] = xv[r] + 0.5 * h * (
                a[r][0] * xv[0] + a[r][1] * xv[1] + a[r][2] * xv[2]
            )
        rhs[0] += h * vac / l_loop
        m = [[(1.0 if r == cidx else 0.0) - 0.5 * h * a[r][cidx] for cidx in range(3)] for r in range(3)]
        det = (
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        )
        out = [0.0, 0.0, 0.0]
        for cidx in range(3):
            mm = [[m[r][k] if k != cidx else rhs[r] for k in range(3)] for r in range(3)]
            out[cidx] = (
                mm[0][0] * (mm[1][1] * mm[2][2] - mm[1][2] * mm[2][1])
                - mm[0][1] * (mm[1][0] * mm[2][2] - mm[1][2] * mm[2][0])
                + mm[0][2] * (mm[1][0] * mm[2][1] - mm[1][1] * mm[2][0])
            ) / det
        return out

    for half in range(n_half):
        cfg = int(cfg_half[half])
        r_stage = float(r_stage_cfg[cfg])
        vdc = float(vdc_half[half])
        pol = 1.0 if half % 2 == 0 else -1.0
        d1 = float(d1_half[half])

        if half % 2 == 0:
            c = half // 2
            cyc_state[c, 0] = x[0]
            cyc_state[c, 1] = x[1]
            cyc_state[c, 2] = x[2]
            cum_ein[c] = e_in
            cum_eout[c] = e_out

        recorder.start_half(half, half * th)
        touched = mode == 0
        width = d1 * th
        seg_bounds = (0.0, 0.5 * (th - width), 0.5 * (th + width), th)
        seg_vac = (0.0, pol * vdc, 0.0)

        for seg in range(3):
            t = seg_bounds[seg]
            t_end = seg_bounds[seg + 1]
            if t_end - t <= 0.0:
                continue
            vac = seg_vac[seg]

            while t_end - t > 1e-15 * t_sw:
                h = t_end - t
                if h > dt:
                    h = dt
                if mode == 0:
                    dv = vac - x[1]
                    if abs(dv) > x[2]:
                        mode = 1 if dv > 0.0 else -1
                        continue
                    v0 = x[2]
                    if math.isinf(r_stage):
                        v1 = v0
                    else:
                        a = 0.5 * h / (r_stage * c_f)
                        v1 = v0 * (1.0 - a) / (1.0 + a)
                        e_out += 0.5 * h * (v0 * v0 + v1 * v1) / r_stage

                    def idle_interp(tau, _t=t, _h=h, _v0=v0, _v1=v1):
                        f = (tau - _t) / _h
                        return 0.0, x[1], _v0 + f * (_v1 - _v0)

                    recorder.emit_span(t, t + h, vac, d1, idle_interp)
                    x[2] = v1
                    t += h
                else:
                    sigma = mode
                    x1 = trapz_step(x, sigma, r_stage, vac, h)
                    if sigma * x1[0] < 0.0:
                        f = x[0] / (x[0] - x1[0])
                        h = max(f * h, 0.0)
                        x1 = trapz_step(x, sigma, r_stage, vac, h) if h > 0.0 else list(x)
                        x1[0] = 0.0
                        crossing = True
                    else:
                        crossing = False

                    x0c = list(x)

                    def lin_interp(tau, _t=t, _h=h, _x0=x0c, _x1=x1):
                        f = (tau - _t) / _h if _h > 0.0 else 0.0
                        return (
                            _x0[0] + f * (_x1[0] - _x0[0]),
                            _x0[1] + f * (_x1[1] - _x0[1]),
                            _x0[2] + f * (_x1[2] - _x0[2]),
                        )

                    recorder.emit_span(t, t + h, vac, d1, lin_interp)
                    e_in += vac * c_s * (x1[1] - x[1])
                    if not math.isinf(r_stage):
                        e_out += 0.5 * h * (x[2] * x[2] + x1[2] * x1[2]) / r_stage
                    x[0], x[1], x[2] = x1[0], x1[1], x1[2]
                    t += h
                    if crossing:
                        touched = True
                        dv = vac - x[1]
                        if abs(dv) > x[2]:
                            mode = 1 if dv > 0.0 else -1
                        else:
                            mode = 0

        if not (math.isfinite(x[0]) and math.isfinite(x[1]) and math.isfinite(x[2])):
            status = STATUS_NONFINITE
            info = half
            break
        if mode == 0:
            touched = True
            half_endidle[half] = 1
        half_touch[half] = 1 if touched else 0
        if check_dcm and not touched:
            status = STATUS_CCM
            info = half
            break

    if status == STATUS_OK:
        c = n_half // 2
        cyc_state[c, 0] = x[0]
        cyc_state[c, 1] = x[1]
        cyc_state[c, 2] = x[2]
        cum_ein[c] = e_in
        cum_eout[c] = e_out

    return status, info, 0.0, 0, n_half if status == STATUS_OK else half


def run_closed_loop(
    l_s, c_f, f_sw,
    exact_de,
    closed, kp, wc, d1_min, d1_max, q_init,
    seg_nsteps, seg_h, seg_vdc, seg_rstage, seg_iz, seg_vref, seg_d1,
    x_init,
    record_decim,
    rec_i, rec_v, rec_d1, rec_q,
    scale_i, scale_v,
):
    """Fixed-step RK4 on the averaged (nonlinear) model with an optional PI.

    The PI output is the duty command, clamped to [d1_min, d1_max] with
    conditional integration (the integrator freezes while clamped).
    Returns (status, info, q_final, n_rec).
    """
    two_ls = 2.0 * l_s
    four_lf = 4.0 * l_s * f_sw

    i_l = float(x_init[0])
    v = float(x_init[1])
    q = float(q_init)

    def duty(e, qv):
        u = kp * (e + wc * qv)
        if u < d1_min:
            return d1_min, True
        if u > d1_max:
            return d1_max, True
        return u, False

    def rhs(i_v, v_v, q_v, vdc, rst, iz, vref, d1_open):
        e = vref - v_v
        if closed:
            d1, clamped = duty(e, q_v)
        else:
            d1, clamped = d1_open, True
        x = four_lf * i_v / (d1 * d1 * vdc)
        if exact_de:
            de = (1.0 - x) / (1.0 + x)
        else:
            de = 1.0 - 2.0 * x
        di = (de * vdc - v_v) / two_ls
        gv = 0.0 if math.isinf(rst) else v_v / rst
        dv = (i_v - gv + iz) / c_f
        dq = 0.0 if clamped else e
        return di, dv, dq, d1

    step = 0
    n_rec = 0
    status = STATUS_OK
    info = -1

    n_seg = len(seg_nsteps)
    for s in range(n_seg):
        h = float(seg_h[s])
        vdc = float(seg_vdc[s])
        rst = float(seg_rstage[s])
        iz = float(seg_iz[s])
        vref = float(seg_vref[s])
        d1_open = float(seg_d1[s])
        for _ in range(int(seg_nsteps[s])):
            if step % record_decim == 0:
                e_now = vref - v
                if closed:
                    d1_now, _ = duty(e_now, q)
                else:
                    d1_now = d1_open
                rec_i[n_rec] = i_l
                rec_v[n_rec] = v
                rec_d1[n_rec] = d1_now
                rec_q[n_rec] = q
                n_rec += 1

            k1i, k1v, k1q, _ = rhs(i_l, v, q, vdc, rst, iz, vref, d1_open)
            k2i, k2v, k2q, _ = rhs(i_l + 0.5 * h * k1i, v + 0.5 * h * k1v, q + 0.5 * h * k1q, vdc, rst, iz, vref, d1_open)
            k3i, k3v, k3q, _ = rhs(i_l + 0.5 * h * k2i, v + 0.5 * h * k2v, q + 0.5 * h * k2q, vdc, rst, iz, vref, d1_open)
            k4i, k4v, k4q, _ = rhs(i_l + h * k3i, v + h * k3v, q + h * k3q, vdc, rst, iz, vref, d1_open)
            i_l += h * (k1i + 2.0 * k2i + 2.0 * k3i + k4i) / 6.0
            v += h * (k1v + 2.0 * k2v + 2.0 * k3v + k4v) / 6.0
            q += h * (k1q + 2.0 * k2q + 2.0 * k3q + k4q) / 6.0
            step += 1

            if not (math.isfinite(i_l) and math.isfinite(v) and math.isfinite(q)):
                return STATUS_NONFINITE, step, q, n_rec
            if abs(i_l) > 1e3 * scale_i or abs(v) > 1e3 * scale_v:
                return STATUS_UNSTABLE, step, q, n_rec

    # Final sample at t_end.
    vref = float(seg_vref[n_seg - 1])
    if closed:
        d1_now, _ = duty(vref - v, q)
    else:
        d1_now = float(seg_d1[n_seg - 1])
    rec_i[n_rec] = i_l
    rec_v[n_rec] = v
    rec_d1[n_rec] = d1_now
    rec_q[n_rec] = q
    n_rec += 1

    return status, info, q, n_rec
