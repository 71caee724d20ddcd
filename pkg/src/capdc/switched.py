"""Cycle-level switched simulation of the converter.

The full-bridge inverter drives each stage with an alternating-polarity
voltage pulse of amplitude v_dc and width d1*t_sw/2, centered in each half
cycle (half-wave symmetric placement). The per-stage network is the series
loop — lumped loop inductance 2*l_s, finite coupling capacitor c_s — into
an ideal diode bridge, filter capacitor c_f and the per-stage load. Between
commutations the network is LTI, so the kernels propagate the closed-form
eigensolution and locate diode events by bisection; see the backend modules
for the stepping details.

Stages are mutually independent (the inverter is an ideal source), so the
default run simulates one representative stage and scales totals by
n_stages; ``per_stage_states=True`` runs every stage explicitly (useful
only when their initial conditions differ).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .averaged import OperatingPoint
from .errors import CcmDetected, NonFiniteState, NotSettled, NumericalError, OutOfRange
from .params import ConverterParams
from .trace import SimulationTrace

STATUS_CCM = 1
STATUS_NONFINITE = 2


@dataclass(frozen=True)
class SwitchedConfig:
    """Run controls for :func:`simulate_switched`."""

    t_end: float
    steps_per_cycle: int = 200
    record_decimation: int = 1
    integrator: str = "exact"      # "exact" | "trapezoid"
    check_dcm: bool = True
    r_series: float = 0.0          # numerical-conditioning experiments only

    def __post_init__(self):
        if self.steps_per_cycle < 100:
            raise ValueError("steps_per_cycle must be >= 100")
        if self.record_decimation < 1:
            raise ValueError("record_decimation must be >= 1")
        if self.steps_per_cycle % self.record_decimation:
            raise ValueError("record_decimation must divide steps_per_cycle")
        if (self.steps_per_cycle // self.record_decimation) % 2:
            raise ValueError("steps_per_cycle/record_decimation must be even")
        if self.integrator not in ("exact", "trapezoid"):
            raise ValueError(f"unknown integrator {self.integrator!r}")


class Schedule:
    """Piecewise-constant schedule: scalar or sorted [(t, value), ...]."""

    def __init__(self, source):
        if np.isscalar(source):
            self.times = np.array([0.0])
            self.values = np.array([float(source)])
        else:
            pairs = sorted((float(t), float(v)) for t, v in source)
            if not pairs or pairs[0][0] > 0.0:
                raise ValueError("schedule must define a value at t = 0")
            self.times = np.array([p[0] for p in pairs])
            self.values = np.array([p[1] for p in pairs])

    def sample(self, t: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.times, t, side="right") - 1
        return self.values[np.maximum(idx, 0)]


def _eigen_tables(params: ConverterParams, r_stage_values, r_series):
    """Per-load eigendecompositions of the two conduction configurations."""
    l_loop = 2.0 * params.l_s
    n_cfg = len(r_stage_values)
    lam = np.zeros((n_cfg, 2, 3), dtype=complex)
    pmat = np.zeros((n_cfg, 2, 3, 3), dtype=complex)
    pinv = np.zeros((n_cfg, 2, 3, 3), dtype=complex)
    for c, r_stage in enumerate(r_stage_values):
        g = 0.0 if math.isinf(r_stage) else 1.0 / (params.c_f * r_stage)
        for s, sigma in enumerate((1.0, -1.0)):
            a = np.array(
                [
                    [-r_series / l_loop, -1.0 / l_loop, -sigma / l_loop],
                    [1.0 / params.c_s, 0.0, 0.0],
                    [sigma / params.c_f, 0.0, -g],
                ]
            )
            w, v = np.linalg.eig(a)
            if np.linalg.cond(v) > 1e12:
                raise NumericalError("degenerate conduction eigenbasis")
            lam[c, s] = w
            pmat[c, s] = v
            pinv[c, s] = np.linalg.inv(v)
    return lam, pmat, pinv


def _run_one_stage(params, cfg, d1_sched, vdc_sched, load_sched, x0,
                   closed_loop=False, pi=None, vref_sched=None, q0=0.0,
                   d1_min=0.02, d1_max=1.0):
    t_sw = params.t_sw
    th = 0.5 * t_sw
    n_cycles = max(1, math.ceil(cfg.t_end / t_sw - 1e-9))
    n_half = 2 * n_cycles

    half_t = np.arange(n_half) * th
    d1_half = np.ascontiguousarray(d1_sched.sample(half_t))
    if np.any(d1_half <= 0.0) or np.any(d1_half > 1.0):
        raise ValueError("duty schedule must stay in (0, 1]")
    vdc_half = np.ascontiguousarray(vdc_sched.sample(half_t))
    r_half = load_sched.sample(half_t) / params.n_stages
    r_values = []
    cfg_half = np.zeros(n_half, dtype=np.int32)
    for k, r in enumerate(r_half):
        r = float(r)
        if r not in r_values:
            r_values.append(r)
        cfg_half[k] = r_values.index(r)
    r_stage_cfg = np.array(r_values)

    vref_half = (
        np.ascontiguousarray(vref_sched.sample(half_t))
        if vref_sched is not None
        else np.zeros(n_half)
    )

    sph = cfg.steps_per_cycle // cfg.record_decimation // 2
    n_rec = n_half * sph
    rec_i = np.zeros(n_rec)
    rec_vcs = np.zeros(n_rec)
    rec_vcf = np.zeros(n_rec)
    rec_vac = np.zeros(n_rec)
    rec_d1 = np.zeros(n_rec)
    cyc_state = np.zeros((n_cycles + 1, 3))
    cum_ein = np.zeros(n_cycles + 1)
    cum_eout = np.zeros(n_cycles + 1)
    half_touch = np.zeros(n_half, dtype=np.int8)
    half_endidle = np.zeros(n_half, dtype=np.int8)

    core = _backend.get_backend()
    if cfg.integrator == "trapezoid":
        if closed_loop:
            raise ValueError("trapezoid integrator is open-loop only")
        trapz = _backend.get_backend("python")  # single implementation
        status, info, q, amb, _ = trapz.run_switched_trapz(
            2.0 * params.l_s, params.c_s, params.c_f, cfg.r_series,
            t_sw, cfg.steps_per_cycle, n_half,
            d1_half, vdc_half, cfg_half, r_stage_cfg,
            np.asarray(x0, dtype=float),
            rec_i, rec_vcs, rec_vcf, rec_vac, rec_d1,
            cyc_state, cum_ein, cum_eout,
            half_touch, half_endidle,
            cfg.check_dcm,
        )
    else:
        lam, pmat, pinv = _eigen_tables(params, r_stage_cfg, cfg.r_series)
        status, info, q, amb, _ = core.run_switched(
            2.0 * params.l_s, params.c_s, params.c_f, cfg.r_series,
            t_sw, cfg.steps_per_cycle, n_half,
            d1_half, vdc_half, cfg_half,
            r_stage_cfg, lam, pmat, pinv,
            np.asarray(x0, dtype=float),
            closed_loop,
            pi.k_p if pi is not None else 0.0,
            pi.omega_c if pi is not None else 0.0,
            d1_min, d1_max, vref_half, q0,
            rec_i, rec_vcs, rec_vcf, rec_vac, rec_d1,
            cyc_state, cum_ein, cum_eout,
            half_touch, half_endidle,
            cfg.check_dcm,
        )

    if status == STATUS_CCM:
        raise CcmDetected(int(info))
    if status == STATUS_NONFINITE:
        raise NonFiniteState(f"non-finite state in half cycle {int(info)}")

    return {
        "rec": (rec_i, rec_vcs, rec_vcf, rec_vac, rec_d1),
        "cyc_state": cyc_state,
        "cum_ein": cum_ein,
        "cum_eout": cum_eout,
        "half_touch": half_touch,
        "half_endidle": half_endidle,
        "ambiguous": amb,
        "q": q,
        "n_cycles": n_cycles,
        "sph": sph,
    }


def simulate_switched(
    params: ConverterParams,
    d1,
    v_dc=None,
    load=None,
    cfg: SwitchedConfig | None = None,
    initial: OperatingPoint | None = None,
    per_stage_states: bool = False,
) -> SimulationTrace:
    """Simulate the switched converter; schedules are piecewise-constant.

    ``d1``, ``v_dc`` and ``load`` (total load resistance) accept a scalar or
    a list of (time, value) pairs starting at t = 0. Cold start is all
    states zero unless an averaged operating point primes the filter
    capacitor. The simulated span is rounded up to whole switching cycles.

    Raises CcmDetected when the inductor current of any half cycle never
    reaches zero (the converter left discontinuous conduction).
    """
    if cfg is None:
        raise ValueError("cfg is required")
    d1_sched = Schedule(d1)
    vdc_sched = Schedule(params.v_dc if v_dc is None else v_dc)
    load_sched = Schedule(params.r_l if load is None else load)

    if initial is None:
        x0 = np.zeros(3)
    else:
        x0 = np.array([0.0, 0.0, initial.v_out_stage])

    n_sim = params.n_stages if per_stage_states else 1
    runs = [
        _run_one_stage(params, cfg, d1_sched, vdc_sched, load_sched, x0)
        for _ in range(n_sim)
    ]
    return _assemble_trace(params, cfg, runs)


def simulate_switched_closed_loop(
    params: ConverterParams,
    pi,
    v_ref_total: float,
    cfg: SwitchedConfig,
    v_dc=None,
    load=None,
    v_ref=None,
    initial: OperatingPoint | None = None,
    d1_init: float = 0.02,
    d1_min: float = 0.02,
) -> SimulationTrace:
    """Drive the switched stage with the PI sampled once per half cycle.

    Cross-validation companion to the averaged closed-loop simulator: the
    duty command is recomputed from the sampled per-stage output voltage at
    each half-cycle boundary, with the same clamp and conditional
    anti-windup. ``v_ref`` optionally schedules the total reference.
    """
    if cfg.integrator != "exact":
        raise ValueError("closed-loop switched runs use the exact integrator")
    d1_sched = Schedule(d1_init)
    vdc_sched = Schedule(params.v_dc if v_dc is None else v_dc)
    load_sched = Schedule(params.r_l if load is None else load)
    ref_sched = Schedule(v_ref_total if v_ref is None else v_ref)
    vref_stage = Schedule(
        [(t, v / params.n_stages) for t, v in zip(ref_sched.times, ref_sched.values)]
    )

    if initial is None:
        x0 = np.zeros(3)
        q0 = d1_init / (pi.k_p * pi.omega_c)
    else:
        x0 = np.array([0.0, 0.0, initial.v_out_stage])
        q0 = initial.d1 / (pi.k_p * pi.omega_c)

    run = _run_one_stage(
        params, cfg, d1_sched, vdc_sched, load_sched, x0,
        closed_loop=True, pi=pi, vref_sched=vref_stage, q0=q0, d1_min=d1_min,
    )
    trace = _assemble_trace(params, cfg, [run])
    th = 0.5 * params.t_sw
    ref_samples = vref_stage.sample(trace.time // th * th)
    trace.v_ref = ref_samples * params.n_stages
    return trace


def _assemble_trace(params, cfg, runs, vref_stage=None) -> SimulationTrace:
    n = params.n_stages
    n_sim = len(runs)
    first = runs[0]
    rec_i, rec_vcs, rec_vcf, rec_vac, rec_d1 = first["rec"]
    n_cycles = first["n_cycles"]
    sph = first["sph"]
    dt = params.t_sw / (2 * sph)
    time = np.arange(len(rec_i)) * dt

    scale = n / n_sim  # replicate representative stages up to n
    i_ac = scale * sum(r["rec"][0] for r in runs)
    v_total = scale * sum(r["rec"][2] for r in runs)
    cycle_states = first["cyc_state"]
    e_in = scale * sum(np.diff(r["cum_ein"]) for r in runs)
    e_out = scale * sum(np.diff(r["cum_eout"]) for r in runs)

    trace = SimulationTrace(
        dt=dt,
        time=time,
        v_ac=rec_vac.copy(),
        i_ac=i_ac,
        i_ls=rec_i,
        v_out_stage=rec_vcf,
        v_out_total=v_total,
        d1=rec_d1,
        v_ref=None if vref_stage is None else vref_stage * n,
        v_cs=rec_vcs,
        samples_per_cycle=2 * sph,
        t_sw=params.t_sw,
        n_stages=n,
        cycle_states=cycle_states,
        cycle_e_in=e_in,
        cycle_e_out=e_out,
        half_touch=first["half_touch"],
        half_end_idle=first["half_endidle"],
        ambiguous_commutations=sum(r["ambiguous"] for r in runs),
    )
    if n_sim > 1:
        trace.stage_i_ls = np.vstack([r["rec"][0] for r in runs])
        trace.stage_v_out = np.vstack([r["rec"][2] for r in runs])
        trace.extras["cycle_states_per_stage"] = [r["cyc_state"] for r in runs]
    trace.extras["params"] = params
    trace.extras["config"] = cfg
    return trace


def detect_steady_state(trace: SimulationTrace, tol_rel: float = 1e-4) -> int:
    """First cycle whose averaged states repeat the previous cycle.

    Cycle means of (|i_ls|, v_cs, v_cf) are compared; the change is
    normalized by each quantity's full-trace magnitude (v_cs and the signed
    current average near zero would make a plain relative test meaningless).
    """
    n_cycles = trace.n_cycles
    if n_cycles < 10:
        raise ValueError("trace must span at least 10 cycles")
    spc = trace.samples_per_cycle
    monitored = [np.abs(trace.i_ls), trace.v_cs, trace.v_out_stage]
    means = np.array(
        [col[: n_cycles * spc].reshape(n_cycles, spc).mean(axis=1) for col in monitored]
    )
    scales = np.maximum(np.max(np.abs(monitored), axis=1), 1e-30)
    change = np.abs(np.diff(means, axis=1)) / scales[:, None]
    settled = np.nonzero(np.all(change < tol_rel, axis=0))[0]
    if len(settled) == 0:
        raise NotSettled(f"no cycle settled below {tol_rel}")
    return int(settled[0]) + 1


def energy_audit(trace: SimulationTrace, cycle_index: int):
    """(e_in, e_out, delta_stored) in joules over one switching cycle."""
    if trace.cycle_e_in is None:
        raise OutOfRange("trace carries no energy accounting")
    if not (0 <= cycle_index < trace.n_cycles):
        raise OutOfRange(f"cycle {cycle_index} out of range")
    params: ConverterParams = trace.extras["params"]
    n = params.n_stages
    states = trace.extras.get("cycle_states_per_stage")
    if states is None:
        states = [trace.cycle_states]
        scale = float(n)
    else:
        scale = n / len(states)

    def stored(row):
        i, vcs, vcf = row
        return (
            0.5 * (2.0 * params.l_s) * i * i
            + 0.5 * params.c_s * vcs * vcs
            + 0.5 * params.c_f * vcf * vcf
        )

    delta = scale * sum(
        stored(s[cycle_index + 1]) - stored(s[cycle_index]) for s in states
    )
    return (
        float(trace.cycle_e_in[cycle_index]),
        float(trace.cycle_e_out[cycle_index]),
        float(delta),
    )
