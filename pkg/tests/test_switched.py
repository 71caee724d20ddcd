import math

import numpy as np
import pytest

from capdc.averaged import solve_operating_point
from capdc.errors import CcmDetected, NotSettled, OutOfRange
from capdc.params import ConverterParams
from capdc.switched import (
    SwitchedConfig,
    detect_steady_state,
    energy_audit,
    simulate_switched,
)
from capdc.trace import cycle_average


@pytest.fixture(scope="module")
def steady_trace(params):
    cfg = SwitchedConfig(t_end=3e-3, steps_per_cycle=200, record_decimation=10)
    return simulate_switched(params, 0.279, cfg=cfg)


@pytest.fixture(scope="module")
def params():
    from capdc.params import table_i_params

    return table_i_params()


def test_config_validation():
    with pytest.raises(ValueError):
        SwitchedConfig(t_end=1e-3, steps_per_cycle=80)
    with pytest.raises(ValueError):
        SwitchedConfig(t_end=1e-3, steps_per_cycle=200, record_decimation=3)
    with pytest.raises(ValueError):
        # one sample per cycle cannot tile the half-cycle grid
        SwitchedConfig(t_end=1e-3, steps_per_cycle=200, record_decimation=200)
    with pytest.raises(ValueError):
        SwitchedConfig(t_end=1e-3, integrator="heun")


def test_idle_equilibrium_no_load():
    # Output precharged to the pulse peak: the bridge never forward-biases.
    noload = ConverterParams(
        v_dc=15.0, n_stages=16, l_s=230e-9, c_s=44e-6, c_f=10e-6,
        r_l=math.inf, f_sw=200e3,
    )
    op = solve_operating_point(1.0, 15.0, noload, "exact")
    for d1 in (0.5, 1.0):
        tr = simulate_switched(
            noload, d1, cfg=SwitchedConfig(t_end=100e-6, steps_per_cycle=200),
            initial=op,
        )
        assert np.all(tr.i_ls == 0.0)
        assert np.all(tr.v_out_stage == 15.0)


def test_cross_model_steady_state(params, steady_trace):
    tr = steady_trace
    settle = detect_steady_state(tr)
    assert settle < tr.n_cycles - 1
    op = solve_operating_point(0.279, 15.0, params, "exact")
    v_avg = cycle_average(tr, "v_out_total_v", tr.n_cycles - 1)
    assert v_avg == pytest.approx(op.v_out_total, rel=0.05)
    # rectified inductor-current average against the averaged-model current
    spc = tr.samples_per_cycle
    i_avg = float(np.mean(np.abs(tr.i_ls[-spc:])))
    assert i_avg == pytest.approx(op.i_l, rel=0.05)


def test_dcm_invariant_across_duty_grid(params):
    cfg = SwitchedConfig(t_end=0.5e-3, steps_per_cycle=200, record_decimation=10)
    for d1 in [round(0.1 * k, 1) for k in range(1, 11)]:
        tr = simulate_switched(params, d1, cfg=cfg)
        assert tr.half_touch.all(), f"current missed zero at d1={d1}"


def test_strict_idle_ending_at_design_point(params, steady_trace):
    settle = detect_steady_state(steady_trace)
    assert steady_trace.half_end_idle[2 * settle:].all()


def test_charge_consistency_at_steady_state(steady_trace):
    states = steady_trace.cycle_states
    dv_cs = abs(states[-1, 1] - states[-2, 1])
    assert dv_cs <= 1e-6 * 15.0


def test_stage_scaling_property(params):
    cfg = SwitchedConfig(t_end=100e-6, steps_per_cycle=200)
    tr1 = simulate_switched(params, 0.35, cfg=cfg)
    trn = simulate_switched(params, 0.35, cfg=cfg, per_stage_states=True)
    assert np.array_equal(tr1.i_ls, trn.i_ls)
    assert np.array_equal(tr1.v_out_stage, trn.v_out_stage)
    assert trn.stage_i_ls.shape[0] == params.n_stages
    assert np.allclose(tr1.v_out_total, trn.v_out_total, rtol=1e-12)
    assert np.allclose(tr1.i_ac, trn.i_ac, rtol=1e-12)


def test_cycle_average_constant_column(steady_trace):
    assert cycle_average(steady_trace, "d1", 5) == pytest.approx(0.279, rel=1e-12)


def test_cycle_average_square_wave_is_zero(params):
    # Full square drive: right-continuous sampling makes the mean exactly 0.
    tr = simulate_switched(
        params, 1.0, cfg=SwitchedConfig(t_end=50e-6, steps_per_cycle=200)
    )
    for k in range(tr.n_cycles):
        assert cycle_average(tr, "v_ac_v", k) == pytest.approx(0.0, abs=1e-12)


def test_cycle_average_out_of_range(steady_trace):
    with pytest.raises(OutOfRange):
        cycle_average(steady_trace, "d1", steady_trace.n_cycles)


def test_detect_steady_state_stationary(params):
    noload = ConverterParams(
        v_dc=15.0, n_stages=16, l_s=230e-9, c_s=44e-6, c_f=10e-6,
        r_l=math.inf, f_sw=200e3,
    )
    op = solve_operating_point(1.0, 15.0, noload, "exact")
    tr = simulate_switched(
        noload, 1.0, cfg=SwitchedConfig(t_end=60e-6, steps_per_cycle=200), initial=op
    )
    assert detect_steady_state(tr) == 1


def test_detect_steady_state_settling_time_scale(params, steady_trace):
    settle = detect_steady_state(steady_trace)
    rc_cycles = params.r_stage * params.c_f / params.t_sw
    assert rc_cycles <= settle <= 10 * rc_cycles


def test_detect_steady_state_rejects_oscillation(params):
    # Alternate the duty every cycle: averages never repeat.
    sched = []
    for k in range(100):
        sched.append((k * params.t_sw, 0.2 if k % 2 == 0 else 0.6))
    tr = simulate_switched(
        params, sched, cfg=SwitchedConfig(t_end=0.5e-3, steps_per_cycle=200,
                                          record_decimation=10)
    )
    with pytest.raises(NotSettled):
        detect_steady_state(tr)


def test_detect_steady_state_needs_ten_cycles(params):
    tr = simulate_switched(
        params, 0.3, cfg=SwitchedConfig(t_end=20e-6, steps_per_cycle=200)
    )
    with pytest.raises(ValueError):
        detect_steady_state(tr)


def test_energy_audit_idle_system():
    noload = ConverterParams(
        v_dc=15.0, n_stages=16, l_s=230e-9, c_s=44e-6, c_f=10e-6,
        r_l=math.inf, f_sw=200e3,
    )
    op = solve_operating_point(1.0, 15.0, noload, "exact")
    tr = simulate_switched(
        noload, 1.0, cfg=SwitchedConfig(t_end=60e-6, steps_per_cycle=200), initial=op
    )
    assert energy_audit(tr, 3) == (0.0, 0.0, 0.0)


def test_energy_audit_steady_cycle(steady_trace):
    e_in, e_out, d_st = energy_audit(steady_trace, steady_trace.n_cycles - 1)
    assert abs(e_in - e_out - d_st) <= 0.005 * e_in
    assert e_in > 0.0


def test_energy_audit_cold_start_cycle(steady_trace):
    e_in, e_out, d_st = energy_audit(steady_trace, 0)
    assert abs(e_in - e_out - d_st) <= 0.005 * e_in
    assert d_st > 0.0  # cold start stores energy


def test_energy_audit_out_of_range(steady_trace):
    with pytest.raises(OutOfRange):
        energy_audit(steady_trace, steady_trace.n_cycles)


def test_ccm_detection():
    heavy = ConverterParams(
        v_dc=15.0, n_stages=16, l_s=230e-9, c_s=44e-6, c_f=10e-6,
        r_l=0.5, f_sw=200e3,
    )
    sched = [(0.0, 0.9), (2.5e-6, 0.05)]
    with pytest.raises(CcmDetected) as exc:
        simulate_switched(
            heavy, sched, cfg=SwitchedConfig(t_end=50e-6, steps_per_cycle=200)
        )
    assert exc.value.half_cycle == 1


def test_ccm_check_can_be_disabled():
    heavy = ConverterParams(
        v_dc=15.0, n_stages=16, l_s=230e-9, c_s=44e-6, c_f=10e-6,
        r_l=0.5, f_sw=200e3,
    )
    sched = [(0.0, 0.9), (2.5e-6, 0.05)]
    tr = simulate_switched(
        heavy, sched,
        cfg=SwitchedConfig(t_end=50e-6, steps_per_cycle=200, check_dcm=False),
    )
    assert not tr.half_touch.all()


def test_trapezoid_cross_check(params):
    cfg_e = SwitchedConfig(t_end=200e-6, steps_per_cycle=400, record_decimation=4)
    cfg_t = SwitchedConfig(
        t_end=200e-6, steps_per_cycle=400, record_decimation=4, integrator="trapezoid"
    )
    tr_e = simulate_switched(params, 0.4, cfg=cfg_e)
    tr_t = simulate_switched(params, 0.4, cfg=cfg_t)
    scale_v = np.max(np.abs(tr_e.v_out_stage))
    scale_i = np.max(np.abs(tr_e.i_ls))
    assert np.max(np.abs(tr_e.v_out_stage - tr_t.v_out_stage)) <= 1e-3 * scale_v
    assert np.max(np.abs(tr_e.i_ls - tr_t.i_ls)) <= 1e-3 * scale_i


def test_source_and_load_schedules(params):
    # Source and load steps mid-run change the steady state accordingly.
    cfg = SwitchedConfig(t_end=4e-3, steps_per_cycle=200, record_decimation=10)
    tr = simulate_switched(
        params, 0.5,
        v_dc=[(0.0, 15.0), (2e-3, 12.0)],
        load=[(0.0, 180.0), (2e-3, 300.0)],
        cfg=cfg,
    )
    v_before = cycle_average(tr, "v_out_stage_v", int(1.8e-3 / params.t_sw))
    v_after = cycle_average(tr, "v_out_stage_v", tr.n_cycles - 1)
    op_before = solve_operating_point(0.5, 15.0, params, "exact")
    p2 = ConverterParams(
        v_dc=12.0, n_stages=16, l_s=230e-9, c_s=44e-6, c_f=10e-6, r_l=300.0,
        f_sw=200e3,
    )
    op_after = solve_operating_point(0.5, 12.0, p2, "exact")
    assert v_before == pytest.approx(op_before.v_out_stage, rel=0.05)
    assert v_after == pytest.approx(op_after.v_out_stage, rel=0.05)


def test_trace_csv_schema(steady_trace, tmp_path):
    path = tmp_path / "t.csv"
    steady_trace.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "time_s,v_ac_v,i_ac_a,i_ls_a,v_out_stage_v,v_out_total_v,d1"
    assert len(lines) == len(steady_trace.time) + 1
    assert lines[1].startswith("0,")
