"""The compiled and pure-Python kernels must be interchangeable."""

import math

import numpy as np
import pytest

from capdc import _backend
from capdc.averaged import solve_duty_for_target
from capdc.closedloop import ClosedLoopConfig, ScenarioEvent, simulate_closed_loop
from capdc.regulator import design_pi
from capdc.smallsignal import coefficients_numeric
from capdc.switched import SwitchedConfig, simulate_switched
from capdc.xfer import gvd_closed_form, resonant_parameters

needs_cython = pytest.mark.skipif(
    "cython" not in _backend.available_backends(),
    reason="compiled backend not built",
)


@pytest.fixture(scope="module")
def params():
    from capdc.params import table_i_params

    return table_i_params()


@pytest.fixture()
def force_backend(monkeypatch):
    def _force(name):
        monkeypatch.setenv("CAPDC_BACKEND", name)

    return _force


def test_python_backend_always_available():
    assert "python" in _backend.available_backends()
    assert _backend.get_backend("python").BACKEND_NAME == "python"


@needs_cython
def test_backend_selection(force_backend, monkeypatch):
    force_backend("cython")
    assert _backend.active_backend_name() == "cython"
    force_backend("python")
    assert _backend.active_backend_name() == "python"
    monkeypatch.setenv("CAPDC_BACKEND", "fortran")
    with pytest.raises(ValueError):
        _backend.get_backend()


@needs_cython
def test_switched_kernels_agree(params, force_backend):
    cfg = SwitchedConfig(t_end=0.5e-3, steps_per_cycle=200, record_decimation=2)
    force_backend("cython")
    tr_c = simulate_switched(params, 0.279, cfg=cfg)
    force_backend("python")
    tr_p = simulate_switched(params, 0.279, cfg=cfg)
    for name in ("i_ls", "v_cs", "v_out_stage", "v_ac", "i_ac", "d1"):
        a = getattr(tr_c, name)
        b = getattr(tr_p, name)
        scale = max(np.max(np.abs(b)), 1e-30)
        assert np.max(np.abs(a - b)) <= 1e-9 * scale, name
    assert np.array_equal(tr_c.half_touch, tr_p.half_touch)
    assert np.array_equal(tr_c.half_end_idle, tr_p.half_end_idle)
    scale_e = max(np.max(np.abs(tr_p.cycle_e_in)), 1e-30)
    assert np.max(np.abs(tr_c.cycle_e_in - tr_p.cycle_e_in)) <= 1e-9 * scale_e
    assert np.max(np.abs(tr_c.cycle_e_out - tr_p.cycle_e_out)) <= 1e-9 * scale_e


@needs_cython
def test_closed_loop_kernels_agree(params, force_backend):
    op = solve_duty_for_target(176.0, 15.0, params, "exact")
    co = coefficients_numeric(op, params)
    rp = resonant_parameters(co, params)
    pi = design_pi(gvd_closed_form(co, params), rp.omega_o_exact, 2 * math.pi * 1000.0)
    cfg = ClosedLoopConfig(t_end=5e-3, record_decimation=5)
    events = [ScenarioEvent(1e-3, "source_step", 14.0)]
    force_backend("cython")
    tr_c = simulate_closed_loop(params, pi, 176.0, events, cfg)
    force_backend("python")
    tr_p = simulate_closed_loop(params, pi, 176.0, events, cfg)
    for name in ("i_ls", "v_out_stage", "d1"):
        a = getattr(tr_c, name)
        b = getattr(tr_p, name)
        scale = max(np.max(np.abs(b)), 1e-30)
        assert np.max(np.abs(a - b)) <= 1e-9 * scale, name
