"""Small-signal coefficients and state-space model around an operating point.

The averaged switch/diode pair contributes two nonlinear sources,
``f_i = d_e * i_l`` (current side) and ``f_v = d_e * v_dc`` (voltage side),
with the simplified equivalent duty ratio and ``i_l`` as the current
argument. Their partial derivatives with respect to (i_l, v_dc, d1) give the
six dependent-source coefficients.

Two sources for the numbers coexist on purpose:

* ``analytic_as_printed`` — the closed-form coefficient set exactly as
  published. Its R_P carries an extra factor 2*I_L relative to the actual
  derivative of ``f_v`` (it is dimensionally a voltage, not an impedance).
* ``numeric_oracle``  — central finite differences of ``f_i``/``f_v``.

Everything downstream defaults to the oracle; the printed set is kept for
traceability and report generation. Both are recorded, never mixed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .averaged import OperatingPoint
from .errors import StepTooSmall
from .params import ConverterParams

ANALYTIC = "analytic_as_printed"
NUMERIC = "numeric_oracle"


@dataclass(frozen=True)
class SmallSignalCoefficients:
    d_t: float   # dimensionless, current source vs i_l
    g_t: float   # siemens, current source vs v_dc
    i_t: float   # amperes, current source vs d1
    r_p: float   # ohms (voltage source vs i_l); <= 0 for i_l >= 0
    d_p: float   # dimensionless, voltage source vs v_dc
    v_p: float   # volts, voltage source vs d1
    source: str


@dataclass(frozen=True)
class StateSpaceModel:
    """dx/dt = A x + B1 d1~ + B2 vdc~ + B3 iz~ with x = (i_l~, v_out~)."""

    a: np.ndarray      # (2, 2)
    b1: np.ndarray     # (2,)
    b2: np.ndarray     # (2,)
    b3: np.ndarray     # (2,)
    c: np.ndarray      # (2,) selector for v_out~
    d_sel: np.ndarray  # (2,) selector for i_l~


def coefficients_analytic(op: OperatingPoint, params: ConverterParams) -> SmallSignalCoefficients:
    """The six closed-form coefficients, exactly as published."""
    l_s, t_sw = params.l_s, params.t_sw
    d1, v_dc, i_l = op.d1, op.v_dc, op.i_l
    d1_2 = d1 * d1
    return SmallSignalCoefficients(
        d_t=1.0 - 16.0 * l_s * i_l / (d1_2 * v_dc * t_sw),
        g_t=8.0 * l_s * i_l * i_l / (d1_2 * v_dc * v_dc * t_sw),
        i_t=16.0 * l_s * i_l * i_l / (d1_2 * d1 * v_dc * t_sw),
        r_p=-16.0 * l_s * i_l / (d1_2 * t_sw),
        d_p=1.0,
        v_p=16.0 * l_s * i_l / (d1_2 * d1 * t_sw),
        source=ANALYTIC,
    )


def _source_functions(params: ConverterParams):
    four_lf = 4.0 * params.l_s * params.f_sw

    def d_e(i_l, v_dc, d1):
        return 1.0 - 2.0 * four_lf * i_l / (d1 * d1 * v_dc)

    def f_i(i_l, v_dc, d1):
        return d_e(i_l, v_dc, d1) * i_l

    def f_v(i_l, v_dc, d1):
        return d_e(i_l, v_dc, d1) * v_dc

    return f_i, f_v


def _central(fn, args, index, h):
    lo = list(args)
    hi = list(args)
    lo[index] -= h
    hi[index] += h
    if hi[index] == args[index] or lo[index] == args[index]:
        raise StepTooSmall(f"step {h} underflows argument {args[index]}")
    return (fn(*hi) - fn(*lo)) / (2.0 * h)


def coefficients_numeric(
    op: OperatingPoint,
    params: ConverterParams,
    h_rel: float = 1e-6,
) -> SmallSignalCoefficients:
    """Central-difference derivatives of the two averaged source functions."""
    if not (0.0 < h_rel <= 1e-3):
        raise StepTooSmall(f"h_rel must lie in (0, 1e-3], got {h_rel}")
    f_i, f_v = _source_functions(params)
    args = (op.i_l, op.v_dc, op.d1)
    steps = [h_rel * max(abs(a), 1.0) for a in args]
    return SmallSignalCoefficients(
        d_t=_central(f_i, args, 0, steps[0]),
        g_t=_central(f_i, args, 1, steps[1]),
        i_t=_central(f_i, args, 2, steps[2]),
        r_p=_central(f_v, args, 0, steps[0]),
        d_p=_central(f_v, args, 1, steps[1]),
        v_p=_central(f_v, args, 2, steps[2]),
        source=NUMERIC,
    )


def coefficients(op, params, source: str = NUMERIC, h_rel: float = 1e-6) -> SmallSignalCoefficients:
    if source == NUMERIC:
        return coefficients_numeric(op, params, h_rel)
    if source == ANALYTIC:
        return coefficients_analytic(op, params)
    raise ValueError(f"unknown coefficient source {source!r}")


def assemble_state_space(coeffs: SmallSignalCoefficients, params: ConverterParams) -> StateSpaceModel:
    two_ls = 2.0 * params.l_s
    c_f = params.c_f
    r_stage = params.r_stage
    a = np.array(
        [
            [coeffs.r_p / two_ls, -1.0 / two_ls],
            [1.0 / c_f, -1.0 / (c_f * r_stage)],
        ]
    )
    return StateSpaceModel(
        a=a,
        b1=np.array([coeffs.v_p / two_ls, 0.0]),
        b2=np.array([coeffs.d_p / two_ls, 0.0]),
        b3=np.array([0.0, 1.0 / c_f]),
        c=np.array([0.0, 1.0]),
        d_sel=np.array([1.0, 0.0]),
    )
