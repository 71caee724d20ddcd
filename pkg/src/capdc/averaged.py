"""Averaged model of the converter in discontinuous conduction.

One stage of the converter, averaged over a half switching cycle, behaves as
a controlled source ``d_e * v_dc`` feeding the filter capacitor and the
per-stage share of the load. ``d_e`` is the load-dependent equivalent duty
ratio; the exact form and its light-load simplification are both available:

    x   = 4 * l_s * f_sw * i_out / (d1**2 * v_dc)
    d_e = (1 - x) / (1 + x)          (exact)
    d_e = 1 - 2 * x                  (simplified, valid for x << 1)

The steady-state operating point is the fixed point of
``v = d_e(d1, v_dc, v / r_stage) * v_dc`` in ``v`` on ``[0, v_dc]``; the map
is monotone, so a plain bisection bracket (plus one Newton polish) is both
safe and deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import (
    DutyOutOfRange,
    InvalidDuty,
    NegativeLoad,
    NoConvergence,
    TargetOutOfRange,
)
from .params import ConverterParams

MODELS = ("exact", "simplified")


@dataclass(frozen=True)
class OperatingPoint:
    """Steady state of one stage (totals scale by n_stages)."""

    d1: float
    v_dc: float
    i_l: float
    v_out_stage: float
    i_out: float
    d_e: float
    v_out_total: float


def _check_inputs(d1: float, v_dc: float, i_out: float) -> None:
    if not (0.0 < d1 <= 1.0):
        raise InvalidDuty(f"d1 must lie in (0, 1], got {d1}")
    if v_dc <= 0.0:
        raise InvalidDuty(f"v_dc must be positive, got {v_dc}")
    if i_out < 0.0:
        raise NegativeLoad(f"i_out must be non-negative, got {i_out}")


def dcm_load_ratio(d1: float, v_dc: float, i_out: float, params: ConverterParams) -> float:
    """The dimensionless load ratio x; the simplified model needs x << 1."""
    _check_inputs(d1, v_dc, i_out)
    return 4.0 * params.l_s * params.f_sw * i_out / (d1 * d1 * v_dc)


def equivalent_duty_exact(d1: float, v_dc: float, i_out: float, params: ConverterParams) -> float:
    x = dcm_load_ratio(d1, v_dc, i_out, params)
    return (1.0 - x) / (1.0 + x)


def equivalent_duty_simplified(d1: float, v_dc: float, i_out: float, params: ConverterParams) -> float:
    x = dcm_load_ratio(d1, v_dc, i_out, params)
    return 1.0 - 2.0 * x


def equivalent_duty(d1, v_dc, i_out, params, model: str = "exact") -> float:
    if model == "exact":
        return equivalent_duty_exact(d1, v_dc, i_out, params)
    if model == "simplified":
        return equivalent_duty_simplified(d1, v_dc, i_out, params)
    raise ValueError(f"unknown model {model!r}")


def solve_operating_point(
    d1: float,
    v_dc: float,
    params: ConverterParams,
    model: str = "exact",
) -> OperatingPoint:
    """Solve the per-stage averaged circuit for its steady state.

    Bisection on v in [0, v_dc] down to a 1e-13*v_dc bracket, then one
    Newton polish; the residual |v - d_e*v_dc| ends below 1e-12*v_dc.
    """
    _check_inputs(d1, v_dc, 0.0)
    r_stage = params.r_stage

    if math.isinf(r_stage):
        d_e = equivalent_duty(d1, v_dc, 0.0, params, model)
        v = d_e * v_dc
        return OperatingPoint(d1, v_dc, 0.0, v, 0.0, d_e, params.n_stages * v)

    def residual(v: float) -> float:
        return equivalent_duty(d1, v_dc, v / r_stage, params, model) * v_dc - v

    lo, hi = 0.0, v_dc
    if residual(lo) < 0.0 or residual(hi) > 1e-12 * v_dc:
        raise NoConvergence("fixed-point map not bracketed on [0, v_dc]")
    target_width = 1e-13 * v_dc
    for _ in range(200):
        if hi - lo <= target_width:
            break
        mid = 0.5 * (lo + hi)
        if residual(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    else:
        raise NoConvergence("bisection failed to reach bracket width")

    v = 0.5 * (lo + hi)
    # One Newton polish; d(d_e)/dv through i_out = v / r_stage.
    k = 4.0 * params.l_s * params.f_sw / (d1 * d1 * v_dc)
    x = k * v / r_stage
    if model == "exact":
        dde_dx = -2.0 / ((1.0 + x) * (1.0 + x))
    else:
        dde_dx = -2.0
    slope = v_dc * dde_dx * k / r_stage - 1.0
    v = v - residual(v) / slope

    i_out = v / r_stage
    d_e = equivalent_duty(d1, v_dc, i_out, params, model)
    return OperatingPoint(d1, v_dc, i_out, v, i_out, d_e, params.n_stages * v)


def solve_duty_for_target(
    v_out_total_target: float,
    v_dc: float,
    params: ConverterParams,
    model: str = "exact",
) -> OperatingPoint:
    """Find the duty command whose steady-state total output hits the target.

    Uses the closed-form inversion of the duty-ratio algebra, then verifies
    by a forward solve (agreement to 1e-9 relative).
    """
    n = params.n_stages
    v_max = n * v_dc
    r_stage = params.r_stage

    if math.isinf(r_stage):
        if abs(v_out_total_target - v_max) <= 1e-12 * v_max:
            # Degenerate no-load case: any duty gives v_dc; defined as d1 = 1.
            return solve_operating_point(1.0, v_dc, params, model)
        raise TargetOutOfRange(
            f"no-load output is pinned at {v_max} V, cannot reach {v_out_total_target} V"
        )

    if not (0.0 < v_out_total_target < v_max):
        raise TargetOutOfRange(
            f"target {v_out_total_target} V outside (0, {v_max}) V"
        )

    v_stage = v_out_total_target / n
    d_e = v_stage / v_dc
    i_out = v_stage / r_stage
    if model == "exact":
        x = (1.0 - d_e) / (1.0 + d_e)
    else:
        x = (1.0 - d_e) / 2.0
    if x <= 0.0:
        raise TargetOutOfRange("target implies a non-positive load ratio")
    d1 = math.sqrt(4.0 * params.l_s * params.f_sw * i_out / (x * v_dc))
    if d1 > 1.0:
        raise DutyOutOfRange(
            f"target requires d1 = {d1:.6g} > 1 at v_dc = {v_dc} V"
        )

    op = solve_operating_point(d1, v_dc, params, model)
    if abs(op.v_out_total - v_out_total_target) > 1e-9 * v_out_total_target:
        raise NoConvergence(
            "forward solve did not reproduce the inverted target"
        )
    return op
