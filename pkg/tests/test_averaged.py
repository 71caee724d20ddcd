
import numpy as np
import pytest

from capdc.averaged import (
    dcm_load_ratio,
    equivalent_duty_exact,
    equivalent_duty_simplified,
    solve_duty_for_target,
    solve_operating_point,
)
from capdc.errors import (
    DutyOutOfRange,
    InvalidDuty,
    NegativeLoad,
    TargetOutOfRange,
)

# Hand evaluations on an independent calculator:
#   x(d1, v_dc, i) = 4 * 230e-9 * 200e3 * i / (d1^2 * v_dc) = 0.184*i/(d1^2*v_dc)
#   x(1, 15, 1)      = 0.0122666666667 -> (1-x)/(1+x) = 0.9757639620653
#   x(0.5, 15, 0.5)  = 0.0245333333333 -> (1-x)/(1+x) = 0.9521082769391
HAND = {
    (1.0, 15.0, 1.0): (0.0122666666667, 0.9757639620653, 0.9754666666667),
    (0.5, 15.0, 0.5): (0.0245333333333, 0.9521082769391, 0.9509333333333),
}


def test_no_load_gives_unity_ratio(params):
    assert equivalent_duty_exact(1.0, 15.0, 0.0, params) == 1.0
    assert equivalent_duty_simplified(1.0, 15.0, 0.0, params) == 1.0
    assert dcm_load_ratio(1.0, 15.0, 0.0, params) == 0.0


@pytest.mark.parametrize("point", sorted(HAND))
def test_duty_ratio_hand_values(params, point):
    x, exact, simplified = HAND[point]
    assert dcm_load_ratio(*point, params) == pytest.approx(x, rel=1e-10)
    assert equivalent_duty_exact(*point, params) == pytest.approx(exact, rel=1e-10)
    assert equivalent_duty_simplified(*point, params) == pytest.approx(simplified, rel=1e-10)


def test_load_ratio_at_regulated_point(params):
    assert dcm_load_ratio(0.279, 15.0, 0.9778, params) == pytest.approx(0.1540, abs=1e-4)


def test_input_validation(params):
    with pytest.raises(InvalidDuty):
        equivalent_duty_exact(0.0, 15.0, 0.1, params)
    with pytest.raises(InvalidDuty):
        equivalent_duty_exact(1.2, 15.0, 0.1, params)
    with pytest.raises(InvalidDuty):
        equivalent_duty_exact(0.5, -1.0, 0.1, params)
    with pytest.raises(NegativeLoad):
        equivalent_duty_exact(0.5, 15.0, -0.1, params)


def test_monotonicity(params):
    d1s = np.linspace(0.1, 1.0, 19)
    i_outs = np.linspace(0.0, 2.5, 26)
    for d1 in d1s:
        values = [equivalent_duty_exact(d1, 15.0, i, params) for i in i_outs]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert values[0] == 1.0
        assert all(v < 1.0 for v in values[1:])
    for i in i_outs[1:]:
        values = [equivalent_duty_exact(d1, 15.0, i, params) for d1 in d1s]
        assert all(a < b for a, b in zip(values, values[1:]))


def test_exact_vs_simplified_taylor_bound(params):
    # |(1-x)/(1+x) - (1-2x)| = 2x^2/(1+x) <= 2x^2
    for d1 in np.linspace(0.1, 1.0, 25):
        for i in np.linspace(0.0, 2.7, 25):
            x = dcm_load_ratio(d1, 15.0, i, params)
            if x > 0.3:
                continue
            gap = abs(
                equivalent_duty_exact(d1, 15.0, i, params)
                - equivalent_duty_simplified(d1, 15.0, i, params)
            )
            assert gap <= 2.0 * x * x + 1e-15


def test_operating_point_no_load(params_no_load):
    op = solve_operating_point(1.0, 15.0, params_no_load, "exact")
    assert op.v_out_stage == 15.0
    assert op.i_l == 0.0
    assert op.d_e == 1.0


def test_operating_point_at_prototype_duty(params):
    op = solve_operating_point(0.279, 15.0, params, "exact")
    assert op.v_out_stage == pytest.approx(11.0, abs=0.05)
    assert op.v_out_total == pytest.approx(176.0, abs=0.5)
    assert op.i_l == op.i_out == op.v_out_stage / 11.25


@pytest.mark.parametrize("model", ["exact", "simplified"])
@pytest.mark.parametrize("d1", [0.15, 0.279, 0.5, 0.85, 1.0])
def test_fixed_point_self_consistency(params, model, d1):
    from capdc.averaged import equivalent_duty

    op = solve_operating_point(d1, 15.0, params, model)
    residual = abs(equivalent_duty(d1, 15.0, op.i_out, params, model) * 15.0 - op.v_out_stage)
    assert residual <= 1e-12 * 15.0
    assert 0.0 < op.d_e <= 1.0


def test_duty_inversion_at_176(params):
    op = solve_duty_for_target(176.0, 15.0, params, "exact")
    # closed-form inversion: d1 = sqrt(4 l f i / (x v)) = 0.2792158331497
    assert op.d1 == pytest.approx(0.2792158331497, rel=1e-9)
    assert op.v_out_total == pytest.approx(176.0, rel=1e-9)


@pytest.mark.parametrize("model", ["exact", "simplified"])
def test_duty_inversion_round_trip(params, model):
    rng = np.random.default_rng(11)
    for target in rng.uniform(20.0, 220.0, size=20):
        op = solve_duty_for_target(target, 15.0, params, model)
        assert op.v_out_total == pytest.approx(target, rel=1e-9)
        forward = solve_operating_point(op.d1, 15.0, params, model)
        assert forward.v_out_total == pytest.approx(target, rel=1e-9)


def test_inversion_no_load_convention(params_no_load):
    op = solve_duty_for_target(16 * 15.0, 15.0, params_no_load, "exact")
    assert op.d1 == 1.0
    with pytest.raises(TargetOutOfRange):
        solve_duty_for_target(100.0, 15.0, params_no_load, "exact")


def test_inversion_infeasible_duty(params):
    with pytest.raises(DutyOutOfRange):
        solve_duty_for_target(0.99 * 16 * 15.0, 15.0, params, "exact")
    with pytest.raises(TargetOutOfRange):
        solve_duty_for_target(16 * 15.0 + 1.0, 15.0, params, "exact")
    with pytest.raises(TargetOutOfRange):
        solve_duty_for_target(-5.0, 15.0, params, "exact")
