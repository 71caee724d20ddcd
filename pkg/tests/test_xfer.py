import math

import numpy as np
import pytest

from capdc.errors import (
    EmptyGrid,
    NoCrossover,
    PolesNotSeparated,
    UndampedOperatingPoint,
)
from capdc.params import ConverterParams
from capdc.smallsignal import (
    SmallSignalCoefficients,
    StateSpaceModel,
    assemble_state_space,
    coefficients_analytic,
    coefficients_numeric,
)
from capdc.xfer import (
    RationalTransferFunction,
    crossover_frequency,
    frequency_response,
    gvd_as_printed,
    gvd_closed_form,
    gvd_first_order,
    gvi_as_printed,
    gvi_closed_form,
    gvv_as_printed,
    gvv_closed_form,
    resonant_parameters,
    tf_from_state_space,
)

OMEGAS_200 = 2.0 * math.pi * np.logspace(1, 7, 200)


@pytest.fixture(scope="module")
def coeffs(op_176, params):
    return coefficients_numeric(op_176, params)


# conftest fixtures are function-scoped via session params; re-expose here
@pytest.fixture(scope="module")
def op_176(params):
    from capdc.averaged import solve_duty_for_target

    return solve_duty_for_target(176.0, 15.0, params, "exact")


@pytest.fixture(scope="module")
def params():
    from capdc.params import table_i_params

    return table_i_params()


def test_resonant_parameters_printed_values(coeffs, params):
    rp = resonant_parameters(coeffs, params)
    assert rp.omega_p / (2 * math.pi) == pytest.approx(74206.3748, rel=1e-8)
    assert rp.omega_o == rp.q_p * rp.omega_p
    assert rp.omega_rz == -coeffs.r_p / (2 * params.l_s)
    assert rp.omega_n == rp.omega_p * math.sqrt(rp.loading)
    # Full-expression Q equals omega_n / alpha
    alpha = 1.0 / (params.c_f * 11.25) - coeffs.r_p / (2 * params.l_s)
    assert rp.q_p == pytest.approx(rp.omega_n / alpha, rel=1e-12)
    assert rp.q_p_approx == math.sqrt(2 * params.l_s / params.c_f) / (-coeffs.r_p)


def test_resonant_parameters_rejects_undamped(coeffs, params):
    bad = SmallSignalCoefficients(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, source=coeffs.source)
    with pytest.raises(UndampedOperatingPoint):
        resonant_parameters(bad, params)


def test_q_p_continuous_toward_zero_r_p(params):
    co = SmallSignalCoefficients(1.0, 0.0, 0.0, -1e-9, 1.0, 0.0, source="numeric_oracle")
    rp = resonant_parameters(co, params)
    limit = math.sqrt(2 * params.l_s * params.c_f) / (2 * params.l_s * params.c_f / (params.c_f * 11.25))
    assert rp.q_p == pytest.approx(limit, rel=1e-4)


@pytest.mark.parametrize("source", ["numeric_oracle", "analytic_as_printed"])
@pytest.mark.parametrize("d1", [0.2, 0.279, 0.5, 0.9])
def test_closed_forms_match_resolvent(params, source, d1):
    from capdc.averaged import solve_operating_point

    op = solve_operating_point(d1, 15.0, params, "exact")
    co = (coefficients_numeric if source == "numeric_oracle" else coefficients_analytic)(
        op, params
    )
    ssm = assemble_state_space(co, params)
    pairs = [
        (gvd_closed_form(co, params), tf_from_state_space(ssm, "d1")),
        (gvv_closed_form(co, params), tf_from_state_space(ssm, "vdc")),
        (gvi_closed_form(co, params), tf_from_state_space(ssm, "iz")),
    ]
    s = 1j * OMEGAS_200
    for closed, oracle in pairs:
        rel = np.abs(closed(s) - oracle(s)) / np.abs(oracle(s))
        assert np.max(rel) <= 1e-9


def test_closed_forms_share_denominator(coeffs, params):
    d1 = gvd_closed_form(coeffs, params).den
    d2 = gvv_closed_form(coeffs, params).den
    d3 = gvi_closed_form(coeffs, params).den
    assert np.array_equal(d1, d2) and np.array_equal(d1, d3)


def test_printed_dc_gains(coeffs, params):
    assert gvd_as_printed(coeffs, params).dc_gain == pytest.approx(coeffs.v_p)
    assert gvv_as_printed(coeffs, params).dc_gain == pytest.approx(coeffs.d_p)
    assert gvv_as_printed(coeffs, params).dc_gain == pytest.approx(1.0, rel=1e-9)
    assert gvi_as_printed(coeffs, params).dc_gain == pytest.approx(-coeffs.r_p)


def test_printed_peak_at_omega_p(coeffs, params):
    rp = resonant_parameters(coeffs, params)
    g = gvd_as_printed(coeffs, params)
    assert abs(g(1j * rp.omega_p)) == pytest.approx(coeffs.v_p * rp.q_p, rel=1e-12)


def test_zero_structure(coeffs, params):
    gvd = gvd_closed_form(coeffs, params)
    gvv = gvv_closed_form(coeffs, params)
    gvi = gvi_closed_form(coeffs, params)
    assert len(gvd.num) == 1 and len(gvv.num) == 1  # no finite zeros
    rp = resonant_parameters(coeffs, params)
    zeros = np.roots(gvi.num[::-1])
    assert len(zeros) == 1
    assert zeros[0] == pytest.approx(-rp.omega_rz, rel=1e-12)


def test_gvi_high_frequency_asymptote(coeffs, params):
    gvi = gvi_closed_form(coeffs, params)
    for omega in (1e9, 1e10):
        assert abs(gvi(1j * omega)) * omega * params.c_f == pytest.approx(1.0, rel=1e-3)


def test_first_order_dc_gain_as_printed(coeffs, params):
    g = gvd_first_order(coeffs, params, flavor="printed")
    assert g.dc_gain == pytest.approx(coeffs.v_p)


@pytest.mark.parametrize("flavor", ["exact", "printed"])
def test_first_order_tracks_its_quadratic(coeffs, params, flavor):
    rp = resonant_parameters(coeffs, params)
    assert rp.q_p < 0.35
    first = gvd_first_order(coeffs, params, flavor=flavor)
    quad = (gvd_closed_form if flavor == "exact" else gvd_as_printed)(coeffs, params)
    omega_o = rp.omega_o_exact if flavor == "exact" else rp.omega_o
    omegas = np.logspace(math.log10(omega_o) - 3, math.log10(0.3 * omega_o), 60)
    rel = np.abs(first(1j * omegas) - quad(1j * omegas)) / np.abs(quad(1j * omegas))
    assert np.max(rel) <= 3.0 * rp.q_p ** 2


def test_first_order_requires_separated_poles(params):
    # Tiny |r_p| with a light load gives a resonant (high-Q) plant.
    co = SmallSignalCoefficients(1.0, 0.0, 0.0, -1e-6, 1.0, 1.0, source="numeric_oracle")
    light = ConverterParams(
        v_dc=15.0, n_stages=16, l_s=230e-9, c_s=44e-6, c_f=10e-6, r_l=1e6, f_sw=200e3
    )
    with pytest.raises(PolesNotSeparated):
        gvd_first_order(co, light)


def test_resolvent_decoupled_state_is_zero():
    ssm = StateSpaceModel(
        a=np.diag([-1.0, -2.0]),
        b1=np.array([1.0, 0.0]),
        b2=np.zeros(2),
        b3=np.zeros(2),
        c=np.array([0.0, 1.0]),
        d_sel=np.array([1.0, 0.0]),
    )
    tf = tf_from_state_space(ssm, "d1")
    assert np.all(tf.num == 0.0)
    assert tf(1j * 100.0) == 0.0


def test_resolvent_undamped_denominator(params_no_load):
    co = SmallSignalCoefficients(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, source="numeric_oracle")
    ssm = assemble_state_space(co, params_no_load)
    tf = tf_from_state_space(ssm, "d1")
    two_lc = 2.0 * params_no_load.l_s * params_no_load.c_f
    assert tf.den == pytest.approx([1.0, 0.0, two_lc], abs=1e-18)


def test_resolvent_denominator_matches_exact_resonance(coeffs, params):
    rp = resonant_parameters(coeffs, params)
    ssm = assemble_state_space(coeffs, params)
    tf = tf_from_state_space(ssm, "d1")
    expected = [1.0, 1.0 / (rp.q_p * rp.omega_n), 1.0 / rp.omega_n ** 2]
    assert tf.den == pytest.approx(expected, rel=1e-12)


def test_frequency_response_constant():
    tf = RationalTransferFunction([5.0], [1.0])
    fr = frequency_response(tf, 2 * math.pi * np.logspace(0, 3, 10))
    assert fr.magnitude_db == pytest.approx(np.full(10, 20 * math.log10(5.0)))
    assert fr.phase_deg == pytest.approx(np.zeros(10), abs=1e-12)


def test_frequency_response_first_order_point():
    w0 = 2.0 * math.pi * 1234.0
    tf = RationalTransferFunction([1.0], [1.0, 1.0 / w0])
    fr = frequency_response(tf, np.array([w0]))
    assert fr.magnitude_db[0] == pytest.approx(-3.0103, abs=1e-4)
    assert fr.phase_deg[0] == pytest.approx(-45.0, abs=1e-9)


def test_frequency_response_quadratic_phase_at_corner(coeffs, params):
    rp = resonant_parameters(coeffs, params)
    g = gvd_as_printed(coeffs, params)
    fr = frequency_response(g, np.array([rp.omega_p]))
    assert fr.phase_deg[0] == pytest.approx(-90.0, abs=1e-9)


def test_frequency_response_validation():
    tf = RationalTransferFunction([1.0], [1.0, 1.0])
    with pytest.raises(EmptyGrid):
        frequency_response(tf, np.array([]))
    with pytest.raises(EmptyGrid):
        frequency_response(tf, np.array([2.0, 1.0]))


def test_crossover_first_order_with_gain():
    tf = RationalTransferFunction([10.0], [1.0, 1.0 / 1000.0])
    w = crossover_frequency(tf)
    assert w == pytest.approx(1000.0 * math.sqrt(99.0), rel=1e-9)


def test_crossover_none_when_below_unity():
    tf = RationalTransferFunction([0.5], [1.0, 1.0 / 1000.0])
    with pytest.raises(NoCrossover):
        crossover_frequency(tf)


def test_crossover_unity_dc_gain_boundary():
    tf = RationalTransferFunction([1.0], [1.0, 1.0 / 1000.0])
    with pytest.raises(NoCrossover):
        crossover_frequency(tf)


def test_normalization_and_origin_pole():
    tf = RationalTransferFunction([3.0, 3.0], [0.0, 2.0])
    assert tf.den == pytest.approx([0.0, 1.0])
    assert tf.num == pytest.approx([1.5, 1.5])
    with pytest.raises(ValueError):
        RationalTransferFunction([1.0], [0.0])


@pytest.fixture(scope="module")
def params_no_load():
    import math as _math

    return ConverterParams(
        v_dc=15.0, n_stages=16, l_s=230e-9, c_s=44e-6, c_f=10e-6,
        r_l=_math.inf, f_sw=200e3,
    )
