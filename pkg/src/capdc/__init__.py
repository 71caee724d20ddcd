"""Modeling and control lab for the capacitor-coupled IPSO dc-dc converter."""

from .params import ConverterParams, parse_config, per_stage_load, table_i_params
from .averaged import (
    OperatingPoint,
    dcm_load_ratio,
    equivalent_duty_exact,
    equivalent_duty_simplified,
    solve_duty_for_target,
    solve_operating_point,
)
from .smallsignal import (
    SmallSignalCoefficients,
    StateSpaceModel,
    assemble_state_space,
    coefficients_analytic,
    coefficients_numeric,
)
from .xfer import (
    RationalTransferFunction,
    ResonantParameters,
    crossover_frequency,
    frequency_response,
    gvd_closed_form,
    gvd_first_order,
    gvi_closed_form,
    gvv_closed_form,
    resonant_parameters,
    tf_from_state_space,
)
from .regulator import (
    PIController,
    closed_loop_audio,
    closed_loop_output_impedance,
    design_pi,
    loop_gain,
    pi_transfer_function,
    stability_margins,
)
from .switched import (
    SwitchedConfig,
    detect_steady_state,
    energy_audit,
    simulate_switched,
)
from .trace import SimulationTrace, cycle_average

__version__ = "0.1.0"
CONFIG_SCHEMA_VERSION = "1"
