import math

import pytest

from capdc.averaged import solve_duty_for_target
from capdc.params import ConverterParams, table_i_params

TABLE_I_TEXT = """\
# 16-stage prototype, SI base units
v_dc = 15
n_stages = 16
l_s = 230e-9
c_s = 44e-6
c_f = 10e-6
r_l = 180
f_sw = 200e3
k_ls = 60
k_cs = 40
"""


@pytest.fixture(scope="session")
def params():
    return table_i_params()


@pytest.fixture(scope="session")
def params_no_load():
    return ConverterParams(
        v_dc=15.0, n_stages=16, l_s=230e-9, c_s=44e-6, c_f=10e-6,
        r_l=math.inf, f_sw=200e3,
    )


@pytest.fixture(scope="session")
def op_176(params):
    """Exact-model operating point at the 176 V anchor."""
    return solve_duty_for_target(176.0, 15.0, params, "exact")


@pytest.fixture(scope="session")
def op_176_simplified(params):
    return solve_duty_for_target(176.0, 15.0, params, "simplified")


@pytest.fixture()
def config_file(tmp_path):
    path = tmp_path / "table1.cfg"
    path.write_text(TABLE_I_TEXT, encoding="utf-8")
    return path
