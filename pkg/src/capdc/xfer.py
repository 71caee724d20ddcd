"""Rational transfer functions of the linearized converter.

All transfer functions are stored as real coefficient lists in ascending
powers of s (never as pole/zero factorizations), so that cross-checking the
closed forms against the state-space resolvent reduces to polynomial
coefficient comparison plus pointwise evaluation.

Two families of closed forms are built from the same coefficients:

* ``gvd_closed_form`` / ``gvv_closed_form`` / ``gvi_closed_form`` — exact.
  The shared denominator uses the loaded natural frequency
  ``omega_n = omega_p * sqrt(1 - R_P/(R_L/N))`` and the full-expression Q;
  dc gains carry the ``1/(1 - R_P/(R_L/N))`` loading factor. These agree
  with ``C (sI-A)^{-1} B`` to machine precision.
* ``gvd_as_printed`` / ... — the published approximations: same structure
  with ``omega_p = 1/sqrt(2 L_s C_f)`` and bare dc gains V_P, D_P, -R_P.
  Valid when the plant loading ratio ``-R_P/(R_L/N)`` is small.

Both families share the resonant parameter record, which keeps the printed
definitions (for report comparison) alongside their exact companions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyGrid,
    NoCrossover,
    PolesNotSeparated,
    UndampedOperatingPoint,
)
from .params import ConverterParams
from .smallsignal import SmallSignalCoefficients, StateSpaceModel

_POLY = np.polynomial.polynomial


def _trim(coeffs) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(coeffs, dtype=float))
    n = len(arr)
    while n > 1 and arr[n - 1] == 0.0:
        n -= 1
    return arr[:n].copy()


@dataclass(frozen=True)
class RationalTransferFunction:
    """num(s)/den(s), real coefficients, ascending powers of s.

    Normalized so the lowest-order nonzero denominator coefficient is 1
    (den[0] = 1 whenever there is no pole at the origin).
    """

    num: np.ndarray
    den: np.ndarray

    def __post_init__(self):
        num = _trim(self.num)
        den = _trim(self.den)
        nonzero = np.nonzero(den)[0]
        if len(nonzero) == 0:
            raise ValueError("denominator is identically zero")
        scale = den[nonzero[0]]
        object.__setattr__(self, "num", num / scale)
        object.__setattr__(self, "den", den / scale)

    def __call__(self, s):
        """Evaluate at complex s (scalar or array)."""
        s = np.asarray(s, dtype=complex)
        return _POLY.polyval(s, self.num) / _POLY.polyval(s, self.den)

    def __mul__(self, other: "RationalTransferFunction") -> "RationalTransferFunction":
        return RationalTransferFunction(
            np.convolve(self.num, other.num), np.convolve(self.den, other.den)
        )

    @property
    def dc_gain(self) -> float:
        if self.den[0] == 0.0:
            return math.inf if self.num[0] != 0.0 else math.nan
        return self.num[0] / self.den[0]


@dataclass(frozen=True)
class ResonantParameters:
    """Resonance data of the quadratic plant denominator.

    ``omega_p``/``q_p``/``omega_o``/``omega_rz`` follow the printed
    definitions; ``omega_n`` and ``omega_o_exact`` are the loaded natural
    frequency and dominant-pole corner of the exact denominator.
    ``q_p_approx`` is the light-load approximation sqrt(2L_s/C_f)/(-R_P),
    kept as a diagnostic only.
    """

    omega_p: float
    q_p: float
    omega_o: float
    omega_rz: float
    omega_n: float
    omega_o_exact: float
    q_p_approx: float
    loading: float  # 1 - R_P/(R_L/N); dc gains divide by this


def resonant_parameters(
    coeffs: SmallSignalCoefficients, params: ConverterParams
) -> ResonantParameters:
    if coeffs.r_p >= 0.0:
        raise UndampedOperatingPoint(f"r_p must be negative, got {coeffs.r_p}")
    two_ls = 2.0 * params.l_s
    c_f = params.c_f
    r_stage = params.r_stage
    r_p = coeffs.r_p

    omega_p = 1.0 / math.sqrt(two_ls * c_f)
    loading = 1.0 - r_p / r_stage
    # Full published expression; algebraically equal to omega_n / alpha.
    q_p = math.sqrt(two_ls * c_f * loading) / (
        two_ls * c_f * (1.0 / (c_f * r_stage) - r_p / two_ls)
    )
    omega_n = omega_p * math.sqrt(loading)
    return ResonantParameters(
        omega_p=omega_p,
        q_p=q_p,
        omega_o=q_p * omega_p,
        omega_rz=-r_p / two_ls,
        omega_n=omega_n,
        omega_o_exact=q_p * omega_n,
        q_p_approx=math.sqrt(two_ls / c_f) / (-r_p),
        loading=loading,
    )


def _quadratic_den(q_p: float, omega: float) -> list[float]:
    return [1.0, 1.0 / (q_p * omega), 1.0 / (omega * omega)]


def gvd_closed_form(coeffs, params) -> RationalTransferFunction:
    """Exact duty-to-output transfer function."""
    rp = resonant_parameters(coeffs, params)
    return RationalTransferFunction(
        [coeffs.v_p / rp.loading], _quadratic_den(rp.q_p, rp.omega_n)
    )


def gvv_closed_form(coeffs, params) -> RationalTransferFunction:
    """Exact input-to-output (audio susceptibility) transfer function."""
    rp = resonant_parameters(coeffs, params)
    return RationalTransferFunction(
        [coeffs.d_p / rp.loading], _quadratic_den(rp.q_p, rp.omega_n)
    )


def gvi_closed_form(coeffs, params) -> RationalTransferFunction:
    """Exact load-current-to-output (output impedance) transfer function."""
    rp = resonant_parameters(coeffs, params)
    g0 = -coeffs.r_p / rp.loading
    return RationalTransferFunction(
        [g0, g0 / rp.omega_rz], _quadratic_den(rp.q_p, rp.omega_n)
    )


def gvd_as_printed(coeffs, params) -> RationalTransferFunction:
    rp = resonant_parameters(coeffs, params)
    return RationalTransferFunction([coeffs.v_p], _quadratic_den(rp.q_p, rp.omega_p))


def gvv_as_printed(coeffs, params) -> RationalTransferFunction:
    rp = resonant_parameters(coeffs, params)
    return RationalTransferFunction([coeffs.d_p], _quadratic_den(rp.q_p, rp.omega_p))


def gvi_as_printed(coeffs, params) -> RationalTransferFunction:
    rp = resonant_parameters(coeffs, params)
    return RationalTransferFunction(
        [-coeffs.r_p, -coeffs.r_p / rp.omega_rz],
        _quadratic_den(rp.q_p, rp.omega_p),
    )


def gvd_first_order(coeffs, params, flavor: str = "exact") -> RationalTransferFunction:
    """Dominant-pole reduction of the duty-to-output quadratic.

    Valid for well-separated real poles (q_p < 0.5). ``flavor`` selects the
    quadratic being reduced: "exact" pairs with ``gvd_closed_form``,
    "printed" with ``gvd_as_printed``.
    """
    rp = resonant_parameters(coeffs, params)
    if rp.q_p >= 0.5:
        raise PolesNotSeparated(f"q_p = {rp.q_p:.6g} >= 0.5")
    if flavor == "exact":
        return RationalTransferFunction(
            [coeffs.v_p / rp.loading], [1.0, 1.0 / rp.omega_o_exact]
        )
    if flavor == "printed":
        return RationalTransferFunction([coeffs.v_p], [1.0, 1.0 / rp.omega_o])
    raise ValueError(f"unknown flavor {flavor!r}")


_INPUT_VECTORS = {"d1": "b1", "vdc": "b2", "iz": "b3"}


def tf_from_state_space(ssm: StateSpaceModel, input: str) -> RationalTransferFunction:
    """Exact rational function C (sI - A)^{-1} B from the 2x2 adjugate.

    This is the oracle route: it touches only the assembled matrix entries,
    never the coefficient-level formulas.
    """
    try:
        b = getattr(ssm, _INPUT_VECTORS[input])
    except KeyError:
        raise ValueError(f"unknown input {input!r}") from None
    a = ssm.a
    c = ssm.c
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    den = [det, -(a[0, 0] + a[1, 1]), 1.0]
    # C adj(sI - A) B with adj = [[s - a11, a01], [a10, s - a00]].
    num0 = c[0] * (-a[1, 1] * b[0] + a[0, 1] * b[1]) + c[1] * (
        a[1, 0] * b[0] - a[0, 0] * b[1]
    )
    num1 = c[0] * b[0] + c[1] * b[1]
    return RationalTransferFunction([num0, num1], den)


@dataclass(frozen=True)
class FrequencyResponse:
    omega: np.ndarray          # rad/s
    value: np.ndarray          # complex
    magnitude_db: np.ndarray
    phase_deg: np.ndarray      # unwrapped within the sweep


def frequency_response(tf: RationalTransferFunction, omegas) -> FrequencyResponse:
    omegas = np.asarray(omegas, dtype=float)
    if omegas.size == 0:
        raise EmptyGrid("empty frequency grid")
    if np.any(omegas <= 0.0) or np.any(np.diff(omegas) <= 0.0):
        raise EmptyGrid("frequency grid must be strictly increasing and positive")
    value = tf(1j * omegas)
    magnitude_db = 20.0 * np.log10(np.abs(value))
    phase_deg = np.degrees(np.unwrap(np.angle(value)))
    return FrequencyResponse(omegas, value, magnitude_db, phase_deg)


def default_omega_grid(n: int = 400, f_lo: float = 10.0, f_hi: float = 10e6) -> np.ndarray:
    """Log-spaced Bode grid, 10 Hz to 10 MHz by default."""
    return 2.0 * math.pi * np.logspace(math.log10(f_lo), math.log10(f_hi), n)


def crossover_frequency(
    tf: RationalTransferFunction,
    search_range: tuple[float, float] = (2.0 * math.pi * 1e-2, 2.0 * math.pi * 1e8),
    grid_points: int = 4000,
) -> float:
    """Lowest unity-gain frequency of |tf(jw)| on the search range.

    Scans a log grid for a sign change of |tf| - 1, then log-bisects to
    1e-10 relative. Raises NoCrossover when the grid shows no sign change.
    """
    w_lo, w_hi = search_range
    if not (0.0 < w_lo < w_hi):
        raise EmptyGrid("invalid search range")
    grid = np.logspace(math.log10(w_lo), math.log10(w_hi), grid_points)
    gain = np.abs(tf(1j * grid)) - 1.0
    zero_hits = np.nonzero(gain == 0.0)[0]
    signs = np.sign(gain)
    changes = np.nonzero(signs[:-1] * signs[1:] < 0.0)[0]
    first_change = changes[0] if len(changes) else None
    if len(zero_hits) and (first_change is None or zero_hits[0] <= first_change):
        return float(grid[zero_hits[0]])
    if first_change is None:
        raise NoCrossover("|tf| - 1 has no sign change on the search grid")
    lo, hi = grid[first_change], grid[first_change + 1]
    g_lo = gain[first_change]
    while hi / lo - 1.0 > 1e-10:
        mid = math.sqrt(lo * hi)
        g_mid = abs(tf(1j * mid)) - 1.0
        if g_mid == 0.0:
            return float(mid)
        if (g_mid > 0.0) == (g_lo > 0.0):
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)
