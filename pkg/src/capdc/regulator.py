"""PI regulator synthesis, loop gain, and closed-loop transfer functions.

The controller is the inverted-zero PI, ``G_c(s) = K_p (1 + omega_c/s)``:
flat gain K_p above the corner, integral action below. K_p is set by the
ratio of desired to actual gain-crossover frequency of the uncompensated
plant; the corner sits at the plant's dominant low-frequency pole.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NoCrossover
from .xfer import RationalTransferFunction, crossover_frequency


@dataclass(frozen=True)
class PIController:
    k_p: float      # proportional gain, 1/V
    omega_c: float  # inverted-zero corner, rad/s

    def __post_init__(self):
        if not (self.k_p > 0.0 and self.omega_c > 0.0):
            raise ValueError("k_p and omega_c must be positive")


def design_pi(
    gvd: RationalTransferFunction,
    omega_o: float,
    gcf_desired: float,
) -> PIController:
    """Size the PI against the uncompensated duty-to-output plant.

    k_p = gcf_desired / gcf_actual with gcf_actual the plant's lowest 0 dB
    crossing; when |gvd| never reaches unity the asymptotic first-order
    unity-gain frequency omega_o * |gvd(0)| stands in (with a warning).
    omega_c is placed at omega_o, the corner of the dominant pole.
    """
    try:
        gcf_actual = crossover_frequency(gvd)
    except NoCrossover:
        gcf_actual = omega_o * abs(gvd.dc_gain)
        warnings.warn(
            "plant gain never crosses 0 dB; using the first-order asymptote "
            f"omega_o*|G(0)| = {gcf_actual:.6g} rad/s as GCF_a",
            stacklevel=2,
        )
    return PIController(k_p=gcf_desired / gcf_actual, omega_c=omega_o)


def actual_crossover(gvd: RationalTransferFunction) -> float:
    """GCF_a of the uncompensated plant (lowest 0 dB crossing)."""
    return crossover_frequency(gvd)


def pi_transfer_function(pi: PIController) -> RationalTransferFunction:
    """K_p (s + omega_c) / s: one origin pole, one zero at -omega_c."""
    return RationalTransferFunction(
        [pi.k_p * pi.omega_c, pi.k_p], [0.0, 1.0]
    )


def loop_gain(pi: PIController, gvd: RationalTransferFunction) -> RationalTransferFunction:
    return pi_transfer_function(pi) * gvd


def _closed_loop(gx: RationalTransferFunction, lg: RationalTransferFunction) -> RationalTransferFunction:
    """gx / (1 + lg) by common-denominator algebra.

    Keeps full polynomial degree; the only reduction is the exact common
    monomial factor s^k (all-zero leading coefficients), which is what the
    loop's origin pole can contribute.
    """
    num = np.convolve(gx.num, lg.den)
    den = np.convolve(gx.den, np.polyadd(lg.den[::-1], lg.num[::-1])[::-1])
    shift = 0
    while (
        shift < len(num) - 1
        and shift < len(den) - 1
        and num[shift] == 0.0
        and den[shift] == 0.0
    ):
        shift += 1
    return RationalTransferFunction(num[shift:], den[shift:])


def closed_loop_audio(gvv, lg) -> RationalTransferFunction:
    """Audio susceptibility with the loop closed: G_vv / (1 + G_lg)."""
    return _closed_loop(gvv, lg)


def closed_loop_output_impedance(gvi, lg) -> RationalTransferFunction:
    """Output impedance with the loop closed: G_vi / (1 + G_lg)."""
    return _closed_loop(gvi, lg)


def closed_loop_poles(lg: RationalTransferFunction) -> np.ndarray:
    """Roots of 1 + lg: den_lg + num_lg = 0 (the true closed-loop poles)."""
    char = np.polyadd(lg.den[::-1], lg.num[::-1])[::-1]
    return np.roots(char[::-1])


def _unwrapped_phase_at(lg: RationalTransferFunction, omega: float) -> float:
    """Phase at omega in degrees, unwrapped by continuity from low frequency."""
    grid = np.logspace(math.log10(omega) - 6.0, math.log10(omega), 2000)
    phase = np.unwrap(np.angle(lg(1j * grid)))
    return math.degrees(phase[-1])


def stability_margins(lg: RationalTransferFunction) -> tuple[float, float]:
    """(gain_margin_db, phase_margin_deg) of a loop gain.

    Phase margin is read at the lowest 0 dB crossing; gain margin at the
    first -180 deg phase crossing. Either margin is +inf when the relevant
    crossing does not exist. Raises NoCrossover when |lg| never reaches 1.
    """
    omega_gc = crossover_frequency(lg)
    phase_margin = 180.0 + _unwrapped_phase_at(lg, omega_gc)

    grid = np.logspace(math.log10(omega_gc) - 4.0, math.log10(omega_gc) + 6.0, 8000)
    phase = np.degrees(np.unwrap(np.angle(lg(1j * grid))))
    below = phase + 180.0
    crossings = np.nonzero(below[:-1] * below[1:] < 0.0)[0]
    if len(crossings) == 0:
        gain_margin = math.inf
    else:
        k = crossings[0]
        # Linear interpolation in log-omega for the -180 deg frequency.
        f = below[k] / (below[k] - below[k + 1])
        omega_pc = grid[k] ** (1.0 - f) * grid[k + 1] ** f
        gain_margin = -20.0 * math.log10(abs(complex(lg(1j * omega_pc))))
    return gain_margin, phase_margin
