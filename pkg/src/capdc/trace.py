"""Uniformly sampled simulation traces and their canonical CSV form.

All numeric output is written with 12 significant digits and no locale
formatting, so repeated runs with the same inputs produce byte-identical
files.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfRange

CSV_COLUMNS = (
    "time_s",
    "v_ac_v",
    "i_ac_a",
    "i_ls_a",
    "v_out_stage_v",
    "v_out_total_v",
    "d1",
)


def fmt12(x: float) -> str:
    return format(float(x), ".12g")


@dataclass
class SimulationTrace:
    """Uniform time series from the switched or averaged simulators.

    ``samples_per_cycle`` refers to the recorded grid; switched traces also
    carry per-cycle boundary snapshots and energy accumulators plus the
    coupling-capacitor voltage, which the CSV schema does not include.
    """

    dt: float
    time: np.ndarray
    v_ac: np.ndarray
    i_ac: np.ndarray
    i_ls: np.ndarray
    v_out_stage: np.ndarray
    v_out_total: np.ndarray
    d1: np.ndarray
    v_ref: np.ndarray | None = None
    # switched-simulation extras
    v_cs: np.ndarray | None = None
    samples_per_cycle: int | None = None
    t_sw: float | None = None
    n_stages: int = 1
    cycle_states: np.ndarray | None = None   # (n_cycles+1, 3) per-stage (i, v_cs, v_cf)
    cycle_e_in: np.ndarray | None = None     # per-cycle source energy, all stages
    cycle_e_out: np.ndarray | None = None    # per-cycle load energy, all stages
    half_touch: np.ndarray | None = None
    half_end_idle: np.ndarray | None = None
    ambiguous_commutations: int = 0
    stage_i_ls: np.ndarray | None = None     # (n_sim, n_rec) when per-stage states kept
    stage_v_out: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    @property
    def n_cycles(self) -> int:
        if self.samples_per_cycle is None:
            return 0
        return len(self.time) // self.samples_per_cycle

    def column(self, name: str) -> np.ndarray:
        table = {
            "time_s": self.time,
            "v_ac_v": self.v_ac,
            "i_ac_a": self.i_ac,
            "i_ls_a": self.i_ls,
            "v_out_stage_v": self.v_out_stage,
            "v_out_total_v": self.v_out_total,
            "d1": self.d1,
            "v_cs_v": self.v_cs,
            "v_ref_v": self.v_ref,
        }
        arr = table.get(name)
        if arr is None:
            raise KeyError(f"no column {name!r} in this trace")
        return arr

    def csv_text(self) -> str:
        columns = list(CSV_COLUMNS)
        arrays = [
            self.time, self.v_ac, self.i_ac, self.i_ls,
            self.v_out_stage, self.v_out_total, self.d1,
        ]
        if self.v_ref is not None:
            columns.append("v_ref_v")
            arrays.append(self.v_ref)
        lines = [",".join(columns)]
        for k in range(len(self.time)):
            lines.append(",".join(fmt12(col[k]) for col in arrays))
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.csv_text())


def cycle_average(trace: SimulationTrace, quantity: str, cycle_index: int) -> float:
    """Arithmetic mean of one column over exactly one switching period."""
    if trace.samples_per_cycle is None:
        raise OutOfRange("trace does not carry a cycle structure")
    n = trace.samples_per_cycle
    if not (0 <= cycle_index < trace.n_cycles):
        raise OutOfRange(
            f"cycle {cycle_index} not contained in trace of {trace.n_cycles} cycles"
        )
    col = trace.column(quantity)
    return float(np.mean(col[cycle_index * n:(cycle_index + 1) * n]))
