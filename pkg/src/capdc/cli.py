"""Command-line front end.

Every command reads a converter config file and writes deterministic
artifacts (12 significant digits, byte-identical across runs) into the
output directory. Existing files are never overwritten without --force.

Exit codes: 0 success, 1 config error, 2 numerical failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import CONFIG_SCHEMA_VERSION, __version__
from ._backend import active_backend_name
from .averaged import solve_duty_for_target, solve_operating_point
from .closedloop import ClosedLoopConfig, parse_scenario, simulate_closed_loop
from .errors import ConfigError, NumericalError
from .params import load_config
from .regulator import (
    closed_loop_audio,
    closed_loop_output_impedance,
    design_pi,
    loop_gain,
    pi_transfer_function,
    stability_margins,
)
from .smallsignal import ANALYTIC, NUMERIC, assemble_state_space, coefficients
from .switched import SwitchedConfig, simulate_switched, simulate_switched_closed_loop
from .trace import fmt12
from .xfer import (
    default_omega_grid,
    frequency_response,
    gvd_closed_form,
    gvd_first_order,
    gvi_closed_form,
    gvv_closed_form,
    resonant_parameters,
)

_SOURCE_FLAG = {"printed": ANALYTIC, "oracle": NUMERIC}


class _Out:
    """Collects output files; refuses to overwrite without force."""

    def __init__(self, directory: Path, force: bool):
        self.dir = directory
        self.force = force
        self.written = []

    def write(self, name: str, text: str):
        self.dir.mkdir(parents=True, exist_ok=True)
        path = self.dir / name
        if path.exists() and not self.force:
            raise FileExistsError(f"{path} exists; use --force to overwrite")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        self.written.append(path)
        return path


def _bode_csv(tf, omegas) -> str:
    fr = frequency_response(tf, omegas)
    lines = ["freq_hz,magnitude_db,phase_deg"]
    for w, m, ph in zip(fr.omega, fr.magnitude_db, fr.phase_deg):
        lines.append(f"{fmt12(w / (2.0 * math.pi))},{fmt12(m)},{fmt12(ph)}")
    return "\n".join(lines) + "\n"


def _kv_block(pairs) -> str:
    return "\n".join(f"{k} = {fmt12(v)}" for k, v in pairs) + "\n"


def _operating_point(params, args):
    """Resolve the operating point from --d1 or --vref (default 176 V)."""
    model = args.model
    if args.d1 is not None:
        return solve_operating_point(args.d1, params.v_dc, params, model)
    vref = args.vref if args.vref is not None else 176.0
    return solve_duty_for_target(vref, params.v_dc, params, model)


def _op_text(op, params, model) -> str:
    return (
        "# operating point (averaged model, "
        + model
        + " equivalent duty)\n"
        + _kv_block(
            [
                ("d1", op.d1),
                ("v_dc", op.v_dc),
                ("i_l", op.i_l),
                ("v_out_stage", op.v_out_stage),
                ("i_out", op.i_out),
                ("d_e", op.d_e),
                ("v_out_total", op.v_out_total),
                ("r_stage", params.r_stage),
            ]
        )
    )


def cmd_steady(params, args, out: _Out) -> int:
    op = _operating_point(params, args)
    out.write("operating_point.txt", _op_text(op, params, args.model))
    return 0


def cmd_linearize(params, args, out: _Out) -> int:
    op = _operating_point(params, args)
    text = ["# linearization at the operating point", ""]
    text.append(_op_text(op, params, args.model))
    for source in (NUMERIC, ANALYTIC):
        co = coefficients(op, params, source)
        text.append(f"# coefficients ({source})")
        text.append(
            _kv_block(
                [
                    ("d_t", co.d_t),
                    ("g_t", co.g_t),
                    ("i_t", co.i_t),
                    ("r_p", co.r_p),
                    ("d_p", co.d_p),
                    ("v_p", co.v_p),
                ]
            )
        )
        ssm = assemble_state_space(co, params)
        text.append(f"# state space ({source}): rows of A, then B1, B2, B3, C, D")
        text.append(
            "\n".join(
                [
                    f"a = {fmt12(ssm.a[0,0])} {fmt12(ssm.a[0,1])} ; {fmt12(ssm.a[1,0])} {fmt12(ssm.a[1,1])}",
                    f"b1 = {fmt12(ssm.b1[0])} {fmt12(ssm.b1[1])}",
                    f"b2 = {fmt12(ssm.b2[0])} {fmt12(ssm.b2[1])}",
                    f"b3 = {fmt12(ssm.b3[0])} {fmt12(ssm.b3[1])}",
                    f"c = {fmt12(ssm.c[0])} {fmt12(ssm.c[1])}",
                    f"d = {fmt12(ssm.d_sel[0])} {fmt12(ssm.d_sel[1])}",
                ]
            )
            + "\n"
        )
    out.write("linearize.txt", "\n".join(text))
    return 0


def cmd_bode(params, args, out: _Out) -> int:
    op = _operating_point(params, args)
    co = coefficients(op, params, _SOURCE_FLAG[args.coeff_source])
    omegas = default_omega_grid()
    out.write("gvd_bode.csv", _bode_csv(gvd_closed_form(co, params), omegas))
    out.write("gvv_bode.csv", _bode_csv(gvv_closed_form(co, params), omegas))
    out.write("gvi_bode.csv", _bode_csv(gvi_closed_form(co, params), omegas))
    out.write("gvd_first_order_bode.csv", _bode_csv(gvd_first_order(co, params), omegas))
    return 0


def _design(params, args):
    op = _operating_point(params, args)
    co = coefficients(op, params, _SOURCE_FLAG[args.coeff_source])
    rp = resonant_parameters(co, params)
    gvd = gvd_closed_form(co, params)
    gcf_d = 2.0 * math.pi * args.gcf_hz
    pi = design_pi(gvd, rp.omega_o_exact, gcf_d)
    return op, co, rp, gvd, pi


def cmd_design_pi(params, args, out: _Out) -> int:
    from .xfer import crossover_frequency

    op, co, rp, gvd, pi = _design(params, args)
    gcf_a = crossover_frequency(gvd)
    lg = loop_gain(pi, gvd)
    gm, pm = stability_margins(lg)
    gvv = gvv_closed_form(co, params)
    gvi = gvi_closed_form(co, params)
    text = [
        "# PI regulator design",
        _kv_block(
            [
                ("k_p", pi.k_p),
                ("omega_c", pi.omega_c),
                ("omega_c_hz", pi.omega_c / (2.0 * math.pi)),
                ("gcf_desired", 2.0 * math.pi * args.gcf_hz),
                ("gcf_actual", gcf_a),
                ("gain_margin_db", gm),
                ("phase_margin_deg", pm),
                ("omega_o_printed", rp.omega_o),
                ("omega_o_exact", rp.omega_o_exact),
            ]
        ),
    ]
    out.write("controller.txt", "\n".join(text))
    omegas = default_omega_grid()
    out.write("gc_bode.csv", _bode_csv(pi_transfer_function(pi), omegas))
    out.write("glg_bode.csv", _bode_csv(lg, omegas))
    out.write("gvvc_bode.csv", _bode_csv(closed_loop_audio(gvv, lg), omegas))
    out.write("gvic_bode.csv", _bode_csv(closed_loop_output_impedance(gvi, lg), omegas))
    return 0


def cmd_sim_switched(params, args, out: _Out) -> int:
    op = _operating_point(params, args)
    cfg = SwitchedConfig(
        t_end=args.t_end,
        steps_per_cycle=args.steps_per_cycle,
        record_decimation=args.record_decimation if args.record_decimation else 10,
        integrator=args.integrator,
    )
    trace = simulate_switched(params, op.d1, cfg=cfg)
    out.write("switched_trace.csv", trace.csv_text())
    return 0


def cmd_sim_closed_loop(params, args, out: _Out) -> int:
    op, co, rp, gvd, pi = _design(params, args)
    vref = args.vref if args.vref is not None else 176.0
    events = []
    if args.scenario is not None:
        with open(args.scenario, "r", encoding="utf-8") as fh:
            events = parse_scenario(fh.read())
    cfg = ClosedLoopConfig(t_end=args.t_end,
                           record_decimation=args.record_decimation if args.record_decimation else 50)
    trace = simulate_closed_loop(params, pi, vref, events, cfg)
    out.write("closed_loop_trace.csv", trace.csv_text())
    if args.switched:
        vdc_sched, load_sched, ref_sched = _events_to_schedules(params, vref, events)
        sw_cfg = SwitchedConfig(
            t_end=args.t_end,
            steps_per_cycle=args.steps_per_cycle,
            record_decimation=args.record_decimation if args.record_decimation else 10,
        )
        sw_trace = simulate_switched_closed_loop(
            params, pi, vref, sw_cfg, v_dc=vdc_sched, load=load_sched,
            v_ref=ref_sched, initial=op,
        )
        out.write("closed_loop_switched_trace.csv", sw_trace.csv_text())
    return 0


def _events_to_schedules(params, vref_total, events):
    """Map scenario events onto the switched simulator's schedules."""
    vdc = [(0.0, params.v_dc)]
    load = [(0.0, params.r_l)]
    ref = [(0.0, vref_total)]
    for e in events:
        if e.kind == "source_step":
            vdc.append((e.t, e.value))
        elif e.kind == "load_step_rl":
            load.append((e.t, e.value))
        elif e.kind == "load_step_iout":
            load.append((e.t, ref[-1][1] / e.value))
        else:
            ref.append((e.t, e.value))
    return vdc, load, ref


def _verify_tables_text(params, args) -> str:
    """Report comparing computed quantities to the published dynamic table."""
    op = _operating_point(params, args)
    lines = [
        "# verify-tables: computed counterparts of the published dynamic/control table",
        "# The publication does not state the (D_1, I_L) behind its table; values",
        "# below are evaluated at the operating point given by --d1/--vref.",
        "# No numeric agreement is asserted anywhere in this report.",
        "",
        _kv_block(
            [
                ("d1", op.d1),
                ("i_l", op.i_l),
                ("v_out_total", op.v_out_total),
            ]
        ),
    ]
    published = {
        "d_t": (0.878, ""),
        "g_t": (3.996e-3, "S"),
        "i_t": (0.192, "A"),
        "r_p": (-0.899, "ohm"),
        "d_p": (0.998, ""),
        "v_p": (2.873, "V"),
        "omega_p_hz": (114.6e3, "Hz"),
        "q_p": (0.372, ""),
        "omega_o_hz": (42.6e3, "Hz"),
        "omega_rz_hz": (305.2e3, "Hz"),
        "k_p": (8.831e-3, "1/V"),
        "omega_c_hz": (41.83e3, "Hz"),
    }

    def row(sym, computed, note=""):
        pub, unit = published[sym]
        delta = computed - pub
        rel = delta / pub if pub != 0 else math.inf
        flag = " [not reconciled]" if abs(rel) > 0.05 else ""
        note_text = f"  # {note}" if note else ""
        return (
            f"{sym}: published = {fmt12(pub)} {unit}; computed = {fmt12(computed)}; "
            f"delta = {fmt12(delta)}; rel = {fmt12(rel)}{flag}{note_text}"
        )

    for source in (NUMERIC, ANALYTIC):
        co = coefficients(op, params, source)
        rp = resonant_parameters(co, params)
        lines.append(f"## coefficient source: {source}")
        lines.append(row("d_t", co.d_t))
        lines.append(row("g_t", co.g_t))
        lines.append(row("i_t", co.i_t))
        note = (
            "printed closed form carries an extra 2*I_L ampere factor vs the derivative"
            if source == ANALYTIC
            else "derivative of the simplified duty ratio; current-independent"
        )
        lines.append(row("r_p", co.r_p, note))
        lines.append(row("d_p", co.d_p))
        lines.append(row("v_p", co.v_p))
        lines.append(row("q_p", rp.q_p, "full expression"))
        lines.append(row("omega_o_hz", rp.omega_o / (2 * math.pi), "printed corner q_p*omega_p"))
        lines.append(
            row("omega_o_hz", rp.omega_o_exact / (2 * math.pi), "exact corner q_p*omega_n")
        )
        lines.append(row("omega_rz_hz", rp.omega_rz / (2 * math.pi)))

        gvd = gvd_closed_form(co, params)
        from .xfer import crossover_frequency

        gcf_a = crossover_frequency(gvd)
        kp_1khz = 2.0 * math.pi * 1e3 / gcf_a
        lines.append(row("k_p", kp_1khz, "for a 1 kHz desired crossover"))
        gcf_d_match = published["k_p"][0] * gcf_a
        lines.append(
            f"k_p inversion: published k_p corresponds to gcf_desired = "
            f"{fmt12(gcf_d_match / (2 * math.pi))} Hz at this plant  # not reconciled with any stated bandwidth"
        )
        lines.append(row("omega_c_hz", rp.omega_o_exact / (2 * math.pi), "inverted zero at the exact corner"))
        lines.append("")

    # omega_p depends only on the reactives; report both capacitor readings.
    two_ls = 2.0 * params.l_s
    wp_stage = 1.0 / math.sqrt(two_ls * params.c_f)
    wp_series = 1.0 / math.sqrt(two_ls * params.c_f / params.n_stages)
    lines.append("## omega_p interpretations (coefficient-independent)")
    lines.append(row("omega_p_hz", wp_stage / (2 * math.pi), "per-stage filter capacitance"))
    lines.append(
        row("omega_p_hz", wp_series / (2 * math.pi), "series-effective capacitance c_f/n")
    )
    lines.append("")
    return "\n".join(lines)


def cmd_verify_tables(params, args, out: _Out) -> int:
    out.write("table2_report.txt", _verify_tables_text(params, args))
    return 0


_COMMANDS = {
    "steady": cmd_steady,
    "linearize": cmd_linearize,
    "bode": cmd_bode,
    "design-pi": cmd_design_pi,
    "sim-switched": cmd_sim_switched,
    "sim-closed-loop": cmd_sim_closed_loop,
    "verify-tables": cmd_verify_tables,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capdc",
        description="Capacitor-coupled IPSO dc-dc converter modeling and control lab",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"capdc {__version__} (config schema {CONFIG_SCHEMA_VERSION}, backend {active_backend_name()})",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cp = sub.add_parser(name)
        cp.add_argument("config", type=Path, help="converter config file")
        cp.add_argument("--output-dir", type=Path, default=Path("."))
        cp.add_argument("--force", action="store_true", help="overwrite existing outputs")
        cp.add_argument("--d1", type=float, default=None, help="duty command")
        cp.add_argument("--vref", type=float, default=None, help="total output target, V")
        cp.add_argument(
            "--model", choices=("exact", "simplified"), default="exact",
            help="equivalent-duty model for steady-state solving",
        )
        cp.add_argument(
            "--coeff-source", choices=("printed", "oracle"), default="oracle",
            help="small-signal coefficient set",
        )
        cp.add_argument("--gcf-hz", type=float, default=1000.0, help="desired crossover, Hz")
        cp.add_argument("--scenario", type=Path, default=None, help="scenario event file")
        cp.add_argument("--t-end", type=float, default=50e-3, help="simulated span, s")
        cp.add_argument("--steps-per-cycle", type=int, default=200)
        cp.add_argument("--record-decimation", type=int, default=None,
            help="record every Nth sample (default: 10 switched, 50 closed-loop)")
        cp.add_argument(
            "--integrator", choices=("exact", "trapezoid"), default="exact",
            help="switched-simulation stepping scheme",
        )
        cp.add_argument(
            "--switched", action="store_true",
            help="also cross-validate sim-closed-loop against the switched model",
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        params = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3

    out = _Out(args.output_dir, args.force)
    try:
        return _COMMANDS[args.command](params, args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
