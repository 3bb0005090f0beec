"""Command-line driver.

Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure
(numeric overflow, missing steady state, failed determinism check), 3 I/O.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from .config import ScenarioConfig, load_config
from .errors import (
    ConfigError,
    DeterminismError,
    DomainError,
    InstabilityError,
    NoSteadyStateError,
    NumericOverflowError,
)
from .motor import (
    DEFAULT_PARAMETERS,
    MachineParameters,
    chopper_voltage,
    derive_coefficients_euler,
    derive_coefficients_rk2,
    steady_state,
)
from .scenario import run_scenario
from .traceio import format_report, format_trace_csv, write_gnuplot_script, write_report

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with status 2
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dcm-emulator", description="Fixed-step chopper-fed DC machine emulator.")
    sub = p.add_subparsers(dest="command", metavar="{run,diagnose,derive-coeffs,steady-state}")
    sub.required = True

    run = sub.add_parser("run", help="run a scenario and write its CSV trace")
    run.add_argument("--config", required=True)
    run.add_argument("--out", help="CSV path (defaults to scenario.output)")
    run.add_argument("--gnuplot", action="store_true", help="also write <out>.gp")
    run.add_argument("--seedless-check", action="store_true",
                     help="run twice and require byte-identical CSV output")

    dg = sub.add_parser("diagnose", help="compare a faulted twin with the nominal emulator")
    dg.add_argument("--config", required=True)
    dg.add_argument("--out", help="report path (defaults to stdout only)")
    dg.add_argument("--trace", help="also write the faulted twin trace as CSV")
    dg.add_argument("--gnuplot", action="store_true")
    dg.add_argument("--seedless-check", action="store_true")

    dc = sub.add_parser("derive-coeffs", help="print discrete coefficients for physical parameters")
    dc.add_argument("--config", help="take parameters from this scenario's plant section")
    dc.add_argument("--method", choices=("euler", "rk2"), default="euler")
    dc.add_argument("--h-ns", type=int, default=1000, help="model step in ns")
    for flag, attr in (("--rm", "Rm"), ("--lm", "Lm"), ("--j", "J"), ("--km", "Km"),
                       ("--k2", "K2"), ("--k3", "K3"), ("--vin", "Vin")):
        dc.add_argument(flag, type=float, dest=attr)

    ss = sub.add_parser("steady-state", help="print the analytic fixed point")
    ss.add_argument("--config")
    grp = ss.add_mutually_exclusive_group()
    grp.add_argument("--duty", type=float)
    grp.add_argument("--vh", type=float)
    return p


def _load(path: str | None) -> ScenarioConfig:
    return load_config(path) if path else ScenarioConfig()


def _scenario_csv(cfg: ScenarioConfig, check: bool) -> tuple[str, object]:
    result = run_scenario(cfg)
    text = format_trace_csv(result.trace)
    if check:
        again = format_trace_csv(run_scenario(cfg).trace)
        if again.encode() != text.encode():
            raise DeterminismError("determinism check failed: repeated runs differ")
        print("determinism check: identical output on repeated run", file=sys.stderr)
    return text, result


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = args.out or cfg.output_path
    if not out:
        raise ConfigError("no output path: pass --out or set scenario.output")
    out = Path(out)
    text, result = _scenario_csv(cfg, args.seedless_check)
    _write(out, text)
    if result.report is not None:
        write_report(result.report.as_dict(), out.with_suffix(".report.txt"))
    if args.gnuplot:
        write_gnuplot_script(out, out.with_suffix(".gp"), title=f"{cfg.mode} scenario")
    return EXIT_OK


def _cmd_diagnose(args) -> int:
    cfg = load_config(args.config)
    if cfg.mode not in ("diagnose", "fault"):
        raise ConfigError(f"scenario.mode: diagnose needs a 'diagnose' or 'fault' scenario, got {cfg.mode!r}")
    cfg = cfg.replace(mode="diagnose")
    text, result = _scenario_csv(cfg, args.seedless_check)
    report = format_report(result.report.as_dict())
    sys.stdout.write(report)
    if args.out:
        _write(Path(args.out), report)
    if args.trace:
        _write(Path(args.trace), text)
        if args.gnuplot:
            write_gnuplot_script(args.trace, Path(args.trace).with_suffix(".gp"), title="faulted twin")
    return EXIT_OK


def _cmd_derive(args) -> int:
    base: MachineParameters = _load(args.config).machine_parameters() if args.config else DEFAULT_PARAMETERS
    overrides = {k: getattr(args, k) for k in ("Rm", "Lm", "J", "Km", "K2", "K3", "Vin")
                 if getattr(args, k) is not None}
    params = MachineParameters(**{**base.__dict__, **overrides})
    derive = derive_coefficients_euler if args.method == "euler" else derive_coefficients_rk2
    c = derive(params, args.h_ns / 1e9)
    sys.stdout.write(format_report({k: getattr(c, k) for k in ("a_c", "b_c", "g_c", "l_c", "m_c", "n_c")}))
    return EXIT_OK


def _cmd_steady(args) -> int:
    cfg = _load(args.config)
    c = cfg.plant_coefficients()
    if args.vh is not None:
        vh = args.vh
    else:
        duty = args.duty if args.duty is not None else cfg.duty
        vh = chopper_voltage(duty, c.Vin)
    s = steady_state(c, vh)
    sys.stdout.write(format_report({"vh_v": vh, "im_a": s.im, "wm_rad_s": s.wm}))
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "diagnose": _cmd_diagnose,
    "derive-coeffs": _cmd_derive,
    "steady-state": _cmd_steady,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except (ConfigError, DomainError, InstabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericOverflowError, NoSteadyStateError, DeterminismError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
