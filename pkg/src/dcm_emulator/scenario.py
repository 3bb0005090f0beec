"""Run a :class:`ScenarioConfig` end to end."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .config import ScenarioConfig
from .diagnosis import DetectionReport, compare_traces
from .engine import Trace, run_closed_loop, run_open_loop
from .motor import PlantCoefficients, derive_coefficients_euler, derive_coefficients_rk2

__all__ = ["ScenarioResult", "run_scenario", "twin_coefficients"]


@dataclass(frozen=True)
class ScenarioResult:
    config: ScenarioConfig
    trace: Trace
    nominal: Trace | None = None
    report: DetectionReport | None = None


def twin_coefficients(cfg: ScenarioConfig) -> PlantCoefficients:
    """Coefficients of the 'real process' twin, with parameter scalings applied."""
    if cfg.twin_scales == (1.0, 1.0, 1.0, 1.0):
        return cfg.plant_coefficients()
    p = cfg.machine_parameters()
    rm, lm, j, km = cfg.twin_scales
    p = dataclasses.replace(p, Rm=p.Rm * rm, Lm=p.Lm * lm, J=p.J * j, Km=p.Km * km)
    derive = derive_coefficients_rk2 if cfg.method == "rk2" else derive_coefficients_euler
    return derive(p, cfg.step_ns / 1e9)


def _closed(cfg: ScenarioConfig, coeffs: PlantCoefficients, faults) -> Trace:
    return run_closed_loop(
        coeffs,
        pwm=cfg.pwm,
        speed_gains=cfg.speed_gains,
        current_gains=cfg.current_gains,
        timing=cfg.timing,
        speed_ref=cfg.speed_ref,
        windows=faults,
        horizon=cfg.horizon_ns,
        recorder_period=cfg.recorder_period_ns,
        output=cfg.output,
    )


def run_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    coeffs = cfg.plant_coefficients()
    if cfg.mode == "open-loop":
        profile = [(0, cfg.initial_duty), (cfg.step_time_ns, cfg.duty)]
        trace = run_open_loop(coeffs, profile, cfg.horizon_ns, cfg.recorder_period_ns)
        return ScenarioResult(cfg, trace)
    if cfg.mode == "closed-loop":
        return ScenarioResult(cfg, _closed(cfg, coeffs, ()))
    if cfg.mode == "fault":
        return ScenarioResult(cfg, _closed(cfg, coeffs, cfg.faults))
    # diagnose: nominal emulator versus the faulted "real process" twin
    emu = _closed(cfg, coeffs, ())
    # the emulator speed is capped as it would be when not looped back
    emu = dataclasses.replace(emu, wm=emu.wm.clip(-cfg.speed_cap, cfg.speed_cap))
    real = _closed(cfg, twin_coefficients(cfg), cfg.faults)
    _, report = compare_traces(
        real, emu, cfg.threshold, fault_start=cfg.faults[0].start, debounce=cfg.debounce
    )
    return ScenarioResult(cfg, real, nominal=emu, report=report)

