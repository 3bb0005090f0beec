"""Scenario files: sectioned ``key = value`` text with units in the key names.

A scenario is read on top of the shipped ``scenarios/defaults.ini``. Fault
windows are numbered sections ``[fault.1]``, ``[fault.2]``, ... each holding
``start_ns`` and ``duration_ns``.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .control import LoopTiming, PiGains
from .engine import FaultWindow, _check_windows
from .errors import ConfigError, EmulatorError
from .motor import (
    MachineParameters,
    PlantCoefficients,
    REFERENCE_COEFFICIENTS,
    derive_coefficients_euler,
    derive_coefficients_rk2,
    parameters_from_coefficients,
)
from .pwm import PwmConfig

__all__ = ["ScenarioConfig", "MODES", "load_config", "loads_config", "dump_config", "default_config_text"]

MODES = ("open-loop", "closed-loop", "fault", "diagnose")
COEFF_KEYS = ("a_c", "b_c", "g_c", "l_c", "m_c", "n_c")
PARAM_KEYS = {
    "rm_ohm": "Rm",
    "lm_h": "Lm",
    "j_kgm2": "J",
    "km_nm_per_a": "Km",
    "k1_nm_s2": "K1",
    "k2_nm_s": "K2",
    "k3_nm": "K3",
}
TWIN_KEYS = ("twin_rm_scale", "twin_lm_scale", "twin_j_scale", "twin_km_scale")

_SCHEMA = {
    "scenario": {"mode", "horizon_ns", "output"},
    "plant": {*COEFF_KEYS, *PARAM_KEYS, "method", "vin_v", "step_ns"},
    "pwm": {"frequency_hz", "carrier", "resolution"},
    "controller": {"current_kp", "current_kpi", "speed_kp", "speed_kpi", "output", "speed_ref_rad_s"},
    "timing": {"current_period_ns", "speed_period_ns", "iref_limit_a", "duty_min", "duty_max"},
    "open_loop": {"initial_duty", "duty", "step_time_ns"},
    "recorder": {"period_ns"},
    "diagnosis": {"debounce", "threshold_a", "speed_cap_rad_s", *TWIN_KEYS},
}
_FAULT_KEYS = {"start_ns", "duration_ns"}


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario. Exactly one of ``coefficients`` / ``parameters`` is set."""

    mode: str = "closed-loop"
    horizon_ns: int = 1_500_000_000
    coefficients: PlantCoefficients | None = REFERENCE_COEFFICIENTS
    parameters: MachineParameters | None = None
    method: str | None = None
    step_ns: int = 1000
    pwm: PwmConfig = PwmConfig()
    current_gains: PiGains = PiGains(1.1737, -1.0150)
    speed_gains: PiGains = PiGains(0.142, -0.1111)
    output: str = "voltage"
    speed_ref: float = 100.0
    timing: LoopTiming = LoopTiming()
    initial_duty: float = 0.5
    duty: float = 0.7
    step_time_ns: int = 0
    recorder_period_ns: int = 15_000
    faults: tuple[FaultWindow, ...] = ()
    debounce: int = 3
    threshold: float | None = None
    speed_cap: float = 200.0
    twin_scales: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    output_path: str | None = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"scenario.mode: must be one of {', '.join(MODES)}, got {self.mode!r}")
        if (self.coefficients is None) == (self.parameters is None):
            raise ConfigError(
                "plant: give either coefficients (a_c..n_c) or physical parameters, not both"
            )
        if self.parameters is not None and self.method not in ("euler", "rk2"):
            raise ConfigError(f"plant.method: must be 'euler' or 'rk2', got {self.method!r}")
        if self.coefficients is not None and self.method is not None:
            raise ConfigError("plant.method: only valid together with physical parameters")
        if self.horizon_ns <= 0:
            raise ConfigError(f"scenario.horizon_ns: must be positive, got {self.horizon_ns}")
        if self.step_ns <= 0:
            raise ConfigError(f"plant.step_ns: must be positive, got {self.step_ns}")
        for name in ("initial_duty", "duty"):
            v = getattr(self, name)
            if not (math.isfinite(v) and 0.0 <= v <= 1.0):
                raise ConfigError(f"open_loop.{name}: duty must lie in [0, 1], got {v}")
        if self.output not in ("voltage", "duty"):
            raise ConfigError(f"controller.output: must be 'voltage' or 'duty', got {self.output!r}")
        if not math.isfinite(self.speed_ref):
            raise ConfigError("controller.speed_ref_rad_s: must be finite")
        if self.recorder_period_ns <= 0:
            raise ConfigError(f"recorder.period_ns: must be positive, got {self.recorder_period_ns}")
        if self.debounce < 1:
            raise ConfigError(f"diagnosis.debounce: must be >= 1, got {self.debounce}")
        if self.threshold is not None and not self.threshold > 0:
            raise ConfigError(f"diagnosis.threshold_a: must be positive, got {self.threshold}")
        if not self.speed_cap > 0:
            raise ConfigError(f"diagnosis.speed_cap_rad_s: must be positive, got {self.speed_cap}")
        if any(not (math.isfinite(s) and s > 0) for s in self.twin_scales):
            raise ConfigError(f"diagnosis.twin_*_scale: must be positive, got {self.twin_scales}")
        if self.mode in ("fault", "diagnose") and not self.faults:
            raise ConfigError(f"mode {self.mode!r} needs at least one [fault.N] section")
        if self.mode in ("open-loop", "closed-loop") and self.faults:
            raise ConfigError(f"mode {self.mode!r} does not accept fault windows")
        try:
            object.__setattr__(self, "faults", _check_windows(self.faults))
        except EmulatorError as exc:
            raise ConfigError(f"fault: {exc}") from exc
        # derive once so an unstable step is reported at load time
        self.plant_coefficients()

    def plant_coefficients(self) -> PlantCoefficients:
        if self.coefficients is not None:
            return self.coefficients
        derive = derive_coefficients_euler if self.method == "euler" else derive_coefficients_rk2
        try:
            return derive(self.parameters, self.step_ns / 1e9)
        except EmulatorError as exc:
            raise ConfigError(f"plant: {exc}") from exc

    def machine_parameters(self) -> MachineParameters:
        """Physical parameters; reconstructed from the coefficients if needed."""
        if self.parameters is not None:
            return self.parameters
        return parameters_from_coefficients(self.coefficients)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


def _parser() -> configparser.ConfigParser:
    return configparser.ConfigParser(
        inline_comment_prefixes=(";", "#"), interpolation=None, default_section="__none__"
    )


def default_config_text() -> str:
    return resources.files("dcm_emulator").joinpath("scenarios/defaults.ini").read_text()


def _read(parser: configparser.ConfigParser, text: str, source: str) -> None:
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{source}: line {exc.lineno}, column 1: key outside any [section]") from exc
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        col = len(line) - len(line.lstrip()) + 1
        raise ConfigError(f"{source}: line {lineno}, column {col}: cannot parse {line.strip()!r}") from exc
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(f"{source}: line {exc.lineno}, column 1: {exc.message}") from exc


class _Section:
    """Typed accessor that names the offending key in every error."""

    def __init__(self, name: str, items: dict[str, str]):
        self.name = name
        self.items = items

    def _raw(self, key: str) -> str:
        if key not in self.items:
            raise ConfigError(f"{self.name}.{key}: missing")
        return self.items[key]

    def has(self, key: str) -> bool:
        return key in self.items

    def str(self, key: str) -> str:
        return self._raw(key).strip()

    def float(self, key: str) -> float:
        raw = self._raw(key)
        try:
            v = float(raw)
        except ValueError:
            raise ConfigError(f"{self.name}.{key}: expected a number, got {raw!r}") from None
        if not math.isfinite(v):
            raise ConfigError(f"{self.name}.{key}: must be finite, got {raw!r}")
        return v

    def int(self, key: str) -> int:
        raw = self._raw(key)
        try:
            return int(raw.replace("_", ""))
        except ValueError:
            raise ConfigError(f"{self.name}.{key}: expected an integer, got {raw!r}") from None


def _build(sections: dict[str, dict[str, str]], user_plant: dict[str, str]) -> ScenarioConfig:
    for name, items in sections.items():
        allowed = _FAULT_KEYS if name.startswith("fault.") else _SCHEMA.get(name)
        if allowed is None:
            raise ConfigError(f"unknown section [{name}]")
        unknown = set(items) - allowed
        if unknown:
            raise ConfigError(f"{name}.{sorted(unknown)[0]}: unknown key")

    sec = {name: _Section(name, items) for name, items in sections.items()}
    sc, pl, pw, ct = sec["scenario"], sec["plant"], sec["pwm"], sec["controller"]
    tm, ol, rc, dg = sec["timing"], sec["open_loop"], sec["recorder"], sec["diagnosis"]

    # a user plant block that names any source key replaces the default source
    src = user_plant if any(k in user_plant for k in (*COEFF_KEYS, *PARAM_KEYS)) else sections["plant"]
    coeffs = params = None
    method = None
    has_coeffs = any(k in src for k in COEFF_KEYS)
    has_params = any(k in src for k in PARAM_KEYS)
    if has_coeffs and has_params:
        raise ConfigError("plant: give either coefficients (a_c..n_c) or physical parameters, not both")
    step_ns = pl.int("step_ns")
    vin = pl.float("vin_v")
    srcsec = _Section("plant", src)
    try:
        if has_coeffs:
            if "method" in src:
                raise ConfigError("plant.method: only valid together with physical parameters")
            coeffs = PlantCoefficients(
                *(srcsec.float(k) for k in COEFF_KEYS), Vin=vin, h=step_ns / 1e9
            )
        else:
            opt = lambda key: srcsec.float(key) if key in src else 0.0  # noqa: E731
            params = MachineParameters(
                Rm=srcsec.float("rm_ohm"),
                Lm=srcsec.float("lm_h"),
                J=srcsec.float("j_kgm2"),
                Km=srcsec.float("km_nm_per_a"),
                K1=opt("k1_nm_s2"),
                K2=opt("k2_nm_s"),
                K3=opt("k3_nm"),
                Vin=vin,
            )
            method = srcsec.str("method") if "method" in src else "euler"
    except ConfigError:
        raise
    except EmulatorError as exc:
        raise ConfigError(f"plant: {exc}") from exc

    faults = []
    for name in sorted((n for n in sections if n.startswith("fault.")), key=_fault_order):
        s = sec[name]
        try:
            faults.append(FaultWindow(s.int("start_ns"), s.int("duration_ns")))
        except EmulatorError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{name}: {exc}") from exc

    try:
        pwm = PwmConfig(pw.float("frequency_hz"), pw.str("carrier"), pw.int("resolution"))
        timing = LoopTiming(
            tm.int("current_period_ns"), tm.int("speed_period_ns"), tm.float("iref_limit_a"),
            (tm.float("duty_min"), tm.float("duty_max")),
        )
        current_gains = PiGains(ct.float("current_kp"), ct.float("current_kpi"))
        speed_gains = PiGains(ct.float("speed_kp"), ct.float("speed_kpi"))
    except ConfigError:
        raise
    except EmulatorError as exc:
        raise ConfigError(str(exc)) from exc

    return ScenarioConfig(
        mode=sc.str("mode"),
        horizon_ns=sc.int("horizon_ns"),
        coefficients=coeffs,
        parameters=params,
        method=method,
        step_ns=step_ns,
        pwm=pwm,
        current_gains=current_gains,
        speed_gains=speed_gains,
        output=ct.str("output"),
        speed_ref=ct.float("speed_ref_rad_s"),
        timing=timing,
        initial_duty=ol.float("initial_duty"),
        duty=ol.float("duty"),
        step_time_ns=ol.int("step_time_ns"),
        recorder_period_ns=rc.int("period_ns"),
        faults=tuple(faults),
        debounce=dg.int("debounce"),
        threshold=dg.float("threshold_a") if dg.has("threshold_a") else None,
        speed_cap=dg.float("speed_cap_rad_s"),
        twin_scales=tuple(dg.float(k) if dg.has(k) else 1.0 for k in TWIN_KEYS),
        output_path=sc.str("output") if sc.has("output") else None,
    )


def _fault_order(name: str) -> tuple[int, str]:
    suffix = name.split(".", 1)[1]
    return (int(suffix), "") if suffix.isdigit() else (1 << 30, suffix)


def loads_config(text: str, source: str = "<string>") -> ScenarioConfig:
    """Parse scenario text layered over the shipped defaults."""
    base = _parser()
    _read(base, default_config_text(), "defaults.ini")
    user = _parser()
    _read(user, text, source)
    sections = {name: dict(base[name]) for name in base.sections()}
    for name in user.sections():
        sections.setdefault(name, {})
        if name == "plant" and any(k in user[name] for k in (*COEFF_KEYS, *PARAM_KEYS)):
            # drop the default coefficient block; keep step/vin defaults
            sections[name] = {k: v for k, v in sections[name].items() if k in ("step_ns", "vin_v")}
        sections[name].update(dict(user[name]))
    user_plant = dict(user["plant"]) if user.has_section("plant") else {}
    return _build(sections, user_plant)


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    return loads_config(text, source=str(path))


def dump_config(cfg: ScenarioConfig) -> str:
    """Serialize a config so that ``loads_config(dump_config(c)) == c``."""
    r = repr
    lines = [
        "[scenario]",
        f"mode = {cfg.mode}",
        f"horizon_ns = {cfg.horizon_ns}",
    ]
    if cfg.output_path is not None:
        lines.append(f"output = {cfg.output_path}")
    lines += ["", "[plant]"]
    if cfg.coefficients is not None:
        c = cfg.coefficients
        lines += [f"{k} = {r(getattr(c, k))}" for k in COEFF_KEYS]
        lines.append(f"vin_v = {r(c.Vin)}")
    else:
        p = cfg.parameters
        lines += [f"{key} = {r(getattr(p, attr))}" for key, attr in PARAM_KEYS.items()]
        lines += [f"method = {cfg.method}", f"vin_v = {r(p.Vin)}"]
    lines.append(f"step_ns = {cfg.step_ns}")
    t = cfg.timing
    lines += [
        "", "[pwm]",
        f"frequency_hz = {r(float(cfg.pwm.frequency))}",
        f"carrier = {cfg.pwm.carrier_shape}",
        f"resolution = {cfg.pwm.resolution}",
        "", "[controller]",
        f"current_kp = {r(cfg.current_gains.kp)}",
        f"current_kpi = {r(cfg.current_gains.kpi)}",
        f"speed_kp = {r(cfg.speed_gains.kp)}",
        f"speed_kpi = {r(cfg.speed_gains.kpi)}",
        f"output = {cfg.output}",
        f"speed_ref_rad_s = {r(cfg.speed_ref)}",
        "", "[timing]",
        f"current_period_ns = {t.current_period_ns}",
        f"speed_period_ns = {t.speed_period_ns}",
        f"iref_limit_a = {r(float(t.iref_limit))}",
        f"duty_min = {r(float(t.duty_limits[0]))}",
        f"duty_max = {r(float(t.duty_limits[1]))}",
        "", "[open_loop]",
        f"initial_duty = {r(cfg.initial_duty)}",
        f"duty = {r(cfg.duty)}",
        f"step_time_ns = {cfg.step_time_ns}",
        "", "[recorder]",
        f"period_ns = {cfg.recorder_period_ns}",
        "", "[diagnosis]",
        f"debounce = {cfg.debounce}",
        f"speed_cap_rad_s = {r(cfg.speed_cap)}",
    ]
    if cfg.threshold is not None:
        lines.append(f"threshold_a = {r(cfg.threshold)}")
    lines += [f"{k} = {r(v)}" for k, v in zip(TWIN_KEYS, cfg.twin_scales)]
    for i, w in enumerate(cfg.faults, 1):
        lines += ["", f"[fault.{i}]", f"start_ns = {w.start}", f"duration_ns = {w.duration}"]
    return "\n".join(lines) + "\n"
