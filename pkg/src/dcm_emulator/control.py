"""Discrete cascaded PI control: speed loop -> current reference -> duty.

Both controllers use the incremental (velocity) form

    u(k) = u(k-1) + kp * e(k) + kpi * e(k-1)

with the stored ``u(k-1)`` being the *clamped* output, which gives
anti-windup for free.

The inner loop can emit its output in two ways:

``"voltage"`` (default)
    The PI output is a voltage command limited to ``[-Vin, +Vin]`` and the
    duty is the inverse chopper law ``(v / Vin + 1) / 2``. The reference gain
    set (kp=1.1737, kpi=-1.0150) is tuned for this form: its zero sits on the
    armature pole R/L.
``"duty"``
    The PI output is the duty itself, clamped to ``[0, 1]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

from .errors import DomainError

__all__ = [
    "PiGains",
    "PiState",
    "LoopTiming",
    "CURRENT_GAINS",
    "SPEED_GAINS",
    "pi_step",
    "speed_controller_tick",
    "current_controller_tick",
    "CascadeController",
]

OutputMode = Literal["voltage", "duty"]


@dataclass(frozen=True)
class PiGains:
    """Gain pair of an incremental PI: ``kp`` on e(k), ``kpi`` on e(k-1)."""

    kp: float
    kpi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.kp) and math.isfinite(self.kpi)):
            raise DomainError("PI gains must be finite")

    @classmethod
    def from_parallel(cls, kp: float, ki: float, ts: float) -> "PiGains":
        """Gains equivalent to ``kp * e + ki * integral(e)`` sampled every ``ts``."""
        return cls(kp=kp + ki * ts, kpi=-kp)


@dataclass(frozen=True)
class PiState:
    prev_error: float = 0.0
    output: float = 0.0


@dataclass(frozen=True)
class LoopTiming:
    """Sampling periods (integer ns) and saturation limits of the cascade."""

    current_period_ns: int = 300_000
    speed_period_ns: int = 20_000_000
    iref_limit: float = 13.0
    duty_limits: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self) -> None:
        for name in ("current_period_ns", "speed_period_ns"):
            v = getattr(self, name)
            if int(v) != v or v <= 0:
                raise DomainError(f"{name} must be a positive integer, got {v}")
        if not math.isfinite(self.iref_limit) or self.iref_limit <= 0:
            raise DomainError(f"iref_limit must be positive, got {self.iref_limit}")
        lo, hi = self.duty_limits
        if not 0.0 <= lo < hi <= 1.0:
            raise DomainError(f"duty_limits must satisfy 0 <= lo < hi <= 1, got {self.duty_limits}")


CURRENT_GAINS = PiGains(1.1737, -1.0150)
SPEED_GAINS = PiGains(0.142, -0.1111)


def pi_step(g: PiGains, st: PiState, error: float, lo: float, hi: float) -> tuple[PiState, float]:
    """One incremental PI update clamped to ``[lo, hi]``."""
    if not math.isfinite(error):
        raise DomainError(f"controller error must be finite, got {error}")
    if not lo < hi:
        raise DomainError(f"need lo < hi, got [{lo}, {hi}]")
    raw = st.output + g.kp * error + g.kpi * st.prev_error
    out = min(max(raw, lo), hi)
    return PiState(prev_error=error, output=out), out


def speed_controller_tick(
    ref: float,
    measured_wm: float,
    st: PiState,
    gains: PiGains = SPEED_GAINS,
    iref_limit: float = 13.0,
) -> tuple[PiState, float]:
    """Outer loop: speed error to a current reference within ``±iref_limit``."""
    return pi_step(gains, st, ref - measured_wm, -iref_limit, iref_limit)


def current_controller_tick(
    iref: float,
    measured_im: float,
    st: PiState,
    gains: PiGains = CURRENT_GAINS,
    vin: float = 60.0,
    output: OutputMode = "voltage",
    duty_limits: tuple[float, float] = (0.0, 1.0),
) -> tuple[PiState, float]:
    """Inner loop: current error to a chopper duty in ``duty_limits``."""
    lo, hi = duty_limits
    error = iref - measured_im
    if output == "duty":
        return pi_step(gains, st, error, lo, hi)
    if output != "voltage":
        raise DomainError(f"unknown current-loop output mode {output!r}")
    new, v = pi_step(gains, st, error, (2.0 * lo - 1.0) * vin, (2.0 * hi - 1.0) * vin)
    duty = min(max((v / vin + 1.0) / 2.0, lo), hi)
    return new, duty


class CascadeController:
    """Mutable speed/current controller pair owned by one simulation."""

    def __init__(
        self,
        speed_gains: PiGains = SPEED_GAINS,
        current_gains: PiGains = CURRENT_GAINS,
        timing: LoopTiming | None = None,
        vin: float = 60.0,
        output: OutputMode = "voltage",
    ):
        self.speed_gains = speed_gains
        self.current_gains = current_gains
        self.timing = timing or LoopTiming()
        self.vin = vin
        self.output = output
        self.reset()

    def speed_tick(self, ref: float, wm: float) -> float:
        self.speed_state, self.iref = speed_controller_tick(
            ref, wm, self.speed_state, self.speed_gains, self.timing.iref_limit
        )
        self.speed_ticks += 1
        return self.iref

    def current_tick(self, im: float) -> float:
        self.current_state, self.duty = current_controller_tick(
            self.iref, im, self.current_state, self.current_gains, self.vin,
            self.output, self.timing.duty_limits,
        )
        self.current_ticks += 1
        return self.duty

    def reset(self) -> None:
        """Return both loops to the zero state (plant at rest, zero command)."""
        self.speed_state = PiState()
        self.current_state = PiState()
        self.iref = 0.0
        lo, hi = self.timing.duty_limits
        # zero PI output means 0 V (duty 1/2) in voltage mode, duty 0 in duty mode
        self.duty = min(max(0.5 if self.output == "voltage" else 0.0, lo), hi)
        self.speed_ticks = 0
        self.current_ticks = 0
