"""Complementary PWM generation and chopper switch decoding.

Time inside a carrier period is an integer nanosecond offset. The carrier
is evaluated at the midpoint of each nanosecond so that a triangle carrier
is exactly symmetric about the period centre, which makes the on-time of a
quantized duty ``q / resolution`` exactly ``q / resolution * period``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

from .errors import DomainError

__all__ = [
    "SwitchPair",
    "PwmConfig",
    "quantize_duty",
    "pwm_sample",
    "pwm_high",
    "decode_chopper",
    "PwmGenerator",
]


@dataclass(frozen=True)
class SwitchPair:
    """Logic levels of the two chopper commands."""

    c0: int
    c1: int

    def __post_init__(self) -> None:
        if self.c0 not in (0, 1) or self.c1 not in (0, 1):
            raise DomainError(f"switch levels must be 0 or 1, got ({self.c0}, {self.c1})")


HIGH = SwitchPair(1, 0)
LOW = SwitchPair(0, 1)
OFF = SwitchPair(0, 0)


@dataclass(frozen=True)
class PwmConfig:
    """Carrier settings.

    Parameters
    ----------
    frequency : float
        Carrier frequency in hertz. ``1 / frequency`` must be a whole number
        of nanoseconds.
    carrier_shape : {"triangle", "sawtooth"}
    resolution : int
        Number of duty levels per period (compare-register depth).
    """

    frequency: float = 16_000.0
    carrier_shape: Literal["triangle", "sawtooth"] = "triangle"
    resolution: int = 625

    def __post_init__(self) -> None:
        if not math.isfinite(self.frequency) or self.frequency <= 0:
            raise DomainError(f"PWM frequency must be positive, got {self.frequency}")
        if self.carrier_shape not in ("triangle", "sawtooth"):
            raise DomainError(f"unknown carrier shape {self.carrier_shape!r}")
        if int(self.resolution) != self.resolution or self.resolution < 2:
            raise DomainError(f"resolution must be an integer >= 2, got {self.resolution}")
        period = 1e9 / self.frequency
        if abs(period - round(period)) > 1e-6:
            raise DomainError(f"PWM period {period} ns is not a whole number of nanoseconds")

    @property
    def period_ns(self) -> int:
        return int(round(1e9 / self.frequency))


def quantize_duty(duty: float, resolution: int) -> int:
    """Nearest compare level ``q`` in ``0..resolution`` for ``duty``."""
    if not math.isfinite(duty) or not 0.0 <= duty <= 1.0:
        raise DomainError(f"duty must lie in [0, 1], got {duty}")
    # half-up rounding; Python's round() is banker's rounding
    return int(math.floor(duty * resolution + 0.5))


def pwm_high(shape: str, level: int, resolution: int, period_ns: int, offset_ns: int) -> bool:
    """Comparator output for a quantized level; pure integer arithmetic."""
    twice_mid = 2 * offset_ns + 1  # 2 * (offset + 1/2)
    if shape == "triangle":
        # carrier = 2*(t+1/2)/P on the rising half, 2 - 2*(t+1/2)/P on the falling half
        if twice_mid <= period_ns:
            return twice_mid * resolution < level * period_ns
        return (2 * period_ns - twice_mid) * resolution < level * period_ns
    # sawtooth: carrier = (t+1/2)/P
    return twice_mid * resolution < 2 * level * period_ns


def pwm_sample(cfg: PwmConfig, duty: float, t: int) -> SwitchPair:
    """Switch pair at nanosecond offset ``t`` within a carrier period.

    ``c0`` is high while the carrier is below the (quantized) duty; ``c1`` is
    its complement (no dead time).
    """
    period = cfg.period_ns
    if not 0 <= t < period:
        raise DomainError(f"offset {t} ns outside carrier period [0, {period})")
    level = quantize_duty(duty, cfg.resolution)
    return HIGH if pwm_high(cfg.carrier_shape, level, cfg.resolution, period, t) else LOW


def decode_chopper(sw: SwitchPair, vin: float) -> float:
    """Chopper output voltage for a switch state: +vin, -vin, or 0."""
    if sw.c0 == 1 and sw.c1 == 0:
        return vin
    if sw.c0 == 0 and sw.c1 == 1:
        return -vin
    return 0.0


class PwmGenerator:
    """Carrier with a duty latch that updates only at period boundaries."""

    def __init__(self, cfg: PwmConfig, duty: float = 0.5):
        self.cfg = cfg
        self.period_ns = cfg.period_ns
        self.level = quantize_duty(duty, cfg.resolution)
        self._pending = self.level
        self.period_start = 0
        self.latches = 0

    @property
    def duty(self) -> float:
        return self.level / self.cfg.resolution

    def command(self, duty: float) -> None:
        """Set the duty that will be applied from the next period boundary."""
        self._pending = quantize_duty(duty, self.cfg.resolution)

    def latch(self, now_ns: int) -> None:
        self.level = self._pending
        self.period_start = now_ns
        self.latches += 1

    def sample(self, now_ns: int) -> SwitchPair:
        offset = (now_ns - self.period_start) % self.period_ns
        high = pwm_high(self.cfg.carrier_shape, self.level, self.cfg.resolution, self.period_ns, offset)
        return HIGH if high else LOW
