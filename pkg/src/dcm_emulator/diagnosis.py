"""Residual-based detection of irregular functioning between two twins."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, DomainError
from .engine import Trace

__all__ = [
    "ResidualSeries",
    "DetectionReport",
    "ripple_amplitude",
    "calibrate_threshold",
    "compare_traces",
    "limit_speed_output",
]

DEBOUNCE = 3
RESIDUAL_MARGIN = 3.0
RIPPLE_FLOOR = 0.1


@dataclass(frozen=True, eq=False)
class ResidualSeries:
    timestamps: np.ndarray
    residual: np.ndarray

    def __len__(self) -> int:
        return len(self.timestamps)


@dataclass(frozen=True)
class DetectionReport:
    detected: bool
    detection_time: int | None
    latency: int | None
    peak_residual: float
    threshold: float

    def as_dict(self) -> dict[str, object]:
        return {
            "detected": self.detected,
            "detection_time_ns": self.detection_time,
            "latency_ns": self.latency,
            "peak_residual_a": self.peak_residual,
            "threshold_a": self.threshold,
        }


def ripple_amplitude(values: np.ndarray) -> float:
    """Half peak-to-peak excursion of a signal window."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DomainError("cannot measure ripple of an empty window")
    return float(values.max() - values.min()) / 2.0


def calibrate_threshold(real: Trace, emu: Trace, until: int, since: int | None = None) -> float:
    """Default detection threshold from the pre-fault window ``[since, until)``.

    The threshold is ``RESIDUAL_MARGIN`` times the residual peak seen before
    the fault, but never below ``RIPPLE_FLOOR`` times the current ripple of
    the nominal trace. Identical twins have no pre-fault residual at all, so
    the ripple floor is what sets the threshold in that case.

    ``since`` defaults to the start of the last 10% of the window, which keeps
    the start-up transient out of the estimate.
    """
    _check_aligned(real, emu)
    if since is None:
        t0 = int(emu.t[0]) if len(emu) else 0
        since = until - max((until - t0) // 10, 1)
    sel = (emu.t >= since) & (emu.t < until)
    if not np.any(sel):
        raise DomainError(f"no samples in calibration window [{since}, {until})")
    pre_residual = float(np.max(np.abs(real.im[sel] - emu.im[sel])))
    floor = RIPPLE_FLOOR * ripple_amplitude(emu.im[sel])
    threshold = max(RESIDUAL_MARGIN * pre_residual, floor)
    if threshold <= 0:
        raise DomainError("calibration window has neither ripple nor residual; pass a threshold")
    return threshold


def _check_aligned(real: Trace, emu: Trace) -> None:
    if len(real) != len(emu) or not np.array_equal(real.t, emu.t):
        raise AlignmentError(
            f"traces do not share timestamps ({len(real)} vs {len(emu)} samples)"
        )


def compare_traces(
    real: Trace,
    emu: Trace,
    threshold: float | None = None,
    fault_start: int | None = None,
    debounce: int = DEBOUNCE,
) -> tuple[ResidualSeries, DetectionReport]:
    """Pointwise current residual and a debounced threshold detector.

    Detection needs ``debounce`` consecutive samples with residual at or above
    ``threshold``; ``detection_time`` is the first sample of that run.
    With ``threshold=None`` it is calibrated on the window before
    ``fault_start`` (see :func:`calibrate_threshold`).
    """
    _check_aligned(real, emu)
    if debounce < 1:
        raise DomainError(f"debounce must be >= 1, got {debounce}")
    if threshold is None:
        if fault_start is None:
            raise DomainError("threshold calibration needs fault_start")
        threshold = calibrate_threshold(real, emu, fault_start)
    if not threshold > 0:
        raise DomainError(f"threshold must be positive, got {threshold}")

    residual = np.abs(real.im - emu.im)
    series = ResidualSeries(real.t.copy(), residual)
    peak = float(residual.max()) if residual.size else 0.0

    above = residual >= threshold
    run = 0
    hit = None
    for i, flag in enumerate(above):
        run = run + 1 if flag else 0
        if run == debounce:
            hit = i - debounce + 1
            break
    if hit is None:
        return series, DetectionReport(False, None, None, peak, float(threshold))
    t_det = int(real.t[hit])
    latency = t_det - fault_start if fault_start is not None else None
    return series, DetectionReport(True, t_det, latency, peak, float(threshold))


def limit_speed_output(wm: float, cap: float) -> float:
    """Clamp an open-loop emulator speed to ``[-cap, cap]``."""
    if not cap > 0:
        raise DomainError(f"speed cap must be positive, got {cap}")
    return min(max(wm, -cap), cap)
