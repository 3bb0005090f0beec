"""Deterministic multi-rate executor and scenario drivers.

All time is integer nanoseconds. Periodic tasks are fired in ascending rank
at coincident timestamps:

    speed loop -> current loop -> PWM latch -> plant step -> recorder

so a control update reaches the plant on the same tick. The plant task
owns the chain ``pwm sample -> fault gate -> chopper decode -> discrete
step``; the recorder stores the state reached at the end of that tick.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping, Sequence, Union

import numpy as np

from .control import CURRENT_GAINS, SPEED_GAINS, CascadeController, LoopTiming, OutputMode, PiGains
from .errors import DomainError, NumericOverflowError
from .motor import PlantCoefficients, PlantState, chopper_voltage
from .pwm import OFF, PwmConfig, PwmGenerator, SwitchPair, quantize_duty

__all__ = [
    "SimClock",
    "Task",
    "TaskSchedule",
    "FaultWindow",
    "TraceRecord",
    "Trace",
    "fault_gate",
    "recorder_decimate",
    "as_profile",
    "run_schedule",
    "run_open_loop",
    "run_closed_loop",
]

Profile = Union[float, Sequence[tuple[int, float]], Callable[[int], float]]


class SimClock:
    """Integer-nanosecond virtual clock that never runs backwards."""

    def __init__(self, horizon: int):
        if int(horizon) != horizon or horizon < 0:
            raise DomainError(f"horizon must be a non-negative integer (ns), got {horizon}")
        self.now = 0
        self.horizon = int(horizon)

    def advance_to(self, t: int) -> None:
        if t < self.now:
            raise DomainError(f"clock cannot move backwards ({self.now} -> {t})")
        if t > self.horizon:
            raise DomainError(f"clock cannot pass horizon {self.horizon} (asked for {t})")
        self.now = t


@dataclass(frozen=True)
class Task:
    """A periodic action.

    The task fires at ``phase + k * period`` for every such time ``t`` with
    ``t < horizon`` and ``t + span <= horizon``. ``span`` is the amount of
    simulated time the action consumes (the plant step size).
    """

    name: str
    period: int
    phase: int
    rank: int
    action: Callable[[int], None] = field(compare=False, repr=False)
    span: int = 0

    def __post_init__(self) -> None:
        if int(self.period) != self.period or self.period <= 0:
            raise DomainError(f"task {self.name!r}: period must be a positive integer ns")
        if int(self.phase) != self.phase or self.phase < 0:
            raise DomainError(f"task {self.name!r}: phase must be a non-negative integer ns")


class TaskSchedule:
    """Immutable, rank-ordered collection of tasks."""

    def __init__(self, tasks: Sequence[Task]):
        names = [t.name for t in tasks]
        if len(set(names)) != len(names):
            raise DomainError(f"duplicate task names in {names}")
        ranks = [t.rank for t in tasks]
        if len(set(ranks)) != len(ranks):
            raise DomainError(f"task ranks must be distinct, got {ranks}")
        self.tasks: tuple[Task, ...] = tuple(sorted(tasks, key=lambda t: t.rank))

    def __iter__(self) -> Iterator[Task]:
        return iter(self.tasks)

    def __len__(self) -> int:
        return len(self.tasks)


def run_schedule(schedule: TaskSchedule, clock: SimClock) -> dict[str, int]:
    """Fire every task on its grid until the horizon; return firing counts."""
    tasks = schedule.tasks
    horizon = clock.horizon
    done = horizon + 1  # sentinel: past every admissible firing time
    # per task: last admissible firing time
    limits = [min(horizon - 1, horizon - t.span) for t in tasks]
    nxt = [t.phase if t.phase <= lim else done for t, lim in zip(tasks, limits)]
    counts = [0] * len(tasks)
    jobs = [(i, t.action, t.period, lim) for i, (t, lim) in enumerate(zip(tasks, limits))]
    now = min(nxt, default=done)
    while now < done:
        clock.advance_to(now)
        for i, action, period, lim in jobs:
            if nxt[i] == now:
                action(now)
                counts[i] += 1
                t_next = now + period
                nxt[i] = t_next if t_next <= lim else done
        now = min(nxt)
    return {t.name: c for t, c in zip(tasks, counts)}


@dataclass(frozen=True)
class FaultWindow:
    """Actuator inactivation over the half-open interval ``[start, start + duration)``."""

    start: int
    duration: int

    def __post_init__(self) -> None:
        if int(self.start) != self.start or self.start < 0:
            raise DomainError(f"fault start must be a non-negative integer ns, got {self.start}")
        if int(self.duration) != self.duration or self.duration <= 0:
            raise DomainError(f"fault duration must be a positive integer ns, got {self.duration}")

    @property
    def end(self) -> int:
        return self.start + self.duration

    def contains(self, t: int) -> bool:
        return self.start <= t < self.end


def _check_windows(windows: Sequence[FaultWindow]) -> tuple[FaultWindow, ...]:
    ordered = tuple(sorted(windows, key=lambda w: w.start))
    for a, b in zip(ordered, ordered[1:]):
        if b.start < a.end:
            raise DomainError(f"fault windows overlap: {a} and {b}")
    return ordered


def fault_gate(sw: SwitchPair, t: int, windows: Sequence[FaultWindow]) -> SwitchPair:
    """Force both switch commands low while ``t`` lies in a fault window."""
    for w in windows:
        if w.start <= t < w.start + w.duration:
            return OFF
    return sw


@dataclass(frozen=True)
class TraceRecord:
    t: int
    duty: float
    vh: float
    im: float
    wm: float
    fault_active: bool


@dataclass(frozen=True, eq=False)
class Trace:
    """Column-stored sequence of :class:`TraceRecord`.

    ``counters`` holds task firing counts of the run that produced the trace;
    ``iref`` holds ``(t_ns, value)`` pairs emitted by the speed loop.
    """

    t: np.ndarray
    duty: np.ndarray
    vh: np.ndarray
    im: np.ndarray
    wm: np.ndarray
    fault: np.ndarray
    counters: Mapping[str, int] = field(default_factory=dict)
    iref: tuple[tuple[int, float], ...] = ()

    @classmethod
    def from_columns(cls, t, duty, vh, im, wm, fault, **extra) -> "Trace":
        cols = dict(
            t=np.asarray(t, dtype=np.int64),
            duty=np.asarray(duty, dtype=float),
            vh=np.asarray(vh, dtype=float),
            im=np.asarray(im, dtype=float),
            wm=np.asarray(wm, dtype=float),
            fault=np.asarray(fault, dtype=bool),
        )
        n = {len(v) for v in cols.values()}
        if len(n) > 1:
            raise DomainError(f"trace columns differ in length: {n}")
        if len(cols["t"]) > 1 and np.any(np.diff(cols["t"]) <= 0):
            raise DomainError("trace timestamps must be strictly increasing")
        return cls(**cols, **extra)

    @classmethod
    def from_records(cls, records: Sequence[TraceRecord], **extra) -> "Trace":
        return cls.from_columns(
            [r.t for r in records], [r.duty for r in records], [r.vh for r in records],
            [r.im for r in records], [r.wm for r in records], [r.fault_active for r in records],
            **extra,
        )

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> TraceRecord:
        return TraceRecord(
            int(self.t[i]), float(self.duty[i]), float(self.vh[i]),
            float(self.im[i]), float(self.wm[i]), bool(self.fault[i]),
        )

    def __iter__(self) -> Iterator[TraceRecord]:
        for i in range(len(self)):
            yield self[i]

    def between(self, t0: int, t1: int) -> "Trace":
        """Records with ``t0 <= t < t1``."""
        sel = (self.t >= t0) & (self.t < t1)
        return Trace(self.t[sel], self.duty[sel], self.vh[sel], self.im[sel],
                     self.wm[sel], self.fault[sel], self.counters, self.iref)

    def decimate(self, factor: int) -> "Trace":
        return recorder_decimate(self, factor)


def recorder_decimate(stream: Trace, factor: int) -> Trace:
    """Keep every ``factor``-th sample (the first one included)."""
    if int(factor) != factor or factor < 1:
        raise DomainError(f"decimation factor must be an integer >= 1, got {factor}")
    s = slice(None, None, int(factor))
    return Trace(stream.t[s], stream.duty[s], stream.vh[s], stream.im[s],
                 stream.wm[s], stream.fault[s], stream.counters, stream.iref)


def as_profile(p: Profile) -> Callable[[int], float]:
    """Turn a constant, a step list ``[(t_ns, value), ...]`` or a callable into ``f(t_ns)``.

    A step list holds each value from its timestamp until the next one; before
    the first timestamp the first value applies.
    """
    if callable(p):
        return p
    if isinstance(p, (int, float)):
        v = float(p)
        return lambda t: v
    steps = sorted(((int(t), float(v)) for t, v in p), key=lambda s: s[0])
    if not steps:
        raise DomainError("empty profile")
    times = [t for t, _ in steps]
    values = [v for _, v in steps]

    def f(t: int) -> float:
        return values[max(bisect.bisect_right(times, t) - 1, 0)]

    return f


class _Recorder:
    def __init__(self):
        self.t: list[int] = []
        self.duty: list[float] = []
        self.vh: list[float] = []
        self.im: list[float] = []
        self.wm: list[float] = []
        self.fault: list[bool] = []

    def trace(self, **extra) -> Trace:
        return Trace.from_columns(self.t, self.duty, self.vh, self.im, self.wm, self.fault, **extra)


def _overflow(t: int, im: float, wm: float, vh: float) -> NumericOverflowError:
    return NumericOverflowError(f"plant diverged at t={t} ns: im={im}, wm={wm}, vh={vh}")


def _check_periods(coeffs: PlantCoefficients, recorder_period: int) -> int:
    h_ns = coeffs.step_ns
    if h_ns <= 0 or abs(coeffs.h * 1e9 - h_ns) > 1e-6:
        raise DomainError(f"plant step {coeffs.h} s is not a whole number of nanoseconds")
    if int(recorder_period) != recorder_period or recorder_period <= 0:
        raise DomainError(f"recorder period must be a positive integer ns, got {recorder_period}")
    return h_ns


def run_open_loop(
    coeffs: PlantCoefficients,
    duty_profile: Profile = 0.7,
    horizon: int = 60_000_000,
    recorder_period: int = 15_000,
    initial: PlantState = PlantState(),
) -> Trace:
    """Drive the plant with the mean chopper voltage of a duty profile (no PWM)."""
    h_ns = _check_periods(coeffs, recorder_period)
    duty_at = as_profile(duty_profile)
    a, b, g = coeffs.a_c, coeffs.b_c, coeffs.g_c
    l, m, n = coeffs.l_c, coeffs.m_c, coeffs.n_c
    vin = coeffs.Vin
    st = [initial.im, initial.wm, 0.0, 0.0]  # im, wm, last duty, last vh
    rec = _Recorder()

    last = [None, 0.0]  # duty, its chopper voltage

    def plant(now: int) -> None:
        im, wm = st[0], st[1]
        d = duty_at(now)
        if d != last[0]:
            last[0], last[1] = d, chopper_voltage(d, vin)
        vh = last[1]
        sg = (wm > 0) - (wm < 0)
        im_n = a * im + b * wm + g * vh
        wm_n = l * im + m * wm + n * sg
        if not (math.isfinite(im_n) and math.isfinite(wm_n)):
            raise _overflow(now, im_n, wm_n, vh)
        st[0], st[1], st[2], st[3] = im_n, wm_n, d, vh

    def record(now: int) -> None:
        rec.t.append(now)
        rec.duty.append(st[2])
        rec.vh.append(st[3])
        rec.im.append(st[0])
        rec.wm.append(st[1])
        rec.fault.append(False)

    schedule = TaskSchedule([
        Task("plant", h_ns, 0, 3, plant, span=h_ns),
        Task("recorder", int(recorder_period), 0, 4, record, span=h_ns),
    ])
    counters = run_schedule(schedule, SimClock(horizon))
    return rec.trace(counters=counters)


def run_closed_loop(
    coeffs: PlantCoefficients,
    pwm: PwmConfig = PwmConfig(),
    speed_gains: PiGains = SPEED_GAINS,
    current_gains: PiGains = CURRENT_GAINS,
    timing: LoopTiming = LoopTiming(),
    speed_ref: Profile = 100.0,
    windows: Sequence[FaultWindow] = (),
    horizon: int = 1_500_000_000,
    recorder_period: int = 15_000,
    output: OutputMode = "voltage",
    fixed_duty: float | None = None,
    initial: PlantState = PlantState(),
) -> Trace:
    """Hardware-in-the-loop run: cascade control, PWM chopper, fault gate, plant.

    ``fixed_duty`` bypasses both controllers and feeds a constant duty to the
    PWM; the controller tasks are then not scheduled.
    """
    h_ns = _check_periods(coeffs, recorder_period)
    windows = _check_windows(windows)
    ref_at = as_profile(speed_ref)
    ctrl = CascadeController(speed_gains, current_gains, timing, coeffs.Vin, output)
    gen = PwmGenerator(pwm, ctrl.duty if fixed_duty is None else fixed_duty)
    a, b, g = coeffs.a_c, coeffs.b_c, coeffs.g_c
    l, m, n = coeffs.l_c, coeffs.m_c, coeffs.n_c
    vin = coeffs.Vin
    period = gen.period_ns
    res = pwm.resolution
    triangle = pwm.carrier_shape == "triangle"
    spans = [(w.start, w.end) for w in windows]
    # im, wm, last vh, last fault flag, index of next relevant fault window
    st = [initial.im, initial.wm, 0.0, False, 0]
    iref_log: list[tuple[int, float]] = []
    rec = _Recorder()

    def speed_loop(now: int) -> None:
        iref_log.append((now, ctrl.speed_tick(ref_at(now), st[1])))

    def current_loop(now: int) -> None:
        gen.command(ctrl.current_tick(st[0]))

    def latch(now: int) -> None:
        gen.latch(now)

    def plant(now: int) -> None:
        im, wm = st[0], st[1]
        level = gen.level
        # inline of pwm_high(); kept in step with it by the tests
        twice_mid = 2 * ((now - gen.period_start) % period) + 1
        if triangle:
            if twice_mid > period:
                twice_mid = 2 * period - twice_mid
            high = twice_mid * res < level * period
        else:
            high = twice_mid * res < 2 * level * period
        k = st[4]
        while k < len(spans) and now >= spans[k][1]:
            k += 1
        st[4] = k
        faulted = k < len(spans) and spans[k][0] <= now
        if faulted:
            vh = 0.0
        else:
            vh = vin if high else -vin
        sg = (wm > 0) - (wm < 0)
        im_n = a * im + b * wm + g * vh
        wm_n = l * im + m * wm + n * sg
        if not (math.isfinite(im_n) and math.isfinite(wm_n)):
            raise _overflow(now, im_n, wm_n, vh)
        st[0], st[1], st[2], st[3] = im_n, wm_n, vh, faulted

    def record(now: int) -> None:
        rec.t.append(now)
        rec.duty.append(gen.level / res)
        rec.vh.append(st[2])
        rec.im.append(st[0])
        rec.wm.append(st[1])
        rec.fault.append(st[3])

    tasks = [
        Task("pwm_latch", period, 0, 2, latch),
        Task("plant", h_ns, 0, 3, plant, span=h_ns),
        Task("recorder", int(recorder_period), 0, 4, record, span=h_ns),
    ]
    if fixed_duty is None:
        tasks += [
            Task("speed_loop", timing.speed_period_ns, 0, 0, speed_loop),
            Task("current_loop", timing.current_period_ns, 0, 1, current_loop),
        ]
    else:
        quantize_duty(fixed_duty, res)  # validates the bound
    counters = run_schedule(TaskSchedule(tasks), SimClock(horizon))
    return rec.trace(counters=counters, iref=tuple(iref_log))
