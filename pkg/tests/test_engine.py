import numpy as np
import pytest

from dcm_emulator.control import CascadeController
from dcm_emulator.engine import (
    FaultWindow,
    SimClock,
    Task,
    TaskSchedule,
    Trace,
    TraceRecord,
    as_profile,
    fault_gate,
    recorder_decimate,
    run_closed_loop,
    run_open_loop,
    run_schedule,
)
from dcm_emulator.errors import DomainError, NumericOverflowError
from dcm_emulator.motor import PlantCoefficients, PlantState, chopper_voltage, discrete_step, steady_state
from dcm_emulator.pwm import HIGH, LOW, OFF, PwmConfig, PwmGenerator, decode_chopper, pwm_sample


def reference_closed_loop(coeffs, horizon, fixed_duty=None, windows=(), speed_ref=100.0):
    """Straight nanosecond loop over the public single-step functions."""
    cfg = PwmConfig()
    ctrl = CascadeController()
    gen = PwmGenerator(cfg, ctrl.duty if fixed_duty is None else fixed_duty)
    s, vh, flt = PlantState(), 0.0, False
    rows = []
    for t in range(0, horizon, 1000):
        # carrier boundaries strictly between plant steps latch before this step's ticks
        boundary = t - t % cfg.period_ns
        if t - 1000 < boundary < t:
            gen.latch(boundary)
        if fixed_duty is None and t % 20_000_000 == 0:
            ctrl.speed_tick(speed_ref, s.wm)
        if fixed_duty is None and t % 300_000 == 0:
            gen.command(ctrl.current_tick(s.im))
        if t % cfg.period_ns == 0:
            gen.latch(t)
        sw = pwm_sample(cfg, gen.level / cfg.resolution, t % cfg.period_ns)
        gated = fault_gate(sw, t, windows)
        flt = gated == OFF
        vh = decode_chopper(gated, coeffs.Vin)
        s = discrete_step(coeffs, s, vh)
        if t % 15_000 == 0:
            rows.append(TraceRecord(t, gen.level / cfg.resolution, vh, s.im, s.wm, flt))
    return Trace.from_records(rows)


def assert_same(a, b):
    for col in ("t", "duty", "vh", "im", "wm", "fault"):
        np.testing.assert_array_equal(getattr(a, col), getattr(b, col), err_msg=col)


class TestClockAndSchedule:
    def test_clock_monotone(self):
        c = SimClock(100)
        c.advance_to(50)
        with pytest.raises(DomainError):
            c.advance_to(10)
        with pytest.raises(DomainError):
            c.advance_to(101)

    def test_rank_order_at_shared_instant(self):
        log = []
        tasks = [Task(n, p, 0, r, lambda t, n=n: log.append((t, n)))
                 for n, p, r in (("late", 4, 2), ("early", 2, 0), ("mid", 4, 1))]
        counts = run_schedule(TaskSchedule(tasks), SimClock(8))
        assert log[:3] == [(0, "early"), (0, "mid"), (0, "late")]
        assert log[3] == (2, "early")
        assert counts == {"early": 4, "mid": 2, "late": 2}

    def test_span_excludes_steps_crossing_horizon(self):
        counts = run_schedule(TaskSchedule([Task("p", 3, 0, 0, lambda t: None, span=3)]), SimClock(10))
        assert counts == {"p": 3}  # 0, 3, 6; 9 + 3 > 10

    def test_duplicate_ranks_and_names(self):
        f = lambda t: None  # noqa: E731
        with pytest.raises(DomainError):
            TaskSchedule([Task("a", 1, 0, 0, f), Task("b", 1, 0, 0, f)])
        with pytest.raises(DomainError):
            TaskSchedule([Task("a", 1, 0, 0, f), Task("a", 1, 0, 1, f)])

    def test_bad_period(self):
        with pytest.raises(DomainError):
            Task("a", 0, 0, 0, lambda t: None)


class TestFaultGate:
    W = [FaultWindow(1_000_000_000, 30_000)]

    @pytest.mark.parametrize(
        "t, sw, expected",
        [(1_000_010_000, HIGH, OFF), (999_999_000, HIGH, HIGH), (1_000_030_000, LOW, LOW), (1_000_000_000, LOW, OFF)],
    )
    def test_examples(self, t, sw, expected):
        assert fault_gate(sw, t, self.W) == expected

    def test_gated_voltage_is_zero(self):
        assert decode_chopper(fault_gate(HIGH, 1_000_010_000, self.W), 60.0) == 0.0

    def test_overlap_rejected(self, ref_coeffs):
        with pytest.raises(DomainError):
            run_closed_loop(ref_coeffs, windows=[FaultWindow(0, 10), FaultWindow(5, 10)], horizon=1000)

    def test_window_validation(self):
        with pytest.raises(DomainError):
            FaultWindow(-1, 5)
        with pytest.raises(DomainError):
            FaultWindow(0, 0)


class TestTrace:
    def test_decimate_count(self):
        n = 4500
        tr = Trace.from_columns(np.arange(n) * 1000, np.zeros(n), np.zeros(n), np.zeros(n), np.zeros(n), np.zeros(n))
        d = recorder_decimate(tr, 15)
        assert len(d) == 300
        assert d.t[0] == 0 and d.t[1] == 15_000

    def test_decimate_bad_factor(self):
        tr = Trace.from_columns([0], [0], [0], [0], [0], [False])
        with pytest.raises(DomainError):
            tr.decimate(0)

    def test_column_checks(self):
        with pytest.raises(DomainError):
            Trace.from_columns([0, 1], [0], [0], [0], [0], [0])
        with pytest.raises(DomainError):
            Trace.from_columns([1, 1], [0, 0], [0, 0], [0, 0], [0, 0], [0, 0])

    def test_record_round_trip(self):
        r = TraceRecord(5, 0.5, 0.0, 1.0, 2.0, True)
        assert Trace.from_records([r])[0] == r


class TestProfile:
    def test_steps(self):
        f = as_profile([(10, 0.7), (0, 0.5)])
        assert (f(0), f(9), f(10), f(10_000)) == (0.5, 0.5, 0.7, 0.7)

    def test_constant_and_callable(self):
        assert as_profile(0.3)(123) == 0.3
        assert as_profile(lambda t: t * 2.0)(4) == 8.0

    def test_empty(self):
        with pytest.raises(DomainError):
            as_profile([])


class TestOpenLoop:
    def test_matches_discrete_step(self, ref_coeffs):
        tr = run_open_loop(ref_coeffs, [(0, 0.5), (30_000, 0.7)], horizon=90_000, recorder_period=1000)
        s = PlantState()
        for k, t in enumerate(range(0, 90_000, 1000)):
            d = 0.5 if t < 30_000 else 0.7
            s = discrete_step(ref_coeffs, s, chopper_voltage(d, 60.0))
            assert (tr.t[k], tr.duty[k], tr.im[k], tr.wm[k]) == (t, d, s.im, s.wm)
        assert tr.counters == {"plant": 90, "recorder": 90}

    def test_converges_to_fixed_point(self, ref_coeffs):
        tr = run_open_loop(ref_coeffs, 0.7, horizon=500_000_000, recorder_period=1_000_000)
        ss = steady_state(ref_coeffs, 24.0)
        assert tr.wm[-1] == pytest.approx(ss.wm, rel=1e-6)

    def test_overflow_is_raised(self):
        c = PlantCoefficients(2.0, 0.0, 1.0, 0.0, 1.0, 0.0, 60.0, 1e-6)
        with pytest.raises(NumericOverflowError):
            run_open_loop(c, 1.0, horizon=2_000_000)

    def test_step_must_be_whole_ns(self):
        c = PlantCoefficients(0.9, 0.0, 1.0, 0.0, 1.0, 0.0, 60.0, 1.5e-9)
        with pytest.raises(DomainError):
            run_open_loop(c, 0.5, horizon=1000)


class TestClosedLoopEquivalence:
    def test_fixed_duty_matches_reference(self, ref_coeffs):
        w = [FaultWindow(200_000, 30_000)]
        fast = run_closed_loop(ref_coeffs, fixed_duty=0.7, windows=w, horizon=1_000_000)
        assert_same(fast, reference_closed_loop(ref_coeffs, 1_000_000, fixed_duty=0.7, windows=w))

    def test_controlled_matches_reference(self, ref_coeffs):
        w = [FaultWindow(1_000_000, 60_000), FaultWindow(2_000_000, 15_000)]
        fast = run_closed_loop(ref_coeffs, windows=w, horizon=3_000_000)
        assert_same(fast, reference_closed_loop(ref_coeffs, 3_000_000, windows=w))

    def test_sawtooth_inline_matches_pwm_sample(self, ref_coeffs):
        cfg = PwmConfig(carrier_shape="sawtooth")
        tr = run_closed_loop(ref_coeffs, pwm=cfg, fixed_duty=0.3, horizon=125_000, recorder_period=1000)
        expected = [decode_chopper(pwm_sample(cfg, 0.3, t % 62_500), 60.0) for t in range(0, 125_000, 1000)]
        np.testing.assert_array_equal(tr.vh, expected)

    def test_repeatable(self, ref_coeffs):
        a = run_closed_loop(ref_coeffs, horizon=2_000_000)
        b = run_closed_loop(ref_coeffs, horizon=2_000_000)
        assert_same(a, b)
        assert a.iref == b.iref

    def test_fault_only_changes_trace_from_onset(self, ref_coeffs):
        nom = run_closed_loop(ref_coeffs, horizon=4_000_000)
        flt = run_closed_loop(ref_coeffs, windows=[FaultWindow(2_000_000, 60_000)], horizon=4_000_000)
        pre = nom.t < 2_000_000
        np.testing.assert_array_equal(nom.im[pre], flt.im[pre])
        assert flt.fault.any() and not flt.fault[pre].any()
        assert np.all(flt.vh[flt.fault] == 0.0)


def test_rate_counts(ref_coeffs):
    tr = run_closed_loop(ref_coeffs, horizon=1_000_000_000, recorder_period=1_000_000)
    c = tr.counters
    assert c["plant"] == 1_000_000
    assert c["pwm_latch"] == 16_000
    assert c["speed_loop"] == 50
    assert c["current_loop"] in (3333, 3334)
    assert c["recorder"] == 1000
