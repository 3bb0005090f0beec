from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dcm_emulator.errors import DomainError
from dcm_emulator.pwm import (
    HIGH,
    LOW,
    OFF,
    PwmConfig,
    PwmGenerator,
    SwitchPair,
    decode_chopper,
    pwm_sample,
    quantize_duty,
)

CFG = PwmConfig()


def on_time(cfg, duty):
    return sum(pwm_sample(cfg, duty, t) == HIGH for t in range(cfg.period_ns))


def test_default_period():
    assert CFG.period_ns == 62_500


# 625 levels put edges on a 100 ns grid: on-time is round_half_up(625 d) * 100 ns
@pytest.mark.parametrize(
    "duty, expected", [(0.0, 0), (0.25, 15_600), (0.5, 31_300), (0.7, 43_800), (1.0, 62_500)]
)
@pytest.mark.parametrize("shape", ["triangle", "sawtooth"])
def test_on_time_default_resolution(shape, duty, expected):
    assert on_time(PwmConfig(carrier_shape=shape), duty) == expected


@pytest.mark.parametrize("shape", ["triangle", "sawtooth"])
def test_duty_07_exact_when_representable(shape):
    # 0.7 of a 62.5 us period is 43.75 us once 0.7 is a compare level
    cfg = PwmConfig(carrier_shape=shape, resolution=1250)
    assert on_time(cfg, 0.7) == 43_750
    assert pwm_sample(cfg, 0.7, 0) == HIGH
    # triangle: off interval centred on the carrier peak; sawtooth: off at the end
    assert pwm_sample(cfg, 0.7, 31_250 if shape == "triangle" else 62_000) == LOW


def test_triangle_is_centered():
    highs = [t for t in range(CFG.period_ns) if pwm_sample(CFG, 0.3, t) == HIGH]
    assert highs[0] == 0 and highs[-1] == CFG.period_ns - 1
    lows = [t for t in range(CFG.period_ns) if pwm_sample(CFG, 0.3, t) == LOW]
    assert lows[0] + lows[-1] == CFG.period_ns - 1


def test_complementary():
    for t in range(0, CFG.period_ns, 997):
        sw = pwm_sample(CFG, 0.42, t)
        assert sw.c0 + sw.c1 == 1


@pytest.mark.parametrize("duty", [0.0, 0.25, 0.5, 0.7, 1.0])
def test_period_average_matches_chopper_law(duty):
    # average of +-Vin over one period within one quantization step of (2d-1)Vin
    # exact rational arithmetic: the quantization error can sit right on the bound
    vin = 60
    total = sum(decode_chopper(pwm_sample(CFG, duty, t), vin) for t in range(CFG.period_ns))
    err = abs(Fraction(int(total), CFG.period_ns) - (2 * Fraction(duty).limit_denominator(100) - 1) * vin)
    assert err <= Fraction(vin, CFG.resolution)


@given(st.floats(0, 1), st.sampled_from(["triangle", "sawtooth"]))
def test_on_time_is_quantized_duty(duty, shape):
    cfg = PwmConfig(frequency=1_000_000, carrier_shape=shape, resolution=125)  # 1000 ns period
    q = quantize_duty(duty, cfg.resolution)
    assert on_time(cfg, duty) == q * cfg.period_ns // cfg.resolution


@pytest.mark.parametrize("duty, q", [(0.0, 0), (1.0, 625), (0.7, 438), (0.5, 313), (0.0008, 1), (0.0007, 0)])
def test_quantize(duty, q):
    assert quantize_duty(duty, 625) == q


def test_quantize_half_up():
    assert quantize_duty(0.5, 5) == 3  # 2.5 rounds up
    assert quantize_duty(0.3, 5) == 2  # 1.5 rounds up


@pytest.mark.parametrize("duty", [-0.1, 1.01, float("nan")])
def test_quantize_domain(duty):
    with pytest.raises(DomainError):
        quantize_duty(duty, 625)


@pytest.mark.parametrize(
    "kwargs", [dict(frequency=0), dict(frequency=3), dict(carrier_shape="sine"), dict(resolution=1)]
)
def test_config_validation(kwargs):
    with pytest.raises(DomainError):
        PwmConfig(**kwargs)


def test_offset_domain():
    with pytest.raises(DomainError):
        pwm_sample(CFG, 0.5, CFG.period_ns)


def test_decode():
    assert decode_chopper(HIGH, 60) == 60
    assert decode_chopper(LOW, 60) == -60
    assert decode_chopper(OFF, 60) == 0.0
    assert decode_chopper(SwitchPair(1, 1), 60) == 0.0


def test_switch_levels_validated():
    with pytest.raises(DomainError):
        SwitchPair(2, 0)


def test_generator_latches_only_at_boundary():
    gen = PwmGenerator(CFG, 0.2)
    gen.command(0.9)
    assert gen.duty == pytest.approx(0.2, abs=1 / 625)
    gen.latch(62_500)
    assert gen.duty == pytest.approx(0.9, abs=1 / 625)
    assert gen.latches == 1
    assert gen.sample(62_500) == HIGH
    assert gen.sample(62_500 + 31_250) == LOW
