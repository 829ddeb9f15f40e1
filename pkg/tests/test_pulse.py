import numpy as np
import pytest

from spinamp import pulse as pl

T140 = 1.92089e-5
T45 = 5.97609e-5


def test_constant_pulse_pi_flip():
    M = pl.bloch_response(pl.constant_pulse(100.0, 5e-6), 0.0)
    np.testing.assert_allclose(M, [0, 0, -1], atol=1e-12)


def test_constant_pulse_rabi_oracle():
    # M_z = 1 - 2 (w1/w)^2 sin^2(pi w t)
    w1, d, t = 50.0, 50.0, 10e-6
    w = np.hypot(w1, d)
    mz = pl.bloch_response(pl.constant_pulse(w1, t), d)[2]
    assert mz == pytest.approx(1 - 2 * (w1 / w) ** 2 * np.sin(np.pi * w * 1e3 * t) ** 2, abs=1e-12)


def test_carrier_shift_equivalent_to_offset():
    p = pl.hermite_shape(140.0, T140)
    a = pl.bloch_response(p, 30.0)
    b = pl.bloch_response(p.with_carrier(-30.0), 0.0)
    np.testing.assert_allclose(a, b, atol=1e-14)


def test_response_is_unit_vector():
    p = pl.hermite_shape(140.0, T140)
    M = pl.bloch_response_grid(p, np.linspace(-500, 500, 41))
    np.testing.assert_allclose(np.linalg.norm(M, axis=1), 1.0, atol=1e-12)


def test_hermite_envelope_shape():
    env = pl.hermite_envelope(256)
    assert np.abs(env).max() == pytest.approx(1.0)
    np.testing.assert_array_equal(env, env[::-1])
    # lobes beyond the zero crossing at tau = 1/sqrt(beta) are negative
    assert env[0] < 0 and env.min() < 0


def test_hermite_shape_validation():
    with pytest.raises(ValueError):
        pl.hermite_shape(140.0, T140, n_samples=8)
    with pytest.raises(ValueError):
        pl.hermite_shape(-1.0, T140)
    with pytest.raises(ValueError):
        pl.hermite_shape(140.0, 0.0)


def test_pulse_bookkeeping():
    p = pl.hermite_shape(140.0, T140, n_samples=64)
    assert p.n_samples == 64
    assert p.duration == pytest.approx(T140)
    q = p.scaled(2.0)
    assert q.duration == pytest.approx(T140 / 2)
    assert q.amplitudes.max() == pytest.approx(280.0)
    with pytest.raises(ValueError):
        p.amplitudes[0] = 1.0
    with pytest.raises(ValueError):
        pl.ShapedPulse([1.0, np.nan], 0.0, 1e-6)


def test_scaling_preserves_on_resonance_rotation():
    p = pl.hermite_shape(140.0, T140)
    for c in (0.5, 3.0):
        np.testing.assert_allclose(pl.bloch_response(p.scaled(c), 0.0),
                                   pl.bloch_response(p, 0.0), atol=1e-12)


def test_calibration_values():
    assert pl.calibrate_duration("constant", 100.0) == pytest.approx(5e-6, rel=1e-6)
    T = pl.calibrate_duration("hermite", 140.0)
    assert T == pytest.approx(T140, rel=1e-4)
    assert pl.bloch_response(pl.hermite_shape(140.0, T), 0.0)[2] == pytest.approx(-1, abs=1e-6)
    T2 = pl.calibrate_duration("hermite", 45.0)
    assert T2 == pytest.approx(T45, rel=1e-4)
    # same envelope, so the on-resonance angle scales with peak x duration
    assert T2 / T == pytest.approx(140 / 45, rel=1e-6)


def test_calibration_failure():
    with pytest.raises(pl.CalibrationError):
        pl.calibrate_duration("hermite", 140.0, beta=2.0)


def test_selectivity_140khz():
    p = pl.hermite_shape(140.0, T140)
    offsets = np.concatenate([np.arange(-1000, -299, 5), np.arange(300, 1001, 5)])
    prof = pl.excitation_profile(p, offsets)
    assert np.max(1 - prof.residual_mz) <= 2e-3


def test_45khz_narrower_than_140khz():
    wide = pl.excitation_profile(pl.hermite_shape(140.0, T140), np.arange(0, 301, 1.0))
    narrow = pl.excitation_profile(pl.hermite_shape(45.0, T45), np.arange(0, 301, 1.0))

    def half_width(prof):
        k = np.argmax(prof.residual_mz >= 0.0)
        return prof.offsets[k]

    assert half_width(narrow) < half_width(wide) / 2.5


def test_profile_interpolation_and_errors():
    prof = pl.excitation_profile(pl.constant_pulse(100.0, 5e-6), [-10.0, 0.0, 10.0])
    assert prof.response_factor(0.0) == pytest.approx(-1)
    assert len(prof) == 3
    with pytest.raises(ValueError):
        pl.excitation_profile(pl.constant_pulse(100.0, 5e-6), [])
    with pytest.raises(ValueError):
        pl.make_pulse("gaussian", 1.0, 1e-6)
