import numpy as np
import pytest

from spinamp import dynamics as dyn
from spinamp import field_cycle as fc
from spinamp import mixing as mx
from spinamp.spin_system import FieldPoint, SpinSystem


def test_default_timeline_and_eta():
    tl = fc.build_timeline()
    assert [s.label for s in tl.segments] == ["shuttle_up", "low_dwell", "shuttle_down", "high_dwell"]
    assert [s.field for s in tl.segments] == [100, 100, 100, 4000]
    eta = fc.cycle_survival(tl, fc.MEASURED_T1)
    assert eta == pytest.approx(np.exp(-1.35 / 2040 - 3.0 / 12720), rel=1e-12)
    assert eta == pytest.approx(0.99910279, abs=1e-8)


def test_eta_per_segment_product():
    tl = fc.build_timeline()
    parts = [fc.cycle_survival(fc.Timeline((s,)), fc.MEASURED_T1) for s in tl.segments]
    assert np.prod(parts) == pytest.approx(fc.cycle_survival(tl, fc.MEASURED_T1), rel=1e-14)


def test_timeline_algebra():
    a = fc.build_timeline()
    assert (a + a).duration == pytest.approx(2 * a.duration)
    assert a.scaled(0.5).duration == pytest.approx(a.duration / 2)
    with pytest.raises(ValueError):
        fc.Timeline(())
    with pytest.raises(ValueError):
        fc.Segment(-1.0, 100.0)


def test_t1_map_lookup():
    t1 = fc.MEASURED_T1
    assert t1(50) == 2040 and t1(5000) == 12720 and t1(2050) == 2040
    log = fc.T1Map(t1.entries, "log-linear")
    assert log(100) == pytest.approx(2040) and log(4000) == pytest.approx(12720)
    assert 2040 < log(2050) < 12720
    with pytest.raises(ValueError):
        fc.T1Map(((1.0, -2.0),))
    with pytest.raises(ValueError):
        fc.T1Map(((1.0, 2.0), (1.0, 3.0)))


def test_mixing_protocol_matches_pool_model():
    cfg = fc.ProtocolConfig(m=799, eps0=0.12, n_steps=200, timeline=fc.build_timeline(),
                            t1=fc.MEASURED_T1)
    res = fc.run_protocol(cfg)
    s = res.summary()
    d = mx.amplified_difference(799, 200, 0.12, cfg.survival())
    assert s["final_delta_P"] == pytest.approx(d.delta_P, rel=1e-10)
    assert s["relative_gain"] == pytest.approx(d.relative_gain, rel=1e-10)
    assert s["relative_gain"] == pytest.approx(131.769, abs=5e-3)
    assert res.step.tolist() == list(range(201))
    assert res.eta_applied[0] == 1.0 and res.eta_applied[1] == pytest.approx(0.99910279, abs=1e-8)


def test_mixing_protocol_with_pulse_offset():
    from spinamp.pulse import hermite_shape
    p = hermite_shape(140.0, 1.92089e-5)
    on = fc.ProtocolConfig(m=50, n_steps=10, pulse=p, offset=0.0, eta=1.0)
    off = fc.ProtocolConfig(m=50, n_steps=10, pulse=p, offset=600.0, eta=1.0)
    assert on.response_factor() == pytest.approx(-1, abs=1e-6)
    assert off.response_factor() > 0.999
    assert fc.run_protocol(off).summary()["final_delta_P"] == pytest.approx(0, abs=1e-4)


def test_protocol_config_validation(H, F):
    with pytest.raises(ValueError):
        fc.ProtocolConfig(m=None, eta=1.0)
    with pytest.raises(ValueError):
        fc.ProtocolConfig(m=5)
    with pytest.raises(ValueError):
        fc.ProtocolConfig(backend="exact", eta=1.0)
    with pytest.raises(ValueError):
        fc.ProtocolConfig(backend="other", m=3, eta=1.0)


def test_exact_protocol_pair_complete_mixing(H, F):
    # equal-gamma partners at zero field, dwell of half an exchange period's odd
    # multiple -> full SWAP, so each step reproduces the pool model with m = 1
    d = 2000.0
    system = SpinSystem.star(F, H, 1, d)
    tl = fc.Timeline((fc.Segment(0.0, 4000.0), fc.Segment(1 / d, 0.0)))
    cfg = fc.ProtocolConfig(backend="exact", system=system, n_steps=3, eps0=0.1,
                            f=-1.0, timeline=tl, eta=1.0)
    res = fc.run_protocol(cfg)
    # SWAP after NOT: S and I exchange; check total conservation and baseline
    np.testing.assert_allclose(res.baseline_eps_I, 0.1, atol=1e-9)
    assert np.all(np.abs(res.f_applied[1:] + 1) < 1e-9)
    assert res.eps_I[1] == pytest.approx(-0.1, abs=1e-9)


def test_exact_protocol_relaxation(H, F):
    system = SpinSystem.star(F, H, 2, 1000.0)
    tl = fc.Timeline((fc.Segment(1e-3, 4000.0),))
    res = fc.run_protocol(fc.ProtocolConfig(backend="exact", system=system, n_steps=4,
                                            eps0=0.1, f=1.0, timeline=tl, eta=0.9))
    np.testing.assert_allclose(res.eps_I, 0.1 * 0.9 ** np.arange(5), atol=1e-12)


def test_exact_protocol_too_large(H, F):
    system = SpinSystem.star(F, H, 4, 1000.0)
    cfg = fc.ProtocolConfig(backend="exact", system=system, n_steps=1, eta=1.0,
                            timeline=fc.build_timeline(), max_spins=4)
    with pytest.raises(dyn.SystemTooLarge):
        fc.run_protocol(cfg)


def test_result_csv():
    res = fc.run_protocol(fc.ProtocolConfig(m=3, n_steps=2, eps0=0.1, eta=1.0))
    lines = res.to_csv().splitlines()
    assert lines[0] == "step,eps_S,eps_I,f_applied,eta_applied"
    assert len(lines) == 3
    assert lines[1].startswith("1,")
