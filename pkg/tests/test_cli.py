import csv
import json
import os
import shutil

import numpy as np
import pytest

from spinamp.cli import main

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def cfg_path(name):
    return os.path.abspath(os.path.join(CONFIGS, name))


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float) if len(rows) > 1 else np.empty((0, len(rows[0])))


def run(tmp_path, *argv):
    return main(["--out", str(tmp_path), *argv])


# --- gain -------------------------------------------------------------------------

def test_gain_closed(tmp_path):
    assert run(tmp_path, "gain", "--m", "799", "--n-max", "200", "--mode", "closed") == 0
    header, data = read_csv(tmp_path / "gain_m799_closed.csv")
    assert header == ["N", "G"]
    assert data[:, 0].tolist() == list(range(201))
    assert data[200, 1] == pytest.approx(157.3, abs=0.05)


def test_gain_m1(tmp_path):
    assert run(tmp_path, "gain", "--m", "1", "--n-max", "5") == 0
    _, data = read_csv(tmp_path / "gain_m1_closed.csv")
    assert data[0, 1] == 0
    np.testing.assert_array_equal(data[1:, 1], 0.5)


def test_gain_iterate(tmp_path):
    assert run(tmp_path, "gain", "--m", "799", "--n-max", "200", "--mode", "iterate",
               "--eta", "0.9991", "--eps0", "0.12") == 0
    header, data = read_csv(tmp_path / "gain_m799_iterate.csv")
    assert header == ["N", "delta_P", "relative_gain"]
    assert data[40, 2] == pytest.approx(36.8, abs=0.05)


def test_gain_invalid_m(tmp_path, capsys):
    assert run(tmp_path, "gain", "--m", "0", "--n-max", "5") == 2
    assert "protocol.m" in capsys.readouterr().err


def test_global_flags_after_command(tmp_path):
    assert main(["gain", "--m", "3", "--n-max", "2", "--out", str(tmp_path), "--precision", "3"]) == 0
    text = (tmp_path / "gain_m3_closed.csv").read_text()
    assert text.splitlines()[3] == "2,1.12"  # 1.125 rounds half-to-even


# --- spectrum / pulse-profile ---------------------------------------------------------

def spectrum(tmp_path, peak, n, name):
    out = tmp_path / name
    assert main(["--out", str(out), "spectrum", "--family", "hermite", "--peak", str(peak),
                 "--offsets=-400:400:2", "--m", "799", "--n", str(n), "--eps0", "0.12",
                 "--eta", "0.9991"]) == 0
    header, data = read_csv(out / "spectrum.csv")
    assert header == ["offset_hz", "pool_polarization"]
    return data


def dip_stats(data, n):
    baseline = 0.12 * 0.9991**n
    dip = baseline - data[:, 1]
    k0 = int(np.argmax(dip))
    half = np.abs(data[:, 0] - data[k0, 0])[dip <= dip[k0] / 2].min()
    return dip[k0], half, baseline


def test_spectrum_width_and_depth(tmp_path):
    wide = spectrum(tmp_path, 140, 200, "w")
    narrow200 = spectrum(tmp_path, 45, 200, "n200")
    narrow40 = spectrum(tmp_path, 45, 40, "n40")
    d_wide, h_wide, _ = dip_stats(wide, 200)
    d200, h200, base = dip_stats(narrow200, 200)
    d40, _, _ = dip_stats(narrow40, 40)
    assert h_wide > h200
    assert d200 > d40
    far = np.abs(narrow200[:, 0]) >= 300e3
    np.testing.assert_allclose(narrow200[far, 1], base, atol=1e-6)


def test_pulse_profile(tmp_path):
    assert run(tmp_path, "pulse-profile", "--family", "constant", "--peak", "100",
               "--duration", "5e-6", "--offsets=-10,0,10") == 0
    header, data = read_csv(tmp_path / "profile.csv")
    assert header == ["offset_khz", "residual_mz"]
    assert data[1, 1] == pytest.approx(-1)
    header, pulse = read_csv(tmp_path / "pulse.csv")
    assert header == ["t_s", "amp_khz", "phase_rad"]


def test_calibration_failure_exit_3(tmp_path, capsys):
    assert run(tmp_path, "pulse-profile", "--peak", "140", "--set", "pulse.beta=2.0") == 3
    assert "no inversion" in capsys.readouterr().err


# --- exact ---------------------------------------------------------------------------

def test_exact_pair_period(tmp_path):
    assert run(tmp_path, "exact", cfg_path("pair_exchange.ini"),
               "--set", "protocol.sample_interval_s=1e-7") == 0
    header, data = read_csv(tmp_path / "pair_exchange.csv")
    assert header == ["t_s", "S_z", "I1_z", "total_Iz"]
    t, s = data[:, 0], data[:, 1]
    # first minimum of S_z then first return to maximum
    k_min = int(np.argmin(s[t < 1.5e-3]))
    k_max = k_min + int(np.argmax(s[k_min:]))
    period = t[k_max]
    d = 2000.0
    assert period == pytest.approx(2 / d, rel=1e-3)
    assert s[k_min] == pytest.approx(0.0, abs=1e-3)


def test_exact_high_field(tmp_path):
    assert run(tmp_path, "exact", cfg_path("high_field.ini")) == 0
    _, data = read_csv(tmp_path / "high_field.csv")
    assert np.ptp(data[:, 1]) <= 1e-8
    assert np.ptp(data[:, 2]) > 1e-3


def test_exact_missing_species(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[system]\nsites =\n    F S\n    H I\n\n[protocol]\nsegments = 0.001 0\n"
                   "sample_interval_s = 1e-4\n")
    assert run(tmp_path, "exact", str(bad)) == 2
    assert "species" in capsys.readouterr().err


def test_exact_unknown_key_line_number(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[protocol]\nsegments = 0.001 0\nsampel = 3\n")
    assert run(tmp_path, "exact", str(bad)) == 2
    err = capsys.readouterr().err
    assert "bad.ini:3" in err and "sampel" in err


def test_exact_too_large_exit_2(tmp_path, capsys):
    assert run(tmp_path, "exact", cfg_path("high_field.ini"), "--set", "protocol.max_spins=3") == 2
    assert "system too large" in capsys.readouterr().err


# --- protocol / sweep -------------------------------------------------------------------

def test_protocol_f19_pool(tmp_path):
    assert run(tmp_path, "protocol", cfg_path("f19_pool.ini")) == 0
    summary = json.loads((tmp_path / "f19_pool_summary.json").read_text())
    assert summary["relative_gain"] == pytest.approx(131.77, abs=0.01)
    header, data = read_csv(tmp_path / "f19_pool.csv")
    assert header == ["step", "eps_S", "eps_I", "f_applied", "eta_applied"]
    assert data.shape == (200, 5)


def test_protocol_exact_backend(tmp_path):
    assert run(tmp_path, "protocol", cfg_path("exact_protocol.ini")) == 0
    summary = json.loads((tmp_path / "exact_protocol_summary.json").read_text())
    assert summary["final_delta_P"] > 0


def test_sweep_n(tmp_path):
    assert run(tmp_path, "sweep", cfg_path("f19_pool.ini"), "--set", "protocol.eta=0.9991",
               "--param", "protocol.n_steps=40,200", "--jobs", "2") == 0
    gains = [json.loads((tmp_path / f"protocol__n_steps={n}.json").read_text())["relative_gain"]
             for n in (40, 200)]
    assert gains == [pytest.approx(36.8, abs=0.05), pytest.approx(131.7, abs=0.05)]
    lines = (tmp_path / "sweep_index.csv").read_text().splitlines()
    assert lines[0] == "n_steps,file,final_delta_P,relative_gain,gain"
    assert [ln.split(",")[1] for ln in lines[1:]] == ["protocol__n_steps=40.csv",
                                                    "protocol__n_steps=200.csv"]


def test_sweep_m_half(tmp_path):
    assert run(tmp_path, "sweep", cfg_path("f19_pool.ini"), "--set", "protocol.eta=1",
               "--set", "protocol.n_steps=m/2", "--param", "protocol.m=99,799") == 0
    for m in (99, 799):
        g = json.loads((tmp_path / f"protocol__m={m}.json").read_text())["gain"]
        assert g / m == pytest.approx((1 - np.exp(-1)) / 2, rel=1e-2)


def test_sweep_2d_and_jobs_deterministic(tmp_path):
    args = ["sweep", cfg_path("f19_pool.ini"), "--param", "protocol.n_steps=10:30:10",
            "--param", "protocol.m=9,99"]
    assert main(["--out", str(tmp_path / "a"), "--jobs", "1", *args]) == 0
    assert main(["--out", str(tmp_path / "b"), "--jobs", "3", *args]) == 0
    names = sorted(os.listdir(tmp_path / "a"))
    assert len(names) == 2 * 6 + 1
    assert names == sorted(os.listdir(tmp_path / "b"))
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()


@pytest.mark.parametrize("grid", ["", "5:1:1", " , "])
def test_sweep_empty_or_bad_grid(tmp_path, capsys, grid):
    code = run(tmp_path, "sweep", cfg_path("f19_pool.ini"), "--param", f"protocol.n_steps={grid}")
    assert code == 2
    if grid.strip(" ,") == "":
        assert "empty sweep" in capsys.readouterr().err


def test_sweep_unknown_key(tmp_path):
    assert run(tmp_path, "sweep", cfg_path("f19_pool.ini"), "--param", "protocol.nope=1,2") == 2


# --- eta ------------------------------------------------------------------------------

def test_eta(tmp_path, capsys):
    assert run(tmp_path, "eta") == 0
    assert "eta = 0.999102789" in capsys.readouterr().out
    report = json.loads((tmp_path / "eta.json").read_text())
    assert len(report["segments"]) == 4


def test_eta_bad_t1(tmp_path):
    assert run(tmp_path, "eta", "--t1", "100") == 2


# --- determinism ------------------------------------------------------------------------

@pytest.mark.parametrize("argv", [
    ["gain", "--m", "799", "--n-max", "50", "--mode", "iterate"],
    ["eta"],
    ["protocol", cfg_path("exact_protocol.ini")],
    ["exact", cfg_path("high_field.ini")],
    ["pulse-profile", "--peak", "140", "--offsets=-300:300:10"],
])
def test_reruns_byte_identical(tmp_path, argv):
    assert main(["--out", str(tmp_path / "1"), *argv]) == 0
    assert main(["--out", str(tmp_path / "2"), *argv]) == 0
    names = sorted(os.listdir(tmp_path / "1"))
    assert names and names == sorted(os.listdir(tmp_path / "2"))
    for n in names:
        assert (tmp_path / "1" / n).read_bytes() == (tmp_path / "2" / n).read_bytes()
