import json
import math

import numpy as np
import pytest

from ghostslit.cli import main
from ghostslit.config import ConfigError, load_config, parse_config
from ghostslit.io import (
    read_histogram_csv,
    read_pgm,
    read_widths_csv,
    sha256_file,
    write_histogram_csv,
    write_pgm,
    write_widths_csv,
)
from ghostslit.histogram import DetectionHistogram, UniformBins
from ghostslit.montecarlo import ScanRow

SMALL = """
[slit]
width_um = 10.0

[run]
n_pairs = 200000
seed = 7
min_triggers = 20000
batch_size = 65536

[planes]
scan_z_mm = [0.0, 10.0, 20.0, 30.0, 40.0]
audit_z_mm = [0.0]
"""


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def run(cmd, cfg, out, *extra):
    return main([cmd, "--config", str(cfg), "--out", str(out), *extra])


def manifest_matches_disk(out):
    man = json.loads((out / "manifest.json").read_text())
    listed = {f["path"] for f in man["files"]}
    on_disk = {p.name for p in out.iterdir()} - {"manifest.json"}
    assert listed == on_disk
    for f in man["files"]:
        assert sha256_file(out / f["path"]) == f["sha256"]
    return man


class TestAnalytic:
    def test_reference_report(self, tmp_path):
        assert main(["analytic", "--out", str(tmp_path)]) == 0
        rep = json.loads((tmp_path / "analytic.json").read_text())
        assert rep["product_hbar"] == 0.5
        assert rep["sigma_q_um"] == pytest.approx(9.206, abs=5e-4)
        assert rep["conditional_position_sd_um"] == pytest.approx(9.2041, abs=1e-4)
        assert rep["epr_regime"] and rep["warnings"] == []
        man = manifest_matches_disk(tmp_path)
        assert [f["kind"] for f in man["files"]] == ["report"]

    def test_tiny_crystal_warns(self, tmp_path, capsys):
        cfg = write(tmp_path, "[source]\ncrystal_length_um = 1.0\n")
        assert run("analytic", cfg, tmp_path / "out") == 0
        rep = json.loads((tmp_path / "out" / "analytic.json").read_text())
        assert rep["sigma_q_um"] == pytest.approx(0.168, abs=5e-4)
        assert rep["epr_regime"]
        assert len(rep["warnings"]) == 1
        assert "EPR-regime flag" in capsys.readouterr().err

    def test_negative_pump_width_writes_nothing(self, tmp_path, capsys):
        cfg = write(tmp_path, "[source]\npump_sigma_um = -450.0\n")
        out = tmp_path / "out"
        assert run("analytic", cfg, out) == 2
        assert not out.exists()
        assert "source.pump_sigma_um" in capsys.readouterr().err


class TestConfig:
    def test_unknown_key_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="slit.height_um"):
            load_config(write(tmp_path, "[slit]\nheight_um = 3.0\n"))
        with pytest.raises(ConfigError, match="extras"):
            parse_config({"extras": {}})

    def test_unknown_key_exit_code(self, tmp_path):
        cfg = write(tmp_path, "[run]\nspeed = 3\n")
        assert run("nearfield", cfg, tmp_path / "out") == 2
        assert not (tmp_path / "out").exists()

    def test_digest_ignores_key_order(self, tmp_path):
        a = load_config(write(tmp_path, "[run]\nseed = 5\nn_pairs = 10\n[slit]\nwidth_um = 5.0\n", "a.toml"))
        b = load_config(write(tmp_path, "[slit]\nwidth_um = 5.0\n[run]\nn_pairs = 10\nseed = 5\n", "b.toml"))
        assert a.digest() == b.digest()
        assert a.digest() != parse_config({"run": {"seed": 6, "n_pairs": 10}, "slit": {"width_um": 5.0}}).digest()

    def test_overrides(self):
        cfg = parse_config({"run": {"seed": 1}}, {"seed": 99, "n_pairs": None})
        assert cfg.run.seed == 99 and cfg.run.n_pairs == 1_000_000

    def test_bad_toml(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write(tmp_path, "[run\n"))
        with pytest.raises(ConfigError, match="no such file"):
            load_config(tmp_path / "missing.toml")

    def test_units(self):
        cfg = parse_config({"planes": {"focal_length_mm": 75.0}})
        assert cfg.farfield_plane().f == 75_000.0

    def test_reference_config_file(self):
        from pathlib import Path

        cfg = load_config(Path(__file__).parents[1] / "configs" / "reference.toml")
        assert cfg.state().sigma_q == pytest.approx(9.206, abs=5e-4)


class TestCampaigns:
    def test_scan_table(self, tmp_path):
        cfg = write(tmp_path, SMALL)
        out = tmp_path / "out"
        assert run("scan", cfg, out) == 0
        rows = read_widths_csv(out / "widths.csv")
        assert [r.z for r in rows] == [0.0, 10_000.0, 20_000.0, 30_000.0, 40_000.0]
        assert all(r.cond_sd < r.singles_sd for r in rows)
        assert np.all(np.diff([r.cond_sd for r in rows]) > 0)
        manifest_matches_disk(out)

    def test_farfield_ratio(self, tmp_path):
        cfg = write(tmp_path, SMALL.replace("min_triggers = 20000", "min_triggers = 1000000"))
        out = tmp_path / "out"
        assert run("farfield", cfg, out, "--pairs", "1000000") == 0
        rep = json.loads((out / "farfield.json").read_text())
        assert rep["n_triggers"] >= 10**6
        assert 0.99 <= rep["width_ratio"] <= 1.01
        coinc = read_histogram_csv(out / "farfield_coincidence.csv")
        singles = read_histogram_csv(out / "farfield_singles.csv")
        assert coinc.total == rep["n_triggers"]
        assert singles.total <= rep["n_pairs"]

    def test_nearfield_outputs(self, tmp_path):
        out = tmp_path / "out"
        assert run("nearfield", write(tmp_path, SMALL), out) == 0
        man = manifest_matches_disk(out)
        kinds = sorted({f["kind"] for f in man["files"]})
        assert kinds == ["frame", "histogram", "report"]
        hist = read_histogram_csv(out / "nearfield_coincidence.csv")
        frame = read_pgm(out / "nearfield_coincidence.pgm")
        assert frame.shape == (64, hist.counts.size)
        np.testing.assert_array_equal(frame.sum(axis=0), hist.counts)
        rep = json.loads((out / "nearfield.json").read_text())
        assert rep["coincidence"]["sd"] == pytest.approx(math.hypot(9.2041, 10 / math.sqrt(12)), rel=0.03)

    def test_same_seed_is_byte_identical(self, tmp_path):
        cfg = write(tmp_path, SMALL)
        for cmd in ("nearfield", "report"):
            a, b = tmp_path / f"{cmd}-a", tmp_path / f"{cmd}-b"
            assert run(cmd, cfg, a) == 0 and run(cmd, cfg, b) == 0
            names = sorted(p.name for p in a.iterdir())
            assert names == sorted(p.name for p in b.iterdir())
            for n in names:
                assert (a / n).read_bytes() == (b / n).read_bytes(), n

    def test_seed_flag_changes_output(self, tmp_path):
        cfg = write(tmp_path, SMALL)
        assert run("nearfield", cfg, tmp_path / "a") == 0
        assert run("nearfield", cfg, tmp_path / "b", "--seed", "8") == 0
        a = (tmp_path / "a" / "nearfield_coincidence.csv").read_bytes()
        assert a != (tmp_path / "b" / "nearfield_coincidence.csv").read_bytes()
        assert json.loads((tmp_path / "b" / "manifest.json").read_text())["seed"] == 8

    def test_report(self, tmp_path):
        out = tmp_path / "out"
        assert run("report", write(tmp_path, SMALL), out) == 0
        rep = json.loads((out / "report.json").read_text())
        assert rep["product_hbar"] == pytest.approx(0.5 * math.hypot(9.2041, 10 / math.sqrt(12)) / 9.2041, rel=0.03)
        assert not rep["violation"]
        assert rep["failed_invariants"] == []
        manifest_matches_disk(out)

    def test_audit_passes(self, tmp_path):
        out = tmp_path / "out"
        assert run("audit", write(tmp_path, SMALL), out) == 0
        rep = json.loads((out / "audit.json").read_text())
        assert len(rep["planes"]) == 4
        assert all(p["passed"] for p in rep["planes"])

    def test_unreachable_slit_fails_audit(self, tmp_path, capsys):
        text = SMALL.replace("width_um = 10.0", "width_um = 10.0\ncenter_um = 100000.0").replace(
            "min_triggers = 20000", "min_triggers = 0")
        out = tmp_path / "out"
        assert run("nearfield", write(tmp_path, text), out) == 3
        assert "empty-coincidence" in capsys.readouterr().err
        manifest_matches_disk(out)


class TestRoundTrip:
    def test_histogram_csv(self, tmp_path):
        rng = np.random.default_rng(0)
        bins = UniformBins.centred(1.37, 50.0, 0.4603)
        h = DetectionHistogram(bins.edges, bins.bincount(rng.normal(1.0, 9.2, 10**5)), 10**5, "coincidence")
        write_histogram_csv(tmp_path / "h.csv", h)
        back = read_histogram_csv(tmp_path / "h.csv", kind="coincidence", n_trials=10**5)
        np.testing.assert_array_equal(back.counts, h.counts)
        np.testing.assert_allclose(back.centers, h.centers, rtol=0, atol=1e-9)

    def test_widths_csv(self, tmp_path):
        rows = [ScanRow(1000.0 * z, 9.2 + z, 0.01, 225.0 + z, 0.04) for z in (0.0, 10.0, 40.0)]
        write_widths_csv(tmp_path / "w.csv", rows)
        assert read_widths_csv(tmp_path / "w.csv") == rows

    def test_pgm_scaling(self, tmp_path):
        img = np.array([[0, 1], [70000, 140000]])
        assert write_pgm(tmp_path / "f.pgm", img) == 3
        np.testing.assert_array_equal(read_pgm(tmp_path / "f.pgm"), img // 3)
        assert write_pgm(tmp_path / "g.pgm", img[:1]) == 1
        np.testing.assert_array_equal(read_pgm(tmp_path / "g.pgm"), img[:1])
