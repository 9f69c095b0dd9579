import json
import math

import numpy as np
import pytest

from nsplab import cli, decay
from nsplab.cli import fmt, main, read_csv
from nsplab.config import parse_override, resolve
from nsplab.exceptions import ConfigError, IntegrationAborted

SMALL_LEMMAS = ["--override", "lemmas.n=16", "--override", "lemmas.count=8"]


def _run(tmp_path, *argv):
    out = tmp_path / "out"
    code = main(list(argv) + ["--out", str(out)])
    return code, out


def _fits(out):
    return json.loads((out / "fits.json").read_text())


class TestHeatDemo:
    def test_passes_with_expected_exponent(self, tmp_path):
        code, out = _run(tmp_path, "heat-demo")
        assert code == 0
        fits = _fits(out)
        rec = next(f for f in fits["fits"] if f["ell"] == 1 and f["s"] == 0.5)
        assert rec["exponent"] == pytest.approx(-1.5, abs=0.1)
        assert fits["verdicts"]["heat_l1_s0.5"] is True
        for name in ("manifest.json", "norms.csv", "fits.json"):
            assert (out / name).exists()
        assert any((out / "plotdata").iterdir())

    def test_csv_round_trip_reproduces_verdicts(self, tmp_path):
        code, out = _run(tmp_path, "heat-demo")
        cols = read_csv(out / "norms.csv")
        cfg = json.loads((out / "manifest.json").read_text())["config"]
        fits = _fits(out)
        for rec in fits["fits"]:
            f = decay.fit(cols["t"], cols[rec["label"]], tuple(cfg["window"]))
            assert f.exponent == pytest.approx(rec["exponent"], rel=1e-12, abs=1e-14)
            decay.compare(f, -(rec["ell"] + rec["s"]), cfg["tolerance"])
            assert f.verdict == fits["verdicts"][rec["label"]]

    @pytest.mark.parametrize("experiment,extra", [("heat-demo", []), ("lemma-suite", SMALL_LEMMAS)])
    def test_manifest_rerun_is_bit_identical(self, tmp_path, experiment, extra):
        first = tmp_path / "a"
        second = tmp_path / "b"
        main([experiment, "--out", str(first)] + extra)
        main([experiment, "--config", str(first / "manifest.json"), "--out", str(second)])
        for name in ("norms.csv", "fits.json", "manifest.json"):
            assert (first / name).read_bytes() == (second / name).read_bytes()


class TestSimulate:
    def test_zero_amplitude(self, tmp_path):
        code, out = _run(tmp_path, "simulate", "--override", "grid.n=16", "--override", "grid.L=25.132741228718345",
                         "--override", "data.delta=0", "--override", "integrator.t_end=2.0")
        assert code == 0
        cols = read_csv(out / "norms.csv")
        assert len(cols["t"]) == 6
        for name, vals in cols.items():
            if name != "t":
                assert not np.any(vals), name
        assert all(_fits(out)["verdicts"].values())
        assert (out / "energy.csv").exists()


class TestLemmaSuite:
    def test_six_constants(self, tmp_path):
        code, out = _run(tmp_path, "lemma-suite", *SMALL_LEMMAS)
        fits = _fits(out)
        constants = fits["summary"]["constants"]
        assert len(constants) == 6 and all(math.isfinite(v) and v > 0 for v in constants.values())
        assert code == (0 if fits["passed"] else 1)
        assert fits["verdicts"]["commutator_constant_f_zero"]


class TestConfigErrors:
    def test_bad_fields_exit_two(self, tmp_path, capsys):
        code, _ = _run(tmp_path, "simulate", "--override", "grid.n=20", "--override", "params.mu=-1")
        assert code == 2
        err = capsys.readouterr().err
        assert "grid.n" in err and "params.mu" in err

    def test_unknown_field(self, tmp_path, capsys):
        code, _ = _run(tmp_path, "heat-demo", "--override", "grid.size=3")
        assert code == 2 and "grid.size" in capsys.readouterr().err

    def test_config_file(self, tmp_path, capsys):
        path = tmp_path / "c.yaml"
        path.write_text("schema_version: 1\ntimes:\n  count: 1\n")
        code, _ = _run(tmp_path, "heat-demo", "--config", str(path))
        assert code == 2 and "times.count" in capsys.readouterr().err

    def test_wrong_schema_version(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("schema_version: 7\n")
        with pytest.raises(ConfigError) as exc:
            resolve("heat-demo", {"schema_version": 7})
        assert "schema_version" in exc.value.problems
        assert _run(tmp_path, "heat-demo", "--config", str(path))[0] == 2

    def test_inadmissible_data_exit_two(self, tmp_path, capsys):
        code, _ = _run(tmp_path, "simulate", "--override", "grid.n=16", "--override", "grid.L=6.283185307179586",
                       "--override", "data.delta=50")
        assert code == 2 and "density range" in capsys.readouterr().err

    def test_runtime_abort_prints_checkpoint(self, tmp_path, capsys, monkeypatch):
        ckpt = tmp_path / "abort.npz"

        def abort(cfg, out_dir=None):
            raise IntegrationAborted("RegimeError: density left [1/2, 2]", ckpt, 3.2)

        monkeypatch.setattr(cli, "run_experiment", abort)
        code, _ = _run(tmp_path, "simulate")
        err = capsys.readouterr().err
        assert code == 2 and "t=3.2" in err and str(ckpt) in err


class TestOverrides:
    def test_parsing(self):
        assert parse_override("data.delta=5e-3") == (["data", "delta"], 5e-3)
        assert parse_override("integrator.nonlinear=false") == (["integrator", "nonlinear"], False)
        assert parse_override("s_list=[0.5, 1]") == (["s_list"], [0.5, 1])
        with pytest.raises(ConfigError):
            parse_override("delta")

    def test_exponent_floats_in_files(self, tmp_path):
        from nsplab.config import load_file

        path = tmp_path / "c.yaml"
        path.write_text("data:\n  delta: 5e-3\nintegrator:\n  scheme: ETD-RK4\n")
        cfg = resolve("simulate", load_file(path))
        assert cfg["data"]["delta"] == 5e-3 and cfg["integrator"]["scheme"] == "ETD-RK4"

    def test_seed_and_precedence(self):
        cfg = resolve("simulate", {"data": {"delta": 0.02}}, ["data.delta=0.03"], seed=9)
        assert cfg["data"]["delta"] == 0.03 and cfg["seed"] == 9
        assert resolve("heat-demo")["s_list"] == [0.0, 0.5, 1.0]

    def test_float_format(self):
        assert fmt(0.1) == "0.10000000000000001"
        assert float(fmt(math.pi)) == math.pi
        assert fmt(3) == "3"
