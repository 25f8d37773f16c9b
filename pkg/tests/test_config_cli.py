import json

import pytest
from hypothesis import given, settings, strategies as st

from emtpop.cli import expand_sweep, main
from emtpop.config import (
    PRESETS,
    ConfigError,
    ScenarioConfig,
    params_from_json,
    params_to_json,
    parse_config,
    preset,
    serialize_config,
)
from emtpop.regulatory import EmtCoreParams, EpigeneticParams, HillParams


class TestConfig:
    def test_defaults(self):
        c = parse_config("")
        assert c == ScenarioConfig()
        assert (c.resolved_n_grid, c.resolved_eta_x) == (20, 1000.0)
        e = c.replace(model="entropy", initial="ep")
        assert (e.resolved_n_grid, e.resolved_eta_x) == (50, 4000.0)

    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_every_preset_is_valid(self, name):
        c = preset(name)
        assert c.name == name
        assert parse_config(serialize_config(c)) == c

    @given(gamma=st.floats(0.51, 0.99), s0=st.floats(150_000.0, 250_000.0),
           growth=st.sampled_from(["r1", "r2", "r3"]), horizon=st.floats(24.0, 5000.0),
           eta_x=st.one_of(st.none(), st.floats(1.0, 1e4)))
    @settings(max_examples=50)
    def test_roundtrip(self, gamma, s0, growth, horizon, eta_x):
        c = ScenarioConfig(gamma=gamma, s0=s0, growth=growth, horizon=horizon, eta_x=eta_x)
        assert parse_config(serialize_config(c)) == c

    @pytest.mark.parametrize("doc, message", [
        ({"gamma": 1.5}, "gamma: gamma must lie in (0.5, 1), got 1.5"),
        ({"s0": 300000}, "s0: S0 must lie in [150K, 250K], got 300000"),
        ({"foo": 1}, "unknown keys: foo"),
        ({"growth": "r9"}, "growth:"),
        ({"n_grid": 2.5}, "n_grid: expected an integer"),
        ({"joint_entropy": 1}, "joint_entropy: expected true/false"),
        ({"model": "entropy", "initial": "epi"}, "initial: for the entropy model"),
        ({"preset": "nope"}, "preset: unknown preset"),
        ({"horizon": 10, "cadence": 24}, "cadence:"),
    ])
    def test_errors_name_the_key(self, doc, message):
        with pytest.raises(ConfigError) as info:
            parse_config(json.dumps(doc))
        assert message in str(info.value)

    def test_preset_key_with_overrides(self):
        c = parse_config('{"preset": "fig4-r2-s225", "horizon": 48, "name": "x"}')
        assert (c.growth, c.s0, c.horizon, c.name, c.initial) == ("r2", 225_000.0, 48, "x", "epi_hyb_mes")

    def test_non_object_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("[1, 2]")


class TestParamsJson:
    def test_core_roundtrip(self):
        p = EmtCoreParams(g_z=120.0, h_s_mz=HillParams(9.0, 170_000.0, 3))
        assert params_from_json(params_to_json(p)) == p

    def test_epigenetic_roundtrip(self):
        p = EpigeneticParams(alpha_epi=0.2)
        assert params_from_json(params_to_json(p)) == p


class TestSweep:
    def test_cartesian_product_and_names(self):
        cs = expand_sweep({"preset": "fig3Aii", "horizon": 48,
                           "grid": {"s0": [190000, 210000], "growth": ["r1", "r3"]}})
        assert len(cs) == 4
        assert cs[0].name == "fig3Aii-s0=190000-growth=r1"
        assert {(c.s0, c.growth) for c in cs} == {(190000, "r1"), (190000, "r3"),
                                                 (210000, "r1"), (210000, "r3")}

    def test_bad_grid(self):
        with pytest.raises(ConfigError):
            expand_sweep({"grid": {"s0": []}})


class TestCli:
    def _run(self, tmp_path, doc, name="cfg.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return main(["run", str(path)])

    def test_population_run_writes_outputs_and_is_reproducible(self, tmp_path, capsys):
        doc = {"model": "population", "horizon": 48, "output_dir": str(tmp_path / "a")}
        assert self._run(tmp_path, doc) == 0
        assert "final_rho=" in capsys.readouterr().out
        files = {p.name for p in (tmp_path / "a").iterdir()}
        assert files == {"config.json", "summary.json", "series.csv", "fields.csv"}
        doc["output_dir"] = str(tmp_path / "b")
        assert self._run(tmp_path, doc) == 0
        for f in ("series.csv", "fields.csv"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
        series = (tmp_path / "a" / "series.csv").read_text().splitlines()
        assert series[0] == "t_hours,rho,fE,fH,fM,entropy" and len(series) == 4

    def test_entropy_run(self, tmp_path):
        doc = {"model": "entropy", "initial": "hyb", "horizon": 48, "output_dir": str(tmp_path / "e")}
        assert self._run(tmp_path, doc) == 0
        summary = json.loads((tmp_path / "e" / "summary.json").read_text())
        assert summary["model"] == "entropy" and summary["final_rho"] > 100

    def test_preset_run_with_output_root(self, tmp_path, monkeypatch):
        monkeypatch.setenv("EMTPOP_OUTPUT_ROOT", str(tmp_path))
        assert main(["run", "epigenetic-short"]) == 0
        summary = json.loads((tmp_path / "epigenetic-short" / "summary.json").read_text())
        assert summary["recovery_time_hours"] > 0

    def test_invalid_config_exits_two(self, tmp_path, capsys):
        assert self._run(tmp_path, {"gamma": 2}) == 2
        assert "gamma" in capsys.readouterr().err
        (tmp_path / "bad.json").write_text("{not json")
        assert main(["run", str(tmp_path / "bad.json")]) == 2
        assert main(["run", "no-such-thing"]) == 2

    def test_runtime_failure_is_reported_as_json(self, tmp_path, capsys):
        # an absurd tolerance makes the integrator give up
        doc = {"model": "population", "horizon": 24, "rtol": 1e-300, "atol": 1e-300,
               "output_dir": str(tmp_path / "f")}
        assert self._run(tmp_path, doc) == 1
        report = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert set(report) == {"run", "error", "message", "traceback"}

    def test_sweep(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("EMTPOP_OUTPUT_ROOT", str(tmp_path))
        (tmp_path / "sweep.json").write_text(json.dumps(
            {"name": "sw", "horizon": 24, "grid": {"growth": ["r1", "r2"]}}))
        assert main(["sweep", str(tmp_path / "sweep.json"), "-j", "2"]) == 0
        assert "sweep: 2/2 runs succeeded" in capsys.readouterr().out
        assert (tmp_path / "sw-growth=r2" / "summary.json").exists()

    def test_reduce_and_bifurcate(self, tmp_path):
        assert main(["reduce", "-o", str(tmp_path / "r")]) == 0
        doc = json.loads((tmp_path / "r" / "branches.json").read_text())
        assert set(doc["polynomials"]) == {"ep", "u2", "hyb", "u1", "mes"}
        assert (tmp_path / "r" / "reduced_field.csv").exists()
        assert main(["bifurcate", "-n", "5", "-o", str(tmp_path / "b.csv")]) == 0
        rows = (tmp_path / "b.csv").read_text().splitlines()
        assert rows[0] == "S,mu200,zeb,stable" and len(rows) > 5

    def test_presets_listing(self, capsys):
        assert main(["presets"]) == 0
        assert "fig3Aii" in capsys.readouterr().out


def test_hysteresis_preset_time_column_is_monotone(tmp_path, monkeypatch):
    monkeypatch.setenv("EMTPOP_OUTPUT_ROOT", str(tmp_path))
    assert main(["run", "hysteresis-homogeneous"]) == 0
    rows = (tmp_path / "hysteresis-homogeneous" / "series.csv").read_text().splitlines()
    assert rows[0] == "t_hours,snail,mu200,zeb"
    t = [float(r.split(",")[0]) for r in rows[1:]]
    assert all(b > a for a, b in zip(t, t[1:]))
    assert t[0] == 0.0 and t[-1] == 10_000.0


@pytest.mark.slow
def test_trimodal_preset_summary(tmp_path, monkeypatch):
    monkeypatch.setenv("EMTPOP_OUTPUT_ROOT", str(tmp_path))
    assert main(["run", "fig3Aii"]) == 0
    summary = json.loads((tmp_path / "fig3Aii" / "summary.json").read_text())
    assert summary["final_modes"] == 3
