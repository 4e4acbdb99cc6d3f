import json
from pathlib import Path

import numpy as np
import pytest

from freeatoms import cli
from freeatoms.atoms import AtomReport
from freeatoms.linearize import LinearPencil
from freeatoms.measure import SpectralMeasure


BERN_PM1 = {
    "atoms": [{"x": -1.0, "m": 0.5}, {"x": 1.0, "m": 0.5}],
    "continuous": [],
    "support": [-1, 1],
}
PROJ = {
    "atoms": [{"x": 0.0, "m": 0.5}, {"x": 1.0, "m": 0.5}],
    "continuous": [],
    "support": [0, 1],
}
MIX1 = {
    "atoms": [{"x": 0.0, "m": 0.7}, {"x": 1.0, "m": 0.3}],
    "continuous": [],
    "support": [0, 1],
}
MIX2 = {
    "atoms": [{"x": 0.0, "m": 0.6}, {"x": 2.0, "m": 0.4}],
    "continuous": [],
    "support": [0, 2],
}


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, spec in [("bern", BERN_PM1), ("proj", PROJ), ("mix1", MIX1), ("mix2", MIX2)]:
        p = tmp_path / f"{name}.json"
        p.write_text(json.dumps(spec))
        paths[name] = str(p)
    paths["dir"] = tmp_path
    return paths


def run_cli(argv):
    return cli.main(argv)


class TestLinearizeCommand:
    def test_anticommutator_pencil_json(self, files, capsys):
        code = run_cli(["linearize", "--poly", "Z1*Z2+Z2*Z1"])
        out = json.loads(capsys.readouterr().out)
        assert code == 0
        assert out["n"] == 3
        assert out["verified"] is True
        pencil = LinearPencil.from_json_dict(out)
        np.testing.assert_array_equal(pencil.a0, [[0, 0, 0], [0, 0, 1], [0, 1, 0]])
        np.testing.assert_array_equal(pencil.a1, [[0, 1, 0], [1, 0, 0], [0, 0, 0]])
        np.testing.assert_array_equal(pencil.a2, [[0, 0, 1], [0, 0, 0], [1, 0, 0]])
        assert out["certificate"]["B"] == ["Z1", "Z2"]

    def test_round_trip_json(self, files, tmp_path, capsys):
        out_file = tmp_path / "pencil.json"
        code = run_cli(["linearize", "--poly", "Z1^2 - 0.5", "--out", str(out_file)])
        assert code == 0
        data = json.loads(out_file.read_text())
        pencil = LinearPencil.from_json_dict(data)
        again = LinearPencil.from_json_dict(pencil.to_json_dict())
        np.testing.assert_array_equal(pencil.a0, again.a0)

    def test_rejects_bad_poly(self, capsys):
        code = run_cli(["linearize", "--poly", "Z3 + 1"])
        assert code == cli.EXIT_SCHEMA


class TestConvolveCommand:
    def test_bernoulli_arcsine_csv(self, files, tmp_path):
        out_file = tmp_path / "dens.csv"
        code = run_cli([
            "convolve", "--mu1", files["bern"], "--mu2", files["bern"],
            "--grid=-1.5:1.5:31", "--y-eval", "1e-4",
            "--format", "csv", "--out", str(out_file),
        ])
        assert code == 0
        rows = out_file.read_text().strip().splitlines()
        assert rows[0] == "x,density"
        xs, ds = [], []
        for row in rows[1:]:
            x, d = row.split(",")
            xs.append(float(x))
            ds.append(float(d))
        exact = 1 / (np.pi * np.sqrt(4 - np.array(xs) ** 2))
        assert np.max(np.abs(np.array(ds) - exact)) < 1e-3

    def test_json_format(self, files, capsys):
        code = run_cli([
            "convolve", "--mu1", files["bern"], "--mu2", files["bern"],
            "--grid", "0:1:3",
        ])
        out = json.loads(capsys.readouterr().out)
        assert code == 0
        assert len(out["grid"]) == 3

    def test_missing_measure_is_schema_error(self, files, capsys):
        code = run_cli(["convolve", "--mu1", "/nonexistent.json", "--mu2", files["bern"]])
        assert code == cli.EXIT_SCHEMA

    def test_bad_grid(self, files):
        code = run_cli([
            "convolve", "--mu1", files["bern"], "--mu2", files["bern"], "--grid", "5:1:10",
        ])
        assert code == cli.EXIT_SCHEMA


class TestDecomposeCommand:
    def test_atomic_fixture(self, files, capsys):
        code = run_cli([
            "decompose", "--mu1", files["mix1"], "--mu2", files["mix2"], "--b", "0",
        ])
        out = json.loads(capsys.readouterr().out)
        assert code == 0
        report = AtomReport.from_json_dict(out)
        assert report.mass == pytest.approx(0.3, abs=1e-6)
        assert report.beta1[0, 0].real == pytest.approx(7 / 3, abs=1e-6)
        assert report.residuals["v"] < 1e-6

    def test_strict_mode_passes_clean_case(self, files, capsys):
        code = run_cli([
            "decompose", "--mu1", files["mix1"], "--mu2", files["mix2"], "--b", "2",
            "--strict",
        ])
        assert code == 0

    def test_singular_expectation_maps_to_schema_exit(self, files, capsys):
        # no atom at b = 0.5: precondition violation, not a crash
        code = run_cli([
            "decompose", "--mu1", files["mix1"], "--mu2", files["mix2"], "--b", "0.5",
        ])
        assert code == cli.EXIT_SCHEMA


class TestAtomScanCommand:
    def test_finds_both_atoms(self, files, capsys):
        code = run_cli(["atom-scan", "--mu1", files["mix1"], "--mu2", files["mix2"]])
        out = json.loads(capsys.readouterr().out)
        assert code == 0
        cands = {round(c["location"], 6): c for c in out["candidates"]}
        assert cands[0.0]["measured_mass"] == pytest.approx(0.3, abs=1e-6)
        assert cands[2.0]["measured_mass"] == pytest.approx(0.1, abs=1e-6)
        assert cands[0.0]["decomposition"]["mass"] == pytest.approx(0.3, abs=1e-6)


class TestEigtestCommand:
    def test_anticommutator_projections(self, files, capsys):
        code = run_cli([
            "eigtest", "--poly", "Z1*Z2+Z2*Z1", "--lambda", "0",
            "--mu1", files["proj"], "--mu2", files["proj"],
        ])
        out = json.loads(capsys.readouterr().out)
        assert code == 0
        assert out["regularized"] is True
        assert abs(out["diagnostics"]["poly_kernel_trace"]) < 1e-5
        report = AtomReport.from_json_dict(out)
        assert report.regularization is not None
        assert report.regularization.offset_distance < 1e-2

    def test_sum_with_atoms(self, files, capsys):
        code = run_cli([
            "eigtest", "--poly", "Z1+Z2", "--lambda", "2",
            "--mu1", files["mix1"], "--mu2", files["mix2"], "--strict",
        ])
        out = json.loads(capsys.readouterr().out)
        assert code == 0
        assert out["diagnostics"]["poly_kernel_trace"] == pytest.approx(0.1, abs=1e-5)


class TestOracleCommand:
    def test_histogram_csv(self, files, tmp_path):
        out_file = tmp_path / "hist.csv"
        code = run_cli([
            "oracle", "--mu1", files["mix1"], "--mu2", files["mix2"],
            "--size", "300", "--trials", "2", "--seed", "21",
            "--format", "csv", "--out", str(out_file), "--bins", "51",
        ])
        assert code == 0
        rows = out_file.read_text().strip().splitlines()
        assert rows[0] == "bin_left,bin_right,count_mean,count_std"
        assert len(rows) == 52

    def test_seeded_reproducibility(self, files, capsys):
        argv = [
            "oracle", "--mu1", files["mix1"], "--mu2", files["mix2"],
            "--size", "200", "--trials", "2", "--seed", "33",
        ]
        assert run_cli(argv) == 0
        first = capsys.readouterr().out
        assert run_cli(argv) == 0
        second = capsys.readouterr().out
        assert first == second

    def test_poly_target(self, files, capsys):
        code = run_cli([
            "oracle", "--poly", "Z1*Z2+Z2*Z1", "--lambda", "0",
            "--mu1", files["proj"], "--mu2", files["proj"],
            "--size", "200", "--trials", "2", "--seed", "3", "--epsilon", "1e-9",
        ])
        out = json.loads(capsys.readouterr().out)
        assert code == 0
        assert out["masses"]["0.0"][0] <= 2 / 200


class TestCompareCommand:
    def test_sum_agreement(self, files, capsys):
        code = run_cli([
            "compare", "--poly", "Z1+Z2", "--lambda", "0",
            "--mu1", files["mix1"], "--mu2", files["mix2"],
            "--size", "500", "--trials", "2", "--seed", "4", "--epsilon", "1e-6",
        ])
        out = json.loads(capsys.readouterr().out)
        assert code == 0
        assert out["agree"] is True
        assert out["pipeline_mass"] == pytest.approx(0.3, abs=1e-5)
        assert abs(out["oracle_mass"] - 0.3) <= out["tolerance"]


class TestConfig:
    def test_env_overrides(self, files, capsys, monkeypatch):
        monkeypatch.setenv("FREEATOMS_SEED", "77")
        parser = cli._build_parser()
        args = parser.parse_args(["oracle", "--mu1", files["mix1"], "--mu2", files["mix2"]])
        assert args.seed == 77
        monkeypatch.setenv("FREEATOMS_TOL", "1e-9")
        parser = cli._build_parser()  # defaults are read at build time
        args = parser.parse_args(["convolve", "--mu1", files["mix1"], "--mu2", files["mix2"]])
        assert args.tol == pytest.approx(1e-9)

    def test_ladder_depth_bounds(self):
        with pytest.raises(Exception):
            cli.RunConfig(command="convolve", ladder_depth=50)

    def test_measure_round_trip_through_cli_format(self, files):
        mu = SpectralMeasure.from_json_dict(MIX1)
        assert SpectralMeasure.from_json_dict(mu.to_json_dict()) == mu


class TestGoldenFixtures:
    """The documented file formats, kept as golden examples under test."""

    DATA = Path(__file__).parent / "data"

    def test_all_fixture_measures_parse_and_round_trip(self):
        for path in sorted(self.DATA.glob("*.json")):
            mu = SpectralMeasure.from_json_dict(json.loads(path.read_text()))
            assert SpectralMeasure.from_json_dict(mu.to_json_dict()) == mu

    def test_spec_style_invocation_with_bare_negative_grid(self, capsys):
        bern = str(self.DATA / "bernoulli.json")
        code = run_cli([
            "convolve", "--mu1", bern, "--mu2", bern,
            "--grid", "-2.5:2.5:51", "--format", "csv",
        ])
        out = capsys.readouterr().out
        assert code == 0
        assert out.splitlines()[0] == "x,density"
        assert len(out.splitlines()) == 52

    def test_golden_eigtest(self, capsys):
        proj = str(self.DATA / "projections.json")
        code = run_cli([
            "eigtest", "--poly", "Z1*Z2+Z2*Z1", "--lambda", "0",
            "--mu1", proj, "--mu2", proj,
        ])
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert out["regularized"] is True
