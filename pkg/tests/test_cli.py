import csv
import json
import math

import pytest

from iqpbp import arch, charfn
from iqpbp.cli import main
from iqpbp.gf2 import BitVec


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(*argv):
    return main([str(a) for a in argv])


class TestRanks:
    def test_exhaustive_complete(self, tmp_path):
        assert run("ranks", "--arch", "complete:6", "--exhaustive", "--out", tmp_path) == 0
        rows = read_csv(tmp_path / "ranks.csv")
        assert len(rows) == 64
        for row in rows:
            if row["a"] != "000000":
                assert row["r_a"] == "6"
                assert float(row["var_grad_uniform"]) == 2.0**-4
        zero = next(r for r in rows if r["a"] == "000000")
        assert zero["m_a"] == "0" and float(zero["var_char_uniform"]) == 0.0

    def test_product_weight_sweep(self, tmp_path):
        assert run("ranks", "--arch", "product:8", "--weights", "1-3", "--out", tmp_path) == 0
        rows = read_csv(tmp_path / "ranks.csv")
        assert len(rows) == 8 + 28 + 56
        for row in rows:
            assert row["r_a"] == row["weight"] == row["m_a"]

    def test_single_frequency_matches_library(self, tmp_path):
        gen_path = tmp_path / "gens.json"
        arch.save_generator_file(arch.lattice(2, 2), str(gen_path))
        assert run("ranks", "--arch", f"file:{gen_path}", "--a", "1010", "--out", tmp_path) == 0
        (row,) = read_csv(tmp_path / "ranks.csv")
        report = arch.critical_rank(arch.lattice(2, 2), BitVec.from_string("1010"))
        assert int(row["r_a"]) == report.rank
        assert int(row["m_a"]) == report.subset_size

    def test_capacity_exit_code(self, tmp_path):
        assert run("ranks", "--arch", "product:26", "--exhaustive", "--out", tmp_path) == 3

    def test_requires_frequency_selector(self, tmp_path):
        assert run("ranks", "--arch", "product:4", "--out", tmp_path) == 2


class TestVariance:
    def test_complete_grad_both(self, tmp_path):
        assert run(
            "variance", "--arch", "complete:8", "--quantity", "grad", "--init", "uniform",
            "--a", "10000000", "--ell", "1", "--draws", "20000", "--seed", "2",
            "--mode", "both", "--out", tmp_path,
        ) == 0
        (row,) = read_csv(tmp_path / "variance.csv")
        assert float(row["closed_form"]) == 2.0**-6
        assert float(row["agreement_sigma"]) <= 5.0

    def test_commuting_index_zero(self, tmp_path):
        assert run(
            "variance", "--arch", "product:4", "--a", "1100", "--ell", "3",
            "--draws", "100", "--mode", "both", "--out", tmp_path,
        ) == 0
        (row,) = read_csv(tmp_path / "variance.csv")
        assert float(row["closed_form"]) == 0.0
        assert float(row["empirical"]) == 0.0

    def test_gaussian_closed(self, tmp_path):
        assert run(
            "variance", "--arch", "product:8", "--quantity", "char", "--init",
            "gaussian:0.4", "--a", "11000000", "--mode", "closed", "--out", tmp_path,
        ) == 0
        (row,) = read_csv(tmp_path / "variance.csv")
        expected = charfn.var_char_closed(
            arch.product(8), BitVec.from_string("11000000"), charfn.InitScheme.gaussian(0.4)
        )
        assert float(row["closed_form"]) == pytest.approx(expected, rel=1e-15)

    def test_mmd_grad_closed_mode_rejected(self, tmp_path):
        assert run(
            "variance", "--arch", "product:4", "--quantity", "mmd-grad", "--a", "1000",
            "--mode", "closed", "--out", tmp_path,
        ) == 2

    def test_mmd_grad_empirical(self, tmp_path):
        target_path = tmp_path / "target.json"
        target_path.write_text(json.dumps({"kind": "dirichlet", "seed": 4}))
        assert run(
            "variance", "--arch", "lattice:2x2", "--quantity", "mmd-grad",
            "--a", "1000", "--ell", "1", "--draws", "1500", "--mode", "empirical",
            "--kernel", "gaussian:4", "--target", target_path, "--out", tmp_path,
        ) == 0
        (row,) = read_csv(tmp_path / "variance.csv")
        assert row["closed_form"] == ""
        assert float(row["empirical"]) > 0


class TestAnticoncentration:
    def test_product_sweep(self, tmp_path):
        assert run(
            "anticoncentration", "--family", "product", "--n-list", "2,4,8",
            "--out", tmp_path,
        ) == 0
        rows = read_csv(tmp_path / "anticoncentration.csv")
        for row in rows:
            n = int(row["n"])
            assert float(row["value"]) == pytest.approx(1.5**n, abs=1e-9)
            assert row["method"] == "exact"

    def test_complete_sweep(self, tmp_path):
        assert run(
            "anticoncentration", "--family", "complete", "--n-list", "4-6",
            "--out", tmp_path,
        ) == 0
        rows = read_csv(tmp_path / "anticoncentration.csv")
        assert [int(r["n"]) for r in rows] == [4, 5, 6]
        for row in rows:
            assert float(row["value"]) == pytest.approx(2 - 2.0 ** -int(row["n"]), abs=1e-9)

    def test_er_formula_monotone(self, tmp_path):
        assert run(
            "anticoncentration", "--family", "er-formula", "--c", "3",
            "--n-list", "16,64,256", "--out", tmp_path,
        ) == 0
        values = [float(r["value"]) for r in read_csv(tmp_path / "anticoncentration.csv")]
        assert values[0] > values[1] > values[2] > 2.0

    def test_single_arch_mc(self, tmp_path):
        assert run(
            "anticoncentration", "--arch", "complete:8", "--method", "mc",
            "--samples", "4000", "--out", tmp_path,
        ) == 0
        (row,) = read_csv(tmp_path / "anticoncentration.csv")
        assert row["method"] == "mc"
        assert abs(float(row["value"]) - (2 - 2.0**-8)) < 0.5


class TestScan:
    def test_complete_slope(self, tmp_path):
        assert run(
            "scan", "--family", "complete", "--n-list", "4,6,8,10",
            "--quantity", "grad", "--out", tmp_path,
        ) == 0
        manifest = json.loads((tmp_path / "scan-manifest.json").read_text())
        assert manifest["slope"] == pytest.approx(-1.0, abs=1e-12)
        rows = read_csv(tmp_path / "scan.csv")
        assert [int(r["n"]) for r in rows] == [4, 6, 8, 10]

    def test_er_records(self, tmp_path):
        assert run(
            "scan", "--family", "er", "--n-list", "16,24,32", "--weight", "1",
            "--graph-seeds", "50", "--out", tmp_path,
        ) == 0
        rows = read_csv(tmp_path / "scan_records.csv")
        assert len(rows) == 3
        assert all(r["stderr"] for r in rows)


class TestSampleAndProbs:
    def test_sample_zero_theta(self, tmp_path):
        theta_path = tmp_path / "theta.json"
        theta_path.write_text(json.dumps([0.0] * 10))
        assert run(
            "sample", "--arch", "complete:4", "--theta-file", theta_path,
            "--shots", "25", "--out", tmp_path,
        ) == 0
        lines = (tmp_path / "samples.txt").read_text().splitlines()
        assert lines == ["0000"] * 25

    def test_probs_quarter_turn(self, tmp_path):
        theta_path = tmp_path / "theta.json"
        theta_path.write_text(json.dumps([math.pi / 4]))
        assert run(
            "probs", "--arch", "product:1", "--theta-file", theta_path, "--out", tmp_path,
        ) == 0
        rows = read_csv(tmp_path / "probs.csv")
        assert [r["x"] for r in rows] == ["0", "1"]
        for row in rows:
            assert float(row["probability"]) == pytest.approx(0.5, abs=1e-12)

    def test_theta_length_check(self, tmp_path):
        theta_path = tmp_path / "theta.json"
        theta_path.write_text(json.dumps([0.1, 0.2]))
        assert run(
            "probs", "--arch", "product:3", "--theta-file", theta_path, "--out", tmp_path,
        ) == 2


class TestTrainCommand:
    def write_config(self, tmp_path, seed=3):
        cfg = {
            "architecture": "complete:4",
            "kernel": "gaussian:4",
            "init": "gaussian:0.3162",
            "target": {
                "kind": "planted",
                "frequencies": ["1000", "0100"],
                "amplitudes": [0.3, -0.25],
            },
            "learning_rate": 0.1,
            "steps": 12,
            "n_freq": 4,
            "n_z": 16,
            "seed": seed,
        }
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        return path

    def test_trace_and_determinism(self, tmp_path):
        cfg = self.write_config(tmp_path)
        out1 = tmp_path / "run1"
        out2 = tmp_path / "run2"
        assert run("train", "--config", cfg, "--out", out1) == 0
        assert run("train", "--config", cfg, "--out", out2) == 0
        assert (out1 / "trace.csv").read_bytes() == (out2 / "trace.csv").read_bytes()
        assert (out1 / "theta.json").read_bytes() == (out2 / "theta.json").read_bytes()
        rows = read_csv(out1 / "trace.csv")
        assert len(rows) == 13
        assert [int(r["step"]) for r in rows] == list(range(13))

    def test_rerun_from_manifest(self, tmp_path):
        cfg = self.write_config(tmp_path)
        out1 = tmp_path / "first"
        assert run("train", "--config", cfg, "--out", out1) == 0
        out2 = tmp_path / "replayed"
        assert run("rerun", out1 / "train-manifest.json", "--out", out2) == 0
        assert (out1 / "trace.csv").read_bytes() == (out2 / "trace.csv").read_bytes()


class TestOracleVerify:
    def test_passes_and_reports(self, tmp_path):
        assert run(
            "oracle-verify", "--n", "6", "--trials", "50", "--seed", "1", "--out", tmp_path,
        ) == 0
        rows = read_csv(tmp_path / "oracle_verify.csv")
        assert len(rows) == 12  # 4 architectures x 3 checks
        assert all(row["status"] == "pass" for row in rows)
        assert all(float(row["max_error"]) <= float(row["tolerance"]) for row in rows)


class TestManifests:
    def test_every_command_writes_manifest(self, tmp_path):
        assert run("ranks", "--arch", "product:4", "--a", "1100", "--out", tmp_path) == 0
        manifest = json.loads((tmp_path / "ranks-manifest.json").read_text())
        assert manifest["command"] == "ranks"
        assert manifest["version"]
        assert manifest["argv"][0] == "ranks"
        assert (tmp_path / "ranks.csv").exists()

    def test_17_digit_round_trip(self, tmp_path):
        assert run(
            "variance", "--arch", "complete:5", "--a", "10000", "--mode", "closed",
            "--out", tmp_path,
        ) == 0
        (row,) = read_csv(tmp_path / "variance.csv")
        value = float(row["closed_form"])
        assert value == charfn.var_grad_closed(
            arch.complete(5), BitVec.from_string("10000"), 1, charfn.InitScheme.uniform()
        )


class TestExitCodes:
    def test_bad_arch(self, tmp_path):
        assert run("ranks", "--arch", "ring:9", "--a", "1", "--out", tmp_path) == 2

    def test_unknown_flag(self):
        with pytest.raises(SystemExit) as err:
            run("ranks", "--bogus")
        assert err.value.code == 2
