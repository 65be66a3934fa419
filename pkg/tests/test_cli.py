import csv
import json

import numpy as np
import pytest

from scenarios import drifting, failing_region, near_boundary, stabilizing
from reachrel.cli import EXIT_INPUT, EXIT_SAFE, EXIT_UNSAFE, main
from reachrel.closedloop import SafetySpec
from reachrel.netprop import save_network
from reachrel.scenario import Scenario, scenario_to_dict


def write_case(tmp_path, sc, name="case", with_network=True):
    """Scenario + controller files for a test closed loop; returns the scenario path."""
    scn = Scenario(sc.dyn, sc.init_box, sc.safety, sc.steps, partition_bounds=sc.bounds,
                   partition_cells=None if sc.bounds is None else (sc.cells,) * len(sc.bounds))
    doc = scenario_to_dict(scn)
    if with_network:
        save_network(sc.net, tmp_path / f"{name}_net.json")
        doc["network"] = f"{name}_net.json"
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(doc))
    return str(path)


def write_samples(tmp_path, X, name="samples.csv"):
    path = tmp_path / name
    np.savetxt(path, np.atleast_2d(X).reshape(len(X), -1), delimiter=",", fmt="%.17g")
    return str(path)


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


class TestVerify:
    def test_stabilizing_is_safe(self, tmp_path):
        out = tmp_path / "out"
        assert main(["verify", "--scenario", write_case(tmp_path, stabilizing()), "--out", str(out)]) == EXIT_SAFE
        rows = read_csv(out / "tube.csv")
        assert rows[0] == ["step", "var", "lo", "hi"]
        assert sum(1 for r in rows[1:] if r[1] == "0") == 61
        assert json.loads((out / "verdict.json").read_text())["verdict"] == "verified_safe"

    def test_drift_is_unsafe(self, tmp_path):
        out = tmp_path / "out"
        assert main(["verify", "--scenario", write_case(tmp_path, drifting()), "--out", str(out)]) == EXIT_UNSAFE
        verdict = json.loads((out / "verdict.json").read_text())
        # upper edge 1.1 + 0.1 t reaches 1.5 at t = 4
        assert verdict["verdict"] == "possibly_unsafe" and verdict["first_violation_step"] == 4

    def test_missing_network_leaves_no_files(self, tmp_path):
        out = tmp_path / "out"
        scn = write_case(tmp_path, stabilizing(), with_network=False)
        code = main(["verify", "--scenario", scn, "--network", str(tmp_path / "none.json"), "--out", str(out)])
        assert code == EXIT_INPUT and not out.exists()

    def test_bad_network_reports_layer(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"layers": [{"weights": [[1.0]], "biases": [0, 1], "activation": "relu"}]}))
        scn = write_case(tmp_path, stabilizing(), with_network=False)
        assert main(["verify", "--scenario", scn, "--network", str(bad), "--out", str(tmp_path / "o")]) == EXIT_INPUT
        assert "layer 0" in capsys.readouterr().err

    def test_unknown_flag_is_input_error(self):
        assert main(["verify", "--bogus"]) == EXIT_INPUT

    def test_flag_overrides_config_overrides_scenario(self, tmp_path):
        scn = write_case(tmp_path, stabilizing())
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"scenario": "case.json", "steps": 5, "out": str(tmp_path / "cfg_out")}))
        assert main(["verify", "--config", str(cfg)]) == EXIT_SAFE
        assert json.loads((tmp_path / "cfg_out" / "verdict.json").read_text())["steps"] == 5
        assert main(["verify", "--config", str(cfg), "--steps", "7", "--out", str(tmp_path / "o2")]) == EXIT_SAFE
        assert json.loads((tmp_path / "o2" / "verdict.json").read_text())["steps"] == 7
        assert scn.endswith("case.json")


class TestAssess:
    def test_failing_region_conservative(self, tmp_path):
        sc = failing_region()
        X = np.random.default_rng(0).uniform(0, 1, size=(200, 1))
        out = tmp_path / "out"
        code = main(["assess", "--scenario", write_case(tmp_path, sc), "--samples", write_samples(tmp_path, X),
                     "--out", str(out), "--jobs", "1", "--checkpoints", "100,200"])
        assert code == EXIT_SAFE
        report = json.loads((out / "report.json").read_text())
        assert report["failure_probability"] >= 0.2
        rows = read_csv(out / "convergence.csv")
        assert rows[0] == ["n_samples", "failure_probability"] and [r[0] for r in rows[1:]] == ["100", "200"]
        assert float(rows[-1][1]) == report["failure_probability"]

    def test_no_unsafe_regions(self, tmp_path):
        sc = stabilizing()
        sc.safety = SafetySpec()
        X = np.random.default_rng(0).uniform(0.9, 1.1, size=(50, 1))
        out = tmp_path / "out"
        assert main(["assess", "--scenario", write_case(tmp_path, sc), "--samples", write_samples(tmp_path, X),
                     "--out", str(out), "--jobs", "1"]) == EXIT_SAFE
        assert json.loads((out / "report.json").read_text())["failure_probability"] == 0.0

    def test_all_samples_in_one_safe_cell(self, tmp_path):
        sc = failing_region()
        out = tmp_path / "out"
        X = np.full((20, 1), 0.05)
        assert main(["assess", "--scenario", write_case(tmp_path, sc), "--samples", write_samples(tmp_path, X),
                     "--out", str(out), "--jobs", "1"]) == EXIT_SAFE
        report = json.loads((out / "report.json").read_text())
        assert report["failure_probability"] == 0.0 and report["cells_verified"] == 1

    def test_missing_samples(self, tmp_path):
        out = tmp_path / "out"
        code = main(["assess", "--scenario", write_case(tmp_path, failing_region()),
                     "--samples", str(tmp_path / "none.csv"), "--out", str(out)])
        assert code == EXIT_INPUT and not out.exists()


class TestCompare:
    def run(self, tmp_path, sc, X, out, seed="0"):
        return main(["compare", "--scenario", write_case(tmp_path, sc), "--samples", write_samples(tmp_path, X),
                     "--out", str(out), "--jobs", "1", "--seed", seed, "--checkpoints", "100,200,300"])

    def test_near_boundary_interval_dominates(self, tmp_path):
        X = np.random.default_rng(0).uniform(-0.2, 1.0, size=(300, 1))
        assert self.run(tmp_path, near_boundary(), X, tmp_path / "out") == EXIT_SAFE
        rows = [[float(v) for v in r] for r in read_csv(tmp_path / "out" / "comparison.csv")[1:]]
        assert all(ie >= pe for _, ie, pe in rows)
        assert any(ie > pe for _, ie, pe in rows)

    def test_trivially_safe_all_zero(self, tmp_path):
        sc = stabilizing()
        sc.safety = SafetySpec()
        X = np.random.default_rng(0).uniform(0.9, 1.1, size=(300, 1))
        assert self.run(tmp_path, sc, X, tmp_path / "out") == EXIT_SAFE
        rows = read_csv(tmp_path / "out" / "comparison.csv")[1:]
        assert all(float(r[1]) == 0.0 and float(r[2]) == 0.0 for r in rows)

    def test_byte_identical_reruns(self, tmp_path):
        X = np.random.default_rng(1).uniform(0, 1, size=(300, 1))
        self.run(tmp_path, failing_region(), X, tmp_path / "a", seed="3")
        self.run(tmp_path, failing_region(), X, tmp_path / "b", seed="3")
        assert (tmp_path / "a" / "comparison.csv").read_bytes() == (tmp_path / "b" / "comparison.csv").read_bytes()


class TestFitOp:
    def test_uniform_four_cells(self, tmp_path):
        X = np.random.default_rng(0).uniform(0, 1, size=(10_000, 1))
        out = tmp_path / "out"
        assert main(["fit-op", "--bounds", "0:1", "--cells", "4", "--samples", write_samples(tmp_path, X),
                     "--out", str(out)]) == EXIT_SAFE
        prof = json.loads((out / "profile.json").read_text())
        assert all(abs(c["mass"] - 0.25) < 0.02 for c in prof["cells"])
        rows = read_csv(out / "op_convergence.csv")
        assert rows[0] == ["n_samples", "cell", "mass"] and len(rows) == 1 + 4 * 10

    def test_single_sample(self, tmp_path):
        out = tmp_path / "out"
        assert main(["fit-op", "--bounds", "0:1", "--cells", "4", "--samples",
                     write_samples(tmp_path, np.array([[0.6]])), "--out", str(out)]) == EXIT_SAFE
        assert [c["mass"] for c in json.loads((out / "profile.json").read_text())["cells"]] == [0.0, 0.0, 1.0, 0.0]

    def test_out_of_bounds_counted(self, tmp_path):
        out = tmp_path / "out"
        X = np.array([[0.1], [0.2], [1.5], [-4.0]])
        assert main(["fit-op", "--bounds", "0:1", "--cells", "2", "--samples", write_samples(tmp_path, X),
                     "--out", str(out)]) == EXIT_SAFE
        assert json.loads((out / "profile.json").read_text())["out_of_bounds"] == 2

    @pytest.mark.parametrize("bounds", ["0:1,0:1", "1:0", "zero:1"])
    def test_bad_bounds(self, tmp_path, bounds):
        out = tmp_path / "out"
        code = main(["fit-op", "--bounds", bounds, "--samples", write_samples(tmp_path, np.array([[0.5]])),
                     "--out", str(out)])
        assert code == EXIT_INPUT and not out.exists()
