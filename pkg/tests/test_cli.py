import csv

import numpy as np
import pytest
import yaml

from dde.cli import emit_sweep_csv, main
from dde.gridio import load_grid

BASE = {
    "hamiltonian": {"family": "heisenberg", "n_qubits": 4, "params": {"J": 0.3, "h": 1.0},
                    "seed": 2, "observable": "H"},
    "initial_state": {"kind": "eigen-mixture",
                      "params": {"populations": [0.8, 0.2], "min_gap": 0.1}},
    "grid": {"T": 4.0, "dt": 0.5},
    "backend": "exact",
    "dde": {"n_copies": [1, 2], "n_mc": [500], "seed": 1},
}


@pytest.fixture
def config(tmp_path):
    def make(**patch):
        raw = {**BASE, **patch, "output": {"directory": str(tmp_path / "out")}}
        path = tmp_path / "run.yaml"
        path.write_text(yaml.safe_dump(raw))
        return str(path)
    return make


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestCli:
    def test_dde_from_config(self, config, tmp_path):
        assert main(["dde", "--config", config()]) == 0
        out = tmp_path / "out"
        assert (out / "resolved_config.yaml").exists()
        rows = read_csv(out / "estimates.csv")
        assert [int(r["n_copies"]) for r in rows] == [1, 2]
        sweep = read_csv(out / "sweep.csv")
        assert sweep[0]["reference"] != ""

    def test_grid_then_dde_reproduces(self, config, tmp_path):
        cfg = config()
        assert main(["dde", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
        assert main(["grid", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
        assert main(["dde", "--config", cfg, "--out", str(tmp_path / "b"),
                     "--grid", str(tmp_path / "b" / "grid.txt")]) == 0
        a = read_csv(tmp_path / "a" / "estimates.csv")
        b = read_csv(tmp_path / "b" / "estimates.csv")
        assert [r["value"] for r in a] == [r["value"] for r in b]
        assert [r["run_id"] for r in a] == [r["run_id"] for r in b]

    def test_seed_override(self, config, tmp_path):
        main(["dde", "--config", config(), "--seed", "7"])
        resolved = yaml.safe_load((tmp_path / "out" / "resolved_config.yaml").read_text())
        assert resolved["dde"]["seed"] == 7

    def test_exit_codes(self, config, tmp_path, capsys):
        assert main(["dde", "--config", config(bogus=1)]) == 2
        assert "unknown key" in capsys.readouterr().err
        bad = tmp_path / "bad.txt"
        bad.write_text("# format=dde-grid v9\n")
        assert main(["dde", "--config", config(), "--grid", str(bad)]) == 2
        assert main(["dde", "--config", config(), "--grid", str(tmp_path / "missing.txt")]) == 2

    def test_other_subcommands(self, config, tmp_path):
        cfg = config()
        out = tmp_path / "out"
        assert main(["hamiltonian", "--config", cfg]) == 0
        assert (out / "hamiltonian.txt").read_text().startswith("# format=dde-paulisum v1")
        assert main(["bounds", "--config", cfg, "--sigma", "1", "2"]) == 0
        assert len(read_csv(out / "bounds.csv")) == 2
        assert main(["grid", "--config", cfg, "--shot-noise", "1000",
                     "--grid-out", str(out / "noisy.txt")]) == 0
        assert "shots(1000)" in load_grid(out / "noisy.txt").backend
        main(["grid", "--config", cfg])
        assert main(["spectroscopy", "--config", cfg, "--grid", str(out / "grid.txt")]) == 0
        assert read_csv(out / "spectroscopy.csv")

    def test_trotter_extrapolation(self, config, tmp_path):
        paths = []
        for M in (1, 2, 4):
            cfg = config(backend={"trotter": {"M": M}})
            p = str(tmp_path / f"g{M}.txt")
            assert main(["grid", "--config", cfg, "--grid-out", p]) == 0
            paths.append(p)
        out = str(tmp_path / "ext.txt")
        assert main(["grid", "--config", config(), "--extrapolate", *paths, "--grid-out", out]) == 0
        assert "extrapolated" in load_grid(out).backend

    def test_extrapolate_copies(self, config, tmp_path):
        cfg = config(dde={"n_copies": [1, 2, 3, 4], "n_mc": [2000], "seed": 1})
        assert main(["dde", "--config", cfg]) == 0
        est = tmp_path / "out" / "estimates.csv"
        assert main(["extrapolate-copies", "--config", cfg, "--estimates", str(est)]) == 0
        assert read_csv(tmp_path / "out" / "copy_extrapolation.csv")

    def test_mps_and_vqe(self, config, tmp_path):
        cfg = config(hamiltonian={**BASE["hamiltonian"], "params": {"J": 0.3, "h": 1.0,
                                                                     "boundary": "chain"}},
                     initial_state={"kind": "bitstring-superposition", "params": {}},
                     backend={"mps": {"chi_max": 16, "tebd_dt": 0.1}})
        assert main(["mps", "--config", cfg]) == 0
        assert load_grid(tmp_path / "out" / "grid.txt").backend.startswith("mps")
        vcfg = config(hamiltonian={"family": "schwinger", "n_qubits": 4, "params": {}},
                      initial_state={"kind": "vqe", "params": {"layers": 2, "steps": 5}})
        assert main(["vqe", "--config", vcfg]) == 0
        pops = read_csv(tmp_path / "out" / "vqe_populations.csv")
        assert sum(float(r["population"]) for r in pops) == pytest.approx(1.0)
        assert main(["varsim", "--config", vcfg, "--T", "0.5", "--substeps", "10"]) == 0
        fid = read_csv(tmp_path / "out" / "varsim_fidelity.csv")
        # a two-layer ansatz is too small to track the dynamics; only the shape is checked
        assert [float(r["t"]) for r in fid] == [-0.5, 0.0, 0.5]
        assert all(0 <= float(r["fidelity"]) <= 1 + 1e-9 for r in fid)


def test_sweep_csv(tmp_path):
    res = [{"n_copies": 1, "n_mc": 10, "sigma": 1.0, "value": v} for v in (1.0, 3.0)]
    rows = emit_sweep_csv(res, tmp_path / "s.csv", reference=2.0)
    assert rows[0]["mean_value"] == 2.0 and rows[0]["mean_abs_error"] == 1.0
    assert np.isclose(float(read_csv(tmp_path / "s.csv")[0]["mean_abs_error"]), 1.0)
