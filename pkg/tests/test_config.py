import pytest

from dde.config import config_digest, config_from_dict, dump_config, load_config, parse_observable
from dde.errors import ConfigError
from dde.hamiltonians import build_heisenberg

RAW = {
    "hamiltonian": {"family": "heisenberg", "n_qubits": 6, "params": {"J": 0.1, "h": 1.0},
                    "seed": 3, "observable": "Z1"},
    "initial_state": {"kind": "eigen-mixture", "params": {"populations": [0.8, 0.2]}},
    "grid": {"T": 5.0, "dt": 0.5},
    "backend": {"trotter": {"M": 2, "gamma": 0.0}},
    "dde": {"n_copies": [1, 2], "n_mc": 1000, "seed": 4},
    "output": {"directory": "x"},
}


class TestConfig:
    def test_parse(self):
        cfg = config_from_dict(RAW)
        assert cfg.backend.kind == "trotter" and cfg.backend.options["M"] == 2
        assert cfg.dde.n_mc == [1000]
        assert cfg.grid.T == 5.0

    def test_round_trip(self, tmp_path):
        cfg = config_from_dict(RAW)
        path = tmp_path / "c.yaml"
        path.write_text(dump_config(cfg))
        assert load_config(path) == cfg

    @pytest.mark.parametrize("patch", [
        {"bogus": 1},
        {"dde": {"n_copies": [0]}},
        {"dde": {"estimator": "mode"}},
        {"hamiltonian": {"family": "ising"}},
        {"backend": {"gpu": {}}},
        {"backend": {"mps": {"chi": 3}}},
        {"grid": {"T": 1.0, "dt": 0.0}},
    ])
    def test_rejects(self, patch):
        with pytest.raises(ConfigError):
            config_from_dict({**RAW, **patch})

    def test_bad_yaml(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("grid: [unclosed")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_digest_ignores_output(self):
        a = config_from_dict(RAW)
        b = a.with_overrides(out="elsewhere")
        c = a.with_overrides(seed=99)
        assert config_digest(a) == config_digest(b)
        assert config_digest(a) != config_digest(c)


class TestObservable:
    def test_forms(self):
        H = build_heisenberg(3, seed=0)
        assert parse_observable("H", H) is H
        assert parse_observable("z1z3", H).coefficient("ZIZ") == 1.0
        assert parse_observable([[0.5, "XXI"]], H).coefficient("XXI") == 0.5

    @pytest.mark.parametrize("bad", ["Z4", "Q1", "Z1 + X2", 3])
    def test_rejects(self, bad):
        with pytest.raises(ConfigError):
            parse_observable(bad, build_heisenberg(3, seed=0))
