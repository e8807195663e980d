"""YAML run configuration with strict key checking.

Example::

    hamiltonian:
      family: heisenberg          # heisenberg | schwinger | fermi_hubbard_2x2
      n_qubits: 10
      params: {J: 0.1, h: 1.0, boundary: ring}
      seed: 7
      observable: Z1              # "H", Pauli sites such as "Z1Z2", or [[coeff, "ZIII"], ...]
    initial_state:
      kind: eigen-mixture         # bitstring-superposition | vqe | eigen-mixture
      params: {populations: [0.66, 0.17, 0.17], min_gap: 0.2}
    grid: {T: 200, dt: 0.5}
    backend: exact                # or {trotter: {M: 4, gamma: 0, shots: null}} or {mps: {...}}
    dde: {n_copies: [1, 2, 3], sigma: null, n_mc: [100000], estimator: mean,
          shift_mode: none, seed: 0, repetitions: 1}
    output: {directory: out}
"""

from __future__ import annotations

import copy
import hashlib
import re
from dataclasses import asdict, dataclass, field

import yaml

from .errors import ConfigError
from .pauli import PauliSum

__all__ = [
    "RunConfig",
    "load_config",
    "config_from_dict",
    "dump_config",
    "config_digest",
    "parse_observable",
]

FAMILIES = ("heisenberg", "schwinger", "fermi_hubbard_2x2")
INITIAL_KINDS = ("bitstring-superposition", "vqe", "eigen-mixture")
BACKENDS = ("exact", "trotter", "mps")
BACKEND_KEYS = {
    "exact": set(),
    "trotter": {"M", "gamma", "shots", "trajectories", "optimized"},
    "mps": {"chi_max", "cutoff", "tebd_dt"},
}


@dataclass
class HamiltonianSection:
    family: str = "heisenberg"
    n_qubits: int = 10
    params: dict = field(default_factory=dict)
    seed: int = 0
    observable: object = "H"


@dataclass
class InitialStateSection:
    kind: str = "eigen-mixture"
    params: dict = field(default_factory=dict)


@dataclass
class GridSection:
    T: float = 10.0
    dt: float = 0.5


@dataclass
class BackendSection:
    kind: str = "exact"
    options: dict = field(default_factory=dict)


@dataclass
class DdeSection:
    n_copies: list = field(default_factory=lambda: [1])
    sigma: float | None = None
    n_mc: list = field(default_factory=lambda: [10_000])
    estimator: str = "mean"
    n_batches: int = 1
    shift_mode: str = "none"
    shift_c: float = 0.0
    seed: int = 0
    repetitions: int = 1


@dataclass
class OutputSection:
    directory: str = "out"


@dataclass
class RunConfig:
    hamiltonian: HamiltonianSection = field(default_factory=HamiltonianSection)
    initial_state: InitialStateSection = field(default_factory=InitialStateSection)
    grid: GridSection = field(default_factory=GridSection)
    backend: BackendSection = field(default_factory=BackendSection)
    dde: DdeSection = field(default_factory=DdeSection)
    output: OutputSection = field(default_factory=OutputSection)

    def to_dict(self) -> dict:
        d = asdict(self)
        b = d.pop("backend")
        d["backend"] = b["kind"] if b["kind"] == "exact" and not b["options"] else {
            b["kind"]: b["options"]}
        return d

    def with_overrides(self, seed=None, out=None) -> "RunConfig":
        new = copy.deepcopy(self)
        if seed is not None:
            new.dde.seed = int(seed)
        if out is not None:
            new.output.directory = str(out)
        return new


_SECTIONS = {
    "hamiltonian": HamiltonianSection,
    "initial_state": InitialStateSection,
    "grid": GridSection,
    "dde": DdeSection,
    "output": OutputSection,
}


def _check_keys(where, given, allowed):
    unknown = set(given) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def _as_list(x, name):
    items = x if isinstance(x, (list, tuple)) else [x]
    try:
        return [int(v) for v in items]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be integers") from exc


def config_from_dict(raw: dict) -> RunConfig:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    _check_keys("configuration", raw, list(_SECTIONS) + ["backend"])
    cfg = RunConfig()
    for name, cls in _SECTIONS.items():
        section = raw.get(name) or {}
        if not isinstance(section, dict):
            raise ConfigError(f"section {name!r} must be a mapping")
        _check_keys(name, section, cls.__dataclass_fields__)
        setattr(cfg, name, cls(**{**asdict(cls()), **section}))
    cfg.backend = _parse_backend(raw.get("backend", "exact"))
    _validate(cfg)
    return cfg


def _parse_backend(raw) -> BackendSection:
    if isinstance(raw, str):
        kind, options = raw, {}
    elif isinstance(raw, dict) and len(raw) == 1:
        kind, options = next(iter(raw.items()))
        options = options or {}
    else:
        raise ConfigError("backend must be a name or a single-key mapping")
    if kind not in BACKENDS:
        raise ConfigError(f"unknown backend {kind!r}")
    if not isinstance(options, dict):
        raise ConfigError(f"backend {kind!r} options must be a mapping")
    _check_keys(f"backend.{kind}", options, BACKEND_KEYS[kind])
    return BackendSection(kind, dict(options))


def _validate(cfg: RunConfig):
    h = cfg.hamiltonian
    if h.family not in FAMILIES:
        raise ConfigError(f"unknown Hamiltonian family {h.family!r}")
    if not isinstance(h.params, dict):
        raise ConfigError("hamiltonian.params must be a mapping")
    if cfg.initial_state.kind not in INITIAL_KINDS:
        raise ConfigError(f"unknown initial_state.kind {cfg.initial_state.kind!r}")
    d = cfg.dde
    d.n_copies = _as_list(d.n_copies, "dde.n_copies")
    d.n_mc = _as_list(d.n_mc, "dde.n_mc")
    if min(d.n_copies) < 1 or min(d.n_mc) < 1:
        raise ConfigError("dde.n_copies and dde.n_mc must be positive")
    if d.estimator not in ("mean", "median_of_means"):
        raise ConfigError(f"unknown estimator {d.estimator!r}")
    if d.shift_mode not in ("none", "origin", "lsq", "fixed"):
        raise ConfigError(f"unknown shift_mode {d.shift_mode!r}")
    if int(d.repetitions) < 1:
        raise ConfigError("dde.repetitions must be >= 1")
    if not float(cfg.grid.dt) > 0 or float(cfg.grid.T) < 0:
        raise ConfigError("grid needs dt > 0 and T >= 0")


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    return config_from_dict(raw)


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True, default_flow_style=False)


def config_digest(cfg: RunConfig) -> str:
    """Short hash of everything except the output location."""
    d = cfg.to_dict()
    d.pop("output")
    text = yaml.safe_dump(d, sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:12]


_SITE = re.compile(r"([XYZ])(\d+)")


def parse_observable(spec, H: PauliSum) -> PauliSum:
    """``"H"``, a product such as ``"Z1Z2"`` (1-based sites) or ``[[coeff, string], ...]``."""
    n = H.n_qubits
    if isinstance(spec, str):
        text = spec.replace(" ", "").upper()
        if text == "H":
            return H
        sites = _SITE.findall(text)
        if not sites or "".join(a + b for a, b in sites) != text:
            raise ConfigError(f"cannot parse observable {spec!r}")
        letters = ["I"] * n
        for c, q in sites:
            q = int(q)
            if not 1 <= q <= n:
                raise ConfigError(f"site {q} outside 1..{n}")
            letters[q - 1] = c
        return PauliSum(n, [(1.0, "".join(letters))])
    if isinstance(spec, list):
        try:
            return PauliSum(n, [(float(c), str(s)) for c, s in spec])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"cannot parse observable terms: {exc}") from exc
    raise ConfigError("observable must be a string or a list of [coeff, string]")
