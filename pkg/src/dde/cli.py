"""Command-line front end.

Every subcommand takes ``--config PATH`` plus ``--seed`` and ``--out``
overrides, writes ``resolved_config.yaml`` into the output directory before
computing anything, and exits with 0 on success, 2 on configuration or input
errors and 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time
import warnings
from dataclasses import dataclass, fields

import numpy as np

from . import __version__
from .bounds import PopulationVector, lemma1_bounds, lemma2_bound
from .config import RunConfig, config_digest, config_from_dict, dump_config, load_config, \
    parse_observable
from .dense import MAX_DENSE_QUBITS, NoiseModel, diagonalize, superposition
from .engine import DdeConfig, extrapolate_copies, run_dde
from .errors import ConfigError, DDEError, ImaginaryResidualWarning, ParseError
from .fixtures import eigen_mixture, pick_gapped_levels
from .grid import TimeGrid, compute_grid_exact, compute_grid_trotter, extrapolate_trotter, \
    inject_shot_noise
from .gridio import dumps_paulisum, load_grid, save_grid
from .hamiltonians import build_fermi_hubbard_2x2, build_heisenberg, build_schwinger
from .seeding import child_seed

__all__ = ["EstimateRecord", "main", "emit_sweep_csv", "write_estimates", "Problem",
           "build_problem", "compute_grid", "run_estimates"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
_CONFIG_CATEGORIES = {"config", "parse", "unsupported-version", "invalid-argument",
                      "resource-limit", "bound-inapplicable"}


@dataclass
class EstimateRecord:
    run_id: str
    n_copies: int
    n_mc: int
    value: float
    std_error: float
    imag_residual: float
    shift_c: float
    seed: int
    wall_time_s: float


def write_estimates(records, path) -> None:
    """Append rows to ``path``; the header is written when the file is new."""
    names = [f.name for f in fields(EstimateRecord)]
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(names)
        for r in records:
            w.writerow([_fmt(getattr(r, k)) for k in names])


def _fmt(x):
    return repr(float(x)) if isinstance(x, (float, np.floating)) else x


SWEEP_COLUMNS = ("n_copies", "n_mc", "sigma", "runs", "mean_value", "mean_abs_error",
                 "reference")


def emit_sweep_csv(results, path, reference=None) -> list:
    """Aggregate repeated estimates per ``(n_copies, n_mc, sigma)`` cell.

    ``results`` holds mappings with keys ``n_copies``, ``n_mc``, ``sigma`` and
    ``value``.  ``mean_abs_error`` is ``mean_i |value_i - reference|`` (empty
    when no reference is known).  Returns the written rows.
    """
    cells: dict = {}
    for r in results:
        key = (int(r["n_copies"]), int(r["n_mc"]), float(r["sigma"]))
        cells.setdefault(key, []).append(float(r["value"]))
    rows = []
    for (n, m, s), values in sorted(cells.items()):
        v = np.array(values)
        mae = float(np.mean(np.abs(v - reference))) if reference is not None else ""
        rows.append({"n_copies": n, "n_mc": m, "sigma": s, "runs": v.size,
                     "mean_value": float(v.mean()), "mean_abs_error": mae,
                     "reference": "" if reference is None else float(reference)})
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(v) for k, v in row.items()})
    return rows


@dataclass
class Problem:
    """Hamiltonian, observable, initial state and (when affordable) its spectrum."""

    H: object
    O: object
    initial: object
    spec: object = None
    target: int | None = None

    @property
    def reference(self):
        if self.spec is None or self.target is None:
            return None
        v = self.spec.eigenvectors[:, self.target]
        return float(np.real(np.vdot(v, self.O.apply(v))))


def build_hamiltonian(section):
    p = dict(section.params)
    try:
        if section.family == "heisenberg":
            return build_heisenberg(section.n_qubits, seed=section.seed, **p)
        if section.family == "schwinger":
            return build_schwinger(section.n_qubits, **p)
        if p:
            raise ConfigError("fermi_hubbard_2x2 takes no parameters")
        return build_fermi_hubbard_2x2()
    except TypeError as exc:
        raise ConfigError(f"bad Hamiltonian parameters: {exc}") from exc


def build_problem(cfg: RunConfig) -> Problem:
    H = build_hamiltonian(cfg.hamiltonian)
    O = parse_observable(cfg.hamiltonian.observable, H)
    kind, p = cfg.initial_state.kind, dict(cfg.initial_state.params)
    needs_spectrum = cfg.backend.kind == "exact" or kind == "eigen-mixture"
    affordable = H.n_qubits <= (MAX_DENSE_QUBITS if needs_spectrum else 12)
    spec = diagonalize(H) if affordable else None
    if kind == "bitstring-superposition":
        amps = p.get("amplitudes", [math.sqrt(0.7), math.sqrt(0.3)])
        bits = p.get("bitstrings", "auto")
        if bits == "auto":
            from .mps import choose_bitstrings
            bits = list(choose_bitstrings(H))
        if cfg.backend.kind == "mps":
            from .mps import mps_from_bitstrings
            if len(bits) != 2:
                raise ConfigError("the mps backend needs exactly two bitstrings")
            a = np.asarray(amps, dtype=complex)
            initial = mps_from_bitstrings(bits[0], bits[1], a[0], a[1])
            dense = superposition(bits, amps) if spec is not None else None
        else:
            initial = dense = superposition(bits, amps)
    elif kind == "eigen-mixture":
        if spec is None:
            raise ConfigError("eigen-mixture needs a dense spectrum")
        pops = p.get("populations", [1.0])
        levels = p.get("levels") or pick_gapped_levels(spec.energies, len(pops),
                                                      p.get("min_gap", 0.2), p.get("start", 0))
        initial = dense = eigen_mixture(spec, levels, pops, p.get("phases"))
    else:
        from .variational import AnsatzSpec, apply_ansatz, vqe_train
        res = vqe_train(H, AnsatzSpec(H.n_qubits, int(p.get("layers", 12))),
                        steps=int(p.get("steps", 50)),
                        learning_rate=float(p.get("learning_rate", 0.1)),
                        seed=int(p.get("seed", 1)))
        initial = dense = apply_ansatz(res.state)
    target = int(np.argmax(spec.populations(dense))) if spec is not None and dense is not None \
        else None
    return Problem(H, O, initial, spec, target)


def compute_grid(cfg: RunConfig, problem: Problem):
    grid = TimeGrid(float(cfg.grid.T), float(cfg.grid.dt))
    seed = cfg.dde.seed
    opts = cfg.backend.options
    if cfg.backend.kind == "exact":
        if problem.spec is None:
            raise ConfigError("the exact backend needs a dense spectrum")
        return compute_grid_exact(problem.initial, problem.spec, problem.O, grid, seed=seed)
    if cfg.backend.kind == "trotter":
        M = int(opts.get("M", 4))
        gamma = opts.get("gamma") or 0.0
        noise = NoiseModel(float(gamma)) if gamma else None
        return compute_grid_trotter(problem.initial, problem.H, problem.O, grid, M, noise=noise,
                                    shots=opts.get("shots"), seed=seed,
                                    trajectories=int(opts.get("trajectories", 1)))
    from .mps import TebdConfig, correlators_from_mps
    tc = TebdConfig(dt=float(opts.get("tebd_dt", 0.1)), chi_max=int(opts.get("chi_max", 64)),
                    svd_cutoff=float(opts.get("cutoff", 1e-12)))
    return correlators_from_mps(problem.initial, problem.H, problem.O, grid, tc, seed=seed)


def run_estimates(cfg: RunConfig, corr, reference=None):
    """Sweep ``n_copies x n_mc x repetitions``; return (records, sweep inputs)."""
    d = cfg.dde
    digest = config_digest(cfg)
    records, sweep = [], []
    sigma = d.sigma if d.sigma is not None else corr.grid.T / 4.0
    for n in d.n_copies:
        for m in d.n_mc:
            for rep in range(int(d.repetitions)):
                seed = child_seed(d.seed, n, m, rep)
                dc = DdeConfig(n_copies=n, sigma=sigma, n_mc=m, estimator=d.estimator,
                               n_batches=d.n_batches, shift_c=d.shift_c,
                               shift_mode=d.shift_mode, seed=seed)
                start = time.perf_counter()
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", ImaginaryResidualWarning)
                    est = run_dde(corr, dc)
                wall = time.perf_counter() - start
                records.append(EstimateRecord(f"{digest}-n{n}-m{m}-r{rep}", n, m, est.value,
                                              est.std_error, est.imag_residual,
                                              est.shift_applied, seed, wall))
                sweep.append({"n_copies": n, "n_mc": m, "sigma": sigma, "value": est.value})
    return records, sweep


def _outdir(cfg):
    path = cfg.output.directory
    os.makedirs(path, exist_ok=True)
    return path


def _prepare(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else config_from_dict({})
    cfg = cfg.with_overrides(seed=args.seed, out=args.out)
    out = _outdir(cfg)
    with open(os.path.join(out, "resolved_config.yaml"), "w", encoding="utf-8") as fh:
        fh.write(dump_config(cfg))
    return cfg


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


def cmd_hamiltonian(args, cfg):
    H = build_hamiltonian(cfg.hamiltonian)
    path = os.path.join(cfg.output.directory, "hamiltonian.txt")
    with open(path, "w", encoding="ascii") as fh:
        fh.write(dumps_paulisum(H))
    print(path)


def cmd_grid(args, cfg):
    out = cfg.output.directory
    if args.extrapolate:
        grids = []
        for p in args.extrapolate:
            g = load_grid(p)
            if "M" not in g.provenance:
                raise ConfigError(f"{p} records no Trotter step count M")
            grids.append((int(g.provenance["M"]), g))
        corr = extrapolate_trotter(grids)
    elif args.input:
        corr = load_grid(args.input)
    else:
        corr = compute_grid(cfg, build_problem(cfg))
    if args.shot_noise:
        corr = inject_shot_noise(corr, args.shot_noise, cfg.dde.seed)
    path = args.grid_out or os.path.join(out, "grid.txt")
    save_grid(corr, path)
    print(path)


def cmd_dde(args, cfg):
    problem = None
    if args.grid:
        corr = load_grid(args.grid)
    else:
        problem = build_problem(cfg)
        corr = compute_grid(cfg, problem)
    reference = args.reference
    if reference is None and not args.grid:
        reference = problem.reference
    elif reference is None and args.with_reference:
        reference = build_problem(cfg).reference
    records, sweep = run_estimates(cfg, corr, reference)
    out = cfg.output.directory
    write_estimates(records, os.path.join(out, "estimates.csv"))
    emit_sweep_csv(sweep, os.path.join(out, "sweep.csv"), reference)
    for r in records:
        print(f"{r.run_id} n={r.n_copies} n_mc={r.n_mc} value={r.value!r}")


def cmd_bounds(args, cfg):
    problem = build_problem(cfg)
    if problem.spec is None:
        raise ConfigError("bounds need a dense spectrum")
    c = problem.spec.coefficients(problem.initial)
    pops = PopulationVector.from_amplitudes(c, problem.target)
    sigmas = args.sigma or [float(s) for s in range(1, 11)]
    rows = []
    for s in sigmas:
        rep = lemma1_bounds(c, problem.spec, s)
        rows.append([s, rep.hs_bound, rep.hs_actual, rep.trace_bound, rep.trace_actual,
                     rep.delta, rep.h2, rep.c_l1])
    _write_rows(os.path.join(cfg.output.directory, "bounds.csv"),
                ["sigma", "hs_bound", "hs_actual", "trace_bound", "trace_actual", "delta", "h2",
                 "c_l1"], rows)
    n_rows = [[n, lemma2_bound(pops, n)] for n in range(1, 9)]
    _write_rows(os.path.join(cfg.output.directory, "copy_bound.csv"), ["n_copies", "bound"], n_rows)


def _vqe(cfg, H):
    from .variational import AnsatzSpec, vqe_train
    p = cfg.initial_state.params
    spec = AnsatzSpec(H.n_qubits, int(p.get("layers", 12)))
    return vqe_train(H, spec, steps=int(p.get("steps", 50)),
                     learning_rate=float(p.get("learning_rate", 0.1)), seed=int(p.get("seed", 1)))


def cmd_vqe(args, cfg):
    from .variational import apply_ansatz
    H = build_hamiltonian(cfg.hamiltonian)
    res = _vqe(cfg, H)
    out = cfg.output.directory
    _write_rows(os.path.join(out, "vqe_energies.csv"), ["step", "energy"],
                list(enumerate(res.energies)))
    np.savetxt(os.path.join(out, "vqe_params.txt"), res.state.params, fmt="%r")
    if H.n_qubits <= MAX_DENSE_QUBITS:
        pops = diagonalize(H).populations(apply_ansatz(res.state))
        _write_rows(os.path.join(out, "vqe_populations.csv"), ["level", "population"],
                    list(enumerate(pops[:16])))


def cmd_varsim(args, cfg):
    from .dense import evolve_exact, fidelity
    from .variational import apply_ansatz, var_evolve
    H = build_hamiltonian(cfg.hamiltonian)
    res = _vqe(cfg, H)
    dt = float(cfg.grid.dt)
    T = float(cfg.grid.T) if args.T is None else args.T
    spec = diagonalize(H)
    psi0 = apply_ansatz(res.state)
    rows = []
    for sign in (1, -1):
        traj = var_evolve(res.state, H, sign * T, dt / args.substeps, lam=args.lam, outer_dt=dt)
        exact = evolve_exact(psi0, spec, traj.times)
        for k, t in enumerate(traj.times):
            if sign < 0 and k == 0:
                continue
            rows.append([t, fidelity(traj.state(k), exact[:, k])])
    rows.sort()
    _write_rows(os.path.join(cfg.output.directory, "varsim_fidelity.csv"), ["t", "fidelity"],
                rows)


def cmd_mps(args, cfg):
    if cfg.backend.kind != "mps":
        cfg.backend.kind = "mps"
    corr = compute_grid(cfg, build_problem(cfg))
    path = args.grid_out or os.path.join(cfg.output.directory, "grid.txt")
    save_grid(corr, path)
    print(path)


def cmd_spectroscopy(args, cfg):
    from .spectroscopy import spectroscopy
    corr = load_grid(args.grid)
    z = corr.grid.zero_index
    peaks = spectroscopy(corr.B[z, z:], corr.grid.times[z:], pad=args.pad, center=args.center)
    _write_rows(os.path.join(cfg.output.directory, "spectroscopy.csv"), ["frequency", "weight"],
                [[p.frequency, p.weight] for p in peaks])
    for p in peaks[:5]:
        print(f"{p.frequency!r} {p.weight!r}")


def cmd_extrapolate_copies(args, cfg):
    with open(args.estimates, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "n_copies" not in rows[0] or not {"value", "mean_value"} & set(rows[0]):
        raise ParseError("expected a CSV with n_copies and value (or mean_value) columns", 1)
    key = "value" if "value" in rows[0] else "mean_value"
    by_n: dict = {}
    for r in rows:
        by_n.setdefault(int(r["n_copies"]), []).append(float(r[key]))
    pairs = [(n, float(np.mean(v))) for n, v in sorted(by_n.items())]
    fit = extrapolate_copies(pairs)
    _write_rows(os.path.join(cfg.output.directory, "copy_extrapolation.csv"),
                ["limit", "a", "b", "c", "degenerate", "residual"],
                [[fit.limit, fit.a, fit.b, fit.c, fit.degenerate, fit.residual]])
    print(repr(fit.limit))


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--seed", type=int, help="override dde.seed")
    common.add_argument("--out", help="override output.directory")
    p = argparse.ArgumentParser(prog="dde", description="Dominant-eigenstate distillation")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("hamiltonian", parents=[common], help="build and dump the Hamiltonian")
    g = sub.add_parser("grid", parents=[common], help="compute, perturb or extrapolate grids")
    g.add_argument("--input", help="start from an existing grid file")
    g.add_argument("--shot-noise", type=int, help="inject Gaussian shot noise with N_s shots")
    g.add_argument("--extrapolate", nargs="+", help="grid files at several M to extrapolate")
    g.add_argument("--grid-out", help="output grid path")
    d = sub.add_parser("dde", parents=[common], help="sample and estimate")
    d.add_argument("--grid", help="grid file (otherwise computed from the config)")
    d.add_argument("--reference", type=float, help="exact value for the error columns")
    d.add_argument("--with-reference", action="store_true",
                   help="diagonalize to get the reference when reading a grid file")
    b = sub.add_parser("bounds", parents=[common], help="spectral-tail and copy-count bound report")
    b.add_argument("--sigma", type=float, nargs="+")
    sub.add_parser("vqe", parents=[common], help="train the variational initial state")
    v = sub.add_parser("varsim", parents=[common], help="variational time evolution")
    v.add_argument("--T", type=float, help="override grid.T")
    v.add_argument("--substeps", type=int, default=1000, help="integrator steps per grid step")
    v.add_argument("--lam", type=float, default=1e-4)
    m = sub.add_parser("mps", parents=[common], help="TEBD correlator grid")
    m.add_argument("--grid-out")
    s = sub.add_parser("spectroscopy", parents=[common], help="peaks from a grid's overlap row")
    s.add_argument("--grid", required=True)
    s.add_argument("--pad", type=int, default=8)
    s.add_argument("--center", type=float, default=0.0,
                   help="middle of the frequency window (frequencies are known mod 2 pi / dt)")
    e = sub.add_parser("extrapolate-copies", parents=[common], help="extrapolate in n")
    e.add_argument("--estimates", required=True, help="estimates.csv or sweep.csv")
    return p


_COMMANDS = {
    "hamiltonian": cmd_hamiltonian,
    "grid": cmd_grid,
    "dde": cmd_dde,
    "bounds": cmd_bounds,
    "vqe": cmd_vqe,
    "varsim": cmd_varsim,
    "mps": cmd_mps,
    "spectroscopy": cmd_spectroscopy,
    "extrapolate-copies": cmd_extrapolate_copies,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _prepare(args)
        _COMMANDS[args.command](args, cfg)
    except DDEError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG if exc.category in _CONFIG_CATEGORIES else EXIT_NUMERICAL
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error[numerical]: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
