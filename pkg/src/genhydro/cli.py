"""Command-line entry point: ``genhydro {check,simulate,converge,maxwell,residual}``.

Configuration is a plain ``key = value`` file (``#`` starts a comment) plus
flag overrides.  Unknown keys are rejected.  Exit codes: 0 pass, 1 experiment
failed, 2 usage or configuration error, 3 numerical abort.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness, solver_ghe, solver_nsf, structure
from .solver_ghe import Grid1D, SolverAbort
from .thermo import DomainError, ModelParams

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_ABORT = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


def _floats(text):
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


def _ints(text):
    return tuple(int(x) for x in text.replace(";", ",").split(",") if x.strip())


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (parser, default)
KEYS = {
    "c_v": (float, 1.5), "R_gas": (float, 1.0), "lam": (float, 0.1), "xi": (float, 0.1),
    "kappa": (float, 0.1), "alpha1": (float, 1.0), "alpha2": (float, 1.0),
    "epsilon": (float, 0.05), "dim": (int, 1),
    "epsilons": (_floats, (0.08, 0.04, 0.02, 0.01)),
    "n_cells": (int, 512), "length": (float, 1.0), "ic": (str, "wave"),
    "amplitude": (float, 0.1), "t_end": (float, 0.2),
    "snapshot_times": (_floats, (0.05, 0.1, 0.15)),
    "cfl": (float, 0.45), "order": (int, 5), "limiter": (_bool, False),
    "scheme": (str, "ars443"), "well_prepared": (_bool, True), "guard": (_bool, True),
    "residual_times": (_floats, (0.05, 0.1, 0.15)), "residual_dt": (float, 2e-3),
    "model": (str, "ghe"), "samples": (int, 100), "dims": (_ints, (1, 2, 3)),
    "seed": (int, 0), "threads": (int, 1), "out": (str, "out"),
}
_PARAM_KEYS = ("c_v", "R_gas", "lam", "xi", "kappa", "alpha1", "alpha2", "epsilon", "dim")
_EXPERIMENT_KEYS = tuple(f.name for f in dataclasses.fields(harness.ExperimentConfig))


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines; raises :class:`ConfigError` on unknown keys or bad values."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = KEYS[key][0](val)
        except ValueError as err:
            raise ConfigError(f"line {lineno}: bad value for {key}: {err}") from err
    return values


@dataclasses.dataclass
class RunConfig:
    values: dict
    source_text: str = ""

    def __getitem__(self, key):
        return self.values[key]

    def params(self) -> ModelParams:
        try:
            return ModelParams(**{k: self.values[k] for k in _PARAM_KEYS})
        except ValueError as err:
            raise ConfigError(str(err)) from err

    def experiment(self) -> harness.ExperimentConfig:
        try:
            return harness.ExperimentConfig(**{k: self.values[k] for k in _EXPERIMENT_KEYS})
        except ValueError as err:
            raise ConfigError(str(err)) from err

    def resolved_text(self) -> str:
        lines = []
        for key in KEYS:
            v = self.values[key]
            if isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            lines.append(f"{key} = {v}")
        return "\n".join(lines) + "\n"


def load_config(args) -> RunConfig:
    text = ""
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as err:
            raise ConfigError(f"cannot read config: {err}") from err
    values = {k: d for k, (_, d) in KEYS.items()}
    values.update(parse_config(text))
    if args.out is not None:
        values["out"] = args.out
    if args.seed is not None:
        values["seed"] = args.seed
    if args.threads is not None:
        values["threads"] = args.threads
    if args.epsilon is not None:
        try:
            eps = _floats(args.epsilon)
        except ValueError as err:
            raise ConfigError(f"bad --epsilon: {err}") from err
        if not eps:
            raise ConfigError("--epsilon needs at least one value")
        values["epsilons"] = eps
        values["epsilon"] = eps[0]
    if values["threads"] < 1:
        raise ConfigError("threads must be at least 1")
    if values["model"] not in ("ghe", "nsf"):
        raise ConfigError("model must be 'ghe' or 'nsf'")
    if values["samples"] < 1:
        raise ConfigError("samples must be at least 1")
    if any(d not in (1, 2, 3) for d in values["dims"]):
        raise ConfigError("dims must be drawn from 1, 2, 3")
    cfg = RunConfig(values, text)
    cfg.params()
    cfg.experiment()
    return cfg


def _prepare_out(cfg: RunConfig) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.source_text)
    (out / "config_resolved.txt").write_text(cfg.resolved_text())
    return out


def _emit(out: Path, name: str, text: str):
    (out / name).write_text(text)
    sys.stdout.write(text)


def cmd_check(cfg: RunConfig) -> int:
    out = _prepare_out(cfg)
    rep = structure.run_all(cfg.params(), seed=cfg["seed"], n=cfg["samples"], dims=cfg["dims"])
    (out / "structure.csv").write_text(rep.to_csv())
    _emit(out, "structure.txt", rep.to_text())
    return EXIT_PASS if rep.passed else EXIT_FAIL


def _history_csv(traj) -> str:
    lines = ["step,t,dt,max_speed"]
    t = traj.times[0]
    for k, (dt, s) in enumerate(zip(traj.dt, traj.max_speed), 1):
        t += dt
        lines.append(f"{k},{t:.17g},{dt:.17g},{s:.17g}")
    return "\n".join(lines) + "\n"


def cmd_simulate(cfg: RunConfig) -> int:
    out = _prepare_out(cfg)
    params = cfg.params()
    ex = cfg.experiment()
    if params.dim != 1:
        raise ConfigError("simulate supports dim = 1 only")
    grid = Grid1D(ex.n_cells, ex.length)
    nsf0 = harness.initial_nsf(grid, params, ex.ic, ex.amplitude)
    if cfg["model"] == "nsf":
        run_cfg = solver_ghe.ImexConfig(cfl=ex.cfl, t_end=ex.t_end, order=ex.order,
                                        limiter=ex.limiter)
        traj = solver_nsf.run(nsf0, params, run_cfg, ex.snapshot_times)
        for f in traj.snapshots:
            solver_nsf.write_nsf_snapshot_csv(out / f"snapshot_t{f.t:.6f}.csv", f, params)
    else:
        init = harness.prepare(nsf0, params, ex.well_prepared).field
        traj = solver_ghe.run(init, params, ex.imex(), ex.snapshot_times)
        for f in traj.snapshots:
            solver_ghe.write_snapshot_csv(out / f"snapshot_t{f.t:.6f}.csv", f, params,
                                          comment=f"generalized system t={f.t:.17g}")
    (out / "steps.csv").write_text(_history_csv(traj))
    ent = "\n".join(f"{e:.17g}" for e in traj.entropy)
    (out / "entropy.csv").write_text("entropy_total\n" + ent + "\n")
    rise = harness.entropy_increase(traj)
    drift = harness.conservation_drift(traj)
    msg = (f"{cfg['model']} run: {traj.n_steps} steps to t={traj.final.t:g}; "
           f"max relative entropy rise per step {rise:.2e}; conservation drift {drift:.2e}\n")
    _emit(out, "summary.txt", msg)
    return EXIT_PASS


def _abort_code(rep) -> int | None:
    return EXIT_ABORT if any(not r.ok for r in rep.runs) else None


def cmd_converge(cfg: RunConfig) -> int:
    out = _prepare_out(cfg)
    rep = harness.converge(cfg.params(), cfg["epsilons"], cfg.experiment())
    (out / "report.csv").write_text(harness.rows_to_csv(harness.report_rows(rep)))
    _emit(out, "summary.txt", harness.summary(rep))
    code = _abort_code(rep)
    if code is not None:
        return code
    return EXIT_PASS if rep.passed_rate and rep.passed_balance() else EXIT_FAIL


def cmd_maxwell(cfg: RunConfig) -> int:
    out = _prepare_out(cfg)
    rep = harness.converge(cfg.params(), cfg["epsilons"], cfg.experiment(), maxwell_only=True)
    (out / "report.csv").write_text(harness.rows_to_csv(harness.report_rows(rep)))
    _emit(out, "summary.txt", harness.summary(rep))
    code = _abort_code(rep)
    if code is not None:
        return code
    return EXIT_PASS if rep.passed_maxwell else EXIT_FAIL


def cmd_residual(cfg: RunConfig) -> int:
    out = _prepare_out(cfg)
    ex = cfg.experiment()
    res = harness.residual_sweep(cfg.params(), cfg["epsilons"], ex)
    (out / "report.csv").write_text(harness.rows_to_csv(harness.residual_rows(res)))
    _emit(out, "summary.txt", harness.residual_summary(res))
    return EXIT_PASS if res.passed else EXIT_FAIL


COMMANDS = {"check": cmd_check, "simulate": cmd_simulate, "converge": cmd_converge,
            "maxwell": cmd_maxwell, "residual": cmd_residual}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="genhydro", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--seed", type=int, metavar="N")
    p.add_argument("--threads", type=int, metavar="N",
                   help="accepted for reproducibility bookkeeping; results do not depend on it")
    p.add_argument("--epsilon", metavar="X[,X...]")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        with np.errstate(over="raise", invalid="raise"):
            return COMMANDS[args.command](cfg)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverAbort, DomainError, FloatingPointError) as err:
        print(f"numerical abort: {err}", file=sys.stderr)
        return EXIT_ABORT
    except ValueError as err:
        # harness validation, e.g. too few epsilon values
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
