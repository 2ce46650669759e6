"""1D periodic integrator for the scaled generalized hydrodynamic system.

Two time integrators are available:

``"strang"``
    half relaxation step (exact exponential decay of ``rho w``, ``rho c`` with
    frozen ``(rho, u)``), SSP-RK3 for the flux part, half relaxation step.
``"ars443"``
    the L-stable, stiffly accurate IMEX Runge-Kutta scheme ARS(4,4,3).  The
    implicit stages reduce to the same closed-form scalar solve.

Splitting error of the first option grows like ``(dt/eps^2)^2`` relative to
the slow dynamics, so the convergence experiments use ``"ars443"``.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .discretization import flux_divergence, pairwise_sum
from .model import flux_F, flux_G, max_speed_1d, relaxation_rates_1d
from .thermo import DomainError, ModelParams, conjugates, eta, primitives

log = logging.getLogger(__name__)

SNAPSHOT_COLUMNS = ("x", "rho", "v", "e", "w", "c", "q", "tau", "theta", "pi", "eta")


class SolverAbort(RuntimeError):
    """Numerical abort: inadmissible state or invalid step."""


@dataclass(frozen=True)
class Grid1D:
    n_cells: int
    length: float = 1.0

    def __post_init__(self):
        if self.n_cells < 8:
            raise ValueError("n_cells must be at least 8")
        if not self.length > 0:
            raise ValueError("length must be positive")

    @property
    def dx(self) -> float:
        return self.length / self.n_cells

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n_cells) * self.dx


@dataclass
class Field:
    grid: Grid1D
    U: np.ndarray
    t: float = 0.0

    def copy(self) -> "Field":
        return Field(self.grid, self.U.copy(), self.t)


@dataclass(frozen=True)
class ImexConfig:
    cfl: float = 0.45
    t_end: float = 0.2
    limiter: bool = False
    order: int = 5
    scheme: str = "ars443"

    def __post_init__(self):
        if not 0 < self.cfl < 1:
            raise ValueError("cfl must lie in (0, 1)")
        if self.order not in (1, 5):
            raise ValueError("order must be 1 or 5")
        if self.scheme not in ("strang", "ars443"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not self.t_end >= 0:
            raise ValueError("t_end must be non-negative")


def total_flux_1d(U, params: ModelParams):
    return flux_F(U, params)[:, 0, :] + flux_G(U, params)[:, 0, :] / params.epsilon


def flux_rhs(U, grid: Grid1D, params: ModelParams, config: ImexConfig):
    """``-d/dx (F + G/eps)`` with the Rusanov-split flux."""
    H = total_flux_1d(U, params)
    speed = max_speed_1d(U, params)
    return -flux_divergence(H, U, speed, grid.dx, config.order, config.limiter)


def relax(U, params: ModelParams, dt: float):
    """Exact solution of the source-only ODE over ``dt`` (conserved rows frozen)."""
    lay = params.layout
    r_w, r_c = relaxation_rates_1d(U, params)
    out = U.copy()
    out[:, lay.heat] *= np.exp(-r_w * dt)[:, None]
    out[:, lay.stress] *= np.exp(-r_c * dt)[:, None]
    return out


def implicit_relax(U, params: ModelParams, gdt: float):
    """Solve ``Y = U + gdt S(Y)``; linear in ``(rho w, rho c)`` for fixed ``(rho, u)``."""
    lay = params.layout
    r_w, r_c = relaxation_rates_1d(U, params)
    out = U.copy()
    out[:, lay.heat] /= (1.0 + gdt * r_w)[:, None]
    out[:, lay.stress] /= (1.0 + gdt * r_c)[:, None]
    return out


def _source_from_stage(Y, params):
    lay = params.layout
    r_w, r_c = relaxation_rates_1d(Y, params)
    S = np.zeros_like(Y)
    S[:, lay.heat] = -r_w[:, None] * Y[:, lay.heat]
    S[:, lay.stress] = -r_c[:, None] * Y[:, lay.stress]
    return S


# ARS(4,4,3): first explicit stage plus four SDIRK stages with gamma = 1/2.
_ARS_AE = np.array([
    [0, 0, 0, 0, 0],
    [1 / 2, 0, 0, 0, 0],
    [11 / 18, 1 / 18, 0, 0, 0],
    [5 / 6, -5 / 6, 1 / 2, 0, 0],
    [1 / 4, 7 / 4, 3 / 4, -7 / 4, 0],
])
_ARS_AI = np.array([
    [0, 0, 0, 0, 0],
    [0, 1 / 2, 0, 0, 0],
    [0, 1 / 6, 1 / 2, 0, 0],
    [0, -1 / 2, 1 / 2, 1 / 2, 0],
    [0, 3 / 2, -3 / 2, 1 / 2, 1 / 2],
])


def _ars443(U, dt, grid, params, config):
    n_stage = 5
    fE = [None] * n_stage
    fI = [None] * n_stage
    Y = U
    for i in range(n_stage):
        if i > 0:
            Z = U.copy()
            for j in range(i):
                if _ARS_AE[i, j]:
                    Z += dt * _ARS_AE[i, j] * fE[j]
                if _ARS_AI[i, j]:
                    Z += dt * _ARS_AI[i, j] * fI[j]
            Y = implicit_relax(Z, params, dt * _ARS_AI[i, i])
            _check(Y, params, f"ARS stage {i}")
        if i < n_stage - 1:
            fE[i] = flux_rhs(Y, grid, params, config)
        fI[i] = _source_from_stage(Y, params)
    # stiffly accurate: the last stage is the solution
    return Y


def _ssprk3(U, dt, grid, params, config):
    def L(X):
        return flux_rhs(X, grid, params, config)
    U1 = U + dt * L(U)
    _check(U1, params, "SSPRK3 stage 1")
    U2 = 0.75 * U + 0.25 * (U1 + dt * L(U1))
    _check(U2, params, "SSPRK3 stage 2")
    return U / 3.0 + 2.0 / 3.0 * (U2 + dt * L(U2))


def _check(U, params, where):
    if not np.all(np.isfinite(U)):
        bad = np.argwhere(~np.isfinite(U))[:5, 0].tolist()
        raise SolverAbort(f"non-finite state at cells {bad} ({where})")
    try:
        primitives(U, params)
    except DomainError as err:
        raise SolverAbort(f"inadmissible state ({where}): {err}") from err


def stable_dt(field: Field, params: ModelParams, config: ImexConfig):
    speed = max_speed_1d(field.U, params)
    smax = float(np.max(speed))
    return config.cfl * field.grid.dx / smax, smax


def step(field: Field, params: ModelParams, config: ImexConfig, dt: float | None = None) -> Field:
    """Advance one step; returns a new field."""
    if params.dim != 1:
        raise ValueError("time evolution is implemented for dim == 1 only")
    _check(field.U, params, "step input")
    if dt is None:
        dt, _ = stable_dt(field, params, config)
    try:
        if config.scheme == "strang":
            U = relax(field.U, params, 0.5 * dt)
            U = _ssprk3(U, dt, field.grid, params, config)
            U = relax(U, params, 0.5 * dt)
        else:
            U = _ars443(field.U, dt, field.grid, params, config)
    except DomainError as err:
        raise SolverAbort(f"inadmissible stage state at t={field.t:.6g}: {err}") from err
    _check(U, params, f"after step at t={field.t:.6g}")
    return Field(field.grid, U, field.t + dt)


def totals(field: Field, params: ModelParams):
    """Domain integrals of mass, momentum and energy (fixed-order reduction)."""
    lay = params.layout
    return pairwise_sum(field.U[:, lay.cons]) * field.grid.dx


def entropy_total(field: Field, params: ModelParams) -> float:
    return float(pairwise_sum(eta(field.U, params)) * field.grid.dx)


@dataclass
class Trajectory:
    snapshots: list = field(default_factory=list)
    times: list = field(default_factory=list)
    dt: list = field(default_factory=list)
    max_speed: list = field(default_factory=list)
    entropy: list = field(default_factory=list)
    totals: list = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return len(self.dt)

    @property
    def final(self) -> Field:
        return self.snapshots[-1]


def run(initial: Field, params: ModelParams, config: ImexConfig,
        snapshot_times=None, record_every: int = 1, *,
        stepper=None, dt_rule=None, entropy=None, total=None) -> Trajectory:
    """Integrate to ``config.t_end``, landing exactly on each snapshot time.

    Entropy and conserved totals are recorded every ``record_every`` steps
    and always after the last one.  The keyword hooks let the NSF solver reuse
    this loop.
    """
    stepper = stepper or step
    dt_rule = dt_rule or stable_dt
    entropy = entropy or entropy_total
    total = total or totals
    targets = sorted(set(float(t) for t in (snapshot_times or []) if initial.t < t < config.t_end))
    targets.append(config.t_end)
    traj = Trajectory()
    f = initial.copy()
    traj.snapshots.append(f.copy())
    traj.times.append(f.t)
    traj.entropy.append(entropy(f, params))
    traj.totals.append(total(f, params))
    k = 0
    for target in targets:
        while target - f.t > 1e-14 * max(1.0, abs(target)):
            dt, smax = dt_rule(f, params, config)
            dt = min(dt, target - f.t)
            f = stepper(f, params, config, dt=dt)
            k += 1
            traj.dt.append(dt)
            traj.max_speed.append(smax)
            if k % record_every == 0:
                traj.entropy.append(entropy(f, params))
                traj.totals.append(total(f, params))
        f.t = target
        if k % record_every:
            traj.entropy.append(entropy(f, params))
            traj.totals.append(total(f, params))
        traj.snapshots.append(f.copy())
        traj.times.append(target)
    log.debug("run finished: %d steps", k)
    return traj


def write_snapshot_csv(path, field: Field, params: ModelParams, comment: str | None = None):
    """Write one snapshot with the columns of :data:`SNAPSHOT_COLUMNS` (17 significant digits)."""
    P = primitives(field.U, params)
    cs = conjugates(field.U, params)
    rows = np.column_stack([
        field.grid.x, P.rho, P.v[:, 0], P.e, P.w[:, 0], P.c[:, 0],
        cs.q[:, 0], cs.tau[:, 0], cs.theta, cs.pi, eta(field.U, params),
    ])
    _write_rows(path, rows, comment)


def _write_rows(path, rows, comment=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(SNAPSHOT_COLUMNS)
        for row in rows:
            writer.writerow([f"{val:.17g}" for val in row])


def read_snapshot_csv(path):
    """Read a snapshot CSV into a dict of column arrays (comment lines skipped)."""
    with Path(path).open() as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    data = np.array([[float(v) for v in row] for row in reader])
    return {name: data[:, i] for i, name in enumerate(header)}
