"""1D periodic Navier-Stokes-Fourier reference solver.

Same grid and point-value conventions as :mod:`genhydro.solver_ghe`.  The
Euler flux uses the Rusanov-split conservative scheme, the viscous and heat
fluxes fourth-order central differences, and time stepping is SSP-RK3.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discretization import d2dx2, ddx, flux_divergence, pairwise_sum
from .solver_ghe import (Field, Grid1D, ImexConfig, SolverAbort, Trajectory, _write_rows,
                         run as _run_generic)
from .thermo import DomainError, ModelParams, eos_equilibrium

N_CONS = 3


@dataclass
class NsfField(Field):
    """Field of ``(rho, rho v, rho e)`` point values."""


def nsf_primitives(U, params: ModelParams, check: bool = True):
    rho = U[:, 0]
    if check and np.any(~(rho > 0)):
        raise DomainError(f"density not positive at {np.argwhere(~(rho > 0))[:5, 0].tolist()}")
    v = U[:, 1] / rho
    u = U[:, 2] / rho - 0.5 * v * v
    if check and np.any(~(u > 0)):
        raise DomainError(f"temperature not positive at {np.argwhere(~(u > 0))[:5, 0].tolist()}")
    T = u / params.c_v
    p = params.R_gas * rho * T
    return rho, v, u, T, p


def dv_tensor(dvdx, params: ModelParams):
    """``D[v] = xi (sym grad v - div v I/d) + kappa div v I`` from the velocity gradient.

    ``dvdx`` is either a 1D array of ``dv/dx`` values (the shear part then
    cancels and ``D = kappa dv/dx``) or an array ``(..., d, d)`` of gradients
    ``G_ab = d v_b / d x_a``.
    """
    g = np.asarray(dvdx, dtype=float)
    if g.ndim <= 1 or g.shape[-2:] != (g.shape[-1], g.shape[-1]):
        return params.kappa * g
    d = g.shape[-1]
    sym = 0.5 * (g + np.swapaxes(g, -1, -2))
    div = np.trace(g, axis1=-2, axis2=-1)[..., None, None]
    eye = np.eye(d)
    return params.xi * (sym - div * eye / d) + params.kappa * div * eye


def euler_flux(U, params: ModelParams):
    rho, v, u, T, p = nsf_primitives(U, params)
    return np.column_stack([U[:, 1], U[:, 1] * v + p, (U[:, 2] + p) * v])


def euler_speed(U, params: ModelParams):
    rho, v, u, T, p = nsf_primitives(U, params)
    return np.abs(v) + np.sqrt(params.gamma * p / rho)


def euler_rhs(U, grid: Grid1D, params: ModelParams, config: ImexConfig):
    return -flux_divergence(euler_flux(U, params), U, euler_speed(U, params),
                            grid.dx, config.order, config.limiter)


def viscous_rhs(U, grid: Grid1D, params: ModelParams):
    """``d/dx (0, D[v], D[v] v + lam dT/dx)`` with ``D[v] = kappa v_x`` in 1D."""
    rho, v, u, T, p = nsf_primitives(U, params)
    dx = grid.dx
    out = np.zeros_like(U)
    out[:, 1] = params.kappa * d2dx2(v, dx)
    out[:, 2] = 0.5 * params.kappa * d2dx2(v * v, dx) + params.lam * d2dx2(T, dx)
    return out


def nsf_rhs(U, grid, params, config, inviscid: bool = False):
    rhs = euler_rhs(U, grid, params, config)
    if not inviscid:
        rhs = rhs + viscous_rhs(U, grid, params)
    return rhs


def nsf_stable_dt(field: Field, params: ModelParams, config: ImexConfig, inviscid: bool = False):
    U = field.U
    dx = field.grid.dx
    smax = float(np.max(euler_speed(U, params)))
    dt = config.cfl * dx / smax
    if not inviscid:
        rho = U[:, 0]
        nu_max = float(np.max(np.maximum(params.kappa / rho, params.lam / (rho * params.c_v))))
        dt = min(dt, 0.4 * dx * dx / nu_max)
    return dt, smax


def nsf_step(field: Field, params: ModelParams, config: ImexConfig, dt: float | None = None,
             inviscid: bool = False) -> Field:
    """One SSP-RK3 step of the Navier-Stokes-Fourier system."""
    _check(field.U, params)
    if dt is None:
        dt, _ = nsf_stable_dt(field, params, config, inviscid)
    grid = field.grid

    def L(X):
        return nsf_rhs(X, grid, params, config, inviscid)

    U0 = field.U
    U1 = U0 + dt * L(U0)
    _check(U1, params)
    U2 = 0.75 * U0 + 0.25 * (U1 + dt * L(U1))
    _check(U2, params)
    U = U0 / 3.0 + 2.0 / 3.0 * (U2 + dt * L(U2))
    _check(U, params)
    return type(field)(grid, U, field.t + dt)


def _check(U, params):
    if not np.all(np.isfinite(U)):
        raise SolverAbort("non-finite NSF state")
    try:
        nsf_primitives(U, params)
    except DomainError as err:
        raise SolverAbort(f"inadmissible NSF state: {err}") from err


def nsf_entropy_total(field: Field, params: ModelParams) -> float:
    rho, v, u, T, p = nsf_primitives(field.U, params)
    s_eq, _, _ = eos_equilibrium(1.0 / rho, u, params)
    return float(pairwise_sum(-rho * s_eq) * field.grid.dx)


def nsf_totals(field: Field, params: ModelParams):
    return pairwise_sum(field.U) * field.grid.dx


def run(initial: Field, params: ModelParams, config: ImexConfig, snapshot_times=None,
        record_every: int = 1, inviscid: bool = False) -> Trajectory:
    """Integrate to ``config.t_end`` (see :func:`genhydro.solver_ghe.run`)."""
    def stepper(f, p, c, dt=None):
        return nsf_step(f, p, c, dt=dt, inviscid=inviscid)

    def dt_rule(f, p, c):
        return nsf_stable_dt(f, p, c, inviscid)

    return _run_generic(initial, params, config, snapshot_times, record_every,
                        stepper=stepper, dt_rule=dt_rule,
                        entropy=nsf_entropy_total, total=nsf_totals)


def maxwell_closure(U, grid: Grid1D, params: ModelParams):
    """First-order closure ``q = -eps lam T_x``, ``tau = -eps D[v]`` of an NSF field."""
    rho, v, u, T, p = nsf_primitives(U, params)
    q = -params.epsilon * params.lam * ddx(T, grid.dx)
    tau = -params.epsilon * dv_tensor(ddx(v, grid.dx), params)
    return q, tau


def write_nsf_snapshot_csv(path, field: Field, params: ModelParams):
    """NSF snapshot in the GHE column layout; extra columns hold the Maxwell closure."""
    rho, v, u, T, p = nsf_primitives(field.U, params)
    q, tau = maxwell_closure(field.U, field.grid, params)
    w = -params.alpha1 * q
    c = -params.alpha2 * tau / T
    s_eq, _, _ = eos_equilibrium(1.0 / rho, u, params)
    rows = np.column_stack([field.grid.x, rho, v, field.U[:, 2] / rho, w, c, q, tau, T, p,
                            -rho * s_eq])
    comment = (f"Navier-Stokes-Fourier snapshot t={field.t:.17g}; columns w, c, q, tau hold the "
               f"Maxwell-iteration values q=-eps*lam*dT/dx, tau=-eps*D[v] with eps={params.epsilon:.17g}")
    _write_rows(path, rows, comment)

