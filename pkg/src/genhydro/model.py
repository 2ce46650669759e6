"""Fluxes, dissipation matrix, relaxation source and normal-form transforms.

The scaled generalized system reads

    U_t + div F(U) + (1/eps) div G(U) = -(1/eps^2) (0, M(U) eta_{U^II})

Sign convention: this module is the single place where the dissipative
entropy variables are defined, ``eta_{U^II} = (-q, -tau/theta) = (w/alpha1,
c/alpha2)``.  Everything else (source, normal form, prepared data) goes
through :func:`dissipative_forces`.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .thermo import (ModelParams, DomainError, conjugates, eta_hessian, identity_packed,
                     pack_sym, primitives, unpack_sym)


def dissipative_forces(U, params: ModelParams):
    """``eta_{U^II}(U) = (-q, -tau/theta)``, shape ``(..., dim + n_sym)``."""
    P = primitives(U, params)
    return np.concatenate([P.w / params.alpha1, P.c / params.alpha2], axis=-1)


def flux_F(U, params: ModelParams):
    """Convective fluxes ``F_j = v_j U + (0, pi e_j, pi v_j, 0, 0)``; shape ``(..., dim, n)``."""
    U = np.asarray(U)
    lay = params.layout
    P = primitives(U, params)
    pi = params.R_gas * P.u / (params.c_v * P.nu)
    F = P.v[..., :, None] * U[..., None, :]
    idx = np.arange(params.dim)
    F[..., idx, 1 + idx] += pi[..., None]
    F[..., :, lay.energy] += pi[..., None] * P.v
    return F


def flux_G(U, params: ModelParams):
    """Stiff fluxes, shape ``(..., dim, n)``.

    Rows: mass 0; momentum ``tau_ij``; energy ``q_j + (tau v)_j``; heat
    ``delta_ij / theta``; stress ``-sym(e_j (x) v)``.  The last block is the
    flux whose divergence is ``-(grad v + grad v^T)/2``.
    """
    U = np.asarray(U)
    lay = params.layout
    dim = params.dim
    P = primitives(U, params)
    cs = conjugates(U, params)
    tau = unpack_sym(cs.tau, dim)
    G = np.zeros(U.shape[:-1] + (dim, lay.n_state))
    G[..., :, lay.mom] = tau
    G[..., :, lay.energy] = cs.q + np.einsum("...ij,...j->...i", tau, P.v)
    idx = np.arange(dim)
    G[..., idx, 2 + dim + idx] = (1.0 / cs.theta)[..., None]
    eye = np.eye(dim)
    outer = 0.5 * (eye[:, :, None] * P.v[..., None, None, :]
                   + eye[:, None, :] * P.v[..., None, :, None])
    G[..., :, lay.stress] = -pack_sym(outer)
    return G


def dissipation_matrix(U, params: ModelParams):
    """``M(nu, u, eps w, eps c)`` acting on ``(q, tau/theta)`` in packed coordinates.

    Heat block ``I/(lam theta^2)``; stress block ``theta (P_dev/xi + P_vol/(d kappa))``
    with ``P_vol = i i^T / d``.  ``theta`` depends on ``(nu, u)`` only, so the
    eps-scaling of ``w`` and ``c`` does not enter.
    """
    P = primitives(U, params)
    dim = params.dim
    theta = P.u / params.c_v
    nh = dim
    m = dim + len(identity_packed(dim))
    i_vec = identity_packed(dim)
    p_vol = np.outer(i_vec, i_vec) / dim
    p_dev = np.eye(m - nh) - p_vol
    M = np.zeros(theta.shape + (m, m))
    hi = np.arange(nh)
    M[..., hi, hi] = (1.0 / (params.lam * theta**2))[..., None]
    stress_block = p_dev / params.xi + p_vol / (dim * params.kappa)
    M[..., nh:, nh:] = theta[..., None, None] * stress_block
    return M


def kfns_matrix(U, params: ModelParams):
    """Fourier-Newton-Stokes matrix mapping ``(grad 1/T, -sym grad v)`` to ``(q, tau/T)``."""
    P = primitives(U, params)
    dim = params.dim
    T = P.u / params.c_v
    i_vec = identity_packed(dim)
    m = dim + len(i_vec)
    p_vol = np.outer(i_vec, i_vec) / dim
    p_dev = np.eye(m - dim) - p_vol
    K = np.zeros(T.shape + (m, m))
    hi = np.arange(dim)
    K[..., hi, hi] = (params.lam * T**2)[..., None]
    K[..., dim:, dim:] = (params.xi * p_dev + params.kappa * dim * p_vol) / T[..., None, None]
    return K


def source(U, params: ModelParams):
    """Relaxation source: zero in conserved rows, ``-(1/eps^2) M eta_{U^II}`` otherwise."""
    lay = params.layout
    z = dissipative_forces(U, params)
    M = dissipation_matrix(U, params)
    S = np.zeros(np.shape(U))
    S[..., lay.extra] = -np.einsum("...ij,...j->...i", M, z) / params.epsilon**2
    return S


def entropy_production(U, params: ModelParams):
    """``sigma = -(1/eps^2) eta_{U^II} . M eta_{U^II}`` (never positive)."""
    z = dissipative_forces(U, params)
    M = dissipation_matrix(U, params)
    return -np.einsum("...i,...ij,...j->...", z, M, z) / params.epsilon**2


def relaxation_rates_1d(U, params: ModelParams):
    """Per-cell decay rates of ``(rho w, rho c)`` under the source alone (d = 1).

    In one dimension the source is diagonal, ``S_W = -r_w W`` and ``S_C = -r_c C``
    with rates depending on ``(rho, u)`` only.
    """
    if params.dim != 1:
        raise ValueError("relaxation_rates_1d requires dim == 1")
    P = primitives(U, params)
    theta = P.u / params.c_v
    eps2 = params.epsilon**2
    r_w = 1.0 / (eps2 * params.alpha1 * params.lam * theta**2 * P.rho)
    r_c = theta / (eps2 * params.alpha2 * params.kappa * P.rho)
    return r_w, r_c


# -- Jacobians -------------------------------------------------------------------

class Jacobians(NamedTuple):
    F_U: np.ndarray
    G_U: np.ndarray
    converged: bool


def _central_jacobian(fun, U, h):
    # all 2n perturbed states in one vectorized flux call
    n = U.size
    D = np.diag(h)
    out = fun(np.concatenate([U + D, U - D]))
    return np.moveaxis((out[:n] - out[n:]) / (2 * h[:, None, None]), 0, -1)


def jacobians(U, params: ModelParams, rel_step: float = 1e-4, rtol: float = 1e-6) -> Jacobians:
    """Flux Jacobians ``F_jU``, ``G_jU`` of a single state by central differences.

    The step-h and step-h/2 differences are combined by Richardson extrapolation;
    ``converged`` is False when the two differ by more than ``rtol`` relative
    after extrapolation is taken into account (error estimate ``|D_h - D_h/2|/3``).
    """
    U = np.asarray(U, dtype=float)
    if U.ndim != 1:
        raise ValueError("jacobians expects a single state vector")
    primitives(U, params)
    h = rel_step * (1.0 + np.abs(U))
    out = []
    ok = True
    for fun in (lambda X: flux_F(X, params), lambda X: flux_G(X, params)):
        d1 = _central_jacobian(fun, U, h)
        d2 = _central_jacobian(fun, U, h / 2)
        rich = (4.0 * d2 - d1) / 3.0
        scale = max(np.max(np.abs(rich)), 1e-300)
        if np.max(np.abs(d2 - d1)) / 3.0 > rtol * scale * 10:
            ok = False
        out.append(rich)
    return Jacobians(out[0], out[1], ok)


# -- normal form ------------------------------------------------------------------

def to_normal(U, params: ModelParams):
    """``V = (U^I, eta_{U^II}(U))``."""
    U = np.asarray(U, dtype=float)
    lay = params.layout
    V = U.copy()
    V[..., lay.extra] = dissipative_forces(U, params)
    return V


def from_normal(V, params: ModelParams):
    """Closed-form inverse of :func:`to_normal`: ``W = rho alpha1 V_w``, ``C = rho alpha2 V_c``."""
    V = np.asarray(V, dtype=float)
    lay = params.layout
    rho = V[..., lay.rho]
    if np.any(~(rho > 0)):
        raise DomainError("density must be positive")
    U = V.copy()
    U[..., lay.heat] = rho[..., None] * params.alpha1 * V[..., lay.heat]
    U[..., lay.stress] = rho[..., None] * params.alpha2 * V[..., lay.stress]
    primitives(U, params)
    return U


def normal_jacobian(U, params: ModelParams):
    """``J = dV/dU`` (analytic)."""
    U = np.asarray(U, dtype=float)
    lay = params.layout
    P = primitives(U, params)
    n = lay.n_state
    J = np.zeros(U.shape[:-1] + (n, n))
    J[..., np.arange(lay.n_cons), np.arange(lay.n_cons)] = 1.0
    for blk, alpha in ((lay.heat, params.alpha1), (lay.stress, params.alpha2)):
        idx = np.arange(n)[blk]
        J[..., idx, idx] = (1.0 / (P.rho * alpha))[..., None]
        J[..., idx, 0] = -U[..., blk] / (P.rho**2 * alpha)[..., None]
    return J


class NormalForm(NamedTuple):
    A0: np.ndarray
    A: np.ndarray
    B: np.ndarray
    H: np.ndarray


def normal_form(U, params: ModelParams, jac: Jacobians | None = None) -> NormalForm:
    """Symmetrizer ``A0``, convection matrices ``A_j, B_j`` and ``H`` at one state."""
    U = np.asarray(U, dtype=float)
    lay = params.layout
    if jac is None:
        jac = jacobians(U, params)
    J = normal_jacobian(U, params)
    Jinv = np.linalg.inv(J)
    hess = eta_hessian(U, params)
    A0 = Jinv.T @ hess @ Jinv
    A = np.einsum("ik,jkl,lm->jim", J, jac.F_U, Jinv)
    B = np.einsum("ik,jkl,lm->jim", J, jac.G_U, Jinv)
    ex = lay.extra
    H = hess[ex, ex] @ dissipation_matrix(U, params)
    return NormalForm(A0, A, B, H)


# -- characteristic speeds (d = 1) --------------------------------------------

def characteristic_speeds_1d(U, params: ModelParams):
    """Closed-form eigenvalues of ``F_U + G_U/eps`` in one dimension.

    Besides the material wave ``v``, the speeds are ``v +- sqrt(X)`` where ``X``
    solves ``rho^2 X^2 - (a rho^2 + g + b) X + a g = 0`` with
    ``a = R theta + theta/(alpha2 eps^2 rho^2)``, ``g = c_v/(alpha1 eps^2 u^2)``
    and ``b = (pi_u + tau_u/eps)(pi + tau/eps)``.  Returns ``(..., 5)`` sorted.
    """
    if params.dim != 1:
        raise ValueError("characteristic_speeds_1d requires dim == 1")
    P = primitives(U, params)
    eps = params.epsilon
    c = P.c[..., 0]
    theta = P.u / params.c_v
    pi = params.R_gas * P.rho * theta
    tau = -theta * c / params.alpha2
    a = params.R_gas * theta + theta / (params.alpha2 * eps**2 * P.rho**2)
    g = params.c_v / (params.alpha1 * eps**2 * P.u**2)
    pi_u = params.R_gas * P.rho / params.c_v
    tau_u = -c / (params.c_v * params.alpha2)
    b = (pi_u + tau_u / eps) * (pi + tau / eps)
    r2 = P.rho**2
    s = a * r2 + g + b
    disc = np.sqrt(np.maximum(s * s - 4.0 * r2 * a * g, 0.0))
    x_hi = (s + disc) / (2.0 * r2)
    x_lo = a * g / (r2 * x_hi)
    root_hi = np.sqrt(np.maximum(x_hi, 0.0))
    root_lo = np.sqrt(np.maximum(x_lo, 0.0))
    v = P.v[..., 0]
    lam = np.stack([v - root_hi, v - root_lo, v, v + root_lo, v + root_hi], axis=-1)
    return lam


def max_speed_1d(U, params: ModelParams):
    """Per-cell spectral radius of ``F_U + G_U/eps`` (d = 1)."""
    lam = characteristic_speeds_1d(U, params)
    return np.max(np.abs(lam), axis=-1)
