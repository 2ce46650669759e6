"""Equilibrium EOS, generalized entropy and the mathematical entropy eta(U).

The state vector is laid out as ``U = (rho, rho v, rho e, rho w, rho c)`` with
``v`` and ``w`` of length ``dim`` and the symmetric tensor ``c`` stored packed
(see :func:`pack_sym`).  All functions broadcast over leading axes, so a field
of shape ``(N, n_state)`` is handled the same way as a single state.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np

RHO_MIN = 1e-6
RHO_MAX = 1e6
U_MIN = 1e-10


class DomainError(ValueError):
    """Raised when a state leaves the admissible set."""


def n_sym(dim: int) -> int:
    return dim * (dim + 1) // 2


def _sym_index(dim):
    rows, cols = np.triu_indices(dim)
    weights = np.where(rows == cols, 1.0, np.sqrt(2.0))
    return rows, cols, weights


def pack_sym(a):
    """Pack symmetric matrices ``(..., d, d)`` into ``(..., d(d+1)/2)``.

    Entries are taken row-major from the upper triangle (11, 12, 13, 22, ...)
    and off-diagonals carry a factor sqrt(2), so the Euclidean dot product of
    packed vectors equals the Frobenius product ``A:B``.
    """
    a = np.asarray(a)
    dim = a.shape[-1]
    rows, cols, weights = _sym_index(dim)
    return a[..., rows, cols] * weights


def unpack_sym(p, dim: int):
    """Inverse of :func:`pack_sym`."""
    p = np.asarray(p)
    rows, cols, weights = _sym_index(dim)
    out = np.zeros(p.shape[:-1] + (dim, dim), dtype=p.dtype)
    vals = p / weights
    out[..., rows, cols] = vals
    out[..., cols, rows] = vals
    return out


def identity_packed(dim: int) -> np.ndarray:
    """Packed representation of the identity matrix."""
    return pack_sym(np.eye(dim))


@dataclass(frozen=True)
class StateLayout:
    """Index bookkeeping for ``U = (rho, m, E, W, C)`` in ``dim`` dimensions."""

    dim: int

    @property
    def n_sym(self) -> int:
        return n_sym(self.dim)

    @property
    def n_state(self) -> int:
        return 2 + 2 * self.dim + self.n_sym

    @property
    def n_cons(self) -> int:
        return 2 + self.dim

    @property
    def rho(self) -> int:
        return 0

    @property
    def mom(self) -> slice:
        return slice(1, 1 + self.dim)

    @property
    def energy(self) -> int:
        return 1 + self.dim

    @property
    def heat(self) -> slice:
        return slice(2 + self.dim, 2 + 2 * self.dim)

    @property
    def stress(self) -> slice:
        return slice(2 + 2 * self.dim, self.n_state)

    @property
    def cons(self) -> slice:
        return slice(0, self.n_cons)

    @property
    def extra(self) -> slice:
        return slice(self.n_cons, self.n_state)


@dataclass(frozen=True)
class ModelParams:
    """Material constants, entropy weights and relaxation time.

    ``lam`` is the heat conductivity (``lambda`` is reserved in Python).
    """

    c_v: float = 1.5
    R_gas: float = 1.0
    lam: float = 0.1
    xi: float = 0.1
    kappa: float = 0.1
    alpha1: float = 1.0
    alpha2: float = 1.0
    epsilon: float = 0.05
    dim: int = 1
    layout: StateLayout = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("c_v", "R_gas", "lam", "xi", "kappa", "alpha1", "alpha2", "epsilon"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim!r}")
        object.__setattr__(self, "layout", StateLayout(self.dim))

    @property
    def gamma(self) -> float:
        return 1.0 + self.R_gas / self.c_v

    def with_epsilon(self, epsilon: float) -> "ModelParams":
        return replace(self, epsilon=epsilon)


class Primitives(NamedTuple):
    rho: np.ndarray
    nu: np.ndarray
    v: np.ndarray
    e: np.ndarray
    u: np.ndarray
    w: np.ndarray
    c: np.ndarray


class ConjugateSet(NamedTuple):
    theta: np.ndarray
    pi: np.ndarray
    q: np.ndarray
    tau: np.ndarray
    zeta_w: np.ndarray
    zeta_c: np.ndarray


class EntropyDerivatives(NamedTuple):
    eta: np.ndarray
    grad: np.ndarray
    hess: np.ndarray


def _check_nu_u(nu, u):
    nu = np.asarray(nu)
    u = np.asarray(u)
    if np.any(~(nu > 0)) or np.any(~(u > U_MIN)):
        raise DomainError("specific volume and internal energy must be positive")


def eos_equilibrium(nu, u, params: ModelParams):
    """Ideal-gas equilibrium entropy, temperature and pressure.

    ``s_eq = c_v ln u + R ln nu``, ``T = u / c_v``, ``p = R u / (c_v nu)``.
    """
    _check_nu_u(nu, u)
    s_eq = params.c_v * np.log(u) + params.R_gas * np.log(nu)
    T = u / params.c_v
    p = params.R_gas * T / nu
    return s_eq, T, p


def entropy_generalized(nu, u, w, c, params: ModelParams):
    """Non-equilibrium specific entropy with quadratic penalties on ``w`` and ``c``.

    ``c`` is packed, so ``|c|^2`` below is the Frobenius norm squared.
    """
    s_eq, _, _ = eos_equilibrium(nu, u, params)
    w = np.asarray(w)
    c = np.asarray(c)
    return (s_eq
            - np.sum(w * w, axis=-1) / (2.0 * params.alpha1)
            - np.sum(c * c, axis=-1) / (2.0 * params.alpha2))


def primitives(U, params: ModelParams, check: bool = True) -> Primitives:
    """Per-mass quantities of a conserved state (or field of states)."""
    U = np.asarray(U)
    lay = params.layout
    if U.shape[-1] != lay.n_state:
        raise ValueError(f"expected trailing dimension {lay.n_state}, got {U.shape[-1]}")
    rho = U[..., lay.rho]
    if check and (np.any(~(rho >= RHO_MIN)) or np.any(~(rho <= RHO_MAX))):
        bad = np.argwhere(~((rho >= RHO_MIN) & (rho <= RHO_MAX)))
        raise DomainError(f"density outside [{RHO_MIN}, {RHO_MAX}] at {bad[:5].tolist()}")
    nu = 1.0 / rho
    v = U[..., lay.mom] * nu[..., None]
    e = U[..., lay.energy] * nu
    u = e - 0.5 * np.sum(v * v, axis=-1)
    if check and np.any(~(u > U_MIN)):
        bad = np.argwhere(~(u > U_MIN))
        raise DomainError(f"internal energy not positive at {bad[:5].tolist()}")
    w = U[..., lay.heat] * nu[..., None]
    c = U[..., lay.stress] * nu[..., None]
    return Primitives(rho, nu, v, e, u, w, c)


def conserved_from_primitives(rho, v, u, w, c, params: ModelParams):
    """Assemble ``U`` from density, velocity, internal energy and per-mass extras."""
    lay = params.layout
    rho = np.asarray(rho, dtype=float)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    c = np.asarray(c, dtype=float)
    shape = np.broadcast_shapes(rho.shape, np.shape(u), v.shape[:-1], w.shape[:-1], c.shape[:-1])
    U = np.empty(shape + (lay.n_state,))
    U[..., lay.rho] = rho
    U[..., lay.mom] = rho[..., None] * v
    U[..., lay.energy] = rho * (np.asarray(u) + 0.5 * np.sum(v * v, axis=-1))
    U[..., lay.heat] = rho[..., None] * w
    U[..., lay.stress] = rho[..., None] * c
    return U


def conjugates(U, params: ModelParams) -> ConjugateSet:
    """Non-equilibrium temperature, pressure, heat flux and viscous stress.

    With constant entropy weights these are ``theta = T``, ``pi = p``,
    ``q = -w / alpha1`` and ``tau = -theta c / alpha2``.
    """
    P = primitives(U, params)
    theta = P.u / params.c_v
    pi = params.R_gas * theta / P.nu
    zeta_w = -P.w / params.alpha1
    zeta_c = -P.c / params.alpha2
    q = zeta_w
    tau = theta[..., None] * zeta_c
    return ConjugateSet(theta, pi, q, tau, zeta_w, zeta_c)


def eta(U, params: ModelParams):
    """Mathematical entropy ``eta(U) = -rho s(nu, u, w, c)``."""
    P = primitives(U, params)
    return -P.rho * entropy_generalized(P.nu, P.u, P.w, P.c, params)


def _s_hessian(P: Primitives, params: ModelParams):
    """Hessian of ``s`` in the per-mass variables ``y = (nu, v, e, w, c)``."""
    dim = params.dim
    s_u = params.c_v / P.u
    s_uu = -params.c_v / P.u**2
    s_nunu = -params.R_gas / P.nu**2
    lead = P.rho.shape
    n = params.layout.n_state

    hess = np.zeros(lead + (n, n))
    hess[..., 0, 0] = s_nunu
    # u = e - |v|^2/2: d2s = s_uu du du + s_u d2u with d2u = -I on the v block.
    du = np.zeros(lead + (n,))
    du[..., 1:1 + dim] = -P.v
    du[..., 1 + dim] = 1.0
    hess += s_uu[..., None, None] * du[..., :, None] * du[..., None, :]
    iv = np.arange(1, 1 + dim)
    hess[..., iv, iv] -= s_u[..., None]
    ix = np.arange(2 + dim, 2 + 2 * dim)
    hess[..., ix, ix] -= 1.0 / params.alpha1
    ic = np.arange(2 + 2 * dim, n)
    hess[..., ic, ic] -= 1.0 / params.alpha2
    return hess


def _per_mass_vector(P: Primitives, params: ModelParams):
    dim = params.dim
    y = np.empty(P.rho.shape + (params.layout.n_state,))
    y[..., 0] = P.nu
    y[..., 1:1 + dim] = P.v
    y[..., 1 + dim] = P.e
    y[..., 2 + dim:2 + 2 * dim] = P.w
    y[..., 2 + 2 * dim:] = P.c
    return y


def eta_gradient(U, params: ModelParams):
    """Entropy variables ``eta_U = (eta_rho, v/theta, -1/theta, -q, -tau/theta)``.

    ``eta_rho`` follows from the chain rule through ``nu = 1/rho`` and the
    per-mass variables: ``eta_rho = -s + nu s_nu + (e - |v|^2) s_u + w.s_w + c:s_c``.
    """
    P = primitives(U, params)
    dim = params.dim
    s = entropy_generalized(P.nu, P.u, P.w, P.c, params)
    s_u = params.c_v / P.u
    s_nu = params.R_gas / P.nu
    s_w = -P.w / params.alpha1
    s_c = -P.c / params.alpha2
    vv = np.sum(P.v * P.v, axis=-1)
    grad = np.empty(np.shape(U))
    grad[..., 0] = (-s + P.nu * s_nu + (P.e - vv) * s_u
                    + np.sum(P.w * s_w, axis=-1) + np.sum(P.c * s_c, axis=-1))
    grad[..., 1:1 + dim] = P.v * s_u[..., None]
    grad[..., 1 + dim] = -s_u
    grad[..., 2 + dim:2 + 2 * dim] = -s_w
    grad[..., 2 + 2 * dim:] = -s_c
    return grad


def eta_hessian(U, params: ModelParams):
    """Analytic Hessian ``eta_UU``.

    Writing ``y = (1, m, E, W, C) / rho`` and ``L = [-y | P]`` with ``P`` the
    embedding of the non-density components, ``eta_UU = -(1/rho) L^T s_yy L``.
    Strict concavity of ``s`` in ``y`` therefore gives strict convexity of eta.
    """
    P = primitives(U, params)
    s_yy = _s_hessian(P, params)
    y = _per_mass_vector(P, params)
    n = params.layout.n_state
    L = np.zeros(P.rho.shape + (n, n))
    L[..., :, 0] = -y
    L[..., 1:, 1:] = np.eye(n - 1)
    H = -np.einsum("...ki,...kl,...lj->...ij", L, s_yy, L) / P.rho[..., None, None]
    return 0.5 * (H + np.swapaxes(H, -1, -2))


def entropy_derivatives(U, params: ModelParams) -> EntropyDerivatives:
    return EntropyDerivatives(eta(U, params), eta_gradient(U, params), eta_hessian(U, params))


def pressure_identity_defect(U, params: ModelParams):
    """Relative defect of ``pi/theta = eta_U . U - eta``."""
    cs = conjugates(U, params)
    lhs = cs.pi / cs.theta
    rhs = np.sum(eta_gradient(U, params) * np.asarray(U), axis=-1) - eta(U, params)
    return np.abs(lhs - rhs) / np.maximum(np.abs(lhs), 1e-300)


# -- concavity witness --------------------------------------------------------

@dataclass
class ConcavityResult:
    passed: bool
    trials: int
    worst_gap: float

    def __bool__(self):
        return self.passed


def concavity_witness(f: Callable, sampler: Callable, trials: int = 10_000,
                      tol: float = 1e-12, seed: int = 0) -> ConcavityResult:
    """Midpoint-concavity test on random pairs.

    ``sampler(rng, size)`` returns ``size`` points of shape ``(size, k)``; ``f``
    maps such an array to ``(size,)`` values.  The test passes iff
    ``f((x + y)/2) >= (f(x) + f(y))/2 - tol`` for every sampled pair.  A run
    with zero usable trials never passes.
    """
    rng = np.random.default_rng(seed)
    x = np.asarray(sampler(rng, trials), dtype=float)
    y = np.asarray(sampler(rng, trials), dtype=float)
    if x.ndim == 1:
        x, y = x[:, None], y[:, None]
    with np.errstate(all="ignore"):
        mid = f(0.5 * (x + y))
        avg = 0.5 * (f(x) + f(y))
    gap = np.asarray(mid - avg, dtype=float)
    ok = np.isfinite(gap)
    n_ok = int(np.count_nonzero(ok))
    if n_ok == 0:
        return ConcavityResult(False, 0, float("nan"))
    worst = float(np.min(gap[ok]))
    return ConcavityResult(bool(worst >= -tol), n_ok, worst)


def perspective(f: Callable) -> Callable:
    """``g(rho, Z) = rho f(1/rho, Z/rho)`` for ``f`` acting on ``(nu, z)`` rows."""
    def g(points):
        points = np.asarray(points, dtype=float)
        rho = points[:, 0]
        inner = np.column_stack([1.0 / rho, points[:, 1:] / rho[:, None]])
        return rho * f(inner)
    return g


def composed_entropy(params: ModelParams) -> Callable:
    """``s(nu, e - |v|^2/2, w, c)`` as a function of rows ``(nu, v, e, w, c)``."""
    dim = params.dim

    def h(points):
        points = np.asarray(points, dtype=float)
        nu = points[:, 0]
        v = points[:, 1:1 + dim]
        e = points[:, 1 + dim]
        w = points[:, 2 + dim:2 + 2 * dim]
        c = points[:, 2 + 2 * dim:]
        u = e - 0.5 * np.sum(v * v, axis=1)
        return entropy_generalized(nu, u, w, c, params)
    return h
