"""Pointwise checks of the entropy and symmetrizer structure on sampled states.

Every check returns :class:`CheckResult` rows collected in a
:class:`StructureReport`.  A row passes iff its maximal defect is within the
threshold (strictly below it for positivity checks) on a non-empty sample.
States are drawn from the compact set ``rho, u in [0.5, 2]``, ``|v| <= 1``,
``|w|, |c| <= 0.5`` by a seeded generator.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .model import (dissipation_matrix, dissipative_forces, entropy_production, from_normal,
                    jacobians, normal_form, normal_jacobian)
from .solver_ghe import entropy_total
from .thermo import ModelParams, conserved_from_primitives, eta_hessian, n_sym

Sampler = Callable[[int], np.ndarray]


@dataclass(frozen=True)
class CheckResult:
    check: str
    name: str
    samples: int
    max_defect: float
    threshold: float
    strict: bool = False

    @property
    def passed(self) -> bool:
        if self.samples <= 0 or not np.isfinite(self.max_defect):
            return False
        if self.strict:
            return self.max_defect < self.threshold
        return self.max_defect <= self.threshold


@dataclass
class StructureReport:
    results: list = field(default_factory=list)

    def extend(self, rows):
        self.results.extend(rows)
        return self

    @property
    def passed(self) -> bool:
        return bool(self.results) and all(r.passed for r in self.results)

    def to_text(self) -> str:
        lines = []
        for r in self.results:
            op = "<" if r.strict else "<="
            flag = "PASS" if r.passed else "FAIL"
            lines.append(f"{flag} {r.check}/{r.name}: max defect {r.max_defect:.3e} "
                         f"{op} {r.threshold:.1e} over {r.samples} samples")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["check", "name", "samples", "max_defect", "threshold", "pass"])
        for r in self.results:
            w.writerow([r.check, r.name, r.samples, f"{r.max_defect:.17g}",
                        f"{r.threshold:.17g}", int(r.passed)])
        return buf.getvalue()


def _ball(rng, n, k, radius):
    """``n`` points uniform in the ``k``-ball of given radius."""
    if k == 0:
        return np.zeros((n, 0))
    g = rng.standard_normal((n, k))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.uniform(0.0, 1.0, n) ** (1.0 / k)
    return g * r[:, None]


def state_sampler(params: ModelParams, seed: int = 0, w_max: float = 0.5,
                  c_max: float = 0.5, v_max: float = 1.0) -> Sampler:
    """Seeded sampler of admissible states; ``|c|`` is the Frobenius norm."""
    rng = np.random.default_rng(seed)
    d = params.dim

    def sample(n: int) -> np.ndarray:
        rho = rng.uniform(0.5, 2.0, n)
        u = rng.uniform(0.5, 2.0, n)
        v = _ball(rng, n, d, v_max)
        w = _ball(rng, n, d, w_max)
        c = _ball(rng, n, n_sym(d), c_max)
        return conserved_from_primitives(rho, v, u, w, c, params)
    return sample


def equilibrium_sampler(params: ModelParams, seed: int = 0) -> Sampler:
    """Like :func:`state_sampler` with ``w = c = 0``."""
    return state_sampler(params, seed, w_max=0.0, c_max=0.0)


def _draw(sampler: Sampler, n: int) -> np.ndarray:
    states = np.asarray(sampler(n), dtype=float)
    if states.ndim != 2 or states.shape[0] == 0:
        return np.zeros((0, states.shape[-1] if states.ndim else 0))
    return states


def _rel_asym(X) -> float:
    return float(np.linalg.norm(X - X.T) / max(np.linalg.norm(X), 1e-300))


def _blocks(params):
    n_c = params.layout.n_cons
    return slice(0, n_c), slice(n_c, params.layout.n_state)


def check_convexity(sampler: Sampler, params: ModelParams, n: int = 100) -> list:
    """``eta_UU`` symmetric and positive definite at every sample."""
    U = _draw(sampler, n)
    if U.shape[0] == 0:
        return [CheckResult("convexity", "neg_min_eig_eta_UU", 0, np.nan, 0.0, strict=True)]
    H = eta_hessian(U, params)
    min_eig = np.linalg.eigvalsh(H)[:, 0]
    asym = max(_rel_asym(h) for h in H)
    return [CheckResult("convexity", "neg_min_eig_eta_UU", len(U), float(np.max(-min_eig)), 0.0,
                        strict=True),
            CheckResult("convexity", "hessian_asymmetry", len(U), asym, 1e-9)]


def check_symmetrizer(sampler: Sampler, params: ModelParams, n: int = 100,
                      sym_tol: float = 1e-6, block_tol: float = 1e-8) -> list:
    """Symmetric products ``eta_UU F_jU``, ``eta_UU G_jU`` and the block-diagonal ``A0``.

    Also checks ``A0^{II,II} H = M`` with ``M`` positive definite and flags a
    singular ``dV/dU``.
    """
    U = _draw(sampler, n)
    m = U.shape[0]
    I, II = _blocks(params)
    sF = sG = off = am_defect = cond = 0.0
    neg_a0 = neg_m = -np.inf
    not_converged = 0
    for Ui in U:
        jac = jacobians(Ui, params)
        not_converged += not jac.converged
        H = eta_hessian(Ui, params)
        for j in range(params.dim):
            sF = max(sF, _rel_asym(H @ jac.F_U[j]))
            sG = max(sG, _rel_asym(H @ jac.G_U[j]))
        cond = max(cond, float(np.linalg.cond(normal_jacobian(Ui, params))))
        nf = normal_form(Ui, params, jac)
        A0 = nf.A0
        scale = np.linalg.norm(A0)
        off = max(off, float(np.max(np.abs(A0[I, II]))) / scale)
        neg_a0 = max(neg_a0, -float(np.linalg.eigvalsh(0.5 * (A0 + A0.T))[0]))
        M = dissipation_matrix(Ui, params)
        prod = A0[II, II] @ nf.H
        am_defect = max(am_defect, float(np.linalg.norm(prod - M) / np.linalg.norm(M)))
        neg_m = max(neg_m, -float(np.linalg.eigvalsh(0.5 * (prod + prod.T))[0]))
    return [
        CheckResult("symmetrizer", "asym_eta_UU_F_U", m, sF, sym_tol),
        CheckResult("symmetrizer", "asym_eta_UU_G_U", m, sG, sym_tol),
        CheckResult("symmetrizer", "jacobian_not_converged", m, float(not_converged), 0.0),
        CheckResult("symmetrizer", "A0_offdiag_block", m, off, block_tol),
        CheckResult("symmetrizer", "neg_min_eig_A0", m, neg_a0, 0.0, strict=True),
        CheckResult("symmetrizer", "A0_II_H_minus_M", m, am_defect, 1e-10),
        CheckResult("symmetrizer", "neg_min_eig_A0_II_H", m, neg_m, 0.0, strict=True),
        CheckResult("symmetrizer", "cond_dV_dU", m, cond, 1e12),
    ]


def _convection(nf, direction, eps):
    return nf.A[direction] + nf.B[direction] / eps


def normal_speeds(U, params: ModelParams, direction: int = 0, jac=None):
    """Real eigenvalues of ``A_j + B_j/eps`` from the ``A0``-weighted symmetric problem."""
    nf = normal_form(U, params, jac)
    S = nf.A0 @ _convection(nf, direction, params.epsilon)
    return scipy.linalg.eigh(0.5 * (S + S.T), 0.5 * (nf.A0 + nf.A0.T), eigvals_only=True)


def check_hyperbolicity(sampler: Sampler, params: ModelParams, directions: Sequence[int] | None = None,
                        n: int = 200, imag_tol: float = 1e-8,
                        eps_sweep: Sequence[float] = (4e-3, 2e-3, 1e-3, 5e-4)) -> list:
    """Real spectrum of the normal-form convection matrices ``A_j + B_j/eps``.

    Rows: asymmetry of ``A0 (A_j + B_j/eps)``; largest imaginary part of the
    unsymmetrized eigenvalues relative to the spectral radius; mismatch of the
    two spectra; spectrum symmetry at a rest equilibrium; and the log-log slope
    of the spectral radius against ``eps`` (expected ``-1``).  All rows take
    the worst case over ``directions`` (default: every axis).
    """
    directions = list(range(params.dim)) if directions is None else list(directions)
    if not directions or any(not 0 <= j < params.dim for j in directions):
        raise ValueError("direction out of range")
    U = _draw(sampler, n)
    m = U.shape[0]
    asym = imag = mismatch = 0.0
    for Ui in U:
        nf = normal_form(Ui, params)
        A0s = 0.5 * (nf.A0 + nf.A0.T)
        for j in directions:
            C = _convection(nf, j, params.epsilon)
            S = nf.A0 @ C
            asym = max(asym, _rel_asym(S))
            lam_sym = scipy.linalg.eigh(0.5 * (S + S.T), A0s, eigvals_only=True)
            lam = np.linalg.eigvals(C)
            radius = float(np.max(np.abs(lam_sym)))
            imag = max(imag, float(np.max(np.abs(lam.imag))) / radius)
            mismatch = max(mismatch, float(np.max(np.abs(np.sort(lam.real) - lam_sym))) / radius)
    rest = conserved_from_primitives(np.array(1.0), np.zeros(params.dim), 1.5,
                                     np.zeros(params.dim), np.zeros(n_sym(params.dim)), params)
    base = U[0] if m else rest
    rest_defect = slope_gap = 0.0
    for j in directions:
        lam_rest = normal_speeds(rest, params, j)
        rest_defect = max(rest_defect, float(np.max(np.abs(lam_rest + lam_rest[::-1])))
                          / float(np.max(np.abs(lam_rest))))
        radii = [np.max(np.abs(normal_speeds(base, params.with_epsilon(e), j))) for e in eps_sweep]
        slope_gap = max(slope_gap, abs(_fit(eps_sweep, radii) + 1.0))
    return [
        CheckResult("hyperbolicity", "asym_A0_convection", m, asym, 1e-6),
        CheckResult("hyperbolicity", "rel_imag_eig", m, imag, imag_tol),
        CheckResult("hyperbolicity", "rel_eig_mismatch", m, mismatch, 1e-6),
        CheckResult("hyperbolicity", "rest_spectrum_asymmetry", 1, rest_defect, 1e-8),
        CheckResult("hyperbolicity", "speed_vs_eps_slope_plus_1", len(eps_sweep), slope_gap, 0.05),
    ]


def _a0_analytic(U, params):
    J = normal_jacobian(U, params)
    Jinv = np.linalg.inv(J)
    return np.swapaxes(Jinv, -1, -2) @ eta_hessian(U, params) @ Jinv


def _fit(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def check_equilibrium_blocks(sampler: Sampler, params: ModelParams, n: int = 100,
                             magnitudes: Sequence[float] = (1e-1, 1e-2, 1e-3)) -> list:
    """Blocks that vanish at equilibrium, and their size away from it.

    ``B_j^{I,I}`` at ``V^II = 0`` must vanish.  Along rays ``V^II = s d`` with
    fixed ``V^I``, the relative defect ``A0^{I,I}(V) - eta_{U^I U^I}(U(V^I, 0))``
    is reported directly: with constant entropy weights it is zero
    identically, which is stronger than any power of ``s``.  The mixed block
    ``eta_{U^II U^I}`` must shrink at least linearly in ``|eta_{U^II}|``.
    """
    U = _draw(sampler, n)
    m = U.shape[0]
    I, II = _blocks(params)
    b_eq = a0_defect = 0.0
    slopes_mixed = []
    mags = np.asarray(magnitudes, dtype=float)
    for Ui in U:
        V = dissipative_forces(Ui, params)
        direction = V / max(np.linalg.norm(V), 1e-300)
        Ueq = from_normal(np.concatenate([Ui[I], np.zeros_like(V)]), params)
        nf = normal_form(Ueq, params)
        b_eq = max(b_eq, float(np.max(np.abs(nf.B[:, I, I]))))
        H_eq = eta_hessian(Ueq, params)[I, I]
        d_mix, z_norm = [], []
        for s in mags:
            Us = from_normal(np.concatenate([Ui[I], s * direction]), params)
            d = np.linalg.norm(_a0_analytic(Us, params)[I, I] - H_eq) / np.linalg.norm(H_eq)
            a0_defect = max(a0_defect, float(d))
            d_mix.append(np.linalg.norm(eta_hessian(Us, params)[II, I]))
            z_norm.append(np.linalg.norm(dissipative_forces(Us, params)))
        slopes_mixed.append(_fit(z_norm, d_mix))
    worst_mix = min(slopes_mixed) if slopes_mixed else np.nan
    return [
        CheckResult("equilibrium", "B_II_block_at_equilibrium", m, b_eq, 1e-8),
        CheckResult("equilibrium", "A0_II_minus_eq_hessian", m, a0_defect, 1e-10),
        CheckResult("equilibrium", "eta_mixed_block_slope_shortfall", m, 0.9 - worst_mix, 0.0),
    ]


def check_entropy_sign(sampler: Sampler, params: ModelParams, n: int = 100,
                       tol: float = 1e-12) -> list:
    """Pointwise entropy production ``sigma <= tol`` at sampled states."""
    U = _draw(sampler, n)
    sigma = entropy_production(U, params) if len(U) else np.array([np.nan])
    return [CheckResult("entropy", "max_sigma", len(U), float(np.max(sigma)), tol)]


def check_entropy_production(fields, params: ModelParams, sigma_tol: float = 1e-12,
                             rise_tol: float = 1e-8) -> list:
    """Pointwise ``sigma <= sigma_tol`` on each field, and non-increasing ``int eta dx``.

    ``fields`` is a sequence of :class:`~genhydro.solver_ghe.Field` in time
    order; the rise of the total is measured relative to ``|int eta dx|``.
    """
    fields = list(fields)
    if not fields:
        return [CheckResult("entropy", "max_sigma_field", 0, np.nan, sigma_tol),
                CheckResult("entropy", "rel_total_rise", 0, np.nan, rise_tol)]
    sig = max(float(np.max(entropy_production(f.U, params))) for f in fields)
    totals = np.array([entropy_total(f, params) for f in fields])
    rise = 0.0
    if len(totals) > 1:
        rise = max(float(np.max(np.diff(totals))), 0.0) / max(float(np.max(np.abs(totals))), 1e-300)
    return [CheckResult("entropy", "max_sigma_field", len(fields), sig, sigma_tol),
            CheckResult("entropy", "rel_total_rise", len(fields) - 1, rise, rise_tol)]


def run_all(params: ModelParams, seed: int = 0, n: int = 100, dims: Sequence[int] | None = None
            ) -> StructureReport:
    """All pointwise checks in each dimension of ``dims`` (default: ``params.dim``)."""
    report = StructureReport()
    for d in dims or (params.dim,):
        p = replace(params, dim=d)
        tag = f"d{d}:"
        rows = []
        rows += check_convexity(state_sampler(p, seed), p, n)
        rows += check_symmetrizer(state_sampler(p, seed + 1), p, n)
        rows += check_hyperbolicity(state_sampler(p, seed + 2), p, None, n)
        rows += check_equilibrium_blocks(state_sampler(p, seed + 5), p, n)
        rows += check_entropy_sign(state_sampler(p, seed + 6), p, n)
        report.extend(CheckResult(tag + r.check, r.name, r.samples, r.max_defect, r.threshold,
                                  r.strict) for r in rows)
    return report
