"""Tests for the equilibrium EOS, generalized entropy and its derivatives."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genhydro.thermo import (DomainError, ModelParams, StateLayout, concavity_witness,
                             composed_entropy, conjugates, conserved_from_primitives,
                             eos_equilibrium, entropy_generalized, eta, eta_gradient,
                             eta_hessian, identity_packed, n_sym, pack_sym, perspective,
                             pressure_identity_defect, primitives, unpack_sym)

pos = st.floats(0.05, 20.0)


class TestEquilibriumEOS:

    def test_reference_point(self, params):
        # c_v ln 1 + R ln 1 = 0 and T = p = u / c_v = 2/3
        s, T, p = eos_equilibrium(1.0, 1.0, params)
        assert s == 0.0
        assert T == pytest.approx(2 / 3, rel=1e-15)
        assert p == pytest.approx(2 / 3, rel=1e-15)

    def test_unit_temperature(self, params):
        _, T, _ = eos_equilibrium(0.7, params.c_v, params)
        assert T == 1.0

    def test_gibbs_relation(self, params, rng):
        nu = rng.uniform(0.5, 2.0, 50)
        u = rng.uniform(0.5, 2.0, 50)
        s0, T, p = eos_equilibrium(nu, u, params)
        for h in (1e-3, 5e-4):
            s1, _, _ = eos_equilibrium(nu + h, u + h, params)
            gap = np.abs(s1 - s0 - (h + p * h) / T)
            assert np.all(gap <= 10 * h * h)

    @pytest.mark.parametrize("nu,u", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (1.0, -2.0)])
    def test_domain(self, params, nu, u):
        with pytest.raises(DomainError):
            eos_equilibrium(nu, u, params)


class TestGeneralizedEntropy:

    def test_equilibrium_reduction(self, params):
        s_eq, _, _ = eos_equilibrium(1.3, 0.8, params)
        assert entropy_generalized(1.3, 0.8, np.zeros(1), np.zeros(1), params) == s_eq

    def test_hand_value(self, params):
        # 0 - 0.2^2 / 2
        s = entropy_generalized(1.0, 1.0, np.array([0.2]), np.zeros(1), params)
        assert s == pytest.approx(-0.02, abs=1e-15)

    @given(nu=pos, u=pos, w=st.floats(-5, 5), c=st.floats(-5, 5))
    def test_bounded_by_equilibrium(self, nu, u, w, c):
        p = ModelParams()
        s_eq, _, _ = eos_equilibrium(nu, u, p)
        assert entropy_generalized(nu, u, np.array([w]), np.array([c]), p) <= s_eq

    def test_eta_reference_point(self, params):
        U = conserved_from_primitives(np.array(1.0), np.zeros(1), 1.0, np.zeros(1), np.zeros(1),
                                      params)
        assert eta(U, params) == 0.0


class TestPacking:

    @pytest.mark.parametrize("dim", [1, 2, 3])
    def test_frobenius_product(self, dim, rng):
        A = rng.standard_normal((dim, dim))
        B = rng.standard_normal((dim, dim))
        A, B = A + A.T, B + B.T
        assert pack_sym(A) @ pack_sym(B) == pytest.approx(np.sum(A * B), rel=1e-13)

    @given(st.integers(1, 3), st.lists(st.floats(-1e3, 1e3), min_size=6, max_size=6))
    def test_round_trip(self, dim, vals):
        p = np.array(vals[:n_sym(dim)])
        assert np.allclose(pack_sym(unpack_sym(p, dim)), p, rtol=1e-15, atol=1e-300)

    def test_identity(self):
        assert np.allclose(identity_packed(2), [1.0, 0.0, 1.0])

    @pytest.mark.parametrize("dim,n_state", [(1, 5), (2, 9), (3, 14)])
    def test_layout(self, dim, n_state):
        lay = StateLayout(dim)
        assert lay.n_state == n_state
        assert lay.n_cons == dim + 2
        assert lay.stress.stop == n_state


class TestConjugates:

    def test_closed_forms(self, params, random_states, rng):
        U = random_states(params, rng, 20)
        P = primitives(U, params)
        cs = conjugates(U, params)
        assert np.allclose(cs.q, -P.w / params.alpha1, rtol=0, atol=0)
        assert np.allclose(cs.tau, -cs.theta[:, None] * P.c / params.alpha2, rtol=1e-15)

    def test_equilibrium_reduction(self, params):
        U = conserved_from_primitives(np.array(1.2), np.array([0.3]), 0.9, np.zeros(1),
                                      np.zeros(1), params)
        cs = conjugates(U, params)
        _, T, p = eos_equilibrium(1 / 1.2, 0.9, params)
        assert cs.theta == pytest.approx(T, rel=1e-15) and cs.pi == pytest.approx(p, rel=1e-15)
        assert not cs.q.any() and not cs.tau.any()

    def test_inadmissible_state(self, params):
        U = conserved_from_primitives(np.array(1.0), np.array([2.0]), 1.0, np.zeros(1),
                                      np.zeros(1), params)
        U[2] = 1.0  # kinetic energy exceeds total
        with pytest.raises(DomainError):
            primitives(U, params)


def _fd_gradient(f, U, h=1e-6):
    g = np.empty_like(U)
    for k in range(U.size):
        e = np.zeros_like(U)
        e[k] = h * (1 + abs(U[k]))
        g[k] = (f(U + e) - f(U - e)) / (2 * e[k])
    return g


@pytest.mark.parametrize("dim", [1, 2, 3])
class TestDerivatives:

    def test_gradient_vs_finite_differences(self, dim, random_states, rng):
        p = ModelParams(dim=dim)
        for U in random_states(p, rng, 100):
            g = eta_gradient(U, p)
            fd = _fd_gradient(lambda X: eta(X, p), U)
            assert np.linalg.norm(g - fd) <= 1e-6 * np.linalg.norm(g)

    def test_hessian_vs_finite_differences(self, dim, random_states, rng):
        p = ModelParams(dim=dim)
        for U in random_states(p, rng, 30):
            H = eta_hessian(U, p)
            fd = np.stack([_fd_gradient(lambda X: eta_gradient(X, p)[k], U, 1e-5)
                           for k in range(U.size)])
            assert np.linalg.norm(H - fd) <= 1e-5 * np.linalg.norm(H)

    def test_hessian_symmetric_positive(self, dim, random_states, rng):
        p = ModelParams(dim=dim)
        H = eta_hessian(random_states(p, rng, 100), p)
        assert np.all(np.linalg.norm(H - np.swapaxes(H, 1, 2), axis=(1, 2))
                      <= 1e-9 * np.linalg.norm(H, axis=(1, 2)))
        assert np.linalg.eigvalsh(H)[:, 0].min() > 0

    def test_pressure_identity(self, dim, random_states, rng):
        p = ModelParams(dim=dim)
        assert pressure_identity_defect(random_states(p, rng, 100), p).max() <= 1e-10

    def test_dissipative_blocks_vanish_at_equilibrium(self, dim, random_states, rng):
        p = ModelParams(dim=dim)
        g = eta_gradient(random_states(p, rng, 10, w_max=0, c_max=0), p)
        assert not g[:, p.layout.extra].any()

    def test_mixed_block_linear_in_forces(self, dim, random_states, rng):
        p = ModelParams(dim=dim)
        lay = p.layout
        U0 = random_states(p, rng, 1)[0]
        scales = np.array([1e-1, 1e-2, 1e-3])
        sizes, blocks = [], []
        for s in scales:
            U = U0.copy()
            U[lay.extra] *= s
            blocks.append(np.linalg.norm(eta_hessian(U, p)[lay.extra, lay.cons]))
            sizes.append(np.linalg.norm(eta_gradient(U, p)[lay.extra]))
        slope = np.polyfit(np.log(sizes), np.log(blocks), 1)[0]
        assert slope >= 1.0 - 1e-9


class TestConcavityWitness:

    def test_concave_quadratic(self):
        res = concavity_witness(lambda x: -x[:, 0]**2, lambda r, n: r.uniform(-5, 5, (n, 1)))
        assert res and res.trials == 10_000

    def test_cubic_fails(self):
        assert not concavity_witness(lambda x: x[:, 0]**3, lambda r, n: r.uniform(-1, 1, (n, 1)))

    def test_perspective_of_equilibrium_entropy(self, params):
        def s_eq(pts):
            return eos_equilibrium(pts[:, 0], pts[:, 1], params)[0]
        res = concavity_witness(perspective(s_eq), lambda r, n: r.uniform(0.1, 10, (n, 2)))
        assert res.passed

    @pytest.mark.parametrize("dim", [1, 2])
    def test_composed_entropy(self, dim):
        p = ModelParams(dim=dim)
        k = 2 + 2 * dim + n_sym(dim)

        def sample(r, n):
            pts = r.uniform(-0.5, 0.5, (n, k))
            pts[:, 0] = r.uniform(0.2, 5, n)
            pts[:, 1 + dim] = r.uniform(2.0, 5.0, n)  # e large enough that u > 0
            return pts
        assert concavity_witness(composed_entropy(p), sample).passed

    def test_empty_sample_never_passes(self):
        res = concavity_witness(lambda x: np.full(len(x), np.nan),
                                lambda r, n: r.uniform(0, 1, (n, 1)))
        assert not res and res.trials == 0


@settings(max_examples=50, deadline=None)
@given(rho=st.floats(0.1, 10), v=st.floats(-3, 3), u=st.floats(0.1, 10),
       w=st.floats(-2, 2), c=st.floats(-2, 2))
def test_state_round_trip(rho, v, u, w, c):
    p = ModelParams()
    U = conserved_from_primitives(np.array(rho), np.array([v]), u, np.array([w]), np.array([c]), p)
    P = primitives(U, p)
    assert P.rho == rho
    assert np.isclose(P.u, u, rtol=1e-12, atol=1e-12 * (1 + v * v))
    assert np.isclose(P.w[0], w, rtol=1e-14, atol=1e-300)
