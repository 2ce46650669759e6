"""Tests for data preparation, residuals, defects, fits and the epsilon sweep."""
import numpy as np
import pytest

from genhydro import harness, solver_nsf
from genhydro.solver_ghe import Grid1D, ImexConfig, run
from genhydro.thermo import ModelParams, conjugates


@pytest.fixture(scope="module")
def tiny_sweep():
    """Deliberately under-resolved sweep (N = 16), cheap enough to run twice."""
    cfg = harness.ExperimentConfig(n_cells=16)
    return cfg, harness.converge(ModelParams(), (0.04, 0.02, 0.01), cfg)


def _nsf(params, ic="heat_pulse", n=64):
    return harness.initial_nsf(Grid1D(n), params, ic, 0.1)


def test_prepare_uniform_is_equilibrium(params):
    prep = harness.prepare(_nsf(params, "uniform"), params)
    assert prep.v2_sup == 0.0
    assert np.array_equal(prep.field.U[:, 3:], np.zeros((64, 2)))


@pytest.mark.parametrize("well_prepared", [True, False])
def test_prepare_conserved_rows_bit_equal(params, well_prepared):
    nsf = _nsf(params)
    prep = harness.prepare(nsf, params, well_prepared)
    assert np.array_equal(prep.field.U[:, :3], nsf.U)


def test_prepare_matches_closure(params):
    nsf = _nsf(params)
    prep = harness.prepare(nsf, params)
    cs = conjugates(prep.field.U, params)
    q, tau = solver_nsf.maxwell_closure(nsf.U, nsf.grid, params)
    assert np.allclose(cs.q[:, 0], q, rtol=1e-12, atol=1e-16)
    assert np.allclose(cs.tau[:, 0], tau, rtol=1e-12, atol=1e-16)


def test_v2_over_eps_stable(params):
    nsf = _nsf(params)
    ratios = [harness.prepare(nsf, params.with_epsilon(e)).v2_sup / e for e in (0.08, 0.04, 0.02)]
    assert ratios[0] > 0
    assert max(ratios) / min(ratios) - 1 <= 0.05


def test_fit_slope_exact_power_law():
    eps = [0.08, 0.04, 0.02, 0.01]
    fit = harness.fit_slope(eps, [3 * e**2 for e in eps])
    assert fit.slope == pytest.approx(2.0)
    assert fit.r2 == pytest.approx(1.0)
    assert fit.conclusive


def test_fit_two_points_inconclusive():
    fit = harness.fit_slope([0.1, 0.05], [1e-2, 2.5e-3])
    assert fit.slope == pytest.approx(2.0)
    assert not fit.conclusive


def test_fit_noisy_inconclusive():
    fit = harness.fit_slope([0.08, 0.04, 0.02, 0.01], [1.0, 0.1, 1.0, 0.1])
    assert not fit.conclusive


def test_fit_above_floor_stops_at_floor():
    eps = [0.01, 0.08, 0.04, 0.02]
    vals = [1e-9, 5.12e-4, 6.4e-5, 8e-6]
    floors = [1e-9, 1e-9, 1e-9, 1e-9]
    fit = harness.fit_above_floor(eps, vals, floors)
    assert fit.n_points == 3
    assert fit.slope == pytest.approx(3.0)
    assert harness.fit_above_floor(eps, vals, [1.0] * 4).n_points == 0


@pytest.mark.parametrize("eps", [(0.05,), (0.04, 0.02), (0.04, 0.04, 0.02), (0.04, -0.02, 0.01)])
def test_bad_epsilon_lists(params, eps):
    with pytest.raises(ValueError):
        harness.converge(params, eps, harness.ExperimentConfig(n_cells=16))


def test_insufficient_points_message(params):
    with pytest.raises(ValueError, match="insufficient points"):
        harness.residual_sweep(params, (0.1, 0.05), harness.ExperimentConfig(n_cells=16))


@pytest.mark.parametrize("kw", [{"n_cells": 15}, {"n_cells": 8}, {"ic": "vortex"},
                                {"residual_dt": 0.0}])
def test_experiment_config_validation(kw):
    with pytest.raises(ValueError):
        harness.ExperimentConfig(**kw)


def test_residual_uniform_is_zero(params):
    cfg = harness.ExperimentConfig(n_cells=32, ic="uniform", t_end=0.06,
                                   residual_times=(0.05,), snapshot_times=())
    traj = harness.nsf_trajectory(cfg, params, 32,
                                  harness._window_times(cfg.residual_times, cfg.residual_dt))
    # only rounding of the time stencil divided by dt survives
    r1, r2 = harness.residual_norms(traj, cfg.residual_times, cfg.residual_dt, params)
    assert r1 <= 1e-12 and r2 == 0.0


def test_residual_needs_window(params):
    f = _nsf(params)
    with pytest.raises(ValueError, match="five"):
        harness.residual_field([f] * 4, 1e-3, params)
    traj = solver_nsf.run(f, params, ImexConfig(t_end=0.01))
    with pytest.raises(ValueError, match="lacks"):
        harness.residual_norms(traj, (0.005,), 1e-3, params)


def test_residual_sweep_scaling(params):
    cfg = harness.ExperimentConfig(n_cells=64, t_end=0.1, residual_times=(0.05,),
                                   snapshot_times=())
    res = harness.residual_sweep(params, (0.08, 0.04, 0.02), cfg)
    assert res.fit_r2.conclusive and abs(res.fit_r2.slope - 1.0) <= 0.3
    # with constant alpha the conserved rows of the residual do not depend on eps
    assert max(res.r1) / min(res.r1) - 1 <= 1e-6
    assert not res.passed_r1
    rows = harness.residual_rows(res)
    assert len(rows) == 6 and rows[0][0] == "residual"


def test_maxwell_defect_uniform_zero(params):
    prep = harness.prepare(_nsf(params, "uniform"), params)
    traj = run(prep.field, params, ImexConfig(t_end=0.01))
    d = harness.maxwell_defect(traj.final, params, _nsf(params, "uniform", 128))
    assert d == {"q": 0.0, "tau": 0.0, "q_vs_nsf": 0.0, "tau_vs_nsf": 0.0}


def test_maxwell_defect_decreases_with_grid(params):
    p = params.with_epsilon(0.08)
    vals = []
    for n in (32, 64, 128):
        prep = harness.prepare(harness.initial_nsf(Grid1D(n), p, "wave"), p)
        f = run(prep.field, p, ImexConfig(t_end=0.05)).final
        vals.append(harness.maxwell_defect(f, p)["q"])
    assert abs(vals[2] - vals[1]) < abs(vals[1] - vals[0])


def test_ill_prepared_initial_layer(params):
    p = params.with_epsilon(0.04)
    nsf = _nsf(p, n=128)
    good = harness.prepare(nsf, p, True).field
    bad = harness.prepare(nsf, p, False).field
    layer = [harness.maxwell_defect(f, p)["q"] for f in (good, bad)]
    assert layer[1] > 100 * layer[0]
    # after many relaxation times the layer is gone
    later = [harness.maxwell_defect(run(f, p, ImexConfig(t_end=0.02)).final, p)["q"]
             for f in (good, bad)]
    assert later[1] == pytest.approx(later[0], rel=0.2)


def test_ill_prepared_post_layer_slope(params):
    cfg = harness.ExperimentConfig(n_cells=128, ic="heat_pulse", well_prepared=False,
                                   t_end=0.1, snapshot_times=(0.02, 0.05))
    rep = harness.converge(params, (0.08, 0.04, 0.02), cfg)
    assert rep.fit.conclusive and abs(rep.fit.slope - 2.0) <= 0.3
    assert rep.errors_monotone


def test_under_resolved_flagged(tiny_sweep):
    _, rep = tiny_sweep
    assert rep.guard_checked
    assert all(r.under_resolved for r in rep.runs)
    assert not rep.resolved and not rep.passed_rate and not rep.passed


def test_balance_on_tiny_sweep(tiny_sweep):
    _, rep = tiny_sweep
    assert rep.passed_balance()
    assert all(r.conservation_drift <= 1e-12 for r in rep.runs)


def test_report_deterministic(tiny_sweep, params):
    cfg, rep = tiny_sweep
    again = harness.converge(params, (0.04, 0.02, 0.01), cfg)
    a = harness.rows_to_csv(harness.report_rows(rep))
    assert a == harness.rows_to_csv(harness.report_rows(again))
    assert harness.summary(rep) == harness.summary(again)
    assert a.startswith(",".join(harness.REPORT_COLUMNS) + "\n")
    assert harness.NORM_NOTE in harness.summary(rep)


def test_norms():
    a = np.array([3.0, 4.0])
    assert harness.l2(a, 0.25) == pytest.approx(np.sqrt(0.25 * 25))
    assert harness.linf(np.array([[3.0, 4.0], [0.0, 1.0]])) == 5.0
