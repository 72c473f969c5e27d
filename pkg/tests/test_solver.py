import math

import numpy as np
import pytest

from fracvoigt import ConfigurationError, InstabilityError
from fracvoigt.diagnostics import max_divergence
from fracvoigt.nonlinear import bilinear_term
from fracvoigt.solver import (
    SimState,
    SolverParams,
    initial_condition,
    param_errors,
    rhs,
    run,
    step_rk4,
)
from fracvoigt.spectral import SpectralField, WaveGrid, check_invariants, sobolev_norm

FOUR_PI_SQ = 4 * math.pi**2


def params(**kw):
    base = dict(nu=0.0, alpha=0.1, r=1.0, N=8, dt=1e-2, t_end=0.1)
    base.update(kw)
    return SolverParams(**base)


# --- parameter validation -----------------------------------------------------

def test_collects_every_error():
    with pytest.raises(ConfigurationError) as info:
        SolverParams(nu=-1, alpha=-0.1, r=0, N=5, dt=0, t_end=1)
    errs = info.value.errors
    assert len(errs) == 5
    assert any("r=0" in e and "(0, 3/2]" in e for e in errs)


@pytest.mark.parametrize("r", [0.0, -0.5, 1.5000001, math.nan])
def test_r_window(r):
    assert any("r" in e for e in param_errors(0.0, 0.1, r, 8, 0.1, 1.0, "two_thirds"))


def test_r_upper_end_accepted():
    assert params(r=1.5).r == 1.5


def test_t_end_must_be_whole_steps():
    with pytest.raises(ConfigurationError, match="whole number"):
        params(dt=0.03, t_end=0.1)
    assert params(dt=1e-3, t_end=0.5).n_steps == 500


def test_bad_dealias_and_types():
    errs = param_errors("x", 0.1, 1.0, 8.0, 0.1, 1.0, "spectral")
    assert len(errs) == 3


# --- regimes ---------------------------------------------------------------------

@pytest.mark.parametrize("nu,alpha,r,protected,system", [
    (0.0, 0.1, 5 / 6, False, "fEV"),
    (0.0, 0.1, 5 / 6 + 1e-9, True, "fEV"),
    (0.0, 0.1, 0.7, False, "fEV"),
    (1e-2, 0.1, 0.5, True, "fNSV"),
    (1e-2, 0.1, 0.5 - 1e-9, False, "fNSV"),
    (1e-2, 0.0, 1.0, False, "NSE"),
    (0.0, 0.0, 1.0, False, "Euler"),
])
def test_regime_boundaries(nu, alpha, r, protected, system):
    p = params(nu=nu, alpha=alpha, r=r)
    assert p.protected is protected
    assert p.system == system
    assert bool(p.regime_warnings()) is (not protected)


# --- initial conditions -------------------------------------------------------------

def curl(u):
    k = u.grid.k_vectors
    c = u.coeffs
    out = np.stack([k[1] * c[2] - k[2] * c[1], k[2] * c[0] - k[0] * c[2], k[0] * c[1] - k[1] * c[0]])
    return SpectralField(u.grid, 2j * math.pi * out)


def test_abc_is_beltrami():
    u = initial_condition("abc", WaveGrid(8), A=1, B=1, C=1)
    assert sobolev_norm(curl(u) - 2 * math.pi * u, 0) <= 1e-12 * sobolev_norm(u, 0)
    assert np.count_nonzero(np.any(np.abs(u.coeffs) > 1e-14, axis=0)) == 6
    assert sobolev_norm(u, 0) ** 2 == pytest.approx(3.0, rel=1e-14)


def test_taylor_green_divergence_free():
    u = initial_condition("taylor_green", WaveGrid(16))
    assert max_divergence(u.grid, u.coeffs) <= 1e-14
    check_invariants(u)


def test_random_smooth_reproducible():
    g = WaveGrid(16)
    a = initial_condition("random_smooth", g, seed=1, decay_s=4)
    b = initial_condition("random_smooth", g, seed=1, decay_s=4)
    c = initial_condition("random_smooth", g, seed=2, decay_s=4)
    assert np.array_equal(a.coeffs, b.coeffs)
    assert not np.array_equal(a.coeffs, c.coeffs)
    assert math.isfinite(sobolev_norm(a, 4))
    assert sobolev_norm(a, 0) ** 2 == pytest.approx(1.0, rel=1e-14)
    check_invariants(a)


def test_abc_perturbed():
    g = WaveGrid(8)
    u = initial_condition("abc_perturbed", g, eps=0.1, seed=3)
    d = u - initial_condition("abc", g)
    assert sobolev_norm(d, 0) == pytest.approx(0.1, rel=1e-12)
    check_invariants(u)


def test_initial_condition_errors():
    g = WaveGrid(8)
    with pytest.raises(ConfigurationError):
        initial_condition("vortex_ring", g)
    with pytest.raises(ConfigurationError):
        initial_condition("abc", g, D=1.0)


# --- right-hand side ------------------------------------------------------------------

def test_beltrami_inviscid_tendency_vanishes():
    u = initial_condition("abc", WaveGrid(16))
    for alpha, r in [(0.1, 1.0), (0.5, 0.9), (0.0, 1.0)]:
        t = rhs(SimState(0.0, u, 0), params(N=16, alpha=alpha, r=r))
        assert sobolev_norm(t, 0) <= 1e-10 * sobolev_norm(u, 0) ** 2


@pytest.mark.parametrize("nu,alpha,r", [(1e-2, 0.1, 0.75), (0.3, 0.2, 1.2), (1e-3, 0.5, 0.5)])
def test_beltrami_viscous_tendency(nu, alpha, r):
    u = initial_condition("abc", WaveGrid(16), A=0.4, B=1.0, C=0.7)
    t = rhs(SimState(0.0, u, 0), params(N=16, nu=nu, alpha=alpha, r=r))
    factor = -FOUR_PI_SQ * nu / (1 + alpha ** (2 * r) * FOUR_PI_SQ**r)
    expected = factor * u
    assert np.max(np.abs(t.coeffs - expected.coeffs)) <= 1e-12 * np.max(np.abs(expected.coeffs))


def test_alpha_zero_is_plain_nse():
    g = WaveGrid(8)
    u = initial_condition("random_smooth", g, seed=5)
    p = params(nu=0.05, alpha=0.0, r=0.7)
    t = rhs(SimState(0.0, u, 0), p).coeffs
    manual = -(bilinear_term(u, u).coeffs + 0.05 * g.lam * u.coeffs)
    assert np.max(np.abs(t - manual)) == 0.0


def test_alpha_zero_runs_identical_across_r():
    g = WaveGrid(8)
    u = initial_condition("random_smooth", g, seed=6)
    finals = [run(params(nu=0.01, alpha=0.0, r=r), u).final.u.coeffs for r in (0.3, 0.9, 1.5)]
    assert all(np.array_equal(finals[0], f) for f in finals[1:])


def test_forcing_enters_tendency():
    g = WaveGrid(8)
    f = initial_condition("abc", g)
    p = params(nu=0.1, alpha=0.1, r=1.0, forcing=f)
    t = rhs(SimState(0.0, SpectralField.zeros(g), 0), p)
    expected = f * (1.0 / (1.0 + 0.01 * FOUR_PI_SQ))
    assert np.max(np.abs(t.coeffs - expected.coeffs)) < 1e-15
    res = run(p, SpectralField.zeros(g), 5)
    assert res.status == "ok" and res.series[-1].kinetic > 0


# --- time stepping ------------------------------------------------------------------

def beltrami_error(dt, nu=0.5, alpha=0.1, r=1.0, T=0.1):
    g = WaveGrid(8)
    u0 = initial_condition("abc", g)
    p = SolverParams(nu=nu, alpha=alpha, r=r, N=8, dt=dt, t_end=T)
    res = run(p, u0, 1)
    rate = FOUR_PI_SQ * nu / (1 + alpha ** (2 * r) * FOUR_PI_SQ**r)
    return float(np.max(np.abs(res.final.u.coeffs - u0.coeffs * math.exp(-rate * T))))


def test_beltrami_decay_fourth_order():
    e1, e2 = beltrami_error(0.02), beltrami_error(0.01)
    assert 12 <= e1 / e2 <= 20


def test_zero_field_fixed_point():
    g = WaveGrid(8)
    res = run(params(nu=0.1), SpectralField.zeros(g), 1)
    assert np.all(res.final.u.coeffs == 0)
    assert all(rep.modified == 0 for rep in res.series)


def test_time_is_step_times_dt():
    g = WaveGrid(8)
    u = initial_condition("random_smooth", g, seed=1)
    p = params(dt=0.01, t_end=0.07)
    res = run(p, u, 3, keep_states=True)
    assert [s.step_index for s in res.states] == [0, 3, 6, 7]
    assert all(s.t == s.step_index * 0.01 for s in res.states)
    assert [rep.t for rep in res.series] == [s.t for s in res.states]


def test_step_rk4_matches_run():
    g = WaveGrid(8)
    u = initial_condition("random_smooth", g, seed=9)
    p = params(dt=0.01, t_end=0.02)
    s = SimState(0.0, run(p, u, 1, keep_states=True).states[0].u, 0)
    s = step_rk4(step_rk4(s, p), p)
    assert np.array_equal(s.u.coeffs, run(p, u, 1).final.u.coeffs)
    with pytest.raises(ValueError):
        step_rk4(SimState(0.0, SpectralField.zeros(WaveGrid(4)), 0), p)


def test_runs_are_deterministic():
    g = WaveGrid(8)
    u = initial_condition("random_smooth", g, seed=2)
    a, b = run(params(), u), run(params(), u)
    assert np.array_equal(a.final.u.coeffs, b.final.u.coeffs)
    assert a.series == b.series


def test_cfl_violation_raises_instability_not_nan():
    g = WaveGrid(16)
    u = initial_condition("random_smooth", g, seed=1, decay_s=1, energy=50.0)
    p = SolverParams(nu=0.0, alpha=0.01, r=1.0, N=16, dt=0.05, t_end=5.0)
    res = run(p, u, 1)
    assert res.status == "diverged"
    assert isinstance(res.error, InstabilityError)
    assert res.error.step_index >= 1 and res.error.t == res.error.step_index * p.dt
    assert any("CFL" in w for w in res.warnings)
    assert all(math.isfinite(rep.modified) for rep in res.series)


def test_check_mode_asserts_invariants():
    g = WaveGrid(8)
    res = run(params(), initial_condition("taylor_green", g), 2, check=True)
    assert res.status == "ok"


def test_initial_data_galerkin_truncated():
    g = WaveGrid(8)
    u = initial_condition("random_smooth", g, seed=3, decay_s=0)
    res = run(params(), u, 1, keep_states=True)
    start = res.states[0].u.coeffs
    assert np.all(start[:, np.any(np.abs(g.k_vectors) > 2, axis=0)] == 0)
