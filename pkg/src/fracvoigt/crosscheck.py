"""Comparisons between the pseudo-spectral path and the brute-force oracle."""

import math
from dataclasses import dataclass

import numpy as np

from .nonlinear import DealiasRule, bilinear_term, trilinear_form
from .oracle import DenseGalerkinSystem, convolution_bilinear, dealias_cutoff, dense_galerkin_run
from .solver import SolverParams, initial_condition, run
from .spectral import SpectralField, WaveGrid, sobolev_norm

ORACLE_SIZES = (4, 8)
BILINEAR_TOL = 1e-12
SKEW_TOL = 1e-12
TRAJECTORY_TOL = 1e-10
CONSERVATION_TOL = 1e-8


@dataclass(frozen=True)
class CheckRow:
    name: str
    N: int
    value: float
    tol: float

    @property
    def passed(self):
        return bool(self.value <= self.tol)

    def line(self):
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict}  {self.name:<30} N={self.N:<3d} value={self.value:.3e}  tol={self.tol:.0e}"


def random_dealiased_field(grid, seed, decay_s=1.0):
    """Rough random divergence-free field restricted to the two-thirds modes."""
    u = initial_condition("random_smooth", grid, seed=seed, decay_s=decay_s)
    mask = DealiasRule.for_grid("two_thirds", grid.N).mask(grid)
    return SpectralField(grid, u.coeffs * mask)


def bilinear_mismatch(N, seeds=range(20)):
    """Worst relative difference between ``bilinear_term`` and the convolution sum."""
    grid = WaveGrid(N)
    K = dealias_cutoff(N)
    worst = 0.0
    for seed in seeds:
        u = random_dealiased_field(grid, 2 * seed)
        v = random_dealiased_field(grid, 2 * seed + 1)
        fast = bilinear_term(u, v).coeffs
        slow = convolution_bilinear(u, v, cutoff=K).coeffs
        scale = np.max(np.abs(slow))
        worst = max(worst, float(np.max(np.abs(fast - slow)) / scale))
    return worst


def skew_defect(N, seeds=range(20)):
    """Worst ``|<B(u,v),v>| / (|u| |v|_H1^2)`` over random dealiased pairs."""
    grid = WaveGrid(N)
    worst = 0.0
    for seed in seeds:
        u = random_dealiased_field(grid, 1000 + 2 * seed)
        v = random_dealiased_field(grid, 1001 + 2 * seed)
        b = abs(trilinear_form(u, v, v))
        worst = max(worst, b / (sobolev_norm(u, 0) * sobolev_norm(v, 1) ** 2))
    return worst


def trajectory_mismatch(p, u0, sample_every=10):
    """Max over samples of ``|u_solver - u_dense|_inf / |u0|_inf``."""
    res = run(p, u0, sample_every, keep_states=True)
    system = DenseGalerkinSystem.from_field(res.states[0].u, p)
    dense = dense_galerkin_run(system, p.dt, p.t_end, sample_every)
    by_step = {s.step_index: s for s in res.states}
    scale = float(np.max(np.abs(system.state)))
    worst = 0.0
    for sample in dense:
        mine = by_step[sample.step_index].u.coeffs
        theirs = sample.to_field(u0.grid, system.modes).coeffs
        worst = max(worst, float(np.max(np.abs(mine - theirs))) / scale)
    return worst


def dense_energy_drift(p, u0):
    """Relative modified-energy drift of the oracle alone (inviscid runs)."""
    system = DenseGalerkinSystem.from_field(u0, p)
    e0 = system.modified_energy()
    samples = dense_galerkin_run(system, p.dt, p.t_end, 1)
    return max(abs(system.modified_energy(s.amplitudes) - e0) for s in samples) / e0


def fixtures(N):
    grid = WaveGrid(N)
    return {
        "abc": initial_condition("abc", grid),
        "taylor_green": initial_condition("taylor_green", grid),
        "random_smooth": initial_condition("random_smooth", grid, seed=1, decay_s=2),
    }


def equivalence_suite(seeds=20, sizes=ORACLE_SIZES, T=0.05, dt=1e-3):
    """Every oracle comparison, as a list of :class:`CheckRow`."""
    rows = []
    for N in sizes:
        rows.append(CheckRow("bilinear vs convolution", N, bilinear_mismatch(N, range(seeds)), BILINEAR_TOL))
        rows.append(CheckRow("skew symmetry", N, skew_defect(N, range(seeds)), SKEW_TOL))
        for name, u0 in fixtures(N).items():
            for label, nu, alpha, r in (("fEV", 0.0, 0.1, 1.0), ("fNSV", 1e-2, 0.1, 0.75)):
                p = SolverParams(nu=nu, alpha=alpha, r=r, N=N, dt=dt, t_end=T)
                rows.append(CheckRow(f"{label} {name} trajectory", N, trajectory_mismatch(p, u0), TRAJECTORY_TOL))
        fev = SolverParams(nu=0.0, alpha=0.1, r=1.0, N=N, dt=dt, t_end=T)
        drift = dense_energy_drift(fev, fixtures(N)["random_smooth"])
        rows.append(CheckRow("oracle fEV energy drift", N, drift, CONSERVATION_TOL))
    return rows


def all_passed(rows):
    return all(row.passed and not math.isnan(row.value) for row in rows)
