"""Fixed-step RK4 integration of ``(I + alpha^(2r) A^r) du/dt + B(u, u) + nu A u = f``.

``(nu, alpha)`` select the system: fNSV (both positive), fEV (``nu = 0``),
Navier-Stokes (``alpha = 0``) or Euler (both zero).
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .diagnostics import DissipationAccumulator, energy_parts, energy_report
from .errors import ConfigurationError, InstabilityError
from .nonlinear import Advection, DealiasRule
from .spectral import (
    HelmholtzInverse,
    SpectralField,
    check_invariants,
    leray_project,
    wavenumber_grid,
)
from .transforms import plan_for

log = logging.getLogger(__name__)

R_MAX = 1.5
FEV_R_MIN = 5.0 / 6.0  # fEV needs r > 5/6
FNSV_R_MIN = 0.5  # fNSV needs r >= 1/2
ENERGY_GROWTH_TOL = 1e-3
CFL_LIMIT = 0.5


def param_errors(nu, alpha, r, N, dt, t_end, dealias):
    """Every validation problem with a parameter set, as readable strings."""
    errors = []

    def real(name, value):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            errors.append(f"{name} must be a finite number, got {value!r}")
            return False
        return True

    if real("nu", nu) and nu < 0:
        errors.append(f"nu must be >= 0, got {nu}")
    if real("alpha", alpha) and alpha < 0:
        errors.append(f"alpha must be >= 0, got {alpha}")
    if real("r", r) and not 0 < r <= R_MAX:
        errors.append(f"r={r} is outside the admissible window (0, 3/2]")
    if isinstance(N, bool) or not isinstance(N, int):
        errors.append(f"N must be an integer, got {N!r}")
    elif N < 4 or N % 2:
        errors.append(f"N must be an even integer >= 4, got {N}")
    dt_ok = real("dt", dt) and dt > 0
    if real("dt", dt) and not dt > 0:
        errors.append(f"dt must be > 0, got {dt}")
    if real("t_end", t_end):
        if not t_end > 0:
            errors.append(f"t_end must be > 0, got {t_end}")
        elif dt_ok and abs(t_end / dt - round(t_end / dt)) > 1e-9 * max(1.0, t_end / dt):
            errors.append(f"t_end={t_end} is not a whole number of steps dt={dt}")
    if dealias not in ("two_thirds", "none"):
        errors.append(f"dealias must be 'two_thirds' or 'none', got {dealias!r}")
    # real() appends duplicates for dt when not a number; keep the list unique
    return list(dict.fromkeys(errors))


@dataclass(frozen=True)
class SolverParams:
    """Physical and numerical parameters of one run.

    Construction validates and raises :class:`ConfigurationError` listing
    every problem.  Regimes outside the proven well-posedness windows are
    accepted; :meth:`regime_warnings` describes them.
    """

    nu: float
    alpha: float
    r: float
    N: int
    dt: float
    t_end: float
    dealias: str = "two_thirds"
    forcing: SpectralField = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        errors = param_errors(self.nu, self.alpha, self.r, self.N, self.dt, self.t_end, self.dealias)
        if self.forcing is not None and self.forcing.grid.N != self.N:
            errors.append(f"forcing grid N={self.forcing.grid.N} does not match N={self.N}")
        if errors:
            raise ConfigurationError(errors)

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))

    @property
    def system(self):
        if self.alpha > 0:
            return "fNSV" if self.nu > 0 else "fEV"
        return "NSE" if self.nu > 0 else "Euler"

    @property
    def protected(self):
        """True when the parameters lie inside a proven well-posedness window."""
        if self.alpha == 0:
            return False
        if self.nu > 0:
            return self.r >= FNSV_R_MIN
        return self.r > FEV_R_MIN

    def regime(self):
        """One-line description of the active well-posedness regime."""
        if self.alpha == 0:
            return f"{self.system} (alpha = 0): unprotected, no regularization"
        if self.nu > 0:
            window = "fNSV r >= 1/2"
        else:
            window = "fEV r > 5/6"
        state = "inside" if self.protected else "outside (experimental)"
        return f"{self.system}: r = {self.r:g} {state} window {window}"

    def regime_warnings(self):
        if self.alpha == 0:
            return [f"alpha = 0 runs the un-regularized {self.system} equations; analysis-unprotected"]
        if self.nu == 0 and not self.r > FEV_R_MIN:
            return [f"r = {self.r:g} is outside the fEV well-posedness window r > 5/6; experimental"]
        if self.nu > 0 and not self.r >= FNSV_R_MIN:
            return [f"r = {self.r:g} is outside the fNSV well-posedness window r >= 1/2; experimental"]
        return []

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class SimState:
    t: float
    u: SpectralField
    step_index: int


# ---------------------------------------------------------------------------
# Initial conditions
# ---------------------------------------------------------------------------

def initial_condition(kind, grid, **params):
    """Mean-free, divergence-free initial velocity.

    kinds:
      ``abc``            A, B, C (default 1): Beltrami flow with curl u = 2 pi u
      ``taylor_green``   amplitude (default 1)
      ``random_smooth``  seed, decay_s (default 4), energy (default 1):
                         |u_k| ~ (1 + lambda_k)^(-(decay_s+1)/2), random phases,
                         scaled so that |u|_L2^2 = energy
      ``abc_perturbed``  A, B, C, eps (default 0.1), seed, decay_s: ABC plus
                         eps times a unit-energy random_smooth field
    """
    N = grid.N
    x = np.arange(N) / N
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    tp = 2.0 * np.pi

    if kind == "abc":
        A, B, C = (float(params.pop(name, 1.0)) for name in "ABC")
        _no_extra(kind, params)
        vals = np.stack(
            [
                A * np.sin(tp * Z) + C * np.cos(tp * Y),
                B * np.sin(tp * X) + A * np.cos(tp * Z),
                C * np.sin(tp * Y) + B * np.cos(tp * X),
            ]
        )
        return _sampled(grid, vals)

    if kind == "taylor_green":
        amp = float(params.pop("amplitude", 1.0))
        _no_extra(kind, params)
        vals = np.stack(
            [
                amp * np.sin(tp * X) * np.cos(tp * Y) * np.cos(tp * Z),
                -amp * np.cos(tp * X) * np.sin(tp * Y) * np.cos(tp * Z),
                np.zeros_like(X),
            ]
        )
        return _sampled(grid, vals)

    if kind == "random_smooth":
        seed = int(params.pop("seed"))
        decay_s = float(params.pop("decay_s", 4.0))
        energy = float(params.pop("energy", 1.0))
        _no_extra(kind, params)
        return _random_smooth(grid, seed, decay_s, energy)

    if kind == "abc_perturbed":
        A, B, C = (float(params.pop(name, 1.0)) for name in "ABC")
        eps = float(params.pop("eps", 0.1))
        seed = int(params.pop("seed", 0))
        decay_s = float(params.pop("decay_s", 4.0))
        _no_extra(kind, params)
        base = initial_condition("abc", grid, A=A, B=B, C=C)
        return base + eps * _random_smooth(grid, seed, decay_s, 1.0)

    raise ConfigurationError(f"unknown initial condition kind {kind!r}")


def _sampled(grid, values):
    c = leray_project(SpectralField.from_physical(grid, values)).coeffs
    c[:, 0, 0, 0] = 0.0
    return SpectralField(grid, c)


def _no_extra(kind, params):
    if params:
        raise ConfigurationError(f"unexpected parameters for {kind}: {sorted(params)}")


def _random_smooth(grid, seed, decay_s, energy):
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    envelope = (1.0 + grid.lam) ** (-(decay_s + 1.0) / 2.0)
    c = noise * envelope
    c[:, ~grid.matched] = 0.0
    c[:, 0, 0, 0] = 0.0
    neg = (-np.arange(grid.N)) % grid.N
    c = 0.5 * (c + np.conj(c[:, neg][:, :, neg][:, :, :, neg]))
    u = leray_project(SpectralField(grid, c))
    kinetic = float(np.sum(np.abs(u.coeffs) ** 2))
    if kinetic == 0:
        return u
    return u * math.sqrt(energy / kinetic)


# ---------------------------------------------------------------------------
# Right-hand side and time stepping
# ---------------------------------------------------------------------------

class VoigtSolver:
    """Precomputed operators for one parameter set."""

    def __init__(self, p):
        self.p = p
        self.grid = wavenumber_grid(p.N)
        self.advection = Advection(self.grid, p.dealias)
        self.retained = self.advection.mask & self.grid.matched
        self.inverse = None if p.alpha == 0 else HelmholtzInverse(p.alpha, p.r).symbol(self.grid)
        self.viscous = None if p.nu == 0 else p.nu * self.grid.lam
        self.forcing = None
        if p.forcing is not None:
            f = leray_project(p.forcing).coeffs * self.retained
            f[:, 0, 0, 0] = 0.0
            self.forcing = f

    def tendency(self, c):
        """``-(I + alpha^(2r) A^r)^(-1) [B(u, u) + nu A u - f]`` for coefficients ``c``."""
        out = self.advection(c)
        if self.viscous is not None:
            out += self.viscous * c
        if self.forcing is not None:
            out -= self.forcing
        np.negative(out, out=out)
        if self.inverse is not None:
            out *= self.inverse
        return out

    def galerkin(self, u):
        """Restrict ``u`` to the retained (dealiased, matched, mean-free) modes."""
        c = u.coeffs * self.retained
        c[:, 0, 0, 0] = 0.0
        return SpectralField(self.grid, c)

    def step(self, state):
        dt = self.p.dt
        u = state.u.coeffs
        k1 = self.tendency(u)
        k2 = self.tendency(u + (0.5 * dt) * k1)
        k3 = self.tendency(u + (0.5 * dt) * k2)
        k4 = self.tendency(u + dt * k3)
        new = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        step_index = state.step_index + 1
        t = step_index * dt
        if not np.all(np.isfinite(new)):
            raise InstabilityError("non-finite coefficients", t, step_index)
        return SimState(t, SpectralField(self.grid, new), step_index)

    def max_speed(self, u):
        phys = plan_for(self.grid.N).inverse(u.coeffs)
        return float(np.sqrt(np.max(np.sum(phys**2, axis=0))))


def rhs(state, p):
    """Tendency ``du/dt`` at ``state`` as a :class:`SpectralField`."""
    if state.u.grid.N != p.N:
        raise ValueError(f"grid mismatch: state N={state.u.grid.N}, params N={p.N}")
    solver = VoigtSolver(p)
    return SpectralField(solver.grid, solver.tendency(state.u.coeffs))


def step_rk4(state, p):
    """One classical RK4 step of size ``p.dt``."""
    if state.u.grid.N != p.N:
        raise ValueError(f"grid mismatch: state N={state.u.grid.N}, params N={p.N}")
    return VoigtSolver(p).step(state)


# ---------------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    """Outcome of :func:`run`.

    ``series`` holds one report per sample; ``states`` the matching
    snapshots when requested.  On divergence ``status`` is ``"diverged"``,
    ``error`` carries the :class:`InstabilityError` and ``series`` stops at
    the last good sample.
    """

    params: SolverParams
    series: list
    final: SimState
    status: str = "ok"
    error: Exception = None
    states: list = None
    dissipation_cum: float = 0.0
    warnings: list = field(default_factory=list)


def run(p, u0, sample_every=10, *, on_sample=None, keep_states=False, start=None, dissipation_cum=0.0,
        check=False):
    """Integrate from ``u0`` (or a resumed ``start`` state) to ``p.t_end``.

    A report is taken at every step index divisible by ``sample_every`` and
    at the final step.  ``on_sample(state, report)`` is called for each.
    The initial data is Galerkin-truncated to the retained modes.  Pass
    ``start`` (with the ``dissipation_cum`` saved alongside it) to resume;
    the resumed run reproduces the uninterrupted one bit for bit.
    ``check=True`` asserts the field invariants at every sample.
    """
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")
    solver = VoigtSolver(p)
    warnings = list(p.regime_warnings())
    for w in warnings:
        log.warning(w)

    if start is None:
        if u0.grid.N != p.N:
            raise ValueError(f"grid mismatch: u0 N={u0.grid.N}, params N={p.N}")
        state = SimState(0.0, solver.galerkin(u0), 0)
    else:
        state = start
    accumulator = DissipationAccumulator(p.nu, total=dissipation_cum)

    series, states = [], [] if keep_states else None
    dx = 1.0 / p.N

    def cfl(state):
        speed = solver.max_speed(state.u)
        if speed > 0 and p.dt > CFL_LIMIT * dx / speed:
            msg = f"CFL guidance violated at t={state.t:g}: dt={p.dt:g} > {CFL_LIMIT} dx/max|u| = {CFL_LIMIT * dx / speed:g}"
            log.warning(msg)
            if msg not in warnings:
                warnings.append(msg)

    def sample(state):
        report = energy_report(state, p, accumulator)
        if check:
            check_invariants(state.u)
        series.append(report)
        if keep_states:
            states.append(state)
        if on_sample is not None:
            on_sample(state, report)
        return report

    kin, voigt, ens = energy_parts(solver.grid, state.u.coeffs, p.alpha, p.r)
    accumulator.update(state.t, ens)
    e_start = kin + voigt
    cfl(state)
    if start is None:
        sample(state)

    status, error = "ok", None
    n = p.n_steps
    try:
        while state.step_index < n:
            state = solver.step(state)
            kin, voigt, ens = energy_parts(solver.grid, state.u.coeffs, p.alpha, p.r)
            accumulator.update(state.t, ens)
            if p.forcing is None and kin + voigt > e_start * (1.0 + ENERGY_GROWTH_TOL) + 1e-300:
                raise InstabilityError(
                    f"modified energy grew from {e_start:.6g} to {kin + voigt:.6g}", state.t, state.step_index
                )
            if state.step_index % sample_every == 0 or state.step_index == n:
                sample(state)
                cfl(state)
    except InstabilityError as exc:
        log.error("run diverged: %s", exc)
        status, error = "diverged", exc

    return RunResult(
        params=p,
        series=series,
        final=state,
        status=status,
        error=error,
        states=states,
        dissipation_cum=accumulator.total,
        warnings=warnings,
    )
