"""Energy functionals, the dissipation accumulator and the energy-balance residual."""

from dataclasses import astuple, dataclass, fields

import numpy as np

from .spectral import sobolev_norm_sq

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class EnergyReport:
    """Diagnostics of one sample.

    ``kinetic`` is ``|u|^2``, ``voigt`` is ``alpha^(2r) |A^(r/2) u|^2``, and
    ``modified`` their sum.  ``dissipation_cum`` is ``2 nu int_0^t |A^(1/2) u|^2``
    by the trapezoid rule.  ``blowup_monitor`` equals ``voigt``; it is the
    quantity whose failure to vanish as alpha -> 0 signals singularity
    formation of the limiting equations.
    """

    t: float
    kinetic: float
    voigt: float
    modified: float
    dissipation_cum: float
    blowup_monitor: float
    enstrophy: float
    max_div: float

    def as_tuple(self):
        return astuple(self)


REPORT_FIELDS = tuple(f.name for f in fields(EnergyReport))


class DissipationAccumulator:
    """Trapezoid-rule running integral of ``2 nu |A^(1/2) u|^2``.

    The first :meth:`update` only sets the baseline.  Repeated updates at
    the same time are no-ops, so a caller may feed every step while reports
    are drawn at a coarser cadence.
    """

    def __init__(self, nu, total=0.0):
        self.nu = nu
        self.total = total
        self.t = None
        self.rate = None

    def update(self, t, enstrophy):
        rate = 2.0 * self.nu * enstrophy
        if self.t is None:
            self.t, self.rate = t, rate
        elif t > self.t:
            self.total += 0.5 * (t - self.t) * (self.rate + rate)
            self.t, self.rate = t, rate
        elif t < self.t:
            raise ValueError(f"dissipation accumulator cannot go back in time ({t} < {self.t})")
        return self.total


def energy_parts(grid, coeffs, alpha, r):
    """(kinetic, voigt, enstrophy) of a coefficient array."""
    kinetic = sobolev_norm_sq(grid, coeffs, 0)
    voigt = alpha ** (2 * r) * sobolev_norm_sq(grid, coeffs, r) if alpha > 0 else 0.0
    enstrophy = sobolev_norm_sq(grid, coeffs, 1)
    return kinetic, voigt, enstrophy


def max_divergence(grid, coeffs):
    """``max_k |2 pi k . u_k|``."""
    kdotu = np.sum(grid.k_vectors * coeffs, axis=0)
    return float(TWO_PI * np.max(np.abs(kdotu)))


def energy_report(state, p, accumulator=None):
    """Diagnostics of ``state``; advances ``accumulator`` to ``state.t`` if given."""
    grid = state.u.grid
    c = state.u.coeffs
    kinetic, voigt, enstrophy = energy_parts(grid, c, p.alpha, p.r)
    dissipation = 0.0
    if accumulator is not None:
        dissipation = accumulator.update(state.t, enstrophy)
    return EnergyReport(
        t=state.t,
        kinetic=kinetic,
        voigt=voigt,
        modified=kinetic + voigt,
        dissipation_cum=dissipation,
        blowup_monitor=voigt,
        enstrophy=enstrophy,
        max_div=max_divergence(grid, c),
    )


def energy_balance_residual(series, p=None):
    """``max_t |modified(t) + dissipation_cum(t) - modified(0)| / modified(0)``.

    Returns 0 for identically zero data.
    """
    series = list(series)
    if not series:
        raise ValueError("energy_balance_residual needs at least one report")
    e0 = series[0].modified
    diffs = [abs(rep.modified + rep.dissipation_cum - e0) for rep in series]
    if e0 == 0:
        return max(diffs)
    return max(diffs) / e0
