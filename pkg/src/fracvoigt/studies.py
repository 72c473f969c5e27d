"""Regularization-ladder experiments: alpha -> 0 and nu -> 0 convergence rates and the
alpha-ladder blow-up monitor scan.

Every ladder run shares N, dt, t_end and initial data with its reference run,
so discretization error cancels to leading order and the measured rate
isolates the regularization parameter.
"""

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import StudyError
from .solver import run
from .spectral import sobolev_norm_sq

log = logging.getLogger(__name__)

NORMS = ("L2", "Hr", "H1", "modified", "modified_squared", "L2H1")


def fit_rate(params, errors):
    """Least-squares slope of ``log(error)`` against ``log(param)``.

    Rungs with a non-positive parameter or error are left out of the fit.
    """
    pairs = [(p, e) for p, e in zip(params, errors) if p > 0 and e > 0]
    if len(pairs) < 2:
        return math.nan
    x = np.log([p for p, _ in pairs])
    y = np.log([e for _, e in pairs])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


@dataclass
class Rung:
    """Errors of one ladder run against the reference.

    ``error_L2``, ``error_Hr``, ``error_H1`` and ``error_modified`` are maxima
    over samples; ``error_L2H1`` is ``int_0^T |A^(1/2) du|^2 dt`` (trapezoid).
    """

    value: float
    alpha: float
    nu: float
    error_L2: float = math.nan
    error_modified: float = math.nan
    error_L2H1: float = math.nan
    error_Hr: float = math.nan
    error_H1: float = math.nan
    error_initial: float = math.nan
    status: str = "ok"
    message: str = ""
    series: list = field(default_factory=list, repr=False, compare=False)

    def norm(self, name):
        if name == "modified_squared":
            return self.error_modified**2
        return getattr(self, "error_" + name)


@dataclass
class ConvergenceResult:
    study: str
    parameter: str
    r: float
    ladder: list
    primary_norm: str
    fitted_rate: float
    rates: dict
    monotone: bool
    reference_id: str
    reference: dict = field(default_factory=dict)
    reference_series: list = field(default_factory=list, repr=False, compare=False)

    def errors(self, norm=None):
        return [rung.norm(norm or self.primary_norm) for rung in self.ladder]

    def values(self):
        return [rung.value for rung in self.ladder]

    def to_dict(self):
        """JSON-ready summary; time series are left out."""
        out = asdict(self)
        out.pop("reference_series")
        for rung in out["ladder"]:
            rung.pop("series")
        return out


@dataclass
class BlowupScanReport:
    """Sup over time of the blow-up monitor for each alpha.

    The verdict is heuristic evidence only.
    """

    alphas: list
    monitor_sup: list
    statuses: list
    verdict: str
    threshold: float
    r: float
    nu: float
    t_end: float

    def to_dict(self):
        return asdict(self)


# ---------------------------------------------------------------------------
# Shared machinery
# ---------------------------------------------------------------------------

class _ErrorTracker:
    """Accumulates rung-vs-reference errors sample by sample."""

    def __init__(self, reference, alpha, r):
        self.reference = reference
        self.alpha = alpha
        self.r = r
        self.max = dict.fromkeys(("L2", "Hr", "H1", "modified"), 0.0)
        self.initial = None
        self.l2h1 = 0.0
        self._last = None

    def __call__(self, state, report):
        ref = self.reference.get(state.step_index)
        if ref is None:
            raise StudyError(f"reference has no sample at step {state.step_index}")
        grid = state.u.grid
        d = state.u.coeffs - ref
        l2 = sobolev_norm_sq(grid, d, 0)
        hr = sobolev_norm_sq(grid, d, self.r)
        h1 = sobolev_norm_sq(grid, d, 1)
        mod = l2 + (self.alpha ** (2 * self.r) * hr if self.alpha > 0 else 0.0)
        for key, val in (("L2", l2), ("Hr", hr), ("H1", h1), ("modified", mod)):
            self.max[key] = max(self.max[key], math.sqrt(val))
        if self.initial is None:
            self.initial = math.sqrt(l2)
        if self._last is not None:
            t0, h0 = self._last
            self.l2h1 += 0.5 * (state.t - t0) * (h0 + h1)
        self._last = (state.t, h1)


def _run_rung(task):
    p, u0, reference, sample_every, alpha_mod, value = task
    tracker = _ErrorTracker(reference, alpha_mod, p.r)
    result = run(p, u0, sample_every, on_sample=tracker)
    rung = Rung(value=value, alpha=p.alpha, nu=p.nu, status=result.status, series=result.series)
    if result.status != "ok":
        rung.message = str(result.error)
        return rung
    rung.error_L2 = tracker.max["L2"]
    rung.error_Hr = tracker.max["Hr"]
    rung.error_H1 = tracker.max["H1"]
    rung.error_modified = tracker.max["modified"]
    rung.error_L2H1 = tracker.l2h1
    rung.error_initial = tracker.initial
    return rung


def _map(fn, tasks, workers):
    if workers and workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _fingerprint(p, u0, final):
    record = {
        "params": {k: getattr(p, k) for k in ("nu", "alpha", "r", "N", "dt", "t_end", "dealias")},
        "u0_sha256": hashlib.sha256(np.ascontiguousarray(u0.coeffs).tobytes()).hexdigest(),
        "final_sha256": hashlib.sha256(np.ascontiguousarray(final.u.coeffs).tobytes()).hexdigest(),
        "final_step": final.step_index,
    }
    digest = hashlib.sha256(json.dumps(record, sort_keys=True).encode()).hexdigest()
    return digest, record


def _reference(p, u0, sample_every):
    result = run(p, u0, sample_every, keep_states=True)
    if result.status != "ok":
        raise StudyError(f"reference run ({p.system}) diverged: {result.error}")
    states = {s.step_index: s.u.coeffs for s in result.states}
    return states, _fingerprint(p, u0, result.final), result.series


def _check_shared(reference, rungs):
    keys = ("N", "dt", "t_end", "dealias", "r")
    for p in rungs:
        for key in keys:
            if getattr(p, key) != getattr(reference, key):
                raise StudyError(f"ladder run differs from reference in {key}")


def _ladder_study(study, parameter, reference_p, rung_ps, values, alpha_mods, u0, primary, sample_every, workers,
                  strict):
    _check_shared(reference_p, rung_ps)
    ref_states, (ref_id, ref_record), ref_series = _reference(reference_p, u0, sample_every)
    tasks = [(p, u0, ref_states, sample_every, a, v) for p, a, v in zip(rung_ps, alpha_mods, values)]
    ladder = _map(_run_rung, tasks, workers)
    bad = [r for r in ladder if r.status != "ok"]
    if bad:
        raise StudyError("diverged rungs: " + "; ".join(f"{parameter}={r.value:g}: {r.message}" for r in bad))
    ladder.sort(key=lambda r: r.value, reverse=True)
    vals = [r.value for r in ladder]
    rates = {name: fit_rate(vals, [r.norm(name) for r in ladder]) for name in NORMS}
    errs = [r.norm(primary) for r in ladder]
    monotone = all(b < a for a, b in zip(errs, errs[1:]))
    if not monotone:
        msg = f"{study}: {primary} errors not strictly decreasing along the ladder: {errs}"
        if strict:
            raise StudyError(msg)
        log.warning(msg)
    return ConvergenceResult(
        study=study,
        parameter=parameter,
        r=reference_p.r,
        ladder=ladder,
        primary_norm=primary,
        fitted_rate=rates[primary],
        rates=rates,
        monotone=monotone,
        reference_id=ref_id,
        reference=ref_record,
        reference_series=ref_series,
    )


# ---------------------------------------------------------------------------
# Public studies
# ---------------------------------------------------------------------------

def alpha_convergence_study(base, alphas, u0, mode="to_euler", *, sample_every=5, workers=1, rate_norm="L2",
                            strict=False):
    """Measure how fast the regularized solution approaches the alpha = 0 solution.

    ``to_euler`` runs every rung with ``nu = 0``; ``to_nse`` keeps
    ``base.nu > 0``.  The reference is the same discretization with
    ``alpha = 0``.  ``fitted_rate`` is the slope of the ``rate_norm`` error.
    """
    if mode == "to_euler":
        base = base.replace(nu=0.0)
    elif mode == "to_nse":
        if base.nu <= 0:
            raise ValueError("to_nse needs nu > 0")
    else:
        raise ValueError(f"unknown mode {mode!r}; expected 'to_euler' or 'to_nse'")
    alphas = [float(a) for a in alphas]
    rungs = [base.replace(alpha=a) for a in alphas]
    return _ladder_study(
        f"alpha:{mode}", "alpha", base.replace(alpha=0.0), rungs, alphas, alphas, u0, rate_norm,
        sample_every, workers, strict,
    )


def viscosity_limit_study(base, nus, u0, mode="fixed_alpha", *, sample_every=5, workers=1, rate_norm=None,
                          strict=False):
    """Measure convergence as nu -> 0.

    ``fixed_alpha`` keeps ``base.alpha`` and compares against the ``nu = 0``
    (fEV) run; the default rate is that of the squared modified-norm error.
    ``joint`` shrinks both along ``alpha = nu^(1/(2r))`` and compares against
    the ``alpha = nu = 0`` (Euler) run; the default rate is the H1 error's.
    """
    nus = [float(n) for n in nus]
    if mode == "fixed_alpha":
        if base.alpha <= 0:
            raise ValueError("fixed_alpha mode needs alpha > 0")
        reference = base.replace(nu=0.0)
        rungs = [base.replace(nu=n) for n in nus]
        alpha_mods = [base.alpha] * len(nus)
        rate_norm = rate_norm or "modified_squared"
    elif mode == "joint":
        reference = base.replace(nu=0.0, alpha=0.0)
        alpha_mods = [n ** (1.0 / (2.0 * base.r)) for n in nus]
        rungs = [base.replace(nu=n, alpha=a) for n, a in zip(nus, alpha_mods)]
        rate_norm = rate_norm or "H1"
    else:
        raise ValueError(f"unknown mode {mode!r}; expected 'fixed_alpha' or 'joint'")
    return _ladder_study(
        f"viscosity:{mode}", "nu", reference, rungs, nus, alpha_mods, u0, rate_norm, sample_every, workers, strict,
    )


def _monitor_sup(task):
    p, u0, sample_every = task
    sup = [0.0]

    def track(state, report):
        sup[0] = max(sup[0], report.blowup_monitor)

    result = run(p, u0, sample_every, on_sample=track)
    return sup[0], result.status


def blowup_scan(base, alphas, u0, T=None, *, threshold=0.1, sample_every=1, workers=1):
    """Track ``sup_t alpha^(2r) |A^(r/2) u(t)|^2`` along a decreasing alpha ladder.

    The verdict is ``consistent_with_regularity`` when every rung's sup is
    below the previous one and the last is below ``threshold`` times the
    first; otherwise ``monitor_not_vanishing``.  Diverged rungs are kept
    (with an infinite sup) and force the latter verdict.
    """
    alphas = sorted((float(a) for a in alphas), reverse=True)
    if len(alphas) < 4:
        raise ValueError("blowup_scan needs a ladder of at least 4 alpha values")
    if any(a <= 0 for a in alphas):
        raise ValueError("blowup_scan alphas must be positive")
    if T is not None:
        base = base.replace(t_end=T)
    tasks = [(base.replace(alpha=a), u0, sample_every) for a in alphas]
    results = _map(_monitor_sup, tasks, workers)
    sups, statuses = [], []
    for (sup, status), a in zip(results, alphas):
        if status != "ok":
            log.error("blow-up scan rung alpha=%g diverged", a)
            sup = math.inf
        sups.append(sup)
        statuses.append(status)
    if all(s == 0.0 for s in sups):
        ok = all(s == "ok" for s in statuses)
    else:
        decreasing = all(b < a for a, b in zip(sups, sups[1:]))
        ok = all(s == "ok" for s in statuses) and decreasing and sups[-1] < threshold * sups[0]
    return BlowupScanReport(
        alphas=alphas,
        monitor_sup=sups,
        statuses=statuses,
        verdict="consistent_with_regularity" if ok else "monitor_not_vanishing",
        threshold=threshold,
        r=base.r,
        nu=base.nu,
        t_end=base.t_end,
    )
