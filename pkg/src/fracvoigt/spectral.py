"""Fourier representation of divergence-free fields on the unit torus [0,1]^3.

A velocity field is stored as its full complex Fourier coefficients
``coeffs[c, i, j, l]`` for component ``c`` and lattice index ``(i, j, l)`` in
FFT storage order, normalized so that

    u(x) = sum_k  coeffs[:, k] * exp(2 pi i k.x)

Index ``N/2`` along any axis is the unmatched Nyquist row, labelled ``+N/2``;
it has no conjugate partner on the lattice and is kept at zero everywhere.

The Stokes operator is diagonal with eigenvalue ``lambda_k = 4 pi^2 |k|^2``,
and the H^s norm used throughout is ``(sum_k lambda_k^s |u_k|^2)^(1/2)``.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigurationError

FOUR_PI_SQ = 4.0 * np.pi**2


class WaveGrid:
    """Truncated integer wavenumber lattice with ``N`` modes per dimension."""

    def __init__(self, N):
        N = int(N)
        if N < 4 or N % 2:
            raise ConfigurationError(f"N must be an even integer >= 4, got {N}")
        self.N = N

    def __repr__(self):
        return f"WaveGrid(N={self.N})"

    def __eq__(self, other):
        return isinstance(other, WaveGrid) and other.N == self.N

    def __hash__(self):
        return hash(("WaveGrid", self.N))

    def __getstate__(self):
        return {"N": self.N}

    def __setstate__(self, state):
        self.N = state["N"]

    @cached_property
    def k1d(self):
        """Integer wavenumbers in storage order, Nyquist labelled +N/2."""
        k = np.fft.fftfreq(self.N, 1.0 / self.N).astype(np.int64)
        k[self.N // 2] = self.N // 2
        return k

    @cached_property
    def k_vectors(self):
        """Integer wavevectors, shape (3, N, N, N)."""
        k = self.k1d
        return np.stack(np.meshgrid(k, k, k, indexing="ij"))

    @cached_property
    def k_squared(self):
        return np.sum(self.k_vectors**2, axis=0)

    @cached_property
    def lam(self):
        """Stokes eigenvalue per mode."""
        return FOUR_PI_SQ * self.k_squared.astype(np.float64)

    @cached_property
    def matched(self):
        """Boolean mask of modes whose negation is also on the lattice."""
        return np.all(np.abs(self.k_vectors) < self.N // 2, axis=0)

    @property
    def shape(self):
        return (3, self.N, self.N, self.N)

    def index(self, k):
        """Storage index of integer wavevector ``k``."""
        k = tuple(int(c) for c in k)
        h = self.N // 2
        if any(c <= -h or c > h for c in k):
            raise IndexError(f"wavevector {k} outside lattice of N={self.N}")
        return tuple(c % self.N for c in k)

    def eigen_order(self):
        """Nonzero matched wavevectors sorted by eigenvalue, ties broken lexicographically.

        Returns an int array of shape (M, 3).
        """
        mask = self.matched & (self.k_squared > 0)
        ks = self.k_vectors[:, mask].T
        ksq = np.sum(ks**2, axis=1)
        order = np.lexsort((ks[:, 2], ks[:, 1], ks[:, 0], ksq))
        return ks[order]

    def mode_count(self):
        return int(np.count_nonzero(self.matched & (self.k_squared > 0)))


def wavenumber_grid(N):
    """Build the lattice for ``N`` modes per dimension (even, ``N >= 4``)."""
    return WaveGrid(N)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Three-component velocity field in Fourier space.

    Operations return new fields; ``coeffs`` is never modified in place by
    library code.
    """

    grid: WaveGrid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != self.grid.shape:
            raise ValueError(f"coeffs shape {c.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128))

    @classmethod
    def single_mode(cls, grid, k, amplitude):
        """Field with amplitude at ``k`` and its conjugate at ``-k``."""
        c = np.zeros(grid.shape, dtype=np.complex128)
        amp = np.asarray(amplitude, dtype=np.complex128)
        c[(slice(None),) + grid.index(k)] = amp
        c[(slice(None),) + grid.index([-x for x in k])] = np.conj(amp)
        return cls(grid, c)

    @classmethod
    def from_physical(cls, grid, values):
        """Transform real samples ``values[c, x, y, z]`` at ``x_j = j/N``."""
        values = np.asarray(values, dtype=np.float64)
        c = np.fft.fftn(values, axes=(1, 2, 3)) / grid.N**3
        c[:, ~grid.matched] = 0.0
        return cls(grid, _hermitian_part(grid, c))

    def to_physical(self):
        n3 = self.grid.N**3
        return np.fft.ifftn(self.coeffs * n3, axes=(1, 2, 3)).real

    def copy(self):
        return SpectralField(self.grid, self.coeffs.copy())

    def _check_grid(self, other):
        if other.grid != self.grid:
            raise ValueError(f"grid mismatch: {self.grid} vs {other.grid}")

    def __add__(self, other):
        self._check_grid(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check_grid(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs)


def _hermitian_part(grid, c):
    neg = (-np.arange(grid.N)) % grid.N
    mirrored = c[:, neg][:, :, neg][:, :, :, neg]
    return 0.5 * (c + np.conj(mirrored))


def same_grid(*fields):
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise ValueError(f"grid mismatch: {grid} vs {f.grid}")
    return grid


# ---------------------------------------------------------------------------
# Leray projection
# ---------------------------------------------------------------------------

def project_coeffs(grid, c):
    """Array form of :func:`leray_project`; returns a new array."""
    k = grid.k_vectors
    ksq = grid.k_squared
    kdotu = np.sum(k * c, axis=0)
    scale = np.divide(kdotu, ksq, out=np.zeros_like(kdotu), where=ksq > 0)
    return c - k * scale


def leray_project(f):
    """Project onto divergence-free fields: ``u_k - k (k.u_k)/|k|^2``, identity at k=0."""
    return SpectralField(f.grid, project_coeffs(f.grid, f.coeffs))


# ---------------------------------------------------------------------------
# Fourier multipliers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class APower:
    """Fractional Stokes power ``A^s``: multiply mode k by ``lambda_k^s``."""

    s: float

    def symbol(self, grid):
        lam = grid.lam
        out = np.zeros_like(lam)
        np.power(lam, self.s, out=out, where=lam > 0)
        return out


@dataclass(frozen=True)
class FractionalHelmholtz:
    """``I + alpha^(2r) A^r``."""

    alpha: float
    r: float

    def __post_init__(self):
        _check_alpha_r(self.alpha, self.r)

    def symbol(self, grid):
        if self.alpha == 0:
            return np.ones_like(grid.lam)
        return 1.0 + self.alpha ** (2 * self.r) * APower(self.r).symbol(grid)


@dataclass(frozen=True)
class HelmholtzInverse:
    """``(I + alpha^(2r) A^r)^(-1)``; every multiplier lies in (0, 1]."""

    alpha: float
    r: float

    def __post_init__(self):
        _check_alpha_r(self.alpha, self.r)

    def symbol(self, grid):
        return 1.0 / FractionalHelmholtz(self.alpha, self.r).symbol(grid)


def _check_alpha_r(alpha, r):
    errors = []
    if not r > 0:
        errors.append(f"r must be > 0, got {r}")
    if not alpha >= 0:
        errors.append(f"alpha must be >= 0, got {alpha}")
    if errors:
        raise ConfigurationError(errors)


def apply_multiplier(f, kind):
    """Scale each Fourier mode of ``f`` by ``kind.symbol(grid)``."""
    if isinstance(kind, APower) and kind.s < 0:
        _require_mean_free(f)
    return SpectralField(f.grid, f.coeffs * kind.symbol(f.grid))


def _require_mean_free(f):
    if np.any(f.coeffs[:, 0, 0, 0] != 0):
        raise ValueError("negative Stokes powers need a mean-free field")


# ---------------------------------------------------------------------------
# Norms and inner products
# ---------------------------------------------------------------------------

def sobolev_norm(f, s):
    """``(sum_k lambda_k^s |u_k|^2)^(1/2)``; ``s = 0`` is the L2 norm."""
    if s < 0:
        _require_mean_free(f)
    return float(np.sqrt(sobolev_norm_sq(f.grid, f.coeffs, s)))


def sobolev_norm_sq(grid, c, s):
    """Squared H^s norm of a coefficient array."""
    power = np.sum(c.real**2 + c.imag**2, axis=0)
    if s == 0:
        return float(np.sum(power))
    return float(np.sum(APower(s).symbol(grid) * power))


def inner_product(f, g):
    """Real L2 inner product ``(f, g)`` on the unit torus."""
    same_grid(f, g)
    return float(np.sum((f.coeffs * np.conj(g.coeffs)).real))


# ---------------------------------------------------------------------------
# Galerkin truncation
# ---------------------------------------------------------------------------

def truncation_cutoff(grid, M):
    """Eigenvalue of the rank-``M`` mode in :meth:`WaveGrid.eigen_order`."""
    order = grid.eigen_order()
    if not 1 <= M <= len(order):
        raise ValueError(f"truncation rank must be in [1, {len(order)}], got {M}")
    k = order[M - 1]
    return FOUR_PI_SQ * float(np.dot(k, k))


def truncate(f, M):
    """Galerkin projection keeping every mode with eigenvalue at most that of rank ``M``.

    Ties at the cutoff eigenvalue are kept together, so conjugate pairs are
    never split.
    """
    lam_cut = truncation_cutoff(f.grid, M)
    keep = (f.grid.lam <= lam_cut) & f.grid.matched
    return SpectralField(f.grid, np.where(keep, f.coeffs, 0.0))


# ---------------------------------------------------------------------------
# Invariant checks
# ---------------------------------------------------------------------------

def hermitian_defect(f):
    """Max |u_{-k} - conj(u_k)| over matched modes."""
    c = np.where(f.grid.matched, f.coeffs, 0.0)
    neg = (-np.arange(f.grid.N)) % f.grid.N
    mirrored = c[:, neg][:, :, neg][:, :, :, neg]
    return float(np.max(np.abs(mirrored - np.conj(c))))


def divergence_defect(f):
    """``max_k |k.u_k| / |k|`` relative to ``max_k |u_k|`` (0 for the zero field).

    Normalizing by the field's largest mode keeps round-off-level modes from
    dominating the ratio.
    """
    k = f.grid.k_vectors
    kdotu = np.abs(np.sum(k * f.coeffs, axis=0))
    knorm = np.sqrt(f.grid.k_squared)
    per_mode = np.divide(kdotu, knorm, out=np.zeros_like(kdotu), where=knorm > 0)
    scale = float(np.max(np.sqrt(np.sum(np.abs(f.coeffs) ** 2, axis=0))))
    if scale == 0:
        return 0.0
    return float(np.max(per_mode)) / scale


def check_invariants(f, tol=1e-12):
    """Raise ``AssertionError`` unless ``f`` is Hermitian, mean-free and divergence-free."""
    scale = float(np.max(np.abs(f.coeffs))) if f.coeffs.size else 0.0
    problems = []
    if np.any(f.coeffs[:, ~f.grid.matched] != 0):
        problems.append("nonzero unmatched Nyquist mode")
    if np.any(f.coeffs[:, 0, 0, 0] != 0):
        problems.append("nonzero mean")
    if hermitian_defect(f) > tol * max(scale, 1e-300):
        problems.append(f"Hermitian defect {hermitian_defect(f):.3e}")
    if divergence_defect(f) > tol:
        problems.append(f"divergence defect {divergence_defect(f):.3e}")
    if problems:
        raise AssertionError("; ".join(problems))
