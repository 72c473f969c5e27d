"""Brute-force reference implementations for cross-checking the pseudo-spectral path.

Nothing here touches the FFT code, the vectorized projection or the solver's
multipliers; the only shared type is :class:`~fracvoigt.spectral.WaveGrid`
(used for storage indexing).  Costs grow like N^6, so inputs are capped at
``N <= 12``.
"""

from dataclasses import dataclass

import numpy as np

from .spectral import SpectralField

MAX_N = 12
TWO_PI = 2.0 * np.pi


def dealias_cutoff(N):
    """Largest K with 3K < N: quadratic products of |k_i| <= K modes cannot alias back."""
    return (N - 1) // 3


def _guard(N):
    if N > MAX_N:
        raise ValueError(f"oracle cost guard: N={N} exceeds {MAX_N}")


def box_modes(cutoff, include_zero=False):
    """Integer wavevectors with every ``|k_i| <= cutoff``, lexicographic order."""
    r = np.arange(-cutoff, cutoff + 1)
    ks = np.array([(a, b, c) for a in r for b in r for c in r], dtype=np.int64)
    if not include_zero:
        ks = ks[np.any(ks != 0, axis=1)]
    return ks


def _gather(grid, coeffs, modes):
    idx = tuple((modes % grid.N).T)
    return coeffs[(slice(None),) + idx].T.copy()


def _scatter(grid, modes, amps):
    out = np.zeros(grid.shape, dtype=np.complex128)
    idx = tuple((modes % grid.N).T)
    out[(slice(None),) + idx] = amps.T
    return out


def dense_projector(k):
    """3x3 matrix ``I - k k^T / |k|^2`` (identity at k = 0)."""
    k = np.asarray(k, dtype=np.float64)
    ksq = k @ k
    if ksq == 0:
        return np.eye(3)
    return np.eye(3) - np.outer(k, k) / ksq


def dense_leray(grid, coeffs):
    """Leray projection by an explicit 3x3 matrix product at every lattice mode."""
    out = np.zeros_like(coeffs)
    N = grid.N
    for i in range(N):
        for j in range(N):
            for l in range(N):
                k = (grid.k1d[i], grid.k1d[j], grid.k1d[l])
                out[:, i, j, l] = dense_projector(k) @ coeffs[:, i, j, l]
    return out


def dense_helmholtz_inverse(k, alpha, r):
    """``1 / (1 + alpha^(2r) (4 pi^2 |k|^2)^r)`` for one integer wavevector."""
    lam = 4.0 * np.pi**2 * float(np.dot(k, k))
    if alpha == 0 or lam == 0:
        return 1.0
    return 1.0 / (1.0 + alpha ** (2 * r) * lam**r)


def convolution_bilinear(u, v, cutoff=None):
    """Exact ``P_sigma((u . grad) v)`` as the truncated convolution
    ``sum_{p+q=k} 2 pi i (u_p . q) v_q``, kept for ``|k_i| <= cutoff``.

    ``cutoff`` defaults to ``N/2 - 1``: the whole matched lattice, with no
    wrap-around.  Pass :func:`dealias_cutoff` to compare with the dealiased
    pseudo-spectral term.
    """
    grid = u.grid
    if v.grid != grid:
        raise ValueError("grid mismatch")
    _guard(grid.N)
    if cutoff is None:
        cutoff = grid.N // 2 - 1
    lattice = box_modes(grid.N // 2 - 1, include_zero=True)
    a = _gather(grid, u.coeffs, lattice)
    b = _gather(grid, v.coeffs, lattice)
    p_modes = lattice[np.any(a != 0, axis=1)]
    a_p = a[np.any(a != 0, axis=1)]
    q_modes = lattice[np.any(b != 0, axis=1)]
    b_q = b[np.any(b != 0, axis=1)]

    width = 2 * cutoff + 1
    box = np.zeros((width, width, width, 3), dtype=np.complex128)
    for p, ap in zip(p_modes, a_p):
        k = p + q_modes
        inside = np.all(np.abs(k) <= cutoff, axis=1)
        if not inside.any():
            continue
        coef = TWO_PI * 1j * (q_modes[inside] @ ap)
        vals = coef[:, None] * b_q[inside]
        idx = k[inside] + cutoff
        np.add.at(box, (idx[:, 0], idx[:, 1], idx[:, 2]), vals)

    out_modes = box_modes(cutoff)
    out = np.empty((len(out_modes), 3), dtype=np.complex128)
    for n, k in enumerate(out_modes):
        out[n] = dense_projector(k) @ box[tuple(k + cutoff)]
    return SpectralField(grid, _scatter(grid, out_modes, out))


# ---------------------------------------------------------------------------
# Dense Galerkin ODE system
# ---------------------------------------------------------------------------

@dataclass
class DenseSample:
    t: float
    step_index: int
    amplitudes: np.ndarray

    def to_field(self, grid, modes):
        return SpectralField(grid, _scatter(grid, modes, self.amplitudes))


class DenseGalerkinSystem:
    """Galerkin ODEs ``(I + alpha^(2r) A^r) du/dt + nu A u = -P B(u, u)`` on an explicit mode list.

    ``state`` holds one complex 3-vector per mode (rows follow ``modes``).
    """

    def __init__(self, modes, state, params):
        self.modes = np.asarray(modes, dtype=np.int64)
        self.state = np.asarray(state, dtype=np.complex128)
        self.params = params
        if len(self.modes) > 500:
            raise ValueError(f"dense Galerkin system limited to 500 modes, got {len(self.modes)}")
        lookup = {tuple(k): i for i, k in enumerate(self.modes)}
        if any(tuple(-k) not in lookup for k in self.modes):
            raise ValueError("mode list must be closed under negation")
        self._lookup = lookup
        self.lam = 4.0 * np.pi**2 * np.sum(self.modes.astype(np.float64) ** 2, axis=1)
        self.proj = np.array([dense_projector(k) for k in self.modes])
        self.inv = np.array([dense_helmholtz_inverse(k, params.alpha, params.r) for k in self.modes])
        self._build_triads()

    @classmethod
    def from_field(cls, field, params, cutoff=None):
        """Galerkin system on ``|k_i| <= cutoff`` (default: the two-thirds cutoff)."""
        _guard(field.grid.N)
        if cutoff is None:
            cutoff = dealias_cutoff(field.grid.N)
        modes = box_modes(cutoff)
        return cls(modes, _gather(field.grid, field.coeffs, modes), params)

    def _build_triads(self):
        P, Q, K = [], [], []
        for i, p in enumerate(self.modes):
            for j, q in enumerate(self.modes):
                n = self._lookup.get(tuple(p + q))
                if n is not None:
                    P.append(i)
                    Q.append(j)
                    K.append(n)
        self._P = np.array(P, dtype=np.int64)
        self._Q = np.array(Q, dtype=np.int64)
        self._K = np.array(K, dtype=np.int64)
        self._q_vec = self.modes[self._Q].astype(np.float64)

    def nonlinear(self, a):
        """Projected convolution ``P B(u, u)`` restricted to the mode list."""
        coef = TWO_PI * 1j * np.sum(a[self._P] * self._q_vec, axis=1)
        conv = np.zeros_like(a)
        np.add.at(conv, self._K, coef[:, None] * a[self._Q])
        return np.einsum("mij,mj->mi", self.proj, conv)

    def tendency(self, a):
        nu = self.params.nu
        return -(self.nonlinear(a) + nu * self.lam[:, None] * a) * self.inv[:, None]

    def modified_energy(self, a=None):
        a = self.state if a is None else a
        p = self.params
        weight = 1.0 + (p.alpha ** (2 * p.r) * self.lam**p.r if p.alpha > 0 else 0.0)
        return float(np.sum(weight[:, None] * np.abs(a) ** 2))

    def to_field(self, grid, a=None):
        return SpectralField(grid, _scatter(grid, self.modes, self.state if a is None else a))


def dense_galerkin_run(system, dt, T, sample_every=1):
    """Classical RK4 on the dense system; returns a list of :class:`DenseSample`."""
    n_steps = int(round(T / dt))
    a = system.state.copy()
    samples = [DenseSample(0.0, 0, a.copy())]
    for step in range(1, n_steps + 1):
        k1 = system.tendency(a)
        k2 = system.tendency(a + 0.5 * dt * k1)
        k3 = system.tendency(a + 0.5 * dt * k2)
        k4 = system.tendency(a + dt * k3)
        a = a + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(a)):
            raise ArithmeticError(f"dense Galerkin run diverged at step {step}")
        if step % sample_every == 0 or step == n_steps:
            samples.append(DenseSample(step * dt, step, a.copy()))
    return samples
