"""Transform plans between full Fourier coefficient arrays and physical samples.

Any FFT backend can sit behind :class:`TransformPlan`; this one uses the
real-to-complex transforms of :mod:`scipy.fft` and rebuilds the negative-kz
half from Hermitian symmetry, so forward output is exactly Hermitian.
"""

from functools import lru_cache

import numpy as np
import scipy.fft


class TransformPlan:
    """Forward/inverse transform for an ``N^3`` grid, batched over leading axes.

    Plans hold only immutable index arrays and may be shared across threads.
    """

    def __init__(self, N):
        self.N = N
        self.half = N // 2 + 1
        self._neg = (-np.arange(N)) % N
        self._axes = (-3, -2, -1)

    def inverse(self, coeffs):
        """Physical samples of Hermitian coefficients ``coeffs[..., N, N, N]``."""
        N = self.N
        return scipy.fft.irfftn(coeffs[..., : self.half], s=(N, N, N), axes=self._axes, norm="forward")

    def forward(self, values):
        """Normalized full coefficients of real samples ``values[..., N, N, N]``."""
        N = self.N
        half = scipy.fft.rfftn(values, axes=self._axes, norm="forward")
        out = np.empty(half.shape[:-1] + (N,), dtype=np.complex128)
        out[..., : self.half] = half
        tail = half[..., N // 2 - 1 : 0 : -1]
        tail = np.take(np.take(tail, self._neg, axis=-3), self._neg, axis=-2)
        out[..., self.half :] = np.conj(tail)
        return out


@lru_cache(maxsize=None)
def plan_for(N):
    """Shared plan for grid size ``N``."""
    return TransformPlan(N)
