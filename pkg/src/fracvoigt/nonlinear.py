"""Dealiased pseudo-spectral evaluation of ``B(u, v) = P_sigma((u . grad) v)``."""

from dataclasses import dataclass

import numpy as np

from .spectral import SpectralField, project_coeffs, same_grid
from .transforms import plan_for

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class DealiasRule:
    """Which modes survive around physical-space products.

    ``cutoff`` is the largest retained ``|k_i|``.  For ``two_thirds`` it is the
    largest K with ``3K < N`` (``floor(N/3)`` unless 3 divides N), which is
    exactly the condition for quadratic products to alias only onto
    discarded modes.
    """

    scheme: str
    cutoff: int

    @classmethod
    def for_grid(cls, scheme, N):
        if scheme == "two_thirds":
            return cls(scheme, (N - 1) // 3)
        if scheme == "none":
            return cls(scheme, N // 2 - 1)
        raise ValueError(f"unknown dealias scheme {scheme!r}; expected 'two_thirds' or 'none'")

    def mask(self, grid):
        return np.all(np.abs(grid.k_vectors) <= self.cutoff, axis=0)


def _rule(rule, grid):
    if rule is None:
        rule = "two_thirds"
    if isinstance(rule, str):
        return DealiasRule.for_grid(rule, grid.N)
    return rule


class Advection:
    """Precomputed arrays for repeated evaluation of ``B`` on one grid."""

    def __init__(self, grid, rule="two_thirds"):
        self.grid = grid
        self.rule = _rule(rule, grid)
        self.mask = self.rule.mask(grid)
        self.plan = plan_for(grid.N)
        self.ik = (1j * TWO_PI) * grid.k_vectors.astype(np.float64)

    def physical(self, u, v):
        """``(u . grad) v`` in physical space for dealiased coefficient arrays."""
        N = self.grid.N
        stack = np.empty((12, N, N, N), dtype=np.complex128)
        stack[:3] = u
        # stack[3 + 3*j + i] = d_j v_i
        for j in range(3):
            stack[3 + 3 * j : 6 + 3 * j] = self.ik[j] * v
        phys = self.plan.inverse(stack)
        grads = phys[3:].reshape(3, 3, N, N, N)
        return np.einsum("jxyz,jixyz->ixyz", phys[:3], grads)

    def __call__(self, u, v=None):
        """Array form of :func:`bilinear_term` (``v`` defaults to ``u``)."""
        u = u * self.mask
        v = u if v is None else v * self.mask
        out = self.plan.forward(self.physical(u, v))
        out *= self.mask
        out = project_coeffs(self.grid, out)
        out[:, 0, 0, 0] = 0.0
        return out


def bilinear_term(u, v, rule="two_thirds"):
    """``B(u, v)``: transform, multiply in physical space, transform back, dealias, project.

    Inputs and output are truncated to the rule's retained modes; the
    result is mean-free and divergence-free.
    """
    grid = same_grid(u, v)
    adv = Advection(grid, rule)
    return SpectralField(grid, adv(u.coeffs, v.coeffs))


def trilinear_form(u, v, w, rule="two_thirds"):
    """Real inner product ``<B(u, v), w>``."""
    grid = same_grid(u, v, w)
    b = Advection(grid, rule)(u.coeffs, v.coeffs)
    return float(np.sum((b * np.conj(w.coeffs)).real))
