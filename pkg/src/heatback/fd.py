"""Crank-Nicolson finite-difference solver used as an independent forward oracle.

Second order in space and time, unconditionally stable, with the diffusivity
sampled at step midpoints.  Exists only to cross-check the spectral
propagator; it shares no code path with it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .spectral import DiffusionProfile, DomainSpec, SpectralField


@dataclass(frozen=True)
class FDGrid:
    """Interior points of a uniform grid on (0, L) with Dirichlet ends."""

    domain: DomainSpec
    interior: int

    def __post_init__(self):
        if self.interior < 64:
            raise ValueError(f"need at least 64 interior points, got {self.interior}")

    @property
    def dx(self) -> float:
        return self.domain.length / (self.interior + 1)

    @property
    def xs(self) -> np.ndarray:
        return self.dx * np.arange(1, self.interior + 1)

    def sample(self, field: SpectralField) -> np.ndarray:
        return field.evaluate(self.xs)

    def norm(self, values: np.ndarray) -> float:
        """Discrete L2 norm sqrt(dx * sum v^2) over the interior points."""
        return float(np.sqrt(self.dx * np.sum(np.asarray(values, dtype=float) ** 2)))


def fd_evolve(
    grid: FDGrid,
    initial: np.ndarray,
    profile: DiffusionProfile,
    t: float,
    steps: int,
) -> np.ndarray:
    """Advance interior values from time 0 to t by Crank-Nicolson.

    Each step solves (I + r A) u_new = (I - r A) u_old with
    A = tridiag(-1, 2, -1)/dx^2 and r = 0.5 * dt * p(midpoint).
    """
    u = np.asarray(initial, dtype=float).copy()
    if u.shape != (grid.interior,):
        raise ValueError(f"expected {grid.interior} interior values, got {u.shape}")
    if t == 0.0:
        return u
    if steps < 1:
        raise ValueError("steps must be >= 1")
    dt = t / steps
    dx2 = grid.dx**2
    m = grid.interior
    ab = np.zeros((3, m))
    for n in range(steps):
        r = 0.5 * dt * float(profile((n + 0.5) * dt)) / dx2
        rhs = (1.0 - 2.0 * r) * u
        rhs[:-1] += r * u[1:]
        rhs[1:] += r * u[:-1]
        ab[0, 1:] = -r
        ab[1, :] = 1.0 + 2.0 * r
        ab[2, :-1] = -r
        u = solve_banded((1, 1), ab, rhs)
    return u


def oracle_gap(grid: FDGrid, field: SpectralField, fd_values: np.ndarray) -> float:
    """Discrete L2 distance between a spectral field and FD grid values."""
    return grid.norm(grid.sample(field) - np.asarray(fd_values, dtype=float))
