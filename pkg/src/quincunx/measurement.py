"""Observables: reduced field state, phase-lattice and quadrature distributions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .hilbert import ModeSpace, displacement_operator, phase_basis

DEFAULT_ANGLE = math.pi / 2
DEFAULT_GRID = (-12.0, 12.0, 1201)
EDGE_MASS_TOL = 1e-4


class GridError(ValueError):
    """Quadrature grid does not contain the distribution."""


@dataclass(frozen=True)
class PhaseDistribution:
    probabilities: np.ndarray

    @property
    def thetas(self) -> np.ndarray:
        d = len(self.probabilities)
        return 2 * math.pi * np.arange(d) / d


@dataclass(frozen=True)
class QuadratureDistribution:
    angle: float
    grid: np.ndarray
    density: np.ndarray
    mean: float
    variance: float

    def grid_moments(self) -> tuple[float, float]:
        """Mean and variance from trapezoidal integration over the grid."""
        norm = trapezoid(self.density, self.grid)
        m1 = trapezoid(self.grid * self.density, self.grid) / norm
        m2 = trapezoid(self.grid**2 * self.density, self.grid) / norm
        return m1, m2 - m1**2


def reduce_field(rho_joint: np.ndarray) -> np.ndarray:
    """Partial trace over the coin (field-major ordering)."""
    n = rho_joint.shape[0] // 2
    return np.einsum("iaja->ij", rho_joint.reshape(n, 2, n, 2))


def reduce_coin(rho_joint: np.ndarray) -> np.ndarray:
    n = rho_joint.shape[0] // 2
    return np.einsum("iaib->ab", rho_joint.reshape(n, 2, n, 2))


def phase_distribution(rho_field: np.ndarray, space: ModeSpace) -> PhaseDistribution:
    B = phase_basis(space)
    p = np.einsum("jk,jl,lk->k", B.conj(), rho_field, B).real
    return PhaseDistribution(np.clip(p, 0.0, None))


def hermite_functions(grid, d: int) -> np.ndarray:
    """Oscillator eigenfunctions ``phi_0 .. phi_{d-1}`` sampled on ``grid``.

    Returns shape ``(d, len(grid))``. Uses the normalized three-term
    recurrence, which avoids the factorials of the closed form.
    """
    if d > 64:
        raise ValueError(f"at most 64 functions supported, got {d}")
    x = np.asarray(grid, dtype=float)
    out = np.zeros((d, x.size))
    out[0] = math.pi**-0.25 * np.exp(-(x**2) / 2)
    if d > 1:
        out[1] = math.sqrt(2) * x * out[0]
    for n in range(1, d - 1):
        out[n + 1] = x * math.sqrt(2 / (n + 1)) * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def default_grid(space: ModeSpace, points: int | None = None) -> np.ndarray:
    """[-12, 12] with 1201 points, widened when the top Fock level needs it."""
    lo, hi, n = DEFAULT_GRID
    half = max(hi, math.sqrt(2 * (space.d - 1) + 1) + 5)
    if points is None:
        points = n if half == hi else int(round(2 * half / ((hi - lo) / (n - 1)))) + 1
    return np.linspace(-half, half, points)


def rotate_quadrature(rho_field: np.ndarray, angle: float, space: ModeSpace) -> np.ndarray:
    """``e^{-i angle N} rho e^{i angle N}``: x of the result is x_angle of rho."""
    ph = np.exp(-1j * angle * space.levels)
    return ph[:, None] * rho_field * ph.conj()[None, :]


def quadrature_moments(rho_field: np.ndarray, angle: float, space: ModeSpace) -> tuple[float, float]:
    """Mean and variance of the rotated quadrature from operator moments."""
    r = rotate_quadrature(rho_field, angle, space)
    m1 = np.trace(space.x_op @ r).real
    m2 = np.trace(space.x2_op @ r).real
    return m1, m2 - m1**2


def qpd(rho_field: np.ndarray, angle: float = DEFAULT_ANGLE, grid=None,
        space: ModeSpace | None = None) -> QuadratureDistribution:
    """Quadrature distribution of ``x cos(angle) + p sin(angle)``.

    The density is sampled on ``grid``; mean and variance are the exact
    operator moments. Raises :class:`GridError` if more than 1e-4 of the
    probability falls outside the grid.
    """
    if space is None:
        space = ModeSpace(rho_field.shape[0])
    grid = default_grid(space) if grid is None else np.asarray(grid, dtype=float)
    r = rotate_quadrature(rho_field, angle, space)
    phi = hermite_functions(grid, space.d)
    density = np.einsum("mx,mn,nx->x", phi, r, phi).real
    outside = 1.0 - trapezoid(density, grid) / np.trace(r).real
    if outside > EDGE_MASS_TOL:
        raise GridError(
            f"{outside:.2e} of the quadrature probability lies outside "
            f"[{grid[0]:g}, {grid[-1]:g}]; widen the grid"
        )
    mean, var = quadrature_moments(rho_field, angle, space)
    return QuadratureDistribution(angle, grid, density, mean, var)


def homodyne_injection_readout(rho_field: np.ndarray, alpha: float, phis,
                               space: ModeSpace | None = None) -> np.ndarray:
    """Mean photon number after injecting a local oscillator ``alpha e^{i phi}``."""
    if space is None:
        space = ModeSpace(rho_field.shape[0])
    out = []
    for phi in phis:
        D = displacement_operator(space, alpha * np.exp(1j * phi), check_state=rho_field)
        out.append(np.trace(space.number_op @ D @ rho_field @ D.conj().T).real)
    return np.array(out)


def variance_curve(states, angle: float = DEFAULT_ANGLE,
                   space: ModeSpace | None = None) -> list[tuple[int, float]]:
    if len(states) == 0:
        raise ValueError("need at least one state")
    if space is None:
        space = ModeSpace(states[0].shape[0])
    return [(m, quadrature_moments(rho, angle, space)[1]) for m, rho in enumerate(states)]


def rw_variance_stderr(initial_amplitudes: np.ndarray, displacements: np.ndarray,
                       angle: float, space: ModeSpace) -> np.ndarray:
    """Delta-method standard error of the Monte Carlo quadrature variance per step.

    ``displacements`` is the ``(n_traj, steps + 1)`` array of net lattice
    shifts; each trajectory's state is the initial state rotated by its shift.
    """
    theta = 2 * math.pi / space.d
    n_traj = displacements.shape[0]
    ks = np.unique(displacements)
    mom = {}
    for k in ks:
        v = np.exp(1j * k * theta * space.levels) * initial_amplitudes
        r = rotate_quadrature(np.outer(v, v.conj()), angle, space)
        mom[k] = (np.trace(space.x_op @ r).real, np.trace(space.x2_op @ r).real)
    out = []
    for col in displacements.T:
        m1 = np.array([mom[k][0] for k in col])
        m2 = np.array([mom[k][1] for k in col])
        mu = m1.mean()
        grad_terms = m2 - 2 * mu * m1
        out.append(grad_terms.std(ddof=1) / math.sqrt(n_traj) if n_traj > 1 else math.inf)
    return np.array(out)
