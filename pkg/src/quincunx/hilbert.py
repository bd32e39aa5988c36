"""Truncated harmonic-oscillator space, its states and operators.

Fock levels ``0 .. d-1`` span the walker space. Phase states form an
orthonormal basis of that space; coherent states are projected onto it and
renormalized, keeping the discarded weight in ``norm_deficit``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln

MAX_DIM = 64

# Global bound on the mean photon number of the lattice states.
N_BAR_LIMIT = 28.0


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class TruncationWarning(UserWarning):
    """A displaced state leaks weight out of the truncated space."""


@dataclass(frozen=True)
class ModeSpace:
    """Oscillator space truncated to ``d`` Fock levels.

    Operators are dense matrices built lazily and cached; treat them as
    read-only.
    """

    d: int

    def __post_init__(self):
        if not isinstance(self.d, (int, np.integer)) or self.d < 1:
            raise DomainError(f"dimension must be a positive integer, got {self.d!r}")
        if self.d > MAX_DIM:
            raise DomainError(f"dimension {self.d} exceeds the hard cap {MAX_DIM}")

    @cached_property
    def levels(self) -> np.ndarray:
        return np.arange(self.d)

    @cached_property
    def number_op(self) -> np.ndarray:
        return np.diag(self.levels.astype(float))

    @cached_property
    def annihilation_op(self) -> np.ndarray:
        return np.diag(np.sqrt(np.arange(1, self.d, dtype=float)), 1).astype(complex)

    @cached_property
    def x_op(self) -> np.ndarray:
        a = self.annihilation_op
        return (a + a.conj().T) / math.sqrt(2)

    @cached_property
    def p_op(self) -> np.ndarray:
        a = self.annihilation_op
        return (a - a.conj().T) / (math.sqrt(2) * 1j)

    @cached_property
    def x2_op(self) -> np.ndarray:
        """Projection of x^2 onto the space (not the square of ``x_op``).

        Differs from ``x_op @ x_op`` on the top level, where the truncated
        product drops the ``a a^dag`` contribution of level ``d``. This is the
        operator whose expectation matches the position-space density.
        """
        a = self.annihilation_op
        a2 = a @ a
        return (a2 + a2.conj().T + 2 * self.number_op + np.eye(self.d)) / 2

    def identity(self) -> np.ndarray:
        return np.eye(self.d, dtype=complex)


@dataclass(frozen=True)
class PureFieldState:
    amplitudes: np.ndarray
    norm_deficit: float = 0.0

    @property
    def d(self) -> int:
        return len(self.amplitudes)

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


@dataclass(frozen=True)
class LatticeParams:
    """Coherent amplitude and lattice size; derived quantities are exact."""

    alpha: float
    d: int
    n_bar: float = field(init=False)
    theta_step: float = field(init=False)

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if self.d < 1:
            raise DomainError(f"d must be positive, got {self.d}")
        object.__setattr__(self, "n_bar", float(self.alpha) ** 2)
        object.__setattr__(self, "theta_step", 2 * math.pi / self.d)


@dataclass(frozen=True)
class LatticeCheck:
    name: str
    lhs: float
    relation: str
    rhs: float
    passed: bool

    def __str__(self):
        status = "pass" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.lhs:.6g} {self.relation} {self.rhs:.6g}"


@dataclass(frozen=True)
class LatticeReport:
    params: LatticeParams
    checks: tuple[LatticeCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[LatticeCheck]:
        return [c for c in self.checks if not c.passed]

    def __str__(self):
        head = f"lattice alpha={self.params.alpha:g} d={self.params.d} n_bar={self.params.n_bar:g}"
        verdict = "valid" if self.passed else "invalid"
        return "\n".join([f"{head}: {verdict}", *(f"  {c}" for c in self.checks)])


def fock_state(space: ModeSpace, n: int) -> PureFieldState:
    if not 0 <= n < space.d:
        raise DomainError(f"Fock level {n} outside 0..{space.d - 1}")
    amps = np.zeros(space.d, dtype=complex)
    amps[n] = 1.0
    return PureFieldState(amps)


def phase_state(space: ModeSpace, k: int) -> PureFieldState:
    """Phase state at angle ``2 pi k / d``."""
    if not 0 <= k < space.d:
        raise DomainError(f"phase index {k} outside 0..{space.d - 1}")
    theta = 2 * math.pi * k / space.d
    amps = np.exp(1j * theta * space.levels) / math.sqrt(space.d)
    return PureFieldState(amps)


def phase_basis(space: ModeSpace) -> np.ndarray:
    """Matrix whose column ``k`` is the phase state ``k``."""
    thetas = 2 * math.pi * np.arange(space.d) / space.d
    return np.exp(1j * np.outer(space.levels, thetas)) / math.sqrt(space.d)


def poisson_log_weights(alpha: float, d: int) -> np.ndarray:
    """log of e^{-alpha^2} alpha^{2j} / j! for j < d."""
    j = np.arange(d)
    if alpha == 0:
        out = np.full(d, -np.inf)
        out[0] = 0.0
        return out
    return -alpha**2 + 2 * j * math.log(alpha) - gammaln(j + 1)


def coherent_state_truncated(space: ModeSpace, alpha: float) -> PureFieldState:
    """Coherent state projected onto the space, renormalized to unit norm."""
    if alpha < 0:
        raise DomainError(f"alpha must be nonnegative, got {alpha}")
    logw = poisson_log_weights(alpha, space.d)
    kept = float(np.exp(logw).sum())
    amps = np.exp(0.5 * logw)
    amps = amps / np.linalg.norm(amps)
    return PureFieldState(amps.astype(complex), norm_deficit=max(0.0, 1.0 - kept))


def rotation_operator(space: ModeSpace, angle: float) -> np.ndarray:
    """exp(i angle N)."""
    return np.diag(np.exp(1j * angle * space.levels))


def displacement_operator(space: ModeSpace, beta: complex, check_state=None) -> np.ndarray:
    """exp(beta a^dag - beta* a) on the truncated space.

    The truncated generator is anti-Hermitian, so the result is unitary. It
    only approximates the true displacement when the displaced support fits
    in ``d`` levels; pass ``check_state`` (vector or density matrix) to get a
    :class:`TruncationWarning` when it does not.
    """
    a = space.annihilation_op
    D = expm(beta * a.conj().T - np.conj(beta) * a)
    err = np.abs(D.conj().T @ D - np.eye(space.d)).max()
    if err > 1e-10:
        raise ArithmeticError(f"displacement operator not unitary (error {err:.2e})")
    if check_state is not None:
        leak = truncation_leakage(space, beta, check_state)
        if leak > 1e-6:
            warnings.warn(
                f"displacement by {beta:.4g} leaks {leak:.3e} of the weight past "
                f"Fock level {space.d - 1}",
                TruncationWarning,
                stacklevel=2,
            )
    return D


def truncation_leakage(space: ModeSpace, beta: complex, state) -> float:
    """Weight that a true displacement moves above the top Fock level.

    The displacement is evaluated in an enlarged space so that the part
    leaving ``H_d`` is resolved rather than folded back.
    """
    state = np.asarray(state)
    big = space.d + int(math.ceil(4 * abs(beta) ** 2 + 12 * abs(beta))) + 20
    a = np.diag(np.sqrt(np.arange(1, big, dtype=float)), 1)
    D = expm(beta * a.T - np.conj(beta) * a)[:, : space.d]
    if state.ndim == 1:
        kept = np.linalg.norm((D @ state)[: space.d]) ** 2 / np.vdot(state, state).real
    else:
        out = D @ state @ D.conj().T
        kept = np.trace(out[: space.d, : space.d]).real / np.trace(state).real
    return float(max(0.0, 1.0 - kept))


def validate_lattice(params: LatticeParams) -> LatticeReport:
    n_bar, d = params.n_bar, params.d
    root = math.sqrt(n_bar)
    checks = (
        LatticeCheck("support", d, ">", n_bar + root, d > n_bar + root),
        LatticeCheck("distinguishability", d, "<", 2 * math.pi * root, d < 2 * math.pi * root),
        LatticeCheck("n_bar bound", n_bar, "<", N_BAR_LIMIT, n_bar < N_BAR_LIMIT),
    )
    return LatticeReport(params, checks)


def overlap_profile(space: ModeSpace, alpha: float) -> np.ndarray:
    """Overlaps of the truncated coherent state with every phase state."""
    psi = coherent_state_truncated(space, alpha).amplitudes
    return phase_basis(space).conj().T @ psi
