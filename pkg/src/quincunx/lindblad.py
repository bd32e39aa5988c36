"""Open-system walk: conditional-rotation dynamics with cavity loss.

Between instantaneous Hadamard kicks the joint state obeys

    drho/dt = -i [H, rho] + (g/2) (2 A rho A^dag - A^dag A rho - rho A^dag A)

with ``H = -chi N (x) sigma_z`` and ``A = a (x) 1``. The sign of ``H`` makes a
lossless segment of length ``tau`` (``chi tau = 2 pi / d``) equal to the
conditional rotation ``F``, which turns the field by ``+2 pi / d`` on coin ``+``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .hilbert import DomainError, ModeSpace, PureFieldState
from .walk import SIGMA_Z, WalkConfig, coin_state, hadamard

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-8
POSITIVITY_TOL = 1e-8
# evolve_segment aborts past these.
INSTABILITY_TRACE_TOL = 1e-6
INSTABILITY_EIG_TOL = 1e-6


class NumericalInstabilityError(ArithmeticError):
    """Integration left the set of density matrices."""

    def __init__(self, message, step=None):
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class LindbladParams:
    chi: float
    tau: float
    g: float
    substeps: int = 100

    def __post_init__(self):
        if self.g < 0:
            raise DomainError(f"loss rate must be nonnegative, got {self.g}")
        if self.substeps < 1:
            raise DomainError(f"substeps must be at least 1, got {self.substeps}")
        if self.tau <= 0:
            raise DomainError(f"segment duration must be positive, got {self.tau}")

    @classmethod
    def for_space(cls, space: ModeSpace, g: float, substeps: int = 100, tau: float = 1.0):
        """Parameters with ``chi tau = 2 pi / d``."""
        return cls(chi=2 * math.pi / (space.d * tau), tau=tau, g=g, substeps=substeps)

    def check_step_angle(self, space: ModeSpace):
        expected = 2 * math.pi / space.d
        if not math.isclose(self.chi * self.tau, expected, rel_tol=1e-12):
            raise DomainError(
                f"chi*tau = {self.chi * self.tau:.15g} but the lattice step is {expected:.15g}"
            )


def check_density_matrix(rho: np.ndarray, *, hermitian_tol=HERMITIAN_TOL,
                         trace_tol=TRACE_TOL, positivity_tol=POSITIVITY_TOL) -> None:
    """Raise ``ValueError`` unless ``rho`` is Hermitian, unit-trace and PSD."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    herm = np.abs(rho - rho.conj().T).max()
    if herm > hermitian_tol:
        raise ValueError(f"density matrix not Hermitian (deviation {herm:.2e})")
    tr = np.trace(rho).real
    if abs(tr - 1) > trace_tol:
        raise ValueError(f"density matrix trace {tr:.12g} != 1")
    lam = np.linalg.eigvalsh(rho).min()
    if lam < -positivity_tol:
        raise ValueError(f"density matrix has eigenvalue {lam:.2e}")


@lru_cache(maxsize=16)
def _joint_ops(d: int):
    levels = np.arange(d, dtype=float)
    h = -np.kron(levels, np.diag(SIGMA_Z))
    # A = a (x) 1 shifts the flat joint index by two; A^dag A is diagonal.
    shift = np.repeat(np.sqrt(levels[1:]), 2)
    occ = np.repeat(levels, 2)
    return h, shift, occ[:, None] + occ[None, :]


def _hamiltonian_diag(params: LindbladParams, space: ModeSpace) -> np.ndarray:
    return params.chi * _joint_ops(space.d)[0]


def _dissipator(rho, g, space):
    out = np.zeros_like(rho)
    if g == 0:
        return out
    _, shift, occ_sum = _joint_ops(space.d)
    out[:-2, :-2] = 2 * shift[:, None] * rho[2:, 2:] * shift[None, :]
    out -= occ_sum * rho
    return (g / 2) * out


def lindblad_rhs(rho: np.ndarray, params: LindbladParams, space: ModeSpace) -> np.ndarray:
    h = _hamiltonian_diag(params, space)
    comm = (h[:, None] - h[None, :]) * rho
    return -1j * comm + _dissipator(rho, params.g, space)


def evolve_segment(rho: np.ndarray, params: LindbladParams, space: ModeSpace,
                   step: int | None = None) -> np.ndarray:
    """Evolve for one segment of length ``tau`` with ``params.substeps`` RK4 steps.

    Uses the integrating-factor (Lawson) form of classical RK4: the diagonal
    Hamiltonian part is applied exactly as elementwise phases and RK4 handles
    the dissipator in that rotating frame. At ``g = 0`` the result is exact.
    """
    h = _hamiltonian_diag(params, space)
    dt = params.tau / params.substeps
    w = h[:, None] - h[None, :]
    full = np.exp(-1j * w * dt)
    half = np.exp(-1j * w * dt / 2)
    g = params.g
    rho = np.array(rho, dtype=complex)
    for _ in range(params.substeps):
        if g == 0:
            rho = full * rho
            continue
        k1 = _dissipator(rho, g, space)
        mid = half * rho
        k2 = _dissipator(mid + (dt / 2) * half * k1, g, space)
        k3 = _dissipator(mid + (dt / 2) * k2, g, space)
        k4 = _dissipator(full * rho + dt * half * k3, g, space)
        rho = full * rho + (dt / 6) * (full * k1 + 2 * half * (k2 + k3) + k4)
    rho = (rho + rho.conj().T) / 2

    drift = abs(np.trace(rho).real - 1)
    lam = np.linalg.eigvalsh(rho).min()
    if drift > INSTABILITY_TRACE_TOL or lam < -INSTABILITY_EIG_TOL or not np.isfinite(lam):
        raise NumericalInstabilityError(
            f"trace drift {drift:.2e}, min eigenvalue {lam:.2e} after {params.substeps} "
            "substeps; increase substeps",
            step=step,
        )
    return rho


def hadamard_kick(rho: np.ndarray) -> np.ndarray:
    """Apply the coin Hadamard to a joint density matrix."""
    n = rho.shape[0] // 2
    H = hadamard()
    r = rho.reshape(n, 2, n, 2)
    r = np.einsum("ab,ibjc,dc->iajd", H, r, H, optimize=True)
    return r.reshape(2 * n, 2 * n)


def run_open_walk(config: WalkConfig, initial_field: PureFieldState,
                  params: LindbladParams | None = None) -> list[np.ndarray]:
    """Lossy walk; returns the joint density matrix at steps ``0..n``."""
    space = config.space
    if params is None:
        params = LindbladParams.for_space(space, config.loss_g, config.substeps)
    params.check_step_angle(space)
    psi = np.kron(initial_field.amplitudes, coin_state(config.coin_init))
    rho = np.outer(psi, psi.conj())
    states = [rho]
    for m in range(1, config.steps + 1):
        rho = evolve_segment(hadamard_kick(rho), params, space, step=m)
        states.append(rho)
    return states
