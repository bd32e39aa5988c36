"""Coined quantum walk on the phase-state circle and its classical baseline.

Joint states live on field (x) coin with the field index major:
flat index ``2 * n + c`` for Fock level ``n`` and coin ``c`` (0 is ``+``,
1 is ``-``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hilbert import DomainError, LatticeParams, ModeSpace, PureFieldState, rotation_operator

COIN_LABELS = ("+", "-")
SIGMA_Z = np.diag([1.0, -1.0])
DEFAULT_N_TRAJ = 10_000


class MisuseError(RuntimeError):
    """An operation was called with a config it does not handle."""


@dataclass(frozen=True)
class WalkConfig:
    lattice: LatticeParams
    steps: int
    loss_g: float = 0.0
    substeps: int = 100
    seed: int = 0
    coin_init: str = "+"

    def __post_init__(self):
        if self.steps < 0:
            raise DomainError(f"steps must be nonnegative, got {self.steps}")
        if self.substeps < 1:
            raise DomainError(f"substeps must be at least 1, got {self.substeps}")
        if self.loss_g < 0:
            raise DomainError(f"loss rate must be nonnegative, got {self.loss_g}")
        if self.seed < 0:
            raise DomainError(f"seed must be unsigned, got {self.seed}")
        if self.coin_init not in COIN_LABELS:
            raise DomainError(f"coin_init must be one of {COIN_LABELS}, got {self.coin_init!r}")

    @property
    def space(self) -> ModeSpace:
        return ModeSpace(self.lattice.d)


def coin_state(label: str) -> np.ndarray:
    if label not in COIN_LABELS:
        raise DomainError(f"unknown coin label {label!r}")
    return np.eye(2, dtype=complex)[COIN_LABELS.index(label)]


def hadamard() -> np.ndarray:
    return np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2)


def joint_state(field: PureFieldState, coin: str = "+") -> np.ndarray:
    return np.kron(field.amplitudes, coin_state(coin))


def conditional_rotation(space: ModeSpace) -> np.ndarray:
    """exp((2 pi i / d) N (x) sigma_z): rotates the field by +/- 2 pi / d."""
    theta = 2 * math.pi / space.d
    return np.diag(np.exp(1j * theta * np.kron(space.levels, np.diag(SIGMA_Z))))


def step_unitary(space: ModeSpace) -> np.ndarray:
    """One walk step: coin flip, then conditional rotation."""
    return conditional_rotation(space) @ np.kron(np.eye(space.d), hadamard())


def run_ideal_walk(config: WalkConfig, initial_field: PureFieldState) -> list[np.ndarray]:
    """Lossless walk; returns the joint state vector at steps ``0..n``."""
    if config.loss_g != 0:
        raise MisuseError("run_ideal_walk is lossless; use lindblad.run_open_walk for g > 0")
    space = config.space
    if initial_field.d != space.d:
        raise DomainError(f"initial field has dimension {initial_field.d}, expected {space.d}")
    # F is diagonal, so U psi = f * (H-mixed psi) without forming U.
    f = np.diag(conditional_rotation(space))
    H = hadamard()
    psi = joint_state(initial_field, config.coin_init)
    states = [psi]
    for _ in range(config.steps):
        psi = f * (psi.reshape(space.d, 2) @ H.T).ravel()
        states.append(psi)
    return states


@dataclass(frozen=True)
class RandomCoinChannel:
    """Field channel of one step driven by a fresh, randomly prepared coin.

    A coin drawn uniformly from ``|+>``/``|->``, Hadamard-rotated, coupled
    through the conditional rotation and then discarded leaves the field in
    ``(R+ rho R+^dag + R- rho R-^dag) / 2``.
    """

    kraus: tuple[np.ndarray, np.ndarray]

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return sum(K @ rho @ K.conj().T for K in self.kraus)

    def power(self, rho: np.ndarray, n: int) -> np.ndarray:
        for _ in range(n):
            rho = self(rho)
        return rho


def rw_step_channel(space: ModeSpace) -> RandomCoinChannel:
    theta = 2 * math.pi / space.d
    s = 1 / math.sqrt(2)
    return RandomCoinChannel(
        (s * rotation_operator(space, theta), s * rotation_operator(space, -theta))
    )


def sample_rw_displacements(steps: int, n_traj: int, seed: int) -> np.ndarray:
    """Net lattice displacement of each trajectory after each step.

    Trajectory ``i`` draws its signs from a generator seeded by
    ``(seed, i)``, so results do not depend on how trajectories are batched.
    Returns an ``(n_traj, steps + 1)`` integer array; column 0 is zero.
    """
    if n_traj < 1:
        raise DomainError(f"need at least one trajectory, got {n_traj}")
    out = np.zeros((n_traj, steps + 1), dtype=np.int64)
    if steps == 0:
        return out
    for i in range(n_traj):
        rng = np.random.default_rng([seed, i])
        signs = 2 * rng.integers(0, 2, size=steps) - 1
        out[i, 1:] = np.cumsum(signs)
    return out


def run_classical_walk(
    config: WalkConfig,
    initial_field: PureFieldState,
    mode: str = "ensemble",
    n_traj: int = DEFAULT_N_TRAJ,
) -> list[np.ndarray]:
    """Random-walk baseline; returns the field density matrix at steps ``0..n``.

    ``ensemble`` applies :func:`rw_step_channel` exactly. ``monte_carlo``
    draws a fresh +/- rotation per step for each of ``n_traj`` trajectories
    and averages the resulting pure states.
    """
    space = config.space
    rho0 = initial_field.projector()
    if mode == "ensemble":
        channel = rw_step_channel(space)
        states = [rho0]
        for _ in range(config.steps):
            states.append(channel(states[-1]))
        return states
    if mode != "monte_carlo":
        raise DomainError(f"unknown random-walk mode {mode!r}")

    disp = sample_rw_displacements(config.steps, n_traj, config.seed)
    theta = 2 * math.pi / space.d
    psi = initial_field.amplitudes
    states = []
    # Every trajectory at step m sits at R^k psi for its net displacement k,
    # so averaging over trajectories reduces to a histogram over k.
    for m in range(config.steps + 1):
        ks, counts = np.unique(disp[:, m], return_counts=True)
        rho = np.zeros((space.d, space.d), dtype=complex)
        for k, c in zip(ks, counts):
            v = np.exp(1j * k * theta * space.levels) * psi
            rho += c * np.outer(v, v.conj())
        states.append(rho / n_traj)
    return states
