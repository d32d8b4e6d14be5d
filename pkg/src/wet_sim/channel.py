"""Rician channel generation, harvested-energy accounting, and the
optimal single-beam transmit covariance."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hermitian import herm_eig, hermitize

LOS_AMPLITUDE = 1e-2


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def default_user_angles(k_users: int) -> tuple[float, ...]:
    """Evenly fanned user directions: -75, -45, ... degrees."""
    return tuple(-75.0 + 30.0 * k for k in range(k_users))


@dataclass(frozen=True)
class RicianConfig:
    """Scenario parameters for one broadcast cell."""

    m_t: int = 4
    m_r: int = 2
    k_users: int = 1
    rician_factor_db: float = 5.0
    pathloss_db: float = 40.0
    antenna_spacing_over_wavelength: float = 0.5
    user_angles_deg: tuple[float, ...] = ()
    efficiency: float = 0.5
    power_watts: float = 1.0

    def __post_init__(self):
        if self.m_t <= 1:
            raise ValueError("m_t must exceed 1")
        if self.m_r < 1:
            raise ValueError("m_r must be at least 1")
        if self.k_users < 1:
            raise ValueError("k_users must be at least 1")
        if not self.user_angles_deg:
            object.__setattr__(
                self, "user_angles_deg", default_user_angles(self.k_users)
            )
        if len(self.user_angles_deg) != self.k_users:
            raise ValueError(
                f"{len(self.user_angles_deg)} angles given for {self.k_users} users"
            )
        if not 0.0 < self.efficiency <= 1.0:
            raise ValueError("efficiency must lie in (0, 1]")
        if self.power_watts <= 0.0:
            raise ValueError("power_watts must be positive")


@dataclass
class ChannelRealization:
    """True channels for one Monte Carlo draw.

    ``raw[k]`` is the m_r x m_t channel H'_k, ``gram[k] = H'^H H'``,
    ``gains[k]`` its Frobenius norm, and ``normalized[k]`` the
    unit-Frobenius-norm gram matrix the learner targets.
    """

    raw: list[np.ndarray]
    gram: list[np.ndarray]
    gains: np.ndarray
    normalized: list[np.ndarray]

    @property
    def k_users(self) -> int:
        return len(self.raw)


def los_row(angle_deg: float, m_t: int, spacing_ratio: float) -> np.ndarray:
    """Uniform-linear-array steering row with per-element amplitude 1e-2."""
    if m_t < 1:
        raise ValueError("m_t must be at least 1")
    theta = -2.0 * np.pi * spacing_ratio * np.sin(np.deg2rad(angle_deg))
    return LOS_AMPLITUDE * np.exp(1j * theta * np.arange(m_t))


def los_matrix(angle_deg: float, m_t: int, m_r: int, spacing_ratio: float) -> np.ndarray:
    """Deterministic line-of-sight component; every row is the same steering row."""
    return np.tile(los_row(angle_deg, m_t, spacing_ratio), (m_r, 1))


def gen_channel(cfg: RicianConfig, rng: np.random.Generator) -> ChannelRealization:
    """Draw one Rician realization for every user.

    Scattered entries are circularly symmetric complex Gaussian with total
    variance 10^(-pathloss_db/10), matching the line-of-sight power level.
    """
    kr = db_to_linear(cfg.rician_factor_db)
    nlos_var = db_to_linear(-cfg.pathloss_db)
    sd = np.sqrt(nlos_var / 2.0)
    raw, gram, normalized = [], [], []
    gains = np.zeros(cfg.k_users)
    for k in range(cfg.k_users):
        h_los = los_matrix(
            cfg.user_angles_deg[k], cfg.m_t, cfg.m_r,
            cfg.antenna_spacing_over_wavelength,
        )
        h_nlos = sd * (
            rng.standard_normal((cfg.m_r, cfg.m_t))
            + 1j * rng.standard_normal((cfg.m_r, cfg.m_t))
        )
        h = np.sqrt(kr / (1 + kr)) * h_los + np.sqrt(1 / (1 + kr)) * h_nlos
        g_raw = hermitize(h.conj().T @ h)
        gamma = float(np.linalg.norm(g_raw))
        raw.append(h)
        gram.append(g_raw)
        gains[k] = gamma
        normalized.append(g_raw / gamma)
    return ChannelRealization(raw=raw, gram=gram, gains=gains, normalized=normalized)


def harvested_energy(g: np.ndarray, gamma: float, s: np.ndarray,
                     duration: float, efficiency: float) -> float:
    """Energy collected over ``duration`` under transmit covariance ``s``."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    min_eig = float(np.linalg.eigvalsh(hermitize(s)).min())
    if min_eig < -1e-9 * max(1.0, float(np.linalg.norm(s))):
        raise ValueError(f"transmit covariance is not PSD (min eigenvalue {min_eig:.3e})")
    return efficiency * duration * gamma * float(np.trace(g @ s).real)


def energy_weights(gammas) -> np.ndarray:
    """Fairness weights proportional to each user's inverse power gain."""
    gammas = np.asarray(gammas, dtype=float)
    if np.any(gammas <= 0):
        raise ValueError("channel power gains must be positive")
    inv = 1.0 / gammas
    return inv / inv.sum()


def composite_channel(realization: ChannelRealization) -> tuple[np.ndarray, float]:
    """Sum of normalized channels and the matching composite gain."""
    g = np.sum(realization.normalized, axis=0)
    gamma = 1.0 / np.sum(1.0 / realization.gains)
    return hermitize(g), float(gamma)


def oeb(g: np.ndarray, power: float) -> tuple[np.ndarray, float]:
    """Best rank-one transmit covariance for a PSD target matrix.

    Returns (S*, q_rate) where S* = power * v v^H along the dominant
    eigenvector and q_rate = power * lambda_max is the per-unit-time,
    unit-gain energy rate it achieves.
    """
    if power <= 0:
        raise ValueError("power must be positive")
    w, v = herm_eig(g)
    beam = v[:, 0]
    s_star = power * np.outer(beam, beam.conj())
    return hermitize(s_star), power * float(w[0])
