"""Channel learning from one-bit feedback by analytic-center cutting planes.

The transmitter keeps one working set per receiver. Every feedback interval
it probes with a covariance whose increment is trace-orthogonal to the
current analytic centers of the receivers being served, so each returned
bit yields a neutral cut. Centers are recomputed after every cut and the
final normalized center is the channel estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil

import numpy as np

from .barrier import (
    BarrierProblem,
    CutRecord,
    NewtonSettings,
    analytic_center,
    strictly_feasible_start,
)
from .hermitian import cmat, cvec, hermitize, orthonormal_complement_basis


class CapacityError(ValueError):
    """More receivers in a subset than independent neutrality constraints allow."""


class ResamplingError(RuntimeError):
    """No feasible probing matrix found within the trial budget."""


class ScheduleError(ValueError):
    """Learning horizon cannot accommodate the required interval partition."""


NEUTRALITY_TOL = 1e-8
PSD_ACCEPT_TOL = 1e-12
MAX_PROBE_TRIALS = 50
MAX_NORM_HALVINGS = 6


def feedback_bit(q_now: float, q_prev: float) -> int:
    """-1 when energy did not drop (ties included), +1 when it dropped."""
    return -1 if q_now >= q_prev else 1


def init_covariance(m_t: int, power: float) -> np.ndarray:
    """Isotropic full-power start (P/M_T) I."""
    if m_t < 2:
        raise ValueError("m_t must be at least 2")
    if power <= 0:
        raise ValueError("power must be positive")
    return (power / m_t) * np.eye(m_t)


@dataclass(frozen=True)
class GroupPlan:
    """Partition of receivers and of the learning horizon into subsets."""

    num_subsets: int
    user_subsets: tuple[tuple[int, ...], ...]
    interval_subsets: tuple[range, ...]

    def subset_of_interval(self, n: int) -> int:
        for a, block in enumerate(self.interval_subsets):
            if n in block:
                return a
        raise ValueError(f"interval {n} outside the learning horizon")

    def users_active_at(self, n: int) -> tuple[int, ...]:
        return self.user_subsets[self.subset_of_interval(n)]


def plan_groups(k_users: int, m_t: int, n_l: int) -> GroupPlan:
    """Group receivers into subsets of at most m_t^2 - 1 and split the horizon.

    Receivers are chunked in index order; the horizon is chunked into equal
    blocks with the last block absorbing the remainder.
    """
    if k_users < 1 or m_t < 2:
        raise ValueError("need k_users >= 1 and m_t >= 2")
    cap = m_t * m_t - 1
    a = ceil(k_users / cap)
    if n_l < a:
        raise ScheduleError(f"{n_l} intervals cannot serve {a} subsets")
    user_chunk = ceil(k_users / a)
    users = tuple(
        tuple(range(i, min(i + user_chunk, k_users)))
        for i in range(0, k_users, user_chunk)
    )
    interval_chunk = ceil(n_l / a)
    blocks = []
    for sub in range(a):
        start = sub * interval_chunk + 1
        stop = n_l + 1 if sub == a - 1 else (sub + 1) * interval_chunk + 1
        blocks.append(range(start, stop))
    if any(len(b) == 0 for b in blocks) or len(users) != a:
        raise ScheduleError(
            f"cannot partition {n_l} intervals into {a} non-empty blocks"
        )
    return GroupPlan(num_subsets=a, user_subsets=users,
                     interval_subsets=tuple(blocks))


def _orthonormalized_directions(centers: list[np.ndarray]) -> np.ndarray:
    """Unit cvec images of the centers, orthonormalized and rank-reduced."""
    cols = []
    for c in centers:
        v = cvec(c)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise ValueError("probing requires nonzero centers")
        cols.append(v / norm)
    basis: list[np.ndarray] = []
    for v in cols:
        for b in basis:
            v = v - (b @ v) * b
        norm = np.linalg.norm(v)
        if norm > 1e-10:
            basis.append(v / norm)
    return np.column_stack(basis)


def probing_matrix_multi(
    centers: list[np.ndarray],
    power: float,
    rng: np.random.Generator,
    p_norm: float | None = None,
) -> np.ndarray:
    """Hermitian probe trace-orthogonal to every center in the subset."""
    if not centers:
        raise ValueError("need at least one center")
    m = centers[0].shape[0]
    if len(centers) > m * m - 1:
        raise CapacityError(
            f"{len(centers)} receivers exceed the {m * m - 1} usable directions"
        )
    if p_norm is None:
        p_norm = power / 10.0
    u = _orthonormalized_directions(centers)
    v = orthonormal_complement_basis(u)
    p = rng.standard_normal(v.shape[1])
    norm = np.linalg.norm(p)
    if norm > 0 and p_norm > 0:
        p *= p_norm / norm
    else:
        p[:] = 0.0
    return cmat(v @ p)


def probing_matrix_single(
    center: np.ndarray,
    power: float,
    rng: np.random.Generator,
    p_norm: float | None = None,
) -> np.ndarray:
    """Single-receiver specialization of :func:`probing_matrix_multi`."""
    return probing_matrix_multi([center], power, rng, p_norm)


def advance_covariance(
    s_prev: np.ndarray,
    centers: list[np.ndarray],
    power: float,
    rng: np.random.Generator,
    p_norm: float | None = None,
    max_trials: int = MAX_PROBE_TRIALS,
) -> tuple[np.ndarray, np.ndarray]:
    """Add a freshly drawn probe to the covariance, keeping it PSD within budget.

    A new random probe is drawn per trial; a candidate is accepted when the
    sum stays PSD with trace at most ``power``.
    """
    for _ in range(max_trials):
        b = probing_matrix_multi(centers, power, rng, p_norm)
        s_new = hermitize(s_prev + b)
        if np.trace(s_new).real > power + 1e-12:
            continue
        if np.linalg.eigvalsh(s_new).min() < -PSD_ACCEPT_TOL * max(1.0, power):
            continue
        return s_new, b
    raise ResamplingError(f"no feasible probe in {max_trials} trials")


def finalize_estimate(center: np.ndarray) -> np.ndarray:
    """Unit-Frobenius-norm channel estimate from an analytic center."""
    norm = float(np.linalg.norm(center))
    if norm == 0.0:
        raise RuntimeError("analytic center is zero; cannot normalize")
    return center / norm


@dataclass
class LearnerDiagnostics:
    dropped_cuts: int = 0
    probe_norm_halvings: int = 0
    min_dominant_eig: float = field(default=float("inf"))
    dominant_eig_flags: int = 0


class AccpmLearner:
    """Transmitter-side state machine for the cutting-plane protocol.

    Drive it one feedback interval at a time: read ``covariance``, transmit,
    collect the active receivers' bits, then call :meth:`observe`.
    """

    def __init__(
        self,
        m_t: int,
        k_users: int,
        power: float,
        n_learn: int,
        rng: np.random.Generator,
        settings: NewtonSettings = NewtonSettings(),
        p_norm: float | None = None,
    ):
        self.m_t = m_t
        self.k_users = k_users
        self.power = power
        self.n_learn = n_learn
        self.rng = rng
        self.settings = settings
        self.p_norm = power / 10.0 if p_norm is None else p_norm
        self.plan = plan_groups(k_users, m_t, n_learn)
        self.problems = [BarrierProblem(m_t) for _ in range(k_users)]
        self.centers = [0.5 * np.eye(m_t) for _ in range(k_users)]
        self.s = init_covariance(m_t, power)
        self.s_prev = np.zeros((m_t, m_t))
        self.n = 1
        self.diagnostics = LearnerDiagnostics()

    @property
    def covariance(self) -> np.ndarray:
        """Transmit covariance for the current interval."""
        return self.s

    def active_users(self, n: int | None = None) -> tuple[int, ...]:
        return self.plan.users_active_at(self.n if n is None else n)

    def record_cut_and_recenter(self, k: int, f: int) -> None:
        """Append the current interval's cut for receiver k and re-center."""
        if self.n < 2:
            return
        delta = hermitize(self.s - self.s_prev)
        resid = abs(np.trace(self.centers[k] @ delta).real)
        scale = max(np.linalg.norm(self.centers[k]) * np.linalg.norm(delta), 1e-300)
        if resid > NEUTRALITY_TOL * scale:
            self.diagnostics.dropped_cuts += 1
            return
        cut = CutRecord(delta_s=delta, sign=f, interval_index=self.n)
        problem = self.problems[k]
        problem.add_cut(cut)
        warm = strictly_feasible_start(problem, self.centers[k], cut, self.settings)
        center = analytic_center(problem, warm_start=warm, settings=self.settings)
        self.centers[k] = center
        top = float(np.linalg.eigvalsh(center).max())
        diags = self.diagnostics
        diags.min_dominant_eig = min(diags.min_dominant_eig, top)
        if top < 0.5 - 1e-6:
            diags.dominant_eig_flags += 1

    def observe(self, bits: dict[int, int]) -> None:
        """Consume the active receivers' bits for the current interval."""
        active = set(self.active_users())
        if set(bits) - active:
            raise ValueError(f"feedback from inactive receivers: {set(bits) - active}")
        if self.n >= 2:
            for k, f in bits.items():
                self.record_cut_and_recenter(k, f)
        if self.n < self.n_learn:
            nxt = self.plan.users_active_at(self.n + 1)
            centers = [self.centers[k] for k in nxt]
            s_new, _ = self._advance(centers)
            self.s_prev = self.s
            self.s = s_new
        self.n += 1

    def _advance(self, centers: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
        norm = self.p_norm
        for halving in range(MAX_NORM_HALVINGS + 1):
            try:
                return advance_covariance(
                    self.s, centers, self.power, self.rng, norm
                )
            except ResamplingError:
                self.diagnostics.probe_norm_halvings += 1
                norm *= 0.5
        raise ResamplingError(
            f"covariance update failed after {MAX_NORM_HALVINGS} probe-norm halvings"
        )

    def estimate(self, k: int) -> np.ndarray:
        return finalize_estimate(self.centers[k])

    def estimates(self) -> list[np.ndarray]:
        return [self.estimate(k) for k in range(self.k_users)]
