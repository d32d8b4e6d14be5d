"""Damped-Newton analytic centering for box-plus-halfspace working sets.

The working set for one receiver is {G : 0 < G < I} intersected with the
accumulated feedback cuts f * tr(G dS) <= 0. Its analytic center minimizes

    phi(G) = -2 log det G - 2 log det(I - G) - sum_i log(-f_i tr(G dS_i))

which is optimized here over the real coordinate vector g = cvec(G), where
every cut is linear and the box barrier has closed-form derivatives.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .hermitian import cmat, cvec, cvec_basis, hermitize


class ConvergenceError(RuntimeError):
    """Newton iteration budget exhausted before reaching the tolerance."""

    def __init__(self, message: str, grad_norm: float):
        super().__init__(message)
        self.grad_norm = grad_norm


class InfeasibleError(RuntimeError):
    """No strictly feasible point could be produced."""


class BoundaryError(ValueError):
    """Point on or outside the working set; ``constraint`` names the violation."""

    def __init__(self, constraint):
        super().__init__(f"point violates constraint {constraint!r}")
        self.constraint = constraint


@dataclass(frozen=True)
class CutRecord:
    """One half-space constraint f * tr(G delta_s) <= 0."""

    delta_s: np.ndarray
    sign: int
    interval_index: int = 0

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise ValueError(f"cut sign must be +1 or -1, got {self.sign}")
        object.__setattr__(self, "delta_s", hermitize(self.delta_s))


@dataclass(frozen=True)
class NewtonSettings:
    grad_tol: float = 1e-8
    max_iters: int = 200
    backtrack_alpha: float = 0.25
    backtrack_beta: float = 0.5
    feasibility_push: float = 1e-3

    def __post_init__(self):
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")
        if not 0 < self.backtrack_alpha < 0.5:
            raise ValueError("backtrack_alpha must lie in (0, 0.5)")
        if not 0 < self.backtrack_beta < 1:
            raise ValueError("backtrack_beta must lie in (0, 1)")


# slack threshold: a cut counts strictly satisfied when slack > SLACK_TOL * scale
SLACK_TOL = 1e-12


class BarrierProblem:
    """Box working set of dimension ``dim`` plus accumulated cuts."""

    def __init__(self, dim: int, cuts: list[CutRecord] | None = None):
        if dim < 1:
            raise ValueError("dim must be at least 1")
        self.dim = dim
        self.cuts: list[CutRecord] = []
        q = dim * dim
        self._a = np.zeros((0, q))
        self._scales = np.zeros(0)
        for cut in cuts or ():
            self.add_cut(cut)

    def add_cut(self, cut: CutRecord) -> None:
        if cut.delta_s.shape != (self.dim, self.dim):
            raise ValueError("cut dimension mismatch")
        self.cuts.append(cut)
        row = -cut.sign * cvec(cut.delta_s)
        self._a = np.vstack([self._a, row[None, :]])
        self._scales = np.append(
            self._scales, max(1.0, float(np.linalg.norm(cut.delta_s)))
        )

    @property
    def n_cuts(self) -> int:
        return len(self.cuts)

    def slacks(self, g: np.ndarray) -> np.ndarray:
        """Cut slacks -f_i tr(G dS_i) at cvec coordinates ``g``."""
        return self._a @ g


def _cholesky_or_none(x: np.ndarray):
    try:
        return np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        return None


def _interior_state(problem: BarrierProblem, g: np.ndarray):
    """Return (G, chol(G), chol(I-G), slacks) or None if not strictly interior."""
    gm = cmat(g)
    lo = _cholesky_or_none(gm)
    if lo is None:
        return None
    hi = _cholesky_or_none(np.eye(problem.dim) - gm)
    if hi is None:
        return None
    s = problem.slacks(g)
    if problem.n_cuts and np.any(s <= SLACK_TOL * problem._scales):
        return None
    return gm, lo, hi, s


def _potential_from_state(state) -> float:
    _, lo, hi, s = state
    logdet_g = 2.0 * np.sum(np.log(np.diagonal(lo).real))
    logdet_ig = 2.0 * np.sum(np.log(np.diagonal(hi).real))
    val = -2.0 * logdet_g - 2.0 * logdet_ig
    if s.size:
        val -= float(np.sum(np.log(s)))
    return float(val)


def potential(problem: BarrierProblem, g_matrix: np.ndarray) -> float:
    """Barrier potential at a Hermitian point; raises on the boundary.

    The raised :class:`BoundaryError` carries ``constraint`` = "box" or the
    index of the first violated cut.
    """
    gm = hermitize(g_matrix)
    g = cvec(gm)
    if _cholesky_or_none(gm) is None or _cholesky_or_none(np.eye(problem.dim) - gm) is None:
        raise BoundaryError("box")
    s = problem.slacks(g)
    bad = np.nonzero(s <= SLACK_TOL * problem._scales)[0] if problem.n_cuts else []
    if len(bad):
        raise BoundaryError(int(bad[0]))
    state = (gm, np.linalg.cholesky(gm),
             np.linalg.cholesky(np.eye(problem.dim) - gm), s)
    return _potential_from_state(state)


def _grad_hess(problem: BarrierProblem, state):
    gm, _, _, s = state
    m = problem.dim
    basis = cvec_basis(m)
    w1 = np.linalg.inv(gm)
    w2 = np.linalg.inv(np.eye(m) - gm)
    grad = -2.0 * cvec(hermitize(w1)) + 2.0 * cvec(hermitize(w2))
    t1 = np.matmul(w1, basis)
    t2 = np.matmul(w2, basis)
    hess = 2.0 * np.einsum("jab,kba->jk", t1, t1).real
    hess += 2.0 * np.einsum("jab,kba->jk", t2, t2).real
    if problem.n_cuts:
        inv_s = 1.0 / s
        grad -= problem._a.T @ inv_s
        rows = problem._a * inv_s[:, None]
        hess += rows.T @ rows
    return grad, 0.5 * (hess + hess.T)


def _recover_interior(problem: BarrierProblem, g: np.ndarray,
                      settings: NewtonSettings) -> np.ndarray | None:
    """Nudge a point off active cut hyperplanes along their inward normals.

    Handles starts that sit exactly on neutral cuts (slack 0, never negative
    beyond rounding). Returns None when no interior point is reachable.
    """
    if not problem.n_cuts or _cholesky_or_none(cmat(g)) is None:
        return None
    for _ in range(problem.n_cuts + 1):
        if _interior_state(problem, g) is not None:
            return g
        s = problem.slacks(g)
        tight = s <= SLACK_TOL * problem._scales
        if not np.any(tight):
            return None
        rows = problem._a[tight]
        direction = (rows / np.linalg.norm(rows, axis=1)[:, None]).sum(axis=0)
        for halving in range(60):
            cand = g + settings.feasibility_push * (0.5**halving) * direction
            if _interior_state(problem, cand) is not None:
                return cand
        # combined push failed; move along the single tightest normal
        worst = int(np.argmin(s / problem._scales))
        row = problem._a[worst] / np.linalg.norm(problem._a[worst])
        moved = False
        for halving in range(60):
            cand = g + settings.feasibility_push * (0.5**halving) * row
            if problem.slacks(cand)[worst] > SLACK_TOL * problem._scales[worst] and (
                _cholesky_or_none(cmat(cand)) is not None
            ):
                g = cand
                moved = True
                break
        if not moved:
            return None
    return None


def _newton_direction(hess: np.ndarray, grad: np.ndarray) -> np.ndarray:
    # symmetric Jacobi scaling tames the huge curvature spread that deep
    # cuts and near-singular box terms produce, then one round of
    # iterative refinement recovers further digits of the solve
    scale = 1.0 / np.sqrt(np.clip(np.diagonal(hess), 1e-300, None))
    hs = hess * scale[:, None] * scale[None, :]
    gs = grad * scale
    ridge = 0.0
    for _ in range(8):
        try:
            m = hs + ridge * np.eye(hs.shape[0])
            y = np.linalg.solve(m, -gs)
            y += np.linalg.solve(m, -gs - m @ y)
        except np.linalg.LinAlgError:
            y = None
        if y is not None:
            d = y * scale
            if d @ grad < 0:
                return d
        ridge = 1e-12 if ridge == 0.0 else ridge * 100.0
    return -grad


def analytic_center(
    problem: BarrierProblem,
    warm_start: np.ndarray | None = None,
    settings: NewtonSettings = NewtonSettings(),
    trace: list | None = None,
) -> np.ndarray:
    """Minimize the barrier potential; returns the strictly interior center.

    ``warm_start`` is used when strictly feasible, otherwise I/2 is tried.
    When ``trace`` is a list, (iteration, potential, grad_norm) rows are
    appended for diagnostics.
    """
    m = problem.dim
    state = None
    for candidate in (warm_start, 0.5 * np.eye(m)):
        if candidate is None:
            continue
        g = cvec(hermitize(candidate))
        state = _interior_state(problem, g)
        if state is None:
            g = _recover_interior(problem, g, settings)
            state = _interior_state(problem, g) if g is not None else None
        if state is not None:
            break
    if state is None:
        raise InfeasibleError("no strictly feasible starting point found")

    pot = _potential_from_state(state)
    alpha, beta = settings.backtrack_alpha, settings.backtrack_beta
    best = None  # (gnorm, matrix) at the best iterate seen
    no_progress = 0
    for it in range(settings.max_iters):
        grad, hess = _grad_hess(problem, state)
        gnorm = float(np.linalg.norm(grad))
        if trace is not None:
            trace.append((it, pot, gnorm))
        if gnorm <= settings.grad_tol:
            return state[0]
        pot_moved = it > 0 and pot_prev - pot > 64 * np.finfo(float).eps * (1.0 + abs(pot))
        pot_prev = pot
        if best is None or gnorm < 0.99 * best[0]:
            best = (gnorm, state[0])
            no_progress = 0
        elif not pot_moved:
            no_progress += 1
        else:
            no_progress = 0
        # late-stage rounding floor: potential and gradient both stop moving
        # even though the tolerance is out of reach in floats
        if no_progress >= 8:
            if best[0] <= 1e-6:
                return best[1]
            raise ConvergenceError(
                f"gradient norm stalled at {best[0]:.3e}", best[0]
            )
        d = _newton_direction(hess, grad)
        slope = float(grad @ d)
        decrement = np.sqrt(max(-slope, 0.0))
        if decrement <= 0.01 * settings.grad_tol and gnorm <= 1e-6:
            return state[0]
        step = 1.0
        accepted = False
        while step > 1e-18:
            cand = g + step * d
            cand_state = _interior_state(problem, cand)
            if cand_state is not None:
                cand_pot = _potential_from_state(cand_state)
                if cand_pot <= pot + alpha * step * slope:
                    g, state, pot = cand, cand_state, cand_pot
                    accepted = True
                    break
            step *= beta
        if not accepted:
            # step size underflow: the iterate cannot be improved in floats
            if gnorm <= 1e-6:
                return state[0]
            raise ConvergenceError(
                f"line search stalled at gradient norm {gnorm:.3e}", gnorm
            )
    grad, _ = _grad_hess(problem, state)
    gnorm = float(np.linalg.norm(grad))
    if gnorm <= settings.grad_tol:
        return state[0]
    if best is not None and best[0] <= 1e-6:
        return best[1]
    raise ConvergenceError(
        f"no convergence in {settings.max_iters} iterations "
        f"(gradient norm {gnorm:.3e})",
        gnorm,
    )


def strictly_feasible_start(
    problem: BarrierProblem,
    previous_center: np.ndarray,
    newest_cut: CutRecord,
    settings: NewtonSettings = NewtonSettings(),
) -> np.ndarray:
    """Push a point off the newest cut hyperplane into the strict interior.

    The previous center sits on (or near) the newest cut plane; stepping
    along -sign * dS always increases that cut's slack, and the step is
    halved until every older constraint stays strictly satisfied.
    """
    g = cvec(hermitize(previous_center))
    if _interior_state(problem, g) is not None:
        return cmat(g)
    norm = float(np.linalg.norm(newest_cut.delta_s))
    if norm == 0.0:
        raise InfeasibleError("newest cut has zero direction")
    direction = cvec(-newest_cut.sign * newest_cut.delta_s / norm)
    push = settings.feasibility_push
    for halving in range(60):
        cand = g + push * (0.5**halving) * direction
        if _interior_state(problem, cand) is not None:
            return cmat(cand)
    raise InfeasibleError("could not recover strict feasibility from the new cut")


def write_newton_trace(path, rows) -> None:
    """Dump (iteration, potential, grad_norm) diagnostic rows as CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "potential", "grad_norm"])
        for row in rows:
            writer.writerow([row[0], f"{row[1]:.12g}", f"{row[2]:.12g}"])
