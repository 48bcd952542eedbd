"""Centralized alternating optimization for the shared-basis model.

All m tasks share one basis U (L-by-r); task t owns coefficients A_t
(r-by-d).  The objective is

    sum_t 0.5 ||H_t U A_t - T_t||^2 + mu1/2 ||U||^2 + mu2/2 sum_t ||A_t||^2

minimized by exact block updates: U from the Kronecker-structured
normal equations, then each A_t from a ridge system.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError
from .numerics import KroneckerSystem, kron_vec_solve, spd_solve


@dataclass(frozen=True)
class MtlProblem:
    """Task data plus model hyperparameters.

    ``tasks`` is a sequence of (H_t, T_t): hidden activations (N_t, L)
    and targets (N_t, d).  All tasks must agree on L and d.
    """

    tasks: tuple
    r: int
    mu1: float
    mu2: float

    def __post_init__(self):
        if not self.tasks:
            raise UsageError("problem needs at least one task")
        tasks = []
        width = out_dim = None
        for t, (h, targets) in enumerate(self.tasks):
            h = np.asarray(h, dtype=float)
            targets = np.asarray(targets, dtype=float)
            if h.ndim != 2 or targets.ndim != 2:
                raise UsageError(f"task {t}: H and T must be 2-dimensional")
            if h.shape[0] != targets.shape[0]:
                raise UsageError(
                    f"task {t}: H has {h.shape[0]} rows but T has {targets.shape[0]}"
                )
            if not (np.all(np.isfinite(h)) and np.all(np.isfinite(targets))):
                raise UsageError(f"task {t}: data must be finite")
            if width is None:
                width, out_dim = h.shape[1], targets.shape[1]
            elif h.shape[1] != width or targets.shape[1] != out_dim:
                raise UsageError(
                    f"task {t}: expected H width {width} and T width {out_dim}, "
                    f"got {h.shape[1]} and {targets.shape[1]}"
                )
            tasks.append((h, targets))
        object.__setattr__(self, "tasks", tuple(tasks))
        if self.r < 1:
            raise UsageError("r must be at least 1")
        if not (self.mu1 > 0 and self.mu2 > 0):
            raise UsageError("mu1 and mu2 must be positive")

    @property
    def m(self):
        return len(self.tasks)

    @property
    def hidden_dim(self):
        return self.tasks[0][0].shape[1]

    @property
    def output_dim(self):
        return self.tasks[0][1].shape[1]


def objective(problem, u, a_list):
    """The regularized multi-task objective at (U, {A_t})."""
    value = 0.5 * problem.mu1 * np.linalg.norm(u) ** 2
    for (h, t), a in zip(problem.tasks, a_list):
        value += 0.5 * np.linalg.norm(h @ u @ a - t) ** 2
        value += 0.5 * problem.mu2 * np.linalg.norm(a) ** 2
    return float(value)


def update_u(problem, a_list):
    """Exact basis update: solve the stacked normal equations for U.

    In matrix form: sum_t H_t^T H_t U (A_t A_t^T) + mu1 U =
    sum_t H_t^T T_t A_t^T.
    """
    pairs = []
    rhs = np.zeros((problem.hidden_dim, problem.r))
    for (h, t), a in zip(problem.tasks, a_list):
        pairs.append((a @ a.T, h.T @ h))
        rhs += h.T @ t @ a.T
    system = KroneckerSystem(pairs=tuple(pairs), shift=problem.mu1)
    return kron_vec_solve(system, rhs)


def update_a(problem, u, t):
    """Exact coefficient update for task t given the current basis."""
    h, targets = problem.tasks[t]
    hu = h @ u
    gram = hu.T @ hu + problem.mu2 * np.eye(problem.r)
    return spd_solve(gram, hu.T @ targets)


@dataclass
class MtlSolution:
    u: np.ndarray
    a: list
    objective_trace: np.ndarray
    iterations: int
    u_trace: list = None
    a_trace: list = None


def solve_mtl_elm(problem, k_max=1000, stop_tol=1e-10, record_iterates=False):
    """Alternate exact U and A updates from the all-ones coefficient start.

    Stops after ``k_max`` iterations or as soon as the objective decrease
    falls below ``stop_tol``.  The returned trace includes the objective
    at the initial point, so it has ``iterations + 1`` entries.
    """
    if k_max < 0:
        raise UsageError("k_max must be non-negative")
    a_list = [np.ones((problem.r, problem.output_dim)) for _ in range(problem.m)]
    u = np.zeros((problem.hidden_dim, problem.r))
    trace = [objective(problem, u, a_list)]
    u_trace, a_trace = [], []
    iterations = 0
    for _ in range(k_max):
        u = update_u(problem, a_list)
        a_list = [update_a(problem, u, t) for t in range(problem.m)]
        iterations += 1
        trace.append(objective(problem, u, a_list))
        if record_iterates:
            u_trace.append(u.copy())
            a_trace.append([a.copy() for a in a_list])
        if trace[-2] - trace[-1] < stop_tol:
            break
    return MtlSolution(
        u=u,
        a=a_list,
        objective_trace=np.asarray(trace),
        iterations=iterations,
        u_trace=u_trace if record_iterates else None,
        a_trace=a_trace if record_iterates else None,
    )
