"""Decentralized consensus-ADMM solvers over a simulated agent network.

Each agent owns one task (H_t, T_t) plus a private copy U_t of the
shared basis; per-edge constraints U_s = U_j tie the copies together.
One iteration runs in hybrid order: every agent refreshes U_t in
parallel from iteration-k neighbor state (Jacobian step) and broadcasts
it, the dual variable moves with an adaptive per-edge step, then every
agent refreshes its private coefficients A_t (Gauss-Seidel step).

Two basis-update variants exist: ``exact`` solves the full per-agent
subproblem; ``first-order`` replaces the data term by its
linearization, which costs one gradient and a diagonal solve.

Private task data never leaves its agent: all cross-agent traffic goes
through :class:`MessageBus`, which carries only L-by-r basis blocks and
counts every scalar sent.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, UsageError
from .graph import build_constraints
from .numerics import (
    KroneckerSystem,
    kron_pair_solve,
    kron_vec_solve,
    spd_solve,
    spectral_norm_bound,
    _symmetrize,
)

VARIANTS = ("exact", "first-order")
PROX_MODES = ("prox-linear", "standard")

#: iterate norms beyond this raise :class:`DivergenceError`
ITERATE_NORM_CAP = 1e12


# ---------------------------------------------------------------------------
# parameters and convergence conditions


@dataclass(frozen=True)
class AdmmParams:
    """Solver parameters; ``tau`` and ``zeta`` hold one value per agent.

    ``sigma`` is the strong-convexity modulus used in the sufficient
    conditions; ``None`` selects ``min(mu1/m, mu2)``.  In
    ``prox-linear`` mode the proximal weights are
    ``P_t = tau_t I - rho C_t^T C_t`` and ``Q_t = zeta_t I``; in
    ``standard`` mode they are positive diagonals, by default
    ``tau_t I`` and ``zeta_t I``, overridable via ``p_diags``/``q_diags``.
    """

    rho: float
    delta: float
    mu1: float
    mu2: float
    tau: tuple
    zeta: tuple
    sigma: float | None = None
    gamma_cap: float = 1.0
    prox_mode: str = "prox-linear"
    p_diags: tuple | None = None
    q_diags: tuple | None = None

    def __post_init__(self):
        for name in ("rho", "delta", "mu1", "mu2"):
            if not getattr(self, name) > 0:
                raise UsageError(f"{name} must be positive")
        if not self.gamma_cap > 0:
            raise UsageError("gamma_cap must be positive")
        if self.prox_mode not in PROX_MODES:
            raise UsageError(f"unknown prox_mode {self.prox_mode!r}")
        tau = tuple(float(v) for v in np.atleast_1d(self.tau))
        zeta = tuple(float(v) for v in np.atleast_1d(self.zeta))
        if len(tau) != len(zeta):
            raise UsageError("tau and zeta must have one entry per agent")
        if any(v < 0 for v in tau):
            raise UsageError("tau entries must be non-negative")
        if any(v < 0 for v in zeta):
            raise UsageError("zeta entries must be non-negative")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "zeta", zeta)
        for name in ("p_diags", "q_diags"):
            diags = getattr(self, name)
            if diags is None:
                continue
            if self.prox_mode != "standard":
                raise UsageError(f"{name} is only meaningful in standard prox mode")
            converted = []
            for t, d in enumerate(diags):
                d = np.asarray(d, dtype=float)
                if d.ndim != 1 or np.any(d < 0) or not np.all(np.isfinite(d)):
                    raise UsageError(
                        f"{name}[{t}] must be a non-negative finite 1-d array"
                    )
                converted.append(d)
            object.__setattr__(self, name, tuple(converted))

    @property
    def m(self):
        return len(self.tau)

    def resolved_sigma(self, m):
        if self.sigma is not None:
            if not self.sigma > 0:
                raise UsageError("sigma must be positive")
            return float(self.sigma)
        return min(self.mu1 / m, self.mu2)


def resolve_prox_weights(params, topology, width, r):
    """Per-agent diagonal proximal weights (p_diag (L,), q_diag (r,)).

    In prox-linear mode ``P_t = tau_t I - rho C_t^T C_t`` must stay PSD,
    which with ``C_t^T C_t = d_t I`` means ``tau_t >= rho d_t``.
    """
    p_diags, q_diags = [], []
    for t in range(topology.m):
        degree = topology.degrees[t]
        if params.prox_mode == "prox-linear":
            level = params.tau[t] - params.rho * degree
            if level < 0:
                raise UsageError(
                    f"prox-linear requires tau[{t}] >= rho * degree = "
                    f"{params.rho * degree}, got {params.tau[t]}"
                )
            p = np.full(width, level)
            q = np.full(r, params.zeta[t])
        else:
            p = (
                params.p_diags[t].copy()
                if params.p_diags is not None
                else np.full(width, params.tau[t])
            )
            q = (
                params.q_diags[t].copy()
                if params.q_diags is not None
                else np.full(r, params.zeta[t])
            )
            if p.shape != (width,) or q.shape != (r,):
                raise UsageError(
                    f"agent {t}: diagonal shapes must be ({width},) and ({r},)"
                )
        p_diags.append(p)
        q_diags.append(q)
    return p_diags, q_diags


def estimate_lipschitz(h, a, mu1, m):
    """Upper bound on the Lipschitz constant of the local basis gradient.

    ``U -> H^T (H U A - T) A^T + mu1/m U`` has gradient Lipschitz constant
    at most ``||H^T H|| * ||A A^T|| + mu1/m``.
    """
    h = np.asarray(h, dtype=float)
    a = np.asarray(a, dtype=float)
    return float(
        spectral_norm_bound(h.T @ h) * spectral_norm_bound(a @ a.T) + mu1 / m
    )


@dataclass
class ConditionReport:
    """Sufficient-condition check results; violations warn, never block."""

    variant: str
    sigma: float
    tau: tuple
    required: tuple
    satisfied: tuple
    lipschitz: tuple | None
    warnings: list

    def lines(self):
        out = [f"variant = {self.variant}", f"sigma = {self.sigma:.6g}"]
        for t, (tau, req, ok) in enumerate(
            zip(self.tau, self.required, self.satisfied)
        ):
            out.append(
                f"agent {t}: tau = {tau:.6g}, required >= {req:.6g}, "
                f"{'ok' if ok else 'VIOLATED'}"
            )
        out.extend(f"warning: {w}" for w in self.warnings)
        return out


def check_conditions(topology, params, variant, lipschitz=None):
    """Evaluate the sufficient descent conditions for the given variant.

    The exact variant needs ``tau_t >= rho m (delta + 1/2) d_t - sigma/2``;
    the first-order variant additionally adds the local gradient
    Lipschitz bound ``L_t``.  Violations are reported as warnings.
    """
    m = topology.m
    sigma = params.resolved_sigma(m)
    required, satisfied, warnings = [], [], []
    for t in range(m):
        bound = params.rho * m * (params.delta + 0.5) * topology.degrees[t] - sigma / 2
        if variant == "first-order":
            if lipschitz is None:
                raise UsageError("first-order condition check needs Lipschitz estimates")
            bound += lipschitz[t]
        required.append(bound)
        ok = params.tau[t] >= bound - 1e-12
        satisfied.append(ok)
        if not ok:
            warnings.append(
                f"agent {t}: tau = {params.tau[t]:.6g} below the sufficient "
                f"bound {bound:.6g}; monotone descent is not guaranteed"
            )
    return ConditionReport(
        variant=variant,
        sigma=sigma,
        tau=params.tau,
        required=tuple(required),
        satisfied=tuple(satisfied),
        lipschitz=tuple(lipschitz) if lipschitz is not None else None,
        warnings=warnings,
    )


def theorem_tau(topology, params, variant, lipschitz=None):
    """Smallest per-agent tau satisfying the variant's sufficient condition."""
    sigma = params.resolved_sigma(topology.m)
    out = []
    for t in range(topology.m):
        bound = (
            params.rho * topology.m * (params.delta + 0.5) * topology.degrees[t]
            - sigma / 2
        )
        if variant == "first-order":
            bound += lipschitz[t]
        out.append(max(bound, params.rho * topology.degrees[t]))
    return tuple(out)


# ---------------------------------------------------------------------------
# update kernels (pure functions; agents call them with their own data)


def u_update_exact(
    gram, data_term, u_prev, a_prev, neighbor_sum, lam_pull,
    mu1_over_m, rho, degree, p_diag, gram_eig=None,
):
    """Exact per-agent basis update.

    Solves ``H^T H U (A A^T) + (mu1/m + rho d_t) U + P_t U = rhs`` with
    ``rhs = H^T T A^T + rho sum_neighbors U_u - C_t^T lambda + P_t U^k``.
    """
    sa = a_prev @ a_prev.T
    rhs = data_term @ a_prev.T + rho * neighbor_sum - lam_pull + p_diag[:, None] * u_prev
    shift = mu1_over_m + rho * degree + p_diag
    if np.ptp(shift) == 0.0:
        scalar = float(shift[0])
        if gram_eig is not None:
            return kron_pair_solve(gram_eig, sa, scalar, rhs)
        return kron_vec_solve(KroneckerSystem(pairs=((sa, gram),), shift=scalar), rhs)
    return kron_vec_solve(
        KroneckerSystem(pairs=((sa, gram),), shift=np.diag(shift)), rhs
    )


def u_update_first_order(
    gram, data_term, u_prev, a_prev, neighbor_sum, lam_pull,
    mu1_over_m, rho, degree, p_diag,
):
    """Linearized per-agent basis update: one gradient plus a diagonal solve."""
    denom = rho * degree + p_diag
    if np.any(denom <= 0.0):
        raise UsageError(
            "first-order update needs rho * degree + P_t diagonal > 0 "
            "(tau_t = 0 in prox-linear mode is not usable)"
        )
    grad = gram @ u_prev @ (a_prev @ a_prev.T) - data_term @ a_prev.T
    grad += mu1_over_m * u_prev
    rhs = -grad + rho * neighbor_sum - lam_pull + p_diag[:, None] * u_prev
    return rhs / denom[:, None]


def a_update(gram, data_term, u_new, a_prev, q_diag, mu2):
    """Per-agent coefficient update: ridge system with a proximal pull."""
    hu_gram = _symmetrize(u_new.T @ gram @ u_new)
    lhs = hu_gram + np.diag(q_diag) + mu2 * np.eye(u_new.shape[1])
    rhs = u_new.T @ data_term + q_diag[:, None] * a_prev
    return spd_solve(lhs, rhs)


def select_gamma(prev_gap, new_gap, delta, cap):
    """Adaptive per-edge dual step from the primal/dual gap ratio.

    Returns ``(gamma, stalled)``: the step
    ``min(cap, delta ||gap^k - gap^{k+1}||^2 / ||gap^{k+1}||^2)`` with the
    conventions that a vanishing denominator yields the cap and a
    vanishing numerator (basis copies frozen while the edge still
    disagrees) yields 0 and flags the edge as stalled.
    """
    denom = float(np.sum(new_gap * new_gap))
    if denom == 0.0:
        return float(cap), False
    num = delta * float(np.sum((prev_gap - new_gap) ** 2))
    if num == 0.0:
        return 0.0, True
    return min(float(cap), num / denom), False


# ---------------------------------------------------------------------------
# objective diagnostics


def separable_objective(problem, u_list, a_list):
    """sum_t 0.5||H_t U_t A_t - T_t||^2 + mu1/(2m)||U_t||^2 + mu2/2||A_t||^2."""
    m = problem.m
    value = 0.0
    for (h, t), u, a in zip(problem.tasks, u_list, a_list):
        value += 0.5 * np.linalg.norm(h @ u @ a - t) ** 2
        value += 0.5 * problem.mu1 / m * np.linalg.norm(u) ** 2
        value += 0.5 * problem.mu2 * np.linalg.norm(a) ** 2
    return float(value)


def augmented_lagrangian(problem, cs, u_list, a_list, lam, rho):
    """Separable objective plus the dual pairing and quadratic penalty."""
    stacked = cs.consensus_stack(u_list)
    value = separable_objective(problem, u_list, a_list)
    value += float(np.sum(lam * stacked))
    value += 0.5 * rho * float(np.sum(stacked * stacked))
    return value


def comm_ratio_vs_dnsp(k, width, r, n):
    """Scalars sent by k basis-sharing iterations relative to one sufficient
    statistic exchange: ``2 k L / ((r + 1) n)``."""
    if min(k, width, r, n) <= 0:
        raise UsageError("k, L, r, n must all be positive")
    return 2.0 * k * width / ((r + 1.0) * n)


# ---------------------------------------------------------------------------
# network simulation


class MessageBus:
    """Only cross-agent channel in the simulation.

    Delivers basis blocks to topological neighbors, counting every
    scalar.  ``observer(sender, receiver, payload)`` is invoked for each
    delivery; the audit tests use it to assert that nothing but L-by-r
    basis blocks ever crosses an agent boundary.
    """

    def __init__(self, topology, observer=None):
        self._topology = topology
        self._inbox = [dict() for _ in range(topology.m)]
        self._observer = observer
        self.scalars_sent = 0

    def seed(self, sender, block):
        """Pre-load a known initial block without counting communication."""
        for receiver in self._topology.neighbors[sender]:
            self._inbox[receiver][sender] = np.array(block, dtype=float)

    def broadcast(self, sender, block):
        block = np.asarray(block, dtype=float)
        for receiver in self._topology.neighbors[sender]:
            payload = block.copy()
            if self._observer is not None:
                self._observer(sender, receiver, payload)
            self._inbox[receiver][sender] = payload
            self.scalars_sent += payload.size

    def received(self, receiver):
        """Latest block from each neighbor of ``receiver``."""
        return dict(self._inbox[receiver])


class Agent:
    """One task's private data plus local iterates.

    ``H`` and ``T`` never leave the instance; neighbors only ever see
    the U blocks this agent broadcasts.
    """

    def __init__(self, index, h, targets, r, mu1, mu2, m):
        self.index = index
        self._h = np.asarray(h, dtype=float)
        self._targets = np.asarray(targets, dtype=float)
        self._gram = _symmetrize(self._h.T @ self._h)
        self._data_term = self._h.T @ self._targets
        self._gram_eig = np.linalg.eigh(self._gram)
        self._mu1_over_m = mu1 / m
        self._mu2 = mu2
        self.u = np.ones((self._h.shape[1], r))
        self.a = np.ones((r, self._targets.shape[1]))

    def local_objective(self, u=None, a=None):
        u = self.u if u is None else u
        a = self.a if a is None else a
        residual = self._h @ u @ a - self._targets
        return float(
            0.5 * np.linalg.norm(residual) ** 2
            + 0.5 * self._mu1_over_m * np.linalg.norm(u) ** 2
            + 0.5 * self._mu2 * np.linalg.norm(a) ** 2
        )

    def lipschitz_estimate(self, mu1, m):
        return estimate_lipschitz(self._h, self.a, mu1, m)

    def compute_u(self, variant, neighbor_sum, lam_pull, rho, degree, p_diag):
        kwargs = dict(
            gram=self._gram,
            data_term=self._data_term,
            u_prev=self.u,
            a_prev=self.a,
            neighbor_sum=neighbor_sum,
            lam_pull=lam_pull,
            mu1_over_m=self._mu1_over_m,
            rho=rho,
            degree=degree,
            p_diag=p_diag,
        )
        if variant == "exact":
            return u_update_exact(gram_eig=self._gram_eig, **kwargs)
        return u_update_first_order(**kwargs)

    def compute_a(self, q_diag):
        return a_update(self._gram, self._data_term, self.u, self.a, q_diag, self._mu2)


@dataclass
class DmtlResult:
    """Iterates plus per-iteration diagnostics of one decentralized run.

    ``objective``, ``lagrangian`` and ``primal_residual`` include the
    initial state, so they have ``iterations + 1`` entries; the
    remaining traces have one entry per iteration.
    """

    u: list
    a: list
    lam: np.ndarray
    iterations: int
    objective: np.ndarray
    lagrangian: np.ndarray
    primal_residual: np.ndarray
    dual_residual: np.ndarray
    comm_scalars: np.ndarray
    elapsed_seconds: np.ndarray
    gamma: np.ndarray
    delta_u_sq: np.ndarray
    delta_a_sq: np.ndarray
    descent_bound: np.ndarray
    lambda_change: np.ndarray
    stalled_edges: list
    condition_report: ConditionReport
    u_trace: list = None
    a_trace: list = None


def run_dmtl(
    problem,
    topology,
    params,
    variant="exact",
    k_max=100,
    record_iterates=False,
    bus_observer=None,
):
    """Run the decentralized solver for ``k_max`` iterations.

    Sufficient-condition violations are reported as warnings in the
    result's condition report, never as errors; iterates above
    :data:`ITERATE_NORM_CAP` (or non-finite) raise
    :class:`~mtelm.errors.DivergenceError`.
    """
    if variant not in VARIANTS:
        raise UsageError(f"unknown variant {variant!r}")
    if topology.m != problem.m:
        raise UsageError(
            f"topology has {topology.m} agents but problem has {problem.m} tasks"
        )
    if params.m != problem.m:
        raise UsageError(
            f"params cover {params.m} agents but problem has {problem.m} tasks"
        )
    if k_max < 0:
        raise UsageError("k_max must be non-negative")
    m = problem.m
    r = problem.r
    width = problem.hidden_dim
    cs = build_constraints(topology)
    p_diags, q_diags = resolve_prox_weights(params, topology, width, r)
    agents = [
        Agent(t, h, targets, r, params.mu1, params.mu2, m)
        for t, (h, targets) in enumerate(problem.tasks)
    ]
    lipschitz = None
    if variant == "first-order":
        lipschitz = [agent.lipschitz_estimate(params.mu1, m) for agent in agents]
    report = check_conditions(topology, params, variant, lipschitz)
    bus = MessageBus(topology, observer=bus_observer)
    for agent in agents:
        bus.seed(agent.index, agent.u)
    n_edges = cs.num_edges
    lam = np.zeros((n_edges, width, r))
    sigma = params.resolved_sigma(m)
    c1 = np.array(
        [
            params.tau[t]
            + sigma / 2
            - params.rho * m * (params.delta + 0.5) * topology.degrees[t]
            for t in range(m)
        ]
    )
    c2 = np.array([params.zeta[t] + sigma / 2 for t in range(m)])

    def current_objective():
        return sum(agent.local_objective() for agent in agents)

    def current_lagrangian(stacked):
        value = current_objective()
        value += float(np.sum(lam * stacked))
        value += 0.5 * params.rho * float(np.sum(stacked * stacked))
        return value

    stacked = cs.consensus_stack([agent.u for agent in agents])
    objective_trace = [current_objective()]
    lagrangian_trace = [current_lagrangian(stacked)]
    primal_trace = [float(np.linalg.norm(stacked))]
    dual_trace, comm_trace, elapsed_trace = [], [], []
    gamma_trace, du_trace, da_trace = [], [], []
    bound_trace, lam_change_trace = [], []
    stalled_edges = []
    u_trace, a_trace = [], []
    start = time.perf_counter()

    def check_iterate(value, iteration, agent_index, label):
        norm = np.linalg.norm(value)
        if not np.isfinite(norm) or norm > ITERATE_NORM_CAP:
            raise DivergenceError(
                f"{label} norm {norm:.3e} exceeds {ITERATE_NORM_CAP:g} "
                f"at iteration {iteration} (agent {agent_index})",
                iteration=iteration,
                agent=agent_index,
            )

    for k in range(1, k_max + 1):
        u_prev = [agent.u for agent in agents]
        a_prev = [agent.a for agent in agents]
        scalars_before = bus.scalars_sent
        new_u = []
        for t, agent in enumerate(agents):
            inbox = bus.received(t)
            if inbox:
                neighbor_sum = np.sum(list(inbox.values()), axis=0)
            else:
                neighbor_sum = np.zeros((width, r))
            lam_pull = cs.apply_adjoint(t, lam)
            if np.ndim(lam_pull) == 0:
                lam_pull = np.zeros((width, r))
            new_u.append(
                agent.compute_u(
                    variant, neighbor_sum, lam_pull,
                    params.rho, topology.degrees[t], p_diags[t],
                )
            )
        for t, agent in enumerate(agents):
            check_iterate(new_u[t], k, t, "basis iterate")
            agent.u = new_u[t]
            bus.broadcast(t, agent.u)
        comm_trace.append(bus.scalars_sent - scalars_before)

        prev_stack = cs.consensus_stack(u_prev)
        new_stack = cs.consensus_stack(new_u)
        gammas = np.zeros(n_edges)
        lam_change_sq = 0.0
        for e in range(n_edges):
            gamma, stalled = select_gamma(
                prev_stack[e], new_stack[e], params.delta, params.gamma_cap
            )
            if stalled:
                stalled_edges.append((k, e))
            gammas[e] = gamma
            step = params.rho * gamma * new_stack[e]
            lam[e] += step
            lam_change_sq += float(np.sum(step * step))
        check_iterate(lam, k, -1, "dual iterate")
        gamma_trace.append(gammas)
        lam_change_trace.append(np.sqrt(lam_change_sq))

        for t, agent in enumerate(agents):
            agent.a = agent.compute_a(q_diags[t])
            check_iterate(agent.a, k, t, "coefficient iterate")

        du_sq = [float(np.linalg.norm(agent.u - u_prev[t]) ** 2) for t, agent in enumerate(agents)]
        da_sq = [float(np.linalg.norm(agent.a - a_prev[t]) ** 2) for t, agent in enumerate(agents)]
        du_trace.append(sum(du_sq))
        da_trace.append(sum(da_sq))
        bound_trace.append(float(c1 @ du_sq + c2 @ da_sq))
        dual_trace.append(sum(np.sqrt(v) for v in du_sq))
        objective_trace.append(current_objective())
        lagrangian_trace.append(current_lagrangian(new_stack))
        primal_trace.append(float(np.linalg.norm(new_stack)))
        elapsed_trace.append(time.perf_counter() - start)
        if record_iterates:
            u_trace.append([agent.u.copy() for agent in agents])
            a_trace.append([agent.a.copy() for agent in agents])

    return DmtlResult(
        u=[agent.u for agent in agents],
        a=[agent.a for agent in agents],
        lam=lam,
        iterations=k_max,
        objective=np.asarray(objective_trace),
        lagrangian=np.asarray(lagrangian_trace),
        primal_residual=np.asarray(primal_trace),
        dual_residual=np.asarray(dual_trace),
        comm_scalars=np.asarray(comm_trace),
        elapsed_seconds=np.asarray(elapsed_trace),
        gamma=np.asarray(gamma_trace) if gamma_trace else np.zeros((0, n_edges)),
        delta_u_sq=np.asarray(du_trace),
        delta_a_sq=np.asarray(da_trace),
        descent_bound=np.asarray(bound_trace),
        lambda_change=np.asarray(lam_change_trace),
        stalled_edges=stalled_edges,
        condition_report=report,
        u_trace=u_trace if record_iterates else None,
        a_trace=a_trace if record_iterates else None,
    )
