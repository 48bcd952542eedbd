"""Experiment driver: build problems from a config, run solvers, emit traces.

Subcommands: ``run`` executes an experiment and writes per-repetition
trace files plus a deterministic summary; ``sweep`` grids iteration
budget against hidden width and tabulates communication ratio versus
testing error; ``validate`` checks a config and reports the descent
conditions without running anything.

Wall-clock times are measured and reported (``timings.txt``, trace
column ``elapsed_seconds``) but kept out of ``summary.txt`` so reruns
of the same config and seeds are byte-identical.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .admm import (
    AdmmParams,
    check_conditions,
    comm_ratio_vs_dnsp,
    estimate_lipschitz,
    run_dmtl,
    theorem_tau,
)
from .central import MtlProblem, solve_mtl_elm
from .config import (
    CONFIG_KEYS,
    _int_list,
    build_config,
    load_config_file,
    resolve_rule,
)
from .data import (
    SyntheticSpec,
    classify_and_score,
    load_dataset,
    make_synthetic,
    make_tasks,
)
from .elm import feature_map, local_objective, sample_hidden_layer, solve_local_elm
from .errors import DivergenceError, ParseError, UsageError
from .graph import build_topology, load_edge_list

TRACE_COLUMNS = (
    "k", "objective", "lagrangian", "primal_residual",
    "dual_residual", "comm_scalars", "elapsed_seconds",
)
_DECENTRALIZED = {"dmtl-elm": "exact", "fo-dmtl-elm": "first-order"}


def _derive_seed(seed, salt):
    """A child seed that does not collide with the parent's own stream."""
    return int(np.random.SeedSequence([seed, salt]).generate_state(1)[0])


@dataclass
class ProblemBundle:
    """One repetition's problem plus what scoring needs to reuse it."""

    problem: MtlProblem
    layer: object
    pairs: list
    input_dim: int


@dataclass
class RepOutcome:
    u: list
    a: list
    rows: list
    iterations: int
    condition_lines: list
    comm_per_iteration: int
    elapsed: float


def _build_problem(config, seed):
    if config.data == "synthetic":
        spec = SyntheticSpec(
            m=config.m, width=config.hidden, n_t=config.samples,
            r=config.rank, d=config.outputs, seed=seed,
            normalize_columns=config.normalize,
        )
        problem = make_synthetic(spec, config.mu1, config.mu2)
        return ProblemBundle(problem, None, None, config.hidden)
    x, labels = load_dataset(config.dataset)
    pairs = make_tasks(
        x, labels, config.m, seed,
        config.train_per_class, config.test_per_class,
        pca_target=config.pca,
    )
    input_dim = pairs[0][0].x.shape[1]
    layer = sample_hidden_layer(input_dim, config.hidden, _derive_seed(seed, 1))
    tasks = tuple(
        (feature_map(layer, train.x), train.targets) for train, _ in pairs
    )
    problem = MtlProblem(tasks=tasks, r=config.rank, mu1=config.mu1, mu2=config.mu2)
    return ProblemBundle(problem, layer, pairs, input_dim)


def _build_topology(config):
    if config.topology == "custom":
        return load_edge_list(config.edges, m=config.m)
    return build_topology(config.topology, config.m)


def build_admm_params(config, topology, problem, variant):
    """Resolve tau/zeta rules against the topology into solver parameters.

    ``tau = auto`` selects the smallest per-agent value satisfying the
    variant's sufficient descent condition; for the first-order variant
    that uses the gradient Lipschitz bounds at the all-ones start.
    Returns ``(params, lipschitz)``.
    """
    degrees = topology.degrees
    zeta = resolve_rule("zeta", config.zeta, degrees)
    tau = resolve_rule("tau", config.tau, degrees)
    lipschitz = None
    if variant == "first-order":
        a0 = np.ones((problem.r, problem.output_dim))
        lipschitz = [
            estimate_lipschitz(h, a0, config.mu1, problem.m)
            for h, _ in problem.tasks
        ]
    base = dict(
        rho=config.rho, delta=config.delta, mu1=config.mu1, mu2=config.mu2,
        zeta=zeta, sigma=config.sigma, gamma_cap=config.gamma_cap,
        prox_mode=config.prox,
    )
    if tau is None:
        probe = AdmmParams(tau=(0.0,) * topology.m, **base)
        tau = theorem_tau(topology, probe, variant, lipschitz)
    return AdmmParams(tau=tau, **base), lipschitz


def _solve_rep(config, bundle, topology):
    problem = bundle.problem
    start = time.perf_counter()
    if config.solver == "local-elm":
        us, a_list, total = [], [], 0.0
        for h, targets in problem.tasks:
            beta = solve_local_elm(h, targets, config.mu1)
            us.append(beta)
            a_list.append(np.eye(problem.output_dim))
            total += local_objective(h, targets, beta, config.mu1)
        rows = [(0, total, total, 0.0, 0.0, 0, float("nan"))]
        return RepOutcome(us, a_list, rows, 0, [], 0,
                          time.perf_counter() - start)
    if config.solver == "mtl-elm":
        solution = solve_mtl_elm(problem, k_max=config.k_max)
        rows = [
            (k, value, value, 0.0, 0.0, 0, float("nan"))
            for k, value in enumerate(solution.objective_trace)
        ]
        return RepOutcome(
            [solution.u] * problem.m, solution.a, rows,
            solution.iterations, [], 0, time.perf_counter() - start,
        )
    variant = _DECENTRALIZED[config.solver]
    params, lipschitz = build_admm_params(config, topology, problem, variant)
    result = run_dmtl(problem, topology, params, variant=variant,
                      k_max=config.k_max)
    rows = [(0, result.objective[0], result.lagrangian[0],
             result.primal_residual[0], 0.0, 0, 0.0)]
    for k in range(1, result.iterations + 1):
        rows.append((
            k, result.objective[k], result.lagrangian[k],
            result.primal_residual[k], result.dual_residual[k - 1],
            result.comm_scalars[k - 1], result.elapsed_seconds[k - 1],
        ))
    comm = int(result.comm_scalars[0]) if result.iterations else 0
    return RepOutcome(
        result.u, result.a, rows, result.iterations,
        result.condition_report.lines(), comm, time.perf_counter() - start,
    )


def _score(outcome, bundle):
    if bundle.pairs is None:
        return float("nan")
    errors = [
        classify_and_score(outcome.u[t], outcome.a[t], bundle.layer, test)
        for t, (_, test) in enumerate(bundle.pairs)
    ]
    return float(np.mean(errors))


def _write_trace(path, rows):
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(",".join(TRACE_COLUMNS) + "\n")
        for k, obj, lag, primal, dual, comm, elapsed in rows:
            handle.write(
                f"{int(k)},{float(obj)!r},{float(lag)!r},{float(primal)!r},"
                f"{float(dual)!r},{int(comm)},{float(elapsed)!r}\n"
            )


@dataclass
class ExperimentOutcome:
    out_dir: Path
    seeds: tuple
    testing_errors: list
    final_objectives: list
    elapsed: list
    condition_lines: list
    summary_lines: list


def execute_experiment(config):
    """Run all repetitions, write traces/results/summary, return outcome."""
    out_dir = Path(config.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    topology = (
        _build_topology(config) if config.solver in _DECENTRALIZED else None
    )
    seeds = config.rep_seeds()
    testing_errors, final_objectives, elapsed, iteration_counts = [], [], [], []
    condition_lines = []
    condition_blocks = []
    for index, seed in enumerate(seeds):
        bundle = _build_problem(config, seed)
        outcome = _solve_rep(config, bundle, topology)
        testing_errors.append(_score(outcome, bundle))
        final_objectives.append(float(outcome.rows[-1][1]))
        elapsed.append(outcome.elapsed)
        iteration_counts.append(outcome.iterations)
        _write_trace(out_dir / f"trace_rep{index:02d}.csv", outcome.rows)
        if outcome.condition_lines:
            condition_blocks.append((index, outcome.condition_lines))
            if not condition_lines:
                condition_lines = outcome.condition_lines

    with open(out_dir / "results.csv", "w", encoding="utf-8") as handle:
        handle.write("rep,seed,testing_error,final_objective,iterations\n")
        for i, seed in enumerate(seeds):
            handle.write(
                f"{i},{seed},{testing_errors[i]!r},"
                f"{final_objectives[i]!r},{iteration_counts[i]}\n"
            )

    errs = np.asarray(testing_errors, dtype=float)
    objs = np.asarray(final_objectives, dtype=float)
    summary_lines = [
        f"solver = {config.solver}",
        f"data = {config.data}",
        f"repetitions = {config.repetitions}",
        f"seeds = {','.join(str(s) for s in seeds)}",
        f"testing_error_mean = {float(np.mean(errs))!r}",
        f"testing_error_std = {float(np.std(errs))!r}",
        f"final_objective_mean = {float(np.mean(objs))!r}",
        f"final_objective_std = {float(np.std(objs))!r}",
    ]
    (out_dir / "summary.txt").write_text(
        "\n".join(summary_lines) + "\n", encoding="utf-8"
    )

    times = np.asarray(elapsed, dtype=float)
    timing_lines = ["# wall-clock seconds; hardware-dependent, not reproducible"]
    timing_lines += [
        f"repetition {i} = {t!r}" for i, t in enumerate(elapsed)
    ]
    timing_lines.append(f"wall_time_mean = {float(np.mean(times))!r}")
    timing_lines.append(f"wall_time_std = {float(np.std(times))!r}")
    (out_dir / "timings.txt").write_text(
        "\n".join(timing_lines) + "\n", encoding="utf-8"
    )

    if condition_blocks:
        lines = []
        for index, block in condition_blocks:
            lines.append(f"repetition {index}:")
            lines.extend(f"  {line}" for line in block)
        (out_dir / "conditions.txt").write_text(
            "\n".join(lines) + "\n", encoding="utf-8"
        )

    return ExperimentOutcome(
        out_dir=out_dir, seeds=seeds, testing_errors=testing_errors,
        final_objectives=final_objectives, elapsed=elapsed,
        condition_lines=condition_lines, summary_lines=summary_lines,
    )


def run_experiment(config):
    """Execute a config; exit status 0 (ok), 2 (invalid), or 3 (diverged)."""
    try:
        outcome = execute_experiment(config)
    except DivergenceError as err:
        print(f"divergence: {err}", file=sys.stderr)
        return 3
    except (UsageError, ParseError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    for line in outcome.condition_lines:
        print(line)
    for line in outcome.summary_lines:
        print(line)
    print(f"wrote {outcome.out_dir}/summary.txt")
    return 0


def comm_sweep(config, k_list, hidden_list):
    """Grid ``k_max`` against hidden width; one row per cell.

    Each row reports the analytic communication ratio against the
    send-everything baseline, the measured scalars per iteration, and
    the mean testing error over the config's repetitions.
    """
    if config.data != "dataset":
        raise UsageError("comm_sweep requires data = dataset")
    if not k_list or not hidden_list:
        raise UsageError("k-list and hidden-list must be non-empty")
    solver = config.solver if config.solver in _DECENTRALIZED else "dmtl-elm"
    rows = []
    for k in k_list:
        for width in hidden_list:
            cell = replace(config, solver=solver, k_max=int(k),
                           hidden=int(width))
            topology = _build_topology(cell)
            errors = []
            comm = 0
            ratio = None
            for seed in cell.rep_seeds():
                bundle = _build_problem(cell, seed)
                outcome = _solve_rep(cell, bundle, topology)
                errors.append(_score(outcome, bundle))
                comm = outcome.comm_per_iteration
                if ratio is None:
                    ratio = comm_ratio_vs_dnsp(
                        int(k), int(width), cell.rank, bundle.input_dim
                    )
            rows.append({
                "k_max": int(k),
                "hidden": int(width),
                "comm_ratio": float(ratio),
                "scalars_per_iteration": int(comm),
                "testing_error_mean": float(np.mean(errors)),
            })
    return rows


def _write_sweep(out_dir, rows):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "sweep.csv"
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("k_max,hidden,comm_ratio,scalars_per_iteration,"
                     "testing_error_mean\n")
        for row in rows:
            handle.write(
                f"{row['k_max']},{row['hidden']},{row['comm_ratio']!r},"
                f"{row['scalars_per_iteration']},"
                f"{row['testing_error_mean']!r}\n"
            )
    return path


def condition_lines_for(config):
    """The descent-condition report the run would print, without running."""
    if config.solver not in _DECENTRALIZED:
        return [f"solver = {config.solver}: no descent conditions to check"]
    variant = _DECENTRALIZED[config.solver]
    bundle = _build_problem(config, config.rep_seeds()[0])
    topology = _build_topology(config)
    params, lipschitz = build_admm_params(config, topology, bundle.problem,
                                          variant)
    report = check_conditions(topology, params, variant, lipschitz)
    return report.lines()


def validate_config(config):
    try:
        lines = condition_lines_for(config)
    except (UsageError, ParseError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    for line in lines:
        print(line)
    print("config ok")
    return 0


def _add_config_flags(parser):
    for key in CONFIG_KEYS:
        parser.add_argument(
            f"--{key.replace('_', '-')}", dest=key, metavar="VALUE",
            help=f"override config key {key}",
        )


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="mtelm",
        description="Multi-task ELM experiments: centralized, decentralized, "
                    "and local baselines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_parser = sub.add_parser("run", help="run an experiment")
    sweep_parser = sub.add_parser(
        "sweep", help="grid k_max x hidden width, tabulating communication "
                      "ratio vs testing error",
    )
    validate_parser = sub.add_parser(
        "validate", help="validate a config and print the descent-condition "
                         "report without running",
    )
    for p in (run_parser, sweep_parser, validate_parser):
        p.add_argument("config", nargs="?", default=None,
                       help="path to a key = value config file")
        _add_config_flags(p)
    sweep_parser.add_argument("--k-list", dest="k_list", default="25,50,100",
                              metavar="INTS", help="comma-separated k_max grid")
    sweep_parser.add_argument("--hidden-list", dest="hidden_list",
                              default="100,200,300", metavar="INTS",
                              help="comma-separated hidden-width grid")
    args = parser.parse_args(argv)

    try:
        file_mapping = load_config_file(args.config) if args.config else {}
        overrides = {
            key: getattr(args, key)
            for key in CONFIG_KEYS
            if getattr(args, key) is not None
        }
        config = build_config(file_mapping, overrides)
    except (UsageError, ParseError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2

    if args.command == "run":
        return run_experiment(config)
    if args.command == "validate":
        return validate_config(config)
    try:
        k_list = _int_list("k-list", args.k_list, minimum=1)
        hidden_list = _int_list("hidden-list", args.hidden_list, minimum=1)
        rows = comm_sweep(config, k_list, hidden_list)
    except DivergenceError as err:
        print(f"divergence: {err}", file=sys.stderr)
        return 3
    except (UsageError, ParseError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    path = _write_sweep(config.output, rows)
    header = f"{'k_max':>6} {'hidden':>7} {'comm_ratio':>12} " \
             f"{'scalars/iter':>13} {'test_error':>11}"
    print(header)
    for row in rows:
        print(f"{row['k_max']:>6} {row['hidden']:>7} "
              f"{row['comm_ratio']:>12.4f} "
              f"{row['scalars_per_iteration']:>13} "
              f"{row['testing_error_mean']:>11.4f}")
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
