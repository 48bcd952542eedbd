import numpy as np
import pytest

from mtelm.admm import theorem_tau
from mtelm.cli import (
    build_admm_params,
    comm_sweep,
    condition_lines_for,
    main,
    run_experiment,
)
from mtelm.config import (
    ExperimentConfig,
    build_config,
    load_config_file,
    parse_config_text,
    parse_rule,
    resolve_rule,
)
from mtelm.data import make_prototype_dataset, save_dataset
from mtelm.errors import ParseError, UsageError
from mtelm.graph import build_topology


SYNTHETIC = {
    "solver": "mtl-elm",
    "data": "synthetic",
    "m": "5",
    "hidden": "5",
    "samples": "10",
    "rank": "2",
    "outputs": "1",
    "k_max": "300",
    "seeds": "0",
    "repetitions": "2",
}


def synthetic_config(tmp_path, **overrides):
    mapping = dict(SYNTHETIC, output=str(tmp_path / "out"))
    mapping.update({k: str(v) for k, v in overrides.items()})
    return build_config(mapping)


@pytest.fixture(scope="module")
def dataset_path(tmp_path_factory):
    x, labels = make_prototype_dataset(5, 16, ambient_dim=10, subspace_dim=3,
                                       noise=0.6, seed=0)
    path = tmp_path_factory.mktemp("data") / "proto.csv"
    save_dataset(path, x, labels)
    return str(path)


def dataset_config(dataset_path, tmp_path, **overrides):
    mapping = {
        "solver": "dmtl-elm",
        "data": "dataset",
        "dataset": dataset_path,
        "m": "2",
        "hidden": "16",
        "rank": "3",
        "train_per_class": "8",
        "test_per_class": "4",
        "topology": "star",
        "k_max": "10",
        "seeds": "1",
        "repetitions": "2",
        "output": str(tmp_path / "out"),
    }
    mapping.update({k: str(v) for k, v in overrides.items()})
    return build_config(mapping)


# ---------------------------------------------------------------------------
# config parsing and validation


def test_parse_config_text():
    mapping = parse_config_text("a = 1\n# comment\n\nb= x y  # trailing\n")
    assert mapping == {"a": "1", "b": "x y"}


def test_parse_config_text_errors():
    with pytest.raises(ParseError, match="line 1"):
        parse_config_text("no separator")
    with pytest.raises(ParseError, match="duplicate"):
        parse_config_text("a = 1\na = 2")


def test_defaults_applied(tmp_path):
    config = synthetic_config(tmp_path)
    assert config.topology == "ring"
    assert config.rho == 1.0 and config.delta == 10.0
    assert config.tau == "auto" and config.prox == "prox-linear"
    assert config.mu1 == 2.0 and config.normalize is True


def test_unknown_key_named(tmp_path):
    with pytest.raises(UsageError, match="wibble"):
        synthetic_config(tmp_path, wibble="3")


def test_zero_mu1_rejected_naming_key(tmp_path):
    with pytest.raises(UsageError, match="mu1"):
        synthetic_config(tmp_path, mu1="0")


def test_missing_required_key_named():
    mapping = dict(SYNTHETIC, output="x")
    del mapping["samples"]
    with pytest.raises(UsageError, match="samples"):
        build_config(mapping)


def test_mode_cross_checks(tmp_path, dataset_path):
    with pytest.raises(UsageError, match="dataset is only valid"):
        synthetic_config(tmp_path, dataset="foo.csv")
    with pytest.raises(UsageError, match="samples is only valid"):
        dataset_config(dataset_path, tmp_path, samples="4")


def test_seed_list_rules(tmp_path):
    config = synthetic_config(tmp_path, seeds="7", repetitions="3")
    assert config.rep_seeds() == (7, 8, 9)
    config = synthetic_config(tmp_path, seeds="4,9,2", repetitions="3")
    assert config.rep_seeds() == (4, 9, 2)
    with pytest.raises(UsageError, match="seeds"):
        synthetic_config(tmp_path, seeds="1,2", repetitions="3")
    with pytest.raises(UsageError, match="seeds"):
        synthetic_config(tmp_path, seeds="-1")


def test_tau_zeta_rule_grammar(tmp_path):
    assert parse_rule("tau", "auto", allow_auto=True) == ("auto", None)
    assert parse_rule("tau", "2.5+degree", allow_auto=True) == ("degree", 2.5)
    assert parse_rule("tau", "17", allow_auto=True) == ("const", 17.0)
    with pytest.raises(UsageError, match="zeta"):
        parse_rule("zeta", "auto", allow_auto=False)
    with pytest.raises(UsageError, match="tau"):
        synthetic_config(tmp_path, tau="sometimes")
    assert resolve_rule("tau", "1+degree", (2, 1, 2)) == (3.0, 2.0, 3.0)
    assert resolve_rule("zeta", "4", (2, 1)) == (4.0, 4.0)
    assert resolve_rule("tau", "auto", (2, 1)) is None


def test_pca_values(tmp_path, dataset_path):
    assert dataset_config(dataset_path, tmp_path, pca="4").pca == 4
    assert dataset_config(dataset_path, tmp_path, pca="0.9").pca == 0.9
    with pytest.raises(UsageError, match="pca"):
        dataset_config(dataset_path, tmp_path, pca="1.5")


def test_custom_topology_requires_edges(tmp_path):
    with pytest.raises(UsageError, match="edges"):
        synthetic_config(tmp_path, topology="custom")
    with pytest.raises(UsageError, match="edges"):
        synthetic_config(tmp_path, edges="some.txt")


def test_load_config_file(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("solver = mtl-elm\nk_max = 7\n")
    assert load_config_file(path) == {"solver": "mtl-elm", "k_max": "7"}
    with pytest.raises(UsageError, match="cannot read"):
        load_config_file(tmp_path / "missing.cfg")


# ---------------------------------------------------------------------------
# parameter resolution


def test_auto_tau_matches_theorem_bound(tmp_path):
    config = synthetic_config(tmp_path, solver="dmtl-elm")
    topology = build_topology("ring", 5)
    from mtelm.data import SyntheticSpec, make_synthetic

    problem = make_synthetic(
        SyntheticSpec(m=5, width=5, n_t=10, r=2, d=1, seed=0), 2.0, 2.0
    )
    params, lipschitz = build_admm_params(config, topology, problem, "exact")
    assert lipschitz is None
    expected = theorem_tau(topology, params, "exact")
    assert params.tau == expected
    assert params.tau == (104.8,) * 5


def test_degree_rule_and_first_order_lipschitz(tmp_path):
    config = synthetic_config(tmp_path, solver="fo-dmtl-elm", tau="20+degree")
    topology = build_topology("star", 5)
    from mtelm.data import SyntheticSpec, make_synthetic

    problem = make_synthetic(
        SyntheticSpec(m=5, width=5, n_t=10, r=2, d=1, seed=0), 2.0, 2.0
    )
    params, lipschitz = build_admm_params(config, topology, problem,
                                          "first-order")
    assert params.tau == (24.0, 21.0, 21.0, 21.0, 21.0)
    assert len(lipschitz) == 5 and all(v > 0 for v in lipschitz)


# ---------------------------------------------------------------------------
# run_experiment


def test_run_writes_monotone_trace(tmp_path, capsys):
    config = synthetic_config(tmp_path)
    assert run_experiment(config) == 0
    out = tmp_path / "out"
    for name in ("trace_rep00.csv", "trace_rep01.csv", "results.csv",
                 "summary.txt", "timings.txt"):
        assert (out / name).exists()
    rows = (out / "trace_rep00.csv").read_text().splitlines()
    assert rows[0].split(",")[:2] == ["k", "objective"]
    objective = [float(line.split(",")[1]) for line in rows[1:]]
    assert len(objective) > 3
    assert all(a >= b - 1e-10 for a, b in zip(objective, objective[1:]))
    assert "testing_error_mean" in capsys.readouterr().out


def test_rerun_summary_byte_identical(tmp_path):
    config = synthetic_config(tmp_path, solver="dmtl-elm", k_max="20")
    assert run_experiment(config) == 0
    first = (tmp_path / "out" / "summary.txt").read_bytes()
    assert run_experiment(config) == 0
    assert (tmp_path / "out" / "summary.txt").read_bytes() == first


def test_summary_matches_trace_recomputation(tmp_path):
    config = synthetic_config(tmp_path, repetitions="3", seeds="5")
    assert run_experiment(config) == 0
    out = tmp_path / "out"
    finals = []
    for i in range(3):
        last = (out / f"trace_rep{i:02d}.csv").read_text().splitlines()[-1]
        finals.append(float(last.split(",")[1]))
    summary = dict(
        line.split(" = ")
        for line in (out / "summary.txt").read_text().splitlines()
    )
    assert summary["final_objective_mean"] == repr(float(np.mean(finals)))
    assert summary["final_objective_std"] == repr(float(np.std(finals)))


def test_dmtl_run_echoes_condition_report(tmp_path, capsys):
    config = synthetic_config(tmp_path, solver="dmtl-elm", k_max="5")
    assert run_experiment(config) == 0
    captured = capsys.readouterr().out
    assert "variant = exact" in captured
    assert (tmp_path / "out" / "conditions.txt").exists()


def test_dataset_run_scores_testing_error(dataset_path, tmp_path):
    config = dataset_config(dataset_path, tmp_path, solver="mtl-elm",
                            k_max="60")
    assert run_experiment(config) == 0
    summary = dict(
        line.split(" = ")
        for line in (tmp_path / "out" / "summary.txt").read_text().splitlines()
    )
    error = float(summary["testing_error_mean"])
    assert 0.0 <= error < 0.5


def test_runtime_usage_error_is_status_2(dataset_path, tmp_path, capsys):
    config = dataset_config(dataset_path, tmp_path, train_per_class="50")
    assert run_experiment(config) == 2
    assert "class" in capsys.readouterr().err


def test_divergence_is_status_3(tmp_path, capsys):
    config = synthetic_config(
        tmp_path, solver="fo-dmtl-elm", prox="standard", m="3",
        tau="0.0000001", zeta="0.0000001", rho="0.00000001", k_max="10",
        repetitions="1",
    )
    assert run_experiment(config) == 3
    assert "divergence" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# sweep


def test_comm_sweep_rows(dataset_path, tmp_path):
    config = dataset_config(dataset_path, tmp_path, repetitions="1",
                            rank="2", prox="standard", tau="5", zeta="5")
    rows = comm_sweep(config, (5, 10), (8, 16))
    assert len(rows) == 4
    by_cell = {(r["k_max"], r["hidden"]): r for r in rows}
    # star(2) has one edge: scalars per iteration = 2 * L * r
    assert by_cell[(5, 8)]["scalars_per_iteration"] == 2 * 8 * 2
    assert by_cell[(10, 16)]["scalars_per_iteration"] == 2 * 16 * 2
    # ratio strictly increasing in both k and hidden width
    assert by_cell[(10, 8)]["comm_ratio"] > by_cell[(5, 8)]["comm_ratio"]
    assert by_cell[(5, 16)]["comm_ratio"] > by_cell[(5, 8)]["comm_ratio"]
    for row in rows:
        assert 0.0 <= row["testing_error_mean"] <= 1.0


def test_comm_sweep_requires_dataset(tmp_path):
    config = synthetic_config(tmp_path)
    with pytest.raises(UsageError, match="dataset"):
        comm_sweep(config, (5,), (8,))


# ---------------------------------------------------------------------------
# command line


def write_config(tmp_path, mapping):
    path = tmp_path / "exp.cfg"
    path.write_text("".join(f"{k} = {v}\n" for k, v in mapping.items()))
    return str(path)


def test_main_run_and_flag_precedence(tmp_path, capsys):
    path = write_config(tmp_path, dict(SYNTHETIC, output=str(tmp_path / "a")))
    assert main(["run", path, "--solver", "local-elm",
                 "--output", str(tmp_path / "b")]) == 0
    captured = capsys.readouterr().out
    assert "solver = local-elm" in captured
    assert (tmp_path / "b" / "summary.txt").exists()
    assert not (tmp_path / "a").exists()


def test_main_invalid_config_is_2(tmp_path, capsys):
    path = write_config(tmp_path, dict(SYNTHETIC, output=str(tmp_path / "o")))
    assert main(["run", path, "--mu2", "-1"]) == 2
    assert "mu2" in capsys.readouterr().err


def test_main_validate(tmp_path, capsys):
    path = write_config(
        tmp_path,
        dict(SYNTHETIC, solver="dmtl-elm", tau="1+degree",
             output=str(tmp_path / "o")),
    )
    assert main(["validate", path]) == 0
    captured = capsys.readouterr().out
    assert "VIOLATED" in captured and "config ok" in captured
    assert not (tmp_path / "o").exists()


def test_main_validate_centralized(tmp_path, capsys):
    path = write_config(tmp_path, dict(SYNTHETIC, output=str(tmp_path / "o")))
    assert main(["validate", path]) == 0
    assert "no descent conditions" in capsys.readouterr().out


def test_main_sweep_writes_table(dataset_path, tmp_path, capsys):
    path = write_config(tmp_path, {
        "solver": "dmtl-elm",
        "data": "dataset",
        "dataset": dataset_path,
        "m": "2",
        "hidden": "8",
        "rank": "2",
        "train_per_class": "8",
        "test_per_class": "4",
        "topology": "star",
        "prox": "standard",
        "tau": "5",
        "zeta": "5",
        "seeds": "1",
        "repetitions": "1",
        "output": str(tmp_path / "sw"),
    })
    assert main(["sweep", path, "--k-list", "4,8", "--hidden-list", "8"]) == 0
    out = capsys.readouterr().out
    assert "comm_ratio" in out
    sweep = (tmp_path / "sw" / "sweep.csv").read_text().splitlines()
    assert sweep[0].startswith("k_max,hidden,")
    assert len(sweep) == 3


def test_main_missing_file_is_2(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.cfg")]) == 2
    assert "cannot read" in capsys.readouterr().err
