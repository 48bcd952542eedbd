"""Flat ``key = value`` experiment configuration.

One file fully specifies an experiment; command-line flags mirror the
keys and take precedence over the file.  Every value is validated up
front and rejections name the offending key, so a bad line in an
archived config is quick to locate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParseError, UsageError

SOLVERS = ("local-elm", "mtl-elm", "dmtl-elm", "fo-dmtl-elm")
DATA_MODES = ("synthetic", "dataset")
TOPOLOGIES = ("ring", "star", "path", "custom")
PROX_MODES = ("prox-linear", "standard")

CONFIG_KEYS = (
    "solver", "data", "m", "hidden", "rank",
    "samples", "outputs", "normalize",
    "dataset", "train_per_class", "test_per_class", "pca",
    "topology", "edges",
    "rho", "delta", "gamma_cap", "tau", "zeta", "sigma", "prox",
    "mu1", "mu2", "k_max", "seeds", "repetitions", "output",
)

DEFAULTS = {
    "topology": "ring",
    "edges": "",
    "normalize": "true",
    "pca": "",
    "rho": "1.0",
    "delta": "10.0",
    "gamma_cap": "1.0",
    "tau": "auto",
    "zeta": "1.0",
    "sigma": "",
    "prox": "prox-linear",
    "mu1": "2.0",
    "mu2": "2.0",
    "k_max": "100",
    "seeds": "0",
    "repetitions": "1",
    "output": "runs/experiment",
}

_DATASET_ONLY = ("dataset", "train_per_class", "test_per_class", "pca")
_SYNTHETIC_ONLY = ("samples", "outputs", "normalize")


def _int_value(key, raw, minimum=None):
    try:
        value = int(str(raw).strip())
    except ValueError:
        raise UsageError(f"{key} must be an integer, got {raw!r}")
    if minimum is not None and value < minimum:
        raise UsageError(f"{key} must be >= {minimum}, got {value}")
    return value


def _float_value(key, raw, positive=False):
    try:
        value = float(str(raw).strip())
    except ValueError:
        raise UsageError(f"{key} must be a number, got {raw!r}")
    if not np.isfinite(value):
        raise UsageError(f"{key} must be finite, got {raw!r}")
    if positive and not value > 0:
        raise UsageError(f"{key} must be positive, got {value}")
    return value


def _choice_value(key, raw, options):
    value = str(raw).strip()
    if value not in options:
        raise UsageError(f"{key} must be one of {', '.join(options)}, got {value!r}")
    return value


def _bool_value(key, raw):
    value = str(raw).strip().lower()
    if value in ("true", "1", "yes"):
        return True
    if value in ("false", "0", "no"):
        return False
    raise UsageError(f"{key} must be true or false, got {raw!r}")


def _int_list(key, raw, minimum=None):
    parts = [p.strip() for p in str(raw).split(",") if p.strip()]
    if not parts:
        raise UsageError(f"{key} must list at least one integer")
    return tuple(_int_value(key, p, minimum=minimum) for p in parts)


def _pca_value(key, raw):
    value = str(raw).strip()
    if not value:
        return None
    if any(c in value for c in ".eE"):
        fraction = _float_value(key, value, positive=True)
        if fraction > 1.0:
            raise UsageError(f"{key} fraction must be in (0, 1], got {fraction}")
        return fraction
    return _int_value(key, value, minimum=1)


def parse_rule(key, raw, allow_auto):
    """Parse a per-agent parameter rule: ``auto``, a number, or ``c+degree``."""
    value = str(raw).strip()
    if value == "auto":
        if not allow_auto:
            raise UsageError(f"{key} does not support 'auto'")
        return ("auto", None)
    if value.endswith("+degree"):
        return ("degree", _float_value(key, value[: -len("+degree")]))
    return ("const", _float_value(key, value))


def resolve_rule(key, raw, degrees):
    """Per-agent values for a rule, or ``None`` when the rule is ``auto``."""
    kind, base = parse_rule(key, raw, allow_auto=True)
    if kind == "auto":
        return None
    if kind == "degree":
        return tuple(base + d for d in degrees)
    return (base,) * len(degrees)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment settings; build via :meth:`from_mapping`."""

    solver: str
    data: str
    m: int
    hidden: int
    rank: int
    mu1: float
    mu2: float
    k_max: int
    seeds: tuple
    repetitions: int
    output: str
    topology: str
    edges: str | None
    samples: int | None
    outputs: int | None
    normalize: bool
    dataset: str | None
    train_per_class: int | None
    test_per_class: int | None
    pca: float | None
    rho: float
    delta: float
    gamma_cap: float
    tau: str
    zeta: str
    sigma: float | None
    prox: str

    @classmethod
    def from_mapping(cls, mapping, provided=None):
        """Validate a merged key-value mapping into a config.

        ``provided`` lists the keys the user actually set (as opposed to
        defaults); mode cross-checks only reject keys the user supplied.
        """
        unknown = sorted(set(mapping) - set(CONFIG_KEYS))
        if unknown:
            raise UsageError(f"unknown config key {unknown[0]!r}")
        provided = set(CONFIG_KEYS) if provided is None else set(provided)

        def need(key):
            value = str(mapping.get(key, "")).strip()
            if not value:
                raise UsageError(f"{key} is required")
            return value

        def get(key):
            return mapping.get(key, DEFAULTS.get(key, ""))

        solver = _choice_value("solver", need("solver"), SOLVERS)
        data = _choice_value("data", need("data"), DATA_MODES)
        m = _int_value("m", need("m"), minimum=1)
        hidden = _int_value("hidden", need("hidden"), minimum=1)
        rank = _int_value("rank", need("rank"), minimum=1)

        if data == "synthetic":
            for key in _DATASET_ONLY:
                if key in provided:
                    raise UsageError(f"{key} is only valid when data = dataset")
            samples = _int_value("samples", need("samples"), minimum=1)
            outputs = _int_value("outputs", need("outputs"), minimum=1)
            normalize = _bool_value("normalize", get("normalize"))
            dataset = train_per_class = test_per_class = pca = None
        else:
            for key in _SYNTHETIC_ONLY:
                if key in provided:
                    raise UsageError(f"{key} is only valid when data = synthetic")
            dataset = need("dataset")
            train_per_class = _int_value("train_per_class", need("train_per_class"), 1)
            test_per_class = _int_value("test_per_class", need("test_per_class"), 1)
            pca = _pca_value("pca", get("pca"))
            samples = outputs = None
            normalize = True

        topology = _choice_value("topology", get("topology"), TOPOLOGIES)
        edges = str(get("edges")).strip() or None
        if topology == "custom" and edges is None:
            raise UsageError("edges is required when topology = custom")
        if topology != "custom" and edges is not None:
            raise UsageError("edges is only valid when topology = custom")

        rho = _float_value("rho", get("rho"), positive=True)
        delta = _float_value("delta", get("delta"), positive=True)
        gamma_cap = _float_value("gamma_cap", get("gamma_cap"), positive=True)
        parse_rule("tau", get("tau"), allow_auto=True)
        parse_rule("zeta", get("zeta"), allow_auto=False)
        sigma_raw = str(get("sigma")).strip()
        sigma = _float_value("sigma", sigma_raw, positive=True) if sigma_raw else None
        prox = _choice_value("prox", get("prox"), PROX_MODES)

        mu1 = _float_value("mu1", get("mu1"), positive=True)
        mu2 = _float_value("mu2", get("mu2"), positive=True)
        k_max = _int_value("k_max", get("k_max"), minimum=0)
        repetitions = _int_value("repetitions", get("repetitions"), minimum=1)
        seeds = _int_list("seeds", get("seeds"), minimum=0)
        if len(seeds) not in (1, repetitions):
            raise UsageError(
                f"seeds must list one base seed or exactly {repetitions} "
                f"entries, got {len(seeds)}"
            )
        output = str(get("output")).strip()
        if not output:
            raise UsageError("output is required")

        return cls(
            solver=solver, data=data, m=m, hidden=hidden, rank=rank,
            mu1=mu1, mu2=mu2, k_max=k_max, seeds=seeds,
            repetitions=repetitions, output=output,
            topology=topology, edges=edges,
            samples=samples, outputs=outputs, normalize=normalize,
            dataset=dataset, train_per_class=train_per_class,
            test_per_class=test_per_class, pca=pca,
            rho=rho, delta=delta, gamma_cap=gamma_cap,
            tau=str(get("tau")).strip(), zeta=str(get("zeta")).strip(),
            sigma=sigma, prox=prox,
        )

    def rep_seeds(self):
        """One seed per repetition: explicit list or base + offset."""
        if len(self.seeds) == self.repetitions:
            return self.seeds
        return tuple(self.seeds[0] + i for i in range(self.repetitions))


def parse_config_text(text, source="<config>"):
    """Parse ``key = value`` lines; ``#`` comments and blanks are skipped."""
    mapping = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ParseError(f"{source}: line {lineno}: expected 'key = value', got {raw!r}")
        key = key.strip()
        if key in mapping:
            raise ParseError(f"{source}: line {lineno}: duplicate key {key!r}")
        mapping[key] = value.strip()
    return mapping


def load_config_file(path):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as err:
        raise UsageError(f"cannot read config file {path}: {err}")
    return parse_config_text(text, source=str(path))


def build_config(file_mapping=None, overrides=None):
    """Merge defaults, a config file, and overrides (highest precedence)."""
    merged = dict(DEFAULTS)
    provided = set()
    for source in (file_mapping, overrides):
        if source:
            merged.update(source)
            provided.update(source)
    return ExperimentConfig.from_mapping(merged, provided)
