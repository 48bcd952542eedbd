"""Dataset ingestion, task construction, and synthetic problem generators.

Classification experiments split a labeled pool into per-agent 3-class
subtasks: each task draws its own random classes and samples, targets are
one-hot over the task's classes, and an optional PCA projection is fitted
on the pooled training rows only.  The synthetic generator reproduces the
uniform(0,1) low-rank regression setup used for the convergence studies.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .central import MtlProblem
from .elm import feature_map
from .errors import ParseError, UsageError
from .numerics import pca_reduce

CLASSES_PER_TASK = 3


@dataclass(frozen=True)
class TaskDataset:
    """Inputs and targets for one task; ``labels`` hold class positions.

    ``x`` is N_t-by-n, ``targets`` N_t-by-d.  For classification tasks
    ``targets`` is one-hot over the task's class list and ``labels[i]``
    is the position of sample i's class in that list.
    """

    x: np.ndarray
    targets: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        targets = np.asarray(self.targets, dtype=float)
        if x.ndim != 2 or targets.ndim != 2:
            raise UsageError("x and targets must be 2-d arrays")
        if x.shape[0] != targets.shape[0]:
            raise UsageError(
                f"x has {x.shape[0]} rows but targets has {targets.shape[0]}"
            )
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "targets", targets)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=int)
            if labels.shape != (x.shape[0],):
                raise UsageError("labels must have one entry per sample")
            object.__setattr__(self, "labels", labels)

    @property
    def class_positions(self):
        """Integer class positions, from ``labels`` or one-hot targets."""
        if self.labels is not None:
            return self.labels
        return np.argmax(self.targets, axis=1)


@dataclass(frozen=True)
class ClassificationTaskSpec:
    """One agent's subtask: its class triple, per-class counts, and seed."""

    classes: tuple
    train_per_class: int
    test_per_class: int
    seed: int = 0

    def __post_init__(self):
        classes = tuple(int(c) for c in np.atleast_1d(self.classes))
        if len(classes) != CLASSES_PER_TASK:
            raise UsageError(
                f"a task classifies exactly {CLASSES_PER_TASK} classes, "
                f"got {len(classes)}"
            )
        if len(set(classes)) != len(classes):
            raise UsageError(f"task classes must be distinct, got {classes}")
        object.__setattr__(self, "classes", classes)
        if self.train_per_class <= 0 or self.test_per_class <= 0:
            raise UsageError("per-class sample counts must be positive")


@dataclass(frozen=True)
class SyntheticSpec:
    """Shape, seed, and normalization switch for the synthetic generator."""

    m: int
    width: int
    n_t: int
    r: int
    d: int
    seed: int
    normalize_columns: bool = True

    def __post_init__(self):
        for name in ("m", "width", "n_t", "r", "d"):
            if getattr(self, name) <= 0:
                raise UsageError(f"{name} must be positive")


# ---------------------------------------------------------------------------
# delimited-text datasets


def load_dataset(path):
    """Read a comma-delimited dataset: feature columns then an integer label.

    Returns ``(x, labels)``; malformed input raises :class:`ParseError`
    naming the offending line.
    """
    rows = []
    labels = []
    width = None
    with open(path, newline="") as handle:
        for lineno, row in enumerate(csv.reader(handle), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 2:
                raise ParseError(f"{path}:{lineno}: need features plus a label")
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(
                    f"{path}:{lineno}: expected {width} columns, got {len(row)}"
                )
            try:
                rows.append([float(v) for v in row[:-1]])
            except ValueError as err:
                raise ParseError(f"{path}:{lineno}: bad feature value ({err})")
            label = row[-1].strip()
            try:
                labels.append(int(label))
            except ValueError:
                raise ParseError(f"{path}:{lineno}: label {label!r} is not an integer")
    if not rows:
        raise ParseError(f"{path}: no samples found")
    return np.asarray(rows, dtype=float), np.asarray(labels, dtype=int)


def save_dataset(path, x, labels):
    """Write ``(x, labels)`` in the format :func:`load_dataset` reads."""
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if x.ndim != 2 or labels.shape != (x.shape[0],):
        raise UsageError("need a 2-d feature matrix and one label per row")
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        for row, label in zip(x, labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


# ---------------------------------------------------------------------------
# classification task construction


def draw_task_specs(labels, m, seed, train_per_class, test_per_class):
    """Draw each task's random class triple from the observed label set."""
    pool = np.unique(labels)
    if pool.size < CLASSES_PER_TASK:
        raise UsageError(
            f"need at least {CLASSES_PER_TASK} distinct classes, got {pool.size}"
        )
    rng = np.random.default_rng(seed)
    return [
        ClassificationTaskSpec(
            classes=tuple(sorted(rng.choice(pool, CLASSES_PER_TASK, replace=False))),
            train_per_class=train_per_class,
            test_per_class=test_per_class,
            seed=int(rng.integers(2**63)),
        )
        for _ in range(m)
    ]


def _one_hot(positions, width):
    out = np.zeros((len(positions), width))
    out[np.arange(len(positions)), positions] = 1.0
    return out


def make_tasks(x, labels, m, seed, train_per_class, test_per_class,
               pca_target=None, task_specs=None):
    """Split ``(x, labels)`` into ``m`` disjoint-within-task 3-class subtasks.

    Each task samples ``train_per_class + test_per_class`` rows per class
    without replacement, so its train and test portions never overlap.
    With ``pca_target`` set, a PCA projection is fitted on the pooled
    training rows of all tasks and applied to every portion; test rows
    never influence the projection.  Returns a list of m
    ``(train TaskDataset, test TaskDataset)`` pairs.  Pass ``task_specs``
    to fix the class triples instead of drawing them from ``seed``.
    """
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if x.ndim != 2 or labels.shape != (x.shape[0],):
        raise UsageError("need a 2-d feature matrix and one label per row")
    if m <= 0:
        raise UsageError("m must be positive")
    if task_specs is None:
        task_specs = draw_task_specs(labels, m, seed, train_per_class, test_per_class)
    elif len(task_specs) != m:
        raise UsageError(f"need {m} task specs, got {len(task_specs)}")

    raw = []
    for spec in task_specs:
        rng = np.random.default_rng(spec.seed)
        need = spec.train_per_class + spec.test_per_class
        train_idx, test_idx, train_pos, test_pos = [], [], [], []
        for position, cls in enumerate(spec.classes):
            available = np.flatnonzero(labels == cls)
            if available.size < need:
                raise UsageError(
                    f"class {cls} has {available.size} samples, task needs {need}"
                )
            chosen = rng.choice(available, size=need, replace=False)
            train_idx.extend(chosen[: spec.train_per_class])
            test_idx.extend(chosen[spec.train_per_class:])
            train_pos.extend([position] * spec.train_per_class)
            test_pos.extend([position] * spec.test_per_class)
        raw.append((np.asarray(train_idx), np.asarray(train_pos),
                    np.asarray(test_idx), np.asarray(test_pos)))

    if pca_target is not None:
        pooled = np.vstack([x[train_idx] for train_idx, _, _, _ in raw])
        mean = pooled.mean(axis=0)
        _, projection, _ = pca_reduce(pooled, pca_target)

        def transform(rows):
            return (rows - mean) @ projection
    else:
        def transform(rows):
            return rows

    pairs = []
    for train_idx, train_pos, test_idx, test_pos in raw:
        train = TaskDataset(
            x=transform(x[train_idx]),
            targets=_one_hot(train_pos, CLASSES_PER_TASK),
            labels=train_pos,
        )
        test = TaskDataset(
            x=transform(x[test_idx]),
            targets=_one_hot(test_pos, CLASSES_PER_TASK),
            labels=test_pos,
        )
        pairs.append((train, test))
    return pairs


def classify_and_score(u, a, layer, test):
    """Misclassified fraction of ``test`` under the trained basis and head.

    Predictions take the argmax over output coordinates of
    ``feature_map(layer, x) @ u @ a``; numpy's argmax already prefers the
    lowest index on ties, which keeps degenerate scores deterministic.
    """
    scores = feature_map(layer, test.x) @ u @ a
    predicted = np.argmax(scores, axis=1)
    return float(np.mean(predicted != test.class_positions))


# ---------------------------------------------------------------------------
# synthetic generators


def make_synthetic(spec, mu1=2.0, mu2=2.0):
    """Uniform(0,1) regression tasks with unit-norm stacked feature columns."""
    rng = np.random.default_rng(spec.seed)
    stacked = rng.uniform(size=(spec.m * spec.n_t, spec.width))
    if spec.normalize_columns:
        stacked = stacked / np.linalg.norm(stacked, axis=0, keepdims=True)
    targets = [rng.uniform(size=(spec.n_t, spec.d)) for _ in range(spec.m)]
    tasks = tuple(zip(np.split(stacked, spec.m), targets))
    return MtlProblem(tasks=tasks, r=spec.r, mu1=mu1, mu2=mu2)


def make_prototype_dataset(n_classes, samples_per_class, ambient_dim,
                           subspace_dim, noise, seed):
    """Labeled classes as noisy copies of prototypes in a shared subspace.

    Every class prototype lives in one ``subspace_dim``-dimensional slice
    of the ambient space, so tasks built over different class triples
    share a low-dimensional structure worth learning jointly.
    """
    if subspace_dim > ambient_dim:
        raise UsageError("subspace_dim cannot exceed ambient_dim")
    if n_classes <= 0 or samples_per_class <= 0 or noise < 0:
        raise UsageError("counts must be positive and noise non-negative")
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.normal(size=(ambient_dim, subspace_dim)))
    prototypes = rng.normal(size=(n_classes, subspace_dim))
    prototypes *= 3.0 / np.linalg.norm(prototypes, axis=1, keepdims=True)
    features = []
    labels = []
    for cls in range(n_classes):
        clean = prototypes[cls] @ basis.T
        features.append(
            clean + noise * rng.normal(size=(samples_per_class, ambient_dim))
        )
        labels.extend([cls] * samples_per_class)
    return np.vstack(features), np.asarray(labels, dtype=int)
