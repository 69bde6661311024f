"""Experiment grids over harvest variants.

Each experiment varies one axis of the task (prototype count, flip
probability, instance count, or plain-learned count), harvests train and
test networks for every variant, trains every classifier on each variant
plus the pooled "combined" set, and scores every (train, test) pairing.
Results land in a flat table keyed by repetition, classifier, and the two
variant names. Experiment 1 sweeps network depth and training-set size on
the standard task instead of dataset variants; experiment 5 mixes the
prototype regime with plain-learned networks, trains on combined only,
and uses the four-class label set.
"""

import time

import numpy as np
from dataclasses import dataclass

from .classifiers import (
    LabeledDataset,
    predict_many,
    train_dam,
    train_nn,
    train_stability_ratio,
    train_svm,
)
from .harvest import StateClass, harvest
from .metrics import confuse, score
from .tasks import TaskConfig, build_task
from .tsne import tsne_embed

__all__ = [
    "COMBINED",
    "ExperimentSpec",
    "ResultRow",
    "ResultsTable",
    "Variant",
    "build_combined",
    "build_variant_pool",
    "default_spec",
    "default_variants",
    "run_experiment",
    "standard_variant",
    "stratified_subsample",
    "tsne_embed",
]

COMBINED = "combined"

_SEED_MASK = (1 << 64) - 1
_ROLE_CODES = {"train": 0, "test": 1}
_TRAIN_TAG = 0x7E57
_KNOWN_CLASSIFIERS = ("stability-ratio", "nn", "svm-linear", "svm-rbf", "dam")


@dataclass(frozen=True)
class Variant:
    """One value on an experiment's axis, stored as task-config overrides."""

    name: str
    num_prototypes: int = 0
    instances_per_prototype: int = 1
    bernoulli_p: float = 0.2
    num_plain_learned: int = 0

    def task_config(self, dimension, seed):
        return TaskConfig(
            dimension=dimension,
            seed=seed,
            num_prototypes=self.num_prototypes,
            instances_per_prototype=self.instances_per_prototype,
            bernoulli_p=self.bernoulli_p,
            num_plain_learned=self.num_plain_learned,
        )


def standard_variant():
    """Standard conditions: 20 prototypes, 100 instances each, p=0.2."""
    return Variant(
        "standard", num_prototypes=20, instances_per_prototype=100, bernoulli_p=0.2
    )


def default_variants(experiment_id):
    """The dataset axis each experiment sweeps."""
    if experiment_id == 1:
        return (standard_variant(),)
    if experiment_id == 2:
        return (
            Variant("prototypes-10", 10, 100, 0.2),
            Variant("prototypes-20", 20, 100, 0.2),
        )
    if experiment_id == 3:
        return (
            Variant("p-0.1", 20, 100, 0.1),
            Variant("p-0.2", 20, 100, 0.2),
            Variant("p-0.3", 20, 100, 0.3),
        )
    if experiment_id == 4:
        return (
            Variant("instances-10", 20, 10, 0.2),
            Variant("instances-20", 20, 20, 0.2),
            Variant("instances-50", 20, 50, 0.2),
            Variant("instances-100", 20, 100, 0.2),
        )
    if experiment_id == 5:
        return (
            Variant("plain-10", num_plain_learned=10),
            Variant("plain-20", num_plain_learned=20),
            Variant("plain-30", num_plain_learned=30),
            standard_variant(),
        )
    raise ValueError("experiment_id must be in 1..5")


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce one experiment run.

    Defaults give the paper-scale grid (10 train and 100 test networks per
    variant, 10 repetitions, 10,000 probes). default_spec(..., "desk")
    shrinks that to a grid one core finishes in minutes. Harvest seeds are
    derived from (seed, variant, role, repetition, network index), so the
    whole results table is a function of this object. An empty variants
    tuple is replaced by default_variants(experiment_id).

    nn_hidden_layers and train_counts only matter for experiment 1, which
    sweeps architectures against training-set sizes on the standard task.
    """

    experiment_id: int
    variants: tuple = ()
    seed: int = 0
    dimension: int = 256
    num_probes: int = 10_000
    trains_per_variant: int = 10
    tests_per_variant: int = 100
    repetitions: int = 10
    normalize: bool = False
    classifiers: tuple = ("stability-ratio", "nn", "svm-linear", "svm-rbf")
    nn_hidden_layers: tuple = ((), (64,), (128, 64), (256, 128, 64))
    train_counts: tuple = (1, 10, 25)
    max_flips: int = 1_000_000

    def __post_init__(self):
        if self.experiment_id not in (1, 2, 3, 4, 5):
            raise ValueError("experiment_id must be in 1..5")
        if not self.variants:
            object.__setattr__(
                self, "variants", default_variants(self.experiment_id)
            )
        object.__setattr__(self, "variants", tuple(self.variants))
        names = [v.name for v in self.variants]
        if len(set(names)) != len(names):
            raise ValueError("variant names must be unique")
        if COMBINED in names:
            raise ValueError(f"{COMBINED!r} is a reserved variant name")
        for v in self.variants:
            v.task_config(self.dimension, 0)  # reject bad combinations early
        if self.experiment_id == 5 and len(self.variants) < 2:
            raise ValueError(
                "experiment 5 trains on the combined pool and needs "
                "at least two variants"
            )
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if self.trains_per_variant < 1 or self.tests_per_variant < 1:
            raise ValueError("network counts must be at least 1")
        if self.num_probes < 0:
            raise ValueError("num_probes must be non-negative")
        object.__setattr__(self, "classifiers", tuple(self.classifiers))
        if not self.classifiers:
            raise ValueError("classifier roster must not be empty")
        for name in self.classifiers:
            if name not in _KNOWN_CLASSIFIERS:
                raise ValueError(
                    f"unknown classifier {name!r}; "
                    f"choose from {_KNOWN_CLASSIFIERS}"
                )
        object.__setattr__(
            self, "nn_hidden_layers", tuple(tuple(h) for h in self.nn_hidden_layers)
        )
        object.__setattr__(self, "train_counts", tuple(self.train_counts))
        if self.experiment_id == 1:
            if not self.nn_hidden_layers or not self.train_counts:
                raise ValueError(
                    "experiment 1 needs nn_hidden_layers and train_counts"
                )
            if min(self.train_counts) < 1:
                raise ValueError("train_counts must be positive")
            if max(self.train_counts) > self.trains_per_variant:
                raise ValueError(
                    "train_counts cannot exceed trains_per_variant"
                )


def default_spec(experiment_id, preset="paper", **overrides):
    """Build the spec for one experiment at paper or desk scale.

    Keyword overrides are passed through to ExperimentSpec, so e.g.
    default_spec(2, "desk", repetitions=5) changes just the repetitions.
    """
    if preset == "paper":
        base = dict(
            trains_per_variant=10,
            tests_per_variant=100,
            repetitions=10,
            num_probes=10_000,
        )
        if experiment_id == 1:
            base["trains_per_variant"] = 25
    elif preset == "desk":
        base = dict(
            trains_per_variant=3,
            tests_per_variant=10,
            repetitions=2,
            num_probes=2000,
        )
        if experiment_id == 1:
            base["train_counts"] = (1, 3)
    else:
        raise ValueError('preset must be "paper" or "desk"')
    base.update(overrides)
    return ExperimentSpec(experiment_id=experiment_id, **base)


def build_variant_pool(spec, variant, role, repetition):
    """Harvest the train or test networks for one variant and repetition.

    Each network gets its own seed sequence keyed by (spec seed, variant
    position, role, repetition, network index), so pools are identical on
    rebuild and independent across cells.
    """
    if role not in _ROLE_CODES:
        raise ValueError('role must be "train" or "test"')
    if repetition < 0:
        raise ValueError("repetition must be non-negative")
    try:
        variant_index = spec.variants.index(variant)
    except ValueError:
        raise ValueError(f"variant {variant.name!r} is not part of the spec")
    count = spec.trains_per_variant if role == "train" else spec.tests_per_variant
    pool = []
    for i in range(count):
        ss = np.random.SeedSequence(
            (
                spec.seed & _SEED_MASK,
                variant_index,
                _ROLE_CODES[role],
                repetition,
                i,
            )
        )
        task_seed = int(ss.generate_state(1, np.uint64)[0])
        probe_rng = np.random.default_rng(ss.spawn(1)[0])
        task = build_task(variant.task_config(spec.dimension, task_seed))
        pool.append(
            harvest(
                task,
                spec.num_probes,
                probe_rng,
                max_flips=spec.max_flips,
                network_id=f"r{repetition}-{variant.name}-{role}{i:03d}",
            )
        )
    return pool


def build_combined(spec, role, repetition):
    """Concatenate every variant's full pool, in variant order.

    The combined set deliberately keeps all networks from each variant,
    so combined-trained classifiers see more data than variant-trained
    ones.
    """
    if len(spec.variants) < 2:
        raise ValueError("combined pools need at least two variants")
    pool = []
    for v in spec.variants:
        pool.extend(build_variant_pool(spec, v, role, repetition))
    return pool


@dataclass(frozen=True)
class ResultRow:
    """One grid cell: a classifier trained on one pool, scored on another.

    report and confusion are None when the cell failed; the error field
    then holds the exception text. wall_time is the cell's training time
    plus this row's evaluation time, in seconds.
    """

    repetition: int
    classifier: str
    train_variant: str
    test_variant: str
    report: object
    confusion: object
    wall_time: float
    error: str = ""


@dataclass
class ResultsTable:
    """Flat list of grid cells plus the spec that produced them."""

    spec: ExperimentSpec
    rows: list

    def select(self, classifier=None, train_variant=None, test_variant=None):
        """Rows matching every given filter."""
        out = []
        for row in self.rows:
            if classifier is not None and row.classifier != classifier:
                continue
            if train_variant is not None and row.train_variant != train_variant:
                continue
            if test_variant is not None and row.test_variant != test_variant:
                continue
            out.append(row)
        return out

    def macro_f1(self, **filters):
        """Macro F1 of matching rows across repetitions, failures dropped."""
        rows = self.select(**filters)
        return np.array(
            [r.report.macro_f1 for r in rows if r.report is not None]
        )


def _train_seed(spec, repetition, slot_a, slot_b):
    ss = np.random.SeedSequence(
        (spec.seed & _SEED_MASK, _TRAIN_TAG, repetition, slot_a, slot_b)
    )
    return int(ss.generate_state(1, np.uint64)[0])


def _fit(name, dataset, seed):
    if name == "stability-ratio":
        return train_stability_ratio(dataset, seed=seed)
    if name == "nn":
        sizes = (dataset.dimension, len(dataset.class_set))
        return train_nn(dataset, sizes, seed=seed)
    if name == "svm-linear":
        return train_svm(dataset, kernel="linear", seed=seed)
    if name == "svm-rbf":
        return train_svm(dataset, kernel="rbf", seed=seed)
    if name == "dam":
        return train_dam(dataset, seed=seed)
    raise ValueError(f"unknown classifier {name!r}")


def _evaluate(model, dataset):
    """Score a model on a labeled dataset.

    The confusion matrix covers the union of true and predicted classes,
    in declaration order, so a model that never emits some class is not
    judged on it unless the test set contains it.
    """
    preds = predict_many(model, dataset.profiles)
    present = set(dataset.labels) | set(preds)
    class_set = tuple(c for c in StateClass if c in present)
    cm = confuse(preds, dataset.labels, class_set)
    return cm, score(cm)


def _pooled_dataset(pools, order, normalize):
    merged = [h for name in order for h in pools[name]]
    return LabeledDataset.from_harvests(merged, normalize=normalize)


def _failed(exc):
    return f"{type(exc).__name__}: {exc}"


def _run_depth_sweep(spec, repetition, train_pool, test_set, say, cache):
    """Experiment 1 inner loop: architectures by training-set sizes."""
    rows = []
    for ai, hidden in enumerate(spec.nn_hidden_layers):
        for ni, count in enumerate(spec.train_counts):
            train_set = LabeledDataset.from_harvests(
                train_pool[:count], normalize=spec.normalize
            )
            sizes = (train_set.dimension, *hidden, len(train_set.class_set))
            label = "nn:" + "x".join(str(s) for s in sizes)
            cell = f"networks-{count}"
            if cache is not None:
                done = cache.get((repetition, label, cell, spec.variants[0].name))
                if done is not None:
                    rows.append(done)
                    continue
            say(f"repetition {repetition}: {label} on {cell}")
            started = time.perf_counter()
            error = ""
            model = None
            try:
                model = train_nn(
                    train_set, sizes, seed=_train_seed(spec, repetition, ai, ni)
                )
            except Exception as exc:
                error = _failed(exc)
            train_time = time.perf_counter() - started
            if model is None:
                row = ResultRow(
                    repetition, label, cell, spec.variants[0].name,
                    None, None, train_time, error,
                )
            else:
                started = time.perf_counter()
                try:
                    cm, report = _evaluate(model, test_set)
                    row = ResultRow(
                        repetition, label, cell, spec.variants[0].name,
                        report, cm,
                        train_time + time.perf_counter() - started, "",
                    )
                except Exception as exc:
                    row = ResultRow(
                        repetition, label, cell, spec.variants[0].name,
                        None, None,
                        train_time + time.perf_counter() - started,
                        _failed(exc),
                    )
            if cache is not None:
                cache.put(row)
            rows.append(row)
    return rows


def _grid_names(spec):
    """Train-axis and test-axis variant names for the non-sweep experiments."""
    names = [v.name for v in spec.variants]
    with_combined = len(spec.variants) >= 2
    test_names = names + ([COMBINED] if with_combined else [])
    if spec.experiment_id == 5:
        train_names = [COMBINED]
    else:
        train_names = names + ([COMBINED] if with_combined else [])
    return train_names, test_names


def run_experiment(spec, progress=None, cell_cache=None):
    """Run the full grid for a spec and return its ResultsTable.

    Train and test pools are harvested once per repetition and shared by
    every classifier. Cell failures (training or evaluation) are recorded
    in the row's error field and the run keeps going. progress, if given,
    receives short status strings.

    cell_cache, if given, must offer get(key) -> ResultRow or None and
    put(row), with key (repetition, classifier, train, test). Cells found
    in the cache are returned as-is and their work is skipped, which is
    how an interrupted run resumes; repetitions whose cells are all
    cached skip harvesting entirely.
    """
    say = progress if progress is not None else (lambda msg: None)
    names = [v.name for v in spec.variants]
    rows = []
    for rep in range(spec.repetitions):
        if spec.experiment_id != 1 and cell_cache is not None:
            train_names, test_names = _grid_names(spec)
            keys = [
                (rep, clf, tn, sn)
                for clf in spec.classifiers
                for tn in train_names
                for sn in test_names
            ]
            cached = [cell_cache.get(key) for key in keys]
            if all(row is not None for row in cached):
                say(f"repetition {rep}: all cells cached")
                rows.extend(cached)
                continue
        say(f"repetition {rep}: harvesting")
        train_pools = {
            v.name: build_variant_pool(spec, v, "train", rep)
            for v in spec.variants
        }
        test_pools = {
            v.name: build_variant_pool(spec, v, "test", rep)
            for v in spec.variants
        }
        if spec.experiment_id == 1:
            test_set = _pooled_dataset(test_pools, names[:1], spec.normalize)
            rows.extend(
                _run_depth_sweep(
                    spec, rep, train_pools[names[0]], test_set, say, cell_cache
                )
            )
            continue
        train_sets = {
            name: _pooled_dataset(train_pools, [name], spec.normalize)
            for name in names
        }
        test_sets = {
            name: _pooled_dataset(test_pools, [name], spec.normalize)
            for name in names
        }
        if len(spec.variants) >= 2:
            train_sets[COMBINED] = _pooled_dataset(
                train_pools, names, spec.normalize
            )
            test_sets[COMBINED] = _pooled_dataset(
                test_pools, names, spec.normalize
            )
        train_pools = test_pools = None  # free the per-network copies
        train_names, test_names = _grid_names(spec)
        for ci, clf in enumerate(spec.classifiers):
            for ti, train_name in enumerate(train_names):
                keys = [(rep, clf, train_name, sn) for sn in test_names]
                cached = {}
                if cell_cache is not None:
                    for key in keys:
                        hit = cell_cache.get(key)
                        if hit is not None:
                            cached[key] = hit
                if len(cached) == len(keys):
                    rows.extend(cached[key] for key in keys)
                    continue
                say(f"repetition {rep}: {clf} on {train_name}")
                started = time.perf_counter()
                error = ""
                model = None
                try:
                    model = _fit(
                        clf, train_sets[train_name],
                        _train_seed(spec, rep, ci, ti),
                    )
                except Exception as exc:
                    error = _failed(exc)
                train_time = time.perf_counter() - started
                for key, test_name in zip(keys, test_names):
                    if key in cached:
                        rows.append(cached[key])
                        continue
                    if model is None:
                        row = ResultRow(
                            rep, clf, train_name, test_name,
                            None, None, train_time, error,
                        )
                    else:
                        started = time.perf_counter()
                        try:
                            cm, report = _evaluate(model, test_sets[test_name])
                            row = ResultRow(
                                rep, clf, train_name, test_name, report, cm,
                                train_time + time.perf_counter() - started, "",
                            )
                        except Exception as exc:
                            row = ResultRow(
                                rep, clf, train_name, test_name, None, None,
                                train_time + time.perf_counter() - started,
                                _failed(exc),
                            )
                    if cell_cache is not None:
                        cell_cache.put(row)
                    rows.append(row)
    return ResultsTable(spec=spec, rows=rows)


def stratified_subsample(labels, cap, rng):
    """Pick at most cap indices, allocated across classes by proportion.

    Every class present keeps at least one row, and no class exceeds its
    own population. Returns sorted indices into labels; when there are at
    most cap rows already, all of them come back.
    """
    labels = list(labels)
    total = len(labels)
    if cap < 1:
        raise ValueError("cap must be positive")
    if total <= cap:
        return np.arange(total)
    by_class = {}
    for i, lab in enumerate(labels):
        by_class.setdefault(lab, []).append(i)
    classes = [c for c in StateClass if c in by_class]
    counts = {c: len(by_class[c]) for c in classes}
    ideal = {c: cap * counts[c] / total for c in classes}
    quota = {c: min(counts[c], max(1, int(ideal[c]))) for c in classes}
    spare = cap - sum(quota.values())
    by_remainder = sorted(
        classes, key=lambda c: ideal[c] - int(ideal[c]), reverse=True
    )
    for c in by_remainder:
        if spare <= 0:
            break
        give = min(spare, counts[c] - quota[c])
        quota[c] += give
        spare -= give
    while sum(quota.values()) > cap:
        # the one-per-class minimum can overshoot when classes are tiny
        widest = max(classes, key=lambda c: quota[c])
        if quota[widest] <= 1:
            break
        quota[widest] -= 1
    picked = [
        rng.choice(np.array(by_class[c]), size=quota[c], replace=False)
        for c in classes
    ]
    return np.sort(np.concatenate(picked))
