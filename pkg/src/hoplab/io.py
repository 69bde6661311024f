"""Text file formats for tasks, harvests, models, and experiment results.

Every format is line-oriented ASCII: a first line naming the format and
version, key=value header lines, then data rows. Floats are written with
17 significant digits so that save followed by load reproduces doubles
exactly; bipolar states are written as strings of '+' and '-'. All writes
go through a temp file and an atomic rename, so readers never see a
partial file and interrupted experiment runs can resume from the cells
that finished. Wall-clock fields are the one thing not reproduced bit
for bit between runs.
"""

import csv
import io as _stdio
import os
import tempfile
import zlib
from pathlib import Path

import numpy as np

from .classifiers import (
    DamModel,
    DeepModel,
    KernelModel,
    LinearModel,
    StabilityRatioModel,
)
from .experiments import ExperimentSpec, ResultRow, ResultsTable, Variant
from .harvest import HarvestSet, ProbeStats, StateClass
from .metrics import ConfusionMatrix, score
from .tasks import PrototypeTask, TaskConfig

__all__ = [
    "CellStore",
    "FormatError",
    "atomic_write",
    "load_harvest",
    "load_model",
    "load_results",
    "load_spec",
    "load_task",
    "report_text",
    "results_csv_text",
    "save_harvest",
    "save_model",
    "save_results",
    "save_spec",
    "save_task",
]

_FMT = "%.17g"

_TASK_MAGIC = "hoplab-task v1"
_PROFILES_MAGIC = "hoplab-profiles v1"
_MODEL_MAGIC = "hoplab-model v1"
_SPEC_MAGIC = "hoplab-experiment v1"
_CELL_MAGIC = "hoplab-cell v1"
_REPORT_MAGIC = "hoplab-report v1"

RESULTS_CSV_COLUMNS = (
    "repetition",
    "classifier",
    "train_variant",
    "test_variant",
    "accuracy",
    "micro_f1",
    "macro_f1",
    "wall_time",
    "error",
)


class FormatError(ValueError):
    """A file does not parse as the format it claims to be."""


def atomic_write(path, text):
    """Write text to path through a same-directory temp file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _fmt(value):
    return _FMT % float(value)


def _fmt_row(values):
    return " ".join(_FMT % v for v in np.asarray(values, dtype=np.float64).ravel())


def _state_token(row):
    return "".join("+" if v > 0 else "-" for v in row)


def _parse_state(token, n, where):
    if len(token) != n:
        raise FormatError(f"{where}: state has {len(token)} neurons, expected {n}")
    bad = set(token) - {"+", "-"}
    if bad:
        raise FormatError(f"{where}: state contains {sorted(bad)}, only '+'/'-' allowed")
    return np.array([1 if ch == "+" else -1 for ch in token], dtype=np.int8)


class _Lines:
    """A parsed file as a cursor over non-empty lines."""

    def __init__(self, path, magic):
        self.name = str(path)
        try:
            raw = Path(path).read_text()
        except OSError as exc:
            raise FormatError(f"cannot read {path}: {exc}")
        self.lines = [ln.rstrip("\n") for ln in raw.splitlines()]
        self.pos = 0
        first = self.next(f"missing header, expected {magic!r}")
        if first != magic:
            raise FormatError(f"{self.name}: expected {magic!r}, found {first!r}")

    def where(self):
        return f"{self.name}:{self.pos}"

    def done(self):
        return self.pos >= len(self.lines)

    def peek(self):
        return None if self.done() else self.lines[self.pos]

    def next(self, why="unexpected end of file"):
        if self.done():
            raise FormatError(f"{self.name}: {why}")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def header(self):
        """Consume key=value lines until the first non-header line."""
        fields = {}
        while not self.done():
            line = self.peek()
            if "=" not in line or line.split(" ", 1)[0] in ("matrix", "vector"):
                break
            key, _, value = line.partition("=")
            key = key.strip()
            if key in fields:
                raise FormatError(f"{self.where()}: duplicate field {key!r}")
            fields[key] = value.strip()
            self.pos += 1
        return fields


def _need(fields, key, where):
    if key not in fields:
        raise FormatError(f"{where}: missing field {key!r}")
    return fields[key]


def _as_int(fields, key, where):
    raw = _need(fields, key, where)
    try:
        return int(raw)
    except ValueError:
        raise FormatError(f"{where}: field {key!r} is not an integer: {raw!r}")


def _as_float(fields, key, where):
    raw = _need(fields, key, where)
    try:
        return float(raw)
    except ValueError:
        raise FormatError(f"{where}: field {key!r} is not a number: {raw!r}")


def _as_bool(fields, key, where):
    raw = _need(fields, key, where)
    if raw not in ("0", "1"):
        raise FormatError(f"{where}: field {key!r} must be 0 or 1, got {raw!r}")
    return raw == "1"


def _parse_class(token, where):
    try:
        return StateClass(token)
    except ValueError:
        allowed = ", ".join(c.value for c in StateClass)
        raise FormatError(f"{where}: unknown class {token!r}, expected one of {allowed}")


def _class_set_text(class_set):
    return ",".join(c.value for c in class_set)


def _parse_class_set(raw, where):
    if not raw:
        raise FormatError(f"{where}: empty class set")
    return tuple(_parse_class(tok, where) for tok in raw.split(","))


def _float_row(line, count, where):
    parts = line.split()
    if len(parts) != count:
        raise FormatError(f"{where}: expected {count} values, found {len(parts)}")
    try:
        return np.array([float(p) for p in parts], dtype=np.float64)
    except ValueError:
        raise FormatError(f"{where}: row contains a non-numeric value")


# ------------------------------------------------------------------ tasks

_TASK_FIELDS = (
    "dimension",
    "seed",
    "num_prototypes",
    "instances_per_prototype",
    "bernoulli_p",
    "num_plain_learned",
)


def task_config_text(config):
    return "\n".join(
        (
            f"dimension={config.dimension}",
            f"seed={config.seed}",
            f"num_prototypes={config.num_prototypes}",
            f"instances_per_prototype={config.instances_per_prototype}",
            f"bernoulli_p={_fmt(config.bernoulli_p)}",
            f"num_plain_learned={config.num_plain_learned}",
        )
    )


def parse_task_config(fields, where):
    """Build a TaskConfig from header fields, naming whatever is wrong."""
    kwargs = {
        "dimension": _as_int(fields, "dimension", where),
        "seed": _as_int(fields, "seed", where),
    }
    if "num_prototypes" in fields:
        kwargs["num_prototypes"] = _as_int(fields, "num_prototypes", where)
    if "instances_per_prototype" in fields:
        kwargs["instances_per_prototype"] = _as_int(
            fields, "instances_per_prototype", where
        )
    if "bernoulli_p" in fields:
        kwargs["bernoulli_p"] = _as_float(fields, "bernoulli_p", where)
    if "num_plain_learned" in fields:
        kwargs["num_plain_learned"] = _as_int(fields, "num_plain_learned", where)
    try:
        return TaskConfig(**kwargs)
    except ValueError as exc:
        raise FormatError(f"{where}: {exc}")


def save_task(task, path):
    out = [_TASK_MAGIC, task_config_text(task.config)]
    for row in task.prototypes:
        out.append(f"prototype {_state_token(row)}")
    for row in task.learned:
        out.append(f"learned {_state_token(row)}")
    atomic_write(path, "\n".join(out) + "\n")


def load_task(path):
    lines = _Lines(path, _TASK_MAGIC)
    fields = lines.header()
    for key in _TASK_FIELDS:
        _need(fields, key, lines.name)
    for key in fields:
        if key not in _TASK_FIELDS:
            raise FormatError(f"{lines.name}: unknown field {key!r}")
    config = parse_task_config(fields, lines.name)
    n = config.dimension
    prototypes, learned = [], []
    while not lines.done():
        where = lines.where()
        parts = lines.next().split(" ", 1)
        if len(parts) != 2 or parts[0] not in ("prototype", "learned"):
            raise FormatError(f"{where}: expected 'prototype <state>' or 'learned <state>'")
        state = _parse_state(parts[1], n, where)
        (prototypes if parts[0] == "prototype" else learned).append(state)
    prototypes = (
        np.array(prototypes, dtype=np.int8)
        if prototypes
        else np.zeros((0, n), dtype=np.int8)
    )
    learned = (
        np.array(learned, dtype=np.int8) if learned else np.zeros((0, n), dtype=np.int8)
    )
    if prototypes.shape[0] != config.num_prototypes:
        raise FormatError(
            f"{lines.name}: {prototypes.shape[0]} prototype rows, "
            f"config says {config.num_prototypes}"
        )
    expect = (
        config.num_prototypes * config.instances_per_prototype
        if config.num_prototypes
        else config.num_plain_learned
    )
    if learned.shape[0] != expect:
        raise FormatError(
            f"{lines.name}: {learned.shape[0]} learned rows, config says {expect}"
        )
    return PrototypeTask(config=config, prototypes=prototypes, learned=learned)


# ------------------------------------------------------------------ harvests

_STATS_FIELDS = (
    "probes",
    "to_prototype",
    "to_learned",
    "to_spurious",
    "to_negated_prototype",
    "to_negated_learned",
    "unique_spurious",
    "cap_exceeded",
    "total_flips",
)


def save_harvest(harvest_set, path):
    hs = harvest_set
    out = [
        _PROFILES_MAGIC,
        f"dimension={hs.profiles.shape[1]}",
        f"normalized={1 if hs.normalized else 0}",
        f"network_id={hs.network_id}",
    ]
    for key in _STATS_FIELDS:
        out.append(f"stat_{key}={getattr(hs.probe_stats, key)}")
    for line in task_config_text(hs.task_config).splitlines():
        out.append(f"task_{line}")
    for label, row in zip(hs.labels, hs.profiles):
        out.append(f"{label.value} {_fmt_row(row)}")
    atomic_write(path, "\n".join(out) + "\n")


def load_harvest(path):
    lines = _Lines(path, _PROFILES_MAGIC)
    fields = lines.header()
    n = _as_int(fields, "dimension", lines.name)
    normalized = _as_bool(fields, "normalized", lines.name)
    network_id = _need(fields, "network_id", lines.name)
    stats = ProbeStats(
        **{key: _as_int(fields, f"stat_{key}", lines.name) for key in _STATS_FIELDS}
    )
    task_fields = {
        key[len("task_"):]: value
        for key, value in fields.items()
        if key.startswith("task_")
    }
    config = parse_task_config(task_fields, lines.name)
    if config.dimension != n:
        raise FormatError(
            f"{lines.name}: dimension={n} but task_dimension={config.dimension}"
        )
    labels, rows = [], []
    while not lines.done():
        where = lines.where()
        parts = lines.next().split(" ", 1)
        if len(parts) != 2:
            raise FormatError(f"{where}: expected '<class> <{n} values>'")
        label = _parse_class(parts[0], where)
        row = _float_row(parts[1], n, where)
        if not np.all(np.isfinite(row)):
            raise FormatError(f"{where}: profile contains a non-finite value")
        if label is StateClass.SPURIOUS and not normalized and row.max() > 0:
            raise FormatError(
                f"{where}: spurious profile with a positive energy entry"
            )
        labels.append(label)
        rows.append(row)
    if not rows:
        raise FormatError(f"{lines.name}: no profile rows")
    return HarvestSet(
        network_id=network_id,
        task_config=config,
        profiles=np.array(rows, dtype=np.float64),
        labels=labels,
        probe_stats=stats,
        normalized=normalized,
    )


def load_harvests(paths):
    """Load several profile files, requiring one consistent dimension."""
    sets = [load_harvest(p) for p in paths]
    dims = {hs.profiles.shape[1] for hs in sets}
    if len(dims) > 1:
        raise FormatError(
            f"profile files disagree on dimension: {sorted(dims)}"
        )
    flags = {hs.normalized for hs in sets}
    if len(flags) > 1:
        raise FormatError("profile files mix normalized and raw energies")
    return sets


# ------------------------------------------------------------------ matrices


def _matrix_lines(name, array):
    array = np.asarray(array, dtype=np.float64)
    if array.ndim == 1:
        yield f"vector {name} {array.shape[0]}"
        yield _fmt_row(array)
        return
    yield f"matrix {name} {array.shape[0]} {array.shape[1]}"
    for row in array:
        yield _fmt_row(row)


def _read_blocks(lines):
    blocks = {}
    while not lines.done():
        where = lines.where()
        head = lines.next().split()
        if head[0] == "vector" and len(head) == 3:
            name, count = head[1], int(head[2])
            blocks[name] = _float_row(lines.next(), count, lines.where())
        elif head[0] == "matrix" and len(head) == 4:
            name, rows, cols = head[1], int(head[2]), int(head[3])
            data = [
                _float_row(lines.next(), cols, lines.where()) for _ in range(rows)
            ]
            blocks[name] = (
                np.array(data) if data else np.zeros((0, cols), dtype=np.float64)
            )
        else:
            raise FormatError(f"{where}: expected a matrix or vector block")
    return blocks


def _block(blocks, name, where):
    if name not in blocks:
        raise FormatError(f"{where}: missing block {name!r}")
    return blocks[name]


# ------------------------------------------------------------------ models


def save_model(model, path):
    out = [_MODEL_MAGIC]

    def header(model_name, **extra):
        out.append(f"model={model_name}")
        for key, value in extra.items():
            out.append(f"{key}={value}")
        out.append(f"normalized={1 if model.normalized else 0}")
        out.append(f"class_set={_class_set_text(model.class_set)}")

    if isinstance(model, LinearModel):
        header("linear", kind=model.kind)
        out.extend(_matrix_lines("coef", model.coef))
        out.extend(_matrix_lines("bias", model.bias))
    elif isinstance(model, StabilityRatioModel):
        header("stability-ratio", k=model.k, l2_strength=_fmt(model.l2_strength))
        out.extend(_matrix_lines("coef", model.coef))
        out.extend(_matrix_lines("bias", model.bias))
    elif isinstance(model, DeepModel):
        header("deep", layer_sizes=",".join(str(s) for s in model.layer_sizes))
        for i, (w, b) in enumerate(zip(model.weights, model.biases)):
            out.extend(_matrix_lines(f"w{i}", w))
            out.extend(_matrix_lines(f"b{i}", b))
    elif isinstance(model, KernelModel):
        header("kernel", gamma=_fmt(model.gamma))
        out.extend(_matrix_lines("supports", model.supports))
        out.extend(_matrix_lines("dual", model.dual))
        out.extend(_matrix_lines("bias", model.bias))
    elif isinstance(model, DamModel):
        header("dam")
        out.extend(_matrix_lines("memories", model.memories))
        out.extend(_matrix_lines("output", model.output))
        out.extend(_matrix_lines("hidden_bias", model.hidden_bias))
        out.extend(_matrix_lines("bias", model.bias))
    else:
        raise TypeError(f"cannot serialize model of type {type(model).__name__}")
    atomic_write(path, "\n".join(out) + "\n")


def load_model(path):
    lines = _Lines(path, _MODEL_MAGIC)
    fields = lines.header()
    where = lines.name
    model_name = _need(fields, "model", where)
    normalized = _as_bool(fields, "normalized", where)
    class_set = _parse_class_set(_need(fields, "class_set", where), where)
    blocks = _read_blocks(lines)
    if model_name == "linear":
        return LinearModel(
            coef=_block(blocks, "coef", where),
            bias=_block(blocks, "bias", where),
            kind=_need(fields, "kind", where),
            class_set=class_set,
            normalized=normalized,
        )
    if model_name == "stability-ratio":
        return StabilityRatioModel(
            k=_as_int(fields, "k", where),
            coef=_block(blocks, "coef", where),
            bias=_block(blocks, "bias", where),
            class_set=class_set,
            normalized=normalized,
            l2_strength=_as_float(fields, "l2_strength", where),
        )
    if model_name == "deep":
        raw = _need(fields, "layer_sizes", where)
        try:
            sizes = tuple(int(tok) for tok in raw.split(","))
        except ValueError:
            raise FormatError(f"{where}: bad layer_sizes {raw!r}")
        weights, biases = [], []
        for i in range(len(sizes) - 1):
            weights.append(_block(blocks, f"w{i}", where))
            biases.append(_block(blocks, f"b{i}", where))
        return DeepModel(
            layer_sizes=sizes,
            weights=weights,
            biases=biases,
            class_set=class_set,
            normalized=normalized,
        )
    if model_name == "kernel":
        return KernelModel(
            supports=_block(blocks, "supports", where),
            dual=_block(blocks, "dual", where),
            gamma=_as_float(fields, "gamma", where),
            bias=_block(blocks, "bias", where),
            class_set=class_set,
            normalized=normalized,
        )
    if model_name == "dam":
        return DamModel(
            memories=_block(blocks, "memories", where),
            output=_block(blocks, "output", where),
            hidden_bias=_block(blocks, "hidden_bias", where),
            bias=_block(blocks, "bias", where),
            class_set=class_set,
            normalized=normalized,
        )
    raise FormatError(f"{where}: unknown model {model_name!r}")


# ------------------------------------------------------------------ reports


def report_text(report, cm):
    """Human-readable score report plus the exact confusion counts."""
    out = [
        _REPORT_MAGIC,
        f"classes={_class_set_text(cm.class_set)}",
        f"accuracy={_fmt(report.accuracy)}",
        f"micro_f1={_fmt(report.micro_f1)}",
        f"macro_f1={_fmt(report.macro_f1)}",
    ]
    for cls in cm.class_set:
        scores = report.per_class[cls]
        out.append(
            f"class {cls.value} precision={_fmt(scores.precision)} "
            f"recall={_fmt(scores.recall)} f1={_fmt(scores.f1)}"
        )
    out.append(f"matrix confusion {cm.counts.shape[0]} {cm.counts.shape[1]}")
    for row in cm.counts:
        out.append(" ".join(str(int(v)) for v in row))
    return "\n".join(out) + "\n"


def _confusion_lines(cm):
    yield f"classes={_class_set_text(cm.class_set)}"
    yield f"matrix confusion {cm.counts.shape[0]} {cm.counts.shape[1]}"
    for row in cm.counts:
        yield " ".join(str(int(v)) for v in row)


def _parse_confusion(lines, fields):
    where = lines.name
    class_set = _parse_class_set(_need(fields, "classes", where), where)
    head = lines.next("missing confusion matrix").split()
    k = len(class_set)
    if head != ["matrix", "confusion", str(k), str(k)]:
        raise FormatError(f"{lines.where()}: malformed confusion header")
    counts = np.array(
        [
            _float_row(lines.next(), k, lines.where()).astype(np.int64)
            for _ in range(k)
        ],
        dtype=np.int64,
    )
    return ConfusionMatrix(class_set=class_set, counts=counts)


# ------------------------------------------------------------------ specs


def save_spec(spec, path):
    out = [
        _SPEC_MAGIC,
        f"experiment_id={spec.experiment_id}",
        f"seed={spec.seed}",
        f"dimension={spec.dimension}",
        f"num_probes={spec.num_probes}",
        f"trains_per_variant={spec.trains_per_variant}",
        f"tests_per_variant={spec.tests_per_variant}",
        f"repetitions={spec.repetitions}",
        f"normalize={1 if spec.normalize else 0}",
        f"classifiers={','.join(spec.classifiers)}",
        "nn_hidden_layers="
        + "|".join("(" + ",".join(str(s) for s in h) + ")" for h in spec.nn_hidden_layers),
        f"train_counts={','.join(str(c) for c in spec.train_counts)}",
        f"max_flips={spec.max_flips}",
    ]
    for v in spec.variants:
        out.append(
            f"variant {v.name} {v.num_prototypes} {v.instances_per_prototype} "
            f"{_fmt(v.bernoulli_p)} {v.num_plain_learned}"
        )
    atomic_write(path, "\n".join(out) + "\n")


def _parse_hidden_layers(raw, where):
    groups = []
    for tok in raw.split("|"):
        tok = tok.strip()
        if not (tok.startswith("(") and tok.endswith(")")):
            raise FormatError(f"{where}: bad nn_hidden_layers group {tok!r}")
        inner = tok[1:-1].strip()
        if not inner:
            groups.append(())
            continue
        try:
            groups.append(tuple(int(p) for p in inner.split(",")))
        except ValueError:
            raise FormatError(f"{where}: bad nn_hidden_layers group {tok!r}")
    return tuple(groups)


def load_spec(path):
    lines = _Lines(path, _SPEC_MAGIC)
    fields = lines.header()
    where = lines.name
    variants = []
    while not lines.done():
        parts = lines.next().split()
        if len(parts) != 6 or parts[0] != "variant":
            raise FormatError(f"{lines.where()}: expected 'variant <name> <protos> <instances> <p> <plain>'")
        try:
            variants.append(
                Variant(
                    name=parts[1],
                    num_prototypes=int(parts[2]),
                    instances_per_prototype=int(parts[3]),
                    bernoulli_p=float(parts[4]),
                    num_plain_learned=int(parts[5]),
                )
            )
        except ValueError:
            raise FormatError(f"{lines.where()}: malformed variant row")
    try:
        return ExperimentSpec(
            experiment_id=_as_int(fields, "experiment_id", where),
            variants=tuple(variants),
            seed=_as_int(fields, "seed", where),
            dimension=_as_int(fields, "dimension", where),
            num_probes=_as_int(fields, "num_probes", where),
            trains_per_variant=_as_int(fields, "trains_per_variant", where),
            tests_per_variant=_as_int(fields, "tests_per_variant", where),
            repetitions=_as_int(fields, "repetitions", where),
            normalize=_as_bool(fields, "normalize", where),
            classifiers=tuple(_need(fields, "classifiers", where).split(",")),
            nn_hidden_layers=_parse_hidden_layers(
                _need(fields, "nn_hidden_layers", where), where
            ),
            train_counts=tuple(
                int(c) for c in _need(fields, "train_counts", where).split(",")
            ),
            max_flips=_as_int(fields, "max_flips", where),
        )
    except ValueError as exc:
        raise FormatError(f"{where}: {exc}")


# ------------------------------------------------------------------ results


def results_csv_text(rows):
    buffer = _stdio.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(RESULTS_CSV_COLUMNS)
    for row in rows:
        if row.report is None:
            scores = ("", "", "")
        else:
            scores = (
                _fmt(row.report.accuracy),
                _fmt(row.report.micro_f1),
                _fmt(row.report.macro_f1),
            )
        writer.writerow(
            (
                row.repetition,
                row.classifier,
                row.train_variant,
                row.test_variant,
                *scores,
                _fmt(row.wall_time),
                row.error,
            )
        )
    return buffer.getvalue()


def parse_results_csv(path):
    """Rows of results.csv as dicts keyed by the documented columns."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}")
    reader = csv.reader(_stdio.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError(f"{path}: empty results file")
    if tuple(header) != RESULTS_CSV_COLUMNS:
        raise FormatError(f"{path}: unexpected results header {header}")
    out = []
    for parts in reader:
        if len(parts) != len(RESULTS_CSV_COLUMNS):
            raise FormatError(f"{path}: row with {len(parts)} columns")
        out.append(dict(zip(RESULTS_CSV_COLUMNS, parts)))
    return out


class CellStore:
    """Per-cell result files under <directory>/cells.

    Each finished grid cell is one atomically written file, so an
    interrupted experiment picks up where it stopped: cells found on disk
    are returned as rows and their training is skipped.
    """

    def __init__(self, directory):
        self.directory = Path(directory) / "cells"
        self.directory.mkdir(parents=True, exist_ok=True)

    def path_for(self, key):
        rep, classifier, train_variant, test_variant = key
        tag = "__".join(
            "".join(ch if ch.isalnum() or ch in ".-" else "-" for ch in str(part))
            for part in (rep, classifier, train_variant, test_variant)
        )
        check = zlib.crc32(repr(key).encode()) & 0xFFFFFFFF
        return self.directory / f"{tag}.{check:08x}.cell"

    def get(self, key):
        path = self.path_for(key)
        if not path.exists():
            return None
        lines = _Lines(path, _CELL_MAGIC)
        fields = lines.header()
        where = lines.name
        row_key = (
            _as_int(fields, "repetition", where),
            _need(fields, "classifier", where),
            _need(fields, "train_variant", where),
            _need(fields, "test_variant", where),
        )
        if row_key != key:
            raise FormatError(f"{where}: cell file holds {row_key}, expected {key}")
        wall_time = _as_float(fields, "wall_time", where)
        error = fields.get("error", "")
        if error:
            return ResultRow(*key, None, None, wall_time, error)
        cm = _parse_confusion(lines, fields)
        return ResultRow(*key, score(cm), cm, wall_time, "")

    def put(self, row):
        key = (row.repetition, row.classifier, row.train_variant, row.test_variant)
        out = [
            _CELL_MAGIC,
            f"repetition={row.repetition}",
            f"classifier={row.classifier}",
            f"train_variant={row.train_variant}",
            f"test_variant={row.test_variant}",
            f"wall_time={_fmt(row.wall_time)}",
        ]
        if row.error:
            out.append(f"error={row.error.splitlines()[0]}")
        else:
            out.extend(_confusion_lines(row.confusion))
        atomic_write(self.path_for(key), "\n".join(out) + "\n")


def save_results(table, directory):
    """Write results.csv, the spec echo, and any missing cell files."""
    directory = Path(directory)
    store = CellStore(directory)
    for row in table.rows:
        key = (row.repetition, row.classifier, row.train_variant, row.test_variant)
        if not store.path_for(key).exists():
            store.put(row)
    save_spec(table.spec, directory / "spec.txt")
    atomic_write(directory / "results.csv", results_csv_text(table.rows))


def load_results(directory):
    """Rebuild a ResultsTable from a results directory.

    Scores are recomputed from each cell's confusion matrix, so a loaded
    table carries exactly the reports the run produced.
    """
    directory = Path(directory)
    spec = load_spec(directory / "spec.txt")
    store = CellStore(directory)
    rows = []
    for record in parse_results_csv(directory / "results.csv"):
        key = (
            int(record["repetition"]),
            record["classifier"],
            record["train_variant"],
            record["test_variant"],
        )
        row = store.get(key)
        if row is None:
            raise FormatError(
                f"{directory}: results.csv lists {key} but its cell file is missing"
            )
        rows.append(row)
    return ResultsTable(spec=spec, rows=rows)
