"""Command-line interface.

Verbs: synth builds a task file from a key=value config, harvest probes a
task and writes an energy-profile file, train fits a classifier on
profile files, eval scores a saved model, experiment runs one of the five
grids into a results directory (resumable by cell), and plotdata turns
artifacts into plain tabular data for any plotting tool.

Shared flags on every verb: --seed, --preset desk|paper, --normalize.
All state flows through files and flags; exit status is 0 only when the
outputs were fully written.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io as hio
from .classifiers import (
    LabeledDataset,
    LinearModel,
    StabilityRatioModel,
    default_ratio_k,
    predict_many,
    stability_ratio,
    train_dam,
    train_nn,
    train_stability_ratio,
    train_svm,
)
from .experiments import (
    default_spec,
    run_experiment,
    stratified_subsample,
)
from .harvest import StateClass, harvest
from .hopfield import ThermalParams
from .metrics import confuse, score
from .tasks import build_task
from .tsne import tsne_embed

_FMT = "%.17g"


def _read_config(path):
    """key=value lines with '#' comments and blank lines allowed."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise hio.FormatError(f"cannot read {path}: {exc}")
    fields = {}
    extra_rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, _, value = line.partition("=")
            key = key.strip()
            if key in fields:
                raise hio.FormatError(f"{path}:{lineno}: duplicate field {key!r}")
            fields[key] = value.strip()
        else:
            extra_rows.append((lineno, line))
    return fields, extra_rows


def _pick(flag_value, fields, key, fallback, parse, where):
    """Resolve a setting: command-line flag, then config file, then default."""
    if flag_value is not None:
        return flag_value
    if key in fields:
        raw = fields.pop(key)
        try:
            return parse(raw)
        except ValueError:
            raise hio.FormatError(f"{where}: field {key!r} has bad value {raw!r}")
    return fallback


def _parse_bool(raw):
    if raw not in ("0", "1"):
        raise ValueError(raw)
    return raw == "1"


# ------------------------------------------------------------------ synth


def cmd_synth(args):
    fields, extra = _read_config(args.config)
    if extra:
        lineno, line = extra[0]
        raise hio.FormatError(f"{args.config}:{lineno}: expected key=value, got {line!r}")
    for key in fields:
        if key not in hio._TASK_FIELDS:
            raise hio.FormatError(f"{args.config}: unknown field {key!r}")
    config = hio.parse_task_config(fields, str(args.config))
    task = build_task(config)
    hio.save_task(task, args.out)
    print(
        f"wrote {args.out}: {task.prototypes.shape[0]} prototypes, "
        f"{task.learned.shape[0]} learned states, dimension {config.dimension}"
    )
    return 0


# ------------------------------------------------------------------ harvest


def cmd_harvest(args):
    task = hio.load_task(args.task)
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    thermal = None
    if args.rule == "thermal":
        thermal = ThermalParams(
            learning_rate=args.learning_rate,
            temperature=args.temperature,
            epochs=args.epochs,
        )
    result = harvest(
        task,
        args.probes,
        rng,
        learn_rule=args.rule,
        zero_diagonal=not args.keep_diagonal,
        thermal_params=thermal,
    )
    if args.normalize:
        from .harvest import HarvestSet, normalize_rows

        result = HarvestSet(
            network_id=result.network_id,
            task_config=result.task_config,
            profiles=normalize_rows(result.profiles),
            labels=result.labels,
            probe_stats=result.probe_stats,
            normalized=True,
        )
    hio.save_harvest(result, args.out)
    stats = result.probe_stats
    negated = stats.to_negated_prototype + stats.to_negated_learned
    mean_flips = stats.total_flips / stats.probes if stats.probes else 0.0
    print(
        f"wrote {args.out}: {result.profiles.shape[0]} profiles | "
        f"probes {stats.probes}, unique spurious {stats.unique_spurious}, "
        f"negated matches {negated}, cap exceeded {stats.cap_exceeded}, "
        f"mean flips {mean_flips:.1f}"
    )
    return 0


# ------------------------------------------------------------------ train


def _train_dispatch(args, dataset, seed):
    if args.model == "stability-ratio":
        return train_stability_ratio(dataset, seed=seed)
    if args.model == "nn":
        hidden = ()
        if args.hidden:
            hidden = tuple(int(tok) for tok in args.hidden.split(","))
        sizes = (dataset.dimension, *hidden, len(dataset.class_set))
        return train_nn(dataset, sizes, seed=seed)
    if args.model == "svm-linear":
        return train_svm(dataset, kernel="linear", c_param=args.c_param, seed=seed)
    if args.model == "svm-rbf":
        return train_svm(
            dataset, kernel="rbf", c_param=args.c_param, gamma=args.gamma, seed=seed
        )
    if args.model == "dam":
        return train_dam(dataset, memories=args.memories, seed=seed)
    raise ValueError(f"unknown model {args.model!r}")


def cmd_train(args):
    sets = hio.load_harvests(args.profiles)
    dataset = LabeledDataset.from_harvests(sets, normalize=args.normalize)
    seed = args.seed if args.seed is not None else 0
    model = _train_dispatch(args, dataset, seed)
    hio.save_model(model, args.out)
    classes = ",".join(c.value for c in dataset.class_set)
    print(
        f"wrote {args.out}: {args.model} on {dataset.profiles.shape[0]} profiles, "
        f"classes {classes}"
    )
    return 0


# ------------------------------------------------------------------ eval


def cmd_eval(args):
    model = hio.load_model(args.model)
    sets = hio.load_harvests(args.profiles)
    dataset = LabeledDataset.from_harvests(sets, normalize=args.normalize)
    preds = predict_many(model, dataset.profiles, normalized=dataset.normalized)
    present = set(dataset.labels) | set(preds)
    class_set = tuple(c for c in StateClass if c in present)
    cm = confuse(preds, dataset.labels, class_set)
    report = score(cm)
    hio.atomic_write(args.out, hio.report_text(report, cm))
    print(
        f"wrote {args.out}: accuracy {report.accuracy:.4f}, "
        f"macro F1 {report.macro_f1:.4f} on {dataset.profiles.shape[0]} profiles"
    )
    return 0


# ------------------------------------------------------------------ experiment

_SPEC_INT_KEYS = (
    "seed",
    "dimension",
    "num_probes",
    "trains_per_variant",
    "tests_per_variant",
    "repetitions",
    "max_flips",
)


def _spec_from_config(args):
    fields, extra = _read_config(args.config)
    where = str(args.config)
    if "experiment_id" not in fields and "experiment" not in fields:
        raise hio.FormatError(f"{where}: missing field 'experiment_id'")
    raw = fields.pop("experiment_id", None) or fields.pop("experiment", None)
    fields.pop("experiment", None)
    try:
        experiment_id = int(raw)
    except ValueError:
        raise hio.FormatError(f"{where}: field 'experiment_id' has bad value {raw!r}")
    overrides = {}
    for key in _SPEC_INT_KEYS:
        if key in fields:
            value = fields.pop(key)
            try:
                overrides[key] = int(value)
            except ValueError:
                raise hio.FormatError(f"{where}: field {key!r} has bad value {value!r}")
    if "normalize" in fields:
        overrides["normalize"] = _parse_bool(fields.pop("normalize"))
    if "classifiers" in fields:
        overrides["classifiers"] = tuple(
            tok.strip() for tok in fields.pop("classifiers").split(",") if tok.strip()
        )
    if "train_counts" in fields:
        overrides["train_counts"] = tuple(
            int(tok) for tok in fields.pop("train_counts").split(",")
        )
    if "nn_hidden_layers" in fields:
        overrides["nn_hidden_layers"] = hio._parse_hidden_layers(
            fields.pop("nn_hidden_layers"), where
        )
    if fields:
        raise hio.FormatError(f"{where}: unknown field {sorted(fields)[0]!r}")
    variants = []
    for lineno, line in extra:
        parts = line.split()
        if len(parts) != 6 or parts[0] != "variant":
            raise hio.FormatError(
                f"{where}:{lineno}: expected "
                "'variant <name> <prototypes> <instances> <p> <plain>'"
            )
        from .experiments import Variant

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
        except ValueError as exc:
            raise hio.FormatError(f"{where}:{lineno}: {exc}")
    if variants:
        overrides["variants"] = tuple(variants)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.normalize:
        overrides["normalize"] = True
    try:
        return default_spec(experiment_id, preset=args.preset, **overrides)
    except ValueError as exc:
        raise hio.FormatError(f"{where}: {exc}")


def cmd_experiment(args):
    spec = _spec_from_config(args)
    outdir = Path(args.out)
    spec_path = outdir / "spec.txt"
    if spec_path.exists():
        existing = hio.load_spec(spec_path)
        if existing != spec:
            raise hio.FormatError(
                f"{outdir} already holds results for a different spec; "
                "use a fresh directory or the matching config"
            )
    else:
        hio.save_spec(spec, spec_path)
    store = hio.CellStore(outdir)
    table = run_experiment(
        spec,
        progress=lambda msg: print(msg, file=sys.stderr),
        cell_cache=store,
    )
    hio.save_results(table, outdir)
    failures = sum(1 for row in table.rows if row.error)
    print(
        f"wrote {outdir / 'results.csv'}: {len(table.rows)} cells, "
        f"{failures} failed"
    )
    return 0


# ------------------------------------------------------------------ plotdata


def _plot_profiles(args):
    sets = hio.load_harvests(args.inputs)
    dataset = LabeledDataset.from_harvests(sets, normalize=args.normalize)
    n = dataset.dimension
    labels = np.array([lab.value for lab in dataset.labels])
    columns = []
    header = ["index"]
    for cls in dataset.class_set:
        rows = dataset.profiles[labels == cls.value]
        columns.append(rows.mean(axis=0))
        columns.append(rows.std(axis=0))
        header.extend([f"{cls.value}_mean", f"{cls.value}_std"])
    out = ["# " + " ".join(header)]
    for i in range(n):
        out.append(f"{i} " + " ".join(_FMT % col[i] for col in columns))
    return "\n".join(out) + "\n"


def _plot_boxes(args):
    if len(args.inputs) != 1:
        raise hio.FormatError("boxes takes exactly one results.csv input")
    records = hio.parse_results_csv(args.inputs[0])
    cells = {}
    for rec in records:
        if rec["error"] or not rec["macro_f1"]:
            continue
        key = (rec["classifier"], rec["train_variant"], rec["test_variant"])
        cells.setdefault(key, []).append(float(rec["macro_f1"]))
    if not cells:
        raise hio.FormatError(f"{args.inputs[0]}: no scored rows to summarize")
    out = ["# classifier train_variant test_variant count min q1 median q3 max"]
    for key in sorted(cells):
        values = np.array(cells[key])
        q1, median, q3 = np.percentile(values, [25, 50, 75])
        stats = (values.min(), q1, median, q3, values.max())
        out.append(
            " ".join(key)
            + f" {len(values)} "
            + " ".join(_FMT % v for v in stats)
        )
    return "\n".join(out) + "\n"


def _plot_ratio(args):
    sets = hio.load_harvests(args.inputs)
    dataset = LabeledDataset.from_harvests(sets, normalize=args.normalize)
    k = default_ratio_k(dataset.dimension)
    out = [f"# class stability_ratio (k={k})"]
    for label, row in zip(dataset.labels, dataset.profiles):
        out.append(f"{label.value} {_FMT % stability_ratio(row, k)}")
    return "\n".join(out) + "\n"


def _plot_coeffs(args):
    if len(args.inputs) != 1:
        raise hio.FormatError("coeffs takes exactly one model file input")
    model = hio.load_model(args.inputs[0])
    if not isinstance(model, (LinearModel, StabilityRatioModel)):
        raise hio.FormatError(
            "coeffs needs a model with per-class coefficient rows "
            "(a linear or stability-ratio model)"
        )
    coef = np.atleast_2d(model.coef).T if model.coef.ndim == 1 else model.coef
    width = coef.shape[1]
    out = ["# class " + " ".join(f"w{i}" for i in range(width)) + " bias"]
    for cls, row, b in zip(model.class_set, coef, model.bias):
        out.append(f"{cls.value} {' '.join(_FMT % v for v in row)} {_FMT % b}")
    return "\n".join(out) + "\n"


def _plot_tsne(args):
    if args.model is None:
        raise hio.FormatError("tsne needs --model for the predicted classes")
    model = hio.load_model(args.model)
    sets = hio.load_harvests(args.inputs)
    dataset = LabeledDataset.from_harvests(sets, normalize=model.normalized)
    seed = args.seed if args.seed is not None else 0
    rng = np.random.default_rng(seed)
    idx = stratified_subsample(dataset.labels, args.cap, rng)
    profiles = dataset.profiles[idx]
    truths = [dataset.labels[i] for i in idx]
    count = profiles.shape[0]
    perplexity = min(args.perplexity, max(1.0, (count - 1) / 3))
    points = tsne_embed(
        profiles,
        perplexity=perplexity,
        iterations=args.iterations,
        seed=seed,
    )
    preds = predict_many(model, profiles)
    out = ["# x y true_class predicted_class"]
    for (x, y), true, pred in zip(points, truths, preds):
        out.append(f"{_FMT % x} {_FMT % y} {true.value} {pred.value}")
    return "\n".join(out) + "\n"


_PLOT_KINDS = {
    "profiles": _plot_profiles,
    "boxes": _plot_boxes,
    "ratio": _plot_ratio,
    "coeffs": _plot_coeffs,
    "tsne": _plot_tsne,
}


def cmd_plotdata(args):
    text = _PLOT_KINDS[args.kind](args)
    hio.atomic_write(args.out, text)
    print(f"wrote {args.out}: {args.kind} data, {text.count(chr(10)) - 1} rows")
    return 0


# ------------------------------------------------------------------ parser


def build_parser():
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument(
        "--seed", type=int, default=None, help="random seed (default 0)"
    )
    shared.add_argument(
        "--preset",
        choices=("desk", "paper"),
        default="desk",
        help="experiment scale: desk finishes in minutes, paper is the full grid",
    )
    shared.add_argument(
        "--normalize",
        action="store_true",
        help="scale each profile to the range [-1, 1]",
    )

    parser = argparse.ArgumentParser(
        prog="hoplab",
        description="Hopfield state harvesting, classification, and experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[shared], help="build a task file")
    p.add_argument("--config", required=True, help="key=value task description")
    p.add_argument("--out", required=True, help="task file to write")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("harvest", parents=[shared], help="profile a task's states")
    p.add_argument("--task", required=True, help="task file from synth")
    p.add_argument("--probes", type=int, default=10_000)
    p.add_argument("--out", required=True, help="profile file to write")
    p.add_argument("--rule", choices=("hebbian", "thermal"), default="hebbian")
    p.add_argument(
        "--keep-diagonal",
        action="store_true",
        help="keep the raw self-couplings instead of clearing them",
    )
    p.add_argument("--learning-rate", type=float, default=0.01)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--epochs", type=int, default=1)
    p.set_defaults(func=cmd_harvest)

    p = sub.add_parser("train", parents=[shared], help="fit a classifier")
    p.add_argument(
        "--model",
        required=True,
        choices=("stability-ratio", "nn", "svm-linear", "svm-rbf", "dam"),
    )
    p.add_argument("--profiles", required=True, nargs="+", help="profile files")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--hidden", default="", help="nn hidden sizes, e.g. 64,32")
    p.add_argument("--c-param", type=float, default=0.001, help="svm hinge weight")
    p.add_argument("--gamma", type=float, default=None, help="rbf kernel width")
    p.add_argument("--memories", type=int, default=128, help="dam memory count")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[shared], help="score a saved model")
    p.add_argument("--model", required=True, help="model file from train")
    p.add_argument("--profiles", required=True, nargs="+", help="profile files")
    p.add_argument("--out", required=True, help="report file to write")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser(
        "experiment", parents=[shared], help="run one experiment grid"
    )
    p.add_argument(
        "--config",
        required=True,
        help="key=value spec; experiment_id is required, other fields override the preset",
    )
    p.add_argument("--out", required=True, help="results directory (resumable)")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser(
        "plotdata", parents=[shared], help="emit tabular data for plots"
    )
    p.add_argument("--kind", required=True, choices=sorted(_PLOT_KINDS))
    p.add_argument("--inputs", required=True, nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--model", default=None, help="model file (tsne kind)")
    p.add_argument("--cap", type=int, default=2000, help="tsne subsample cap")
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--iterations", type=int, default=1000)
    p.set_defaults(func=cmd_plotdata)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (hio.FormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
