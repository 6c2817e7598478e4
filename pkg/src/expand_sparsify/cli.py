"""Command line interface.

Verbs: ``gen``, ``fit``, ``eval``, ``experiment <tag>``, ``inspect``.
Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime error.
"""

import argparse
import csv
import json
import logging
import sys

import numpy as np

from .approximator import evaluate, fit_readout, predict_batch
from .data import ManifoldSpec, load_csv, make_classification, make_regression, make_target, save_csv
from .estimators import default_k
from .exceptions import ConfigurationError, DataError, ModelFileError
from .experiments import EXPERIMENTS, ExperimentConfig, run_experiment
from .persistence import describe, load_model, save_model
from .projection import sample_projection
from .sparsify import estimate_thresholds

log = logging.getLogger("expand_sparsify")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4


def _parse_value(text):
    try:
        return json.loads(text)
    except ValueError:
        return text


def _overrides(pairs):
    out = {}
    for item in pairs or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = _parse_value(value)
    return out


def cmd_gen(args):
    spec = ManifoldSpec(m=args.m, n=args.n, embedding_seed=args.embedding_seed, amplitude=args.amplitude)
    if args.classes:
        ds = make_classification(spec, args.classes, args.count, args.seed, label_seed=args.label_seed,
                                 layout=args.layout)
    else:
        ds = make_regression(spec, make_target(args.target, spec, args.target_seed), args.count, args.seed)
    save_csv(ds, args.out)
    log.info("wrote %d rows to %s", len(ds), args.out)


def cmd_fit(args):
    ds = load_csv(args.data, args.target_column, kind=args.kind, standardize=args.standardize)
    calib = ds.inputs
    if args.calibration:
        calib = load_csv(args.calibration, args.target_column, kind=args.kind, standardize=args.standardize).inputs
    k = default_k(args.d) if args.k is None else args.k
    W = sample_projection(ds.inputs.shape[1], args.d, args.dist, args.seed, args.sigma)
    tau = estimate_thresholds(W, calib, k, args.seed)
    targets = ds.targets
    if ds.kind == "classification":
        targets = np.eye(int(ds.targets.max()) + 1)[ds.targets]
    model = fit_readout(W, tau, ds.inputs, targets, exclude_dead=args.exclude_dead)
    save_model(model, args.out, encoding=args.encoding)
    log.info("saved model n=%d d=%d k=%d to %s", model.n, model.d, k, args.out)


def cmd_eval(args):
    model = load_model(args.model)
    ds = load_csv(args.data, args.target_column, kind=args.kind, standardize=args.standardize)
    out = sys.stdout if args.out in (None, "-") else open(args.out, "w", newline="", encoding="utf-8")
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["model", "metric", "value"])
        if ds.kind == "classification":
            pred, empty = predict_batch(model, ds.inputs, fallback=args.fallback)
            metrics = {"accuracy": float(np.mean(np.argmax(pred, axis=1) == ds.targets)),
                       "no_active_count": int(empty.sum())}
        else:
            metrics = evaluate(model, ds.inputs, ds.targets, fallback=args.fallback)
        for name, value in metrics.items():
            writer.writerow([args.model, name, repr(value) if isinstance(value, float) else value])
    finally:
        if out is not sys.stdout:
            out.close()


def cmd_experiment(args):
    doc = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ConfigurationError(f"cannot read config {args.config}: {exc}") from exc
    if doc.get("experiment", args.tag) != args.tag:
        raise ConfigurationError(f"config is for {doc['experiment']!r}, not {args.tag!r}")
    doc["experiment"] = args.tag
    doc.update(_overrides(args.set))
    for key in ("trials", "seed", "output", "n_jobs"):
        value = getattr(args, key)
        if value is not None:
            doc[key] = value
    cfg = ExperimentConfig.from_dict(doc)
    result = run_experiment(cfg)
    if not cfg.output:
        sys.stdout.write(result.to_csv_text())


def cmd_inspect(args):
    json.dump(describe(load_model(args.model)), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def build_parser():
    parser = argparse.ArgumentParser(prog="expand-sparsify", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    g = sub.add_parser("gen", help="generate a synthetic manifold dataset as CSV")
    g.add_argument("--m", type=int, default=1)
    g.add_argument("--n", type=int, default=20)
    g.add_argument("--count", type=int, default=1000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--embedding-seed", type=int, default=0)
    g.add_argument("--amplitude", type=float, default=1.0)
    g.add_argument("--target", default="lipschitz_trig", choices=["lipschitz_trig", "region_constant", "linear"])
    g.add_argument("--target-seed", type=int, default=0)
    g.add_argument("--classes", type=int, default=0, help="emit a classification dataset with this many classes")
    g.add_argument("--layout", default="voronoi", choices=["voronoi", "clusters"])
    g.add_argument("--label-seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    def data_args(p):
        p.add_argument("--data", required=True)
        p.add_argument("--target-column", default="target")
        p.add_argument("--kind", default="regression", choices=["regression", "classification"])
        p.add_argument("--standardize", action="store_true")

    f = sub.add_parser("fit", help="fit a model on a CSV dataset")
    data_args(f)
    f.add_argument("--d", type=int, default=2000)
    f.add_argument("--k", type=int, default=None)
    f.add_argument("--dist", default="gaussian", choices=["gaussian", "unit_sphere"])
    f.add_argument("--sigma", type=float, default=None)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--calibration", help="CSV whose inputs calibrate the thresholds (default: --data)")
    f.add_argument("--exclude-dead", action="store_true")
    f.add_argument("--encoding", default="binary", choices=["binary", "decimal"])
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("eval", help="evaluate a saved model on a CSV dataset")
    data_args(e)
    e.add_argument("--model", required=True)
    e.add_argument("--fallback", default="global_mean", choices=["global_mean", "error"])
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_eval)

    x = sub.add_parser("experiment", help="run an experiment and write its CSV")
    x.add_argument("tag", choices=EXPERIMENTS)
    x.add_argument("--config", help="JSON config document")
    x.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (JSON value)")
    x.add_argument("--trials", type=int)
    x.add_argument("--seed", type=int)
    x.add_argument("--out", dest="output")
    x.add_argument("--jobs", dest="n_jobs", type=int)
    x.set_defaults(func=cmd_experiment)

    i = sub.add_parser("inspect", help="print a model summary")
    i.add_argument("--model", required=True)
    i.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except ConfigurationError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (DataError, ModelFileError) as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - every other failure is a runtime error
        log.error("runtime error: %s", exc)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
