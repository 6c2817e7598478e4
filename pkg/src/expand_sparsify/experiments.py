"""Desk-scale experiments with CSV output.

Each experiment is a pure function of its :class:`ExperimentConfig`.  Work is
split into independent cells whose seeds derive from ``(seed, cell, trial)``;
cells may run in parallel (``n_jobs``) and are written in a fixed order, so
serial and parallel runs produce the same bytes.
"""

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy import stats

from .approximator import evaluate, fit_readout, predict_batch, prune_dead
from .data import ManifoldSpec, make_classification, make_target, sample_manifold, scramble_labels
from .exceptions import ConfigurationError
from .metrics import independent_overlap, random_unit_vectors, similarity_profile
from .projection import sample_projection
from .sparsify import estimate_thresholds

EXPERIMENTS = ("scaling", "pruning", "dropout", "memorization", "lsh_profile")

DEFAULTS = {
    "scaling": {
        "n": 20, "m": [1], "k": [32], "d": [512, 1024, 2048, 4096, 8192],
        "fit_size": 5000, "test_size": 1000, "dist": "gaussian", "embedding_seed": 1,
        "target": "lipschitz_trig", "target_params": {"frequency": 3.0}, "target_seed": 2,
    },
    "pruning": {
        "n": 20, "m": 1, "k": [1, 16], "d": [4096], "train_size": 100, "calibration_size": 10000,
        "probe_size": 500, "train_latent": [0.0, 0.5], "probe_latent": [0.5, 1.0], "dist": "gaussian",
        "embedding_seed": 1, "target": "lipschitz_trig", "target_params": {"frequency": 3.0}, "target_seed": 2,
    },
    "dropout": {
        "n": 20, "m": 1, "k": 64, "d": 2048, "dropout_rates": [0.0, 0.25, 0.5, 0.75],
        "fit_size": 5000, "test_size": 1000, "dist": "gaussian", "embedding_seed": 1,
        "target": "lipschitz_trig", "target_params": {"frequency": 3.0}, "target_seed": 2,
    },
    "memorization": {
        "n": 40, "m": 8, "classes": 4, "layout": "clusters", "separation": 2.0, "k": [32], "d": [4096],
        "train_size": 500, "test_size": 500, "dist": "gaussian",
    },
    "lsh_profile": {
        "n": 50, "k": 64, "d": 2000, "radii": [0.0, 0.01, 0.1, 1.0, 10.0], "pairs_per_radius": 1000,
        "base_size": 1000, "calibration_size": 10000, "normalize": True, "dist": "gaussian",
    },
}

DEFAULT_TRIALS = {"scaling": 10, "pruning": 1, "dropout": 10, "memorization": 10, "lsh_profile": 1}

COLUMNS = {
    "scaling": ["row_kind", "n", "d", "k", "m", "trial", "mean_abs_err", "max_abs_err", "no_active_count",
                "slope", "slope_stderr"],
    "pruning": ["row_kind", "d", "k", "trial", "removed_count", "mean_active_train", "train_err_before",
                "train_err_after", "probe_err_before", "probe_err_after"],
    "dropout": ["row_kind", "d", "k", "dropout_rate", "k_effective", "trial", "err_dropout", "err_matched",
                "err_difference", "rank_correlation"],
    "memorization": ["row_kind", "labels", "d", "k", "trial", "train_acc", "test_acc", "dead_units"],
    "lsh_profile": ["row_kind", "trial", "bin_lo", "bin_hi", "mean", "std", "se", "count"],
}


def derive_seed(*parts):
    """64-bit seed derived from a tuple of non-negative integers."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1, np.uint64)[0])


def _as_list(value):
    return list(value) if isinstance(value, (list, tuple)) else [value]


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict = field(default_factory=dict)
    trials: int | None = None
    seed: int = 0
    output: str | None = None
    n_jobs: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        unknown = set(self.params) - set(DEFAULTS[self.experiment])
        if unknown:
            raise ConfigurationError(f"unknown parameters for {self.experiment}: {sorted(unknown)}")
        self.params = {**DEFAULTS[self.experiment], **self.params}
        if self.trials is None:
            self.trials = DEFAULT_TRIALS[self.experiment]
        if int(self.trials) < 1:
            raise ConfigurationError("trials must be >= 1")
        if int(self.seed) < 0:
            raise ConfigurationError("seed must be non-negative")

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        try:
            experiment = doc.pop("experiment")
        except KeyError:
            raise ConfigurationError("config needs an 'experiment' key") from None
        top = {key: doc.pop(key) for key in ("trials", "seed", "output", "n_jobs") if key in doc}
        params = doc.pop("params", {})
        params.update(doc)
        return cls(experiment, params, **top)

    def resolved(self):
        """Everything that determines the output (``n_jobs`` and ``output`` do not)."""
        return {"experiment": self.experiment, "seed": self.seed, "trials": self.trials, **self.params}


@dataclass
class ExperimentResult:
    experiment: str
    columns: list
    rows: list
    config: dict

    def to_csv_text(self):
        buf = io.StringIO()
        for key in sorted(self.config):
            buf.write(f"# {key} = {json.dumps(self.config[key], sort_keys=True)}\n")
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_fmt(row.get(c)) for c in self.columns) + "\n")
        return buf.getvalue()

    def write(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv_text())

    def select(self, row_kind):
        return [r for r in self.rows if r["row_kind"] == row_kind]


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _parallel(cfg, fn, cells):
    if cfg.n_jobs == 1:
        return [fn(cfg, cell) for cell in cells]
    return Parallel(n_jobs=cfg.n_jobs)(delayed(fn)(cfg, cell) for cell in cells)


def _target(p, spec):
    return make_target(p["target"], spec, p["target_seed"], **p["target_params"])


def _require(cond, message):
    if not cond:
        raise ConfigurationError(message)


# -- scaling ----------------------------------------------------------------

def _validate_scaling(p):
    ds = sorted(set(int(d) for d in _as_list(p["d"])))
    _require(len(ds) >= 2, "scaling needs at least two distinct d values to fit a slope")
    ratios = np.array(ds[1:]) / np.array(ds[:-1])
    _require(np.allclose(ratios, ratios[0], rtol=1e-9), f"d values {ds} are not in geometric progression")
    for m in _as_list(p["m"]):
        _require(1 <= int(m) < int(p["n"]), f"need 1 <= m < n, got m={m}, n={p['n']}")
    for k in _as_list(p["k"]):
        _require(1 <= int(k) <= ds[0], f"k={k} exceeds the smallest d={ds[0]}")
    return ds


def _scaling_cell(cfg, cell):
    p = cfg.params
    mi, m, ki, k, di, d, trial = cell
    spec = ManifoldSpec(m=m, n=p["n"], embedding_seed=p["embedding_seed"])
    f = _target(p, spec)
    X = sample_manifold(spec, p["fit_size"], derive_seed(cfg.seed, 1, mi, trial))
    Xt = sample_manifold(spec, p["test_size"], derive_seed(cfg.seed, 2, mi, trial))
    W = sample_projection(p["n"], d, p["dist"], derive_seed(cfg.seed, 3, mi, ki, di, trial))
    tau = estimate_thresholds(W, X, k)
    res = evaluate(fit_readout(W, tau, X, f(X)), Xt, f(Xt), fallback="global_mean")
    return {"row_kind": "trial", "n": p["n"], "d": d, "k": k, "m": m, "trial": trial,
            "mean_abs_err": res["mean_abs_err"], "max_abs_err": res["max_abs_err"],
            "no_active_count": res["no_active_count"]}


def fit_slope(rows):
    """OLS slope of log(mean_abs_err) on log(k/d); ``None`` when degenerate."""
    x = np.array([math.log(r["k"] / r["d"]) for r in rows])
    err = np.array([r["mean_abs_err"] for r in rows])
    if np.any(err <= 0) or np.unique(x).size < 2 or np.ptp(np.log(err)) == 0:
        return None, None
    fit = stats.linregress(x, np.log(err))
    stderr = float(fit.stderr) if len(rows) > 2 else None
    return float(fit.slope), stderr


def run_scaling(cfg):
    p = cfg.params
    ds = _validate_scaling(p)
    ms, ks = [int(m) for m in _as_list(p["m"])], [int(k) for k in _as_list(p["k"])]
    cells = [(mi, m, ki, k, di, d, t) for mi, m in enumerate(ms) for ki, k in enumerate(ks)
             for di, d in enumerate(ds) for t in range(cfg.trials)]
    data = _parallel(cfg, _scaling_cell, cells)
    rows = []
    for m in ms:
        for k in ks:
            group = [r for r in data if r["m"] == m and r["k"] == k]
            rows.extend(group)
            slope, stderr = fit_slope(group)
            rows.append({"row_kind": "slope" if slope is not None else "slope_degenerate", "n": p["n"],
                         "k": k, "m": m, "slope": slope, "slope_stderr": stderr})
    return ExperimentResult("scaling", COLUMNS["scaling"], rows, cfg.resolved())


# -- pruning ----------------------------------------------------------------

def _pruning_cell(cfg, cell):
    p = cfg.params
    ki, k, di, d, trial = cell
    spec = ManifoldSpec(m=p["m"], n=p["n"], embedding_seed=p["embedding_seed"])
    f = _target(p, spec)
    lo, hi = p["train_latent"]
    X = sample_manifold(spec, p["train_size"], derive_seed(cfg.seed, 1, trial), (lo, hi))
    C = sample_manifold(spec, p["calibration_size"], derive_seed(cfg.seed, 2, trial), (lo, hi))
    Xp = sample_manifold(spec, p["probe_size"], derive_seed(cfg.seed, 3, trial), tuple(p["probe_latent"]))
    W = sample_projection(p["n"], d, p["dist"], derive_seed(cfg.seed, 4, ki, di, trial))
    tau = estimate_thresholds(W, C, k)
    model = fit_readout(W, tau, X, f(X))
    pruned, removed = prune_dead(model, X)
    before, _ = predict_batch(model, X, fallback="global_mean")
    after, _ = predict_batch(pruned, X, fallback="global_mean")
    if not np.array_equal(before, after):
        raise RuntimeError("pruning changed predictions on the training inputs")
    tr_b = evaluate(model, X, f(X))["mean_abs_err"]
    tr_a = evaluate(pruned, X, f(X))["mean_abs_err"]
    pr_b = evaluate(model, Xp, f(Xp))["mean_abs_err"]
    pr_a = evaluate(pruned, Xp, f(Xp))["mean_abs_err"]
    return {"row_kind": "trial", "d": d, "k": k, "trial": trial, "removed_count": removed,
            "mean_active_train": float(model.codes(X).sum(axis=1).mean()), "train_err_before": tr_b, "train_err_after": tr_a, "probe_err_before": pr_b, "probe_err_after": pr_a}


def run_pruning(cfg):
    p = cfg.params
    ds, ks = [int(d) for d in _as_list(p["d"])], [int(k) for k in _as_list(p["k"])]
    for k in ks:
        _require(1 <= k <= min(ds), f"k={k} must lie in [1, min(d)]")
    _require(1 <= p["m"] < p["n"], "need 1 <= m < n")
    cells = [(ki, k, di, d, t) for di, d in enumerate(ds) for ki, k in enumerate(ks) for t in range(cfg.trials)]
    rows = _parallel(cfg, _pruning_cell, cells)
    return ExperimentResult("pruning", COLUMNS["pruning"], rows, cfg.resolved())


# -- dropout ----------------------------------------------------------------

def matched_k(k, rate):
    return max(1, int(round(k * (1.0 - rate))))


def _dropout_cell(cfg, cell):
    p = cfg.params
    ri, rate, trial = cell
    k, d = int(p["k"]), int(p["d"])
    spec = ManifoldSpec(m=p["m"], n=p["n"], embedding_seed=p["embedding_seed"])
    f = _target(p, spec)
    X = sample_manifold(spec, p["fit_size"], derive_seed(cfg.seed, 1, trial))
    Xt = sample_manifold(spec, p["test_size"], derive_seed(cfg.seed, 2, trial))
    W = sample_projection(p["n"], d, p["dist"], derive_seed(cfg.seed, 3, trial))
    y, yt = f(X), f(Xt)

    tau = estimate_thresholds(W, X, k)
    fit_seed, eval_seed = derive_seed(cfg.seed, 4, ri, trial), derive_seed(cfg.seed, 5, ri, trial)
    dropped = fit_readout(W, tau, X, y, dropout_rate=rate, dropout_seed=fit_seed)
    pred, _ = predict_batch(dropped, Xt, fallback="global_mean", dropout_rate=rate, dropout_seed=eval_seed)
    err_dropout = float(np.mean(np.abs(pred - yt)))

    k_eff = matched_k(k, rate)
    matched = fit_readout(W, estimate_thresholds(W, X, k_eff), X, y)
    err_matched = evaluate(matched, Xt, yt)["mean_abs_err"]
    return {"row_kind": "trial", "d": d, "k": k, "dropout_rate": rate, "k_effective": k_eff, "trial": trial,
            "err_dropout": err_dropout, "err_matched": err_matched, "err_difference": err_dropout - err_matched}


def run_dropout(cfg):
    p = cfg.params
    rates = [float(r) for r in _as_list(p["dropout_rates"])]
    for r in rates:
        _require(0.0 <= r < 1.0, f"dropout rate {r} outside [0, 1)")
    _require(1 <= int(p["k"]) <= int(p["d"]), "need 1 <= k <= d")
    cells = [(ri, r, t) for ri, r in enumerate(rates) for t in range(cfg.trials)]
    rows = _parallel(cfg, _dropout_cell, cells)
    ladder_drop = [np.mean([r["err_dropout"] for r in rows if r["dropout_rate"] == rate]) for rate in rates]
    ladder_match = [np.mean([r["err_matched"] for r in rows if r["dropout_rate"] == rate]) for rate in rates]
    summary = []
    for rate, a, b in zip(rates, ladder_drop, ladder_match):
        summary.append({"row_kind": "mean", "d": p["d"], "k": p["k"], "dropout_rate": rate,
                        "k_effective": matched_k(int(p["k"]), rate), "err_dropout": float(a), "err_matched": float(b),
                        "err_difference": float(a - b)})
    rho = float("nan")
    if len(rates) >= 2 and np.ptp(ladder_drop) > 0 and np.ptp(ladder_match) > 0:
        rho = float(stats.spearmanr(ladder_drop, ladder_match).statistic)
    summary.append({"row_kind": "rank_correlation", "d": p["d"], "k": p["k"], "rank_correlation": rho})
    return ExperimentResult("dropout", COLUMNS["dropout"], rows + summary, cfg.resolved())


# -- memorization -----------------------------------------------------------

def _accuracy(model, X, labels):
    pred, _ = predict_batch(model, X, fallback="global_mean")
    return float(np.mean(np.argmax(pred, axis=1) == labels))


def _memorization_cell(cfg, cell):
    p = cfg.params
    ki, k, di, d, trial = cell
    C = int(p["classes"])
    spec = ManifoldSpec(m=p["m"], n=p["n"], embedding_seed=derive_seed(cfg.seed, 0, trial))
    label_seed = derive_seed(cfg.seed, 1, trial)
    kw = {"label_seed": label_seed, "layout": p["layout"], "separation": p["separation"]}
    train = make_classification(spec, C, p["train_size"], derive_seed(cfg.seed, 2, trial), **kw)
    test = make_classification(spec, C, p["test_size"], derive_seed(cfg.seed, 3, trial), **kw)
    W = sample_projection(p["n"], d, p["dist"], derive_seed(cfg.seed, 4, ki, di, trial))
    tau = estimate_thresholds(W, train.inputs, k)
    arms = {
        "true": (train, test),
        # the whole dataset is relabelled, test split included
        "scrambled": (scramble_labels(train, derive_seed(cfg.seed, 5, trial)),
                      scramble_labels(test, derive_seed(cfg.seed, 6, trial))),
    }
    out = []
    for name, (tr, te) in arms.items():
        model = fit_readout(W, tau, tr.inputs, np.eye(C)[tr.targets])
        out.append({"row_kind": "trial", "labels": name, "d": d, "k": k, "trial": trial,
                    "train_acc": _accuracy(model, tr.inputs, tr.targets),
                    "test_acc": _accuracy(model, te.inputs, te.targets),
                    "dead_units": int(model.dead_mask.sum())})
    return out


def run_memorization(cfg):
    p = cfg.params
    ds, ks = [int(d) for d in _as_list(p["d"])], [int(k) for k in _as_list(p["k"])]
    for k in ks:
        _require(1 <= k <= min(ds), f"k={k} must lie in [1, min(d)]")
    _require(int(p["classes"]) >= 2, "need at least two classes")
    _require(1 <= p["m"] < p["n"], "need 1 <= m < n")
    cells = [(ki, k, di, d, t) for di, d in enumerate(ds) for ki, k in enumerate(ks) for t in range(cfg.trials)]
    trial_rows = [r for group in _parallel(cfg, _memorization_cell, cells) for r in group]
    rows = []
    for d in ds:
        for k in ks:
            for arm in ("true", "scrambled"):
                group = [r for r in trial_rows if r["d"] == d and r["k"] == k and r["labels"] == arm]
                rows.extend(group)
                rows.append({"row_kind": "mean", "labels": arm, "d": d, "k": k,
                             "train_acc": float(np.mean([r["train_acc"] for r in group])),
                             "test_acc": float(np.mean([r["test_acc"] for r in group])),
                             "dead_units": float(np.mean([r["dead_units"] for r in group]))})
    return ExperimentResult("memorization", COLUMNS["memorization"], rows, cfg.resolved())


# -- LSH profile ------------------------------------------------------------

def _lsh_cell(cfg, trial):
    p = cfg.params
    n, d, k = int(p["n"]), int(p["d"]), int(p["k"])
    rng = np.random.default_rng(derive_seed(cfg.seed, 1, trial))
    calib = random_unit_vectors(rng, p["calibration_size"], n)
    base = random_unit_vectors(rng, p["base_size"], n)
    W = sample_projection(n, d, p["dist"], derive_seed(cfg.seed, 2, trial))
    tau = estimate_thresholds(W, calib, k)
    prof = similarity_profile(W, tau, base, p["radii"], p["pairs_per_radius"], derive_seed(cfg.seed, 3, trial),
                              normalize=p["normalize"])
    rows = []
    for (lo, hi), mu, sd, se, c in zip(prof.distance_bins, prof.mean_overlap, prof.std_overlap,
                                       prof.standard_errors(), prof.pair_count):
        rows.append({"row_kind": "bin", "trial": trial, "bin_lo": lo, "bin_hi": hi, "mean": float(mu),
                     "std": float(sd), "se": float(se), "count": int(c)})
    pairs = int(p["pairs_per_radius"])
    indep = independent_overlap(W, tau, random_unit_vectors(rng, pairs, n), random_unit_vectors(rng, pairs, n),
                                normalize=p["normalize"])
    rows.append({"row_kind": "baseline_independent", "trial": trial, "mean": float(indep.mean()),
                 "std": float(indep.std()), "se": float(indep.std(ddof=1) / math.sqrt(pairs)), "count": pairs})
    rows.append({"row_kind": "baseline_k2_over_d", "trial": trial, "mean": k * k / d})
    return rows


def run_lsh_profile(cfg):
    p = cfg.params
    _require(1 <= int(p["k"]) <= int(p["d"]), "need 1 <= k <= d")
    radii = np.asarray(p["radii"], dtype=float)
    _require(radii.size >= 1 and np.all(radii >= 0) and np.all(np.diff(radii) > 0),
             "radii must be non-negative and strictly increasing")
    rows = [r for group in _parallel(cfg, _lsh_cell, list(range(cfg.trials))) for r in group]
    return ExperimentResult("lsh_profile", COLUMNS["lsh_profile"], rows, cfg.resolved())


RUNNERS = {
    "scaling": run_scaling,
    "pruning": run_pruning,
    "dropout": run_dropout,
    "memorization": run_memorization,
    "lsh_profile": run_lsh_profile,
}


def run_experiment(cfg):
    """Run ``cfg`` and write its CSV when ``cfg.output`` is set."""
    result = RUNNERS[cfg.experiment](cfg)
    if cfg.output:
        result.write(cfg.output)
    return result
