"""Synthetic manifold data, target functions, label scrambling and CSV I/O."""

import csv
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import ConfigurationError, IngestionError, InputError

EMBEDDINGS = ("random_trig", "circle")
TARGET_TAGS = ("lipschitz_trig", "region_constant", "linear")
KINDS = ("regression", "classification")


@dataclass(frozen=True)
class ManifoldSpec:
    """An ``m``-dimensional smooth submanifold of ``R^n``.

    ``random_trig`` embeds latent ``t in [0, 1)^m`` with, per ambient
    coordinate, ``frequency_count`` cosine terms with integer frequency
    vectors, so the image is a closed (torus-like) manifold.  Coefficients are
    scaled so that ``E|x|^2 = amplitude^2``.  ``circle`` is the fixed curve
    ``(cos 2 pi t, sin 2 pi t, 0, ..., 0)`` and needs ``m = 1``.
    """

    m: int
    n: int
    embedding_seed: int = 0
    frequency_count: int = 3
    amplitude: float = 1.0
    max_frequency: int = 2
    embedding: str = "random_trig"

    def __post_init__(self):
        if not 1 <= self.m < self.n:
            raise ConfigurationError(f"need 1 <= m < n, got m={self.m}, n={self.n}")
        if self.embedding not in EMBEDDINGS:
            raise ConfigurationError(f"unknown embedding {self.embedding!r}")
        if self.embedding == "circle" and self.m != 1:
            raise ConfigurationError("the circle embedding has m = 1")
        if self.frequency_count < 1 or self.max_frequency < 1:
            raise ConfigurationError("frequency_count and max_frequency must be >= 1")
        if not self.amplitude > 0:
            raise ConfigurationError("amplitude must be > 0")

    def embedding_params(self):
        """``(frequencies, phases, coefficients)`` with shapes (n, F, m), (n, F), (n, F)."""
        rng = np.random.default_rng([self.embedding_seed, 0x6D616E69])
        n, F, m = self.n, self.frequency_count, self.m
        freqs = rng.integers(-self.max_frequency, self.max_frequency + 1, size=(n, F, m))
        zero = ~freqs.any(axis=2)
        while zero.any():
            freqs[zero] = rng.integers(-self.max_frequency, self.max_frequency + 1, size=(int(zero.sum()), m))
            zero = ~freqs.any(axis=2)
        phases = rng.uniform(0.0, 2.0 * np.pi, size=(n, F))
        coefs = rng.normal(0.0, math.sqrt(2.0 / (n * F)), size=(n, F))
        return freqs, phases, coefs


def embed(spec, latent):
    """Ambient points for latent coordinates of shape (count, m)."""
    T = np.atleast_2d(np.asarray(latent, dtype=np.float64))
    if T.shape[1] != spec.m:
        raise InputError(f"latent coordinates must have {spec.m} columns")
    if spec.embedding == "circle":
        X = np.zeros((T.shape[0], spec.n))
        X[:, 0] = np.cos(2 * np.pi * T[:, 0])
        X[:, 1] = np.sin(2 * np.pi * T[:, 0])
        return spec.amplitude * X
    freqs, phases, coefs = spec.embedding_params()
    angle = 2 * np.pi * np.einsum("bm,nfm->bnf", T, freqs) + phases[None]
    return spec.amplitude * np.einsum("bnf,nf->bn", np.cos(angle), coefs)


def sample_manifold(spec, count, seed, latent_range=(0.0, 1.0), return_latent=False):
    """Embedded points for latent ``t`` uniform on ``[lo, hi)^m``."""
    if int(count) < 1:
        raise ConfigurationError(f"count must be >= 1, got {count}")
    lo, hi = latent_range
    if not 0.0 <= lo < hi <= 1.0:
        raise ConfigurationError(f"latent_range must satisfy 0 <= lo < hi <= 1, got {latent_range}")
    T = np.random.default_rng(seed).uniform(lo, hi, size=(int(count), spec.m))
    X = embed(spec, T)
    return (X, T) if return_latent else X


@dataclass(frozen=True, eq=False)
class TargetFunction:
    """A deterministic scalar function on ``R^n``.

    ``lipschitz`` is an upper bound on the Lipschitz constant when one is
    known analytically (``None`` for discontinuous targets).
    """

    tag: str
    n: int
    params: dict
    lipschitz: float | None

    def __call__(self, U):
        U = np.asarray(U, dtype=np.float64)
        single = U.ndim == 1
        U = np.atleast_2d(U)
        if U.shape[1] != self.n:
            raise InputError(f"expected inputs of length {self.n}, got {U.shape[1]}")
        if self.tag == "linear":
            out = U @ self.params["weights"]
        elif self.tag == "lipschitz_trig":
            p = self.params
            out = np.sin(U @ p["directions"].T + p["phases"][None, :]) @ p["amplitudes"]
        else:
            out = self.params["values"][self.region(U)]
        return float(out[0]) if single else out

    def region(self, U):
        """Index of the nearest centre (``region_constant`` only)."""
        if self.tag != "region_constant":
            raise ConfigurationError("only region_constant targets have regions")
        C = self.params["centers"]
        U = np.atleast_2d(np.asarray(U, dtype=np.float64))
        d2 = (U ** 2).sum(axis=1)[:, None] - 2.0 * U @ C.T + (C ** 2).sum(axis=1)[None, :]
        return np.argmin(d2, axis=1)


def make_target(tag, spec, seed=0, **params):
    """Build a target function on ``R^n`` (``spec`` is a ManifoldSpec or ``n``).

    ``linear``
        ``weights`` (default a random unit vector).
    ``lipschitz_trig``
        ``sum_i a_i sin(<b_i, u> + c_i)`` with ``terms`` components whose
        directions have norm ``frequency``; Lipschitz bound ``sum |a_i| |b_i|``.
    ``region_constant``
        ``regions`` Voronoi cells around centres drawn on the manifold (or
        ``centers`` given explicitly), one value per cell (``values`` or
        uniform on [-1, 1]).
    """
    if tag not in TARGET_TAGS:
        raise ConfigurationError(f"unknown target tag {tag!r}; expected one of {TARGET_TAGS}")
    n = spec.n if isinstance(spec, ManifoldSpec) else int(spec)
    rng = np.random.default_rng([seed, 0x74617267])
    if tag == "linear":
        w = params.get("weights")
        if w is None:
            w = rng.normal(size=n)
            w /= np.linalg.norm(w)
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (n,):
            raise ConfigurationError(f"weights must have length {n}")
        return TargetFunction(tag, n, {"weights": w}, float(np.linalg.norm(w)))
    if tag == "lipschitz_trig":
        terms = int(params.get("terms", 4))
        frequency = float(params.get("frequency", 3.0))
        dirs = rng.normal(size=(terms, n))
        dirs *= frequency / np.linalg.norm(dirs, axis=1, keepdims=True)
        amps = rng.uniform(-1.0, 1.0, size=terms) / terms
        phases = rng.uniform(0.0, 2 * np.pi, size=terms)
        lip = float(np.sum(np.abs(amps) * np.linalg.norm(dirs, axis=1)))
        return TargetFunction(tag, n, {"directions": dirs, "amplitudes": amps, "phases": phases}, lip)
    centers = params.get("centers")
    if centers is None:
        regions = int(params.get("regions", 1))
        if regions < 1:
            raise ConfigurationError("regions must be >= 1")
        if isinstance(spec, ManifoldSpec):
            centers = sample_manifold(spec, regions, [seed, 0x63656E74])
        else:
            centers = rng.normal(size=(regions, n)) / math.sqrt(n)
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    values = params.get("values")
    values = rng.uniform(-1.0, 1.0, size=len(centers)) if values is None else np.asarray(values, dtype=np.float64)
    if values.shape != (len(centers),):
        raise ConfigurationError("need one value per region")
    return TargetFunction(tag, n, {"centers": centers, "values": values}, None)


@dataclass(frozen=True, eq=False)
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    kind: str = "regression"
    provenance: dict = field(default_factory=dict)
    seed: int | None = None
    latent: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.inputs, dtype=np.float64)
        y = np.asarray(self.targets, dtype=np.int64 if self.kind == "classification" else np.float64)
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown dataset kind {self.kind!r}")
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise InputError(f"inputs {X.shape} and targets {y.shape} do not line up")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InputError("dataset entries must be finite")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "targets", y)

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def classes(self):
        return np.unique(self.targets)


def make_regression(spec, target, count, seed, latent_range=(0.0, 1.0)):
    X, T = sample_manifold(spec, count, seed, latent_range, return_latent=True)
    return Dataset(X, target(X), "regression", {"manifold": spec, "target": target.tag}, seed, T)


def class_manifolds(spec, n_classes, label_seed=0, separation=2.0):
    """One manifold per class: fresh embeddings of ``spec`` shifted by random
    offsets of norm ``separation * amplitude``."""
    rng = np.random.default_rng([label_seed, 0x636C7573])
    specs = [replace(spec, embedding_seed=int(s)) for s in rng.integers(0, 2**63, size=n_classes)]
    offsets = rng.normal(size=(n_classes, spec.n))
    offsets *= separation * spec.amplitude / np.linalg.norm(offsets, axis=1, keepdims=True)
    return specs, offsets


def make_classification(spec, n_classes, count, seed, label_seed=0, layout="voronoi", separation=2.0):
    """Labelled manifold data.

    ``voronoi``
        Points on one manifold labelled by the nearest of ``n_classes``
        centres drawn on it.
    ``clusters``
        Each class is its own manifold (see :func:`class_manifolds`); labels
        are drawn uniformly.
    """
    prov = {"manifold": spec, "classes": n_classes, "label_seed": label_seed, "layout": layout}
    if layout == "voronoi":
        regions = make_target("region_constant", spec, label_seed, regions=n_classes,
                              values=np.arange(n_classes, dtype=np.float64))
        X, T = sample_manifold(spec, count, seed, return_latent=True)
        return Dataset(X, regions.region(X), "classification", prov, seed, T)
    if layout != "clusters":
        raise ConfigurationError(f"unknown class layout {layout!r}")
    specs, offsets = class_manifolds(spec, n_classes, label_seed, separation)
    rng = np.random.default_rng(seed)
    y = rng.integers(0, n_classes, size=int(count))
    T = rng.uniform(0.0, 1.0, size=(int(count), spec.m))
    X = np.empty((int(count), spec.n))
    for c in range(n_classes):
        sel = y == c
        X[sel] = embed(specs[c], T[sel]) + offsets[c]
    prov["separation"] = separation
    return Dataset(X, y, "classification", prov, seed, T)


def scramble_labels(ds, seed):
    """Replace labels by i.i.d. uniform draws over the observed label alphabet."""
    if ds.kind != "classification":
        raise TypeError("scramble_labels needs a classification dataset")
    alphabet = ds.classes
    labels = alphabet[np.random.default_rng(seed).integers(0, alphabet.size, size=len(ds))]
    prov = dict(ds.provenance, scrambled_seed=seed)
    return replace(ds, targets=labels, provenance=prov)


def load_csv(path, target_column, feature_columns=None, kind="regression", standardize=False):
    """Read a headered, comma-separated UTF-8 file into a :class:`Dataset`.

    Error locations count data rows from 1 (the header is not a data row) and
    columns from 1.
    """
    if kind not in KINDS:
        raise ConfigurationError(f"unknown dataset kind {kind!r}")
    if not os.path.isfile(path):
        raise IngestionError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path} is empty") from None
        header = [h.strip() for h in header]
        if target_column not in header:
            raise IngestionError(f"target column {target_column!r} not in header")
        features = [h for h in header if h != target_column] if feature_columns is None else list(feature_columns)
        missing = [c for c in features if c not in header]
        if missing:
            raise IngestionError(f"feature columns not in header: {missing}")
        idx = [header.index(c) for c in features]
        t_idx = header.index(target_column)
        rows = []
        for r, raw in enumerate(reader, start=1):
            if not raw:
                continue
            if len(raw) != len(header):
                raise IngestionError(f"expected {len(header)} cells, found {len(raw)}", row=r)
            vals = []
            for c in idx + [t_idx]:
                try:
                    v = float(raw[c])
                except ValueError:
                    raise IngestionError(f"non-numeric cell {raw[c]!r}", row=r, column=c + 1) from None
                if not math.isfinite(v):
                    raise IngestionError(f"non-finite cell {raw[c]!r}", row=r, column=c + 1)
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise IngestionError(f"{path} has no data rows")
    arr = np.array(rows)
    X, y = arr[:, :-1], arr[:, -1]
    if kind == "classification":
        if np.any(y != np.round(y)):
            raise IngestionError("classification labels must be integers")
        y = y.astype(np.int64)
    if standardize:
        std = X.std(axis=0)
        X = (X - X.mean(axis=0)) / np.where(std > 0, std, 1.0)
    prov = {"csv": os.fspath(path), "features": features, "target": target_column, "standardized": standardize}
    return Dataset(X, y, kind, prov)


def save_csv(ds, path, feature_names=None, target_name="target"):
    """Write a dataset in the format :func:`load_csv` reads."""
    n = ds.inputs.shape[1]
    names = feature_names or [f"x{i}" for i in range(n)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(names) + [target_name])
        for x, t in zip(ds.inputs, ds.targets):
            writer.writerow([repr(float(v)) for v in x] + [str(int(t)) if ds.kind == "classification" else repr(float(t))])
