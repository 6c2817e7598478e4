"""Sparsification of projected vectors.

Two families are provided: per-unit percentile thresholds (binary step or
ReLU-valued output, k-sparse in expectation) and deterministic top-k
(exactly k active units).  Batch helpers work on ``(samples, d)`` arrays and
return boolean masks; the single-vector functions return :class:`SparseCode`.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .exceptions import CalibrationError, ConfigurationError, InputError, ShapeError
from .projection import project_batch

MODES = ("threshold_binary", "threshold_relu", "topk")
TIE_RULES = ("lowest_index",)


@dataclass(frozen=True)
class SparsifyConfig:
    mode: str = "threshold_binary"
    k: int = 1
    tie_rule: str = "lowest_index"
    dropout_rate: float | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown sparsify mode {self.mode!r}; expected one of {MODES}")
        if self.tie_rule not in TIE_RULES:
            raise ConfigurationError(f"unknown tie rule {self.tie_rule!r}")
        if int(self.k) < 1:
            raise ConfigurationError(f"k must be >= 1, got {self.k}")
        if self.dropout_rate is not None and not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigurationError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")

    def validate_for(self, d):
        if not 1 <= self.k <= d:
            raise ConfigurationError(f"k must satisfy 1 <= k <= d={d}, got {self.k}")


@dataclass(frozen=True, eq=False)
class ThresholdVector:
    """Per-unit activation thresholds.

    ``quantile_level`` is ``1 - k/d``; ``sample_size`` is the number of
    calibration inputs the thresholds were read off.
    """

    taus: np.ndarray
    quantile_level: float
    sample_size: int
    source_seed: int | None = None
    k: int | None = None

    def __post_init__(self):
        taus = np.array(self.taus, dtype=np.float64, copy=True)
        if taus.ndim != 1 or taus.size < 1:
            raise ShapeError("taus must be a non-empty 1-D array")
        if not np.all(np.isfinite(taus)):
            raise CalibrationError("thresholds must be finite")
        if not 0.0 <= self.quantile_level < 1.0:
            raise ConfigurationError(f"quantile_level must lie in [0, 1), got {self.quantile_level}")
        taus.flags.writeable = False
        object.__setattr__(self, "taus", taus)

    @property
    def d(self):
        return self.taus.size

    def select(self, indices):
        return ThresholdVector(self.taus[np.asarray(indices, dtype=np.int64)], self.quantile_level,
                               self.sample_size, self.source_seed, self.k)


@dataclass(frozen=True, eq=False)
class SparseCode:
    """Sorted active indices of a length-``d`` code, with optional values."""

    d: int
    active: np.ndarray
    values: np.ndarray | None = None

    def __post_init__(self):
        active = np.asarray(self.active, dtype=np.int64)
        if active.ndim != 1:
            raise ShapeError("active must be 1-D")
        if active.size and (np.any(np.diff(active) <= 0) or active[0] < 0 or active[-1] >= self.d):
            raise ShapeError("active indices must be strictly increasing and lie in [0, d)")
        object.__setattr__(self, "active", active)
        if self.values is not None:
            values = np.asarray(self.values, dtype=np.float64)
            if values.shape != active.shape:
                raise ShapeError("values must align with active indices")
            object.__setattr__(self, "values", values)

    def __len__(self):
        return int(self.active.size)

    def to_dense(self):
        out = np.zeros(self.d)
        out[self.active] = 1.0 if self.values is None else self.values
        return out

    @classmethod
    def from_mask(cls, mask, values=None):
        mask = np.asarray(mask, dtype=bool)
        active = np.flatnonzero(mask)
        return cls(mask.size, active, None if values is None else np.asarray(values)[active])


def _taus(tau, d=None):
    taus = tau.taus if isinstance(tau, ThresholdVector) else np.asarray(tau, dtype=np.float64)
    if d is not None and taus.shape != (d,):
        raise ShapeError(f"threshold length {taus.shape} does not match projection length {d}")
    return taus


def threshold_rank(S, k, d):
    """1-based rank ``floor(S (1 - k/d)) + 1`` of the calibration order statistic."""
    return S * (d - k) // d + 1


def thresholds_from_projections(P, k, source_seed=None):
    """Nearest-rank thresholds from a ``(S, d)`` array of calibration projections."""
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2:
        raise ShapeError("calibration projections must be 2-D")
    S, d = P.shape
    if S < 2:
        raise CalibrationError(f"need at least 2 calibration inputs, got {S}")
    if not 1 <= k <= d:
        raise ConfigurationError(f"k must satisfy 1 <= k <= d={d}, got {k}")
    r = threshold_rank(S, k, d)
    taus = np.partition(P, r - 1, axis=0)[r - 1]
    return ThresholdVector(taus, 1.0 - k / d, S, source_seed, int(k))


def estimate_thresholds(W, calibration, k, source_seed=None):
    """Per-unit thresholds at the ``1 - k/d`` empirical percentile.

    ``tau_j`` is the r-th smallest calibration projection onto row ``j`` with
    ``r = floor(S (1 - k/d)) + 1``, so with inclusive activation the in-sample
    activation fraction of every unit is ``(S - r + 1) / S``.
    """
    calibration = np.asarray(calibration, dtype=np.float64)
    if calibration.ndim != 2 or calibration.shape[0] < 2:
        raise CalibrationError(f"need at least 2 calibration inputs, got shape {calibration.shape}")
    if not 1 <= k <= W.d:
        raise ConfigurationError(f"k must satisfy 1 <= k <= d={W.d}, got {k}")
    return thresholds_from_projections(project_batch(W, calibration), k, source_seed)


def sparsify_binary(p, tau):
    """Active iff ``p_j >= tau_j``."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise ShapeError("expected a single projection vector")
    return SparseCode.from_mask(p >= _taus(tau, p.size))


def sparsify_relu(p, tau):
    """ReLU-valued code: active iff ``p_j - tau_j > 0``, value ``p_j - tau_j``."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise ShapeError("expected a single projection vector")
    shifted = p - _taus(tau, p.size)
    return SparseCode.from_mask(shifted > 0, shifted)


def _topk_order(P, k):
    # stable sort on the negated values puts the lowest index first among ties
    return np.argsort(-P, axis=-1, kind="stable")[..., :k]


def sparsify_topk(p, k, tie_rule="lowest_index", keep_values=False):
    """The ``k`` largest entries of ``p``; ties go to the lowest index."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise ShapeError("expected a single projection vector")
    if tie_rule not in TIE_RULES:
        raise ConfigurationError(f"unknown tie rule {tie_rule!r}")
    if not 1 <= k <= p.size:
        raise ConfigurationError(f"k must satisfy 1 <= k <= d={p.size}, got {k}")
    active = np.sort(_topk_order(p, k))
    return SparseCode(p.size, active, p[active] if keep_values else None)


def binary_codes(P, tau):
    """Boolean ``(samples, d)`` mask of ``P >= tau``."""
    P = np.asarray(P, dtype=np.float64)
    return P >= _taus(tau, P.shape[-1])[None, :]


def relu_codes(P, tau):
    return np.maximum(np.asarray(P, dtype=np.float64) - _taus(tau, P.shape[-1])[None, :], 0.0)


def topk_codes(P, k):
    P = np.asarray(P, dtype=np.float64)
    if not 1 <= k <= P.shape[1]:
        raise ConfigurationError(f"k must satisfy 1 <= k <= d={P.shape[1]}, got {k}")
    mask = np.zeros(P.shape, dtype=bool)
    np.put_along_axis(mask, _topk_order(P, k), True, axis=1)
    return mask


def apply_dropout(mask, rate, seed):
    """Zero each active entry independently with probability ``rate``."""
    mask = np.asarray(mask, dtype=bool)
    if not 0.0 <= rate < 1.0:
        raise ConfigurationError(f"dropout rate must lie in [0, 1), got {rate}")
    if rate == 0.0:
        return mask.copy()
    keep = np.random.default_rng(seed).random(mask.shape) >= rate
    return mask & keep


def measure_sparsity(W, tau, eval_inputs):
    """Active-count statistics of binary codes over ``eval_inputs``."""
    eval_inputs = np.asarray(eval_inputs, dtype=np.float64)
    if eval_inputs.ndim != 2 or eval_inputs.shape[0] == 0:
        raise InputError("eval_inputs must be a non-empty list of vectors")
    Z = binary_codes(project_batch(W, eval_inputs), tau)
    counts = Z.sum(axis=1)
    return {
        "mean_active": float(counts.mean()),
        "std_active": float(counts.std()),
        "per_unit_activation_rate": Z.mean(axis=0),
    }


def write_codes_csv(path, codes):
    """One CSV row per code: ``row,d,active`` with space-separated indices."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["row", "d", "active"])
        for i, code in enumerate(codes):
            writer.writerow([i, code.d, " ".join(str(int(j)) for j in code.active)])
