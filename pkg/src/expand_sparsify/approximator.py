"""Binary expand-and-sparsify hidden layer with a weighted-average readout.

The readout weight of hidden unit ``j`` is the mean target over the fitting
samples that activate it.  A prediction averages the readout weights of the
units active for the input:

    f_hat(u) = sum_j w'_j z_j / sum_j z_j

Both the region means and the prediction averages use compensated summation
and a corrected division, so they are accurate to about one ulp; in
particular a constant target is reproduced exactly.

Targets may be scalars or rows of a matrix (one column per class for one-hot
classification).
"""

from dataclasses import dataclass, replace

import numpy as np

from .exceptions import ConfigurationError, FitError, InputError, NoActiveUnitsError, ShapeError
from .projection import ProjectionMatrix, project_batch
from .sparsify import ThresholdVector, apply_dropout, binary_codes

FALLBACKS = ("error", "global_mean")


@dataclass(frozen=True, eq=False)
class EasApproximator:
    W: ProjectionMatrix
    tau: ThresholdVector
    readout: np.ndarray
    counts: np.ndarray
    dead_mask: np.ndarray
    global_mean: np.ndarray
    exclude_dead: bool = False

    @property
    def d(self):
        return self.W.d

    @property
    def n(self):
        return self.W.n

    @property
    def n_outputs(self):
        return 1 if self.readout.ndim == 1 else self.readout.shape[1]

    def codes(self, U, dropout_rate=None, dropout_seed=None):
        Z = binary_codes(project_batch(self.W, U), self.tau)
        if dropout_rate:
            Z = apply_dropout(Z, dropout_rate, dropout_seed)
        return Z


def _as_targets(targets, count):
    y = np.asarray(targets, dtype=np.float64)
    if y.ndim not in (1, 2) or y.shape[0] != count:
        raise ShapeError(f"expected {count} targets, got array of shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise FitError("targets must be finite")
    return y


def _two_sum(a, b):
    s = a + b
    bp = s - a
    return s, (a - (s - bp)) + (b - bp)


def _two_prod(a, b):
    p = a * b
    ca, cb = 134217729.0 * a, 134217729.0 * b
    ah, bh = ca - (ca - a), cb - (cb - b)
    al, bl = a - ah, b - bh
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _segment_sums(seg, values, nseg):
    """Compensated sums of ``values`` grouped by the sorted segment ids ``seg``.

    Each segment is accumulated in its own item order; returns the unevaluated
    pair ``(hi, lo)`` and the item counts.
    """
    counts = np.bincount(seg, minlength=nseg)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    hi = np.zeros((nseg,) + values.shape[1:])
    lo = np.zeros_like(hi)
    by_size = np.argsort(-counts, kind="stable")
    remaining = counts[by_size]
    for r in range(int(counts.max(initial=0))):
        segs = by_size[:np.count_nonzero(remaining > r)]
        s, e = _two_sum(hi[segs], values[starts[segs] + r])
        hi[segs] = s
        lo[segs] += e
    return hi, lo, counts


def _divide(hi, lo, denom):
    """``(hi + lo) / denom`` with one correction step; ``denom`` must be > 0."""
    den = denom.astype(np.float64)
    if hi.ndim == 2:
        den = den[:, None]
    q = (hi + lo) / den
    p, pe = _two_prod(q, den)
    return q + (((hi - p) - pe) + lo) / den


def region_means(Z, y):
    """Per-unit target means over the samples each unit is active for.

    Returns ``(readout, counts)``; units with no activations get weight 0.
    """
    Z = np.asarray(Z, dtype=bool)
    units, samples = np.nonzero(Z.T)
    hi, lo, counts = _segment_sums(units, y[samples], Z.shape[1])
    readout = np.zeros_like(hi)
    live = counts > 0
    readout[live] = _divide(hi[live], lo[live], counts[live])
    return readout, counts.astype(np.int64)


def fit_readout(W, tau, inputs, targets, exclude_dead=False, dropout_rate=None, dropout_seed=None):
    """Fit the region-mean readout on ``(inputs, targets)``.

    Parameters
    ----------
    W : ProjectionMatrix
    tau : ThresholdVector
    inputs : array of shape (samples, n)
    targets : array of shape (samples,) or (samples, outputs)
    exclude_dead : bool
        If set, units that were dead at fit time do not count in the
        prediction denominator.
    dropout_rate, dropout_seed : optional
        Drop active units of the fitting codes before averaging.
    """
    X = np.asarray(inputs, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise FitError("need a non-empty list of fitting samples")
    if tau.d != W.d:
        raise ShapeError(f"threshold length {tau.d} does not match d={W.d}")
    y = _as_targets(targets, X.shape[0])
    Z = binary_codes(project_batch(W, X), tau)
    if dropout_rate:
        Z = apply_dropout(Z, dropout_rate, dropout_seed)
    readout, counts = region_means(Z, y)
    return EasApproximator(W, tau, readout, counts, counts == 0, y.mean(axis=0), exclude_dead)


def _weighted_average(Z, weights, denom_mask=None):
    # Sums run over the active units of each row in increasing unit order, so
    # removing never-active units leaves every result bit-identical.
    rows, cols = np.nonzero(Z)
    if denom_mask is None:
        denom = Z.sum(axis=1)
    else:
        denom = (Z & denom_mask[None, :]).sum(axis=1)
    hi, lo, _ = _segment_sums(rows, weights[cols], Z.shape[0])
    out = np.zeros_like(hi)
    nonempty = denom > 0
    out[nonempty] = _divide(hi[nonempty], lo[nonempty], denom[nonempty])
    return out, denom


def predict_batch(model, U, fallback="error", dropout_rate=None, dropout_seed=None):
    """Predictions for each row of ``U``.

    Returns ``(predictions, no_active)`` where ``no_active`` flags inputs whose
    code had no usable unit; those receive the fitted global mean when
    ``fallback="global_mean"``.
    """
    if fallback not in FALLBACKS:
        raise ConfigurationError(f"unknown fallback {fallback!r}; expected one of {FALLBACKS}")
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2 or U.shape[1] != model.n:
        raise ShapeError(f"expected inputs of length {model.n}, got shape {U.shape}")
    Z = model.codes(U, dropout_rate, dropout_seed)
    pred, denom = _weighted_average(Z, model.readout, ~model.dead_mask if model.exclude_dead else None)
    empty = denom == 0
    if np.any(empty) and fallback == "error":
        raise NoActiveUnitsError(f"{int(empty.sum())} input(s) activate no hidden unit")
    pred[empty] = model.global_mean
    return pred, empty


def predict(model, u):
    """Weighted-average prediction for a single input.

    Raises
    ------
    NoActiveUnitsError
        If the code of ``u`` has no active unit.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 1:
        raise ShapeError(f"expected a single input vector, got shape {u.shape}")
    pred, _ = predict_batch(model, u[None, :], fallback="error")
    return pred[0] if pred.ndim == 1 else pred[0].copy()


def evaluate(model, inputs, targets, fallback="global_mean"):
    """Absolute-error statistics of the model on a test set."""
    X = np.asarray(inputs, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InputError("test set must be non-empty")
    y = _as_targets(targets, X.shape[0])
    pred, empty = predict_batch(model, X, fallback=fallback)
    err = np.abs(pred - y)
    if err.ndim == 2:
        err = err.max(axis=1)
    return {
        "mean_abs_err": float(err.mean()),
        "max_abs_err": float(err.max()),
        "rmse": float(np.sqrt(np.mean(err ** 2))),
        "no_active_count": int(empty.sum()),
    }


def prune_dead(model, reference_inputs):
    """Drop hidden units that no reference input activates.

    Returns ``(pruned_model, removed_count)``.  Predictions on the reference
    inputs are bit-identical before and after.
    """
    R = np.asarray(reference_inputs, dtype=np.float64)
    if R.ndim != 2 or R.shape[0] == 0:
        raise InputError("reference_inputs must be non-empty")
    keep = np.flatnonzero(model.codes(R).any(axis=0))
    removed = model.d - keep.size
    if removed == 0:
        return model, 0
    if keep.size == 0:
        raise InputError("no reference input activates any unit; nothing would remain")
    pruned = replace(
        model,
        W=model.W.select(keep),
        tau=model.tau.select(keep),
        readout=model.readout[keep],
        counts=model.counts[keep],
        dead_mask=model.dead_mask[keep],
    )
    return pruned, int(removed)


def permute_units(model, order):
    """Reorder hidden units; predictions are unchanged up to rounding."""
    order = np.asarray(order, dtype=np.int64)
    if np.sort(order).tolist() != list(range(model.d)):
        raise ConfigurationError("order must be a permutation of the hidden units")
    return replace(
        model,
        W=model.W.select(order),
        tau=model.tau.select(order),
        readout=model.readout[order],
        counts=model.counts[order],
        dead_mask=model.dead_mask[order],
    )
