"""scikit-learn compatible wrappers.

``ExpandSparsify`` is a transformer producing sparse codes, ``EasRegressor``
and ``EasClassifier`` fit the weighted-average readout on top of it.  All
three take ``random_state`` as the 64-bit seed of the counter-based
projection stream, so a fitted estimator can be rebuilt from its parameters.
"""

import math
import numbers

import numpy as np
from scipy import sparse
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .approximator import evaluate, fit_readout, predict_batch, prune_dead
from .exceptions import ConfigurationError
from .projection import project_batch, sample_projection
from .sparsify import MODES, SparseCode, apply_dropout, binary_codes, estimate_thresholds, relu_codes, topk_codes


def default_k(d):
    """``ceil(8 ln d)``, the default sparsity for ``d`` hidden units."""
    return max(1, min(d, math.ceil(8.0 * math.log(d)))) if d > 1 else 1


def _seed(random_state):
    if random_state is None:
        return 0
    if isinstance(random_state, numbers.Integral):
        return int(random_state) & ((1 << 64) - 1)
    if isinstance(random_state, np.random.RandomState):
        return int(random_state.randint(0, 2**63 - 1, dtype=np.int64))
    if isinstance(random_state, np.random.Generator):
        return int(random_state.integers(0, 2**63 - 1))
    raise ConfigurationError(f"random_state must be an int, RandomState or Generator, got {random_state!r}")


class _HiddenLayerMixin:
    def _resolved_k(self):
        k = default_k(self.n_components) if self.k is None else int(self.k)
        if not 1 <= k <= self.n_components:
            raise ConfigurationError(f"k must satisfy 1 <= k <= n_components={self.n_components}, got {k}")
        return k

    def _build_layer(self, X, calibration=None):
        if int(self.n_components) < 1:
            raise ConfigurationError(f"n_components must be >= 1, got {self.n_components}")
        self.seed_ = _seed(self.random_state)
        self.k_ = self._resolved_k()
        self.projection_ = sample_projection(X.shape[1], self.n_components, self.dist, self.seed_, self.sigma)
        calib = X if calibration is None else check_array(calibration)
        self.thresholds_ = estimate_thresholds(self.projection_, calib, self.k_, self.seed_)
        self.n_features_in_ = X.shape[1]


class ExpandSparsify(_HiddenLayerMixin, TransformerMixin, BaseEstimator):
    """Random expansion followed by sparsification.

    Parameters
    ----------
    n_components : int
        Expansion dimension ``d``.
    k : int, optional
        Target sparsity; ``ceil(8 ln d)`` when omitted.
    mode : {"threshold_binary", "threshold_relu", "topk"}
        Percentile thresholds with 0/1 or ReLU output, or exactly the ``k``
        largest projections.
    dist : {"gaussian", "unit_sphere"}
    sigma : float, optional
        Gaussian scale, ``1/sqrt(n_features)`` when omitted.
    dropout_rate : float, optional
        Drop active units with this probability in :meth:`transform`.
    sparse_output : bool
        Return a ``scipy.sparse.csr_matrix`` instead of a dense array.
    random_state : int
    """

    def __init__(self, n_components=2000, k=None, mode="threshold_binary", dist="gaussian", sigma=None,
                 dropout_rate=None, sparse_output=False, random_state=0):
        self.n_components = n_components
        self.k = k
        self.mode = mode
        self.dist = dist
        self.sigma = sigma
        self.dropout_rate = dropout_rate
        self.sparse_output = sparse_output
        self.random_state = random_state

    def fit(self, X, y=None):
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        X = check_array(X)
        self._build_layer(X)
        return self

    def _masks(self, X, dropout_seed=None):
        P = project_batch(self.projection_, X)
        if self.mode == "topk":
            out = topk_codes(P, self.k_).astype(np.float64)
        elif self.mode == "threshold_relu":
            out = relu_codes(P, self.thresholds_)
        else:
            out = binary_codes(P, self.thresholds_).astype(np.float64)
        if self.dropout_rate:
            out = out * apply_dropout(out > 0, self.dropout_rate, dropout_seed)
        return out

    def transform(self, X, dropout_seed=None):
        check_is_fitted(self, "projection_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        out = self._masks(X, dropout_seed)
        return sparse.csr_matrix(out) if self.sparse_output else out

    def codes(self, X):
        """One :class:`SparseCode` per row of ``X``."""
        dense = self.transform(X)
        dense = dense.toarray() if sparse.issparse(dense) else dense
        keep_values = self.mode == "threshold_relu"
        return [SparseCode.from_mask(row > 0, row if keep_values else None) for row in dense]

    def get_feature_names_out(self, input_features=None):
        return np.array([f"unit{j}" for j in range(self.n_components)], dtype=object)


class _ReadoutBase(_HiddenLayerMixin, BaseEstimator):
    """Binary expand-and-sparsify layer with a region-mean readout.

    Parameters
    ----------
    n_components : int
        Number of hidden units ``d``.
    k : int, optional
        Expected active units per input; ``ceil(8 ln d)`` when omitted.
    dist : {"gaussian", "unit_sphere"}
    sigma : float, optional
    fallback : {"global_mean", "error"}
        What :meth:`predict` does for inputs that activate no unit.
    exclude_dead : bool
        Leave units unseen during fitting out of the prediction denominator.
    random_state : int
    """

    def __init__(self, n_components=2000, k=None, dist="gaussian", sigma=None, fallback="global_mean",
                 exclude_dead=False, random_state=0):
        self.n_components = n_components
        self.k = k
        self.dist = dist
        self.sigma = sigma
        self.fallback = fallback
        self.exclude_dead = exclude_dead
        self.random_state = random_state

    def _raw_predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X)
        pred, empty = predict_batch(self.model_, X, fallback=self.fallback)
        return pred, empty

    def score_errors(self, X, y):
        """Absolute-error summary, see :func:`expand_sparsify.approximator.evaluate`."""
        check_is_fitted(self, "model_")
        return evaluate(self.model_, check_array(X), y, fallback=self.fallback)

    def prune(self, X):
        """Remove hidden units that no row of ``X`` activates; returns the count removed."""
        check_is_fitted(self, "model_")
        self.model_, removed = prune_dead(self.model_, check_array(X))
        self.projection_, self.thresholds_ = self.model_.W, self.model_.tau
        return removed

    @property
    def dead_units_(self):
        check_is_fitted(self, "model_")
        return int(self.model_.dead_mask.sum())


class EasRegressor(RegressorMixin, _ReadoutBase):
    __doc__ = _ReadoutBase.__doc__

    def fit(self, X, y, calibration=None):
        """Draw ``W``, calibrate thresholds (on ``calibration`` or ``X``) and fit the readout."""
        X, y = check_X_y(X, y, y_numeric=True, multi_output=True)
        self._build_layer(X, calibration)
        self.model_ = fit_readout(self.projection_, self.thresholds_, X, np.asarray(y, dtype=np.float64),
                                  self.exclude_dead)
        return self

    def predict(self, X):
        return self._raw_predict(X)[0]


class EasClassifier(ClassifierMixin, _ReadoutBase):
    """One region-mean readout per class; predicts the class with the largest average."""

    def fit(self, X, y, calibration=None):
        X, y = check_X_y(X, y)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        onehot = np.eye(self.classes_.size)[encoded]
        self._build_layer(X, calibration)
        self.model_ = fit_readout(self.projection_, self.thresholds_, X, onehot, self.exclude_dead)
        return self

    def predict_proba(self, X):
        return self._raw_predict(X)[0]

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
