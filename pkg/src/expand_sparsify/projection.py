"""Random expansion matrices and their application to inputs."""

from dataclasses import dataclass, field

import numpy as np

from ._rng import gaussians, row_keys
from .exceptions import ConfigurationError, InputError, ShapeError

DISTRIBUTIONS = ("gaussian", "unit_sphere", "explicit")

# inputs are projected in chunks so the per-chunk buffers stay cache sized
_CHUNK_ELEMENTS = 1 << 16
_GRAM_ELEMENTS = 1 << 22


@dataclass(frozen=True, eq=False)
class ProjectionMatrix:
    """A ``d x n`` matrix whose rows are random directions in ``R^n``.

    ``row_ids`` records which rows of the generating stream are present, so a
    pruned matrix still knows where its rows came from.
    """

    rows: np.ndarray
    dist: str = "explicit"
    sigma: float | None = None
    seed: int | None = None
    row_ids: np.ndarray = field(default=None)

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.float64, copy=True)
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
            raise ConfigurationError(f"projection rows must be a non-empty 2-D array, got shape {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise ConfigurationError("projection rows must be finite")
        if self.dist not in DISTRIBUTIONS:
            raise ConfigurationError(f"unknown distribution {self.dist!r}")
        rows.flags.writeable = False
        row_ids = np.arange(rows.shape[0]) if self.row_ids is None else np.array(self.row_ids, dtype=np.int64)
        if row_ids.shape != (rows.shape[0],):
            raise ConfigurationError("row_ids must have one entry per row")
        row_ids.flags.writeable = False
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "row_ids", row_ids)

    @property
    def d(self):
        return self.rows.shape[0]

    @property
    def n(self):
        return self.rows.shape[1]

    def select(self, indices):
        """Sub-matrix made of the given rows, in the given order."""
        indices = np.asarray(indices, dtype=np.int64)
        return ProjectionMatrix(self.rows[indices], self.dist, self.sigma, self.seed, self.row_ids[indices])

    def __repr__(self):
        return f"ProjectionMatrix(n={self.n}, d={self.d}, dist={self.dist!r}, sigma={self.sigma}, seed={self.seed})"


def _generate_rows(n, row_ids, dist, sigma, seed):
    g = gaussians(row_keys(seed, row_ids), n)
    if dist == "gaussian":
        return sigma * g
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_projection(n, d, dist="gaussian", seed=0, sigma=None):
    """Draw a ``d x n`` projection matrix.

    Parameters
    ----------
    n, d : int
        Input and expansion dimensions.
    dist : {"gaussian", "unit_sphere"}
        Row distribution. Gaussian entries are i.i.d. N(0, sigma^2); unit-sphere
        rows are normalised Gaussian rows.
    seed : int
        64-bit seed. Row ``j`` depends only on ``(seed, j)``.
    sigma : float, optional
        Gaussian scale, default ``1/sqrt(n)``. Ignored for ``unit_sphere``.
    """
    if int(n) < 1 or int(d) < 1:
        raise ConfigurationError(f"dimensions must be >= 1, got n={n}, d={d}")
    n, d = int(n), int(d)
    if dist == "gaussian":
        sigma = 1.0 / np.sqrt(n) if sigma is None else float(sigma)
        if not sigma > 0 or not np.isfinite(sigma):
            raise ConfigurationError(f"gaussian sigma must be > 0, got {sigma}")
    elif dist == "unit_sphere":
        sigma = None
    else:
        raise ConfigurationError(f"unknown distribution {dist!r}; expected 'gaussian' or 'unit_sphere'")
    row_ids = np.arange(d, dtype=np.int64)
    return ProjectionMatrix(_generate_rows(n, row_ids, dist, sigma, seed), dist, sigma, int(seed), row_ids)


def regenerate_rows(W):
    """Recompute the rows of ``W`` from its seed and row ids."""
    if W.dist not in ("gaussian", "unit_sphere"):
        raise ConfigurationError("explicit matrices cannot be regenerated")
    return _generate_rows(W.n, W.row_ids, W.dist, W.sigma, W.seed)


def _check_inputs(W, U):
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2 or U.shape[1] != W.n:
        raise ShapeError(f"expected inputs of length {W.n}, got array of shape {U.shape}")
    if not np.all(np.isfinite(U)):
        raise InputError("inputs must be finite")
    return U


def _accumulate(rows, U):
    # out[b, j] = sum_i U[b, i] * rows[j, i], summed left to right in i.
    # Multiply and add are separate ufuncs, so no FMA contraction.
    B, n = U.shape
    out = np.zeros((B, rows.shape[0]))
    tmp = np.empty_like(out)
    cols = np.ascontiguousarray(rows.T)
    for i in range(n):
        np.multiply(U[:, i, None], cols[i][None, :], out=tmp)
        out += tmp
    return out


def project(W, u):
    """Projected vector ``W u`` of length ``d``."""
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 1:
        raise ShapeError(f"expected a single input vector, got shape {u.shape}")
    return _accumulate(W.rows, _check_inputs(W, u[None, :]))[0]


def project_batch(W, U):
    """Projections of each row of ``U``; row ``i`` is bit-identical to ``project(W, U[i])``."""
    U = _check_inputs(W, U)
    step = max(1, _CHUNK_ELEMENTS // W.d)
    if U.shape[0] <= step:
        return _accumulate(W.rows, U)
    out = np.empty((U.shape[0], W.d))
    for start in range(0, U.shape[0], step):
        out[start:start + step] = _accumulate(W.rows, U[start:start + step])
    return out


def pairwise_coherence(W, sample_pairs=10_000, seed=0):
    """Statistics of ``|cos|`` between distinct rows of ``W``.

    Exhaustive over all pairs when ``d(d-1)/2 <= sample_pairs``, otherwise over
    ``sample_pairs`` seeded draws of distinct row pairs.

    Returns
    -------
    dict with ``max_abs_cosine``, ``mean_abs_cosine`` and ``pairs``.
    """
    d = W.d
    if d < 2:
        raise ConfigurationError("coherence needs at least two rows")
    if sample_pairs < 1:
        raise ConfigurationError("sample_pairs must be >= 1")
    unit = W.rows / np.linalg.norm(W.rows, axis=1, keepdims=True)
    total = d * (d - 1) // 2
    if total <= sample_pairs:
        largest, acc = 0.0, 0.0
        block = max(1, _GRAM_ELEMENTS // d)
        for start in range(0, d - 1, block):
            g = np.abs(unit[start:start + block] @ unit.T)
            rows = np.arange(start, min(start + block, d))
            mask = np.arange(d)[None, :] > rows[:, None]
            vals = np.minimum(g[mask], 1.0)
            if vals.size:
                largest = max(largest, float(vals.max()))
                acc += float(vals.sum())
        return {"max_abs_cosine": largest, "mean_abs_cosine": acc / total, "pairs": total}
    rng = np.random.default_rng(seed)
    i = rng.integers(0, d, size=sample_pairs)
    j = (i + rng.integers(1, d, size=sample_pairs)) % d
    cos = np.minimum(np.abs(np.einsum("ij,ij->i", unit[i], unit[j])), 1.0)
    return {"max_abs_cosine": float(cos.max()), "mean_abs_cosine": float(cos.mean()), "pairs": int(cos.size)}
