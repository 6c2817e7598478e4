"""Locality-sensitivity diagnostics for binary codes.

``similarity_profile`` measures how code overlap decays as inputs are pushed
apart; ``adversarial_probe`` is a greedy search for a small input change that
flips many code bits.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, InputError, ShapeError
from .projection import project, project_batch
from .sparsify import binary_codes


@dataclass(frozen=True, eq=False)
class OverlapProfile:
    """Per-radius overlap statistics.

    ``std_overlap`` is the pooled spread of the overlap across perturbations
    of the same base input; ``se_overlap`` is the standard error of
    ``mean_overlap`` computed from the spread of the per-base means.
    """

    distance_bins: list
    mean_overlap: np.ndarray
    std_overlap: np.ndarray
    pair_count: np.ndarray
    mean_active: float = float("nan")
    se_overlap: np.ndarray | None = None

    def standard_errors(self):
        if self.se_overlap is not None:
            return self.se_overlap
        return self.std_overlap / np.sqrt(np.maximum(self.pair_count, 1))

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["bin_lo", "bin_hi", "mean", "std", "count"])
            for (lo, hi), mu, sd, c in zip(self.distance_bins, self.mean_overlap, self.std_overlap, self.pair_count):
                writer.writerow([repr(float(lo)), repr(float(hi)), repr(float(mu)), repr(float(sd)), int(c)])


def code_overlap(z, z_other):
    """Number of indices active in both codes."""
    if z.d != z_other.d:
        raise ShapeError(f"codes have different lengths {z.d} and {z_other.d}")
    return int(np.intersect1d(z.active, z_other.active, assume_unique=True).size)


def random_unit_vectors(rng, count, n):
    g = rng.normal(size=(count, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _encode(W, tau, U, normalize):
    U = np.asarray(U, dtype=np.float64)
    if normalize:
        U = U / np.linalg.norm(U, axis=1, keepdims=True)
    return binary_codes(project_batch(W, U), tau)


def similarity_profile(W, tau, base_inputs, radii, pairs_per_radius=1000, seed=0, normalize=False,
                       directions_per_base=2):
    """Overlap statistics between codes of ``u`` and ``u + eps * r``.

    For each radius ``eps``, ``pairs_per_radius // directions_per_base`` base
    inputs are drawn (with replacement) and each is perturbed along
    ``directions_per_base`` directions ``r`` uniform on the unit sphere, so the
    input distance is exactly ``eps``.  With ``normalize`` both inputs are
    scaled to unit norm before encoding.
    """
    base = np.asarray(base_inputs, dtype=np.float64)
    if base.ndim != 2 or base.shape[0] == 0:
        raise InputError("base_inputs must be non-empty")
    radii = np.asarray(radii, dtype=np.float64)
    if radii.ndim != 1 or radii.size == 0 or np.any(radii < 0) or np.any(np.diff(radii) <= 0):
        raise ConfigurationError("radii must be non-negative and strictly increasing")
    R = int(directions_per_base)
    if R < 2:
        raise ConfigurationError("directions_per_base must be >= 2")
    if pairs_per_radius < 2 * R or pairs_per_radius % R:
        raise ConfigurationError(f"pairs_per_radius must be a multiple of {R} and at least {2 * R}")
    B = pairs_per_radius // R
    rng = np.random.default_rng(seed)
    means, stds, ses, counts, active = [], [], [], [], []
    for eps in radii:
        u = np.repeat(base[rng.integers(0, base.shape[0], size=B)], R, axis=0)
        u_prime = u + eps * random_unit_vectors(rng, B * R, base.shape[1])
        z = _encode(W, tau, u, normalize)
        overlap = (z & _encode(W, tau, u_prime, normalize)).sum(axis=1).reshape(B, R)
        means.append(overlap.mean())
        stds.append(np.sqrt(overlap.var(axis=1, ddof=1).mean()))
        ses.append(overlap.mean(axis=1).std(ddof=1) / np.sqrt(B))
        counts.append(B * R)
        active.append(z.sum(axis=1).mean())
    return OverlapProfile([(float(e), float(e)) for e in radii], np.array(means), np.array(stds),
                          np.array(counts), float(np.mean(active)), np.array(ses))


def independent_overlap(W, tau, inputs_a, inputs_b, normalize=False):
    """Per-pair overlap of codes of two independent input samples."""
    return (_encode(W, tau, inputs_a, normalize) & _encode(W, tau, inputs_b, normalize)).sum(axis=1)


def _hamming_to(Z, z0):
    return (Z != z0[None, :]).sum(axis=1)


def adversarial_probe(W, tau, u, step, max_steps, seed=0):
    """Greedy coordinate search for a nearby input with a different code.

    Each step moves one coordinate by ``+-step``, choosing the move with the
    most flipped bits (relative to the code of ``u``) per unit of distance from
    ``u``.  Ties go to the move that brings the nearest unflipped unit closest
    to its threshold, then to a seeded random choice.

    Returns ``{"u_prime", "input_distance", "code_hamming"}``.
    """
    if not step > 0:
        raise ConfigurationError(f"step must be > 0, got {step}")
    u = np.asarray(u, dtype=np.float64)
    taus = tau.taus
    p0 = project(W, u)
    z0 = p0 >= taus
    if max_steps <= 0:
        return {"u_prime": u.copy(), "input_distance": 0.0, "code_hamming": 0}
    rng = np.random.default_rng(seed)
    n = W.n
    norms = np.linalg.norm(W.rows, axis=1)
    moves = np.concatenate([np.eye(n), -np.eye(n)]) * step
    delta = np.zeros(n)
    p = p0.copy()
    for _ in range(int(max_steps)):
        cand_delta = delta[None, :] + moves
        cand_p = p[None, :] + moves @ W.rows.T
        flips = _hamming_to(cand_p >= taus[None, :], z0)
        dist = np.linalg.norm(cand_delta, axis=1)
        ratio = flips / np.where(dist > 0, dist, np.inf)
        margins = np.abs(cand_p - taus[None, :]) / norms[None, :]
        margins = np.where((cand_p >= taus[None, :]) == z0[None, :], margins, np.inf).min(axis=1)
        order = np.lexsort((rng.random(len(moves)), margins, -ratio))
        best = order[0]
        delta = cand_delta[best]
        p = p0 + W.rows @ delta
    u_prime = u + delta
    z = project(W, u_prime) >= taus
    return {"u_prime": u_prime, "input_distance": float(np.linalg.norm(delta)), "code_hamming": int((z != z0).sum())}


def random_walk_baseline(W, tau, u, step, max_steps, seed=0, input_distance=None):
    """Code change after a random coordinate walk of ``max_steps`` moves of ``+-step``.

    When ``input_distance`` is given the final displacement is rescaled to
    that length so it can be compared with a probe at equal distance.
    """
    u = np.asarray(u, dtype=np.float64)
    rng = np.random.default_rng(seed)
    n = W.n
    delta = np.zeros(n)
    for _ in range(int(max_steps)):
        delta[rng.integers(0, n)] += step * rng.choice((-1.0, 1.0))
    norm = np.linalg.norm(delta)
    if input_distance is not None:
        if norm == 0:
            delta = random_unit_vectors(rng, 1, n)[0] * input_distance
        else:
            delta *= input_distance / norm
    z0 = project(W, u) >= tau.taus
    z = project(W, u + delta) >= tau.taus
    return {"u_prime": u + delta, "input_distance": float(np.linalg.norm(delta)), "code_hamming": int((z != z0).sum())}
