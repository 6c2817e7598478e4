"""Counter-based random streams.

Row ``j`` of a projection matrix is generated from ``(seed, j)`` alone, so any
subset of rows can be regenerated without touching the others.  The mixer is
SplitMix64; Gaussian variates come from Box-Muller on pairs of 53-bit
uniforms.
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_ROW_SALT = np.uint64(0xD1B54A32D192ED03)
_MASK64 = (1 << 64) - 1


def splitmix64(x):
    """SplitMix64 finalizer applied elementwise to a uint64 array."""
    z = np.asarray(x, dtype=np.uint64).copy()
    with np.errstate(over="ignore"):
        z ^= z >> np.uint64(30)
        z *= _M1
        z ^= z >> np.uint64(27)
        z *= _M2
        z ^= z >> np.uint64(31)
    return z


def row_keys(seed, rows):
    """One 64-bit key per row index, derived from the master seed."""
    seed = np.uint64(int(seed) & _MASK64)
    rows = np.asarray(rows, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return splitmix64(splitmix64(seed ^ (rows * _ROW_SALT)) + _GOLDEN)


def uniforms(keys, count):
    """``count`` uniforms in (0, 1) per key; result has shape (len(keys), count)."""
    keys = np.asarray(keys, dtype=np.uint64)
    ctr = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        bits = splitmix64(keys[:, None] + ctr[None, :] * _GOLDEN)
    # 53 high bits, shifted by half an ulp so 0 is never produced
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / (1 << 53))


def gaussians(keys, count):
    """Standard normal variates via Box-Muller, shape (len(keys), count)."""
    pairs = (count + 1) // 2
    u = uniforms(keys, 2 * pairs)
    u1, u2 = u[:, 0::2], u[:, 1::2]
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    out = np.empty((u.shape[0], 2 * pairs))
    out[:, 0::2] = radius * np.cos(angle)
    out[:, 1::2] = radius * np.sin(angle)
    return out[:, :count]
