"""Low-level numerical kernels.

Gaussian interval masses and truncated moments (stable far into the tails),
the orthonormal DCT-II pair used as the sensing transform, row selection and
named, seeded random streams.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy import fft
from scipy.special import erf, erfcx

_SQRT2 = np.sqrt(2.0)
_SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)

# intervals with width * max(1, |centre|) below this use a midpoint expansion
_NARROW = 1e-4

STREAMS = {"rows": 0, "message": 1, "noise": 2, "se": 3, "trial": 4}


class TruncatedGaussianMoments(NamedTuple):
    mass: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    log_mass: np.ndarray


def _upper(a, b):
    # 0 <= a < b <= inf; every term is scaled by exp(a^2/2) so nothing underflows
    ea = erfcx(a / _SQRT2)
    eb = erfcx(b / _SQRT2)
    with np.errstate(invalid="ignore", over="ignore"):
        r = np.exp(-0.5 * (b - a) * (b + a))
        br = np.where(np.isinf(b), 0.0, b * r)
    d = ea - r * eb
    log_mass = np.log(0.5) - 0.5 * a * a + np.log(d)
    mean = _SQRT_2_OVER_PI * (1.0 - r) / d
    var = 1.0 + _SQRT_2_OVER_PI * (a - br) / d - mean * mean
    return log_mass, mean, var


def _straddle(a, b):
    # a < 0 <= b; the mass is a sum of two positive terms
    mass = 0.5 * (erf(b / _SQRT2) + erf(-a / _SQRT2))
    with np.errstate(invalid="ignore", over="ignore"):
        pa = np.exp(-0.5 * a * a - _LOG_SQRT_2PI)
        pb = np.exp(-0.5 * b * b - _LOG_SQRT_2PI)
        apa = np.where(np.isinf(a), 0.0, a * pa)
        bpb = np.where(np.isinf(b), 0.0, b * pb)
    mean = (pa - pb) / mass
    var = 1.0 + (apa - bpb) / mass - mean * mean
    return np.log(mass), mean, var


def _narrow(a, b):
    w = b - a
    c = 0.5 * (a + b)
    h2 = 0.25 * w * w
    log_mass = np.log(w) - 0.5 * c * c - _LOG_SQRT_2PI + np.log1p((c * c - 1.0) * h2 / 6.0)
    return log_mass, c - c * h2 / 3.0, h2 / 3.0


def std_truncated_moments(a, b):
    """Log-mass, mean and variance of N(0, 1) restricted to [a, b], elementwise.

    Handles ``a = -inf`` / ``b = +inf`` and bounds tens of standard deviations
    out. Returns three arrays of the broadcast shape.
    """
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    flip = b < 0
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)

    log_mass = np.empty(lo.shape)
    mean = np.empty(lo.shape)
    var = np.empty(lo.shape)

    w = hi - lo
    with np.errstate(invalid="ignore"):
        narrow = w * np.maximum(1.0, 0.5 * np.abs(lo + hi)) < _NARROW
    upper = ~narrow & (lo >= 0)
    strad = ~narrow & (lo < 0)
    for mask, fn in ((narrow, _narrow), (upper, _upper), (strad, _straddle)):
        if mask.any():
            lm, mu, vv = fn(lo[mask], hi[mask])
            log_mass[mask] = lm
            mean[mask] = mu
            var[mask] = vv

    mean = np.where(flip, -mean, mean)
    return log_mass, mean, np.maximum(var, 0.0)


def truncated_gaussian_moments(m, v, a, b) -> TruncatedGaussianMoments:
    """Mass, mean and variance of N(m, v) restricted to the interval [a, b]."""
    m = np.asarray(m, dtype=float)
    v = np.asarray(v, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not (np.all(np.isfinite(m)) and np.all(np.isfinite(v))):
        raise ValueError("mean and variance must be finite")
    if np.any(v <= 0):
        raise ValueError("variance must be positive")
    if np.any(np.isnan(a)) or np.any(np.isnan(b)) or np.any(a == np.inf) or np.any(b == -np.inf):
        raise ValueError("invalid interval bounds")
    if np.any(a >= b):
        raise ValueError("interval requires a < b")
    s = np.sqrt(v)
    log_mass, mu, var = std_truncated_moments((a - m) / s, (b - m) / s)
    return TruncatedGaussianMoments(np.exp(log_mass), m + s * mu, v * var, log_mass)


def _check_length(x, n):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("expected a 1-D vector")
    if n is not None and x.shape[0] != n:
        raise ValueError(f"expected length {n}, got {x.shape[0]}")
    return x


def dct_forward(x, n: int | None = None) -> np.ndarray:
    """Orthonormal DCT-II, O(N log N)."""
    return fft.dct(_check_length(x, n), type=2, norm="ortho")


def dct_inverse(z, n: int | None = None) -> np.ndarray:
    """Inverse of :func:`dct_forward` (orthonormal DCT-III)."""
    return fft.idct(_check_length(z, n), type=2, norm="ortho")


def dct_matrix(n: int) -> np.ndarray:
    """Dense orthonormal DCT-II matrix, row k = frequency k. For small test sizes."""
    k = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    f = np.sqrt(2.0 / n) * np.cos(np.pi * (2 * j + 1) * k / (2 * n))
    f[0] /= np.sqrt(2.0)
    return f


def rng_stream(seed: int, name: str, *index: int) -> np.random.Generator:
    """Independent generator for the named sub-stream ``name`` under ``seed``.

    Extra integer ``index`` values select further independent children (e.g.
    one per trial), so any component can be replayed on its own.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(STREAMS[name], *map(int, index)))
    return np.random.Generator(np.random.PCG64(ss))


def select_rows(seed: int, M: int, N: int) -> np.ndarray:
    """Sorted uniform random M-subset of range(N)."""
    if not 0 < M <= N:
        raise ValueError(f"need 0 < M <= N, got M={M}, N={N}")
    if M == N:
        return np.arange(N)
    idx = rng_stream(seed, "rows").choice(N, size=M, replace=False)
    return np.sort(idx)


def slot_rows(seed: int, M: int, N: int) -> np.ndarray:
    """The selected rows in transmission-slot order.

    Clipping groups occupy consecutive slots, so the slots follow a seeded
    permutation of the sorted selection; in sorted order each group would sit
    on one band of frequencies and break the i.i.d. assumption behind SE.
    """
    rows = select_rows(seed, M, N)
    return rng_stream(seed, "rows", 1).permutation(rows)
