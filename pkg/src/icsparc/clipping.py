"""Regular and irregular clipping with unit-power compensation."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, erfc

# thresholds at or above this are treated as "no clipping"
NO_CLIP = 1e6

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def clip_scalar(z, eps):
    """Symmetric hard clip of ``z`` to [-eps, eps]; works elementwise on arrays."""
    if np.any(np.asarray(eps) <= 0):
        raise ValueError("clipping threshold must be positive")
    return np.clip(z, -eps, eps)


def cr_to_epsilon(cr_db):
    """Threshold for a clipping ratio in dB, assuming unit signal power."""
    return 10.0 ** (np.asarray(cr_db, dtype=float) / 20.0)


def epsilon_to_cr(eps):
    return 20.0 * np.log10(np.asarray(eps, dtype=float))


def clip_power(eps):
    """E[clip_eps(Z)^2] for Z ~ N(0, 1)."""
    eps = np.asarray(eps, dtype=float)
    if np.any(eps <= 0):
        raise ValueError("clipping threshold must be positive")
    e = np.minimum(eps, NO_CLIP)
    tail = e * e * erfc(e / np.sqrt(2.0))
    # inner part: 2 * int_0^eps z^2 phi(z) dz; cancels badly for small eps, so use its series there
    inner = erf(e / np.sqrt(2.0)) - 2.0 * e * _INV_SQRT_2PI * np.exp(-0.5 * e * e)
    series = 2.0 * _INV_SQRT_2PI * (e**3 / 3.0 - e**5 / 10.0 + e**7 / 56.0)
    out = np.where(e < 1e-2, series, inner) + tail
    return np.where(eps >= NO_CLIP, 1.0, out)


def power_scale(eps):
    """Compensation factor restoring unit output power after clipping."""
    return 1.0 / np.sqrt(clip_power(eps))


def largest_remainder(lam, M: int) -> np.ndarray:
    """Integer group sizes summing to M, proportional to ``lam``; ties favour earlier groups."""
    quotas = np.asarray(lam, dtype=float) * M
    sizes = np.floor(quotas).astype(int)
    short = M - int(sizes.sum())
    order = np.argsort(-(quotas - sizes), kind="stable")
    sizes[order[:short]] += 1
    return sizes


@dataclass(frozen=True, eq=False)
class ClippingProfile:
    """K clipping groups over M consecutive slots (group 0 first)."""

    cr_db: np.ndarray
    lam: np.ndarray
    eps: np.ndarray
    alpha: np.ndarray
    sizes: np.ndarray

    @property
    def K(self) -> int:
        return len(self.eps)

    @property
    def M(self) -> int:
        return int(self.sizes.sum())

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)])

    def slices(self):
        off = self.offsets
        return [slice(int(off[k]), int(off[k + 1])) for k in range(self.K)]

    def group_of_slot(self) -> np.ndarray:
        return np.repeat(np.arange(self.K), self.sizes)

    def to_dict(self) -> dict:
        return {"cr_db": [float(c) for c in self.cr_db], "lambda": [float(x) for x in self.lam]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict, M: int) -> "ClippingProfile":
        return build_profile(d["cr_db"], d["lambda"], M)

    def __repr__(self):
        return f"ClippingProfile(cr_db={list(self.cr_db)}, lam={list(np.round(self.lam, 5))}, M={self.M})"


def build_profile(crs_db, lam, M: int) -> ClippingProfile:
    crs_db = np.atleast_1d(np.asarray(crs_db, dtype=float))
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if crs_db.size == 0:
        raise ValueError("profile needs at least one threshold")
    if crs_db.shape != lam.shape:
        raise ValueError("cr_db and lambda must have equal length")
    if np.any(lam < 0):
        raise ValueError("fractions must be non-negative")
    if abs(lam.sum() - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1 (got {lam.sum():.12g})")
    if M < 1:
        raise ValueError("M must be positive")
    lam = lam / lam.sum()
    eps = cr_to_epsilon(crs_db)
    return ClippingProfile(
        cr_db=crs_db,
        lam=lam,
        eps=eps,
        alpha=power_scale(eps),
        sizes=largest_remainder(lam, M),
    )


def regular_profile(cr_db: float, M: int) -> ClippingProfile:
    return build_profile([cr_db], [1.0], M)


def unclipped_profile(M: int) -> ClippingProfile:
    return build_profile([300.0], [1.0], M)


def apply_irregular_clip(z_obs, profile: ClippingProfile) -> np.ndarray:
    """Slot-wise alpha_k * clip_{eps_k}(z) over the profile's groups."""
    z_obs = np.asarray(z_obs, dtype=float)
    if z_obs.shape != (profile.M,):
        raise ValueError(f"expected {profile.M} observed symbols, got {z_obs.shape}")
    c = np.empty_like(z_obs)
    for k, sl in enumerate(profile.slices()):
        eps = profile.eps[k]
        if eps >= NO_CLIP:
            c[sl] = z_obs[sl]
        else:
            c[sl] = profile.alpha[k] * np.clip(z_obs[sl], -eps, eps)
    return c
