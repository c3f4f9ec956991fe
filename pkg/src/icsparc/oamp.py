"""OAMP decoding of (irregularly) clipped SR codes with a partial DCT transform."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clipping import ClippingProfile
from .code import CodeParams, decide_sections
from .denoisers import VAR_FLOOR, declip_moments, demod_posterior
from .numerics import dct_forward, dct_inverse

CLAMP = 1e-9
MAX_CLAMPS = 3
STALL_WINDOW = 5


class DegenerateOrthogonalization(ValueError):
    pass


@dataclass(frozen=True)
class DecodeOptions:
    max_iters: int = 120
    v_target: float = 1e-10
    stall_tol: float = 1e-4
    # return the estimate with the smallest v_x_post instead of the last one
    keep_best: bool = True


@dataclass
class DecodeResult:
    x_post: np.ndarray
    message_hat: np.ndarray
    iterations: int
    termination: str
    # rows of (v_z_pri, v_z_post, v_x_pri, v_x_post), one per iteration
    trace: np.ndarray = field(repr=False)
    best_iteration: int = 0

    @property
    def v_x_post(self) -> np.ndarray:
        return self.trace[:, 3]


def orthogonalize(u_post, v_post: float, u_pri, v_pri: float):
    """Extrinsic combination of a posterior with the prior it was computed from."""
    if not 0 < v_post < v_pri:
        raise DegenerateOrthogonalization(f"need 0 < v_post < v_pri, got {v_post!r}, {v_pri!r}")
    v_orth = 1.0 / (1.0 / v_post - 1.0 / v_pri)
    u_orth = v_orth * (np.asarray(u_post) / v_post - np.asarray(u_pri) / v_pri)
    return u_orth, v_orth


def irregular_declip(y, z_pri_obs, v_pri: float, profile: ClippingProfile, sigma2: float):
    """Group-wise de-clipping; returns posterior means and the slot-weighted average variance."""
    z_post = np.empty_like(z_pri_obs)
    v_sum = 0.0
    for k, sl in enumerate(profile.slices()):
        if sl.stop == sl.start:
            continue
        mean, var = declip_moments(y[sl], z_pri_obs[sl], v_pri, profile.eps[k], profile.alpha[k], sigma2)
        z_post[sl] = mean
        v_sum += var.sum()
    return z_post, max(v_sum / profile.M, VAR_FLOOR)


def decode(
    y,
    sel,
    profile: ClippingProfile,
    p: CodeParams,
    sigma2: float,
    opts: DecodeOptions = DecodeOptions(),
) -> DecodeResult:
    y = np.asarray(y, dtype=float)
    sel = np.asarray(sel)
    if y.shape != (p.M,) or sel.shape != (p.M,) or profile.M != p.M:
        raise ValueError("y, selection and profile must all have length M")
    if not sigma2 > 0:
        raise ValueError("noise variance must be positive")

    delta = p.delta
    z_pri = np.zeros(p.N)
    v_z_pri = 1.0
    x_post, _ = demod_posterior(np.zeros(p.N), 1.0, p.B)
    trace = []
    termination = "max-iterations"
    best_x, best_v, best_it = x_post, np.inf, 0
    clamps = 0

    for _ in range(opts.max_iters):
        clamped = False
        zp, v_z_post = irregular_declip(y, z_pri[sel], v_z_pri, profile, sigma2)
        z_post = z_pri.copy()
        z_post[sel] = zp
        # unselected coordinates keep their prior, hence the delta mixture
        v_used = delta * v_z_post + (1.0 - delta) * v_z_pri
        if v_used >= v_z_pri * (1.0 - CLAMP):
            v_used = v_z_pri * (1.0 - CLAMP)
            clamped = True
        z_orth, v_z_orth = orthogonalize(z_post, v_used, z_pri, v_z_pri)

        x_pri = dct_inverse(z_orth)
        v_x_pri = v_z_orth
        x_post, v_x_post = demod_posterior(x_pri, v_x_pri, p.B)
        trace.append((v_z_pri, v_z_post, v_x_pri, v_x_post))
        # near the fixed point the de-clip information is of the order of
        # single-slot fluctuations, so a late clamp can throw the iteration
        # back to the start; the best iterate survives that
        if v_x_post < best_v:
            best_x, best_v, best_it = x_post, v_x_post, len(trace)

        if v_x_post <= opts.v_target:
            termination = "variance-target"
            break
        if len(trace) > STALL_WINDOW:
            old = trace[-1 - STALL_WINDOW][3]
            if abs(v_x_post - old) < opts.stall_tol * old:
                termination = "stall"
                break

        if v_x_post >= v_x_pri * (1.0 - CLAMP):
            v_x_post = v_x_pri * (1.0 - CLAMP)
            clamped = True
        clamps = clamps + 1 if clamped else 0
        if clamps >= MAX_CLAMPS:
            termination = "orthogonalization-degenerate"
            break
        x_orth, v_x_orth = orthogonalize(x_post, v_x_post, x_pri, v_x_pri)

        z_pri = dct_forward(x_orth)
        v_z_pri = v_x_orth

    trace = np.array(trace, dtype=float).reshape(-1, 4)
    if opts.keep_best and best_it:
        x_post = best_x
    else:
        best_it = len(trace)
    return DecodeResult(
        x_post=x_post,
        message_hat=decide_sections(x_post, p),
        iterations=len(trace),
        termination=termination,
        trace=trace,
        best_iteration=best_it,
    )
