"""Posterior (MMSE) denoisers for the clipping channel and the section modulation."""

from __future__ import annotations

import numpy as np

from .clipping import NO_CLIP
from .numerics import std_truncated_moments

VAR_FLOOR = 1e-13


def _log_normal_pdf(y, mu, var):
    return -0.5 * np.log(2.0 * np.pi * var) - 0.5 * (y - mu) ** 2 / var


def declip_moments(y, z_pri, v_pri: float, eps: float, alpha: float, sigma2: float):
    """Per-symbol posterior mean and variance of z.

    Prior z ~ N(z_pri, v_pri), observation y = alpha * clip_eps(z) + N(0, sigma2).
    The posterior is a mixture over three regions of z: the interior |z| <= eps,
    where the likelihood is Gaussian in z, and the two saturated tails, where it
    is constant.
    """
    y = np.asarray(y, dtype=float)
    z_pri = np.asarray(z_pri, dtype=float)
    if y.shape != z_pri.shape:
        raise ValueError("y and z_pri must have equal shapes")
    if not (v_pri > 0 and sigma2 > 0):
        raise ValueError("variances must be positive")

    if eps >= NO_CLIP:
        v = 1.0 / (1.0 / v_pri + alpha * alpha / sigma2)
        mean = v * (z_pri / v_pri + alpha * y / sigma2)
        return mean, np.full(y.shape, v)

    sd = np.sqrt(v_pri)

    # interior: Gaussian product, truncated to [-eps, eps]
    vi = 1.0 / (1.0 / v_pri + alpha * alpha / sigma2)
    si = np.sqrt(vi)
    mi = vi * (z_pri / v_pri + alpha * y / sigma2)
    lm_i, mu_i, var_i = std_truncated_moments((-eps - mi) / si, (eps - mi) / si)
    logw_i = _log_normal_pdf(y, alpha * z_pri, sigma2 + alpha * alpha * v_pri) + lm_i
    mean_i = mi + si * mu_i
    var_i = vi * var_i

    # saturated tails: prior truncated, constant likelihood
    lm_u, mu_u, var_u = std_truncated_moments((eps - z_pri) / sd, np.inf)
    logw_u = _log_normal_pdf(y, alpha * eps, sigma2) + lm_u
    mean_u = z_pri + sd * mu_u
    var_u = v_pri * var_u

    lm_l, mu_l, var_l = std_truncated_moments(-np.inf, (-eps - z_pri) / sd)
    logw_l = _log_normal_pdf(y, -alpha * eps, sigma2) + lm_l
    mean_l = z_pri + sd * mu_l
    var_l = v_pri * var_l

    top = np.maximum(np.maximum(logw_i, logw_u), logw_l)
    w_i = np.exp(logw_i - top)
    w_u = np.exp(logw_u - top)
    w_l = np.exp(logw_l - top)
    tot = w_i + w_u + w_l
    w_i /= tot
    w_u /= tot
    w_l /= tot

    mean = w_i * mean_i + w_u * mean_u + w_l * mean_l
    var = (
        w_i * (var_i + (mean_i - mean) ** 2)
        + w_u * (var_u + (mean_u - mean) ** 2)
        + w_l * (var_l + (mean_l - mean) ** 2)
    )
    return mean, var


def declip_posterior(y, z_pri, v_pri: float, eps: float, alpha: float, sigma2: float):
    """Posterior means and the average posterior variance of the de-clipper."""
    mean, var = declip_moments(y, z_pri, v_pri, eps, alpha, sigma2)
    return mean, max(float(np.mean(var)), VAR_FLOOR)


def section_weights(x_pri, v_pri: float, B: int):
    """Posterior one-hot probabilities per section, shape (L, B), plus 1 - w per entry.

    The complement is formed without cancellation: for the leading entry it is
    the sum of the others.
    """
    if not v_pri > 0:
        raise ValueError("variance must be positive")
    logits = np.sqrt(B) * np.asarray(x_pri, dtype=float).reshape(-1, B) / v_pri
    top = np.argmax(logits, axis=1)
    rows = np.arange(logits.shape[0])
    e = np.exp(logits - logits[rows, top][:, None])
    tot = e.sum(axis=1, keepdims=True)
    w = e / tot
    comp = (tot - e) / tot
    e[rows, top] = 0.0
    comp[rows, top] = e.sum(axis=1) / tot[:, 0]
    return w, comp


def demod_moments(x_pri, v_pri: float, B: int):
    """Section posterior means (flat) and per-section average symbol variances."""
    w, comp = section_weights(x_pri, v_pri, B)
    return (np.sqrt(B) * w).ravel(), np.sum(w * comp, axis=1)


def demod_posterior(x_pri, v_pri: float, p):
    """Section-wise MMSE demodulation of a block-sparse vector observed in Gaussian noise.

    ``p`` is a :class:`~icsparc.code.CodeParams` or just the section size B.
    """
    B = getattr(p, "B", p)
    mean, sec_var = demod_moments(x_pri, v_pri, B)
    return mean, max(float(np.mean(sec_var)), VAR_FLOOR)
