"""State evolution: transfer curves, tabulation, tunnel analysis, fixed points.

Convention: ``v_z`` is the variance entering the de-clipper (the demodulator's
orthogonal output) and ``v_x`` the variance entering the demodulator.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy import integrate
from scipy.optimize import isotonic_regression
from scipy.special import log_ndtr

from .clipping import ClippingProfile, cr_to_epsilon, power_scale
from .denoisers import declip_moments, demod_moments
from .numerics import rng_stream

DEFAULT_SAMPLES = 200_000
DEFAULT_SECTIONS = 50_000
MAX_ISOTONIC_ADJUST = 0.02
_TINY = 1e-300


class MCEstimate(NamedTuple):
    value: float
    stderr: float


def default_grid(v_min: float = 1e-6, n: int = 100, v_max: float = 1.0) -> np.ndarray:
    return np.logspace(np.log10(v_min), np.log10(v_max), n)


def default_demod_grid(n: int = 241) -> np.ndarray:
    # demodulator inputs of interest sit roughly in [0.05, 1e4]
    return np.logspace(-2, 4, n)


def _gamma_samples(n_samples: int, seed: int):
    if n_samples < 1000:
        raise ValueError("need at least 1000 Monte Carlo samples")
    return rng_stream(seed, "se", 0).standard_normal((3, n_samples))


def _gamma_per_symbol(eps, alpha, v, sigma2, base):
    u, w, e = base
    # the decoder's de-clip prior behaves as z = z_pri + N(0, v) with z of unit power
    vp = max(1.0 - v, 0.0)
    z_pri = np.sqrt(vp) * u
    z = z_pri + np.sqrt(min(v, 1.0)) * w
    y = alpha * np.clip(z, -eps, eps) + np.sqrt(sigma2) * e
    _, var = declip_moments(y, z_pri, v, eps, alpha, sigma2)
    return var


def gamma_se(eps: float, alpha: float, v: float, sigma2: float, n_samples: int = DEFAULT_SAMPLES, seed: int = 0):
    """Monte Carlo MMSE of the de-clipper at input variance ``v``."""
    if not (v > 0 and sigma2 > 0):
        raise ValueError("variances must be positive")
    var = _gamma_per_symbol(eps, alpha, v, sigma2, _gamma_samples(n_samples, seed))
    return MCEstimate(float(var.mean()), float(var.std(ddof=1) / np.sqrt(var.size)))


def _phi_samples(B: int, n_sections: int, seed: int):
    if n_sections < 1000:
        raise ValueError("need at least 1000 sections")
    rng = rng_stream(seed, "se", 1)
    # the true position is irrelevant by symmetry; keep it at index 0
    return rng.standard_normal((n_sections, B))


def _phi_stats(v, B, g):
    x = np.zeros_like(g)
    x[:, 0] = np.sqrt(B)
    mean, sec_var = demod_moments((x + np.sqrt(v) * g).ravel(), v, B)
    sq = np.mean((mean.reshape(g.shape) - x) ** 2, axis=1)
    return sec_var, sq


def phi_se(v: float, B: int, n_sections: int = DEFAULT_SECTIONS, seed: int = 0, estimator: str = "mse"):
    """Monte Carlo MMSE of the section demodulator at input variance ``v``.

    ``estimator="mse"`` averages the realized squared error; ``"posterior"``
    averages the posterior variances (same expectation, lower variance).
    """
    if not v > 0:
        raise ValueError("variance must be positive")
    sec_var, sq = _phi_stats(v, B, _phi_samples(B, n_sections, seed))
    vals = {"mse": sq, "posterior": sec_var}[estimator]
    return MCEstimate(float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(vals.size)))


@dataclass
class SECurveTable:
    """A monotone transfer curve sampled on a log grid, interpolated in log-log."""

    grid: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.maximum(np.asarray(self.values, dtype=float), _TINY)
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")

    def __call__(self, v):
        lv = np.log(np.asarray(v, dtype=float))
        return np.exp(np.interp(lv, np.log(self.grid), np.log(self.values)))


def monotone_projection(values):
    """Nondecreasing fit (pool adjacent violators on log values); returns (fit, max rel. change)."""
    values = np.maximum(np.asarray(values, dtype=float), _TINY)
    if values.size == 0:
        return values, 0.0
    fit = np.exp(isotonic_regression(np.log(values), increasing=True).x)
    return fit, float(np.max(np.abs(fit - values) / values))


def _project_or_warn(values, what):
    fit, adj = monotone_projection(values)
    if adj > MAX_ISOTONIC_ADJUST:
        warnings.warn(f"{what}: monotone projection moved a point by {adj:.1%}", RuntimeWarning)
    return fit, adj


@lru_cache(maxsize=512)
def _gamma_table_cached(eps, alpha, sigma2, grid, n_samples, seed):
    base = _gamma_samples(n_samples, seed)
    vals = np.empty(len(grid))
    errs = np.empty(len(grid))
    for i, v in enumerate(grid):
        var = _gamma_per_symbol(eps, alpha, v, sigma2, base)
        vals[i] = var.mean()
        errs[i] = var.std(ddof=1) / np.sqrt(var.size)
    return vals, errs


def gamma_table(eps: float, sigma2: float, grid, n_samples: int = DEFAULT_SAMPLES, seed: int = 0,
                alpha: float | None = None) -> SECurveTable:
    """Tabulated de-clipping MMSE for threshold ``eps`` (common random numbers across the grid)."""
    grid = np.asarray(grid, dtype=float)
    if alpha is None:
        alpha = float(power_scale(eps))
    raw, errs = _gamma_table_cached(float(eps), float(alpha), float(sigma2), tuple(grid), int(n_samples), int(seed))
    vals, adj = _project_or_warn(raw, f"gamma table eps={eps:.3g}")
    # the MMSE never exceeds the prior variance
    vals = np.minimum(vals, grid)
    return SECurveTable(grid, vals, errs.copy(), dict(kind="gamma", eps=float(eps), sigma2=float(sigma2),
                                                      n_samples=int(n_samples), seed=int(seed), adjust=adj))


@lru_cache(maxsize=16)
def _phi_table_cached(B, grid, n_sections, seed, estimator):
    g = _phi_samples(B, n_sections, seed)
    vals = np.empty(len(grid))
    errs = np.empty(len(grid))
    for i, v in enumerate(grid):
        sec_var, sq = _phi_stats(v, B, g)
        x = {"mse": sq, "posterior": sec_var}[estimator]
        vals[i] = x.mean()
        errs[i] = x.std(ddof=1) / np.sqrt(x.size)
    return vals, errs


def phi_table(B: int, grid=None, n_sections: int = DEFAULT_SECTIONS, seed: int = 0,
              estimator: str = "posterior") -> SECurveTable:
    """Tabulated demodulation MMSE on a grid of input variances."""
    grid = default_demod_grid() if grid is None else np.asarray(grid, dtype=float)
    raw, errs = _phi_table_cached(int(B), tuple(grid), int(n_sections), int(seed), estimator)
    vals, adj = _project_or_warn(raw, "phi table")
    vals = np.minimum(vals, np.minimum(grid, 1.0))
    return SECurveTable(grid, vals, errs.copy(), dict(kind="phi", B=int(B), n_sections=int(n_sections),
                                                      seed=int(seed), estimator=estimator, adjust=adj))


def orth_variance(v_post, v_pri):
    """(1/v_post - 1/v_pri)^-1, +inf where there is no contraction."""
    v_post = np.asarray(v_post, dtype=float)
    v_pri = np.asarray(v_pri, dtype=float)
    with np.errstate(divide="ignore"):
        d = 1.0 / v_post - 1.0 / v_pri
        return np.where(d > 0, 1.0 / np.where(d > 0, d, 1.0), np.inf)


def gamma_orth_from_mixture(v, mix, delta: float):
    """Orthogonal de-clip output for a lambda-weighted MMSE mixture ``mix`` at input ``v``.

    Equals v * (delta*mix + (1-delta)*v) / (delta*(v - mix)); +inf when mix >= v.
    """
    v = np.asarray(v, dtype=float)
    mix = np.asarray(mix, dtype=float)
    gap = v - mix
    with np.errstate(divide="ignore", invalid="ignore"):
        out = v * (delta * mix + (1.0 - delta) * v) / (delta * gap)
    return np.where(gap > 0, out, np.inf)


def gamma_orth_se(v, lam, gamma_values, delta: float):
    """Irregular orthogonal de-clip curve; ``gamma_values`` has shape (K, len(v))."""
    lam = np.asarray(lam, dtype=float)
    mix = lam @ np.atleast_2d(np.asarray(gamma_values, dtype=float))
    return gamma_orth_from_mixture(v, mix, delta)


def phi_orth_se(v, table: SECurveTable):
    """Orthogonal demodulation curve: v_z as a function of v_x."""
    return orth_variance(table(v), v)


class PhiOrthInverse:
    """Monotone inverse of the orthogonal demodulation curve, tabulated on the phi grid."""

    def __init__(self, table: SECurveTable):
        vz = orth_variance(table.values, table.grid)
        ok = np.isfinite(vz) & (vz > 0)
        vx, vz = table.grid[ok], vz[ok]
        vz, _ = monotone_projection(vz)
        keep = np.concatenate([[True], np.diff(vz) > 0])
        self.vx = vx[keep]
        self.vz = vz[keep]

    @property
    def range(self):
        return float(self.vz[0]), float(self.vz[-1])

    def __call__(self, v_z, strict: bool = True):
        v_z = np.asarray(v_z, dtype=float)
        lo, hi = self.range
        below = v_z < lo
        above = v_z > hi
        if strict and (np.any(below) or np.any(above)):
            raise ValueError(f"v_z outside the tabulated range [{lo:.3g}, {hi:.3g}]")
        out = np.exp(np.interp(np.log(np.clip(v_z, lo, hi)), np.log(self.vz), np.log(self.vx)))
        # beyond the top of the table the demodulator inverse is effectively infinite
        return np.where(above, np.inf, np.where(below, 0.0, out))


def invert_phi_orth(v_z, table: SECurveTable):
    return PhiOrthInverse(table)(v_z)


@dataclass
class TunnelReport:
    open: bool
    min_gap: float
    argmin_v: float
    predicted_ser: float
    gaps: np.ndarray = field(repr=False)


def hard_decision_ser(v: float, B: int) -> float:
    """Section error probability of an argmax decision on sqrt(B) e_j + N(0, v I)."""
    s = np.sqrt(B / v)

    def f(t):
        # 1 - Phi(t + s)^(B-1), formed without cancellation
        return np.exp(-0.5 * t * t) / np.sqrt(2 * np.pi) * -np.expm1((B - 1) * log_ndtr(t + s))

    val, _ = integrate.quad(f, -np.inf, np.inf, epsabs=0.0, epsrel=1e-10, limit=200, points=None)
    return float(min(max(val, 0.0), 1.0 - 1.0 / B))


@dataclass
class SEModel:
    """Everything SE needs for a given code geometry, noise level and candidate thresholds."""

    delta: float
    B: int
    sigma2: float
    cr_db: np.ndarray
    grid: np.ndarray
    gamma: np.ndarray  # (K, len(grid)) de-clip MMSE tables
    gamma_err: np.ndarray
    phi: SECurveTable
    tables: list = field(repr=False, default_factory=list)

    @classmethod
    def build(cls, cr_db, delta: float, B: int, sigma2: float, grid=None, n_samples: int = DEFAULT_SAMPLES,
              n_sections: int = DEFAULT_SECTIONS, seed: int = 0, phi: SECurveTable | None = None):
        grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
        cr_db = np.atleast_1d(np.asarray(cr_db, dtype=float))
        tables = [gamma_table(float(e), sigma2, grid, n_samples, seed) for e in cr_to_epsilon(cr_db)]
        if phi is None:
            phi = phi_table(B, n_sections=n_sections, seed=seed)
        return cls(delta=delta, B=B, sigma2=sigma2, cr_db=cr_db, grid=grid,
                   gamma=np.array([t.values for t in tables]), gamma_err=np.array([t.stderr for t in tables]),
                   phi=phi, tables=tables)

    @property
    def phi_inverse(self) -> PhiOrthInverse:
        if not hasattr(self, "_phi_inv"):
            self._phi_inv = PhiOrthInverse(self.phi)
        return self._phi_inv

    def demod_bound(self) -> np.ndarray:
        """phi_orth^-1 on the grid; +inf where the demodulator never binds."""
        return self.phi_inverse(self.grid, strict=False)

    def declip_curve(self, lam) -> np.ndarray:
        return gamma_orth_se(self.grid, lam, self.gamma, self.delta)

    def gaps(self, lam) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            g = self.demod_bound() - self.declip_curve(lam)
        return np.where(np.isnan(g), np.inf, g)

    def min_gap(self, lam) -> float:
        return float(np.min(self.gaps(lam)))

    def gap_stderr(self, lam) -> np.ndarray:
        """Delta-method Monte Carlo standard error of each gap (de-clip side only)."""
        lam = np.asarray(lam, dtype=float)
        v = self.grid
        mix = lam @ self.gamma
        se_mix = np.sqrt((lam**2) @ (self.gamma_err**2))
        with np.errstate(divide="ignore"):
            dgdm = v * v / (self.delta * (v - mix) ** 2)
        return np.where(v > mix, dgdm * se_mix, np.inf)

    def analyze(self, lam) -> TunnelReport:
        g = self.gaps(lam)
        i = int(np.argmin(g))
        traj = self.fixed_point(lam)
        return TunnelReport(open=bool(g[i] > 0), min_gap=float(g[i]), argmin_v=float(self.grid[i]),
                            predicted_ser=traj["predicted_ser"], gaps=g)

    def fixed_point(self, lam, max_iters: int = 500, rtol: float = 1e-9) -> dict:
        """Iterate the two transfer curves from v_z = 1 until convergence or below the grid."""
        lam = np.asarray(lam, dtype=float)
        v_z = 1.0
        vz_hist, vx_hist, vxp_hist = [], [], []
        for _ in range(max_iters):
            mix = float(lam @ np.array([t(v_z) for t in self.tables]))
            v_x = float(gamma_orth_from_mixture(v_z, mix, self.delta))
            if not np.isfinite(v_x):
                break
            v_x_post = float(self.phi(v_x))
            vz_hist.append(v_z)
            vx_hist.append(v_x)
            vxp_hist.append(v_x_post)
            nxt = float(orth_variance(v_x_post, v_x))
            if nxt < self.grid[0] or abs(nxt - v_z) <= rtol * v_z:
                v_z = nxt
                break
            v_z = nxt
        terminal = vx_hist[-1] if vx_hist else np.inf
        return dict(v_z=np.array(vz_hist), v_x=np.array(vx_hist), v_x_post=np.array(vxp_hist),
                    terminal_v_x=terminal,
                    predicted_ser=hard_decision_ser(terminal, self.B) if np.isfinite(terminal) else 1.0 - 1.0 / self.B)


def analyze_tunnel(profile: ClippingProfile, sigma2: float, delta: float, B: int, grid=None, **kw) -> TunnelReport:
    model = SEModel.build(profile.cr_db, delta, B, sigma2, grid=grid, **kw)
    return model.analyze(profile.lam)


def predict_fixed_point(profile: ClippingProfile, sigma2: float, delta: float, B: int, grid=None, **kw) -> dict:
    model = SEModel.build(profile.cr_db, delta, B, sigma2, grid=grid, **kw)
    return model.fixed_point(profile.lam)


def chart_csv(model: SEModel, lam) -> str:
    """Transfer chart rows (v_z, v_x_declip, v_x_demod_inverse) as CSV text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["v_z", "v_x_declip", "v_x_demod_inverse"])
    for vz, a, b in zip(model.grid, model.declip_curve(lam), model.demod_bound()):
        w.writerow([f"{vz:.10e}", f"{a:.10e}", f"{b:.10e}"])
    return buf.getvalue()


def opening_snr(cr_db, lam, delta: float, B: int, snr_lo: float, snr_hi: float, tol: float = 0.01,
                grid=None, **kw) -> float:
    """Smallest SNR (dB) in [snr_lo, snr_hi] at which the tunnel is open, by bisection.

    Returns ``snr_lo`` if already open there and ``inf`` if still closed at ``snr_hi``.
    """
    kw.setdefault("phi", phi_table(B, n_sections=kw.pop("n_sections", DEFAULT_SECTIONS), seed=kw.get("seed", 0)))

    def is_open(snr):
        model = SEModel.build(cr_db, delta, B, 10.0 ** (-snr / 10.0), grid=grid, **kw)
        return model.min_gap(lam) > 0

    if is_open(snr_lo):
        return float(snr_lo)
    if not is_open(snr_hi):
        return np.inf
    lo, hi = float(snr_lo), float(snr_hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if is_open(mid):
            hi = mid
        else:
            lo = mid
    return hi
