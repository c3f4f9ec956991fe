"""Max-min design of the clipping-threshold distribution.

For a fixed gap level t, requiring the orthogonal de-clip curve to stay at
least t below the demodulation inverse at every grid point is a set of linear
inequalities in lambda, because that curve is a monotone function of the
lambda-weighted MMSE mixture. The max-min problem is therefore solved by
bisection on t with a linear feasibility check at each step.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .se import SEModel, gamma_orth_from_mixture

ZERO_MASS = 1e-6


@dataclass
class GapProblem:
    grid: np.ndarray
    bound: np.ndarray  # demodulation inverse per grid point (+inf = never binding)
    gamma: np.ndarray  # (K, len(grid))
    delta: float
    cr_db: np.ndarray | None = None

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.bound = np.asarray(self.bound, dtype=float)
        self.gamma = np.atleast_2d(np.asarray(self.gamma, dtype=float))
        if self.gamma.shape[1] != self.grid.size or self.bound.shape != self.grid.shape:
            raise ValueError("grid, bound and gamma tables disagree in length")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be increasing")

    @classmethod
    def from_model(cls, model: SEModel) -> "GapProblem":
        return cls(model.grid, model.demod_bound(), model.gamma, model.delta, model.cr_db)

    @property
    def K(self) -> int:
        return self.gamma.shape[0]

    def gaps(self, lam) -> np.ndarray:
        mix = np.asarray(lam, dtype=float) @ self.gamma
        with np.errstate(invalid="ignore"):
            g = self.bound - gamma_orth_from_mixture(self.grid, mix, self.delta)
        return np.where(np.isnan(g), np.inf, g)

    def min_gap(self, lam) -> float:
        return float(np.min(self.gaps(lam)))

    def mixture_bound(self, t: float) -> np.ndarray:
        """Largest admissible mixture MMSE per grid point for gap level ``t``."""
        v = self.grid
        target = self.bound - t
        with np.errstate(invalid="ignore", over="ignore"):
            b = v * (1.0 - v / (self.delta * (v + target)))
        b = np.where(target > 0, b, -1.0)
        # never-binding points drop out
        return np.where(np.isinf(self.bound), np.inf, b)


@dataclass
class LambdaSolution:
    lam: np.ndarray
    min_gap: float
    active: np.ndarray
    feasible: bool
    bisection_steps: int = 0
    gaps: np.ndarray = field(default=None, repr=False)

    def to_dict(self, cr_db, snr_db=None) -> dict:
        d = {"cr_db": [float(c) for c in cr_db], "lambda": [float(x) for x in self.lam],
             "min_gap": float(self.min_gap)}
        if snr_db is not None:
            d["snr_db"] = float(snr_db)
        return d

    def to_json(self, cr_db, snr_db=None) -> str:
        return json.dumps(self.to_dict(cr_db, snr_db))


def lp_feasible(G, b, tol: float = 1e-10, max_pivots: int = 50_000):
    """Find lambda in the probability simplex with ``lambda @ G <= b``, or None.

    Phase-one simplex on a dense tableau with Bland's rule. ``G`` is (K, n);
    entries of ``b`` equal to +inf are ignored.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    b = np.asarray(b, dtype=float)
    K = G.shape[0]
    keep = ~np.isposinf(b)
    G, b = G[:, keep], b[keep]
    if np.any(~np.isfinite(G)) or np.any(~np.isfinite(b)):
        raise ValueError("non-finite constraint data")
    n = b.size
    scale = np.maximum(np.abs(G).max(axis=0, initial=0.0), np.abs(b))
    scale[scale == 0] = 1.0

    m = n + 1
    A = np.zeros((m, K + n))
    A[:n, :K] = (G / scale).T
    A[:n, K:] = np.eye(n)
    A[n, :K] = 1.0
    rhs = np.concatenate([b / scale, [1.0]])
    neg = rhs < 0
    A[neg] *= -1.0
    rhs[neg] *= -1.0

    art_rows = [i for i in range(m) if i == n or neg[i]]
    n_art = len(art_rows)
    T = np.zeros((m, K + n + n_art + 1))
    T[:, : K + n] = A
    T[:, -1] = rhs
    basis = np.array([K + i for i in range(n)] + [0])
    for j, i in enumerate(art_rows):
        T[i, K + n + j] = 1.0
        basis[i] = K + n + j
    is_art = np.zeros(T.shape[1] - 1, dtype=bool)
    is_art[K + n:] = True

    cost = is_art.astype(float)
    red = cost - T[art_rows, :-1].sum(axis=0)

    for _ in range(max_pivots):
        cand = np.nonzero(red < -tol)[0]
        if cand.size == 0:
            break
        j = cand[0]
        col = T[:, j]
        pos = col > tol
        if not pos.any():
            break
        ratios = np.full(m, np.inf)
        ratios[pos] = T[pos, -1] / col[pos]
        best = ratios.min()
        ties = np.nonzero(ratios <= best + 1e-14 * max(1.0, abs(best)))[0]
        r = ties[np.argmin(basis[ties])]
        T[r] /= T[r, j]
        others = np.arange(m) != r
        T[others] -= np.outer(T[others, j], T[r])
        red = red - red[j] * T[r, :-1]
        basis[r] = j
    else:
        raise RuntimeError("simplex pivot limit reached")

    infeas = T[is_art[basis], -1].sum()
    if infeas > 1e-9:
        return None
    lam = np.zeros(K)
    for i, var in enumerate(basis):
        if var < K:
            lam[var] = T[i, -1]
    lam = np.maximum(lam, 0.0)
    if lam.sum() <= 0:
        return None
    return lam / lam.sum()


def _tidy(lam, gamma):
    lam = np.where(lam < ZERO_MASS, 0.0, lam)
    lam = lam / lam.sum()
    # identical candidates: keep the mass on the first copy
    for k in range(len(lam)):
        for j in range(k):
            if np.array_equal(gamma[j], gamma[k]):
                lam[j] += lam[k]
                lam[k] = 0.0
                break
    return lam


def optimize_lambda(problem: GapProblem, tol: float = 1e-6) -> LambdaSolution:
    """Maximize the minimum gap over the simplex by bisection on the gap level."""
    K = problem.K
    finite = np.isfinite(problem.bound)
    if not finite.any():
        lam = np.eye(K)[0]
        return LambdaSolution(lam, np.inf, np.array([], dtype=int), True, 0, problem.gaps(lam))

    if K == 1:
        lam = np.ones(1)
        gaps = problem.gaps(lam)
        mg = float(np.min(gaps))
        return LambdaSolution(lam, mg, np.nonzero(gaps <= mg + tol)[0], bool(mg > 0), 0, gaps)

    # lower end: best vertex, or any contracting mixture
    vertex_gaps = [problem.min_gap(e) for e in np.eye(K)]
    best = int(np.argmax(vertex_gaps))
    lam_lo = np.eye(K)[best]
    lo = vertex_gaps[best]
    if not np.isfinite(lo):
        lam_c = lp_feasible(problem.gamma, np.where(finite, problem.grid * (1 - 1e-9), np.inf))
        if lam_c is None:
            return LambdaSolution(lam_lo, -np.inf, np.array([], dtype=int), False, 0, problem.gaps(lam_lo))
        lam_lo, lo = lam_c, problem.min_gap(lam_c)
    hi = float(np.min(problem.bound[finite]))

    steps = 0
    while hi - lo > tol:
        t = 0.5 * (lo + hi)
        lam = lp_feasible(problem.gamma, problem.mixture_bound(t))
        steps += 1
        if lam is None:
            hi = t
            continue
        achieved = problem.min_gap(lam)
        # near v = 0 the bound b(t) is very flat in t, so the LP tolerance can
        # accept a level slightly above the optimum; trust the re-evaluated gap
        if achieved < t - tol:
            hi = t
            continue
        if achieved > lo:
            lam_lo, lo = lam, achieved
        lo = max(lo, t)
        if lo >= hi:
            break

    lam = _tidy(lam_lo, problem.gamma)
    if problem.min_gap(lam) < problem.min_gap(lam_lo) - tol:
        lam = lam_lo
    gaps = problem.gaps(lam)
    mg = float(np.min(gaps))
    active = np.nonzero(gaps <= mg + tol)[0]
    return LambdaSolution(lam, mg, active, bool(mg > 0), steps, gaps)


def optimize_profile(cr_db, delta: float, B: int, sigma2: float, tol: float = 1e-6, **kw):
    """Build SE tables for the candidate thresholds and solve for lambda."""
    model = SEModel.build(cr_db, delta, B, sigma2, **kw)
    return optimize_lambda(GapProblem.from_model(model), tol), model
