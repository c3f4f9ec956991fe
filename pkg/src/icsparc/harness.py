"""Seeded Monte Carlo SER sweeps, configuration and reporting.

Trials run in fixed-size batches. Every trial draws its message and noise from
streams keyed by (root seed, trial index), and the stopping rule looks at the
shortest ordered prefix of trials that meets it. Results therefore do not
depend on how many worker threads were used.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import binomtest

from .clipping import ClippingProfile, build_profile, regular_profile, unclipped_profile
from .code import CodeParams, derive_params, encode_message, random_message, section_errors, synthesize_codeword
from .numerics import rng_stream, slot_rows
from .oamp import DecodeOptions, decode

BATCH = 8
THREADS_ENV = "ICSPARC_THREADS"
CSV_HEADER = ["snr_db", "ser", "sections", "errors", "trials", "ci_low", "ci_high", "mean_iters"]

# non-canonical preset: the even-spaced candidate set (22 values)
CANDIDATE_CR_PRESET = [-300.0, *[float(c) for c in range(-30, -1, 2)], 0.0, 2.0, 4.0, 6.0, 8.0, 300.0]

# optimized profiles reported per rate, with the SNR (dB) they were designed for
TABLE1 = {
    0.2: dict(snr_db=-3.6, cr_db=[-300, -12, -10, -8], lam=[0.04460, 0.27394, 0.38313, 0.29831]),
    0.4: dict(snr_db=0.2, cr_db=[-300, -30, -16, -10, -8, -6, -2, 0, 4],
              lam=[0.02590, 0.05297, 0.00756, 0.00145, 0.17107, 0.51890, 0.13035, 0.00790, 0.08390]),
    0.5: dict(snr_db=1.6, cr_db=[-300, -24, -22, -18, -6, -5, -4, -3, -2],
              lam=[0.01251, 0.12000, 0.00027, 0.00293, 0.00031, 0.07169, 0.56832, 0.16883, 0.05508]),
    0.6: dict(snr_db=2.8, cr_db=[-300, -30, -19, -16, -12, -4, -2, 0],
              lam=[0.02048, 0.01288, 0.13391, 0.00462, 0.00034, 0.19962, 0.26163, 0.36647]),
    0.8: dict(snr_db=4.8, cr_db=[-300, -30, -22, -16, -14, -10, 0, 2, 6, 8],
              lam=[0.01207, 0.02881, 0.01619, 0.07276, 0.04741, 0.07536, 0.06970, 0.43372, 0.17212, 0.07178]),
    1.0: dict(snr_db=6.4, cr_db=[-300, -30, -22, -20, -16, -14, -6, 300],
              lam=[0.00899, 0.03115, 0.00010, 0.00380, 0.00037, 0.16628, 0.00015, 0.78912]),
}


def table1_profile(R: float, M: int) -> ClippingProfile:
    """Reported optimized profile for rate ``R``; the printed fractions are renormalized."""
    row = TABLE1[R]
    lam = np.asarray(row["lam"], dtype=float)
    return build_profile(row["cr_db"], lam / lam.sum(), M)


class ConfigError(ValueError):
    pass


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass
class SimConfig:
    B: int = 64
    L: int = 2048
    R: float = 0.5
    # {"kind": "regular", "cr_db": x} | {"kind": "irregular", "cr_db": [...], "lambda": [...]}
    # | {"kind": "none"} | {"kind": "optimize", "candidate_cr_db": [...]}
    profile: dict = field(default_factory=lambda: {"kind": "regular", "cr_db": -13.0})
    snr_db: list = field(default_factory=lambda: [2.0])
    min_trials: int = 1
    max_trials: int = 100
    target_section_errors: int = 50
    max_iters: int = 120
    seed: int = 0
    output: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not self.snr_db:
            raise ConfigError("snr_db must be a non-empty list")
        if self.min_trials < 1 or self.max_trials < self.min_trials:
            raise ConfigError("need 1 <= min_trials <= max_trials")
        if self.target_section_errors < 1:
            raise ConfigError("target_section_errors must be >= 1")
        if self.max_iters < 0:
            raise ConfigError("max_iters must be >= 0")
        kind = self.profile.get("kind")
        if kind not in ("regular", "irregular", "none", "optimize"):
            raise ConfigError(f"unknown profile kind {kind!r}")
        try:
            self.params()
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def params(self) -> CodeParams:
        return derive_params(int(self.B), int(self.L), float(self.R))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["snr_db"] = [float(s) for s in self.snr_db]
        return {"code": {"B": d.pop("B"), "L": d.pop("L"), "R": d.pop("R")},
                "trials": {k: d.pop(k) for k in ("min_trials", "max_trials", "target_section_errors")}, **d}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        known = {"code", "trials", "profile", "snr_db", "max_iters", "seed", "output"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        try:
            flat = {**d.pop("code", {}), **d.pop("trials", {}), **d}
            return cls(**flat)
        except TypeError as e:
            raise ConfigError(str(e)) from None

    @classmethod
    def from_json(cls, text: str) -> "SimConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as e:
            raise ConfigError(f"malformed JSON: {e}") from None

    @classmethod
    def load(cls, path) -> "SimConfig":
        try:
            with open(path) as f:
                return cls.from_json(f.read())
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def resolve_profile(spec: dict, p: CodeParams, snr_db: float, **se_kw) -> ClippingProfile:
    kind = spec.get("kind")
    if kind == "none":
        return unclipped_profile(p.M)
    if kind == "regular":
        return regular_profile(float(spec["cr_db"]), p.M)
    if kind == "irregular":
        return build_profile(spec["cr_db"], spec["lambda"], p.M)
    if kind == "optimize":
        from .optimizer import optimize_profile

        cands = spec.get("candidate_cr_db", CANDIDATE_CR_PRESET)
        sol, _ = optimize_profile(cands, p.delta, p.B, 10.0 ** (-snr_db / 10.0), **se_kw)
        return build_profile(cands, sol.lam, p.M)
    raise ConfigError(f"unknown profile kind {kind!r}")


@dataclass
class TrialOutcome:
    errors: int
    iterations: int
    termination: str


def run_trial(p: CodeParams, sel, profile: ClippingProfile, sigma2: float, seed: int, trial: int,
              opts: DecodeOptions) -> TrialOutcome:
    msg = random_message(rng_stream(seed, "message", trial), p)
    c = synthesize_codeword(encode_message(msg, p), sel, profile)
    y = c + np.sqrt(sigma2) * rng_stream(seed, "noise", trial).standard_normal(p.M)
    res = decode(y, sel, profile, p, sigma2, opts)
    return TrialOutcome(section_errors(msg, res.message_hat), res.iterations, res.termination)


@dataclass
class SERPoint:
    snr_db: float
    sections: int
    errors: int
    trials: int
    mean_iters: float
    degenerate: int = 0

    @property
    def ser(self) -> float:
        return self.errors / self.sections

    def interval(self, level: float = 0.95):
        ci = binomtest(self.errors, self.sections).proportion_ci(confidence_level=level, method="wilson")
        return float(ci.low), float(ci.high)


@dataclass
class SimResult:
    points: list
    config_hash: str
    seed: int
    profile: dict = field(default_factory=dict)

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for pt in self.points:
            lo, hi = pt.interval()
            w.writerow([f"{pt.snr_db:g}", f"{pt.ser:.6e}", pt.sections, pt.errors, pt.trials,
                        f"{lo:.6e}", f"{hi:.6e}", f"{pt.mean_iters:.3f}"])
        return buf.getvalue()

    def to_dict(self) -> dict:
        rows = []
        for pt in self.points:
            lo, hi = pt.interval()
            rows.append(dict(snr_db=pt.snr_db, ser=pt.ser, sections=pt.sections, errors=pt.errors,
                             trials=pt.trials, ci_low=lo, ci_high=hi, mean_iters=pt.mean_iters,
                             degenerate=pt.degenerate, profile=self.profile.get(f"{pt.snr_db:g}")))
        return dict(config_hash=self.config_hash, seed=self.seed, points=rows)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _stop_index(outcomes, min_trials, max_trials, target):
    """Length of the shortest prefix satisfying the stopping rule, or None."""
    errs = np.cumsum([o.errors for o in outcomes])
    for n in range(min_trials, len(outcomes) + 1):
        if errs[n - 1] >= target or n >= max_trials:
            return n
    return None


def run_ser_point(p: CodeParams, sel, profile: ClippingProfile, snr_db: float, *, seed: int = 0,
                  min_trials: int = 1, max_trials: int = 100, target_section_errors: int = 50,
                  opts: DecodeOptions = DecodeOptions(), threads: int = 1,
                  trial_fn: Callable | None = None, pool: ThreadPoolExecutor | None = None) -> SERPoint:
    """Estimate the SER at one SNR with the adaptive stopping rule."""
    sigma2 = 10.0 ** (-snr_db / 10.0)
    if trial_fn is None:
        def trial_fn(t):
            return run_trial(p, sel, profile, sigma2, seed, t, opts)

    outcomes = []
    own = pool is None and threads > 1
    ex = ThreadPoolExecutor(threads) if own else pool
    try:
        n = None
        while n is None:
            idx = range(len(outcomes), min(len(outcomes) + BATCH, max_trials))
            outcomes.extend(ex.map(trial_fn, idx) if ex is not None else map(trial_fn, idx))
            n = _stop_index(outcomes, min_trials, max_trials, target_section_errors)
    finally:
        if own:
            ex.shutdown()
    used = outcomes[:n]
    return SERPoint(
        snr_db=float(snr_db),
        sections=n * p.L,
        errors=int(sum(o.errors for o in used)),
        trials=n,
        mean_iters=float(np.mean([o.iterations for o in used])),
        degenerate=sum(o.termination == "orthogonalization-degenerate" for o in used),
    )


def run_ser_sweep(cfg: SimConfig, threads: int | None = None, trial_fn: Callable | None = None,
                  se_kw: dict | None = None) -> SimResult:
    """SER against SNR for the configured code and profile.

    ``trial_fn(p, sel, profile, sigma2, seed, trial)`` may replace the
    encode/decode trial, e.g. with a synthetic stub.
    """
    threads = default_threads() if threads is None else max(1, int(threads))
    p = cfg.params()
    sel = slot_rows(cfg.seed, p.M, p.N)
    opts = DecodeOptions(max_iters=cfg.max_iters)
    points, used = [], {}
    with ThreadPoolExecutor(threads) if threads > 1 else _null() as pool:
        for snr in cfg.snr_db:
            profile = resolve_profile(cfg.profile, p, float(snr), **(se_kw or {}))
            used[f"{float(snr):g}"] = profile.to_dict()
            fn = None
            if trial_fn is not None:
                sigma2 = 10.0 ** (-float(snr) / 10.0)

                def fn(t, profile=profile, sigma2=sigma2):
                    return trial_fn(p, sel, profile, sigma2, cfg.seed, t)

            points.append(run_ser_point(
                p, sel, profile, float(snr), seed=cfg.seed, min_trials=cfg.min_trials,
                max_trials=cfg.max_trials, target_section_errors=cfg.target_section_errors,
                opts=opts, trial_fn=fn, pool=pool))
    return SimResult(points, cfg.digest(), cfg.seed, used)


class _null:
    def __enter__(self):
        return None

    def __exit__(self, *exc):
        return False


def write_outputs(result: SimResult, path: str):
    """Write ``path`` (CSV) and a JSON mirror next to it."""
    with open(path, "w", newline="") as f:
        f.write(result.csv())
    root, _ = os.path.splitext(path)
    with open(root + ".json", "w") as f:
        f.write(result.to_json())
