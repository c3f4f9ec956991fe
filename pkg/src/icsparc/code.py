"""Sparse regression code geometry, message mapping and section error accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .clipping import apply_irregular_clip
from .numerics import dct_forward


def is_power_of_2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class CodeParams:
    B: int
    L: int
    M: int
    R: float

    @property
    def N(self) -> int:
        return self.L * self.B

    @property
    def delta(self) -> float:
        return self.M / self.N

    @property
    def bits(self) -> float:
        return self.L * math.log2(self.B)


def derive_params(B: int, L: int, R: float) -> CodeParams:
    """Code geometry for section size B, L sections and rate R (bits/symbol)."""
    if not (isinstance(B, (int, np.integer)) and B >= 2 and is_power_of_2(int(B))):
        raise ValueError(f"section size B must be a power of two >= 2, got {B}")
    if L < 1:
        raise ValueError("need at least one section")
    if not R > 0:
        raise ValueError("rate must be positive")
    B, L = int(B), int(L)
    if not is_power_of_2(L * B):
        raise ValueError(f"N = L*B = {L * B} must be a power of two")
    M = int(round(L * math.log2(B) / R))
    if M < 1 or M > L * B:
        raise ValueError(f"rate {R} gives M={M} outside (0, N={L * B}]; compression rate must be <= 1")
    return CodeParams(B=B, L=L, M=M, R=float(R))


def random_message(rng: np.random.Generator, p: CodeParams) -> np.ndarray:
    return rng.integers(0, p.B, size=p.L)


def encode_message(positions, p: CodeParams) -> np.ndarray:
    """Block-sparse vector with a single sqrt(B) per section."""
    positions = np.asarray(positions)
    if positions.shape != (p.L,):
        raise ValueError(f"message must hold {p.L} positions")
    if np.any(positions < 0) or np.any(positions >= p.B):
        raise ValueError("section position out of range")
    x = np.zeros(p.N)
    x[np.arange(p.L) * p.B + positions] = np.sqrt(p.B)
    return x


def synthesize_codeword(x, sel, profile) -> np.ndarray:
    """Transmitted codeword: DCT of ``x`` on the selected rows, irregularly clipped."""
    z = dct_forward(x)
    if len(sel) != profile.M:
        raise ValueError(f"profile covers {profile.M} slots, selection has {len(sel)}")
    return apply_irregular_clip(z[sel], profile)


def decide_sections(x_post, p: CodeParams) -> np.ndarray:
    """Hard decision per section; np.argmax already breaks ties toward the lowest index."""
    x_post = np.asarray(x_post, dtype=float)
    if x_post.shape != (p.N,):
        raise ValueError(f"expected length {p.N}")
    return np.argmax(x_post.reshape(p.L, p.B), axis=1)


def section_errors(truth, decided) -> int:
    truth = np.asarray(truth)
    decided = np.asarray(decided)
    if truth.shape != decided.shape:
        raise ValueError("message length mismatch")
    return int(np.count_nonzero(truth != decided))


def section_error_rate(truth, decided) -> float:
    return section_errors(truth, decided) / len(truth)
