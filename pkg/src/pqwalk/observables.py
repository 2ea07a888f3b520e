"""Distribution snapshots, moments, reduced coin density matrix and entropy."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ContractError, NumericalContractError
from .lattice import WalkState

EIG_TOL = 1e-10


class DensityMode(str, enum.Enum):
    """How the off-diagonal ``B`` of the reduced coin matrix is formed.

    ``PAPER_MAGNITUDE``: ``B = sum_x |a(x)| |b(x)|``.
    ``STANDARD_HERMITIAN``: ``B = |sum_x a(x) conj(b(x))|``, the modulus of the
    true partial-trace off-diagonal.
    """

    PAPER_MAGNITUDE = "paper"
    STANDARD_HERMITIAN = "hermitian"

    @classmethod
    def parse(cls, value) -> "DensityMode":
        if isinstance(value, cls):
            return value
        v = str(value).lower()
        for m in cls:
            if v in (m.value, m.name.lower()):
                return m
        raise ValueError(f"unknown density mode {value!r}")


@dataclass
class DistributionSnapshot:
    t: int
    xs: np.ndarray
    probs: np.ndarray
    meta: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {int(x): float(p) for x, p in zip(self.xs, self.probs) if p != 0.0}


class MomentPoint(NamedTuple):
    t: int
    m1: float
    m2: float


class EntropyPoint(NamedTuple):
    t: int
    A: float
    B: float
    C: float
    v1: float
    v2: float
    S_E: float


def snapshot(state: WalkState, meta: dict | None = None) -> DistributionSnapshot:
    lo, hi = state.window
    xs = np.arange(lo, hi + 1)
    sl = slice(state.index(lo), state.index(hi) + 1)
    probs = np.abs(state.a[sl]) ** 2 + np.abs(state.b[sl]) ** 2
    return DistributionSnapshot(state.t, xs, probs, dict(meta or {}))


def moments(snap: DistributionSnapshot) -> MomentPoint:
    """First and second moment of a normalized snapshot."""
    total = float(np.sum(snap.probs))
    if abs(total - 1.0) > 1e-6:
        raise ContractError(f"snapshot at t={snap.t} sums to {total!r}")
    x = np.asarray(snap.xs, dtype=np.float64)
    xp = x * snap.probs
    return MomentPoint(snap.t, float(xp.sum()), float((x * xp).sum()))


def reduced_density(state: WalkState, mode=DensityMode.STANDARD_HERMITIAN) -> tuple[float, float, float]:
    """``(A, B, C)`` of the 2x2 reduced coin matrix ``[[A, B], [B, C]]``."""
    mode = DensityMode.parse(mode)
    A = float(np.sum(np.abs(state.a) ** 2))
    C = float(np.sum(np.abs(state.b) ** 2))
    if mode is DensityMode.PAPER_MAGNITUDE:
        B = float(np.sum(np.abs(state.a) * np.abs(state.b)))
    else:
        B = float(abs(np.vdot(state.b, state.a)))
    return A, B, C


def _xlog2x(v):
    v = np.asarray(v, dtype=np.float64)
    out = np.zeros_like(v)
    pos = v > 0
    out[pos] = v[pos] * np.log2(v[pos])
    return out


def entropy_arrays(A, B, C):
    """Vectorized eigenvalues and entropy (bits) of ``[[A, B], [B, C]]``.

    ``A + C`` is not forced to 1; eigenvalues are ``(A+C)/2 +- r``.
    Eigenvalues within ``EIG_TOL`` of ``[0, 1]`` are clamped.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    half = 0.5 * (A + C)
    r = np.sqrt((0.5 * (A - C)) ** 2 + B**2)
    v1 = half + r
    v2 = half - r
    if np.any(v1 > 1 + EIG_TOL) or np.any(v2 < -EIG_TOL):
        raise NumericalContractError(
            f"reduced density eigenvalues outside [0, 1]: max {np.max(v1)!r}, min {np.min(v2)!r}")
    v1 = np.clip(v1, 0.0, 1.0)
    v2 = np.clip(v2, 0.0, 1.0)
    S = -(_xlog2x(v1) + _xlog2x(v2))
    return v1, v2, S


def entanglement_entropy(A: float, B: float, C: float) -> tuple[float, float, float]:
    """``(v1, v2, S_E)`` with ``0 log 0 = 0``; ``S_E`` in bits."""
    if B < 0:
        raise ContractError(f"B must be non-negative, got {B}")
    v1, v2, S = entropy_arrays(A, B, C)
    return float(v1), float(v2), float(S)


def entropy_point(state: WalkState, mode=DensityMode.STANDARD_HERMITIAN) -> EntropyPoint:
    A, B, C = reduced_density(state, mode)
    v1, v2, S = entanglement_entropy(A, B, C)
    return EntropyPoint(state.t, A, B, C, v1, v2, S)
