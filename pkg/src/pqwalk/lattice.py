"""Two-component walker on a bounded 1-D lattice.

Coin convention: ``a`` is the amplitude of ``|R>`` and moves to ``x + l``;
``b`` is the amplitude of ``|L>`` and moves to ``x - l``. A step is the coin
rotation followed by the conditional shift.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .errors import BoundaryOverflowError, DomainError, NormalizationError, ResourceError

SQRT_HALF = 1.0 / np.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class CoinOperator:
    """2x2 unitary acting on the ``(a, b)`` spinor at every site."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.complex128)
        if m.shape != (2, 2):
            raise DomainError(f"coin must be 2x2, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise DomainError("coin has non-finite entries")
        if np.abs(m @ m.conj().T - np.eye(2)).max() > 1e-12:
            raise DomainError("coin is not unitary within 1e-12")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __eq__(self, other):
        if not isinstance(other, CoinOperator):
            return NotImplemented
        return bool(np.array_equal(self.matrix, other.matrix))

    def __hash__(self):
        return hash(self.matrix.tobytes())

    @classmethod
    def hadamard(cls) -> "CoinOperator":
        return cls(np.array([[1.0, 1.0], [1.0, -1.0]]) * SQRT_HALF)

    @property
    def u00(self) -> complex:
        return complex(self.matrix[0, 0])

    @property
    def u01(self) -> complex:
        return complex(self.matrix[0, 1])

    @property
    def u10(self) -> complex:
        return complex(self.matrix[1, 0])

    @property
    def u11(self) -> complex:
        return complex(self.matrix[1, 1])

    @property
    def is_real(self) -> bool:
        return not np.any(self.matrix.imag)

    def tolist(self) -> list:
        """``[[re, im], ...]`` row-major, for JSON manifests."""
        return [[float(z.real), float(z.imag)] for z in self.matrix.ravel()]

    @classmethod
    def fromlist(cls, entries) -> "CoinOperator":
        vals = np.array([complex(re, im) for re, im in entries]).reshape(2, 2)
        return cls(vals)


@dataclass
class WalkState:
    """Amplitudes ``a(x), b(x)`` for ``x`` in ``[-x_max, x_max]`` at time ``t``.

    ``window`` is ``(lo, hi)`` in site coordinates; amplitudes outside it are
    exactly zero.
    """

    a: np.ndarray
    b: np.ndarray
    x_max: int
    t: int = 0
    window: tuple = (0, 0)

    @property
    def sites(self) -> np.ndarray:
        return np.arange(-self.x_max, self.x_max + 1)

    def index(self, x: int) -> int:
        return x + self.x_max

    def probabilities(self) -> np.ndarray:
        """``P(x)`` over the full array."""
        return np.abs(self.a) ** 2 + np.abs(self.b) ** 2

    def total_probability(self) -> float:
        return float(self.probabilities().sum())

    def copy(self) -> "WalkState":
        return WalkState(self.a.copy(), self.b.copy(), self.x_max, self.t, self.window)


def init_state(amp_a: complex, amp_b: complex, x_max: int) -> WalkState:
    """Walker localized at the origin with coin spinor ``(amp_a, amp_b)``."""
    if x_max <= 0:
        raise DomainError(f"x_max must be positive, got {x_max}")
    norm = abs(amp_a) ** 2 + abs(amp_b) ** 2
    if abs(norm - 1.0) > 1e-12:
        raise NormalizationError(f"|a|^2 + |b|^2 = {norm!r}, expected 1")
    a = np.zeros(2 * x_max + 1, dtype=np.complex128)
    b = np.zeros_like(a)
    a[x_max] = amp_a
    b[x_max] = amp_b
    return WalkState(a, b, x_max, 0, (0, 0))


def coin_apply(state: WalkState, coin: CoinOperator) -> WalkState:
    """Rotate the spinor at every site. Returns a new state; ``t`` unchanged."""
    u = coin.matrix
    out = state.copy()
    out.a = u[0, 0] * state.a + u[0, 1] * state.b
    out.b = u[1, 0] * state.a + u[1, 1] * state.b
    return out


def shift_apply(state: WalkState, l: int) -> WalkState:
    """Move ``a`` right and ``b`` left by ``l`` sites."""
    if l not in (1, 2):
        raise DomainError(f"step length must be 1 or 2, got {l}")
    lo, hi = state.window
    if hi + l > state.x_max or lo - l < -state.x_max:
        raise BoundaryOverflowError(
            f"shift by {l} from window {state.window} exceeds x_max={state.x_max}")
    out = state.copy()
    out.a = np.zeros_like(state.a)
    out.b = np.zeros_like(state.b)
    out.a[l:] = state.a[:-l]
    out.b[:-l] = state.b[l:]
    out.window = (lo - l, hi + l)
    return out


def step(state: WalkState, coin: CoinOperator, l: int) -> WalkState:
    """One tick: coin, then shift by ``l``."""
    out = shift_apply(coin_apply(state, coin), l)
    out.t = state.t + 1
    return out


def evolve(state: WalkState, coin: CoinOperator, lengths: Sequence[int]) -> WalkState:
    """Apply :func:`step` for each length in turn using the compiled kernel.

    The window may come back narrower than the light cone: edge sites with
    probability below ``kernels.TRIM`` are dropped.
    """
    lengths = np.asarray(lengths, dtype=np.int64)
    if lengths.size and not np.isin(lengths, (1, 2)).all():
        raise DomainError("step lengths must be 1 or 2")
    lo, hi = state.window
    reach = int(lengths.sum())
    if hi + reach > state.x_max or lo - reach < -state.x_max:
        raise BoundaryOverflowError(
            f"{lengths.size} steps (reach {reach}) exceed x_max={state.x_max}")
    out = state.copy()
    series = np.zeros((1, kernels.N_SERIES))
    snaps = np.zeros((0, out.a.size))
    ilo, ihi = kernels.evolve(out.a, out.b, state.x_max, lengths, coin.matrix,
                              max(lengths.size, 1) + 1, np.zeros(0, np.int64),
                              series, snaps)
    out.t = state.t + int(lengths.size)
    out.window = (int(ilo) - state.x_max, int(ihi) - state.x_max)
    return out


MAX_ORACLE_STEPS = 12


def dense_oracle_evolve(amp_a: complex, amp_b: complex, coin: CoinOperator,
                        lengths: Sequence[int], x_max: int | None = None) -> WalkState:
    """Brute-force evolution with the full step unitary built as a dense matrix.

    Test oracle only. The basis is ``[a(-x_max..x_max), b(-x_max..x_max)]``.
    """
    lengths = [int(l) for l in lengths]
    T = len(lengths)
    if T > MAX_ORACLE_STEPS:
        raise ResourceError(f"dense oracle limited to {MAX_ORACLE_STEPS} steps, got {T}")
    if x_max is None:
        x_max = max(2 * T, 1)
    n = 2 * x_max + 1
    psi = np.zeros(2 * n, dtype=np.complex128)
    psi[x_max] = amp_a
    psi[n + x_max] = amp_b
    big_coin = np.kron(coin.matrix, np.eye(n))
    for l in lengths:
        shift = np.zeros((2 * n, 2 * n))
        for i in range(n):
            if i + l < n:
                shift[i + l, i] = 1.0
            if i - l >= 0:
                shift[n + i - l, n + i] = 1.0
        psi = (shift @ big_coin) @ psi
    reach = sum(lengths)
    return WalkState(psi[:n].copy(), psi[n:].copy(), x_max, T, (-reach, reach))


def probability_at(state: WalkState, x: int) -> float:
    """``|a(x)|^2 + |b(x)|^2``; zero for sites off the array."""
    if abs(x) > state.x_max:
        return 0.0
    i = state.index(x)
    return float(abs(state.a[i]) ** 2 + abs(state.b[i]) ** 2)
