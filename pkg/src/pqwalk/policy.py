"""Step-length policies with one-step memory.

Draw discipline (fixed so sequences are reproducible): one uniform ``u`` for
``l(0)`` (``u < 1/2`` gives 1). Scheme I then uses one uniform per step
(``u < p`` keeps the previous length, otherwise switches). Scheme II uses one
uniform for the branch (``u < p`` keeps) and, only in the random branch, a
second uniform for the length (``u < q`` gives 1).

Random streams are numpy ``Philox`` generators keyed by ``SeedSequence``;
trajectory ``i`` of a run with master seed ``s`` uses the spawn key ``(i,)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError


class Scheme(str, enum.Enum):
    SCHEME_I = "I"
    SCHEME_II = "II"
    FIXED = "fixed"

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        key = str(value).strip()
        aliases = {"1": "I", "i": "I", "scheme_i": "I", "2": "II", "ii": "II",
                   "scheme_ii": "II", "fixed": "fixed"}
        try:
            return cls(aliases.get(key.lower(), key))
        except ValueError:
            raise DomainError(f"unknown scheme {value!r}") from None


_KERNEL_CODE = {Scheme.FIXED: kernels.SCHEME_FIXED, Scheme.SCHEME_I: kernels.SCHEME_I,
                Scheme.SCHEME_II: kernels.SCHEME_II}


@dataclass(frozen=True)
class StepPolicy:
    """Persistence probability ``p``; ``q`` is P(l=1) in Scheme II's random branch."""

    scheme: Scheme = Scheme.SCHEME_I
    p: float = 0.5
    q: float = 0.5
    fixed_l: int = 1

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        for name in ("p", "q"):
            v = float(getattr(self, name))
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {v}")
            object.__setattr__(self, name, v)
        if self.fixed_l not in (1, 2):
            raise DomainError(f"fixed_l must be 1 or 2, got {self.fixed_l}")

    def to_dict(self) -> dict:
        return {"scheme": self.scheme.value, "p": self.p, "q": self.q, "fixed_l": self.fixed_l}

    @classmethod
    def from_dict(cls, d: dict) -> "StepPolicy":
        return cls(Scheme.parse(d["scheme"]), d.get("p", 0.5), d.get("q", 0.5),
                   int(d.get("fixed_l", 1)))


class RngStream:
    """Counter-based uniform stream (Philox) with a documented key schedule."""

    def __init__(self, seed: int, index: int | None = None):
        if seed < 0 or seed >= 2**64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed}")
        key = () if index is None else (int(index),)
        self.seed = int(seed)
        self.index = index
        self._gen = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(self.seed, spawn_key=key)))

    @classmethod
    def child(cls, master_seed: int, index: int) -> "RngStream":
        return cls(master_seed, index)

    def uniform(self) -> float:
        return float(self._gen.random())

    def uniforms(self, n: int) -> np.ndarray:
        return self._gen.random(n)


def _check_prev(prev: int):
    if prev not in (1, 2):
        raise DomainError(f"previous length must be 1 or 2, got {prev}")


def initial_length(rng: RngStream) -> int:
    return 1 if rng.uniform() < 0.5 else 2


def next_length_scheme1(prev: int, p: float, rng: RngStream) -> int:
    """Keep ``prev`` with probability ``p``, otherwise take the other length."""
    _check_prev(prev)
    return prev if rng.uniform() < p else 3 - prev


def next_length_scheme2(prev: int, p: float, q: float, rng: RngStream) -> int:
    """Keep ``prev`` with probability ``p``; otherwise draw 1 w.p. ``q``, else 2."""
    _check_prev(prev)
    if rng.uniform() < p:
        return prev
    return 1 if rng.uniform() < q else 2


def effective_persistence(policy: StepPolicy) -> tuple[tuple[float, float], float]:
    """Probability that Scheme II emits the previous length.

    Returns ``((after_1, after_2), mean)`` where ``after_k`` conditions on the
    previous length being ``k`` and ``mean`` weights both equally.
    """
    if policy.scheme is not Scheme.SCHEME_II:
        raise DomainError("effective persistence is defined for Scheme II only")
    p, q = policy.p, policy.q
    pair = (p + q * (1.0 - p), p + (1.0 - q) * (1.0 - p))
    return pair, 0.5 * (pair[0] + pair[1])


def sequence_from_stream(policy: StepPolicy, T: int, rng: RngStream) -> np.ndarray:
    if T < 1:
        raise DomainError(f"T must be at least 1, got {T}")
    code = _KERNEL_CODE[policy.scheme]
    u = rng.uniforms(kernels.draws_needed(code, T))
    return kernels.make_sequence(code, policy.p, policy.q, policy.fixed_l, u, T)


def generate_sequence(policy: StepPolicy, T: int, seed: int) -> np.ndarray:
    """``l(0), ..., l(T-1)`` as an int64 array; a pure function of its arguments."""
    return sequence_from_stream(policy, T, RngStream(seed))
