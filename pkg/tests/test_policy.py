import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pqwalk import kernels
from pqwalk.errors import DomainError
from pqwalk.policy import (RngStream, Scheme, StepPolicy, effective_persistence,
                           generate_sequence, initial_length, next_length_scheme1,
                           next_length_scheme2)

M = 10**6
# 3 sigma of a fair binomial fraction at 10^6 draws is 0.0015
BINOM_TOL = 0.002


def test_initial_length_fair():
    rng = RngStream(11)
    u = rng.uniforms(M)
    frac = np.mean(u < 0.5)
    assert abs(frac - 0.5) < BINOM_TOL


def test_initial_length_reproducible():
    assert [initial_length(RngStream(42)) for _ in range(3)] == [initial_length(RngStream(42))] * 3


def test_child_streams_are_distinct_and_stable():
    a = RngStream.child(7, 0).uniforms(4)
    b = RngStream.child(7, 1).uniforms(4)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, RngStream.child(7, 0).uniforms(4))


def test_scheme1_limits():
    rng = RngStream(1)
    assert all(next_length_scheme1(2, 1.0, rng) == 2 for _ in range(200))
    assert all(next_length_scheme1(1, 0.0, rng) == 2 for _ in range(200))
    with pytest.raises(DomainError):
        next_length_scheme1(3, 0.5, rng)


def test_scheme1_half_persistence():
    seq = generate_sequence(StepPolicy(Scheme.SCHEME_I, 0.5), M + 1, 3)
    frac = np.mean(seq[1:] == seq[:-1])
    assert abs(frac - 0.5) < BINOM_TOL


def test_scheme2_limits():
    rng = RngStream(2)
    assert all(next_length_scheme2(1, 1.0, 0.3, rng) == 1 for _ in range(100))
    assert all(next_length_scheme2(2, 0.0, 1.0, rng) == 1 for _ in range(100))
    with pytest.raises(DomainError):
        next_length_scheme2(0, 0.5, 0.5, rng)


def test_scheme2_effective_persistence_empirical():
    seq = generate_sequence(StepPolicy(Scheme.SCHEME_II, 0.4, 0.5), M + 1, 4)
    frac = np.mean(seq[1:] == seq[:-1])
    assert abs(frac - 0.7) < BINOM_TOL


@pytest.mark.parametrize("p, q", [(0.2, 0.3), (0.7, 0.9)])
def test_scheme2_persistence_within_3_sigma(p, q):
    pol = StepPolicy(Scheme.SCHEME_II, p, q)
    seq = generate_sequence(pol, M + 1, 9)
    prev, nxt = seq[:-1], seq[1:]
    (after1, after2), _ = effective_persistence(pol)
    for k, expect in ((1, after1), (2, after2)):
        sel = prev == k
        n = sel.sum()
        sigma = np.sqrt(expect * (1 - expect) / n)
        assert abs(np.mean(nxt[sel] == k) - expect) < 3 * sigma


def test_effective_persistence_values():
    assert effective_persistence(StepPolicy(Scheme.SCHEME_II, 0.4, 0.5))[1] == pytest.approx(0.7)
    assert effective_persistence(StepPolicy(Scheme.SCHEME_II, 1.0, 0.1))[1] == pytest.approx(1.0)
    pair, mean = effective_persistence(StepPolicy(Scheme.SCHEME_II, 0.0, 0.3))
    assert pair == pytest.approx((0.3, 0.7))
    assert mean == pytest.approx(0.5)
    with pytest.raises(DomainError):
        effective_persistence(StepPolicy(Scheme.SCHEME_I, 0.5))


def test_alternating_at_p0():
    for seed in range(20):
        seq = generate_sequence(StepPolicy(Scheme.SCHEME_I, 0.0), 500, seed)
        assert np.all(seq[1:] == 3 - seq[:-1])
    # some seed starts with 1, giving 1, 2, 1, 2, ...
    seeds = [s for s in range(20) if generate_sequence(StepPolicy("I", 0.0), 1, s)[0] == 1]
    seq = generate_sequence(StepPolicy("I", 0.0), 6, seeds[0])
    assert seq.tolist() == [1, 2, 1, 2, 1, 2]


def test_fixed_policy():
    assert generate_sequence(StepPolicy(Scheme.FIXED, fixed_l=2), 5, 0).tolist() == [2] * 5


@pytest.mark.parametrize("scheme", [Scheme.SCHEME_I, Scheme.SCHEME_II])
def test_constant_after_first_at_p1(scheme):
    seq = generate_sequence(StepPolicy(scheme, 1.0, 0.5), 1000, 8)
    assert np.all(seq == seq[0])


def test_fair_pairs_entropy_at_half():
    seq = generate_sequence(StepPolicy(Scheme.SCHEME_I, 0.5), M + 1, 12)
    pairs = (seq[1:] - 1) * 2 + (seq[:-1] - 1)
    freq = np.bincount(pairs, minlength=4) / pairs.size
    H2 = -np.sum(freq * np.log2(freq))
    assert abs(H2 - 2.0) < 0.01


def test_sequence_matches_op_by_op_draws():
    for scheme, p, q in [("I", 0.3, 0.5), ("II", 0.3, 0.6)]:
        pol = StepPolicy(scheme, p, q)
        fast = generate_sequence(pol, 400, 99)
        rng = RngStream(99)
        prev = initial_length(rng)
        slow = [prev]
        for _ in range(399):
            prev = (next_length_scheme1(prev, p, rng) if scheme == "I"
                    else next_length_scheme2(prev, p, q, rng))
            slow.append(prev)
        assert fast.tolist() == slow


def test_numpy_sequence_path_matches_loop():
    u = RngStream(5).uniforms(4000)
    for code in (kernels.SCHEME_I, kernels.SCHEME_II, kernels.SCHEME_FIXED):
        a = kernels._sequence_numpy(code, 0.37, 0.61, 2, u, 1500)
        b = kernels._sequence_loop(code, 0.37, 0.61, 2, u, 1500)
        np.testing.assert_array_equal(a, b)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["I", "II", "fixed"]), st.floats(0, 1), st.floats(0, 1),
       st.integers(1, 300), st.integers(0, 2**64 - 1))
def test_sequence_is_pure(scheme, p, q, T, seed):
    pol = StepPolicy(scheme, p, q)
    a = generate_sequence(pol, T, seed)
    b = generate_sequence(pol, T, seed)
    assert a.tolist() == b.tolist()
    assert set(a.tolist()) <= {1, 2}
    assert a.size == T


def test_policy_validation():
    with pytest.raises(DomainError):
        StepPolicy("I", 1.2)
    with pytest.raises(DomainError):
        StepPolicy("fixed", fixed_l=3)
    with pytest.raises(DomainError):
        StepPolicy("III")
    with pytest.raises(DomainError):
        RngStream(-1)
