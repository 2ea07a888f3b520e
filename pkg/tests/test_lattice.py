import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pqwalk import kernels
from pqwalk.errors import BoundaryOverflowError, DomainError, NormalizationError, ResourceError
from pqwalk.lattice import (SQRT_HALF, CoinOperator, coin_apply, dense_oracle_evolve, evolve,
                            init_state, probability_at, shift_apply, step)

H = CoinOperator.hadamard()


def symmetric_init(x_max=20):
    return init_state(SQRT_HALF, SQRT_HALF, x_max)


def test_init_symmetric_spinor():
    s = init_state(SQRT_HALF, SQRT_HALF, 100)
    assert probability_at(s, 0) == pytest.approx(1.0, abs=1e-15)
    assert s.total_probability() == pytest.approx(1.0, abs=1e-15)
    assert s.t == 0 and s.window == (0, 0)


def test_init_basis_state():
    s = init_state(1, 0, 10)
    assert s.a[s.index(0)] == 1
    assert not s.b.any()


def test_init_normalization():
    init_state(0.6, 0.8, 10)
    with pytest.raises(NormalizationError):
        init_state(0.6, 0.9, 10)
    with pytest.raises(DomainError):
        init_state(1, 0, 0)


@pytest.mark.parametrize("spinor, expected", [
    ((SQRT_HALF, SQRT_HALF), (1.0, 0.0)),
    ((1.0, 0.0), (SQRT_HALF, SQRT_HALF)),
    ((0.0, 1.0), (SQRT_HALF, -SQRT_HALF)),
])
def test_hadamard_on_site(spinor, expected):
    s = coin_apply(init_state(*spinor, 5), H)
    assert s.a[s.index(0)] == pytest.approx(expected[0], abs=1e-15)
    assert s.b[s.index(0)] == pytest.approx(expected[1], abs=1e-15)
    assert s.t == 0


def test_coin_rejects_non_unitary():
    with pytest.raises(DomainError):
        CoinOperator(np.array([[1, 1], [0, 1]]))


def test_shift_examples():
    s = shift_apply(init_state(1, 0, 10), 2)
    assert probability_at(s, 2) == 1.0
    assert s.total_probability() == 1.0
    assert s.window == (-2, 2)

    s = shift_apply(init_state(0, 1, 10), 1)
    assert s.b[s.index(-1)] == 1.0

    s = init_state(1, 0, 10)
    s.a[:] = 0
    s.a[s.index(3)] = 0.6
    s.b[s.index(3)] = 0.8
    s.window = (3, 3)
    out = shift_apply(s, 1)
    assert out.a[out.index(4)] == pytest.approx(0.6)
    assert out.b[out.index(2)] == pytest.approx(0.8)
    assert out.total_probability() == pytest.approx(1.0, abs=1e-15)


def test_shift_overflow_and_domain():
    s = init_state(1, 0, 2)
    s = shift_apply(s, 2)
    with pytest.raises(BoundaryOverflowError):
        shift_apply(s, 1)
    with pytest.raises(DomainError):
        shift_apply(init_state(1, 0, 5), 3)


def test_two_hand_steps():
    s1 = step(symmetric_init(), H, 1)
    assert s1.t == 1
    assert probability_at(s1, 1) == pytest.approx(1.0, abs=1e-15)
    s2 = step(s1, H, 1)
    assert probability_at(s2, 2) == pytest.approx(0.5, abs=1e-15)
    assert probability_at(s2, 0) == pytest.approx(0.5, abs=1e-15)
    assert s2.a[s2.index(2)] == pytest.approx(SQRT_HALF)
    assert s2.b[s2.index(0)] == pytest.approx(SQRT_HALF)


def test_probability_at_out_of_range():
    s = symmetric_init(5)
    assert probability_at(s, 3) == 0.0
    assert probability_at(s, 50) == 0.0


def test_oracle_small_cases():
    s = dense_oracle_evolve(SQRT_HALF, SQRT_HALF, H, [1])
    assert probability_at(s, 1) == pytest.approx(1.0, abs=1e-14)
    s0 = dense_oracle_evolve(SQRT_HALF, SQRT_HALF, H, [])
    assert probability_at(s0, 0) == pytest.approx(1.0)
    with pytest.raises(ResourceError):
        dense_oracle_evolve(1, 0, H, [1] * 13)


def test_oracle_matches_three_steps():
    lengths = [1, 2, 1]
    x_max = 2 * len(lengths)
    manual = init_state(SQRT_HALF, SQRT_HALF, x_max)
    for l in lengths:
        manual = step(manual, H, l)
    oracle = dense_oracle_evolve(SQRT_HALF, SQRT_HALF, H, lengths, x_max)
    np.testing.assert_allclose(manual.a, oracle.a, atol=1e-12)
    np.testing.assert_allclose(manual.b, oracle.b, atol=1e-12)


@pytest.mark.parametrize("lengths", [list(c) for c in itertools.product((1, 2), repeat=5)])
def test_kernel_vs_oracle_length5(lengths):
    x_max = 10
    fast = evolve(init_state(SQRT_HALF, SQRT_HALF, x_max), H, lengths)
    oracle = dense_oracle_evolve(SQRT_HALF, SQRT_HALF, H, lengths, x_max)
    np.testing.assert_allclose(fast.a, oracle.a, atol=1e-12)
    np.testing.assert_allclose(fast.b, oracle.b, atol=1e-12)


def test_numpy_and_numba_kernels_agree():
    if kernels.evolve_numba is None:
        pytest.skip("numba unavailable")
    rng = np.random.default_rng(5)
    T = 300
    lengths = rng.integers(1, 3, T)
    coin = np.array([[np.cos(0.3), 1j * np.sin(0.3)], [1j * np.sin(0.3), np.cos(0.3)]])
    out = []
    for fn in (kernels.evolve_numba, kernels._evolve_numpy):
        a = np.zeros(4 * T + 1, complex)
        b = np.zeros_like(a)
        a[2 * T] = 0.6
        b[2 * T] = 0.8j
        ser = np.zeros((T + 1, kernels.N_SERIES))
        snaps = np.zeros((2, a.size))
        fn(a, b, 2 * T, lengths, coin, 1, np.array([T // 2, T]), ser, snaps)
        out.append((a, b, ser, snaps))
    for x, y in zip(out[0], out[1]):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-12)


def test_parity_with_unit_steps():
    s = evolve(symmetric_init(60), H, [1] * 30)
    p = s.probabilities()
    x = s.sites
    assert np.all(p[(x + 30) % 2 == 1] == 0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from([1, 2]), min_size=1, max_size=40),
       st.floats(0, 2 * np.pi), st.floats(0, np.pi / 2))
def test_normalization_and_support(lengths, phase, theta):
    spinor = (np.cos(theta), np.exp(1j * phase) * np.sin(theta))
    T = len(lengths)
    s = evolve(init_state(*spinor, 2 * T), H, lengths)
    p = s.probabilities()
    assert abs(p.sum() - 1) < 1e-10
    assert np.all(p[np.abs(s.sites) > 2 * T] == 0)
    lo, hi = s.window
    assert np.all(p[(s.sites < lo) | (s.sites > hi)] == 0)


def test_hadamard_twice_is_identity():
    rng = np.random.default_rng(1)
    s = symmetric_init(10)
    s.a = rng.normal(size=s.a.size) + 1j * rng.normal(size=s.a.size)
    s.b = rng.normal(size=s.b.size) + 1j * rng.normal(size=s.b.size)
    back = coin_apply(coin_apply(s, H), H)
    np.testing.assert_allclose(back.a, s.a, atol=1e-12)
    np.testing.assert_allclose(back.b, s.b, atol=1e-12)
