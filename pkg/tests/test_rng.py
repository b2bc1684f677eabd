import numpy as np

from tisa.rng import SplitMix64


def test_reference_stream():
    # Published SplitMix64 outputs for seed 1234567.
    assert SplitMix64(1234567).raw(3).tolist() == [
        6457827717110365317, 3203168211198807973, 9817491932198370423]


def test_chunked_draws_match_one_draw():
    a = SplitMix64(99)
    b = SplitMix64(99)
    assert np.array_equal(np.concatenate([a.raw(3), a.raw(5)]), b.raw(8))


def test_uniform_and_integers_in_range():
    r = SplitMix64(5)
    u = r.uniform(10_000)
    assert u.min() >= 0.0 and u.max() < 1.0
    k = r.integers(7, 10_000)
    assert k.min() == 0 and k.max() == 6


def test_normal_moments():
    z = SplitMix64(11).normal(200_000)
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1.0) < 0.01


def test_spawn_is_deterministic():
    assert SplitMix64(3).spawn(1).next_u64() == SplitMix64(3).spawn(1).next_u64()
    assert SplitMix64(3).spawn(1).next_u64() != SplitMix64(3).spawn(2).next_u64()
