import numpy as np
import pytest

from quadtomo import rng


def test_streams_are_reproducible_and_distinct():
    a = rng.stream(7, "signal", 0).standard_normal(5)
    np.testing.assert_array_equal(a, rng.stream(7, "signal", 0).standard_normal(5))
    for other in (rng.stream(8, "signal", 0), rng.stream(7, "signal", 1), rng.stream(7, "shot", 0)):
        assert not np.array_equal(a, other.standard_normal(5))


@pytest.mark.parametrize("seed", [-1, 2**64])
def test_seed_range(seed):
    with pytest.raises(ValueError):
        rng.stream(seed)


def test_largest_seed_accepted():
    rng.stream(2**64 - 1, "x").random()


def test_chunk_bounds():
    assert rng.chunk_bounds(5, 2) == [(0, 2), (2, 4), (4, 5)]
    assert rng.chunk_bounds(0) == []
    assert rng.chunk_bounds(rng.CHUNK_SIZE) == [(0, rng.CHUNK_SIZE)]


def test_ordered_map_keeps_order():
    items = list(range(20))
    assert rng.ordered_map(lambda k: k * k, items, workers=4) == [k * k for k in items]
