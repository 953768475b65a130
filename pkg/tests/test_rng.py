import numpy as np
import pytest
from scipy import stats

from macroreal.errors import DomainError
from macroreal.rng import STREAM_PHOTON, STREAM_QUANTUM, chunk_bounds, generator, uniform_rows


def test_rows_independent_of_partition():
    whole = uniform_rows(7, STREAM_QUANTUM, 0, 1000, 6)
    parts = np.vstack([uniform_rows(7, STREAM_QUANTUM, lo, hi - lo, 6) for lo, hi in chunk_bounds(1000, 77)])
    assert np.array_equal(whole, parts)
    assert np.array_equal(uniform_rows(7, STREAM_QUANTUM, 500, 3, 6), whole[500:503])


def test_streams_and_seeds_differ():
    a = uniform_rows(7, STREAM_QUANTUM, 0, 10, 4)
    assert not np.array_equal(a, uniform_rows(7, STREAM_PHOTON, 0, 10, 4))
    assert not np.array_equal(a, uniform_rows(8, STREAM_QUANTUM, 0, 10, 4))


def test_uniformity_and_independence():
    u = uniform_rows(123, STREAM_QUANTUM, 0, 200_000, 5)
    assert stats.kstest(u.ravel(), "uniform").pvalue > 1e-4
    c = np.corrcoef(u.T)
    assert np.max(np.abs(c - np.eye(5))) < 5 / np.sqrt(200_000) * 2


def test_seed_range_and_chunks():
    with pytest.raises(DomainError):
        uniform_rows(-1, 0, 0, 1, 1)
    with pytest.raises(DomainError):
        generator(2**64, 0)
    assert list(chunk_bounds(10, 4)) == [(0, 4), (4, 8), (8, 10)]
