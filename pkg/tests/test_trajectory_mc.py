import math

import numpy as np
import pytest

from macroreal.errors import DomainError
from macroreal.quantum_exact import exact_correlation
from macroreal.rng import STREAM_QUANTUM, uniform_rows
from macroreal.schedule import BLUE_PRESET, eight_point, sequential
from macroreal.spin_algebra import ModelParams
from macroreal.trajectory_mc import (
    ReadoutModel, ShotDataset, _simulate_rows, attach_photon_readout, bin_starts, binned_correlations,
    estimate_correlations, rescale_photon_estimates, sequential_run, simulate_dataset, simulate_shot,
    window_transfers,
)


class ReplayRng:
    def __init__(self, values):
        self._it = iter(values)

    def random(self):
        return next(self._it)


@pytest.fixture
def p05():
    return ModelParams.from_ratio(0.05)


def test_batched_path_equals_reference_path(p05):
    sched = eight_point(BLUE_PRESET, p05)
    u = uniform_rows(5, STREAM_QUANTUM, 0, 300, len(sched))
    batch = _simulate_rows(window_transfers(sched, p05), u)
    for row, ref in zip(u, batch):
        assert np.array_equal(simulate_shot(sched, p05, ReplayRng(row)), ref)


def test_zero_tau_gives_fair_coins():
    p = ModelParams(tau=0.0)
    sched = sequential(3, ModelParams(tau=0.0), spacing=0.1)
    ds = simulate_dataset(sched, p, 200_000, seed=1)
    assert np.all(np.abs(ds.outputs.mean(axis=0)) < 4 / math.sqrt(200_000))
    c = np.corrcoef(ds.outputs.T.astype(float))
    assert np.max(np.abs(c - np.eye(3))) < 5 / math.sqrt(200_000)


def test_reproducible_across_chunks_and_threads(p05):
    sched = eight_point(BLUE_PRESET, p05)
    a = simulate_dataset(sched, p05, 10_000, seed=42)
    b = simulate_dataset(sched, p05, 10_000, seed=42, chunk=999, threads=3)
    assert np.array_equal(a.outputs, b.outputs)
    assert not np.array_equal(a.outputs, simulate_dataset(sched, p05, 10_000, seed=43).outputs)


def test_single_output_means_vanish(p05):
    ds = simulate_dataset(eight_point(BLUE_PRESET, p05), p05, 250_000, seed=2)
    assert np.all(np.abs(ds.outputs.mean(axis=0)) < 4 / math.sqrt(250_000))


def test_mc_matches_exact_pairs_and_quads(p05):
    sched = eight_point(BLUE_PRESET, p05)
    ds = simulate_dataset(sched, p05, 1_000_000, seed=11)
    reqs = [("i", "j"), ("i", "i+"), ("k", "l"), ("i", "i+", "j", "j+"), ("i", "j", "j+", "k")]
    for e in estimate_correlations(ds, reqs, resamples=200):
        assert abs(e.value - exact_correlation(sched, e.labels, p05)) < 5 * e.std_error


def test_dataset_invariants(p05):
    sched = eight_point(BLUE_PRESET, p05)
    with pytest.raises(DomainError):
        ShotDataset(np.zeros((3, 8), dtype=np.int8), sched, 0)
    with pytest.raises(DomainError):
        ShotDataset(np.ones((3, 7), dtype=np.int8), sched, 0)
    with pytest.raises(DomainError):
        ShotDataset(np.ones((3, 8), dtype=np.int16), sched, 0, ReadoutModel(1.0))
    with pytest.raises(DomainError):
        simulate_dataset(sched, p05, 0, seed=0)
    with pytest.raises(DomainError):
        sequential_run(1, p05, 10, seed=0)


def test_readout_model():
    m = ReadoutModel.from_rate(3e6, 23e-9)
    assert m.n_plus == pytest.approx(0.069)
    assert m.single_shot_variance == pytest.approx(0.0357, abs=1e-4)
    with pytest.raises(DomainError):
        ReadoutModel(0.5, 0.5)
    with pytest.raises(DomainError):
        ReadoutModel(-1.0)


def test_photon_counts_statistics_and_rescaling(p05):
    sched = eight_point(BLUE_PRESET, p05)
    spins = simulate_dataset(sched, p05, 400_000, seed=4)
    model = ReadoutModel(6.0, 1.0)
    photons = attach_photon_readout(spins, model)
    assert photons.outputs.dtype == np.uint16
    plus = photons.outputs[spins.outputs == 1]
    assert plus.mean() == pytest.approx(6.0, abs=5 * math.sqrt(6.0 / plus.size))
    assert plus.var() == pytest.approx(6.0, rel=0.02)
    reqs = [("i", "j"), ("i", "i+"), ("i", "i+", "j", "j+")]
    spin_est = estimate_correlations(spins, reqs, resamples=200)
    ph_est = rescale_photon_estimates(estimate_correlations(photons, reqs, resamples=200), model)
    for s, q in zip(spin_est, ph_est):
        assert abs(s.value - q.value) < 5 * math.hypot(s.std_error, q.std_error)
    with pytest.raises(DomainError):
        attach_photon_readout(photons, model)


def test_binning(p05):
    ds = sequential_run(12, p05, 20_000, seed=3)
    unb = estimate_correlations(ds, [("1", "4"), ("2", "5", "7", "10")], resamples=100, seed=1)
    binned = binned_correlations(ds, 1, [(0, 3), (1, 4, 6, 9)], resamples=100, seed=1)
    for a, b in zip(unb, binned):
        assert a.value == pytest.approx(b.value, abs=1e-14)
    assert bin_starts(1, 4, 3) == (1, 5, 9)
    with pytest.raises(DomainError):
        binned_correlations(ds, 4, [(0, 2)])
    with pytest.raises(DomainError):
        binned_correlations(ds, 4, [(0, 10)])
    with pytest.raises(DomainError):
        binned_correlations(ds, 0, [(0, 2)])
