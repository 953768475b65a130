"""Shot-by-shot Monte Carlo of the sequential weak-measurement protocol.

Each window: the sensor starts in |x>, the target evolves conditionally for tau, and
sigma_y of the sensor is read out. The outcome r = +/-1 is drawn with probability
Tr[M_r rho M_r^dag] for Kraus operators M_+/- = (U_+ -/+ i U_-) / 2, whose sums
reproduce the K and M superoperators of :mod:`quantum_exact`.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import poisson

from .errors import DomainError, InvariantError
from .estimation import DEFAULT_BLOCKS, DEFAULT_RESAMPLES, CorrelationEstimate, MomentAccumulator
from .quantum_exact import kraus_operators
from .rng import STREAM_PHOTON, STREAM_QUANTUM, chunk_bounds, uniform_rows
from .schedule import MeasurementSchedule, sequential
from .spin_algebra import MAXIMALLY_MIXED, ModelParams, dagger, free_propagator, pauli_transfer

PROB_TOL = 1e-12
STATE_TOL = 1e-10
DEFAULT_CHUNK = 1 << 18
THREADS_ENV = "MACROREAL_THREADS"


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class ReadoutModel:
    """Poisson photon readout: mean counts ``n_plus`` / ``n_minus`` per shot for sensor state +/-."""

    n_plus: float
    n_minus: float = 0.0

    def __post_init__(self):
        if self.n_plus < 0 or self.n_minus < 0:
            raise DomainError("mean photon numbers must be non-negative")
        if self.n_plus == self.n_minus:
            raise DomainError("n_plus == n_minus: zero contrast")

    @classmethod
    def from_rate(cls, chi_ph: float, tau: float) -> "ReadoutModel":
        """Perfect-contrast readout, n_plus = chi_ph * tau and n_minus = 0 (chi_ph and tau in matching units)."""
        return cls(chi_ph * tau, 0.0)

    @property
    def contrast(self) -> float:
        """(n_plus - n_minus) / 2, the factor linking photon and spin correlations per order."""
        return (self.n_plus - self.n_minus) / 2

    @property
    def single_shot_variance(self) -> float:
        """Delta^2 = ((n_+ - n_-)^2 + 2 (n_+ + n_-)) / 4 for a zero-mean sensor."""
        return ((self.n_plus - self.n_minus) ** 2 + 2 * (self.n_plus + self.n_minus)) / 4

    @property
    def midpoint(self) -> float:
        return (self.n_plus + self.n_minus) / 2


@dataclass(frozen=True)
class ShotDataset:
    """Raw outputs (shots x windows) plus the provenance needed to regenerate them."""

    outputs: np.ndarray
    schedule: MeasurementSchedule
    seed: int
    readout: ReadoutModel | None = None

    def __post_init__(self):
        out = self.outputs
        if out.ndim != 2 or out.shape[1] != len(self.schedule):
            raise DomainError(f"outputs shape {out.shape} does not match {len(self.schedule)} windows")
        if self.readout is None:
            if out.dtype != np.int8 or not np.all(np.abs(out) == 1):
                raise DomainError("spin outputs must be int8 values in {-1, +1}")
        elif out.dtype != np.uint16:
            raise DomainError("photon counts must be uint16")

    @property
    def shots(self) -> int:
        return self.outputs.shape[0]

    @property
    def is_photon(self) -> bool:
        return self.readout is not None


# ---------------------------------------------------------------------------
# single-shot reference path (2x2 density matrices)


def simulate_shot(sched: MeasurementSchedule, p: ModelParams, rng: np.random.Generator) -> np.ndarray:
    """One shot of +/-1 outcomes starting from the maximally mixed target."""
    mp, mm = kraus_operators(p)
    rho = MAXIMALLY_MIXED.copy()
    t_prev = 0.0
    out = np.empty(len(sched), dtype=np.int8)
    for n, w in enumerate(sched.windows):
        u = free_propagator(w.start - t_prev, p)
        rho = u @ rho @ dagger(u)
        plus = mp @ rho @ dagger(mp)
        minus = mm @ rho @ dagger(mm)
        p_plus, p_minus = np.trace(plus).real, np.trace(minus).real
        if min(p_plus, p_minus) < -PROB_TOL or abs(p_plus + p_minus - 1) > PROB_TOL:
            raise InvariantError(f"outcome probabilities ({p_plus}, {p_minus}) at window {w.label!r}")
        if rng.random() < p_plus:
            out[n], rho = 1, plus / p_plus
        else:
            out[n], rho = -1, minus / p_minus
        t_prev = w.end
    return out


# ---------------------------------------------------------------------------
# batched path (Bloch 4-vectors, real transfer matrices)


def _z_rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1, 0, 0, 0], [0, c, -s, 0], [0, s, c, 0], [0, 0, 0, 1.0]])


def window_transfers(sched: MeasurementSchedule, p: ModelParams) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per window, the transfer matrices (gap precession followed by Kraus branch +, -)."""
    mp, mm = kraus_operators(p)
    t_plus = pauli_transfer(lambda x: mp @ x @ dagger(mp))
    t_minus = pauli_transfer(lambda x: mm @ x @ dagger(mm))
    out, t_prev = [], 0.0
    for w in sched.windows:
        f = _z_rotation(p.omega * (w.start - t_prev))
        out.append((t_plus @ f, t_minus @ f))
        t_prev = w.end
    return out


def _simulate_rows(transfers, uniforms: np.ndarray) -> np.ndarray:
    n = uniforms.shape[0]
    state = np.zeros((n, 4))
    state[:, 0] = 1.0
    out = np.empty((n, len(transfers)), dtype=np.int8)
    for m, (a_plus, a_minus) in enumerate(transfers):
        c_plus = state @ a_plus.T
        c_minus = state @ a_minus.T
        p_plus, p_minus = c_plus[:, 0], c_minus[:, 0]
        if p_plus.min() < -PROB_TOL or p_minus.min() < -PROB_TOL:
            raise InvariantError(f"negative outcome probability at window {m}")
        if np.max(np.abs(p_plus + p_minus - 1)) > PROB_TOL:
            raise InvariantError(f"outcome probabilities do not sum to 1 at window {m}")
        hit = uniforms[:, m] < p_plus
        out[:, m] = np.where(hit, 1, -1)
        denom = np.where(hit, p_plus, p_minus)[:, None]
        state = np.where(hit[:, None], c_plus, c_minus) / np.where(denom > 0, denom, 1.0)
        if np.max(np.sum(state[:, 1:] ** 2, axis=1)) > 1 + STATE_TOL:
            raise InvariantError(f"Bloch vector left the unit ball at window {m}")
    return out


def simulate_dataset(sched: MeasurementSchedule, p: ModelParams, shots: int, seed: int,
                     chunk: int = DEFAULT_CHUNK, threads: int | None = None) -> ShotDataset:
    """Simulate ``shots`` independent shots; bit-identical for any ``chunk`` and ``threads``."""
    if shots < 1:
        raise DomainError("shots must be >= 1")
    transfers = window_transfers(sched, p)
    out = np.empty((shots, len(sched)), dtype=np.int8)

    def run(bounds):
        lo, hi = bounds
        out[lo:hi] = _simulate_rows(transfers, uniform_rows(seed, STREAM_QUANTUM, lo, hi - lo, len(sched)))

    threads = threads or default_threads()
    bounds = list(chunk_bounds(shots, chunk))
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, bounds))
    else:
        for b in bounds:
            run(b)
    return ShotDataset(out, sched, int(seed))


def sequential_run(count: int, p: ModelParams, shots: int, seed: int, **kwargs) -> ShotDataset:
    """Abutting windows ending at t_n = n * tau, n = 1..count."""
    if count < 2:
        raise DomainError("sequential run needs count >= 2")
    return simulate_dataset(sequential(count, p), p, shots, seed, **kwargs)


# ---------------------------------------------------------------------------
# photon readout


def _poisson_inverse(u: np.ndarray, mean: float) -> np.ndarray:
    if mean == 0:
        return np.zeros(u.shape, dtype=np.int64)
    top = int(mean + 20 * np.sqrt(mean) + 30)
    cdf = poisson.cdf(np.arange(top + 1), mean)
    return np.minimum(np.searchsorted(cdf, u, side="right"), top)


def attach_photon_readout(dataset: ShotDataset, model: ReadoutModel, seed: int | None = None,
                          chunk: int = DEFAULT_CHUNK) -> ShotDataset:
    """Replace each +/-1 outcome by a Poisson count with mean n_plus or n_minus."""
    if dataset.is_photon:
        raise DomainError("dataset already holds photon counts")
    if max(model.n_plus, model.n_minus) > 1000:
        raise DomainError("mean photon numbers above 1000 do not fit the uint16 format safely")
    seed = dataset.seed if seed is None else seed
    shots, width = dataset.outputs.shape
    counts = np.empty((shots, width), dtype=np.uint16)
    for lo, hi in chunk_bounds(shots, chunk):
        u = uniform_rows(seed, STREAM_PHOTON, lo, hi - lo, width)
        spins = dataset.outputs[lo:hi]
        counts[lo:hi] = np.where(spins > 0, _poisson_inverse(u, model.n_plus), _poisson_inverse(u, model.n_minus))
    return ShotDataset(counts, dataset.schedule, dataset.seed, model)


# ---------------------------------------------------------------------------
# estimation


def estimate_correlations(dataset: ShotDataset, requests: Sequence[Sequence[str]],
                          resamples: int = DEFAULT_RESAMPLES, seed: int = 0,
                          n_blocks: int = DEFAULT_BLOCKS, keep_replicates: bool = False,
                          chunk: int = DEFAULT_CHUNK) -> list[CorrelationEstimate]:
    """Mean-subtracted raw-data correlations with bootstrap standard errors."""
    if not requests:
        raise DomainError("empty request list")
    cols = [dataset.schedule.indices(r) for r in requests]
    center = None
    if dataset.readout is not None:
        center = np.full(len(dataset.schedule), dataset.readout.midpoint)
    acc = MomentAccumulator(len(dataset.schedule), cols, dataset.shots, n_blocks=n_blocks, center=center)
    for lo, hi in chunk_bounds(dataset.shots, chunk):
        acc.add(dataset.outputs[lo:hi], lo)
    return acc.estimate(labels=[tuple(r) for r in requests], resamples=resamples, seed=seed,
                        keep_replicates=keep_replicates)


def rescale_photon_estimates(estimates: Sequence[CorrelationEstimate], model: ReadoutModel) -> list[CorrelationEstimate]:
    """Divide photon-count correlations by contrast**L to put them on the +/-1 scale."""
    out = []
    for e in estimates:
        f = model.contrast ** e.order
        rep = None if e.replicates is None else e.replicates / f
        out.append(CorrelationEstimate(e.value / f, e.std_error / abs(f), e.labels, rep))
    return out


def bin_columns(outputs: np.ndarray, p_bin: int, starts: Sequence[int]) -> np.ndarray:
    """Sums of ``p_bin`` consecutive columns beginning at each entry of ``starts``."""
    return np.stack([outputs[:, s:s + p_bin].sum(axis=1, dtype=np.int32) for s in starts], axis=1)


def binned_correlations(dataset: ShotDataset, p_bin: int, requests: Sequence[Sequence[int]],
                        resamples: int = DEFAULT_RESAMPLES, seed: int = 0,
                        n_blocks: int = DEFAULT_BLOCKS) -> list[CorrelationEstimate]:
    """Correlations of p-sums R_j + ... + R_{j+p-1}.

    Each request lists the 0-based first window of every bin; bins within one request
    must not overlap and must fit inside the run.
    """
    if p_bin < 1:
        raise DomainError("p_bin must be >= 1")
    if not requests:
        raise DomainError("empty request list")
    width = len(dataset.schedule)
    starts = sorted({s for r in requests for s in r})
    for r in requests:
        srt = sorted(r)
        if srt[0] < 0 or srt[-1] + p_bin > width:
            raise DomainError(f"bins {tuple(r)} with p={p_bin} exceed the {width} windows")
        if any(b - a < p_bin for a, b in zip(srt, srt[1:])):
            raise DomainError(f"bins {tuple(r)} overlap for p={p_bin}")
    col = {s: n for n, s in enumerate(starts)}
    center = None if dataset.readout is None else np.full(len(starts), p_bin * dataset.readout.midpoint)
    acc = MomentAccumulator(len(starts), [[col[s] for s in r] for r in requests], dataset.shots,
                            n_blocks=n_blocks, center=center)
    for lo, hi in chunk_bounds(dataset.shots, DEFAULT_CHUNK):
        acc.add(bin_columns(dataset.outputs[lo:hi], p_bin, starts), lo)
    labels = [tuple(f"{s}:{s + p_bin}" for s in r) for r in requests]
    return acc.estimate(labels=labels, resamples=resamples, seed=seed)


def bin_starts(first: int, spacing: int, order: int) -> tuple[int, ...]:
    """Evenly spaced bin starts first, first + spacing, ... (``order`` of them)."""
    return tuple(first + n * spacing for n in range(order))
