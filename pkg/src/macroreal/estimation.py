"""Raw-data correlation estimator with bootstrap standard errors.

The estimate of an L-th order correlation is the sample mean of the product of
mean-subtracted outputs. Expanding that product over subsets S of the requested
columns expresses it through raw moments mu_S = mean(prod_{m in S} x_m), so the data
can be streamed in chunks and only per-block moment sums are kept.

Standard errors come from a nonparametric bootstrap over shots. Shots are grouped
into at most ``n_blocks`` contiguous blocks and blocks are resampled with replacement;
with ``n_rows <= n_blocks`` every shot is its own block and this is the ordinary
shot-level bootstrap. Shots are i.i.d., so contiguous blocks are i.i.d. as well.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import DomainError
from .rng import STREAM_BOOTSTRAP, generator

DEFAULT_RESAMPLES = 400
DEFAULT_BLOCKS = 2048
_ROWS_PER_PASS = 1 << 17


@dataclass(frozen=True)
class CorrelationEstimate:
    value: float
    std_error: float
    labels: tuple[str, ...]
    replicates: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def order(self) -> int:
        return len(self.labels)


def _subsets(requests: Sequence[tuple[int, ...]]) -> list[tuple[int, ...]]:
    seen = {}
    for req in requests:
        cols = tuple(sorted(req))
        for size in range(1, len(cols) + 1):
            for s in combinations(cols, size):
                seen.setdefault(s, None)
    return sorted(seen, key=lambda s: (len(s), s))


class MomentAccumulator:
    """Streams rows of outputs into per-block raw-moment sums.

    Parameters
    ----------
    n_columns : int
        Number of output columns (windows) per row.
    requests : sequence of tuples of int
        Column indices of each requested correlation.
    n_rows : int
        Total number of rows that will be added; fixes the block layout.
    n_blocks : int, optional
        Upper bound on bootstrap blocks.
    center : array_like, optional
        Per-column constant subtracted before accumulating (estimates are invariant
        to it; choosing it near the column means limits cancellation).
    """

    def __init__(self, n_columns, requests, n_rows, n_blocks=DEFAULT_BLOCKS, center=None):
        if n_rows < 2:
            raise DomainError(f"need at least 2 shots, got {n_rows}")
        self.requests = [tuple(int(c) for c in r) for r in requests]
        if not self.requests:
            raise DomainError("empty request list")
        for r in self.requests:
            if not r:
                raise DomainError("correlation order must be >= 1")
            if len(set(r)) != len(r):
                raise DomainError(f"repeated column in request {r}")
            if min(r) < 0 or max(r) >= n_columns:
                raise DomainError(f"request {r} out of range for {n_columns} columns")
        self.n_columns = n_columns
        self.n_rows = int(n_rows)
        self.n_blocks = int(min(self.n_rows, n_blocks))
        self.subsets = _subsets(self.requests)
        self._pos = {s: n for n, s in enumerate(self.subsets)}
        self.center = np.zeros(n_columns) if center is None else np.asarray(center, dtype=float)
        self.sums = np.zeros((self.n_blocks, len(self.subsets)))
        self.counts = np.zeros(self.n_blocks)
        self.col_min = np.full(n_columns, np.inf)
        self.col_max = np.full(n_columns, -np.inf)
        self.rows_seen = 0

    def add(self, rows: np.ndarray, start: int) -> None:
        """Accumulate ``rows`` whose first row has global shot index ``start``."""
        rows = np.asarray(rows)
        if rows.ndim != 2 or rows.shape[1] != self.n_columns:
            raise DomainError(f"rows must have shape (m, {self.n_columns}), got {rows.shape}")
        for lo in range(0, rows.shape[0], _ROWS_PER_PASS):
            part = rows[lo:lo + _ROWS_PER_PASS]
            self._add_part(part, start + lo)

    def _add_part(self, part: np.ndarray, start: int) -> None:
        m = part.shape[0]
        if start < 0 or start + m > self.n_rows:
            raise DomainError("rows fall outside the declared shot range")
        self.col_min = np.minimum(self.col_min, part.min(axis=0))
        self.col_max = np.maximum(self.col_max, part.max(axis=0))
        x = part.astype(float) - self.center
        block = (np.arange(start, start + m, dtype=np.int64) * self.n_blocks) // self.n_rows
        self.counts += np.bincount(block, minlength=self.n_blocks)
        products: dict[tuple[int, ...], np.ndarray] = {}
        for s in self.subsets:
            prod = x[:, s[0]] if len(s) == 1 else products[s[:-1]] * x[:, s[-1]]
            products[s] = prod
            self.sums[:, self._pos[s]] += np.bincount(block, weights=prod, minlength=self.n_blocks)
        self.rows_seen += m

    def _correlations(self, mu: np.ndarray) -> np.ndarray:
        """Centered correlations from raw moments; ``mu`` has shape (..., n_subsets)."""
        out = np.empty(mu.shape[:-1] + (len(self.requests),))
        for n, req in enumerate(self.requests):
            cols = tuple(sorted(req))
            total = np.zeros(mu.shape[:-1])
            for size in range(len(cols) + 1):
                for s in combinations(cols, size):
                    term = mu[..., self._pos[s]] if s else np.ones(mu.shape[:-1])
                    for c in cols:
                        if c not in s:
                            term = term * -mu[..., self._pos[(c,)]]
                    total = total + term
            out[..., n] = total
        return out

    def _constant_mask(self) -> np.ndarray:
        constant = self.col_min == self.col_max
        return np.array([bool(constant[list(r)].any()) for r in self.requests])

    def estimate(self, labels=None, resamples: int = DEFAULT_RESAMPLES, seed: int = 0,
                 keep_replicates: bool = False) -> list[CorrelationEstimate]:
        if self.rows_seen != self.n_rows:
            raise DomainError(f"accumulated {self.rows_seen} rows, expected {self.n_rows}")
        if resamples < 100:
            raise DomainError(f"need at least 100 bootstrap resamples, got {resamples}")
        mu = self.sums.sum(axis=0) / self.counts.sum()
        values = self._correlations(mu)
        weights = generator(seed, STREAM_BOOTSTRAP).multinomial(
            self.n_blocks, np.full(self.n_blocks, 1.0 / self.n_blocks), size=resamples
        ).astype(float)
        boot = self._correlations((weights @ self.sums) / (weights @ self.counts)[:, None])
        # a constant column makes the centered product identically zero
        constant = self._constant_mask()
        values[constant] = 0.0
        boot[:, constant] = 0.0
        names = labels if labels is not None else [tuple(str(c) for c in r) for r in self.requests]
        out = []
        for n, name in enumerate(names):
            rep = boot[:, n]
            out.append(CorrelationEstimate(
                float(values[n]), float(np.std(rep, ddof=1)), tuple(name),
                rep.copy() if keep_replicates else None,
            ))
        return out


def estimate_from_outputs(outputs: np.ndarray, requests, labels=None, resamples: int = DEFAULT_RESAMPLES,
                          seed: int = 0, n_blocks: int = DEFAULT_BLOCKS, center=None,
                          keep_replicates: bool = False) -> list[CorrelationEstimate]:
    """One-shot estimate for an in-memory (shots x columns) output matrix."""
    outputs = np.asarray(outputs)
    acc = MomentAccumulator(outputs.shape[1], requests, outputs.shape[0], n_blocks=n_blocks, center=center)
    acc.add(outputs, 0)
    return acc.estimate(labels=labels, resamples=resamples, seed=seed, keep_replicates=keep_replicates)
