"""Exact superoperator correlations of the quantum spin model and their weak-signal limits.

Each weak measurement acts on the target through two superoperators built from the
branch unitaries U_plus, U_minus:

* K rho = (U_- rho U_+^dag - h.c.) / 2i   (outcome-weighted, gives <r>)
* M rho = (U_+ rho U_+^dag + U_- rho U_-^dag) / 2   (outcome discarded)

An L-th order correlation applies K at the selected windows, M at the others, free
precession over the gaps, and takes the trace starting from the maximally mixed state.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import DomainError
from .schedule import PhaseDelays, MeasurementSchedule
from .spin_algebra import (
    MAXIMALLY_MIXED,
    ModelParams,
    dagger,
    free_propagator,
    interaction_unitaries,
)

TWO_PI = 2 * math.pi
# Denominator arguments at or below this are treated as the 0/0 set of the closed forms.
DEGENERATE_TOL = 1e-12


def kraus_operators(p: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Kraus operators (M_plus, M_minus) = (U_+ -/+ i U_-) / 2 of the sigma_y readout."""
    up, um = interaction_unitaries(p)
    return (up - 1j * um) / 2, (up + 1j * um) / 2


def superop_K(rho: np.ndarray, p: ModelParams, unitaries=None) -> np.ndarray:
    up, um = unitaries if unitaries is not None else interaction_unitaries(p)
    x = um @ rho @ dagger(up)
    return (x - dagger(x)) / 2j


def superop_M(rho: np.ndarray, p: ModelParams, unitaries=None) -> np.ndarray:
    up, um = unitaries if unitaries is not None else interaction_unitaries(p)
    return 0.5 * (up @ rho @ dagger(up) + um @ rho @ dagger(um))


def _selected_flags(sched: MeasurementSchedule, labels: Sequence[str]) -> list[bool]:
    if len(labels) < 1:
        raise DomainError("correlation order must be >= 1")
    idx = sched.indices(labels)
    if len(set(idx)) != len(idx):
        raise DomainError(f"repeated labels in request {tuple(labels)}")
    chosen = set(idx)
    return [n in chosen for n in range(len(sched))]


def exact_correlation(sched: MeasurementSchedule, labels: Sequence[str], p: ModelParams) -> float:
    """Exact L-th order output correlation for the windows named in ``labels``."""
    if abs(sched.tau - p.tau) > 1e-12 * max(1.0, p.tau):
        raise DomainError(f"schedule tau {sched.tau} does not match params tau {p.tau}")
    flags = _selected_flags(sched, labels)
    unitaries = interaction_unitaries(p)
    rho = MAXIMALLY_MIXED.copy()
    t_prev = 0.0
    for w, selected in zip(sched.windows, flags):
        gap = w.start - t_prev
        if gap != 0.0:
            u = free_propagator(gap, p)
            rho = u @ rho @ dagger(u)
        rho = superop_K(rho, p, unitaries) if selected else superop_M(rho, p, unitaries)
        t_prev = w.end
    return float(np.trace(rho).real)


def exact_correlations(
    sched: MeasurementSchedule, requests: Iterable[Sequence[str]], p: ModelParams
) -> dict[tuple[str, ...], float]:
    return {tuple(r): exact_correlation(sched, r, p) for r in requests}


# ---------------------------------------------------------------------------
# weak-signal-limit closed forms


def wsl_corr2(t_delta: float, p: ModelParams) -> float:
    """Leading-order pair correlation a_perp^2 tau^2 cos(t_delta)."""
    return p.coupling_phase**2 * math.cos(t_delta)


def wsl_correlation(end_times: Sequence[float], p: ModelParams) -> float:
    """Leading-order correlation of outputs recorded at ``end_times``.

    Odd orders vanish; even orders factorize over consecutive pairs,
    C_{1..2n} = C_{12} C_{34} ... C_{2n-1,2n}.
    """
    t = sorted(end_times)
    if len(t) % 2:
        return 0.0
    out = 1.0
    for a, b in zip(t[::2], t[1::2]):
        out *= wsl_corr2(p.omega * (b - a), p)
    return out


def quantum_wsl_parts(t_ji, t_kj, t_lk):
    """Numerator and denominator argument of the quantum V limit (units of A^2 tau^2)."""
    t_ji, t_kj, t_lk = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (t_ji, t_kj, t_lk)))
    num = np.abs(np.cos(t_ji) + np.cos(t_kj) + np.cos(t_ji + t_kj + t_lk) - np.cos(t_lk))
    den_arg = 4 + 2 * (np.sin(t_ji) * np.sin(t_kj) - np.sin(t_kj) * np.sin(t_lk))
    return num, den_arg


def wsl_v_limit_quantum_array(t_ji, t_kj, t_lk) -> np.ndarray:
    """Vectorised quantum V limit; NaN where the denominator argument vanishes."""
    num, den_arg = quantum_wsl_parts(t_ji, t_kj, t_lk)
    den_abs = np.abs(den_arg)
    ok = den_abs > DEGENERATE_TOL
    return np.where(ok, num / np.sqrt(np.where(ok, den_abs, 1.0)), np.nan)


def wsl_v_limit_quantum(d: PhaseDelays | Sequence[float]) -> float:
    """Weak-signal limit of V for the quantum model.

    Returns NaN on the measure-zero set where numerator and denominator both vanish
    (for example at delays (pi/2, 3pi/2, 3pi/2)).
    """
    t = d.as_tuple() if isinstance(d, PhaseDelays) else tuple(d)
    num, den_arg = quantum_wsl_parts(*t)
    if abs(float(den_arg)) <= DEGENERATE_TOL:
        return math.nan
    return float(num) / math.sqrt(abs(float(den_arg)))


def wsl_margin_quantum(t_ji, t_kj, t_lk):
    """(N - D) / (A^2 tau^2) in the weak-signal limit."""
    num, den_arg = quantum_wsl_parts(t_ji, t_kj, t_lk)
    return num - np.sqrt(np.abs(den_arg))


def _axis_counts(grid) -> tuple[int, int, int]:
    counts = (grid,) * 3 if np.isscalar(grid) else tuple(grid)
    if len(counts) != 3 or min(counts) < 2:
        raise DomainError(f"grid needs three per-axis counts >= 2, got {grid!r}")
    return tuple(int(c) for c in counts)


def grid_axes(grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Half-open sample points k * 2pi / n, k = 0..n-1, per axis."""
    return tuple(np.arange(n) * TWO_PI / n for n in _axis_counts(grid))


def scan_grid(func, grid):
    """Evaluate ``func(t_ji, t_kj, t_lk)`` on a grid, slab by slab along the first axis.

    Yields ``(i, values)`` where ``values`` has shape (n_kj, n_lk).
    """
    a, b, c = grid_axes(grid)
    for i, x in enumerate(a):
        yield i, func(x, b[:, None], c[None, :])


def scan_violation_region(grid, threshold: float = 1.0) -> list[tuple[PhaseDelays, float]]:
    """Grid points where the quantum V limit exceeds ``threshold``, in lexicographic grid order."""
    a, b, c = grid_axes(grid)
    out = []
    for i, v in scan_grid(wsl_v_limit_quantum_array, grid):
        hits = np.argwhere(np.nan_to_num(v, nan=-np.inf) > threshold)
        for j, k in hits:
            out.append((PhaseDelays(float(a[i]), float(b[j]), float(c[k])), float(v[j, k])))
    return out


def grid_argmax(func, grid) -> tuple[tuple[int, int, int], float]:
    """Index and value of the grid maximum of ``func``; ties go to the smallest index."""
    best, arg = -np.inf, None
    for i, v in scan_grid(func, grid):
        v = np.nan_to_num(v, nan=-np.inf)
        flat = int(np.argmax(v))
        if v.flat[flat] > best:
            best = float(v.flat[flat])
            arg = (i,) + np.unravel_index(flat, v.shape)
    return tuple(int(x) for x in arg), best


def refine_max(func, x0, xatol: float = 1e-10, fatol: float = 1e-14) -> tuple[np.ndarray, float]:
    """Local Nelder-Mead polish of a maximum of a scalar function of three delays."""

    def neg(x):
        val = float(func(*x))
        return -val if math.isfinite(val) else np.inf

    res = minimize(neg, np.asarray(x0, dtype=float), method="Nelder-Mead",
                   options={"xatol": xatol, "fatol": fatol, "maxiter": 20000})
    x = np.mod(res.x, TWO_PI)
    return x, -float(res.fun)


def max_violation_margin(grid=128, refine: bool = True) -> tuple[PhaseDelays, float]:
    """Delays maximising (N - D) / (A^2 tau^2) in the weak-signal limit."""
    idx, best = grid_argmax(wsl_margin_quantum, grid)
    axes = grid_axes(grid)
    x0 = np.array([axes[n][idx[n]] for n in range(3)])
    if refine:
        x, val = refine_max(wsl_margin_quantum, x0)
        if val >= best:
            return PhaseDelays(*map(float, x)), val
    return PhaseDelays(*map(float, x0)), best


def delay_symmetry_orbit(d: PhaseDelays) -> list[PhaseDelays]:
    """Images of ``d`` under the symmetries of both V limits (shift all by pi, negate all), mod 2pi."""
    t = np.array(d.as_tuple())
    images = [t, t + math.pi, -t, -t + math.pi]
    return [PhaseDelays(*map(float, np.mod(x, TWO_PI))) for x in images]


def circular_distance(a: PhaseDelays, b: PhaseDelays) -> float:
    """Largest per-axis distance between two delay triples on the 2pi circle."""
    diff = np.mod(np.array(a.as_tuple()) - np.array(b.as_tuple()) + math.pi, TWO_PI) - math.pi
    return float(np.max(np.abs(diff)))
