"""Classical angular-momentum version of the spin model.

The target is a unit classical vector precessing about z; each apparatus starts at
S = (1, 0, 0) and, since S_z stays 0, picks up the phase

    Phi(t) = a_perp * int_{t - tau}^{t} I_x(u) du
           = (2 a_perp / omega) sin(theta) sin(omega tau / 2) cos(omega t + phi - omega tau / 2)

and the recorded output is S_y(t) = sin Phi(t). The target ensemble is uniform on
the sphere, so every quantity is an average over (cos theta, phi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DegenerateInputError, DomainError
from .estimation import DEFAULT_BLOCKS, DEFAULT_RESAMPLES, CorrelationEstimate, MomentAccumulator
from .quantum_exact import DEGENERATE_TOL, TWO_PI
from .rng import STREAM_CLASSICAL, chunk_bounds, uniform_rows
from .schedule import MeasurementSchedule, PhaseDelays
from .spin_algebra import ModelParams

MC_CHUNK = 1 << 18


@dataclass(frozen=True)
class ClassicalSpinState:
    """Initial direction of the unit target angular momentum."""

    theta: float
    phi: float

    def __post_init__(self):
        if not (0.0 <= self.theta <= math.pi):
            raise DomainError(f"theta must lie in [0, pi], got {self.theta}")
        if not (0.0 <= self.phi < TWO_PI):
            raise DomainError(f"phi must lie in [0, 2pi), got {self.phi}")

    @property
    def vector(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array([st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)])


def spins_from_uniforms(u_cos: np.ndarray, u_phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map uniforms on [0, 1) to (theta, phi) distributed uniformly on the sphere."""
    cos_t = np.clip(1.0 - 2.0 * u_cos, -1.0, 1.0)
    return np.arccos(cos_t), TWO_PI * u_phi


def sample_uniform_spin(rng: np.random.Generator) -> ClassicalSpinState:
    theta, phi = spins_from_uniforms(rng.random(), rng.random())
    return ClassicalSpinState(float(theta), float(phi))


def target_vector(state: ClassicalSpinState, t: float, p: ModelParams) -> np.ndarray:
    """Free precession I(t) = R_z(omega t) I(0); unaffected by the apparatus."""
    x, y, z = state.vector
    c, s = math.cos(p.omega * t), math.sin(p.omega * t)
    return np.array([c * x - s * y, s * x + c * y, z])


def _phase(theta, phi, t, p: ModelParams):
    amp = 2 * p.a_perp / p.omega * math.sin(p.omega * p.tau / 2)
    return amp * np.sin(theta) * np.cos(p.omega * np.asarray(t) + phi - p.omega * p.tau / 2)


def phase_accumulated(state: ClassicalSpinState, t: float, p: ModelParams) -> float:
    """Apparatus phase Phi(t) for a contact over [t - tau, t]."""
    if t < p.tau:
        raise DomainError(f"contact must end at t >= tau, got t={t}")
    return float(_phase(state.theta, state.phi, t, p))


def classical_output(state: ClassicalSpinState, t: float, p: ModelParams) -> float:
    """Recorded apparatus output S_y(t) = sin Phi(t)."""
    return math.sin(phase_accumulated(state, t, p))


def contact_dynamics(state: ClassicalSpinState, t: float, p: ModelParams, rtol: float = 1e-12):
    """Integrate the coupled target/apparatus equations over one contact.

    Returns ``(I(t), S(t))`` with the apparatus starting at (1, 0, 0) at t - tau.
    Serves as an independent check of the closed-form phase.
    """

    def rhs(_, y):
        i_vec, s_vec = y[:3], y[3:]
        w_eff = np.array([p.a_perp * s_vec[2], 0.0, p.omega])
        return np.concatenate([np.cross(w_eff, i_vec), np.cross(np.array([0.0, 0.0, p.a_perp * i_vec[0]]), s_vec)])

    y0 = np.concatenate([target_vector(state, t - p.tau, p), [1.0, 0.0, 0.0]])
    sol = solve_ivp(rhs, (t - p.tau, t), y0, method="DOP853", rtol=rtol, atol=1e-14)
    return sol.y[:3, -1], sol.y[3:, -1]


# ---------------------------------------------------------------------------
# weak-signal-limit closed forms


def classical_wsl_corr2(t_delta: float, p: ModelParams) -> float:
    return p.coupling_phase**2 / 3 * math.cos(t_delta)


def _pairings4(c: np.ndarray) -> float:
    # c[a, b] = cos(omega (t_b - t_a)); sum over the three perfect matchings
    return c[0, 1] * c[2, 3] + c[0, 2] * c[1, 3] + c[0, 3] * c[1, 2]


def classical_wsl_corr4(d: PhaseDelays, p: ModelParams) -> float:
    t = np.array([0.0, d.t_ji, d.t_ki, d.t_li])
    return p.coupling_phase**4 / 15 * _pairings4(np.cos(t[None, :] - t[:, None]))


def classical_wsl_correlation(end_times: Sequence[float], p: ModelParams) -> float:
    """Leading-order classical correlation of outputs recorded at ``end_times`` (orders 1-4)."""
    t = np.asarray(end_times, dtype=float) * p.omega
    order = len(t)
    if order % 2:
        return 0.0
    c = np.cos(t[None, :] - t[:, None])
    if order == 2:
        return p.coupling_phase**2 / 3 * c[0, 1]
    if order == 4:
        return p.coupling_phase**4 / 15 * _pairings4(c)
    raise DomainError(f"closed form available for orders <= 4, got {order}")


def classical_v_parts(t_ji, t_kj, t_lk):
    """Numerator (with the sqrt(15)/6 prefactor) and 2 + a + b of the classical V limit."""
    t_ji, t_kj, t_lk = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (t_ji, t_kj, t_lk)))
    t_li = t_ji + t_kj + t_lk
    num = math.sqrt(15) / 6 * np.abs(np.cos(t_ji) + np.cos(t_kj) + np.cos(t_li) - np.cos(t_lk))
    a = np.cos(t_ji + t_kj) * np.cos(t_ji + t_lk) * np.cos(t_kj + t_lk)
    b = (np.sin(t_ji) - np.sin(t_lk)) * (np.sin(t_kj) - np.sin(t_li))
    return num, 2 + a + b


def classical_v_limit_array(t_ji, t_kj, t_lk) -> np.ndarray:
    """Vectorised classical V limit; NaN where |2 + a + b| vanishes."""
    num, arg = classical_v_parts(t_ji, t_kj, t_lk)
    den = np.abs(arg)
    ok = den > DEGENERATE_TOL
    return np.where(ok, num / np.sqrt(np.where(ok, den, 1.0)), np.nan)


def classical_v_limit(d: PhaseDelays | Sequence[float]) -> float:
    t = d.as_tuple() if isinstance(d, PhaseDelays) else tuple(d)
    num, arg = classical_v_parts(*t)
    if abs(float(arg)) <= DEGENERATE_TOL:
        raise DegenerateInputError(f"|2 + a + b| = {abs(float(arg)):.3g} vanishes at delays {t}")
    return float(num) / math.sqrt(abs(float(arg)))


def classical_margin(t_ji, t_kj, t_lk):
    """(N - D) / (A^2 tau^2) in the weak-signal limit of the classical model."""
    num, arg = classical_v_parts(t_ji, t_kj, t_lk)
    return num * 2 / math.sqrt(15) - 2 * np.sqrt(np.abs(arg)) / math.sqrt(15)


# ---------------------------------------------------------------------------
# finite-tau correlations


def _window_end_times(sched: MeasurementSchedule, p: ModelParams) -> np.ndarray:
    if abs(sched.tau - p.tau) > 1e-12 * max(1.0, p.tau):
        raise DomainError(f"schedule tau {sched.tau} does not match params tau {p.tau}")
    return np.array(sched.end_times)


def classical_outputs(theta: np.ndarray, phi: np.ndarray, end_times: np.ndarray, p: ModelParams) -> np.ndarray:
    """Outputs sin Phi for every (shot, window); shape (len(theta), len(end_times))."""
    return np.sin(_phase(np.asarray(theta)[:, None], np.asarray(phi)[:, None], end_times[None, :], p))


def classical_exact_correlation(sched: MeasurementSchedule, labels: Sequence[str], p: ModelParams,
                                n_theta: int = 64, n_phi: int = 128) -> float:
    """Ensemble average of the product of outputs by Gauss-Legendre x trapezoid quadrature.

    First moments vanish identically (phi -> phi + pi flips every Phi), so the
    mean-subtracted correlation equals this raw moment.
    """
    idx = sched.indices(labels)
    t = _window_end_times(sched, p)[list(idx)]
    x, w = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(x)
    phi = np.arange(n_phi) * TWO_PI / n_phi
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    prod = np.prod(classical_outputs(th.ravel(), ph.ravel(), t, p), axis=1).reshape(th.shape)
    return float(np.sum(w[:, None] * prod) / (2 * n_phi))


def classical_mc_correlations(sched: MeasurementSchedule, requests: Sequence[Sequence[str]], p: ModelParams,
                              shots: int, seed: int, resamples: int = DEFAULT_RESAMPLES,
                              n_blocks: int = DEFAULT_BLOCKS, bootstrap_seed: int = 0,
                              keep_replicates: bool = False) -> list[CorrelationEstimate]:
    """Monte Carlo correlations: one uniformly sampled target per shot, one fresh apparatus per window."""
    if shots < 2:
        raise DomainError("shots must be >= 2")
    if not requests:
        raise DomainError("empty request list")
    t = _window_end_times(sched, p)
    acc = MomentAccumulator(len(sched), [sched.indices(r) for r in requests], shots, n_blocks=n_blocks)
    for lo, hi in chunk_bounds(shots, MC_CHUNK):
        u = uniform_rows(seed, STREAM_CLASSICAL, lo, hi - lo, 2)
        theta, phi = spins_from_uniforms(u[:, 0], u[:, 1])
        acc.add(classical_outputs(theta, phi, t, p), lo)
    return acc.estimate(labels=[tuple(r) for r in requests], resamples=resamples, seed=bootstrap_seed,
                        keep_replicates=keep_replicates)
