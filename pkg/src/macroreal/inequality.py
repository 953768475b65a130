"""Assembly of N, D and V from correlation sets, scaling checks, verdicts and noise budgets.

N = |C_ij + C_jk + C_il - C_kl|
D = sqrt(|A + 2B|),  A = C_ii+jj+ + C_jj+kk+ + C_ii+ll+ + C_kk+ll+
                     B = C_ijj+k - C_ikll+ + C_ii+jl - C_jkk+l
V = N / D; any macrorealist model obeys lim_{tau -> 0} V <= 1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .classical_model import classical_exact_correlation
from .errors import DegenerateInputError, DomainError
from .estimation import CorrelationEstimate, estimate_from_outputs
from .quantum_exact import exact_correlation
from .schedule import PhaseDelays, eight_point
from .spin_algebra import ModelParams

PAIR_KEYS = (("i", "j"), ("j", "k"), ("i", "l"), ("k", "l"))
PAIR_SIGNS = (1, 1, 1, -1)
A_KEYS = (("i", "i+", "j", "j+"), ("j", "j+", "k", "k+"), ("i", "i+", "l", "l+"), ("k", "k+", "l", "l+"))
B_KEYS = (("i", "j", "j+", "k"), ("i", "k", "l", "l+"), ("i", "i+", "j", "l"), ("j", "k", "k+", "l"))
B_SIGNS = (1, -1, 1, -1)
REQUIRED_KEYS = PAIR_KEYS + A_KEYS + B_KEYS

# Default fit window in units of T_p and the operating point of the published estimate.
DEFAULT_SCALING_WINDOW = (0.018, 0.056)
DEFAULT_K_SIGMA = 5.0
DEFAULT_SLOPE_TOL = 0.1
SECONDS_PER_US = 1e-6


class Verdict(str, enum.Enum):
    VIOLATION = "violation"
    NO_VIOLATION = "no_violation"
    INCONCLUSIVE = "inconclusive"


@dataclass
class CorrelationSet:
    """Correlations keyed by label tuples, with standard errors and provenance."""

    values: dict[tuple[str, ...], float]
    errors: dict[tuple[str, ...], float] = field(default_factory=dict)
    source: str = "exact"
    replicates: dict[tuple[str, ...], np.ndarray] | None = None

    def __post_init__(self):
        self.values = {tuple(k): float(v) for k, v in self.values.items()}
        self.errors = {tuple(k): float(v) for k, v in self.errors.items()}

    @classmethod
    def from_estimates(cls, estimates: Iterable[CorrelationEstimate], source: str = "mc") -> "CorrelationSet":
        estimates = list(estimates)
        reps = {e.labels: e.replicates for e in estimates if e.replicates is not None}
        return cls(
            {e.labels: e.value for e in estimates},
            {e.labels: e.std_error for e in estimates},
            source,
            reps if len(reps) == len(estimates) else None,
        )

    def require(self, keys: Iterable[tuple[str, ...]]) -> None:
        missing = [k for k in keys if k not in self.values]
        if missing:
            raise DomainError(f"correlation set lacks {missing}")

    def error(self, key) -> float:
        return self.errors.get(key, 0.0)

    def has_bootstrap(self) -> bool:
        return self.replicates is not None and all(k in self.replicates for k in REQUIRED_KEYS)


@dataclass(frozen=True)
class DResult:
    value: float
    std_error: float
    a_term: float
    b_term: float
    reliable: bool
    negative_argument: bool


@dataclass
class TestStatistics:
    n: float
    d: float
    v: float
    a_term: float
    b_term: float
    dn: float
    dd: float
    dv: float
    slope_n: float | None = None
    slope_d: float | None = None
    scaling_window: tuple[float, float] | None = None
    verdict: Verdict | None = None
    d_reliable: bool = True
    warnings: list[str] = field(default_factory=list)

    __test__ = False  # not a pytest class

    def to_record(self) -> dict:
        """Flat record with the documented key names."""
        return {
            "n": self.n, "d": self.d, "v": self.v,
            "a_term": self.a_term, "b_term": self.b_term,
            "dn": self.dn, "dd": self.dd, "dv": self.dv,
            "slope_n": self.slope_n, "slope_d": self.slope_d,
            "verdict": None if self.verdict is None else self.verdict.value,
        }


# ---------------------------------------------------------------------------
# N, D, V


def _n_value(values: Mapping) -> float | np.ndarray:
    return abs(sum(s * values[k] for s, k in zip(PAIR_SIGNS, PAIR_KEYS)))


def _ab_values(values: Mapping):
    a = sum(values[k] for k in A_KEYS)
    b = sum(s * values[k] for s, k in zip(B_SIGNS, B_KEYS))
    return a, b


def compute_N(c: CorrelationSet) -> tuple[float, float]:
    """N and its error from the four pair errors added in quadrature."""
    c.require(PAIR_KEYS)
    err = math.sqrt(sum(c.error(k) ** 2 for k in PAIR_KEYS))
    return float(_n_value(c.values)), err


def compute_D(c: CorrelationSet) -> DResult:
    """D = sqrt|A + 2B| with first-order error delta(A + 2B) / (2 D).

    The propagated error is flagged unreliable when D < 10 * delta(A + 2B).
    """
    c.require(A_KEYS + B_KEYS)
    a, b = _ab_values(c.values)
    arg = a + 2 * b
    d = math.sqrt(abs(arg))
    d_arg = math.sqrt(sum(c.error(k) ** 2 for k in A_KEYS) + 4 * sum(c.error(k) ** 2 for k in B_KEYS))
    reliable = d > 0 and d >= 10 * d_arg
    err = d_arg / (2 * d) if d > 0 else math.inf
    return DResult(d, err, float(a), float(b), reliable, arg < 0)


def compute_V(c: CorrelationSet, use_bootstrap: bool = True) -> TestStatistics:
    """N, D, V and their errors (slopes and verdict left unset).

    With bootstrap replicates for every required correlation (one dataset), errors are
    taken from the joint replicate distribution, which keeps cross-covariances. When the
    D guard trips no finite dV is claimed (dv = inf), so no verdict can rest on it.
    """
    n, dn = compute_N(c)
    dres = compute_D(c)
    if dres.value == 0:
        raise DegenerateInputError("D = 0: V is undefined")
    v = n / dres.value
    dd = dres.std_error
    dv = math.sqrt((dn / dres.value) ** 2 + (n * dd / dres.value**2) ** 2)
    warnings = []
    if dres.negative_argument:
        warnings.append("A + 2B < 0; |A + 2B| used")
    if not dres.reliable:
        warnings.append("D is small against delta(A + 2B); linear error propagation unreliable")
    if use_bootstrap and c.has_bootstrap():
        reps = c.replicates
        n_rep = _n_value(reps)
        a_rep, b_rep = _ab_values(reps)
        d_rep = np.sqrt(np.abs(a_rep + 2 * b_rep))
        with np.errstate(divide="ignore", invalid="ignore"):
            v_rep = n_rep / d_rep
        dn, dd = float(np.std(n_rep, ddof=1)), float(np.std(d_rep, ddof=1))
        dv = float(np.std(v_rep, ddof=1)) if np.all(np.isfinite(v_rep)) else math.inf
    if not dres.reliable:
        # the distribution of N/D is too skewed for a standard error to mean anything
        dv = math.inf
    return TestStatistics(n, dres.value, v, dres.a_term, dres.b_term, dn, dd, dv,
                          d_reliable=dres.reliable, warnings=warnings)


# ---------------------------------------------------------------------------
# scaling fits and verdict


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    residual: float
    points_used: int


def fit_scaling(points: Sequence[tuple[float, float]]) -> ScalingFit:
    """Least-squares line through (log tau, log signal); non-positive signals are dropped."""
    pts = [(float(t), float(s)) for t, s in points]
    if any(t <= 0 for t, _ in pts):
        raise DomainError("all tau values must be positive")
    pts = [(t, s) for t, s in pts if s > 0 and math.isfinite(s)]
    if len(pts) < 3:
        raise DomainError(f"need >= 3 points with positive signal, have {len(pts)}")
    x = np.log([t for t, _ in pts])
    y = np.log([s for _, s in pts])
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.max(np.abs(y - (slope * x + intercept))))
    return ScalingFit(float(slope), float(intercept), residual, len(pts))


def verdict(stats: TestStatistics, slope_tol: float = DEFAULT_SLOPE_TOL, k_sigma: float = DEFAULT_K_SIGMA) -> Verdict:
    if stats.slope_n is None or stats.slope_d is None:
        return Verdict.INCONCLUSIVE
    scaling_ok = abs(stats.slope_n - 2) <= slope_tol and abs(stats.slope_d - 2) <= slope_tol
    if not scaling_ok or not math.isfinite(stats.dv):
        return Verdict.INCONCLUSIVE
    if stats.v - k_sigma * stats.dv > 1:
        return Verdict.VIOLATION
    if stats.v + k_sigma * stats.dv <= 1:
        return Verdict.NO_VIOLATION
    return Verdict.INCONCLUSIVE


@dataclass
class SweepResult:
    tau_over_tp: np.ndarray
    n: np.ndarray
    d: np.ndarray
    v: np.ndarray
    fit_n: ScalingFit | None
    fit_d: ScalingFit | None
    window: tuple[float, float]


def sweep(build: Callable[[ModelParams], CorrelationSet], p: ModelParams, tau_over_tp: Sequence[float],
          window: tuple[float, float] = DEFAULT_SCALING_WINDOW) -> SweepResult:
    """N, D, V along a tau sweep and log-log fits restricted to ``window`` (units of T_p)."""
    taus = np.asarray(tau_over_tp, dtype=float)
    n, d, v = [], [], []
    for x in taus:
        cs = build(p.with_tau(x * p.period))
        nv, _ = compute_N(cs)
        dv = compute_D(cs).value
        n.append(nv)
        d.append(dv)
        v.append(nv / dv if dv > 0 else math.nan)
    sel = (taus >= window[0] * (1 - 1e-12)) & (taus <= window[1] * (1 + 1e-12))
    fits = [None, None]
    if sel.sum() >= 3:
        fits = [fit_scaling(list(zip(taus[sel], np.asarray(y)[sel]))) for y in (n, d)]
    return SweepResult(taus, np.array(n), np.array(d), np.array(v), fits[0], fits[1], tuple(window))


def pipeline_statistics(build: Callable[[ModelParams], CorrelationSet], p: ModelParams,
                        tau_over_tp: Sequence[float], window=DEFAULT_SCALING_WINDOW,
                        slope_tol: float = DEFAULT_SLOPE_TOL, k_sigma: float = DEFAULT_K_SIGMA,
                        dv_override: float | None = None) -> TestStatistics:
    """Statistics at ``p.tau`` with slopes from a sweep over ``tau_over_tp`` and a verdict."""
    sw = sweep(build, p, tau_over_tp, window)
    stats = compute_V(build(p))
    if dv_override is not None:
        stats.dv = dv_override
    if sw.fit_n is not None:
        stats.slope_n, stats.slope_d = sw.fit_n.slope, sw.fit_d.slope
    stats.scaling_window = tuple(window)
    stats.verdict = verdict(stats, slope_tol, k_sigma)
    return stats


# ---------------------------------------------------------------------------
# correlation-set builders


def _closed_form_set(delays: PhaseDelays, pair: Callable[[float], float],
                     quad: Callable[[Sequence[float]], float], source: str) -> CorrelationSet:
    # twin windows coincide with their main window in the limit
    phase = {"i": 0.0, "j": delays.t_ji, "k": delays.t_ki, "l": delays.t_li}
    phase.update({k + "+": v for k, v in list(phase.items())})
    values = {k: pair(phase[k[1]] - phase[k[0]]) for k in PAIR_KEYS}
    values.update({k: quad([phase[x] for x in k]) for k in A_KEYS + B_KEYS})
    return CorrelationSet(values, source=source)


def wsl_set_quantum(delays: PhaseDelays, coupling_phase: float) -> CorrelationSet:
    """Leading-order quantum correlations, C_abcd = C_ab C_cd, for a_perp*tau = ``coupling_phase``."""
    s = coupling_phase**2

    def quad(ph):
        return s * math.cos(ph[1] - ph[0]) * s * math.cos(ph[3] - ph[2])

    return _closed_form_set(delays, lambda dt: s * math.cos(dt), quad, "closed_form")


def wsl_set_classical(delays: PhaseDelays, coupling_phase: float) -> CorrelationSet:
    """Leading-order classical correlations (prefactors 1/3 and 1/15)."""
    s = coupling_phase**2

    def quad(ph):
        c = [[math.cos(b - a) for b in ph] for a in ph]
        return s * s / 15 * (c[0][1] * c[2][3] + c[0][2] * c[1][3] + c[0][3] * c[1][2])

    return _closed_form_set(delays, lambda dt: s / 3 * math.cos(dt), quad, "closed_form")


def exact_set_quantum(delays: PhaseDelays, p: ModelParams) -> CorrelationSet:
    sched = eight_point(delays, p)
    return CorrelationSet({k: exact_correlation(sched, k, p) for k in REQUIRED_KEYS}, source="exact")


def exact_set_classical(delays: PhaseDelays, p: ModelParams, n_theta: int = 64, n_phi: int = 128) -> CorrelationSet:
    sched = eight_point(delays, p)
    return CorrelationSet(
        {k: classical_exact_correlation(sched, k, p, n_theta, n_phi) for k in REQUIRED_KEYS}, source="exact"
    )


# ---------------------------------------------------------------------------
# shot-noise budget


@dataclass(frozen=True)
class NoiseBudget:
    """Photon-counting resources; rates in 1/s, times in s.

    ``chi_ph`` may be omitted when ``eta`` and ``gamma`` are given (chi_ph = eta * gamma).
    """

    chi_ph: float | None = None
    T_total: float | None = None
    eta: float | None = None
    gamma: float | None = None
    R: float = 5.0

    def __post_init__(self):
        if self.chi_ph is None:
            if self.eta is None or self.gamma is None:
                raise DomainError("give chi_ph or both eta and gamma")
            object.__setattr__(self, "chi_ph", self.eta * self.gamma)
        for name in ("chi_ph", "T_total", "eta", "gamma", "R"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise DomainError(f"{name} must be positive, got {val}")

    def with_T(self, T_total: float) -> "NoiseBudget":
        return NoiseBudget(self.chi_ph, T_total, self.eta, self.gamma, self.R)


@dataclass(frozen=True)
class NoisePrediction:
    n_plus: float
    delta2: float
    shots: float
    dc2: float
    dc4: float
    dn: float
    dd: float
    dv: float
    dv_full: float
    dv_dominant: float
    significance: float

    def to_record(self) -> dict:
        return dict(self.__dict__)


def readout_noise(readout, shots: float, n: float, d: float) -> dict:
    """Independent-shot errors of C2, C4, N, D and V for a Poisson readout."""
    scale2 = readout.single_shot_variance / readout.contrast**2
    dc2 = scale2 / math.sqrt(shots)
    dc4 = scale2**2 / math.sqrt(shots)
    dn = 2 * dc2
    dd = math.sqrt(3) * dc4 / d
    dv = math.sqrt((dn / d) ** 2 + (n * dd / d**2) ** 2)
    return {"dc2": dc2, "dc4": dc4, "dn": dn, "dd": dd, "dv": dv}


def noise_sigma_v(budget: NoiseBudget, p: ModelParams, stats: TestStatistics) -> NoisePrediction:
    """Predicted error of V after ``budget.T_total`` seconds of sequential acquisition.

    ``dv`` propagates the exact per-order errors (1 + 2/(chi tau))^k (tau/T)^(1/2);
    ``dv_full`` is the chi*tau << 1 closed expression and ``dv_dominant`` its leading
    term with D ~ 2 (a_perp tau)^2 and V ~ 1.25 substituted.
    """
    from .trajectory_mc import ReadoutModel

    if budget.T_total is None:
        raise DomainError("noise budget needs T_total")
    tau_s = p.tau * SECONDS_PER_US
    x = budget.chi_ph * tau_s
    shots = budget.T_total / tau_s
    readout = ReadoutModel.from_rate(budget.chi_ph, tau_s)
    gen = readout_noise(readout, shots, stats.n, stats.d)
    root = math.sqrt(tau_s / budget.T_total)
    dv_full = root / x * math.sqrt(16 / stats.d**2 + 48 * (stats.v / (stats.d**2 * x)) ** 2)
    dv_dom = 2 * root / x**2 / p.coupling_phase**4
    return NoisePrediction(readout.n_plus, readout.single_shot_variance, shots, gen["dc2"], gen["dc4"],
                           gen["dn"], gen["dd"], gen["dv"], dv_full, dv_dom, (stats.v - 1) / gen["dv"])


def required_acquisition_time(p: ModelParams, chi_ph: float, R: float) -> float:
    """Seconds needed for a violation by R standard deviations: 64 R^2 tau / ((chi tau)^4 (A tau)^8)."""
    if chi_ph <= 0:
        raise DomainError("chi_ph must be positive")
    tau_s = p.tau * SECONDS_PER_US
    return 64 * R**2 * tau_s / ((chi_ph * tau_s) ** 4 * p.coupling_phase**8)


def required_acquisition_time_rates(p: ModelParams, eta: float, gamma: float, R: float) -> float:
    """Same bound written through eta, gamma: (64/gamma) eta^-4 (A/gamma)^3 R^2 / (A tau)^11."""
    if eta <= 0 or gamma <= 0:
        raise DomainError("eta and gamma must be positive")
    a_s = p.a_perp / SECONDS_PER_US
    return 64 / gamma / eta**4 * (a_s / gamma) ** 3 * R**2 / p.coupling_phase**11


# ---------------------------------------------------------------------------
# synthetic macrorealist models


@dataclass(frozen=True)
class PositiveModel:
    """Hidden states with prior weights and per-window response functions in [-1, 1].

    Outputs are independent +/-1 given the state, with P(+1 | s) = (1 + strength * g_m(s)) / 2.
    Twin windows x+ share the response of x, as they do in the weak-signal limit.
    """

    weights: np.ndarray
    responses: dict[str, np.ndarray]
    strength: float

    def response(self, label: str) -> np.ndarray:
        return self.responses[label.rstrip("+")]


def random_positive_model(rng: np.random.Generator, n_states: int = 6, strength: float = 0.6) -> PositiveModel:
    weights = rng.dirichlet(np.ones(n_states))
    responses = {lab: rng.uniform(-1, 1, n_states) for lab in ("i", "j", "k", "l")}
    return PositiveModel(weights, responses, strength)


def positive_model_set(model: PositiveModel) -> CorrelationSet:
    """Exact correlations of a positive model (no sampling)."""
    w = model.weights
    values = {}
    for key in REQUIRED_KEYS:
        prod = np.ones_like(w)
        for lab in key:
            g = model.strength * model.response(lab)
            prod = prod * (g - np.dot(w, g))
        values[key] = float(np.dot(w, prod))
    return CorrelationSet(values, source="exact")


def sample_positive_model(model: PositiveModel, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Raw +/-1 outputs (shots x 8 windows in eight-point order)."""
    from .schedule import EIGHT_LABELS

    states = rng.choice(len(model.weights), size=shots, p=model.weights)
    probs = np.stack([(1 + model.strength * model.response(lab)[states]) / 2 for lab in EIGHT_LABELS], axis=1)
    return np.where(rng.random(probs.shape) < probs, 1, -1).astype(np.int8)


def positive_model_mc_set(model: PositiveModel, shots: int, rng: np.random.Generator, resamples: int = 200,
                          bootstrap_seed: int = 0) -> CorrelationSet:
    from .schedule import EIGHT_LABELS

    outputs = sample_positive_model(model, shots, rng)
    col = {lab: n for n, lab in enumerate(EIGHT_LABELS)}
    est = estimate_from_outputs(outputs, [[col[x] for x in k] for k in REQUIRED_KEYS], labels=REQUIRED_KEYS,
                                resamples=resamples, seed=bootstrap_seed, keep_replicates=True)
    return CorrelationSet.from_estimates(est, source="mc")
