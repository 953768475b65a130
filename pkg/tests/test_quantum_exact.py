import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import TWO_PI
from macroreal.errors import DomainError
from macroreal.quantum_exact import (
    circular_distance, delay_symmetry_orbit, exact_correlation, grid_axes, kraus_operators,
    max_violation_margin, quantum_wsl_parts, scan_violation_region, superop_K, superop_M, wsl_corr2,
    wsl_correlation, wsl_margin_quantum, wsl_v_limit_quantum, wsl_v_limit_quantum_array,
)
from macroreal.schedule import BLUE_PRESET, MAIN_LABELS, PhaseDelays, eight_point, four_point, sequential
from macroreal.spin_algebra import (
    IDENTITY, MAXIMALLY_MIXED, ModelParams, dagger, free_propagator, interaction_unitaries,
    is_density_matrix, random_density_matrix,
)

delay = st.floats(0.0, TWO_PI, allow_nan=False)


# --- Liouville-space oracle: 4x4 superoperators acting on column-stacked vec(rho)


def _lsup(a, b):
    """Matrix of X -> a X b on column-stacked vectors."""
    return np.kron(b.T, a)


def _liouville(p):
    up, um = interaction_unitaries(p)
    k = (_lsup(um, dagger(up)) - _lsup(up, dagger(um))) / 2j
    m = 0.5 * (_lsup(up, dagger(up)) + _lsup(um, dagger(um)))
    return k, m


def oracle_correlation(sched, labels, p):
    k, m = _liouville(p)
    vec = MAXIMALLY_MIXED.reshape(-1, order="F")
    chosen = set(sched.indices(labels))
    t = 0.0
    for n, w in enumerate(sched.windows):
        u = free_propagator(w.start - t, p)
        vec = _lsup(u, dagger(u)) @ vec
        vec = (k if n in chosen else m) @ vec
        t = w.end
    return float(np.trace(vec.reshape(2, 2, order="F")).real)


def test_kraus_decomposition(rng):
    p = ModelParams(tau=0.041, a_perp=1.7 * TWO_PI)
    mp, mm = kraus_operators(p)
    assert np.allclose(dagger(mp) @ mp + dagger(mm) @ mm, IDENTITY, atol=1e-14)
    for _ in range(10):
        rho = random_density_matrix(rng)
        kraus_k = mp @ rho @ dagger(mp) - mm @ rho @ dagger(mm)
        kraus_m = mp @ rho @ dagger(mp) + mm @ rho @ dagger(mm)
        assert np.allclose(kraus_k, superop_K(rho, p), atol=1e-14)
        assert np.allclose(kraus_m, superop_M(rho, p), atol=1e-14)


def test_superoperators_at_zero_tau(rng):
    p = ModelParams(tau=0.0)
    rho = random_density_matrix(rng)
    assert np.allclose(superop_K(rho, p), 0)
    assert np.allclose(superop_M(rho, p), rho)


@given(st.floats(0.0, 0.3), st.floats(0.0, 4.0))
def test_superop_properties(tau, coupling):
    p = ModelParams(tau=tau, a_perp=coupling * TWO_PI)
    rng = np.random.default_rng(int(tau * 1e6) + int(coupling * 1e3))
    assert abs(np.trace(superop_K(MAXIMALLY_MIXED, p))) < 1e-15
    assert np.allclose(superop_M(MAXIMALLY_MIXED, p), MAXIMALLY_MIXED, atol=1e-15)
    rho = random_density_matrix(rng)
    k = superop_K(rho, p)
    assert np.allclose(k, dagger(k), atol=1e-15)
    out = superop_M(rho, p)
    assert is_density_matrix(out)
    assert np.trace(out @ out).real <= np.trace(rho @ rho).real + 1e-14


def test_exact_matches_liouville_oracle(rng):
    p = ModelParams.from_ratio(0.05)
    sched = eight_point(BLUE_PRESET, p)
    labels = sched.labels
    for _ in range(12):
        order = int(rng.integers(1, 6))
        req = tuple(rng.choice(labels, size=order, replace=False))
        assert exact_correlation(sched, req, p) == pytest.approx(oracle_correlation(sched, req, p), abs=1e-15)


def test_first_order_vanishes(params):
    sched = eight_point(BLUE_PRESET, params)
    for lab in sched.labels:
        assert abs(exact_correlation(sched, (lab,), params)) < 1e-16


def test_unknown_label_and_tau_mismatch(params):
    sched = four_point(BLUE_PRESET, params)
    with pytest.raises(DomainError):
        exact_correlation(sched, ("i", "q"), params)
    with pytest.raises(DomainError):
        exact_correlation(sched, ("i", "i"), params)
    with pytest.raises(DomainError):
        exact_correlation(sched, ("i", "j"), params.with_tau(params.tau * 2))


def test_time_translation_invariance(params):
    sched = four_point(BLUE_PRESET, params)
    for req in (("i", "j"), ("i", "j", "k", "l")):
        assert exact_correlation(sched.shifted(0.37), req, params) == pytest.approx(
            exact_correlation(sched, req, params), abs=1e-15)


@pytest.mark.parametrize("t_delta", [0.3, 2 * math.pi / 3, 2.5, 4.0])
def test_pair_converges_to_wsl(t_delta):
    errs, taus = [], [1e-4, 3e-4, 1e-3, 3e-3]
    for x in taus:
        p = ModelParams.from_ratio(x)
        sched = four_point(PhaseDelays(t_delta, math.pi, math.pi), p)
        c = exact_correlation(sched, ("i", "j"), p)
        errs.append(abs(c / p.tau**2 - p.a_perp**2 * math.cos(t_delta)))
        assert c == pytest.approx(wsl_corr2(t_delta, p), rel=50 * x, abs=1e-14)
    # the residual shrinks at least linearly in tau (it is in fact quadratic)
    assert errs[0] <= errs[-1] * (taus[0] / taus[-1])


def test_four_point_quadruple_factorizes_exactly():
    for x in (1e-3, 1e-2, 0.05, 0.1):
        p = ModelParams.from_ratio(x)
        sched = four_point(BLUE_PRESET, p)
        c4 = exact_correlation(sched, MAIN_LABELS, p)
        c2 = exact_correlation(sched, ("i", "j"), p) * exact_correlation(sched, ("k", "l"), p)
        assert abs(c4 - c2) <= 1e-15 * max(1.0, abs(c2)) + 1e-18


def test_adjacent_sequential_pair():
    p = ModelParams.from_ratio(1e-3)
    c = exact_correlation(sequential(2, p), ("1", "2"), p)
    assert c == pytest.approx(p.coupling_phase**2 * math.cos(p.omega * p.tau), rel=1e-4)


def test_extra_measurements_do_not_change_wsl():
    p = ModelParams.from_ratio(2e-4)
    four = four_point(BLUE_PRESET, p)
    eight = eight_point(BLUE_PRESET, p)
    for req in (("i", "j"), ("k", "l"), ("i", "l")):
        assert exact_correlation(eight, req, p) == pytest.approx(exact_correlation(four, req, p), rel=1e-3)


def test_wsl_corr2_examples():
    p = ModelParams(a_perp=0.318 / 0.023, tau=0.023)
    assert wsl_corr2(0.0, p) == pytest.approx(0.318**2)
    assert abs(wsl_corr2(math.pi / 2, p)) < 1e-16
    assert wsl_corr2(2 * math.pi / 3, p) == pytest.approx(-0.0506, abs=5e-5)


def test_wsl_correlation_factorizes_over_pairs(params):
    t = [0.1, 0.4, 0.45, 0.9]
    assert wsl_correlation(t[:3], params) == 0.0
    expect = wsl_corr2(params.omega * 0.3, params) * wsl_corr2(params.omega * 0.45, params)
    assert wsl_correlation(t, params) == pytest.approx(expect)


def test_quantum_v_limit_examples():
    assert wsl_v_limit_quantum(BLUE_PRESET) == pytest.approx(1.25, abs=1e-12)
    assert wsl_v_limit_quantum((0.0, 0.0, 0.0)) == pytest.approx(1.0, abs=1e-15)
    assert wsl_v_limit_quantum((math.pi / 2,) * 3) == pytest.approx(0.0, abs=1e-15)
    assert math.isnan(wsl_v_limit_quantum((math.pi / 2, 3 * math.pi / 2, 3 * math.pi / 2)))


@given(delay, delay, delay)
def test_quantum_v_limit_properties(a, b, c):
    num, arg = quantum_wsl_parts(a, b, c)
    assert 0.0 - 1e-12 <= arg <= 8.0 + 1e-12
    v = wsl_v_limit_quantum((a, b, c))
    if arg > 1e-9:
        assert math.isfinite(v) and v >= 0
    for shift in ((TWO_PI, 0, 0), (0, TWO_PI, 0), (0, 0, -TWO_PI)):
        w = wsl_v_limit_quantum((a + shift[0], b + shift[1], c + shift[2]))
        if math.isfinite(v):
            assert w == pytest.approx(v, abs=1e-9 if arg < 1e-6 else 1e-12)


def test_scan_violation_region():
    hits = scan_violation_region(48)
    assert hits and all(v > 1.0 for _, v in hits)
    target = BLUE_PRESET.as_tuple()
    assert any(np.allclose(d.as_tuple(), target, atol=1e-12) for d, _ in hits)
    keys = [tuple(round(x / (TWO_PI / 48)) for x in d.as_tuple()) for d, _ in hits]
    assert keys == sorted(keys)
    assert not any(np.allclose(d.as_tuple(), target, atol=1e-12)
                   for d, _ in scan_violation_region(48, 1.25 + 1e-9))
    assert scan_violation_region(16, 10.0) == []


def test_scan_32_contains_nearest_cell():
    axes = grid_axes(32)
    near = tuple(float(ax[int(np.argmin(np.abs(ax - t)))]) for ax, t in zip(axes, BLUE_PRESET.as_tuple()))
    hits = {d.as_tuple() for d, _ in scan_violation_region(32)}
    assert near in hits


def test_margin_examples():
    assert wsl_margin_quantum(0.0, 0.0, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert wsl_margin_quantum(*BLUE_PRESET.as_tuple()) == pytest.approx(0.5, abs=1e-12)


def test_max_violation_margin_lands_on_blue_orbit():
    d, val = max_violation_margin(grid=128)
    assert val == pytest.approx(0.5, abs=1e-9)
    orbit = delay_symmetry_orbit(BLUE_PRESET)
    assert min(circular_distance(d, o) for o in orbit) <= TWO_PI / 128
    for o in orbit:
        assert wsl_margin_quantum(*o.as_tuple()) == pytest.approx(0.5, abs=1e-12)
        assert wsl_v_limit_quantum(o) == pytest.approx(1.25, abs=1e-6)


def test_vectorised_matches_scalar(rng):
    pts = rng.uniform(0, TWO_PI, size=(50, 3))
    arr = wsl_v_limit_quantum_array(pts[:, 0], pts[:, 1], pts[:, 2])
    for row, v in zip(pts, arr):
        assert v == pytest.approx(wsl_v_limit_quantum(tuple(row)), abs=1e-14)
