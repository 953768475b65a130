import math

import pytest
from hypothesis import given, strategies as st

from macroreal.config import KEYS, RunConfig, parse_angle, parse_config, serialize_config, with_overrides
from macroreal.errors import ConfigError


@pytest.mark.parametrize("text, value", [
    ("2/3pi", 2 * math.pi / 3), ("pi", math.pi), ("pi/2", math.pi / 2), ("1.2pi", 1.2 * math.pi),
    ("-pi", -math.pi), ("5/3π", 5 * math.pi / 3), ("0.25", 0.25), ("2*pi", 2 * math.pi),
])
def test_parse_angle(text, value):
    assert parse_angle(text) == pytest.approx(value, abs=1e-15)


def test_parse_angle_rejects_garbage():
    with pytest.raises(ConfigError):
        parse_angle("two pi")


def test_parse_sections_and_defaults():
    cfg = parse_config("[model]\nmodel = classical\ntau_over_tp = 0.01\n[delays]\nt_ji = 1.2pi\n")
    assert cfg.model == "classical"
    assert cfg.t_ji == pytest.approx(1.2 * math.pi)
    assert cfg.t_kj == pytest.approx(math.pi)
    assert cfg.params.tau_over_tp == pytest.approx(0.01)


@pytest.mark.parametrize("text, needle", [
    ("[model]\nengine = magic\n", "engine"),
    ("[mc]\nshots = 1\n[model]\nengine = mc\n", "shots"),
    ("[bogus]\nx = 1\n", "bogus"),
    ("[model]\nshots = 5\n", "shots"),
    ("[sweep]\ntau_points = 2\n", "tau_points"),
    ("[sweep]\ntau_values = 0.1, -0.2\n", "tau_values"),
    ("[model]\ntau_over_tp = abc\n", "tau_over_tp"),
    ("no section line\n", "<config>"),
])
def test_config_errors_name_the_field(text, needle):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert needle in str(info.value)


finite = st.floats(0.001, 100.0, allow_nan=False)


@given(
    st.sampled_from(["quantum", "classical"]), st.sampled_from(["closed_form", "exact", "mc"]),
    finite, st.floats(0.0, 5.0), st.floats(1e-4, 0.5), st.floats(-10, 10), st.integers(2, 10**9),
    st.integers(0, 2**64 - 1), st.booleans(), st.none() | finite,
    st.none() | st.lists(st.floats(1e-4, 1.0), min_size=1, max_size=5).map(tuple),
)
def test_round_trip_is_identity(model, engine, omega, coupling, tau, t_ji, shots, seed, photon, chi, taus):
    cfg = RunConfig(model=model, engine=engine, omega=omega, coupling=coupling, tau_over_tp=tau, t_ji=t_ji,
                    shots=shots, seed=seed, photon=photon, chi_ph=chi, tau_values=taus)
    once = parse_config(serialize_config(cfg))
    assert once == cfg
    assert parse_config(serialize_config(once)) == once


def test_overrides():
    cfg = with_overrides(RunConfig(), {"t_lk": "pi/3", "shots": "12", "photon": "yes"})
    assert cfg.t_lk == pytest.approx(math.pi / 3) and cfg.shots == 12 and cfg.photon
    with pytest.raises(ConfigError):
        with_overrides(RunConfig(), {"nope": "1"})
    assert len(KEYS) == len(set(KEYS))


def test_readout_and_budget():
    cfg = RunConfig(photon=True, chi_ph=3e6)
    assert cfg.readout().n_plus == pytest.approx(0.069)
    assert RunConfig(photon=True, n_plus=4.0).readout().n_plus == 4.0
    assert RunConfig().readout() is None
    with pytest.raises(ConfigError):
        RunConfig(photon=True).readout()
    with pytest.raises(ConfigError):
        RunConfig().budget()
    assert RunConfig(eta=0.03, gamma=1e8).budget().chi_ph == pytest.approx(3e6)
