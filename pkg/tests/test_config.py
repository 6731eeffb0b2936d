import math

import numpy as np
import pytest

from sedlab.config import (EXPERIMENTS, KEYS, ConfigError, describe_keys, parse_config,
                           read_config_file)


def test_oscillator_defaults():
    cfg = parse_config("oscillator")
    assert cfg.potential.variant == "harmonic" and cfg.potential.omega == 1.0
    assert (cfg.field_spec.omega_min, cfg.field_spec.omega_max) == (0.3, 3.0)
    assert cfg.field_spec.n_freq == 600 and cfg.field_spec.n_dir == 16
    assert cfg.n_traj == 200
    assert cfg.burn_in == pytest.approx(100 * math.pi)
    assert cfg.t_end < cfg.field_spec.recurrence_time


def test_hydrogen_defaults():
    cfg = parse_config("hydrogen")
    assert cfg.potential.variant == "coulomb"
    assert cfg.n_traj == 50 and cfg.r_ionize == 25.0 and cfg.r0 == 1.0
    assert cfg.t_end == pytest.approx(2000 * math.pi)
    assert cfg.t_end < cfg.field_spec.recurrence_time
    assert cfg.dt_max() == pytest.approx(2 * math.pi / 3.0 / 200)


def test_inspiral_defaults_have_no_field():
    cfg = parse_config("inspiral")
    assert not cfg.field_on
    assert cfg.dt_max() == pytest.approx(2 * math.pi / 200)


@pytest.mark.parametrize("experiment", EXPERIMENTS)
def test_every_experiment_parses(experiment):
    cfg = parse_config(experiment)
    echoed = dict(cfg.echo())
    assert set(echoed) == set(KEYS) - {"workers", "out_dir"}


def test_window_order_names_both_keys():
    with pytest.raises(ConfigError) as exc:
        parse_config("oscillator", overrides=["omega_min=3", "omega_max=1"])
    assert exc.value.key == "omega_min/omega_max"
    assert "omega_min" in str(exc.value) and "omega_max" in str(exc.value)


def test_recurrence_guard():
    with pytest.raises(ConfigError) as exc:
        parse_config("oscillator", overrides=["t_end=2000"])
    assert exc.value.key == "t_end"
    cfg = parse_config("oscillator", overrides=["t_end=2000"], allow_recurrence="on")
    assert cfg.t_end == 2000


def test_recurrence_guard_ignores_fieldless_runs():
    parse_config("oscillator", overrides=["t_end=5000", "field=off"])


@pytest.mark.parametrize("pair, key", [
    ("bogus=1", "bogus"),
    ("n_traj=0", "n_traj"),
    ("n_traj=1.5", "n_traj"),
    ("jitter=1", "jitter"),
    ("radiation=maybe", "radiation"),
    ("potential=yukawa", "potential"),
    ("dt=1", "dt"),
    ("spin=1,2", "spin"),
    ("seed=-1", "seed"),
])
def test_rejections_name_the_key(pair, key):
    with pytest.raises(ConfigError) as exc:
        parse_config("hydrogen", overrides=[pair])
    assert exc.value.key == key


def test_stationary_init_needs_harmonic():
    with pytest.raises(ConfigError):
        parse_config("hydrogen", overrides=["init=stationary"])


def test_unknown_experiment():
    with pytest.raises(ConfigError):
        parse_config("helium")


def test_precedence(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nseed = 5\nn_traj = 3  # trailing\n\nstride=10\n")
    cfg = parse_config("hydrogen", path, ["n_traj=4"], seed=9)
    assert (cfg.seed, cfg.n_traj, cfg.stride) == (9, 4, 10)
    assert cfg.out_dir.name == "hydrogen-seed9"


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        read_config_file(tmp_path / "missing.cfg")
    bad = tmp_path / "bad.cfg"
    bad.write_text("seed 5\n")
    with pytest.raises(ConfigError):
        read_config_file(bad)


def test_malformed_override():
    with pytest.raises(ConfigError):
        parse_config("hydrogen", overrides=["seed"])


def test_echo_round_trips(tmp_path):
    cfg = parse_config("oscillator", overrides=["omega=2", "hist_bins=10"])
    path = tmp_path / "echo.cfg"
    path.write_text("".join(f"{k} = {v}\n" for k, v in cfg.echo()))
    again = parse_config("oscillator", path)
    assert again.echo() == cfg.echo()
    assert np.array_equal(again.hist_edges, cfg.hist_edges)


def test_with_seed_only_touches_field():
    cfg = parse_config("oscillator")
    other = cfg.with_seed(77)
    assert other.field_spec.seed == 77 and other.n_traj == cfg.n_traj


def test_help_lists_every_key():
    text = describe_keys()
    for key in KEYS:
        assert f"  {key} " in text
