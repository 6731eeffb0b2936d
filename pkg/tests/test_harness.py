import filecmp
import math

import numpy as np
import pytest

from sedlab.config import parse_config
from sedlab.harness import (RunFailure, _map, derive_seed, nearfield_rows, plan_groups,
                            read_csv, read_ensemble, read_keyvalue, read_ledger,
                            read_numeric_csv, read_report, run_experiment, write_ensemble)
from sedlab.units import ALPHA
from sedlab.zeropoint import FieldSpec, efield_dipole, sample_modes


def cfg(experiment, tmp_path, **overrides):
    overrides.setdefault("out_dir", str(tmp_path / experiment))
    return parse_config(experiment, overrides={k: str(v) for k, v in overrides.items()})


def same_tree(a, b):
    cmp = filecmp.dircmp(a, b)
    if cmp.left_only or cmp.right_only:
        return False
    _, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
    return not mismatch and not errors


class TestSeeds:
    def test_stable_and_distinct(self):
        assert derive_seed(1, 0) == derive_seed(1, 0)
        seeds = {derive_seed(1, i) for i in range(1000)}
        assert len(seeds) == 1000
        assert derive_seed(1, 0) != derive_seed(2, 0)
        assert 0 <= derive_seed(2**64 - 1, 5) < 2**64

    def test_known_value(self):
        import hashlib
        h = hashlib.blake2b(digest_size=8)
        h.update((3).to_bytes(8, "little"))
        h.update((8).to_bytes(2, "little"))
        h.update((4).to_bytes(8, "little", signed=True))
        assert derive_seed(3, 4) == int.from_bytes(h.digest(), "little")

    def test_groups(self, tmp_path):
        c = cfg("oscillator", tmp_path, n_traj=5)
        groups = plan_groups(c)
        assert [g.members for g in groups] == [(0, 1), (2, 3), (4,)]
        # each component's strata are a permutation of the groups
        strata = np.array([g.strata for g in groups])
        for k in range(3):
            assert sorted(strata[:, k]) == [0, 1, 2]
        single = plan_groups(cfg("hydrogen", tmp_path, n_traj=3))
        assert [g.members for g in single] == [(0,), (1,), (2,)]
        assert single[1].seed == derive_seed(c.seed, 1)


class TestRuns:
    def test_t_end_zero_record(self, tmp_path):
        rec = run_experiment(cfg("hydrogen", tmp_path, n_traj=1, t_end=0))
        assert rec.status_counts == {"completed": 1, "ionized": 0, "diverged": 0}
        hist = read_numeric_csv(tmp_path / "hydrogen" / "histogram_r.csv")
        assert np.all(hist["density"] == 0)
        kv = read_keyvalue(tmp_path / "hydrogen" / "run_record.txt")
        assert kv["status.completed"] == "1"
        assert kv["trajectory_seeds"] == str(derive_seed(1, 0))
        assert "histogram_r.csv" in kv["outputs"]

    def test_outputs_and_round_trip(self, tmp_path):
        c = cfg("oscillator", tmp_path, n_traj=4, t_end=200, burn_in=20)
        rec = run_experiment(c)
        out = tmp_path / "oscillator"
        for name in ("config.txt", "run_record.txt", "ledger.csv", "trajectories.csv",
                     "histogram_x.csv", "histogram_y.csv", "histogram_z.csv", "report.csv"):
            assert (out / name).is_file()
        header, _ = read_csv(out / "histogram_x.csv")
        assert header == ["bin_lo", "bin_hi", "density", "reference_density"]
        assert read_csv(out / "ledger.csv")[0] == ["t", "work_in", "radiated", "mech"]
        ledger = read_ledger(out / "ledger.csv")
        from sedlab.diagnostics import EnergyLedger
        expected = EnergyLedger.total(tr.ledger for tr in rec.trajectories)
        for col in ("t", "work_in", "radiated", "mech"):
            assert np.array_equal(getattr(ledger, col), getattr(expected, col))
        report = read_report(out / "report.csv")
        for key, value in rec.report.items():
            if isinstance(value, float):
                assert float(report[key]) == value or (math.isnan(value)
                                                        and math.isnan(float(report[key])))
        echoed = read_keyvalue(out / "config.txt")
        assert echoed == {k: v for k, v in c.echo()}

    def test_ensemble_round_trip(self, tmp_path):
        ens = sample_modes(FieldSpec(0.3, 3.0, 20, 4), np.random.default_rng(1))
        write_ensemble(tmp_path / "modes.csv", ens)
        back = read_ensemble(tmp_path / "modes.csv", 4)
        for name in ("omega", "khat", "eps1", "eps2", "amps", "scale"):
            assert np.array_equal(getattr(back, name), getattr(ens, name))
        assert np.array_equal(efield_dipole(back, 2.0), efield_dipole(ens, 2.0))

    def test_same_seed_same_bytes(self, tmp_path):
        a = run_experiment(cfg("hydrogen", tmp_path, n_traj=2, t_end=100, burn_in=10,
                               n_freq=200, out_dir=tmp_path / "a"))
        b = run_experiment(cfg("hydrogen", tmp_path, n_traj=2, t_end=100, burn_in=10,
                               n_freq=200, out_dir=tmp_path / "b"))
        assert same_tree(a.out_dir, b.out_dir)
        c = run_experiment(cfg("hydrogen", tmp_path, n_traj=2, t_end=100, burn_in=10,
                               n_freq=200, seed=2, out_dir=tmp_path / "c"))
        assert not filecmp.cmp(a.out_dir / "ledger.csv", c.out_dir / "ledger.csv", shallow=False)

    def test_worker_count_invariance(self, tmp_path):
        dirs = []
        for w in (1, 3):
            rec = run_experiment(cfg("oscillator", tmp_path, n_traj=5, t_end=100, burn_in=10,
                                     n_freq=100, workers=w, out_dir=tmp_path / f"w{w}"))
            dirs.append(rec.out_dir)
        assert same_tree(*dirs)

    def test_inspiral_matches_larmor(self, tmp_path):
        rec = run_experiment(cfg("inspiral", tmp_path, t_end=200 * math.pi))
        assert rec.report["rel_error_vs_larmor"] < 0.01
        assert rec.report["rel_error_vs_analytic"] < 0.01
        assert rec.report["mech_monotone"]
        assert rec.report["energy_rate"] == pytest.approx(-2 / 3 * ALPHA**3, rel=0.01)

    def test_hydrogen_reports(self, tmp_path):
        rec = run_experiment(cfg("hydrogen", tmp_path, n_traj=2, t_end=300, burn_in=30,
                                 n_freq=300))
        for key in ("bound_fraction", "mean_bound_time", "kl_divergence", "peak_radius",
                    "l2_distance", "mean_p_in", "mean_p_rad"):
            assert key in rec.report

    def test_field_check_small(self, tmp_path):
        rec = run_experiment(cfg("field-check", tmp_path, n_samples=300, n_freq=100))
        r = rec.report
        assert abs(r["eps0_mean_e2"] - r["window_integral"]) < 4 * r["eps0_mean_e2_se"]
        assert read_report(tmp_path / "field-check" / "report.csv")["rel_error"] == repr(r["rel_error"])

    def test_nearfield(self, tmp_path):
        c = cfg("nearfield", tmp_path, particle="proton", point="0,0,2", velocity="0,0,0")
        rows = nearfield_rows(c)
        assert [row[0] for row in rows] == ["e_charge", "e_rad", "total_e", "b_dipole",
                                            "b_lorentz", "b_rad", "total_b"]
        assert rows[0][3] == pytest.approx(0.25)
        rec = run_experiment(c)
        header, body = read_csv(rec.out_dir / "nearfield.csv")
        assert header == ["term", "x", "y", "z"] and len(body) == 7
        assert float(body[0][3]) == rows[0][3]

    def test_nearfield_custom_particle(self, tmp_path):
        c = cfg("nearfield", tmp_path, particle="custom", z=2, mass=7294.3, g=0, point="1,0,0")
        assert nearfield_rows(c)[0][1] == pytest.approx(2.0)
        from sedlab.config import ConfigError
        with pytest.raises(ConfigError):
            nearfield_rows(cfg("nearfield", tmp_path, particle="custom"))


def _explode(job):
    if job == 2:
        raise RuntimeError("boom")
    return job


def test_worker_failure_discards_results():
    with pytest.raises(RunFailure):
        _map(_explode, range(4), workers=2)
    with pytest.raises(RuntimeError):
        _map(_explode, range(4), workers=1)
