import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sedlab.nearfield import (NUCLEAR_MAGNETON, ParticleEM, field_at_offset, gfactor_table,
                              magnetic_moment, near_field, preset)
from sedlab.units import C_LIGHT, MU0, PROTON_MASS

finite = st.floats(-10, 10, allow_nan=False)
vec3 = st.tuples(finite, finite, finite).map(np.array)


def random_inputs(rng, n):
    rhat = rng.normal(size=(n, 3))
    rhat /= np.linalg.norm(rhat, axis=1)[:, None]
    r = rng.uniform(0.1, 10.0, n)
    v = rng.normal(size=(n, 3))
    a = rng.normal(size=(n, 3))
    return rhat, r, v, a


class TestMagneticMoment:
    def test_zero_spin(self):
        p = ParticleEM(-1, 1.0, 2.0, np.zeros(3))
        assert np.array_equal(magnetic_moment(p), np.zeros(3))

    def test_neutrino_inert(self):
        assert np.allclose(magnetic_moment(preset("neutrino")), 0.0)

    def test_proton_value(self):
        p = preset("proton")
        assert p.g == 5.585694713
        expected = 5.585694713 * 1.0 / (2 * PROTON_MASS) * 0.5
        assert magnetic_moment(p)[2] == pytest.approx(expected, rel=1e-15)

    def test_proton_moment_in_nuclear_magnetons(self):
        mu = magnetic_moment(preset("proton"))[2] / NUCLEAR_MAGNETON
        assert mu == pytest.approx(2.7928473565, rel=1e-9)

    def test_electron_antiparallel_to_spin(self):
        mu = magnetic_moment(preset("electron"))
        assert mu[2] == pytest.approx(-2.00231930436 / 2 * 0.5, rel=1e-12)

    def test_neutron_uses_nuclear_convention(self):
        p = preset("neutron")
        assert p.charge == 0
        # q = 0 would give zero; the override carries g_n mu_N S
        assert magnetic_moment(p)[2] == pytest.approx(-3.82608545 * NUCLEAR_MAGNETON * 0.5)

    def test_table_footnote_values(self):
        table = gfactor_table()
        assert table["neutron"]["g"] == -3.82608545
        assert table["proton"]["g"] == 5.585694713

    def test_invalid_mass(self):
        with pytest.raises(ValueError):
            ParticleEM(1, 0.0, 2.0, np.zeros(3))

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            preset("muon")


class TestNearField:
    def test_static_electron(self):
        p = ParticleEM(-1, 1.0, 2.0, np.zeros(3))
        f = near_field(p, np.array([1.0, 0, 0]), 1.0, np.zeros(3), np.zeros(3))
        assert np.allclose(f.e_charge, [-1, 0, 0], atol=1e-15)
        for term in (f.e_rad, f.b_dipole, f.b_lorentz, f.b_rad):
            assert np.array_equal(term, np.zeros(3))

    def test_neutron_pure_dipole(self):
        p = preset("neutron")
        n = np.array([0.6, 0.0, 0.8])
        v, a = np.array([0.1, 0.2, 0.0]), np.array([0.3, -0.4, 1.0])
        f1 = near_field(p, n, 1.5, v, a)
        f2 = near_field(p, n, 3.0, v, a)
        for term in (f1.e_charge, f1.e_rad, f1.b_lorentz, f1.b_rad):
            assert np.array_equal(term, np.zeros(3))
        assert np.linalg.norm(f1.b_dipole) > 0
        assert np.allclose(f2.b_dipole, f1.b_dipole / 8, rtol=1e-14)

    def test_dipole_formula(self):
        m = np.array([0.0, 0.0, 1.0])
        p = ParticleEM(0, 1.0, 0.0, np.zeros(3), m)
        on_axis = near_field(p, np.array([0, 0, 1.0]), 2.0, np.zeros(3), np.zeros(3))
        equator = near_field(p, np.array([1.0, 0, 0]), 2.0, np.zeros(3), np.zeros(3))
        k = MU0 / (4 * math.pi)
        assert np.allclose(on_axis.b_dipole, [0, 0, 2 * k / 8], rtol=1e-14)
        assert np.allclose(equator.b_dipole, [0, 0, -k / 8], rtol=1e-14)

    def test_lorentz_term(self):
        p = ParticleEM(1, 1.0, 0.0, np.zeros(3))
        f = near_field(p, np.array([1.0, 0, 0]), 2.0, np.array([0, 0.5, 0]), np.zeros(3))
        # mu0 q / 4 pi (v x n) / r^2 with mu0 / 4 pi = 1 / c^2
        assert np.allclose(f.b_lorentz, [0, 0, -0.5 / 4 / C_LIGHT**2], rtol=1e-14)

    def test_radiation_terms_transverse(self, rng):
        p = ParticleEM(2, 3.0, 1.0, np.array([0.1, 0.2, 0.3]))
        rhat, r, v, a = random_inputs(rng, 200)
        f = near_field(p, rhat, r, v, a)
        scale = 2 * np.linalg.norm(a, axis=1) / (C_LIGHT**2 * r)
        assert np.all(np.abs(np.sum(rhat * f.e_rad, 1)) <= 1e-12 * scale)
        assert np.all(np.abs(np.sum(rhat * f.b_rad, 1)) <= 1e-12 * scale / C_LIGHT)

    def test_totals_exact(self, rng):
        p = preset("proton")
        rhat, r, v, a = random_inputs(rng, 50)
        f = near_field(p, rhat, r, v, a)
        assert np.array_equal(f.total_e, f.e_charge + f.e_rad)
        assert np.array_equal(f.total_b, f.b_dipole + f.b_lorentz + f.b_rad)

    def test_linearity_in_acceleration_and_moment(self, rng):
        p = ParticleEM(-1, 1.0, 2.0, np.zeros(3))
        rhat, r, v, a = random_inputs(rng, 30)
        a2 = rng.normal(size=a.shape)
        fa = near_field(p, rhat, r, v, a)
        fb = near_field(p, rhat, r, v, a2)
        fab = near_field(p, rhat, r, v, 2.0 * a - 3.0 * a2)
        assert np.allclose(fab.e_rad, 2 * fa.e_rad - 3 * fb.e_rad, rtol=1e-12, atol=1e-300)
        assert np.allclose(fab.b_rad, 2 * fa.b_rad - 3 * fb.b_rad, rtol=1e-12, atol=1e-300)
        m1, m2 = rng.normal(size=3), rng.normal(size=3)
        g1 = near_field(p, rhat, r, v, a, moment=m1)
        g2 = near_field(p, rhat, r, v, a, moment=m2)
        g12 = near_field(p, rhat, r, v, a, moment=m1 + 0.5 * m2)
        assert np.allclose(g12.b_dipole, g1.b_dipole + 0.5 * g2.b_dipole, rtol=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(vec3, vec3, st.floats(0.01, 100))
    def test_b_rad_is_n_cross_e_rad_over_c(self, a, direction, r):
        if np.linalg.norm(direction) < 1e-3:
            direction = np.array([0.0, 0.0, 1.0])
        n = direction / np.linalg.norm(direction)
        f = near_field(ParticleEM(-1, 1.0, 2.0, np.zeros(3)), n, r, np.zeros(3), a)
        expected = np.cross(n, f.e_rad) / C_LIGHT
        # magnitude of the radiation term, so a nearly parallel to n is judged fairly
        scale = np.linalg.norm(a) / (C_LIGHT**3 * r) + 1e-300
        assert np.linalg.norm(f.b_rad - expected) <= 1e-12 * scale

    @pytest.mark.parametrize("r", [0.0, -1.0])
    def test_nonpositive_distance(self, r):
        with pytest.raises(ValueError):
            near_field(preset("electron"), np.array([1.0, 0, 0]), r, np.zeros(3), np.zeros(3))

    def test_fast_particle_warns(self):
        with pytest.warns(RuntimeWarning):
            near_field(preset("electron"), np.array([1.0, 0, 0]), 1.0,
                       np.array([0.2 * C_LIGHT, 0, 0]), np.zeros(3))

    def test_slow_particle_silent(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            near_field(preset("electron"), np.array([1.0, 0, 0]), 1.0,
                       np.array([0.05 * C_LIGHT, 0, 0]), np.zeros(3))

    def test_field_at_offset(self):
        p = preset("electron")
        f = field_at_offset(p, np.array([0.0, 2.0, 0.0]), np.zeros(3), np.zeros(3))
        assert np.allclose(f.e_charge, [0, -0.25, 0])
        with pytest.raises(ValueError):
            field_at_offset(p, np.zeros(3), np.zeros(3), np.zeros(3))
