import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spotlab.beamsim import AtomSample
from spotlab.errors import DomainError
from spotlab.photonics import (
    LaserBeam,
    LaserState,
    doppler_detuning,
    four_beam_array,
    power_broadened_fwhm,
    saturation_parameter,
    scattering_rate,
)


def _atom(velocity):
    return AtomSample(
        isotope=174, position=np.zeros(3), velocity=np.asarray(velocity, float)
    )


def _beam(direction=(1.0, 0.0, 0.0)):
    return LaserBeam(
        index=1, origin=(0, 0, 0.004), direction=direction,
        waist_radius=5e-4, peak_intensity=45.0,
    )


class TestDopplerDetuning:
    def test_perpendicular_on_resonance(self, catalog):
        atom = _atom([0.0, 0.0, 260.0])  # moving along z, beam along x
        line = catalog.transition.f_ref_hz
        d = doppler_detuning(
            atom, _beam(), LaserState(0.0), line, catalog.transition, catalog.constants
        )
        assert d == 0.0

    def test_along_beam_at_260(self, catalog):
        # independent evaluation of the (f/c) v term
        atom = _atom([260.0, 0.0, 0.0])
        line = catalog.transition.f_ref_hz
        d = doppler_detuning(
            atom, _beam(), LaserState(0.0), line, catalog.transition, catalog.constants
        )
        expected = -751.52665e12 / 299792458.0 * 260.0
        assert d == pytest.approx(expected, rel=1e-12)
        assert d == pytest.approx(-651.77e6, abs=0.1e6)

    def test_reversed_beam_flips_sign(self, catalog):
        atom = _atom([120.0, 0.0, 230.0])
        line = catalog.transition.f_ref_hz + 5e6
        state = LaserState(12e6)
        fwd = doppler_detuning(
            atom, _beam((1, 0, 0)), state, line, catalog.transition, catalog.constants
        )
        rev = doppler_detuning(
            atom, _beam((-1, 0, 0)), state, line, catalog.transition, catalog.constants
        )
        static = catalog.transition.f_ref_hz + state.detuning_hz - line
        assert fwd - static == pytest.approx(-(rev - static), rel=1e-12)

    def test_linear_in_velocity(self, catalog):
        rng = np.random.default_rng(5)
        line = catalog.transition.f_ref_hz - 264e6
        state = LaserState(3e6)
        beam = _beam()
        for _ in range(25):
            v1, v2 = rng.normal(0, 200, 3), rng.normal(0, 200, 3)
            a, b = rng.normal(0, 2, 2)
            lhs = doppler_detuning(
                _atom(a * v1 + b * v2), beam, state, line,
                catalog.transition, catalog.constants,
            )
            static = catalog.transition.f_ref_hz + state.detuning_hz - line
            d1 = doppler_detuning(
                _atom(v1), beam, state, line, catalog.transition, catalog.constants
            ) - static
            d2 = doppler_detuning(
                _atom(v2), beam, state, line, catalog.transition, catalog.constants
            ) - static
            assert lhs - static == pytest.approx(a * d1 + b * d2, rel=1e-9, abs=1e-3)


class TestScatteringRate:
    def test_saturation_limit(self):
        gamma = 20e6
        assert scattering_rate(0.0, 1e9, gamma) == pytest.approx(
            math.pi * gamma / 2, rel=1e-6
        )

    def test_half_width_identity_exact(self):
        gamma = 20e6
        for s in [0.0, 0.075, 1.0, 7.5]:
            delta_half = (gamma / 2) * math.sqrt(1 + s)
            assert scattering_rate(delta_half, s, gamma) == pytest.approx(
                scattering_rate(0.0, s, gamma) / 2, rel=1e-12
            )

    def test_plug_in_s1(self):
        gamma = 20e6
        assert scattering_rate(0.0, 1.0, gamma) == pytest.approx(
            math.pi * gamma / 4, rel=1e-12
        )

    def test_negative_s_rejected(self):
        with pytest.raises(DomainError):
            scattering_rate(0.0, -0.1, 20e6)

    @given(
        st.floats(-1e9, 1e9),
        st.floats(0, 100, allow_subnormal=False),
    )
    def test_even_and_positive(self, delta, s):
        gamma = 20e6
        r = scattering_rate(delta, s, gamma)
        assert r == scattering_rate(-delta, s, gamma)
        if s > 0:
            assert 0 < r <= math.pi * gamma / 2

    @given(st.floats(1e3, 1e9))
    def test_monotone_in_s(self, delta):
        gamma = 20e6
        rates = [scattering_rate(delta, s, gamma) for s in (0.1, 1.0, 10.0, 100.0)]
        assert all(a < b for a, b in zip(rates, rates[1:]))
        assert rates[-1] < math.pi * gamma / 2

    def test_monotone_decreasing_in_detuning(self):
        gamma = 20e6
        deltas = np.array([0.0, 5e6, 10e6, 40e6, 200e6])
        rates = scattering_rate(deltas, 0.075, gamma)
        assert np.all(np.diff(rates) < 0)


class TestSaturation:
    def test_i_sat_gives_one(self, catalog):
        assert saturation_parameter(600.0, catalog.transition) == 1.0

    def test_zero(self, catalog):
        assert saturation_parameter(0.0, catalog.transition) == 0.0

    def test_beam_intensity(self, catalog):
        assert saturation_parameter(45.0, catalog.transition) == pytest.approx(0.075)

    def test_negative_rejected(self, catalog):
        with pytest.raises(DomainError):
            saturation_parameter(-1.0, catalog.transition)


class TestBroadening:
    def test_natural_width_at_zero(self, catalog):
        assert power_broadened_fwhm(0.0, catalog.transition) == 20e6

    def test_doubling(self, catalog):
        assert power_broadened_fwhm(3.0, catalog.transition) == pytest.approx(40e6)

    def test_beam_level(self, catalog):
        # formula value; the 3 MHz broadening quoted for this intensity in
        # the source writeup disagrees with sqrt(1+s) and is not reproduced
        assert power_broadened_fwhm(0.075, catalog.transition) == pytest.approx(
            20.74e6, rel=1e-3
        )


class TestBeamArray:
    def test_pairs_parallel_within_antiparallel_across(self, beams):
        d = {b.index: np.asarray(b.direction) for b in beams}
        assert np.array_equal(d[1], d[3])
        assert np.array_equal(d[2], d[4])
        assert np.array_equal(d[1], -d[2])

    def test_distances_and_waist(self, beams):
        assert [b.origin[2] for b in beams] == [0.004, 0.010, 0.016, 0.022]
        assert all(b.waist_radius == 5e-4 for b in beams)
        assert all(b.peak_intensity == 45.0 for b in beams)

    def test_unit_direction_enforced(self):
        with pytest.raises(DomainError):
            LaserBeam(1, (0, 0, 0), (1.0, 1.0, 0.0), 5e-4, 45.0)
