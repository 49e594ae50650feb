import math

import numpy as np
import pytest
from scipy import integrate, stats

from spotlab.beamsim import (
    OvenConfig,
    analytic_mean_axial_speed,
    default_oven,
    derive_seed,
    mean_axial_velocity,
    sample_atoms,
    temperature_for_velocity,
)
from spotlab.errors import DomainError


def _oven(catalog, temperature=400.0, composition=None, axis=(0.0, 0.0, 1.0)):
    return OvenConfig(
        origin=(0.0, 0.0, 0.0),
        axis=axis,
        temperature_k=temperature,
        composition=composition or {174: 1.0},
    )


def test_flux_mean_speed_against_quadrature(catalog):
    """Analytic (3 sqrt(pi)/4) sqrt(2kT/m) equals the v^3 exp moment."""
    const = catalog.constants
    m = 174 * const.amu
    T = 400.0
    num = integrate.quad(
        lambda v: v**4 * math.exp(-m * v**2 / (2 * const.k_b * T)), 0, 5000
    )[0]
    den = integrate.quad(
        lambda v: v**3 * math.exp(-m * v**2 / (2 * const.k_b * T)), 0, 5000
    )[0]
    analytic = analytic_mean_axial_speed(T, {174: 1.0}, const)
    assert analytic == pytest.approx(num / den, rel=1e-9)


def test_sampled_mean_speed_within_1pc(catalog):
    oven = _oven(catalog)
    atoms = sample_atoms(oven, 100_000, seed=2)
    expected = analytic_mean_axial_speed(400.0, {174: 1.0}, catalog.constants)
    assert atoms.speeds.mean() == pytest.approx(expected, rel=0.01)


def test_forward_flux(catalog):
    oven = _oven(catalog)
    atoms = sample_atoms(oven, 20_000, seed=3)
    v_ax = atoms.velocities @ np.asarray(oven.axis)
    assert np.all(v_ax > 0)


def test_single_isotope_composition(catalog):
    atoms = sample_atoms(_oven(catalog), 5_000, seed=4)
    assert np.all(atoms.isotopes == 174)


def test_composition_fractions(catalog):
    oven = _oven(catalog, composition=catalog.isotope_abundances())
    atoms = sample_atoms(oven, 200_000, seed=5)
    frac_174 = np.mean(atoms.isotopes == 174)
    assert frac_174 == pytest.approx(0.32026, abs=0.005)


def test_determinism_byte_identical(catalog):
    oven = _oven(catalog, composition=catalog.isotope_abundances())
    a = sample_atoms(oven, 10_000, seed=11)
    b = sample_atoms(oven, 10_000, seed=11)
    assert a.positions.tobytes() == b.positions.tobytes()
    assert a.velocities.tobytes() == b.velocities.tobytes()
    assert a.isotopes.tobytes() == b.isotopes.tobytes()
    c = sample_atoms(oven, 10_000, seed=12)
    assert a.velocities.tobytes() != c.velocities.tobytes()


def test_collimation_bound(catalog):
    oven = _oven(catalog)
    atoms = sample_atoms(oven, 50_000, seed=6)
    v_ax = atoms.velocities @ np.asarray(oven.axis)
    polar = np.arccos(np.clip(v_ax / atoms.speeds, -1, 1))
    assert polar.max() <= oven.max_polar_angle + 1e-12
    assert oven.max_polar_angle == pytest.approx(math.atan(2 * 0.00075 / 0.02))


def test_exit_positions_inside_bore(catalog):
    oven = _oven(catalog)
    atoms = sample_atoms(oven, 20_000, seed=7)
    r = np.linalg.norm(atoms.positions[:, :2], axis=1)
    assert r.max() <= oven.bore_radius + 1e-12


def test_speed_distribution_ks(catalog):
    """Kolmogorov-Smirnov against the flux-weighted MB CDF at n = 1e5."""
    const = catalog.constants
    oven = _oven(catalog)
    atoms = sample_atoms(oven, 100_000, seed=8)
    alpha = 174 * const.amu / (2 * const.k_b * 400.0)

    def cdf(v):
        x = alpha * np.asarray(v) ** 2
        return 1.0 - (1.0 + x) * np.exp(-x)

    result = stats.kstest(atoms.speeds, cdf)
    assert result.pvalue > 0.01


def test_mean_axial_velocity_temperature_scaling(catalog):
    mv1 = mean_axial_velocity(_oven(catalog, 300.0), 200_000, seed=9)
    mv2 = mean_axial_velocity(_oven(catalog, 1200.0), 200_000, seed=10)
    assert mv2.mean / mv1.mean == pytest.approx(2.0, abs=0.02)


def test_mass_ratio_between_isotopes(catalog):
    mv_168 = mean_axial_velocity(
        _oven(catalog, composition={168: 1.0}), 200_000, seed=11
    )
    mv_176 = mean_axial_velocity(
        _oven(catalog, composition={176: 1.0}), 200_000, seed=12
    )
    assert mv_168.mean / mv_176.mean == pytest.approx(
        math.sqrt(176.0 / 168.0), abs=0.01
    )


def test_temperature_for_velocity_round_trip(catalog):
    comp = catalog.isotope_abundances()
    temp = temperature_for_velocity(260.0, comp, catalog.constants)
    oven = _oven(catalog, temperature=temp, composition=comp)
    mv = mean_axial_velocity(oven, 1_000_000, seed=13)
    assert mv.mean == pytest.approx(260.0, abs=2.0)


def test_temperature_scaling_with_target(catalog):
    comp = {174: 1.0}
    t1 = temperature_for_velocity(200.0, comp, catalog.constants)
    t2 = temperature_for_velocity(400.0, comp, catalog.constants)
    assert t2 / t1 == pytest.approx(4.0, rel=0.01)


def test_default_oven_reproduces_260(catalog, oven90):
    expected = analytic_mean_axial_speed(
        oven90.temperature_k, oven90.composition, catalog.constants
    )
    assert expected == pytest.approx(260.0, abs=0.1)
    assert oven90.axis == pytest.approx((0.0, 0.0, 1.0))


def test_tilted_axis(catalog):
    oven = default_oven(catalog, angle_deg=70.0)
    assert oven.axis[0] == pytest.approx(math.cos(math.radians(70.0)))
    assert oven.axis[2] == pytest.approx(math.sin(math.radians(70.0)))


def test_domain_errors(catalog):
    with pytest.raises(DomainError):
        sample_atoms(_oven(catalog), 0, seed=1)
    with pytest.raises(DomainError):
        _oven(catalog, temperature=-1.0)
    with pytest.raises(DomainError):
        temperature_for_velocity(0.0, {174: 1.0}, catalog.constants)
    with pytest.raises(DomainError):
        OvenConfig((0, 0, 0), (0, 0, 2.0), 400.0, {174: 1.0})


def test_seed_splitting_rule():
    ss = derive_seed(42, 3)
    assert list(ss.entropy) == [42, 3]
