"""Tests for optical-depth conversion, clipped-peak fitting, and donor
density extraction."""

import math

import numpy as np
import pytest

from donorspec import (
    DensityInputs,
    IncompleteCoverage,
    InsufficientWingData,
    NonPhysicalTransmission,
    Spectrum,
    TransmissionSetup,
    VoigtParams,
    donor_density,
    fit_od_peak,
    fit_voigt,
    material_params,
    optical_depth,
    transmission_from_od,
    voigt_value,
    whiting_combine,
    zpl_lifetime,
)
from donorspec.constants import GHZ_PER_MEV

SETUP = TransmissionSetup(thickness_cm=0.05, reflectance=0.24)


def test_optical_depth_known_value():
    # T = 0.15 behind two 24%-reflective faces: OD = ln(0.76^2 / 0.15)
    s = Spectrum(abscissa=np.array([0.0, 1.0]),
                 intensity=np.array([0.15, 0.15]))
    od = optical_depth(s, SETUP)
    expected = math.log(0.76**2 / 0.15)
    np.testing.assert_allclose(od.intensity, expected, rtol=1e-12)
    np.testing.assert_allclose(expected, 1.3482462934823607, rtol=1e-15)
    assert od.meta["kind"] == "optical_depth"
    assert od.meta["reflectance"] == 0.24


def test_od_transmission_round_trip():
    rng = np.random.default_rng(4)
    x = np.linspace(-5, 5, 101)
    t = 0.05 + 0.5 * rng.random(x.size)
    s = Spectrum(abscissa=x, intensity=t)
    od = optical_depth(s, SETUP)
    back = transmission_from_od(od, SETUP)
    np.testing.assert_allclose(back.intensity, t, rtol=1e-12)
    assert "saturated" not in back.meta
    # and the other direction: OD -> T -> OD
    od2 = optical_depth(back, SETUP)
    np.testing.assert_allclose(od2.intensity, od.intensity, rtol=1e-12)


def test_non_physical_transmission():
    x = np.array([0.0, 1.0, 2.0])
    for bad in ([0.5, 0.0, 0.5], [0.5, -0.1, 0.5], [0.5, 1.2, 0.5]):
        with pytest.raises(NonPhysicalTransmission):
            optical_depth(Spectrum(abscissa=x, intensity=np.array(bad)), SETUP)


def test_saturation_mask():
    x = np.linspace(-2, 2, 41)
    od_true = 14.0 * np.exp(-x**2)  # crosses the default ceiling of 11
    t = 0.76**2 * np.exp(-od_true)
    od = optical_depth(Spectrum(abscissa=x, intensity=t), SETUP)
    np.testing.assert_array_equal(od.meta["saturated"],
                                  od.intensity >= 11.0)
    assert od.meta["saturated"].any()
    assert not od.meta["saturated"].all()
    assert od.meta["saturation_od"] == 11.0


def _voigt_od(x, center, fwhm_g, fwhm_l, peak):
    """OD spectrum whose line-center value is exactly ``peak``."""
    unit = VoigtParams(center=center, fwhm_gaussian=fwhm_g,
                       fwhm_lorentzian=fwhm_l, amplitude=1.0, baseline=0.0)
    shape = voigt_value(unit, x)
    top = float(voigt_value(unit, np.array([center]))[0])
    return peak * shape / top


def test_fit_od_peak_recovers_clipped_peak():
    # a peak at OD 25 whose recorded trace clips at 11.5; the wing fit with
    # the known total width must recover the true height within 10%
    x = np.arange(-12.0, 12.0, 0.05)
    true_od = _voigt_od(x, center=0.3, fwhm_g=4.0, fwhm_l=0.0, peak=25.0)
    clipped = np.minimum(true_od, 11.5)
    od = Spectrum(abscissa=x, intensity=clipped,
                  meta={"saturation_od": 11.0})
    peak, result = fit_od_peak(od, fixed_total_fwhm=4.0)
    assert result.success
    np.testing.assert_allclose(peak, 25.0, rtol=0.10)
    np.testing.assert_allclose(result.parameters["center"], 0.3, atol=0.05)


def test_fit_od_peak_insufficient_wings():
    x = np.linspace(-0.5, 0.5, 30)
    od = Spectrum(abscissa=x, intensity=np.full(x.size, 12.0))
    with pytest.raises(InsufficientWingData):
        fit_od_peak(od, fixed_total_fwhm=4.0)
    with pytest.raises(ValueError):
        fit_od_peak(od, fixed_total_fwhm=-1.0)


def test_fit_od_peak_matches_plain_voigt_fit_when_unclipped():
    x = np.arange(-15.0, 15.0, 0.1)
    true_od = _voigt_od(x, center=-0.7, fwhm_g=3.0, fwhm_l=0.8, peak=3.0)
    od = Spectrum(abscissa=x, intensity=true_od)
    total = whiting_combine(0.8, 3.0)
    peak, res_a = fit_od_peak(od, fixed_total_fwhm=total, fwhm_lorentzian=0.8)
    res_b = fit_voigt(od, constraints={"fix_fwhm_gaussian": 3.0,
                                       "fix_fwhm_lorentzian": 0.8})
    np.testing.assert_allclose(res_a.parameters["center"],
                               res_b.parameters["center"], atol=1e-9)
    np.testing.assert_allclose(res_a.parameters["amplitude"],
                               res_b.parameters["amplitude"], rtol=1e-9)
    np.testing.assert_allclose(peak, 3.0, rtol=1e-6)


def _gaussian_alpha(x, area, fwhm):
    sigma = fwhm / math.sqrt(8 * math.log(2))
    return area * np.exp(-0.5 * (x / sigma)**2) / (sigma * math.sqrt(2 * math.pi))


def test_donor_density_round_trip():
    inputs = DensityInputs(tau_rad_ns=0.95, wavelength_nm=368.96,
                           refractive_index=2.4, degeneracy_ratio=1.0)
    wavelength_cm = inputs.wavelength_nm * 1e-7
    prefactor = 8 * math.pi * (inputs.refractive_index / wavelength_cm)**2 \
        * inputs.tau_rad_ns
    target = 7.4e13
    area = target / prefactor  # (1/cm) GHz of absorption coefficient
    x = np.linspace(-40.0, 40.0, 8001)
    od = Spectrum(abscissa=x,
                  intensity=_gaussian_alpha(x, area, 4.0) * SETUP.thickness_cm)
    n = donor_density(od, inputs, SETUP)
    np.testing.assert_allclose(n, target, rtol=1e-3)
    np.testing.assert_allclose(n, target, rtol=1e-6)  # grid is fine enough


def test_donor_density_unit_invariance():
    inputs = DensityInputs(tau_rad_ns=1.18, wavelength_nm=369.03)
    x = np.linspace(-30.0, 30.0, 4001)
    alpha = _gaussian_alpha(x, 2.5, 5.0)
    od_ghz = Spectrum(abscissa=x, intensity=alpha * SETUP.thickness_cm)
    od_mev = Spectrum(abscissa=x / GHZ_PER_MEV,
                      intensity=alpha * SETUP.thickness_cm,
                      meta={"units": "meV"})
    n_ghz = donor_density(od_ghz, inputs, SETUP)
    n_mev = donor_density(od_mev, inputs, SETUP)
    np.testing.assert_allclose(n_mev, n_ghz, rtol=1e-9)
    with pytest.raises(ValueError):
        donor_density(Spectrum(abscissa=x, intensity=alpha,
                               meta={"units": "K"}), inputs, SETUP)


def test_donor_density_linear_in_lifetime():
    x = np.linspace(-30.0, 30.0, 2001)
    od = Spectrum(abscissa=x,
                  intensity=_gaussian_alpha(x, 1.0, 4.0) * SETUP.thickness_cm)
    n1 = donor_density(od, DensityInputs(tau_rad_ns=0.95,
                                         wavelength_nm=369.0), SETUP)
    n2 = donor_density(od, DensityInputs(tau_rad_ns=1.90,
                                         wavelength_nm=369.0), SETUP)
    np.testing.assert_allclose(n2, 2.0 * n1, rtol=1e-12)


def test_donor_density_incomplete_coverage():
    # Lorentzian absorption truncated at +-3 FWHM leaves > 2% of the area
    # outside the scan, which must be refused rather than silently lost
    gamma = 1.0
    x = np.linspace(-6.0, 6.0, 1201)
    alpha = gamma / (math.pi * (x**2 + gamma**2))
    od = Spectrum(abscissa=x, intensity=alpha * SETUP.thickness_cm)
    with pytest.raises(IncompleteCoverage):
        donor_density(od, DensityInputs(tau_rad_ns=0.95,
                                        wavelength_nm=369.0), SETUP)


def test_zpl_lifetime():
    frac = material_params("ZnO", "Al").zpl_fraction
    np.testing.assert_allclose(zpl_lifetime(0.86, frac), 0.95, rtol=1e-12)
    frac_in = material_params("ZnO", "In").zpl_fraction
    np.testing.assert_allclose(zpl_lifetime(1.35, frac_in), 1.52, rtol=1e-12)
    assert material_params("Si", "P").zpl_fraction is None
    with pytest.raises(ValueError):
        zpl_lifetime(0.86, 0.0)
    with pytest.raises(ValueError):
        zpl_lifetime(0.86, 1.2)
    with pytest.raises(ValueError):
        zpl_lifetime(-0.5, 0.9)


def test_setup_and_inputs_validation():
    with pytest.raises(ValueError):
        TransmissionSetup(thickness_cm=0.05, reflectance=1.0)
    with pytest.raises(ValueError):
        TransmissionSetup(thickness_cm=-0.05)
    with pytest.raises(ValueError):
        DensityInputs(tau_rad_ns=0.95, wavelength_nm=-369.0)
    with pytest.raises(ValueError):
        DensityInputs(tau_rad_ns=0.0, wavelength_nm=369.0)
