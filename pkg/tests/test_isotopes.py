import numpy as np
import pytest

from donorspec.constants import GHZ_PER_MEV, material_params
from donorspec.isotopes import (broadening_distribution, export_distribution,
                                impurity_isotope_shift, population_fwhm,
                                site_shift_table, transition_shift)
from donorspec.lattice import (EnvironmentMismatch, IsotopeAssignment,
                               generate_sites, sample_isotopes)
from donorspec.states import (donor_envelope, exciton_electron_envelope,
                              exciton_hole_envelope, solve_donor,
                              solve_exciton)

SQRT_8LN2 = np.sqrt(8.0 * np.log(2.0))


def _envelopes(params):
    d0 = donor_envelope(solve_donor(params))
    x = solve_exciton(params)
    return d0, exciton_electron_envelope(x), exciton_hole_envelope(x)


def test_transition_shift_brute_force_oracle():
    """Plain-Python double loop re-derivation of one sampled shift."""
    params = material_params("ZnO", "Ga")
    env = generate_sites("ZnO", 1.5)
    assignment = sample_isotopes(env, params, seed=11)
    table = site_shift_table(params)
    d0, xe_env, xh_env = _envelopes(params)
    fast = transition_shift(assignment, d0, xe_env, xh_env, table)

    w_cond = {}
    w_val = {}
    for elem, entries in params.isotope_table.items():
        for e in entries:
            w_cond[(elem, e.mass)] = e.w_conduction
            w_val[(elem, e.mass)] = e.w_valence
    norms = {"de": {}, "xe": {}, "xh": {}}
    densities = {"de": d0.density, "xe": xe_env.density, "xh": xh_env.density}
    for name, dens in densities.items():
        for i in range(env.n_sites):
            elem = env.elements[i]
            norms[name][elem] = norms[name].get(elem, 0.0) \
                + float(dens(env.distances[i]))
    de = xe = xh = 0.0
    for i in range(env.n_sites):
        elem = env.elements[i]
        mass = assignment.masses[i]
        de += float(densities["de"](env.distances[i])) / norms["de"][elem] \
            * w_cond[(elem, mass)]
        xe += float(densities["xe"](env.distances[i])) / norms["xe"][elem] \
            * w_cond[(elem, mass)]
        xh += float(densities["xh"](env.distances[i])) / norms["xh"][elem] \
            * w_val[(elem, mass)]
    slow = (2.0 * xe + xh - de) * GHZ_PER_MEV
    np.testing.assert_allclose(fast, slow, rtol=1e-9)


def test_full_substitution_invariant():
    """All-heaviest assignments shift by exactly the tabulated maxima."""
    params = material_params("ZnO", "Al")
    env = generate_sites("ZnO", 2.5)
    table = site_shift_table(params)
    d0, xe_env, xh_env = _envelopes(params)
    heaviest = {elem: max(e.mass for e in entries)
                for elem, entries in params.isotope_table.items()}
    lightest = {elem: min(e.mass for e in entries)
                for elem, entries in params.isotope_table.items()}
    dedm = {"Zn": 0.41, "O": 3.12}

    # one element at a time, then both together
    for target in ("Zn", "O"):
        masses = np.array([heaviest[e] if e == target else lightest[e]
                           for e in env.elements])
        assignment = IsotopeAssignment(masses=masses, seed=0, env=env)
        shift = transition_shift(assignment, d0, xe_env, xh_env, table)
        expected = (heaviest[target] - lightest[target]) * dedm[target] \
            * GHZ_PER_MEV
        np.testing.assert_allclose(shift, expected, rtol=1e-9)

    masses = np.array([heaviest[e] for e in env.elements])
    assignment = IsotopeAssignment(masses=masses, seed=0, env=env)
    shift = transition_shift(assignment, d0, xe_env, xh_env, table)
    expected = sum((heaviest[e] - lightest[e]) * dedm[e]
                   for e in ("Zn", "O")) * GHZ_PER_MEV
    np.testing.assert_allclose(shift, expected, rtol=1e-9)


def test_all_lightest_gives_zero_shift():
    params = material_params("Si", "P")
    env = generate_sites("Si", 2.0)
    table = site_shift_table(params)
    d0, xe_env, xh_env = _envelopes(params)
    masses = np.full(env.n_sites, 28.0)
    assignment = IsotopeAssignment(masses=masses, seed=0, env=env)
    assert transition_shift(assignment, d0, xe_env, xh_env, table) == 0.0


def test_environment_mismatch():
    params = material_params("ZnO", "Al")
    env = generate_sites("ZnO", 1.5)
    table = site_shift_table(params)
    d0, xe_env, xh_env = _envelopes(params)
    bad = IsotopeAssignment(masses=np.full(3, 64.0), seed=0, env=env)
    with pytest.raises(EnvironmentMismatch):
        transition_shift(bad, d0, xe_env, xh_env, table)


def test_fwhm_is_gaussian_estimator():
    result = broadening_distribution("ZnO", "Al", n_samples=200, cutoff=4.0,
                                     seed=2)
    assert len(result.samples) == 200
    np.testing.assert_allclose(
        result.fwhm, SQRT_8LN2 * np.std(result.samples, ddof=1), rtol=1e-12)
    np.testing.assert_allclose(result.mean, result.samples.mean(), rtol=1e-12)
    np.testing.assert_allclose(result.samples,
                               result.d0x_shifts - result.d0_shifts,
                               rtol=1e-12)


def test_same_seed_bit_identical():
    a = broadening_distribution("ZnO", "Ga", n_samples=100, cutoff=4.0, seed=9)
    b = broadening_distribution("ZnO", "Ga", n_samples=100, cutoff=4.0, seed=9)
    assert np.array_equal(a.samples, b.samples)
    assert np.array_equal(a.d0_shifts, b.d0_shifts)
    assert a.fwhm == b.fwhm
    c = broadening_distribution("ZnO", "Ga", n_samples=100, cutoff=4.0,
                                seed=10)
    assert not np.array_equal(a.samples, c.samples)


def test_fwhm_ordering_follows_localization():
    # tighter donor envelopes fluctuate more: Al <= Ga <= In
    pops = [population_fwhm("ZnO", d, cutoff=6.0) for d in ("Al", "Ga", "In")]
    assert pops[0] <= pops[1] <= pops[2]
    mcs = [broadening_distribution("ZnO", d, n_samples=300, cutoff=6.0,
                                   seed=5).fwhm for d in ("Al", "Ga", "In")]
    assert mcs[0] <= mcs[1] <= mcs[2]


def test_population_fwhm_close_to_sampled():
    result = broadening_distribution("ZnO", "Al", n_samples=800, cutoff=5.0,
                                     seed=4)
    pop = population_fwhm("ZnO", "Al", cutoff=5.0)
    np.testing.assert_allclose(result.fwhm, pop, rtol=0.1)


def test_fwhm_stable_under_cutoff_growth():
    a = population_fwhm("ZnO", "Ga", cutoff=10.0)
    b = population_fwhm("ZnO", "Ga", cutoff=12.0)
    assert abs(b - a) / a < 0.05


def test_impurity_shift_magnitudes():
    ga = impurity_isotope_shift(material_params("ZnO", "Ga")) * 1e3  # MHz
    indium = impurity_isotope_shift(material_params("ZnO", "In")) * 1e3
    assert 14.0 <= abs(ga) <= 18.0
    assert 11.0 <= abs(indium) <= 15.0


def test_impurity_shift_zero_for_single_isotope_donors():
    assert impurity_isotope_shift(material_params("ZnO", "Al")) == 0.0
    assert impurity_isotope_shift(material_params("Si", "P")) == 0.0


def test_export_distribution(tmp_path):
    result = broadening_distribution("ZnO", "Al", n_samples=50, cutoff=3.0,
                                     seed=1)
    path = tmp_path / "shifts.csv"
    export_distribution(result, path)
    lines = [l for l in path.read_text().splitlines()
             if l and not l.startswith("#")]
    header, rows = lines[0], lines[1:]
    assert "dE_transition (GHz)" in header
    assert len(rows) == 50
    first = [float(v) for v in rows[0].split(",")]
    np.testing.assert_allclose(first[3], result.samples[0], rtol=1e-6)
