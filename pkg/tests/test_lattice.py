import numpy as np
import pytest
from scipy import stats
from scipy.spatial import cKDTree

from donorspec.constants import material_params
from donorspec.lattice import (CutoffTooLarge, cell_volume, generate_sites,
                               lattice_spec, sample_isotopes)

SQRT3 = np.sqrt(3.0)


def _assert_same_set(a, b, atol=1e-9):
    # set equality of two point clouds within a matching tolerance
    assert a.shape == b.shape
    dist, idx = cKDTree(a).query(b)
    assert dist.max() < atol
    assert len(np.unique(idx)) == len(a)


def test_site_counts_frozen():
    # frozen against the geometric density oracle below
    assert generate_sites("ZnO", 1.0).n_sites == 339
    assert generate_sites("ZnO", 3.0).n_sites == 9487
    assert generate_sites("Si", 1.0).n_sites == 190
    assert generate_sites("Si", 3.0).n_sites == 5706


def test_site_density_matches_cell_volume():
    # count / sphere volume -> atoms per nm^3 of the ideal crystal
    for crystal, atoms_per_cell in (("ZnO", 4), ("Si", 8)):
        env = generate_sites(crystal, 6.0)
        sphere = 4.0 / 3.0 * np.pi * 6.0**3
        ideal = atoms_per_cell / cell_volume(lattice_spec(crystal))
        np.testing.assert_allclose(env.n_sites / sphere, ideal, rtol=5e-3)


def test_count_grows_as_cutoff_cubed():
    n3 = generate_sites("ZnO", 3.0).n_sites
    n6 = generate_sites("ZnO", 6.0).n_sites
    np.testing.assert_allclose(n6 / n3, 8.0, rtol=0.02)


def test_distances_bounded_and_origin_excluded():
    env = generate_sites("ZnO", 3.0)
    assert np.all(env.distances <= 3.0)
    assert np.all(env.distances > 1e-9)
    np.testing.assert_allclose(np.linalg.norm(env.positions, axis=1),
                               env.distances, rtol=1e-12)


def test_nearest_neighbor_distances():
    spec = lattice_spec("ZnO")
    env = generate_sites("ZnO", 1.0)
    slices = env.element_slices()
    # wurtzite basal bond from a cation site
    basal = np.sqrt(spec.a**2 / 3.0 + (spec.c / 2.0 - spec.u * spec.c)**2)
    np.testing.assert_allclose(env.distances[slices["O"]].min(), basal,
                               rtol=1e-9)
    same = np.sqrt(spec.a**2 / 3.0 + spec.c**2 / 4.0)
    np.testing.assert_allclose(env.distances[slices["Zn"]].min(), same,
                               rtol=1e-9)

    si = lattice_spec("Si")
    env = generate_sites("Si", 1.0)
    np.testing.assert_allclose(env.distances.min(), si.a * SQRT3 / 4.0,
                               rtol=1e-9)


def test_no_sites_below_bond_length():
    env = generate_sites("ZnO", 2.0)
    assert env.distances.min() > 0.19
    env = generate_sites("Si", 2.0)
    assert env.distances.min() > 0.23


def test_wurtzite_threefold_symmetry():
    # rotation by 120 degrees about the c axis through the impurity site
    env = generate_sites("ZnO", 2.5)
    c, s = np.cos(2 * np.pi / 3), np.sin(2 * np.pi / 3)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    for elem, idx in env.element_slices().items():
        pos = env.positions[idx]
        _assert_same_set(pos, pos @ rot.T)


def test_diamond_symmetries():
    env = generate_sites("Si", 2.5)
    pos = env.positions
    # threefold about [111]
    axis = np.array([1.0, 1.0, 1.0]) / SQRT3
    angle = 2 * np.pi / 3
    k = np.array([[0, -axis[2], axis[1]],
                  [axis[2], 0, -axis[0]],
                  [-axis[1], axis[0], 0]])
    rot111 = np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)
    _assert_same_set(pos, pos @ rot111.T)
    # twofold about a cube axis
    rot_z = np.diag([-1.0, -1.0, 1.0])
    _assert_same_set(pos, pos @ rot_z.T)


def test_cutoff_too_large():
    with pytest.raises(CutoffTooLarge):
        generate_sites("ZnO", 200.0)
    with pytest.raises(CutoffTooLarge):
        generate_sites("Si", 300.0)


def test_sampling_deterministic():
    env = generate_sites("ZnO", 2.0)
    params = material_params("ZnO", "Al")
    a = sample_isotopes(env, params, seed=7)
    b = sample_isotopes(env, params, seed=7)
    assert np.array_equal(a.masses, b.masses)
    c = sample_isotopes(env, params, seed=8)
    assert not np.array_equal(a.masses, c.masses)


def test_sampled_masses_are_tabulated():
    env = generate_sites("ZnO", 2.0)
    params = material_params("ZnO", "Al")
    assignment = sample_isotopes(env, params, seed=3)
    for elem, idx in env.element_slices().items():
        allowed = {e.mass for e in params.isotope_table[elem]}
        assert set(np.unique(assignment.masses[idx])) <= allowed


def test_sampled_frequencies_match_abundances():
    # chi-squared goodness of fit at 99% for >= 1e4 sites per element
    env = generate_sites("ZnO", 6.0)
    params = material_params("ZnO", "Al")
    assignment = sample_isotopes(env, params, seed=1)
    for elem, idx in env.element_slices().items():
        entries = params.isotope_table[elem]
        n = len(idx)
        assert n >= 1e4
        observed = np.array([(assignment.masses[idx] == e.mass).sum()
                             for e in entries])
        expected = np.array([e.abundance * n for e in entries])
        chi2 = ((observed - expected)**2 / expected).sum()
        critical = stats.chi2.ppf(0.99, len(entries) - 1)
        assert chi2 < critical, f"{elem}: chi2 {chi2:.1f} >= {critical:.1f}"


def test_majority_isotope_fraction_within_3_sigma():
    env = generate_sites("ZnO", 6.0)
    params = material_params("ZnO", "Al")
    assignment = sample_isotopes(env, params, seed=1)
    idx = env.element_slices()["Zn"]
    n = len(idx)
    frac = (assignment.masses[idx] == 64).mean()
    sigma = np.sqrt(0.486 * (1 - 0.486) / n)
    assert abs(frac - 0.486) < 3 * sigma


def test_element_blocks_are_contiguous_and_ordered():
    # stable site order: element blocks, each sorted by distance
    env = generate_sites("ZnO", 2.0)
    slices = env.element_slices()
    assert list(slices) == ["Zn", "O"]
    for idx in slices.values():
        assert np.array_equal(idx, np.arange(idx[0], idx[-1] + 1))
        d = env.distances[idx]
        assert np.all(np.diff(d) >= 0)
