import math

import numpy as np
import pytest
from scipy.integrate import quad

from donorspec.constants import material_params
from donorspec.states import (NoMinimumInBracket, _exciton_energy,
                              donor_envelope, envelope_density,
                              exciton_electron_envelope,
                              exciton_hole_envelope, rovib_energy,
                              solve_donor, solve_exciton)

RYDBERG_MEV = 13605.693122994
KINETIC_MEV_NM2 = 38.099821  # hbar^2 / 2 m0

ALL_PAIRS = (("ZnO", "Al"), ("ZnO", "Ga"), ("ZnO", "In"), ("Si", "P"))


def test_donor_hand_oracle():
    """(ZnO, Al) worked end to end with independent arithmetic."""
    p = material_params("ZnO", "Al")
    e_h = p.electron_mass / p.dielectric**2 * RYDBERG_MEV
    n = math.sqrt(e_h / p.donor_binding)
    a = math.sqrt(KINETIC_MEV_NM2 / (p.electron_mass * p.donor_binding))
    state = solve_donor(p)
    np.testing.assert_allclose(state.hydrogenic_energy, e_h, rtol=1e-6)
    np.testing.assert_allclose(state.hydrogenic_energy, 54.633, atol=2e-3)
    np.testing.assert_allclose(state.n, n, rtol=1e-6)
    np.testing.assert_allclose(state.n, 1.030, atol=1e-3)
    np.testing.assert_allclose(state.a, a, rtol=1e-6)
    np.testing.assert_allclose(state.a, 1.655, atol=1e-3)
    np.testing.assert_allclose(state.mean_radius,
                               state.a / 2 * (2 * state.n + 1), rtol=1e-12)
    np.testing.assert_allclose(state.effective_bohr_radius,
                               2.0 * state.mean_radius / 3.0, rtol=1e-12)


def test_donor_positive_invariants():
    for material, donor in ALL_PAIRS:
        state = solve_donor(material_params(material, donor))
        assert state.a > 0
        assert state.n > 0


def test_donor_envelope_normalized():
    # independent quadrature against the analytic normalization constant
    for material, donor in ALL_PAIRS:
        state = solve_donor(material_params(material, donor))
        env = donor_envelope(state)
        total, _ = quad(lambda r: 4 * np.pi * r**2 * env.density(r),
                        0, 40 * state.a, limit=200)
        np.testing.assert_allclose(total, 1.0, atol=1e-9)


def test_exciton_electron_envelope_normalized():
    for material, donor in ALL_PAIRS:
        state = solve_exciton(material_params(material, donor))
        env = exciton_electron_envelope(state)
        total, _ = quad(lambda r: 4 * np.pi * r**2 * env.density(r),
                        0, 40 * state.a_e, limit=200)
        np.testing.assert_allclose(total, 1.0, atol=1e-9)


def test_exciton_hole_envelope_normalized():
    # composite-Simpson re-integration, independent of the solver's quad
    for material, donor in ALL_PAIRS:
        state = solve_exciton(material_params(material, donor))
        env = exciton_hole_envelope(state)
        r = np.linspace(0.0, 35.0 / state.epsilon, 200001)
        total = np.trapezoid(4 * np.pi * r**2 * env.density(r), r)
        np.testing.assert_allclose(total, 1.0, atol=1e-6)


def test_hole_density_vanishes_at_origin():
    state = solve_exciton(material_params("ZnO", "Ga"))
    env = exciton_hole_envelope(state)
    assert envelope_density(env, 0.0) == 0.0


def test_envelope_density_rejects_negative_radius():
    state = solve_donor(material_params("ZnO", "Al"))
    env = donor_envelope(state)
    with pytest.raises(ValueError):
        envelope_density(env, -0.1)


def test_published_radii():
    targets = {("ZnO", "Al"): (2.08, 2.8), ("ZnO", "Ga"): (1.98, 2.6),
               ("ZnO", "In"): (1.75, 2.3), ("Si", "P"): (1.95, 2.6)}
    for (material, donor), (a_e, b) in targets.items():
        state = solve_exciton(material_params(material, donor))
        np.testing.assert_allclose(state.a_e, a_e, atol=0.02)
        np.testing.assert_allclose(state.b, b, atol=0.05)


def test_electron_radius_shrinks_with_binding():
    radii = [solve_exciton(material_params("ZnO", d)).a_e
             for d in ("Al", "Ga", "In")]
    assert radii[0] > radii[1] > radii[2]


def test_solution_is_local_minimum():
    for material, donor in ALL_PAIRS:
        p = material_params(material, donor)
        d0 = solve_donor(p)
        state = solve_exciton(p)
        a_d = d0.effective_bohr_radius
        mu = p.exciton_hole_mass / p.exciton_electron_mass
        r_d = KINETIC_MEV_NM2 / (p.exciton_electron_mass * a_d**2)
        here = _exciton_energy(state.a_e, a_d, mu, r_d, 0, 0)
        step = 5e-3
        assert _exciton_energy(state.a_e + step, a_d, mu, r_d, 0, 0) > here
        assert _exciton_energy(state.a_e - step, a_d, mu, r_d, 0, 0) > here


def test_minimizer_stable_under_tolerance_halving():
    p = material_params("ZnO", "In")
    coarse = solve_exciton(p, xatol=1e-4)
    fine = solve_exciton(p, xatol=5e-5)
    assert abs(coarse.a_e - fine.a_e) < 1e-3


def test_excited_states_increase_with_hole_quantum_number():
    p = material_params("ZnO", "Ga")
    energies = [solve_exciton(p, n_h=n).total_energy for n in (0, 1, 2)]
    assert energies[0] < energies[1] < energies[2]


def test_rovib_ground_state_identity():
    # nu = J = 0 must reproduce the hole energy of the exciton solve
    for material, donor in ALL_PAIRS:
        p = material_params(material, donor)
        state = solve_exciton(p)
        ground = rovib_energy(state.depth, state.b, p.exciton_hole_mass, 0, 0)
        np.testing.assert_allclose(ground, state.hole_energy, rtol=1e-9)


def test_rovib_ladder_monotonic():
    p = material_params("ZnO", "Al")
    state = solve_exciton(p)
    m = p.exciton_hole_mass
    for j in (0, 1):
        levels = [rovib_energy(state.depth, state.b, m, nu, j)
                  for nu in range(4)]
        assert all(a < b for a, b in zip(levels, levels[1:]))
        assert all(level < 0 for level in levels)
    assert rovib_energy(state.depth, state.b, m, 0, 1) > \
        rovib_energy(state.depth, state.b, m, 0, 0)


def test_rovib_vanishing_depth():
    assert rovib_energy(0.0, 2.6, 0.59, 0, 0) == 0.0


def test_no_minimum_in_bracket():
    # a tiny binding energy pushes the optimum radius past the bracket edge
    p = material_params("ZnO", "Al", {"donor_binding": 0.5})
    with pytest.raises(NoMinimumInBracket):
        solve_exciton(p)
