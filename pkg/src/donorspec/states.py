"""Effective-mass envelope states of the neutral donor and the bound exciton.

The donor electron uses a central-cell-corrected hydrogenic envelope
r^(n-1) exp(-r/a).  The bound-exciton hole sits in a Kratzer potential
around the two 1s electrons; its ground state comes from minimizing the
total pair-plus-hole energy over the electron radius a_e.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar
from scipy.special import gamma as gamma_fn

from .constants import COULOMB_CONSTANT, HBAR2_OVER_2M0, RYDBERG_MEV, MaterialParams

# Kratzer-potential fit constants (fixed by the model, not per-material).
S_FIT = 1.0136
T_FIT = 1.337

# Electron-radius search bracket and tolerance for the variational minimum.
BRACKET_NM = (0.3, 6.0)
XATOL_NM = 1e-4


class NoMinimumInBracket(RuntimeError):
    """The exciton energy is monotone over the search bracket."""


@dataclass(frozen=True)
class DonorState:
    """Ground-state envelope parameters of the neutral-donor electron."""

    a: float             # nm, envelope decay length
    n: float             # dimensionless central-cell exponent
    hydrogenic_energy: float  # meV, E_H
    mean_radius: float   # nm
    effective_bohr_radius: float  # nm, a_D = 2<r>/3
    binding_energy: float  # meV


@dataclass(frozen=True)
class ExcitonState:
    """Variational bound-exciton state at fixed hole quantum numbers."""

    a_e: float           # nm, bound-electron radius
    b: float             # nm, Kratzer radius t*a_e
    depth: float         # meV, Kratzer depth parameter D
    lam: float           # dimensionless Lambda_{n_h l_h}
    epsilon: float       # 1/nm, hole envelope decay
    hole_energy: float   # meV (negative)
    total_energy: float  # meV, functional value at the minimum (no gap offset)
    n_h: int
    l_h: int
    s: float = S_FIT
    t: float = T_FIT


@dataclass(frozen=True)
class CarrierEnvelope:
    """Radial probability density of one carrier, normalized over all space."""

    kind: str  # "d0_electron", "d0x_electron" or "d0x_hole"
    density: Callable[[np.ndarray], np.ndarray]  # r (nm) -> nm^-3


def solve_donor(params: MaterialParams, donor: str = None) -> DonorState:
    """Solve the central-cell-corrected hydrogenic donor ground state.

    a = sqrt(hbar^2 / 2 m_e E_b) and n = sqrt(E_H / E_b), with
    E_H = (m_e / eps^2) Ry the hydrogenic binding energy; <r> is closed-form
    for the r^(n-1) e^(-r/a) envelope.
    """
    if donor is not None and donor != params.donor:
        raise ValueError(f"params are for {params.donor}, not {donor}")
    m_e, eps, e_b = params.electron_mass, params.dielectric, params.donor_binding
    a = math.sqrt(HBAR2_OVER_2M0 / (m_e * e_b))
    e_h = (m_e / eps**2) * RYDBERG_MEV
    n = math.sqrt(e_h / e_b)
    mean_radius = (a / 2.0) * (2.0 * n + 1.0)
    return DonorState(a=a, n=n, hydrogenic_energy=e_h,
                      mean_radius=mean_radius,
                      effective_bohr_radius=2.0 * mean_radius / 3.0,
                      binding_energy=e_b)


def _exciton_energy(a_e: float, a_d: float, mu: float, r_d: float,
                    n_h: int, l_h: int) -> float:
    """Bound-exciton energy functional (gap offset dropped)."""
    x = a_e / a_d
    coupling = S_FIT * T_FIT**2 * x * mu
    root = math.sqrt((l_h + 0.5)**2 + coupling)
    hole = (S_FIT**2 * T_FIT**2 / 2.0) * mu / (n_h + 0.5 + root)**2
    return 2.0 * r_d * (1.0 / x**2 - (11.0 / 8.0) / x - hole)


def solve_exciton(params: MaterialParams, n_h: int = 0, l_h: int = 0,
                  xatol: float = XATOL_NM) -> ExcitonState:
    """Minimize the bound-exciton energy over the electron radius.

    Bracketed scalar minimization on ``BRACKET_NM``; raises
    NoMinimumInBracket when the minimum sits on a bracket edge (energy
    monotone over the interval).

    Notes
    -----
    The reported Kratzer depth is the one implied by the minimized
    functional's hole term, D = s hbar^2/(2 m0 m_e a_D a_e); it reduces to
    the pure-Coulomb form s e^2/(8 pi eps a_e) when a_D equals the ideal
    hydrogenic Bohr radius.  This keeps (D, b, E_h, Lambda) mutually
    consistent, so the closed-form level formula reproduces E_h exactly.
    """
    if n_h < 0 or l_h < 0:
        raise ValueError("hole quantum numbers must be nonnegative")
    m_e, m_h = params.exciton_electron_mass, params.exciton_hole_mass
    a_d = solve_donor(params).effective_bohr_radius
    mu = m_h / m_e
    r_d = HBAR2_OVER_2M0 / (m_e * a_d**2)

    res = minimize_scalar(_exciton_energy, bounds=BRACKET_NM, method="bounded",
                          args=(a_d, mu, r_d, n_h, l_h),
                          options={"xatol": xatol})
    a_e = float(res.x)
    lo, hi = BRACKET_NM
    edge = max(2.0 * xatol, 1e-3)
    if a_e - lo < edge or hi - a_e < edge:
        raise NoMinimumInBracket(
            f"exciton energy monotone on [{lo}, {hi}] nm (minimizer at {a_e})"
        )

    b = T_FIT * a_e
    x = a_e / a_d
    coupling = S_FIT * T_FIT**2 * x * mu  # equals 2 m_h b^2 D / hbar^2
    depth = coupling * HBAR2_OVER_2M0 / (m_h * b**2)
    lam = -0.5 + n_h + math.sqrt((l_h + 0.5)**2 + coupling)
    hole_energy = -(coupling * depth) / (1.0 + lam)**2
    epsilon = math.sqrt(m_h * abs(hole_energy) / HBAR2_OVER_2M0)
    return ExcitonState(a_e=a_e, b=b, depth=depth, lam=lam, epsilon=epsilon,
                        hole_energy=hole_energy,
                        total_energy=float(res.fun), n_h=n_h, l_h=l_h)


def rovib_energy(depth: float, b: float, mass: float, nu: int, j: int) -> float:
    """Closed-form Kratzer level energy in meV.

    E(nu, J) = -kappa D^2 / [(nu + 1/2) + sqrt((J + 1/2)^2 + kappa D)]^2
    with kappa = 2 m b^2 / hbar^2 (1/meV for mass in m0 units, b in nm).
    """
    if nu < 0 or j < 0:
        raise ValueError("quantum numbers must be nonnegative")
    if depth < 0 or b <= 0 or mass <= 0:
        raise ValueError("depth must be >= 0 and b, mass positive")
    kappa = mass * b**2 / HBAR2_OVER_2M0
    kd = kappa * depth
    return -kd * depth / ((nu + 0.5) + math.sqrt((j + 0.5)**2 + kd))**2


def donor_envelope(state: DonorState) -> CarrierEnvelope:
    """|Psi|^2 of the donor electron, analytically normalized."""
    a, n = state.a, state.n
    norm2 = 2.0**(2.0 * n + 1.0) / (4.0 * math.pi * gamma_fn(2.0 * n + 1.0)
                                    * a**(2.0 * n + 1.0))

    def density(r):
        r = np.asarray(r, dtype=float)
        return norm2 * r**(2.0 * n - 2.0) * np.exp(-2.0 * r / a)

    return CarrierEnvelope(kind="d0_electron", density=density)


def exciton_electron_envelope(state: ExcitonState) -> CarrierEnvelope:
    """|Psi|^2 of one bound-exciton electron (pure 1s at radius a_e)."""
    a_e = state.a_e

    def density(r):
        r = np.asarray(r, dtype=float)
        return np.exp(-2.0 * r / a_e) / (math.pi * a_e**3)

    return CarrierEnvelope(kind="d0x_electron", density=density)


def exciton_hole_envelope(state: ExcitonState) -> CarrierEnvelope:
    """|Psi|^2 of the bound-exciton hole, normalized by quadrature.

    The radial form is r^Lambda exp(-eps r); Lambda is non-integer, so the
    normalization integral is evaluated numerically on [0, 30/eps].
    """
    lam, eps = state.lam, state.epsilon
    integral, _ = quad(lambda r: r**(2.0 * lam) * np.exp(-2.0 * eps * r)
                       * 4.0 * math.pi * r**2,
                       0.0, 30.0 / eps, epsabs=1e-13, epsrel=1e-12)
    norm2 = 1.0 / integral

    def density(r):
        r = np.asarray(r, dtype=float)
        return norm2 * r**(2.0 * lam) * np.exp(-2.0 * eps * r)

    return CarrierEnvelope(kind="d0x_hole", density=density)


def envelope_density(envelope: CarrierEnvelope, r) -> np.ndarray:
    """Evaluate |Psi(r)|^2 in nm^-3 at radius r >= 0 (nm)."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be nonnegative")
    return envelope.density(r)
