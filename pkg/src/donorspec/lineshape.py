"""Voigt lineshapes and fitting, drift correction, thermal broadening, and the
Whiting total-width decomposition.

The Voigt profile is evaluated through the Faddeeva function
(scipy.special.voigt_profile); an independent quadrature oracle lives in the
test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import least_squares
from scipy.special import voigt_profile

from .constants import GHZ_PER_MEV, KELVIN_PER_MEV

SQRT_8LN2 = 2.0 * math.sqrt(2.0 * math.log(2.0))

# Beamsplitter-oscillation correction defaults (drift of the excitation
# power with laser energy): f(E) = c + A sin(2 pi v E + phi), E in meV.
OSC_C = 0.58
OSC_A = 0.07
OSC_V = 1.0 / 0.18  # 1/meV

MAX_FIT_EVALS = 200 * 10

_PARAM_NAMES = ("center", "fwhm_gaussian", "fwhm_lorentzian",
                "amplitude", "baseline")


class FitDiverged(RuntimeError):
    """Nonlinear fit hit its iteration cap without converging."""


class DegenerateData(ValueError):
    """Spectrum has too few points or no structure to fit."""


class CorrectionSingular(ValueError):
    """Oscillation correction factor crosses zero in the fitted range."""


class InsufficientData(ValueError):
    """Too few points for the requested number of fit parameters."""


class InconsistentWidths(ValueError):
    """Total width below the Lorentzian component width."""


@dataclass
class Spectrum:
    """Ordered samples of intensity versus frequency or energy.

    ``meta`` carries at least {"units": "GHz"|"meV"}; loaders add labels and
    temperature.  The abscissa must be strictly increasing.
    """

    abscissa: np.ndarray
    intensity: np.ndarray
    sigma: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.abscissa = np.asarray(self.abscissa, dtype=float)
        self.intensity = np.asarray(self.intensity, dtype=float)
        if self.abscissa.shape != self.intensity.shape:
            raise ValueError("abscissa and intensity lengths differ")
        if self.abscissa.ndim != 1:
            raise ValueError("spectrum arrays must be 1-D")
        if len(self.abscissa) > 1 and not np.all(np.diff(self.abscissa) > 0):
            raise ValueError("abscissa must be strictly increasing")
        if self.sigma is not None:
            self.sigma = np.asarray(self.sigma, dtype=float)
            if self.sigma.shape != self.abscissa.shape:
                raise ValueError("sigma length differs")
            if np.any(self.sigma <= 0):
                raise ValueError("sigmas must be positive")

    def __len__(self):
        return len(self.abscissa)

    @property
    def units(self) -> str:
        return self.meta.get("units", "GHz")


@dataclass(frozen=True)
class VoigtParams:
    center: float           # GHz (or spectrum units)
    fwhm_gaussian: float    # GHz
    fwhm_lorentzian: float  # GHz
    amplitude: float        # area of the profile component
    baseline: float = 0.0

    def __post_init__(self):
        if self.fwhm_gaussian < 0 or self.fwhm_lorentzian < 0:
            raise ValueError("component widths must be nonnegative")
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")


@dataclass(frozen=True)
class ThermalModel:
    """Linewidth floor plus single-phonon-activation broadening."""

    dnu0: float   # GHz
    a: float      # GHz
    dE: float     # meV

    def __post_init__(self):
        if self.a < 0:
            raise ValueError("a must be nonnegative")
        if self.dE <= 0:
            raise ValueError("dE must be positive")


@dataclass
class FitResult:
    """Parameters, 1-sigma uncertainties, and goodness-of-fit of one fit."""

    parameters: dict
    sigmas: dict
    covariance: np.ndarray      # over free parameters only
    free_names: tuple
    residual_norm: float
    n_evaluations: int
    success: bool
    total_fwhm: Optional[float] = None
    total_fwhm_sigma: Optional[float] = None

    def to_dict(self) -> dict:
        out = {
            "parameters": {k: float(v) for k, v in self.parameters.items()},
            "sigmas": {k: float(v) for k, v in self.sigmas.items()},
            "free_parameters": list(self.free_names),
            "covariance": np.asarray(self.covariance).tolist(),
            "residual_norm": float(self.residual_norm),
            "n_evaluations": int(self.n_evaluations),
            "success": bool(self.success),
        }
        if self.total_fwhm is not None:
            out["total_fwhm"] = float(self.total_fwhm)
            out["total_fwhm_sigma"] = float(self.total_fwhm_sigma)
        return out


def voigt_value(p: VoigtParams, x) -> np.ndarray:
    """Voigt profile value: baseline + amplitude x unit-area convolution."""
    x = np.asarray(x, dtype=float)
    sigma = p.fwhm_gaussian / SQRT_8LN2
    gamma = p.fwhm_lorentzian / 2.0
    return p.baseline + p.amplitude * voigt_profile(x - p.center, sigma, gamma)


def whiting_combine(fwhm_lorentzian: float, fwhm_gaussian: float) -> float:
    """Total Voigt FWHM from its components (closed-form approximation)."""
    if fwhm_lorentzian < 0 or fwhm_gaussian < 0:
        raise ValueError("widths must be nonnegative")
    return fwhm_lorentzian / 2.0 + math.sqrt(fwhm_lorentzian**2 / 4.0
                                             + fwhm_gaussian**2)


def whiting_invert(total: float, fwhm_lorentzian: float) -> float:
    """Gaussian component width given the total and Lorentzian widths."""
    if total < 0 or fwhm_lorentzian < 0:
        raise ValueError("widths must be nonnegative")
    if total < fwhm_lorentzian:
        raise InconsistentWidths(
            f"total {total} below Lorentzian component {fwhm_lorentzian}"
        )
    return math.sqrt(total * (total - fwhm_lorentzian))


def _initial_guess(s: Spectrum) -> VoigtParams:
    """Moment-based starting point: centroid, RMS width, peak height."""
    x, y = s.abscissa, s.intensity
    baseline = float(np.min(y))
    yy = y - baseline
    total = np.trapezoid(yy, x)
    if total <= 0:
        total = float(np.max(yy)) * (x[-1] - x[0]) / 4.0 + 1e-30
    center = np.trapezoid(x * yy, x) / total
    var = max(np.trapezoid((x - center)**2 * yy, x) / total, 1e-12)
    fwhm = SQRT_8LN2 * math.sqrt(var)
    return VoigtParams(center=float(center), fwhm_gaussian=0.7 * fwhm,
                       fwhm_lorentzian=0.3 * fwhm, amplitude=float(total),
                       baseline=baseline)


def _propagated_total_fwhm(params, sigmas, cov, free_names):
    """Total FWHM and its 1-sigma through the combine formula's Jacobian."""
    g = params["fwhm_gaussian"]
    lo = params["fwhm_lorentzian"]
    total = whiting_combine(lo, g)
    root = math.sqrt(lo**2 / 4.0 + g**2)
    dt_dl = 0.5 + lo / (4.0 * root) if root > 0 else 0.5
    dt_dg = g / root if root > 0 else 1.0
    grad = {"fwhm_lorentzian": dt_dl, "fwhm_gaussian": dt_dg}
    var = 0.0
    for i, ni in enumerate(free_names):
        for j, nj in enumerate(free_names):
            if ni in grad and nj in grad:
                var += grad[ni] * grad[nj] * cov[i, j]
    return total, math.sqrt(max(var, 0.0))


def fit_voigt(s: Spectrum, init: Optional[VoigtParams] = None,
              constraints: Optional[dict] = None) -> FitResult:
    """Weighted least-squares Voigt fit.

    ``constraints`` pins parameters by name: {"fix_fwhm_gaussian": 5.0}
    fixes that width and removes it from the fit.  Points are weighted by
    1/sigma when the spectrum carries uncertainties, uniformly otherwise.

    Raises
    ------
    DegenerateData
        Fewer than 5 points or a structureless (flat) spectrum.
    FitDiverged
        The optimizer hit its evaluation cap without converging.
    """
    if len(s) < 5:
        raise DegenerateData(f"need >= 5 points, got {len(s)}")
    if np.ptp(s.intensity) == 0:
        raise DegenerateData("intensity is constant; nothing to fit")

    fixed = {}
    if constraints:
        for key, value in constraints.items():
            if not key.startswith("fix_") or key[4:] not in _PARAM_NAMES:
                raise ValueError(f"unknown constraint {key!r}")
            fixed[key[4:]] = float(value)

    if init is None:
        init = _initial_guess(s)
    start = {name: getattr(init, name) for name in _PARAM_NAMES}
    start.update(fixed)
    free = [n for n in _PARAM_NAMES if n not in fixed]
    if not free:
        raise ValueError("all parameters fixed; nothing to fit")
    if len(s) <= len(free):
        raise DegenerateData("fewer points than free parameters")

    lower = {"center": -np.inf, "fwhm_gaussian": 0.0, "fwhm_lorentzian": 0.0,
             "amplitude": 0.0, "baseline": -np.inf}
    weights = 1.0 / s.sigma if s.sigma is not None else np.ones(len(s))

    def residuals(theta):
        p = dict(zip(free, theta))
        full = {**start, **p}
        model = voigt_value(VoigtParams(**full), s.abscissa)
        return (model - s.intensity) * weights

    x0 = np.array([max(start[n], lower[n] + 1e-12) if np.isfinite(lower[n])
                   else start[n] for n in free])
    res = least_squares(residuals, x0,
                        bounds=([lower[n] for n in free],
                                [np.inf] * len(free)),
                        xtol=1e-12, ftol=1e-12, gtol=1e-12,
                        max_nfev=MAX_FIT_EVALS)
    if not res.success:
        raise FitDiverged(f"fit did not converge: {res.message}")

    params = {**start, **dict(zip(free, res.x))}
    m, n = len(s), len(free)
    jtj = res.jac.T @ res.jac
    try:
        cov = np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(jtj)
    if s.sigma is None:
        # scale by residual variance when no per-point sigmas were given
        scale = 2.0 * res.cost / (m - n) if m > n else 0.0
        cov = cov * scale
    sigmas = {name: 0.0 for name in _PARAM_NAMES}
    for i, name in enumerate(free):
        sigmas[name] = math.sqrt(max(cov[i, i], 0.0))

    total, total_sigma = _propagated_total_fwhm(params, sigmas, cov, tuple(free))
    return FitResult(parameters=params, sigmas=sigmas, covariance=cov,
                     free_names=tuple(free),
                     residual_norm=float(np.linalg.norm(res.fun)),
                     n_evaluations=int(res.nfev), success=True,
                     total_fwhm=total, total_fwhm_sigma=total_sigma)


def oscillation_correct(s: Spectrum, c: float = OSC_C, amplitude: float = OSC_A,
                        frequency: float = OSC_V, phase: float = 0.0) -> Spectrum:
    """Divide out the sinusoidal excitation-power drift.

    The correction factor is f(E) = c + amplitude * sin(2 pi frequency E +
    phase) with E the abscissa in meV; frequency is per meV.
    """
    energy = s.abscissa.copy()
    if s.units == "GHz":
        energy = energy / GHZ_PER_MEV
    elif s.units != "meV":
        raise ValueError(f"cannot convert {s.units!r} to meV")
    factor = c + amplitude * np.sin(2.0 * np.pi * frequency * energy + phase)
    if np.any(factor <= 0):
        raise CorrectionSingular("correction factor reaches zero in range")
    meta = dict(s.meta)
    meta["oscillation_correction"] = {"c": c, "amplitude": amplitude,
                                      "frequency_per_mev": frequency,
                                      "phase": phase}
    sigma = s.sigma / factor if s.sigma is not None else None
    return Spectrum(abscissa=s.abscissa.copy(),
                    intensity=s.intensity / factor, sigma=sigma, meta=meta)


def thermal_linewidth(m: ThermalModel, temperature: float) -> float:
    """Linewidth (GHz) of the thermal model at one temperature (K).

    Below 0.05 K the occupation term is treated as exactly zero (it
    underflows anyway and the closed form would overflow the exponent).
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if temperature < 0.05:
        return m.dnu0
    ratio = m.dE * KELVIN_PER_MEV / temperature
    if ratio > 500.0:
        return m.dnu0
    return m.dnu0 + m.a / math.expm1(ratio)


def fit_thermal(points, dE: float, fit_dE: bool = False):
    """Fit (dnu0, a) of the thermal model to (T, fwhm[, sigma]) samples.

    dE stays fixed unless ``fit_dE`` is set.  Returns (ThermalModel,
    FitResult).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] not in (2, 3):
        raise ValueError("points must be rows of (T, fwhm) or (T, fwhm, sigma)")
    n_par = 3 if fit_dE else 2
    if pts.shape[0] < max(3, n_par + 1):
        raise InsufficientData(f"need >= {max(3, n_par + 1)} points")
    temps, widths = pts[:, 0], pts[:, 1]
    weights = 1.0 / pts[:, 2] if pts.shape[1] == 3 else np.ones(len(temps))

    def model(theta):
        de = theta[2] if fit_dE else dE
        m = ThermalModel(dnu0=max(theta[0], 0.0), a=max(theta[1], 0.0),
                         dE=max(de, 1e-9))
        return np.array([thermal_linewidth(m, t) for t in temps])

    def residuals(theta):
        return (model(theta) - widths) * weights

    x0 = [max(widths.min(), 1e-3), max(widths.max() - widths.min(), 1e-3)]
    lower, upper = [0.0, 0.0], [np.inf, np.inf]
    if fit_dE:
        x0.append(dE)
        lower.append(1e-6)
        upper.append(np.inf)
    res = least_squares(residuals, x0, bounds=(lower, upper),
                        xtol=1e-12, ftol=1e-12, max_nfev=MAX_FIT_EVALS)
    if not res.success:
        raise FitDiverged(f"thermal fit did not converge: {res.message}")

    names = ("dnu0", "a", "dE")[:n_par]
    values = dict(zip(names, res.x))
    de = values.get("dE", dE)
    fitted = ThermalModel(dnu0=values["dnu0"], a=values["a"], dE=de)

    m_pts, jtj = len(temps), res.jac.T @ res.jac
    try:
        cov = np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(jtj)
    if pts.shape[1] == 2:
        scale = 2.0 * res.cost / (m_pts - n_par) if m_pts > n_par else 0.0
        cov = cov * scale
    sigmas = {name: math.sqrt(max(cov[i, i], 0.0))
              for i, name in enumerate(names)}
    if not fit_dE:
        sigmas["dE"] = 0.0
    params = {"dnu0": fitted.dnu0, "a": fitted.a, "dE": de}
    result = FitResult(parameters=params, sigmas=sigmas, covariance=cov,
                       free_names=tuple(names),
                       residual_norm=float(np.linalg.norm(res.fun)),
                       n_evaluations=int(res.nfev), success=True)
    return fitted, result


def crossing_temperature(m: ThermalModel, dnu_rad: float) -> float:
    """Temperature (K) where the phonon term equals the radiative width."""
    if dnu_rad <= 0:
        raise ValueError("dnu_rad must be positive")
    return m.dE * KELVIN_PER_MEV / math.log1p(m.a / dnu_rad)
