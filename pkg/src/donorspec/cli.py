"""Command-line pipeline: ingest CSV spectra, dispatch analyses, emit JSON
reports and plot-ready CSV series.

Every run records its effective configuration (after config-file and flag
merging), a content hash of its inputs, and provenance notes flagging which
constants are literature defaults rather than measured model inputs.  Exit
codes: 0 success, 2 input error, 3 fit failure, 4 config error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import math
import os
import sys
from datetime import datetime, timezone

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from . import __version__
from .constants import (GHZ_PER_MEV, IncompatibleUnits, LITERATURE_DEFAULTS,
                        MaterialParams, UnknownDonor, material_params)
from .lattice import (CutoffTooLarge, EnvironmentMismatch, export_sites,
                      generate_sites)
from .states import (NoMinimumInBracket, donor_envelope, rovib_energy,
                     solve_donor, solve_exciton)
from .isotopes import (broadening_distribution, impurity_isotope_shift,
                       population_fwhm)
from .lineshape import (CorrectionSingular, DegenerateData, FitDiverged,
                        InconsistentWidths, InsufficientData, Spectrum,
                        ThermalModel, VoigtParams, crossing_temperature,
                        fit_thermal, fit_voigt, oscillation_correct,
                        thermal_linewidth, voigt_value, whiting_combine,
                        whiting_invert)
from .absorption import (DEFAULT_SATURATION_OD, DensityInputs,
                         IncompleteCoverage, InsufficientWingData,
                         NonPhysicalTransmission, TransmissionSetup,
                         donor_density, fit_od_peak, optical_depth,
                         zpl_lifetime)
from .spins import (EnvironmentTooSmall, ZeemanScheme, hyperfine_linewidth,
                    hyperfine_params, hyperfine_splitting, zeeman_transitions)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_FIT = 3
EXIT_CONFIG = 4

# Environment variable naming a TOML file of registry overrides, applied
# before per-run overrides ([ZnO.Al] tables of MaterialParams fields).
REGISTRY_ENV_VAR = "DONORSPEC_REGISTRY"


class ParseError(ValueError):
    """Input file does not parse under the requested schema."""


class UnitError(ValueError):
    """Missing or unsupported unit annotation in a CSV header."""


class ConfigError(ValueError):
    """Invalid configuration file or option set."""


class MissingSeries(KeyError):
    """Report does not contain the series requested for plotting."""


_INPUT_ERRORS = (ParseError, UnitError, NonPhysicalTransmission,
                 IncompleteCoverage, EnvironmentMismatch, IncompatibleUnits,
                 FileNotFoundError, CorrectionSingular)
_FIT_ERRORS = (FitDiverged, DegenerateData, InsufficientData,
               InsufficientWingData, InconsistentWidths, NoMinimumInBracket,
               EnvironmentTooSmall)
_CONFIG_ERRORS = (ConfigError, UnknownDonor, CutoffTooLarge)


@dataclasses.dataclass
class AnalysisConfig:
    """One command invocation: merged defaults, config file, and flags."""

    command: str
    options: dict
    config_path: str = None


@dataclasses.dataclass
class Report:
    """Result record of one run; serializable except the plot series."""

    command: str
    effective_config: dict
    results: dict
    inputs_digest: str = "none"
    provenance_notes: list = dataclasses.field(default_factory=list)
    warnings: list = dataclasses.field(default_factory=list)
    version: str = __version__
    timestamp: str = ""
    series: dict = dataclasses.field(default_factory=dict, repr=False)

    def to_json(self) -> str:
        payload = {
            "command": self.command,
            "version": self.version,
            "timestamp": self.timestamp,
            "inputs_digest": self.inputs_digest,
            "effective_config": self.effective_config,
            "results": self.results,
            "provenance_notes": self.provenance_notes,
            "warnings": self.warnings,
        }
        return json.dumps(payload, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# Spectrum I/O
# ---------------------------------------------------------------------------
_ABSCISSA_UNITS = {"ghz": "GHz", "mev": "meV"}


def _parse_header(fields, path):
    """Column names + units from a 'name (unit)' header row."""
    names, units = [], []
    for field in fields:
        field = field.strip()
        if "(" in field and field.endswith(")"):
            name, unit = field.rsplit("(", 1)
            names.append(name.strip().lower())
            units.append(unit[:-1].strip())
        else:
            names.append(field.lower())
            units.append(None)
    if units[0] is None:
        raise UnitError(f"{path}: first column lacks a unit annotation")
    return names, units


def load_spectrum(path, schema: str = "ple"):
    """Load a CSV spectrum or point series.

    Format: optional '#' comment lines, then a header row of
    "name (unit)" columns, then numeric rows.  The abscissa unit is taken
    from the first column's annotation.  ``schema`` is one of "ple",
    "transmission" (both return a Spectrum) or "temperature_series"
    (returns an (n, 2|3) array of (T, fwhm[, sigma]) rows).

    Returns
    -------
    (object, warnings)
        warnings is a list of normalization notes (e.g. sorting applied).
    """
    if schema not in ("ple", "transmission", "temperature_series"):
        raise ValueError(f"unknown schema {schema!r}")
    rows, header, header_line = [], None, 0
    with open(path, newline="") as fh:
        for lineno, raw in enumerate(csv.reader(fh), start=1):
            if not raw or (raw[0].lstrip().startswith("#")):
                continue
            if all(not cell.strip() for cell in raw):
                continue
            if header is None:
                header, header_line = raw, lineno
                continue
            rows.append((lineno, raw))
    if header is None:
        raise ParseError(f"{path}: empty file (no header row)")
    names, units = _parse_header(header, path)
    if not rows:
        raise ParseError(f"{path}: no data rows after header "
                         f"(line {header_line})")

    data = np.empty((len(rows), len(names)))
    for i, (lineno, raw) in enumerate(rows):
        if len(raw) != len(names):
            raise ParseError(f"{path}:{lineno}: expected {len(names)} "
                             f"columns, got {len(raw)}")
        try:
            data[i] = [float(cell) for cell in raw]
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None

    warnings = []
    abscissa = data[:, 0]
    if len(np.unique(abscissa)) != len(abscissa):
        dup = abscissa[np.where(np.diff(np.sort(abscissa)) == 0)[0][0]]
        raise ParseError(f"{path}: duplicate abscissa value {dup}")
    if not np.all(np.diff(abscissa) > 0):
        order = np.argsort(abscissa)
        data = data[order]
        warnings.append("abscissa was not monotonic; rows sorted")

    if schema == "temperature_series":
        if units[0] not in ("K",):
            raise UnitError(f"{path}: temperature series needs K abscissa, "
                            f"got {units[0]!r}")
        if data.shape[1] not in (2, 3):
            raise ParseError(f"{path}: need (T, fwhm[, sigma]) columns")
        return data, warnings

    unit = _ABSCISSA_UNITS.get((units[0] or "").lower())
    if unit is None:
        raise UnitError(f"{path}: unsupported abscissa unit {units[0]!r} "
                        "(expected GHz or meV)")
    if data.shape[1] < 2:
        raise ParseError(f"{path}: need at least (abscissa, intensity)")
    sigma = data[:, 2] if data.shape[1] >= 3 else None
    try:
        spectrum = Spectrum(abscissa=data[:, 0], intensity=data[:, 1],
                            sigma=sigma,
                            meta={"units": unit, "source": str(path),
                                  "columns": names})
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return spectrum, warnings


def write_spectrum(s: Spectrum, path, abscissa_name="frequency",
                   intensity_name="intensity", comments=()):
    """Write a Spectrum as a unit-annotated CSV."""
    with open(path, "w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        header = [f"{abscissa_name} ({s.units})", f"{intensity_name} (arb)"]
        if s.sigma is not None:
            header.append("sigma (arb)")
        writer.writerow(header)
        for i in range(len(s)):
            row = [f"{s.abscissa[i]:.9g}", f"{s.intensity[i]:.9g}"]
            if s.sigma is not None:
                row.append(f"{s.sigma[i]:.9g}")
            writer.writerow(row)


def _digest_files(paths) -> str:
    digest = hashlib.sha256()
    for path in paths:
        with open(path, "rb") as fh:
            digest.update(fh.read())
    return digest.hexdigest() if paths else "none"


# ---------------------------------------------------------------------------
# Registry override plumbing
# ---------------------------------------------------------------------------
def _env_registry_overrides(material, donor):
    path = os.environ.get(REGISTRY_ENV_VAR)
    if not path:
        return {}
    try:
        with open(path, "rb") as fh:
            table = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"registry override file {path}: {exc}") from None
    return table.get(material, {}).get(donor, {})


def _params_for(opts) -> MaterialParams:
    material, donor = opts["material"], opts["donor"]
    overrides = dict(_env_registry_overrides(material, donor))
    overrides.update(opts.get("overrides") or {})
    try:
        return material_params(material, donor, overrides or None)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _literature_notes(*keys):
    notes = []
    for key in keys:
        if key in LITERATURE_DEFAULTS:
            notes.append(f"literature default: {key} = {LITERATURE_DEFAULTS[key]}")
    return notes


# ---------------------------------------------------------------------------
# Command implementations
# ---------------------------------------------------------------------------
def _cmd_solve_states(opts):
    params = _params_for(opts)
    d0 = solve_donor(params)
    x0 = solve_exciton(params)
    ladder = []
    for n_h in (0, 1, 2):
        st = solve_exciton(params, n_h=n_h)
        ladder.append({"n_h": n_h, "l_h": 0, "a_e_nm": st.a_e,
                       "total_energy_mev": st.total_energy,
                       "offset_mev": st.total_energy - x0.total_energy})
    rovib = [{"nu": nu, "J": 0,
              "energy_mev": rovib_energy(x0.depth, x0.b,
                                         params.exciton_hole_mass, nu, 0)}
             for nu in (0, 1, 2)]
    results = {
        "donor_state": {
            "decay_length_nm": d0.a, "exponent": d0.n,
            "hydrogenic_energy_mev": d0.hydrogenic_energy,
            "mean_radius_nm": d0.mean_radius,
            "effective_bohr_radius_nm": d0.effective_bohr_radius,
        },
        "exciton_state": {
            "electron_radius_nm": x0.a_e, "kratzer_radius_nm": x0.b,
            "kratzer_depth_mev": x0.depth, "lambda": x0.lam,
            "hole_decay_per_nm": x0.epsilon,
            "hole_energy_mev": x0.hole_energy,
            "total_energy_mev": x0.total_energy,
        },
        "excited_states": ladder,
        "rovibrational_levels": rovib,
    }
    notes = _literature_notes(f"lattice.{params.material}")
    return results, notes, {}


def _cmd_simulate_isotope(opts):
    params = _params_for(opts)
    result = broadening_distribution(opts["material"], opts["donor"],
                                     n_samples=opts["samples"],
                                     cutoff=opts.get("cutoff"),
                                     seed=opts["seed"], params=params)
    results = {
        "fwhm_GHz": result.fwhm,
        "mean_GHz": result.mean,
        "population_fwhm_GHz": population_fwhm(
            opts["material"], opts["donor"], cutoff=opts.get("cutoff"),
            params=params),
        "n_samples": len(result.samples),
        "seed": result.seed,
        "cutoff_nm": result.cutoff,
    }
    series = {
        "isotope_shifts": {
            "columns": ["sample_index", "dE_D0 (GHz)", "dE_D0X (GHz)",
                        "dE_transition (GHz)"],
            "data": np.column_stack([np.arange(len(result.samples)),
                                     result.d0_shifts, result.d0x_shifts,
                                     result.samples]),
            "description": "per-sample state and transition shifts",
        }
    }
    if opts.get("export_sites_path"):
        env = generate_sites(opts["material"], opts.get("cutoff"),
                             spec=params.lattice)
        export_sites(env, opts["export_sites_path"])
    notes = _literature_notes(f"lattice.{params.material}")
    return results, notes, series


def _cmd_impurity_shift(opts):
    params = _params_for(opts)
    shift_ghz = impurity_isotope_shift(params)
    results = {
        "shift_GHz": shift_ghz,
        "shift_MHz": shift_ghz * 1e3,
        "magnitude_MHz": abs(shift_ghz) * 1e3,
        "donor_isotopes_amu": list(params.donor_isotope_masses),
    }
    return results, [], {}


def _cmd_hyperfine(opts):
    params = _params_for(opts)
    hp = hyperfine_params(params)
    results = {"contact_constant_MHz": hp.contact_constant_mhz,
               "nuclear_spin": hp.nuclear_spin}
    if params.material == "ZnO":
        env = generate_sites(params.material, opts.get("cutoff"),
                             spec=params.lattice)
        envelope = donor_envelope(solve_donor(params))
        dispersion, linewidth = hyperfine_linewidth(envelope, env, hp,
                                                    g_e=params.g_electron)
        results["nuclear_spin_linewidth_MHz"] = linewidth
        results["field_dispersion_mT"] = dispersion * 1e3
    structure = hyperfine_splitting(hp, opts["field"], g_e=params.g_electron)
    results["zero_field_splitting_MHz"] = structure.zero_field_splitting_mhz
    results["high_field_offsets_MHz"] = list(structure.high_field_offsets_mhz)
    results["regime"] = structure.regime
    results["zeeman_to_contact_ratio"] = structure.zeeman_to_contact_ratio
    notes = _literature_notes("g_factors")
    if params.material == "Si":
        notes += _literature_notes("hyperfine.Si")
    return results, notes, {}


def _cmd_zeeman(opts):
    g_h = opts.get("g_h")
    if g_h is None:
        g_h = -1.2 if opts["geometry"] == "Faraday" else 0.3
    scheme = ZeemanScheme(g_e=opts["g_e"], g_h=g_h, field_t=opts["field"],
                          geometry=opts["geometry"])
    pattern = zeeman_transitions(scheme)
    results = {
        "lines": [dataclasses.asdict(line) for line in pattern.lines],
        "electron_splitting_GHz": pattern.electron_splitting_ghz,
        "hole_splitting_GHz": pattern.hole_splitting_ghz,
        "strong_pair_splitting_GHz": pattern.strong_pair_splitting_ghz,
        "geometry": scheme.geometry,
        "field_T": scheme.field_t,
    }
    return results, _literature_notes("g_factors"), {}


def _cmd_whiting(opts):
    mode = opts["mode"]
    if mode == "combine":
        value = whiting_combine(opts["lorentzian"], opts["gaussian"])
        results = {"total_fwhm_GHz": value}
    else:
        value = whiting_invert(opts["total"], opts["lorentzian"])
        results = {"gaussian_fwhm_GHz": value}
    return results, [], {}


def _cmd_fit_ple(opts):
    spectrum, warnings = load_spectrum(opts["input"], schema="ple")
    constraints = {}
    if opts.get("fix_gaussian") is not None:
        constraints["fix_fwhm_gaussian"] = opts["fix_gaussian"]
    if opts.get("fix_lorentzian") is not None:
        constraints["fix_fwhm_lorentzian"] = opts["fix_lorentzian"]
    fit = fit_voigt(spectrum, constraints=constraints or None)
    model = voigt_value(VoigtParams(**fit.parameters), spectrum.abscissa)
    results = {"fit": fit.to_dict(), "units": spectrum.units}
    series = {
        "ple_fit": {
            "columns": [f"abscissa ({spectrum.units})", "data (arb)",
                        "model (arb)"],
            "data": np.column_stack([spectrum.abscissa, spectrum.intensity,
                                     model]),
            "description": "input spectrum and fitted model",
        }
    }
    return results, [], series, warnings, [opts["input"]]


def _cmd_correct_oscillation(opts):
    spectrum, warnings = load_spectrum(opts["input"], schema="ple")
    corrected = oscillation_correct(spectrum, c=opts["c"],
                                    amplitude=opts["amplitude"],
                                    frequency=opts["frequency"],
                                    phase=opts["phase"])
    if opts.get("output_spectrum"):
        write_spectrum(corrected, opts["output_spectrum"],
                       comments=[f"oscillation-corrected from {opts['input']}"])
    results = {"correction": corrected.meta["oscillation_correction"],
               "points": len(corrected),
               "output_spectrum": opts.get("output_spectrum")}
    series = {
        "corrected_spectrum": {
            "columns": [f"abscissa ({corrected.units})", "corrected (arb)"],
            "data": np.column_stack([corrected.abscissa, corrected.intensity]),
            "description": "drift-corrected spectrum",
        }
    }
    return results, [], series, warnings, [opts["input"]]


def _thermal_model_from(opts, params):
    if opts.get("dnu0") is not None and opts.get("a") is not None \
            and opts.get("dE") is not None:
        return ThermalModel(dnu0=opts["dnu0"], a=opts["a"], dE=opts["dE"])
    if params is None or params.thermal is None:
        raise ConfigError("no thermal model: give --dnu0/--a/--dE or a "
                          "donor with registry coefficients")
    t = params.thermal
    return ThermalModel(dnu0=opts.get("dnu0") or t.linewidth_floor,
                        a=opts.get("a") or t.amplitude,
                        dE=opts.get("dE") or t.activation_energy)


def _thermal_curve(model, t_min=0.1, t_max=20.0, n=200):
    temps = np.linspace(t_min, t_max, n)
    widths = np.array([thermal_linewidth(model, t) for t in temps])
    return np.column_stack([temps, widths])


def _cmd_fit_temperature(opts):
    points, warnings = load_spectrum(opts["input"], schema="temperature_series")
    params = None
    if opts.get("material") and opts.get("donor"):
        params = _params_for(opts)
    if opts.get("dE") is not None:
        de = opts["dE"]
    elif params is not None and params.thermal is not None:
        de = params.thermal.activation_energy
    else:
        raise ConfigError("need --dE or a donor with registry coefficients")
    model, fit = fit_thermal(points, dE=de, fit_dE=opts["fit_de"])
    results = {"fit": fit.to_dict(),
               "model": {"dnu0_GHz": model.dnu0, "a_GHz": model.a,
                         "dE_meV": model.dE}}
    series = {
        "thermal_curve": {
            "columns": ["temperature (K)", "fwhm (GHz)"],
            "data": _thermal_curve(model,
                                   t_max=max(20.0, points[:, 0].max() * 1.1)),
            "description": "fitted model sampled at 200 points",
        },
        "thermal_data": {
            "columns": ["temperature (K)", "fwhm (GHz)"],
            "data": points[:, :2],
            "description": "input linewidth series",
        },
    }
    return results, [], series, warnings, [opts["input"]]


def _cmd_crossing_temp(opts):
    params = None
    if opts.get("material") and opts.get("donor"):
        params = _params_for(opts)
    model = _thermal_model_from(opts, params)
    temperature = crossing_temperature(model, opts["dnu_rad"])
    results = {"crossing_temperature_K": temperature,
               "model": {"dnu0_GHz": model.dnu0, "a_GHz": model.a,
                         "dE_meV": model.dE},
               "dnu_rad_GHz": opts["dnu_rad"]}
    series = {
        "thermal_curve": {
            "columns": ["temperature (K)", "fwhm (GHz)"],
            "data": _thermal_curve(model, t_max=max(10.0, 2 * temperature)),
            "description": "registry/explicit model sampled at 200 points",
        }
    }
    return results, [], series


def _cmd_compute_od(opts):
    spectrum, warnings = load_spectrum(opts["input"], schema="transmission")
    setup = TransmissionSetup(thickness_cm=opts["thickness"],
                              reflectance=opts["reflectance"])
    od = optical_depth(spectrum, setup, saturation_od=opts["saturation_od"])
    if opts.get("output_spectrum"):
        write_spectrum(od, opts["output_spectrum"],
                       intensity_name="optical_depth",
                       comments=[f"OD from {opts['input']}, "
                                 f"R={setup.reflectance}"])
    saturated = od.meta["saturated"]
    results = {"n_points": len(od), "n_saturated": int(saturated.sum()),
               "max_od": float(od.intensity.max()),
               "reflectance": setup.reflectance,
               "output_spectrum": opts.get("output_spectrum")}
    series = {
        "optical_depth": {
            "columns": [f"abscissa ({od.units})", "optical_depth", "saturated"],
            "data": np.column_stack([od.abscissa, od.intensity,
                                     saturated.astype(float)]),
            "description": "optical depth with saturation flags",
        }
    }
    return results, [], series, warnings, [opts["input"]]


def _cmd_fit_od_peak(opts):
    od, warnings = load_spectrum(opts["input"], schema="ple")
    peak, fit = fit_od_peak(od, fixed_total_fwhm=opts["fwhm"],
                            saturation_od=opts["saturation_od"],
                            fwhm_lorentzian=opts["lorentzian"])
    results = {"peak_od": peak, "fit": fit.to_dict(),
               "fixed_total_fwhm_GHz": opts["fwhm"],
               "saturation_od": opts["saturation_od"]}
    model = voigt_value(VoigtParams(**fit.parameters), od.abscissa)
    series = {
        "od_fit": {
            "columns": [f"abscissa ({od.units})", "optical_depth", "model"],
            "data": np.column_stack([od.abscissa, od.intensity, model]),
            "description": "OD data and wing-fit extrapolation",
        }
    }
    return results, [], series, warnings, [opts["input"]]


def _cmd_estimate_density(opts):
    od, warnings = load_spectrum(opts["input"], schema="ple")
    setup = TransmissionSetup(thickness_cm=opts["thickness"],
                              reflectance=opts["reflectance"])
    params = None
    notes = []
    if opts.get("material") and opts.get("donor"):
        params = _params_for(opts)
    tau = opts.get("tau_rad")
    if tau is None:
        if params is None or params.zpl_fraction is None:
            raise ConfigError("need --tau-rad or a donor with registry "
                              "lifetimes")
        tau = zpl_lifetime(params.lifetime_total_ns, params.zpl_fraction)
        notes += _literature_notes("lifetimes_ns")
    wavelength = opts.get("wavelength")
    if wavelength is None:
        if params is None or params.transition_wavelength_nm is None:
            raise ConfigError("need --wavelength or a registry donor")
        wavelength = params.transition_wavelength_nm
        notes += _literature_notes("transition_wavelength_nm")
    inputs = DensityInputs(tau_rad_ns=tau, wavelength_nm=wavelength,
                           refractive_index=opts["refractive_index"],
                           degeneracy_ratio=opts["degeneracy"])
    notes += _literature_notes("refractive_index")
    density = donor_density(od, inputs, setup)
    results = {"density_cm3": density,
               "inputs": dataclasses.asdict(inputs),
               "thickness_cm": setup.thickness_cm}
    return results, notes, {}, warnings, [opts["input"]]


# ---------------------------------------------------------------------------
# Dispatch and option schema
# ---------------------------------------------------------------------------
_MATERIAL_OPTS = {
    "material": str, "donor": str, "overrides": dict,
}

# Allowed option keys (and value types) per command, used for strict
# config-file validation.
COMMAND_OPTIONS = {
    "solve-states": {**_MATERIAL_OPTS},
    "simulate-isotope": {**_MATERIAL_OPTS, "samples": int, "cutoff": float,
                         "seed": int, "export_sites_path": str},
    "impurity-shift": {**_MATERIAL_OPTS},
    "hyperfine": {**_MATERIAL_OPTS, "field": float, "cutoff": float},
    "zeeman": {"g_e": float, "g_h": float, "field": float, "geometry": str},
    "whiting": {"mode": str, "total": float, "lorentzian": float,
                "gaussian": float},
    "fit-ple": {"input": str, "fix_gaussian": float, "fix_lorentzian": float},
    "correct-oscillation": {"input": str, "c": float, "amplitude": float,
                            "frequency": float, "phase": float,
                            "output_spectrum": str},
    "fit-temperature": {**_MATERIAL_OPTS, "input": str, "dE": float,
                        "fit_de": bool},
    "crossing-temp": {**_MATERIAL_OPTS, "dnu0": float, "a": float,
                      "dE": float, "dnu_rad": float},
    "compute-od": {"input": str, "thickness": float, "reflectance": float,
                   "saturation_od": float, "output_spectrum": str},
    "fit-od-peak": {"input": str, "fwhm": float, "lorentzian": float,
                    "saturation_od": float},
    "estimate-density": {**_MATERIAL_OPTS, "input": str, "thickness": float,
                         "reflectance": float, "tau_rad": float,
                         "wavelength": float, "refractive_index": float,
                         "degeneracy": float},
}

_HANDLERS = {
    "solve-states": _cmd_solve_states,
    "simulate-isotope": _cmd_simulate_isotope,
    "impurity-shift": _cmd_impurity_shift,
    "hyperfine": _cmd_hyperfine,
    "zeeman": _cmd_zeeman,
    "whiting": _cmd_whiting,
    "fit-ple": _cmd_fit_ple,
    "correct-oscillation": _cmd_correct_oscillation,
    "fit-temperature": _cmd_fit_temperature,
    "crossing-temp": _cmd_crossing_temp,
    "compute-od": _cmd_compute_od,
    "fit-od-peak": _cmd_fit_od_peak,
    "estimate-density": _cmd_estimate_density,
}


def run(config: AnalysisConfig) -> Report:
    """Dispatch one validated configuration to its command handler."""
    handler = _HANDLERS.get(config.command)
    if handler is None:
        raise ConfigError(f"unknown command {config.command!r}")
    out = handler(config.options)
    if len(out) == 3:
        results, notes, series = out
        warnings, inputs = [], []
    else:
        results, notes, series, warnings, inputs = out
    report = Report(
        command=config.command,
        effective_config=_serializable(config.options),
        results=_serializable(results),
        inputs_digest=_digest_files(inputs),
        provenance_notes=sorted(set(notes)),
        warnings=list(warnings),
        timestamp=datetime.now(timezone.utc).isoformat(),
        series=series,
    )
    return report


def _serializable(obj):
    if isinstance(obj, dict):
        return {k: _serializable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_serializable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and math.isnan(obj):
        return None
    return obj


def emit_plot_data(report: Report, kind: str = "all", directory=".") -> list:
    """Write the report's plot series as CSV files plus a manifest.

    ``kind`` selects one series by name, or "all".  Raises MissingSeries
    when the report has nothing matching.
    """
    if not report.series:
        raise MissingSeries(f"report for {report.command} carries no series")
    if kind == "all":
        selected = report.series
    elif kind in report.series:
        selected = {kind: report.series[kind]}
    else:
        raise MissingSeries(
            f"no series {kind!r} in report (have {sorted(report.series)})"
        )
    os.makedirs(directory, exist_ok=True)
    written = []
    manifest = {}
    for name, spec in selected.items():
        path = os.path.join(directory, f"{name}.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(spec["columns"])
            for row in np.atleast_2d(spec["data"]):
                writer.writerow([f"{v:.9g}" for v in row])
        manifest[f"{name}.csv"] = {"columns": spec["columns"],
                                   "description": spec["description"]}
        written.append(path)
    manifest_path = os.path.join(directory, "plot_manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump({"command": report.command, "files": manifest}, fh,
                  indent=2, sort_keys=True)
    written.append(manifest_path)
    return written


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------
def _build_parser():
    parser = argparse.ArgumentParser(
        prog="donorspec",
        description="Models of shallow-donor bound-exciton spectroscopy: "
                    "state solvers, isotope-disorder Monte Carlo, lineshape "
                    "and optical-depth analysis.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, material=False):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="TOML config file (flags override it)")
        p.add_argument("--output", help="write the JSON report here "
                                        "(default: stdout)")
        p.add_argument("--plot-dir", help="also write plot CSV series here")
        if material:
            p.add_argument("--material", choices=("ZnO", "Si"))
            p.add_argument("--donor", choices=("Al", "Ga", "In", "P"))
        return p

    p = add("solve-states", "donor and bound-exciton state parameters",
            material=True)

    p = add("simulate-isotope", "Monte-Carlo isotope broadening",
            material=True)
    p.add_argument("--samples", type=int)
    p.add_argument("--cutoff", type=float, help="lattice cutoff in nm")
    p.add_argument("--seed", type=int)
    p.add_argument("--export-sites", dest="export_sites_path",
                   help="debug CSV of generated lattice sites")

    add("impurity-shift", "donor-isotope line shift", material=True)

    p = add("hyperfine", "nuclear-spin linewidth and splittings",
            material=True)
    p.add_argument("--field", type=float, help="tesla")
    p.add_argument("--cutoff", type=float)

    p = add("zeeman", "four-line Zeeman pattern")
    p.add_argument("--g-e", dest="g_e", type=float)
    p.add_argument("--g-h", dest="g_h", type=float,
                   help="default: -1.2 Faraday, 0.3 Voigt")
    p.add_argument("--field", type=float)
    p.add_argument("--geometry", choices=("Voigt", "Faraday"))

    p = add("whiting", "total-width combine/invert")
    p.add_argument("mode", choices=("combine", "invert"))
    p.add_argument("--total", type=float)
    p.add_argument("--lorentzian", type=float)
    p.add_argument("--gaussian", type=float)

    p = add("fit-ple", "Voigt fit of a PLE spectrum")
    p.add_argument("--input")
    p.add_argument("--fix-gaussian", dest="fix_gaussian", type=float)
    p.add_argument("--fix-lorentzian", dest="fix_lorentzian", type=float)

    p = add("correct-oscillation", "divide out excitation-power drift")
    p.add_argument("--input")
    p.add_argument("--c", type=float)
    p.add_argument("--amplitude", type=float)
    p.add_argument("--frequency", type=float, help="oscillations per meV")
    p.add_argument("--phase", type=float)
    p.add_argument("--output-spectrum", dest="output_spectrum")

    p = add("fit-temperature", "fit the thermal broadening model",
            material=True)
    p.add_argument("--input",
                   help="CSV of temperature (K), fwhm (GHz)[, sigma]")
    p.add_argument("--dE", dest="dE", type=float,
                   help="activation energy in meV (default: registry)")
    p.add_argument("--fit-de", dest="fit_de", action="store_true",
                   help="also fit the activation energy")

    p = add("crossing-temp", "radiative-limit crossing temperature",
            material=True)
    p.add_argument("--dnu0", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--dE", dest="dE", type=float)
    p.add_argument("--dnu-rad", dest="dnu_rad", type=float)

    p = add("compute-od", "optical depth from a transmission spectrum")
    p.add_argument("--input")
    p.add_argument("--thickness", type=float, help="cm")
    p.add_argument("--reflectance", type=float)
    p.add_argument("--saturation-od", dest="saturation_od", type=float)
    p.add_argument("--output-spectrum", dest="output_spectrum")

    p = add("fit-od-peak", "extrapolate a clipped OD peak from its wings")
    p.add_argument("--input")
    p.add_argument("--fwhm", type=float, help="fixed total FWHM in GHz")
    p.add_argument("--lorentzian", type=float)
    p.add_argument("--saturation-od", dest="saturation_od", type=float)

    p = add("estimate-density", "donor density from an OD spectrum",
            material=True)
    p.add_argument("--input")
    p.add_argument("--thickness", type=float, help="cm")
    p.add_argument("--reflectance", type=float)
    p.add_argument("--tau-rad", dest="tau_rad", type=float, help="ns")
    p.add_argument("--wavelength", type=float, help="nm")
    p.add_argument("--refractive-index", dest="refractive_index", type=float)
    p.add_argument("--degeneracy", type=float)

    return parser


# Applied after config-file and flag merging: neither source wins over an
# explicit value, and the effective config records what was actually used.
_DEFAULTS = {
    "simulate-isotope": {"samples": 2000, "seed": 1},
    "hyperfine": {"field": 0.0},
    "zeeman": {"g_e": 1.97, "geometry": "Voigt"},
    "correct-oscillation": {"c": 0.58, "amplitude": 0.07,
                            "frequency": 1.0 / 0.18, "phase": 0.0},
    "compute-od": {"reflectance": 0.24,
                   "saturation_od": DEFAULT_SATURATION_OD},
    "fit-od-peak": {"lorentzian": 0.0,
                    "saturation_od": DEFAULT_SATURATION_OD},
    "estimate-density": {"reflectance": 0.24, "refractive_index": 2.4,
                         "degeneracy": 1.0},
}


_REQUIRED = {
    "solve-states": ("material", "donor"),
    "simulate-isotope": ("material", "donor"),
    "impurity-shift": ("material", "donor"),
    "hyperfine": ("material", "donor"),
    "zeeman": ("field",),
    "fit-ple": ("input",),
    "correct-oscillation": ("input",),
    "fit-temperature": ("input",),
    "crossing-temp": ("dnu_rad",),
    "compute-od": ("input", "thickness"),
    "fit-od-peak": ("input", "fwhm"),
    "estimate-density": ("input", "thickness"),
}


def _load_config_file(path, command):
    try:
        with open(path, "rb") as fh:
            table = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    allowed = COMMAND_OPTIONS.get(command, {})
    unknown = set(table) - set(allowed)
    if unknown:
        raise ConfigError(f"{path}: unknown keys for {command}: "
                          f"{sorted(unknown)}")
    for key, value in table.items():
        want = allowed[key]
        if want is float and isinstance(value, int):
            value = float(value)
            table[key] = value
        if not isinstance(value, want):
            raise ConfigError(f"{path}: key {key!r} should be {want.__name__}")
    return table


def _merge_options(args) -> AnalysisConfig:
    command = args.command
    options = {}
    if getattr(args, "config", None):
        options.update(_load_config_file(args.config, command))
    skip = {"command", "config", "output", "plot_dir"}
    for key, value in vars(args).items():
        if key in skip:
            continue
        if value is not None and value is not False:
            options[key] = value
        elif key not in options:
            options[key] = value
    for key, value in _DEFAULTS.get(command, {}).items():
        if options.get(key) is None:
            options[key] = value
    missing = [k for k in _REQUIRED.get(command, ())
               if options.get(k) in (None, "")]
    if missing:
        raise ConfigError(f"{command}: missing required option(s): "
                          f"{', '.join(sorted(missing))}")
    if command == "whiting":
        if options["mode"] == "combine" and (
                options.get("lorentzian") is None
                or options.get("gaussian") is None):
            raise ConfigError("whiting combine needs --lorentzian and "
                              "--gaussian")
        if options["mode"] == "invert" and (
                options.get("total") is None
                or options.get("lorentzian") is None):
            raise ConfigError("whiting invert needs --total and --lorentzian")
    return AnalysisConfig(command=command, options=options,
                          config_path=getattr(args, "config", None))


def _error_text(exc) -> str:
    if isinstance(exc, KeyError) and exc.args:
        return str(exc.args[0])
    return str(exc)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _merge_options(args)
        report = run(config)
    except _CONFIG_ERRORS as exc:
        print(f"error: {_error_text(exc)}", file=sys.stderr)
        return EXIT_CONFIG
    except _FIT_ERRORS as exc:
        print(f"error: {_error_text(exc)}", file=sys.stderr)
        return EXIT_FIT
    except _INPUT_ERRORS as exc:
        print(f"error: {_error_text(exc)}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {_error_text(exc)}", file=sys.stderr)
        return EXIT_INPUT

    payload = report.to_json()
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(payload + "\n")
    else:
        print(payload)
    if args.plot_dir:
        try:
            emit_plot_data(report, directory=args.plot_dir)
        except MissingSeries as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
