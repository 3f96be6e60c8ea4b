"""Quantitative models of shallow-donor bound-exciton spectroscopy.

Submodules
----------
constants
    Unit-checked quantities, physical constants, and the material registry.
lattice
    Crystal-site generation and seeded isotope sampling.
states
    Donor and bound-exciton effective-mass solvers.
isotopes
    Monte-Carlo isotope-disorder broadening and donor-isotope shifts.
lineshape
    Voigt profiles and fitting, drift correction, thermal broadening.
absorption
    Optical depth, clipped-peak recovery, and donor-density estimation.
spins
    Zeeman patterns and nuclear hyperfine structure.
cli
    Command-line pipeline producing JSON reports and plot CSVs.
"""

__version__ = "0.1.0"

from .constants import (Quantity, MaterialParams, IncompatibleUnits,
                        UnknownDonor, convert, material_params,
                        supported_pairs)
from .lattice import (CutoffTooLarge, LatticeEnvironment, generate_sites,
                      sample_isotopes, export_sites)
from .states import (CarrierEnvelope, DonorState, ExcitonState,
                     NoMinimumInBracket, solve_donor, solve_exciton,
                     rovib_energy, donor_envelope,
                     exciton_electron_envelope, exciton_hole_envelope,
                     envelope_density)
from .isotopes import (BroadeningResult, broadening_distribution,
                       population_fwhm, impurity_isotope_shift,
                       transition_shift, export_distribution)
from .lineshape import (Spectrum, VoigtParams, ThermalModel, FitResult,
                        FitDiverged, DegenerateData, InconsistentWidths,
                        voigt_value, fit_voigt, whiting_combine,
                        whiting_invert, oscillation_correct,
                        thermal_linewidth, fit_thermal,
                        crossing_temperature)
from .absorption import (TransmissionSetup, DensityInputs,
                         NonPhysicalTransmission, InsufficientWingData,
                         IncompleteCoverage, optical_depth,
                         transmission_from_od, fit_od_peak, donor_density,
                         zpl_lifetime)
from .spins import (ZeemanScheme, ZeemanPattern, HyperfineParams,
                    HyperfineStructure, EnvironmentTooSmall,
                    zeeman_transitions, hyperfine_params,
                    hyperfine_linewidth, hyperfine_splitting)

__all__ = [
    "__version__",
    "Quantity", "MaterialParams", "IncompatibleUnits", "UnknownDonor",
    "convert", "material_params", "supported_pairs",
    "CutoffTooLarge", "LatticeEnvironment", "generate_sites",
    "sample_isotopes", "export_sites",
    "CarrierEnvelope", "DonorState", "ExcitonState", "NoMinimumInBracket",
    "solve_donor", "solve_exciton", "rovib_energy", "donor_envelope",
    "exciton_electron_envelope", "exciton_hole_envelope", "envelope_density",
    "BroadeningResult", "broadening_distribution", "population_fwhm",
    "impurity_isotope_shift", "transition_shift", "export_distribution",
    "Spectrum", "VoigtParams", "ThermalModel", "FitResult", "FitDiverged",
    "DegenerateData", "InconsistentWidths", "voigt_value", "fit_voigt",
    "whiting_combine", "whiting_invert", "oscillation_correct",
    "thermal_linewidth", "fit_thermal", "crossing_temperature",
    "TransmissionSetup", "DensityInputs", "NonPhysicalTransmission",
    "InsufficientWingData", "IncompleteCoverage", "optical_depth",
    "transmission_from_od", "fit_od_peak", "donor_density", "zpl_lifetime",
    "ZeemanScheme", "ZeemanPattern", "HyperfineParams", "HyperfineStructure",
    "EnvironmentTooSmall", "zeeman_transitions", "hyperfine_params",
    "hyperfine_linewidth", "hyperfine_splitting",
]
