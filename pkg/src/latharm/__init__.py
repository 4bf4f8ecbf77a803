"""Harmonic approximation of low-lying eigenvalues of ε-scaled lattice Schrödinger operators."""

from .eigensolver import SpectrumResult, dense_spectrum, lowest_eigenvalues
from .harmonic import HarmonicLevel, WellData, merged_levels, quasimode, well_data
from .lattice import (
    LatticeBox,
    assemble_hamiltonian,
    assemble_kinetic,
    build_lattice,
    fourier_cutoff,
    operator_norm,
    partition_of_unity,
)
from .model import ModelSpec, builtin_model, model_from_config, validate_hypotheses
from .report import emit_report, read_report
from .symbols import TorusSymbol, kinetic_symbol, moyal_partial_sum, quantize
from .verify import (
    convergence_study,
    fit_rate,
    localization_defects,
    persson_estimate,
    psido_study,
    quasimode_gram_and_rayleigh,
)

__version__ = "0.1.0"

__all__ = [
    "SpectrumResult",
    "dense_spectrum",
    "lowest_eigenvalues",
    "HarmonicLevel",
    "WellData",
    "merged_levels",
    "quasimode",
    "well_data",
    "LatticeBox",
    "assemble_hamiltonian",
    "assemble_kinetic",
    "build_lattice",
    "fourier_cutoff",
    "operator_norm",
    "partition_of_unity",
    "ModelSpec",
    "builtin_model",
    "model_from_config",
    "validate_hypotheses",
    "emit_report",
    "read_report",
    "TorusSymbol",
    "kinetic_symbol",
    "moyal_partial_sum",
    "quantize",
    "convergence_study",
    "fit_rate",
    "localization_defects",
    "persson_estimate",
    "psido_study",
    "quasimode_gram_and_rayleigh",
]
