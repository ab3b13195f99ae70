"""Scattering by locally perturbed periodic layers and differential defect imaging.

The package simulates multistatic near-field data for a penetrable periodic
layer carrying a local defect and reconstructs the defect with a sampling
indicator that contrasts full-data and single-Floquet-mode regularized
solutions.
"""

__version__ = "0.1.0"

from .config import ConfigError, LoadedConfig, SolverOptions, load_config, parse_config
from .geometry import (
    DefectEntry,
    DerivedRegions,
    MediaConfig,
    ModeIndex,
    Region,
    WaveParams,
    derived_regions,
    eval_media,
    sample_contrasts,
    sample_media,
)
from .imaging import GlsmOptions, IndicatorMap, SideSolver, glsm_minimize, image, indicator_at, sampling_grid
from .kernels import (
    RayleighSeq,
    dtn_apply,
    green_ml,
    green_q,
    incident_wave,
    rayleigh_of_point_source,
    rayleigh_of_point_source_q,
    reduced_indices,
)
from .operators import (
    HerglotzDensity,
    NearFieldData,
    add_noise,
    assemble_near_field,
    assemble_near_field_all,
    check_factorization,
    herglotz_field,
    near_field_q,
    project_embed,
    project_restrict,
    sharp,
)
from .solver import (
    GridField,
    SolverError,
    SolverGrid,
    SourcePair,
    energy_balance,
    incident_source,
    propagating_indices,
    rayleigh_extract,
    solve_scattering,
    volume_potential,
)
from .verify import run_checks

__all__ = [
    "__version__",
    "ConfigError",
    "LoadedConfig",
    "SolverOptions",
    "load_config",
    "parse_config",
    "DefectEntry",
    "DerivedRegions",
    "MediaConfig",
    "ModeIndex",
    "Region",
    "WaveParams",
    "derived_regions",
    "eval_media",
    "sample_contrasts",
    "sample_media",
    "GlsmOptions",
    "IndicatorMap",
    "SideSolver",
    "glsm_minimize",
    "image",
    "indicator_at",
    "sampling_grid",
    "RayleighSeq",
    "dtn_apply",
    "green_ml",
    "green_q",
    "incident_wave",
    "rayleigh_of_point_source",
    "rayleigh_of_point_source_q",
    "reduced_indices",
    "HerglotzDensity",
    "NearFieldData",
    "add_noise",
    "assemble_near_field",
    "assemble_near_field_all",
    "check_factorization",
    "herglotz_field",
    "near_field_q",
    "project_embed",
    "project_restrict",
    "sharp",
    "GridField",
    "SolverError",
    "SolverGrid",
    "SourcePair",
    "energy_balance",
    "incident_source",
    "propagating_indices",
    "rayleigh_extract",
    "solve_scattering",
    "volume_potential",
    "run_checks",
]
