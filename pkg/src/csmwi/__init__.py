"""Compressive-sensing microwave breast imaging on a DBT-derived tissue prior."""

from .model import (
    AntennaArray,
    ComplexPermittivityMap,
    ContrastImage,
    FrequencySet,
    Grid2D,
    contrast_from_permittivity,
    permittivity_from_contrast,
)
from .phantom import (
    DebyeTissue,
    LesionSpec,
    TissueLibrary,
    TissueMap,
    build_background,
    composite_permittivity,
    corrupt_fat_map,
    insert_lesion,
    load_tissue_map,
    save_tissue_map,
)
from .fdfd import (
    FieldSolution,
    HelmholtzOperator,
    PMLConfig,
    assemble,
    green_row,
    scattered_field,
    solve_source,
)

__all__ = [
    "AntennaArray",
    "ComplexPermittivityMap",
    "ContrastImage",
    "FrequencySet",
    "Grid2D",
    "contrast_from_permittivity",
    "permittivity_from_contrast",
    "DebyeTissue",
    "LesionSpec",
    "TissueLibrary",
    "TissueMap",
    "build_background",
    "composite_permittivity",
    "corrupt_fat_map",
    "insert_lesion",
    "load_tissue_map",
    "save_tissue_map",
    "FieldSolution",
    "HelmholtzOperator",
    "PMLConfig",
    "assemble",
    "green_row",
    "scattered_field",
    "solve_source",
]
