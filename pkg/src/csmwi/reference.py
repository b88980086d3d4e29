"""Reference desk-scale scene: grid, phantom geometry, antennas, defaults.

The scene is a compressed-breast slice: a muscle wall on the left, an
elliptical breast wrapped in a closed skin shell, coupling bolus
everywhere else, and six monostatic antennas on an arc facing the breast.
The grid carries a PML frame of `PML_THICKNESS` cells on every side; the
origin is chosen so the physical region starts at (0, 0).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import AntennaArray, FrequencySet, Grid2D
from .phantom import (
    BOLUS,
    BREAST,
    LESION_TISSUE,
    MUSCLE,
    SKIN,
    LesionSpec,
    TissueMap,
    save_tissue_map,
)

PML_THICKNESS = 10
CELL = 1.25e-3  # m
NX_PHYS, NY_PHYS = 120, 80  # 0.15 m x 0.10 m physical region

MUSCLE_WALL_X = 0.020  # muscle occupies x <= this
BREAST_CENTER = (0.075, 0.050)
BREAST_SEMI_AXES = (0.048, 0.028)
SKIN_THICKNESS = 2.5e-3
ANTENNA_STANDOFF = 8.0e-3  # gap between skin and the antenna arc
ANTENNA_ANGLES_DEG = (-110.0, -66.0, -22.0, 22.0, 66.0, 110.0)

LESION_CENTER = (0.085, 0.058)
LESION_RADIUS = 7.5e-3

FAT_FIELD_SEED = 20240501


def reference_grid() -> Grid2D:
    nx = NX_PHYS + 2 * PML_THICKNESS
    ny = NY_PHYS + 2 * PML_THICKNESS
    return Grid2D(
        nx=nx,
        ny=ny,
        dx=CELL,
        dy=CELL,
        origin=(-PML_THICKNESS * CELL, -PML_THICKNESS * CELL),
    )


def reference_frequencies() -> FrequencySet:
    return FrequencySet.default()


def reference_antennas() -> AntennaArray:
    cx, cy = BREAST_CENTER
    a = BREAST_SEMI_AXES[0] + SKIN_THICKNESS + ANTENNA_STANDOFF
    b = BREAST_SEMI_AXES[1] + SKIN_THICKNESS + ANTENNA_STANDOFF
    angles = np.deg2rad(ANTENNA_ANGLES_DEG)
    pos = [(cx + a * np.cos(t), cy + b * np.sin(t)) for t in angles]
    return AntennaArray(tuple(pos))


def reference_lesion() -> LesionSpec:
    return LesionSpec(center=LESION_CENTER, radius=LESION_RADIUS, tissue=LESION_TISSUE)


def _fat_field(xx: np.ndarray, yy: np.ndarray, breast: np.ndarray) -> np.ndarray:
    """Smooth heterogeneous fat percentage in [0, 90] over the breast.

    A fibroglandular-dense well surrounds the stock lesion site, so the
    lesion sits in near-pure fibroglandular tissue.
    """
    rng = np.random.default_rng(FAT_FIELD_SEED)
    x0, x1 = xx[breast].min(), xx[breast].max()
    y0, y1 = yy[breast].min(), yy[breast].max()
    field = np.zeros_like(xx)
    for _ in range(8):
        cx = rng.uniform(x0, x1)
        cy = rng.uniform(y0, y1)
        sigma = rng.uniform(8e-3, 18e-3)
        amp = rng.uniform(-1.0, 1.0)
        field += amp * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * sigma**2))
    peak = np.abs(field[breast]).max()
    if peak > 0:
        field = field / peak
    lx, ly = LESION_CENTER
    well = 1.5 * np.exp(-((xx - lx) ** 2 + (yy - ly) ** 2) / (2 * 0.014**2))
    field = np.clip(field - well, -1.0, 1.0)
    return 45.0 + 45.0 * field


def reference_tissue_map() -> TissueMap:
    grid = reference_grid()
    xx, yy = grid.center_mesh()
    cx, cy = BREAST_CENTER
    a, b = BREAST_SEMI_AXES
    a_skin, b_skin = a + SKIN_THICKNESS, b + SKIN_THICKNESS

    breast = ((xx - cx) / a) ** 2 + ((yy - cy) / b) ** 2 <= 1.0
    skin = (((xx - cx) / a_skin) ** 2 + ((yy - cy) / b_skin) ** 2 <= 1.0) & ~breast
    muscle = (xx <= MUSCLE_WALL_X) & ~breast & ~skin

    labels = np.full((grid.nx, grid.ny), BOLUS, dtype=np.int8)
    labels[muscle] = MUSCLE
    labels[skin] = SKIN
    labels[breast] = BREAST

    p = np.full_like(xx, -1.0)
    p[breast] = _fat_field(xx, yy, breast)[breast]
    return TissueMap(grid=grid, labels=labels, fat_fraction=p)


def reference_setup_dict() -> dict:
    """JSON-serializable experiment configuration for the reference scene."""
    grid = reference_grid()
    lesion = reference_lesion()
    return {
        "grid": {
            "nx": grid.nx,
            "ny": grid.ny,
            "dx": grid.dx,
            "dy": grid.dy,
            "origin": list(grid.origin),
        },
        "frequencies_hz": list(reference_frequencies().frequencies_hz),
        "antennas": [list(p) for p in reference_antennas().positions],
        "pml": {"thickness": PML_THICKNESS, "max_sigma": 80.0, "polynomial_order": 3},
        "phantom": "reference_phantom.txt",
        "lesion": {
            "center": list(lesion.center),
            "radius": lesion.radius,
            "tissue": {
                "eps_inf": lesion.tissue.eps_inf,
                "delta_eps": lesion.tissue.delta_eps,
                "tau": lesion.tissue.tau,
                "sigma_s": lesion.tissue.sigma_s,
            },
        },
        "segmentation_error_pct": 10.0,
        "snr_db": None,
        "seeds": {"segmentation": 101, "noise": 2024},
        "solver": {
            "lambda": None,
            "mu": None,
            "max_iters": 5000,
            "tol": 1e-7,
            "continuation_steps": 4,
            "lipschitz_safety": 1.05,
        },
        "success_ratio_threshold": 1.5,
        "output_dir": "out",
    }


def write_reference_files(outdir) -> tuple[Path, Path]:
    """Write the bundled phantom file and experiment config into `outdir`."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    phantom_path = outdir / "reference_phantom.txt"
    config_path = outdir / "reference_config.json"
    save_tissue_map(reference_tissue_map(), phantom_path)
    with open(config_path, "w") as fh:
        json.dump(reference_setup_dict(), fh, indent=2)
        fh.write("\n")
    return phantom_path, config_path
