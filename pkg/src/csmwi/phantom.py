"""Heterogeneous breast media built from a fat-fraction segmentation map.

The tissue map assigns each grid cell one of four labels (bolus, skin,
muscle, breast) plus a fat percentage p on breast cells. Breast cells mix
fatty and fibroglandular single-pole Debye models by volume fraction; the
other labels use fixed Debye models. A cancerous medium is produced by
stamping a lesion disk into an otherwise healthy map.

Phantom file format (plain text): optional '#' comment lines, then a header
line ``nx ny dx dy origin_x origin_y``, then nx*ny records ``label p`` in
flat cell order n = i*ny + j. Label codes: 0=bolus, 1=skin, 2=muscle,
3=breast. p is the fat percentage in [0, 100] for breast cells and -1
otherwise.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import PhantomFormatError, PlacementError
from .model import EPS0, ComplexPermittivityMap, Grid2D

BOLUS, SKIN, MUSCLE, BREAST = 0, 1, 2, 3
LABEL_NAMES = {BOLUS: "bolus", SKIN: "skin", MUSCLE: "muscle", BREAST: "breast"}


@dataclass(frozen=True)
class DebyeTissue:
    """Single-pole Debye dielectric: eps_inf + delta_eps/(1 - j*omega*tau) + j*sigma_s/(omega*eps0)."""

    eps_inf: float
    delta_eps: float
    tau: float  # relaxation time (s)
    sigma_s: float  # static conductivity (S/m)

    def __post_init__(self):
        if self.eps_inf < 1 or self.delta_eps < 0 or self.tau <= 0 or self.sigma_s < 0:
            raise ValueError(f"unphysical Debye parameters: {self}")

    def permittivity(self, omega: float) -> complex:
        if omega <= 0:
            raise ValueError("omega must be positive")
        return (
            self.eps_inf
            + self.delta_eps / (1.0 - 1j * omega * self.tau)
            + 1j * self.sigma_s / (omega * EPS0)
        )


# Default constitutive models (configurable; single-pole Debye fits for the
# 0.5-0.7 GHz band, bolus non-dispersive).
FAT_TISSUE = DebyeTissue(eps_inf=3.14, delta_eps=1.61, tau=14.0e-12, sigma_s=0.036)
FIBROGLANDULAR_TISSUE = DebyeTissue(eps_inf=13.81, delta_eps=35.6, tau=14.0e-12, sigma_s=0.74)
SKIN_TISSUE = DebyeTissue(eps_inf=15.3, delta_eps=24.8, tau=13.0e-12, sigma_s=0.74)
MUSCLE_TISSUE = DebyeTissue(eps_inf=21.7, delta_eps=33.2, tau=13.2e-12, sigma_s=0.89)
BOLUS_MATERIAL = DebyeTissue(eps_inf=10.0, delta_eps=0.0, tau=1.0e-12, sigma_s=0.05)
# ~10% complex contrast against pure fibroglandular tissue at 600 MHz
LESION_TISSUE = DebyeTissue(eps_inf=15.2, delta_eps=39.2, tau=14.0e-12, sigma_s=0.81)


@dataclass(frozen=True)
class TissueLibrary:
    """Constitutive models for the four segmented tissue classes."""

    bolus: DebyeTissue = BOLUS_MATERIAL
    skin: DebyeTissue = SKIN_TISSUE
    muscle: DebyeTissue = MUSCLE_TISSUE
    fat: DebyeTissue = FAT_TISSUE
    fibroglandular: DebyeTissue = FIBROGLANDULAR_TISSUE


@dataclass(frozen=True)
class LesionSpec:
    """Disk-shaped lesion: center/radius in meters plus its dielectric model."""

    center: tuple[float, float]
    radius: float
    tissue: DebyeTissue = LESION_TISSUE

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("lesion radius must be positive")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))


@dataclass(frozen=True)
class TissueMap:
    """Per-cell tissue label plus fat percentage on breast cells."""

    grid: Grid2D
    labels: np.ndarray
    fat_fraction: np.ndarray  # percent on breast cells, -1 elsewhere

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int8)
        p = np.asarray(self.fat_fraction, dtype=float)
        shape = (self.grid.nx, self.grid.ny)
        if labels.shape != shape or p.shape != shape:
            raise PhantomFormatError(
                f"label/fat arrays {labels.shape}/{p.shape} do not match grid {shape}"
            )
        bad = ~np.isin(labels, (BOLUS, SKIN, MUSCLE, BREAST))
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise PhantomFormatError(f"unknown label {labels[i, j]} at cell ({i}, {j})")
        breast = labels == BREAST
        invalid = breast & ~(np.isfinite(p) & (p >= 0.0) & (p <= 100.0))
        if invalid.any():
            i, j = np.argwhere(invalid)[0]
            raise PhantomFormatError(
                f"fat fraction {p[i, j]} out of [0, 100] at breast cell ({i}, {j})"
            )
        p = p.copy()
        p[~breast] = -1.0
        _check_skin_contour(labels)
        labels.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "fat_fraction", p)

    @property
    def breast_mask(self) -> np.ndarray:
        return self.labels == BREAST

    @property
    def n_breast_cells(self) -> int:
        return int(self.breast_mask.sum())


def _check_skin_contour(labels: np.ndarray) -> None:
    """Every 4-neighbor of a breast cell must be breast or skin, and breast
    cells may not touch the grid boundary; this makes the skin a closed
    contour around the breast region."""
    breast = labels == BREAST
    if not breast.any():
        return
    edge = np.zeros_like(breast)
    edge[0, :] = edge[-1, :] = edge[:, 0] = edge[:, -1] = True
    if (breast & edge).any():
        i, j = np.argwhere(breast & edge)[0]
        raise PhantomFormatError(f"breast cell ({i}, {j}) lies on the grid boundary")
    ok = breast | (labels == SKIN)
    for axis, shift in ((0, 1), (0, -1), (1, 1), (1, -1)):
        neighbor_ok = np.roll(ok, shift, axis=axis)
        exposed = breast & ~neighbor_ok
        if exposed.any():
            i, j = np.argwhere(exposed)[0]
            raise PhantomFormatError(
                f"breast cell ({i}, {j}) touches non-skin tissue; skin contour is open"
            )


def composite_permittivity(
    p: float, omega: float, fat: DebyeTissue, fibro: DebyeTissue
) -> complex:
    """Volume-fraction mix of fat and fibroglandular models at fat percentage p."""
    if not (0.0 <= p <= 100.0):
        raise ValueError(f"fat percentage {p} outside [0, 100]")
    w = p / 100.0
    return w * fat.permittivity(omega) + (1.0 - w) * fibro.permittivity(omega)


def corrupt_fat_map(t: TissueMap, amplitude: float, seed: int) -> TissueMap:
    """Add i.i.d. uniform(+-amplitude) noise to breast fat percentages.

    Noise is in absolute percentage points; results are clamped to [0, 100].
    Labels are untouched and the draw is deterministic for a given seed.
    """
    if amplitude < 0:
        raise ValueError("noise amplitude must be non-negative")
    p = np.array(t.fat_fraction, copy=True)
    if amplitude > 0:
        rng = np.random.default_rng(seed)
        breast = t.breast_mask
        noise = rng.uniform(-amplitude, amplitude, size=int(breast.sum()))
        p[breast] = np.clip(p[breast] + noise, 0.0, 100.0)
    return TissueMap(grid=t.grid, labels=t.labels, fat_fraction=p)


def build_background(
    t: TissueMap, omega: float, library: TissueLibrary | None = None
) -> ComplexPermittivityMap:
    """Permittivity map of the healthy medium at one frequency."""
    lib = library or TissueLibrary()
    eps = np.empty((t.grid.nx, t.grid.ny), dtype=complex)
    eps[t.labels == BOLUS] = lib.bolus.permittivity(omega)
    eps[t.labels == SKIN] = lib.skin.permittivity(omega)
    eps[t.labels == MUSCLE] = lib.muscle.permittivity(omega)
    breast = t.breast_mask
    if breast.any():
        w = t.fat_fraction[breast] / 100.0
        eps[breast] = w * lib.fat.permittivity(omega) + (1.0 - w) * lib.fibroglandular.permittivity(omega)
    return ComplexPermittivityMap(grid=t.grid, eps=eps, omega=omega)


def rasterize_disk(grid: Grid2D, center: tuple[float, float], radius: float) -> np.ndarray:
    """Boolean mask of cells whose center lies inside the disk."""
    xx, yy = grid.center_mesh()
    return (xx - center[0]) ** 2 + (yy - center[1]) ** 2 <= radius**2


def insert_lesion(
    t: TissueMap,
    eps_map: ComplexPermittivityMap,
    lesion: LesionSpec,
    omega: float,
) -> ComplexPermittivityMap:
    """Stamp the lesion permittivity into `eps_map` over the rasterized disk."""
    if eps_map.grid != t.grid:
        raise PlacementError("tissue map and permittivity map live on different grids")
    disk = rasterize_disk(t.grid, lesion.center, lesion.radius)
    if not disk.any():
        warnings.warn(
            f"lesion of radius {lesion.radius} m at {lesion.center} covers no cell centers",
            stacklevel=2,
        )
        return eps_map
    outside = disk & ~t.breast_mask
    if outside.any():
        i, j = np.argwhere(outside)[0]
        raise PlacementError(
            f"lesion cell ({i}, {j}) falls on {LABEL_NAMES[int(t.labels[i, j])]}, not breast"
        )
    eps = eps_map.eps.copy()
    eps[disk] = lesion.tissue.permittivity(omega)
    return ComplexPermittivityMap(grid=t.grid, eps=eps, omega=omega)


def load_tissue_map(path) -> TissueMap:
    """Parse and validate a phantom file (format in the module docstring)."""
    path = Path(path)
    try:
        raw = path.read_text()
    except OSError as exc:
        raise PhantomFormatError(f"cannot read phantom file {path}: {exc}") from exc
    lines = [ln.strip() for ln in raw.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise PhantomFormatError(f"{path}: empty phantom file")
    header = lines[0].split()
    if len(header) != 6:
        raise PhantomFormatError(f"{path}: header must be 'nx ny dx dy ox oy', got {lines[0]!r}")
    try:
        nx, ny = int(header[0]), int(header[1])
        dx, dy, ox, oy = (float(v) for v in header[2:])
    except ValueError as exc:
        raise PhantomFormatError(f"{path}: malformed header: {exc}") from exc
    grid = Grid2D(nx=nx, ny=ny, dx=dx, dy=dy, origin=(ox, oy))
    records = lines[1:]
    if len(records) != grid.n_cells:
        raise PhantomFormatError(
            f"{path}: expected {grid.n_cells} cell records, found {len(records)}"
        )
    labels = np.empty(grid.n_cells, dtype=np.int8)
    p = np.empty(grid.n_cells, dtype=float)
    for n, rec in enumerate(records):
        parts = rec.split()
        if len(parts) != 2:
            raise PhantomFormatError(f"{path}: record {n} must be 'label p', got {rec!r}")
        try:
            labels[n] = int(parts[0])
            p[n] = float(parts[1])
        except ValueError as exc:
            raise PhantomFormatError(f"{path}: record {n} malformed: {exc}") from exc
    labels = labels.reshape(grid.nx, grid.ny)
    p = p.reshape(grid.nx, grid.ny)
    return TissueMap(grid=grid, labels=labels, fat_fraction=p)


def save_tissue_map(t: TissueMap, path) -> None:
    """Write a phantom file readable by `load_tissue_map`."""
    grid = t.grid
    with open(path, "w") as fh:
        fh.write("# csmwi phantom: label codes 0=bolus 1=skin 2=muscle 3=breast\n")
        fh.write(
            f"{grid.nx} {grid.ny} {grid.dx!r} {grid.dy!r} {grid.origin[0]!r} {grid.origin[1]!r}\n"
        )
        labels = t.labels.reshape(-1)
        p = t.fat_fraction.reshape(-1)
        for lab, frac in zip(labels, p):
            fh.write(f"{int(lab)} {float(frac)!r}\n")
