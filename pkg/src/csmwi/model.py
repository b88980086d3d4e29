"""Shared domain types: grid geometry, frequencies, antennas, and contrast algebra.

Conventions used throughout the package:

* time dependence exp(-j*omega*t), so a passive medium has Im(eps) >= 0;
* complex relative permittivity eps = eps_r + j*sigma/(omega*EPS0);
* grids are indexed [i, j] with cell-center coordinates
  (origin_x + i*dx, origin_y + j*dy), flattened as n = i*ny + j.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DegenerateBackgroundError

EPS0 = 8.8541878128e-12  # vacuum permittivity (F/m)
MU0 = 1.25663706212e-6  # vacuum permeability (H/m)
C0 = 1.0 / math.sqrt(EPS0 * MU0)  # speed of light (m/s)

# Slack for "physically realizable" checks; solver feasibility is only
# guaranteed to 1e-12, so validation cannot demand exact inequalities.
_REALIZABLE_TOL = 1e-9


@dataclass(frozen=True)
class Grid2D:
    """Uniform 2D cell grid. `origin` is the physical center of cell (0, 0)."""

    nx: int
    ny: int
    dx: float
    dy: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 8 or self.ny < 8:
            raise ConfigurationError(f"grid must be at least 8x8 cells, got {self.nx}x{self.ny}")
        if self.dx <= 0 or self.dy <= 0:
            raise ConfigurationError(f"cell size must be positive, got dx={self.dx}, dy={self.dy}")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    def cell_center(self, i: int, j: int) -> tuple[float, float]:
        return (self.origin[0] + i * self.dx, self.origin[1] + j * self.dy)

    def x_centers(self) -> np.ndarray:
        return self.origin[0] + self.dx * np.arange(self.nx)

    def y_centers(self) -> np.ndarray:
        return self.origin[1] + self.dy * np.arange(self.ny)

    def center_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """(nx, ny) arrays of cell-center x and y coordinates."""
        return np.meshgrid(self.x_centers(), self.y_centers(), indexing="ij")

    def index_of(self, point) -> tuple[int, int]:
        """Indices of the cell whose center is nearest to `point`."""
        i = int(round((point[0] - self.origin[0]) / self.dx))
        j = int(round((point[1] - self.origin[1]) / self.dy))
        if not (0 <= i < self.nx and 0 <= j < self.ny):
            raise ConfigurationError(f"point {tuple(point)} lies outside the grid")
        return i, j

    def flat(self, i: int, j: int) -> int:
        return i * self.ny + j

    def unflat(self, n: int) -> tuple[int, int]:
        return divmod(n, self.ny)


@dataclass(frozen=True)
class FrequencySet:
    """Operating frequencies, stored in Hz; angular frequencies via `omegas`."""

    frequencies_hz: tuple[float, ...]

    def __post_init__(self):
        freqs = tuple(float(f) for f in self.frequencies_hz)
        if not freqs:
            raise ConfigurationError("frequency set is empty")
        if any(f <= 0 for f in freqs):
            raise ConfigurationError("frequencies must be positive")
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise ConfigurationError("frequencies must be strictly increasing")
        object.__setattr__(self, "frequencies_hz", freqs)

    @classmethod
    def default(cls) -> "FrequencySet":
        return cls((500e6, 600e6, 700e6))

    @property
    def omegas(self) -> tuple[float, ...]:
        return tuple(2.0 * math.pi * f for f in self.frequencies_hz)

    @property
    def center_omega(self) -> float:
        """Angular frequency at the middle of the band."""
        omegas = self.omegas
        return omegas[len(omegas) // 2]

    def __len__(self) -> int:
        return len(self.frequencies_hz)


@dataclass(frozen=True)
class AntennaArray:
    """Point line-source antennas; each both transmits and receives."""

    positions: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pos = tuple((float(p[0]), float(p[1])) for p in self.positions)
        if not pos:
            raise ConfigurationError("antenna array is empty")
        object.__setattr__(self, "positions", pos)

    @classmethod
    def default_count(cls) -> int:
        return 6

    def __len__(self) -> int:
        return len(self.positions)

    def cells(self, grid: Grid2D) -> list[tuple[int, int]]:
        """Grid cell of each antenna; raises if any lies outside the grid."""
        return [grid.index_of(p) for p in self.positions]


@dataclass(frozen=True)
class ComplexPermittivityMap:
    """Per-cell complex relative permittivity at a single angular frequency."""

    grid: Grid2D
    eps: np.ndarray
    omega: float

    def __post_init__(self):
        eps = np.asarray(self.eps, dtype=complex)
        if eps.shape != (self.grid.nx, self.grid.ny):
            raise ConfigurationError(
                f"eps shape {eps.shape} does not match grid {(self.grid.nx, self.grid.ny)}"
            )
        if self.omega <= 0:
            raise ConfigurationError("omega must be positive")
        if np.min(eps.real) < 1.0 - _REALIZABLE_TOL or np.min(eps.imag) < -_REALIZABLE_TOL:
            raise ConfigurationError(
                "permittivity map is not physically realizable: "
                f"min Re={np.min(eps.real):.6g}, min Im={np.min(eps.imag):.6g}"
            )
        eps.setflags(write=False)
        object.__setattr__(self, "eps", eps)

    def k_squared(self) -> np.ndarray:
        """Squared complex wavenumber omega^2 * mu0 * eps0 * eps per cell."""
        return (self.omega**2 * MU0 * EPS0) * self.eps

    def same_layout(self, other: "ComplexPermittivityMap") -> bool:
        return self.grid == other.grid and self.omega == other.omega


@dataclass(frozen=True)
class ContrastImage:
    """Complex contrast over the breast-interior support cells."""

    grid: Grid2D
    support: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=bool)
        x = np.asarray(self.x, dtype=complex)
        if support.shape != (self.grid.nx, self.grid.ny):
            raise ConfigurationError(
                f"support shape {support.shape} does not match grid "
                f"{(self.grid.nx, self.grid.ny)}"
            )
        n = int(support.sum())
        if x.shape != (n,):
            raise ConfigurationError(f"contrast vector has {x.shape} entries, support has {n}")
        support.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "x", x)

    @property
    def n_unknowns(self) -> int:
        return int(self.support.sum())

    def to_grid(self) -> np.ndarray:
        """Full (nx, ny) complex array, zero outside the support."""
        full = np.zeros((self.grid.nx, self.grid.ny), dtype=complex)
        full[self.support] = self.x
        return full


def contrast_from_permittivity(
    eps: ComplexPermittivityMap,
    eps_b: ComplexPermittivityMap,
    support: np.ndarray,
) -> ContrastImage:
    """Contrast x = (eps - eps_b)/eps_b on the support cells."""
    if eps.grid != eps_b.grid:
        raise ConfigurationError("permittivity maps live on different grids")
    if eps.omega != eps_b.omega:
        raise ConfigurationError(
            f"permittivity maps evaluated at different frequencies "
            f"({eps.omega} vs {eps_b.omega})"
        )
    support = np.asarray(support, dtype=bool)
    if support.shape != eps.eps.shape:
        raise ConfigurationError("support mask shape does not match grid")
    eb = eps_b.eps[support]
    if np.any(eb == 0):
        raise DegenerateBackgroundError("background permittivity is zero on the support")
    x = (eps.eps[support] - eb) / eb
    return ContrastImage(grid=eps.grid, support=support, x=x)


def permittivity_from_contrast(
    x: ContrastImage,
    eps_b: ComplexPermittivityMap,
) -> ComplexPermittivityMap:
    """Inverse of `contrast_from_permittivity`: eps = eps_b*x + eps_b on support."""
    if x.grid != eps_b.grid:
        raise ConfigurationError("contrast image and background live on different grids")
    eps = eps_b.eps.copy()
    eps[x.support] = eps_b.eps[x.support] * (1.0 + x.x)
    return ComplexPermittivityMap(grid=eps_b.grid, eps=eps, omega=eps_b.omega)


def write_contrast_csv(img: ContrastImage, path) -> None:
    """Contrast image as rows of (flat cell index, real, imag), support cells only."""
    indices = np.flatnonzero(img.support.reshape(-1))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell", "real", "imag"])
        for n, value in zip(indices, img.x):
            writer.writerow([int(n), repr(float(value.real)), repr(float(value.imag))])


def read_contrast_csv(path, grid: Grid2D) -> ContrastImage:
    """Inverse of `write_contrast_csv`; the support is rebuilt from the indices."""
    support = np.zeros(grid.n_cells, dtype=bool)
    values: list[complex] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["cell", "real", "imag"]:
            raise ConfigurationError(f"{path}: unexpected contrast CSV header {header}")
        last = -1
        for rec in reader:
            n = int(rec[0])
            if not (last < n < grid.n_cells):
                raise ConfigurationError(f"{path}: cell index {n} out of order or range")
            last = n
            support[n] = True
            values.append(complex(float(rec[1]), float(rec[2])))
    return ContrastImage(
        grid=grid, support=support.reshape(grid.nx, grid.ny), x=np.array(values)
    )


def setup_from_json(source) -> tuple[Grid2D, FrequencySet, AntennaArray]:
    """Read grid, frequency, and antenna configuration from JSON.

    `source` may be a path to a JSON file or an already-parsed dict.
    Coordinates are meters, frequencies Hz.
    """
    cfg = source
    if isinstance(source, (str, Path)):
        with open(source) as fh:
            cfg = json.load(fh)
    try:
        g = cfg["grid"]
        grid = Grid2D(
            nx=int(g["nx"]),
            ny=int(g["ny"]),
            dx=float(g["dx"]),
            dy=float(g["dy"]),
            origin=tuple(g.get("origin", (0.0, 0.0))),
        )
        freqs = FrequencySet(tuple(cfg["frequencies_hz"]))
        antennas = AntennaArray(tuple((p[0], p[1]) for p in cfg["antennas"]))
    except (KeyError, TypeError, IndexError) as exc:
        raise ConfigurationError(f"malformed setup configuration: {exc}") from exc
    antennas.cells(grid)  # raises if any antenna falls outside the grid
    return grid, freqs, antennas
