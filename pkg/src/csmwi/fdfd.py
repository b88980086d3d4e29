"""2D scalar-Helmholtz FDFD solver with a complex-stretched PML.

Discretizes (d/dx (1/s_x) d/dx)/s_x + (d/dy (1/s_y) d/dy)/s_y + k^2(r) on
cell centers with a 5-point stencil, where s = 1 + j*sigma(depth) ramps
polynomially inside the PML frame and equals 1 in the physical region.
Fields follow the exp(-j*omega*t) convention, so a unit line source at a
cell produces (j/4) * H0^(1)(k d) in a homogeneous medium.

One sparse LU factorization is computed per (medium, omega) operator and
reused for every source.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, SolverError
from .model import ComplexPermittivityMap, Grid2D

_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class PMLConfig:
    """Absorbing frame: thickness in cells, normalized peak conductivity,
    polynomial grading order."""

    thickness: int = 10
    max_sigma: float = 80.0
    polynomial_order: int = 3

    def __post_init__(self):
        if self.thickness < 8:
            raise ConfigurationError(f"PML thickness must be >= 8 cells, got {self.thickness}")
        if self.polynomial_order not in (2, 3, 4):
            raise ConfigurationError(
                f"PML polynomial order must be 2, 3, or 4, got {self.polynomial_order}"
            )
        if self.max_sigma <= 0:
            raise ConfigurationError(f"PML max_sigma must be positive, got {self.max_sigma}")


def _stretch(u: np.ndarray, n: int, pml: PMLConfig) -> np.ndarray:
    """Complex stretch factor s at (possibly half-integer) cell coordinate u."""
    t = float(pml.thickness)
    depth_left = (t - 0.5) - u
    depth_right = u - (n - 1 - (t - 0.5))
    depth = np.maximum(depth_left, depth_right) / t
    depth = np.clip(depth, 0.0, 1.0)
    return 1.0 + 1j * pml.max_sigma * depth**pml.polynomial_order


@dataclass
class HelmholtzOperator:
    """Assembled sparse operator for one medium at one frequency."""

    matrix: sp.csc_matrix
    grid: Grid2D
    omega: float
    pml: PMLConfig
    _lu: spla.SuperLU | None = field(default=None, repr=False, compare=False)

    @property
    def lu(self) -> spla.SuperLU:
        if self._lu is None:
            try:
                self._lu = spla.splu(self.matrix)
            except RuntimeError as exc:
                raise SolverError(f"sparse factorization failed: {exc}") from exc
        return self._lu

    def in_pml(self, i: int, j: int) -> bool:
        t = self.pml.thickness
        return i < t or i >= self.grid.nx - t or j < t or j >= self.grid.ny - t

    def physical_mask(self) -> np.ndarray:
        t = self.pml.thickness
        mask = np.zeros((self.grid.nx, self.grid.ny), dtype=bool)
        mask[t : self.grid.nx - t, t : self.grid.ny - t] = True
        return mask


@dataclass(frozen=True)
class FieldSolution:
    """Complex E_z over the grid from one point source at one frequency."""

    grid: Grid2D
    ez: np.ndarray
    source_cell: tuple[int, int]
    omega: float
    antenna_index: int | None = None

    def __post_init__(self):
        ez = np.asarray(self.ez, dtype=complex)
        if ez.shape != (self.grid.nx, self.grid.ny):
            raise ConfigurationError("field shape does not match grid")
        ez.setflags(write=False)
        object.__setattr__(self, "ez", ez)

    def at_cell(self, cell: tuple[int, int]) -> complex:
        return complex(self.ez[cell[0], cell[1]])


def assemble(
    eps_map: ComplexPermittivityMap, omega: float, pml: PMLConfig
) -> HelmholtzOperator:
    """Build the stretched 5-point Helmholtz matrix for one medium at omega."""
    if eps_map.omega != omega:
        raise ConfigurationError(
            f"permittivity map was evaluated at omega={eps_map.omega}, not {omega}"
        )
    grid = eps_map.grid
    nx, ny, dx, dy = grid.nx, grid.ny, grid.dx, grid.dy
    if nx < 2 * pml.thickness + 8 or ny < 2 * pml.thickness + 8:
        raise ConfigurationError(
            f"grid {nx}x{ny} too small for a {pml.thickness}-cell PML plus interior"
        )

    sx_c = _stretch(np.arange(nx, dtype=float), nx, pml)
    sy_c = _stretch(np.arange(ny, dtype=float), ny, pml)
    sx_f = _stretch(np.arange(nx + 1, dtype=float) - 0.5, nx, pml)  # face i-1/2
    sy_f = _stretch(np.arange(ny + 1, dtype=float) - 0.5, ny, pml)

    # Coefficient of neighbor (i+1, j) in row (i, j), etc. Outer-boundary
    # neighbors are homogeneous Dirichlet ghosts: their link is dropped but
    # the center term keeps the full stencil sum.
    c_east = (1.0 / (sx_c[:, None] * sx_f[1:, None] * dx**2)) * np.ones((1, ny))
    c_west = (1.0 / (sx_c[:, None] * sx_f[:-1, None] * dx**2)) * np.ones((1, ny))
    c_north = np.ones((nx, 1)) * (1.0 / (sy_c[None, :] * sy_f[None, 1:] * dy**2))
    c_south = np.ones((nx, 1)) * (1.0 / (sy_c[None, :] * sy_f[None, :-1] * dy**2))
    c_center = -(c_east + c_west + c_north + c_south) + eps_map.k_squared()

    idx = np.arange(nx * ny).reshape(nx, ny)
    rows = [idx.ravel()]
    cols = [idx.ravel()]
    data = [c_center.ravel()]

    rows.append(idx[:-1, :].ravel())
    cols.append(idx[1:, :].ravel())
    data.append(c_east[:-1, :].ravel())

    rows.append(idx[1:, :].ravel())
    cols.append(idx[:-1, :].ravel())
    data.append(c_west[1:, :].ravel())

    rows.append(idx[:, :-1].ravel())
    cols.append(idx[:, 1:].ravel())
    data.append(c_north[:, :-1].ravel())

    rows.append(idx[:, 1:].ravel())
    cols.append(idx[:, :-1].ravel())
    data.append(c_south[:, 1:].ravel())

    matrix = sp.csc_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nx * ny, nx * ny),
    )
    return HelmholtzOperator(matrix=matrix, grid=grid, omega=omega, pml=pml)


def solve_source(
    op: HelmholtzOperator,
    source_cell: tuple[int, int],
    antenna_index: int | None = None,
) -> FieldSolution:
    """Field of a unit line source at `source_cell`: solves op*E = -delta/(dx*dy)."""
    i, j = source_cell
    grid = op.grid
    if not (0 <= i < grid.nx and 0 <= j < grid.ny):
        raise ConfigurationError(f"source cell ({i}, {j}) outside the grid")
    if op.in_pml(i, j):
        raise ConfigurationError(f"source cell ({i}, {j}) lies inside the PML")
    rhs = np.zeros(grid.n_cells, dtype=complex)
    rhs[grid.flat(i, j)] = -1.0 / grid.cell_area
    ez = op.lu.solve(rhs)
    if not np.all(np.isfinite(ez)):
        raise SolverError("field solve produced non-finite values")
    residual = np.linalg.norm(op.matrix @ ez - rhs) / np.linalg.norm(rhs)
    if residual > _RESIDUAL_TOL:
        raise SolverError(
            f"field solve residual {residual:.3e} exceeds {_RESIDUAL_TOL:.0e}; "
            "system is likely ill-conditioned"
        )
    return FieldSolution(
        grid=grid,
        ez=ez.reshape(grid.nx, grid.ny),
        source_cell=(i, j),
        omega=op.omega,
        antenna_index=antenna_index,
    )


def green_row(
    op_background: HelmholtzOperator,
    antenna_cell: tuple[int, int],
    support: np.ndarray,
    solution: FieldSolution | None = None,
) -> np.ndarray:
    """Background Green's function from the antenna to every support cell.

    By reciprocity this is the antenna's own incident-field solve sampled on
    the support; pass that solve as `solution` to avoid recomputing it.
    """
    support = np.asarray(support, dtype=bool)
    grid = op_background.grid
    if support.shape != (grid.nx, grid.ny):
        raise ConfigurationError("support mask shape does not match grid")
    if support[antenna_cell[0], antenna_cell[1]]:
        raise ConfigurationError(f"antenna cell {antenna_cell} lies inside the support")
    if solution is None:
        solution = solve_source(op_background, antenna_cell)
    elif solution.source_cell != tuple(antenna_cell) or solution.omega != op_background.omega:
        raise ConfigurationError("provided solution does not match the requested antenna/omega")
    return solution.ez[support]


def scattered_field(total: FieldSolution, background: FieldSolution) -> complex:
    """Scattered field E - E_b sampled at the (monostatic) source antenna cell."""
    if total.grid != background.grid:
        raise ConfigurationError("field solutions live on different grids")
    if total.omega != background.omega:
        raise ConfigurationError("field solutions were computed at different frequencies")
    if total.source_cell != background.source_cell:
        raise ConfigurationError("field solutions come from different source antennas")
    return total.at_cell(total.source_cell) - background.at_cell(background.source_cell)


def pml_attenuation_db(field_solution: FieldSolution, pml: PMLConfig) -> float:
    """Peak physical-region field over peak outermost-PML-ring field, in dB."""
    ez = np.abs(field_solution.ez)
    nx, ny = field_solution.grid.nx, field_solution.grid.ny
    t = pml.thickness
    physical_peak = ez[t : nx - t, t : ny - t].max()
    ring = np.concatenate([ez[0, :], ez[-1, :], ez[:, 0], ez[:, -1]])
    return 20.0 * np.log10(physical_peak / ring.max())


def export_field_csv(field_solution: FieldSolution, path) -> None:
    """Field snapshot as rows of (flat cell index, real, imag)."""
    ez = field_solution.ez.reshape(-1)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell", "real", "imag"])
        for n, value in enumerate(ez):
            writer.writerow([n, repr(float(value.real)), repr(float(value.imag))])
