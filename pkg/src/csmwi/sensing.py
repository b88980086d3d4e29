"""Born-linearized sensing operator and synthetic monostatic measurements.

Row (a, omega) of the operator maps a frequency-constant contrast vector on
the breast support to the scattered field an antenna measures:

    A[(a, omega), n] = G_b(r_a, r_n, omega) * k_b^2(r_n, omega)
                       * E_b(r_n, omega) * dx * dy

with G_b and E_b taken from the same background solve per antenna (the
configuration is monostatic, so transmitter and receiver coincide). Rows
are ordered antenna-major: m = antenna_index * n_freq + freq_index.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .fdfd import FieldSolution, PMLConfig, assemble, green_row, solve_source
from .model import AntennaArray, ComplexPermittivityMap, FrequencySet, Grid2D


@dataclass(frozen=True)
class SensingMatrix:
    """M x N Born operator plus the (antenna, omega) identity of each row."""

    a: np.ndarray
    row_index: tuple[tuple[int, float], ...]
    support: np.ndarray
    grid: Grid2D

    def __post_init__(self):
        a = np.asarray(self.a, dtype=complex)
        support = np.asarray(self.support, dtype=bool)
        if support.shape != (self.grid.nx, self.grid.ny):
            raise ConfigurationError("support mask shape does not match grid")
        n = int(support.sum())
        if a.ndim != 2 or a.shape != (len(self.row_index), n):
            raise ConfigurationError(
                f"operator shape {a.shape} does not match {len(self.row_index)} rows x {n} columns"
            )
        a.setflags(write=False)
        support.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "row_index", tuple((int(i), float(w)) for i, w in self.row_index))

    @property
    def m_rows(self) -> int:
        return self.a.shape[0]

    @property
    def n_columns(self) -> int:
        return self.a.shape[1]


@dataclass(frozen=True)
class MeasurementSet:
    """Complex measurement vector with per-row (antenna, omega) metadata."""

    y: np.ndarray
    row_index: tuple[tuple[int, float], ...]
    snr_db: float | None = None
    seed: int | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=complex)
        if y.ndim != 1 or y.shape[0] != len(self.row_index):
            raise ConfigurationError("measurement vector does not align with row metadata")
        if not np.all(np.isfinite(y)):
            raise ConfigurationError("measurement vector contains non-finite entries")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "row_index", tuple((int(i), float(w)) for i, w in self.row_index))


def _antenna_cells(antennas: AntennaArray, grid: Grid2D) -> list[tuple[int, int]]:
    cells = antennas.cells(grid)
    if len(set(cells)) != len(cells):
        raise ConfigurationError("two antennas fall on the same grid cell")
    return cells


def solve_antenna_fields(
    media: list[ComplexPermittivityMap],
    antennas: AntennaArray,
    freqs: FrequencySet,
    pml: PMLConfig,
) -> dict[tuple[int, int], FieldSolution]:
    """One FDFD solve per (antenna, frequency); factorizations reused per frequency.

    `media` holds one permittivity map per frequency, in frequency order.
    Returns a dict keyed by (antenna_index, freq_index).
    """
    if len(media) != len(freqs):
        raise ConfigurationError(f"expected {len(freqs)} media, got {len(media)}")
    grid = media[0].grid
    cells = _antenna_cells(antennas, grid)
    fields: dict[tuple[int, int], FieldSolution] = {}
    for fi, omega in enumerate(freqs.omegas):
        if media[fi].grid != grid:
            raise ConfigurationError("media live on different grids")
        op = assemble(media[fi], omega, pml)
        for ai, cell in enumerate(cells):
            fields[(ai, fi)] = solve_source(op, cell, antenna_index=ai)
    return fields


def measurement_rows(antennas: AntennaArray, freqs: FrequencySet) -> tuple[tuple[int, float], ...]:
    """Antenna-major (antenna_index, omega) row ordering shared by all outputs."""
    return tuple((ai, omega) for ai in range(len(antennas)) for omega in freqs.omegas)


def build_sensing_matrix(
    background_fields: dict[tuple[int, int], FieldSolution],
    green_rows: dict[tuple[int, int], np.ndarray],
    background_media: list[ComplexPermittivityMap],
    antennas: AntennaArray,
    freqs: FrequencySet,
    support: np.ndarray,
) -> SensingMatrix:
    """Assemble the Born operator from per-antenna background solves."""
    support = np.asarray(support, dtype=bool)
    grid = background_media[0].grid
    if support.shape != (grid.nx, grid.ny):
        raise ConfigurationError("support mask shape does not match grid")
    n = int(support.sum())
    kb2 = [m.k_squared()[support] for m in background_media]
    rows = []
    for ai in range(len(antennas)):
        for fi in range(len(freqs)):
            key = (ai, fi)
            if key not in background_fields or key not in green_rows:
                raise ConfigurationError(f"missing background field or Green row for {key}")
            e_b = background_fields[key].ez[support]
            g = np.asarray(green_rows[key], dtype=complex)
            if g.shape != (n,):
                raise ConfigurationError(f"Green row for {key} has shape {g.shape}, expected ({n},)")
            rows.append(g * kb2[fi] * e_b * grid.cell_area)
    return SensingMatrix(
        a=np.array(rows),
        row_index=measurement_rows(antennas, freqs),
        support=support,
        grid=grid,
    )


def synthesize_measurements(
    cancer_media: list[ComplexPermittivityMap],
    background_media: list[ComplexPermittivityMap],
    antennas: AntennaArray,
    freqs: FrequencySet,
    pml: PMLConfig,
    background_fields: dict[tuple[int, int], FieldSolution] | None = None,
) -> MeasurementSet:
    """Monostatic scattered-field data: cancer-total minus background-total
    at each antenna's own cell, per frequency.

    Both forward simulations keep the full dispersive media; pass
    `background_fields` to reuse solves already done for the operator.
    """
    if len(cancer_media) != len(freqs) or len(background_media) != len(freqs):
        raise ConfigurationError("media lists must have one map per frequency")
    grid = background_media[0].grid
    for cm, bm in zip(cancer_media, background_media):
        if cm.grid != bm.grid or cm.grid != grid:
            raise ConfigurationError("cancer and background media live on different grids")
        if cm.omega != bm.omega:
            raise ConfigurationError("cancer and background media disagree on frequency")
    if background_fields is None:
        background_fields = solve_antenna_fields(background_media, antennas, freqs, pml)
    cancer_fields = solve_antenna_fields(cancer_media, antennas, freqs, pml)
    cells = _antenna_cells(antennas, grid)
    y = []
    for ai, cell in enumerate(cells):
        for fi in range(len(freqs)):
            total = cancer_fields[(ai, fi)]
            background = background_fields[(ai, fi)]
            y.append(total.at_cell(cell) - background.at_cell(cell))
    return MeasurementSet(y=np.array(y), row_index=measurement_rows(antennas, freqs))


def breast_scatter_reference(
    background_media: list[ComplexPermittivityMap],
    bolus_media: list[ComplexPermittivityMap],
    antennas: AntennaArray,
    freqs: FrequencySet,
    pml: PMLConfig,
    background_fields: dict[tuple[int, int], FieldSolution] | None = None,
) -> np.ndarray:
    """Fields scattered by the entire breast: healthy-total minus bolus-only-total.

    This is the signal whose norm defines the measurement SNR; it does not
    depend on any lesion. Pass `background_fields` to reuse healthy-medium
    solves already done for the operator.
    """
    if len(background_media) != len(freqs) or len(bolus_media) != len(freqs):
        raise ConfigurationError("media lists must have one map per frequency")
    grid = background_media[0].grid
    for hm, bm in zip(background_media, bolus_media):
        if hm.grid != grid or bm.grid != grid:
            raise ConfigurationError("media live on different grids")
        if hm.omega != bm.omega:
            raise ConfigurationError("healthy and bolus media disagree on frequency")
    if background_fields is None:
        background_fields = solve_antenna_fields(background_media, antennas, freqs, pml)
    bolus_fields = solve_antenna_fields(bolus_media, antennas, freqs, pml)
    cells = _antenna_cells(antennas, grid)
    s = []
    for ai, cell in enumerate(cells):
        for fi in range(len(freqs)):
            s.append(
                background_fields[(ai, fi)].at_cell(cell) - bolus_fields[(ai, fi)].at_cell(cell)
            )
    return np.array(s)


def add_noise(
    m: MeasurementSet,
    reference: np.ndarray,
    snr_db: float | None,
    seed: int,
) -> MeasurementSet:
    """Add circular complex Gaussian noise at an SNR defined against `reference`.

    Total noise power is ||reference||^2 / 10^(snr_db/10), spread evenly over
    the M entries. `snr_db=None` (or +inf) returns the measurements unchanged.
    """
    if snr_db is None or math.isinf(snr_db):
        return m
    if not math.isfinite(snr_db):
        raise ConfigurationError(f"snr_db must be finite or None, got {snr_db}")
    reference = np.asarray(reference, dtype=complex)
    total_power = float(np.vdot(reference, reference).real) / 10.0 ** (snr_db / 10.0)
    per_entry = total_power / len(m.y)
    rng = np.random.default_rng(seed)
    scale = math.sqrt(per_entry / 2.0)
    eta = scale * (rng.standard_normal(len(m.y)) + 1j * rng.standard_normal(len(m.y)))
    return MeasurementSet(y=m.y + eta, row_index=m.row_index, snr_db=snr_db, seed=seed)


def write_measurements_csv(m: MeasurementSet, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["antenna", "frequency_hz", "real", "imag"])
        for (ai, omega), value in zip(m.row_index, m.y):
            writer.writerow([ai, repr(omega / (2 * math.pi)), repr(float(value.real)), repr(float(value.imag))])


def read_measurements_csv(path) -> MeasurementSet:
    rows = []
    y = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["antenna", "frequency_hz", "real", "imag"]:
            raise ConfigurationError(f"{path}: unexpected measurement CSV header {header}")
        for rec in reader:
            rows.append((int(rec[0]), 2 * math.pi * float(rec[1])))
            y.append(complex(float(rec[2]), float(rec[3])))
    return MeasurementSet(y=np.array(y), row_index=tuple(rows))


def write_sensing_matrix_csv(sm: SensingMatrix, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["antenna", "frequency_hz", "column", "real", "imag"])
        for (ai, omega), row in zip(sm.row_index, sm.a):
            f_hz = repr(omega / (2 * math.pi))
            for col, value in enumerate(row):
                writer.writerow([ai, f_hz, col, repr(float(value.real)), repr(float(value.imag))])


def read_sensing_matrix_csv(path, support: np.ndarray, grid: Grid2D) -> SensingMatrix:
    support = np.asarray(support, dtype=bool)
    n = int(support.sum())
    row_index: list[tuple[int, float]] = []
    rows: list[list[complex]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["antenna", "frequency_hz", "column", "real", "imag"]:
            raise ConfigurationError(f"{path}: unexpected sensing CSV header {header}")
        for rec in reader:
            key = (int(rec[0]), 2 * math.pi * float(rec[1]))
            col = int(rec[2])
            if not row_index or key != row_index[-1]:
                row_index.append(key)
                rows.append([])
            if col != len(rows[-1]):
                raise ConfigurationError(f"{path}: out-of-order column {col}")
            rows[-1].append(complex(float(rec[3]), float(rec[4])))
    a = np.array(rows, dtype=complex)
    if a.shape[1] != n:
        raise ConfigurationError(f"{path}: {a.shape[1]} columns, support has {n} cells")
    return SensingMatrix(a=a, row_index=tuple(row_index), support=support, grid=grid)
