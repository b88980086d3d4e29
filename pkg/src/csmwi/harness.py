"""End-to-end experiments: phantom file to reconstructed contrast image.

A run walks the measurement chain one named stage at a time: load and
validate the phantom, build the (optionally corrupted) segmentation prior
and the true healthy/cancerous media, solve the background fields,
assemble the Born operator, synthesize monostatic measurements, add noise
at a prescribed SNR, invert, and score lesion localization. Every random
draw is owned by an explicit seed from the configuration, so reruns are
bit-identical.

The four stock scenarios vary only segmentation error and measurement SNR:
A = perfect segmentation / noiseless, B = 10% error / noiseless,
C = 10% error / 49 dB, D = 10% error / 43 dB.
"""

from __future__ import annotations

import json
import math
from contextlib import contextmanager
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.ndimage as ndi

from .errors import ConfigurationError, PipelineError
from .fdfd import PMLConfig, assemble, green_row, pml_attenuation_db, solve_source
from .inversion import (
    FeasibleRegion,
    SolverConfig,
    gradient,
    huber,
    nesterov_solve,
    objective,
    project,
)
from .model import (
    C0,
    AntennaArray,
    ComplexPermittivityMap,
    ContrastImage,
    FrequencySet,
    Grid2D,
    contrast_from_permittivity,
    setup_from_json,
    write_contrast_csv,
)
from .oracles import analytic_line_source, finite_difference_gradient, project_qp_reference
from .phantom import (
    BOLUS,
    DebyeTissue,
    LesionSpec,
    TissueLibrary,
    TissueMap,
    build_background,
    corrupt_fat_map,
    insert_lesion,
    load_tissue_map,
    rasterize_disk,
)
from .sensing import (
    add_noise,
    breast_scatter_reference,
    build_sensing_matrix,
    synthesize_measurements,
    write_measurements_csv,
)

# scenario letter -> (segmentation error percent, snr_db or None)
SCENARIOS: dict[str, tuple[float, float | None]] = {
    "A": (0.0, None),
    "B": (10.0, None),
    "C": (10.0, 49.0),
    "D": (10.0, 43.0),
}

RATIO_CAP = 1e6


@dataclass(frozen=True)
class Seeds:
    segmentation: int
    noise: int


@dataclass(frozen=True)
class ExperimentConfig:
    grid: Grid2D
    freqs: FrequencySet
    antennas: AntennaArray
    pml: PMLConfig
    phantom_path: Path
    lesion: LesionSpec
    seg_error_pct: float
    snr_db: float | None
    seeds: Seeds
    solver: SolverConfig
    success_ratio_threshold: float
    output_dir: Path
    scenario: str = "custom"
    library: TissueLibrary = TissueLibrary()

    @classmethod
    def from_json(cls, source, scenario: str | None = None, output_dir=None) -> "ExperimentConfig":
        """Load a config file; `scenario` overrides segmentation error and SNR."""
        source = Path(source)
        with open(source) as fh:
            cfg = json.load(fh)
        grid, freqs, antennas = setup_from_json(cfg)
        try:
            pml = PMLConfig(
                thickness=int(cfg["pml"]["thickness"]),
                max_sigma=float(cfg["pml"]["max_sigma"]),
                polynomial_order=int(cfg["pml"]["polynomial_order"]),
            )
            phantom_path = Path(cfg["phantom"])
            if not phantom_path.is_absolute():
                phantom_path = source.parent / phantom_path
            les = cfg["lesion"]
            lesion = LesionSpec(
                center=tuple(les["center"]),
                radius=float(les["radius"]),
                tissue=DebyeTissue(**les["tissue"]),
            )
            seeds = Seeds(
                segmentation=int(cfg["seeds"]["segmentation"]),
                noise=int(cfg["seeds"]["noise"]),
            )
            sol = cfg.get("solver", {})
            solver = SolverConfig(
                lam=sol.get("lambda"),
                mu=sol.get("mu"),
                max_iters=int(sol.get("max_iters", 5000)),
                tol=float(sol.get("tol", 1e-7)),
                continuation_steps=int(sol.get("continuation_steps", 4)),
                lipschitz_safety=float(sol.get("lipschitz_safety", 1.05)),
            )
            seg_error_pct = float(cfg.get("segmentation_error_pct", 0.0))
            snr_db = cfg.get("snr_db")
            snr_db = None if snr_db is None else float(snr_db)
            threshold = float(cfg.get("success_ratio_threshold", 1.5))
            out = Path(cfg.get("output_dir", "out"))
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"malformed experiment configuration: {exc}") from exc
        name = "custom"
        if scenario is not None:
            if scenario not in SCENARIOS:
                raise ConfigurationError(f"unknown scenario {scenario!r}")
            seg_error_pct, snr_db = SCENARIOS[scenario]
            name = scenario
        if output_dir is not None:
            out = Path(output_dir)
        if seg_error_pct < 0:
            raise ConfigurationError("segmentation error amplitude must be non-negative")
        return cls(
            grid=grid,
            freqs=freqs,
            antennas=antennas,
            pml=pml,
            phantom_path=phantom_path,
            lesion=lesion,
            seg_error_pct=seg_error_pct,
            snr_db=snr_db,
            seeds=seeds,
            solver=solver,
            success_ratio_threshold=threshold,
            output_dir=out,
            scenario=name,
        )


@dataclass(frozen=True)
class LocalizationResult:
    """Peak-contrast ratio inside vs outside the dilated lesion region."""

    peak_in_ratio: float
    success: bool
    centroid_error_cells: float


@contextmanager
def _stage(name: str):
    try:
        yield
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(name, str(exc)) from exc


def localization_metric(
    x_hat: ContrastImage,
    lesion_mask: np.ndarray,
    threshold: float = 1.5,
    dilation_cells: int = 2,
) -> LocalizationResult:
    """Score how well |x_hat| concentrates on the (dilated) lesion region."""
    lesion_mask = np.asarray(lesion_mask, dtype=bool)
    if lesion_mask.shape != x_hat.support.shape:
        raise ConfigurationError("lesion mask shape does not match the image grid")
    if not lesion_mask.any():
        raise ValueError("lesion mask is empty")
    dilated = ndi.binary_dilation(
        lesion_mask, structure=np.ones((3, 3), dtype=bool), iterations=dilation_cells
    )
    mag = np.abs(x_hat.to_grid())
    inside = dilated & x_hat.support
    outside = x_hat.support & ~dilated
    peak_in = float(mag[inside].max()) if inside.any() else 0.0
    peak_out = float(mag[outside].max()) if outside.any() else 0.0
    if peak_out > 0.0:
        ratio = min(peak_in / peak_out, RATIO_CAP)
    else:
        ratio = RATIO_CAP if peak_in > 0.0 else 0.0

    weights = mag[x_hat.support]
    total = float(weights.sum())
    if total > 0.0:
        ii, jj = np.nonzero(x_hat.support)
        ci = float((ii * weights).sum() / total)
        cj = float((jj * weights).sum() / total)
        li, lj = np.nonzero(lesion_mask)
        centroid_error = math.hypot(ci - li.mean(), cj - lj.mean())
    else:
        centroid_error = math.inf
    return LocalizationResult(
        peak_in_ratio=ratio,
        success=ratio >= threshold,
        centroid_error_cells=centroid_error,
    )


def render_image(
    x: ContrastImage,
    path,
    antennas: AntennaArray | None = None,
    breast_mask: np.ndarray | None = None,
    lesion_mask: np.ndarray | None = None,
    title: str | None = None,
) -> Path:
    """Two-panel (real, imaginary) PNG with overlays, plus the raw CSV."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    grid = x.grid
    data = x.to_grid()
    extent = (
        grid.origin[0] - grid.dx / 2,
        grid.origin[0] + (grid.nx - 0.5) * grid.dx,
        grid.origin[1] - grid.dy / 2,
        grid.origin[1] + (grid.ny - 0.5) * grid.dy,
    )
    xx, yy = grid.center_mesh()
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), constrained_layout=True)
    for ax, part, label in ((axes[0], data.real, "real"), (axes[1], data.imag, "imaginary")):
        im = ax.imshow(part.T, origin="lower", extent=extent, cmap="viridis")
        fig.colorbar(im, ax=ax, shrink=0.85)
        for mask in (breast_mask, lesion_mask):
            if mask is not None and mask.any():
                ax.contour(xx, yy, mask.astype(float), levels=[0.5], colors="lime", linewidths=1.0)
        if antennas is not None:
            pts = np.array(antennas.positions)
            ax.plot(pts[:, 0], pts[:, 1], "wo", markersize=4, markeredgecolor="black")
        ax.set_xlabel("x (m)")
        ax.set_ylabel("y (m)")
        ax.set_title(f"{title or 'contrast'} ({label})")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    write_contrast_csv(x, path.with_suffix(".csv"))
    return path


def _bolus_only_media(
    grid: Grid2D, freqs: FrequencySet, library: TissueLibrary
) -> list[ComplexPermittivityMap]:
    return [
        ComplexPermittivityMap(
            grid=grid,
            eps=np.full((grid.nx, grid.ny), library.bolus.permittivity(w), dtype=complex),
            omega=w,
        )
        for w in freqs.omegas
    ]


def _validate_scene(cfg: ExperimentConfig, tissue: TissueMap) -> None:
    grid = cfg.grid
    if tissue.grid != grid:
        raise ConfigurationError(
            f"phantom grid {tissue.grid} does not match configured grid {grid}"
        )
    t = cfg.pml.thickness
    for idx, cell in enumerate(cfg.antennas.cells(grid)):
        i, j = cell
        if i < t or i >= grid.nx - t or j < t or j >= grid.ny - t:
            raise ConfigurationError(f"antenna {idx} at cell ({i}, {j}) lies inside the PML")
        if tissue.labels[i, j] != BOLUS:
            raise ConfigurationError(
                f"antenna {idx} at cell ({i}, {j}) is not in the bolus"
            )
    if cfg.lesion.radius < 2.0 * max(grid.dx, grid.dy):
        raise ConfigurationError(
            f"lesion radius {cfg.lesion.radius} m is smaller than 2 cells"
        )
    breast = tissue.breast_mask
    if breast.any():
        omega_min = cfg.freqs.omegas[0]
        eps_min = build_background(tissue, omega_min, cfg.library)
        wavelength = 2 * math.pi * C0 / (omega_min * math.sqrt(float(eps_min.eps.real.max())))
        ii, jj = np.nonzero(breast)
        margin = min(
            (ii.min() - t) * grid.dx,
            (grid.nx - 1 - t - ii.max()) * grid.dx,
            (jj.min() - t) * grid.dy,
            (grid.ny - 1 - t - jj.max()) * grid.dy,
        )
        if margin < wavelength / 4:
            raise ConfigurationError(
                f"breast sits {margin*1e3:.1f} mm from the PML; needs >= "
                f"lambda/4 = {wavelength/4*1e3:.1f} mm"
            )


def _format_value(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return str(value)
    if value is None:
        return "none"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_summary(path, entries: dict) -> None:
    """Flat, sorted `key = value` text; deterministic for identical entries."""
    with open(path, "w") as fh:
        for key in sorted(entries):
            fh.write(f"{key} = {_format_value(entries[key])}\n")


def run_experiment(cfg: ExperimentConfig) -> tuple[LocalizationResult, dict]:
    """Execute the full pipeline; returns the localization verdict and an
    artifact dictionary (paths, diagnostics, solver report)."""
    grid, freqs, antennas, pml = cfg.grid, cfg.freqs, cfg.antennas, cfg.pml
    omegas = freqs.omegas

    with _stage("load-phantom"):
        t_true = load_tissue_map(cfg.phantom_path)
    with _stage("validate"):
        _validate_scene(cfg, t_true)
        support = t_true.breast_mask
        if not support.any():
            raise ConfigurationError("phantom has no breast cells to invert for")

    with _stage("media"):
        if cfg.seg_error_pct > 0:
            t_prior = corrupt_fat_map(t_true, cfg.seg_error_pct, cfg.seeds.segmentation)
        else:
            t_prior = t_true
        backgrounds = [build_background(t_prior, w, cfg.library) for w in omegas]
        healthy_true = [build_background(t_true, w, cfg.library) for w in omegas]
        cancer_true = [
            insert_lesion(t_true, healthy_true[fi], cfg.lesion, w)
            for fi, w in enumerate(omegas)
        ]
        bolus_media = _bolus_only_media(grid, freqs, cfg.library)

    with _stage("background-fields"):
        cells = antennas.cells(grid)
        bg_fields = {}
        green = {}
        for fi, omega in enumerate(omegas):
            op = assemble(backgrounds[fi], omega, pml)
            for ai, cell in enumerate(cells):
                sol = solve_source(op, cell, antenna_index=ai)
                bg_fields[(ai, fi)] = sol
                green[(ai, fi)] = green_row(op, cell, support, solution=sol)

    with _stage("sensing-matrix"):
        sensing = build_sensing_matrix(bg_fields, green, backgrounds, antennas, freqs, support)

    with _stage("measurements"):
        y_clean = synthesize_measurements(
            cancer_true, backgrounds, antennas, freqs, pml, background_fields=bg_fields
        )
        scatter_ref = breast_scatter_reference(
            backgrounds, bolus_media, antennas, freqs, pml, background_fields=bg_fields
        )

    with _stage("noise"):
        y = add_noise(y_clean, scatter_ref, cfg.snr_db, cfg.seeds.noise)

    with _stage("inversion"):
        fc = len(freqs) // 2
        x_true = contrast_from_permittivity(cancer_true[fc], backgrounds[fc], support)
        region = FeasibleRegion(backgrounds[fc].eps[support])
        report = nesterov_solve(sensing.a, y.y, region, cfg.solver, grid, support)

    with _stage("metrics"):
        lesion_mask = rasterize_disk(grid, cfg.lesion.center, cfg.lesion.radius) & support
        loc = localization_metric(report.x_hat, lesion_mask, cfg.success_ratio_threshold)
        norm_clean = float(np.linalg.norm(y_clean.y))
        gap_db = (
            20.0 * math.log10(float(np.linalg.norm(scatter_ref)) / norm_clean)
            if norm_clean > 0
            else math.inf
        )
        born_error = (
            float(np.linalg.norm(y_clean.y - sensing.a @ x_true.x)) / norm_clean
            if norm_clean > 0
            else 0.0
        )

    with _stage("artifacts"):
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        render_image(
            x_true, out / "x_true.png", antennas, support, lesion_mask, title="true contrast"
        )
        render_image(
            report.x_hat,
            out / "x_hat.png",
            antennas,
            support,
            lesion_mask,
            title="recovered contrast",
        )
        with open(out / "objective_trace.csv", "w") as fh:
            fh.write("iteration,objective\n")
            for it, value in enumerate(report.objective_trace):
                fh.write(f"{it},{float(value)!r}\n")
        write_measurements_csv(y, out / "measurements.csv")
        summary = {
            "scenario": cfg.scenario,
            "phantom": cfg.phantom_path.name,
            "n_antennas": len(antennas),
            "n_frequencies": len(freqs),
            "m_rows": sensing.m_rows,
            "n_unknowns": sensing.n_columns,
            "seg_error_pct": cfg.seg_error_pct,
            "snr_db": cfg.snr_db,
            "seed_segmentation": cfg.seeds.segmentation,
            "seed_noise": cfg.seeds.noise,
            "lambda": report.lam,
            "mu": report.mu,
            "iterations": report.iterations,
            "final_objective": report.final_objective,
            "final_residual": report.final_residual,
            "final_l1": report.final_l1,
            "breast_to_lesion_gap_db": gap_db,
            "born_model_error_fraction": born_error,
            "lesion_snr_db": None if cfg.snr_db is None else cfg.snr_db - gap_db,
            "peak_in_ratio": loc.peak_in_ratio,
            "centroid_error_cells": loc.centroid_error_cells,
            "success": loc.success,
            "success_ratio_threshold": cfg.success_ratio_threshold,
        }
        write_summary(out / "summary.txt", summary)

    artifacts = {
        "output_dir": out,
        "summary_path": out / "summary.txt",
        "report": report,
        "x_true": x_true,
        "sensing": sensing,
        "measurements": y,
        "measurements_clean": y_clean,
        "scatter_reference": scatter_ref,
        "gap_db": gap_db,
        "born_error": born_error,
        "lesion_mask": lesion_mask,
        "summary": summary,
    }
    return loc, artifacts


def run_scenarios(config_path, letters, output_root=None) -> dict[str, tuple[LocalizationResult, dict]]:
    """Run several stock scenarios, each into its own subdirectory."""
    results = {}
    for letter in letters:
        cfg = ExperimentConfig.from_json(config_path, scenario=letter)
        root = Path(output_root) if output_root is not None else cfg.output_dir
        cfg = replace(cfg, output_dir=root / letter)
        results[letter] = run_experiment(cfg)
    return results


def validate_fdfd_checks() -> list[tuple[str, bool, str]]:
    """Analytic, reciprocity, and absorption checks for the field solver."""
    from .reference import reference_grid, reference_tissue_map

    results = []
    grid = reference_grid()
    pml = PMLConfig()
    src = (grid.nx // 2, grid.ny // 2)
    for f_hz in FrequencySet.default().frequencies_hz:
        omega = 2 * math.pi * f_hz
        eps = ComplexPermittivityMap(
            grid=grid, eps=np.full((grid.nx, grid.ny), 10.0, dtype=complex), omega=omega
        )
        op = assemble(eps, omega, pml)
        sol = solve_source(op, src)
        k = omega * math.sqrt(10.0) / C0
        exact = analytic_line_source(grid, src, k)
        xx, yy = grid.center_mesh()
        sx, sy = grid.cell_center(*src)
        dist = np.hypot(xx - sx, yy - sy)
        annulus = op.physical_mask() & (dist >= 2 * grid.dx)
        err = float(
            np.linalg.norm(sol.ez[annulus] - exact[annulus]) / np.linalg.norm(exact[annulus])
        )
        results.append(
            (
                f"line-source field vs analytic solution at {f_hz/1e6:.0f} MHz",
                err <= 0.02,
                f"relative l2 error {100*err:.3f}% (limit 2%)",
            )
        )
        att = pml_attenuation_db(sol, pml)
        results.append(
            (
                f"PML absorption at {f_hz/1e6:.0f} MHz",
                att >= 40.0,
                f"outer-edge field {att:.1f} dB below peak (limit 40 dB)",
            )
        )

    tissue = reference_tissue_map()
    omega = 2 * math.pi * 500e6
    background = build_background(tissue, omega)
    op = assemble(background, omega, PMLConfig())
    from .reference import reference_antennas

    cells = reference_antennas().cells(grid)
    fields = [solve_source(op, c) for c in cells]
    worst = 0.0
    for a in range(len(cells)):
        for b in range(a + 1, len(cells)):
            gab = fields[a].ez[cells[b]]
            gba = fields[b].ez[cells[a]]
            worst = max(worst, abs(gab - gba) / abs(gab))
    results.append(
        (
            "Green's function reciprocity on heterogeneous background",
            worst <= 1e-10,
            f"max relative antenna-pair difference {worst:.3e} (limit 1e-10)",
        )
    )
    return results


def selftest_checks(seed: int = 20240502) -> list[tuple[str, bool, str]]:
    """Projection and gradient oracles plus Huber sanity checks."""
    rng = np.random.default_rng(seed)
    results = []

    worst = 0.0
    for _ in range(1000):
        eps_b = complex(rng.uniform(1.0, 60.0), rng.uniform(0.0, 30.0))
        z = complex(*rng.normal(0.0, 2.0, 2))
        closed = project(np.array([z]), FeasibleRegion(np.array([eps_b])))[0]
        reference = project_qp_reference(z, eps_b)
        worst = max(worst, abs(closed - reference))
    results.append(
        (
            "closed-form projection vs per-element QP",
            worst <= 1e-8,
            f"max difference {worst:.3e} over 1000 instances (limit 1e-8)",
        )
    )

    m, n = 6, 10
    a = rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))
    y = rng.normal(size=m) + 1j * rng.normal(size=m)
    lam, mu = 0.7, 0.3
    worst = 0.0
    for _ in range(20):
        x = rng.normal(size=n) + 1j * rng.normal(size=n)
        near_kink = np.abs(np.abs(x) - mu) < 1e-3
        x[near_kink] += 0.1  # keep finite differences away from the Huber kink
        g = gradient(x, a, y, lam, mu)
        g_fd = finite_difference_gradient(lambda v: objective(v, a, y, lam, mu), x)
        worst = max(worst, float(np.linalg.norm(g - g_fd) / np.linalg.norm(g)))
    results.append(
        (
            "objective gradient vs central finite differences",
            worst <= 1e-6,
            f"max relative error {worst:.3e} over 20 points (limit 1e-6)",
        )
    )

    mu = 0.37
    at_break = abs(float(huber(mu + 0j, mu)) - mu / 2)
    limit_gap = abs(float(huber(5.0 + 0j, 1e-9)) - 5.0)
    ok = at_break == 0.0 and limit_gap <= 1e-9
    results.append(
        (
            "Huber breakpoint continuity and small-mu limit",
            ok,
            f"breakpoint gap {at_break:.1e}, limit gap {limit_gap:.1e}",
        )
    )
    return results
