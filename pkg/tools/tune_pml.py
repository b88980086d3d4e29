"""Sweep PML settings against the analytic line-source field to pick defaults."""

import time

import numpy as np
from scipy.special import hankel1

from csmwi.fdfd import PMLConfig, assemble, pml_attenuation_db, solve_source
from csmwi.model import C0, ComplexPermittivityMap, Grid2D


def hankel_error(freq_hz, eps_r, pml):
    nx = 120 + 2 * pml.thickness
    ny = 80 + 2 * pml.thickness
    dx = 1.25e-3
    grid = Grid2D(nx=nx, ny=ny, dx=dx, dy=dx, origin=(0.0, 0.0))
    omega = 2 * np.pi * freq_hz
    eps = ComplexPermittivityMap(grid=grid, eps=np.full((nx, ny), eps_r, complex), omega=omega)
    t0 = time.time()
    op = assemble(eps, omega, pml)
    src = (nx // 2, ny // 2)
    sol = solve_source(op, src)
    elapsed = time.time() - t0

    k = omega * np.sqrt(eps_r) / C0
    xx, yy = grid.center_mesh()
    dist = np.hypot(xx - xx[src], yy - yy[src])
    exact = np.where(dist > 0, 0.25j * hankel1(0, k * np.maximum(dist, 1e-12)), 0)
    phys = op.physical_mask()
    annulus = phys & (dist >= 2 * dx)
    err = np.linalg.norm(sol.ez[annulus] - exact[annulus]) / np.linalg.norm(exact[annulus])
    att = pml_attenuation_db(sol, pml)
    return err, att, elapsed


for thickness in (10, 14):
    for sigma in (10.0, 20.0, 40.0, 80.0, 160.0):
        pml = PMLConfig(thickness=thickness, max_sigma=sigma, polynomial_order=3)
        line = f"t={thickness:3d} sigma={sigma:7.1f}:"
        for f in (500e6, 600e6, 700e6):
            err, att, el = hankel_error(f, 10.0, pml)
            line += f"  {f/1e6:.0f}MHz err={100*err:6.3f}% att={att:6.1f}dB ({el:.2f}s)"
        print(line)
