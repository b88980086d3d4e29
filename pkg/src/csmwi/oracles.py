"""Independent reference computations used by self-checks and tests.

Nothing here shares code with the implementation paths it validates: the
line-source field comes from the analytic Hankel solution, and the
projection reference solves each per-element QP by exhaustive KKT
(active-set) enumeration in the original contrast coordinates.
"""

from __future__ import annotations

import numpy as np
from scipy.special import hankel1

from .model import Grid2D


def analytic_line_source(grid: Grid2D, source_cell: tuple[int, int], k: float) -> np.ndarray:
    """(j/4) H0^(1)(k d) around a unit line source; zero at the source cell."""
    xx, yy = grid.center_mesh()
    sx, sy = grid.cell_center(*source_cell)
    dist = np.hypot(xx - sx, yy - sy)
    field = np.zeros_like(dist, dtype=complex)
    away = dist > 0
    field[away] = 0.25j * hankel1(0, k * dist[away])
    return field


def project_qp_reference(z: complex, eps_b: complex) -> complex:
    """Euclidean projection of z onto {x : Re(eps_b x + eps_b) >= 1,
    Im(eps_b x + eps_b) >= 0}, solved as a 2-variable QP.

    Written over the real coordinates p = (Re x, Im x), the constraints are
    two half-planes n_i . p >= b_i; the projection is found by checking the
    unconstrained point, the projection onto each constraint line, and the
    vertex, keeping the nearest feasible candidate.
    """
    er, ei = eps_b.real, eps_b.imag
    n1 = np.array([er, -ei])
    b1 = 1.0 - er
    n2 = np.array([ei, er])
    b2 = -ei
    p0 = np.array([z.real, z.imag])

    candidates = [p0]
    for n, b in ((n1, b1), (n2, b2)):
        candidates.append(p0 + (b - n @ p0) / (n @ n) * n)
    vertex = np.linalg.solve(np.vstack([n1, n2]), np.array([b1, b2]))
    candidates.append(vertex)

    scale = max(1.0, abs(eps_b), float(np.linalg.norm(p0)))
    tol = 1e-12 * scale
    best = None
    best_dist = np.inf
    for p in candidates:
        if n1 @ p >= b1 - tol and n2 @ p >= b2 - tol:
            dist = float(np.linalg.norm(p - p0))
            if dist < best_dist:
                best, best_dist = p, dist
    assert best is not None  # the vertex is always feasible
    return complex(best[0], best[1])


def finite_difference_gradient(f, x: np.ndarray, step: float = 1e-7) -> np.ndarray:
    """Central differences of a real functional over stacked real/imag
    coordinates, packaged as a complex vector."""
    x = np.asarray(x, dtype=complex)
    grad = np.zeros_like(x)
    for n in range(x.size):
        h = step * max(1.0, abs(x[n]))
        for direction, pack in ((1.0, 1.0), (1j, 1j)):
            xp = x.copy()
            xm = x.copy()
            xp[n] += direction * h
            xm[n] -= direction * h
            grad[n] += pack * (f(xp) - f(xm)) / (2.0 * h)
    return grad
