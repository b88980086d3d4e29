"""Constrained sparse recovery: accelerated projected gradient on the
Huber-smoothed l1 objective.

Solves  minimize 0.5*||A x - y||^2 + lambda * sum_n f_mu(x_n)
        subject to Re(eps_b x + eps_b) >= 1,  Im(eps_b x + eps_b) >= 0

where f_mu is the Huber smoothing of |.| applied to the complex modulus.
The feasible set is an intersection of per-element orthogonal half-planes,
so its Euclidean projection has a closed form: map to permittivity space
(multiplication by eps_b scales all distances by |eps_b|), clamp real part
at 1 and imaginary part at 0, and map back.

Gradients are with respect to the stacked real/imaginary coordinates,
packaged as complex numbers: f(x + d) ~ f(x) + Re(<grad, d>).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConditioningError, ConfigurationError, DivergenceError
from .model import ContrastImage, Grid2D

_FEASIBILITY_TOL = 1e-12
_STALL_WINDOW = 10  # iterations between objective-change checks


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for the accelerated solve; `lam`/`mu` of None mean data-driven
    defaults (0.05*||A^H y||_inf and 1e-3*||least-squares x||_inf)."""

    lam: float | None = None
    mu: float | None = None
    max_iters: int = 5000
    tol: float = 1e-7
    continuation_steps: int = 4
    lipschitz_safety: float = 1.05

    def __post_init__(self):
        if self.lam is not None and self.lam < 0:
            raise ConfigurationError("lambda must be non-negative")
        if self.mu is not None and self.mu <= 0:
            raise ConfigurationError("mu must be positive")
        if self.max_iters < 1 or self.continuation_steps < 1:
            raise ConfigurationError("iteration counts must be positive")
        if not (0 < self.tol < 1):
            raise ConfigurationError("tol must lie in (0, 1)")
        if self.lipschitz_safety < 1:
            raise ConfigurationError("lipschitz_safety must be >= 1")


@dataclass(frozen=True)
class FeasibleRegion:
    """Physical-realizability set: Re(eps_b x + eps_b) >= 1, Im(...) >= 0."""

    eps_b: np.ndarray

    def __post_init__(self):
        eps_b = np.asarray(self.eps_b, dtype=complex)
        if eps_b.ndim != 1:
            raise ConfigurationError("eps_b must be a vector")
        if np.any(eps_b == 0):
            raise ConfigurationError("background permittivity must be nonzero on the support")
        eps_b.setflags(write=False)
        object.__setattr__(self, "eps_b", eps_b)

    def violation(self, x: np.ndarray) -> float:
        """Largest constraint violation (0 when feasible)."""
        w = self.eps_b * x + self.eps_b
        return float(max(np.max(1.0 - w.real, initial=0.0), np.max(-w.imag, initial=0.0)))


@dataclass(frozen=True)
class SolveReport:
    """Best feasible iterate plus the per-iteration objective trace."""

    x_hat: ContrastImage
    objective_trace: np.ndarray
    iterations: int
    final_objective: float
    final_residual: float
    final_l1: float
    lam: float
    mu: float


def huber(x, mu: float):
    """Smoothed modulus: |x|^2/(2 mu) inside |x| < mu, |x| - mu/2 outside."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    r = np.abs(x)
    return np.where(r >= mu, r - mu / 2.0, r * r / (2.0 * mu))


def huber_grad(x, mu: float):
    """Gradient of `huber` in complex packaging: x/mu inside, x/|x| outside."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    x = np.asarray(x, dtype=complex)
    r = np.abs(x)
    out = np.where(r >= mu, x / np.where(r == 0, 1.0, r), x / mu)
    return out


def objective(x: np.ndarray, a: np.ndarray, y: np.ndarray, lam: float, mu: float) -> float:
    residual = a @ x - y
    return 0.5 * float(np.vdot(residual, residual).real) + lam * float(np.sum(huber(x, mu)))


def gradient(x: np.ndarray, a: np.ndarray, y: np.ndarray, lam: float, mu: float) -> np.ndarray:
    return a.conj().T @ (a @ x - y) + lam * huber_grad(x, mu)


def project(z: np.ndarray, region: FeasibleRegion) -> np.ndarray:
    """Exact Euclidean projection onto the feasible set (clamp in eps-space)."""
    z = np.asarray(z, dtype=complex)
    if z.shape != region.eps_b.shape:
        raise ConfigurationError("vector length does not match the feasible region")
    w = region.eps_b * z + region.eps_b
    w = np.maximum(w.real, 1.0) + 1j * np.maximum(w.imag, 0.0)
    return (w - region.eps_b) / region.eps_b


def operator_norm(a: np.ndarray, seed: int = 0, tol: float = 1e-10, max_iters: int = 500) -> float:
    """Spectral norm ||A||_2 by power iteration on the smaller Gram operator."""
    a = np.asarray(a)
    m, n = a.shape
    rng = np.random.default_rng(seed)
    size = min(m, n)
    v = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    v /= np.linalg.norm(v)

    def gram(u):
        if m <= n:
            return a @ (a.conj().T @ u)
        return a.conj().T @ (a @ u)

    estimate = 0.0
    for _ in range(max_iters):
        w = gram(v)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        new_estimate = float(np.sqrt(norm_w))
        v = w / norm_w
        if abs(new_estimate - estimate) <= tol * max(new_estimate, 1e-300):
            return new_estimate
        estimate = new_estimate
    raise ConditioningError(
        f"power iteration did not converge within {max_iters} iterations "
        f"(last estimate {estimate:.6e})"
    )


def _default_lambda(a: np.ndarray, y: np.ndarray) -> float:
    corr = np.abs(a.conj().T @ y)
    return 0.05 * float(corr.max(initial=0.0))


def _default_mu(a: np.ndarray, y: np.ndarray) -> float:
    if not np.any(y):
        return 1e-6
    x_ls, *_ = np.linalg.lstsq(a, y, rcond=None)
    scale = float(np.abs(x_ls).max(initial=0.0))
    return max(1e-3 * scale, 1e-12)


def nesterov_solve(
    a: np.ndarray,
    y: np.ndarray,
    region: FeasibleRegion,
    config: SolverConfig,
    grid: Grid2D,
    support: np.ndarray,
) -> SolveReport:
    """Accelerated projected-gradient solve with geometric mu continuation.

    Each continuation stage runs momentum updates with fixed step
    1/((||A||^2 + lambda/mu) * safety), projecting every iterate onto the
    feasible set; mu shrinks 10x per stage down to its configured value.
    Returns the best-objective feasible iterate (objective evaluated at the
    final stage's mu).
    """
    a = np.asarray(a, dtype=complex)
    y = np.asarray(y, dtype=complex)
    n = a.shape[1]
    if y.shape != (a.shape[0],):
        raise ConfigurationError(f"measurement vector {y.shape} does not match operator {a.shape}")
    if region.eps_b.shape != (n,):
        raise ConfigurationError("feasible region does not match operator columns")

    lam = config.lam if config.lam is not None else _default_lambda(a, y)
    mu_final = config.mu if config.mu is not None else _default_mu(a, y)
    norm_a = operator_norm(a)

    x = project(np.zeros(n, dtype=complex), region)  # x0 = 0 is feasible for physical eps_b
    trace: list[float] = []
    best_x = x
    best_obj = np.inf
    iterations = 0

    mus = [mu_final * 10.0 ** (config.continuation_steps - 1 - s)
           for s in range(config.continuation_steps)]
    for mu in mus:
        final_stage = mu == mus[-1]
        lipschitz = (norm_a**2 + (lam / mu if lam > 0 else 0.0)) * config.lipschitz_safety
        step = 1.0 / lipschitz if lipschitz > 0 else 1.0
        x_prev = x
        t_prev = 1.0
        stage_trace: list[float] = []
        for _ in range(config.max_iters):
            t = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_prev**2))
            momentum = x + ((t_prev - 1.0) / t) * (x - x_prev)
            x_next = project(momentum - step * gradient(momentum, a, y, lam, mu), region)
            x_prev, x, t_prev = x, x_next, t
            obj = objective(x, a, y, lam, mu)
            if not np.isfinite(obj):
                err = DivergenceError(
                    f"objective became non-finite at iteration {iterations} (mu={mu:.3e})"
                )
                err.trace = np.array(trace + stage_trace)
                raise err
            stage_trace.append(obj)
            iterations += 1
            if final_stage and obj < best_obj:
                best_obj, best_x = obj, x
            k = len(stage_trace)
            if k > _STALL_WINDOW:
                prev = stage_trace[k - 1 - _STALL_WINDOW]
                if abs(prev - obj) < config.tol * max(abs(prev), 1e-30):
                    break
        trace.extend(stage_trace)

    # x0 = 0 is always a candidate, so the result never beats the trivial start.
    x0 = project(np.zeros(n, dtype=complex), region)
    if objective(x0, a, y, lam, mu_final) < best_obj:
        best_obj, best_x = objective(x0, a, y, lam, mu_final), x0

    residual = float(np.linalg.norm(a @ best_x - y))
    x_hat = ContrastImage(grid=grid, support=support, x=best_x)
    return SolveReport(
        x_hat=x_hat,
        objective_trace=np.array(trace),
        iterations=iterations,
        final_objective=float(best_obj),
        final_residual=residual,
        final_l1=float(np.sum(np.abs(best_x))),
        lam=lam,
        mu=mu_final,
    )
