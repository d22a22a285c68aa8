"""DeGroot-Friedkin self-confidence map on the interior of the simplex and
its contraction certificate."""

from dataclasses import dataclass, field

import numpy as np

from . import matrix
from .errors import ConvergenceError, DomainError, PreconditionError

DEFAULT_DELTA = 1e-6
SUM_TOL = 1e-12
POLE_TOL = 1e-9


@dataclass(frozen=True)
class DFModel:
    gamma: np.ndarray
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        if g.ndim != 1 or g.size < 3:
            raise ValueError("DeGroot-Friedkin needs at least 3 individuals")
        if not np.all((g > 0) & (g < 0.5)):
            raise ValueError("every gamma_i must lie in (0, 0.5)")
        if abs(g.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"gamma must sum to 1 (got {g.sum():.15g})")
        if not 0 < self.delta < 1.0 / g.size:
            raise ValueError("delta must lie in (0, 1/n)")
        g = g.copy()
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)

    @property
    def n(self):
        return self.gamma.size

    def to_dict(self):
        return {"gamma": self.gamma.tolist(), "delta": self.delta}


def check_point(model, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n,):
        raise ValueError(f"point must have {model.n} components")
    if np.any(x > 1 - POLE_TOL):
        raise DomainError("a component is within 1e-9 of 1 (pole of the map)")
    if abs(x.sum() - 1.0) > SUM_TOL:
        raise DomainError("point does not sum to 1")
    if np.any(x < model.delta) or np.any(x > 1 - model.delta):
        raise DomainError("point lies outside the delta-interior of the simplex")
    return x


def map_G(model, x):
    """``G(x)_i = (gamma_i / (1 - x_i)) / sum_j gamma_j / (1 - x_j)``."""
    x = check_point(model, x)
    w = model.gamma / (1.0 - x)
    return w / w.sum()


def full_differential(model, x):
    """``dG`` in ambient coordinates: ``(I - G 1^T) diag(w_i / (1 - x_i)) / W``."""
    x = check_point(model, x)
    w = model.gamma / (1.0 - x)
    W = w.sum()
    G = w / W
    dw = w / (1.0 - x)
    return (np.eye(model.n) - np.outer(G, np.ones(model.n))) * (dw / W)[None, :]


def chart_basis(n):
    """``dx/du`` for the chart ``u = x[:-1]``, ``x_n = 1 - sum(u)``."""
    return np.vstack([np.eye(n - 1), -np.ones((1, n - 1))])


def jacobian_on_simplex(model, x):
    """Jacobian of the chart map ``u -> G(x(u))[:-1]``."""
    return (full_differential(model, x) @ chart_basis(model.n))[:-1]


@dataclass(frozen=True)
class FixedPointResult:
    x: np.ndarray
    iterations: int
    residual: float
    steps: list = field(default_factory=list, repr=False)


def iterate_fixed_point(model, x0, tol=1e-12, max_iter=10_000):
    """Iterate ``G`` until successive iterates differ by less than ``tol``."""
    x = check_point(model, x0)
    steps = []
    for k in range(1, max_iter + 1):
        x_new = map_G(model, x)
        step = float(np.max(np.abs(x_new - x)))
        steps.append(step)
        x = x_new
        if step < tol:
            residual = float(np.max(np.abs(map_G(model, x) - x)))
            return FixedPointResult(x=x, iterations=k, residual=residual, steps=steps)
    raise ConvergenceError("fixed-point iteration did not converge", residual=steps[-1])


def contraction_radius(model, x):
    """Largest eigenvalue magnitude of the chart Jacobian at ``x``."""
    return matrix.spectral_radius(jacobian_on_simplex(model, x))


def certify_contraction(model, x_star, residual_tol=1e-8, margin=1e-9):
    """True iff every eigenvalue of the chart Jacobian at the fixed point
    ``x_star`` has magnitude below ``1 - margin``."""
    residual = float(np.max(np.abs(map_G(model, x_star) - np.asarray(x_star))))
    if residual >= residual_tol:
        raise PreconditionError(f"x_star is not a fixed point (residual {residual:.3e})")
    return contraction_radius(model, x_star) < 1.0 - margin


def random_simplex_points(model, count, rng):
    """Dirichlet(1) samples pushed into the delta-interior."""
    pts = rng.dirichlet(np.ones(model.n), size=count)
    pts = np.clip(pts, 10 * model.delta, None)
    return pts / pts.sum(axis=1, keepdims=True)
