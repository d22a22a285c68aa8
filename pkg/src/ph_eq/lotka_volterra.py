"""Generalized Lotka-Volterra systems ``x_i' = F_i(x) x_i`` with

    F_i(x) = d_i + sum_j a_ij x_j - c_i x_i^2

(``c = 0`` gives the classical model). Includes the feasible-equilibrium
solver, the sector-bound (Goh) check and the comparison envelope.
"""

import logging
from dataclasses import dataclass

import numpy as np

from . import matrix
from ._parallel import parallel_map
from .box import ManifoldBox, grid_points
from .dynamics import IntegratorConfig, integrate
from .errors import ConvergenceError, DomainError

log = logging.getLogger(__name__)

DOMAIN_SLACK = 1e-9


@dataclass(frozen=True)
class GLVModel:
    d: np.ndarray
    a: np.ndarray
    self_limitation: np.ndarray = None

    def __post_init__(self):
        d = np.atleast_1d(np.asarray(self.d, dtype=float))
        a = np.asarray(self.a, dtype=float)
        n = d.size
        if d.ndim != 1 or n < 1:
            raise ValueError("d must be a non-empty vector")
        if a.shape != (n, n):
            raise ValueError(f"a must be {n}x{n}, got {a.shape}")
        c = (np.zeros(n) if self.self_limitation is None
             else np.atleast_1d(np.asarray(self.self_limitation, dtype=float)))
        if c.shape != (n,):
            raise ValueError("self_limitation must have one entry per species")
        if not all(np.all(np.isfinite(v)) for v in (d, a, c)):
            raise ValueError("parameters must be finite")
        if np.any(c < 0):
            raise ValueError("self_limitation coefficients must be >= 0")
        for name, v in (("d", d), ("a", a), ("self_limitation", c)):
            v = v.copy()
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @property
    def n(self):
        return self.d.size

    def F(self, x):
        """Per-capita growth rates; accepts a batch of states."""
        x = np.asarray(x, dtype=float)
        return self.d + x @ self.a.T - self.self_limitation * x**2

    def jacobian_F(self, x):
        x = np.asarray(x, dtype=float)
        return self.a - np.diag(2.0 * self.self_limitation * x)

    def to_dict(self):
        out = {"d": self.d.tolist(), "a": self.a.tolist()}
        if np.any(self.self_limitation):
            out["self_limitation"] = self.self_limitation.tolist()
        return out


@dataclass(frozen=True)
class LVRegion:
    """``W = {x : |x| <= radius, x_i >= floor}``."""

    radius: float
    floor: float

    def __post_init__(self):
        if not (self.radius > 0 and self.floor > 0):
            raise ValueError("radius and floor must be positive")

    def validate(self, n):
        if not self.floor < self.radius / np.sqrt(n):
            raise ValueError("region is degenerate: floor must be < radius / sqrt(n)")

    def contains(self, x, slack=0.0):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.floor - slack) and np.linalg.norm(x) <= self.radius + slack)

    def inscribed_box(self, n):
        """The axis-aligned box ``[floor, radius/sqrt(n)]^n`` inside ``W``."""
        self.validate(n)
        return ManifoldBox.cube(self.floor, self.radius / np.sqrt(n), n)

    def to_dict(self):
        return {"radius": self.radius, "floor": self.floor}


@dataclass(frozen=True)
class SectorBound:
    """Constant matrix bounding ``dF_i/dx_j``; admissible when its diagonal
    is negative and off-diagonals nonnegative."""

    A: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", matrix.as_square(self.A, "A_bound"))

    @property
    def admissible(self):
        A = self.A
        off = A[~np.eye(A.shape[0], dtype=bool)]
        return bool(np.all(np.diag(A) < 0) and np.all(off >= 0))


def _check_state(model, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.n:
        raise ValueError(f"state must have {model.n} components")
    if np.any(x < -DOMAIN_SLACK) or not np.all(np.isfinite(x)):
        raise DomainError("state outside the nonnegative orthant")
    return x


def lv_drift(model, x):
    x = _check_state(model, x)
    return model.F(x) * x


def vector_field(model):
    return lambda x: model.F(x) * np.asarray(x, dtype=float)


def lv_jacobian(model, x):
    """``diag(x) J_F(x) + diag(F(x))``."""
    x = _check_state(model, x)
    return x[:, None] * model.jacobian_F(x) + np.diag(model.F(x))


# Feasible equilibria ----------------------------------------------------------

def _newton_F(model, x, tol, max_iter=60):
    for _ in range(max_iter):
        f = model.F(x)
        res = float(np.max(np.abs(f)))
        if res < tol:
            return x, res
        try:
            step = np.linalg.solve(model.jacobian_F(x), -f)
        except np.linalg.LinAlgError:
            return x, res
        if not np.all(np.isfinite(step)):
            return x, res
        x = x + step
        if np.max(np.abs(x)) > 1e8:
            return x, np.inf
    return x, float(np.max(np.abs(model.F(x))))


def feasible_equilibria(model, region, tol=1e-12, seeds_per_dim=5, dedup=1e-6):
    """All distinct roots of ``F`` found in ``int(W)`` by multi-start Newton.

    Feasible equilibria satisfy ``F(x) = 0`` because ``x > 0``, so Newton
    runs on ``F`` rather than on the drift. Seeds form a cell-centred grid
    on ``[floor, radius]^n`` restricted to the region.
    """
    region.validate(model.n)
    seed_box = ManifoldBox.cube(region.floor, region.radius, model.n)
    seeds = [s for s in grid_points(seed_box, seeds_per_dim) if region.contains(s)]
    if not seeds:
        seeds = [region.inscribed_box(model.n).center]

    results = parallel_map(lambda s: _newton_F(model, s.copy(), tol), seeds)
    roots, near_misses = [], []
    for x, res in results:
        if not region.contains(x):
            continue
        if res < tol:
            roots.append(x)
        elif res < 1e-6:
            near_misses.append(res)
    roots.sort(key=tuple)
    distinct = []
    for r in roots:
        if all(np.max(np.abs(r - q)) > dedup for q in distinct):
            distinct.append(r)
    if not distinct and near_misses:
        raise ConvergenceError("Newton stagnated near a root of F", residual=min(near_misses))
    return distinct


def solve_feasible(model, region, tol=1e-12, seeds_per_dim=5):
    """A feasible equilibrium in ``int(W)``, or ``None`` when there is none.

    When several roots exist the lexicographically smallest is returned and
    a warning is logged.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    roots = feasible_equilibria(model, region, tol, seeds_per_dim)
    if not roots:
        return None
    if len(roots) > 1:
        log.warning("%d distinct feasible equilibria found; returning the first", len(roots))
    return roots[0]


# Sector-bound check -----------------------------------------------------------

@dataclass(frozen=True)
class GohReport:
    bound_admissible: bool
    diagonal_margin: float
    offdiagonal_margin: float
    minors_positive: bool
    points_checked: int

    @property
    def passed(self):
        return (self.bound_admissible and self.diagonal_margin >= 0
                and self.offdiagonal_margin >= 0 and self.minors_positive)

    def to_dict(self):
        return {"passed": self.passed, "bound_admissible": self.bound_admissible,
                "diagonal_margin": self.diagonal_margin,
                "offdiagonal_margin": self.offdiagonal_margin,
                "minors_positive": self.minors_positive,
                "points_checked": self.points_checked}


def check_goh(model, bound, points):
    """Verify ``dF_i/dx_i <= a_ii < 0`` and ``|dF_i/dx_j| <= a_ij`` at every
    point, plus positive leading minors of ``-A``.

    Margins are the worst slack over all points (negative means violated).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] == 0:
        raise ValueError("check_goh needs at least one point")
    A = bound.A
    if A.shape != (model.n, model.n):
        raise ValueError("bound dimension does not match the model")
    offmask = ~np.eye(model.n, dtype=bool)
    diag_margin = off_margin = np.inf
    for x in points:
        JF = model.jacobian_F(x)
        diag_margin = min(diag_margin, float(np.min(np.diag(A) - np.diag(JF))))
        off_margin = min(off_margin, float(np.min((A - np.abs(JF))[offmask]))
                         if model.n > 1 else np.inf)
    return GohReport(bound_admissible=bound.admissible,
                     diagonal_margin=diag_margin,
                     offdiagonal_margin=off_margin,
                     minors_positive=matrix.check_leading_minors(-A),
                     points_checked=points.shape[0])


# Comparison envelope ----------------------------------------------------------

@dataclass(frozen=True)
class EnvelopeReport:
    times: np.ndarray
    deviation: np.ndarray
    envelope: np.ndarray
    violation: float
    slack: float
    bound_hurwitz: bool
    scaling: str

    @property
    def holds(self):
        return self.violation <= self.slack

    @property
    def diagnostic(self):
        if self.holds:
            return None
        k, i = np.unravel_index(np.argmax(self.deviation - self.envelope), self.deviation.shape)
        return (f"envelope violated by {self.violation:.3e} at t={self.times[k]:g} "
                f"in component {i}")

    def to_dict(self):
        return {"holds": self.holds, "violation": self.violation,
                "bound_hurwitz": self.bound_hurwitz, "scaling": self.scaling,
                "final_deviation": self.deviation[-1].tolist(),
                "final_envelope": self.envelope[-1].tolist(),
                "diagnostic": self.diagnostic}


def comparison_envelope(model, bound, x_star, x0, epsilon, T, scaling="constant",
                        slack=1e-6, config=None):
    """Co-integrate the model with a linear comparison system and check
    ``|x(t) - x_star| <= z(t)`` componentwise.

    ``scaling="constant"`` uses ``z' = epsilon A z``; ``scaling="state"``
    uses ``z' = diag(x(t)) A z``. Both start from ``z(0) = |x0 - x_star|``.
    """
    if scaling not in ("constant", "state"):
        raise ValueError("scaling must be 'constant' or 'state'")
    A = bound.A
    x_star = np.asarray(x_star, dtype=float)
    x0 = _check_state(model, x0)
    n = model.n

    def rhs(u):
        x, z = u[:n], u[n:]
        rate = epsilon if scaling == "constant" else x
        return np.concatenate([model.F(x) * x, rate * (A @ z)])

    cfg = config or IntegratorConfig(T=T, atol=1e-12, rtol=1e-10)
    traj = integrate(rhs, np.concatenate([x0, np.abs(x0 - x_star)]), cfg)
    y = np.abs(traj.states[:, :n] - x_star)
    z = traj.states[:, n:]
    return EnvelopeReport(times=traj.times, deviation=y, envelope=z,
                          violation=float(max(np.max(y - z), 0.0)), slack=slack,
                          bound_hurwitz=bool(matrix.is_hurwitz(A)), scaling=scaling)
