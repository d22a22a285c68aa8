"""Networked SIS epidemics with optional decentralized feedback control.

Node ``i`` obeys::

    x_i' = -(d_i + h_i(x_i)) x_i + (1 - x_i) sum_j b_ij x_j

where ``h_i`` is a bounded, nondecreasing control with ``h_i(0) = 0``
(``h_i = 0`` is the uncontrolled model). States live in the unit cube.
Drift and Jacobian accept batches: any array whose last axis has length n.
"""

import logging
from dataclasses import dataclass

import numpy as np

from . import matrix
from .box import ManifoldBox, interior_points, verify_inward
from .certificate import kamke_muller
from .errors import ConvergenceError, DomainError, PreconditionError

log = logging.getLogger(__name__)

DOMAIN_SLACK = 1e-9


# Controls -------------------------------------------------------------------

@dataclass(frozen=True)
class ZeroControl:
    kind = "zero"

    def value(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def slope_times_x(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def derivative(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    @property
    def is_zero(self):
        return True

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class LinearControl:
    """``h(x) = k x``."""

    k: float
    kind = "linear"

    def __post_init__(self):
        if not (np.isfinite(self.k) and self.k >= 0):
            raise ValueError("linear control needs k >= 0")

    def value(self, x):
        return self.k * np.asarray(x, dtype=float)

    def slope_times_x(self, x):
        return self.k * np.asarray(x, dtype=float)

    def derivative(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.k)

    @property
    def is_zero(self):
        return self.k == 0

    def to_dict(self):
        return {"kind": self.kind, "k": self.k}


@dataclass(frozen=True)
class PowerControl:
    """``h(x) = c x^p`` with ``0 < p <= 2``.

    For ``p < 1`` the slope is unbounded at 0, but the Jacobian only needs
    ``h'(x) x = c p x^p``, which extends continuously by 0.
    """

    c: float
    p: float
    kind = "power"

    def __post_init__(self):
        if not (np.isfinite(self.c) and self.c >= 0):
            raise ValueError("power control needs c >= 0")
        if not (0 < self.p <= 2):
            raise ValueError("power control needs 0 < p <= 2")

    def value(self, x):
        return self.c * np.power(np.clip(x, 0.0, None), self.p)

    def slope_times_x(self, x):
        return self.c * self.p * np.power(np.clip(x, 0.0, None), self.p)

    def derivative(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, None)
        with np.errstate(divide="ignore"):
            return self.c * self.p * np.power(x, self.p - 1.0)

    @property
    def is_zero(self):
        return self.c == 0

    def to_dict(self):
        return {"kind": self.kind, "c": self.c, "p": self.p}


@dataclass(frozen=True)
class SaturatingControl:
    """``h(x) = c x / (x + kappa)``."""

    c: float
    kappa: float
    kind = "saturating"

    def __post_init__(self):
        if not (np.isfinite(self.c) and self.c >= 0):
            raise ValueError("saturating control needs c >= 0")
        if not (np.isfinite(self.kappa) and self.kappa > 0):
            raise ValueError("saturating control needs kappa > 0")

    def value(self, x):
        x = np.clip(x, 0.0, None)
        return self.c * x / (x + self.kappa)

    def derivative(self, x):
        x = np.clip(x, 0.0, None)
        return self.c * self.kappa / (x + self.kappa) ** 2

    def slope_times_x(self, x):
        return self.derivative(x) * np.clip(x, 0.0, None)

    @property
    def is_zero(self):
        return self.c == 0

    def to_dict(self):
        return {"kind": self.kind, "c": self.c, "kappa": self.kappa}


CONTROL_KINDS = {
    "zero": ZeroControl,
    "linear": LinearControl,
    "power": PowerControl,
    "saturating": SaturatingControl,
}


def control_from_dict(spec):
    spec = dict(spec)
    kind = spec.pop("kind")
    try:
        cls = CONTROL_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown control kind {kind!r}") from None
    return cls(**{k: float(v) for k, v in spec.items()})


class ControlSpec:
    """One control function per node."""

    def __init__(self, controls):
        self.controls = tuple(controls)
        if not self.controls:
            raise ValueError("ControlSpec needs at least one node")

    @classmethod
    def none(cls, n):
        return cls([ZeroControl()] * n)

    @classmethod
    def from_dicts(cls, specs):
        return cls([control_from_dict(s) for s in specs])

    def __len__(self):
        return len(self.controls)

    def __iter__(self):
        return iter(self.controls)

    def __eq__(self, other):
        return isinstance(other, ControlSpec) and self.controls == other.controls

    def __repr__(self):
        return f"ControlSpec({list(self.controls)!r})"

    @property
    def is_zero(self):
        return all(c.is_zero for c in self.controls)

    def _stack(self, method, x):
        x = np.asarray(x, dtype=float)
        return np.stack([getattr(c, method)(x[..., i]) for i, c in enumerate(self.controls)],
                        axis=-1)

    def h(self, x):
        """Diagonal of ``H(x)``."""
        return self._stack("value", x)

    def gamma(self, x):
        """Diagonal of ``Gamma(x) = diag(h_i'(x_i) x_i)``."""
        return self._stack("slope_times_x", x)

    def to_dicts(self):
        return [c.to_dict() for c in self.controls]


# Network --------------------------------------------------------------------

@dataclass(frozen=True)
class SISNetwork:
    """Recovery rates ``d`` (> 0) and infection matrix ``b`` (>= 0) whose
    digraph must be strongly connected."""

    d: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        d = np.atleast_1d(np.asarray(self.d, dtype=float))
        b = np.asarray(self.b, dtype=float)
        if d.ndim != 1 or d.size < 2:
            raise ValueError("d must be a vector with at least 2 entries")
        if b.shape != (d.size, d.size):
            raise ValueError(f"b must be {d.size}x{d.size}, got {b.shape}")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(b))):
            raise ValueError("parameters must be finite")
        if not np.all(d > 0):
            raise ValueError("recovery rates d must be positive")
        if not np.all(b >= 0):
            raise ValueError("infection matrix b must be nonnegative")
        if not matrix.is_irreducible(b):
            raise ValueError("digraph of b must be strongly connected")
        d.setflags(write=False)
        b = b.copy()
        b.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "b", b)

    @property
    def n(self):
        return self.d.size

    @property
    def D(self):
        return np.diag(self.d)

    def linearization(self):
        """``-D + B``, the Jacobian at the healthy state."""
        return -self.D + self.b

    def to_dict(self):
        return {"d": self.d.tolist(), "b": self.b.tolist()}


def _control(net, control):
    if control is None:
        return ControlSpec.none(net.n)
    if len(control) != net.n:
        raise ValueError(f"control has {len(control)} nodes, network has {net.n}")
    return control


def _check_state(net, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.n:
        raise ValueError(f"state must have {net.n} components")
    if np.any(x < -DOMAIN_SLACK) or np.any(x > 1 + DOMAIN_SLACK) or not np.all(np.isfinite(x)):
        raise DomainError("state outside the unit cube")
    return x


def _field(net, ctrl, x):
    infection = x @ net.b.T
    return -(net.d + ctrl.h(x)) * x + (1.0 - x) * infection


def drift(net, x, control=None):
    """``(-D - H(x) + (I - X) B) x``; ``x`` may be a batch of states."""
    ctrl = _control(net, control)
    return _field(net, ctrl, _check_state(net, x))


def vector_field(net, control=None):
    """Unchecked drift closure for integrators (controls clip at 0)."""
    ctrl = _control(net, control)
    return lambda x: _field(net, ctrl, np.asarray(x, dtype=float))


def jacobian(net, x, control=None):
    """``-D - H(x) + (I - X) B - Delta(x) - Gamma(x)`` at a single state."""
    ctrl = _control(net, control)
    x = _check_state(net, x)
    if x.ndim != 1:
        raise ValueError("jacobian takes a single state")
    diag = net.d + ctrl.h(x) + net.b @ x + ctrl.gamma(x)
    return (1.0 - x)[:, None] * net.b - np.diag(diag)


def epidemic_threshold(net):
    """``s(-D + B)``; positive iff an endemic equilibrium exists."""
    return matrix.spectral_abscissa(net.linearization())


# Endemic equilibrium --------------------------------------------------------

def _newton_polish(net, ctrl, x, tol, max_iter=50):
    for _ in range(max_iter):
        f = _field(net, ctrl, x)
        if np.max(np.abs(f)) < tol:
            return x
        J = jacobian(net, np.clip(x, 0.0, 1.0), ctrl)
        try:
            step = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            return x
        x_new = x + step
        if np.any(x_new <= 0) or np.any(x_new >= 1):
            return x
        x = x_new
    return x


def solve_endemic(net, control=None, tol=1e-12, max_iter=10_000, step_tol=1e-10):
    """Endemic equilibrium, or ``None`` when ``s(-D + B) <= 0``.

    Runs ``x_i <- S_i / (d_i + h_i(x_i) + S_i)`` with ``S = B x`` from half
    the Perron vector of ``-D + B``, then polishes with Newton's method
    until ``|drift|_inf < tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    ctrl = _control(net, control)
    if epidemic_threshold(net) <= 0:
        return None

    x = 0.5 * matrix.perron_pair(net.linearization()).vector
    for _ in range(max_iter):
        S = net.b @ x
        x_new = S / (net.d + ctrl.h(x) + S)
        if np.max(np.abs(x_new - x)) < step_tol:
            x = x_new
            break
        x = x_new
    x = _newton_polish(net, ctrl, x, tol)

    residual = float(np.max(np.abs(_field(net, ctrl, x))))
    if residual >= tol or not (np.all(x > 0) and np.all(x < 1)):
        raise ConvergenceError("endemic equilibrium solver failed", residual=residual)
    return x


# Invariant box --------------------------------------------------------------

def verify_inward_pointing(net, box, control=None, samples_per_face=32):
    """Face-sampled inward-pointing check of the drift on ``box``."""
    ctrl = _control(net, control)
    if not (np.all(box.lower >= 0) and np.all(box.upper <= 1)):
        raise DomainError("box must lie in the unit cube")
    return verify_inward(lambda pts: _field(net, ctrl, pts), box, samples_per_face)


def invariant_box(net, epsilon):
    """``{x : eps y_i <= x_i <= 1}`` with ``y`` the max-normalized Perron
    vector of ``-D + B``."""
    y = matrix.perron_pair(net.linearization()).vector
    return ManifoldBox(epsilon * y, np.ones(net.n))


def build_invariant_box(net, control=None, samples_per_face=32, start=0.5, min_epsilon=1e-8):
    """Halve ``epsilon`` from ``start`` until the drift points into the box
    ``[eps y, 1]`` on every face sample. Returns ``(box, epsilon)``."""
    ctrl = _control(net, control)
    if epidemic_threshold(net) <= 0:
        raise PreconditionError("invariant box needs s(-D + B) > 0")
    y = matrix.perron_pair(net.linearization()).vector
    eps = start
    while eps >= min_epsilon:
        box = ManifoldBox(eps * y, np.ones(net.n))
        if verify_inward_pointing(net, box, ctrl, samples_per_face).passed:
            return box, eps
        eps *= 0.5
    raise ConvergenceError(f"no inward-pointing box found with epsilon >= {min_epsilon:g}")


# Monotonicity ---------------------------------------------------------------

def kamke_muller_check(net, box, control=None, samples=1000):
    """Kamke-Mueller condition for the positive orthant on interior samples."""
    ctrl = _control(net, control)
    pts = interior_points(box, samples)
    return kamke_muller(lambda x: jacobian(net, x, ctrl), pts)


# Control analyses -----------------------------------------------------------

@dataclass(frozen=True)
class ControlComparison:
    x_star: np.ndarray
    x_bar_star: np.ndarray
    strictly_less: bool

    def to_dict(self):
        return {"x_star": self.x_star.tolist(), "x_bar_star": self.x_bar_star.tolist(),
                "strictly_less": self.strictly_less}


def control_comparison(net, control, tol=1e-12, slack=1e-9):
    """Endemic equilibria without (``x_star``) and with (``x_bar_star``)
    control, and whether control strictly lowers every node."""
    ctrl = _control(net, control)
    if epidemic_threshold(net) <= 0:
        raise PreconditionError("control comparison needs s(-D + B) > 0")
    x_star = solve_endemic(net, None, tol)
    x_bar = x_star.copy() if ctrl.is_zero else solve_endemic(net, ctrl, tol)
    strictly_less = bool(np.all(x_bar < x_star - slack))
    return ControlComparison(x_star, x_bar, strictly_less)


@dataclass(frozen=True)
class ContinuationPoint:
    alpha: float
    x: np.ndarray
    slope: np.ndarray


def continuation_slope(net, h_bar, alpha, x_alpha):
    """``dx/dalpha = -K_alpha^{-1} H_bar x_alpha`` along the frozen-control path,
    with ``K_alpha = D + alpha H_bar - (I - X_alpha) B + diag(B x_alpha)``."""
    K = (np.diag(net.d + alpha * h_bar + net.b @ x_alpha)
         - (1.0 - x_alpha)[:, None] * net.b)
    return -np.linalg.solve(K, h_bar * x_alpha)


def continuation_alpha(net, control, grid_size=11, tol=1e-12, endpoint_tol=1e-8):
    """Equilibria of ``x' = (-D - alpha H_bar + (I - X) B) x`` for ``alpha``
    on an even grid over [0, 1], with ``H_bar = H(x_bar_star)`` frozen.

    Raises ``ConvergenceError`` if the path is not strictly decreasing in
    every component or its endpoints miss ``x_star`` / ``x_bar_star``.
    """
    ctrl = _control(net, control)
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    if epidemic_threshold(net) <= 0:
        raise PreconditionError("continuation needs s(-D + B) > 0")
    x_bar = solve_endemic(net, ctrl, tol)
    h_bar = ctrl.h(x_bar)
    if not np.any(h_bar > 0):
        raise PreconditionError("continuation needs a control that is active at x_bar_star")

    path = []
    for alpha in np.linspace(0.0, 1.0, grid_size):
        frozen = SISNetwork(net.d + alpha * h_bar, net.b)
        x = solve_endemic(frozen, None, tol)
        if x is None:
            raise ConvergenceError(f"endemic state vanished at alpha={alpha:g}")
        path.append(ContinuationPoint(float(alpha), x, continuation_slope(net, h_bar, alpha, x)))

    xs = np.array([p.x for p in path])
    if not np.all(np.diff(xs, axis=0) < 0):
        raise ConvergenceError("continuation path is not strictly decreasing")
    x_star = solve_endemic(net, None, tol)
    if np.max(np.abs(xs[0] - x_star)) > endpoint_tol or np.max(np.abs(xs[-1] - x_bar)) > endpoint_tol:
        raise ConvergenceError("continuation endpoints do not match the equilibria")
    return path
