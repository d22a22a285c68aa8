"""Integration of autonomous drifts, convergence detection and invariance
monitoring."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IntegrationError

RK4 = "rk4"
RK45 = "rk45"


@dataclass(frozen=True)
class IntegratorConfig:
    """``method`` is ``"rk45"`` (adaptive Dormand-Prince, tolerances
    ``atol``/``rtol``) or ``"rk4"`` (classical fixed step ``step``).
    Every ``output_stride``-th accepted step is recorded; the initial and
    final states always are."""

    T: float = 100.0
    method: str = RK45
    step: float = 0.01
    atol: float = 1e-9
    rtol: float = 1e-9
    output_stride: int = 1

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        if self.method not in (RK4, RK45):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == RK4 and not self.step > 0:
            raise ValueError("fixed step must be positive")
        if self.method == RK45 and not (self.atol > 0 and self.rtol > 0):
            raise ValueError("tolerances must be positive")
        if self.output_stride < 1:
            raise ValueError("output_stride must be >= 1")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    flags: np.ndarray = None

    def __len__(self):
        return len(self.times)

    @property
    def final(self):
        return self.states[-1]

    def to_csv_rows(self):
        n = self.states.shape[1] if self.states.ndim == 2 else 0
        header = ["t"] + [f"x_{i + 1}" for i in range(n)]
        rows = [[float(t), *map(float, x)] for t, x in zip(self.times, self.states)]
        return header, rows


def _keep(n_steps, stride):
    idx = list(range(0, n_steps + 1, stride))
    if idx[-1] != n_steps:
        idx.append(n_steps)
    return idx


def _rk4(drift, x0, cfg):
    n_steps = max(1, math.ceil(cfg.T / cfg.step - 1e-9))
    h = cfg.T / n_steps
    times = np.linspace(0.0, cfg.T, n_steps + 1)
    states = np.empty((n_steps + 1, x0.size))
    states[0] = x = x0
    for k in range(n_steps):
        k1 = drift(x)
        k2 = drift(x + 0.5 * h * k1)
        k3 = drift(x + 0.5 * h * k2)
        k4 = drift(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise IntegrationError(f"non-finite state at t={times[k + 1]:g}")
        states[k + 1] = x
    keep = _keep(n_steps, cfg.output_stride)
    return times[keep], states[keep]


def _rk45(drift, x0, cfg):
    sol = solve_ivp(lambda t, x: drift(x), (0.0, cfg.T), x0, method="RK45",
                    atol=cfg.atol, rtol=cfg.rtol)
    if sol.status != 0:
        raise IntegrationError(f"adaptive integration failed: {sol.message}")
    keep = _keep(sol.t.size - 1, cfg.output_stride)
    return sol.t[keep], sol.y.T[keep]


def integrate(drift, x0, config=None):
    """Integrate ``x' = drift(x)`` from ``x0`` over ``[0, config.T]``.

    Deterministic for fixed inputs. Raises ``IntegrationError`` on step
    underflow or non-finite states.
    """
    config = config or IntegratorConfig()
    x0 = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    if config.method == RK4:
        times, states = _rk4(drift, x0, config)
    else:
        times, states = _rk45(drift, x0, config)
    if not np.all(np.isfinite(states)):
        raise IntegrationError("trajectory contains non-finite states")
    return Trajectory(times=times, states=states)


def detect_convergence(traj, drift, tol=1e-6, window=0.1):
    """Final state if the trajectory has settled, else ``None``.

    Settled means ``|drift(final)|_inf < tol`` and no state in the last
    ``window`` fraction of the time span deviates from the final state by
    ``tol`` or more.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    final = traj.states[-1]
    if np.max(np.abs(drift(final))) >= tol:
        return None
    t0 = traj.times[0] + (1.0 - window) * (traj.times[-1] - traj.times[0])
    tail = traj.states[traj.times >= t0]
    if np.max(np.abs(tail - final)) >= tol:
        return None
    return final.copy()


def fit_decay_rate(traj, target, floor=1e-10):
    """Exponential rate ``alpha`` from a least-squares fit of
    ``log |x(t) - target|_inf`` against ``t``, using samples above ``floor``.
    ``None`` when fewer than two samples qualify."""
    dist = np.max(np.abs(traj.states - np.asarray(target, dtype=float)), axis=1)
    keep = dist > floor
    if np.count_nonzero(keep) < 2:
        return None
    slope = np.polyfit(traj.times[keep], np.log(dist[keep]), 1)[0]
    return float(-slope)


def inside_mask(traj, box, slack=0.0):
    if len(traj) == 0:
        return np.zeros(0, dtype=bool)
    lo = box.lower - slack
    hi = box.upper + slack
    return np.all((traj.states >= lo) & (traj.states <= hi), axis=1)


def monitor_invariance(traj, box, slack=1e-6):
    """True iff every recorded sample lies in ``box`` inflated by ``slack``."""
    return bool(np.all(inside_mask(traj, box, slack)))


def annotate_invariance(traj, box, slack=1e-6):
    """Copy of ``traj`` whose ``flags`` mark the samples inside the box."""
    return Trajectory(traj.times, traj.states, inside_mask(traj, box, slack))
