"""Acceptance criteria as runnable checks.

Each ``criterion_k`` returns a ``CriterionResult``; ``run_criterion`` adds
timing. All randomness is seeded so every run is reproducible.
"""

import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import certificate as cert
from . import degroot_friedkin as df
from . import lotka_volterra as lv
from . import matrix, sis
from .box import ManifoldBox
from .dynamics import IntegratorConfig, integrate

REF_D = np.array([0.3, 0.8])
REF_B = np.array([[0.2, 0.5], [0.7, 0.1]])
REF_X_STAR = np.array([0.4413, 0.2973])
REF_X_BAR = np.array([0.15, 0.1142])
COMPETITIVE = dict(d=[1.0, 1.0], a=[[-2.0, 1.0], [1.0, -2.0]])
COMPETITIVE_REGION = lv.LVRegion(radius=3.0 * np.sqrt(2.0), floor=0.1)

SEED = 20240531


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number:2d}: {self.title} | {self.detail} | {self.seconds:.2f}s"


def reference_network():
    return sis.SISNetwork(REF_D, REF_B)


def reference_control():
    return sis.ControlSpec([sis.PowerControl(0.5, 0.5), sis.LinearControl(0.9)])


# Random instances ---------------------------------------------------------------

def random_infection_matrix(rng, n, density=0.5):
    """Nonnegative matrix with a directed ring (hence strongly connected)
    plus random extra edges."""
    b = rng.uniform(0.0, 1.0, (n, n)) * (rng.random((n, n)) < density)
    ring = np.roll(np.eye(n), 1, axis=1)
    return b + ring * rng.uniform(0.2, 1.0, (n, n))


def random_control(rng, n):
    controls = []
    for _ in range(n):
        kind = rng.integers(4)
        if kind == 0:
            controls.append(sis.LinearControl(rng.uniform(0.0, 2.0)))
        elif kind == 1:
            controls.append(sis.PowerControl(rng.uniform(0.0, 1.0), rng.uniform(0.2, 2.0)))
        elif kind == 2:
            controls.append(sis.SaturatingControl(rng.uniform(0.0, 1.0), rng.uniform(0.1, 1.0)))
        else:
            controls.append(sis.ZeroControl())
    return sis.ControlSpec(controls)


def random_endemic_network(rng, n, min_threshold=0.05):
    """Random strongly connected network with ``s(-D + B) >= min_threshold``."""
    while True:
        net = sis.SISNetwork(rng.uniform(0.1, 1.0, n), random_infection_matrix(rng, n))
        if sis.epidemic_threshold(net) >= min_threshold:
            return net


def random_healthy_network(rng, n):
    """Random network with ``s(-D + B)`` drawn from ``[-1, -0.05]`` by
    rescaling the recovery rates."""
    b = random_infection_matrix(rng, n)
    d0 = rng.uniform(0.1, 1.0, n)
    target = rng.uniform(-1.0, -0.05)
    gap = lambda c: matrix.spectral_abscissa(-c * np.diag(d0) + b) - target
    hi = 1.0
    while gap(hi) > 0:
        hi *= 2.0
    c = brentq(gap, 1e-9, hi, xtol=1e-14)
    return sis.SISNetwork(c * d0, b)


def fd_jacobian(f, x, h=1e-6):
    """Central finite-difference Jacobian of ``f`` at ``x``."""
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.column_stack(cols)


def jacobian_rel_error(J, J_fd):
    return float(np.max(np.abs(J - J_fd)) / max(1.0, np.max(np.abs(J))))


def _sis_problem(net, ctrl=None):
    box, _ = sis.build_invariant_box(net, ctrl)
    return sis.vector_field(net, ctrl), (lambda x: sis.jacobian(net, x, ctrl)), box


# Criteria -----------------------------------------------------------------------

def criterion_1():
    net = reference_network()
    s = sis.epidemic_threshold(net)
    ok = abs(s - 0.2633) <= 1e-4
    return ok, f"s(-D+B) = {s:.6f}, target 0.2633 +- 1e-4"


def criterion_2():
    net = reference_network()
    x = sis.solve_endemic(net)
    res = float(np.max(np.abs(sis.drift(net, x))))
    err = float(np.max(np.abs(x - REF_X_STAR)))
    ok = err <= 5e-4 and res < 1e-10
    return ok, f"x* = {np.round(x, 6).tolist()}, |x*-ref| = {err:.2e} (<= 5e-4), residual {res:.1e} (< 1e-10)"


def criterion_3():
    net, ctrl = reference_network(), reference_control()
    x = sis.solve_endemic(net, ctrl)
    err = float(np.max(np.abs(x - REF_X_BAR)))
    comp = sis.control_comparison(net, ctrl)
    ok = err <= 5e-4 and comp.strictly_less
    return ok, (f"x_bar* = {np.round(x, 6).tolist()}, |x_bar*-ref| = {err:.2e} (<= 5e-4), "
                f"strictly_less = {comp.strictly_less}")


def criterion_4(instances=50):
    rng = np.random.default_rng(SEED + 4)
    bad = []
    for k in range(instances):
        n = 2 + k % 4
        net = random_endemic_network(rng, n)
        ctrl = random_control(rng, n)
        field, jac, box = _sis_problem(net, ctrl)
        rep = cert.certify_uniqueness(field, jac, box)
        if not (rep.boundary_ok and len(rep.equilibria) == 1 and rep.index_sum == 1
                and rep.verdict is cert.Verdict.CERTIFIED):
            bad.append((k, n, rep.verdict.value, rep.reasons))
    return not bad, f"{instances - len(bad)}/{instances} instances Certified with index_sum 1" + (
        f"; failures {bad[:3]}" if bad else "")


def criterion_5(instances=50, starts=10, T=500.0, tol=1e-3):
    rng = np.random.default_rng(SEED + 5)
    cfg = IntegratorConfig(T=T)
    bad_solver, bad_traj, worst = 0, 0, 0.0
    for k in range(instances):
        n = 2 + k % 4
        net = random_healthy_network(rng, n)
        ctrl = random_control(rng, n) if k % 2 else None
        if sis.solve_endemic(net, ctrl) is not None:
            bad_solver += 1
        field = sis.vector_field(net, ctrl)
        for x0 in rng.uniform(0.0, 1.0, (starts, n)):
            final = np.max(np.abs(integrate(field, x0, cfg).final))
            worst = max(worst, final)
            bad_traj += final >= tol
    ok = bad_solver == 0 and bad_traj == 0
    return ok, (f"{instances} instances with s in [-1, -0.05]: solver returned none "
                f"{instances - bad_solver}/{instances}, worst |x(T)|_inf = {worst:.2e} (< 1e-3)")


def criterion_6(starts=100, T=500.0, tol=1e-3):
    rng = np.random.default_rng(SEED + 6)
    net, ctrl = reference_network(), reference_control()
    x_bar = sis.solve_endemic(net, ctrl)
    field = sis.vector_field(net, ctrl)
    cfg = IntegratorConfig(T=T)
    worst = 0.0
    for _ in range(starts):
        x0 = rng.uniform(0.0, 1.0, 2)
        while not np.any(x0 > 0):
            x0 = rng.uniform(0.0, 1.0, 2)
        worst = max(worst, float(np.max(np.abs(integrate(field, x0, cfg).final - x_bar))))
    return worst < tol, f"{starts} starts, worst |x(T) - x_bar*|_inf = {worst:.2e} (< 1e-3)"


def random_region_points(rng, region, n, count):
    pts = []
    while len(pts) < count:
        x = rng.uniform(region.floor, region.radius, n)
        if region.contains(x) and np.all(x > region.floor) and np.linalg.norm(x) < region.radius:
            pts.append(x)
    return np.array(pts)


def criterion_7(starts=20, T=50.0):
    rng = np.random.default_rng(SEED + 7)
    model = lv.GLVModel(**COMPETITIVE)
    region = COMPETITIVE_REGION
    x_star = lv.solve_feasible(model, region)
    feasible_ok = x_star is not None and np.max(np.abs(x_star - 1.0)) <= 1e-8
    bound = lv.SectorBound(model.a)
    goh = lv.check_goh(model, bound, [x_star])
    minors = matrix.leading_minors(-bound.A)
    goh_ok = goh.passed and np.allclose(minors, [2.0, 3.0], atol=1e-12)
    violations = []
    for x0 in random_region_points(rng, region, 2, starts):
        rep = lv.comparison_envelope(model, bound, x_star, x0, region.floor, T)
        if not rep.holds:
            violations.append(rep.violation)
    env_ok = not violations
    box = region.inscribed_box(2)
    verdict = cert.certify_uniqueness(lv.vector_field(model),
                                      lambda x: lv.lv_jacobian(model, x), box).verdict
    cert_ok = verdict is cert.Verdict.CERTIFIED
    detail = (f"x* = {np.round(x_star, 10).tolist()} ({'ok' if feasible_ok else 'off'}), "
              f"goh {goh.passed} minors {np.round(minors, 12).tolist()}, "
              f"envelope held {starts - len(violations)}/{starts}"
              + (f" (worst violation {max(violations):.3e})" if violations else "")
              + f", certificate on {box.lower.tolist()}-{np.round(box.upper, 6).tolist()} "
              f"{verdict.value}")
    return feasible_ok and goh_ok and env_ok and cert_ok, detail


def criterion_8(starts=20):
    rng = np.random.default_rng(SEED + 8)
    worst, certified = 0.0, True
    for n in (3, 4, 5):
        model = df.DFModel(np.full(n, 1.0 / n))
        for x0 in df.random_simplex_points(model, starts, rng):
            fp = df.iterate_fixed_point(model, x0)
            worst = max(worst, float(np.max(np.abs(fp.x - 1.0 / n))))
            certified &= df.certify_contraction(model, fp.x)
    model = df.DFModel([0.4, 0.35, 0.25])
    pts = []
    for x0 in df.random_simplex_points(model, starts, rng):
        fp = df.iterate_fixed_point(model, x0)
        certified &= df.certify_contraction(model, fp.x)
        pts.append(fp.x)
    pts = np.array(pts)
    spread = float(np.max(np.abs(pts[:, None, :] - pts[None, :, :])))
    ok = worst <= 1e-8 and certified and spread < 1e-6
    return ok, (f"uniform worst |x - 1/n| = {worst:.1e} (<= 1e-8), contraction certified {certified}, "
                f"non-uniform spread {spread:.1e} (< 1e-6) at {np.round(pts[0], 8).tolist()}")


def oracle_instances():
    """``(label, field, jacobian, box)`` tuples with ``n <= 3``."""
    rng = np.random.default_rng(SEED + 9)
    net = reference_network()
    out = [("reference SIS", *_sis_problem(net)),
           ("reference SIS controlled", *_sis_problem(net, reference_control()))]
    model = lv.GLVModel(**COMPETITIVE)
    out.append(("competitive GLV", lv.vector_field(model), lambda x: lv.lv_jacobian(model, x),
                COMPETITIVE_REGION.inscribed_box(2)))
    cubic = lambda x: x * (1 - x) * (x - 0.5)
    cubic_jac = lambda x: np.array([[-3 * x[0] ** 2 + 3 * x[0] - 0.5]])
    out.append(("scalar cubic", cubic, cubic_jac, ManifoldBox([0.1], [0.9])))
    for k in range(4):
        n = 2 + k % 2
        rnet = random_endemic_network(rng, n)
        out.append((f"random SIS n={n}", *_sis_problem(rnet, random_control(rng, n))))
    return out


def criterion_9():
    mismatched = []
    labels = []
    for label, field, jac, box in oracle_instances():
        found = cert.enumerate_equilibria(field, jac, box)
        grid = cert.grid_scan_roots(field, box, per_dim=200)
        labels.append(f"{label}:{len(found)}/{len(grid)}")
        if not cert.match_roots([e.location for e in found], grid, radius=1e-3):
            mismatched.append(label)
    return not mismatched, "newton/grid roots " + ", ".join(labels)


def criterion_10(points=50, rel_tol=1e-5):
    rng = np.random.default_rng(SEED + 10)
    worst = {}

    def record(name, J, f, x):
        worst[name] = max(worst.get(name, 0.0), jacobian_rel_error(J, fd_jacobian(f, x)))

    for k in range(points):
        n = 2 + k % 4
        net = random_endemic_network(rng, n)
        ctrl = random_control(rng, n)
        x = rng.uniform(0.05, 0.95, n)
        record("sis", sis.jacobian(net, x), lambda y: sis.drift(net, y), x)
        record("sis controlled", sis.jacobian(net, x, ctrl), lambda y: sis.drift(net, y, ctrl), x)

        c = rng.uniform(0.0, 0.5, n) if k % 2 else None
        model = lv.GLVModel(rng.uniform(-1, 1, n), rng.uniform(-2, 2, (n, n)), c)
        x = rng.uniform(0.1, 3.0, n)
        record("glv", lv.lv_jacobian(model, x), lambda y: lv.lv_drift(model, y), x)

        m = 3 + k % 3
        g = rng.dirichlet(np.ones(m))
        while np.any(g >= 0.5):
            g = rng.dirichlet(np.ones(m))
        dmodel = df.DFModel(g / g.sum())
        x = df.random_simplex_points(dmodel, 1, rng)[0]
        x = np.clip(x, 0.01, None)
        x /= x.sum()
        chart = lambda u: df.map_G(dmodel, np.append(u, 1.0 - u.sum()))[:-1]
        record("df chart", df.jacobian_on_simplex(dmodel, x), chart, x[:-1])

    ok = all(v <= rel_tol for v in worst.values())
    return ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f" (<= {rel_tol:g}, {points} pts each)"


CRITERIA = {
    1: ("reference threshold s(-D+B)", criterion_1),
    2: ("reference uncontrolled equilibrium", criterion_2),
    3: ("reference controlled equilibrium and ordering", criterion_3),
    4: ("index sum on 50 random SIS instances", criterion_4),
    5: ("threshold dichotomy below threshold", criterion_5),
    6: ("global attraction of x_bar*", criterion_6),
    7: ("Lotka-Volterra competitive example", criterion_7),
    8: ("DeGroot-Friedkin fixed points", criterion_8),
    9: ("oracle equivalence n <= 3", criterion_9),
    10: ("analytic Jacobians vs finite differences", criterion_10),
}


def run_criterion(number):
    title, fn = CRITERIA[number]
    t0 = time.perf_counter()
    passed, detail = fn()
    return CriterionResult(number, title, bool(passed), detail, time.perf_counter() - t0)
