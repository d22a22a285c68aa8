"""Index-sum uniqueness certificate for equilibria in a box.

A box is compact and contractible, so its Euler characteristic is 1. If
the drift points strictly inward on the boundary, the indices
``sign det(-df)`` of the zeros inside sum to 1. When every zero found is
nondegenerate and Hurwitz (index +1), exactly one zero can exist.

``field`` arguments must accept a batch ``(m, n)`` of states and return an
``(m, n)`` array; ``jacobian`` arguments take a single state.
"""

import enum
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import ndimage
from scipy.optimize import least_squares

from . import matrix
from ._parallel import parallel_map
from .box import grid_points, halton, verify_inward

EULER_CHARACTERISTIC = 1
DEGENERATE = 0
MAX_GRID_DIM = 6


def index_of(jac, rel_tol=1e-10):
    """``sign det(-jac)``, or ``DEGENERATE`` (0) when the determinant is
    below ``rel_tol`` times the Hadamard bound of ``jac``."""
    jac = matrix.as_square(jac, "jacobian")
    det = float(np.linalg.det(-jac))
    scale = float(np.prod(np.linalg.norm(jac, axis=1)))
    if abs(det) <= rel_tol * scale or scale == 0.0:
        return DEGENERATE
    return 1 if det > 0 else -1


@dataclass(frozen=True)
class EquilibriumRecord:
    location: np.ndarray
    residual: float
    index: int
    hurwitz: object  # True, False, or None when indeterminate
    det_neg_jacobian: float
    abscissa: float

    def to_dict(self):
        return {
            "location": self.location.tolist(),
            "residual": self.residual,
            "index": "degenerate" if self.index == DEGENERATE else self.index,
            "hurwitz": "indeterminate" if self.hurwitz is None else self.hurwitz,
            "det_neg_jacobian": self.det_neg_jacobian,
            "spectral_abscissa": self.abscissa,
        }


def classify_root(jacobian, x, residual):
    J = np.asarray(jacobian(x), dtype=float)
    return EquilibriumRecord(
        location=np.asarray(x, dtype=float),
        residual=float(residual),
        index=index_of(J),
        hurwitz=matrix.is_hurwitz(J).verdict,
        det_neg_jacobian=float(np.linalg.det(-J)),
        abscissa=matrix.spectral_abscissa(J),
    )


def _safe_eval(field, x):
    try:
        fx = np.asarray(field(x[None, :]), dtype=float)[0]
    except (ValueError, ArithmeticError):
        return None
    return fx if np.all(np.isfinite(fx)) else None


def newton(field, jacobian, x0, tol=1e-10, max_iter=60, max_halvings=20):
    """Damped Newton iteration. Returns ``(x, residual)``; the residual is
    ``inf`` when the iteration broke down."""
    x = np.asarray(x0, dtype=float).copy()
    fx = _safe_eval(field, x)
    if fx is None:
        return x, np.inf
    res = float(np.max(np.abs(fx)))
    for _ in range(max_iter):
        if res < tol:
            return x, res
        try:
            step = np.linalg.solve(np.asarray(jacobian(x), dtype=float), -fx)
        except (np.linalg.LinAlgError, ValueError, ArithmeticError):
            return x, np.inf
        t = 1.0
        for _ in range(max_halvings):
            x_try = x + t * step
            f_try = _safe_eval(field, x_try)
            if f_try is not None and np.max(np.abs(f_try)) < res:
                break
            t *= 0.5
        else:
            return x, res
        x, fx = x_try, f_try
        res = float(np.max(np.abs(fx)))
    return x, res


def seed_points(box, seeds_per_dim, budget=4096):
    """Cell-centred grid seeds for ``n <= 6``, Halton seeds beyond."""
    if box.n <= MAX_GRID_DIM:
        return grid_points(box, seeds_per_dim)
    return box.scale(halton(budget + 1, box.n)[1:])


def _dedup(points, radius):
    kept = []
    for p in sorted(points, key=lambda item: tuple(item[0])):
        if all(np.max(np.abs(p[0] - q[0])) > radius for q in kept):
            kept.append(p)
    return kept


@dataclass
class Enumeration:
    """Equilibria found in a box plus the seed bookkeeping."""

    equilibria: list
    seeds_total: int
    seeds_converged: int
    seeds_in_box: int

    def __len__(self):
        return len(self.equilibria)

    def __iter__(self):
        return iter(self.equilibria)

    def __getitem__(self, k):
        return self.equilibria[k]

    def seed_report(self):
        return {"total": self.seeds_total, "converged": self.seeds_converged,
                "in_box": self.seeds_in_box,
                "dropped": self.seeds_total - self.seeds_converged}


def enumerate_equilibria(field, jacobian, box, seeds_per_dim=5, tol=1e-10, dedup=1e-6):
    """Multi-start Newton from a seed grid; roots are kept if they lie in the
    box, deduplicated, and classified by index and Hurwitz status."""
    if seeds_per_dim < 2:
        raise ValueError("seeds_per_dim must be >= 2")
    seeds = seed_points(box, seeds_per_dim)
    results = parallel_map(lambda s: newton(field, jacobian, s, tol), seeds)
    converged = [(x, r) for x, r in results if r < tol]
    inside = [(np.clip(x, box.lower, box.upper), r) for x, r in converged
              if box.contains(x, slack=1e-12)]
    records = [classify_root(jacobian, x, r) for x, r in _dedup(inside, dedup)]
    return Enumeration(records, len(seeds), len(converged), len(inside))


# Grid oracle -----------------------------------------------------------------

def _grid_norms(field, box, per_dim):
    n = box.n
    axes = [box.lower[k] + (np.arange(per_dim) + 0.5) / per_dim * box.width[k]
            for k in range(n)]
    norms = np.empty((per_dim,) * n)
    if n > 1:
        mesh = np.meshgrid(*axes[1:], indexing="ij")
        rest = np.stack([m.ravel() for m in mesh], axis=-1)
    else:
        rest = np.zeros((1, 0))
    for i, xi in enumerate(axes[0]):
        slab = np.column_stack([np.full(rest.shape[0], xi), rest])
        vals = np.asarray(field(slab), dtype=float)
        norms[i] = np.linalg.norm(vals, axis=1).reshape((per_dim,) * (n - 1))
    return axes, norms


def grid_scan_roots(field, box, per_dim=200, tol=1e-8, dedup=1e-6, max_candidates=256):
    """Roots located by brute force: discrete local minima of ``|field|`` on
    a ``per_dim^n`` cell-centred grid, refined by derivative-free least
    squares inside the box.

    A grid minimum qualifies when its value is within a Lipschitz bound
    (estimated from grid differences) of zero.
    """
    n = box.n
    axes, norms = _grid_norms(field, box, per_dim)
    h = box.width / per_dim
    lip = 0.0
    for k in range(n):
        if per_dim > 1:
            lip = max(lip, float(np.max(np.abs(np.diff(norms, axis=k)))) / h[k])
    bound = lip * float(np.linalg.norm(h))
    local_min = norms == ndimage.minimum_filter(norms, size=3, mode="nearest")
    idx = np.argwhere(local_min & (norms <= bound + 1e-300))
    order = np.argsort(norms[tuple(idx.T)])[:max_candidates]

    lo, hi = box.lower, box.upper
    found = []
    for k in order:
        x0 = np.array([axes[d][idx[k][d]] for d in range(n)])
        sol = least_squares(lambda x: np.asarray(field(x[None, :]), dtype=float)[0], x0,
                            bounds=(lo, hi), xtol=1e-15, ftol=1e-15, gtol=1e-15)
        res = float(np.max(np.abs(sol.fun)))
        if res < tol:
            found.append((sol.x, res))
    return [x for x, _ in _dedup(found, dedup)]


def match_roots(a, b, radius=1e-3):
    """True iff ``a`` and ``b`` pair up one-to-one within ``radius``."""
    if len(a) != len(b):
        return False
    unused = list(range(len(b)))
    for x in a:
        hits = [j for j in unused if np.max(np.abs(np.asarray(x) - np.asarray(b[j]))) <= radius]
        if len(hits) != 1:
            return False
        unused.remove(hits[0])
    return True


# Certificate -----------------------------------------------------------------

class Verdict(enum.Enum):
    CERTIFIED = "Certified"
    REFUTED = "Refuted"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class CertifyConfig:
    seeds_per_dim: int = 5
    tol: float = 1e-10
    samples_per_face: int = 64
    oracle: bool = True
    oracle_grid: int = 200
    oracle_max_dim: int = 3


@dataclass
class CertificateReport:
    equilibria: list
    index_sum: int
    boundary_ok: bool
    verdict: Verdict
    reasons: list = dc_field(default_factory=list)
    boundary: object = None
    seeds: dict = None
    oracle_roots: list = None
    euler_char: int = EULER_CHARACTERISTIC

    def to_dict(self):
        return {
            "verdict": self.verdict.value,
            "index_sum": self.index_sum,
            "euler_char": self.euler_char,
            "boundary_ok": self.boundary_ok,
            "equilibria": [e.to_dict() for e in self.equilibria],
            "reasons": list(self.reasons),
            "seeds": self.seeds,
            "boundary": self.boundary.to_dict() if self.boundary is not None else None,
            "oracle_roots": (None if self.oracle_roots is None
                             else [np.asarray(r).tolist() for r in self.oracle_roots]),
        }


def decide(equilibria, boundary_ok):
    """Apply the verdict rules; returns ``(verdict, reasons)``."""
    reasons = []
    if len(equilibria) >= 2:
        return Verdict.REFUTED, [f"{len(equilibria)} distinct equilibria in the box"]
    if any(e.hurwitz is False for e in equilibria):
        return Verdict.REFUTED, ["an equilibrium with a non-Hurwitz Jacobian"]
    if not boundary_ok:
        reasons.append("field does not point inward on the whole boundary")
    if not equilibria:
        reasons.append("no equilibrium found")
    if any(e.index == DEGENERATE for e in equilibria):
        reasons.append("degenerate equilibrium (singular Jacobian)")
    if any(e.hurwitz is None for e in equilibria):
        reasons.append("Hurwitz test indeterminate")
    index_sum = sum(e.index for e in equilibria)
    if equilibria and index_sum != EULER_CHARACTERISTIC:
        reasons.append(f"index sum {index_sum} differs from the Euler characteristic")
    if reasons:
        return Verdict.INCONCLUSIVE, reasons
    return Verdict.CERTIFIED, []


def certify_uniqueness(field, jacobian, box, config=None):
    """Run the boundary check, enumerate equilibria, and issue a verdict.

    A Certified verdict is cross-checked against ``grid_scan_roots`` for
    boxes of dimension ``<= config.oracle_max_dim``; disagreement downgrades
    it to Inconclusive.
    """
    config = config or CertifyConfig()
    boundary = verify_inward(field, box, config.samples_per_face)
    found = enumerate_equilibria(field, jacobian, box, config.seeds_per_dim, config.tol)
    verdict, reasons = decide(found.equilibria, boundary.passed)

    oracle = None
    if verdict is Verdict.CERTIFIED and config.oracle and box.n <= config.oracle_max_dim:
        oracle = grid_scan_roots(field, box, config.oracle_grid)
        if not match_roots([e.location for e in found], oracle):
            verdict = Verdict.INCONCLUSIVE
            reasons.append(f"grid oracle found {len(oracle)} roots, Newton found {len(found)}")

    return CertificateReport(
        equilibria=found.equilibria,
        index_sum=sum(e.index for e in found.equilibria),
        boundary_ok=boundary.passed,
        verdict=verdict,
        reasons=reasons,
        boundary=boundary,
        seeds=found.seed_report(),
        oracle_roots=oracle,
    )


def kamke_muller(jacobian, points, tol=1e-12):
    """True iff the Jacobian is Metzler (cooperative) at every point."""
    return all(matrix.is_metzler(jacobian(x), tol) for x in points)
