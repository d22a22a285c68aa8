"""Axis-aligned boxes used as the compact contractible manifold, with the
deterministic face/interior sampling shared by the boundary checks."""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

MAX_CORNER_DIM = 10


@dataclass(frozen=True)
class ManifoldBox:
    """The box ``{x : lower_i <= x_i <= upper_i}``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("lower and upper must be 1-d vectors of equal length")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ValueError("box bounds must be finite")
        if not np.all(lower < upper):
            raise ValueError("box requires lower < upper componentwise")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def cube(cls, lo, hi, n):
        return cls(np.full(n, float(lo)), np.full(n, float(hi)))

    @property
    def n(self):
        return self.lower.size

    @property
    def center(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def width(self):
        return self.upper - self.lower

    def contains(self, x, slack=0.0):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - slack) and np.all(x <= self.upper + slack))

    def scale(self, unit):
        """Map points of the unit cube into the box."""
        return self.lower + np.asarray(unit) * self.width

    def to_dict(self):
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


def halton(n_points, dim):
    """First ``n_points`` of the unscrambled Halton sequence in ``[0, 1)^dim``."""
    if dim == 0:
        return np.zeros((n_points, 0))
    return qmc.Halton(d=dim, scramble=False).random(n_points)


def face_points(box, i, side, samples):
    """Sample points on the face ``x_i = lower_i`` (side ``"lower"``) or
    ``x_i = upper_i`` (side ``"upper"``).

    All ``2^(n-1)`` corners of the face are included when ``n <= 10``,
    followed by ``samples`` Halton points of the remaining coordinates
    (skipping the sequence's first point, which is a corner).
    """
    n = box.n
    others = [j for j in range(n) if j != i]
    blocks = []
    if n <= MAX_CORNER_DIM:
        corners = np.array(list(itertools.product((0.0, 1.0), repeat=n - 1)))
        blocks.append(corners.reshape(2 ** (n - 1), n - 1))
    blocks.append(halton(samples + 1, n - 1)[1:])
    unit = np.vstack(blocks)
    pts = np.empty((unit.shape[0], n))
    pts[:, others] = box.lower[others] + unit * box.width[others]
    pts[:, i] = box.lower[i] if side == "lower" else box.upper[i]
    return pts


def interior_points(box, samples, margin=0.0):
    """Halton points in the box shrunk by ``margin`` (a fraction of width)."""
    unit = halton(samples + 1, box.n)[1:]
    unit = margin + (1.0 - 2.0 * margin) * unit
    return box.scale(unit)


def grid_points(box, per_dim):
    """Cell-centred tensor grid with ``per_dim`` points per axis."""
    axes = [box.lower[k] + (np.arange(per_dim) + 0.5) / per_dim * box.width[k]
            for k in range(box.n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True)
class FaceMargin:
    index: int
    side: str
    worst_margin: float
    worst_point: np.ndarray
    samples: int

    @property
    def ok(self):
        return self.worst_margin > 0


@dataclass(frozen=True)
class InwardReport:
    """Per-face worst inward margins; ``passed`` iff all are positive.

    The margin on a lower face is ``f_i(x)`` and on an upper face
    ``-f_i(x)``, so a positive margin means the field points into the box.
    """

    faces: tuple

    @property
    def passed(self):
        return all(face.ok for face in self.faces)

    @property
    def worst_margin(self):
        return min(face.worst_margin for face in self.faces)

    def failures(self):
        return [face for face in self.faces if not face.ok]

    def to_dict(self):
        return {
            "passed": self.passed,
            "worst_margin": self.worst_margin,
            "faces": [
                {"index": f.index, "side": f.side, "worst_margin": f.worst_margin,
                 "worst_point": f.worst_point.tolist(), "samples": f.samples}
                for f in self.faces
            ],
        }


def verify_inward(field, box, samples_per_face=32):
    """Check that ``field`` points strictly into ``box`` on every face sample.

    ``field`` maps an ``(m, n)`` array of states to an ``(m, n)`` array of
    derivatives.
    """
    if samples_per_face < 1:
        raise ValueError("samples_per_face must be >= 1")
    faces = []
    for i in range(box.n):
        for side, sign in (("lower", 1.0), ("upper", -1.0)):
            pts = face_points(box, i, side, samples_per_face)
            margins = sign * np.asarray(field(pts))[:, i]
            k = int(np.argmin(margins))
            faces.append(FaceMargin(i, side, float(margins[k]), pts[k], len(pts)))
    return InwardReport(tuple(faces))
