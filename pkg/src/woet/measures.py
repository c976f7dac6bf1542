"""Finite nonnegative measures on point clouds, couplings and their marginals.

Ground sets are compared by identity: two measures are compatible only when
they reference the very same :class:`GroundSet` object.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GroundMismatch, NegativeScale, ShapeMismatch, ValidationError, ZeroMassRow
from .extended import ZERO_MASS


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


class GroundSet:
    """Ordered, distinct points in R^d.

    Parameters
    ----------
    points : array-like, shape (n,) or (n, d)
        A 1-D input is read as ``n`` points on the real line.
    """

    __slots__ = ("points",)

    def __init__(self, points):
        pts = np.array(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
            raise ValidationError("ground set must be a nonempty list of points")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("ground set points must be finite")
        if len(np.unique(pts, axis=0)) != len(pts):
            raise ValidationError("ground set points must be distinct")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __setattr__(self, name, value):
        raise AttributeError("GroundSet is immutable")

    def __len__(self):
        return self.points.shape[0]

    def __repr__(self):
        return f"GroundSet(n={len(self)}, d={self.dim})"

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def line(self):
        """Coordinates as a flat array; only valid for d = 1."""
        if self.dim != 1:
            raise ValidationError(f"ground set has dimension {self.dim}, expected 1")
        return self.points[:, 0]

    @property
    def spread(self):
        """Largest coordinate range over all axes (0 for a single point)."""
        return float(np.max(np.ptp(self.points, axis=0)))


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    ground: GroundSet
    weights: np.ndarray

    def __post_init__(self):
        w = _frozen(self.weights)
        if w.shape != (len(self.ground),):
            raise ShapeMismatch(f"expected {len(self.ground)} weights, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValidationError("weights must be finite")
        bad = np.flatnonzero(w < 0)
        if bad.size:
            raise ValidationError(f"weights[{bad[0]}] < 0")
        object.__setattr__(self, "weights", w)

    @property
    def mass(self):
        return float(self.weights.sum())

    def __len__(self):
        return len(self.weights)


@dataclass(frozen=True, eq=False)
class Coupling:
    rows: GroundSet
    cols: GroundSet
    mass: np.ndarray

    def __post_init__(self):
        g = _frozen(self.mass)
        if g.shape != (len(self.rows), len(self.cols)):
            raise ShapeMismatch(
                f"coupling shape {g.shape} != ({len(self.rows)}, {len(self.cols)})")
        if not np.all(np.isfinite(g)) or np.any(g < 0):
            raise ValidationError("coupling entries must be finite and nonnegative")
        object.__setattr__(self, "mass", g)

    @property
    def total(self):
        return float(self.mass.sum())

    @property
    def row_masses(self):
        return self.mass.sum(axis=1)

    @property
    def col_masses(self):
        return self.mass.sum(axis=0)


@dataclass(frozen=True)
class LebesgueDecomposition:
    """``gamma = density * mu + singular`` pointwise.

    ``density`` is 0 where ``mu`` vanishes; ``singular`` holds the gamma
    weights on ``{mu = 0}`` and ``regular`` those on ``{mu > 0}``.  Keeping
    ``regular`` makes reconstruction exact, since ``(g / m) * m`` need not
    round back to ``g``.
    """

    density: np.ndarray
    singular: np.ndarray
    regular: np.ndarray

    @property
    def singular_mass(self):
        return float(self.singular.sum())

    def reconstruct(self):
        return self.regular + self.singular


def marginals(coupling):
    """Return the (first, second) marginals of ``coupling``."""
    return (DiscreteMeasure(coupling.rows, coupling.row_masses),
            DiscreteMeasure(coupling.cols, coupling.col_masses))


def disintegrate(coupling, row):
    """Conditional distribution of row ``row``, i.e. ``gamma[row] / m_row``."""
    r = coupling.mass[row]
    m = r.sum()
    if m <= ZERO_MASS:
        raise ZeroMassRow(f"row {row} has no mass")
    return r / m


def lebesgue_split(gamma_w, mu_w):
    """Array version of :func:`lebesgue_decompose` (broadcasts over batches)."""
    gamma_w = np.asarray(gamma_w, dtype=float)
    mu_w = np.asarray(mu_w, dtype=float)
    pos = mu_w > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        density = np.where(pos, gamma_w / np.where(pos, mu_w, 1.0), 0.0)
    singular = np.where(pos, 0.0, gamma_w)
    return density, singular


def lebesgue_decompose(gamma, mu):
    require_same_ground(gamma, mu)
    density, singular = lebesgue_split(gamma.weights, mu.weights)
    regular = np.where(mu.weights > 0, gamma.weights, 0.0)
    return LebesgueDecomposition(_frozen(density), _frozen(singular), _frozen(regular))


def scale(mu, lam):
    if lam < 0:
        raise NegativeScale(f"scale factor {lam} < 0")
    return DiscreteMeasure(mu.ground, mu.weights * lam)


def require_same_ground(a, b):
    if a.ground is not b.ground:
        raise GroundMismatch("measures live on different ground sets")


def product_coupling(mu1, mu2, total=None):
    """Product coupling rescaled to carry ``total`` mass (plain product if None)."""
    g = np.outer(mu1.weights, mu2.weights)
    if total is not None:
        g = g * (total / (mu1.mass * mu2.mass))
    return Coupling(mu1.ground, mu2.ground, g)
