"""Weak transport costs ``C(x, p)`` on finite grounds.

Three kinds are supported:

``LinearCost``
    ``C(x_i, p) = sum_j c_ij p_j``.
``MartingaleCost``
    the linear cost restricted to conditionals with barycentre ``x_i``
    (``+inf`` otherwise); rows and columns live on the real line.
``MartonCost``
    ``C(x_i, p) = theta(x_i - mean(p))`` for a convex ``theta``.

Each cost also provides the ``R_C`` transform
``R_C phi(x_i) = inf_p C(x_i, p) + p(phi)``, computed exactly from the
finite structure (vertex minimisation, lower convex envelopes).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyFinitePart, NotAProbability, ShapeMismatch, ValidationError
from .extended import INF, ZERO_MASS, mass_mul

PROB_TOL = 1e-9


# -- 1-D lower convex envelope ------------------------------------------------

@dataclass(frozen=True)
class EnvelopePiece:
    """Piecewise-linear lower convex hull through ``(xs, ys)`` vertices."""

    xs: np.ndarray
    ys: np.ndarray

    @property
    def slopes(self):
        return np.diff(self.ys) / np.diff(self.xs)

    @property
    def lo(self):
        return float(self.xs[0])

    @property
    def hi(self):
        return float(self.xs[-1])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lo) & (x <= self.hi)
        if len(self.xs) == 1:
            return np.where(inside, self.ys[0], INF)
        return np.where(inside, np.interp(x, self.xs, self.ys), INF)

    def slope_at(self, x):
        """A subgradient of the envelope at ``x`` (``x`` inside the hull).

        Any value between the adjacent segment slopes works; the right-hand
        slope is returned, except at the last vertex.
        """
        if len(self.xs) == 1:
            return 0.0
        s = self.slopes
        k = int(np.searchsorted(self.xs, x, side="right")) - 1
        return float(s[min(max(k, 0), len(s) - 1)])


def convex_envelope_1d(xs, ys):
    """Greatest convex function below the points ``(xs[j], ys[j])``.

    ``xs`` must be strictly increasing.  Points with ``ys = +inf`` are
    dropped; at least one finite value is required.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ShapeMismatch("xs and ys must be 1-D arrays of equal length")
    if np.any(np.diff(xs) <= 0):
        raise ValidationError("xs must be strictly increasing")
    keep = np.isfinite(ys)
    if not keep.any():
        raise EmptyFinitePart("no finite values to envelope")
    px, py = xs[keep], ys[keep]

    hull = []
    for k in range(len(px)):
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (px[a] - px[o]) * (py[k] - py[o]) - (py[a] - py[o]) * (px[k] - px[o])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(k)
    hx = px[hull].copy()
    hy = py[hull].copy()
    hx.setflags(write=False)
    hy.setflags(write=False)
    return EnvelopePiece(hx, hy)


# -- cost catalog ------------------------------------------------------------

def _check_prob(p):
    p = np.asarray(p, dtype=float)
    if np.any(p < -PROB_TOL) or abs(p.sum() - 1.0) > PROB_TOL:
        raise NotAProbability(f"weights sum to {p.sum():.12g}, expected 1")
    return np.maximum(p, 0.0)


def _cost_matrix(c, rows, cols):
    c = np.array(c, dtype=float)
    if c.shape != (len(rows), len(cols)):
        raise ShapeMismatch(f"cost matrix shape {c.shape} != ({len(rows)}, {len(cols)})")
    if np.any(np.isnan(c)) or np.any(c == -INF):
        raise ValidationError("cost entries must be real or +inf")
    c.setflags(write=False)
    return c


class WeakCost:
    kind = None

    def __init__(self, rows, cols):
        self.rows = rows
        self.cols = cols

    @property
    def shape(self):
        return (len(self.rows), len(self.cols))

    def eval_C(self, i, p):
        raise NotImplementedError

    def perspective_rows(self, gamma):
        """``m_i C(x_i, gamma_i / m_i)`` for every row; leading axes batch."""
        raise NotImplementedError

    def row_perspective(self, i, row):
        row = np.asarray(row, dtype=float)
        if row.sum() <= ZERO_MASS:
            return 0.0
        full = np.zeros(self.shape)
        full[i] = row
        return float(self.perspective_rows(full)[i])

    def rc_transform(self, phi):
        raise NotImplementedError


class LinearCost(WeakCost):
    kind = "linear"

    def __init__(self, rows, cols, c):
        super().__init__(rows, cols)
        self.c = _cost_matrix(c, rows, cols)
        finite = self.c[np.isfinite(self.c)]
        self.lower_bound = float(finite.min()) if finite.size else INF

    def eval_C(self, i, p):
        p = _check_prob(p)
        return float(mass_mul(self.c[i], p).sum())

    def perspective_rows(self, gamma):
        return mass_mul(self.c, gamma).sum(axis=-1)

    def rc_transform(self, phi):
        phi = np.asarray(phi, dtype=float)
        return np.min(self.c + phi[None, :], axis=1)

    def to_dict(self):
        return {"kind": self.kind, "matrix": self.c.tolist()}


class MartingaleCost(LinearCost):
    """Linear cost on conditionals whose barycentre equals the source point."""

    kind = "martingale"

    def __init__(self, rows, cols, c):
        super().__init__(rows, cols, c)
        self.x = rows.line
        self.y = cols.line
        both = np.concatenate([self.x, self.y])
        self.mean_tol = 1e-9 * float(np.ptp(both))

    def mean_residual(self, gamma):
        """``sum_j gamma_ij (y_j - x_i)`` per row."""
        gamma = np.asarray(gamma, dtype=float)
        return gamma @ self.y - gamma.sum(axis=-1) * self.x

    def eval_C(self, i, p):
        p = _check_prob(p)
        if abs(p @ self.y - self.x[i]) > self.mean_tol:
            return INF
        return float(mass_mul(self.c[i], p).sum())

    def perspective_rows(self, gamma):
        gamma = np.asarray(gamma, dtype=float)
        m = gamma.sum(axis=-1)
        off = np.abs(self.mean_residual(gamma)) > self.mean_tol * m
        lin = mass_mul(self.c, gamma).sum(axis=-1)
        return np.where(off & (m > ZERO_MASS), INF, lin)

    def row_envelope(self, i, phi):
        return convex_envelope_1d(self.y, self.c[i] + np.asarray(phi, dtype=float))

    def rc_transform(self, phi):
        return self.rc_transform_with_slopes(phi)[0]

    def rc_transform_with_slopes(self, phi):
        """Values of ``R_C phi`` and supporting slopes (the multiplier ``h``).

        For every row, ``value_i + slope_i (y_j - x_i) <= c_ij + phi_j`` for
        all ``j``; rows whose point falls outside the envelope's hull get
        ``+inf`` and slope 0.
        """
        vals = np.empty(len(self.x))
        slopes = np.zeros(len(self.x))
        for i, xi in enumerate(self.x):
            env = self.row_envelope(i, phi)
            vals[i] = env(xi)
            if np.isfinite(vals[i]):
                slopes[i] = env.slope_at(xi)
        return vals, slopes


THETAS = {
    "quadratic": lambda z: z * z,
    "absolute": np.abs,
}


class MartonCost(WeakCost):
    """``theta(x - barycentre(p))``; quadratic works in any dimension."""

    kind = "marton"
    lower_bound = 0.0

    def __init__(self, rows, cols, theta="quadratic"):
        super().__init__(rows, cols)
        if theta not in THETAS:
            raise ValidationError(f"unknown theta {theta!r}; expected one of {sorted(THETAS)}")
        if rows.dim != cols.dim:
            raise ValidationError("Marton cost needs rows and columns of equal dimension")
        if theta == "absolute" and rows.dim != 1:
            raise ValidationError("absolute theta is only supported on the line")
        self.theta = theta
        self.X = rows.points
        self.Y = cols.points

    def _theta(self, z):
        # z has a trailing coordinate axis
        if self.theta == "quadratic":
            return np.sum(z * z, axis=-1)
        return np.abs(z[..., 0])

    def eval_C(self, i, p):
        p = _check_prob(p)
        return float(self._theta(self.X[i] - p @ self.Y))

    def perspective_rows(self, gamma):
        gamma = np.asarray(gamma, dtype=float)
        m = gamma.sum(axis=-1)
        diff = m[..., None] * self.X - gamma @ self.Y
        pos = m > ZERO_MASS
        if self.theta == "quadratic":
            with np.errstate(divide="ignore", invalid="ignore"):
                val = np.sum(diff * diff, axis=-1) / np.where(pos, m, 1.0)
        else:
            val = np.abs(diff[..., 0])
        return np.where(pos, val, 0.0)

    def rc_transform(self, phi):
        """Exact discrete transform via the convex envelope of ``phi``.

        ``inf_p theta(x - mean p) + p(phi) = min_z env(z) + theta(x - z)``
        where ``env`` is the lower convex envelope of ``phi`` over the
        column points; the minimum over ``z`` is taken among envelope
        vertices, the clipped point ``x`` and (quadratic theta) the
        per-segment stationary points.
        """
        if self.rows.dim != 1:
            raise ValidationError("Marton R_C transform is implemented on the line only")
        env = convex_envelope_1d(self.cols.line, phi)
        x = self.rows.line
        cands = [np.broadcast_to(env.xs, (len(x), len(env.xs))),
                 np.clip(x, env.lo, env.hi)[:, None]]
        if self.theta == "quadratic" and len(env.xs) > 1:
            z = x[:, None] - 0.5 * env.slopes[None, :]
            cands.append(np.clip(z, env.xs[:-1], env.xs[1:]))
        z = np.concatenate(cands, axis=1)
        vals = env(z) + THETAS[self.theta](x[:, None] - z)
        return vals.min(axis=1)

    def to_dict(self):
        return {"kind": self.kind, "theta": self.theta}


def make_cost(kind, rows, cols, matrix=None, theta=None):
    if kind == "linear":
        return LinearCost(rows, cols, matrix)
    if kind == "martingale":
        return MartingaleCost(rows, cols, matrix)
    if kind == "marton":
        return MartonCost(rows, cols, theta or "quadratic")
    raise ValidationError(f"unknown cost kind {kind!r}")


# -- functional interface ---------------------------------------------------

def eval_C(cost, row_index, p):
    return cost.eval_C(row_index, p)


def row_perspective(cost, row_index, row_masses):
    return cost.row_perspective(row_index, row_masses)


def rc_transform(cost, phi):
    return cost.rc_transform(phi)
