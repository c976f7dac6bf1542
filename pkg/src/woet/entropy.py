"""Admissible entropy functions and their transforms.

Every catalog member implements, in closed form and vectorised over numpy
arrays,

* ``F(s)``            the entropy itself on ``[0, inf)``;
* ``recession``       ``lim F(s)/s``;
* ``Fcirc(phi)``      ``inf_{s>=0} phi*s + F(s)``;
* ``Fstar(phi)``      ``sup_{s>=0} s*phi - F(s)``  (so ``Fcirc(phi) = -Fstar(-phi)``);
* ``R(r)``            reverse density ``r F(1/r)``, with ``R(0) = recession``;
* ``Rstar(psi)``      Legendre conjugate of ``R``;
* ``witness(psi)``    a point ``s > 0`` with ``R(s) + Rstar(psi) = s psi``.

New kinds plug in by subclassing :class:`EntropyFunction`.
"""

from __future__ import annotations

import numpy as np
from scipy.special import xlogy

from .errors import NegativeArgument, PsiOutOfDomain, ValidationError
from .extended import INF, mass_mul
from .measures import lebesgue_split, require_same_ground

# relative slack when testing membership of an indicator's interval
DOMAIN_RTOL = 1e-9


def _nonneg(x, name="s"):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise NegativeArgument(f"{name} must be >= 0")
    return x


class EntropyFunction:
    """Base class; subclasses fill in the closed forms."""

    kind = None
    recession = INF

    #: closed interval containing D(F)
    domain = (0.0, INF)

    def F(self, s):
        raise NotImplementedError

    def Fcirc(self, phi):
        raise NotImplementedError

    def Fstar(self, phi):
        return -self.Fcirc(-np.asarray(phi, dtype=float))

    def R(self, r):
        raise NotImplementedError

    def Rstar(self, psi):
        raise NotImplementedError

    def witness(self, psi):
        """Return ``s`` attaining the Fenchel-Young equality for R at ``psi``."""
        raise NotImplementedError

    @property
    def F0(self):
        return float(self.F(0.0))

    @property
    def superlinear(self):
        return self.recession == INF

    def to_dict(self):
        return {"kind": self.kind}

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(tuple(sorted(self.to_dict().items())))

    def __repr__(self):
        params = ", ".join(f"{k}={v}" for k, v in self.to_dict().items() if k != "kind")
        return f"{self.kind}({params})"


class KL(EntropyFunction):
    """Logarithmic entropy ``s log s - s + 1``."""

    kind = "KL"

    def F(self, s):
        s = _nonneg(s)
        return xlogy(s, s) - s + 1.0

    def Fcirc(self, phi):
        return -np.expm1(-np.asarray(phi, dtype=float))

    def Fstar(self, phi):
        return np.expm1(np.asarray(phi, dtype=float))

    def R(self, r):
        r = _nonneg(r, "r")
        with np.errstate(divide="ignore"):
            return np.where(r > 0, r - 1.0 - np.log(np.where(r > 0, r, 1.0)), INF)

    def Rstar(self, psi):
        psi = np.asarray(psi, dtype=float)
        return np.where(psi < 1, -np.log1p(-np.where(psi < 1, psi, 0.0)), INF)

    def witness(self, psi):
        psi = _check_witness_domain(self, psi)
        return 1.0 / (1.0 - psi)


class Range(EntropyFunction):
    """Indicator of ``[a, b]`` with ``0 < a <= 1 <= b < inf``."""

    kind = "Range"

    def __init__(self, a, b):
        a, b = float(a), float(b)
        if not (0 < a <= 1 <= b < INF):
            raise ValidationError(f"Range entropy needs 0 < a <= 1 <= b < inf, got a={a}, b={b}")
        self.a, self.b = a, b
        self.domain = (a, b)

    def _indicator(self, s, lo, hi):
        inside = (s >= lo * (1 - DOMAIN_RTOL)) & (s <= hi * (1 + DOMAIN_RTOL))
        return np.where(inside, 0.0, INF)

    def F(self, s):
        return self._indicator(_nonneg(s), self.a, self.b)

    def Fcirc(self, phi):
        phi = np.asarray(phi, dtype=float)
        return np.minimum(self.a * phi, self.b * phi)

    def Fstar(self, phi):
        phi = np.asarray(phi, dtype=float)
        return np.maximum(self.a * phi, self.b * phi)

    def R(self, r):
        # support of r F(1/r) is [1/b, 1/a]; R(0) = recession = inf
        r = _nonneg(r, "r")
        return np.where(r > 0, self._indicator(r, 1.0 / self.b, 1.0 / self.a), INF)

    def Rstar(self, psi):
        psi = np.asarray(psi, dtype=float)
        return np.where(psi >= 0, psi / self.a, psi / self.b)

    def witness(self, psi):
        psi = _check_witness_domain(self, psi)
        return np.where(psi >= 0, 1.0 / self.a, 1.0 / self.b)

    def to_dict(self):
        return {"kind": self.kind, "a": self.a, "b": self.b}


class Indicator1(Range):
    """Hard marginal constraint: ``F(1) = 0`` and ``+inf`` elsewhere."""

    kind = "Indicator1"

    def __init__(self):
        super().__init__(1.0, 1.0)

    def Fcirc(self, phi):
        return np.asarray(phi, dtype=float) * 1.0

    Fstar = Fcirc
    Rstar = Fcirc

    def to_dict(self):
        return {"kind": self.kind}


class ChiSquared(EntropyFunction):
    """``(s - 1)^2``."""

    kind = "ChiSquared"

    def F(self, s):
        s = _nonneg(s)
        return (s - 1.0) ** 2

    def Fcirc(self, phi):
        # minimiser s = max(0, 1 - phi/2)
        phi = np.asarray(phi, dtype=float)
        return 1.0 - np.maximum(0.0, 1.0 - 0.5 * phi) ** 2

    def Fstar(self, phi):
        phi = np.asarray(phi, dtype=float)
        return np.maximum(0.0, 1.0 + 0.5 * phi) ** 2 - 1.0

    def R(self, r):
        r = _nonneg(r, "r")
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return np.where(r > 0, (r - 1.0) ** 2 / np.where(r > 0, r, 1.0), INF)

    def Rstar(self, psi):
        psi = np.asarray(psi, dtype=float)
        return np.where(psi <= 1, 2.0 - 2.0 * np.sqrt(np.maximum(1.0 - psi, 0.0)), INF)

    def witness(self, psi):
        psi = _check_witness_domain(self, psi)
        return 1.0 / np.sqrt(1.0 - psi)


def _check_witness_domain(e, psi):
    psi = np.asarray(psi, dtype=float)
    if np.any(psi >= e.F0):
        raise PsiOutOfDomain(f"{e.kind}: psi must be < F(0) = {e.F0}")
    return psi


CATALOG = {"KL": KL, "Indicator1": Indicator1, "Range": Range, "ChiSquared": ChiSquared}


def make_entropy(kind, **params):
    try:
        cls = CATALOG[kind]
    except KeyError:
        raise ValidationError(f"unknown entropy kind {kind!r}; expected one of {sorted(CATALOG)}")
    try:
        return cls(**params)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for {kind}: {exc}") from None


def entropy_from_dict(d):
    d = dict(d)
    return make_entropy(d.pop("kind"), **d)


# -- functional interface ---------------------------------------------------

def eval_F(e, s):
    return e.F(s)


def recession(e):
    return e.recession


def eval_Fcirc(e, phi):
    return e.Fcirc(phi)


def eval_Fstar(e, phi):
    return e.Fstar(phi)


def eval_R(e, r):
    return e.R(r)


def eval_Rstar(e, psi):
    return e.Rstar(psi)


def bm_witness(e, psi):
    return e.witness(psi)


def divergence_weights(e, gamma_w, mu_w):
    """``F(gamma|mu)`` from weight arrays; leading axes are batch axes."""
    gamma_w = np.asarray(gamma_w, dtype=float)
    mu_w = np.broadcast_to(np.asarray(mu_w, dtype=float), gamma_w.shape)
    density, singular = lebesgue_split(gamma_w, mu_w)
    regular = mass_mul(e.F(density), mu_w).sum(axis=-1)
    return regular + mass_mul(e.recession, singular.sum(axis=-1))


def reverse_weights(e, mu_w, gamma_w):
    """``R(mu|gamma)`` from weight arrays; the reverse of :func:`divergence_weights`."""
    gamma_w = np.asarray(gamma_w, dtype=float)
    mu_w = np.broadcast_to(np.asarray(mu_w, dtype=float), gamma_w.shape)
    rho, singular = lebesgue_split(mu_w, gamma_w)
    regular = mass_mul(e.R(rho), gamma_w).sum(axis=-1)
    return regular + mass_mul(e.F0, singular.sum(axis=-1))


def divergence(e, gamma, mu):
    """Entropy divergence of ``gamma`` relative to ``mu``."""
    require_same_ground(gamma, mu)
    return float(divergence_weights(e, gamma.weights, mu.weights))


def reverse_functional(e, mu, gamma):
    require_same_ground(mu, gamma)
    return float(reverse_weights(e, mu.weights, gamma.weights))
