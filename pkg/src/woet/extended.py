"""Extended-real helpers.

Values are plain floats / numpy arrays that may hold ``+inf`` or ``-inf``.
The only non-IEEE convention needed throughout is ``0 * (+-inf) = 0`` for
mass terms, which :func:`mass_mul` implements.
"""

import numpy as np

INF = float("inf")

# weights at or below this are exact zeros when testing mass positivity
ZERO_MASS = 1e-15


def mass_mul(value, mass):
    """Multiply ``value`` (possibly infinite) by a nonnegative ``mass``.

    A zero mass annihilates any value, including infinities.
    """
    value = np.asarray(value, dtype=float)
    mass = np.asarray(mass, dtype=float)
    with np.errstate(invalid="ignore"):
        out = value * mass
    return np.where(mass == 0.0, 0.0, out)

