"""Dimensionless scaling that equalizes the magnitudes of the operator blocks.

Raw material constants span ~22 orders of magnitude (elasticity ~1e10 Pa,
permittivity ~1e-11 F/m), which destabilizes the assembled saddle systems.
Dividing by reference constants (c1, omega1, e1, eps1, rho1, l1) with
c1*eps1 = 1, l1 = sqrt(c1/(omega1^2 rho1)) and e1 = 1 makes every block
O(1)-comparable, and the scaled solution maps back through constant factors
a = sqrt(c1)/l1 (displacement) and b = sqrt(eps1)/l1 (potential).
"""

import math
from dataclasses import dataclass, replace

import numpy as np


class ScaleConsistencyError(ValueError):
    """The reference constants violate their defining relations."""


@dataclass(frozen=True)
class ScaleSet:
    """Reference constants for nondimensionalization.

    Invariants (checked to 1e-14 relative at construction):
    c1 * eps1 = 1, l1 = sqrt(c1 / (omega1^2 * rho1)), e1 = 1.
    """

    c1: float
    omega1: float
    e1: float
    eps1: float
    rho1: float
    l1: float

    def __post_init__(self):
        self.validate()

    def validate(self, rtol=1e-14):
        for name in ("c1", "omega1", "e1", "eps1", "rho1", "l1"):
            if not getattr(self, name) > 0:
                raise ScaleConsistencyError(f"{name} must be positive")
        if abs(self.c1 * self.eps1 - 1.0) > rtol:
            raise ScaleConsistencyError(
                f"c1*eps1 = {self.c1 * self.eps1!r} != 1"
            )
        l1_req = math.sqrt(self.c1 / (self.omega1**2 * self.rho1))
        if abs(self.l1 - l1_req) > rtol * l1_req:
            raise ScaleConsistencyError(
                f"l1 = {self.l1!r} inconsistent, required {l1_req!r}"
            )
        if abs(self.e1 - 1.0) > rtol:
            raise ScaleConsistencyError(f"e1 = {self.e1!r} != 1")

    @classmethod
    def from_references(cls, c1, omega1, rho1):
        """Derive the full set from (c1, omega1, rho1)."""
        return cls(
            c1=c1,
            omega1=omega1,
            e1=1.0,
            eps1=1.0 / c1,
            rho1=rho1,
            l1=math.sqrt(c1 / (omega1**2 * rho1)),
        )

    @property
    def identity(self):
        return self.c1 == self.omega1 == self.rho1 == self.l1 == 1.0

    @property
    def displacement_factor(self):
        """a with u_scaled = a * u."""
        return math.sqrt(self.c1) / self.l1

    @property
    def potential_factor(self):
        """b with phi_scaled = b * phi."""
        return math.sqrt(self.eps1) / self.l1


def nondimensionalize(m, omega, lengths, s):
    """Scale a material, a frequency and coordinates by a ScaleSet.

    Parameters
    ----------
    m : MaterialSet
        Raw-unit material.
    omega : float
        Angular frequency (rad/s).
    lengths : array_like
        Coordinates or sizes in meters.
    s : ScaleSet

    Returns
    -------
    (MaterialSet, float, ndarray)
        Scaled material, omega/omega1, lengths/l1.
    """
    s.validate()
    scaled = replace(
        m,
        c=m.c / s.c1,
        e=m.e / s.e1,
        eps=None if m.eps is None else m.eps / s.eps1,
        rho=m.rho / s.rho1,
    )
    return scaled, omega / s.omega1, np.asarray(lengths, dtype=float) / s.l1


def redimensionalize(u_scaled, phi_scaled, s):
    """Map scaled fields back to meters and volts.

    u = u_scaled / a and phi = phi_scaled / b with a = sqrt(c1)/l1,
    b = sqrt(eps1)/l1.
    """
    a = s.displacement_factor
    b = s.potential_factor
    u = None if u_scaled is None else np.asarray(u_scaled) / a
    phi = None if phi_scaled is None else np.asarray(phi_scaled) / b
    return u, phi
