"""Plane-strain isotropic elasticity in Voigt form.

Strain vectors are ``(e11, e22, 2 e12)`` and stress vectors
``(s11, s22, s12)``, so that ``sigma : eps == s_V . e_V``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


def isotropic_voigt(lam, mu) -> np.ndarray:
    """Voigt stiffness for Lame parameters; broadcasts over array inputs."""
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    C = np.zeros(np.broadcast(lam, mu).shape + (3, 3))
    C[..., 0, 0] = C[..., 1, 1] = 2.0 * mu + lam
    C[..., 0, 1] = C[..., 1, 0] = lam
    C[..., 2, 2] = mu
    return C


def isotropic_compliance(lam, mu) -> np.ndarray:
    """Closed-form inverse of :func:`isotropic_voigt`."""
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    det = 4.0 * mu * (mu + lam)
    D = np.zeros(np.broadcast(lam, mu).shape + (3, 3))
    D[..., 0, 0] = D[..., 1, 1] = (2.0 * mu + lam) / det
    D[..., 0, 1] = D[..., 1, 0] = -lam / det
    D[..., 2, 2] = 1.0 / mu
    return D


@dataclass(frozen=True)
class ElasticityField:
    """Position-dependent Lame parameters.

    ``lame(pts)`` returns the arrays ``(lam, mu)`` at an (npts, 2) array of
    points.  ``constant`` marks fields whose stiffness does not vary.
    """

    lame: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    constant: bool = False

    def stiffness(self, pts) -> np.ndarray:
        lam, mu = self.lame(np.atleast_2d(pts))
        return isotropic_voigt(lam, mu)

    def compliance(self, pts) -> np.ndarray:
        lam, mu = self.lame(np.atleast_2d(pts))
        return isotropic_compliance(lam, mu)

    def scaled(self, factor: float) -> "ElasticityField":
        """Same field with the stiffness multiplied by ``factor``."""
        lame = self.lame

        def scaled_lame(pts):
            lam, mu = lame(pts)
            return factor * np.asarray(lam), factor * np.asarray(mu)

        return ElasticityField(scaled_lame, self.constant)


def plane_strain_isotropic(lam: float, mu: float) -> ElasticityField:
    if not (mu > 0 and lam >= 0):
        raise ValueError(f"nonphysical moduli lambda={lam}, mu={mu}")

    def lame(pts):
        n = len(pts)
        return np.full(n, float(lam)), np.full(n, float(mu))

    return ElasticityField(lame, constant=True)


def variable_field_test_c() -> ElasticityField:
    """lambda = mu = 1 - |x - (1/2, 1/2)|^2 on the unit square."""

    def lame(pts):
        d2 = np.sum((pts - 0.5) ** 2, axis=1)
        m = 1.0 - d2
        return m, m

    return ElasticityField(lame, constant=False)


def kappa(field: ElasticityField, x) -> np.ndarray | float:
    """Half the trace of the Voigt compliance at ``x``."""
    D = field.compliance(x)
    val = 0.5 * np.trace(D, axis1=-2, axis2=-1)
    return float(val[0]) if np.ndim(x) == 1 else val
