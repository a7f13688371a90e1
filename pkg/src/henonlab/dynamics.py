"""Classical and semiclassical Henon-Heiles vector fields and energies.

The semiclassical model extends each degree of freedom with a Gaussian
width parameter ``G_i`` (position variance ``hbar * G_i``) and its conjugate
``Pi_i``.  State vectors are ordered ``(x1, x2, p1, p2)`` for the classical
system and ``(x1, x2, p1, p2, G1, G2, Pi1, Pi2)`` for the semiclassical one.

The right-hand sides are numba-compiled so the same machine code serves the
Python-level API and the compiled integration kernel.
"""

import math
from typing import NamedTuple

import numpy as np
from numba import njit

from .errors import NonPositiveWidth

#: Width floor below which the 1/G singularities are refused.
MIN_WIDTH = 1e-12

#: Saddle energy of the potential; orbits above it may leave the well.
ESCAPE_ENERGY = 1.0 / 6.0


class ClassicalState(NamedTuple):
    x1: float
    x2: float
    p1: float
    p2: float


class SemiclassicalState(NamedTuple):
    x1: float
    x2: float
    p1: float
    p2: float
    G1: float
    G2: float
    Pi1: float
    Pi2: float

    @property
    def classical(self) -> ClassicalState:
        return ClassicalState(self.x1, self.x2, self.p1, self.p2)


class JKMoments(NamedTuple):
    """Second moments of the factorized Gaussian state."""

    dq2_1: float
    dq2_2: float
    dp2_1: float
    dp2_2: float
    ur_1: float
    ur_2: float


def check_hbar(hbar: float) -> float:
    hbar = float(hbar)
    if not (math.isfinite(hbar) and hbar >= 0.0):
        raise ValueError(f"hbar must be finite and non-negative, got {hbar!r}")
    return hbar


def _as_state(s, dim):
    y = np.asarray(s, dtype=np.float64)
    if y.shape[-1] != dim:
        raise ValueError(f"expected {dim} state components, got shape {y.shape}")
    return y


def _check_widths(y):
    g = y[..., 4:6]
    if np.any(~(g >= MIN_WIDTH)):
        raise NonPositiveWidth(f"width parameters must exceed {MIN_WIDTH:g}, got G={g.tolist()}")


@njit(cache=True, nogil=True)
def _classical_rhs(y, out):
    x1 = y[0]
    x2 = y[1]
    out[0] = y[2]
    out[1] = y[3]
    out[2] = -x1 - 2.0 * x1 * x2
    out[3] = -x2 - x1 * x1 + x2 * x2


@njit(cache=True, nogil=True)
def _semiclassical_rhs(y, hbar, out):
    x1 = y[0]
    x2 = y[1]
    g1 = y[4]
    g2 = y[5]
    pi1 = y[6]
    pi2 = y[7]
    out[0] = y[2]
    out[1] = y[3]
    out[2] = -x1 - 2.0 * x1 * x2
    out[3] = (-x2 - x1 * x1 + x2 * x2) - hbar * (g1 - g2)
    out[4] = 4.0 * g1 * pi1
    out[5] = 4.0 * g2 * pi2
    out[6] = 1.0 / (8.0 * g1 * g1) - 2.0 * pi1 * pi1 - x2 - 0.5
    out[7] = 1.0 / (8.0 * g2 * g2) - 2.0 * pi2 * pi2 + x2 - 0.5


def potential_value(x1, x2):
    """Henon-Heiles potential; broadcasts over array inputs."""
    return 0.5 * (x1 * x1 + x2 * x2) + x1 * x1 * x2 - x2 * x2 * x2 / 3.0


def classical_energy(s):
    """Classical Hamiltonian of a state, or of every row of a trace.

    Semiclassical states are accepted; only their ``(x, p)`` block is read.
    """
    y = np.asarray(s, dtype=np.float64)
    e = 0.5 * (y[..., 2] ** 2 + y[..., 3] ** 2) + potential_value(y[..., 0], y[..., 1])
    return float(e) if y.ndim == 1 else e


def effective_energy(s, hbar):
    """Expectation value of the Hamiltonian in the Gaussian trial state.

    Parameters
    ----------
    s : array_like, shape (..., 8)
        Semiclassical state(s).
    hbar : float
        Effective Planck constant.

    Raises
    ------
    NonPositiveWidth
        If any ``G_i`` lies below :data:`MIN_WIDTH`.
    """
    y = _as_state(s, 8)
    hbar = check_hbar(hbar)
    _check_widths(y)
    x2 = y[..., 1]
    g1, g2, pi1, pi2 = y[..., 4], y[..., 5], y[..., 6], y[..., 7]
    bracket = 0.5 * (
        1.0 / (4.0 * g1) + g1 + 4.0 * g1 * pi1 * pi1
        + 1.0 / (4.0 * g2) + g2 + 4.0 * g2 * pi2 * pi2
    ) + (g1 - g2) * x2
    e = classical_energy(y) + hbar * bracket
    return float(e) if y.ndim == 1 else e


def classical_vector_field(s) -> np.ndarray:
    """Time derivative ``(x1', x2', p1', p2')`` of a classical state."""
    y = _as_state(s, 4)
    out = np.empty(4)
    _classical_rhs(y, out)
    return out


def semiclassical_vector_field(s, hbar) -> np.ndarray:
    """Eight-component time derivative of a semiclassical state."""
    y = _as_state(s, 8)
    hbar = check_hbar(hbar)
    _check_widths(y)
    out = np.empty(8)
    _semiclassical_rhs(y, hbar, out)
    return out


def jk_moments(s, hbar) -> JKMoments:
    """Position/momentum variances and uncertainty products per particle."""
    y = _as_state(s, 8)
    hbar = check_hbar(hbar)
    if hbar <= 0.0:
        raise ValueError("moments require hbar > 0")
    _check_widths(y)
    g = y[4:6]
    pi = y[6:8]
    dq2 = hbar * g
    dp2 = 4.0 * hbar * g * pi * pi + hbar / (4.0 * g)
    ur = 0.5 * hbar * np.sqrt(1.0 + (4.0 * g * pi) ** 2)
    return JKMoments(
        float(dq2[0]), float(dq2[1]), float(dp2[0]), float(dp2[1]), float(ur[0]), float(ur[1])
    )


class ClassicalSystem:
    """Classical Henon-Heiles flow as an ``f(t, y)`` callable."""

    dim = 4
    hbar = 0.0
    kind = 0

    def __call__(self, t, y):
        return classical_vector_field(y)

    def energy(self, y):
        return classical_energy(y)

    def __repr__(self):
        return "ClassicalSystem()"


class SemiclassicalSystem:
    """Semiclassical flow at fixed ``hbar`` as an ``f(t, y)`` callable."""

    dim = 8
    kind = 1

    def __init__(self, hbar):
        self.hbar = check_hbar(hbar)

    def __call__(self, t, y):
        return semiclassical_vector_field(y, self.hbar)

    def energy(self, y):
        return effective_energy(y, self.hbar)

    def __repr__(self):
        return f"SemiclassicalSystem(hbar={self.hbar!r})"
