"""Dirac algebra, physical parameters, and closed-form boundary matrices.

Conventions (natural units, hbar = 1):

* standard representation of the 4x4 Dirac matrices built from the Pauli
  matrices,
* free operator  -i c (alpha . grad) + m c^2 beta  with essential spectrum
  (-inf, -mc^2] u [mc^2, inf),
* wavenumber  k = sqrt(lambda^2/c^2 - (mc)^2)  on the branch Im k > 0, so the
  fundamental solution decays for spectral parameters in the gap.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    ConfinementCase,
    DegenerateCoupling,
    EssentialSpectrumPoint,
    NotConfinement,
    OriginSingularity,
)

__all__ = [
    "ALPHA",
    "BETA",
    "GAMMA5",
    "PAULI",
    "Coupling",
    "CouplingClass",
    "PhysParams",
    "SpectralPoint",
    "SpectralRegion",
    "alpha_dot",
    "confinement_projectors",
    "dirac_matrices",
    "essential_spectrum",
    "green_function",
    "green_split",
    "momentum_k",
    "symmetry_map",
    "transmission_matrix",
]

I2 = np.eye(2, dtype=complex)
I4 = np.eye(4, dtype=complex)

PAULI = np.array(
    [
        [[0.0, 1.0], [1.0, 0.0]],
        [[0.0, -1.0j], [1.0j, 0.0]],
        [[1.0, 0.0], [0.0, -1.0]],
    ],
    dtype=complex,
)

#: alpha_j = [[0, sigma_j], [sigma_j, 0]], shape (3, 4, 4)
ALPHA = np.zeros((3, 4, 4), dtype=complex)
for _j in range(3):
    ALPHA[_j, :2, 2:] = PAULI[_j]
    ALPHA[_j, 2:, :2] = PAULI[_j]

#: beta = diag(I2, -I2)
BETA = np.diag([1.0, 1.0, -1.0, -1.0]).astype(complex)

#: gamma_5 = [[0, I2], [I2, 0]]; enters the time-reversal map
GAMMA5 = np.zeros((4, 4), dtype=complex)
GAMMA5[:2, 2:] = I2
GAMMA5[2:, :2] = I2

# relative half-width of the band used to classify near-critical couplings
CRITICAL_REL_TOL = 1e-9


def dirac_matrices():
    """Return copies of (alpha_1, alpha_2, alpha_3, beta)."""
    return ALPHA[0].copy(), ALPHA[1].copy(), ALPHA[2].copy(), BETA.copy()


def alpha_dot(v):
    """Contraction alpha . v for a real or complex 3-vector (or batch)."""
    v = np.asarray(v)
    return np.tensordot(v, ALPHA, axes=([-1], [0]))


@dataclass(frozen=True)
class PhysParams:
    """Mass and speed of light in natural units (hbar = 1)."""

    m: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if not (self.m > 0 and self.c > 0):
            raise ValueError(f"require m > 0 and c > 0, got m={self.m}, c={self.c}")

    @property
    def gap_edge(self) -> float:
        """Rest energy m c^2; the spectral gap is (-gap_edge, gap_edge)."""
        return self.m * self.c**2


class CouplingClass(Enum):
    NONCRITICAL = "noncritical"
    CRITICAL = "critical"
    CONFINEMENT = "confinement"


def classify_coupling(eta: float, tau: float, c: float) -> CouplingClass:
    band = CRITICAL_REL_TOL * 4.0 * c**2
    d = eta**2 - tau**2
    if abs(d - 4.0 * c**2) <= band:
        return CouplingClass.CRITICAL
    if abs(d + 4.0 * c**2) <= band:
        return CouplingClass.CONFINEMENT
    return CouplingClass.NONCRITICAL


@dataclass(frozen=True)
class Coupling:
    """Interaction strengths: eta (electrostatic) and tau (Lorentz scalar)."""

    eta: float
    tau: float
    c: float = 1.0
    klass: CouplingClass = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "klass", classify_coupling(self.eta, self.tau, self.c))

    @property
    def matrix(self) -> np.ndarray:
        """The 4x4 strength matrix eta I4 + tau beta."""
        return self.eta * I4 + self.tau * BETA


class SpectralRegion(Enum):
    GAP = "gap"
    NONREAL = "nonreal"
    ESSENTIAL = "essential"


@dataclass(frozen=True)
class SpectralPoint:
    lam: complex
    region: SpectralRegion

    @classmethod
    def classify(cls, lam: complex, params: PhysParams) -> "SpectralPoint":
        lam = complex(lam)
        if lam.imag != 0.0:
            return cls(lam, SpectralRegion.NONREAL)
        if abs(lam.real) < params.gap_edge:
            return cls(lam, SpectralRegion.GAP)
        return cls(lam, SpectralRegion.ESSENTIAL)


def _check_resolvent_point(lam: complex, params: PhysParams) -> complex:
    lam = complex(lam)
    if lam.imag == 0.0 and abs(lam.real) >= params.gap_edge:
        raise EssentialSpectrumPoint(
            f"lambda={lam} lies on (-inf, -mc^2] u [mc^2, inf) with mc^2={params.gap_edge}"
        )
    return lam


def momentum_k(lam: complex, params: PhysParams) -> complex:
    """Wavenumber k with k^2 = lambda^2/c^2 - (mc)^2 and Im k > 0.

    For real lambda in the open gap the root is purely imaginary and is
    computed as i*sqrt((mc)^2 - lambda^2/c^2) to avoid branch-cut noise.
    """
    lam = _check_resolvent_point(lam, params)
    m, c = params.m, params.c
    if lam.imag == 0.0:
        return 1j * math.sqrt((m * c) ** 2 - (lam.real / c) ** 2)
    k = cmath.sqrt(lam**2 / c**2 - (m * c) ** 2)
    if k.imag <= 0.0:
        k = -k
    return k


def green_function(lam, x, params: PhysParams):
    """Fundamental solution G_lambda(x) of the free Dirac resolvent kernel.

    ``x`` may be a single 3-vector or an (..., 3) batch; the result has shape
    (..., 4, 4).
    """
    lam = _check_resolvent_point(lam, params)
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0.0):
        raise OriginSingularity("green_function evaluated at x = 0")
    m, c = params.m, params.c
    k = momentum_k(lam, params)
    phase = np.exp(1j * k * r) / (4.0 * np.pi * r)
    static = (lam / c**2) * I4 + m * BETA
    ax = alpha_dot(x)
    coef = (1.0 - 1j * k * r) * 1j / (c * r**2)
    return (static * phase[..., None, None]
            + (coef * phase)[..., None, None] * ax)


def green_split(lam, x, params: PhysParams):
    """Split G_lambda(x) into its closed-form singular part and a remainder.

    singular = i (alpha.x) / (4 pi c |x|^3) + (lambda/c^2 I4 + m beta)/(4 pi |x|);
    the remainder is O(1) * (lambda/c^2 I4 + m beta) plus an O(1) odd term and
    stays bounded as |x| -> 0.
    """
    lam = _check_resolvent_point(lam, params)
    x = np.asarray(x, dtype=float)
    r = np.asarray(np.linalg.norm(x, axis=-1))
    if np.any(r == 0.0):
        raise OriginSingularity("green_split evaluated at x = 0")
    m, c = params.m, params.c
    static = (lam / c**2) * I4 + m * BETA
    ax = alpha_dot(x)
    inv3 = np.asarray(1j / (4.0 * np.pi * c * r**3))
    inv1 = np.asarray(1.0 / (4.0 * np.pi * r))
    singular = inv3[..., None, None] * ax + static * inv1[..., None, None]
    return singular, green_function(lam, x, params) - singular


def remainder_diagonal_limit(lam, params: PhysParams) -> np.ndarray:
    """Isotropic |x| -> 0 limit of the green_split remainder.

    The even part tends to (lambda/c^2 I4 + m beta) * ik/(4 pi); the remaining
    odd alpha.x term has no limit but integrates to zero over any symmetric
    patch, matching the principal-value diagonal rule.
    """
    lam = _check_resolvent_point(lam, params)
    k = momentum_k(lam, params)
    return ((lam / params.c**2) * I4 + params.m * BETA) * (1j * k / (4.0 * np.pi))


def transmission_matrix(coupling: Coupling, nu, c: float | None = None) -> np.ndarray:
    """Matrix R relating interior and exterior traces, f_+ = R f_-.

    R = -(ic(alpha.nu) + (eta I4 + tau beta)/2)^(-1)
        (-ic(alpha.nu) + (eta I4 + tau beta)/2).
    """
    c = coupling.c if c is None else c
    eta, tau = coupling.eta, coupling.tau
    denom = 4.0 * c**2 + eta**2 - tau**2
    if denom == 0.0 or coupling.klass is CouplingClass.CONFINEMENT:
        raise ConfinementCase("eta^2 - tau^2 = -4c^2: traces decouple, no transmission matrix")
    an = alpha_dot(np.asarray(nu, dtype=float))
    half = 0.5 * (eta * I4 + tau * BETA)
    # closed-form inverse: 4/(4c^2 + eta^2 - tau^2) (-ic(alpha.nu) + (eta I4 - tau beta)/2)
    inv = (4.0 / denom) * (-1j * c * an + 0.5 * (eta * I4 - tau * BETA))
    return -inv @ (-1j * c * an + half)


def confinement_projectors(coupling: Coupling, nu, c: float | None = None):
    """Projectors P_+/P_- encoding the decoupled boundary conditions.

    P_pm = (I4 -/+ (i/2c)(alpha.nu)(eta I4 + tau beta)) / 2.  For (eta, tau) =
    (0, 2c) these reduce to the MIT-bag conditions (I4 +/- i beta(alpha.nu))/2.
    """
    c = coupling.c if c is None else c
    if coupling.klass is not CouplingClass.CONFINEMENT:
        raise NotConfinement(
            f"eta^2 - tau^2 = {coupling.eta**2 - coupling.tau**2} != -4c^2"
        )
    an = alpha_dot(np.asarray(nu, dtype=float))
    x = (0.5j / c) * an @ coupling.matrix
    return 0.5 * (I4 - x), 0.5 * (I4 + x)


def symmetry_map(coupling: Coupling, c: float | None = None) -> Coupling:
    """Strength inversion (eta, tau) -> -4c^2 (eta, tau) / (eta^2 - tau^2).

    An involution on couplings with eta^2 != tau^2 that preserves the point
    spectrum of the shell operator.
    """
    c = coupling.c if c is None else c
    d = coupling.eta**2 - coupling.tau**2
    if d == 0.0:
        raise DegenerateCoupling("eta^2 = tau^2: strength inversion undefined")
    s = -4.0 * c**2 / d
    return Coupling(s * coupling.eta, s * coupling.tau, c)


def essential_spectrum(params: PhysParams):
    """The two half-lines (-inf, -mc^2] and [mc^2, inf) as interval tuples."""
    e = params.gap_edge
    return ((-math.inf, -e), (e, math.inf))
