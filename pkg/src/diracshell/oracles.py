"""Independent reference solutions used to validate the boundary solver.

Three layers of oracles, deliberately built on machinery different from the
production assembly path:

* spherical Bessel/Hankel functions for complex argument (closed forms for
  l = 0, 1, Miller's downward recurrence for j_l, upward for y_l), giving
  the exact single-layer eigenvalues i k R^2 j_l(kR) h_l(kR) on a sphere;
* the Schrodinger delta-shell operator -(1/2m) Delta + eta delta_Sigma:
  its Birman-Schwinger matrix I + eta D_lambda reuses the single-layer
  quadrature with kernel 2m e^{i sqrt(2 m lambda) r}/(4 pi r);
* a radial shooting solver for the same operator on a sphere: numerical
  two-sided integration of the radial equation with the derivative-jump
  matching at r = R.  Shooting and boundary-integral zeros must agree;
  neither is derived from the other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .assembly import BoundaryOperator, OperatorKind, _scalar_layer, weighted
from .errors import EssentialSpectrumPoint, OriginSingularity
from .linalg import sigma_min
from .surface import SurfaceQuadrature

__all__ = [
    "RadialMode",
    "SchrodingerScan",
    "schrodinger_bs_scan",
    "schrodinger_kernels",
    "schrodinger_sphere_bound_states",
    "sphere_single_layer_eig",
    "spherical_bessel",
]


def _bessel_jy_arrays(l_max: int, z: complex) -> tuple[np.ndarray, np.ndarray]:
    """j_0..j_lmax and y_0..y_lmax at complex z (z != 0)."""
    j = np.empty(l_max + 1, dtype=complex)
    y = np.empty(l_max + 1, dtype=complex)
    sz, cz = np.sin(z), np.cos(z)
    y[0] = -cz / z
    if l_max >= 1:
        y[1] = -cz / z**2 - sz / z
    # y_l grows with l: upward recurrence is stable
    for l in range(1, l_max):
        y[l + 1] = (2 * l + 1) / z * y[l] - y[l - 1]
    if abs(z) > l_max + 1:
        # upward recurrence for j is stable when |z| dominates the order
        j[0] = sz / z
        if l_max >= 1:
            j[1] = sz / z**2 - cz / z
        for l in range(1, l_max):
            j[l + 1] = (2 * l + 1) / z * j[l] - j[l - 1]
        return j, y
    # Miller's downward recurrence, renormalized against the closed form j_0
    start = l_max + 25 + int(abs(z))
    fp = 0.0 + 0.0j
    fc = 1e-30 + 0.0j
    for n in range(start, 0, -1):
        fp, fc = fc, (2 * n + 1) / z * fc - fp
        if n - 1 <= l_max:
            j[n - 1] = fc
        if abs(fc) > 1e250:
            fp /= 1e250
            fc /= 1e250
            j[n - 1 : l_max + 1] /= 1e250
    j *= (sz / z) / j[0]
    return j, y


def spherical_bessel(l: int, z: complex) -> tuple[complex, complex]:
    """(j_l(z), h_l^(1)(z)) for complex z.

    Accurate to better than 1e-10 for |z| <= 50, l <= 10.  Raises
    OriginSingularity at z = 0 where h_l diverges.
    """
    if l < 0:
        raise ValueError(f"negative order l={l}")
    z = complex(z)
    if z == 0:
        raise OriginSingularity("h_l is singular at z = 0")
    j, y = _bessel_jy_arrays(l, z)
    return j[l], j[l] + 1j * y[l]


def sphere_single_layer_eig(k: complex, radius: float, l: int) -> complex:
    """Exact eigenvalue of the Helmholtz single layer on a radius-R sphere
    acting on degree-l spherical harmonics: i k R^2 j_l(kR) h_l(kR)."""
    z = complex(k) * radius
    jl, hl = spherical_bessel(l, z)
    return 1j * complex(k) * radius**2 * jl * hl


# ---------------------------------------------------------------------------
# Schrodinger delta-shell operator
# ---------------------------------------------------------------------------


def _schrodinger_momentum(lam: complex, m: float) -> complex:
    lam = complex(lam)
    if lam.imag == 0.0 and lam.real >= 0.0:
        raise EssentialSpectrumPoint(
            f"lambda={lam.real} lies in the essential spectrum [0, inf)")
    kappa = complex(np.emath.sqrt(2.0 * m * lam))
    if kappa.imag < 0.0:
        kappa = -kappa
    return kappa


def schrodinger_kernels(lam: complex, m: float, surface: SurfaceQuadrature):
    """(psi, D) for the Schrodinger shell kernel 2m e^{i kappa r}/(4 pi r),
    kappa = sqrt(2 m lambda) with positive imaginary part.

    ``psi(points, density)`` evaluates the layer potential off the surface;
    ``D`` is the N x N Nystrom matrix, sharing the singular quadrature of the
    Helmholtz single layer (entrywise 2m times it).
    """
    kappa = _schrodinger_momentum(lam, m)
    mat = 2.0 * m * _scalar_layer(kappa, surface)
    d_op = BoundaryOperator(mat, complex(lam), OperatorKind.SINGLE_LAYER, surface)

    def psi(points: np.ndarray, density: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        dens = np.asarray(density, dtype=complex).reshape(surface.n_nodes)
        diff = points[:, None, :] - surface.nodes[None, :, :]
        r = np.linalg.norm(diff, axis=-1)
        kern = 2.0 * m * np.exp(1j * kappa * r) / (4.0 * np.pi * r)
        return kern @ (dens * surface.weights)

    return psi, d_op


@dataclass(frozen=True)
class RadialMode:
    """Bound state of the radial delta-shell problem at angular momentum l."""

    l: int
    lam: float
    residual: float

    def __post_init__(self):
        if self.lam >= 0.0:
            raise ValueError(f"bound state energy must be negative, got {self.lam}")


def _radial_mismatch(lam: float, l: int, eta: float, m: float, radius: float,
                     rtol: float = 1e-10) -> float:
    """Two-sided shooting mismatch for u'' = (l(l+1)/r^2 - 2 m lambda) u.

    Both branches are normalized to u(R) = 1; the return value is
    u_out'(R) - u_in'(R) - 2 m eta, whose zeros are the bound states of
    -(1/2m) Delta + eta delta on the radius-R sphere.  For lambda < 0 neither
    branch has nodes, so the mismatch has no poles between the roots.
    """
    kappa = math.sqrt(-2.0 * m * lam)

    def rhs(r, uv):
        u, v = uv
        return (v, (l * (l + 1) / (r * r) - 2.0 * m * lam) * u)

    # outward branch from the regular solution u ~ r^{l+1}
    r0 = 1e-3 * radius
    sol_in = solve_ivp(rhs, (r0, radius), (r0 ** (l + 1), (l + 1) * r0**l),
                       rtol=rtol, atol=1e-300, method="RK45")
    u_in, v_in = sol_in.y[:, -1]
    # inward branch from the decaying solution u ~ e^{-kappa r}
    r1 = radius + min(40.0 / kappa, 60.0 * radius)
    sol_out = solve_ivp(rhs, (r1, radius), (1.0, -kappa), rtol=rtol,
                        atol=1e-300, method="RK45")
    u_out, v_out = sol_out.y[:, -1]
    return v_out / u_out - v_in / u_in - 2.0 * m * eta


def schrodinger_sphere_bound_states(eta: float, m: float, radius: float,
                                    l_max: int, n_grid: int = 160) -> list[RadialMode]:
    """All bound states with l <= l_max of -(1/2m) Delta + eta delta_{r=R}.

    Sign changes of the shooting mismatch are bracketed on a geometric grid
    over the window (-50 m eta^2, -1e-8) and polished with Brent's method.
    """
    if eta >= 0.0:
        return []
    out: list[RadialMode] = []
    lo, hi = 50.0 * m * eta * eta, 1e-8
    grid = -np.geomspace(lo, hi, n_grid)
    for l in range(l_max + 1):
        vals = np.array([_radial_mismatch(lam, l, eta, m, radius) for lam in grid])
        for i in range(n_grid - 1):
            if np.sign(vals[i]) != np.sign(vals[i + 1]):
                root = brentq(_radial_mismatch, grid[i], grid[i + 1],
                              args=(l, eta, m, radius), xtol=1e-12, rtol=1e-14)
                res = abs(_radial_mismatch(root, l, eta, m, radius))
                out.append(RadialMode(l, float(root), float(res)))
    out.sort(key=lambda mode: mode.lam)
    return out


@dataclass(frozen=True)
class SchrodingerScan:
    """sigma_min(I + eta D_lambda) samples on a negative-energy grid."""

    lams: np.ndarray
    sigmas: np.ndarray
    zeros: list[float] = field(default_factory=list)


def schrodinger_bs_scan(eta: float, surface: SurfaceQuadrature, m: float,
                        lams: np.ndarray, refine_tol: float = 1e-9) -> SchrodingerScan:
    """Scan sigma_min(I + eta D_lambda) over strictly negative energies.

    Local minima dipping below 0.1 are polished by golden-section search;
    the polished locations are the boundary-integral bound-state estimates.
    """
    lams = np.asarray(lams, dtype=float)
    if np.any(lams >= 0.0):
        raise EssentialSpectrumPoint("scan grid must be strictly negative")

    def f(lam: float) -> float:
        _, d_op = schrodinger_kernels(lam, m, surface)
        mat = eta * d_op.matrix
        mat[np.diag_indices_from(mat)] += 1.0
        return sigma_min(weighted(BoundaryOperator(mat, complex(lam),
                                                   OperatorKind.BS, surface)))

    sig = np.array([f(lam) for lam in lams])
    zeros: list[float] = []
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    for i in range(1, lams.size - 1):
        if sig[i] < sig[i - 1] and sig[i] < sig[i + 1] and sig[i] < 0.1:
            a, b = lams[i - 1], lams[i + 1]
            x1, x2 = b - inv_phi * (b - a), a + inv_phi * (b - a)
            f1, f2 = f(x1), f(x2)
            while b - a > refine_tol:
                if f1 < f2:
                    b, x2, f2 = x2, x1, f1
                    x1 = b - inv_phi * (b - a)
                    f1 = f(x1)
                else:
                    a, x1, f1 = x1, x2, f2
                    x2 = a + inv_phi * (b - a)
                    f2 = f(x2)
            zeros.append(float(x1 if f1 < f2 else x2))
    zeros.sort()
    return SchrodingerScan(lams, sig, zeros)
