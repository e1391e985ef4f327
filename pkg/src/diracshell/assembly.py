"""Dense Nystrom discretizations of the boundary and potential operators.

The scalar kernel e^{ikr}/(4 pi r) is split into radial power terms
r^{-1}, 1, r, r^2, r^3 (everything that is not C^4 across the diagonal) plus
a smooth remainder that the native product rule integrates with high order.
The power terms are handled per geometry:

* sphere grids: each radial kernel g(r) on a sphere acts diagonally on
  spherical harmonics with eigenvalues 2 pi R^2 * int g P_l; replacing the
  kernel by its band-limited Legendre sum gives a quadrature that is *exact*
  on densities resolved by the grid.  The eigenvalue integrals reduce to
  Gauss-Jacobi rules with weight (1 - t)^((n-1)/2) and are polynomially
  exact, so the single layer on the sphere converges spectrally;
* spheroid grids: punctured sum off the diagonal, and a diagonal that
  restores the exact row integral of the static 1/(4 pi r) part.  The row
  integral reduces to a 1D adaptive integral of a complete elliptic K;
* triangle meshes: punctured centroid sum plus the analytic integral of the
  static kernel over the node's own triangle.

The strongly singular Dirac boundary operator reuses the identical scalar
matrix for its even (beta-commuting) part -- this makes the anticommutator
identity with the single layer hold at machine precision at the matrix
level.  The odd alpha.(x-y) g(r) part is a principal value whose diagonal
vanishes by the odd symmetry of the kernel; on sphere grids it is built as
the commutator [X_d, V] of the coordinate multiplication with the band
limitation V of the radial factor g.  V only enters through commutators, so
its harmonic eigenvalues matter only through consecutive differences, which
stay finite for the r^{-3} singularity; the common (divergent) level drops
out.  Without this treatment the high angular channels of the discrete
operator scatter around the accumulation points +-1/(2c) of the true
channel eigenvalues and produce spurious singular values of the
Birman-Schwinger matrix at strong coupling.
"""

from __future__ import annotations

import math
import struct
import weakref
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad
from scipy.special import ellipk, eval_legendre, factorial, lpmv, roots_jacobi

from .core import ALPHA, BETA, I4, Coupling, PhysParams, momentum_k
from .errors import ParseError, PointOnSurface, VolumeNodeOnSurface
from .surface import SurfaceKind, SurfaceQuadrature

__all__ = [
    "BoundaryOperator",
    "OperatorKind",
    "apply_phi",
    "apply_phi_star",
    "assemble_C",
    "assemble_single_layer",
    "bs_matrix",
    "load_operator",
    "save_operator",
    "weighted",
]

_EVAL_CHUNK = 512


class OperatorKind(Enum):
    C = 0
    SINGLE_LAYER = 1
    BS = 2


@dataclass(frozen=True)
class BoundaryOperator:
    """Dense operator matrix tagged with its spectral parameter and kind."""

    matrix: np.ndarray
    lam: complex
    kind: OperatorKind
    surface: SurfaceQuadrature
    coupling: Coupling | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _pairwise(surface: SurfaceQuadrature):
    x = surface.nodes
    d = x[:, None, :] - x[None, :, :]
    r = np.linalg.norm(d, axis=-1)
    np.fill_diagonal(r, 1.0)  # placeholder, diagonal handled analytically
    return d, r


# number of radial power terms r^(n-1), n = 0..4, treated explicitly; the
# remaining kernel is C^4 across the diagonal
_N_POWER_TERMS = 5

# per-surface cache of k-independent singular-quadrature data
_SURFACE_CACHE: "weakref.WeakKeyDictionary[SurfaceQuadrature, dict]" = weakref.WeakKeyDictionary()


def _power_kernel_eigs(n: int, radius: float, band: int) -> np.ndarray:
    """Spherical-harmonic eigenvalues of the radial kernel r^(n-1) on a sphere.

    r = 2 R sin(gamma/2), so with t = cos(gamma) the eigenvalue for degree l
    is 2 pi R^2 (2R)^(n-1) int (((1-t)/2)^((n-1)/2)) P_l(t) dt, which a
    Gauss-Jacobi rule with weight (1-t)^((n-1)/2) integrates exactly.
    """
    half = (n - 1) / 2.0
    t, w = roots_jacobi(band + 2, half, 0.0)
    pref = 2.0 * np.pi * radius**2 * (2.0 * radius) ** (n - 1) / 2.0**half
    return np.array([pref * (w * eval_legendre(l, t)).sum() for l in range(band)])


def _gauss01(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _odd_kernel_ladder(k: complex, radius: float, band: int, c: float) -> np.ndarray:
    """Harmonic eigenvalues, up to a common constant, of the radial factor
    i (1 - ikr) e^{ikr} / (4 pi c r^3) of the odd kernel.

    The eigenvalue integrals diverge individually, but the operator is only
    used through the commutator [X_d, V], where a constant shift of all
    eigenvalues acts as [X_d, const * Id] = 0 on resolved densities.  The
    consecutive differences are finite: (P_l - P_{l+1})(t) carries a factor
    (1 - t) that cancels two powers of r.  With t = 1 - 2u^2 (so r = 2Ru)
    every integrand below is entire in u, and Gauss-Legendre on (0, 1)
    resolves it to machine precision.
    """
    n_u = band + 32 + int(3.0 * abs(k) * radius)
    u, w = _gauss01(n_u)
    t = 1.0 - 2.0 * u * u
    z = 2j * k * radius * u
    f = (1.0 - z) * np.exp(z) * w
    p_all = eval_legendre(np.arange(band + 1)[:, None], t[None, :])
    q = (p_all[:-1] - p_all[1:]) / (2.0 * u * u)[None, :]
    delta = (1j / (2.0 * c * radius)) * (q @ f)
    kap = np.zeros(band, dtype=complex)
    kap[1:] = -np.cumsum(delta)[: band - 1]
    return kap


def _legendre_sum(surface: SurfaceQuadrature, kappas: np.ndarray) -> np.ndarray:
    """N x N Nystrom matrix sum_l kappa_l (2l+1)/(4 pi R^2) P_l(cos gamma_ij) w_j.

    On the theta-major product grid cos gamma depends only on the two polar
    rows and the azimuthal offset, so the Legendre recurrence runs on an
    npol x npol x naz array and the full matrix is a circulant gather of it.
    """
    radius = surface.shape_params[0]
    npol, naz = surface.n_polar, surface.n_azimuthal
    cache = _SURFACE_CACHE.setdefault(surface, {})
    if "cos_gamma_small" not in cache:
        ct_pol = surface.nodes[::naz, 2] / radius
        st_pol = np.sqrt(np.clip(1.0 - ct_pol**2, 0.0, 1.0))
        cos_dphi = np.cos(2.0 * np.pi * np.arange(naz) / naz)
        cache["cos_gamma_small"] = np.clip(
            st_pol[:, None, None] * st_pol[None, :, None] * cos_dphi[None, None, :]
            + (ct_pol[:, None] * ct_pol[None, :])[:, :, None], -1.0, 1.0)
        cache["azimuth_gather"] = (np.arange(naz)[:, None]
                                   - np.arange(naz)[None, :]) % naz
    ct = cache["cos_gamma_small"]
    band = kappas.shape[0]
    acc = np.zeros_like(ct, dtype=np.result_type(kappas, ct))
    p_prev = np.ones_like(ct)
    p_cur = ct
    for l in range(band):
        if l == 0:
            p_l = p_prev
        elif l == 1:
            p_l = p_cur
        else:
            p_prev, p_cur = p_cur, ((2 * l - 1) * ct * p_cur - (l - 1) * p_prev) / l
            p_l = p_cur
        acc += (kappas[l] * (2 * l + 1) / (4.0 * np.pi * radius**2)) * p_l
    full = acc[:, :, cache["azimuth_gather"]].transpose(0, 2, 1, 3)
    n = surface.n_nodes
    return full.reshape(n, n) * surface.weights[None, :]


def _sphere_odd_blocks(k: complex, surface: SurfaceQuadrature, c: float) -> list[np.ndarray]:
    """Band-exact principal-value matrices of (x - y)_d g(r), d = 0, 1, 2."""
    band = min(surface.n_polar, surface.n_azimuthal // 2)
    radius = surface.shape_params[0]
    v = _legendre_sum(surface, _odd_kernel_ladder(k, radius, band, c))
    out = []
    for d in range(3):
        xd = surface.nodes[:, d]
        out.append((xd[:, None] - xd[None, :]) * v)
    return out


def _sphere_band_matrices(surface: SurfaceQuadrature) -> list[np.ndarray]:
    """Band-exact matrices of the radial kernels r^(n-1), n = 0..4.

    For each kernel the matrix is w_j sum_l kappa_l (2l+1)/(4 pi R^2)
    P_l(cos gamma_ij); acting on any density resolved by the grid it
    reproduces the exact surface integral (addition theorem plus the
    polynomial exactness of the product rule).
    """
    radius = surface.shape_params[0]
    band = min(surface.n_polar, surface.n_azimuthal // 2)
    return [_legendre_sum(surface, _power_kernel_eigs(n, radius, band))
            for n in range(_N_POWER_TERMS)]


def _spheroid_static_row_integral(surface: SurfaceQuadrature) -> np.ndarray:
    """Exact row integrals int 1/(4 pi |x_i - y|) dsigma(y) on a spheroid.

    By rotational symmetry only the distinct polar rows are computed.  The
    azimuthal integral is 4 K(m) / sqrt(A + B) with |x - y|^2 = A - B cos
    (dphi); the polar integral has a logarithmic singularity at the target
    row and is done adaptively with a breakpoint there.
    """
    a, b = surface.shape_params
    n_pol, n_az = surface.n_polar, surface.n_azimuthal
    # polar angles of the distinct rows (theta-major node layout)
    z = surface.nodes[::n_az, 2]
    thetas = np.arccos(np.clip(z / b, -1.0, 1.0))

    def integrand(theta, tt):
        st, ct = math.sin(theta), math.cos(theta)
        stt, ctt = math.sin(tt), math.cos(tt)
        big_a = a * a * (st * st + stt * stt) + b * b * (ct - ctt) ** 2
        big_b = 2.0 * a * a * st * stt
        jac = a * st * math.sqrt((b * st) ** 2 + (a * ct) ** 2)
        if big_b == 0.0:
            phi_int = 2.0 * np.pi / math.sqrt(big_a)
        else:
            m = 2.0 * big_b / (big_a + big_b)
            phi_int = 4.0 * ellipk(min(m, 1.0 - 1e-16)) / math.sqrt(big_a + big_b)
        return jac * phi_int / (4.0 * np.pi)

    out = np.empty(n_pol)
    for i, tt in enumerate(thetas):
        val, _ = quad(integrand, 0.0, np.pi, args=(tt,), points=[tt], limit=200)
        out[i] = val
    return np.repeat(out, n_az)


def _static_diagonal(surface: SurfaceQuadrature) -> np.ndarray:
    """Diagonal of the static 1/(4 pi r) layer: the part of the exact row
    integral that the punctured sum misses."""
    cache = _SURFACE_CACHE.setdefault(surface, {})
    if "static_diag" not in cache:
        if surface.kind is SurfaceKind.SPHEROID_GRID:
            row_exact = _spheroid_static_row_integral(surface)
            _, r = _pairwise(surface)
            coulomb = surface.weights[None, :] / (4.0 * np.pi * r)
            np.fill_diagonal(coulomb, 0.0)
            cache["static_diag"] = row_exact - coulomb.sum(axis=1)
        elif surface.static_self is not None:
            cache["static_diag"] = surface.static_self.copy()
        else:
            # last-resort rule: equivalent-area disk around the node
            cache["static_diag"] = np.sqrt(surface.weights / np.pi) / 2.0
    return cache["static_diag"]


def _scalar_layer(k: complex, surface: SurfaceQuadrature) -> np.ndarray:
    """N x N matrix of the single layer with kernel e^{ikr}/(4 pi r)."""
    _, r = _pairwise(surface)
    w = surface.weights
    if surface.kind is SurfaceKind.SPHERE_GRID:
        cache = _SURFACE_CACHE.setdefault(surface, {})
        if "band_matrices" not in cache:
            cache["band_matrices"] = _sphere_band_matrices(surface)
        mats = cache["band_matrices"]
        ikr = 1j * k * r
        poly = np.zeros_like(r, dtype=complex)
        term = np.ones_like(r, dtype=complex)
        s = np.zeros_like(r, dtype=complex)
        for n in range(_N_POWER_TERMS):
            coef = (1j * k) ** n / (4.0 * np.pi * math.factorial(n))
            s += coef * mats[n]
            poly += term
            term = term * ikr / (n + 1)
        rest = (np.exp(ikr) - poly) / (4.0 * np.pi * r) * w[None, :]
        np.fill_diagonal(rest, 0.0)  # remainder kernel vanishes like r^4
        return s + rest
    s = np.exp(1j * k * r) / (4.0 * np.pi * r) * w[None, :]
    np.fill_diagonal(s, _static_diagonal(surface) + 1j * k / (4.0 * np.pi) * w)
    return s


def assemble_single_layer(k: complex, surface: SurfaceQuadrature) -> BoundaryOperator:
    """Single-layer operator of -Delta + k^2... with kernel e^{ikr}/(4 pi r)."""
    return BoundaryOperator(_scalar_layer(k, surface), complex(k), OperatorKind.SINGLE_LAYER, surface)


def assemble_C(lam: complex, surface: SurfaceQuadrature, params: PhysParams) -> BoundaryOperator:
    """Principal-value Dirac boundary operator as a dense 4N x 4N matrix."""
    lam = complex(lam)
    k = momentum_k(lam, params)
    m, c = params.m, params.c
    d, r = _pairwise(surface)
    w = surface.weights
    n = surface.n_nodes

    scal = _scalar_layer(k, surface)
    if surface.kind is SurfaceKind.SPHERE_GRID:
        cd = _sphere_odd_blocks(k, surface, c)
    else:
        g = np.exp(1j * k * r) / (4.0 * np.pi * r)
        coef = (1.0 - 1j * k * r) * (1j / (c * r**2)) * g * w[None, :]
        cd = [coef * d[:, :, j] for j in range(3)]
        for cdj in cd:
            np.fill_diagonal(cdj, 0.0)  # odd part: principal value kills the diagonal

    static = (lam / c**2) * I4 + m * BETA
    out = np.zeros((n, 4, n, 4), dtype=complex)
    for a in range(4):
        for b in range(4):
            acc = None
            if static[a, b] != 0.0:
                acc = static[a, b] * scal
            for j in range(3):
                if ALPHA[j, a, b] != 0.0:
                    term = ALPHA[j, a, b] * cd[j]
                    acc = term if acc is None else acc + term
            if acc is not None:
                out[:, a, :, b] = acc
    return BoundaryOperator(out.reshape(4 * n, 4 * n), lam, OperatorKind.C, surface)


def bs_matrix(lam: complex, coupling: Coupling, surface: SurfaceQuadrature,
              params: PhysParams) -> BoundaryOperator:
    """Birman-Schwinger matrix I + (eta I4 + tau beta) C_lambda."""
    cop = assemble_C(lam, surface, params)
    n = surface.n_nodes
    mat = cop.matrix.copy()
    # eta I4 + tau beta is diagonal: scale block rows by spinor component
    v = np.array([coupling.eta + coupling.tau, coupling.eta + coupling.tau,
                  coupling.eta - coupling.tau, coupling.eta - coupling.tau])
    mat *= np.tile(v, n)[:, None]
    mat[np.diag_indices_from(mat)] += 1.0
    return BoundaryOperator(mat, complex(lam), OperatorKind.BS, surface, coupling)


def weighted(op: BoundaryOperator) -> np.ndarray:
    """Similarity transform D_w M D_w^{-1}, D_w = diag(sqrt(w_i)) per component.

    Symmetrizes the quadrature weighting so singular values are measured in
    the discrete L^2(Sigma) norm.
    """
    w = op.surface.weights
    rep = op.matrix.shape[0] // w.size
    s = np.sqrt(np.repeat(w, rep))
    return op.matrix * (s[:, None] / s[None, :])


def _green_blocks(lam: complex, targets: np.ndarray, sources: np.ndarray,
                  params: PhysParams, min_dist: float, err: type) -> np.ndarray:
    """(P, N, 4, 4) array of G_lambda(x_p - y_j); raises if any pair is closer
    than min_dist."""
    k = momentum_k(lam, params)
    m, c = params.m, params.c
    d = targets[:, None, :] - sources[None, :, :]
    r = np.linalg.norm(d, axis=-1)
    if np.any(r <= min_dist):
        raise err(f"evaluation point within {min_dist} of a source point")
    g = np.exp(1j * k * r) / (4.0 * np.pi * r)
    coef = (1.0 - 1j * k * r) * (1j / (c * r**2)) * g
    static = (lam / c**2) * I4 + m * BETA
    out = g[..., None, None] * static
    out += np.einsum("pn,pnj,jab->pnab", coef, d, ALPHA)
    return out


def _sphere_upsample(surface: SurfaceQuadrature, dens: np.ndarray,
                     factor: int) -> tuple[SurfaceQuadrature, np.ndarray]:
    """Band-limited interpolation of nodal data onto a refined sphere grid.

    Azimuthal trig interpolation by FFT zero-padding; per azimuthal mode the
    polar profile is projected on associated Legendre functions using the
    discrete orthogonality of the Gauss rule (exact for resolved data).
    """
    from .surface import sphere_grid

    npol, naz = surface.n_polar, surface.n_azimuthal
    band = min(npol, naz // 2)
    fine = sphere_grid(surface.shape_params[0], factor * npol, factor * naz)
    vals = np.asarray(dens, dtype=complex).reshape(npol, naz, -1)
    ncomp = vals.shape[2]
    f_m = np.fft.fft(vals, axis=1)
    u, wu = leggauss(npol)
    uf, _ = leggauss(factor * npol)
    out_m = np.zeros((factor * npol, factor * naz, ncomp), dtype=complex)
    for m in range(-(band - 1), band):
        ls = np.arange(abs(m), band)
        p_coarse = lpmv(abs(m), ls[None, :], u[:, None])
        norm = 2.0 * factorial(ls + abs(m)) / ((2 * ls + 1) * factorial(ls - abs(m)))
        coef = (p_coarse * wu[:, None]).T @ f_m[:, m % naz, :] / norm[:, None]
        p_fine = lpmv(abs(m), ls[None, :], uf[:, None])
        out_m[:, m % (factor * naz), :] = p_fine @ coef
    fine_vals = np.fft.ifft(out_m, axis=1) * factor
    return fine, fine_vals.reshape(fine.n_nodes, ncomp)


def _eval_chunk(n_sources: int) -> int:
    # keep the (chunk, n_sources, 4, 4) kernel block under ~1 GB
    return max(1, min(_EVAL_CHUNK, 4_000_000 // max(1, n_sources)))


def apply_phi(lam: complex, surface: SurfaceQuadrature, phi: np.ndarray,
              points: np.ndarray, params: PhysParams) -> np.ndarray:
    """Evaluate the layer potential sum_j G_lambda(x - x_j) phi_j w_j.

    phi: (N, 4) or flat (4N,); points: (P, 3).  Returns (P, 4) spinors.
    On sphere grids, targets closer to the shell than twice the node spacing
    trigger band-limited upsampling of the density to a refined grid so the
    peaked near-surface kernel stays resolved.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    phi = np.asarray(phi, dtype=complex).reshape(surface.n_nodes, 4)
    if surface.kind is SurfaceKind.SPHERE_GRID and points.size:
        dist = np.abs(np.linalg.norm(points, axis=1)
                      - surface.shape_params[0]).min()
        if dist == 0.0:
            raise PointOnSurface("evaluation point lies on the shell")
        factor = 1
        while factor < 8 and surface.h / factor > 0.5 * max(dist, 1e-12):
            factor *= 2
        if factor > 1:
            surface, phi = _sphere_upsample(surface, phi, factor)
    phiw = phi * surface.weights[:, None]
    out = np.empty((points.shape[0], 4), dtype=complex)
    step = _eval_chunk(surface.n_nodes)
    for lo in range(0, points.shape[0], step):
        chunk = points[lo : lo + step]
        blocks = _green_blocks(lam, chunk, surface.nodes, params, 0.0, PointOnSurface)
        out[lo : lo + step] = np.einsum("pnab,nb->pa", blocks, phiw)
    return out


def apply_phi_star(lam: complex, surface: SurfaceQuadrature, f_samples: np.ndarray,
                   vol_nodes: np.ndarray, vol_weights: np.ndarray,
                   params: PhysParams) -> np.ndarray:
    """Adjoint potential: density_i = sum_k G_{conj(lam)}(x_i - y_k) f_k w_k."""
    f = np.asarray(f_samples, dtype=complex).reshape(len(vol_weights), 4)
    fw = f * np.asarray(vol_weights)[:, None]
    lam_bar = np.conj(complex(lam))
    out = np.empty((surface.n_nodes, 4), dtype=complex)
    step = _eval_chunk(len(vol_weights))
    for lo in range(0, surface.n_nodes, step):
        chunk = surface.nodes[lo : lo + step]
        blocks = _green_blocks(lam_bar, chunk, np.asarray(vol_nodes, dtype=float),
                               params, 0.0, VolumeNodeOnSurface)
        out[lo : lo + step] = np.einsum("pnab,nb->pa", blocks, fw)
    return out


# ---------------------------------------------------------------------------
# Binary export: magic "SHSP", u32 dim, u8 kind, lambda as two little-endian
# f64, then row-major complex128 entries.
# ---------------------------------------------------------------------------

_MAGIC = b"SHSP"
_HEADER = struct.Struct("<4sIBdd")


def save_operator(op: BoundaryOperator, path):
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, op.dim, op.kind.value,
                              complex(op.lam).real, complex(op.lam).imag))
        fh.write(np.ascontiguousarray(op.matrix, dtype=np.complex128).tobytes())


def load_operator(path, surface: SurfaceQuadrature | None = None) -> BoundaryOperator:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise ParseError(f"{path}: truncated operator file")
        magic, dim, kind, lre, lim = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise ParseError(f"{path}: bad magic {magic!r}")
        data = np.frombuffer(fh.read(), dtype=np.complex128)
    if data.size != dim * dim:
        raise ParseError(f"{path}: expected {dim * dim} entries, got {data.size}")
    return BoundaryOperator(data.reshape(dim, dim).copy(), complex(lre, lim),
                            OperatorKind(kind), surface)
