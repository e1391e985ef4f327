"""Eigenvalue search in the spectral gap and derived spectral studies.

A real lambda in the gap is an eigenvalue exactly when the Birman-Schwinger
matrix I + (eta I4 + tau beta) C_lambda becomes singular, so the detector is
its smallest singular value in the weighted (discrete L^2) norm: scan a grid
of lambda values, bracket the dips, and polish each bracket by golden-section
search.  Eigen-densities are the right singular vectors of the near-singular
matrix, and every accepted eigenvalue is validated a posteriori against the
transmission condition at off-surface probe pairs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .assembly import (apply_phi, apply_phi_star, bs_matrix, weighted,
                       _green_blocks)
from .core import ALPHA, Coupling, CouplingClass, PhysParams, symmetry_map
from .errors import (CriticalCoupling, MixedCoupling, NoEigenvalueInBracket,
                     PointOnSurface, RealLambda)
from .linalg import sigma_min, smallest_singular_triplets
from .oracles import schrodinger_sphere_bound_states
from .surface import SurfaceQuadrature, probe_pairs

__all__ = [
    "EigenResult",
    "GapScan",
    "apply_resolvent",
    "find_eigenvalues",
    "nonrel_limit_sweep",
    "refine_eigenvalue",
    "scalar_positive_tau_check",
    "scan_gap",
    "verify_symmetries",
]

DEFAULT_N_SAMPLES = 200
# margin and refinement tolerance as fractions of the gap half-width m c^2
MARGIN_FACTOR = 1e-3
TOL_LAMBDA_FACTOR = 1e-6
# sigma_min level below which a scan sample opens a bracket.  It must sit
# below the sigma_min floor of couplings without gap eigenvalues (observed
# ~5e-2 for |eta| ~ 100 on the unit sphere) yet above the sampled depth of a
# genuine dip (~1e-3 at 200 samples); 0.02 separates the two regimes.
BRACKET_THRESHOLD = 0.02
# a polished true eigenvalue drives sigma_min to ~1e-8 with the band-exact
# sphere rules and to the discretization level on other surfaces; 1e-5 keeps
# a wide buffer on both sides
ACCEPT_TOL = 1e-5
MULTIPLICITY_FACTOR = 10.0
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class GapScan:
    """sigma_min(BS(lambda)) samples across the spectral gap."""

    lams: np.ndarray
    sigmas: np.ndarray
    brackets: list[tuple[float, float]]
    threshold: float
    coupling: Coupling
    params: PhysParams

    def __post_init__(self):
        gap = self.params.gap_edge
        if np.any(np.abs(self.lams) >= gap):
            raise ValueError("scan samples must lie strictly inside the gap")
        if np.any(self.sigmas < 0.0):
            raise ValueError("sigma_min values must be nonnegative")


@dataclass(frozen=True)
class EigenResult:
    """A polished gap eigenvalue with its densities and residuals."""

    lam: float
    sigma: float
    multiplicity: int
    densities: np.ndarray  # (multiplicity, 4N), orthonormal in weighted norm
    residual: float

    def __post_init__(self):
        if self.multiplicity < 1:
            raise ValueError("accepted eigenvalue needs multiplicity >= 1")


def _check_noncritical(coupling: Coupling) -> None:
    if coupling.klass is CouplingClass.CRITICAL:
        raise CriticalCoupling(
            f"(eta, tau) = ({coupling.eta}, {coupling.tau}): "
            "eta^2 - tau^2 = 4c^2 is the critical case; the operator's "
            "spectral properties are completely different there and the "
            "Birman-Schwinger detector does not apply")
    if abs(coupling.eta**2 - coupling.tau**2 - 4.0 * coupling.c**2) \
            < 0.05 * 4.0 * coupling.c**2:
        warnings.warn("coupling is near-critical; the Birman-Schwinger "
                      "matrix conditioning degrades", stacklevel=3)


def _sigma_at(lam: float, coupling: Coupling, surface: SurfaceQuadrature,
              params: PhysParams) -> float:
    return sigma_min(weighted(bs_matrix(lam, coupling, surface, params)))


def scan_gap(coupling: Coupling, surface: SurfaceQuadrature, params: PhysParams,
             n_samples: int = DEFAULT_N_SAMPLES, margin: float | None = None,
             threshold: float = BRACKET_THRESHOLD) -> GapScan:
    """Sample sigma_min of the Birman-Schwinger matrix across the gap.

    Brackets are maximal sample runs below ``threshold``, widened by one
    sample on each side (clipped to the scan range).
    """
    _check_noncritical(coupling)
    gap = params.gap_edge
    if margin is None:
        margin = MARGIN_FACTOR * gap
    if not 0.0 < margin < gap:
        raise ValueError(f"margin must be in (0, {gap}), got {margin}")
    lams = np.linspace(-gap + margin, gap - margin, n_samples)
    sig = np.array([_sigma_at(lam, coupling, surface, params) for lam in lams])
    brackets: list[tuple[float, float]] = []
    i = 0
    while i < n_samples:
        if sig[i] < threshold:
            j = i
            while j + 1 < n_samples and sig[j + 1] < threshold:
                j += 1
            brackets.append((float(lams[max(i - 1, 0)]),
                             float(lams[min(j + 1, n_samples - 1)])))
            i = j + 1
        i += 1
    return GapScan(lams, sig, brackets, threshold, coupling, params)


def refine_eigenvalue(coupling: Coupling, surface: SurfaceQuadrature,
                      params: PhysParams, bracket: tuple[float, float],
                      tol_lam: float | None = None,
                      accept_tol: float = ACCEPT_TOL) -> EigenResult:
    """Polish one bracket by golden-section search on sigma_min.

    Accepts when the minimized sigma_min is at most ``accept_tol``; the
    multiplicity is the number of singular values below 10x that tolerance
    and the densities are the matching right singular vectors mapped back
    from the weighted coordinates.
    """
    _check_noncritical(coupling)
    if tol_lam is None:
        tol_lam = TOL_LAMBDA_FACTOR * params.gap_edge
    a, b = bracket
    x1, x2 = b - _INV_PHI * (b - a), a + _INV_PHI * (b - a)
    f1 = _sigma_at(x1, coupling, surface, params)
    f2 = _sigma_at(x2, coupling, surface, params)
    while b - a > tol_lam:
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INV_PHI * (b - a)
            f1 = _sigma_at(x1, coupling, surface, params)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INV_PHI * (b - a)
            f2 = _sigma_at(x2, coupling, surface, params)
    lam_star, sig_star = (x1, f1) if f1 < f2 else (x2, f2)
    if sig_star > accept_tol:
        raise NoEigenvalueInBracket(
            f"sigma_min stays at {sig_star:.3e} > {accept_tol:.1e} over "
            f"[{bracket[0]:.6f}, {bracket[1]:.6f}]")

    wmat = weighted(bs_matrix(lam_star, coupling, surface, params))
    mult_tol = MULTIPLICITY_FACTOR * accept_tol
    n_try = 4
    while True:
        sigmas, vecs = smallest_singular_triplets(wmat, n_try)
        mult = int(np.count_nonzero(sigmas <= mult_tol))
        if mult < n_try or n_try >= min(32, wmat.shape[0]):
            break
        n_try *= 2
    mult = max(mult, 1)
    sqrt_w = np.sqrt(np.repeat(surface.weights, 4))
    densities = (vecs[:, :mult] / sqrt_w[:, None]).T.copy()
    residual = _jump_residual(lam_star, coupling, surface, params, densities[0])
    return EigenResult(float(lam_star), float(sig_star), mult, densities,
                       float(residual))


def _jump_residual(lam: float, coupling: Coupling, surface: SurfaceQuadrature,
                   params: PhysParams, density: np.ndarray,
                   eps: float | None = None) -> float:
    """Relative transmission-condition residual of f = Phi_lambda(density).

    Traces from both sides are estimated at probe pairs x +- eps nu with
    Richardson extrapolation 2 f(eps) - f(2 eps), and plugged into
    ic alpha.nu (f+ - f-) + (1/2)(eta I4 + tau beta)(f+ + f-) = 0.
    """
    if eps is None:
        # small enough for the linear trace extrapolation, large enough for
        # the (upsampled) quadrature to resolve the near-surface kernel
        eps = 0.25 * surface.h
    pairs = probe_pairs(surface, [eps, 2.0 * eps])
    step = max(1, surface.n_nodes // 64)
    idx = np.arange(0, surface.n_nodes, step)
    by_eps = {}
    for e in (eps, 2.0 * eps):
        sel = [p for p in pairs if p.eps == e]
        inner = np.array([sel[i].inner for i in idx])
        outer = np.array([sel[i].outer for i in idx])
        by_eps[e] = (apply_phi(lam, surface, density, inner, params),
                     apply_phi(lam, surface, density, outer, params))
    f_in = 2.0 * by_eps[eps][0] - by_eps[2.0 * eps][0]
    f_out = 2.0 * by_eps[eps][1] - by_eps[2.0 * eps][1]
    nu = surface.normals[idx]
    alpha_nu = np.einsum("pj,jab->pab", nu, ALPHA)
    cmat = coupling.matrix
    term_jump = 1j * params.c * np.einsum("pab,pb->pa", alpha_nu, f_in - f_out)
    term_avg = 0.5 * (f_out + f_in) @ cmat.T
    scale = max(np.abs(term_jump).max(), np.abs(term_avg).max())
    return float(np.abs(term_jump + term_avg).max() / scale)


def find_eigenvalues(coupling: Coupling, surface: SurfaceQuadrature,
                     params: PhysParams, n_samples: int = DEFAULT_N_SAMPLES,
                     margin: float | None = None,
                     threshold: float = BRACKET_THRESHOLD,
                     accept_tol: float = ACCEPT_TOL) -> tuple[GapScan, list[EigenResult]]:
    """Scan the gap and polish every bracket; rejected brackets are dropped."""
    scan = scan_gap(coupling, surface, params, n_samples, margin, threshold)
    results = []
    for bracket in scan.brackets:
        try:
            results.append(refine_eigenvalue(coupling, surface, params,
                                             bracket, accept_tol=accept_tol))
        except NoEigenvalueInBracket:
            continue
    results.sort(key=lambda r: r.lam)
    return scan, results


def _match_sets(left: list[float], right: list[float], tol: float):
    """Greedy nearest matching; returns (pairs, unmatched_left, unmatched_right)."""
    right_free = list(right)
    pairs, missing = [], []
    for lam in left:
        if right_free:
            j = int(np.argmin([abs(lam - r) for r in right_free]))
            if abs(lam - right_free[j]) <= tol:
                pairs.append((lam, right_free.pop(j)))
                continue
        missing.append(lam)
    return pairs, missing, right_free


def verify_symmetries(coupling: Coupling, surface: SurfaceQuadrature,
                      params: PhysParams, n_samples: int = DEFAULT_N_SAMPLES,
                      accept_tol: float = ACCEPT_TOL) -> dict:
    """Check the coupling-transformation symmetries of the gap spectrum.

    Runs full scans for (eta, tau), for its strength-inversion image, and for
    (-eta, tau); matches eigenvalue sets within 2x the refinement tolerance:
    the image shares the spectrum, the sign flip mirrors it, and for eta = 0
    the spectrum is symmetric about 0 on its own.
    """
    _check_noncritical(coupling)
    tol = 2.0 * TOL_LAMBDA_FACTOR * params.gap_edge
    _, eigs = find_eigenvalues(coupling, surface, params, n_samples,
                               accept_tol=accept_tol)
    lams = [e.lam for e in eigs]
    report: dict = {
        "coupling": (coupling.eta, coupling.tau),
        "eigenvalues": lams,
        "tolerance": tol,
        "even_multiplicity": all(e.multiplicity % 2 == 0 for e in eigs),
        "multiplicities": [e.multiplicity for e in eigs],
    }

    if coupling.eta**2 != coupling.tau**2:
        mapped = symmetry_map(coupling)
        _, eigs_map = find_eigenvalues(mapped, surface, params, n_samples,
                                       accept_tol=accept_tol)
        pairs, miss_l, miss_r = _match_sets(lams, [e.lam for e in eigs_map], tol)
        report["inversion_image"] = {
            "coupling": (mapped.eta, mapped.tau),
            "eigenvalues": [e.lam for e in eigs_map],
            "pairs": pairs,
            "unmatched": miss_l + miss_r,
            "max_mismatch": max((abs(a - b) for a, b in pairs), default=0.0),
            "matched": not miss_l and not miss_r,
        }

    flipped = Coupling(-coupling.eta, coupling.tau, coupling.c)
    _, eigs_flip = find_eigenvalues(flipped, surface, params, n_samples,
                                    accept_tol=accept_tol)
    pairs, miss_l, miss_r = _match_sets(lams, [-e.lam for e in eigs_flip], tol)
    report["sign_flip"] = {
        "coupling": (flipped.eta, flipped.tau),
        "eigenvalues": [e.lam for e in eigs_flip],
        "pairs": pairs,
        "unmatched": miss_l + miss_r,
        "max_mismatch": max((abs(a - b) for a, b in pairs), default=0.0),
        "mirrored": not miss_l and not miss_r,
    }
    if coupling.eta == 0.0:
        pairs, miss_l, miss_r = _match_sets(lams, [-x for x in lams], tol)
        report["self_mirror"] = {
            "symmetric": not miss_l and not miss_r,
            "max_mismatch": max((abs(a - b) for a, b in pairs), default=0.0),
        }
    return report


def scalar_positive_tau_check(tau: float, surface: SurfaceQuadrature,
                              params: PhysParams,
                              n_samples: int = DEFAULT_N_SAMPLES) -> dict:
    """Purely scalar shells with tau >= 0 must have an empty gap spectrum."""
    if tau < 0.0:
        raise ValueError(f"positivity check needs tau >= 0, got {tau}")
    coupling = Coupling(0.0, tau, params.c)
    scan, eigs = find_eigenvalues(coupling, surface, params, n_samples)
    return {
        "tau": tau,
        "empty": not eigs,
        "eigenvalues": [e.lam for e in eigs],
        "min_sigma": float(scan.sigmas.min()),
        "smoothness_note": "surface is C^2; the emptiness statement is "
                           "proved for C^4 shells",
    }


def apply_resolvent(lam: complex, coupling: Coupling, surface: SurfaceQuadrature,
                    params: PhysParams, f_samples: np.ndarray,
                    vol_nodes: np.ndarray, vol_weights: np.ndarray,
                    eval_points: np.ndarray) -> np.ndarray:
    """(A - lambda)^{-1} f at eval_points via the Krein resolvent formula.

    Free resolvent by volume quadrature of the Green kernel, minus
    Phi_lambda (I + (eta I4 + tau beta) C_lambda)^{-1} (eta I4 + tau beta)
    applied to the trace density Phi*_{lambda-bar} f.
    """
    lam = complex(lam)
    if lam.imag == 0.0:
        raise RealLambda("the Krein formula is applied for nonreal lambda only")
    if coupling.klass is CouplingClass.CRITICAL:
        # the eigenvalue machinery refuses critical couplings, but for
        # nonreal lambda the finite-dimensional Birman-Schwinger solve below
        # stays well conditioned and the formula remains algebraically valid
        warnings.warn("critical coupling: the resolvent formula is applied "
                      "outside its proven range", stacklevel=2)
    eval_points = np.atleast_2d(np.asarray(eval_points, dtype=float))
    vol_nodes = np.asarray(vol_nodes, dtype=float)
    f = np.asarray(f_samples, dtype=complex).reshape(len(vol_weights), 4)
    fw = f * np.asarray(vol_weights)[:, None]

    blocks = _green_blocks(lam, eval_points, vol_nodes, params, 0.0,
                           PointOnSurface)
    free = np.einsum("pnab,nb->pa", blocks, fw)
    if coupling.eta == 0.0 and coupling.tau == 0.0:
        return free

    density = apply_phi_star(np.conj(lam), surface, f_samples, vol_nodes,
                             vol_weights, params)
    rhs = density @ coupling.matrix.T
    bs = bs_matrix(lam, coupling, surface, params)
    sol = np.linalg.solve(bs.matrix, rhs.reshape(-1))
    return free - apply_phi(lam, surface, sol, eval_points, params)


def nonrel_limit_sweep(coupling: Coupling, surface: SurfaceQuadrature, m: float,
                       c_list: list[float], upper: bool = True,
                       n_samples: int = 150) -> dict:
    """Track gap eigenvalues near the upper (or lower) gap edge as c grows.

    For a pure coupling the shifted eigenvalues lambda - mc^2 must approach
    the bound states of the Schrodinger shell operator at rate O(1/c); each
    Dirac eigenvalue is paired with the nearest radial-oracle energy and the
    log-log slope of the difference against c is fitted per oracle mode.
    """
    if coupling.eta != 0.0 and coupling.tau != 0.0:
        raise MixedCoupling("the nonrelativistic limit is stated for pure "
                            "electrostatic (tau=0) or pure scalar (eta=0) "
                            "couplings only")
    if list(c_list) != sorted(c_list):
        raise ValueError("c_list must be increasing")
    strength = coupling.eta if coupling.tau == 0.0 else \
        (coupling.tau if upper else -coupling.tau)
    radius = surface.shape_params[0] if surface.shape_params else 1.0
    modes = schrodinger_sphere_bound_states(strength, m, radius, l_max=4)
    rows = []
    for c in c_list:
        params = PhysParams(m, c)
        edge = params.gap_edge
        cpl = Coupling(coupling.eta, coupling.tau, c)
        if modes:
            depth = 1.4 * abs(modes[0].lam)
            window = (edge - depth, edge - 1e-4 * abs(modes[-1].lam)) if upper \
                else (-edge + 1e-4 * abs(modes[-1].lam), -edge + depth)
        else:
            window = (edge * 0.5, edge * 0.999) if upper \
                else (-edge * 0.999, -edge * 0.5)
        lams = np.linspace(*window, n_samples)
        sig = np.array([_sigma_at(lam, cpl, surface, params) for lam in lams])
        found = []
        for i in range(1, n_samples - 1):
            if sig[i] < sig[i - 1] and sig[i] < sig[i + 1] \
                    and sig[i] < BRACKET_THRESHOLD:
                try:
                    res = refine_eigenvalue(cpl, surface, params,
                                            (lams[i - 1], lams[i + 1]))
                except NoEigenvalueInBracket:
                    continue
                found.append(res.lam)
        for lam in found:
            shifted = lam - edge if upper else lam + edge
            sign = 1.0 if upper else -1.0
            target = sign * shifted
            if modes:
                j = int(np.argmin([abs(target - mode.lam) for mode in modes]))
                rows.append({"c": c, "lambda": lam, "shifted": shifted,
                             "oracle_l": modes[j].l, "oracle": modes[j].lam,
                             "difference": abs(target - modes[j].lam)})
            else:
                rows.append({"c": c, "lambda": lam, "shifted": shifted,
                             "oracle_l": None, "oracle": None,
                             "difference": None})
    orders = {}
    for mode in modes:
        pts = [(row["c"], row["difference"]) for row in rows
               if row["oracle_l"] == mode.l and row["oracle"] == mode.lam
               and row["difference"]]
        by_c: dict[float, float] = {}
        for c, diff in pts:
            by_c[c] = min(diff, by_c.get(c, np.inf))
        if len(by_c) >= 2:
            cs = np.log(np.array(sorted(by_c)))
            ds = np.log(np.array([by_c[c] for c in sorted(by_c)]))
            orders[(mode.l, mode.lam)] = float(-np.polyfit(cs, ds, 1)[0])
    return {"rows": rows, "modes": [(mo.l, mo.lam) for mo in modes],
            "orders": orders,
            "order": min(orders.values()) if orders else None}
