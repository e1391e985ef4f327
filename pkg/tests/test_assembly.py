"""Assembly layer: layer operators, Birman-Schwinger matrices, potentials."""

import numpy as np
import pytest
from scipy.special import eval_legendre, sph_harm

from diracshell.assembly import (BoundaryOperator, OperatorKind, apply_phi,
                                 apply_phi_star, assemble_C,
                                 assemble_single_layer, bs_matrix,
                                 load_operator, save_operator, weighted,
                                 _sphere_upsample)
from diracshell.core import BETA, Coupling, I4, PhysParams, momentum_k
from diracshell.errors import PointOnSurface, VolumeNodeOnSurface
from diracshell.linalg import sigma_min
from diracshell.oracles import sphere_single_layer_eig
from diracshell.surface import sphere_grid, spheroid_grid


def _legendre_rayleigh(op, surface, l):
    """Rayleigh quotient of the operator on the zonal harmonic P_l(cos th)."""
    y = eval_legendre(l, np.clip(surface.nodes[:, 2] / np.linalg.norm(
        surface.nodes, axis=1), -1, 1))
    wy = y * surface.weights
    return np.vdot(wy, op.matrix @ y) / np.vdot(wy, y)


# ---------------------------------------------------------------------------
# single layer
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("k", [1j, 0.7j, 1.0 + 0.5j])
def test_single_layer_sphere_eigenvalues(k):
    s = sphere_grid(1.0, 12, 24)
    op = assemble_single_layer(k, s)
    for l in range(4):
        ref = sphere_single_layer_eig(k, 1.0, l)
        num = _legendre_rayleigh(op, s, l)
        assert abs(num - ref) < 5e-4 * abs(ref)


def test_single_layer_radius_scaling():
    # eigenvalues depend on k R and scale by R^2 / ... via the exact formula
    s = sphere_grid(2.0, 12, 24)
    op = assemble_single_layer(0.5j, s)
    for l in range(3):
        ref = sphere_single_layer_eig(0.5j, 2.0, l)
        num = _legendre_rayleigh(op, s, l)
        assert abs(num - ref) < 5e-4 * abs(ref)


def test_single_layer_symmetric():
    """The weighted single-layer matrix is complex symmetric."""
    s = sphere_grid(1.0, 8, 16)
    mat = weighted(assemble_single_layer(1j, s))
    assert np.abs(mat - mat.T).max() < 1e-12


def test_single_layer_spheroid_converges():
    """Spheroid self-convergence: coarse vs fine Rayleigh quotient."""
    k = 1j
    vals = []
    for npol in (12, 24):
        s = spheroid_grid(1.0, 1.5, npol, 2 * npol)
        op = assemble_single_layer(k, s)
        vals.append(_legendre_rayleigh(op, s, 0))
    assert abs(vals[0] - vals[1]) < 2e-2 * abs(vals[1])


# ---------------------------------------------------------------------------
# Dirac boundary operator
# ---------------------------------------------------------------------------


def test_assembled_beta_anticommutator(params):
    """beta C + C beta = 2 (lambda/c^2 beta + m I4) x single layer, exactly."""
    s = sphere_grid(1.0, 8, 16)
    lam = -0.4
    cmat = assemble_C(lam, s, params).matrix
    smat = assemble_single_layer(momentum_k(lam, params), s).matrix
    n = s.n_nodes
    beta_big = np.kron(np.eye(n), BETA)
    coef = 2.0 * (lam * BETA + I4)
    target = np.kron(smat, coef)
    lhs = beta_big @ cmat + cmat @ beta_big
    assert np.linalg.norm(lhs - target) < 1e-12 * np.linalg.norm(target)


def test_assemble_C_self_convergence(params):
    """Sphere matrix elements converge fast between successive grids."""
    lam = 0.3
    vals = []
    for npol in (10, 14):
        s = sphere_grid(1.0, npol, 2 * npol)
        cmat = assemble_C(lam, s, params).matrix
        # Rayleigh quotient on a fixed smooth spinor density
        z = s.nodes[:, 2]
        dens = np.stack([1 + z, z, 0.5 * z**2, np.ones_like(z)], axis=1).ravel()
        dw = dens * np.repeat(s.weights, 4)
        vals.append(np.vdot(dw, cmat @ dens) / np.vdot(dw, dens))
    assert abs(vals[0] - vals[1]) < 1e-6 * abs(vals[1])


def test_bs_matrix_free_case(params, sphere_small):
    """eta = tau = 0: the Birman-Schwinger matrix is the identity."""
    op = bs_matrix(0.5j, Coupling(0.0, 0.0, 1.0), sphere_small, params)
    assert np.abs(op.matrix - np.eye(op.dim)).max() == 0.0
    assert abs(sigma_min(weighted(op)) - 1.0) < 1e-12


def test_bs_matrix_structure(params, sphere_small):
    """I + (eta I4 + tau beta) C as block-diagonal strength times C."""
    lam = 0.2
    cpl = Coupling(-1.0, 0.5, 1.0)
    cmat = assemble_C(lam, sphere_small, params).matrix
    n = sphere_small.n_nodes
    strength = np.kron(np.eye(n), cpl.matrix)
    target = np.eye(4 * n) + strength @ cmat
    got = bs_matrix(lam, cpl, sphere_small, params).matrix
    assert np.abs(got - target).max() < 1e-13


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------


def test_apply_phi_solves_free_equation(params, sphere_small, rng):
    """Finite differences of the layer potential satisfy (A0 - lambda) u = 0."""
    from diracshell.core import ALPHA
    lam = 0.3 + 0.4j
    phi = rng.normal(size=(sphere_small.n_nodes, 4)) \
        + 1j * rng.normal(size=(sphere_small.n_nodes, 4))
    pts = []
    while len(pts) < 5:
        x = rng.uniform(-2.0, 2.0, 3)
        if 1.3 < np.linalg.norm(x) < 1.8:
            pts.append(x)
    pts = np.array(pts)
    delta = 1e-4
    stack = [pts]
    for j in range(3):
        for sgn in (1, -1):
            e = np.zeros(3)
            e[j] = sgn * delta
            stack.append(pts + e)
    vals = apply_phi(lam, sphere_small, phi, np.vstack(stack), params)
    u0 = vals[:5]
    grads = vals[5:].reshape(3, 2, 5, 4)
    resid = -1j * sum(
        np.einsum("ab,pb->pa", ALPHA[j], (grads[j, 0] - grads[j, 1]) / (2 * delta))
        for j in range(3)) + u0 @ BETA.T - lam * u0
    assert np.abs(resid).max() < 1e-6 * np.abs(u0).max()


def test_apply_phi_rejects_surface_point(params, sphere_small):
    phi = np.ones((sphere_small.n_nodes, 4))
    with pytest.raises(PointOnSurface):
        apply_phi(0.5j, sphere_small, phi, sphere_small.nodes[:1], params)


def test_apply_phi_star_adjoint(params, sphere_small, rng):
    """<Phi* f, phi>_Sigma = <f, Phi phi>_vol for off-surface volume nodes."""
    lam = 0.2 + 0.3j
    # keep volume nodes deep inside so no near-surface upsampling fires and
    # the discrete adjoint identity is exact
    vol = rng.uniform(-0.15, 0.15, size=(6, 3))
    wv = rng.uniform(0.5, 1.0, 6)
    f = rng.normal(size=(6, 4)) + 1j * rng.normal(size=(6, 4))
    phi = rng.normal(size=(sphere_small.n_nodes, 4)) \
        + 1j * rng.normal(size=(sphere_small.n_nodes, 4))
    dens = apply_phi_star(lam, sphere_small, f, vol, wv, params)
    lhs = np.sum(np.conj(dens) * phi * sphere_small.weights[:, None])
    pot = apply_phi(lam, sphere_small, phi, vol, params)
    rhs = np.sum(np.conj(f) * pot * wv[:, None])
    assert abs(lhs - rhs) < 1e-12 * abs(rhs)


def test_apply_phi_star_rejects_surface_node(params, sphere_small):
    f = np.ones((1, 4))
    with pytest.raises(VolumeNodeOnSurface):
        apply_phi_star(0.5j, sphere_small, f, sphere_small.nodes[:1],
                       np.ones(1), params)


# ---------------------------------------------------------------------------
# band-limited upsampling
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("l,m", [(0, 0), (3, 2), (5, -4), (7, 0)])
def test_sphere_upsample_exact_on_harmonics(l, m):
    s = sphere_grid(1.0, 8, 16)
    theta = np.arccos(np.clip(s.nodes[:, 2], -1, 1))
    phi_ang = np.arctan2(s.nodes[:, 1], s.nodes[:, 0])
    vals = sph_harm(m, l, phi_ang, theta).astype(complex)
    fine, fine_vals = _sphere_upsample(s, vals[:, None], 2)
    theta_f = np.arccos(np.clip(fine.nodes[:, 2], -1, 1))
    phi_f = np.arctan2(fine.nodes[:, 1], fine.nodes[:, 0])
    ref = sph_harm(m, l, phi_f, theta_f)
    assert np.abs(fine_vals[:, 0] - ref).max() < 1e-12


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def test_save_load_roundtrip(params, sphere_small, tmp_path):
    op = bs_matrix(0.1 + 0.2j, Coupling(-3.0, 0.0), sphere_small, params)
    path = tmp_path / "op.shsp"
    save_operator(op, path)
    back = load_operator(path, sphere_small)
    assert back.kind is OperatorKind.BS
    assert back.lam == op.lam
    assert np.abs(back.matrix - op.matrix).max() == 0.0


def test_load_rejects_garbage(tmp_path):
    from diracshell.errors import ParseError
    bad = tmp_path / "bad.shsp"
    bad.write_bytes(b"garbage-not-a-header")
    with pytest.raises(ParseError):
        load_operator(bad)
