"""Algebraic layer: Dirac matrices, couplings, Green kernels."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diracshell.core import (ALPHA, BETA, GAMMA5, I4, Coupling, CouplingClass,
                             PhysParams, SpectralPoint, SpectralRegion,
                             alpha_dot, classify_coupling,
                             confinement_projectors, essential_spectrum,
                             green_function, green_split, momentum_k,
                             remainder_diagonal_limit, symmetry_map,
                             transmission_matrix)
from diracshell.errors import (ConfinementCase, DegenerateCoupling,
                               EssentialSpectrumPoint, NotConfinement,
                               OriginSingularity)

finite = st.floats(min_value=-50.0, max_value=50.0,
                   allow_nan=False, allow_infinity=False)
speeds = st.floats(min_value=0.1, max_value=100.0,
                   allow_nan=False, allow_infinity=False)


# ---------------------------------------------------------------------------
# Dirac algebra
# ---------------------------------------------------------------------------


def test_alpha_anticommutation():
    for j in range(3):
        for k in range(3):
            acc = ALPHA[j] @ ALPHA[k] + ALPHA[k] @ ALPHA[j]
            assert np.abs(acc - 2.0 * (j == k) * I4).max() < 1e-15


def test_alpha_beta_anticommute_and_squares():
    for j in range(3):
        assert np.abs(ALPHA[j] @ BETA + BETA @ ALPHA[j]).max() < 1e-15
        assert np.abs(ALPHA[j].conj().T - ALPHA[j]).max() < 1e-15
    assert np.abs(BETA @ BETA - I4).max() < 1e-15
    assert np.abs(GAMMA5 @ GAMMA5 - I4).max() < 1e-15
    for j in range(3):
        assert np.abs(GAMMA5 @ ALPHA[j] - ALPHA[j] @ GAMMA5).max() < 1e-15
    assert np.abs(GAMMA5 @ BETA + BETA @ GAMMA5).max() < 1e-15


@given(v=st.lists(finite, min_size=3, max_size=3))
def test_alpha_dot_square(v):
    v = np.array(v)
    sq = alpha_dot(v) @ alpha_dot(v)
    assert np.abs(sq - np.dot(v, v) * I4).max() < 1e-9 * max(1.0, np.dot(v, v))


# ---------------------------------------------------------------------------
# coupling classification and maps
# ---------------------------------------------------------------------------


@given(eta=finite, tau=finite, c=speeds)
def test_classify_consistent_with_discriminant(eta, tau, c):
    klass = classify_coupling(eta, tau, c)
    d = eta**2 - tau**2
    if abs(d - 4 * c**2) > 1e-6 * c**2 and abs(d + 4 * c**2) > 1e-6 * c**2:
        assert klass is CouplingClass.NONCRITICAL


def test_classify_special_points():
    assert classify_coupling(2.0, 0.0, 1.0) is CouplingClass.CRITICAL
    assert classify_coupling(0.0, 2.0, 1.0) is CouplingClass.CONFINEMENT
    assert classify_coupling(-3.0, 0.0, 1.0) is CouplingClass.NONCRITICAL
    assert Coupling(0.0, 2.0, 1.0).klass is CouplingClass.CONFINEMENT


def test_coupling_matrix():
    cpl = Coupling(-3.0, 0.5)
    assert np.abs(cpl.matrix - (-3.0 * I4 + 0.5 * BETA)).max() < 1e-15


@given(eta=finite, tau=finite, c=speeds)
def test_symmetry_map_involution(eta, tau, c):
    if abs(eta**2 - tau**2) < 1e-6:
        return
    cpl = Coupling(eta, tau, c)
    back = symmetry_map(symmetry_map(cpl))
    scale = max(abs(eta), abs(tau))
    assert abs(back.eta - eta) < 1e-8 * max(1.0, scale)
    assert abs(back.tau - tau) < 1e-8 * max(1.0, scale)


def test_symmetry_map_degenerate():
    with pytest.raises(DegenerateCoupling):
        symmetry_map(Coupling(1.0, 1.0))
    with pytest.raises(DegenerateCoupling):
        symmetry_map(Coupling(0.0, 0.0))


def test_symmetry_map_example():
    img = symmetry_map(Coupling(-3.0, 0.0, 1.0))
    assert abs(img.eta - 4.0 / 3.0) < 1e-14
    assert img.tau == 0.0


# ---------------------------------------------------------------------------
# transmission matrix and confinement projectors
# ---------------------------------------------------------------------------


def _unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def test_transmission_closed_form_inverse(rng):
    for _ in range(20):
        eta, tau = rng.normal(size=2) * 3.0
        c = abs(rng.normal()) + 0.5
        cpl = Coupling(eta, tau, c)
        if cpl.klass is not CouplingClass.NONCRITICAL:
            continue
        nu = _unit(rng)
        an = alpha_dot(nu)
        half = 0.5 * cpl.matrix
        r_mat = transmission_matrix(cpl, nu)
        lhs = (1j * c * an + half) @ r_mat + (-1j * c * an + half)
        assert np.abs(lhs).max() < 1e-12


def test_transmission_refuses_confinement():
    with pytest.raises(ConfinementCase):
        transmission_matrix(Coupling(0.0, 2.0, 1.0), [0.0, 0.0, 1.0])


def test_confinement_projectors_idempotent(rng):
    for _ in range(10):
        tau = abs(rng.normal()) + 0.5
        c = 0.5 * math.sqrt(tau**2)  # eta = 0, tau = 2c
        cpl = Coupling(0.0, tau, c)
        nu = _unit(rng)
        p_plus, p_minus = confinement_projectors(cpl, nu)
        assert np.abs(p_plus @ p_plus - p_plus).max() < 1e-12
        assert np.abs(p_minus @ p_minus - p_minus).max() < 1e-12
        assert np.abs(p_plus + p_minus - I4).max() < 1e-12
        assert np.abs(p_plus @ p_minus).max() < 1e-12


def test_mit_bag_specialization(rng):
    nu = _unit(rng)
    p_plus, p_minus = confinement_projectors(Coupling(0.0, 2.0, 1.0), nu)
    x = 1j * alpha_dot(nu) @ BETA
    assert np.abs(p_plus - 0.5 * (I4 - x)).max() < 1e-14
    assert np.abs(p_minus - 0.5 * (I4 + x)).max() < 1e-14


def test_confinement_projectors_refuse_noncritical():
    with pytest.raises(NotConfinement):
        confinement_projectors(Coupling(-3.0, 0.0, 1.0), [0, 0, 1.0])


# ---------------------------------------------------------------------------
# momentum and Green function
# ---------------------------------------------------------------------------


def test_momentum_gap_is_imaginary(params):
    for lam in [-0.9, -0.3, 0.0, 0.5, 0.99]:
        k = momentum_k(lam, params)
        assert k.real == 0.0 and k.imag > 0.0
        assert abs(k**2 - (lam**2 - 1.0)) < 1e-14


@given(re=finite, im=st.floats(min_value=1e-3, max_value=30.0))
@settings(max_examples=50)
def test_momentum_upper_half_plane(re, im):
    params = PhysParams(1.0, 1.0)
    for lam in (complex(re, im), complex(re, -im)):
        k = momentum_k(lam, params)
        assert k.imag > 0.0
        assert abs(k**2 - (lam**2 - 1.0)) < 1e-8 * max(1.0, abs(lam) ** 2)


def test_momentum_rejects_essential(params):
    with pytest.raises(EssentialSpectrumPoint):
        momentum_k(1.0, params)
    with pytest.raises(EssentialSpectrumPoint):
        momentum_k(-2.5, params)


def test_green_conjugation_symmetry(params, rng):
    lam = 0.3 + 0.2j
    for _ in range(50):
        x = rng.normal(size=3)
        g = green_function(lam, x, params)
        g_star = green_function(np.conj(lam), -x, params)
        assert np.abs(np.conj(g).T - g_star).max() < 1e-13


def test_green_beta_anticommutator(params, rng):
    lam = -0.4 + 0.0j
    k = momentum_k(lam, params)
    for _ in range(50):
        x = rng.normal(size=3)
        r = np.linalg.norm(x)
        g = green_function(lam, x, params)
        scal = np.exp(1j * k * r) / (4 * np.pi * r)
        target = 2.0 * (lam * BETA + I4) * scal
        assert np.abs(BETA @ g + g @ BETA - target).max() < 1e-13


def test_green_split_consistency(params, rng):
    lam = 0.2 + 0.1j
    x = rng.normal(size=3) * 1e-3
    sing, rem = green_split(lam, x, params)
    g = green_function(lam, x, params)
    assert np.abs(sing + rem - g).max() < 1e-10 * np.abs(g).max()
    # the remainder stays bounded near the origin
    assert np.abs(rem).max() < 10.0
    lim = remainder_diagonal_limit(lam, params)
    even = 0.5 * (rem + BETA @ rem @ BETA)
    assert np.abs(even - lim).max() < 1e-2


def test_green_origin_raises(params):
    with pytest.raises(OriginSingularity):
        green_function(0.3j, np.zeros(3), params)


def test_green_batch_shape(params, rng):
    x = rng.normal(size=(7, 3))
    g = green_function(0.5j, x, params)
    assert g.shape == (7, 4, 4)
    single = green_function(0.5j, x[3], params)
    assert np.abs(g[3] - single).max() == 0.0


# ---------------------------------------------------------------------------
# spectral bookkeeping
# ---------------------------------------------------------------------------


def test_essential_spectrum_and_points(params):
    (lo, a), (b, hi) = essential_spectrum(params)
    assert lo == -math.inf and hi == math.inf and a == -1.0 and b == 1.0
    assert SpectralPoint.classify(0.5, params).region is SpectralRegion.GAP
    assert SpectralPoint.classify(1.5, params).region is SpectralRegion.ESSENTIAL
    assert SpectralPoint.classify(0.5j, params).region is SpectralRegion.NONREAL


def test_phys_params_validation():
    with pytest.raises(ValueError):
        PhysParams(-1.0, 1.0)
    with pytest.raises(ValueError):
        PhysParams(1.0, 0.0)
