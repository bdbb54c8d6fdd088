import math

import mpmath
import numpy as np
import pytest

from torus_choreo import seqspace as sq
from torus_choreo.problem import (
    I_CONST, Layout, ProblemParams, ReferenceOrbit, ResonanceKind, StateX, apply_Mj, check_resonance,
    compute_s1, dde_residual, eta, fourier_map, galerkin_map, gamma, jacobian_galerkin, map_f, map_g,
    map_h,
)
from torus_choreo.seqspace import SeqVec


def random_seq(rng, N, real=False):
    c = sq.CoeffSeq(rng.normal(size=2 * N + 1) + 1j * rng.normal(size=2 * N + 1))
    return sq.symmetrize(c) if real else c


def random_state(rng, n, m, scale=1.0, real=False):
    N = m - 1
    seqs = [random_seq(rng, N, real) * scale for _ in range(n + 5)]
    cplx = (lambda k: rng.normal(size=k)) if real else (lambda k: rng.normal(size=k) + 1j * rng.normal(size=k))
    return StateX(cplx(3) * scale, cplx(n - 1) * scale, SeqVec(seqs[:3]), SeqVec(seqs[3:6]), SeqVec(seqs[6:]))


def s1_oracle(n):
    mpmath.mp.dps = 40
    return mpmath.fsum(1 / mpmath.sin(j * mpmath.pi / n) for j in range(1, n)) / 4


# --------------------------------------------------------------------------
# constants and resonances
# --------------------------------------------------------------------------


def test_s1_four_bodies():
    assert compute_s1(4) == pytest.approx(float(s1_oracle(4)), rel=1e-15)
    assert str(compute_s1(4)).startswith("0.957106781186")
    period = 2 * math.pi / (math.sqrt(compute_s1(4)) * 10 / 9)
    assert period == pytest.approx(5.780190889966, abs=1e-11)


def test_s1_five_bodies():
    assert str(compute_s1(5)).startswith("1.376381920471")
    assert 2 * math.pi / (3 * math.sqrt(compute_s1(5))) == pytest.approx(1.785209272759583, rel=1e-14)


@pytest.mark.parametrize("n", range(3, 21))
def test_s1_enclosure_is_tight(n):
    enc = compute_s1(n, interval=True)
    assert float(enc.width()) <= 1e-14
    exact = s1_oracle(n)
    assert mpmath.mpf(float(enc.lo)) <= exact <= mpmath.mpf(float(enc.hi))


def test_s1_needs_three_bodies():
    with pytest.raises(ValueError):
        compute_s1(2)


@pytest.mark.parametrize(
    "case, k_tilde",
    [((5, 3, 3, 1), 3), ((4, 2, 10, 9), None), ((9, 7, 10, 13), None)],
)
def test_simple_resonances(case, k_tilde):
    res = check_resonance(*case)
    assert res.kind is ResonanceKind.SIMPLE
    if k_tilde is not None:
        assert res.k_tilde == k_tilde


def test_multiple_and_invalid_resonances():
    assert check_resonance(5, 3, 4, 1).kind is ResonanceKind.MULTIPLE
    with pytest.raises(ValueError):
        check_resonance(4, 2, 6, 4)
    with pytest.raises(ValueError):
        ProblemParams(4, 4, 1, 1, 5)


# --------------------------------------------------------------------------
# M_j
# --------------------------------------------------------------------------


def test_vertical_factor_vanishes_at_full_turn():
    params = ProblemParams(5, 3, 3, 1, 8)
    u = SeqVec([sq.zeros(5), sq.zeros(5), sq.from_modes({5: 1.0}, 5)])
    assert abs(apply_Mj(u, 1, params)[2][5]) < 1e-15


@pytest.mark.parametrize("n, k, j", [(4, 2, 2), (6, 3, 2), (6, 2, 3)])
def test_mode_zero_planar_block_is_identity_minus_rotation(n, k, j):
    params = ProblemParams(n, k, k, 1, 4)
    assert (j * k) % n == 0
    rng = np.random.default_rng(j)
    x = rng.normal(size=3)
    u = SeqVec([sq.delta(0, x[0]), sq.delta(0, x[1]), sq.delta(0, x[2])])
    out = np.array([c[0] for c in apply_Mj(u, j, params)])
    ang = 2 * math.pi * j / n
    rot = np.array([[math.cos(ang), -math.sin(ang), 0], [math.sin(ang), math.cos(ang), 0], [0, 0, 1]])
    expected = x - rot @ x
    assert np.allclose(out.real, expected, atol=1e-15)


def test_component_norm_bound(rng):
    params = ProblemParams(5, 3, 3, 1, 6)
    nu = 1.1
    for _ in range(20):
        u = SeqVec(random_seq(rng, 5) for _ in range(3))
        biggest = max(sq.norm_nu(c, nu) for c in u)
        for j in range(1, 5):
            mu = apply_Mj(u, j, params)
            for p in range(3):
                assert sq.norm_nu(mu[p], nu) <= I_CONST[p] * biggest


# --------------------------------------------------------------------------
# scalar conditions
# --------------------------------------------------------------------------


def test_phase_conditions_vanish_on_reference(rng):
    u = SeqVec(random_seq(rng, 4, real=True) for _ in range(3))
    ref = ReferenceOrbit.from_u(u, 5)
    e = eta(u, ref)
    assert abs(e[0]) < 1e-13 and abs(e[1]) < 1e-13


def test_vertical_phase_condition_reads_mean_height():
    u = SeqVec([sq.delta(2, 1.0), sq.zeros(2), sq.delta(2, 0.7)])
    ref = ReferenceOrbit.from_u(u, 3)
    assert eta(u, ref)[2] == 0.7


def test_gamma_vanishes_on_normalized_distances():
    params = ProblemParams(4, 2, 10, 9, 3)
    # all bodies on the unit circle: chord j has length 2 sin(j zeta / 2)
    u = SeqVec([sq.delta(2, 1.0), sq.zeros(2), sq.zeros(2)])
    w = SeqVec(sq.delta(2, 1 / (2 * math.sin(j * params.zeta / 2))) for j in range(1, 4))
    assert np.max(np.abs(gamma(u, w, params))) < 1e-15
    zero_w = SeqVec(sq.zeros(2) for _ in range(3))
    assert np.all(gamma(u, zero_w, params) == -1)


def test_trefoil_scalar_residuals(trefoil):
    xbar, ref, _, params = trefoil
    assert np.max(np.abs(gamma(xbar.u, xbar.w, params))) <= 1e-10


# --------------------------------------------------------------------------
# f, g, h
# --------------------------------------------------------------------------


def test_f_cases(rng):
    u = SeqVec(random_seq(rng, 3) for _ in range(3))
    assert all(np.all(c.coeffs == 0) for c in map_f(u, SeqVec(sq.differentiate(c) for c in u)))
    consts = SeqVec(sq.delta(0) for _ in range(3))
    assert all(np.all(c.coeffs == 0) for c in map_f(consts, SeqVec(sq.zeros(0) for _ in range(3))))
    zero_v = SeqVec(sq.zeros(3) for _ in range(3))
    assert all(np.array_equal(a.coeffs, sq.differentiate(b).coeffs) for a, b in zip(map_f(u, zero_v), u))


def test_g_constant_forcing():
    params = ProblemParams(4, 2, 10, 9, 3)
    z = SeqVec(sq.zeros(2) for _ in range(3))
    zw = SeqVec(sq.zeros(2) for _ in range(3))
    g = map_g(np.array([0, 0, 1.0]), z, z, zw, params)
    assert g[2][0] == 1
    assert sum(np.count_nonzero(c.coeffs) for c in g) == 1


def test_g_vertical_component_ignores_planar_term():
    params = ProblemParams(4, 2, 10, 9, 3)
    u = SeqVec([sq.zeros(2), sq.zeros(2), sq.delta(2, 0.4)])
    z = SeqVec(sq.zeros(2) for _ in range(3))
    g = map_g(np.zeros(3), u, z, z, params)
    assert np.all(g[2].coeffs == 0)


def test_h_cases(rng):
    params = ProblemParams(4, 2, 10, 9, 3)
    u = SeqVec(random_seq(rng, 2) for _ in range(3))
    v = SeqVec(random_seq(rng, 2) for _ in range(3))
    zero = SeqVec(sq.zeros(2) for _ in range(3))
    assert all(np.all(c.coeffs == 0) for c in map_h(np.ones(3), u, v, zero, params))
    ones = SeqVec(sq.delta(2) for _ in range(3))
    assert all(np.all(c.coeffs == 0) for c in map_h(np.zeros(3), u, zero, ones, params))


def test_trefoil_residuals_small(trefoil):
    xbar, ref, _, params = trefoil
    F = fourier_map(xbar, params, ref)
    nu = params.nu
    m = params.m
    for c in [*F.g, *F.h]:
        assert sq.norm_nu(sq.project(c, m), nu) <= 1e-10
    assert np.max(np.abs(F.eta)) <= 1e-10


def test_zero_state_value():
    params = ProblemParams(4, 2, 10, 9, 3)
    x = StateX(np.zeros(3), np.zeros(3), *(SeqVec(sq.zeros(2) for _ in range(k)) for k in (3, 3, 3)))
    F = fourier_map(x, params, ReferenceOrbit.from_u(x.u, 2))
    assert np.all(F.gamma == -1)
    assert np.all(F.eta == 0)
    assert all(np.all(c.coeffs == 0) for c in [*F.f, *F.g, *F.h])


def test_reflection_equivariance(rng):
    params = ProblemParams(4, 2, 10, 9, 4)
    x = random_state(rng, 4, 4, 0.5)
    ref = ReferenceOrbit.from_u(SeqVec(random_seq(rng, 2, real=True) for _ in range(3)), 3)
    lhs = fourier_map(x.sigma(), params, ref)
    rhs = fourier_map(x, params, ref).sigma()
    assert np.allclose(lhs.to_vector(16), rhs.to_vector(16), atol=1e-12)


def test_degree_counting(rng):
    m = 4
    params = ProblemParams(4, 2, 10, 9, m)
    x = random_state(rng, 4, m)
    F = fourier_map(x, params, ReferenceOrbit.from_u(x.u.__class__(sq.symmetrize(c) for c in x.u), 3))
    assert max(c.N for c in F.g) <= 4 * (m - 1)
    assert max(c.N for c in F.h) <= 5 * (m - 1)
    assert max(c.N for c in F.h) == 5 * (m - 1)


# --------------------------------------------------------------------------
# Jacobian
# --------------------------------------------------------------------------


def central_difference_jacobian(xv, params, ref, step=1e-6):
    cols = []
    for i in range(len(xv)):
        e = np.zeros_like(xv)
        e[i] = step
        cols.append((galerkin_map(xv + e, params, ref) - galerkin_map(xv - e, params, ref)) / (2 * step))
    return np.array(cols).T


def jacobian_relative_error(rng):
    n, m = 4, 4
    params = ProblemParams(n, 2, 10, 9, m)
    x = random_state(rng, n, m, 0.5)
    ref = ReferenceOrbit.from_u(SeqVec(sq.symmetrize(c) for c in x.u), m - 1)
    xv = x.to_vector(m)
    J = jacobian_galerkin(xv, params, ref)
    fd = central_difference_jacobian(xv, params, ref)
    # entrywise relative error, floored at 1 for entries that vanish
    return float(np.max(np.abs(J - fd) / np.maximum(np.abs(J), 1.0)))


def test_jacobian_matches_finite_differences(rng):
    errors = [jacobian_relative_error(rng) for _ in range(20)]
    assert max(errors) <= 1e-6


def test_f_block_structure():
    n, m = 4, 3
    params = ProblemParams(n, 2, 10, 9, m)
    rng = np.random.default_rng(1)
    x = random_state(rng, n, m)
    J = jacobian_galerkin(x.to_vector(m), params, ReferenceOrbit.from_u(x.u, 2))
    lay = Layout(n, m)
    for p in range(3):
        block_u = J[lay.f(p), lay.u(p)]
        block_v = J[lay.f(p), lay.v(p)]
        assert np.array_equal(block_u, np.diag(1j * np.arange(-(m - 1), m)))
        assert np.array_equal(block_v, -np.eye(2 * m - 1))
    col = J[:, lay.lam(2)]
    nz = np.flatnonzero(col)
    assert len(nz) == 1 and nz[0] == lay.g(2).start + m - 1 and col[nz[0]] == 1


def test_interval_jacobian_encloses_float(trefoil):
    xbar, ref, _, params = trefoil
    small = params.with_m(8)
    x = xbar.galerkin(8)
    ref8 = ReferenceOrbit.from_u(x.u, 7)
    J = jacobian_galerkin(x.to_vector(8), small, ref8)
    box = jacobian_galerkin(x, small, ref8, interval=True)
    assert np.all(box.contains(J))


# --------------------------------------------------------------------------
# states
# --------------------------------------------------------------------------


def test_vector_round_trip(rng):
    x = random_state(rng, 5, 4)
    back = StateX.from_vector(x.to_vector(4), 5, 4)
    assert np.array_equal(back.to_vector(4), x.to_vector(4))
    assert len(x.to_vector(4)) == ProblemParams(5, 3, 3, 1, 4).size


def test_real_defect(rng):
    assert random_state(rng, 4, 3, real=True).real_defect() == 0.0
    assert random_state(rng, 4, 3).real_defect() > 0.0


def test_dde_residual_of_trefoil(trefoil):
    xbar, _, _, params = trefoil
    t = 2 * np.pi * np.arange(1024) / 1024
    assert np.max(np.abs(dde_residual(xbar.u, params, t))) <= 1e-8
