import numpy as np
import pytest

from dpwlab.errors import BranchPointHit, ZeroC
from dpwlab.loops import fro, mat2
from dpwlab.potentials import (GaugeLoop, apply_gauge, constant_diagonal_gauge,
                               identity_gauge, invert_z, k_equivalence_certificate,
                               make_xi, normalize_c, reduced_potential, scale_z,
                               section5_chain, shift_gauge, vacuum)

RNG_LAMS = np.exp(1j * np.linspace(0.1, 2 * np.pi, 7))


def sample_points(seed=0, n=20):
    rng = np.random.default_rng(seed)
    zs = rng.uniform(0.6, 1.4, n) * np.exp(1j * rng.uniform(-2.0, 2.0, n))
    lams = np.exp(1j * rng.uniform(0, 2 * np.pi, n))
    return zs, lams


def max_dist(pa, pb, zs, lams):
    worst = 0.0
    for z in zs:
        worst = max(worst, float(fro(pa.eval(z, lams) - pb.eval(z, lams)).max()))
    return worst


def test_make_xi_k_minus_one_at_one():
    xi = make_xi(-1, 1)
    lam = 0.3 + 0.7j
    want = np.array([[0, 1], [1, 0]]) / lam
    assert fro(xi.eval(1.0, lam) - want) < 1e-15


def test_make_xi_k0_is_z_independent():
    xi = make_xi(0, 2 - 1j)
    a = xi.eval(0.3, RNG_LAMS)
    b = xi.eval(-1.7 + 0.4j, RNG_LAMS)
    assert fro(a - b).max() < 1e-15


def test_make_xi_k2():
    xi = make_xi(2, 3)
    want = np.array([[0, 1], [12, 0]], dtype=complex)
    assert fro(xi.eval(2.0, 1.0) - want) < 1e-14


def test_make_xi_rejects_zero_c():
    with pytest.raises(ZeroC):
        make_xi(1, 0)


def test_apply_identity_gauge():
    xi = make_xi(-1, 2)
    zs, lams = sample_points(1)
    assert max_dist(apply_gauge(xi, identity_gauge()), xi, zs, lams) < 1e-14


def test_constant_diagonal_gauge_oracle():
    # direct conjugation: diag(mu,1/mu)^{-1} [[0,1],[c/z,0]] diag(mu,1/mu)
    # = [[0, mu^{-2}], [c mu^2 / z, 0]]
    mu, c = 1.3 - 0.4j, 2 + 1j
    xi = make_xi(-1, c)
    gauged = apply_gauge(xi, constant_diagonal_gauge(mu))
    zs, lams = sample_points(2, 12)
    for z in zs:
        want = np.zeros(lams.shape + (2, 2), dtype=complex)
        want[..., 0, 1] = mu ** -2 / lams
        want[..., 1, 0] = c * mu ** 2 / (z * lams)
        assert fro(gauged.eval(z, lams) - want).max() < 1e-13


def test_gauge_derivative_crosscheck():
    zs, lams = sample_points(3, 6)
    for g in (shift_gauge(), constant_diagonal_gauge(0.7)):
        assert g.derivative_defect(zs[:4], lams) < 1e-6


def test_section5_gauges_fd_and_positivity():
    chain = section5_chain(1.0)
    zs = np.array([0.8 + 0.1j, 1.2 - 0.3j])
    lams = np.exp(1j * np.linspace(0.2, 5.9, 8))
    for g in chain.gauges:
        assert g.derivative_defect(zs, lams) < 1e-6
        assert g.positivity_defect(1.1 + 0.2j) < 1e-10


def test_invert_z_k_minus_one():
    xi = invert_z(make_xi(-1, 2 - 1j))
    lam = np.exp(0.4j)
    want = np.array([[0, -1], [-(2 - 1j), 0]], dtype=complex) / lam
    assert fro(xi.eval(1.0, lam) - want) < 1e-14


def test_invert_z_is_involution():
    xi = make_xi(1, 1 + 2j)
    zs, lams = sample_points(4)
    assert max_dist(invert_z(invert_z(xi)), xi, zs, lams) < 1e-12


def test_invert_z_k_minus_two():
    xi = invert_z(make_xi(-2, 3))
    zs, lams = sample_points(5, 10)
    for z in zs:
        want = np.zeros(lams.shape + (2, 2), dtype=complex)
        want[..., 0, 1] = -z ** -2 / lams
        want[..., 1, 0] = -3.0 / lams
        assert fro(xi.eval(z, lams) - want).max() < 1e-13


def test_shift_gauge_matches_target_potential():
    # Eq-level oracle, worked by hand: after z -> 1/z and the shift gauge,
    # xi_k becomes exactly lambda^{-1} [[0,1],[c z^{-k-4},0]].
    for k, c in ((0, 1.0), (1, 2 + 1j), (-2, 0.5 - 0.2j)):
        rep = k_equivalence_certificate(k, c, n_samples=100, seed=11)
        assert rep.partner == -k - 4
        assert rep.max_residual < 1e-10


def test_k_equivalence_self_paired():
    rep = k_equivalence_certificate(-2, 1.0, n_samples=50, seed=2)
    assert rep.partner == -2
    assert rep.max_residual < 1e-10


def test_normalize_c_trivial():
    xi1, gauge, scale = normalize_c(make_xi(-1, 1))
    zs, lams = sample_points(6)
    assert abs(scale.alpha - 1) < 1e-14
    assert max_dist(xi1, make_xi(-1, 1), zs, lams) < 1e-12


@pytest.mark.parametrize("c", [4.0, 1j])
def test_normalize_c_nontrivial(c):
    xi1, gauge, scale = normalize_c(make_xi(-1, c))
    zs, lams = sample_points(7)
    assert max_dist(xi1, make_xi(-1, 1), zs, lams) < 1e-12


def test_section5_intermediate_stage():
    # after the first three gauges: sqrt(c) [[0, 1/lam], [1/lam + lam/(4c), 0]] dz/z
    c = 2.5
    chain = section5_chain(c)
    stage3 = chain.stages[3]
    zs, lams = sample_points(8, 12)
    sc = np.sqrt(c)
    for z in zs:
        want = np.zeros(lams.shape + (2, 2), dtype=complex)
        want[..., 0, 1] = sc / (lams * z)
        want[..., 1, 0] = sc * (1 / lams + lams / (4 * c)) / z
        assert fro(stage3.eval(z, lams) - want).max() < 1e-12


def test_section5_final_reduction():
    for c in (1.0, 2.5, 0.3):
        chain = section5_chain(c)
        zs, lams = sample_points(9, 20)
        assert chain.final_residual(zs, lams) < 1e-10


def test_section5_stagewise_gauge_identity():
    # independent recomputation of each stage by the gauge formula with
    # central-difference derivatives (eps = 1e-6, so agreement ~1e-9)
    chain = section5_chain(1.7)
    zs, lams = sample_points(10, 8)
    eps = 1e-6
    for idx, g in enumerate(chain.gauges):
        before, after = chain.stages[idx], chain.stages[idx + 1]
        for z in zs[:6]:
            pv = g.eval(z, lams)
            pinv = np.linalg.inv(pv)
            dp = (g.eval(z + eps, lams) - g.eval(z - eps, lams)) / (2 * eps)
            want = pinv @ before.eval(z, lams) @ pv + pinv @ dp
            assert fro(after.eval(z, lams) - want).max() < 1e-8


def test_section5_structure_of_final():
    chain = section5_chain(1.0)
    loop = chain.final.loop_value(0.9 + 0.3j)
    assert set(loop.coeffs) == {-1}
    m = loop.coeff(-1)
    assert abs(m[0, 0]) + abs(m[1, 1]) < 1e-12


def test_section5_branch_point_hit():
    chain = section5_chain(0.25)  # Omega vanishes at lambda = +-i
    with pytest.raises(BranchPointHit):
        chain.final.eval(1.0, 1j)


def test_section5_rejects_nonpositive_c():
    with pytest.raises(ValueError):
        section5_chain(-1.0)


def test_reduced_potential_matches_chain():
    c = 1.3
    chain = section5_chain(c)
    zs, lams = sample_points(12, 10)
    assert max_dist(chain.final, reduced_potential(c), zs, lams) < 1e-10


def test_scale_z_pullback():
    xi = make_xi(0, 1)
    sc = scale_z(xi, 2.0)
    # pullback of dz under z -> 2z multiplies the constant potential by 2
    assert fro(sc.eval(0.5, 1.0) - 2 * xi.eval(1.0, 1.0)).max() < 1e-14
