import numpy as np
import pytest

from dpwlab import loops
from dpwlab.errors import SingularOnCircle
from dpwlab.loops import (CircleGrid, LoopMatrix, dump_coeffs, fro,
                          lambda_derivative, load_coeffs, loop_dist,
                          loop_eval, loop_inverse, loop_mul, loop_star, mat2,
                          omega)

A_SWAP = mat2(0, 1, 1, 0)


def exp_invlambda(scale, n_terms=40):
    """Closed-form oracle: exp(scale * A / lambda) built coefficientwise.

    A = offdiag(1, 1) satisfies A^2 = id, so the coefficient of lambda^{-n}
    is scale^n A^n / n!, alternating between diagonal and off-diagonal.
    """
    coeffs = {}
    p = np.eye(2, dtype=complex)
    fact = 1.0
    for n in range(n_terms):
        if n > 0:
            p = p @ A_SWAP
            fact *= n
        coeffs[-n] = (scale ** n / fact) * p
    return LoopMatrix(coeffs)


def random_twisted(rng, band=4, scale=0.5):
    coeffs = {}
    for n in range(-band, band + 1):
        a, b = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        a *= scale / (1 + abs(n)) ** 2
        b *= scale / (1 + abs(n)) ** 2
        if n % 2 == 0:
            coeffs[n] = mat2(a, 0, 0, b)
        else:
            coeffs[n] = mat2(0, a, b, 0)
    return LoopMatrix(coeffs)


def test_mul_identity():
    e = LoopMatrix.identity()
    assert loop_dist(loop_mul(e, e), e) < 1e-15


def test_mul_omega_squared_is_minus_id():
    w = omega()
    minus_id = LoopMatrix({0: -np.eye(2)})
    assert loop_dist(loop_mul(w, w), minus_id) < 1e-15


def test_mul_shifted_swap():
    a = LoopMatrix({-1: A_SWAP})
    got = loop_mul(a, a)
    want = LoopMatrix({-2: np.eye(2)})
    assert loop_dist(got, want) < 1e-15


def test_inverse_identity():
    assert loop_dist(loop_inverse(LoopMatrix.identity()), LoopMatrix.identity()) < 1e-12


def test_inverse_omega():
    want = LoopMatrix({1: mat2(0, 1, 0, 0), -1: mat2(0, 0, -1, 0)})
    assert loop_dist(loop_inverse(omega()), want) < 1e-12


def test_inverse_exponential_oracle():
    a = exp_invlambda(1.0)
    want = exp_invlambda(-1.0)
    inv = loop_inverse(a)
    assert loop_dist(inv, want) < 1e-11
    prod = loop_mul(a, inv, band=80)
    assert loop_dist(prod, LoopMatrix.identity()) < 1e-10


def test_inverse_singular_raises():
    bad = LoopMatrix({0: mat2(1, 0, 0, 0)})
    with pytest.raises(SingularOnCircle):
        loop_inverse(bad)


def test_eval_identity():
    e = LoopMatrix.identity()
    for lam in (1.0, 1j, np.exp(0.3j)):
        assert fro(loop_eval(e, lam) - np.eye(2)) < 1e-15


def test_eval_omega_at_one():
    assert fro(loop_eval(omega(), 1.0) - mat2(0, -1, 1, 0)) < 1e-15


def test_eval_pole_at_i():
    a = LoopMatrix({-1: A_SWAP})
    want = mat2(0, -1j, -1j, 0)
    assert fro(loop_eval(a, 1j) - want) < 1e-15


def test_star_identity():
    assert loop_dist(loop_star(LoopMatrix.identity()), LoopMatrix.identity()) < 1e-15


def test_star_shifts_and_adjoints():
    a = LoopMatrix({1: mat2(0, 1, 0, 0)})     # lambda * E12
    want = LoopMatrix({-1: mat2(0, 0, 1, 0)})  # lambda^-1 * E21
    assert loop_dist(loop_star(a), want) < 1e-15


def test_star_of_constant_unitary_is_inverse():
    th = 0.7
    u = mat2(np.cos(th), np.sin(th) * np.exp(0.2j),
             -np.sin(th) * np.exp(-0.2j), np.cos(th))
    f = LoopMatrix.constant(u)
    assert loop_dist(loop_star(f), loop_inverse(f)) < 1e-12


def test_derivative_of_constant_is_zero():
    d = lambda_derivative(LoopMatrix.identity())
    assert d.coeffs == {}


def test_derivative_power_rule():
    a = LoopMatrix({1: mat2(0, 1, 0, 0), -1: mat2(0, 0, 1, 0)})
    want = LoopMatrix({0: mat2(0, 1, 0, 0), -2: mat2(0, 0, -1, 0)})
    assert loop_dist(lambda_derivative(a), want) < 1e-15


def test_derivative_chain_rule_oracle():
    # lambda * d/dlambda exp(A/lambda) at lambda=1 equals -A exp(A):
    # the closed form differentiates to exp(A/lambda) * (-A/lambda^2).
    a = exp_invlambda(1.0)
    got = loop_eval(lambda_derivative(a), 1.0)
    expA = np.cosh(1.0) * np.eye(2) + np.sinh(1.0) * A_SWAP
    want = -A_SWAP @ expA
    assert fro(got - want) < 1e-12


def test_parity_closure_under_ops():
    rng = np.random.default_rng(11)
    a = random_twisted(rng)
    b = random_twisted(rng)
    assert loops.parity_defect(loop_mul(a, b)) < 1e-12
    assert loops.parity_defect(loop_star(a)) < 1e-12
    shifted = loops.loop_add(a, LoopMatrix.identity())
    assert loops.parity_defect(loop_inverse(shifted)) < 1e-10


def test_coefficient_sample_roundtrip():
    rng = np.random.default_rng(3)
    a = random_twisted(rng, band=6)
    grid = CircleGrid(32)  # Nyquist: 32 >= 2*12 + 2
    aw = a.with_samples(grid)
    back = LoopMatrix.from_samples(aw.samples, grid, band=8)
    assert loop_dist(back, a) < 1e-12
    assert aw.check_consistency(1e-12) < 1e-12


def test_det_multiplicative_on_samples():
    rng = np.random.default_rng(5)
    a = random_twisted(rng).with_samples(CircleGrid(64))
    b = random_twisted(rng).with_samples(CircleGrid(64))
    ab = loop_mul(a, b).with_samples(CircleGrid(64))
    det = np.linalg.det
    assert np.abs(det(ab.samples) - det(a.samples) * det(b.samples)).max() < 1e-10


def test_star_antiautomorphism():
    rng = np.random.default_rng(7)
    a = random_twisted(rng)
    b = random_twisted(rng)
    lhs = loop_star(loop_mul(a, b))
    rhs = loop_mul(loop_star(b), loop_star(a))
    assert loop_dist(lhs, rhs) < 1e-11


def test_truncation_reports_dropped_mass():
    a = LoopMatrix({3: np.eye(2)})
    prod = loop_mul(a, a, band=4)  # degree 6 exceeds the band
    assert prod.coeffs == {}
    assert prod.dropped_mass > 1.0


def test_dump_load_roundtrip(tmp_path):
    rng = np.random.default_rng(19)
    a = random_twisted(rng, band=3)
    path = tmp_path / "loop.txt"
    dump_coeffs(a, path)
    b = load_coeffs(path)
    for n, c in a.coeffs.items():
        assert fro(b.coeff(n) - c) < 1e-15


def test_grid_requires_even_positive():
    with pytest.raises(ValueError):
        CircleGrid(5)
    g = CircleGrid(8)
    assert g.nyquist_ok(-1, 2)
    assert not g.nyquist_ok(-4, 4)
