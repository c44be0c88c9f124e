import numpy as np
import pytest
import scipy.linalg

from dpwlab.errors import OverflowOfLogPower, RankDeficiencyWarning
from dpwlab.frobenius import (FrobeniusSolution, LogSeries, _kernel_dimension,
                              analytic_monodromy, build_frobenius,
                              format_kernel_report, isotropy_kernel,
                              isotropy_probe, vacuum_series,
                              wplus_obstructions, wplus_ode_residuals)
from dpwlab.loops import LoopMatrix, fro, loop_dist, mat2


def laurent_eval(tab, lam):
    return sum(v * lam ** d for d, v in tab.items())


def test_eta_tables_frozen_values():
    sol = build_frobenius(1.0, 8)
    # from the recurrence: eta1_1 = c/(1*2) at lambda degree -2
    assert abs(sol.eta1[1][-2] - 0.5) < 1e-15
    # eta1_2 = c^2/(2*6) at degree -4
    assert abs(sol.eta1[2][-4] - 1.0 / 12) < 1e-15
    # the printed parametrization is pinned by eta2_1 = 0
    assert abs(sol.eta2[1][-2]) < 1e-15
    # and then eta2_2 = -(3/4) c^2 at degree -4
    assert abs(sol.eta2[2][-4] + 0.75) < 1e-15


def test_normalization_at_origin():
    # lim_{z->0} P = id: the log-free factor starts at the identity
    sol = build_frobenius(2 - 1j, 8)
    p = sol.p_factor()
    assert max(p.sectors) == 0
    assert loop_dist(p.coefficient(0, 0), LoopMatrix.identity()) < 1e-13


def test_log_factor_is_nilpotent_exponential():
    # the log-sector coefficient at order 0 is D; exp(log z * D) = id + log z * D
    c = 1.5 - 0.5j
    sol = build_frobenius(c, 6)
    d_loop = sol.series.coefficient(0, 1)
    assert loop_dist(d_loop, LoopMatrix({-1: mat2(0, 0, c, 0)})) < 1e-14
    for lam in (1.0, 1j, np.exp(0.7j)):
        d = d_loop.eval(lam)
        assert fro(d @ d) < 1e-14
        assert fro(scipy.linalg.expm(d) - (np.eye(2) + d)) < 1e-14


def test_column_odes_by_substitution():
    # substitute the column series into z u'' = (c/lambda^2) u termwise
    c = 2.0 + 0.5j
    sol = build_frobenius(c, 18)
    for lam in (1.0, np.exp(0.9j)):
        for z in (0.11, 0.23 + 0.1j):
            t = c * z / lam ** 2
            e1 = sol._eta1_hat
            x = sum(e1[j] * t ** j for j in range(len(e1))) * z
            xpp = sum((j + 1) * j * e1[j] * t ** j / z for j in range(len(e1)))
            assert abs(z * xpp - c * x / lam ** 2) < 1e-12
            # second column: y = (c/lam^2) x log z + w
            wh = sol._w_hat
            logz = np.log(z)
            u = c / lam ** 2 * x
            w = sum(wh[j] * t ** j for j in range(len(wh)))
            y = u * logz + w
            upp = c / lam ** 2 * xpp
            up = c / lam ** 2 * sum((j + 1) * e1[j] * t ** j for j in range(len(e1)))
            wpp = sum(j * (j - 1) * wh[j] * t ** j / z ** 2 for j in range(len(wh)))
            ypp = upp * logz + 2 * up / z - u / z ** 2 + wpp
            assert abs(z * ypp - c * y / lam ** 2) < 1e-12


def test_ode_residual_certificate():
    for c in (1.0, 2.0, 1j, 2 - 1j):
        sol = build_frobenius(c, 10)
        assert sol.ode_residual() < 1e-12


def test_series_matches_direct_eval():
    sol = build_frobenius(1.3, 20)
    lams = np.exp(1j * np.linspace(0.1, 6.0, 5))
    for z in (0.3, 0.2 - 0.15j):
        a = sol.series.eval(z, lams)
        b = sol.eval(z, lams, n_terms=20)
        assert fro(a - b).max() < 1e-12


def test_analytic_monodromy_values():
    sol = build_frobenius(1.0, 4)
    mono = analytic_monodromy(sol)
    want = LoopMatrix({0: np.eye(2), -1: mat2(0, 0, 2j * np.pi, 0)})
    assert loop_dist(mono, want) < 1e-14
    at_i = mono.eval(1j)
    assert fro(at_i - mat2(1, 0, 2 * np.pi, 1)) < 1e-14


def test_tau_action_matches_monodromy():
    sol = build_frobenius(2 - 1j, 10)
    shifted = sol.series.apply_tau()
    target = LogSeries.constant(analytic_monodromy(sol),
                                p_max=sol.series.p_max).mul(sol.series)
    defect = shifted.add(target, scale=-1.0).max_coeff_norm(through=sol.n_z)
    assert defect < 1e-12


def test_probe_identity_and_center():
    sol = build_frobenius(1.0, 8)
    for sign in (1.0, -1.0):
        w = isotropy_probe(sol, LoopMatrix({0: sign * np.eye(2)}))
        obs = wplus_obstructions(w)
        assert all(v < 1e-12 for v in obs["log_sector"].values())
        assert obs["negative_lambda"] < 1e-12
        assert loop_dist(w.coefficient(0, 0),
                         LoopMatrix({0: sign * np.eye(2)})) < 1e-12


def test_probe_perturbation_obstruction_scales():
    c = 1.0
    sol = build_frobenius(c, 8)
    eps = 1e-2
    h = LoopMatrix({0: np.eye(2), 1: mat2(0, eps, 0, 0)})
    w = isotropy_probe(sol, h)
    obs = wplus_obstructions(w)
    # the proof eliminates the degree-1 upper coefficient through the log
    # sector of the diagonal; the obstruction must be of order eps
    assert obs["log_sector"][1] > eps / 10
    assert obs["log_sector"][1] < 10 * eps


def test_probe_needs_two_log_powers():
    sol = FrobeniusSolution(1.0, 6, p_max=1)
    with pytest.raises(OverflowOfLogPower):
        isotropy_probe(sol, LoopMatrix({0: np.eye(2), 1: mat2(0, 1e-3, 0, 0)}))


def test_logseries_mul_overflow_is_loud():
    d = LogSeries({1: {0: LoopMatrix.identity()}}, p_max=1)
    with pytest.raises(OverflowOfLogPower):
        d.mul(d)


@pytest.mark.parametrize("c", [1.0, 2 - 1j])
def test_isotropy_kernel_is_scalar(c):
    res = isotropy_kernel(c, 6, 8)
    assert res.dimension == 1
    assert res.basis_is_scalar()
    assert not res.ambiguous
    report = format_kernel_report(res)
    assert "kernel dimension: 1" in report


def test_isotropy_kernel_control_vacuum():
    res = isotropy_kernel(1.0, 6, 8, series=vacuum_series(6))
    assert res.dimension > 1


def test_isotropy_kernel_window():
    # inside the resolved window (n_lambda <= 2 n_z) the kernel is scalar;
    # outside it the unresolved shear degrees 2*n_z+1, 2*n_z+3, ... <=
    # n_lambda each contribute one spurious direction
    for nz, nl in ((3, 6), (4, 8), (5, 10)):
        res = isotropy_kernel(1.0, nz, nl)
        assert res.window_ok
        assert res.dimension == 1
    for nz, nl in ((3, 8), (4, 12)):
        res = isotropy_kernel(1.0, nz, nl)
        assert not res.window_ok
        escaped = len(range(2 * nz + 1, nl + 1, 2))
        assert res.dimension == 1 + escaped


def test_kernel_dimension_cutoff_logic():
    dim, ambig, _ = _kernel_dimension(np.array([1.0, 1e-12]))
    assert dim == 1 and not ambig
    dim, ambig, _ = _kernel_dimension(np.array([1.0, 1e-7]))
    assert dim == 0 and ambig
    dim, ambig, _ = _kernel_dimension(np.array([1.0, 1e-9]))
    assert dim == 1 and ambig


def test_rank_warning_emitted():
    # place the cutoff just below a genuine singular value so the
    # ambiguity zone is occupied
    res = isotropy_kernel(1.0, 4, 6)
    sv = res.singular_values
    ratio = 0.5 * sv[-2] / sv[0]
    with pytest.warns(RankDeficiencyWarning):
        isotropy_kernel(1.0, 4, 6, cutoff_ratio=ratio)


def test_sqrt_z_not_representable():
    # least squares fit of sqrt(z) against holomorphic functions times
    # powers of log z; sampling three sheets imposes the double-deck
    # invariance that drives the contradiction, and the residual stays
    # macroscopic (two sheets alone can still be fitted well)
    radii = (0.8, 1.0, 1.25)
    theta = np.linspace(0, 6 * np.pi, 240, endpoint=False)
    zs, logs, signal = [], [], []
    for r in radii:
        zs.append(r * np.exp(1j * theta))
        logs.append(np.log(r) + 1j * theta)
        signal.append(np.sqrt(r) * np.exp(1j * theta / 2))
    zs = np.concatenate(zs)
    logs = np.concatenate(logs)
    signal = np.concatenate(signal)
    cols = [zs ** j * logs ** p for p in range(3) for j in range(9)]
    a = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(a, signal, rcond=None)
    resid = np.linalg.norm(signal - a @ coef) / np.linalg.norm(signal)
    assert resid > 0.1


def test_wplus_residuals_constants():
    sol = build_frobenius(1.0, 8)
    w_id = isotropy_probe(sol, LoopMatrix({0: -np.eye(2)}))
    r = wplus_ode_residuals(w_id, [0.2, 0.3], np.exp(1j * np.array([0.3, 2.1])))
    assert max(r) < 1e-12


def test_wplus_residuals_for_conjugated_constant():
    # conjugating any constant loop by the solution satisfies the first two
    # equations identically; the third follows by elimination, so all three
    # residuals must vanish to truncation accuracy
    sol = build_frobenius(1.0, 24)
    # [[a, b*lam], [c/lam, d]] has det = ad - bc for every lambda, so this
    # twisted loop lies exactly on the unit-determinant locus
    a, b, cc = 1.05, 0.2, 0.1j
    d = (1 + b * cc) / a
    h = LoopMatrix({0: mat2(a, 0, 0, d),
                    1: mat2(0, b, 0, 0),
                    -1: mat2(0, 0, cc, 0)})
    w = isotropy_probe(sol, h)
    zs = np.array([0.1, 0.15, 0.2])
    lams = np.exp(1j * np.array([0.4, 1.7, 3.9]))
    r1, r2, r3 = wplus_ode_residuals(w, zs, lams)
    assert r1 < 1e-9
    assert r2 < 1e-9
    assert r3 < 1e-9


def test_wplus_residuals_flag_corrupted_series():
    rng = np.random.default_rng(5)
    bad = LogSeries({0: {n: LoopMatrix({0: rng.standard_normal((2, 2))})
                         for n in range(3)}}, valid_through=3)
    r1, r2, r3 = wplus_ode_residuals(bad, [0.5, 0.8], np.array([1.0 + 0j]))
    assert max(r1, r2) > 1e-2
    assert r3 > 1e-2


def test_probe_rejects_untwisted_or_nonunimodular():
    sol = build_frobenius(1.0, 6)
    with pytest.raises(ValueError):
        isotropy_probe(sol, LoopMatrix({0: mat2(1, 0.5, 0, 1)}))  # untwisted
    with pytest.raises(ValueError):
        isotropy_probe(sol, LoopMatrix({0: 2 * np.eye(2)}))  # det != 1
