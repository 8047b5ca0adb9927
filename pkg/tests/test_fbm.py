import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from fracctrl.fbm import (
    FbmGrid,
    FbmPath,
    QCovariance,
    fbm_cov,
    increment_autocov,
    increment_covariance,
    path_seed,
    reference_integrands,
    sample_fbm,
    sample_integrand,
    sample_qfbm,
    variance_bound,
    wiener_integral,
)


def within_3se(samples, target):
    samples = np.asarray(samples, dtype=float)
    se = samples.std(ddof=1) / math.sqrt(samples.size)
    return abs(samples.mean() - target) <= 3.0 * se, samples.mean(), se


def test_covariance_values():
    for h in (0.55, 0.75, 0.95):
        assert fbm_cov(1.0, 1.0, h) == pytest.approx(1.0, rel=1e-15)
    assert fbm_cov(1.0, 2.0, 0.5) == pytest.approx(1.0, rel=1e-15)
    assert fbm_cov(1.0, 2.0, 0.75) == pytest.approx(1.414213562373095, rel=1e-14)
    with pytest.raises(ValueError):
        fbm_cov(-1.0, 1.0, 0.75)


@given(st.floats(0.0, 5.0), st.floats(0.0, 5.0), st.floats(0.51, 0.99))
def test_covariance_symmetric_and_cauchy_schwarz(s, t, h):
    c = fbm_cov(s, t, h)
    assert c == pytest.approx(fbm_cov(t, s, h), abs=1e-15)
    assert c * c <= fbm_cov(s, s, h) * fbm_cov(t, t, h) * (1 + 1e-12) + 1e-300


def test_grid_validation():
    for bad in ({"t_end": 0.0}, {"n_steps": 0}, {"hurst": 0.5}, {"hurst": 1.0}, {"n_steps": 2.5}):
        kw = {"t_end": 1.0, "n_steps": 4, "hurst": 0.75, **bad}
        with pytest.raises(ValueError):
            FbmGrid(**kw)


def test_brownian_case_through_the_sampler():
    # FbmGrid only admits H > 1/2; the sampler itself only reads these attributes
    grid = SimpleNamespace(n_steps=100, hurst=0.5, delta=0.01)
    x = np.concatenate([sample_fbm(grid, s) for s in range(1000)])
    ok, mean, se = within_3se(x**2, 0.01)
    assert ok, (mean, se)
    # no correlation between neighbouring increments
    ok, mean, se = within_3se((x[:-1] * x[1:])[::2], 0.0)
    assert ok


def test_circulant_and_cholesky_same_covariance():
    grid = FbmGrid(1.0, 16, 0.75)
    cov = increment_covariance(grid)
    a = np.array([sample_fbm(grid, s, "circulant") for s in range(20000)])
    emp = a.T @ a / a.shape[0]
    # entrywise SE of the sample second moment
    se = np.sqrt((np.diag(cov)[:, None] * np.diag(cov)[None, :] + cov**2) / a.shape[0])
    assert np.all(np.abs(emp - cov) <= 4.0 * se)
    b = sample_fbm(grid, 3, "cholesky")
    assert b.shape == (16,)


def test_terminal_variance_and_lag_one_correlation():
    grid = FbmGrid(1.0, 256, 0.75)
    inc = np.array([sample_fbm(grid, path_seed(7, i)) for i in range(10000)])
    bt = inc.sum(axis=1)
    ok, m, se = within_3se(bt**2, 1.0)
    assert ok, (m, se)
    rho = (2 ** 1.5 - 2) / 2
    ok, m, se = within_3se(inc[:, 0] * inc[:, 1] / grid.delta**1.5, rho)
    assert ok, (m, se, rho)
    assert increment_autocov([1], 0.75)[0] == pytest.approx(rho, rel=1e-14)


def test_self_similarity():
    grid = FbmGrid(1.0, 128, 0.75)
    inc = np.array([sample_fbm(grid, path_seed(11, i)) for i in range(8000)])
    b = np.cumsum(inc, axis=1)
    x, y = b[:, 127] ** 2, b[:, 63] ** 2  # B(1)^2, B(1/2)^2
    r = x.mean() / y.mean()
    c = np.cov(x, y) / x.size
    se = r * math.sqrt(c[0, 0] / x.mean() ** 2 + c[1, 1] / y.mean() ** 2 - 2 * c[0, 1] / (x.mean() * y.mean()))
    assert abs(r - 2**1.5) <= 3 * se


def test_reproducible_and_readonly():
    grid = FbmGrid(0.5, 64, 0.7)
    q = QCovariance.power_law(4)
    a, b = sample_qfbm(grid, q, 42), sample_qfbm(grid, q, 42)
    assert np.array_equal(a.increments, b.increments)
    assert not a.increments.flags.writeable
    c = sample_qfbm(grid, q, 43)
    assert not np.array_equal(a.increments, c.increments)


def test_adding_modes_keeps_earlier_paths():
    grid = FbmGrid(1.0, 32, 0.8)
    a = sample_qfbm(grid, QCovariance.power_law(3), 5)
    b = sample_qfbm(grid, QCovariance.power_law(6), 5)
    assert np.array_equal(a.increments, b.increments[:3])


def test_qfbm_reductions():
    grid = FbmGrid(1.0, 32, 0.75)
    one = sample_qfbm(grid, QCovariance(np.array([1.0])), 9)
    ss = np.random.SeedSequence(entropy=9, spawn_key=(1,))
    assert np.array_equal(one.increments[0], sample_fbm(grid, ss))
    zero = sample_qfbm(grid, QCovariance(np.zeros(3)), 9)
    assert not np.any(zero.increments)


def test_qfbm_modes_independent():
    grid = FbmGrid(1.0, 32, 0.75)
    q = QCovariance.power_law(2)
    b = np.array([sample_qfbm(grid, q, path_seed(3, i)).increments.sum(axis=1) for i in range(5000)])
    ok, m, se = within_3se(b[:, 0] * b[:, 1], 0.0)
    assert ok
    ok, m, se = within_3se(b[:, 1] ** 2, 2.0**-4)
    assert ok


def test_q_covariance_trace():
    q = QCovariance.power_law(64, 4.0)
    assert q.trace() == pytest.approx(sum(n**-2.0 for n in range(1, 65)), rel=1e-14)
    assert q.trace_converged()
    assert not QCovariance(np.ones(8)).trace_converged()
    with pytest.raises(ValueError):
        QCovariance(np.array([1.0, -1.0]))


def test_path_values_and_csv(tmp_path):
    grid = FbmGrid(1.0, 4, 0.75)
    p = FbmPath(grid, np.array([[1.0, 2.0, 3.0, 4.0]]), 0)
    np.testing.assert_array_equal(p.values()[0], [0, 1, 3, 6, 10])
    p.to_csv(tmp_path / "b.csv")
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "t,mode_1"
    assert lines[-1] == "1.0,10.0"
    with pytest.raises(ValueError):
        FbmPath(grid, np.zeros((1, 3)), 0)


def test_wiener_integral_shapes_and_values():
    grid = FbmGrid(1.0, 8, 0.75)
    path = sample_qfbm(grid, QCovariance.power_law(3), 1)
    assert not np.any(wiener_integral(np.zeros((8, 3)), path).coeffs)
    ident = wiener_integral(np.ones((8, 3)), path).coeffs
    np.testing.assert_allclose(ident, path.values()[:, -1], rtol=1e-14)
    full = np.broadcast_to(np.eye(3), (8, 3, 3))
    np.testing.assert_allclose(wiener_integral(full, path).coeffs, ident, rtol=1e-14)
    with pytest.raises(ValueError):
        wiener_integral(np.ones((7, 3)), path)


def test_wiener_integral_identity_variance():
    grid = FbmGrid(1.0, 64, 0.75)
    q = QCovariance(np.array([1.0]))
    x = [wiener_integral(np.ones((64, 1)), sample_qfbm(grid, q, path_seed(2, i))).coeffs[0] for i in range(5000)]
    ok, m, se = within_3se(np.square(x), 1.0)
    assert ok


@pytest.mark.parametrize("name", ["linear", "constant", "decaying"])
def test_second_moment_bound(name):
    grid = FbmGrid(1.0, 128, 0.75)
    q = QCovariance.power_law(3)
    func = reference_integrands(3)[name]
    psi = sample_integrand(func, grid)
    sq = [np.sum(wiener_integral(psi, sample_qfbm(grid, q, path_seed(4, i))).coeffs ** 2) for i in range(3000)]
    sq = np.array(sq)
    se = sq.std(ddof=1) / math.sqrt(sq.size)
    bound = variance_bound(func, 1.0, 0.75, q)
    assert sq.mean() - 3 * se <= bound
    if name == "linear":
        # psi(s) = s I: bound = 2H t^{2H-1} trace(Q) / 3
        assert bound == pytest.approx(1.5 * q.eigs.sum() / 3.0, rel=1e-12)


def test_left_point_sums_converge_under_step_halving():
    # the left-point sum psi^T C psi of psi(s) = s tends to the continuous second moment
    # int int r s H(2H-1)|r-s|^{2H-2} dr ds
    h = 0.75
    exact = 2 * integrate.dblquad(lambda r, s: r * s * h * (2 * h - 1) * abs(r - s) ** (2 * h - 2),
                                  0, 1, lambda s: 0, lambda s: s, epsabs=1e-11)[0]
    errs = []
    for n in (32, 64, 128, 256):
        grid = FbmGrid(1.0, n, h)
        psi = grid.times[:-1]
        errs.append(abs(psi @ increment_covariance(grid) @ psi - exact))
    assert errs[-1] < errs[0] / 4
    assert all(b < a for a, b in zip(errs, errs[1:]))
