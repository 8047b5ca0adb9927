import csv
import math

import numpy as np
import pytest

from fracctrl.control import (
    ControlLaw,
    SingularGramianError,
    adjoint_w,
    apply_w,
    build_gramian,
    continuous_gramian,
    synthesize_control,
)
from fracctrl.hypotheses import estimate_constants
from fracctrl.scenario import shipped_scenario, with_model
from fracctrl.spectral import OperatorSpec
from fracctrl.system import BSpec, HistorySpec

GAMMA_CLASSICAL = 0.43233235838169365  # (1 - e^{-2}) / 2, mpmath


def model_with(n_modes=16, n_steps=500, t_end=0.5, alpha=0.8, c=None, beta=2 / 3):
    c = np.ones((1, n_modes)) if c is None else np.atleast_2d(c)
    return with_model(shipped_scenario(), alpha=alpha, beta=beta, t_end=t_end, n_steps=n_steps,
                      operator=OperatorSpec(n_modes), b=BSpec(c),
                      history=HistorySpec(np.ones(n_modes)),
                      x_target=np.arange(1, n_modes + 1, dtype=float) ** -3).model


def classical_model():
    return model_with(n_modes=1, n_steps=2000, t_end=1.0, alpha=0.999, beta=0.9)


def test_zero_control_profile():
    g = build_gramian(model_with(c=np.zeros((1, 16))), 1e-3)
    np.testing.assert_array_equal(g.regularized, 1e-3 * np.eye(16))


def test_classical_single_mode_gramian():
    m = classical_model()
    g = build_gramian(m, 0.0)
    assert g.matrix[0, 0] == pytest.approx(GAMMA_CLASSICAL, rel=1e-2)
    assert continuous_gramian(m)[0, 0] == pytest.approx(GAMMA_CLASSICAL, rel=1e-2)
    k = estimate_constants(m, g)
    assert k.Mw == pytest.approx(1.0 / GAMMA_CLASSICAL, rel=1e-2)
    assert 1.0 / GAMMA_CLASSICAL == pytest.approx(2.3131, abs=1e-4)


def test_classical_single_mode_control():
    m = classical_model()
    law = synthesize_control(m, np.ones(1), build_gramian(m, 0.0))
    s = law.grid + 0.5 * m.delta  # cell midpoints
    ref = np.exp(-(1.0 - s)) / GAMMA_CLASSICAL
    rel = math.sqrt(np.sum((law.values[:, 0] - ref) ** 2) / np.sum(ref**2))
    assert rel <= 1e-2
    assert law.target_residual <= 1e-10


def test_gramian_psd_and_trace():
    # trace = int_0^T tau^{2 alpha - 2} ||S_alpha(tau) c||^2 dtau; the cell-based and the
    # nodal quadratures approach it from opposite sides near the weak singularity
    gaps = []
    for k in (1000, 4000):
        m = model_with(n_steps=k)
        g = build_gramian(m, 0.0)
        assert np.allclose(g.matrix, g.matrix.T)
        assert g.eigenvalues()[0] >= -1e-14 * g.eigenvalues()[-1]
        cont = continuous_gramian(m)
        assert np.trace(g.matrix) <= np.trace(cont)
        gaps.append(1.0 - np.trace(g.matrix) / np.trace(cont))
    assert gaps[1] < 0.6 * gaps[0]
    assert gaps[1] < 1e-2


def test_gramian_converges_to_continuous():
    errs = []
    cont = continuous_gramian(model_with(n_modes=4, n_steps=4000))
    for k in (250, 500, 1000):
        g = build_gramian(model_with(n_modes=4, n_steps=k), 0.0)
        errs.append(np.linalg.norm(g.matrix - cont) / np.linalg.norm(cont))
    assert errs[2] < errs[1] < errs[0]


def test_zero_defect():
    m = model_with()
    law = synthesize_control(m, np.zeros(16), build_gramian(m, 1e-6))
    assert not np.any(law.values) and law.target_residual == 0.0 and law.energy() == 0.0


def test_adjoint_identity():
    rng = np.random.default_rng(0)
    m = model_with(n_steps=200)
    g = build_gramian(m, 0.0)
    u = rng.standard_normal((200, 1))
    y = rng.standard_normal(16)
    lhs = apply_w(g, u) @ y
    rhs = m.delta * np.sum(u * adjoint_w(g, y))
    assert lhs == pytest.approx(rhs, rel=1e-12)
    np.testing.assert_allclose(g.matrix @ y, apply_w(g, adjoint_w(g, y)), rtol=1e-12)


def test_forward_operator_hits_reachable_target():
    rng = np.random.default_rng(1)
    m = model_with(n_steps=2000)
    g = build_gramian(m, 1e-10)
    y = apply_w(g, rng.standard_normal((2000, 1)))
    law = synthesize_control(m, y, g)
    assert np.linalg.norm(apply_w(g, law.values) - y) / np.linalg.norm(y) <= 1e-3


def test_minimum_norm_property():
    # any other control reaching the same point costs at least as much
    rng = np.random.default_rng(2)
    m = model_with(n_modes=4, n_steps=400)
    g = build_gramian(m, 0.0)
    y = apply_w(g, rng.standard_normal((400, 1)))
    law = synthesize_control(m, y, g)
    other = rng.standard_normal((400, 1))
    assert law.energy() <= m.delta * np.sum(other**2) or not np.allclose(apply_w(g, other), y)
    # perturbing within the null space of W only adds energy
    null = other - adjoint_w(g, np.linalg.lstsq(g.matrix, apply_w(g, other), rcond=None)[0])
    cand = ControlLaw(law.grid, law.values + null, g)
    np.testing.assert_allclose(apply_w(g, cand.values), y, rtol=1e-6, atol=1e-10)
    assert law.energy() <= cand.energy()


def test_unreachable_target_without_regularisation():
    c = np.ones((1, 5))
    c[0, 2] = 0.0
    m = model_with(n_modes=5, c=c, n_steps=200)
    with pytest.raises(SingularGramianError):
        synthesize_control(m, np.eye(5)[2], build_gramian(m, 0.0))
    # with regularisation the component is simply not steered
    law = synthesize_control(m, np.eye(5)[2], build_gramian(m, 1e-8))
    assert law.energy() == pytest.approx(0.0, abs=1e-14)


def test_validation():
    m = model_with(n_steps=50)
    with pytest.raises(ValueError):
        build_gramian(m, -1.0)
    with pytest.raises(ValueError):
        synthesize_control(m, np.ones(3), build_gramian(m, 0.0))


def test_csv_outputs(tmp_path):
    m = model_with(n_modes=3, n_steps=10)
    g = build_gramian(m, 1e-6)
    law = synthesize_control(m, np.ones(3), g)
    law.to_csv(tmp_path / "u.csv")
    rows = list(csv.reader((tmp_path / "u.csv").open()))
    assert rows[0] == ["t", "u"] and len(rows) == 11
    assert float(rows[1][1]) == law.values[0, 0]
    g.eigen_csv(tmp_path / "e.csv")
    rows = list(csv.reader((tmp_path / "e.csv").open()))
    assert rows[0] == ["index", "eigenvalue", "regularized"] and len(rows) == 4
