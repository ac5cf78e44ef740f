import numpy as np
import pytest
from scipy.optimize import minimize

from conftest import toy_problem
from bfinito.datagen import make_poisson_instance, make_squared_instance
from bfinito.errors import ParameterError
from bfinito.kernel import bregman
from bfinito.model import (Regularizer, poisson_problem, quadratic_problem, squared_loss_problem,
                           t_solve_quartic_l1)
from bfinito.solver_md import MDConfig, aggregate_kernel, md_config, md_run, md_step


def test_euclidean_step_is_gradient_step():
    rng = np.random.default_rng(0)
    C = rng.standard_normal((3, 2))
    prob = quadratic_problem(C, [1.0, 2.0, 0.5])
    conf = md_config(prob, "stochastic", alpha=0.7)
    x = rng.standard_normal(2)
    for k in (1, 2, 5):
        i = 1
        g = prob.family.f_grads(x, [i])[0]
        assert np.allclose(md_step(x, conf, prob, k, i), x - conf.stepsize(k) * g, atol=1e-14)
    full = md_config(prob, "full")
    g = prob.family.f_grads(x).mean(axis=0)
    assert np.allclose(md_step(x, full, prob, 3), x - g / full.aggregate_smoothness, atol=1e-14)


def test_fixed_point_when_gradient_vanishes(toy):
    conf = md_config(toy, "full")
    assert md_step(np.array([1.0]), conf, toy, 1)[0] == pytest.approx(1.0, abs=1e-15)


def test_quartic_step_matches_closed_form_and_minimizer():
    inst = make_squared_instance(2, 2, seed=3, p_corrupt=0)
    lam = 0.05
    prob = squared_loss_problem(inst.A, inst.b, Regularizer.l1(lam))
    conf = md_config(prob, "stochastic", alpha=0.5)
    h = conf.aggregate_kernel
    x = np.array([0.4, -0.9])
    k, i = 2, 1
    step = conf.stepsize(k)
    g = prob.family.f_grads(x, [i])[0]
    w = md_step(x, conf, prob, k, i)
    assert np.allclose(w, t_solve_quartic_l1(h.gradient(x) / step - g, lam, [step]), atol=1e-14)
    obj = lambda u: lam * np.abs(u).sum() + g @ u + bregman(h, u, x) / step
    ref = minimize(obj, x, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14,
                                                          "maxiter": 20000})
    assert np.allclose(w, ref.x, atol=1e-6)


def test_stepsize_sequence(small_squared):
    prob, _ = small_squared
    conf = md_config(prob, alpha=2.5)
    Lf = np.mean(prob.family.smoothness)
    assert conf.aggregate_smoothness == pytest.approx(Lf)
    for k in range(1, 50):
        assert conf.stepsize(k) == 2.5 / (Lf * k)
    with pytest.raises(ParameterError):
        md_step(np.zeros(prob.n), conf, prob, 0)
    with pytest.raises(ParameterError):
        MDConfig(0.0, 1.0, conf.aggregate_kernel)


def test_aggregate_kernels_match_component_average():
    rng = np.random.default_rng(1)
    inst = make_squared_instance(4, 2, seed=1)
    sq = squared_loss_problem(inst.A, inst.b)
    pinst = make_poisson_instance(4, 12, seed=2)
    po = poisson_problem(pinst.A, pinst.b)
    for prob, pos in ((sq, False), (po, True)):
        h = aggregate_kernel(prob)
        for _ in range(20):
            x = rng.standard_normal(4)
            if pos:
                x = np.abs(x) + 0.1
            avg = np.mean([c.kernel.value(x) for c in prob.components])
            assert h.value(x) == pytest.approx(avg, rel=1e-12)
            gavg = np.mean([c.kernel.gradient(x) for c in prob.components], axis=0)
            assert np.allclose(h.gradient(x), gavg, rtol=1e-12, atol=1e-12)


def test_full_md_monotone_on_toy():
    prob = toy_problem(1.0)
    res = md_run(prob, md_config(prob, "full"), [5.0], max_epochs=30)
    costs = [r.cost for r in res.trace]
    assert all(b <= a + 1e-15 for a, b in zip(costs, costs[1:]))
    assert res.x[0] == pytest.approx(1.0, abs=1e-12)


def test_tiny_alpha_barely_moves(small_squared):
    prob, x0 = small_squared
    conf = md_config(prob, alpha=1e-12)
    x1 = md_step(x0, conf, prob, 1, 0)
    g = prob.family.f_grads(x0, [0])[0]
    assert np.linalg.norm(x1 - x0) <= 10 * conf.stepsize(1) * np.linalg.norm(g) + 1e-15


def test_zero_budget(small_squared):
    prob, x0 = small_squared
    res = md_run(prob, md_config(prob), x0, max_epochs=0)
    assert np.array_equal(res.x, x0) and res.trace == []


def test_smd_deterministic_and_epoch_count(small_squared):
    prob, x0 = small_squared
    a = md_run(prob, md_config(prob), x0, max_epochs=2, seed=4)
    b = md_run(prob, md_config(prob), x0, max_epochs=2, seed=4)
    assert np.array_equal(a.x, b.x)
    assert a.iterations == 2 * prob.N and a.trace[-1].lyapunov is None
