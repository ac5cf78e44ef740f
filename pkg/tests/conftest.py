import numpy as np
import pytest

from bfinito.datagen import make_poisson_instance, make_squared_instance, spectral_init
from bfinito.model import Regularizer, poisson_problem, quadratic_problem, squared_loss_problem


def toy_problem(gamma=1.0):
    """f_i = 1/2 (x - c_i)^2 with c = (0, 2) on R^1; minimizer of the average is 1."""
    return quadratic_problem([[0.0], [2.0]], [1.0, 1.0], gammas=[gamma, gamma])


@pytest.fixture
def toy():
    return toy_problem()


@pytest.fixture(scope="session")
def small_squared():
    inst = make_squared_instance(16, 3, seed=11)
    prob = squared_loss_problem(inst.A, inst.b, Regularizer.l1(0.1 / inst.N))
    return prob, spectral_init(inst, seed=11)


@pytest.fixture(scope="session")
def small_poisson():
    inst = make_poisson_instance(8, 32, seed=5)
    prob = poisson_problem(inst.A, inst.b, 0.1 / inst.N)
    return prob, np.ones(inst.n)


# -- acceptance report: one PASS/FAIL line per criterion -----------------------

_ACCEPTANCE = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" and item.module.__name__.endswith("test_acceptance"):
        doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
        detail = dict(item.user_properties).get("detail", "")
        _ACCEPTANCE.append((doc, rep.passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for doc, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {doc}  [{detail}]")
