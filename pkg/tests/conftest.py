import numpy as np
import pytest

from obsforge import (Criterion, NonlinearSystem, StateDomain,
                      build_nonlinearity, build_system, random_network,
                      synthesize)


@pytest.fixture(scope="session")
def sir7():
    """A fixed networked-SIR instance used across tests."""
    net = random_network(10, seed=7)
    return net, build_system(net)


@pytest.fixture(scope="session")
def academic_sys():
    """2-state system with C G != 0, where the parameterization-free LMI is
    properly (strictly) feasible and gains come out moderate."""
    f = build_nonlinearity("polynomial", {"coeffs": [0.0, 0.0, 0.25]})
    return NonlinearSystem(
        A=np.array([[0.0, 1.0], [-1.0, -1.0]]),
        G=np.array([[1.0], [1.0]]),
        H=np.array([[0.0, 1.0]]),
        C=np.array([[1.0, 0.0]]),
        f=f,
        domain=StateDomain.box([-2.0, -2.0], [2.0, 2.0]))


@pytest.fixture(scope="session")
def academic_paramfree(academic_sys):
    res = synthesize(academic_sys, Criterion.paramfree(1.0))
    assert res.solution.status == "Feasible"
    assert res.report.passed
    return res


@pytest.fixture(scope="session")
def threshold_sys():
    """Observer problem with a genuine Lipschitz feasibility threshold:
    H reads the coordinate the output cannot reach, so K cannot cancel it."""
    f = build_nonlinearity("polynomial", {"coeffs": [0.0, 0.0, 0.5]})
    return NonlinearSystem(
        A=np.array([[0.0, 1.0], [0.0, 0.0]]),
        G=np.array([[0.0], [1.0]]),
        H=np.array([[0.0, 1.0]]),
        C=np.array([[1.0, 0.0]]),
        f=f,
        domain=StateDomain.box([-1.0, -1.0], [1.0, 1.0]))


@pytest.fixture(scope="session")
def undetectable_sys():
    """Unstable unobservable mode: no gain choice can stabilize M."""
    f = build_nonlinearity("zero", {"dim_in": 2, "dim_out": 1})
    return NonlinearSystem(
        A=np.diag([1.0, -1.0]),
        G=np.array([[0.0], [1.0]]),
        H=np.eye(2),
        C=np.array([[0.0, 1.0]]),
        f=f,
        domain=StateDomain.box([-1.0, -1.0], [1.0, 1.0]))
