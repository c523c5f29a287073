import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from obsforge import (ContractViolation, SirNetwork, SirState, build_system,
                      load_network, pbh_detectability, random_network,
                      save_network, sir_vector_field)
from obsforge.sir_model import network_to_json_dict
from oracles import rk4_plant_only


def test_single_node_network():
    net = random_network(1, seed=0)
    assert net.n == 1
    assert 0.0 < net.W[0, 0] < 2.0


def test_paper_setup_parameters():
    net = random_network(10, p_edge=0.5, w_range=(0, 2), beta_range=(0, 1),
                         delta_range=(0, 1), seed=7)
    assert net.n == 10
    assert np.all(net.W >= 0) and net.W.max() < 2.0
    assert np.all((net.beta > 0) & (net.beta < 1))
    assert np.all((net.delta > 0) & (net.delta < 1))
    assert np.all(np.diag(net.W) > 0)  # every node has a self-loop
    assert_allclose(net.W, net.W.T)    # symmetric weights by default


def test_network_determinism():
    a = network_to_json_dict(random_network(10, seed=42))
    b = network_to_json_dict(random_network(10, seed=42))
    assert json.dumps(a) == json.dumps(b)


def test_asymmetric_flag():
    net = random_network(10, seed=5, symmetric_weights=False)
    off = net.W[np.triu_indices(10, 1)]
    offT = net.W.T[np.triu_indices(10, 1)]
    mask = (off > 0) & (offT > 0)
    assert np.any(off[mask] != offT[mask])


def test_delta_distinctness():
    for seed in range(20):
        net = random_network(10, seed=seed)
        gaps = np.abs(net.delta[:, None] - net.delta[None, :]) + np.eye(10)
        assert gaps.min() >= 1e-6


def test_network_validation():
    with pytest.raises(ContractViolation):
        SirNetwork(n=2, W=-np.ones((2, 2)), beta=[0.5, 0.5], delta=[0.3, 0.2])
    with pytest.raises(ContractViolation):
        SirNetwork(n=2, W=np.ones((2, 2)), beta=[0.5, -0.5], delta=[0.3, 0.2])


# ---------------------------------------------------------------------------
# assembly vs. per-node oracle
# ---------------------------------------------------------------------------

def test_disease_free_equilibrium():
    net = random_network(4, seed=1)
    sys = build_system(net)
    x = np.concatenate([np.zeros(4), np.array([0.2, 0.0, 0.5, 0.9])])
    assert_allclose(sys.f(x), 0.0)
    assert_allclose(sys.vector_field(x), 0.0, atol=1e-15)


def test_saturated_state_reduces_to_decay():
    net = random_network(5, seed=2)
    sys = build_system(net)
    rng = np.random.default_rng(0)
    xi = rng.uniform(0.1, 0.9, 5)
    x = np.concatenate([xi, 1.0 - xi])  # x_I + x_R = 1 at every node
    field = sys.vector_field(x)
    assert_allclose(field[:5], -net.delta * xi, atol=1e-14)
    assert_allclose(field[5:], net.delta * xi, atol=1e-14)


def test_two_node_hand_instance():
    net = SirNetwork(n=2, W=np.ones((2, 2)), beta=np.array([0.5, 0.4]),
                     delta=np.array([0.3, 0.2]))
    sys = build_system(net)
    x = np.array([0.1, 0.2, 0.0, 0.0])
    # hand evaluation of the per-node equations
    force1 = 0.5 * (0.1 + 0.2)
    force2 = 0.4 * (0.1 + 0.2)
    exp_dxi = [(1 - 0.1) * force1 - 0.3 * 0.1, (1 - 0.2) * force2 - 0.2 * 0.2]
    exp_dxr = [0.3 * 0.1, 0.2 * 0.2]
    assert_allclose(sys.vector_field(x), np.concatenate([exp_dxi, exp_dxr]),
                    atol=1e-15)
    dxi, dxr = sir_vector_field(net, SirState(x[:2], x[2:]))
    assert_allclose(dxi, exp_dxi, atol=1e-15)
    assert_allclose(dxr, exp_dxr, atol=1e-15)


def test_single_node_oracle_example():
    net = SirNetwork(n=1, W=[[1.0]], beta=[0.5], delta=[0.5])
    dxi, dxr = sir_vector_field(net, SirState([0.5], [0.0]))
    assert_allclose(dxi, [-0.125])
    assert_allclose(dxr, [0.25])


def test_field_agreement_random_instance():
    net = random_network(5, seed=9)
    sys = build_system(net)
    rng = np.random.default_rng(4)
    for x in sys.domain.sample(rng, 100):
        dxi, dxr = sir_vector_field(net, SirState(x[:5], x[5:]))
        assert_allclose(sys.vector_field(x), np.concatenate([dxi, dxr]),
                        atol=1e-13)


def test_field_agreement_property_1000_states():
    net = random_network(10, seed=31)
    sys = build_system(net)
    rng = np.random.default_rng(8)
    worst = 0.0
    for x in sys.domain.sample(rng, 1000):
        dxi, dxr = sir_vector_field(net, SirState(x[:10], x[10:]))
        dev = np.abs(sys.vector_field(x) - np.concatenate([dxi, dxr])).max()
        worst = max(worst, dev)
    assert worst <= 1e-12


# ---------------------------------------------------------------------------
# dynamics invariants
# ---------------------------------------------------------------------------

def test_simplex_forward_invariance_and_monotone_recovered():
    net = random_network(10, seed=12)
    sys = build_system(net)
    rng = np.random.default_rng(6)
    for x0 in sys.domain.sample(rng, 5):
        xs = rk4_plant_only(sys.vector_field, x0, horizon=20.0, dt=0.01)
        worst = max(sys.domain.violation(x) for x in xs)
        assert worst <= 1e-9
        xr = xs[:, 10:]
        assert np.all(np.diff(xr, axis=0) >= -1e-12)  # recovered never shrinks


def test_detectability_on_100_random_instances():
    for seed in range(100):
        net = random_network(6, seed=seed)
        sys = build_system(net)
        assert pbh_detectability(sys.A, sys.C).detectable, f"seed {seed}"


def test_network_json_roundtrip(tmp_path):
    net = random_network(7, seed=77)
    path = tmp_path / "net.json"
    save_network(net, path)
    loaded = load_network(path)
    assert_allclose(loaded.W, net.W)
    assert_allclose(loaded.beta, net.beta)
    assert_allclose(loaded.delta, net.delta)
    assert loaded.seed == 77
    save_network(loaded, tmp_path / "net2.json")
    assert (tmp_path / "net.json").read_bytes() == (tmp_path / "net2.json").read_bytes()
