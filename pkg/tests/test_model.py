import json
import pickle

import numpy as np
import pytest

from delayest.linalg import spectral_radius
from delayest.model import (DelayProfile, LtiSystem, SensorNetwork, assign_delays, dumps,
                            full_delay_profile, generate_network, generate_system,
                            instance_from_dict, instance_to_dict, is_strongly_connected,
                            load_instance, save_instance)


def test_lti_rejects_singular_a():
    with pytest.raises(ValueError, match="full rank"):
        LtiSystem(np.array([[1.0, 2.0], [2.0, 4.0]]), np.array([[1.0, 0.0]]))


def test_lti_rejects_bad_output_width():
    with pytest.raises(ValueError):
        LtiSystem(np.eye(2), np.ones((1, 3)))


def test_lti_arrays_are_readonly():
    sys = LtiSystem(np.eye(2), np.array([[1.0, 0.0]]))
    with pytest.raises(ValueError):
        sys.a[0, 0] = 3.0


def test_network_requires_row_stochastic():
    with pytest.raises(ValueError, match="row 1"):
        SensorNetwork(np.array([[1.0, 0.0], [0.3, 0.6]]))


def test_network_edge_pattern_must_match():
    p = np.array([[0.5, 0.5], [0.0, 1.0]])
    net = SensorNetwork(p)
    assert net.edges == {(1, 0)}
    assert net.in_neighbors(0) == [1] and net.out_neighbors(1) == [0]
    with pytest.raises(ValueError):
        SensorNetwork(p, edges={(0, 1)})


def test_network_connectivity_and_damping():
    chain = SensorNetwork(np.array([[0.5, 0.5], [0.0, 1.0]]))
    assert not chain.strongly_connected
    cyc = SensorNetwork(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert cyc.strongly_connected and not cyc.self_damped


def test_delay_profile_bounds():
    with pytest.raises(ValueError):
        DelayProfile({(0, 1): 4}, 3)
    prof = DelayProfile({(0, 1): 2}, 3)
    assert prof.delay(0, 1) == 2 and prof.delay(1, 1) == 0
    assert prof.max_delay == 2
    np.testing.assert_array_equal(prof.matrix(2), [[0, 2], [-1, 0]])
    with pytest.raises(KeyError):
        prof.delay(1, 0)


def test_generate_system_shape_and_radius():
    sys = generate_system(6, 4, 1.04, seed=3)
    assert sys.a.shape == (6, 6) and sys.c_rows.shape == (4, 6)
    assert spectral_radius(sys.a) == pytest.approx(1.04, rel=1e-12)
    assert np.all(np.diag(sys.a) != 0)
    assert len(sys.blocks) == 4 and sorted(s for b in sys.blocks for s in b) == list(range(6))
    # one unit output on the first state of each block
    for row, block in zip(sys.c_rows, sys.blocks):
        assert row[block[0]] == 1.0 and row.sum() == 1.0


def test_generate_system_is_seeded():
    a = generate_system(5, 2, 0.9, seed=11).a
    np.testing.assert_array_equal(a, generate_system(5, 2, 0.9, seed=11).a)
    assert not np.array_equal(a, generate_system(5, 2, 0.9, seed=12).a)


def test_generate_system_rejects_bad_partition():
    with pytest.raises(ValueError):
        generate_system(3, 4, 1.0, seed=0)


@pytest.mark.parametrize("topology,chords", [("cycle", 0), ("cycle_plus_chords", 3)])
def test_generate_network(topology, chords):
    net = generate_network(5, topology, seed=2, chords=chords)
    assert net.self_damped and is_strongly_connected(net)
    assert np.allclose(net.p.sum(axis=1), 1.0, atol=1e-12, rtol=0)
    assert len(net.edges) == 5 + chords


def test_cycle_direction():
    net = generate_network(4, "cycle", seed=0)
    assert net.edges == {(0, 1), (1, 2), (2, 3), (3, 0)}


def test_assign_delays_modes():
    net = generate_network(4, "cycle", seed=0)
    homo = assign_delays(net, "homogeneous", 3)
    assert set(homo.tau.values()) == {3} and homo.delay(2, 2) == 0
    het = assign_delays(net, "heterogeneous", 3, seed=5)
    assert all(0 <= d <= 3 for d in het.tau.values())
    full = assign_delays(net, "homogeneous_full", 3)
    assert full.delay(2, 2) == 3
    with pytest.raises(ValueError):
        assign_delays(net, "random", 3)


def test_full_delay_profile_covers_diagonal():
    prof = full_delay_profile(2, 4)
    assert len(prof.tau) == 4 and all(d == 4 for d in prof.tau.values())


def test_instance_round_trip_is_exact(tmp_path):
    sys = generate_system(6, 4, 1.04, seed=1, q_var=0.004, r_var=0.004)
    net = generate_network(4, "cycle", seed=1)
    prof = assign_delays(net, "heterogeneous", 8, seed=1)
    path = tmp_path / "inst.json"
    save_instance(path, sys, net, prof)
    sys2, net2, prof2 = load_instance(path)
    np.testing.assert_array_equal(sys.a, sys2.a)
    np.testing.assert_array_equal(net.p, net2.p)
    assert dict(prof.tau) == dict(prof2.tau) and prof.tau_bar == prof2.tau_bar
    assert sys2.blocks == sys.blocks and sys2.q_var == 0.004


def test_dumps_writes_17_digits():
    text = dumps({"x": 0.1, "m": [[1.0 / 3.0]]})
    assert "0.10000000000000001" in text
    assert json.loads(text)["m"][0][0] == 1.0 / 3.0


def test_partial_instance_dicts():
    net = generate_network(3, "cycle", seed=0)
    sys, net2, prof = instance_from_dict(instance_to_dict(net=net))
    assert sys is None and prof is None and net2.edges == net.edges


def test_delay_profile_pickles():
    prof = DelayProfile({(0, 1): 2, (1, 1): 3}, 3)
    back = pickle.loads(pickle.dumps(prof))
    assert dict(back.tau) == dict(prof.tau) and back.tau_bar == 3
