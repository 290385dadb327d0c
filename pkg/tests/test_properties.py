"""Property-based checks on random small inputs."""
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from delayest.augment import build_augmented, build_augmented_pa, split_by_delay
from delayest.estimator import run_augmented, run_distributed, simulate_plant
from delayest.linalg import eigenvalues, match_multisets, spectral_radius
from delayest.model import DelayProfile, instance_from_dict, instance_to_dict
from delayest.suites import random_instance, random_profile, random_stochastic

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 6), st.integers(0, 5))
def test_augmented_consensus_is_stochastic(seed, size, tau_bar):
    rng = np.random.default_rng(seed)
    net = random_stochastic(size, rng)
    prof = random_profile(net, tau_bar, rng)
    m = build_augmented(net.p, prof).matrix
    assert np.max(np.abs(m.sum(axis=1) - 1.0)) <= 1e-12
    assert abs(spectral_radius(m) - 1.0) <= 1e-8
    np.testing.assert_array_equal(sum(split_by_delay(net.p, prof)), net.p)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 4), st.integers(1, 4))
def test_kron_spectrum(seed, np_, na):
    rng = np.random.default_rng(seed)
    p = rng.uniform(-1, 1, (np_, np_))
    a = rng.uniform(-1, 1, (na, na))
    prod = np.outer(eigenvalues(p).eigenvalues, eigenvalues(a).eigenvalues).ravel()
    assert match_multisets(eigenvalues(np.kron(p, a)).eigenvalues, prod) < 1e-8


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 6), st.integers(1, 4))
def test_propagated_operator_with_scalar_plant(seed, size, tau_bar):
    # with A = a*I the propagated operator is the plain one with scaled slots
    rng = np.random.default_rng(seed)
    net = random_stochastic(size, rng)
    prof = random_profile(net, tau_bar, rng)
    a = rng.uniform(0.5, 1.5)
    pa = build_augmented_pa(net.p, np.array([[a]]), prof).matrix
    plain = build_augmented(net.p, prof).matrix
    scale = np.repeat(a ** np.arange(1, prof.tau_bar + 2), size)
    np.testing.assert_allclose(pa[:size], plain[:size] * scale[None, :], rtol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_execution_paths_agree(seed):
    rng = np.random.default_rng(seed)
    sys, net, prof, gain = random_instance(rng)
    plant = simulate_plant(sys, rng.normal(size=sys.n), 30, int(rng.integers(2**32)))
    d = run_distributed(sys, net, prof, gain, plant).posteriors
    g = run_augmented(sys, net, prof, gain, plant).posteriors
    assert np.max(np.abs(d - g)) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_instance_serialization_round_trip(seed):
    rng = np.random.default_rng(seed)
    sys, net, prof, _ = random_instance(rng)
    sys2, net2, prof2 = instance_from_dict(instance_to_dict(sys, net, prof))
    np.testing.assert_array_equal(sys.a, sys2.a)
    np.testing.assert_array_equal(sys.c_rows, sys2.c_rows)
    np.testing.assert_array_equal(net.p, net2.p)
    assert dict(prof.tau) == dict(prof2.tau) and isinstance(prof2, DelayProfile)
