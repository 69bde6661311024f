"""Tests for Hebbian learning, energy, relaxation, and the thermal rule."""

import numpy as np
import pytest

from hoplab.hopfield import (
    RelaxationCapError,
    ThermalParams,
    energy,
    hebbian_learn,
    is_stable,
    prototype_strength,
    relax,
    thermal_perceptron_learn,
    total_energy,
)


def test_hebbian_single_state_outer_product():
    w = hebbian_learn([[1, -1]])
    assert w.tolist() == [[1.0, -1.0], [-1.0, 1.0]]


def test_hebbian_empty_gives_zero_matrix():
    w = hebbian_learn(np.empty((0, 4)))
    assert w.shape == (4, 4)
    assert not w.any()


def test_hebbian_two_states_cancel_offdiagonal():
    # W[0][1] = (+1)(+1) + (+1)(-1) = 0
    w = hebbian_learn([[1, 1], [1, -1]])
    assert w[0, 1] == 0.0
    assert w[1, 0] == 0.0
    assert w[0, 0] == 2.0


def test_hebbian_diagonal_counts_states():
    rng = np.random.default_rng(11)
    states = rng.integers(0, 2, size=(7, 32)) * 2 - 1
    w = hebbian_learn(states)
    assert np.array_equal(np.diag(w), np.full(32, 7.0))
    assert np.array_equal(w, w.T)


def test_hebbian_zero_diagonal_switch():
    rng = np.random.default_rng(12)
    states = rng.integers(0, 2, size=(5, 16)) * 2 - 1
    w = hebbian_learn(states)
    wz = hebbian_learn(states, zero_diagonal=True)
    assert not np.diag(wz).any()
    off = ~np.eye(16, dtype=bool)
    assert np.array_equal(w[off], wz[off])


def test_hebbian_rejects_nonbipolar():
    with pytest.raises(ValueError):
        hebbian_learn([[1, 0, -1]])


def test_hebbian_empty_list_needs_dimension():
    with pytest.raises(ValueError):
        hebbian_learn([])
    assert hebbian_learn([], dimension=3).shape == (3, 3)


def test_energy_of_sole_learned_state():
    # One stored state: every neuron sits at energy -N/2.
    n = 8
    s = np.ones(n)
    w = hebbian_learn([s])
    e = energy(w, s)
    assert np.allclose(e, -n / 2)
    assert is_stable(w, s)
    assert total_energy(w, s) == pytest.approx(-n * n / 2)


def test_energy_shape_mismatch_raises():
    w = np.zeros((4, 4))
    with pytest.raises(ValueError):
        energy(w, np.ones(5))


def test_zero_energy_counts_as_stable():
    assert is_stable(np.zeros((3, 3)), np.array([1, -1, 1]))


def test_single_flip_is_unstable():
    # Flipping one entry of the sole stored state gives that neuron
    # energy +(N-2)/2 > 0 for N >= 3.
    rng = np.random.default_rng(21)
    s = rng.integers(0, 2, size=16) * 2 - 1
    w = hebbian_learn([s])
    probe = s.copy()
    probe[5] = -probe[5]
    e = energy(w, probe)
    assert e[5] == pytest.approx((16 - 2) / 2)
    assert not is_stable(w, probe)


def test_relax_restores_single_flip():
    rng = np.random.default_rng(22)
    s = rng.integers(0, 2, size=16) * 2 - 1
    w = hebbian_learn([s])
    probe = s.copy()
    probe[3] = -probe[3]
    out = relax(w, probe, rng)
    assert np.array_equal(out, s.astype(np.int8))


def test_relax_returns_stable_probe_unchanged():
    rng = np.random.default_rng(23)
    s = rng.integers(0, 2, size=16) * 2 - 1
    w = hebbian_learn([s])
    out, info = relax(w, s, rng, return_info=True)
    assert np.array_equal(out, s.astype(np.int8))
    assert info.flips == 0


def test_relax_energy_descends_per_flip():
    """Every accepted flip strictly lowers the total energy."""
    rng = np.random.default_rng(24)
    states = rng.integers(0, 2, size=(40, 64)) * 2 - 1
    w = hebbian_learn(states, zero_diagonal=True)
    for _ in range(5):
        probe = rng.integers(0, 2, size=64) * 2 - 1
        out, info = relax(w, probe, rng, return_info=True, trace_energies=True)
        assert is_stable(w, out)
        if info.flips:
            trace = np.concatenate(([total_energy(w, probe)], info.energies))
            assert (np.diff(trace) < 0).all()
            assert trace[-1] == pytest.approx(total_energy(w, out))


def test_relax_is_deterministic_for_fixed_stream():
    base = np.random.default_rng(25)
    states = base.integers(0, 2, size=(30, 64)) * 2 - 1
    probe = base.integers(0, 2, size=64) * 2 - 1
    w = hebbian_learn(states, zero_diagonal=True)
    a = relax(w, probe, np.random.default_rng(99))
    b = relax(w, probe, np.random.default_rng(99))
    assert np.array_equal(a, b)


def test_relax_flip_cap_raises():
    # Antisymmetric coupling has no stable state, so the dynamics cycle.
    w = np.array([[0.0, 1.0], [-1.0, 0.0]])
    with pytest.raises(RelaxationCapError):
        relax(w, np.array([1, 1]), np.random.default_rng(26), max_flips=100)


def test_relax_rejects_nonbipolar_probe():
    with pytest.raises(ValueError):
        relax(np.zeros((3, 3)), np.array([1, 0, 1]), np.random.default_rng(0))


def test_capacity_phase_change():
    """Well under capacity nearly all stored states are stable; far over, few.

    The classic 0.138 N capacity and its sharp transition hold without
    self-coupling, so this runs with the diagonal cleared. The retained
    diagonal adds a +P self-term to every field, which keeps roughly a
    third of the stored states stable even at 60 states.
    """
    rng = np.random.default_rng(27)
    n, trials = 256, 20
    stable_low = stable_high = 0
    for _ in range(trials):
        small = rng.integers(0, 2, size=(10, n)) * 2 - 1
        w = hebbian_learn(small, zero_diagonal=True)
        stable_low += sum(is_stable(w, s) for s in small)
        big = rng.integers(0, 2, size=(60, n)) * 2 - 1
        w = hebbian_learn(big, zero_diagonal=True)
        stable_high += sum(is_stable(w, s) for s in big)
    assert stable_low / (trials * 10) >= 0.95
    assert stable_high / (trials * 60) < 0.10


def test_thermal_params_validation():
    with pytest.raises(ValueError):
        ThermalParams(learning_rate=-0.1, temperature=1.0, epochs=1)
    with pytest.raises(ValueError):
        ThermalParams(learning_rate=0.1, temperature=0.0, epochs=1)
    with pytest.raises(ValueError):
        ThermalParams(learning_rate=0.1, temperature=1.0, epochs=0)


def test_thermal_zero_rate_is_noop():
    params = ThermalParams(learning_rate=0.0, temperature=1.0, epochs=3)
    rng = np.random.default_rng(31)
    states = rng.integers(0, 2, size=(4, 8)) * 2 - 1
    w = thermal_perceptron_learn(states, params, rng)
    assert not w.any()


def test_thermal_first_update_from_zero_weights():
    # Zero weights give zero fields, so the one-step update is all +1 and
    # each mismatched neuron i gains 2 * alpha * s_j on connection (j, i).
    params = ThermalParams(learning_rate=0.25, temperature=1.0, epochs=1)
    s = np.array([[1, -1, 1, -1]])
    w = thermal_perceptron_learn(s, params, np.random.default_rng(32))
    expect = np.outer(s[0], [0.0, 0.5, 0.0, 0.5])
    assert np.allclose(w, expect)


def test_thermal_retrieved_state_contributes_nothing():
    # The all-plus state is its own one-step update under zero fields,
    # so it never produces a weight change.
    params = ThermalParams(learning_rate=0.1, temperature=2.0, epochs=5)
    s = np.ones((1, 12))
    w = thermal_perceptron_learn(s, params, np.random.default_rng(33))
    assert not w.any()


def test_prototype_strength_values():
    assert prototype_strength(100, 0.2) == pytest.approx(36.0, rel=1e-12)
    assert prototype_strength(1, 0.0) == 1.0
    assert prototype_strength(50, 0.5) == 0.0


def test_prototype_strength_monotone_in_noise():
    ps = [prototype_strength(100, p) for p in np.linspace(0.0, 0.5, 11)]
    assert all(a > b for a, b in zip(ps, ps[1:]))


def test_prototype_strength_validation():
    with pytest.raises(ValueError):
        prototype_strength(0, 0.2)
    with pytest.raises(ValueError):
        prototype_strength(10, 0.6)
