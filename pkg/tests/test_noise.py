import json

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import stats

from errors import MalformedInputError, NoiseBoundError
from executor import outcome_probabilities, run_circuit
from noise import (
    NoiseModel,
    apply_readout_error,
    depolarize_after_gate,
    max_strength,
    noise_with,
    run_noisy,
)
from overlap import build_destructive_swap_test
from state import Circuit, basis_state, ccnot, cnot, compose, h, random_state, ry


def test_max_strength_per_arity():
    assert max_strength(1) == pytest.approx(4 / 3)
    assert max_strength(2) == pytest.approx(16 / 15)
    assert max_strength(3) == pytest.approx(64 / 63)


def test_model_bounds_are_validated():
    NoiseModel(p_1q=4 / 3, p_2q=16 / 15, p_3q=64 / 63, readout_r=1.0)
    with pytest.raises(ValidationError):
        NoiseModel(p_2q=1.1)
    with pytest.raises(ValidationError):
        NoiseModel(readout_r=-0.1)


def test_strength_follows_gate_arity():
    model = NoiseModel(p_1q=0.1, p_2q=0.2, p_3q=0.3)
    assert model.strength_for(h(0)) == 0.1
    assert model.strength_for(cnot(0, 1)) == 0.2
    assert model.strength_for(ccnot(0, 1, 2)) == 0.3


def test_noise_with_reports_bound_violation():
    with pytest.raises(NoiseBoundError):
        noise_with(NoiseModel(), p_1q=2.0)
    assert noise_with(None, p_2q=0.5).p_2q == 0.5


def test_from_file(tmp_path):
    path = tmp_path / 'noise.json'
    path.write_text(json.dumps({'p_1q': 0.01, 'p_2q': 0.1, 'readout_r': 0.01, 'seed': 4}))
    model = NoiseModel.from_file(path)
    assert (model.p_1q, model.p_2q, model.p_3q, model.readout_r, model.seed) == (0.01, 0.1, 0.0, 0.01, 4)


def test_from_file_rejects_unknown_keys_and_bad_json(tmp_path):
    extra = tmp_path / 'extra.json'
    extra.write_text(json.dumps({'p_1q': 0.01, 'gamma': 1}))
    with pytest.raises(NoiseBoundError):
        NoiseModel.from_file(extra)
    broken = tmp_path / 'broken.json'
    broken.write_text('{p_1q')
    with pytest.raises(MalformedInputError):
        NoiseModel.from_file(broken)


def test_zero_strength_leaves_state_untouched(rng):
    state = basis_state(2, 1)
    assert depolarize_after_gate(state, cnot(0, 1), 0.0, rng) is state


def test_full_strength_always_applies_a_pauli():
    # p = 4/3 on one qubit: error probability 1, so |0> never stays |0> up to Z
    rng = np.random.default_rng(0)
    moved = 0
    for _ in range(200):
        out = depolarize_after_gate(basis_state(1), h(0), 4 / 3, rng)
        moved += abs(out.amplitudes[1]) > 0.5
    # X and Y move |0> to |1>, Z does not: expect about 2/3
    assert 100 < moved < 170


def test_depolarize_rejects_out_of_range_strength(rng):
    with pytest.raises(NoiseBoundError):
        depolarize_after_gate(basis_state(1), h(0), 1.5, rng)


def test_readout_error_zero_and_one():
    counts = {'01': 100}
    rng = np.random.default_rng(0)
    assert apply_readout_error(counts, 0.0, rng) == counts
    assert apply_readout_error(counts, 1.0, rng) == {'10': 100}


def test_readout_error_preserves_total_and_flip_rate():
    rng = np.random.default_rng(2)
    flipped = apply_readout_error({'0': 10000}, 0.2, rng)
    assert sum(flipped.values()) == 10000
    assert flipped['1'] == pytest.approx(2000, abs=4 * np.sqrt(10000 * 0.2 * 0.8))


def test_readout_error_validates_probability():
    with pytest.raises(NoiseBoundError):
        apply_readout_error({'0': 1}, 1.5, np.random.default_rng(0))


def test_run_noisy_is_deterministic_per_seed_and_stream():
    circuit = build_destructive_swap_test(2)
    initial = compose(basis_state(2, 1), basis_state(2, 1))
    model = NoiseModel(p_1q=0.05, p_2q=0.1, readout_r=0.02, seed=8)
    first = run_noisy(circuit, initial, model, 2000, stream=3)
    assert first == run_noisy(circuit, initial, model, 2000, stream=3)
    assert first != run_noisy(circuit, initial, model, 2000, stream=4)
    assert sum(first.values()) == 2000


def test_noiseless_model_matches_exact_distribution():
    circuit = Circuit(n_qubits=1, gates=(h(0),), measured_qubits=(0,))
    counts = run_noisy(circuit, basis_state(1), NoiseModel(seed=1), 10000)
    assert counts['0'] == pytest.approx(5000, abs=4 * 50)


def test_full_depolarization_randomizes_two_qubit_output():
    # p = 1 after CNOT gives the maximally mixed state on both qubits
    circuit = Circuit(n_qubits=2, gates=(cnot(0, 1),), measured_qubits=(0, 1))
    counts = run_noisy(circuit, basis_state(2), NoiseModel(p_2q=1.0, seed=3), 8000)
    for key in ('00', '01', '10', '11'):
        assert counts[key] == pytest.approx(2000, abs=4 * np.sqrt(8000 * 0.25 * 0.75))


def bloch_vector(state):
    a0, a1 = state.amplitudes
    coherence = np.conj(a0) * a1
    return np.array([2 * coherence.real, 2 * coherence.imag, abs(a0) ** 2 - abs(a1) ** 2])


def mean_bloch_after_noise(state, strength, trajectories, rng, repeats=1):
    total = np.zeros(3)
    for _ in range(trajectories):
        out = state
        for _ in range(repeats):
            out = depolarize_after_gate(out, h(0), strength, rng)
        total += bloch_vector(out)
    return total / trajectories


@pytest.mark.parametrize('strength', [0.1, 0.5, 1.0])
def test_trajectory_average_shrinks_bloch_vector(strength):
    rng = np.random.default_rng(int(strength * 100))
    trajectories = 4000
    for _ in range(5):
        state = random_state(1, rng)
        observed = mean_bloch_after_noise(state, strength, trajectories, rng)
        expected = (1 - strength) * bloch_vector(state)
        # per-component std of a +/-1 bounded mean
        assert np.all(np.abs(observed - expected) <= 4 / np.sqrt(trajectories))


def test_maximal_strength_drives_qubit_to_maximally_mixed():
    rng = np.random.default_rng(5)
    state = random_state(1, rng)
    # each pass at 4/3 scales the Bloch vector by -1/3, so it converges to I/2
    averaged = mean_bloch_after_noise(state, 4 / 3, 10_000, rng, repeats=4)
    assert np.linalg.norm(averaged) < 0.05


def test_readout_errors_compose():
    r1, r2 = 0.1, 0.2
    combined = r1 + r2 - 2 * r1 * r2
    shots = 40_000
    rng = np.random.default_rng(12)
    twice = apply_readout_error(apply_readout_error({'00': shots}, r1, rng), r2, rng)
    keys = ['00', '01', '10', '11']
    flips = {'00': 0, '01': 1, '10': 1, '11': 2}
    expected = [shots * combined ** flips[k] * (1 - combined) ** (2 - flips[k]) for k in keys]
    _, p_value = stats.chisquare([twice.get(k, 0) for k in keys], expected)
    assert p_value > 1e-3


def test_zero_noise_matches_ideal_distribution():
    circuit = Circuit(n_qubits=3, gates=(h(0), cnot(0, 1), ry(0.9, 2), ccnot(0, 2, 1)), measured_qubits=(0, 1, 2))
    initial = random_state(3, np.random.default_rng(21))
    shots = 100_000
    counts = run_noisy(circuit, initial, NoiseModel(seed=6), shots)
    exact = outcome_probabilities(run_circuit(initial, circuit), (0, 1, 2))
    keys = sorted(exact)
    expected = [exact[k] * shots for k in keys]
    expected[-1] += shots - sum(expected)
    _, p_value = stats.chisquare([counts.get(k, 0) for k in keys], expected)
    assert p_value > 1e-3
