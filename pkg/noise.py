import json
import logging
from pathlib import Path
from typing import Dict, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from errors import DimensionMismatchError, MalformedInputError, NoiseBoundError, QOverlapError
from executor import (
    apply_matrix,
    counts_to_map,
    draw_counts,
    gate_matrix,
    marginal_probabilities,
    pauli_string_matrix,
)
from state import Circuit, Gate, Statevector

logger = logging.getLogger(__name__)


def max_strength(k: int) -> float:
    """Largest depolarizing strength that is still a channel on k qubits: 1 + 1/(d^2 - 1), d = 2^k."""
    d2 = 4 ** k
    return d2 / (d2 - 1)


class NoiseModel(BaseModel):
    """Per-arity depolarizing strengths plus a symmetric readout flip probability."""

    model_config = ConfigDict(frozen=True, extra='forbid')

    p_1q: float = Field(0.0, ge=0.0, le=max_strength(1))
    p_2q: float = Field(0.0, ge=0.0, le=max_strength(2))
    p_3q: float = Field(0.0, ge=0.0, le=max_strength(3))
    readout_r: float = Field(0.0, ge=0.0, le=1.0)
    seed: int = Field(0, ge=0)

    @classmethod
    def from_file(cls, path) -> 'NoiseModel':
        try:
            payload = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise MalformedInputError(f'cannot read noise config {path}: {exc}') from exc
        if not isinstance(payload, dict):
            raise MalformedInputError(f'noise config {path} must be a JSON object')
        try:
            return cls.model_validate(payload)
        except ValidationError as exc:
            raise NoiseBoundError(f'invalid noise config {path}: {exc}') from exc

    def strength_for(self, gate: Gate) -> float:
        return (self.p_1q, self.p_2q, self.p_3q)[gate.arity - 1]


def _error_probability(strength: float, k: int) -> float:
    if not 0.0 <= strength <= max_strength(k) + 1e-12:
        raise NoiseBoundError(f'strength {strength} outside [0, {max_strength(k):.6g}] for a {k}-qubit gate')
    n_strings = 4 ** k
    return min(1.0, strength * (n_strings - 1) / n_strings)


def depolarize_after_gate(state: Statevector, gate: Gate, strength: float,
                          rng: np.random.Generator) -> Statevector:
    """One trajectory of rho -> (1-p) rho + p I/2^k on the gate's support."""
    k = gate.arity
    if max(gate.targets) >= state.n_qubits:
        raise DimensionMismatchError(f'{gate} does not fit a {state.n_qubits}-qubit state')
    if rng.random() >= _error_probability(strength, k):
        return state
    code = int(rng.integers(1, 4 ** k))
    vector = apply_matrix(state.amplitudes, pauli_string_matrix(code, k), gate.targets, state.n_qubits)
    return Statevector(n_qubits=state.n_qubits, amplitudes=vector)


def _readout_check(r: float) -> None:
    if not 0.0 <= r <= 1.0:
        raise NoiseBoundError(f'readout error {r} outside [0, 1]')


def flip_counts(counts: np.ndarray, width: int, r: float, rng: np.random.Generator) -> np.ndarray:
    """Flip every bit of every shot independently with probability r; counts indexed by outcome."""
    _readout_check(r)
    if r == 0.0 or width == 0:
        return counts
    outcomes = np.repeat(np.arange(counts.shape[0]), counts)
    flips = rng.random((outcomes.shape[0], width)) < r
    masks = (flips * (1 << np.arange(width))).sum(axis=1)
    return np.bincount(outcomes ^ masks, minlength=counts.shape[0])


def apply_readout_error(counts: Dict[str, int], r: float, rng: np.random.Generator) -> Dict[str, int]:
    _readout_check(r)
    if not counts:
        return {}
    widths = {len(key) for key in counts}
    if len(widths) != 1:
        raise QOverlapError(f'outcome keys of mixed length: {sorted(widths)}')
    width = widths.pop()
    dense = np.zeros(2 ** width, dtype=np.int64)
    for key, value in counts.items():
        dense[int(key, 2) if width else 0] += value
    return counts_to_map(flip_counts(dense, width, r, rng), width)


def _draw_pauli_codes(circuit: Circuit, model: NoiseModel, shots: int,
                      rng: np.random.Generator) -> np.ndarray:
    codes = np.zeros((shots, circuit.gate_count), dtype=np.int64)
    for column, gate in enumerate(circuit.gates):
        p_error = _error_probability(model.strength_for(gate), gate.arity)
        if p_error == 0.0:
            continue
        hit = rng.random(shots) < p_error
        codes[hit, column] = rng.integers(1, 4 ** gate.arity, size=int(hit.sum()))
    return codes


def noisy_outcome_counts(circuit: Circuit, initial: Statevector, model: NoiseModel, shots: int,
                         stream: int = 0) -> np.ndarray:
    """Dense counts over ``circuit.measured_qubits`` after gate noise, sampling and readout flips.

    Shots that drew the same Pauli errors share one simulation; each shot is still an
    independent trajectory.
    """
    if shots < 1:
        raise QOverlapError(f'shots must be at least 1, got {shots}')
    if initial.n_qubits != circuit.n_qubits:
        raise DimensionMismatchError(
            f'circuit acts on {circuit.n_qubits} qubits but the state has {initial.n_qubits}'
        )
    rng = np.random.default_rng([model.seed, stream])
    width = len(circuit.measured_qubits)
    codes = _draw_pauli_codes(circuit, model, shots, rng)
    if circuit.gate_count:
        patterns, inverse = np.unique(codes, axis=0, return_inverse=True)
        multiplicities = np.bincount(inverse.reshape(-1), minlength=patterns.shape[0])
    else:
        patterns, multiplicities = np.zeros((1, 0), dtype=np.int64), np.array([shots])
    logger.debug('%d shots collapse to %d distinct trajectories', shots, patterns.shape[0])

    counts = np.zeros(2 ** width, dtype=np.int64)
    for pattern, multiplicity in zip(patterns, multiplicities):
        vector = initial.amplitudes
        for gate, code in zip(circuit.gates, pattern):
            vector = apply_matrix(vector, gate_matrix(gate), gate.targets, circuit.n_qubits)
            if code:
                vector = apply_matrix(vector, pauli_string_matrix(int(code), gate.arity),
                                      gate.targets, circuit.n_qubits)
        marginal = marginal_probabilities(vector, circuit.measured_qubits, circuit.n_qubits)
        counts += draw_counts(marginal, int(multiplicity), rng)
    return flip_counts(counts, width, model.readout_r, rng)


def run_noisy(circuit: Circuit, initial: Statevector, model: NoiseModel, shots: int,
              stream: int = 0) -> Dict[str, int]:
    """Monte Carlo trajectories with per-gate depolarizing noise, then readout flips.

    Deterministic for a given ``(model.seed, stream)``.
    """
    counts = noisy_outcome_counts(circuit, initial, model, shots, stream)
    return counts_to_map(counts, len(circuit.measured_qubits))


def noise_with(model: Optional[NoiseModel], **updates) -> NoiseModel:
    """Copy of ``model`` (or the noiseless model) with fields replaced and re-validated."""
    base = (model or NoiseModel()).model_dump()
    base.update(updates)
    try:
        return NoiseModel.model_validate(base)
    except ValidationError as exc:
        raise NoiseBoundError(str(exc)) from exc
