"""
Associative-memory classifier: every reference sits in one superposition tagged by
label qubits, destructive-swap gates run once, and CCNOTs fold the AND parity of each
qubit pair into an auxiliary qubit. Joint label+aux statistics rank the references.

Register layout: target 0..n-1, reference n..2n-1, aux 2n, labels 2n+1..2n+L
(label bit j on qubit 2n+1+j), so outcome keys read label bits then the aux bit.
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from errors import DimensionMismatchError, ExactModeError, QOverlapError
from executor import PROBABILITY_FLOOR, counts_to_map, draw_counts, evolve, format_outcome, marginal_probabilities
from noise import NoiseModel, noisy_outcome_counts
from state import Circuit, Statevector, ccnot, cnot, h

logger = logging.getLogger(__name__)


def label_width(d: int) -> int:
    return math.ceil(math.log2(d)) if d > 1 else 0


class ReferenceBank(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    states: Tuple[Statevector, ...]
    labels: Tuple[str, ...]

    @model_validator(mode='after')
    def _check_bank(self):
        if not self.states:
            raise ValueError('reference bank is empty')
        if len(self.labels) != len(self.states):
            raise ValueError(f'{len(self.states)} references but {len(self.labels)} labels')
        if len({s.n_qubits for s in self.states}) != 1:
            raise ValueError('references have different qubit counts')
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f'duplicate labels: {sorted(self.labels)}')
        widths = {len(label) for label in self.labels}
        if len(widths) != 1 or any(set(label) - {'0', '1'} for label in self.labels):
            raise ValueError('labels must be bitstrings of one common width')
        if widths.pop() < label_width(len(self.states)):
            raise ValueError(f'{len(self.states)} references need labels of {label_width(len(self.states))} bits')
        return self

    @property
    def d(self) -> int:
        return len(self.states)

    @property
    def n(self) -> int:
        return self.states[0].n_qubits

    @property
    def label_qubits(self) -> int:
        return len(self.labels[0])

    @property
    def label_map(self) -> Dict[int, str]:
        return dict(enumerate(self.labels))


def build_reference_bank(states: Sequence[Statevector], labels: Optional[Sequence[str]] = None) -> ReferenceBank:
    """Default labels are the binary reference indices."""
    if not states:
        raise QOverlapError('reference bank is empty')
    if labels is None:
        width = label_width(len(states))
        labels = [format_outcome(i, width) for i in range(len(states))]
    if len({s.n_qubits for s in states}) != 1:
        raise DimensionMismatchError(f'references have different qubit counts: {sorted({s.n_qubits for s in states})}')
    if len(set(labels)) != len(labels):
        raise QOverlapError(f'duplicate labels: {sorted(labels)}')
    return ReferenceBank(states=tuple(states), labels=tuple(labels))


def _label_index(label: str) -> int:
    return int(label, 2) if label else 0


def _bank_matrix(bank: ReferenceBank) -> np.ndarray:
    """(2^L, 2^n) amplitude table [label, pattern] of the normalized superposition."""
    table = np.zeros((2 ** bank.label_qubits, 2 ** bank.n), dtype=complex)
    for state, label in zip(bank.states, bank.labels):
        table[_label_index(label)] += state.amplitudes
    return table / math.sqrt(bank.d)


def build_reference_superposition(bank: ReferenceBank) -> Statevector:
    """(1/sqrt d) sum_i |phi_i>|label_i>, pattern on the low n qubits and labels above."""
    return Statevector(n_qubits=bank.n + bank.label_qubits, amplitudes=_bank_matrix(bank).reshape(-1))


def build_associative_circuit(n: int, label_qubits: int) -> Circuit:
    if n < 1:
        raise QOverlapError(f'patterns need at least one qubit, got n={n}')
    if label_qubits < 0:
        raise QOverlapError(f'label_qubits must be >= 0, got {label_qubits}')
    aux = 2 * n
    gates = []
    for i in range(n):
        gates += [cnot(i, n + i), h(i)]
    gates += [ccnot(i, n + i, aux) for i in range(n)]
    measured = tuple(range(aux, aux + 1 + label_qubits))
    return Circuit(n_qubits=2 * n + 1 + label_qubits, gates=tuple(gates), measured_qubits=measured)


def joint_initial_state(target: Statevector, bank: ReferenceBank) -> Statevector:
    """|psi> (x) |Phi> (x) |0>_aux laid out per the module docstring."""
    aux = np.array([1.0, 0.0], dtype=complex)
    joint = np.einsum('lp,a,x->lapx', _bank_matrix(bank), aux, target.amplitudes)
    return Statevector(n_qubits=2 * bank.n + 1 + bank.label_qubits, amplitudes=joint.reshape(-1))


class ClassificationResult(BaseModel):
    histogram: Dict[str, float]
    counts: Optional[Dict[str, int]] = None
    per_label_success: Dict[str, float]
    per_label_conditional: Dict[str, float]
    label_marginal: Dict[str, float]
    winner: str
    shots: int = 0

    def histogram_rows(self) -> List[list]:
        rows = []
        for key in sorted(self.histogram):
            label, aux = key[:-1], key[-1]
            rows.append([key, label, aux, self.histogram[key], (self.counts or {}).get(key)])
        return rows


def classify(target: Statevector, bank: ReferenceBank, shots: int = 0,
             noise: Optional[NoiseModel] = None, seed: int = 0) -> ClassificationResult:
    """Winner is the label with the largest joint probability P(label, aux = 0)."""
    if target.n_qubits != bank.n:
        raise DimensionMismatchError(f'target has {target.n_qubits} qubits, references have {bank.n}')
    if shots < 0:
        raise QOverlapError(f'shots must be >= 0, got {shots}')
    if shots == 0 and noise is not None:
        raise ExactModeError('exact mode (shots = 0) cannot be combined with a noise model')

    circuit = build_associative_circuit(bank.n, bank.label_qubits)
    initial = joint_initial_state(target, bank)
    width = bank.label_qubits + 1
    counts = None
    if noise is not None:
        counts = noisy_outcome_counts(circuit, initial, noise, shots, stream=seed)
    else:
        final = evolve(initial.amplitudes, circuit.gates, circuit.n_qubits)
        distribution = marginal_probabilities(final, circuit.measured_qubits, circuit.n_qubits)
        if shots:
            counts = draw_counts(distribution, shots, np.random.default_rng(seed))
    if counts is not None:
        distribution = counts / shots

    success, conditional, marginal = {}, {}, {}
    for label in bank.labels:
        index = _label_index(label) << 1
        p_label = float(distribution[index] + distribution[index | 1])
        success[label] = float(distribution[index])
        marginal[label] = p_label
        conditional[label] = success[label] / p_label if p_label > 0 else 0.0
    # ties (to 12 decimals) go to the smallest label
    winner = min(bank.labels, key=lambda label: (-round(success[label], 12), label))
    logger.info('Classified against %d references: winner %s (P=%.4f)', bank.d, winner, success[winner])

    histogram = {format_outcome(i, width): float(p) for i, p in enumerate(distribution) if p > PROBABILITY_FLOOR}
    return ClassificationResult(
        histogram=histogram,
        counts=counts_to_map(counts, width) if counts is not None else None,
        per_label_success=success,
        per_label_conditional=conditional,
        label_marginal=marginal,
        winner=winner,
        shots=shots,
    )
