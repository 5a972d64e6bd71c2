import logging
from typing import Dict, Iterable, Sequence

import numpy as np

from errors import DimensionMismatchError, InvalidCircuitError, QOverlapError
from state import Circuit, Gate, GateKind, Statevector

logger = logging.getLogger(__name__)

SQRT1_2 = 1 / np.sqrt(2)

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (PAULI_I, PAULI_X, PAULI_Y, PAULI_Z)

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) * SQRT1_2

# probabilities below this are dropped from outcome maps
PROBABILITY_FLOOR = 1e-14

# exact-mode fidelities this close to 0 or 1 are roundoff and snap to the endpoint
EXACT_FIDELITY_FLOOR = 1e-12


def _permutation_matrix(k: int, mapping) -> np.ndarray:
    size = 2 ** k
    matrix = np.zeros((size, size), dtype=complex)
    for column in range(size):
        matrix[mapping(column), column] = 1.0
    return matrix


def _cnot_map(local: int) -> int:
    # bit 1 is the control, bit 0 the target
    return local ^ 1 if local & 0b10 else local


def _ccnot_map(local: int) -> int:
    return local ^ 1 if (local & 0b110) == 0b110 else local


def _cswap_map(local: int) -> int:
    if not local & 0b100:
        return local
    a, b = (local >> 1) & 1, local & 1
    return 0b100 | (b << 1) | a


_FIXED_MATRICES = {
    GateKind.H: HADAMARD,
    GateKind.X: PAULI_X,
    GateKind.CNOT: _permutation_matrix(2, _cnot_map),
    GateKind.CCNOT: _permutation_matrix(3, _ccnot_map),
    GateKind.CSWAP: _permutation_matrix(3, _cswap_map),
}


def ry_matrix(theta: float) -> np.ndarray:
    """exp(-i theta sigma_y / 2)."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def gate_matrix(gate: Gate) -> np.ndarray:
    """Unitary of ``gate`` in its local basis; ``gate.targets[0]`` is the most significant bit."""
    if gate.kind is GateKind.RY:
        return ry_matrix(gate.theta)
    return _FIXED_MATRICES[gate.kind]


def pauli_string_matrix(code: int, k: int) -> np.ndarray:
    """k-qubit Pauli string for ``code`` in base 4 (0=I, 1=X, 2=Y, 3=Z), first target most significant."""
    matrix = np.ones((1, 1), dtype=complex)
    for position in reversed(range(k)):
        matrix = np.kron(matrix, PAULIS[(code >> (2 * position)) & 0b11])
    return matrix


def apply_matrix(vector: np.ndarray, matrix: np.ndarray, targets: Sequence[int], n_qubits: int) -> np.ndarray:
    """Apply a dense 2^k x 2^k matrix on ``targets`` of a raw amplitude vector; returns a new array."""
    k = len(targets)
    tensor = vector.reshape((2,) * n_qubits)
    axes = [n_qubits - 1 - q for q in targets]
    operator = matrix.reshape((2,) * (2 * k))
    moved = np.tensordot(operator, tensor, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(moved, list(range(k)), axes).reshape(-1)


def _check_targets(gate: Gate, n_qubits: int) -> None:
    if len(set(gate.targets)) != len(gate.targets):
        raise InvalidCircuitError(f'duplicate targets in {gate}')
    if any(q < 0 or q >= n_qubits for q in gate.targets):
        raise InvalidCircuitError(f'{gate} does not fit a {n_qubits}-qubit state')


def apply_gate(state: Statevector, gate: Gate) -> Statevector:
    _check_targets(gate, state.n_qubits)
    vector = apply_matrix(state.amplitudes, gate_matrix(gate), gate.targets, state.n_qubits)
    return Statevector(n_qubits=state.n_qubits, amplitudes=vector)


def evolve(vector: np.ndarray, gates: Iterable[Gate], n_qubits: int) -> np.ndarray:
    """Raw-array evolution used by the hot paths; no validation beyond the circuit's own."""
    for gate in gates:
        vector = apply_matrix(vector, gate_matrix(gate), gate.targets, n_qubits)
    return vector


def run_circuit(initial: Statevector, circuit: Circuit) -> Statevector:
    if initial.n_qubits != circuit.n_qubits:
        raise DimensionMismatchError(
            f'circuit acts on {circuit.n_qubits} qubits but the state has {initial.n_qubits}'
        )
    logger.debug('Running %s', circuit)
    vector = evolve(initial.amplitudes, circuit.gates, circuit.n_qubits)
    return Statevector(n_qubits=circuit.n_qubits, amplitudes=vector)


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    size = 2 ** circuit.n_qubits
    columns = [evolve(np.eye(size, dtype=complex)[:, i], circuit.gates, circuit.n_qubits) for i in range(size)]
    return np.stack(columns, axis=1)


def _check_measured(measured: Sequence[int], n_qubits: int) -> None:
    if len(set(measured)) != len(measured):
        raise InvalidCircuitError(f'measured qubits repeat: {list(measured)}')
    if any(q < 0 or q >= n_qubits for q in measured):
        raise InvalidCircuitError(f'measured qubits {list(measured)} outside a {n_qubits}-qubit state')


def marginal_probabilities(vector: np.ndarray, measured: Sequence[int], n_qubits: int) -> np.ndarray:
    """Born-rule marginal over ``measured``, indexed by outcome with the highest measured qubit as MSB."""
    probabilities = (np.abs(vector) ** 2).reshape((2,) * n_qubits)
    kept_axes = {n_qubits - 1 - q for q in measured}
    summed = tuple(axis for axis in range(n_qubits) if axis not in kept_axes)
    marginal = probabilities.sum(axis=summed) if summed else probabilities
    return np.asarray(marginal).reshape(-1)


def format_outcome(index: int, width: int) -> str:
    return format(index, f'0{width}b') if width else ''


def outcome_probabilities(state: Statevector, measured: Sequence[int]) -> Dict[str, float]:
    """Marginal distribution over ``measured``; keys list the measured qubits from highest index down."""
    _check_measured(measured, state.n_qubits)
    marginal = marginal_probabilities(state.amplitudes, measured, state.n_qubits)
    return {
        format_outcome(index, len(measured)): float(p)
        for index, p in enumerate(marginal)
        if p > PROBABILITY_FLOOR
    }


def draw_counts(marginal: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    weights = np.clip(marginal, 0.0, None)
    return rng.multinomial(shots, weights / weights.sum())


def counts_to_map(counts: np.ndarray, width: int) -> Dict[str, int]:
    return {format_outcome(index, width): int(c) for index, c in enumerate(counts) if c}


def sample_shots(state: Statevector, measured: Sequence[int], shots: int, seed: int) -> Dict[str, int]:
    if shots < 1:
        raise QOverlapError(f'shots must be at least 1, got {shots}')
    _check_measured(measured, state.n_qubits)
    rng = np.random.default_rng(seed)
    marginal = marginal_probabilities(state.amplitudes, measured, state.n_qubits)
    return counts_to_map(draw_counts(marginal, shots, rng), len(measured))


def direct_fidelity(psi: Statevector, phi: Statevector) -> float:
    """|<psi|phi>|^2, the oracle both overlap protocols are checked against."""
    if psi.n_qubits != phi.n_qubits:
        raise DimensionMismatchError(f'{psi.n_qubits}-qubit vs {phi.n_qubits}-qubit state')
    return float(abs(np.vdot(psi.amplitudes, phi.amplitudes)) ** 2)
