from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

NORM_TOLERANCE = 1e-10


class Statevector(BaseModel):
    """Pure state of ``n_qubits`` qubits; qubit 0 is the least-significant bit of the index."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    n_qubits: int = Field(gt=0)
    amplitudes: np.ndarray

    @field_validator('amplitudes', mode='before')
    @classmethod
    def _as_readonly_complex(cls, value):
        amplitudes = np.array(value, dtype=complex).reshape(-1)
        amplitudes.setflags(write=False)
        return amplitudes

    @model_validator(mode='after')
    def _check_shape_and_norm(self):
        if self.amplitudes.shape[0] != 2 ** self.n_qubits:
            raise ValueError(
                f'{self.n_qubits} qubits need {2 ** self.n_qubits} amplitudes, got {self.amplitudes.shape[0]}'
            )
        norm = float(np.vdot(self.amplitudes, self.amplitudes).real)
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise ValueError(f'state is not normalized (squared norm {norm:.12g})')
        return self

    @classmethod
    def from_amplitudes(cls, amplitudes: Sequence[complex], normalize: bool = False) -> 'Statevector':
        vector = np.asarray(amplitudes, dtype=complex).reshape(-1)
        size = vector.shape[0]
        if size < 2 or size & (size - 1):
            raise ValueError(f'amplitude count must be a power of two >= 2, got {size}')
        if normalize:
            norm = np.linalg.norm(vector)
            if norm == 0:
                raise ValueError('cannot normalize the zero vector')
            vector = vector / norm
        return cls(n_qubits=size.bit_length() - 1, amplitudes=vector)

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


class GateKind(str, Enum):
    H = 'H'
    X = 'X'
    RY = 'RY'
    CNOT = 'CNOT'
    CCNOT = 'CCNOT'
    CSWAP = 'CSWAP'


ARITY = {
    GateKind.H: 1,
    GateKind.X: 1,
    GateKind.RY: 1,
    GateKind.CNOT: 2,
    GateKind.CCNOT: 3,
    GateKind.CSWAP: 3,
}


class Gate(BaseModel):
    """One gate application. Controls come first in ``targets``."""

    model_config = ConfigDict(frozen=True)

    kind: GateKind
    targets: Tuple[int, ...]
    theta: Optional[float] = None

    @model_validator(mode='after')
    def _check_targets(self):
        expected = ARITY[self.kind]
        if len(self.targets) != expected:
            raise ValueError(f'{self.kind.value} acts on {expected} qubit(s), got targets {self.targets}')
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f'duplicate targets in {self.kind.value}{self.targets}')
        if any(q < 0 for q in self.targets):
            raise ValueError(f'negative qubit index in {self.targets}')
        if (self.kind is GateKind.RY) != (self.theta is not None):
            raise ValueError('theta is required for RY and only for RY')
        return self

    @property
    def arity(self) -> int:
        return ARITY[self.kind]

    def __str__(self) -> str:
        args = ','.join(f'q{q}' for q in self.targets)
        if self.theta is not None:
            return f'{self.kind.value}({self.theta:.6g};{args})'
        return f'{self.kind.value}({args})'


def h(q: int) -> Gate:
    return Gate(kind=GateKind.H, targets=(q,))


def x(q: int) -> Gate:
    return Gate(kind=GateKind.X, targets=(q,))


def ry(theta: float, q: int) -> Gate:
    return Gate(kind=GateKind.RY, targets=(q,), theta=float(theta))


def cnot(control: int, target: int) -> Gate:
    return Gate(kind=GateKind.CNOT, targets=(control, target))


def ccnot(control_a: int, control_b: int, target: int) -> Gate:
    return Gate(kind=GateKind.CCNOT, targets=(control_a, control_b, target))


def cswap(control: int, a: int, b: int) -> Gate:
    return Gate(kind=GateKind.CSWAP, targets=(control, a, b))


class Circuit(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_qubits: int = Field(gt=0)
    gates: Tuple[Gate, ...] = ()
    measured_qubits: Tuple[int, ...] = ()

    @model_validator(mode='after')
    def _check_indices(self):
        for position, gate in enumerate(self.gates):
            if max(gate.targets) >= self.n_qubits:
                raise ValueError(f'gate {position} {gate} exceeds a {self.n_qubits}-qubit register')
        if len(set(self.measured_qubits)) != len(self.measured_qubits):
            raise ValueError(f'measured qubits repeat: {self.measured_qubits}')
        if any(q < 0 or q >= self.n_qubits for q in self.measured_qubits):
            raise ValueError(f'measured qubits {self.measured_qubits} outside a {self.n_qubits}-qubit register')
        return self

    @property
    def gate_count(self) -> int:
        return len(self.gates)

    def __str__(self) -> str:
        body = ' '.join(str(gate) for gate in self.gates) or '(empty)'
        return f'[{self.n_qubits}q] {body} | measure {list(self.measured_qubits)}'


def basis_state(n_qubits: int, index: int = 0) -> Statevector:
    if not 0 <= index < 2 ** n_qubits:
        raise ValueError(f'basis index {index} outside a {n_qubits}-qubit register')
    amplitudes = np.zeros(2 ** n_qubits, dtype=complex)
    amplitudes[index] = 1.0
    return Statevector(n_qubits=n_qubits, amplitudes=amplitudes)


def random_state(n_qubits: int, rng: np.random.Generator) -> Statevector:
    """Haar-random pure state (normalized complex Gaussian vector)."""
    size = 2 ** n_qubits
    vector = rng.normal(size=size) + 1j * rng.normal(size=size)
    return Statevector(n_qubits=n_qubits, amplitudes=vector / np.linalg.norm(vector))


def compose(*states: Statevector) -> Statevector:
    """Tensor product; the first state occupies the lowest qubit indices."""
    if not states:
        raise ValueError('compose needs at least one state')
    vector = states[0].amplitudes
    for state in states[1:]:
        vector = np.kron(state.amplitudes, vector)
    return Statevector(n_qubits=sum(s.n_qubits for s in states), amplitudes=vector)
