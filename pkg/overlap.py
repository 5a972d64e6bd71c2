"""
Swap-test and destructive-swap-test fidelity estimation.

Register layouts are fixed so bitstrings are reproducible:

* swap test: ancilla is qubit 0, psi_i is qubit 1+i, phi_i is qubit n+1+i
* destructive swap test: psi_i is qubit i, phi_i is qubit n+i
"""

import logging
import math
from enum import Enum
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from errors import DimensionMismatchError, ExactModeError, QOverlapError
from executor import EXACT_FIDELITY_FLOOR, draw_counts, evolve, marginal_probabilities
from noise import NoiseModel, noisy_outcome_counts
from state import Circuit, Statevector, basis_state, cnot, compose, cswap, h

logger = logging.getLogger(__name__)


class Protocol(str, Enum):
    SWAP = 'swap'
    DESTRUCTIVE = 'destructive'


class OverlapResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    p_success: float = Field(ge=0.0, le=1.0)
    fidelity: float = Field(ge=0.0, le=1.0)
    overlap: float = Field(ge=0.0, le=1.0)
    raw_fidelity: float
    shots: int = Field(0, ge=0)

    @classmethod
    def from_success(cls, p_success: float, shots: int) -> 'OverlapResult':
        p_success = min(1.0, max(0.0, float(p_success)))
        raw = 2.0 * p_success - 1.0
        # negative estimates only happen under noise or sampling; F is clamped, raw kept
        fidelity = min(1.0, max(0.0, raw))
        if shots == 0:
            if fidelity < EXACT_FIDELITY_FLOOR:
                fidelity = 0.0
            elif fidelity > 1.0 - EXACT_FIDELITY_FLOOR:
                fidelity = 1.0
        return cls(p_success=p_success, fidelity=fidelity, overlap=math.sqrt(fidelity),
                   raw_fidelity=raw, shots=shots)


def _check_pair_size(n: int) -> None:
    if n < 1:
        raise QOverlapError(f'states need at least one qubit, got n={n}')


def build_swap_test(n: int) -> Circuit:
    _check_pair_size(n)
    gates = [h(0)]
    gates += [cswap(0, 1 + i, n + 1 + i) for i in range(n)]
    gates.append(h(0))
    return Circuit(n_qubits=2 * n + 1, gates=tuple(gates), measured_qubits=(0,))


def build_destructive_swap_test(n: int) -> Circuit:
    _check_pair_size(n)
    gates = []
    for i in range(n):
        gates += [cnot(i, n + i), h(i)]
    return Circuit(n_qubits=2 * n, gates=tuple(gates), measured_qubits=tuple(range(2 * n)))


def is_failure_outcome(o_psi: str, o_phi: str) -> bool:
    """True iff the bitwise AND of the two outcome strings has odd weight."""
    if len(o_psi) != len(o_phi):
        raise DimensionMismatchError(f'outcome lengths differ: {len(o_psi)} vs {len(o_phi)}')
    if set(o_psi + o_phi) - {'0', '1'}:
        raise QOverlapError(f'outcomes must be bitstrings: {o_psi!r}, {o_phi!r}')
    weight = sum(1 for a, b in zip(o_psi, o_phi) if a == b == '1')
    return weight % 2 == 1


def split_joint_outcome(joint: str, n: int) -> Tuple[str, str]:
    """Split a 2n-bit destructive-test outcome (highest qubit first) into (O^psi, O^phi)."""
    if len(joint) != 2 * n:
        raise DimensionMismatchError(f'expected {2 * n} bits, got {joint!r}')
    return joint[n:], joint[:n]


def failure_outcomes(n: int) -> List[str]:
    """Every joint string O^psi O^phi that counts as a failure, sorted."""
    _check_pair_size(n)
    strings = (format(i, f'0{2 * n}b') for i in range(4 ** n))
    return sorted(s for s in strings if is_failure_outcome(s[:n], s[n:]))


@lru_cache(maxsize=16)
def failure_mask(n: int) -> np.ndarray:
    """Boolean mask over dense destructive-test outcome indices that fail."""
    index = np.arange(4 ** n)
    both = (index & ((1 << n) - 1)) & (index >> n)
    parity = np.zeros_like(index)
    for bit in range(n):
        parity ^= (both >> bit) & 1
    mask = parity.astype(bool)
    mask.setflags(write=False)
    return mask


def _check_inputs(psi: Statevector, phi: Statevector, shots: int, noise: Optional[NoiseModel]) -> None:
    if psi.n_qubits != phi.n_qubits:
        raise DimensionMismatchError(f'cannot compare {psi.n_qubits}-qubit and {phi.n_qubits}-qubit states')
    if shots < 0:
        raise QOverlapError(f'shots must be >= 0, got {shots}')
    if shots == 0 and noise is not None:
        raise ExactModeError('exact mode (shots = 0) cannot be combined with a noise model')


def _measured_distribution(circuit: Circuit, initial: Statevector, shots: int,
                           noise: Optional[NoiseModel], seed: int) -> np.ndarray:
    """Exact marginal when shots == 0, otherwise empirical frequencies."""
    if noise is not None:
        counts = noisy_outcome_counts(circuit, initial, noise, shots, stream=seed)
        return counts / shots
    final = evolve(initial.amplitudes, circuit.gates, circuit.n_qubits)
    marginal = marginal_probabilities(final, circuit.measured_qubits, circuit.n_qubits)
    if shots == 0:
        return marginal
    return draw_counts(marginal, shots, np.random.default_rng(seed)) / shots


def swap_test_overlap(psi: Statevector, phi: Statevector, shots: int = 0,
                      noise: Optional[NoiseModel] = None, seed: int = 0) -> OverlapResult:
    """Ancilla swap test: F = 2 P(0) - 1 on |0> (x) |psi> (x) |phi>."""
    _check_inputs(psi, phi, shots, noise)
    circuit = build_swap_test(psi.n_qubits)
    initial = compose(basis_state(1, 0), psi, phi)
    distribution = _measured_distribution(circuit, initial, shots, noise, seed)
    return OverlapResult.from_success(distribution[0], shots)


def destructive_swap_test_overlap(psi: Statevector, phi: Statevector, shots: int = 0,
                                  noise: Optional[NoiseModel] = None, seed: int = 0) -> OverlapResult:
    """Ancilla-free variant: P(0) = 1 - P(odd-parity AND outcomes)."""
    _check_inputs(psi, phi, shots, noise)
    n = psi.n_qubits
    circuit = build_destructive_swap_test(n)
    initial = compose(psi, phi)
    distribution = _measured_distribution(circuit, initial, shots, noise, seed)
    failure = float(distribution[failure_mask(n)].sum())
    return OverlapResult.from_success(1.0 - failure, shots)


_PROTOCOLS = {
    Protocol.SWAP: swap_test_overlap,
    Protocol.DESTRUCTIVE: destructive_swap_test_overlap,
}


def overlap_between(psi: Statevector, phi: Statevector, protocol: Protocol = Protocol.DESTRUCTIVE,
                    shots: int = 0, noise: Optional[NoiseModel] = None, seed: int = 0) -> OverlapResult:
    return _PROTOCOLS[Protocol(protocol)](psi, phi, shots=shots, noise=noise, seed=seed)
