"""
NV-center fidelity model: the rotation-angle curve F_th = (1 +/- sin theta) / 2,
simulated sweeps through the destructive swap test, synthetic curves and the
linear fit F = a + b * F_th.
"""

import logging
import math
from typing import Iterable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from errors import FitError, MalformedInputError, QOverlapError
from executor import apply_gate
from noise import NoiseModel
from overlap import destructive_swap_test_overlap
from pipeline import parallel_map, unit_seed
from reports import read_csv_rows, write_csv, write_json
from state import Statevector, basis_state, ry

logger = logging.getLogger(__name__)

BETA_PLUS = math.pi / 2
BETA_MINUS = 3 * math.pi / 2
CURVE_HEADER = ('theta', 'beta', 'f', 'f_th')


def canonical_beta(beta: float) -> float:
    """Snap beta onto pi/2 or 3pi/2; anything else is rejected."""
    for allowed in (BETA_PLUS, BETA_MINUS):
        if math.isclose(float(beta), allowed, rel_tol=0.0, abs_tol=1e-9):
            return allowed
    raise QOverlapError(f'beta must be pi/2 or 3pi/2, got {beta}')


def _rotation_sign(beta: float) -> float:
    # beta = pi/2 prepares RY(+theta)|0>, beta = 3pi/2 prepares RY(-theta)|0>
    return 1.0 if canonical_beta(beta) == BETA_PLUS else -1.0


class NvCurve(BaseModel):
    model_config = ConfigDict(frozen=True)

    beta: float
    samples: Tuple[Tuple[float, float], ...]

    @field_validator('beta')
    @classmethod
    def _known_beta(cls, value: float) -> float:
        return canonical_beta(value)

    @field_validator('samples')
    @classmethod
    def _finite_samples(cls, value):
        for theta, f in value:
            if not math.isfinite(theta):
                raise ValueError(f'theta must be finite, got {theta}')
            if not 0.0 <= f <= 1.0:
                raise ValueError(f'fidelity must lie in [0, 1], got {f}')
        return value

    @property
    def thetas(self) -> np.ndarray:
        return np.array([theta for theta, _ in self.samples], dtype=float)

    @property
    def fidelities(self) -> np.ndarray:
        return np.array([f for _, f in self.samples], dtype=float)

    def rows(self) -> List[list]:
        return [[theta, self.beta, f, nv_theoretical_fidelity(theta, self.beta)] for theta, f in self.samples]


class FitResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    a: float
    b: float
    residual_rms: float = Field(ge=0.0)
    points: int = Field(ge=2)
    beta: float


def nv_theoretical_fidelity(theta: float, beta: float) -> float:
    sign = _rotation_sign(beta)
    return 0.5 * (1.0 + sign * math.sin(theta))


def nv_states(theta: float, beta: float) -> Tuple[Statevector, Statevector]:
    """(psi, phi): psi = RY(+/-theta)|0>, phi = H|0>."""
    psi = apply_gate(basis_state(1, 0), ry(_rotation_sign(beta) * theta, 0))
    phi = Statevector.from_amplitudes([1.0, 1.0], normalize=True)
    return psi, phi


def simulate_nv_point(theta: float, beta: float, shots: int = 0,
                      noise: Optional[NoiseModel] = None, seed: int = 0) -> float:
    psi, phi = nv_states(theta, beta)
    return destructive_swap_test_overlap(psi, phi, shots=shots, noise=noise, seed=seed).fidelity


def theta_grid(points: int) -> np.ndarray:
    if points < 1:
        raise QOverlapError(f'theta grid needs at least one point, got {points}')
    return np.linspace(0.0, 2.0 * math.pi, points, endpoint=False)


def sweep_nv(thetas: Iterable[float], beta: float, shots: int = 0, noise: Optional[NoiseModel] = None,
             seed: int = 0, workers: Optional[int] = None) -> NvCurve:
    beta = canonical_beta(beta)
    points = [float(t) for t in thetas]
    logger.info('NV sweep: %d angles, beta=%.4f, %s shots', len(points), beta, shots or 'exact')
    values = parallel_map(
        lambda item: simulate_nv_point(item[1], beta, shots, noise, unit_seed(seed, item[0])),
        list(enumerate(points)), workers)
    return NvCurve(beta=beta, samples=tuple(zip(points, values)))


def synthetic_curve(a: float, b: float, thetas: Iterable[float], beta: float,
                    jitter: float = 0.0, seed: int = 0) -> NvCurve:
    """a + b * F_th plus optional Gaussian jitter, clipped to [0, 1]."""
    if jitter < 0:
        raise QOverlapError(f'jitter must be >= 0, got {jitter}')
    beta = canonical_beta(beta)
    points = np.asarray(list(thetas), dtype=float)
    ideal = np.array([nv_theoretical_fidelity(t, beta) for t in points])
    values = a + b * ideal
    if jitter:
        values = values + np.random.default_rng(seed).normal(0.0, jitter, size=values.shape)
    values = np.clip(values, 0.0, 1.0)
    return NvCurve(beta=beta, samples=tuple(zip(points.tolist(), values.tolist())))


def fit_linear(curve: NvCurve) -> FitResult:
    """Ordinary least squares of the measured F against F_th."""
    if len(curve.samples) < 2:
        raise FitError(f'need at least two samples, got {len(curve.samples)}')
    x = np.array([nv_theoretical_fidelity(t, curve.beta) for t in curve.thetas])
    if np.ptp(x) < 1e-12:
        raise FitError('all samples share one theoretical fidelity; slope is undetermined')
    y = curve.fidelities
    design = np.column_stack([np.ones_like(x), x])
    (a, b), *_ = np.linalg.lstsq(design, y, rcond=None)
    residuals = y - design @ np.array([a, b])
    rms = float(np.sqrt(np.mean(residuals ** 2)))
    logger.info('NV fit over %d points: a=%.6f b=%.6f rms=%.3g', len(x), a, b, rms)
    return FitResult(a=float(a), b=float(b), residual_rms=rms, points=len(x), beta=curve.beta)


def write_curve(curve: NvCurve, path):
    return write_csv(path, CURVE_HEADER, curve.rows())


def read_curve(path) -> NvCurve:
    """Inverse of write_curve; f_th is recomputed, not trusted."""
    try:
        rows = read_csv_rows(path)
    except OSError as exc:
        raise MalformedInputError(f'cannot read curve {path}: {exc}') from exc
    if not rows:
        raise MalformedInputError(f'{path}: curve file has no samples')
    try:
        betas = {canonical_beta(float(row['beta'])) for row in rows}
        samples = tuple((float(row['theta']), float(row['f'])) for row in rows)
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInputError(f'{path}: bad curve row ({exc})') from exc
    if len(betas) != 1:
        raise MalformedInputError(f'{path}: curve mixes beta values')
    return NvCurve(beta=betas.pop(), samples=samples)


def write_fit(fit: FitResult, path):
    return write_json(path, fit.model_dump())
