import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from pydantic import ValidationError

from errors import FitError, MalformedInputError, QOverlapError
from noise import NoiseModel
from nv_model import (
    BETA_MINUS,
    BETA_PLUS,
    NvCurve,
    canonical_beta,
    fit_linear,
    nv_theoretical_fidelity,
    read_curve,
    simulate_nv_point,
    sweep_nv,
    synthetic_curve,
    theta_grid,
    write_curve,
    write_fit,
)


class TestTheory:
    def test_maxima(self):
        assert nv_theoretical_fidelity(math.pi / 2, BETA_PLUS) == pytest.approx(1.0)
        assert nv_theoretical_fidelity(3 * math.pi / 2, BETA_MINUS) == pytest.approx(1.0)

    def test_zero_angle_is_half(self):
        assert nv_theoretical_fidelity(0.0, BETA_PLUS) == 0.5
        assert nv_theoretical_fidelity(0.0, BETA_MINUS) == 0.5

    def test_beta_snaps_to_allowed_values(self):
        assert canonical_beta(math.pi / 2 + 1e-12) == BETA_PLUS
        assert canonical_beta(1.5 * math.pi) == BETA_MINUS
        with pytest.raises(QOverlapError):
            canonical_beta(math.pi)

    def test_invalid_beta(self):
        with pytest.raises(QOverlapError):
            nv_theoretical_fidelity(0.3, 1.0)

    @given(st.floats(min_value=-20.0, max_value=20.0))
    def test_curves_are_complementary_and_bounded(self, theta):
        plus = nv_theoretical_fidelity(theta, BETA_PLUS)
        minus = nv_theoretical_fidelity(theta, BETA_MINUS)
        assert 0.0 <= plus <= 1.0
        assert plus + minus == pytest.approx(1.0)


class TestSimulation:
    def test_exact_point_at_maximum(self):
        assert simulate_nv_point(math.pi / 2, BETA_PLUS) == pytest.approx(1.0, abs=1e-10)

    def test_exact_point_at_minimum(self):
        assert simulate_nv_point(3 * math.pi / 2, BETA_PLUS) == pytest.approx(0.0, abs=1e-10)

    @pytest.mark.parametrize('beta', [BETA_PLUS, BETA_MINUS])
    def test_exact_sweep_matches_theory(self, beta):
        curve = sweep_nv(theta_grid(100), beta)
        assert len(curve.samples) == 100
        for theta, f in curve.samples:
            assert abs(f - nv_theoretical_fidelity(theta, beta)) < 1e-10

    def test_noisy_sweep_loses_contrast(self):
        noise = NoiseModel(p_1q=0.05, p_2q=0.1, readout_r=0.03, seed=6)
        fits = []
        for seed in range(50):
            curve = sweep_nv(theta_grid(16), BETA_PLUS, shots=1024, noise=noise, seed=seed)
            fits.append(fit_linear(curve))
        assert np.mean([f.b for f in fits]) < 1.0
        assert np.mean([f.a for f in fits]) > 0.0

    def test_sampled_sweep_is_seeded(self):
        a = sweep_nv(theta_grid(8), BETA_MINUS, shots=512, seed=4)
        b = sweep_nv(theta_grid(8), BETA_MINUS, shots=512, seed=4)
        assert a == b


class TestFit:
    @pytest.mark.parametrize('a, b', [(0.04, 0.89), (0.10, 0.83), (0.0, 1.0)])
    def test_recovers_synthetic_parameters(self, a, b):
        fit = fit_linear(synthetic_curve(a, b, theta_grid(60), BETA_PLUS))
        assert abs(fit.a - a) < 1e-9
        assert abs(fit.b - b) < 1e-9
        assert fit.residual_rms < 1e-9

    def test_jitter_is_reproducible_and_clipped(self):
        first = synthetic_curve(0.0, 1.0, theta_grid(40), BETA_PLUS, jitter=0.2, seed=1)
        second = synthetic_curve(0.0, 1.0, theta_grid(40), BETA_PLUS, jitter=0.2, seed=1)
        assert first == second
        assert all(0.0 <= f <= 1.0 for _, f in first.samples)

    def test_degenerate_design(self):
        curve = NvCurve(beta=BETA_PLUS, samples=((0.0, 0.5), (math.pi, 0.5)))
        with pytest.raises(FitError):
            fit_linear(curve)

    def test_too_few_points(self):
        with pytest.raises(FitError):
            fit_linear(NvCurve(beta=BETA_PLUS, samples=((1.0, 0.5),)))


def test_curve_rejects_out_of_range_fidelity():
    with pytest.raises(ValidationError):
        NvCurve(beta=BETA_PLUS, samples=((0.0, 1.5),))


def test_theta_grid():
    grid = theta_grid(4)
    np.testing.assert_allclose(grid, [0, math.pi / 2, math.pi, 3 * math.pi / 2])
    with pytest.raises(QOverlapError):
        theta_grid(0)


def test_curve_and_fit_files(tmp_path):
    curve = synthetic_curve(0.04, 0.89, theta_grid(12), BETA_MINUS)
    path = write_curve(curve, tmp_path / 'curve.csv')
    loaded = read_curve(path)
    assert loaded.beta == BETA_MINUS
    np.testing.assert_allclose(loaded.fidelities, curve.fidelities)
    fit_path = write_fit(fit_linear(loaded), tmp_path / 'fit.json')
    assert json.loads(fit_path.read_text())['b'] == pytest.approx(0.89)


def test_read_curve_missing_column(tmp_path):
    path = tmp_path / 'bad.csv'
    path.write_text('theta,f\n0.0,0.5\n')
    with pytest.raises(MalformedInputError):
        read_curve(path)
