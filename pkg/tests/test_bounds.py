"""Bound-quantity tests: prefactor limits and monotonicity, spectral
constants against a generalized-eigenvalue oracle, deviation-term
arithmetic, and the simplified envelope."""

import numpy as np
import pytest
import scipy.linalg

from firal.bounds import (
    heavy_epsilons,
    nine_fifths_envelope,
    prefactor_lower,
    prefactor_upper,
    rho_spectral,
)


class TestPrefactors:
    def test_small_argument_limit(self):
        # Both prefactors tend to 1/2 as the argument vanishes.
        assert prefactor_upper(1e-8) == pytest.approx(0.5, abs=1e-6)
        assert prefactor_lower(1e-8) == pytest.approx(0.5, abs=1e-6)

    def test_upper_dominates_lower(self):
        grid = np.logspace(-6, 2, 200)
        up = prefactor_upper(grid)
        lo = prefactor_lower(grid)
        assert np.all(up >= lo)

    def test_value_at_one(self):
        # (e - 1 - 1) / 1 = e - 2, by direct arithmetic.
        assert prefactor_upper(1.0) == pytest.approx(0.71828182845904509, rel=1e-12)

    def test_monotonicity(self):
        grid = np.logspace(-5, 2, 300)
        assert np.all(np.diff(prefactor_upper(grid)) > 0)
        assert np.all(np.diff(prefactor_lower(grid)) < 0)

    def test_series_matches_closed_form_at_crossover(self):
        # Just below the switchover the series path agrees with a direct
        # closed-form evaluation of the same point.
        a = 0.99e-4
        closed = (np.expm1(a) - a) / a**2
        assert prefactor_upper(a) == pytest.approx(closed, abs=1e-8)
        closed_lo = (np.expm1(-a) + a) / a**2
        assert prefactor_lower(a) == pytest.approx(closed_lo, abs=1e-8)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            prefactor_upper(0.0)
        with pytest.raises(ValueError):
            prefactor_lower(-1.0)


class TestRhoSpectral:
    def test_identity_cases(self):
        rng = np.random.default_rng(0)
        R = rng.normal(size=(3, 3))
        Vp = R @ R.T + 0.5 * np.eye(3)
        Hp = np.kron(np.eye(2), Vp)
        assert rho_spectral(Hp, Vp, 3) == pytest.approx(1.0, rel=1e-10)
        assert rho_spectral(2 * Hp, Vp, 3) == pytest.approx(0.5, rel=1e-10)

    def test_generalized_eig_oracle(self):
        rng = np.random.default_rng(1)
        Vp = rng.normal(size=(2, 2))
        Vp = Vp @ Vp.T + np.eye(2)
        R = rng.normal(size=(4, 4))
        Hp = R @ R.T + 0.5 * np.eye(4)
        K = np.kron(np.eye(2), Vp)
        expected = scipy.linalg.eigh(K, Hp, eigvals_only=True)[-1]
        assert rho_spectral(Hp, Vp, 3) == pytest.approx(expected, rel=1e-10)


class TestHeavyEpsilons:
    def test_vanish_with_sample_size(self):
        prev_p, prev_q = np.inf, np.inf
        for n in (10**3, 10**6, 10**9):
            eps_p, eps_q = heavy_epsilons(2.0, 1.0, 1.0, 1.0, n, 0.05, 8, 2)
            assert eps_p < prev_p and eps_q < prev_q
            prev_p, prev_q = eps_p, eps_q
        assert prev_p < 0.01 and prev_q < 0.01

    def test_linear_in_first_constant(self):
        a_p, _ = heavy_epsilons(1.5, 1.0, 2.0, 0.7, 500, 0.1, 4, 3)
        b_p, _ = heavy_epsilons(1.5, 2.0, 2.0, 0.7, 500, 0.1, 4, 3)
        assert b_p == pytest.approx(2 * a_p, rel=1e-12)

    def test_hand_arithmetic(self):
        eps_p, eps_q = heavy_epsilons(1.5, 2.0, 3.0, 0.5, 10_000, 0.1, 4, 3)
        assert eps_p == pytest.approx(0.20335161299213619, rel=1e-12)
        assert eps_q == pytest.approx(0.60885824871290462, rel=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            heavy_epsilons(1.0, 1.0, 1.0, 1.0, 100, 1.5, 4, 2)
        with pytest.raises(ValueError):
            heavy_epsilons(1.0, 1.0, 1.0, 1.0, 0, 0.1, 4, 2)


class TestEnvelope:
    def test_direct_value(self):
        assert nine_fifths_envelope(5.0, 1) == pytest.approx(9.0, rel=1e-15)

    def test_inverse_sample_scaling(self):
        v1 = nine_fifths_envelope(3.0, 10)
        v2 = nine_fifths_envelope(3.0, 20)
        assert v1 == pytest.approx(2 * v2, rel=1e-15)

    def test_validation(self):
        with pytest.raises(ValueError):
            nine_fifths_envelope(1.0, 0)
