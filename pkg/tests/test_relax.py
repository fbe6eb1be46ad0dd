"""Relaxation tests: gradient exactness against finite differences, the
mirror-descent loop contract, and the lower-bound property against
exhaustive subset enumeration."""

import itertools

import numpy as np
import pytest

from firal.fisher import f_objective, fir
from firal.relax import relax_gradient, relax_solve


def random_spd(rng, n, jitter=0.3):
    R = rng.normal(size=(n, n))
    return R @ R.T + jitter * np.eye(n)


def random_instance(seed, m=6, dim=3):
    rng = np.random.default_rng(seed)
    fishers = np.stack([random_spd(rng, dim) for _ in range(m)])
    Hp0 = random_spd(rng, dim)
    return fishers, Hp0


def f_of_kappa(kappa, fishers, Hp0):
    sigma = np.einsum("i,ijk->jk", kappa, fishers)
    return fir(sigma, Hp0)


class TestRelaxGradient:
    def test_identical_candidates_symmetric(self):
        rng = np.random.default_rng(0)
        H = random_spd(rng, 3)
        fishers = np.stack([H] * 4)
        Hp0 = random_spd(rng, 3)
        g = relax_gradient(np.full(4, 0.25), fishers, Hp0)
        np.testing.assert_allclose(g, g[0], rtol=1e-12)

    def test_matches_finite_differences(self):
        fishers, Hp0 = random_instance(1)
        rng = np.random.default_rng(2)
        kappa = rng.random(len(fishers))
        kappa /= kappa.sum()
        g = relax_gradient(kappa, fishers, Hp0)
        h = 1e-6
        for i in range(len(kappa)):
            kp, km = kappa.copy(), kappa.copy()
            kp[i] += h
            km[i] -= h
            fd = (f_of_kappa(kp, fishers, Hp0) - f_of_kappa(km, fishers, Hp0)) / (2 * h)
            assert abs(g[i] - fd) / max(abs(fd), 1e-12) < 1e-5

    def test_single_candidate_calculus(self):
        # With one candidate, f(kappa) = f(H)/kappa so g = -f at kappa = 1.
        rng = np.random.default_rng(3)
        H = random_spd(rng, 3)
        Hp0 = random_spd(rng, 3)
        g = relax_gradient(np.array([1.0]), H[None], Hp0)
        f1 = f_of_kappa(np.array([1.0]), H[None], Hp0)
        assert g[0] == pytest.approx(-f1, rel=1e-10)


class TestRelaxSolve:
    def test_identical_candidates_stay_uniform(self):
        rng = np.random.default_rng(4)
        H = random_spd(rng, 3)
        fishers = np.stack([H] * 5)
        Hp0 = random_spd(rng, 3)
        res = relax_solve(3, Hp0, fishers, n_iter=50)
        np.testing.assert_allclose(res.z, 0.6, rtol=1e-12)

    def test_two_candidate_golden_section_oracle(self):
        fishers, Hp0 = random_instance(5, m=2, dim=2)
        res = relax_solve(1, Hp0, fishers, n_iter=2000)

        def f1(k1):
            return f_of_kappa(np.array([k1, 1 - k1]), fishers, Hp0)

        # Golden-section search over the single free coordinate.
        lo, hi = 1e-9, 1 - 1e-9
        invphi = (np.sqrt(5) - 1) / 2
        a, b = hi - invphi * (hi - lo), lo + invphi * (hi - lo)
        fa, fb = f1(a), f1(b)
        for _ in range(200):
            if fa < fb:
                hi, b, fb = b, a, fa
                a = hi - invphi * (hi - lo)
                fa = f1(a)
            else:
                lo, a, fa = a, b, fb
                b = lo + invphi * (hi - lo)
                fb = f1(b)
        f_opt = min(fa, fb)
        assert res.objective <= f_opt + 1e-3 * abs(f_opt)

    def test_best_iterate_no_worse_than_uniform(self):
        fishers, Hp0 = random_instance(6)
        m = len(fishers)
        uniform_f = f_of_kappa(np.full(m, 1.0 / m), fishers, Hp0)
        res = relax_solve(2, Hp0, fishers, n_iter=100)
        assert res.objective * res.budget <= uniform_f + 1e-12

    def test_simplex_invariants(self):
        fishers, Hp0 = random_instance(7)
        res = relax_solve(2, Hp0, fishers, n_iter=150)
        assert np.all(res.kappa > 0)
        assert abs(res.kappa.sum() - 1.0) < 1e-12
        assert abs(res.z.sum() - res.budget) < 1e-9

    def test_best_so_far_nonincreasing(self):
        fishers, Hp0 = random_instance(8)
        res = relax_solve(2, Hp0, fishers, n_iter=150)
        best = np.minimum.accumulate(res.objective_history)
        assert np.all(np.diff(best) <= 0)

    def test_longer_runs_do_not_lose_ground(self):
        fishers, Hp0 = random_instance(9)
        short = relax_solve(2, Hp0, fishers, n_iter=100, stall_window=10**9)
        long = relax_solve(2, Hp0, fishers, n_iter=400, stall_window=10**9)
        assert long.objective <= short.objective + 1e-15

    def test_lower_bounds_exhaustive_optimum(self):
        # The relaxed optimum can be no worse than the best 0/1 design,
        # found here by complete enumeration.
        for seed in range(3):
            rng = np.random.default_rng(100 + seed)
            m, b = 7, 2
            fishers = np.stack([random_spd(rng, 3) for _ in range(m)])
            Hp0 = random_spd(rng, 3)
            f_star = min(
                f_objective(np.array(subset, dtype=int), fishers, Hp0)
                for subset in itertools.combinations(range(m), b)
            )
            res = relax_solve(b, Hp0, fishers, n_iter=2000)
            assert res.objective <= f_star + 1e-6

    def test_rejects_empty_pool(self):
        with pytest.raises(ValueError):
            relax_solve(1, np.eye(2), np.empty((0, 2, 2)))
