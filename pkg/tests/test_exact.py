from __future__ import annotations

import numpy as np
import pytest

from calibrax.calibration.bounds import theorem1_bound
from calibrax.calibration.exact import (PairPolicy, calibration_curve, exact_consistency_level, loss_facets,
                                        pair_calibration, sweep)
from calibrax.losses import LossMatrix, map_loss_matrix
from calibrax.subspaces import explicit, f_map, f_sort, identity

import oracles


@pytest.fixture(scope="module")
def random_cases():
    """Small random settings with their brute-force grid tables."""
    out = []
    for seed in range(4):
        rng = np.random.default_rng(100 + seed)
        k, d = 3, 2 if seed % 2 else 3
        F, L = rng.normal(size=(k, d)), rng.random((k, 3))
        out.append((F, L, oracles.grid_table(F, L, 40)))
    return out


class TestBinary:
    def test_quadratic_law(self):
        eps = np.linspace(0, 1, 101)
        c = calibration_curve(identity(2), LossMatrix(1 - np.eye(2)), eps)
        assert np.abs(c.values - eps**2 / 8).max() <= 1e-6
        assert c.meta == "exact_qp"

    def test_infinite_past_largest_loss(self):
        eps = np.array([0.5, 1.0, 1.01, 2.0])
        c = calibration_curve(identity(2), LossMatrix(1 - np.eye(2)), eps)
        assert np.isfinite(c.values[:2]).all() and np.isinf(c.values[2:]).all()

    def test_brute_force_grid(self):
        eps = np.linspace(0, 1, 21)
        brute = oracles.brute_calibration(oracles.grid_table(np.eye(2), 1 - np.eye(2), 200), eps)
        exact = calibration_curve(identity(2), LossMatrix(1 - np.eye(2)), eps).values
        assert np.allclose(exact, brute, atol=1e-6)


class TestAgainstBruteForce:
    def test_exact_is_below_every_grid_point(self, random_cases):
        for F, L, table in random_cases:
            eps = np.linspace(0, L.max(), 21)
            exact = calibration_curve(explicit(F), LossMatrix(L), eps).values
            brute = oracles.brute_calibration(table, eps)
            assert np.all(exact <= brute + 1e-7)

    def test_grid_approaches_exact(self, random_cases):
        # a grid point near the exact minimizer at eps + h has task excess >= eps
        for F, L, table in random_cases:
            eps = np.linspace(0, L.max(), 21)
            exact = calibration_curve(explicit(F), LossMatrix(L), eps).values
            brute = oracles.brute_calibration(table, eps)
            assert np.all(brute[:-2] <= exact[2:] + 1e-3)

    @pytest.mark.parametrize("seed", range(10))
    def test_bound_is_below(self, seed):
        rng = np.random.default_rng(seed)
        k, m, d = int(rng.integers(2, 6)), int(rng.integers(2, 6)), int(rng.integers(1, 4))
        S, L = explicit(rng.normal(size=(k, d))), LossMatrix(rng.random((k, m)))
        eps = np.linspace(0, L.l_max, 20)
        exact = calibration_curve(S, L, eps).values
        assert np.all(theorem1_bound(S, L, eps) <= exact + 1e-7)


class TestSweep:
    @pytest.mark.parametrize("factory, r", [(f_sort, 3), (f_map, 3), (f_sort, 4)])
    def test_pruning_is_exact(self, factory, r):
        S, L = factory(r), map_loss_matrix(r)
        eps = np.linspace(0, L.l_max, 41)
        a = sweep(S, L, eps, prune=True)
        b = sweep(S, L, eps, prune=False)
        assert a.n_qp <= b.n_qp
        assert np.array_equal(a.curve(), b.curve())

    @pytest.mark.parametrize("factory", [f_sort, f_map])
    def test_symmetry_matches_literal(self, factory):
        S, L = factory(3), map_loss_matrix(3)
        eps = np.linspace(0, L.l_max, 41)
        a = sweep(S, L, eps)
        b = sweep(S, L, eps, use_symmetry=False)
        assert a.symmetry_used and not b.symmetry_used
        assert len(a.pairs) == 5 and len(b.pairs) == 30
        assert np.allclose(a.curve(), b.curve(), atol=1e-9)

    def test_symmetry_not_trusted_when_broken(self):
        S = f_sort(3)
        L = map_loss_matrix(3)
        broken = LossMatrix(L.L + np.eye(6, 7) * 0.01, symmetry=L.symmetry)
        assert not sweep(S, broken, [0.0, 0.2]).symmetry_used

    def test_sampled_pairs_bound_the_full_minimum(self):
        S, L = f_sort(4), map_loss_matrix(4)
        eps = np.linspace(0, L.l_max, 21)
        full = calibration_curve(S, L, eps, use_symmetry=False).values
        part = calibration_curve(S, L, eps, "sampled:40:3", use_symmetry=False)
        assert part.info == {"pairs": "sampled:40:3"}
        assert np.all(part.values >= full - 1e-9)

    def test_pair_values_are_convex_nondecreasing(self):
        rng = np.random.default_rng(4)
        S, L = explicit(rng.normal(size=(4, 2))), LossMatrix(rng.random((4, 4)))
        eps = np.linspace(0, L.l_max, 31)
        vals = pair_calibration(S, L, 0, 1, eps)
        fin = vals[np.isfinite(vals)]
        assert np.all(np.diff(fin) >= -1e-9)
        assert np.all(np.diff(fin, 2) >= -1e-7)
        assert pair_calibration(S, L, 0, 1, float(eps[5])) == pytest.approx(vals[5], abs=1e-9)

    def test_bad_grids(self):
        with pytest.raises(ValueError):
            sweep(identity(2), LossMatrix(1 - np.eye(2)), [0.5, 0.1])
        with pytest.raises(ValueError):
            sweep(identity(3), LossMatrix(1 - np.eye(2)), [0.1])


class TestPairPolicy:
    def test_all_pairs(self):
        pairs = PairPolicy().select(4)
        assert len(pairs) == 12 and not np.any(pairs[:, 0] == pairs[:, 1])
        assert len({tuple(p) for p in pairs}) == 12

    def test_sampled_is_seeded(self):
        a = PairPolicy.parse("sampled:5:1").select(10)
        assert np.array_equal(a, PairPolicy.parse("sampled:5:1").select(10))
        assert not np.array_equal(a, PairPolicy.parse("sampled:5:2").select(10))
        assert repr(PairPolicy.parse("sampled:5:1")) == "sampled:5:1"

    @pytest.mark.parametrize("text", ["some", "sampled:x:1", "sampled:0:1", "sampled:3"])
    def test_bad_text(self, text):
        with pytest.raises(ValueError):
            PairPolicy.parse(text)


class TestConsistencyLevel:
    def test_consistent_settings_are_zero(self):
        assert exact_consistency_level(identity(3), LossMatrix(1 - np.eye(3)))[0] == pytest.approx(0.0, abs=1e-9)
        assert exact_consistency_level(f_map(3), map_loss_matrix(3))[0] == pytest.approx(0.0, abs=1e-9)

    def test_matches_curve_zero_exit(self):
        S, L = f_sort(4), map_loss_matrix(4)
        eta, _ = exact_consistency_level(S, L)
        eps = np.sort(np.r_[np.linspace(0, L.l_max, 21), eta - 1e-6, eta + 1e-6])
        c = calibration_curve(S, L, eps)
        assert c(eta - 1e-6) == 0.0 and c(eta + 1e-6) > 0.0

    def test_never_optimal_output(self):
        # output 2 is dominated by output 0 everywhere
        L = np.array([[0.0, 1.0], [1.0, 0.0], [0.5, 1.5]])
        assert loss_facets(L, 2) is None
        assert loss_facets(L, 0) is not None
