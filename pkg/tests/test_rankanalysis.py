from __future__ import annotations

import math

import numpy as np
import pytest

from calibrax.calibration.bounds import projected_loss
from calibrax.losses import map_loss_matrix
from calibrax.rankanalysis import (XI_EXHAUSTIVE_MAX, asymptotic_csv, asymptotic_report, canonical_proj_term,
                                   log_spaced_r, map_closed_forms, proj_term, sort_predict, xi_map_sort)
from calibrax.subspaces import f_sort

import oracles


@pytest.fixture(scope="module", params=[3, 4, 5])
def enumerated(request):
    """Everything built from full r!-sized objects."""
    r = request.param
    P = oracles.perms(r)
    F = 1.0 / P
    L = oracles.map_matrix(r)
    codes = np.arange(1, 2**r)
    Y = (codes[:, None] >> np.arange(r)) & 1
    return r, P, F, L, Y


class TestClosedForms:
    def test_alpha_beta(self, enumerated):
        r, _, F, L, Y = enumerated
        cf = map_closed_forms(r)
        h = Y.sum(axis=1)
        pred = np.where(Y == 1, cf.alpha(h)[:, None], cf.beta(h)[:, None])
        LF = L.T @ F
        assert np.allclose(pred, LF, rtol=1e-9, atol=1e-9 * np.abs(LF).max())

    def test_gamma_is_projected_difference(self, enumerated):
        r, _, F, L, Y = enumerated
        cf = map_closed_forms(r)
        PL = oracles.projector(F) @ L
        rng = np.random.default_rng(r)
        for _ in range(10):
            i, j = rng.choice(len(F), 2, replace=False)
            want = PL[i] - PL[j]
            got = cf.gamma(Y.sum(axis=1)) * (Y @ (F[i] - F[j]))
            assert np.allclose(got, want, rtol=1e-9, atol=1e-12)

    def test_scaled_constants(self, enumerated):
        r, _, F, _, _ = enumerated
        cf = map_closed_forms(r)
        G = F.T @ F
        scale = math.factorial(r - 2)
        assert cf.A == pytest.approx((r - 1) * cf.H1 * scale, rel=1e-12)
        assert cf.eigen_gap_s * scale == pytest.approx(np.linalg.eigvalsh(G)[0], rel=1e-9)
        assert np.allclose(cf.diff_s(np.arange(1, r + 1)), cf.alpha_s(np.arange(1, r + 1)) - cf.beta_s(
            np.arange(1, r + 1)), rtol=1e-12, atol=1e-12)

    def test_pair_projection(self, enumerated):
        r, P, F, _, _ = enumerated
        rng = np.random.default_rng(10 + r)
        for _ in range(10):
            i, j = rng.choice(len(P), 2, replace=False)
            want = 2 * math.factorial(r - 1) * oracles.pair_sqnorm(F, i, j)
            assert proj_term(P[i], P[j]) == pytest.approx(want, rel=1e-9)

    def test_xi(self, enumerated):
        r, P, F, L, _ = enumerated
        rng = np.random.default_rng(20 + r)
        for _ in range(10):
            i, j = (int(x) for x in rng.choice(len(P), 2, replace=False))
            v = float(rng.uniform(0, 2))
            got = xi_map_sort(P[i], P[j], v)
            assert got.exact
            assert got.value == pytest.approx(oracles.xi(F, L, i, j, v), rel=1e-9, abs=1e-12)

    def test_canonical_term(self):
        r = 5
        assert canonical_proj_term(r) == pytest.approx(proj_term(np.arange(1, r + 1), np.arange(r, 0, -1)))

    @pytest.mark.parametrize("h", [0, 6, 2.5])
    def test_bad_weight(self, h):
        with pytest.raises(ValueError):
            map_closed_forms(5).alpha(h)

    def test_small_r(self):
        with pytest.raises(ValueError):
            map_closed_forms(2)


class TestSortPredict:
    @pytest.mark.parametrize("seed", range(20))
    def test_is_argmax_of_sort_scores(self, seed):
        rng = np.random.default_rng(seed)
        r = int(rng.integers(3, 6))
        theta = rng.normal(size=r)
        theta[rng.integers(r)] = theta[0]  # force a tie now and then
        P = oracles.perms(r)
        s = (1.0 / P) @ theta
        assert np.array_equal(sort_predict(theta), P[int(np.flatnonzero(s >= s.max() - 1e-12)[0])])

    def test_ties_go_to_smaller_item(self):
        assert sort_predict([1.0, 1.0, 1.0]).tolist() == [1, 2, 3]
        assert sort_predict([3.0, 1.0, 2.0]).tolist() == [1, 3, 2]

    def test_agrees_with_projected_loss_argmax(self):
        # the surrogate minimizer under f_sort predicts by sorting its theta
        S, L = f_sort(4), map_loss_matrix(4)
        q = np.random.default_rng(0).dirichlet(np.ones(L.m))
        f = -(projected_loss(S, L) @ q)
        theta = np.linalg.lstsq(S.F, f, rcond=None)[0]
        assert tuple(sort_predict(theta)) == L.output_labels[int(np.argmax(f))]


class TestXi:
    def test_sampled_beyond_exhaustive_limit(self):
        r = XI_EXHAUSTIVE_MAX + 5
        pi = np.arange(1, r + 1)
        res = xi_map_sort(pi, pi[::-1].copy(), 1.0, samples=2000, seed=1)
        assert not res.exact and res.value > 0
        assert res.value == xi_map_sort(pi, pi[::-1].copy(), 1.0, samples=2000, seed=1).value

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            xi_map_sort([1, 2, 3], [1, 2, 3], 1.0)
        with pytest.raises(ValueError):
            xi_map_sort([1, 2, 3], [2, 1, 3], -1.0)


class TestAsymptotics:
    def test_report_and_csv(self):
        rs = log_spaced_r()
        assert rs[0] == 10 and rs[-1] == 10**4 and len(rs) == 13
        rows = asymptotic_report(rs)
        text = asymptotic_csv(rows)
        assert text.splitlines()[0] == "r,kappa,gamma_mid,proj_term"
        assert len(text.splitlines()) == 14
        for row in rows:
            lr = math.log(row["r"])
            assert 0.5 <= row["kappa"] / lr <= 3.0
            assert abs(row["gamma_mid"]) * row["r"] / lr**2 <= 10.0
