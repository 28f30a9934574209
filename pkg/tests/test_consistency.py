from __future__ import annotations

import json

import numpy as np
import pytest

from calibrax.calibration.consistency import (consistency_report, dorn_certificate_check, mixture_level,
                                              pair_qp, point_mass_level)
from calibrax.calibration.exact import exact_consistency_level, pair_calibration
from calibrax.calibration.risks import excess_task, predict
from calibrax.calibration.bounds import projected_loss
from calibrax.losses import LossMatrix, TreeSpec, map_loss_matrix, tree_loss_matrix
from calibrax.qpsolve import solve_qp
from calibrax.subspaces import explicit, f_sort, identity, tree_block_basis

import oracles


class TestReport:
    def test_tree_worked_example(self):
        spec = TreeSpec((2, 2), (0.5, 0.5))
        rep = consistency_report(tree_block_basis(spec, 1), tree_loss_matrix(spec), exact=True)
        assert rep.eta_lower == pytest.approx(0.5, abs=1e-12)
        assert rep.eta_upper == pytest.approx(0.5, abs=1e-12)
        assert rep.eta_exact == pytest.approx(0.5, abs=1e-9)

    def test_json_shape(self):
        spec = TreeSpec((2, 2), (0.5, 0.5))
        data = json.loads(consistency_report(tree_block_basis(spec, 1), tree_loss_matrix(spec)).to_json())
        assert set(data) == {"eta_lower", "eta_upper", "witness"}
        assert set(data["witness"]) >= {"label", "predicted", "optimal"}

    def test_consistent_setting(self):
        rep = consistency_report(identity(3), LossMatrix(1 - np.eye(3)))
        assert rep.eta_lower == 0.0 and rep.eta_upper == 0.0

    @pytest.mark.parametrize("r", [3, 4])
    def test_sandwich_for_sort_scores(self, r):
        S, L = f_sort(r), map_loss_matrix(r)
        rep = consistency_report(S, L, exact=True)
        assert rep.eta_lower <= rep.eta_exact + 1e-9 <= rep.eta_upper + 2e-9
        assert rep.eta_lower > 0.0
        # the witness distribution really produces that excess
        q = np.zeros(L.m)
        support = [L.gt_labels.index(lab) for lab in rep.witness[0]]
        q[support] = rep.weights
        f = -(projected_loss(S, L) @ q)
        assert excess_task(L, f, q) == pytest.approx(rep.eta_lower, abs=1e-12)
        assert L.output_labels[predict(f)] == rep.witness[1]

    def test_sampled_labels(self):
        S, L = f_sort(3), map_loss_matrix(3)
        full, _ = point_mass_level(S, L)
        part, _ = point_mass_level(S, L, "sampled:3:0")
        assert part <= full
        with pytest.raises(ValueError):
            point_mass_level(S, L, "some")

    def test_mixture_without_symmetry_agrees(self):
        S, L = f_sort(3), map_loss_matrix(3)
        a, _ = mixture_level(S, L)
        b, _ = mixture_level(S, L, use_symmetry=False)
        assert a == pytest.approx(b, abs=1e-12)


def _random_instance(seed):
    F, L, i, j, eps, v = oracles.random_pair_instance(seed)
    return explicit(F), LossMatrix(L), i, j, eps, v


class TestDornCertificate:
    @pytest.mark.parametrize("seed", range(50))
    def test_random_instances(self, seed):
        S, L, i, j, eps, v = _random_instance(seed)
        chk = dorn_certificate_check(S, L, i, j, eps, v)
        assert chk.passed, chk
        if chk.status == "ok":
            assert chk.bound - 1e-9 <= chk.certificate <= chk.qp_value + 1e-7

    def test_pair_qp_value_matches_sweep(self):
        S, L, i, j, eps, _ = _random_instance(3)
        sol = solve_qp(pair_qp(S, L, i, j, eps))
        want = pair_calibration(S, L, i, j, eps)
        if np.isfinite(want):
            assert sol.objective == pytest.approx(want, abs=1e-8)

    def test_excluded_pair(self):
        # identical rows of F: the projected difference vanishes
        S = explicit(np.array([[1.0], [1.0], [0.0]]))
        chk = dorn_certificate_check(S, LossMatrix(1 - np.eye(3)), 0, 1, 0.5, 1.0)
        assert chk.status == "excluded" and chk.passed

    def test_negative_arguments(self):
        with pytest.raises(ValueError):
            dorn_certificate_check(identity(2), LossMatrix(1 - np.eye(2)), 0, 1, -0.1, 1.0)


def test_exact_level_of_tree():
    spec = TreeSpec((2, 3), (0.6, 0.4))
    eta, _ = exact_consistency_level(tree_block_basis(spec, 1), tree_loss_matrix(spec))
    assert eta == pytest.approx(0.4, abs=1e-9)
