from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from calibrax.matrixcore import (Projector, as_matrix, gram_pseudoinverse, numerical_rank, orthonormal_basis,
                                 project)

from oracles import projector


def _basis(rng, k, d, rank):
    return rng.normal(size=(k, rank)) @ rng.normal(size=(rank, d))


class TestAsMatrix:
    def test_vector_becomes_column(self):
        assert as_matrix([1.0, 2.0]).shape == (2, 1)

    @pytest.mark.parametrize("bad", [[], [[np.nan]], [[np.inf, 1.0]], np.zeros((2, 2, 2))])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            as_matrix(bad)


class TestProjector:
    @pytest.mark.parametrize("k, d, rank", [(5, 3, 3), (6, 4, 2), (4, 4, 4), (7, 5, 1)])
    def test_matches_pinv_projector(self, k, d, rank):
        F = _basis(np.random.default_rng(k * d + rank), k, d, rank)
        P = Projector.from_basis(F)
        assert np.allclose(P.matrix(), projector(F), atol=1e-10)

    @pytest.mark.parametrize("seed", range(5))
    def test_idempotent_symmetric(self, seed):
        rng = np.random.default_rng(seed)
        F = _basis(rng, 6, 4, 3)
        P = Projector.from_basis(F).matrix()
        assert np.allclose(P @ P, P, atol=1e-10)
        assert np.allclose(P, P.T, atol=1e-12)
        assert np.trace(P) == pytest.approx(3.0, abs=1e-9)

    def test_apply_and_project_agree(self):
        rng = np.random.default_rng(3)
        F = rng.normal(size=(5, 2))
        P = Projector.from_basis(F)
        x = rng.normal(size=5)
        assert np.allclose(project(P, x), P.matrix() @ x)
        with pytest.raises(ValueError):
            P.apply(np.ones(4))

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.float64, (5, 3), elements=st.floats(-10, 10)))
    def test_projection_fixes_span(self, F):
        if np.linalg.matrix_rank(F) == 0:
            return
        P = Projector.from_basis(F)
        assert np.allclose(P.apply(F), F, atol=1e-7 * max(1.0, np.abs(F).max()))


class TestBasisHelpers:
    @pytest.mark.parametrize("rank", [1, 2, 3])
    def test_orthonormal_basis_spans_columns(self, rank):
        F = _basis(np.random.default_rng(rank), 6, 4, rank)
        U = orthonormal_basis(F)
        assert U.shape == (6, rank)
        assert np.allclose(U.T @ U, np.eye(rank), atol=1e-12)
        assert np.allclose(U @ U.T, projector(F), atol=1e-10)

    def test_rank_and_gram_pinv(self):
        F = _basis(np.random.default_rng(9), 7, 5, 3)
        assert numerical_rank(F) == 3
        G = gram_pseudoinverse(F)
        assert np.allclose(G, np.linalg.pinv(F.T @ F), atol=1e-8)

    def test_zero_matrix(self):
        assert numerical_rank(np.zeros((3, 2))) == 0
        assert orthonormal_basis(np.zeros((3, 2))).shape == (3, 0)
