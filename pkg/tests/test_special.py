from __future__ import annotations

import math
from fractions import Fraction

import pytest

from calibrax.special import FACTORIAL_EXACT_MAX, float_factorial, harmonic


class TestHarmonic:
    @pytest.mark.parametrize("n", [1, 2, 5, 17, 40])
    @pytest.mark.parametrize("m", [1, 2])
    def test_matches_exact_rational(self, n, m):
        exact = sum(Fraction(1, k**m) for k in range(1, n + 1))
        assert harmonic(n, m) == pytest.approx(float(exact), rel=1e-15)

    def test_large_n_against_asymptotics(self):
        n = 10**5
        assert harmonic(n, 1) == pytest.approx(math.log(n) + 0.5772156649015329 + 1 / (2 * n), rel=1e-12)
        assert harmonic(n, 2) == pytest.approx(math.pi**2 / 6 - 1 / n, rel=1e-9)

    @pytest.mark.parametrize("n, m", [(0, 1), (-3, 2), (4, 3)])
    def test_rejects_bad_arguments(self, n, m):
        with pytest.raises(ValueError):
            harmonic(n, m)


class TestFloatFactorial:
    @pytest.mark.parametrize("n", [0, 1, 5, 20, FACTORIAL_EXACT_MAX])
    def test_exact_range(self, n):
        assert float_factorial(n) == float(math.factorial(n))

    def test_warns_beyond_exact_range(self):
        with pytest.warns(RuntimeWarning):
            float_factorial(FACTORIAL_EXACT_MAX + 5)

    def test_overflow_and_negative(self):
        with pytest.raises(OverflowError):
            float_factorial(200)
        with pytest.raises(ValueError):
            float_factorial(-1)
