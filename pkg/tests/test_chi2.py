import math

import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from subsetpriv import chi2_sf


def chi2_sf_oracle(x: float, df: int) -> float:
    """Adaptive quadrature of the chi-square density, independent of the
    series/continued-fraction implementation under test.

    Integrates whichever side of ``x`` is shorter: the head integral uses
    the substitution t = u*u, which removes the df=1 endpoint singularity
    and keeps the quadrature error certificate tight.
    """
    if x == 0:
        return 1.0
    norm = 2 ** (df / 2) * math.gamma(df / 2)

    if x < df:
        def head(u):  # density(u^2) * 2u
            return 2.0 * u ** (df - 1) * math.exp(-u * u / 2) / norm

        value, err = integrate.quad(head, 0.0, math.sqrt(x), epsabs=1e-13, epsrel=1e-12, limit=400)
        assert err < 1e-11
        return 1.0 - value

    def density(t):
        return t ** (df / 2 - 1) * math.exp(-t / 2) / norm

    # integrate to a cutoff where the remaining tail is below 1e-20
    far = max(x, 2.0 * df) + 140.0
    value, err = integrate.quad(density, x, far, epsabs=1e-13, epsrel=1e-12, limit=400)
    assert err < 1e-11
    return value


class TestChi2Sf:
    def test_at_zero(self):
        for df in (1, 2, 5, 17, 50):
            assert chi2_sf(0.0, df) == 1.0

    def test_classic_quantile(self):
        # 95th percentile of one degree of freedom sits at 3.841
        assert abs(chi2_sf(3.841, 1) - 0.05) <= 1e-4

    def test_deep_tail(self):
        assert chi2_sf(100, 1) < 1e-20

    def test_huge_argument(self):
        assert chi2_sf(1519, 1) < 1e-10
        assert chi2_sf(5000, 4) == 0.0   # underflows cleanly

    def test_grid_against_quadrature(self):
        # 50 (x, df) combinations spanning both evaluation branches
        xs = [0.1, 0.5, 1.0, 2.0, 3.841, 5.0, 8.0, 15.0, 30.0, 60.0]
        dfs = [1, 2, 5, 12, 36]
        checked = 0
        for df in dfs:
            for x in xs:
                assert chi2_sf(x, df) == pytest.approx(chi2_sf_oracle(x, df), abs=1e-9)
                checked += 1
        assert checked == 50

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            chi2_sf(-1.0, 3)
        with pytest.raises(ValueError):
            chi2_sf(1.0, 0)

    @given(st.floats(0, 200), st.integers(1, 60))
    def test_in_unit_interval(self, x, df):
        value = chi2_sf(x, df)
        assert 0.0 <= value <= 1.0

    @given(st.integers(1, 40), st.floats(0.01, 80), st.floats(0.01, 20))
    def test_monotone_decreasing(self, df, x, bump):
        assert chi2_sf(x + bump, df) <= chi2_sf(x, df) + 1e-12
