"""Chi-square tail probabilities via the regularized incomplete gamma.

Small arguments use the lower-gamma power series, large arguments the
upper-gamma continued fraction (modified Lentz evaluation), giving
absolute error well below 1e-10 across the ranges exercised here.
"""

from __future__ import annotations

import math

_MAX_ITER = 500
_EPS = 1e-16
_TINY = 1e-300


def _lower_regularized_series(a: float, x: float) -> float:
    """P(a, x) by series; reliable for x < a + 1."""
    if x <= 0:
        return 0.0
    term = 1.0 / a
    total = term
    denom = a
    for _ in range(_MAX_ITER):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    log_prefix = a * math.log(x) - x - math.lgamma(a)
    return total * math.exp(log_prefix)


def _upper_regularized_cf(a: float, x: float) -> float:
    """Q(a, x) by continued fraction; reliable for x >= a + 1."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    log_prefix = a * math.log(x) - x - math.lgamma(a)
    # prefix underflows only deep in the tail, where the answer is ~0
    try:
        prefix = math.exp(log_prefix)
    except OverflowError:
        return 0.0
    return prefix * h


def chi2_sf(x: float, df: int) -> float:
    """P(chi-square with ``df`` degrees of freedom exceeds ``x``)."""
    x = float(x)
    df = int(df)
    if df <= 0:
        raise ValueError(f"degrees of freedom must be positive, got {df}")
    if x < 0:
        raise ValueError(f"chi-square statistic must be nonnegative, got {x}")
    if x == 0.0:
        return 1.0
    a = 0.5 * df
    z = 0.5 * x
    if x < df + 1:
        sf = 1.0 - _lower_regularized_series(a, z)
    else:
        sf = _upper_regularized_cf(a, z)
    return min(1.0, max(0.0, sf))
