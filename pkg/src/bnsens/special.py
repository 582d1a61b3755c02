"""Log-gamma helpers that stay accurate for tiny and huge arguments."""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

TINY = 1e-8
STIRLING_MIN = 10.0
# Bernoulli coefficients B_2k / (2k (2k - 1)) of the Stirling series
_STIRLING = (1 / 12, -1 / 360, 1 / 1260, -1 / 1680, 1 / 1188,
             -691 / 360360, 1 / 156, -3617 / 122400)


def log_gamma(x):
    """log Gamma(x) for positive ``x`` (array or scalar).

    For ``x <= 1e-8`` uses ``log Gamma(x + 1) - log x`` to keep full
    relative accuracy near the pole.
    """
    x = np.asarray(x, dtype=float)
    tiny = x <= TINY
    if not np.any(tiny):
        out = gammaln(x)
    else:
        out = np.where(tiny, gammaln(x + 1.0) - np.log(np.where(tiny, x, 1.0)), gammaln(x))
    return out if out.ndim else float(out)


def stirling_tail(x):
    """log Gamma(x) minus its Stirling approximation, for x >= 10."""
    x = np.asarray(x, dtype=float)
    inv = 1.0 / x
    inv2 = inv * inv
    acc = np.zeros_like(x)
    for c in reversed(_STIRLING):
        acc = acc * inv2 + c
    return acc * inv


def log_rising_factorial(a, n):
    """log Gamma(a + n) - log Gamma(a) for ``a > 0`` and integer ``n >= 0``.

    For ``a >= 10`` the difference is formed analytically from Stirling's
    series, so no cancellation between two huge log-gamma values occurs.
    """
    a, n = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(n, dtype=float))
    out = np.zeros(a.shape)
    big = a >= STIRLING_MIN
    small = ~big & (n > 0)
    if np.any(small):
        out[small] = log_gamma(a[small] + n[small]) - log_gamma(a[small])
    big &= n > 0
    if np.any(big):
        ab, nb = a[big], n[big]
        out[big] = ((ab - 0.5) * np.log1p(nb / ab) + nb * np.log(ab + nb) - nb
                    + (stirling_tail(ab + nb) - stirling_tail(ab)))
    return out if out.ndim else float(out)
