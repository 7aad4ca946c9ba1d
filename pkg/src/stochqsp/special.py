"""Bessel functions of integer order, computed in double precision.

Two routes are provided. The power series is accurate for small orders and
moderate arguments. Miller's downward recurrence produces a whole sequence
J_0..J_N (or e^{-x} I_0..I_N) at once and stays accurate for every order,
including orders where the value is hundreds of decades below J_0.
"""

import math

import numpy as np

from .errors import ArgumentError

_SERIES_MAX_ORDER = 30
_RESCALE = 1e250


def _power_series(n, x, sign):
    if n < 0:
        raise ArgumentError(f"order must be >= 0, got {n}")
    if x == 0.0:
        return 1.0 if n == 0 else 0.0
    half = 0.5 * x
    log_first = n * math.log(abs(half)) - math.lgamma(n + 1)
    term = math.exp(log_first)
    if half < 0 and n % 2:
        term = -term
    total = term
    h2 = half * half
    m = 0
    while True:
        term *= sign * h2 / ((m + 1) * (m + 1 + n))
        total += term
        m += 1
        # past the peak of the term magnitudes and below double resolution
        if m > half and abs(term) <= 1e-16 * abs(total):
            break
        if m > 10_000:
            break
    return total


def bessel_j_series(n, x):
    """J_n(x) from the power series sum_m (-1)^m (x/2)^(2m+n) / (m! (m+n)!)."""
    return _power_series(int(n), float(x), -1.0)


def bessel_i_series(n, x):
    """I_n(x) from the power series sum_m (x/2)^(2m+n) / (m! (m+n)!)."""
    return _power_series(int(n), float(x), 1.0)


def _miller_start(n_max, x):
    top = max(n_max, int(math.ceil(abs(x))))
    m = top + 20 + int(math.sqrt(40.0 * max(top, 1)))
    return m + (m % 2)


def bessel_j_sequence(n_max, x):
    """Return [J_0(x), ..., J_{n_max}(x)] by Miller's downward recurrence.

    Normalised with the identity J_0 + 2 * sum_k J_{2k} = 1.
    """
    n_max = int(n_max)
    if n_max < 0:
        raise ArgumentError(f"n_max must be >= 0, got {n_max}")
    x = float(x)
    out = np.zeros(n_max + 1)
    if x == 0.0:
        out[0] = 1.0
        return out
    if x < 0:
        seq = bessel_j_sequence(n_max, -x)
        seq[1::2] *= -1.0
        return seq
    m = _miller_start(n_max, x)
    vals = np.zeros(m + 2)
    vals[m] = 1e-300
    two_over_x = 2.0 / x
    for k in range(m, 0, -1):
        vals[k - 1] = k * two_over_x * vals[k] - vals[k + 1]
        if abs(vals[k - 1]) > _RESCALE:
            vals[k - 1:] /= _RESCALE
    norm = vals[0] + 2.0 * vals[2::2].sum()
    vals /= norm
    out[:] = vals[: n_max + 1]
    return out


def bessel_i_scaled_sequence(n_max, x):
    """Return [e^{-x} I_0(x), ..., e^{-x} I_{n_max}(x)] for x > 0.

    Downward recurrence normalised with e^{-x} (I_0 + 2 sum_k I_k) = 1, so the
    exponentially large factor never has to be formed.
    """
    n_max = int(n_max)
    if n_max < 0:
        raise ArgumentError(f"n_max must be >= 0, got {n_max}")
    x = float(x)
    if x <= 0:
        raise ArgumentError(f"argument must be > 0, got {x}")
    m = _miller_start(n_max, x)
    vals = np.zeros(m + 2)
    vals[m] = 1e-300
    two_over_x = 2.0 / x
    for k in range(m, 0, -1):
        vals[k - 1] = k * two_over_x * vals[k] + vals[k + 1]
        if vals[k - 1] > _RESCALE:
            vals[k - 1:] /= _RESCALE
    norm = vals[0] + 2.0 * vals[1:].sum()
    vals /= norm
    return vals[: n_max + 1].copy()


def bessel_j(n, x):
    """J_n(x): power series up to order 30, Miller's recurrence above."""
    n = int(n)
    if n <= _SERIES_MAX_ORDER and abs(x) <= 20.0:
        return bessel_j_series(n, x)
    return float(bessel_j_sequence(n, x)[n])


def bessel_i_scaled(n, x):
    """e^{-x} I_n(x) for x > 0."""
    n = int(n)
    if n <= _SERIES_MAX_ORDER and x <= 20.0:
        return math.exp(-x) * bessel_i_series(n, x)
    return float(bessel_i_scaled_sequence(n, x)[n])
