"""Bounded polynomial bases, series evaluation and coefficient generators.

Coefficients are stored in the un-halved convention F(x) = sum_n c_n B_n(x),
so c_0 is the mean of F against the Chebyshev weight, not twice it.
"""

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.fft import dct

from .errors import ArgumentError, DomainError
from .special import bessel_i_scaled_sequence, bessel_j_sequence

PARITY_RTOL = 1e-13


class Basis(enum.Enum):
    CHEBYSHEV = "chebyshev"
    STRETCHED_MONOMIAL = "stretched_monomial"


class Parity(enum.Enum):
    EVEN = "even"
    ODD = "odd"
    INDEFINITE = "indefinite"


@dataclass(frozen=True)
class PolySeries:
    """Coefficient vector c_0..c_N in a bounded polynomial basis.

    ``delta`` is only meaningful for the stretched-monomial basis, where the
    stored coefficients already carry the (1 - delta)^n factor and the basis
    functions are plain monomials x^n.
    """

    coeffs: np.ndarray
    basis: Basis = Basis.CHEBYSHEV
    parity: Parity = Parity.INDEFINITE
    delta: float | None = None
    label: str = field(default="", compare=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        if c.size == 0:
            raise ArgumentError("a series needs at least one coefficient")
        if self.parity is Parity.EVEN and np.any(c[1::2] != 0.0):
            raise ArgumentError("even series has a nonzero odd coefficient")
        if self.parity is Parity.ODD and np.any(c[0::2] != 0.0):
            raise ArgumentError("odd series has a nonzero even coefficient")
        if self.basis is Basis.STRETCHED_MONOMIAL:
            if self.delta is None or not 0.0 < self.delta < 1.0:
                raise ArgumentError("stretched basis needs delta in (0, 1)")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self):
        return self.coeffs.size - 1

    def __len__(self):
        return self.coeffs.size

    def __call__(self, x):
        return eval_series(self, x)

    def with_coeffs(self, coeffs, parity=None):
        return PolySeries(coeffs, self.basis, self.parity if parity is None else parity,
                          self.delta, self.label)


def _check_domain(x):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0):
        raise DomainError("evaluation point outside [-1, 1]")
    return x


def detect_parity(coeffs, rtol=PARITY_RTOL):
    """Classify coefficients as even/odd/indefinite and zero the noise class.

    A parity class counts as absent when every entry is below
    ``rtol * max|c|``; those entries are then set to exactly zero.
    """
    c = np.array(coeffs, dtype=float)
    scale = np.max(np.abs(c)) if c.size else 0.0
    if scale == 0.0:
        return Parity.EVEN, np.zeros_like(c)
    thresh = rtol * scale
    odd_small = np.all(np.abs(c[1::2]) <= thresh)
    even_small = np.all(np.abs(c[0::2]) <= thresh)
    if odd_small and not even_small:
        c[1::2] = 0.0
        return Parity.EVEN, c
    if even_small and not odd_small:
        c[0::2] = 0.0
        return Parity.ODD, c
    return Parity.INDEFINITE, c


def eval_basis(basis, n, x):
    """Evaluate the n-th basis function at x in [-1, 1]."""
    if n < 0:
        raise ArgumentError(f"degree must be >= 0, got {n}")
    x = _check_domain(x)
    if basis is Basis.CHEBYSHEV:
        return np.cos(n * np.arccos(x))
    if basis is Basis.STRETCHED_MONOMIAL:
        return x**n
    raise ArgumentError(f"unknown basis {basis!r}")


def clenshaw(coeffs, x):
    """Sum c_n T_n(x) by Clenshaw's backward recurrence (vectorised over x)."""
    x = np.asarray(x, dtype=float)
    b1 = np.zeros_like(x)
    b2 = np.zeros_like(x)
    for c in coeffs[:0:-1]:
        b1, b2 = 2.0 * x * b1 - b2 + c, b1
    return x * b1 - b2 + coeffs[0]


def eval_series(s, x):
    """Evaluate a PolySeries at x (scalar or array) in [-1, 1]."""
    x = _check_domain(x)
    if s.basis is Basis.CHEBYSHEV:
        out = clenshaw(s.coeffs, x)
    else:
        out = np.zeros_like(x)
        for c in s.coeffs[::-1]:
            out = out * x + c
    return float(out) if out.ndim == 0 else out


def chebyshev_gauss_nodes(m):
    k = np.arange(m)
    return np.cos(np.pi * (k + 0.5) / m)


def chebyshev_grid(n=2001):
    """Chebyshev-Lobatto points cos(pi k / (n-1)), endpoints included."""
    return np.cos(np.pi * np.arange(n) / (n - 1))


def _sample(f, x):
    try:
        y = np.asarray(f(x), dtype=float)
        if y.shape == x.shape:
            return y
    except (TypeError, ValueError):
        pass
    return np.array([float(f(xi)) for xi in x])


def coeffs_by_quadrature(f, N, label=""):
    """Chebyshev coefficients c_0..c_N of f from Chebyshev-Gauss quadrature.

    Uses M = max(4N, 256) nodes and the type-II DCT, then halves c_0.
    Coefficients under 4 eps max|c| are set to zero.
    """
    if N < 0:
        raise ArgumentError(f"N must be >= 0, got {N}")
    m = max(4 * N, 256)
    nodes = chebyshev_gauss_nodes(m)
    c = dct(_sample(f, nodes), type=2) / m
    c[0] *= 0.5
    # below this the DCT only returns rounding noise, which would fake a flat tail
    c[np.abs(c) < 4 * np.finfo(float).eps * np.max(np.abs(c), initial=0.0)] = 0.0
    parity, c = detect_parity(c[: N + 1])
    return PolySeries(c, Basis.CHEBYSHEV, parity, label=label)


def _require_positive(name, value):
    if not value > 0:
        raise ArgumentError(f"{name} must be > 0, got {value}")


def coeffs_cos(t, N):
    """cos(t x) = J_0(t) + 2 sum_n (-1)^n J_{2n}(t) T_{2n}(x)."""
    _require_positive("t", t)
    if N < 0:
        raise ArgumentError(f"N must be >= 0, got {N}")
    J = bessel_j_sequence(N, t)
    c = np.zeros(N + 1)
    n = np.arange(0, N + 1, 2)
    c[n] = 2.0 * (-1.0) ** (n // 2) * J[n]
    c[0] = J[0]
    return PolySeries(c, Basis.CHEBYSHEV, Parity.EVEN, label=f"cos(t={t:g})")


def coeffs_sin(t, N):
    """sin(t x) = 2 sum_n (-1)^n J_{2n+1}(t) T_{2n+1}(x)."""
    _require_positive("t", t)
    if N < 0:
        raise ArgumentError(f"N must be >= 0, got {N}")
    J = bessel_j_sequence(N, t)
    c = np.zeros(N + 1)
    n = np.arange(1, N + 1, 2)
    c[n] = 2.0 * (-1.0) ** ((n - 1) // 2) * J[n]
    return PolySeries(c, Basis.CHEBYSHEV, Parity.ODD, label=f"sin(t={t:g})")


def coeffs_exp_decay(beta, N):
    """e^{-beta(x+1)} = e^{-beta} [I_0(beta) + 2 sum_n (-1)^n I_n(beta) T_n(x)]."""
    _require_positive("beta", beta)
    if N < 0:
        raise ArgumentError(f"N must be >= 0, got {N}")
    scaled = bessel_i_scaled_sequence(N, beta)
    n = np.arange(N + 1)
    c = 2.0 * (-1.0) ** n * scaled
    c[0] = scaled[0]
    return PolySeries(c, Basis.CHEBYSHEV, Parity.INDEFINITE, label=f"exp_decay(beta={beta:g})")


def _binomial_tail_sums(b):
    # S_n = sum_{m=n+1}^{b} C(2b, b+m) for n = 0..b-1, as exact integers
    row = [math.comb(2 * b, b + m) for m in range(b + 1)]
    sums = [0] * b
    acc = 0
    for n in range(b - 1, -1, -1):
        acc += row[n + 1]
        sums[n] = acc
    return sums


_EXACT_BINOMIAL_MAX_B = 4096


def _inverse_coeff_magnitudes(b):
    if b <= _EXACT_BINOMIAL_MAX_B:
        denom = 1 << (2 * b)
        return np.array([float(Fraction(4 * s, denom)) for s in _binomial_tail_sums(b)])
    # log-domain fallback: log C(2b, b+m) via lgamma, summed with a running log-sum-exp
    logs = np.array([math.lgamma(2 * b + 1) - math.lgamma(b + m + 1) - math.lgamma(b - m + 1)
                     for m in range(b + 1)])
    out = np.empty(b)
    acc = -np.inf
    for n in range(b - 1, -1, -1):
        acc = np.logaddexp(acc, logs[n + 1])
        out[n] = math.exp(math.log(4.0) - 2 * b * math.log(2.0) + acc)
    return out


def coeffs_inverse(b):
    """Odd Chebyshev series of (1 - (1 - x^2)^b) / x, degree 2b - 1."""
    if not isinstance(b, (int, np.integer)) or b < 2 or b % 2:
        raise ArgumentError(f"b must be an even integer >= 2, got {b!r}")
    b = int(b)
    mags = _inverse_coeff_magnitudes(b)
    c = np.zeros(2 * b)
    n = np.arange(b)
    c[2 * n + 1] = (-1.0) ** n * mags
    return PolySeries(c, Basis.CHEBYSHEV, Parity.ODD, label=f"inverse(b={b})")


def coeffs_erf(k, N):
    """Odd Chebyshev series of erf(k x), from integrating the Gaussian's expansion.

    erf(kx) = (2k e^{-k^2/2}/sqrt(pi)) [I_0 x + sum_{n>=1} (-1)^n I_n
              (T_{2n+1}/(2n+1) - T_{2n-1}/(2n-1))], with I_n = I_n(k^2/2).
    Collecting terms, c_{2m+1} = pref (-1)^m (I_m + I_{m+1}) / (2m+1).
    """
    _require_positive("k", k)
    if N < 0:
        raise ArgumentError(f"N must be >= 0, got {N}")
    z = 0.5 * k * k
    m_max = max((N - 1) // 2, 0)
    # e^{-z} I_n(z) absorbs the e^{-k^2/2} prefactor
    scaled = bessel_i_scaled_sequence(m_max + 1, z)
    pref = 2.0 * k / math.sqrt(math.pi)
    c = np.zeros(N + 1)
    for m in range(m_max + 1):
        if 2 * m + 1 > N:
            break
        c[2 * m + 1] = pref * (-1.0) ** m * (scaled[m] + scaled[m + 1]) / (2 * m + 1)
    return PolySeries(c, Basis.CHEBYSHEV, Parity.ODD, label=f"erf(k={k:g})")


def stretch_taylor(coeffs, delta):
    """Monomial coefficients of F((1 - delta) x), i.e. c_n (1 - delta)^n."""
    if not 0.0 < delta < 1.0:
        raise ArgumentError(f"delta must lie in (0, 1), got {delta}")
    c = np.asarray(coeffs, dtype=float)
    if np.any(np.abs(c) > 1.0):
        raise ArgumentError("monomial coefficients must satisfy |c_n| <= 1")
    stretched = c * (1.0 - delta) ** np.arange(c.size)
    parity, stretched = detect_parity(stretched)
    return PolySeries(stretched, Basis.STRETCHED_MONOMIAL, parity, delta=delta)


def truncate(s, t):
    """Keep coefficients 0..t of s."""
    if not 0 <= t <= s.degree:
        raise ArgumentError(f"truncation degree {t} outside [0, {s.degree}]")
    return s.with_coeffs(s.coeffs[: t + 1])


def tail_sum(s, t):
    """sum_{n > t} |c_n|, the sup-norm bound on the truncation error."""
    return float(np.abs(s.coeffs[t + 1:]).sum())


def series_max_norm(s, grid=None):
    grid = chebyshev_grid() if grid is None else grid
    return float(np.max(np.abs(eval_series(s, grid))))
