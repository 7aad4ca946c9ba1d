"""Geometric envelopes |c_n| <= C e^{-q n} for the tail of a coefficient series."""

import math
from dataclasses import dataclass

import numpy as np

from .chebyshev import Parity
from .errors import ArgumentError, DegenerateFitError, FitError, NoEnvelopeError

ZERO_FLOOR = 1e-30
ENVELOPE_RTOL = 1e-12
_TIE_TOL = 1e-9
MIN_NONZERO = 8


@dataclass(frozen=True)
class DecayModel:
    C: float
    q: float
    n1: int = 0
    n2: int | None = None

    @property
    def log_c_over_q(self):
        return math.log(self.C) / self.q

    def envelope(self, n):
        return self.C * np.exp(-self.q * np.asarray(n, dtype=float))

    def tail_bound(self, t):
        """sum_{n > t} C e^{-q n} = C e^{-q (t+1)} / (1 - e^{-q})."""
        return self.C * math.exp(-self.q * (t + 1)) / -math.expm1(-self.q)

    def to_dict(self):
        return {"C": self.C, "q": self.q, "n1": self.n1, "n2": self.n2}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["C"]), float(d["q"]), int(d.get("n1", 0)), d.get("n2"))


def fit_two_point(s, n1, n2):
    """Envelope C e^{-q n} passing exactly through (n1, |c_n1|) and (n2, |c_n2|)."""
    c = np.abs(s.coeffs)
    if not 0 <= n1 < n2 < c.size:
        raise FitError(f"need 0 <= n1 < n2 < {c.size}, got ({n1}, {n2})")
    if c[n1] == 0.0 or c[n2] == 0.0:
        raise DegenerateFitError(f"zero coefficient at n1={n1} or n2={n2}")
    q = (math.log(c[n1]) - math.log(c[n2])) / (n2 - n1)
    if not q > 0:
        raise FitError(f"pair ({n1}, {n2}) does not decay (q={q:g})")
    C = math.exp(math.log(c[n1]) + q * n1)
    return DecayModel(C, q, int(n1), int(n2))


def validate_envelope(s, m):
    """Check |c_n| <= C e^{-q n} (1 + 1e-12) for every n >= n1.

    Magnitudes under the 1e-30 zero floor count as structural zeros.
    Returns (ok, first_violation) with first_violation None when ok.
    The comparison is done on logarithms so deep tails never underflow.
    """
    c = np.abs(s.coeffs)
    n = np.arange(m.n1, c.size)
    tail = c[m.n1:]
    live = tail >= ZERO_FLOOR
    if not np.any(live):
        return True, None
    lhs = np.log(tail[live])
    rhs = math.log(m.C) - m.q * n[live] + math.log1p(ENVELOPE_RTOL)
    bad = np.nonzero(lhs > rhs)[0]
    if bad.size:
        return False, int(n[live][bad[0]])
    return True, None


def _support(s):
    idx = np.arange(len(s))
    if s.parity is Parity.EVEN:
        idx = idx[0::2]
    elif s.parity is Parity.ODD:
        idx = idx[1::2]
    mags = np.abs(s.coeffs[idx])
    keep = mags >= ZERO_FLOOR
    return idx[keep], np.log(mags[keep])


def candidate_models(s, d_max=None):
    """All valid two-point envelopes as arrays (n1, n2, C, q, logC/q).

    A pair is valid when the line through it in (n, log|c|) space lies on or
    above every later supported point, so validity reduces to the fitted slope
    not exceeding the smallest slope from n1 to any later point.
    """
    idx, logs = _support(s)
    limit = len(s) - 1 if d_max is None else min(int(d_max), len(s) - 1)
    tol = math.log1p(ENVELOPE_RTOL)
    rows = []
    for i in range(idx.size - 1):
        n_later = idx[i + 1:]
        dn = (n_later - idx[i]).astype(float)
        slopes = (logs[i] - logs[i + 1:]) / dn
        q_cap = np.min((logs[i] - logs[i + 1:] + tol) / dn)
        ok = (slopes > 0) & (slopes <= q_cap) & (n_later <= limit)
        for k in np.nonzero(ok)[0]:
            q = slopes[k]
            log_c = logs[i] + q * idx[i]
            rows.append((int(idx[i]), int(n_later[k]), log_c, q))
    return rows


def select_model(s, d_max=None):
    """Valid envelope minimising log(C)/q.

    Exhaustive over pairs of supported indices; ties (within 1e-9) go to the
    smaller n1, then the smaller q.
    """
    if np.count_nonzero(s.coeffs) < MIN_NONZERO:
        raise ArgumentError(f"need at least {MIN_NONZERO} nonzero coefficients")
    idx, _ = _support(s)
    if idx.size < 2:
        raise NoEnvelopeError("fewer than two coefficients above the zero floor")
    rows = candidate_models(s, d_max)
    if not rows:
        raise NoEnvelopeError("no coefficient pair gives a decaying envelope over its tail")
    scores = np.array([log_c / q for _, _, log_c, q in rows])
    best = scores.min()
    tied = [r for r, v in zip(rows, scores) if v <= best + _TIE_TOL * max(1.0, abs(best))]
    n1, n2, log_c, q = min(tied, key=lambda r: (r[0], r[3]))
    model = fit_two_point(s, n1, n2)
    ok, bad = validate_envelope(s, model)
    if not ok:
        raise NoEnvelopeError(f"selected envelope fails at n={bad}")
    return model
