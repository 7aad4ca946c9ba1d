"""Randomised polynomial ensembles whose average is a degree-d truncation.

Given coefficients with a geometric envelope C e^{-q n}, the cutoff d* is the
smallest degree whose truncation error is at most sqrt(eps(d)). Each ensemble
member is the degree-d* truncation plus one rescaled higher term
(c_{d*+j} / p_j) B_{d*+j}, drawn with probability p_j proportional to
|c_{d*+j}|. Members err by at most 2 sqrt(eps) while their mean errs by eps.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .chebyshev import Basis, Parity, PolySeries, chebyshev_grid, eval_series, truncate
from .decay import DecayModel, validate_envelope
from .errors import ArgumentError, DegenerateEnsembleError, PrecisionError

FORMAT_NAME = "stochqsp.ensemble"
FORMAT_VERSION = 1


def epsilon_of(m, d):
    """Truncation error bound C e^{-q d} / (1 - e^{-q})."""
    return m.C * math.exp(-m.q * d) / -math.expm1(-m.q)


def _log_epsilon(m, t):
    return math.log(m.C) - m.q * t - math.log(-math.expm1(-m.q))


def cutoff_offset(m):
    """log(C)/(2q) - log(1 - e^{-q})/(2q), the O(1) shift of d* above d/2."""
    return (math.log(m.C) - math.log(-math.expm1(-m.q))) / (2.0 * m.q)


def _ceil_cutoff(m, d):
    y = d / 2.0 + cutoff_offset(m)
    return max(0, math.ceil(y - 1e-12 * max(1.0, abs(y))))


def cutoff_degree(m, d):
    """Smallest d* >= 0 with (C e^{-q d*}/(1 - e^{-q}))^2 <= eps(d).

    A very small C can push the ceiling expression below zero; it is clamped
    at 0, which only tightens the member error. Raises DegenerateEnsembleError when d* >= d; the computed value rides on
    the exception as ``d_star``.
    """
    if d < 2:
        raise ArgumentError(f"target degree must be >= 2, got {d}")
    d_star = _ceil_cutoff(m, d)
    # defining property, checked on logs: 2 log eps(d*) <= log eps(d) < 2 log eps(d*-1)
    log_eps_d = _log_epsilon(m, d)
    slack = 1e-9 * max(1.0, abs(log_eps_d))
    assert 2 * _log_epsilon(m, d_star) <= log_eps_d + slack
    if d_star > 0:
        assert 2 * _log_epsilon(m, d_star - 1) > log_eps_d - slack
    if d_star >= d:
        err = DegenerateEnsembleError(f"cutoff degree {d_star} >= target degree {d}")
        err.d_star = d_star
        raise err
    return d_star


def avg_degree_bound(m, d):
    """Closed-form bound d/2 + offset + 1/2 + 1/(1 - e^{-q}) on the average degree."""
    return d / 2.0 + cutoff_offset(m) + 0.5 + 1.0 / -math.expm1(-m.q)


def avg_degree_bound_ceil(m, d):
    """The same bound before the ceiling is relaxed: d* + 1/(1 - e^{-q}).

    The relaxation ceil(y) <= y + 1/2 used by the closed form does not hold
    in general, so this is the form checked against realised d_avg. It still
    assumes the sampled weights follow the envelope: a parity source whose
    first tail coefficient vanishes puts all weight on j >= 2 and can exceed it.
    """
    return _ceil_cutoff(m, d) + 1.0 / -math.expm1(-m.q)


def ratio_bound(m, d):
    """(1/2)(1 + log C/(qd) - log(1-e^{-q})/(qd) + 1/d + 2/((1-e^{-q}) d))."""
    return avg_degree_bound(m, d) / d


def ratio_bound_ceil(m, d):
    return avg_degree_bound_ceil(m, d) / d


def ratio_approx(m, d):
    """Leading behaviour (1/2)(1 + log C / (q d))."""
    return 0.5 * (1.0 + math.log(m.C) / (m.q * d))


@dataclass(frozen=True)
class Term:
    j: int
    degree: int
    coeff: float
    prob: float
    phases: tuple | None = None


@dataclass(frozen=True)
class StochasticEnsemble:
    source: PolySeries
    d: int
    d_star: int
    epsilon: float
    terms: tuple
    d_avg: float
    base: PolySeries
    model: DecayModel
    degenerate: bool = False
    _cdf: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        probs = np.array([t.prob for t in self.terms]) if self.terms else np.ones(1)
        cdf = np.cumsum(probs)
        cdf.setflags(write=False)
        object.__setattr__(self, "_cdf", cdf)

    @property
    def probs(self):
        return np.array([t.prob for t in self.terms])

    @property
    def certified(self):
        """True when the envelope covers every sampled degree (n1 <= d* + 1).

        The degree and error bounds are only guaranteed in that case.
        """
        return self.model.n1 <= self.d_star + 1

    @property
    def parity(self):
        return self.source.parity

    def member(self, index):
        """Polynomial P_j for the term at position ``index`` of ``terms``."""
        if self.degenerate:
            return self.base
        t = self.terms[index]
        c = np.zeros(t.degree + 1)
        c[: self.d_star + 1] = self.base.coeffs
        c[t.degree] += t.coeff / t.prob
        return self.source.with_coeffs(c)

    def members(self):
        """List of (probability, polynomial) pairs; one certain member if degenerate."""
        if self.degenerate:
            return [(1.0, self.base)]
        return [(t.prob, self.member(i)) for i, t in enumerate(self.terms)]

    def with_phases(self, phase_sets):
        terms = tuple(Term(t.j, t.degree, t.coeff, t.prob, tuple(map(float, ph)))
                      for t, ph in zip(self.terms, phase_sets))
        return StochasticEnsemble(self.source, self.d, self.d_star, self.epsilon, terms,
                                  self.d_avg, self.base, self.model, self.degenerate)


def _degenerate(source, d, d_star, m):
    base = truncate(source, d)
    return StochasticEnsemble(source, d, d_star, epsilon_of(m, d), (), float(d), base, m,
                              degenerate=True)


def build(source, d, m, check_envelope=True):
    """Construct the stochastic ensemble for target degree d.

    Falls back to the deterministic degree-d truncation (``degenerate=True``,
    d_avg = d) when d* >= d or every tail coefficient in (d*, d] is zero.
    """
    if d < 2:
        raise ArgumentError(f"target degree must be >= 2, got {d}")
    if len(source) <= d:
        raise ArgumentError(f"source has degree {source.degree}, need more than {d}")
    if check_envelope:
        ok, bad = validate_envelope(source, m)
        if not ok:
            raise ArgumentError(f"decay model is violated at n={bad}")
    try:
        d_star = cutoff_degree(m, d)
    except DegenerateEnsembleError as exc:
        return _degenerate(source, d, exc.d_star, m)
    tail = source.coeffs[d_star + 1: d + 1]
    mags = np.abs(tail)
    total = mags.sum()
    if total == 0.0:
        return _degenerate(source, d, d_star, m)
    terms = tuple(Term(j, d_star + j, float(tail[j - 1]), float(mags[j - 1] / total))
                  for j in range(1, d - d_star + 1) if tail[j - 1] != 0.0)
    d_avg = d_star + sum(t.j * t.prob for t in terms)
    return StochasticEnsemble(source, d, d_star, epsilon_of(m, d), terms, float(d_avg),
                              truncate(source, d_star), m)


def average_poly(e):
    """Coefficientwise sum_j p_j P_j; equals the degree-d truncation."""
    if e.degenerate:
        return e.base
    c = np.zeros(e.d + 1)
    for p, poly in e.members():
        c[: len(poly)] += p * poly.coeffs
    return e.source.with_coeffs(c)


@dataclass(frozen=True)
class PolyErrorReport:
    a_poly: float
    b_poly: float
    a_bound: float
    b_bound: float
    tail: float

    @property
    def a_ok(self):
        return self.a_poly <= self.a_bound

    @property
    def b_ok(self):
        return self.b_poly <= self.b_bound


def ensemble_errors(e, grid=None):
    """Sup-norm errors of the members (a) and of their mean (b) against F.

    F is the full stored source; its own truncation error beyond the stored
    length, bounded by the envelope tail, widens the tolerance.
    """
    grid = chebyshev_grid(2001) if grid is None else np.asarray(grid, dtype=float)
    if grid.size < 1001:
        raise ArgumentError("grid needs at least 1001 points")
    m = e.model
    needed = e.d + 40.0 / m.q
    if len(e.source) < needed:
        raise PrecisionError(f"source length {len(e.source)} < d + 40/q = {needed:.1f}")
    tail = m.tail_bound(e.source.degree)
    f = eval_series(e.source, grid)
    a = max(float(np.max(np.abs(eval_series(p, grid) - f))) for _, p in e.members())
    b = float(np.max(np.abs(eval_series(average_poly(e), grid) - f)))
    eps = e.epsilon
    return PolyErrorReport(a, b, 2 * math.sqrt(eps) + 1e-9 + tail, eps + 1e-9 + tail, tail)


def cost_ratio(e):
    return e.d_avg / e.d


def geometric_mean_bound(e):
    """Mean of j under the truncated geometric law p~_j ~ e^{-q j}, j = 1..d-d*."""
    if e.degenerate:
        return float(e.d - e.d_star) if e.d_star < e.d else 0.0
    j = np.arange(1, e.d - e.d_star + 1)
    w = np.exp(-e.model.q * (j - 1))
    return float((j * w).sum() / w.sum())


def sample(e, rng, size=None):
    """Draw term indices (positions in ``e.terms``) by inverse CDF."""
    u = rng.random(size)
    idx = np.searchsorted(e._cdf, u * e._cdf[-1], side="right")
    idx = np.minimum(idx, len(e._cdf) - 1)
    return int(idx) if size is None else idx


def sample_degree(e, rng, size=None):
    if e.degenerate:
        return e.d if size is None else np.full(size, e.d)
    degrees = np.array([t.degree for t in e.terms])
    return degrees[sample(e, rng, size)]


def to_json(e, indent=None):
    """Versioned JSON document describing the ensemble."""
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "basis": e.source.basis.value,
        "delta": e.source.delta,
        "parity": e.source.parity.value,
        "label": e.source.label,
        "coeffs": [float(c) for c in e.source.coeffs],
        "d": e.d,
        "d_star": e.d_star,
        "epsilon": e.epsilon,
        "d_avg": e.d_avg,
        "degenerate": e.degenerate,
        "model": e.model.to_dict(),
        "terms": [
            {"j": t.j, "degree": t.degree, "coeff": t.coeff, "prob": t.prob,
             **({"phases": list(t.phases)} if t.phases is not None else {})}
            for t in e.terms
        ],
    }
    return json.dumps(doc, indent=indent)


def from_json(text):
    doc = json.loads(text)
    if doc.get("format") != FORMAT_NAME:
        raise ArgumentError("not an ensemble document")
    if doc.get("version") != FORMAT_VERSION:
        raise ArgumentError(f"unsupported ensemble version {doc.get('version')}")
    source = PolySeries(np.array(doc["coeffs"]), Basis(doc["basis"]), Parity(doc["parity"]),
                        doc.get("delta"), doc.get("label", ""))
    model = DecayModel.from_dict(doc["model"])
    d, d_star = int(doc["d"]), int(doc["d_star"])
    terms = tuple(Term(int(t["j"]), int(t["degree"]), float(t["coeff"]), float(t["prob"]),
                       tuple(t["phases"]) if "phases" in t else None) for t in doc["terms"])
    base = truncate(source, d if doc["degenerate"] else d_star)
    return StochasticEnsemble(source, d, d_star, float(doc["epsilon"]), terms,
                              float(doc["d_avg"]), base, model, bool(doc["degenerate"]))
