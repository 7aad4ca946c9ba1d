"""Self-check suite: every module property evaluated on small fixed inputs.

Each check returns (passed, detail). ``run_suite(inject=...)`` swaps in a
deliberately broken routine so that the suite can be shown to catch it.
"""

import contextlib
import math

import numpy as np

from . import chebyshev as cheb
from .chebyshev import (Parity, PolySeries, chebyshev_grid, coeffs_by_quadrature, coeffs_cos,
                        coeffs_erf, coeffs_exp_decay, coeffs_inverse, coeffs_sin, eval_series)
from .decay import select_model, validate_envelope
from .ensemble import (average_poly, avg_degree_bound_ceil, build, ensemble_errors, truncate)
from .operators import (apply_poly, channel_experiment, conjugation_distance, eigen_apply,
                        random_hermitian, spectral_norm, validate_mixing_lemma)
from .qsp import extract_poly, find_phases, round_trip_error, verify_conditions
from .special import bessel_i_scaled_sequence, bessel_i_series, bessel_j_sequence, bessel_j_series


def geometric_series(q=1.0, n=80, normalized=True):
    scale = -math.expm1(-q) if normalized else 1.0
    return PolySeries(scale * np.exp(-q * np.arange(n)), label=f"geometric(q={q:g})")


def _families():
    return [
        ("cos", coeffs_cos(10.0, 260)),
        ("sin", coeffs_sin(6.0, 200)),
        ("exp_decay", coeffs_exp_decay(4.0, 200)),
        ("erf", coeffs_erf(4.0, 200)),
        ("geometric", geometric_series()),
    ]


def check_bessel():
    worst = 0.0
    for x in (0.5, 3.0, 12.0):
        j = bessel_j_sequence(20, x)
        i = bessel_i_scaled_sequence(20, x)
        for n in range(21):
            worst = max(worst, abs(j[n] - bessel_j_series(n, x)) / max(abs(j[n]), 1e-300),
                        abs(i[n] - math.exp(-x) * bessel_i_series(n, x)) / i[n])
    return worst < 1e-10, f"max rel diff {worst:.2e}"


def check_generators():
    worst = 0.0
    cases = [(coeffs_cos(3.0, 40), lambda x: np.cos(3.0 * x)),
             (coeffs_sin(3.0, 40), lambda x: np.sin(3.0 * x)),
             (coeffs_exp_decay(2.0, 40), lambda x: np.exp(-2.0 * (x + 1))),
             (coeffs_inverse(8), lambda x: (1 - (1 - x * x) ** 8) / np.where(x == 0, 1, x))]
    for s, f in cases:
        q = coeffs_by_quadrature(f, s.degree)
        worst = max(worst, float(np.max(np.abs(q.coeffs - s.coeffs))))
    return worst < 1e-9, f"max coeff diff {worst:.2e}"


def check_clenshaw():
    rng = np.random.default_rng(11)
    c = rng.normal(size=30)
    x = chebyshev_grid(301)
    direct = np.cos(np.outer(np.arccos(x), np.arange(30))) @ c
    err = float(np.max(np.abs(eval_series(PolySeries(c), x) - direct)))
    return err < 1e-12, f"max diff {err:.2e}"


def check_envelopes():
    bad = []
    for name, s in _families():
        m = select_model(s)
        ok, _ = validate_envelope(s, m)
        if not ok:
            bad.append(name)
    return not bad, "all valid" if not bad else f"invalid: {bad}"


def _ensembles():
    for name, s in _families():
        m = select_model(s)
        for d in (12, 24, 40):
            yield name, s, d, build(s, d, m)


def check_average():
    worst = 0.0
    for _, s, d, e in _ensembles():
        worst = max(worst, float(np.max(np.abs(average_poly(e).coeffs - truncate(s, d).coeffs))))
    return worst <= 1e-12, f"max diff {worst:.2e}"


def check_probabilities():
    for name, _, d, e in _ensembles():
        if e.degenerate:
            continue
        p = e.probs
        if abs(p.sum() - 1) > 1e-12 or np.any(p <= 0):
            return False, f"{name} d={d}: bad probabilities"
        if any(not e.d_star < t.degree <= e.d for t in e.terms):
            return False, f"{name} d={d}: degree out of range"
    return True, "ok"


def check_parity():
    for name, s, d, e in _ensembles():
        for _, poly in e.members():
            c = poly.coeffs
            if s.parity is Parity.EVEN and np.any(c[1::2]):
                return False, f"{name} d={d}"
            if s.parity is Parity.ODD and np.any(c[0::2]):
                return False, f"{name} d={d}"
            if poly.parity is not s.parity:
                return False, f"{name} d={d}: tag"
    return True, "ok"


def check_avg_degree():
    for name, _, d, e in _ensembles():
        if e.certified and e.d_avg > avg_degree_bound_ceil(e.model, d) + 1e-9:
            return False, f"{name} d={d}"
    return True, "ok"


def check_poly_errors():
    for name, s, d, e in _ensembles():
        if e.degenerate or len(s) < d + 40 / e.model.q:
            continue
        r = ensemble_errors(e)
        if not (r.a_ok and r.b_ok):
            return False, f"{name} d={d}: a={r.a_poly:.3g} b={r.b_poly:.3g}"
    return True, "ok"


def check_qsp_structure():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(40):
        d = int(rng.integers(0, 21))
        r = verify_conditions(rng.uniform(-math.pi, math.pi, d + 1))
        worst = max(worst, r.degree_violation, r.parity_violation, r.normalization_violation)
    return worst < 1e-9, f"max violation {worst:.2e}"


def check_zero_phases():
    x = chebyshev_grid(201)
    worst = max(float(np.max(np.abs(extract_poly(np.zeros(d + 1), x) - np.cos(d * np.arccos(x)))))
                for d in range(0, 51, 5))
    return worst < 1e-12, f"max diff {worst:.2e}"


def check_phase_round_trip():
    c = np.array(coeffs_cos(3.0, 30).coeffs[:15]) * 0.99
    target = PolySeries(c, parity=Parity.EVEN)
    err = round_trip_error(find_phases(target, tol=1e-10), target)
    return err < 1e-8, f"grid error {err:.2e}"


def check_apply_poly():
    a = random_hermitian(6, 3)
    s = truncate(coeffs_cos(2.0, 40), 25)
    err = spectral_norm(apply_poly(a, s, check=False) - eigen_apply(a, s))
    return err < 1e-9, f"spectral diff {err:.2e}"


def check_rotation_mixture():
    th = 0.1
    x = np.array([[0, 1], [1, 0]])
    up = math.cos(th) * np.eye(2) + 1j * math.sin(th) * x
    rep = validate_mixing_lemma([up, up.conj()], [0.5, 0.5], np.eye(2), mode="unitary")
    ok = (abs(rep.a - 2 * math.sin(th / 2)) < 1e-12 and abs(rep.b - (1 - math.cos(th))) < 1e-12
          and rep.bound_satisfied)
    return ok, f"measured {rep.measured:.3e} bound/2 {rep.mixing_bound / 2:.3e}"


def check_channel_bound():
    s = geometric_series()
    m = select_model(s)
    worst = 0.0
    for k, dim in enumerate((4, 8)):
        e = build(s, 10 + 2 * k, m)
        rep = channel_experiment(e, random_hermitian(dim, 20 + k))
        if not (rep.bound_satisfied and rep.extra["three_eps_ok"]):
            return False, f"dim={dim}"
        worst = max(worst, rep.measured / (3 * e.epsilon))
    return True, f"max measured/(3 eps) {worst:.3f}"


def check_spectral_chain():
    rng = np.random.default_rng(8)
    for _ in range(20):
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        b = a + 0.1 * (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
        a /= spectral_norm(a)
        b /= spectral_norm(b)
        if conjugation_distance(a, b) > spectral_norm(a - b) + 1e-9:
            return False, "chain violated"
    return True, "ok"


CHECKS = [
    ("bessel_recurrence_vs_series", check_bessel),
    ("generators_vs_quadrature", check_generators),
    ("clenshaw_vs_direct_sum", check_clenshaw),
    ("envelope_self_consistency", check_envelopes),
    ("average_equals_truncation", check_average),
    ("probabilities_and_degrees", check_probabilities),
    ("parity_closure", check_parity),
    ("average_degree_bound", check_avg_degree),
    ("member_and_mean_errors", check_poly_errors),
    ("qsp_structure", check_qsp_structure),
    ("zero_phases_chebyshev", check_zero_phases),
    ("phase_round_trip", check_phase_round_trip),
    ("clenshaw_vs_eigen_operator", check_apply_poly),
    ("rotation_mixture_closed_form", check_rotation_mixture),
    ("channel_bound_three_eps", check_channel_bound),
    ("spectral_diamond_chain", check_spectral_chain),
]


def _broken_clenshaw(coeffs, x):
    x = np.asarray(x, dtype=float)
    b1 = np.zeros_like(x)
    b2 = np.zeros_like(x)
    for c in coeffs[:0:-1]:
        b1, b2 = 2.0 * x * b1 + b2 + c, b1  # sign error in the recurrence
    return x * b1 - b2 + coeffs[0]


FAULTS = {"clenshaw": (cheb, "clenshaw", _broken_clenshaw)}


@contextlib.contextmanager
def injected(name):
    if name is None:
        yield
        return
    if name not in FAULTS:
        raise KeyError(f"unknown fault {name!r}")
    module, attr, repl = FAULTS[name]
    saved = getattr(module, attr)
    setattr(module, attr, repl)
    try:
        yield
    finally:
        setattr(module, attr, saved)


def run_suite(inject=None):
    """Run every check; returns a list of (name, passed, detail)."""
    rows = []
    with injected(inject):
        for name, fn in CHECKS:
            try:
                ok, detail = fn()
            except Exception as exc:  # a crashing check is a failing check
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            rows.append((name, bool(ok), detail))
    return rows


def format_table(rows):
    width = max(len(r[0]) for r in rows)
    lines = [f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}" for name, ok, detail in rows]
    return "\n".join(lines)
