"""The ten acceptance criteria, each reporting one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are collected in
the terminal summary) or directly with ``python3 tests/test_acceptance.py``.
"""

import csv
import math
import time

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.special import erf

from stochqsp.chebyshev import (Parity, PolySeries, chebyshev_grid, coeffs_by_quadrature,
                                coeffs_cos, coeffs_erf, coeffs_exp_decay, coeffs_inverse,
                                coeffs_sin, eval_series, truncate)
from stochqsp.cli import main
from stochqsp.decay import select_model
from stochqsp.ensemble import build
from stochqsp.operators import (apply_poly, block_encode, channel_experiment, mixing_inputs,
                                povm_map_check, random_density, random_hermitian,
                                random_unitary, spectral_norm, validate_mixing_lemma)
from stochqsp.qsp import extract_poly, find_phases, round_trip_error, verify_conditions
from stochqsp.verify import geometric_series

try:
    from conftest import record_acceptance
except ImportError:  # imported outside pytest's rootdir handling
    def record_acceptance(n, ok, detail):
        print(f"ACCEPTANCE {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok


def _cost_curve(tmp_path, function, param, dmax):
    out = tmp_path / f"{function}.csv"
    code = main(["cost-curve", "--function", function, "--param", str(param),
                 "--degrees", f"2:{dmax}:1", "--out", str(out)])
    with open(out) as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    return code, rows


def criterion_1(tmp_path):
    start = time.perf_counter()
    configs = [("cos", 10, 400), ("exp_decay", 10, 400), ("inverse", 100, 199), ("erf", 10, 400)]
    ok = True
    parts = []
    for function, param, dmax in configs:
        code, rows = _cost_curve(tmp_path, function, param, dmax)
        bound_ok = code == 0 and all(
            float(r["ratio"]) <= float(r["bound_ratio"]) + 1e-9
            for r in rows if r["degenerate"] == "0" and r["certified"] == "1")
        last = float(rows[-1]["ratio"])
        near = abs(last - 0.5) <= 0.1
        ok &= bound_ok and near
        parts.append(f"{function}({param}) d={dmax} ratio={last:.4f}{'' if near else '!'}"
                     f"{'' if bound_ok else ' bound!'}")
    elapsed = time.perf_counter() - start
    ok &= elapsed <= 120
    return ok, "; ".join(parts) + f"; {elapsed:.1f}s"


def criterion_2():
    s = PolySeries(np.exp(-np.arange(60.0)), label="geometric")
    e = build(s, 10, select_model(s))
    p1 = e.terms[0].prob
    ok = e.d_star == 6 and abs(p1 - 0.64391) <= 1e-4 and abs(e.d_avg - 7.5074) <= 1e-4
    return ok, f"d*={e.d_star} p1={p1:.5f} d_avg={e.d_avg:.4f}"


def _random_source(rng):
    kind = rng.integers(4)
    if kind == 0:
        return geometric_series(float(rng.uniform(0.6, 1.5)), 300)
    if kind == 1:
        return coeffs_cos(float(rng.uniform(2.0, 6.0)), 300)
    if kind == 2:
        return coeffs_erf(float(rng.uniform(1.5, 4.0)), 300)
    return coeffs_exp_decay(float(rng.uniform(1.0, 4.0)), 300)


def criterion_3():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_ratio = 0.0
    failures = []
    done = 0
    while done < 20:
        s = _random_source(rng)
        m = select_model(s)
        d = int(rng.integers(10, 31))
        e = build(s, d, m)
        if e.degenerate or not e.certified:
            continue
        dim = (4, 8, 16)[done % 3]
        a = random_hermitian(dim, int(rng.integers(1 << 30)))
        rho = random_density(dim, int(rng.integers(1 << 30)))
        a_err, b_err, _, tail = mixing_inputs(e, a)
        rep = channel_experiment(e, a, rho)
        eps = e.epsilon
        if not (rep.measured <= 3 * eps + tail + 1e-9 and a_err <= 2 * math.sqrt(eps) + tail + 1e-9
                and b_err <= eps + tail + 1e-9):
            failures.append(f"{s.label} d={d}")
        worst_ratio = max(worst_ratio, rep.measured / (3 * eps))
        done += 1
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed <= 60
    return ok, f"20 triples, max measured/(3 eps)={worst_ratio:.3f}, {elapsed:.1f}s" + (
        f", failed {failures}" if failures else "")


def criterion_4():
    s = geometric_series(1.0, 80)
    m = select_model(s)
    a = random_hermitian(8, 3)
    f_a = apply_poly(a, s)
    xs, ys = [], []
    for d in (8, 12, 16, 20):
        e = build(s, d, m)
        xs.append(math.log(spectral_norm(apply_poly(a, e.base) - f_a)))
        ys.append(math.log(channel_experiment(e, a).measured))
    slope = float(np.polyfit(xs, ys, 1)[0])
    return abs(slope - 2.0) <= 0.3, f"slope {slope:.3f}"


def _dirichlet(rng, k):
    return rng.dirichlet(np.ones(k))


def _rand_herm(rng, n):
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (g + g.conj().T)


def criterion_5():
    rng = np.random.default_rng(77)
    failed = {"unitary": 0, "operator": 0, "block": 0}
    for _ in range(50):
        n, k = int(rng.integers(2, 5)), int(rng.integers(2, 6))
        v = random_unitary(n, rng)
        us = [v @ expm(1j * rng.uniform(0.0, 0.3) * _rand_herm(rng, n) / math.sqrt(n))
              for _ in range(k)]
        if not validate_mixing_lemma(us, _dirichlet(rng, k), v, mode="unitary").bound_satisfied:
            failed["unitary"] += 1

        s = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        s *= rng.uniform(0.3, 1.0) / spectral_norm(s)
        rs = [s + rng.uniform(0.0, 0.2) * (rng.standard_normal((n, n))
                                           + 1j * rng.standard_normal((n, n))) / n
              for _ in range(k)]
        if not validate_mixing_lemma(rs, _dirichlet(rng, k), s, mode="operator").bound_satisfied:
            failed["operator"] += 1

        h = _rand_herm(rng, n)
        h *= 0.8 / spectral_norm(h)
        blocks = []
        for _ in range(k):
            hj = h + rng.uniform(0.0, 0.1) * _rand_herm(rng, n) / n
            hj *= min(1.0, 0.95 / spectral_norm(hj))
            blocks.append(block_encode(hj).unitary)
        target = block_encode(h).unitary
        if not validate_mixing_lemma(blocks, _dirichlet(rng, k), target,
                                     mode="block").bound_satisfied:
            failed["block"] += 1

    th = 0.1
    x = np.array([[0, 1], [1, 0]])
    up = math.cos(th) * np.eye(2) + 1j * math.sin(th) * x
    rot = validate_mixing_lemma([up, up.conj()], [0.5, 0.5], np.eye(2), mode="unitary")
    rot_ok = (abs(rot.a - 2 * math.sin(th / 2)) < 1e-12 and abs(rot.b - (1 - math.cos(th))) < 1e-12
              and rot.bound_satisfied)
    ok = not any(failed.values()) and rot_ok
    return ok, (f"failures per mode {failed} of 50; rotation a={rot.a:.6f} b={rot.b:.6f} "
                f"{'ok' if rot_ok else 'mismatch'}")


def criterion_6():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(200):
        d = int(rng.integers(0, 21))
        r = verify_conditions(rng.uniform(-math.pi, math.pi, d + 1))
        worst = max(worst, r.degree_violation, r.parity_violation, r.normalization_violation)
    x = chebyshev_grid(401)
    zero = max(float(np.max(np.abs(extract_poly(np.zeros(d + 1), x) - np.cos(d * np.arccos(x)))))
               for d in range(51))
    return worst <= 1e-9 and zero <= 1e-12, f"max violation {worst:.2e}, zero-phase T_d diff {zero:.2e}"


def _scaled(c, parity, label, peak_to=0.95):
    s = PolySeries(np.asarray(c, dtype=float), parity=parity, label=label)
    peak = float(np.max(np.abs(eval_series(s, chebyshev_grid(2001)))))
    return s.with_coeffs(s.coeffs * (peak_to / peak))


def phase_targets():
    rng = np.random.default_rng(14)
    even_r = np.zeros(9)
    even_r[0::2] = rng.normal(size=5)
    odd_r = np.zeros(12)
    odd_r[1::2] = rng.normal(size=6)
    t14 = np.zeros(15)
    t14[14] = 0.5
    return [
        _scaled(truncate(coeffs_cos(1.0, 40), 14).coeffs, Parity.EVEN, "cos(1) d=14"),
        _scaled(truncate(coeffs_cos(3.0, 40), 12).coeffs, Parity.EVEN, "cos(3) d=12"),
        _scaled(truncate(coeffs_cos(5.0, 40), 14).coeffs, Parity.EVEN, "cos(5) d=14"),
        _scaled(truncate(coeffs_erf(1.0, 40), 13).coeffs, Parity.ODD, "erf(1) d=13"),
        _scaled(truncate(coeffs_erf(2.0, 40), 11).coeffs, Parity.ODD, "erf(2) d=11"),
        _scaled(truncate(coeffs_erf(4.0, 40), 13).coeffs, Parity.ODD, "erf(4) d=13"),
        _scaled(truncate(coeffs_sin(2.0, 40), 13).coeffs, Parity.ODD, "sin(2) d=13"),
        PolySeries(t14, parity=Parity.EVEN, label="T14/2"),
        _scaled(even_r, Parity.EVEN, "random even d=8", 0.8),
        _scaled(odd_r, Parity.ODD, "random odd d=11", 0.8),
    ]


def criterion_7():
    start = time.perf_counter()
    worst = 0.0
    for t in phase_targets():
        ph = find_phases(t, tol=1e-10, max_restarts=32, seed=0)
        worst = max(worst, round_trip_error(ph, t))
    elapsed = time.perf_counter() - start
    return worst <= 1e-6 and elapsed <= 180, f"10 targets, max grid error {worst:.2e}, {elapsed:.1f}s"


def generator_cases():
    for t in (0.5, 3.0, 10.0):
        yield f"cos({t})", coeffs_cos(t, 80), lambda x, t=t: np.cos(t * x)
    for t in (0.5, 3.0, 10.0):
        yield f"sin({t})", coeffs_sin(t, 80), lambda x, t=t: np.sin(t * x)
    for b in (0.5, 2.0, 10.0):
        yield f"exp_decay({b})", coeffs_exp_decay(b, 80), lambda x, b=b: np.exp(-b * (x + 1))
    for k in (0.5, 2.0, 5.0):
        yield f"erf({k})", coeffs_erf(k, 120), lambda x, k=k: erf(k * x)
    for b in (4, 8, 16):
        yield (f"inverse({b})", coeffs_inverse(b),
               lambda x, b=b: (1 - (1 - x * x) ** b) / np.where(x == 0, 1, x))


def criterion_8():
    worst = 0.0
    name = ""
    for label, s, f in generator_cases():
        diff = float(np.max(np.abs(coeffs_by_quadrature(f, s.degree).coeffs - s.coeffs)))
        if diff >= worst:
            worst, name = diff, label
    return worst <= 1e-9, f"max elementwise diff {worst:.2e} ({name})"


def shipped_sources():
    for t in (1.0, 3.0, 10.0):
        yield coeffs_cos(t, 260)
    for t in (1.0, 3.0, 6.0):
        yield coeffs_sin(t, 260)
    for k in (2.0, 4.0, 10.0):
        yield coeffs_erf(k, 260)
    for b in (10, 50, 100):
        yield coeffs_inverse(b)


def criterion_9():
    count = 0
    bad = []
    for s in shipped_sources():
        m = select_model(s)
        for d in range(2, min(s.degree, 200)):
            e = build(s, d, m)
            for _, poly in e.members():
                count += 1
                wrong = poly.coeffs[1::2] if s.parity is Parity.EVEN else poly.coeffs[0::2]
                if np.any(wrong) or poly.parity is not s.parity:
                    bad.append(f"{s.label} d={d}")
    return not bad, f"{count} members checked" + (f", wrong parity in {bad[:5]}" if bad else "")


def toy_even_ensemble():
    c = np.zeros(100)
    c[0::2] = 0.5 * (1 - math.exp(-1)) * np.exp(-0.5 * np.arange(0, 100, 2))
    s = PolySeries(c, parity=Parity.EVEN, label="even toy")
    return build(s, 14, select_model(s))


def criterion_10():
    e = toy_even_ensemble()
    a = random_hermitian(4, 5, (-0.9, 0.9))
    rep = povm_map_check(e, a, g_branch="parity", completion="fit")
    ok = rep.a_map_ok and rep.combined_ok and max(t.degree for t in e.terms) <= 14
    return ok, (f"eps={rep.epsilon:.3e} a_map={rep.a_map:.4f} (<= {math.sqrt(40 * rep.epsilon):.4f}) "
                f"a^2+2b={rep.a_map ** 2 + 2 * rep.b_map:.2e} (<= {48 * rep.epsilon:.2e})")


CRITERIA = {
    2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
    7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
}


def test_criterion_1_cost_ratio(tmp_path, acceptance):
    ok, detail = criterion_1(tmp_path)
    assert acceptance(1, ok, detail), detail


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n, acceptance):
    ok, detail = CRITERIA[n]()
    assert acceptance(n, ok, detail), detail


if __name__ == "__main__":
    import pathlib
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        record_acceptance(1, *criterion_1(pathlib.Path(tmp)))
    for n in sorted(CRITERIA):
        record_acceptance(n, *CRITERIA[n]())
