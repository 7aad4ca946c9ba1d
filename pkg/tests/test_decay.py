import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochqsp.chebyshev import Parity, PolySeries, coeffs_by_quadrature, coeffs_cos, \
    coeffs_erf, coeffs_exp_decay, coeffs_inverse, coeffs_sin
from stochqsp.decay import DecayModel, fit_two_point, select_model, validate_envelope
from stochqsp.errors import ArgumentError, DegenerateFitError, FitError, NoEnvelopeError


def geometric(q, n=40, scale=1.0):
    return PolySeries(scale * np.exp(-q * np.arange(n)))


def brute_force_best(s):
    """Plain double loop over supported pairs; slow but obviously correct."""
    c = [abs(v) for v in s.coeffs]
    idx = [n for n in range(len(c)) if c[n] >= 1e-30]
    if s.parity is Parity.EVEN:
        idx = [n for n in idx if n % 2 == 0]
    elif s.parity is Parity.ODD:
        idx = [n for n in idx if n % 2 == 1]
    best = None
    for a in range(len(idx)):
        for b in range(a + 1, len(idx)):
            n1, n2 = idx[a], idx[b]
            q = (math.log(c[n1]) - math.log(c[n2])) / (n2 - n1)
            if q <= 0:
                continue
            log_c = math.log(c[n1]) + q * n1
            if all(math.log(c[n]) <= log_c - q * n + 1e-12 for n in idx[a:]):
                score = log_c / q
                if best is None or score < best[0] - 1e-9 * max(1, abs(score)):
                    best = (score, n1, q)
    return best


class TestFitTwoPoint:
    def test_unit_geometric(self):
        m = fit_two_point(geometric(1.0), 2, 5)
        assert m.C == pytest.approx(1.0, rel=1e-12) and m.q == pytest.approx(1.0, rel=1e-12)

    def test_scaled_geometric(self):
        m = fit_two_point(geometric(0.5, scale=3.0), 1, 4)
        assert m.C == pytest.approx(3.0, rel=1e-12) and m.q == pytest.approx(0.5, rel=1e-12)

    def test_passes_through_points(self):
        s = coeffs_exp_decay(4.0, 60)
        m = fit_two_point(s, 3, 9)
        for n in (3, 9):
            assert m.envelope(n) == pytest.approx(abs(s.coeffs[n]), rel=1e-12)

    def test_zero_coefficient(self):
        with pytest.raises(DegenerateFitError):
            fit_two_point(coeffs_cos(2.0, 20), 1, 4)

    def test_non_decaying(self):
        with pytest.raises(FitError):
            fit_two_point(PolySeries(np.array([0.1, 0.5, 1.0])), 0, 2)

    def test_bad_indices(self):
        with pytest.raises(FitError):
            fit_two_point(geometric(1.0, 5), 3, 3)
        with pytest.raises(FitError):
            fit_two_point(geometric(1.0, 5), 0, 5)


class TestValidateEnvelope:
    def test_own_fit(self):
        s = geometric(1.0)
        assert validate_envelope(s, DecayModel(1.0, 1.0))[0]

    def test_c_too_small(self):
        assert validate_envelope(geometric(1.0), DecayModel(0.5, 1.0, 0)) == (False, 0)

    def test_cos_selected(self):
        s = coeffs_cos(10.0, 80)
        assert validate_envelope(s, select_model(s)) == (True, None)

    def test_exp_selected(self):
        s = coeffs_exp_decay(4.0, 60)
        m = select_model(s)
        assert validate_envelope(s, m)[0]
        env = m.envelope(np.arange(m.n1, 61))
        assert np.all(np.abs(s.coeffs[m.n1:]) <= env * (1 + 1e-12))

    def test_deep_tail_no_underflow(self):
        s = geometric(30.0, 60)
        assert validate_envelope(s, DecayModel(1.0, 30.0))[0]
        assert not validate_envelope(s, DecayModel(1.0, 30.1))[0]

    def test_onset_ignores_head(self):
        c = np.exp(-np.arange(20.0))
        c[0] = 50.0
        s = PolySeries(c)
        assert validate_envelope(s, DecayModel(1.0, 1.0, n1=1))[0]
        assert not validate_envelope(s, DecayModel(1.0, 1.0, n1=0))[0]


class TestSelectModel:
    def test_geometric_tie_break(self):
        m = select_model(geometric(1.0))
        assert m.n1 == 0
        assert m.C == pytest.approx(1.0, rel=1e-9) and m.q == pytest.approx(1.0, rel=1e-9)

    def test_constant_has_no_envelope(self):
        with pytest.raises(NoEnvelopeError):
            select_model(PolySeries(np.ones(20)))

    def test_too_few_nonzero(self):
        with pytest.raises(ArgumentError):
            select_model(geometric(1.0, 7))

    @pytest.mark.parametrize("s", [coeffs_exp_decay(1.0, 50), coeffs_cos(10.0, 80),
                                   coeffs_sin(3.0, 60), coeffs_erf(4.0, 120),
                                   coeffs_inverse(30)])
    def test_matches_brute_force(self, s):
        m = select_model(s)
        score, n1, q = brute_force_best(s)
        assert m.log_c_over_q == pytest.approx(score, rel=1e-9, abs=1e-9)
        assert m.n1 == n1
        assert validate_envelope(s, m)[0]

    def test_deterministic(self):
        s = coeffs_erf(6.0, 150)
        assert select_model(s) == select_model(s)

    def test_d_max_restricts_second_point(self):
        s = coeffs_exp_decay(4.0, 60)
        m = select_model(s, d_max=12)
        assert m.n2 <= 12 and validate_envelope(s, m)[0]

    @pytest.mark.parametrize("family,params", [
        (lambda p: coeffs_cos(p, int(2 * p) + 120), (1.0, 10.0, 40.0)),
        (lambda p: coeffs_exp_decay(p, int(2 * p) + 120), (1.0, 10.0, 40.0)),
        (lambda p: coeffs_erf(p, int(4 * p) + 150), (1.0, 5.0, 10.0)),
        (lambda b: coeffs_inverse(int(b)), (10, 50, 100)),
    ])
    def test_families_fit(self, family, params):
        for p in params:
            s = family(p)
            m = select_model(s)
            assert m.q > 0 and validate_envelope(s, m)[0]

    def test_analytic_function_fits(self):
        s = coeffs_by_quadrature(lambda x: 1.0 / (2.0 - x), 60)
        m = select_model(s)
        assert validate_envelope(s, m)[0]
        assert m.q > 0.5
        assert m.log_c_over_q == pytest.approx(brute_force_best(s)[0], rel=1e-9)

    def test_quadrature_noise_plateau_ignored(self):
        # the asymptotic rate is log(2 + sqrt 3); rounding noise must not flatten it
        s = coeffs_by_quadrature(lambda x: 1.0 / (2.0 - x), 120)
        m = select_model(s)
        assert m.q > 0.5 and m.n2 < 30

    def test_kink_gives_tiny_rate(self):
        s = coeffs_by_quadrature(np.abs, 200)
        assert select_model(s).q < 0.02

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.05, 3.0), st.floats(0.1, 10.0), st.integers(10, 60))
    def test_exact_geometric_recovered(self, q, scale, n):
        m = select_model(geometric(q, n, scale))
        assert m.q == pytest.approx(q, rel=1e-8)
        assert m.C == pytest.approx(scale, rel=1e-7)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(0.0, 1.0), min_size=12, max_size=40), st.floats(0.1, 2.0))
    def test_returned_model_is_valid(self, noise, q):
        c = np.exp(-q * np.arange(len(noise))) * (0.5 + np.array(noise))
        s = PolySeries(c)
        m = select_model(s)
        assert m.q > 0 and validate_envelope(s, m)[0]


def test_model_round_trip():
    m = DecayModel(1.5, 0.3, 2, 9)
    assert DecayModel.from_dict(m.to_dict()) == m
    assert m.tail_bound(4) == pytest.approx(sum(1.5 * math.exp(-0.3 * n) for n in range(5, 2000)))
