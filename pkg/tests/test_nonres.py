import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blochkit.errors import NoCandidate, OrderTooHigh, SmallDenominator
from blochkit.geometry import AsymptoticParams
from blochkit.nonres import (F_series, S_k_term, bloch_series, grad_F1, predict_and_match,
                             s_terms)
from blochkit.oracle import solve
from blochkit.potential import FourierPotential, truncate


def brute_S(a, x, q, radius, k, order=None):
    """Direct k-fold tuple sum: skip vanishing partial sums, close with q_{-sum}."""
    qt = truncate(q, radius)
    keys = list(qt.coeffs)
    if order is not None:
        keys = [keys[i] for i in order]
    total = 0j
    for tup in itertools.product(keys, repeat=k):
        s = np.zeros(len(x), dtype=int)
        num, den = 1.0 + 0j, 1.0
        for g in tup:
            s = s + np.array(g)
            if not s.any():
                break
            y = np.asarray(x) - q.gamma.cart(s)
            num *= qt.coeffs[g]
            den *= a - y @ y
        else:
            total += num * q[tuple(-s)] / den
    return total


@pytest.fixture
def single(Z2):
    return FourierPotential.hermitian(Z2, {(1, 0): 0.1})[0]


@pytest.fixture
def mixed(Z2):
    return FourierPotential.hermitian(
        Z2, {(1, 0): 0.05 + 0.02j, (0, 1): 0.04, (1, 1): 0.03j, (2, -1): 0.02})[0]


P3 = AsymptoticParams(rho=3.0, series_radius=2.5)


class TestSk:
    def test_zero(self, zero_q):
        assert s_terms(9.0, [3.0, 0.0], zero_q, P3, 4) == [0.0] * 4

    def test_hand_value(self, single):
        # denominators 9 - 4 and 9 - 16
        assert S_k_term(9.0, [3.0, 0.0], single, P3, 1) == pytest.approx(0.01 * (1 / 5 - 1 / 7),
                                                                          rel=1e-12)

    def test_single_mode_S2_vanishes(self, single):
        assert S_k_term(9.0, [3.0, 0.0], single, P3, 2) == pytest.approx(0.0, abs=1e-16)

    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_against_tuple_sum(self, mixed, k):
        P = P3.with_(rho=8.0)
        x = np.array([7.3, 2.2])
        a = x @ x + 0.01
        ref = brute_S(a, x, mixed, P.r_series, k)
        assert abs(ref.imag) < 1e-12
        assert S_k_term(a, x, mixed, P, k) == pytest.approx(ref.real, rel=1e-10, abs=1e-16)

    def test_order_invariance(self, mixed):
        x = np.array([7.3, 2.2])
        a = x @ x - 0.02
        n = len(truncate(mixed, 2.5).coeffs)
        perm = np.random.default_rng(1).permutation(n)
        assert brute_S(a, x, mixed, 2.5, 3, order=perm) == pytest.approx(
            brute_S(a, x, mixed, 2.5, 3), rel=1e-12)

    def test_small_denominator(self, single):
        with pytest.raises(SmallDenominator):
            S_k_term(4.25, [-0.5, 2.0], single, P3, 1)


class TestSeries:
    def test_zero(self, zero_q):
        ser = F_series([3.3, 1.1], zero_q, P3, 4)
        assert ser.F_values == (0.0, 0.0, 0.0) and ser.lambda_pred == pytest.approx(3.3 ** 2 + 1.1 ** 2)

    def test_F1_is_S1(self, mixed):
        x = np.array([7.3, 2.2])
        P = P3.with_(rho=8.0)
        ser = F_series(x, mixed, P, 2)
        assert ser.F_values[0] == S_k_term(x @ x, x, mixed, P, 1)

    def test_recursion(self, mixed):
        x = np.array([7.3, 2.2])
        P = P3.with_(rho=8.0)
        ser = F_series(x, mixed, P, 4)
        F = [0.0]
        for s in range(1, 4):
            F.append(sum(S_k_term(x @ x + F[-1], x, mixed, P, m) for m in range(1, s + 1)))
        assert ser.F_values == pytest.approx(F[1:], rel=1e-12)

    @given(st.floats(0.1, 3.0))
    @settings(max_examples=20, deadline=None)
    def test_quadratic_scaling(self, eps):
        from blochkit.lattice import dual, square_lattice
        q = FourierPotential.hermitian(dual(square_lattice(2)), {(1, 0): 0.05, (1, 1): 0.03})[0]
        x = np.array([7.3, 2.2])
        P = P3.with_(rho=8.0)
        f = F_series(x, q, P, 2).F_values[0]
        assert F_series(x, q.scaled(eps), P, 2).F_values[0] == pytest.approx(eps ** 2 * f, rel=1e-10)

    def test_order_too_high(self, single):
        with pytest.raises(OrderTooHigh):
            F_series([3.0, 0.0], single, P3, P3.max_series_order + 1)

    def test_single_mode_oracle(self, single):
        x = np.array([3.0, 0.0])
        ser = F_series(x, single, P3, 2)
        assert ser.F_values[0] == pytest.approx(5.7143e-4, rel=1e-4)
        sp = solve(x, single, (8.0, 10.0), shift=9.0)
        lam = sp.eigenvalues[np.argmin(np.abs(sp.eigenvalues - 9.0))]
        assert abs(lam - ser.lambda_pred) < abs(lam - 9.0)

    def test_gradient_fd(self, mixed):
        x = np.array([7.3, 2.2])
        P = P3.with_(rho=8.0)
        g = grad_F1(x, mixed, P)
        h = 1e-5
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            fd = (F_series(x + e, mixed, P, 2).F_values[0]
                  - F_series(x - e, mixed, P, 2).F_values[0]) / (2 * h)
            assert fd == pytest.approx(g[i], rel=1e-6)


class TestBloch:
    def test_zero(self, zero_q):
        b = bloch_series([3.0, 0.4], zero_q, P3, 3)
        assert b.coefficients == {(0, 0): 1.0}

    def test_single_mode_hand(self, single):
        b = bloch_series([3.0, 0.0], single, P3, 2)
        nf = b.norm_factor
        # site x + g carries q_{-g}/(|x|^2 - |x + g|^2)
        assert b.coefficients[(1, 0)] / nf == pytest.approx(0.1 / (9 - 16))
        assert b.coefficients[(-1, 0)] / nf == pytest.approx(0.1 / (9 - 4))
        assert b.coefficients[(0, 0)] == pytest.approx(nf)

    def test_normalised(self, mixed):
        b = bloch_series([7.3, 2.2], mixed, P3.with_(rho=8.0), 3)
        norm = np.sqrt(sum(abs(c) ** 2 for c in b.coefficients.values()))
        assert norm == pytest.approx(1.0, abs=1e-12)


class TestMatch:
    def test_zero_exact(self, zero_q):
        x = np.array([3.1, 0.7])
        sp = solve(x, zero_q, (x @ x - 0.5, x @ x + 0.5), shift=x @ x)
        m = predict_and_match(x, zero_q, P3, 3, sp)
        assert m.error == 0.0

    def test_empty(self, single):
        x = np.array([3.0, 0.0])
        sp = solve(x, single, (9.3, 9.4))
        with pytest.raises(NoCandidate):
            predict_and_match(x, single, P3, 2, sp)
