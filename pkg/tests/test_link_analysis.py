import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ofdm_rsma import link_analysis as la
from ofdm_rsma.link_analysis import PowerAllocation, RateReport, SinrDecomposition
from ofdm_rsma.reference_oracle import loop_power_decomposition, matrix_power_decomposition

from conftest import dense_couplings, random_couplings

seeds = st.integers(0, 2**31 - 1)


def close(a: SinrDecomposition, b: SinrDecomposition, tol=1e-10):
    return abs(a.signal - b.signal) <= tol and abs(a.ici - b.ici) <= tol and abs(a.mui - b.mui) <= tol


def random_alloc(r, k=2, n=2):
    return PowerAllocation(r.uniform(0, 3, n), r.uniform(0, 3, (k, n)))


class TestPowerAllocation:
    def test_budget(self):
        a = PowerAllocation(np.array([1.0, 0.5]), np.array([[0.5, 0.0], [0.0, 1.0]]))
        assert a.total_power == pytest.approx(3.0)
        assert a.within_budget(3.0)
        assert not a.within_budget(2.9)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            PowerAllocation(np.array([-1.0, 0.0]), np.zeros((2, 2)))

    def test_shares_checked_against_common_rate(self, rng):
        g = random_couplings(rng)
        a = PowerAllocation(np.ones(2), np.ones((2, 2)))
        rep = la.evaluate_rsma(g, a, 1.0)
        ok = PowerAllocation(a.common, a.private, np.array([rep.common_total, 0.0]))
        bad = PowerAllocation(a.common, a.private, np.array([rep.common_total, 0.1]))
        assert ok.shares_feasible(rep)
        assert not bad.shares_feasible(rep)


class TestRateFromSinr:
    def test_unit_sinr(self):
        assert la.rate_from_sinr(SinrDecomposition(1.0, 0.0, 0.0, 1.0)) == pytest.approx(1.0)

    def test_zero_signal(self):
        assert la.rate_from_sinr(SinrDecomposition(0.0, 0.3, 0.2, 1.0)) == 0.0

    def test_mixed(self):
        assert la.rate_from_sinr(SinrDecomposition(3.0, 0.5, 0.5, 1.0)) == pytest.approx(np.log2(2.5))
        assert np.log2(2.5) == pytest.approx(1.3219, abs=1e-4)


class TestCommonStream:
    def test_diagonal_no_private(self):
        g = [np.diag([0.5, 2.0]), np.diag([1.0, 1.0])]
        a = PowerAllocation(np.array([0.0, 3.0]), np.zeros((2, 2)))
        d = la.rsma_common_sinr(g, a, 1.0, 0, 1)
        assert (d.ici, d.mui) == (0.0, 0.0)
        assert d.sinr == pytest.approx(4.0 * 3.0)

    def test_zero_common_power(self, rng):
        g = dense_couplings(rng)
        a = PowerAllocation(np.zeros(2), np.ones((2, 2)))
        d = la.rsma_common_sinr(g, a, 1.0, 1, 0)
        assert d.signal == 0.0 and d.sinr == 0.0

    def test_own_private_counts_as_interference(self):
        g = [np.eye(2), np.eye(2)]
        a = PowerAllocation(np.array([1.0, 0.0]), np.array([[2.0, 0.0], [0.0, 0.0]]))
        assert la.rsma_common_sinr(g, a, 1.0, 0, 0).mui == pytest.approx(2.0)


class TestPrivateStream:
    def test_single_user_diagonal(self):
        g = [np.diag([2.0, 0.5])]
        a = PowerAllocation(np.zeros(2), np.array([[1.0, 4.0]]))
        d = la.rsma_private_sinr(g, a, 1.0, 0, 1)
        assert (d.ici, d.mui) == (0.0, 0.0)
        assert d.sinr == pytest.approx(0.25 * 4.0)

    def test_diagonal_mui(self):
        g = [np.diag([2.0, 1.0]), np.diag([3.0, 1.0])]
        a = PowerAllocation(np.zeros(2), np.array([[1.0, 0.0], [5.0, 0.0]]))
        assert la.rsma_private_sinr(g, a, 1.0, 0, 0).mui == pytest.approx(4.0 * 5.0)
        assert la.rsma_private_sinr(g, a, 1.0, 1, 0).mui == pytest.approx(9.0 * 1.0)


class TestNomaStream:
    def test_last_user_sees_no_mui(self):
        g = [np.diag([1.0, 2.0]), np.diag([1.5, 0.5])]
        q = np.array([[1.0, 1.0], [2.0, 3.0]])
        d = la.noma_private_sinr(g, q, 1.0, (0, 1), 1, 1)
        assert d.mui == 0.0
        assert d.sinr == pytest.approx(0.25 * 3.0)

    def test_first_user_sees_later_user(self):
        g = [np.diag([1.0, 2.0]), np.diag([1.5, 0.5])]
        q = np.array([[1.0, 1.0], [2.0, 3.0]])
        assert la.noma_private_sinr(g, q, 1.0, (0, 1), 0, 1).mui == pytest.approx(4.0 * 3.0)

    def test_receiver_before_user_rejected(self):
        g = [np.eye(2), np.eye(2)]
        with pytest.raises(ValueError):
            la.noma_private_sinr(g, np.ones((2, 2)), 1.0, (0, 1), 1, 0, receiver=0)

    @pytest.mark.parametrize("order", [(0, 0), (0, 2), (1,)])
    def test_bad_order_rejected(self, order):
        with pytest.raises(ValueError):
            la.validate_sic_order(order, 2)


class TestAgainstOracles:
    @settings(max_examples=40)
    @given(seeds)
    def test_rsma_decompositions(self, seed):
        r = np.random.default_rng(seed)
        g = random_couplings(r, n=4, cp=2, taps=3)
        a = random_alloc(r, n=4)
        for k in range(2):
            for n in range(4):
                for stream, fast in (("common", la.rsma_common_sinr(g, a, 0.7, k, n)),
                                     ("private", la.rsma_private_sinr(g, a, 0.7, k, n))):
                    assert close(fast, loop_power_decomposition(g, a, stream, k, n, 0.7))
                    assert close(fast, matrix_power_decomposition(g, np.sqrt(a.common), np.sqrt(a.private),
                                                                  stream, k, n, 0.7))

    @settings(max_examples=40)
    @given(seeds)
    def test_noma_decompositions(self, seed):
        r = np.random.default_rng(seed)
        g = dense_couplings(r, n=3)
        a = random_alloc(r, n=3)
        order = tuple(r.permutation(2))
        for k in range(2):
            for rx in la.noma_decoders(order, k):
                for n in range(3):
                    fast = la.noma_private_sinr(g, a.private, 1.0, order, k, n, receiver=rx)
                    kw = dict(sic_order=order, receiver=rx)
                    assert close(fast, loop_power_decomposition(g, a, "noma", k, n, 1.0, **kw))
                    assert close(fast, matrix_power_decomposition(g, a.common, np.sqrt(a.private), "noma", k, n,
                                                                  1.0, **kw))

    def test_complex_amplitude_phases_do_not_matter(self, rng):
        g = dense_couplings(rng)
        a = random_alloc(rng)
        phases = np.exp(2j * np.pi * rng.uniform(size=(2, 2)))
        d1 = matrix_power_decomposition(g, np.sqrt(a.common), np.sqrt(a.private), "private", 0, 1, 1.0)
        d2 = matrix_power_decomposition(g, np.sqrt(a.common), np.sqrt(a.private) * phases, "private", 0, 1, 1.0)
        assert close(d1, d2, 1e-12)

    def test_dense_sum_rate_from_oracle(self, rng):
        g = dense_couplings(rng)
        a = random_alloc(rng)
        rep = la.evaluate_rsma(g, a, 1.0)
        common = min(sum(la.rate_from_sinr(loop_power_decomposition(g, a, "common", k, n, 1.0)) for n in range(2))
                     for k in range(2))
        private = sum(la.rate_from_sinr(loop_power_decomposition(g, a, "private", k, n, 1.0))
                      for k in range(2) for n in range(2))
        assert rep.sum_rate == pytest.approx(common + private, abs=1e-12)


class TestProperties:
    @settings(max_examples=30)
    @given(seeds)
    def test_zero_doppler_has_no_ici(self, seed):
        r = np.random.default_rng(seed)
        g = random_couplings(r, n=4, cp=2, delta_d=0.0, taps=3)
        c, p = la.rsma_terms(g, r.uniform(0, 1, 4), r.uniform(0, 1, (2, 4)), 1.0)
        assert np.max(np.abs(c.ici)) < 1e-20 and np.max(np.abs(p.ici)) < 1e-20

    @settings(max_examples=30)
    @given(seeds, st.floats(0.01, 100.0))
    def test_scale_covariance(self, seed, s):
        r = np.random.default_rng(seed)
        g = dense_couplings(r, n=3)
        a = random_alloc(r, n=3)
        scaled = PowerAllocation(a.common * s, a.private * s)
        c1, p1 = la.rsma_terms(g, a.common, a.private, 0.5)
        c2, p2 = la.rsma_terms(g, scaled.common, scaled.private, 0.5 * s)
        assert np.allclose(c1.sinr, c2.sinr, rtol=1e-10) and np.allclose(p1.sinr, p2.sinr, rtol=1e-10)

    @settings(max_examples=30)
    @given(seeds, st.integers(0, 1), st.integers(0, 2))
    def test_more_interference_never_helps(self, seed, user, carrier):
        r = np.random.default_rng(seed)
        g = dense_couplings(r, n=3)
        a = random_alloc(r, n=3)
        other = 1 - user
        bumped = a.private.copy()
        bumped[other, carrier] += 1.0
        c1, p1 = la.rsma_terms(g, a.common, a.private, 1.0)
        c2, p2 = la.rsma_terms(g, a.common, bumped, 1.0)
        assert np.all(p2.sinr[user] <= p1.sinr[user] + 1e-12)
        assert np.all(c2.sinr <= c1.sinr + 1e-12)

    @settings(max_examples=30)
    @given(seeds, st.integers(0, 2))
    def test_more_own_power_never_hurts_that_carrier(self, seed, carrier):
        r = np.random.default_rng(seed)
        g = dense_couplings(r, n=3)
        a = random_alloc(r, n=3)
        bumped = a.private.copy()
        bumped[0, carrier] += 1.0
        _, p1 = la.rsma_terms(g, a.common, a.private, 1.0)
        _, p2 = la.rsma_terms(g, a.common, bumped, 1.0)
        assert p2.sinr[0, carrier] >= p1.sinr[0, carrier] - 1e-12

    @settings(max_examples=30)
    @given(seeds)
    def test_rsma_and_noma_agree_for_one_user(self, seed):
        r = np.random.default_rng(seed)
        g = dense_couplings(r, n_users=1, n=3)
        q = r.uniform(0, 2, (1, 3))
        rsma = la.evaluate_rsma(g, PowerAllocation(np.zeros(3), q), 1.0)
        noma = la.evaluate_noma(g, q, 1.0, (0,))
        assert rsma.sum_rate == pytest.approx(noma.sum_rate, abs=1e-12)

    @settings(max_examples=30)
    @given(seeds)
    def test_report_invariants(self, seed):
        r = np.random.default_rng(seed)
        g = dense_couplings(r, n=3)
        rep = la.evaluate_rsma(g, random_alloc(r, n=3), 1.0)
        assert np.all(rep.common_rate_per_user >= 0) and np.all(rep.private_rate >= 0)
        assert rep.common_total <= rep.common_rate_per_user.sum(axis=1).min() + 1e-12
        assert rep.sum_rate == pytest.approx(rep.common_total + rep.private_rate.sum())


class TestEvaluate:
    def test_no_common_power(self, rng):
        g = dense_couplings(rng)
        a = PowerAllocation(np.zeros(2), np.ones((2, 2)))
        rep = la.evaluate_rsma(g, a, 1.0)
        assert rep.common_total == 0.0
        assert rep.sum_rate == pytest.approx(rep.private_rate.sum())

    def test_single_user_common_is_its_own_sum(self, rng):
        g = dense_couplings(rng, n_users=1)
        a = PowerAllocation(np.ones(2), np.ones((1, 2)))
        rep = la.evaluate_rsma(g, a, 1.0)
        assert rep.common_total == pytest.approx(rep.common_rate_per_user[0].sum())

    def test_noma_zero_power(self, rng):
        assert la.evaluate_noma(dense_couplings(rng), np.zeros((2, 2)), 1.0, (0, 1)).sum_rate == 0.0

    def test_noma_single_user_is_ofdm(self):
        g = [np.diag([1.0, 3.0])]
        rep = la.evaluate_noma(g, np.array([[1.0, 1.0]]), 1.0, (0,))
        assert rep.sum_rate == pytest.approx(np.log2(2) + np.log2(1 + 9))

    def test_noma_decodability_caps_first_user(self, rng):
        g = [np.diag([1.0, 1.0]), np.diag(np.sqrt([0.1, 0.1]))]
        q = np.array([[1.0, 1.0], [1.0, 1.0]])
        literal = la.evaluate_noma(g, q, 1.0, (0, 1), sic_decodability=False)
        capped = la.evaluate_noma(g, q, 1.0, (0, 1), sic_decodability=True)
        assert capped.sum_rate < literal.sum_rate
        # user 0's message must also be decoded by user 1, which sees it at 0.1/(0.1 + 1) SINR
        assert capped.user_private_rates[0] == pytest.approx(2 * np.log2(1 + 0.1 / 1.1))

    def test_ofdma_diagonal(self):
        g = [np.diag(np.sqrt([1.0, 4.0, 0.5])), np.diag(np.sqrt([2.0, 1.0, 3.0]))]
        q = np.array([1.0, 2.0, 1.0])
        rep = la.evaluate_ofdma(g, np.array([1, 0, 1]), q, 1.0)
        assert rep.sum_rate == pytest.approx(np.log2(3) + np.log2(9) + np.log2(4))

    def test_ofdma_single_carrier(self):
        g = [np.diag(np.sqrt([1.0, 4.0])), np.diag(np.sqrt([2.0, 1.0]))]
        rep = la.evaluate_ofdma(g, np.array([0, 0]), np.array([0.0, 2.0]), 1.0)
        assert rep.sum_rate == pytest.approx(np.log2(9))

    def test_ofdma_ici_against_loop(self, rng):
        g = random_couplings(rng, n=4, cp=2, taps=3)
        m = la.coupling_powers(g)
        assign = np.array([0, 1, 1, 0])
        q = rng.uniform(0, 2, 4)
        terms = la.ofdma_terms(g, assign, q, 1.0)
        for n in range(4):
            k = assign[n]
            interference = sum(m[k][n, j] * q[j] for j in range(4) if j != n)
            assert terms.signal[n] == pytest.approx(m[k][n, n] * q[n], abs=1e-12)
            assert terms.ici[n] + terms.mui[n] == pytest.approx(interference, abs=1e-12)

    def test_ofdma_rejects_unassigned(self, rng):
        with pytest.raises(ValueError):
            la.evaluate_ofdma(dense_couplings(rng), np.array([0, 5]), np.ones(2), 1.0)

    def test_ofdma_single_user_equals_rsma_private(self, rng):
        g = dense_couplings(rng, n_users=1, n=3)
        q = rng.uniform(0, 2, 3)
        o = la.evaluate_ofdma(g, np.zeros(3, dtype=int), q, 1.0)
        r = la.evaluate_rsma(g, PowerAllocation(np.zeros(3), q[None, :]), 1.0)
        assert o.sum_rate == pytest.approx(r.sum_rate)
        assert isinstance(o, RateReport)
