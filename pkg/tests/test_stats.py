import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from npab.adversary import BasisPolicy, InterceptResend, NoAttack, PauliChannel
from npab.experiments import run_campaign
from npab.gf2codes import steane_pair
from npab.protocol import BasisSequence, SessionParams, run_session
from npab.sources import Ideal
from npab.stats import (
    ARMS,
    bootstrap_std,
    campaign_csv,
    check_qber_variance,
    correlated_std_ratio,
    deviation_study,
    hoeffding_bound,
    summarize,
)

STEANE = steane_pair()


def brute_force_variance(n, r, ez, ex, correlated):
    """Exact QBER variance by enumerating bases, error patterns and check subsets."""
    N, L = 2 * n, 2 * n // r
    subsets = list(itertools.combinations(range(N), n))
    m1 = m2 = 0.0
    for bases in itertools.product((0, 1), repeat=L):
        e = [ez if b == 0 else ex for b in bases]
        if correlated:
            patterns = itertools.product((0, 1), repeat=L)
            expand = lambda pat: [pat[s % L] for s in range(N)]  # noqa: E731
            prob = lambda pat: math.prod(e[j] if pat[j] else 1 - e[j] for j in range(L))  # noqa: E731
        else:
            patterns = itertools.product((0, 1), repeat=N)
            expand = lambda pat: list(pat)  # noqa: E731
            prob = lambda pat: math.prod(e[s % L] if pat[s] else 1 - e[s % L] for s in range(N))  # noqa: E731
        for pat in patterns:
            w = prob(pat) / 2**L
            if w == 0:
                continue
            err = expand(pat)
            for sub in subsets:
                q = sum(err[s] for s in sub) / n
                m1 += w * q / len(subsets)
                m2 += w * q * q / len(subsets)
    return m2 - m1**2


class TestSummaries:
    def test_identical_transcripts_zero_std(self):
        p = SessionParams(7, 2, STEANE)
        t = run_session(p, BasisSequence(np.zeros(7)))
        s = summarize([t] * 5)
        assert s.qber_std == 0 and s.abort_rate == 0 and s.key_agreement_rate == 1

    def test_mean_of_zero_and_one(self):
        p = SessionParams(7, 2, STEANE)
        b = BasisSequence(np.zeros(7))
        ts = [run_session(p, b), run_session(p, b, attack=PauliChannel({"Y": 1.0}))]
        s = summarize(ts)
        assert s.qber_mean == 0.5 and s.abort_rate == 0.5 and s.key_agreement_rate == 1.0

    def test_all_aborted_has_no_agreement(self):
        p = SessionParams(7, 2, STEANE)
        t = run_session(p, BasisSequence(np.zeros(7)), attack=PauliChannel({"Y": 1.0}))
        assert summarize([t]).key_agreement_rate is None

    def test_empty(self):
        with pytest.raises(ValueError):
            summarize([])

    def test_noiseless_campaign(self):
        p = SessionParams(14, 4, STEANE, seed=3)
        s = summarize(run_campaign(p, Ideal(), NoAttack(), 200))
        assert s.abort_rate == 0 and s.key_agreement_rate == 1 and s.qber_mean == 0

    def test_invariants(self):
        p = SessionParams(28, 4, STEANE, seed=1)
        ts = run_campaign(p, Ideal(), InterceptResend(BasisPolicy.UNIFORM), 30)
        s = summarize(ts)
        assert s.qber_std >= 0 and 0 <= s.abort_rate <= 1
        assert min(s.qbers) <= s.qber_mean <= max(s.qbers)

    def test_csv(self):
        p = SessionParams(7, 2, STEANE)
        b = BasisSequence(np.zeros(7))
        ts = [run_session(p, b), run_session(p, b, attack=PauliChannel({"Y": 1.0}))]
        lines = campaign_csv(ts, "x").splitlines()
        assert lines == ["session,arm,qber,aborted,key_agreement", "0,x,0,0,1", "1,x,1,1,"]

    def test_threads_do_not_change_results(self):
        p = SessionParams(28, 4, STEANE, seed=9)
        attack = InterceptResend(BasisPolicy.UNIFORM)
        a = run_campaign(p, Ideal(), attack, 12, threads=1)
        b = run_campaign(p, Ideal(), attack, 12, threads=4)
        assert [t.to_json() for t in a] == [t.to_json() for t in b]


class TestHoeffding:
    def test_zero_clamped(self):
        assert hoeffding_bound(0.0, 50, 0.95).lower == 0.0

    def test_width_scaling(self):
        w1 = hoeffding_bound(0.5, 1000, 0.9).width
        w4 = hoeffding_bound(0.5, 4000, 0.9).width
        assert w4 == pytest.approx(w1 / 2)

    def test_formula(self):
        h = hoeffding_bound(0.25, 10_000, 0.99)
        assert 0.25 in h
        assert h.width == pytest.approx(2 * math.sqrt(math.log(2 / 0.01) / (2 * 10_000)))

    def test_correlated_marked_inapplicable(self):
        h = hoeffding_bound(0.1, 100, 0.95, independent=False)
        assert not h.applicable and h.note

    @pytest.mark.parametrize("c", [0.0, 1.0, -0.5])
    def test_bad_confidence(self, c):
        with pytest.raises(ValueError):
            hoeffding_bound(0.1, 10, c)

    def test_coverage_on_binomial_data(self):
        rng = np.random.default_rng(0)
        hits = sum(0.2 in hoeffding_bound(rng.binomial(500, 0.2) / 500, 500, 0.9) for _ in range(1000))
        assert hits >= 900  # Hoeffding is conservative


class TestBootstrap:
    @given(st.lists(st.floats(0, 1), min_size=5, max_size=40), st.integers(0, 2**32 - 1))
    def test_interval_contains_point(self, xs, seed):
        e = bootstrap_std(np.array(xs), np.random.default_rng(seed), resamples=200)
        assert e.lower <= e.value <= e.upper

    def test_nominal_coverage(self):
        # independent-arm-like data: binomial QBERs with known true std
        rng = np.random.default_rng(2024)
        n, p, sessions = 200, 0.1, 300
        true_std = math.sqrt(p * (1 - p) / n)
        covered = 0
        for _ in range(100):
            q = rng.binomial(n, p, size=sessions) / n
            e = bootstrap_std(q, rng, resamples=2000)
            covered += e.lower <= true_std <= e.upper
        assert covered >= 90


class TestVarianceOracle:
    @pytest.mark.parametrize("n,r", [(2, 1), (2, 2), (2, 4), (3, 2), (3, 3)])
    @pytest.mark.parametrize("correlated", [False, True])
    @pytest.mark.parametrize("ez,ex", [(0.1, 0.0), (0.3, 0.2), (0.5, 0.5)])
    def test_matches_enumeration(self, n, r, correlated, ez, ex):
        exact = brute_force_variance(n, r, ez, ex, correlated)
        assert check_qber_variance(n, r, ez, ex, correlated) == pytest.approx(exact, rel=1e-9, abs=1e-15)

    def test_r_one_ratio_is_one(self):
        assert correlated_std_ratio(448, 1, 0.1, 0.0) == pytest.approx(1.0)

    @pytest.mark.slow
    def test_matches_protocol_simulation(self):
        # arms B and C from real sessions against the closed form
        rep = deviation_study(56, 8, {"I": 0.9, "X": 0.1}, 3000, seed=77, resamples=200)
        for arm, corr in (("npab-independent", False), ("npab-correlated", True)):
            var = rep.arms[arm].qbers.var(ddof=1)
            assert var == pytest.approx(check_qber_variance(56, 8, 0.1, 0.0, corr), rel=0.1)

    def test_ratio_below_sqrt_r_for_half_sampling(self):
        # only about half of each position's r slots land in the check set
        for r in (2, 4, 8, 16):
            assert correlated_std_ratio(7 * 256, r, 0.1, 0.0) < math.sqrt(r)
        assert correlated_std_ratio(7 * 256, 8, 0.1, 0.0) == pytest.approx(1.949, abs=0.01)


@pytest.fixture(scope="module")
def r1():
    return deviation_study(56, 1, {"I": 0.9, "X": 0.1}, 200, seed=5, resamples=500)


class TestDeviationStudy:
    def test_r_one_arms_b_and_c_identical(self, r1):
        b, c = r1.arms["npab-independent"].qbers, r1.arms["npab-correlated"].qbers
        assert np.array_equal(b, c)
        ratio = r1.ratios["correlated/independent"]
        assert ratio.lower <= 1.0 <= ratio.upper

    def test_csv_rows(self, r1):
        rows = r1.to_csv().splitlines()
        assert rows[0] == "arm,session,qber"
        assert len(rows) - 1 == 3 * 200
        assert {row.split(",")[0] for row in rows[1:]} == set(ARMS)

    def test_report_shape(self, r1):
        d = r1.to_dict()
        assert d["arms"]["bb84"]["check_bits"] == 56 and d["arms"]["npab-correlated"]["check_bits"] == 56
        for e in r1.ratios.values():
            assert e.lower <= e.value <= e.upper

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            deviation_study(56, 3, {"X": 1.0}, 200, seed=0)
        with pytest.raises(ValueError):
            deviation_study(56, 8, {"X": 1.0}, 199, seed=0)

    @pytest.mark.slow
    def test_scaling_at_r_eight(self):
        n, r = 448, 8
        rep = deviation_study(n, r, {"I": 0.9, "X": 0.1}, 500, seed=11)
        a, b, c = (rep.arms[k] for k in ARMS)
        # matched marginals
        se = math.hypot(b.mean_stderr, c.mean_stderr)
        assert abs(b.mean - c.mean) <= 3 * se
        # B is about A / sqrt(r)
        assert b.std.value == pytest.approx(a.std.value / math.sqrt(r), rel=0.2)
        # C at most A
        assert rep.std_difference.value <= 3 * rep.std_difference.stderr
        # C/B agrees with the exact ratio for fresh bases and half sampling
        ratio = rep.ratios["correlated/independent"]
        assert ratio.lower <= correlated_std_ratio(n, r, 0.1, 0.0) <= ratio.upper

    def test_deterministic(self):
        a = deviation_study(28, 2, {"I": 0.8, "Z": 0.2}, 200, seed=3, resamples=100)
        b = deviation_study(28, 2, {"I": 0.8, "Z": 0.2}, 200, seed=3, resamples=100)
        assert a.to_csv() == b.to_csv() and a.to_dict() == b.to_dict()
