import json
import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

import oracles
from dppersonal import attacks, learners, privacy, tasks
from dppersonal.learners import MeanLearnerOutput, SignLearnerOutput
from dppersonal.tasks import EstSample, MeanInstance

BATTERY = attacks.fingerprint_battery()

# Frozen from the symbolic oracle (tests/oracles.py).
BUV_FROZEN = {("const_zero", 1): 1 / 3, ("const_plus", 4): 4 / 3,
              ("first_coordinate", 4): 4 / 3, ("majority", 2): 1.0,
              ("majority", 4): 17 / 15, ("clipped_mean", 4): 17 / 15}


class TestFingerprintIdentity:

    def test_constant_one_t1(self):
        assert attacks.fingerprint_lhs_exact(attacks.f_const(1.0), 1.0, 1) == pytest.approx(
            1.0, abs=1e-12)

    def test_majority_half(self):
        assert abs(attacks.fingerprint_lhs_exact(attacks.f_majority, 0.5, 3) - 0.5) <= 1e-8

    def test_first_coordinate_t2(self):
        assert abs(attacks.fingerprint_lhs_exact(attacks.f_coordinate(0), 1.0, 2) - 1.0) <= 1e-12

    @pytest.mark.parametrize("name", sorted(BATTERY))
    @pytest.mark.parametrize("t", [1, 2, 3, 5])
    @pytest.mark.parametrize("alpha", [0.1, 0.5, 1.0])
    def test_battery(self, name, t, alpha):
        assert abs(attacks.fingerprint_lhs_exact(BATTERY[name], alpha, t) - alpha) <= 1e-7

    @pytest.mark.parametrize("name,t,alpha", [("majority", 3, "1/2"), ("clipped_mean", 3, "1/10"),
                                              ("first_coordinate", 2, "1")])
    def test_symbolic_oracle(self, name, t, alpha):
        exact = oracles.identity_lhs(oracles.fvalues(name, t), alpha, t)
        assert exact == sp.Rational(alpha)
        got = attacks.fingerprint_lhs_exact(BATTERY[name], float(sp.Rational(alpha)), t)
        assert got == pytest.approx(float(exact), abs=1e-12)

    @given(st.integers(1, 6), st.floats(0.01, 1.0), st.integers(0, 2 ** 32 - 1))
    def test_arbitrary_function(self, t, alpha, seed):
        vals = np.random.default_rng(seed).uniform(-1, 1, 2 ** t)
        f = lambda X: vals
        assert abs(attacks.fingerprint_lhs_exact(f, alpha, t) - alpha) <= 1e-9

    def test_corrupted_weight_breaks_identity(self):
        bad = lambda a, p: 0.9 * attacks.r_weight(a, p)
        assert abs(attacks.fingerprint_lhs_exact(attacks.f_majority, 0.5, 3, weight=bad)
                   - 0.5) > 1e-3

    def test_errors(self):
        with pytest.raises(ValueError):
            attacks.fingerprint_lhs_exact(attacks.f_majority, 0.5, 13)
        with pytest.raises(ValueError):
            attacks.fingerprint_lhs_exact(attacks.f_majority, 0.0, 3)
        with pytest.raises(ValueError):
            attacks.fingerprint_lhs_exact(attacks.f_majority, 1.5, 3)
        with pytest.raises(ValueError):
            attacks.fingerprint_lhs_exact(attacks.f_const(2.0), 0.5, 2)


class TestBuv:

    def test_tight_case(self):
        assert abs(attacks.fingerprint_buv_lhs_exact(attacks.f_const(0.0), 1) - 1 / 3) <= 1e-10

    @pytest.mark.parametrize("key", sorted(BUV_FROZEN))
    def test_frozen(self, key):
        name, t = key
        assert attacks.fingerprint_buv_lhs_exact(BATTERY[name], t) == pytest.approx(
            BUV_FROZEN[key], abs=1e-12)

    def test_symbolic_oracle_agrees(self):
        for name in ("majority", "clipped_mean"):
            exact = oracles.buv_lhs(oracles.fvalues(name, 3), 3)
            assert attacks.fingerprint_buv_lhs_exact(BATTERY[name], 3) == pytest.approx(
                float(exact), abs=1e-12)

    @given(st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
    def test_lower_bound(self, t, seed):
        vals = np.random.default_rng(seed).uniform(-1, 1, 2 ** t)
        assert attacks.fingerprint_buv_lhs_exact(lambda X: vals, t) >= 1 / 3 - 1e-8


def test_battery_report():
    reports = attacks.run_fingerprint_battery()
    assert len(reports) == 6 * 4 * 3 + 6 * 4
    assert all(r.passed for r in reports)
    assert all(r.abs_error == abs(r.lhs_value - r.target) for r in reports)
    bad = attacks.run_fingerprint_battery(weight=lambda a, p: 0.5 * attacks.r_weight(a, p))
    assert not all(r.passed for r in bad)


class TestStatistics:

    def _setup(self, seed=0, d=50, t=6):
        rng = np.random.default_rng(seed)
        inst = tasks.draw_hard_mean_instance(d, t, 1.0, rng)
        data = tasks.sample_est_data(inst, 1, rng)
        return inst, data, rng

    def test_oracle_learner_zero(self):
        inst, data, _ = self._setup()
        exact = MeanLearnerOutput(inst.target_means(), inst.p.copy())
        assert attacks.trace_jdp(inst, exact, 2, data.sample(2), exact) == (0.0, 0.0)
        assert attacks.trace_meta(inst, inst.p, data.sample(0)) == 0.0

    def test_trace_jdp_by_hand(self):
        inst = MeanInstance(np.array([0.0, 0.5]), np.array([0, 1, 1]))
        out = MeanLearnerOutput(np.array([1.0, 0.0, 1.0]))
        sample = EstSample(np.array([1, -1]), 0)
        # l=1: (0 - .5)(-1 - .5) = .75; l=2: (1 - .5)(-1 - .5) = -.75
        assert attacks.trace_jdp(inst, out, 0, sample, out) == (0.0, 0.0)
        t, _ = attacks.trace_jdp(inst, out, 1, sample, out)
        assert t == pytest.approx(1.0 * 1.0 - 0.75)

    def test_trace_errors(self):
        inst, data, _ = self._setup()
        out = MeanLearnerOutput(inst.target_means())
        with pytest.raises(IndexError):
            attacks.trace_jdp(inst, out, 6, data.sample(0), out)
        with pytest.raises(ValueError):
            attacks.trace_meta(inst, np.zeros(3), data.sample(0))

    def test_trace_sign_zero_weights(self):
        inst = MeanInstance(np.array([0.5, -0.5]), np.array([0, 1, 0]), lam=0.5)
        signs = SignLearnerOutput(np.array([1, -1, 1]))
        sample = EstSample(np.array([1, 1]), 0)
        assert attacks.trace_sign(inst, signs, 0, sample, signs) == (0.0, 0.0)

    def test_trace_sign_rejects_unit_mean(self):
        inst = MeanInstance(np.array([1.0, 0.0]), np.array([0, 1]))
        signs = SignLearnerOutput(np.array([1, 1]))
        with pytest.raises(ValueError):
            attacks.trace_sign(inst, signs, 1, EstSample(np.array([1, 1]), 1), signs, lam=0.5)

    def test_delta_ranges(self):
        attacks.check_mean_attack_delta(1e-4, 10)
        with pytest.raises(attacks.PreconditionError):
            attacks.check_mean_attack_delta(1 / 960, 10)
        attacks.check_sign_attack_delta(0.04, 10)
        with pytest.raises(attacks.PreconditionError):
            attacks.check_sign_attack_delta(0.05, 10)


def _jdp_sums(d, t, trials, seed):
    """Per trial: sum_i T_i, sum_i T'_i and sum (p_hat - p)^2 for the nonprivate learner."""
    learner = learners.mean_learner("nonprivate")
    s_in, s_out, sq = [], [], []
    for k in range(trials):
        rng = np.random.default_rng([seed, k])
        inst = tasks.draw_hard_mean_instance(d, t, 1.0, rng)
        if tasks.has_duplicate_indices(inst.j):
            continue
        data = tasks.sample_est_data(inst, 1, rng)
        out = learner(data, rng)
        a = b = 0.0
        for i in range(t):
            fresh = tasks.sample_product(inst.p, (1,), rng)
            ti, tp = attacks.trace_jdp(inst, out, i, data.sample(i),
                                       learner(data.replace(i, fresh), rng))
            a += ti
            b += tp
        s_in.append(a)
        s_out.append(b)
        sq.append(float(np.sum((out.per_person_estimate - inst.target_means()) ** 2)))
    return np.array(s_in), np.array(s_out), np.array(sq)


class TestTracingMonteCarlo:

    def test_jdp_statistic(self):
        t = 20
        s_in, s_out, sq = _jdp_sums(400, t, 3000, 1)
        n = s_in.size
        se = s_in.std(ddof=1) / math.sqrt(n)
        # Per coordinate E[(p_hat - p) sum_{i != l}(x_i - p)] = (t-1)/t E[1 - p^2].
        assert abs(s_in.mean() - (t - 1) * 2 / 3) < 4 * se
        assert s_in.mean() >= t / 3 - sq.mean()
        assert abs(s_out.mean()) < 4 * s_out.std(ddof=1) / math.sqrt(n)

    def test_meta_fresh_sample_centered(self):
        rng = np.random.default_rng(2)
        vals = []
        for _ in range(3000):
            inst = tasks.draw_hard_mean_instance(100, 10, 1.0, rng)
            board = learners.billboard_mean(tasks.sample_est_data(inst, 1, rng), 5.0,
                                            rng).billboard
            fresh = EstSample(tasks.sample_product(inst.p, (), rng), 0)
            vals.append(attacks.trace_meta(inst, board, fresh))
        vals = np.array(vals)
        assert abs(vals.mean()) < 4 * vals.std(ddof=1) / math.sqrt(vals.size)

    def test_meta_in_sample_trend(self):
        d, t = 300, 10
        rng = np.random.default_rng(3)
        sums, alphas = [], []
        for _ in range(1000):
            inst = tasks.draw_hard_mean_instance(d, t, 1.0, rng)
            data = tasks.sample_est_data(inst, 1, rng)
            board = learners.billboard_mean(data, 1e4, rng).billboard
            sums.append(sum(attacks.trace_meta(inst, board, data.sample(i)) for i in range(t)))
            alphas.append(np.mean(0.25 * (board - inst.p) ** 2))
        sums, alphas = np.array(sums), np.array(alphas)
        assert sums.mean() >= d / 3 - 4 * d * alphas.mean()

    def test_sign_tracing_identity(self):
        clf = learners.class_learner("nonprivate")
        est = lambda data, rng: learners.sign_estimator_from_classifier(clf, data, rng)
        res = attacks.sign_tracing_experiment(est, d=2000, t=20, lam=0.5, trials=600, seed=4)
        n = res.full_sum.size
        target = res.lam * res.t - 4 * res.sign_error
        gap = res.full_sum - target
        assert abs(gap.mean()) < 4 * gap.std(ddof=1) / math.sqrt(n)
        # A permutation-symmetric learner spreads the correlation evenly over
        # the t first samples, so dropping each person's own sample keeps (t-1)/t.
        rest = res.tracing_sum - (res.t - 1) / res.t * target
        assert abs(rest.mean()) < 4 * rest.std(ddof=1) / math.sqrt(n)
        assert abs(res.resampled_sum.mean()) < 4 * res.resampled_sum.std(ddof=1) / math.sqrt(n)


class TestMembershipInference:

    def test_oracle_learner_powerless(self):
        holder = {}
        rep = attacks.membership_inference_experiment(
            attacks.oracle_learner(holder), 50, 5, 1000, 0, inst_holder=holder)
        assert rep.tpr == rep.fpr == 0.0
        assert np.all(rep.stats_in == 0) and np.all(rep.stats_out == 0)

    def test_preconditions(self):
        learner = learners.mean_learner("nonprivate")
        with pytest.raises(attacks.PreconditionError):
            attacks.membership_inference_experiment(learner, 10, 1, 1000, 0)
        with pytest.raises(attacks.PreconditionError):
            attacks.membership_inference_experiment(learner, 10, 5, 10, 0)
        with pytest.raises(attacks.PreconditionError):
            attacks.membership_inference_experiment(learner, 10, 5, 1000, 0, epsilon=1.0,
                                                    delta=0.01)

    def test_deterministic(self):
        learner = learners.mean_learner("billboard", 1.0)
        a = attacks.membership_inference_experiment(learner, 40, 5, 1000, 9)
        b = attacks.membership_inference_experiment(learner, 40, 5, 1000, 9)
        assert a.stats_in.tobytes() == b.stats_in.tobytes()
        assert a.to_dict() == b.to_dict()

    def test_uncoupled_mode(self):
        learner = learners.mean_learner("billboard", 1.0)
        a = attacks.membership_inference_experiment(learner, 40, 5, 1000, 9, coupled=False)
        b = attacks.membership_inference_experiment(learner, 40, 5, 1000, 9, coupled=True)
        assert np.array_equal(a.stats_in, b.stats_in)
        assert not np.array_equal(a.stats_out, b.stats_out)

    def test_statistic_bound_and_centering(self):
        rho, delta = 0.5, 1e-4
        eps = privacy.zcdp_to_approx_dp(rho, delta).epsilon
        for fw in ("jdp", "billboard"):
            rep = attacks.membership_inference_experiment(
                learners.mean_learner(fw, rho), 200, 10, 2000, 5, epsilon=eps, delta=delta)
            lhs, rhs, se = rep.statistic_dp_check()
            assert lhs <= rhs + 3 * se
            assert abs(rep.mean_out) < 4 * rep.std_out / math.sqrt(rep.trials)
            assert rep.tpr <= rep.dp_tpr_bound + 3 * rep.dp_bound_se

    def test_report_json(self):
        rep = attacks.membership_inference_experiment(
            learners.mean_learner("nonprivate"), 30, 4, 1000, 1)
        d = json.loads(json.dumps(rep.to_dict()))
        assert d["statistic"] == "colluders" and d["dp_tpr_bound"] is None
