import numpy as np
import pytest

from wet_sim.channel import RicianConfig, gen_channel
from wet_sim.learner import (
    AccpmLearner,
    CapacityError,
    ScheduleError,
    advance_covariance,
    feedback_bit,
    finalize_estimate,
    init_covariance,
    plan_groups,
    probing_matrix_multi,
    probing_matrix_single,
)
from conftest import random_psd


def drive_learner(realization, learner, n_learn, ts=1.0):
    """Run the feedback loop against a perfect measurement oracle."""
    k_users = realization.k_users
    q_prev = np.zeros(k_users)
    covariances = []
    for n in range(1, n_learn + 1):
        s = learner.covariance
        covariances.append(s)
        q = np.array(
            [
                ts * realization.gains[k] * np.trace(realization.normalized[k] @ s).real
                for k in range(k_users)
            ]
        )
        bits = {k: feedback_bit(q[k], q_prev[k]) for k in learner.active_users(n)}
        q_prev = q
        learner.observe(bits)
    return covariances


class TestFeedbackBit:
    def test_increase(self):
        assert feedback_bit(5.0, 3.0) == -1

    def test_decrease(self):
        assert feedback_bit(3.0, 5.0) == 1

    def test_tie_counts_as_no_drop(self):
        assert feedback_bit(4.0, 4.0) == -1


class TestInitCovariance:
    def test_quarter_identity(self):
        assert np.allclose(init_covariance(4, 1.0), 0.25 * np.eye(4))

    def test_two_antennas(self):
        assert np.allclose(init_covariance(2, 2.0), np.eye(2))

    def test_trace_is_power(self):
        for m, p in [(2, 0.5), (5, 3.0)]:
            assert np.trace(init_covariance(m, p)).real == pytest.approx(p)


class TestPlanGroups:
    def test_six_users_single_subset(self):
        plan = plan_groups(6, 4, 60)
        assert plan.num_subsets == 1
        assert plan.user_subsets == ((0, 1, 2, 3, 4, 5),)
        assert list(plan.interval_subsets[0]) == list(range(1, 61))

    def test_twenty_users_two_subsets(self):
        plan = plan_groups(20, 4, 60)
        assert plan.num_subsets == 2
        assert plan.user_subsets[0] == tuple(range(10))
        assert plan.user_subsets[1] == tuple(range(10, 20))
        assert list(plan.interval_subsets[0]) == list(range(1, 31))
        assert list(plan.interval_subsets[1]) == list(range(31, 61))

    def test_single_user(self):
        assert plan_groups(1, 4, 10).num_subsets == 1

    def test_partition_covers_and_disjoint(self):
        plan = plan_groups(20, 4, 61)
        seen = [n for block in plan.interval_subsets for n in block]
        assert sorted(seen) == list(range(1, 62))
        assert len(set(seen)) == len(seen)

    def test_horizon_too_short(self):
        with pytest.raises(ScheduleError):
            plan_groups(20, 4, 1)


class TestProbing:
    def test_orthogonal_to_center(self, rng):
        b = probing_matrix_single(0.5 * np.eye(2), 1.0, rng)
        assert abs(np.trace(0.5 * np.eye(2) @ b).real) <= 1e-12

    def test_probe_norm(self, rng):
        from wet_sim.hermitian import cvec

        b = probing_matrix_single(0.5 * np.eye(3), 1.0, rng)
        assert np.linalg.norm(cvec(b)) == pytest.approx(0.1, abs=1e-12)

    def test_orthogonality_sweep(self, rng):
        for _ in range(1000):
            c = random_psd(rng, 2) + 0.05 * np.eye(2)
            b = probing_matrix_single(c, 1.0, rng)
            bound = 1e-10 * np.linalg.norm(c) * max(np.linalg.norm(b), 1e-30)
            assert abs(np.trace(c @ b).real) <= bound

    def test_multi_orthogonal_centers(self, rng):
        c1 = np.diag([0.6, 0.2])
        c2 = np.diag([0.2, 0.6])
        b = probing_matrix_multi([c1, c2], 1.0, rng)
        for c in (c1, c2):
            assert abs(np.trace(c @ b).real) <= 1e-12

    def test_full_capacity_random_sweep(self, rng):
        m = 2
        for _ in range(50):
            centers = [random_psd(rng, m) + 0.05 * np.eye(m) for _ in range(m * m - 1)]
            b = probing_matrix_multi(centers, 1.0, rng)
            for c in centers:
                bound = 1e-10 * np.linalg.norm(c) * max(np.linalg.norm(b), 1e-30)
                assert abs(np.trace(c @ b).real) <= bound

    def test_capacity_error(self, rng):
        centers = [random_psd(rng, 2) + 0.05 * np.eye(2) for _ in range(4)]
        with pytest.raises(CapacityError):
            probing_matrix_multi(centers, 1.0, rng)


class TestAdvanceCovariance:
    def test_first_step_always_accepts(self, rng):
        s0 = init_covariance(4, 1.0)
        s1, b = advance_covariance(s0, [0.5 * np.eye(4)], 1.0, rng)
        assert np.trace(s1).real == pytest.approx(1.0, abs=1e-12)
        assert np.linalg.eigvalsh(s1).min() >= -1e-12

    def test_zero_probe_is_noop(self, rng):
        s0 = init_covariance(4, 1.0)
        s1, b = advance_covariance(s0, [0.5 * np.eye(4)], 1.0, rng, p_norm=0.0)
        assert np.allclose(s1, s0)
        assert np.allclose(b, 0.0)

    def test_trace_never_exceeds_power(self, rng):
        s = init_covariance(4, 1.0)
        center = 0.5 * np.eye(4)
        for _ in range(50):
            s, _ = advance_covariance(s, [center], 1.0, rng)
            assert np.trace(s).real <= 1.0 + 1e-12
            assert np.linalg.eigvalsh(s).min() >= -1e-9

    def test_first_trial_acceptance_rate(self, rng):
        # from the documented start, a fresh probe of norm P/10 is always safe
        s0 = init_covariance(4, 1.0)
        center = 0.5 * np.eye(4)
        accepted = 0
        trials = 2000
        for _ in range(trials):
            b = probing_matrix_multi([center], 1.0, rng)
            s = s0 + b
            ok = (
                np.trace(s).real <= 1.0 + 1e-12
                and np.linalg.eigvalsh(s).min() >= -1e-12
            )
            accepted += ok
        assert accepted / trials > 0.9


class TestLearnerLoop:
    def sv_realization(self, rng, k_users=1):
        return gen_channel(RicianConfig(k_users=k_users), rng)

    def test_interval_one_records_no_cut(self, rng):
        real = self.sv_realization(rng)
        learner = AccpmLearner(4, 1, 1.0, 5, rng)
        drive_learner(real, learner, 1)
        assert learner.problems[0].n_cuts == 0
        assert learner.n == 2

    def test_oracle_consistency_and_feasibility(self, rng):
        real = self.sv_realization(rng, k_users=2)
        learner = AccpmLearner(4, 2, 1.0, 25, rng)
        covs = drive_learner(real, learner, 25)
        for s in covs:
            assert np.trace(s).real <= 1.0 + 1e-12
            assert np.linalg.eigvalsh(s).min() >= -1e-9
        for k in range(2):
            g_true = real.normalized[k]
            for cut in learner.problems[k].cuts:
                slack = cut.sign * np.trace(g_true @ cut.delta_s).real
                assert slack <= 1e-9 * np.linalg.norm(cut.delta_s)
        assert learner.diagnostics.dropped_cuts == 0

    def test_new_center_strictly_inside_new_cut(self, rng):
        real = self.sv_realization(rng)
        learner = AccpmLearner(4, 1, 1.0, 15, rng)
        drive_learner(real, learner, 15)
        problem = learner.problems[0]
        from wet_sim.hermitian import cvec

        slacks = problem.slacks(cvec(learner.centers[0]))
        assert slacks.min() > 0

    def test_cut_lists_only_grow(self, rng):
        real = self.sv_realization(rng)
        learner = AccpmLearner(4, 1, 1.0, 12, rng)
        counts = []
        q_prev = np.zeros(1)
        for n in range(1, 13):
            s = learner.covariance
            q = np.array([np.trace(real.normalized[0] @ s).real * real.gains[0]])
            learner.observe({0: feedback_bit(q[0], q_prev[0])})
            q_prev = q
            counts.append(learner.problems[0].n_cuts)
        assert counts == sorted(counts)
        assert counts[-1] == 11

    def test_estimate_error_improves(self, rng):
        real = self.sv_realization(rng)
        learner = AccpmLearner(4, 1, 1.0, 40, rng)
        errs = {}
        q_prev = np.zeros(1)
        for n in range(1, 41):
            s = learner.covariance
            q = np.array([np.trace(real.normalized[0] @ s).real * real.gains[0]])
            learner.observe({0: feedback_bit(q[0], q_prev[0])})
            q_prev = q
            if n in (10, 40):
                errs[n] = np.linalg.norm(learner.estimate(0) - real.normalized[0])
        assert errs[40] < errs[10]

    def test_finalize_unit_norm(self, rng):
        real = self.sv_realization(rng)
        learner = AccpmLearner(4, 1, 1.0, 10, rng)
        drive_learner(real, learner, 10)
        est = learner.estimate(0)
        assert np.linalg.norm(est) == pytest.approx(1.0, abs=1e-12)
        assert np.linalg.eigvalsh(est).min() >= -1e-12

    def test_finalize_half_identity(self):
        est = finalize_estimate(0.5 * np.eye(2))
        assert np.allclose(est, np.eye(2) / np.sqrt(2))

    def test_multiuser_grouped_windows(self, rng):
        # 20 users at m_t=4 forces two subsets and a split horizon
        real = self.sv_realization(rng, k_users=20)
        learner = AccpmLearner(4, 20, 1.0, 20, rng)
        drive_learner(real, learner, 20)
        for k in range(10):
            assert learner.problems[k].n_cuts >= 1
        # second-window users got the boundary interval cut too
        for k in range(10, 20):
            assert learner.problems[k].n_cuts >= 1
        assert learner.diagnostics.dropped_cuts == 0

    def test_scale_invariance_of_learning(self, rng):
        real = self.sv_realization(rng, k_users=2)
        l1 = AccpmLearner(4, 2, 1.0, 15, np.random.default_rng(5))
        drive_learner(real, l1, 15)
        real.gains = real.gains * 7.3
        l2 = AccpmLearner(4, 2, 1.0, 15, np.random.default_rng(5))
        drive_learner(real, l2, 15)
        for k in range(2):
            assert np.allclose(l1.centers[k], l2.centers[k])
