import math
import unittest
import warnings

from dataclasses import replace
from unittest import mock

import numpy as np
import numpy.testing as npt
from tvab import app, graphs, objectives, theory

if __name__ == '__main__':
    unittest.main()


class TestSequences(unittest.TestCase):

    def test_compute_v(self):
        seq = graphs.make_gossip(5, seed=0)
        v = theory.compute_v(seq, 40)
        assert v.shape == (41, 5)
        npt.assert_array_equal(v[0], np.ones(5))
        npt.assert_allclose(v.sum(axis=1), 5)
        assert np.all(v > 0)

        with self.assertRaises(ValueError):
            theory.compute_v(seq, 0)

    def test_compute_v_doubly_stochastic(self):
        seq = graphs.make_static(graphs.directed_cycle(4))
        npt.assert_allclose(theory.compute_v(seq, 10), 1)

    def test_r_matrices(self):
        seq = graphs.make_gossip(4, seed=1)
        v = theory.compute_v(seq, 20)
        R = theory.r_matrices(seq, v, 20)
        assert R.shape == (20, 4, 4)
        npt.assert_allclose(R.sum(axis=2), 1)

        with self.assertRaises(ValueError):
            theory.r_matrices(seq, v, 21)

    def test_approx_phi_doubly_stochastic(self):
        for seq in [graphs.make_static(graphs.directed_cycle(4)),
                    graphs.make_static(graphs.complete_graph(4))]:
            with self.subTest(seq=seq):
                phi = theory.approx_phi(seq, horizon=20)
                assert phi.shape == (21, 4)
                npt.assert_allclose(phi, 0.25, atol=1e-10)

    def test_approx_phi_recursion(self):
        seqs = [graphs.make_periodic(5, period=3),
                graphs.make_clustered(2, 3, 3, seed=0),
                graphs.make_random_c_bounded(4, 2, seed=0)]
        for seq in seqs:
            with self.subTest(kind=seq.kind):
                phi = theory.approx_phi(seq, horizon=30)
                assert theory.phi_recursion_residual(seq, phi) <= 1e-12
                npt.assert_allclose(phi.sum(axis=1), 1)
                assert np.all(phi > 0)

    def test_approx_phi_not_ergodic(self):
        seq = graphs.make_static(graphs.self_loops(3))
        with self.assertRaises(objectives.ConvergenceError) as cm:
            theory.approx_phi(seq, C=1, horizon=5, tail=5)

        assert cm.exception.achieved == 1

    def test_approx_phi_needs_C(self):
        with self.assertRaises(ValueError):
            theory.approx_phi(graphs.make_gossip(3), horizon=5)

    def test_aps_state(self):
        seq = graphs.make_periodic(4, period=2)
        aps = theory.aps_state(seq, horizon=12)
        assert aps.v.shape == (13, 4)
        assert aps.phi.shape == (14, 4)
        assert aps.mu_disagreement <= 1e-12
        assert aps.delta > 0

        lower = 4.0 ** (-4 * 2)
        assert np.all(aps.theta >= lower)
        assert np.all(aps.theta <= 1)

    def test_theta_complete(self):
        seq = graphs.make_static(graphs.complete_graph(2))
        aps = theory.aps_state(seq, horizon=5)
        npt.assert_allclose(aps.theta, 0.5)

    def test_observed_bounds(self):
        seq = graphs.make_static(graphs.complete_graph(2))
        assert theory.observed_bounds(seq, 5) == (0.5, 0.5)

        seq = graphs.make_static(graphs.directed_cycle(5))
        assert theory.observed_bounds(seq, 5) == (0.5, 0.5)

    def test_ergodicity_complete(self):
        seq = graphs.make_static(graphs.complete_graph(3))
        report = theory.ergodicity_check(seq, T=20)
        assert report.disagreement.max() <= 1e-14
        assert report.fitted_rate == 0
        assert report.blocks_to(1e-8) == 1

    def test_ergodicity_periodic(self):
        seq = graphs.make_periodic(4, period=2)
        report = theory.ergodicity_check(seq, T=200)
        assert 0 < report.fitted_rate < 1
        assert report.blocks_to(1e-8) is not None
        assert report.blocks_to(1e-8) <= 200

    def test_ergodicity_no_mixing(self):
        seq = graphs.make_static(graphs.self_loops(3))
        report = theory.ergodicity_check(seq, C=1, T=10)
        npt.assert_array_equal(report.disagreement, 1)
        assert report.blocks_to(1e-8) is None


class TestContractionConstants(unittest.TestCase):

    def test_n2_c1(self):
        c = theory.contraction_constants(2, 1, 0.5, 0.5, 1.0)
        npt.assert_allclose(c.Q_A, 80 / 3)
        assert c.Cbar_A == 24
        assert c.gamma_A < 1
        # one step shorter is not enough
        assert c.Q_A * 0.75 ** ((c.Cbar_A - 2) / 2) >= 1

        npt.assert_allclose(c.tau, 0.5 / 2 ** 3)
        assert c.gamma_B < 1
        assert c.Q_B * (1 - c.tau ** 2) ** ((c.Cbar_B - 2) / 2) >= 1
        assert c.Cbar == max(c.Cbar_A, c.Cbar_B) == c.Cbar_B
        npt.assert_allclose(c.m, 4 * c.Q_B)
        assert c.representable

    def test_n3_c2(self):
        c = theory.contraction_constants(3, 2, 1 / 3, 1 / 3, 1.0)
        assert c.log_gamma_A < 0
        assert c.log_gamma_B < 0
        assert c.Cbar_B > c.Cbar_A >= 2
        npt.assert_allclose(c.log_Cbar, math.log(c.Cbar))

    def test_alpha_to_one(self):
        log_Q = []
        for alpha in [0.5, 0.9, 0.999, 1.0]:
            with self.subTest(alpha=alpha):
                c = theory.contraction_constants(2, 1, alpha, 0.5, 1.0)
                assert c.Cbar_A is not None
                assert c.log_gamma_A < 0
                log_Q.append(c.log_Q_A)

        assert log_Q == sorted(log_Q)

    def test_log_domain(self):
        c = theory.contraction_constants(10, 10, 0.1, 0.1, 1.0)
        assert c.Cbar_B is None
        assert c.Cbar is None
        assert not c.representable
        assert math.isfinite(c.log_Q_A)
        assert c.log_Cbar >= 700
        with self.assertRaises(OverflowError):
            theory.build_M(c, 10, 10, 1.0, 0.1)

    def test_invalid(self):
        for alpha in [0, -0.5, 1.5]:
            with self.subTest(alpha=alpha):
                with self.assertRaises(ValueError):
                    theory.contraction_constants(2, 1, alpha, 0.5, 1.0)

        with self.assertRaises(ValueError):
            theory.contraction_constants(0, 1, 0.5, 0.5, 1.0)

    def test_to_dict(self):
        c = theory.contraction_constants(2, 1, 0.5, 0.5, 1.0)
        d = c.to_dict()
        assert d['Cbar_A'] == 24
        assert d['Cbar'] == c.Cbar


class TestPerturbationSystem(unittest.TestCase):

    def setUp(self):
        self.constants = theory.contraction_constants(2, 1, 0.5, 0.5, 1.0)
        self.system = theory.build_M(self.constants, 2, 1, 1.0, 1.0)
        # small companion with well separated roots, for dense comparisons
        self.small = replace(self.system, Cbar=5).with_gammas(0.1, 0.1)

    def test_build_M_args(self):
        with self.assertRaises(ValueError):
            theory.build_M(self.constants, 2, 1, 1.0, 1.0, eta=-1)

        with self.assertRaises(ValueError):
            theory.build_M(self.constants, 3, 1, 1.0, 1.0)

    def test_blocks(self):
        M1, M2, MC = self.system.blocks(0.0)
        m = self.constants.m
        npt.assert_allclose(M1, [[0, 0, 0], [0, 1, 0],
                                 [2 * m * math.sqrt(2), 0, 0]])
        npt.assert_allclose(MC[0, 0], self.constants.gamma_A)
        npt.assert_allclose(MC[2, 2], self.constants.gamma_B)
        npt.assert_allclose(self.system.M1_E[1, 1], -1.0 / 2)
        assert self.system.dim == 3 * self.constants.Cbar

    def test_materialize(self):
        M = self.small.materialize(0.0).toarray()
        assert M.shape == (15, 15)
        npt.assert_array_equal(M[3:, :12], np.eye(12))
        npt.assert_array_equal(M[3:, 12:], 0)
        npt.assert_allclose(M[:3, :3], self.small.M1_0)
        for j in (1, 2, 3):
            npt.assert_allclose(M[:3, 3 * j:3 * j + 3], self.small.M2_0)

        npt.assert_allclose(M[:3, 12:], self.small.MC_0)

        ME = self.small.ME.toarray()
        npt.assert_allclose(ME[:3, :3], self.small.M1_E)
        npt.assert_array_equal(ME[3:], 0)

        with self.assertRaises(ValueError):
            self.system.materialize()

    def test_structural_matches_dense(self):
        for eta in [0.0, 1e-5, 1e-3]:
            with self.subTest(eta=eta):
                dense = theory.spectral_radius(self.small.materialize(eta))
                structural = theory.spectral_radius(self.small.at(eta))
                npt.assert_allclose(structural, dense, rtol=1e-6)

    def test_spectral_radius_explicit(self):
        A = np.array([[0.5, 0.5], [0.25, 0.75]])
        npt.assert_allclose(theory.spectral_radius(A), 1, rtol=1e-8)
        npt.assert_allclose(theory.spectral_radius(np.zeros((3, 3))), 0)

        with self.assertRaises(ValueError):
            theory.spectral_radius(-A)

        with self.assertRaises(ValueError):
            theory.spectral_radius(np.ones((2, 3)))

    def test_companion_radius_at_zero(self):
        assert theory.companion_log_radius(self.system, 0.0) == 0.0

    def test_verify_unit_eigenvalue(self):
        report = theory.verify_unit_eigenvalue(self.system,
                                               self.constants.Cbar)
        assert report.ok
        assert report.rho_ok
        assert report.simple_ok
        assert report.deflated_log_radius < 0
        assert report.u_residual <= 1e-12
        assert report.w_residual <= 1e-12
        assert report.wu == 1.0

    def test_verify_unit_eigenvalue_perturbed(self):
        report = theory.verify_unit_eigenvalue(
            self.system.with_gammas(gamma_A=1.5))
        assert not report.rho_ok
        assert report.log_rho > 0
        assert not report.ok

    def test_verify_unit_eigenvalue_cbar_mismatch(self):
        with self.assertRaises(ValueError):
            theory.verify_unit_eigenvalue(self.system, 7)

    def test_perturbation_derivative(self):
        report = theory.perturbation_derivative(self.system, 2, 1, 1.0)
        npt.assert_allclose(report.wMEu, -0.5)
        npt.assert_allclose(report.predicted, -0.5)
        assert report.exact_ok
        assert report.slope < 0
        assert report.slope_ok
        assert report.ok

    def test_perturbation_derivative_zero_mu(self):
        system = theory.build_M(self.constants, 2, 1, 1.0, 0.0)
        report = theory.perturbation_derivative(system, 2, 1, 0.0)
        assert report.wMEu == 0
        assert math.isnan(report.slope)
        assert report.ok

    def test_eta_threshold(self):
        eta_star = theory.eta_threshold(self.constants, 2, 1, 1.0, 1.0)
        assert 0 < eta_star <= 1.0
        assert theory.companion_log_radius(self.system, eta_star / 2) < 0
        assert theory.companion_log_radius(self.system, 2 * eta_star) > 0

    def test_eta_threshold_inside_range(self):
        with mock.patch.object(theory, '_stable', return_value=True):
            eta_star = theory.eta_threshold(self.constants, 2, 1, 1.0, 1.0)

        assert 0 < eta_star < 2 / (2 * 1.0)
        npt.assert_allclose(eta_star, 1.0, rtol=1e-5)

    def test_eta_threshold_zero_mu(self):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always')
            eta_star = theory.eta_threshold(self.constants, 2, 1, 1.0, 0.0)

        assert eta_star == 0
        assert len(caught) >= 1


class TestTraceChecks(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.problem = objectives.make_quadratic_problem(2, 2, seed=0,
                                                        ridge=0.5)
        cls.seq = graphs.make_static(graphs.complete_graph(2))
        cls.constants = theory.contraction_constants(
            2, 1, 0.5, 0.5, cls.problem.L)
        cls.system = theory.build_M(cls.constants, 2, 1, cls.problem.L,
                                    cls.problem.mu)
        cls.eta_star = theory.eta_threshold(cls.constants, 2, 1,
                                            cls.problem.L, cls.problem.mu)
        cls.K = cls.constants.Cbar + 200
        cls.aps = theory.aps_state(cls.seq, 1, cls.K)

    def tk_at(self, eta):
        trace = app.run(self.problem, self.seq, eta, self.K, seed=0,
                        keep_states=True)
        return theory.trace_t(trace.states, self.aps.phi, self.aps.v,
                              trace.x_star)

    def test_inequality_system(self):
        for eta in [0.0, self.eta_star / 2]:
            with self.subTest(eta=eta):
                tk = self.tk_at(eta)
                report = theory.check_inequality_system(
                    tk, self.system.at(eta), self.constants.Cbar)
                assert report.checked == self.K - self.constants.Cbar + 1
                assert report.violations == 0
                assert report.ok

    def test_inequality_system_corrupted(self):
        eta = self.eta_star / 2
        tk = self.tk_at(eta).corrupted(self.constants.Cbar + 10, 1, 10)
        report = theory.check_inequality_system(tk, self.system.at(eta))
        assert report.violations >= 1
        assert report.violations_per_component[1] >= 1

    def test_inequality_system_short(self):
        tk = theory.TkTrace(np.ones((10, 3)), np.ones(10))
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always')
            report = theory.check_inequality_system(tk, self.system)

        assert report.checked == 0
        assert len(caught) == 1

    def test_one_step_bounds(self):
        eta = self.eta_star / 2
        tk = self.tk_at(eta)
        report = theory.check_one_step_bounds(
            tk, 2, 1, self.problem.L, self.problem.mu, eta,
            theta=self.aps.theta)
        assert report.optimality_checked
        assert report.tracker_violations == 0
        assert report.optimality_violations == 0
        assert report.theta_ok
        assert report.ok

    def test_trace_t_shapes(self):
        tk = self.tk_at(0.0)
        assert tk.t.shape == (self.K + 1, 3)
        npt.assert_array_equal(tk.r, tk.t[:, 1])
        assert np.all(tk.t >= 0)

    def test_trace_t_needs_trackers(self):
        trace = app.run(self.problem, self.seq, 0.01, 5,
                        method='subgradient-push-const', keep_states=True)
        with self.assertRaises(ValueError):
            theory.trace_t(trace.states, self.aps.phi, self.aps.v,
                           trace.x_star)

    def test_contraction_ratio(self):
        P = np.array([[0.5, 0.5], [0.25, 0.75]])
        w = np.array([1 / 3, 2 / 3])
        ratios = theory.contraction_ratio(P, w, w, np.ones((3, 2)))
        npt.assert_array_equal(ratios, 0)

        b = np.random.default_rng(0).normal(size=(5, 2))
        npt.assert_allclose(theory.contraction_ratio(np.eye(2), w, w, b), 1)

    def test_multistep_contraction(self):
        report = theory.multistep_contraction_check(
            self.seq, self.constants, trials=200, aps=self.aps)
        assert report.ok
        assert report.max_ratio_A <= report.gamma_A
        assert report.max_ratio_B <= report.gamma_B

    def test_multistep_contraction_too_large(self):
        c = theory.contraction_constants(3, 2, 1 / 3, 1 / 3, 1.0)
        with self.assertRaises(ValueError):
            theory.multistep_contraction_check(
                graphs.make_periodic(3, period=2), c)


class TestCertify(unittest.TestCase):

    def test_certify_n2(self):
        problem = objectives.make_quadratic_problem(2, 2, seed=0, ridge=0.5)
        seq = graphs.make_static(graphs.complete_graph(2))
        report = theory.certify(problem, seq, trials=100)
        assert report.constants.Cbar_A == 24
        assert report.eta_star > 0
        assert report.unit_eigenvalue.ok
        assert report.derivative.ok
        assert report.contraction.ok
        assert report.inequality.violations == 0
        assert report.one_step_bounds.ok
        assert report.phi_residual <= 1e-12
        assert report.ok

        text = report.to_text()
        assert '[constants]' in text
        assert 'Cbar_A: 24' in text
        assert text.endswith('ok: True\n')

    def test_certify_large_cbar(self):
        problem = objectives.make_quadratic_problem(4, 2, seed=0, ridge=0.5)
        seq = graphs.make_periodic(4, period=2)
        report = theory.certify(problem, seq)
        assert report.constants.representable
        assert report.constants.Cbar > theory.RUN_LIMIT
        assert report.unit_eigenvalue is not None
        assert report.inequality is None
        assert report.contraction is None
        assert any('too large' in note for note in report.notes)

    def test_certify_not_representable(self):
        problem = objectives.make_quadratic_problem(10, 2, seed=0)
        seq = graphs.make_random_c_bounded(10, 10, seed=0)
        report = theory.certify(problem, seq, horizon=20)
        assert not report.constants.representable
        assert report.eta_star is None
        assert not report.ok
        assert '[notes]' in report.to_text()
