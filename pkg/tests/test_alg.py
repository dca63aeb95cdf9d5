import unittest
from dataclasses import replace
import numpy as np
import numpy.testing as npt
from tvab import alg, graphs, objectives, weights

if __name__ == '__main__':
    unittest.main()


class TestAlg(unittest.TestCase):
    def Ax_setup(self, n):
        A = np.eye(n) + 0.1 * np.ones([n, n])
        x = np.arange(n, dtype=float)
        return A, x

    def Ax_y_setup(self, n, lamda):
        A, x = self.Ax_setup(n)
        y = A @ x
        x_numpy = np.linalg.solve(
            A.T @ A + lamda * np.eye(n), A.T @ y)

        return A, x_numpy, y

    def test_PowerMethod(self):
        n = 5
        A, x = self.Ax_setup(n)
        x_hat = np.random.default_rng(0).random([n, 1])
        alg_method = alg.PowerMethod(lambda x: A.T @ A @ x, x_hat)
        while (not alg_method.done()):
            alg_method.update()

        s_numpy = np.linalg.svd(A, compute_uv=False)[0]
        s_tvab = np.linalg.norm(A @ x_hat)
        npt.assert_allclose(s_numpy, s_tvab, atol=1e-3)

    def test_PowerMethod_tol(self):
        n = 5
        A, _ = self.Ax_setup(n)
        alg_method = alg.PowerMethod(lambda x: A @ x, np.ones(n),
                                     max_iter=1000, tol=1e-12, restart=10)
        while (not alg_method.done()):
            alg_method.update()

        assert alg_method.iter < 1000
        npt.assert_allclose(alg_method.max_eig, 1.5, rtol=1e-10)

    def test_GradientMethod(self):
        n = 5
        lamda = 0.1
        A, x_numpy, y = self.Ax_y_setup(n, lamda)

        # Compute step-size
        lipschitz = np.linalg.svd(
            A.T @ A + lamda * np.eye(n), compute_uv=False)[0]
        alpha = 1.0 / lipschitz

        x = np.zeros([n])
        alg_method = alg.GradientMethod(
            lambda x: A.T @ (A @ x - y) + lamda * x, x, alpha, max_iter=1000)
        while (not alg_method.done()):
            alg_method.update()

        npt.assert_allclose(x, x_numpy)

    def test_NewtonsMethod(self):
        n = 5
        lamda = 0.1
        A, x_numpy, y = self.Ax_y_setup(n, lamda)
        H = A.T @ A + lamda * np.eye(n)

        x = np.zeros([n])
        alg_method = alg.NewtonsMethod(
            lambda x: H @ x - A.T @ y,
            lambda x: (lambda g: np.linalg.solve(H, g)), x, max_iter=1)
        while (not alg_method.done()):
            alg_method.update()

        npt.assert_allclose(x, x_numpy)

    def test_NewtonsMethod_requires_f(self):
        with self.assertRaises(TypeError):
            alg.NewtonsMethod(None, None, np.zeros(2), beta=0.5)


class TestDistributed(unittest.TestCase):

    def setUp(self):
        self.problem = objectives.make_quadratic_problem(3, 2, seed=0,
                                                         ridge=1.0)
        self.x_star = objectives.solve_centralized(self.problem)
        self.x0 = np.random.default_rng(0).normal(size=(3, 2))

    def run_method(self, method, seq, eta, max_iter):
        method_alg = alg.make_method(method, self.problem,
                                     weights.weight_function(seq), self.x0,
                                     eta, max_iter)
        while not method_alg.done():
            method_alg.update()

        return method_alg.state

    def test_exact_methods_converge(self):
        seqs = [graphs.make_static(graphs.complete_graph(3)),
                graphs.make_periodic(3, period=3)]
        for method in ['tvab', 'push-diging']:
            for seq in seqs:
                with self.subTest(method=method, kind=seq.kind):
                    state = self.run_method(method, seq, 0.01, 6000)
                    assert state.k == 6000
                    npt.assert_allclose(
                        state.x, np.tile(self.x_star, (3, 1)), atol=1e-8)

    def test_tvab_step(self):
        wp = weights.uniform_weights(graphs.directed_cycle(3))
        state = alg.init_state(self.problem, self.x0)
        eta = 0.1
        new = alg.tvab_step(state, wp, self.problem, eta)
        x = wp.A @ self.x0 - eta * state.y
        npt.assert_allclose(new.x, x)
        npt.assert_allclose(
            new.y, wp.B @ state.y + self.problem.stacked_gradient(x)
            - self.problem.stacked_gradient(self.x0))
        assert new.k == 1

    def test_single_agent_is_gradient_descent(self):
        problem = objectives.make_quadratic_problem(1, 3, seed=4, ridge=0.5)
        seq = graphs.make_static(graphs.self_loops(1))
        x0 = np.random.default_rng(2).normal(size=(1, 3))
        eta = 1 / problem.L
        method_alg = alg.make_method('tvab', problem,
                                     weights.weight_function(seq), x0, eta,
                                     200)

        x = x0[0].copy()
        while not method_alg.done():
            method_alg.update()
            x = x - eta * problem.gradient(x)
            npt.assert_allclose(method_alg.state.x[0], x, rtol=0,
                                atol=1e-12)

        assert method_alg.state.k == 200

    def test_subgradient_push_step(self):
        wp = weights.uniform_weights(graphs.directed_cycle(3))
        for diminishing in [False, True]:
            with self.subTest(diminishing=diminishing):
                state = alg.init_state(self.problem, self.x0,
                                       method='subgradient-push-const')
                state = replace(state, k=3)
                new = alg.baseline_subgradient_push_step(
                    state, wp, self.problem, 0.1, diminishing=diminishing)
                mass = wp.B @ np.ones((3, 1))
                z = wp.B @ self.x0 / mass
                step = 0.1 / 2 if diminishing else 0.1
                npt.assert_allclose(new.mass, mass)
                npt.assert_allclose(new.x, z)
                npt.assert_allclose(
                    new.u, wp.B @ self.x0
                    - step * self.problem.stacked_gradient(z))
                assert new.y is None
                assert new.k == 4

    def test_push_diging_step(self):
        wp = weights.uniform_weights(graphs.directed_cycle(3))
        state = alg.init_state(self.problem, self.x0, method='push-diging')
        new = alg.baseline_push_diging_step(state, wp, self.problem, 0.1)
        u = wp.B @ (self.x0 - 0.1 * state.y)
        x = u / (wp.B @ np.ones((3, 1)))
        npt.assert_allclose(new.u, u)
        npt.assert_allclose(new.x, x)
        npt.assert_allclose(
            new.y, wp.B @ state.y + self.problem.stacked_gradient(x)
            - self.problem.stacked_gradient(self.x0))
        assert new.conservation_error() < 1e-12

    def test_tvab_conservation(self):
        seq = graphs.make_random_c_bounded(3, 2, seed=1)
        method_alg = alg.TVAB(self.problem, weights.weight_function(seq),
                              self.x0, 0.05, 100)
        while not method_alg.done():
            method_alg.update()
            assert method_alg.state.conservation_error() < 1e-9

    def test_push_sum_mass(self):
        seq = graphs.make_gossip(3, seed=0)
        for method in ['subgradient-push-const', 'subgradient-push-dimin',
                       'push-diging']:
            with self.subTest(method=method):
                state = self.run_method(method, seq, 0.01, 50)
                npt.assert_allclose(state.mass.sum(), 3)
                assert np.all(state.mass > 0)
                if method == 'push-diging':
                    npt.assert_allclose(state.x, state.u / state.mass)

    def test_subgradient_push_neighborhood(self):
        seq = graphs.make_static(graphs.complete_graph(3))
        state = self.run_method('subgradient-push-dimin', seq, 0.1, 2000)
        x_bar = state.x.mean(axis=0)
        assert np.linalg.norm(x_bar - self.x_star) < \
            np.linalg.norm(self.x0.mean(axis=0) - self.x_star)

    def test_divergence(self):
        seq = graphs.make_static(graphs.complete_graph(3))
        with self.assertRaises(alg.DivergenceError) as cm:
            self.run_method('tvab', seq, 100.0, 500)

        assert cm.exception.method == 'tvab'
        assert 0 < cm.exception.iter <= 500

    def test_zero_eta_keeps_consensus(self):
        seq = graphs.make_periodic(3, period=3)
        state = self.run_method('tvab', seq, 0.0, 300)
        disagreement = np.abs(state.x - state.x.mean(axis=0)).max()
        assert disagreement < 1e-6

    def test_negative_eta(self):
        with self.assertRaises(ValueError):
            alg.TVAB(self.problem, None, self.x0, -1.0, 10)

    def test_unknown_method(self):
        with self.assertRaises(ValueError):
            alg.make_method('dgd', self.problem, None, self.x0, 0.1, 10)

        with self.assertRaises(ValueError):
            alg.init_state(self.problem, self.x0, method='dgd')

    def test_relabel_equivariance(self):
        perm = [2, 0, 1]
        seq = graphs.make_periodic(3, period=3)
        state = self.run_method('tvab', seq, 0.05, 30)

        problem = self.problem.relabel(perm)
        perm_seq = graphs.make_periodic(
            graphs=[g.relabel(perm) for g in seq.graphs(0, 3)])
        method_alg = alg.TVAB(problem, weights.weight_function(perm_seq),
                              alg.NetworkState(0, self.x0).relabel(perm).x,
                              0.05, 30)
        while not method_alg.done():
            method_alg.update()

        npt.assert_allclose(method_alg.state.x, state.relabel(perm).x,
                            rtol=1e-10, atol=1e-12)
