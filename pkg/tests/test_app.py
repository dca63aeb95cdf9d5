import os
import tempfile
import unittest
import numpy as np
import numpy.testing as npt
from tvab import alg, app, graphs, objectives

if __name__ == '__main__':
    unittest.main()


class TestApp(unittest.TestCase):

    def setUp(self):
        self.problem = objectives.make_quadratic_problem(4, 2, seed=1,
                                                         ridge=1.0)
        self.seq = graphs.make_periodic(4, period=2)

    def test_run(self):
        trace = app.run(self.problem, self.seq, 0.01, 200, seed=3)
        assert len(trace.residuals) == 201
        assert trace.status == 'ok'
        assert trace.method == 'tvab'
        assert trace.seed == 3
        assert trace.final_residual < trace.residuals[0]
        assert trace.states is None
        assert np.max(trace.conservation) < 1e-9
        assert trace.wall_time >= 0

    def test_run_zero_iterations(self):
        trace = app.run(self.problem, self.seq, 0.01, 0)
        assert len(trace.residuals) == 1

        with self.assertRaises(ValueError):
            app.run(self.problem, self.seq, 0.01, -1)

    def test_run_deterministic(self):
        a = app.run(self.problem, self.seq, 0.01, 50, seed=7)
        b = app.run(self.problem, self.seq, 0.01, 50, seed=7)
        npt.assert_array_equal(a.residuals, b.residuals)

    def test_keep_states(self):
        trace = app.run(self.problem, self.seq, 0.01, 10, keep_states=True)
        assert len(trace.states) == 11
        assert [s.k for s in trace.states] == list(range(11))
        npt.assert_allclose(
            trace.residuals[-1],
            app.residual(trace.states[-1], trace.x_star))

    def test_methods(self):
        for method in alg.METHODS:
            with self.subTest(method=method):
                trace = app.run(self.problem, self.seq, 0.01, 20,
                                method=method)
                assert trace.method == method
                assert len(trace.residuals) == 21

    def test_divergence_trace(self):
        with self.assertRaises(alg.DivergenceError) as cm:
            app.run(self.problem, self.seq, 100.0, 500)

        trace = cm.exception.trace
        assert trace.status == 'diverged'
        assert trace.diverged_at == cm.exception.iter
        assert len(trace.residuals) == cm.exception.iter

    def test_residual(self):
        x_star = np.array([1.0, 0.0])
        x = np.array([[1.0, 0.0], [4.0, 4.0]])
        assert app.residual(x, x_star) == 2.5

        with self.assertRaises(ValueError):
            app.residual(np.zeros((2, 3)), x_star)

    def test_initial_estimates(self):
        x0 = app.initial_estimates('gaussian9', 2000, 1, seed=0)
        npt.assert_allclose(x0.std(), 3, rtol=0.1)
        npt.assert_array_equal(app.initial_estimates('zeros', 3, 2),
                               np.zeros((3, 2)))
        npt.assert_array_equal(app.initial_estimates('gaussian', 3, 2, 5),
                               app.initial_estimates('gaussian', 3, 2, 5))

        explicit = np.arange(6.).reshape(3, 2)
        npt.assert_array_equal(app.initial_estimates(explicit, 3, 2),
                               explicit)

        with self.assertRaises(ValueError):
            app.initial_estimates(explicit, 2, 3)

        with self.assertRaises(ValueError):
            app.initial_estimates('uniform', 3, 2)

    def test_to_csv(self):
        trace = app.run(self.problem, self.seq, 0.01, 5)
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, 'trace.csv')
            trace.to_csv(path)
            with open(path) as f:
                lines = f.read().splitlines()

        assert lines[0] == 'k,residual'
        assert len(lines) == 7
        k, r = lines[3].split(',')
        assert int(k) == 2
        assert float(r) == trace.residuals[2]
