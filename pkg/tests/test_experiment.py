import csv
import os
import tempfile
import unittest
import warnings

import numpy as np
import numpy.testing as npt
import yaml
from tvab import alg, config, experiment

if __name__ == '__main__':
    unittest.main()


def _config(out='results', **sections):
    data = {
        'name': 'small',
        'problem': {'family': 'quadratic', 'n': 3, 'p': 2, 'ridge': 1.0},
        'graph': {'kind': 'static', 'topology': 'complete'},
        'methods': [{'method': 'tvab', 'eta': [0.01, 0.02]},
                    {'method': 'push-diging', 'eta': 0.01}],
        'run': {'K': 200, 'x0': 'gaussian', 'seeds': [0]},
        'output': {'dir': out},
    }
    data.update(sections)
    return data


class TestConfig(unittest.TestCase):

    def test_from_dict_defaults(self):
        cfg = experiment.ExperimentConfig.from_dict(_config())
        assert cfg.name == 'small'
        assert cfg.problem['seed'] == 0
        assert cfg.graph['seed'] == 0
        assert cfg.etas(0) == [0.01, 0.02]
        assert cfg.etas(1) == [0.01]
        assert cfg.out_dir == os.path.join('results', 'small')

    def test_config_errors(self):
        cases = [
            ({'problem': {'family': 'hinge', 'n': 3}}, 'problem.family'),
            ({'problem': {'family': 'quadratic', 'n': 0}}, 'problem.n'),
            ({'problem': {'family': 'quadratic', 'n': True}}, 'problem.n'),
            ({'graph': {'kind': 'ring'}}, 'graph.kind'),
            ({'graph': {'kind': 'static', 'topology': 'star'}},
             'graph.topology'),
            ({'graph': {'kind': 'clustered', 'clusters': 2,
                        'cluster_size': 2, 'C': 3}}, 'graph.cluster_size'),
            ({'graph': {'kind': 'random-c-bounded'}}, 'graph.C'),
            ({'methods': []}, 'methods'),
            ({'methods': [{'method': 'tvab', 'eta': 0.1},
                          {'method': 'dgd', 'eta': 0.1}]},
             'methods[1].method'),
            ({'methods': [{'method': 'tvab', 'eta': [0.1, -0.1]}]},
             'methods[0].eta[1]'),
            ({'methods': [{'method': 'tvab'}]}, 'methods[0].eta'),
            ({'run': {'x0': 'gaussian'}}, 'run.K'),
            ({'run': {'K': 10, 'x0': 'uniform'}}, 'run.x0'),
            ({'run': {'K': 10, 'seeds': [-1]}}, 'run.seeds[0]'),
            ({'extra': {}}, 'extra'),
        ]
        for sections, field in cases:
            with self.subTest(field=field):
                with self.assertRaises(experiment.ConfigError) as cm:
                    experiment.ExperimentConfig.from_dict(_config(**sections))

                assert cm.exception.field == field

    def test_missing_section(self):
        data = _config()
        del data['problem']
        with self.assertRaises(experiment.ConfigError) as cm:
            experiment.ExperimentConfig.from_dict(data)

        assert cm.exception.field == 'config.problem'

    def test_dump(self):
        cfg = experiment.ExperimentConfig.from_dict(_config())
        data = yaml.safe_load(cfg.dump())
        assert data == cfg.to_dict()
        assert experiment.ExperimentConfig.from_dict(data) == cfg

    def test_override(self):
        cfg = experiment.ExperimentConfig.from_dict(_config())
        new = cfg.override(seed=3, horizon=10, out='elsewhere')
        assert new.run['seeds'] == [3]
        assert new.run['K'] == 10
        assert new.output['dir'] == 'elsewhere'
        assert cfg.run['seeds'] == [0]
        assert cfg.run['K'] == 200

    def test_load(self):
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, 'small.yaml')
            with open(path, 'w') as f:
                yaml.safe_dump(_config(), f)

            cfg = experiment.load_config(path)
            assert cfg.base_dir == d
            assert cfg.resolve('graphs.txt') == os.path.join(d, 'graphs.txt')

        with self.assertRaises(experiment.ConfigError) as cm:
            experiment.load_config('no-such-preset')

        assert cm.exception.field == 'config'

    def test_presets(self):
        for name in experiment.PRESETS:
            with self.subTest(name=name):
                cfg = experiment.load_config(name)
                assert cfg.name == name
                seq = experiment.build_sequence(cfg)
                assert seq.n == cfg.problem['n']


class TestFitRate(unittest.TestCase):

    def test_geometric(self):
        residuals = 10.0 ** (-0.1 * np.arange(100))
        fit = experiment.fit_rate(residuals)
        npt.assert_allclose(fit.slope, -0.1)
        npt.assert_allclose(fit.intercept, 0, atol=1e-10)
        npt.assert_allclose(fit.r2, 1)
        assert fit.window == (10, 99)
        assert fit.points == 90

    def test_floor(self):
        residuals = np.concatenate([2.0 ** (-np.arange(20.)), np.zeros(80)])
        fit = experiment.fit_rate(residuals, burn_in=0)
        assert fit.points == 20
        assert fit.window == (0, 19)
        npt.assert_allclose(fit.slope, -np.log10(2))

    def test_too_few(self):
        with self.assertRaises(ValueError):
            experiment.fit_rate(np.zeros(100))

        with self.assertRaises(ValueError):
            experiment.fit_rate(np.ones(5))


class TestRunExperiment(unittest.TestCase):

    def test_run_experiment(self):
        with tempfile.TemporaryDirectory() as d:
            cfg = experiment.ExperimentConfig.from_dict(_config(out=d))
            result = experiment.run_experiment(cfg)

            assert len(result.traces) == 3
            assert len(result.fits) == 3
            assert [t.method for t in result.traces] == [
                'tvab', 'tvab', 'push-diging']
            assert all(t.status == 'ok' for t in result.traces)
            assert len(result.select('tvab')) == 2
            assert len(result.select('tvab', 0.02)) == 1

            out_dir = os.path.join(d, 'small')
            assert result.out_dir == out_dir
            for name in ['tvab_eta0.01_seed0.csv', 'tvab_eta0.02_seed0.csv',
                         'push-diging_eta0.01_seed0.csv', 'config.yaml',
                         'summary.csv']:
                assert os.path.isfile(os.path.join(out_dir, name)), name

            assert os.path.isfile(os.path.join(d, 'plot_results.py'))

            with open(result.summary_path) as f:
                rows = list(csv.DictReader(f))

            assert len(rows) == 3
            assert tuple(rows[0]) == experiment.SUMMARY_COLUMNS
            assert rows[1]['eta'] == '0.02'
            assert rows[2]['file'] == 'push-diging_eta0.01_seed0.csv'
            assert float(rows[0]['max_conservation']) < 1e-9

            saved = experiment.load_config(os.path.join(out_dir,
                                                        'config.yaml'))
            assert saved == cfg

    def test_run_experiment_divergent(self):
        data = _config(methods=[{'method': 'tvab', 'eta': 100.0}])
        cfg = experiment.ExperimentConfig.from_dict(data)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always')
            result = experiment.run_experiment(cfg, write=False)

        assert len(caught) >= 1
        assert result.traces[0].status == 'diverged'
        assert result.out_dir is None


class TestGridSearch(unittest.TestCase):

    def setUp(self):
        data = _config(
            problem={'family': 'quadratic', 'n': 1, 'p': 2, 'ridge': 0.5},
            methods=[{'method': 'tvab', 'eta': 0.1}],
            run={'K': 50})
        self.cfg = experiment.ExperimentConfig.from_dict(data)
        problem = experiment.build_problem(self.cfg)
        self.L, self.mu = problem.L, problem.mu

    def test_best(self):
        best_eta = 2 / (self.mu + self.L)
        grid = [1e-3 / self.L, best_eta, 10 / self.L]
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            best = experiment.grid_search_eta(self.cfg, grid=grid)

        assert best == {'tvab': best_eta}

    def test_all_diverge(self):
        grid = [10 / self.L, 20 / self.L]
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            with self.assertRaises(experiment.GridError) as cm:
                experiment.grid_search_eta(self.cfg, grid=grid)

        assert cm.exception.method == 'tvab'
        assert cm.exception.grid == grid

    def test_empty_grid(self):
        with self.assertRaises(ValueError):
            experiment.grid_search_eta(self.cfg, grid=[])

    def test_methods_filter(self):
        best = experiment.grid_search_eta(self.cfg, methods=['push-diging'])
        assert best == {}


class TestCheck(unittest.TestCase):

    def test_check(self):
        cfg = experiment.ExperimentConfig.from_dict(_config())
        report = experiment.check(cfg)
        names = [name for name, _, _ in report.rows]
        assert 'C-bounded (C=1)' in names
        assert 'tracker conservation' in names
        assert 'phi recursion' in names
        assert report.ok

        text = report.to_text()
        assert text.startswith('check')
        assert 'NO' not in text

    def test_check_gossip(self):
        cfg = experiment.ExperimentConfig.from_dict(
            _config(graph={'kind': 'gossip'}))
        report = experiment.check(cfg, horizon=50)
        names = [name for name, _, _ in report.rows]
        assert 'phi recursion' not in names
        assert report.ok

    def test_certify_needs_C(self):
        cfg = experiment.ExperimentConfig.from_dict(
            _config(graph={'kind': 'gossip'}))
        with self.assertRaises(experiment.ConfigError) as cm:
            experiment.certify(cfg, write=False)

        assert cm.exception.field == 'graph.C'

    def test_certify_preset(self):
        with tempfile.TemporaryDirectory() as d:
            cfg = experiment.load_config('cert-n2c1').override(out=d)
            report = experiment.certify(cfg)
            assert report.ok
            with open(os.path.join(d, 'cert-n2c1', 'certificate.txt')) as f:
                assert f.read() == report.to_text()


def _single(name, method, eta):
    data = experiment.load_config(name).to_dict()
    data['methods'] = [{'method': method, 'eta': eta}]
    return experiment.ExperimentConfig.from_dict(data)


class TestPresetRuns(unittest.TestCase):

    def test_aliases(self):
        for alias, name in experiment.PRESET_ALIASES.items():
            with self.subTest(alias=alias):
                assert name in experiment.PRESETS
                assert experiment.load_config(alias).name == name

    def test_clustered_compares_all_methods(self):
        cfg = experiment.load_config('clustered-least-squares')
        assert sorted(entry['method'] for entry in cfg.methods) == sorted(
            alg.METHODS)

    def test_periodic_logistic(self):
        cfg = experiment.load_config('periodic-logistic')
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            result = experiment.run_experiment(cfg, write=False)

        [trace] = result.select('tvab', 0.002)
        assert trace.status == 'ok'
        assert trace.final_residual <= 1e-8
        fit = experiment.fit_rate(trace.residuals)
        assert fit.slope < 0
        assert fit.r2 >= 0.99

        best = {}
        for method in ('tvab', 'push-diging', 'subgradient-push-dimin'):
            finals = [t.final_residual for t in result.select(method)
                      if t.status == 'ok']
            assert finals, method
            best[method] = min(finals)

        assert best['tvab'] <= 1e-8
        assert best['tvab'] <= max(best['push-diging'],
                                   config.RESIDUAL_FLOOR)
        assert best['push-diging'] <= best['subgradient-push-dimin']

    def test_clustered_least_squares(self):
        cfg = _single('clustered-least-squares', 'tvab', 0.001)
        result = experiment.run_experiment(cfg, write=False)
        [trace] = result.traces
        assert trace.status == 'ok'
        assert len(trace.residuals) == cfg.run['K'] + 1
        assert trace.final_residual <= 1e-6

    def test_random_logistic(self):
        cfg = _single('random-logistic', 'tvab', 0.001)
        result = experiment.run_experiment(cfg, write=False)
        [trace] = result.traces
        assert trace.status == 'ok'
        fit = experiment.fit_rate(trace.residuals, floor=1e-12)
        assert fit.slope < 0
        assert fit.r2 >= 0.95

    def test_same_seed_same_bytes(self):
        outputs = []
        with tempfile.TemporaryDirectory() as d:
            for run in ('first', 'second'):
                cfg = experiment.load_config('periodic-logistic').override(
                    horizon=300, out=os.path.join(d, run))
                with warnings.catch_warnings():
                    warnings.simplefilter('ignore')
                    result = experiment.run_experiment(cfg)

                files = {}
                for name in sorted(os.listdir(result.out_dir)):
                    if name.endswith('_seed0.csv'):
                        with open(os.path.join(result.out_dir, name),
                                  'rb') as f:
                            files[name] = f.read()

                outputs.append(files)

        assert len(outputs[0]) == 16
        assert outputs[0] == outputs[1]
