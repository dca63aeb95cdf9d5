# -*- coding: utf-8 -*-
"""Configuration-driven experiments.

An experiment is a YAML mapping with five sections::

    name: periodic-logistic
    problem: {family: logistic, n: 8, m_i: 10, p: 6, lamda: 10.0, seed: 0}
    graph: {kind: periodic, period: 4}
    methods:
      - {method: tvab, eta: [0.002, 0.004]}
      - {method: push-diging, eta: 0.002}
    run: {K: 3000, x0: gaussian9, seeds: [0]}
    output: {dir: results}

:func:`run_experiment` runs every (method, eta, seed) over the same problem
and graph sequence, writes one ``k, residual`` CSV per run and a summary
table with a log-linear rate fit per run.
"""
import copy
import csv
import logging
import os
import warnings

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from tvab import alg, app, config, graphs, objectives, theory
from tvab.weights import validate_weights, weight_function


__all__ = ['ConfigError', 'GridError', 'ExperimentConfig', 'RateFit',
           'ExperimentResult', 'CheckReport', 'PRESETS', 'load_config',
           'build_problem', 'build_sequence', 'fit_rate', 'run_experiment',
           'write_summary', 'grid_search_eta', 'check', 'certify']

logger = logging.getLogger(__name__)

PRESET_DIR = os.path.join(os.path.dirname(__file__), 'presets')
PRESETS = ('periodic-logistic', 'clustered-least-squares', 'random-logistic',
           'gossip-regression', 'cert-n2c1', 'cert-n4c2')
PRESET_ALIASES = {'fig4': 'periodic-logistic',
                  'fig6': 'clustered-least-squares',
                  'fig7': 'random-logistic', 'fig8': 'gossip-regression'}

FAMILIES = ('logistic', 'least-squares', 'linear-regression', 'quadratic')
TOPOLOGIES = ('complete', 'cycle', 'edge-list')
SECTIONS = ('name', 'problem', 'graph', 'methods', 'run', 'output')


class ConfigError(ValueError):
    """Invalid experiment configuration.

    Attributes:
        field (str): dotted path of the offending field, e.g. ``graph.kind``.

    """

    def __init__(self, field, message):
        super().__init__('{}: {}'.format(field, message))
        self.field = field


class GridError(RuntimeError):
    """Every step size of a grid diverged."""

    def __init__(self, method, grid):
        super().__init__('{} diverged at every step size of {}'.format(
            method, list(grid)))
        self.method = method
        self.grid = list(grid)


def _get(section, key, path, kinds, default=None, required=False):
    if key not in section:
        if required:
            raise ConfigError('{}.{}'.format(path, key), 'is required')

        return default

    value = section[key]
    if isinstance(value, bool) and bool not in kinds:
        raise ConfigError('{}.{}'.format(path, key),
                          'expected {}, got {!r}'.format(
                              '/'.join(k.__name__ for k in kinds), value))

    if not isinstance(value, kinds):
        raise ConfigError('{}.{}'.format(path, key),
                          'expected {}, got {!r}'.format(
                              '/'.join(k.__name__ for k in kinds), value))

    return value


def _positive(value, path, allow_zero=False):
    if value < 0 or (value == 0 and not allow_zero):
        raise ConfigError(path, 'must be {}, got {!r}'.format(
            'nonnegative' if allow_zero else 'positive', value))

    return value


def _etas(entry, path):
    eta = entry.get('eta')
    if eta is None:
        raise ConfigError(path + '.eta', 'is required')

    etas = eta if isinstance(eta, list) else [eta]
    if not etas:
        raise ConfigError(path + '.eta', 'grid must not be empty')

    for j, e in enumerate(etas):
        if isinstance(e, bool) or not isinstance(e, (int, float)):
            raise ConfigError('{}.eta[{}]'.format(path, j),
                              'expected a number, got {!r}'.format(e))

        _positive(e, '{}.eta[{}]'.format(path, j))

    return [float(e) for e in etas]


@dataclass
class ExperimentConfig:
    """Validated experiment configuration.

    The sections are kept as plain mappings, so :meth:`to_dict` returns
    exactly what :meth:`from_dict` accepted, with defaults filled in.

    Attributes:
        name (str): experiment name, also the output subdirectory.
        problem (dict): ``family``, ``n``, ``seed`` and family parameters.
        graph (dict): ``kind``, ``seed``, optional ``C`` and kind parameters.
        methods (list of dict): ``method`` tag and ``eta``, a number or grid.
        run (dict): horizon ``K``, ``x0`` policy and ``seeds``.
        output (dict): output ``dir``.
        base_dir (str): directory relative paths are resolved against.

    """
    name: str
    problem: dict
    graph: dict
    methods: list
    run: dict
    output: dict
    base_dir: str = field(default='.', compare=False)

    @classmethod
    def from_dict(cls, data, base_dir='.'):
        if not isinstance(data, dict):
            raise ConfigError('config', 'expected a mapping, got {}'.format(
                type(data).__name__))

        unknown = sorted(set(data) - set(SECTIONS))
        if unknown:
            raise ConfigError(unknown[0], 'unknown section')

        data = copy.deepcopy(data)
        name = _get(data, 'name', 'config', (str, ), default='experiment')

        problem = _get(data, 'problem', 'config', (dict, ), required=True)
        family = _get(problem, 'family', 'problem', (str, ), required=True)
        if family not in FAMILIES:
            raise ConfigError('problem.family',
                              'unknown family {!r}, expected one of {}'.format(
                                  family, FAMILIES))

        problem['n'] = _positive(
            _get(problem, 'n', 'problem', (int, ), required=True),
            'problem.n')
        problem['seed'] = _positive(
            _get(problem, 'seed', 'problem', (int, ), default=0),
            'problem.seed', allow_zero=True)

        graph = _get(data, 'graph', 'config', (dict, ), required=True)
        kind = _get(graph, 'kind', 'graph', (str, ), required=True)
        if kind not in graphs.KINDS:
            raise ConfigError('graph.kind',
                              'unknown kind {!r}, expected one of {}'.format(
                                  kind, graphs.KINDS))

        graph['seed'] = _positive(
            _get(graph, 'seed', 'graph', (int, ), default=0),
            'graph.seed', allow_zero=True)
        C = _get(graph, 'C', 'graph', (int, ))
        if C is not None:
            _positive(C, 'graph.C')

        if kind == 'static':
            topology = _get(graph, 'topology', 'graph', (str, ),
                            default='complete')
            if topology not in TOPOLOGIES:
                raise ConfigError(
                    'graph.topology',
                    'unknown topology {!r}, expected one of {}'.format(
                        topology, TOPOLOGIES))

            graph['topology'] = topology
        elif kind == 'clustered':
            clusters = _get(graph, 'clusters', 'graph', (int, ), required=True)
            size = _get(graph, 'cluster_size', 'graph', (int, ),
                        required=True)
            _get(graph, 'C', 'graph', (int, ), required=True)
            if clusters * size != problem['n']:
                raise ConfigError(
                    'graph.cluster_size',
                    '{} clusters of {} do not make problem.n = {}'.format(
                        clusters, size, problem['n']))
        elif kind == 'random-c-bounded':
            _get(graph, 'C', 'graph', (int, ), required=True)

        if kind in ('static', 'periodic') and 'path' in graph:
            _get(graph, 'path', 'graph', (str, ))

        methods = _get(data, 'methods', 'config', (list, ), required=True)
        if not methods:
            raise ConfigError('methods', 'at least one method is required')

        for j, entry in enumerate(methods):
            path = 'methods[{}]'.format(j)
            if not isinstance(entry, dict):
                raise ConfigError(path, 'expected a mapping')

            method = _get(entry, 'method', path, (str, ), required=True)
            if method not in alg.METHODS:
                raise ConfigError(
                    path + '.method',
                    'unknown method {!r}, expected one of {}'.format(
                        method, alg.METHODS))

            _etas(entry, path)

        run = _get(data, 'run', 'config', (dict, ), default={})
        run['K'] = _positive(_get(run, 'K', 'run', (int, ), required=True),
                             'run.K', allow_zero=True)
        x0 = _get(run, 'x0', 'run', (str, ), default='gaussian')
        if x0 not in app.X0_POLICIES:
            raise ConfigError('run.x0',
                              'unknown policy {!r}, expected one of {}'.format(
                                  x0, app.X0_POLICIES))

        run['x0'] = x0
        seeds = _get(run, 'seeds', 'run', (list, ), default=[0])
        for j, s in enumerate(seeds):
            if isinstance(s, bool) or not isinstance(s, int) or s < 0:
                raise ConfigError('run.seeds[{}]'.format(j),
                                  'expected a nonnegative integer')

        run['seeds'] = seeds

        output = _get(data, 'output', 'config', (dict, ), default={})
        output['dir'] = _get(output, 'dir', 'output', (str, ),
                             default='results')

        return cls(name, problem, graph, methods, run, output,
                   base_dir=base_dir)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            data = yaml.safe_load(f)

        return cls.from_dict(data, base_dir=os.path.dirname(
            os.path.abspath(path)))

    def to_dict(self):
        return copy.deepcopy({
            'name': self.name, 'problem': self.problem, 'graph': self.graph,
            'methods': self.methods, 'run': self.run, 'output': self.output})

    def dump(self, path=None):
        """YAML text of the configuration, also written to path if given."""
        text = yaml.safe_dump(self.to_dict(), sort_keys=False)
        if path is not None:
            with open(path, 'w') as f:
                f.write(text)

        return text

    def override(self, seed=None, horizon=None, out=None):
        """Copy with the command line overrides applied."""
        data = self.to_dict()
        if seed is not None:
            data['run']['seeds'] = [seed]

        if horizon is not None:
            data['run']['K'] = horizon

        if out is not None:
            data['output']['dir'] = out

        return ExperimentConfig.from_dict(data, base_dir=self.base_dir)

    def resolve(self, path):
        return path if os.path.isabs(path) else os.path.join(
            self.base_dir, path)

    def etas(self, j):
        return _etas(self.methods[j], 'methods[{}]'.format(j))

    @property
    def out_dir(self):
        return os.path.join(self.output['dir'], self.name)


def load_config(name_or_path):
    """Load a preset by name or alias, or a configuration file by path."""
    if os.path.isfile(name_or_path):
        return ExperimentConfig.load(name_or_path)

    name_or_path = PRESET_ALIASES.get(name_or_path, name_or_path)
    if name_or_path in PRESETS:
        cfg = ExperimentConfig.load(
            os.path.join(PRESET_DIR, name_or_path + '.yaml'))
        cfg.base_dir = '.'
        return cfg

    raise ConfigError('config', 'no file or preset named {!r}; presets are '
                      '{}'.format(name_or_path, PRESETS))


def build_problem(cfg):
    """Problem of a configuration."""
    params = cfg.problem
    family = params['family']
    n, seed = params['n'], params['seed']
    try:
        if family == 'logistic':
            return objectives.make_logistic_problem(
                n, m_i=params.get('m_i', 10), p=params.get('p', 6),
                lamda=params.get('lamda', 1.0),
                label_noise_model=params.get('label_noise_model', 'bernoulli'),
                seed=seed)
        elif family == 'least-squares':
            return objectives.make_least_squares_problem(
                n, params.get('rows_i', 5), params.get('p', 10), seed=seed)
        elif family == 'linear-regression':
            return objectives.make_linear_regression_problem(
                n, samples=params.get('samples', 10),
                noise=params.get('noise', 0.1), line=params.get('line'),
                seed=seed)
        else:
            return objectives.make_quadratic_problem(
                n, params.get('p', 3), seed=seed,
                ridge=params.get('ridge', 0.1))
    except (TypeError, ValueError) as e:
        raise ConfigError('problem', str(e)) from e


def build_sequence(cfg):
    """Graph sequence of a configuration."""
    params = cfg.graph
    n = cfg.problem['n']
    kind, seed = params['kind'], params['seed']
    try:
        if kind == 'static':
            if params['topology'] == 'edge-list':
                graph = graphs.read_edge_list(
                    cfg.resolve(params['path']), n, count=1)[0]
            elif params['topology'] == 'cycle':
                graph = graphs.directed_cycle(n)
            else:
                graph = graphs.complete_graph(n)

            return graphs.make_static(graph)
        elif kind == 'periodic':
            if 'path' in params:
                return graphs.make_periodic(graphs=graphs.read_edge_list(
                    cfg.resolve(params['path']), n, count=params.get('count')))

            return graphs.make_periodic(n, period=params.get('period', 4))
        elif kind == 'clustered':
            return graphs.make_clustered(
                params['clusters'], params['cluster_size'], params['C'],
                seed=seed, chord_prob=params.get('chord_prob', 0.3))
        elif kind == 'random-c-bounded':
            return graphs.make_random_c_bounded(
                n, params['C'], seed=seed,
                edge_prob=params.get('edge_prob', 0.05))
        else:
            return graphs.make_gossip(n, seed=seed)
    except (OSError, ValueError) as e:
        raise ConfigError('graph', str(e)) from e


def _connectivity(cfg, seq):
    return cfg.graph.get('C', seq.C)


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of ``log10(residual)`` against k.

    Attributes:
        slope (float): per-iteration slope of log10 residuals.
        intercept (float): log10 residual at k = 0 of the fitted line.
        r2 (float): coefficient of determination.
        window (tuple): first and last iteration used.
        points (int): number of residuals used.

    """
    slope: float
    intercept: float
    r2: float
    window: tuple
    points: int


def fit_rate(residuals, floor=config.RESIDUAL_FLOOR, burn_in=0.1,
             min_points=10):
    """Fit a geometric rate to a residual trace.

    The first ``burn_in`` fraction of the trace is discarded; of the rest,
    only finite residuals above floor are used.

    Raises:
        ValueError: if fewer than min_points residuals remain.

    """
    residuals = np.asarray(residuals, dtype=float)
    k = np.arange(len(residuals))
    start = int(burn_in * len(residuals))
    keep = (k >= start) & np.isfinite(residuals) & (residuals > floor)
    if keep.sum() < min_points:
        raise ValueError(
            'rate fit needs {} residuals above {:.0e}, got {}'.format(
                min_points, floor, int(keep.sum())))

    k = k[keep]
    y = np.log10(residuals[keep])
    slope, intercept = np.polyfit(k, y, 1)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    ss_res = float(((y - (slope * k + intercept)) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1 - ss_res / ss_tot
    return RateFit(float(slope), float(intercept), r2,
                   (int(k[0]), int(k[-1])), int(len(k)))


@dataclass
class ExperimentResult:
    """Traces and fits of one experiment.

    Attributes:
        config (ExperimentConfig): configuration that was run.
        traces (list of RunTrace): one per (method, eta, seed).
        fits (list of RateFit or None): aligned with traces.
        out_dir (str or None): directory the CSVs were written to.
        summary_path (str or None): summary table.

    """
    config: ExperimentConfig
    traces: list
    fits: list
    out_dir: Optional[str] = None
    summary_path: Optional[str] = None

    def select(self, method, eta=None):
        return [t for t in self.traces if t.method == method
                and (eta is None or t.eta == eta)]


def _csv_name(trace):
    return '{}_eta{:g}_seed{}.csv'.format(trace.method, trace.eta,
                                          trace.seed)


def _run_one(problem, seq, cfg, method, eta, seed, x_star, show_pbar):
    try:
        trace = app.run(problem, seq, eta, cfg.run['K'],
                        x0_policy=cfg.run['x0'], method=method, seed=seed,
                        x_star=x_star, show_pbar=show_pbar)
    except alg.DivergenceError as e:
        warnings.warn(str(e))
        trace = e.trace

    trace.extra['max_conservation'] = float(np.max(trace.conservation))
    return trace


def run_experiment(cfg, write=True, show_pbar=False):
    """Run every (method, eta, seed) of a configuration.

    Divergent runs are kept with status ``'diverged'`` and a warning.

    Args:
        cfg (ExperimentConfig): configuration.
        write (bool): toggle writing CSVs, the summary, the resolved config
            and the plotting script under ``output.dir/name``.
        show_pbar (bool): toggle progress bars.

    Returns:
        ExperimentResult.

    """
    problem = build_problem(cfg)
    seq = build_sequence(cfg)
    x_star = objectives.solve_centralized(problem)
    logger.info('%s: %r over %r, L=%.4g, mu=%.4g', cfg.name, problem, seq,
                problem.L, problem.mu)

    traces = []
    fits = []
    for j, entry in enumerate(cfg.methods):
        for eta in cfg.etas(j):
            for seed in cfg.run['seeds']:
                trace = _run_one(problem, seq, cfg, entry['method'], eta,
                                 seed, x_star, show_pbar)
                try:
                    fit = fit_rate(trace.residuals)
                except ValueError:
                    fit = None

                logger.info('%s eta=%g seed=%d: %s, final residual %.3e',
                            trace.method, eta, seed, trace.status,
                            trace.final_residual)
                traces.append(trace)
                fits.append(fit)

    result = ExperimentResult(cfg, traces, fits)
    if write:
        out_dir = cfg.out_dir
        os.makedirs(out_dir, exist_ok=True)
        for trace in traces:
            trace.to_csv(os.path.join(out_dir, _csv_name(trace)))

        cfg.dump(os.path.join(out_dir, 'config.yaml'))
        result.out_dir = out_dir
        result.summary_path = write_summary(
            os.path.join(out_dir, 'summary.csv'), traces, fits)

        from tvab import plot
        plot.emit_plot_script(cfg.output['dir'])

    return result


SUMMARY_COLUMNS = ('method', 'eta', 'seed', 'status', 'final_residual',
                   'slope', 'r2', 'max_conservation', 'wall_time', 'file')


def write_summary(path, traces, fits):
    """Write one row per (method, eta, seed)."""
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(SUMMARY_COLUMNS)
        for trace, fit in zip(traces, fits):
            writer.writerow([
                trace.method, repr(trace.eta), trace.seed, trace.status,
                repr(trace.final_residual),
                '' if fit is None else repr(fit.slope),
                '' if fit is None else repr(fit.r2),
                repr(trace.extra.get('max_conservation', 0.0)),
                '{:.3f}'.format(trace.wall_time), _csv_name(trace)])

    return path


def grid_search_eta(cfg, grid=None, methods=None, show_pbar=False):
    """Best step size per method.

    The best step size minimizes the final residual of the first seed among
    runs that did not diverge.

    Args:
        cfg (ExperimentConfig): configuration.
        grid (list of float or None): step sizes, each method's own eta
            list when None.
        methods (list of str or None): restrict to these method tags.

    Returns:
        dict: method -> best eta.

    Raises:
        GridError: if every step size diverges for a method.

    """
    if grid is not None and len(grid) == 0:
        raise ValueError('grid must not be empty')

    problem = build_problem(cfg)
    seq = build_sequence(cfg)
    x_star = objectives.solve_centralized(problem)
    seed = cfg.run['seeds'][0]

    best = {}
    for j, entry in enumerate(cfg.methods):
        method = entry['method']
        if methods is not None and method not in methods:
            continue

        etas = cfg.etas(j) if grid is None else [float(e) for e in grid]
        finals = {}
        for eta in etas:
            trace = _run_one(problem, seq, cfg, method, eta, seed, x_star,
                             show_pbar)
            if trace.status == 'ok' and np.isfinite(trace.final_residual):
                finals[eta] = trace.final_residual

        if not finals:
            raise GridError(method, etas)

        best[method] = min(finals, key=finals.get)
        logger.info('%s: best eta %g with final residual %.3e', method,
                    best[method], finals[best[method]])

    return best


@dataclass
class CheckReport:
    """Pass/fail table of the invariant suite."""
    rows: list = field(default_factory=list)

    def add(self, name, passed, value):
        self.rows.append((name, bool(passed), value))

    @property
    def ok(self):
        return all(passed for _, passed, _ in self.rows)

    def to_text(self):
        width = max([len(name) for name, _, _ in self.rows] + [5])
        lines = ['{:<{w}}  {:<4}  {}'.format('check', 'pass', 'value',
                                             w=width)]
        for name, passed, value in self.rows:
            lines.append('{:<{w}}  {:<4}  {}'.format(
                name, 'yes' if passed else 'NO', value, w=width))

        return '\n'.join(lines) + '\n'


def check(cfg, horizon=None):
    """Invariant suite of a configuration.

    Checks the weights of every iteration up to the horizon, the
    connectivity bound, gradient-tracking conservation along a TV-AB run with
    the first configured TV-AB step size, and the absolute probability
    recursion when a connectivity bound is known.

    Returns:
        CheckReport.

    """
    problem = build_problem(cfg)
    seq = build_sequence(cfg)
    horizon = horizon or max(min(cfg.run['K'], 1000), 1)
    weights = weight_function(seq)
    report = CheckReport()

    row_err = col_err = 0.0
    diag_ok = pattern_ok = True
    for k in range(horizon):
        diag = validate_weights(weights(k), seq.graph_at(k))
        row_err = max(row_err, diag.row_err)
        col_err = max(col_err, diag.col_err)
        diag_ok &= diag.diag_ok
        pattern_ok &= diag.pattern_ok

    report.add('row-stochastic A', row_err <= config.STOCHASTIC_TOL, row_err)
    report.add('column-stochastic B', col_err <= config.STOCHASTIC_TOL,
               col_err)
    report.add('positive diagonals', diag_ok, diag_ok)
    report.add('weights match edges', pattern_ok, pattern_ok)
    report.add('self-loops', all(seq.graph_at(k).has_self_loops()
                                 for k in range(horizon)), horizon)

    C = _connectivity(cfg, seq)
    if C is not None and horizon >= C:
        report.add('C-bounded (C={})'.format(C),
                   graphs.check_c_bounded(seq, C, horizon), horizon)

    etas = [cfg.etas(j)[0] for j, e in enumerate(cfg.methods)
            if e['method'] == 'tvab']
    if etas:
        try:
            trace = app.run(problem, seq, etas[0], horizon,
                            x0_policy=cfg.run['x0'],
                            seed=cfg.run['seeds'][0])
            conservation = float(np.max(trace.conservation))
        except alg.DivergenceError as e:
            conservation = float(np.max(e.trace.conservation))

        report.add('tracker conservation',
                   conservation <= config.CONSERVATION_RTOL, conservation)

    if C is not None:
        try:
            phi = theory.approx_phi(seq, C, min(horizon, 200))
            resid = theory.phi_recursion_residual(seq, phi)
            report.add('phi recursion', resid <= 1e-10, resid)
        except objectives.ConvergenceError as e:
            report.add('phi recursion', False, e.achieved)

    return report


def certify(cfg, horizon=None, seed=None, write=True, show_pbar=False):
    """Certification report of a configuration, see :func:`theory.certify`.

    Returns:
        CertificationReport; its text is written to
        ``output.dir/name/certificate.txt`` when write is set.

    """
    problem = build_problem(cfg)
    seq = build_sequence(cfg)
    C = _connectivity(cfg, seq)
    if C is None:
        raise ConfigError('graph.C', 'a connectivity bound is required to '
                          'certify a {} sequence'.format(seq.kind))

    seed = cfg.run['seeds'][0] if seed is None else seed
    report = theory.certify(problem, seq, C, horizon=horizon, seed=seed,
                            show_pbar=show_pbar)
    if write:
        os.makedirs(cfg.out_dir, exist_ok=True)
        with open(os.path.join(cfg.out_dir, 'certificate.txt'), 'w') as f:
            f.write(report.to_text())

    return report
