"""Distributed optimization over time-varying directed graphs.

tvab simulates the TV-AB gradient-tracking method, in which every agent
mixes estimates with row-stochastic weights and gradient trackers with
column-stochastic weights, together with push-sum baselines. It also
computes and numerically checks the constants of its linear convergence
certificate.

"""
from .version import __version__ # noqa
from tvab import alg, app, config, graphs, objectives, theory, weights

from tvab.graphs import (GraphSequence, make_static, make_periodic,  # noqa
                         make_clustered, make_random_c_bounded, make_gossip)
from tvab.objectives import (make_logistic_problem,  # noqa
                             make_least_squares_problem,
                             make_linear_regression_problem,
                             make_quadratic_problem, solve_centralized)
from tvab.app import run  # noqa
from tvab.theory import certify  # noqa

__all__ = ['alg', 'app', 'config', 'graphs', 'objectives', 'theory',
           'weights', 'GraphSequence', 'make_static', 'make_periodic',
           'make_clustered', 'make_random_c_bounded', 'make_gossip',
           'make_logistic_problem', 'make_least_squares_problem',
           'make_linear_regression_problem', 'make_quadratic_problem',
           'solve_centralized', 'run', 'certify']
