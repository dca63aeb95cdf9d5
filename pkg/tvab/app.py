# -*- coding: utf-8 -*-
"""This module contains an abstract class App that drives an Alg with a
progress bar, and the Run App that executes a distributed method over a
graph sequence and records its residual trace.
"""
import csv
import time

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from tqdm.auto import tqdm

from tvab import alg as alg_module
from tvab import util
from tvab.objectives import solve_centralized
from tvab.weights import weight_function


__all__ = ['App', 'Run', 'RunTrace', 'X0_POLICIES', 'initial_estimates',
           'residual', 'run']

X0_POLICIES = ('gaussian9', 'gaussian', 'zeros')


class App(object):
    """Abstraction for iterative applications.

    The standard way to run an App object, say app, is as follows:

        >>> app.run()

    Each App must have a core Alg object. The run() function runs the Alg,
    with additional convenient features, such as a progress bar, which
    can be toggled with the show_pbar option.

    The user can also optionally define a _pre_update and a _post_update
    function to performs tasks before and after the Alg.update.

    Args:
        alg (Alg): Alg object.
        show_pbar (bool): toggle whether show progress bar.
        leave_pbar (bool): toggle whether to leave progress bar after finished.
        record_time (bool): toggle whether to record the time per update.

    Attributes:
        alg (Alg)
        show_pbar (bool)
        leave_pbar (bool)

    """

    def __init__(self, alg, show_pbar=True, leave_pbar=True,
                 record_time=True):
        self.alg = alg
        self.show_pbar = show_pbar
        self.leave_pbar = leave_pbar
        self.record_time = record_time
        if self.record_time:
            self.time = [0]

    def _pre_update(self):
        return

    def _post_update(self):
        return

    def _summarize(self):
        return

    def _output(self):
        return

    def run(self):
        """Run the App.

        """
        if self.show_pbar:
            if self.__class__.__name__ == 'App':
                name = self.alg.__class__.__name__
            else:
                name = self.__class__.__name__

            self.pbar = tqdm(
                total=self.alg.max_iter, desc=name, leave=self.leave_pbar)

        try:
            while not self.alg.done():
                if self.record_time:
                    start_time = time.perf_counter()

                self._pre_update()
                self.alg.update()
                self._post_update()

                if self.record_time:
                    self.time.append(
                        self.time[-1] + time.perf_counter() - start_time)

                self._summarize()
                if self.show_pbar:
                    self.pbar.update()
        finally:
            if self.show_pbar:
                self.pbar.close()

        return self._output()


@dataclass
class RunTrace:
    """Residual trace of one run.

    Attributes:
        residuals (array): ``(1/n) sum_i ||x_k^i - x*||`` for k = 0..K.
        eta (float): step size.
        method (str): method tag.
        seed (int): run seed.
        x_star (array): optimum the residuals are measured against.
        conservation (array): relative gap between the sums of trackers and
            gradients at each iteration; zeros for methods without trackers.
        wall_time (float): seconds spent in the iterations.
        states (list or None): retained NetworkStates.
        status (str): ``'ok'`` or ``'diverged'``.

    """
    residuals: np.ndarray
    eta: float
    method: str
    seed: int
    x_star: np.ndarray
    conservation: np.ndarray
    wall_time: float = 0.0
    states: Optional[list] = None
    status: str = 'ok'
    diverged_at: Optional[int] = None
    extra: dict = field(default_factory=dict)

    @property
    def final_residual(self):
        return float(self.residuals[-1])

    def to_csv(self, path):
        """Write rows ``k, residual`` under a header."""
        with open(path, 'w', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(['k', 'residual'])
            for k, r in enumerate(self.residuals):
                writer.writerow([k, repr(float(r))])


def residual(state, x_star):
    """Average distance ``(1/n) sum_i ||x^i - x*||_2`` to the optimum."""
    x = state.x if isinstance(state, alg_module.NetworkState) else state
    x = np.asarray(x)
    if x.shape[1:] != np.shape(x_star):
        raise ValueError(
            'state rows of shape {} do not match x_star {}'.format(
                x.shape[1:], np.shape(x_star)))

    return float(np.linalg.norm(x - x_star, axis=1).mean())


def initial_estimates(policy, n, p, seed=0):
    """Initial estimates of all agents.

    Args:
        policy (str or array): ``'gaussian9'`` for IID N(0, 9),
            ``'gaussian'`` for IID N(0, 1), ``'zeros'``, or an explicit
            ``(n, p)`` array.
        n (int): number of agents.
        p (int): decision dimension.
        seed (int): random seed.

    Returns:
        array of shape ``(n, p)``.

    """
    if not isinstance(policy, str):
        x0 = np.array(policy, dtype=float)
        if x0.shape != (n, p):
            raise ValueError('x0 must have shape {}, got {}'.format(
                (n, p), x0.shape))

        return x0

    rng = util.make_rng(seed)
    if policy == 'gaussian9':
        return util.randn((n, p), scale=3, rng=rng)
    elif policy == 'gaussian':
        return util.randn((n, p), rng=rng)
    elif policy == 'zeros':
        return np.zeros((n, p))
    else:
        raise ValueError('unknown x0 policy {}, expected one of {}'.format(
            policy, X0_POLICIES))


class Run(App):
    """Runs a distributed method and records its residuals.

    Args:
        method_alg (Alg): a distributed Alg from :mod:`tvab.alg`.
        x_star (array): optimum.
        seed (int): run seed, recorded in the trace.
        keep_states (bool): toggle retaining every NetworkState.

    Output:
        RunTrace.

    """

    def __init__(self, method_alg, x_star, seed=0, keep_states=False,
                 show_pbar=True, leave_pbar=True):
        self.x_star = x_star
        self.seed = seed
        self.keep_states = keep_states
        state = method_alg.state
        self.residuals = [residual(state, x_star)]
        self.conservation = [state.conservation_error()]
        self.states = [state] if keep_states else None
        super().__init__(method_alg, show_pbar=show_pbar,
                         leave_pbar=leave_pbar)

    def _post_update(self):
        state = self.alg.state
        self.residuals.append(residual(state, self.x_star))
        self.conservation.append(state.conservation_error())
        if self.keep_states:
            self.states.append(state)

    def _summarize(self):
        if self.show_pbar:
            self.pbar.set_postfix(
                residual='{0:.2E}'.format(self.residuals[-1]))

    def _trace(self, status='ok', diverged_at=None):
        return RunTrace(residuals=np.array(self.residuals),
                        eta=self.alg.eta, method=self.alg.method,
                        seed=self.seed, x_star=self.x_star,
                        conservation=np.array(self.conservation),
                        wall_time=self.time[-1], states=self.states,
                        status=status, diverged_at=diverged_at)

    def _output(self):
        return self._trace()

    def run(self):
        try:
            return super().run()
        except alg_module.DivergenceError as e:
            e.trace = self._trace('diverged', e.iter)
            raise


def run(problem, seq, eta, K, x0_policy='gaussian', method='tvab', seed=0,
        x_star=None, weights=None, keep_states=False, show_pbar=False):
    """Run a distributed method over a graph sequence.

    Args:
        problem (Problem): problem.
        seq (GraphSequence): graph sequence; iteration k uses the uniform
            weights of ``seq.graph_at(k)``.
        eta (float): step size.
        K (int): number of iterations.
        x0_policy (str or array): see :func:`initial_estimates`.
        method (str): one of :data:`tvab.alg.METHODS`.
        seed (int): seed of the initial estimates.
        x_star (array or None): optimum, solved centrally when None.
        weights (function or None): k -> WeightPair, overriding the uniform
            weights of seq.
        keep_states (bool): toggle retaining every NetworkState.
        show_pbar (bool): toggle the progress bar.

    Returns:
        RunTrace with K + 1 residuals.

    Raises:
        DivergenceError: with the partial trace attached as ``trace``.

    """
    if K < 0:
        raise ValueError('K must be nonnegative, got {}'.format(K))

    if x_star is None:
        x_star = solve_centralized(problem)

    if weights is None:
        weights = weight_function(seq)

    x0 = initial_estimates(x0_policy, problem.n, problem.p, seed=seed)
    method_alg = alg_module.make_method(method, problem, weights, x0, eta, K)
    return Run(method_alg, x_star, seed=seed, keep_states=keep_states,
               show_pbar=show_pbar).run()
