# -*- coding: utf-8 -*-
"""This module provides an abstract class Alg for iterative algorithms,
the distributed methods run over a sequence of weight matrices
(TV-AB, subgradient-push and Push-DIGing), and the centralized power,
gradient and Newton iterations used as oracles.

Distributed states stack the agents along the first axis: row ``i`` of
``x`` is agent i's estimate.
"""
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from tvab import config, util


__all__ = ['Alg', 'PowerMethod', 'GradientMethod', 'NewtonsMethod',
           'DivergenceError', 'NetworkState', 'init_state',
           'tvab_step', 'baseline_subgradient_push_step',
           'baseline_push_diging_step', 'TVAB', 'SubgradientPush',
           'PushDIGing', 'METHODS', 'make_method']


class Alg(object):
    """Abstraction for iterative algorithms.

    The standard way of using an :class:`Alg` object, say alg, is as follows:

    >>> while not alg.done():
    >>>     alg.update()

    An :class:`Alg` object is meant to run once.
    Once done, the object should not be run again.

    When creating a new :class:`Alg` class, the user should supply
    an _update() function to perform the iterative update, and optionally a
    _done() function to determine when to terminate the iteration.
    The default _done() function simply checks whether the number of
    iterations has reached the maximum.

    Args:
        max_iter (int): Maximum number of iterations.

    Attributes:
        max_iter (int): Maximum number of iterations.
        iter (int): Current iteration.

    """

    def __init__(self, max_iter):
        self.max_iter = max_iter
        self.iter = 0

    def _update(self):
        raise NotImplementedError

    def _done(self):
        return self.iter >= self.max_iter

    def update(self):
        """Perform one update step.

        Call the user-defined _update() function and increment iter.
        """
        self._update()
        self.iter += 1

    def done(self):
        """Return whether the algorithm is done.

        Call the user-defined _done() function.
        """
        return self._done()


class PowerMethod(Alg):
    """Power method to estimate the dominant eigenvalue magnitude.

    Every ``restart`` iterations the iterate is replaced by its absolute
    value plus a small positive shift, which keeps it inside the cone of a
    nonnegative matrix.

    Args:
        A (function): x -> A x.
        x (array): starting vector, updated in place.
        max_iter (int): Maximum number of iterations.
        tol (float): relative change of the estimate to stop at.
        restart (int or None): restart period.

    Attributes:
        max_eig (float): estimate of the spectral radius of A.
        resid (float): relative change of the last update.

    """

    def __init__(self, A, x, max_iter=30, tol=0, restart=None):
        self.A = A
        self.x = x
        self.tol = tol
        self.restart = restart
        self.max_eig = np.inf
        self.resid = np.inf
        super().__init__(max_iter)

    def _update(self):
        if self.restart and self.iter > 0 and self.iter % self.restart == 0:
            self.x[...] = np.abs(self.x) + 1e-3 * np.abs(self.x).max()

        x_norm = np.linalg.norm(self.x)
        y = self.A(self.x / x_norm)
        max_eig = float(np.linalg.norm(y))
        if max_eig == 0:
            self.resid = 0.0
        elif np.isfinite(self.max_eig):
            self.resid = abs(max_eig - self.max_eig) / max_eig

        self.max_eig = max_eig
        if max_eig > 0:
            self.x[...] = y / max_eig

    def _done(self):
        return self.iter >= self.max_iter or self.resid <= self.tol


class GradientMethod(Alg):
    r"""First order gradient method.

    Performs the update:

    .. math:: x_\text{new} = x - \alpha \nabla f(x)

    Args:
        gradf (function): function to compute :math:`\nabla f`.
        x (array): variable to optimize over, updated in place.
        alpha (float): step size.
        max_iter (int): maximum number of iterations.
        tol (float): Tolerance for stopping condition.

    """

    def __init__(self, gradf, x, alpha, max_iter=100, tol=0):
        self.gradf = gradf
        self.alpha = alpha
        self.x = x
        self.tol = tol
        self.resid = np.inf
        super().__init__(max_iter)

    def _update(self):
        x_old = self.x.copy()
        util.axpy(self.x, -self.alpha, self.gradf(self.x))
        self.resid = np.linalg.norm(self.x - x_old).item() / self.alpha

    def _done(self):
        return (self.iter >= self.max_iter) or self.resid <= self.tol


class NewtonsMethod(Alg):
    """Newton's Method.

    Args:
        gradf (function) - A function gradf(x): x -> gradient of f at x.
        inv_hessf (function) - A function H(x): x -> inverse Hessian of f at x,
            which is another function: y -> inverse Hessian of f at x times y.
        x (function) - solution.
        beta (scalar): backtracking linesearch factor.
             Enables backtracking when beta < 1.
        f (function or None): function to compute :math:`f`
             for backtracking line-search.
        max_iter (int): maximum number of iterations.
        tol (float): Tolerance on the Newton decrement.

    """
    def __init__(self, gradf, inv_hessf, x,
                 beta=1, f=None, max_iter=10, tol=0):
        if beta < 1 and f is None:
            raise TypeError(
                "Cannot do backtracking linesearch without specifying f.")

        self.gradf = gradf
        self.inv_hessf = inv_hessf
        self.x = x
        self.beta = beta
        self.f = f
        self.residual = np.inf
        self.tol = tol

        super().__init__(max_iter)

    def _update(self):
        gradf_x = self.gradf(self.x)
        p = -self.inv_hessf(self.x)(gradf_x)
        lamda2 = -float(np.dot(p, gradf_x))
        if lamda2 < 0:
            raise ValueError(
                'Direction is not descending. Got lamda2={}. '
                'inv_hessf might not be defined correctly.'.format(lamda2))

        x_new = self.x + p
        # near the optimum f cannot resolve the decrease, take full steps
        if self.beta < 1 and lamda2 > 1e-12:
            fx = self.f(self.x)
            alpha = 1
            while self.f(x_new) > fx - alpha / 2 * lamda2 and alpha > 1e-12:
                alpha *= self.beta
                x_new = self.x + alpha * p

        self.x[...] = x_new
        self.residual = lamda2**0.5

    def _done(self):
        return self.iter >= self.max_iter or self.residual <= self.tol


class DivergenceError(RuntimeError):
    """Raised when a distributed state blows up.

    Attributes:
        iter (int): iteration at which the state became invalid.
        method (str): method tag.
        trace (RunTrace or None): partial trace, attached by the runner.

    """

    def __init__(self, iter, method, bound=config.DIVERGENCE_BOUND):
        super().__init__(
            '{method} diverged at iteration {iter}: state is non-finite or '
            'exceeds {bound:.0e}'.format(method=method, iter=iter,
                                         bound=bound))
        self.iter = iter
        self.method = method
        self.trace = None


@dataclass(frozen=True, eq=False)
class NetworkState:
    """Stacked agent states at iteration k.

    Attributes:
        k (int): iteration index.
        x (array): estimates, shape ``(n, p)``. For subgradient-push these
            are the de-biased ratios.
        y (array or None): gradient trackers, shape ``(n, p)``.
        grad_prev (array or None): local gradients at ``x``; the next step
            subtracts them from the fresh gradients.
        mass (array or None): push-sum weights, shape ``(n, 1)``.
        u (array or None): push-sum numerators, shape ``(n, p)``.

    """
    k: int
    x: np.ndarray
    y: Optional[np.ndarray] = None
    grad_prev: Optional[np.ndarray] = None
    mass: Optional[np.ndarray] = None
    u: Optional[np.ndarray] = None

    @property
    def n(self):
        return self.x.shape[0]

    def conservation_error(self):
        """Relative gap between the sums of trackers and of gradients."""
        if self.y is None or self.grad_prev is None:
            return 0.0

        gap = np.linalg.norm(self.y.sum(axis=0) - self.grad_prev.sum(axis=0))
        scale = max(np.linalg.norm(self.grad_prev, axis=1).sum(),
                    np.linalg.norm(self.y, axis=1).sum(),
                    np.finfo(float).tiny)
        return float(gap / scale)

    def relabel(self, perm):
        """State whose agent ``perm[i]`` holds the rows of agent ``i``."""
        inv = np.argsort(perm)
        fields = {}
        for name in ('x', 'y', 'grad_prev', 'mass', 'u'):
            value = getattr(self, name)
            fields[name] = None if value is None else value[inv]

        return NetworkState(self.k, **fields)


def _check_state(method, k, *arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)) or np.abs(a).max() > \
                config.DIVERGENCE_BOUND:
            raise DivergenceError(k, method)


def init_state(problem, x0, method='tvab'):
    """Initial state of a method.

    Args:
        problem (Problem): problem.
        x0 (array): initial estimates, shape ``(n, p)``.
        method (str): method tag, see :data:`METHODS`.

    Returns:
        NetworkState at k = 0.

    """
    x0 = np.array(x0, dtype=float)
    grad = problem.stacked_gradient(x0)
    if method == 'tvab':
        return NetworkState(0, x0, y=grad.copy(), grad_prev=grad)
    elif method in ('subgradient-push-const', 'subgradient-push-dimin'):
        return NetworkState(0, x0, grad_prev=grad,
                            mass=np.ones((x0.shape[0], 1)), u=x0.copy())
    elif method == 'push-diging':
        return NetworkState(0, x0, y=grad.copy(), grad_prev=grad,
                            mass=np.ones((x0.shape[0], 1)), u=x0.copy())
    else:
        raise ValueError('unknown method {}, expected one of {}'.format(
            method, sorted(METHODS)))


def tvab_step(state, wp, problem, eta):
    """One TV-AB iteration.

    .. math::
        x_{k+1} = A_k x_k - \\eta y_k, \\quad
        y_{k+1} = B_k y_k + \\nabla f(x_{k+1}) - \\nabla f(x_k)

    Args:
        state (NetworkState): state at iteration k.
        wp (WeightPair): weights of iteration k.
        problem (Problem): problem.
        eta (float): step size.

    Returns:
        NetworkState at iteration k + 1.

    Raises:
        DivergenceError: if the new state is non-finite or too large.

    """
    x = wp.A @ state.x - eta * state.y
    _check_state('tvab', state.k + 1, x)
    grad = problem.stacked_gradient(x)
    y = wp.B @ state.y + (grad - state.grad_prev)
    _check_state('tvab', state.k + 1, y)
    return NetworkState(state.k + 1, x, y=y, grad_prev=grad)


def baseline_subgradient_push_step(state, wp, problem, eta,
                                   diminishing=False):
    """One subgradient-push iteration, using only the column-stochastic B.

    The numerators and push-sum weights are mixed by B, the ratio gives the
    de-biased estimate z, and the numerator takes a gradient step at z with
    step ``eta`` or ``eta / sqrt(k + 1)``.

    Returns:
        NetworkState with ``x`` holding the estimates z.

    """
    method = 'subgradient-push-dimin' if diminishing else \
        'subgradient-push-const'
    w = wp.B @ state.u
    mass = wp.B @ state.mass
    if np.any(mass <= 0):
        raise ZeroDivisionError(
            'push-sum weight vanished at iteration {}'.format(state.k + 1))

    z = w / mass
    _check_state(method, state.k + 1, z)
    grad = problem.stacked_gradient(z)
    step = eta / np.sqrt(state.k + 1) if diminishing else eta
    u = w - step * grad
    _check_state(method, state.k + 1, u)
    return replace(state, k=state.k + 1, x=z, grad_prev=grad, mass=mass, u=u)


def baseline_push_diging_step(state, wp, problem, eta):
    """One Push-DIGing iteration, using only the column-stochastic B.

    .. math::
        u_{k+1} = B_k (u_k - \\eta w_k), \\quad v_{k+1} = B_k v_k, \\quad
        x_{k+1} = u_{k+1} / v_{k+1}, \\quad
        w_{k+1} = B_k w_k + \\nabla f(x_{k+1}) - \\nabla f(x_k)

    The tracker w is stored in ``y`` and v in ``mass``.
    """
    u = wp.B @ (state.u - eta * state.y)
    mass = wp.B @ state.mass
    if np.any(mass <= 0):
        raise ZeroDivisionError(
            'push-sum weight vanished at iteration {}'.format(state.k + 1))

    x = u / mass
    _check_state('push-diging', state.k + 1, x)
    grad = problem.stacked_gradient(x)
    y = wp.B @ state.y + (grad - state.grad_prev)
    _check_state('push-diging', state.k + 1, y)
    return NetworkState(state.k + 1, x, y=y, grad_prev=grad, mass=mass, u=u)


class _Distributed(Alg):
    """Common driver of the distributed methods.

    Args:
        problem (Problem): problem.
        weights (function): k -> WeightPair of iteration k.
        x0 (array): initial estimates, shape ``(n, p)``.
        eta (float): step size.
        max_iter (int): number of iterations.

    Attributes:
        state (NetworkState): current state.

    """

    method = None

    def __init__(self, problem, weights, x0, eta, max_iter):
        if eta < 0:
            raise ValueError('eta must be nonnegative, got {}'.format(eta))

        self.problem = problem
        self.weights = weights
        self.eta = eta
        self.state = init_state(problem, x0, self.method)
        super().__init__(max_iter)

    def _step(self, wp):
        raise NotImplementedError

    def _update(self):
        self.state = self._step(self.weights(self.state.k))


class TVAB(_Distributed):
    """TV-AB: row-stochastic mixing of estimates with gradient tracking
    through column-stochastic mixing."""

    method = 'tvab'

    def _step(self, wp):
        return tvab_step(self.state, wp, self.problem, self.eta)


class SubgradientPush(_Distributed):
    """Subgradient-push with a constant or diminishing step."""

    def __init__(self, problem, weights, x0, eta, max_iter,
                 diminishing=False):
        self.diminishing = diminishing
        self.method = ('subgradient-push-dimin' if diminishing
                       else 'subgradient-push-const')
        super().__init__(problem, weights, x0, eta, max_iter)

    def _step(self, wp):
        return baseline_subgradient_push_step(
            self.state, wp, self.problem, self.eta,
            diminishing=self.diminishing)


class PushDIGing(_Distributed):
    """Push-DIGing: push-sum with gradient tracking."""

    method = 'push-diging'

    def _step(self, wp):
        return baseline_push_diging_step(self.state, wp, self.problem,
                                         self.eta)


METHODS = ('tvab', 'subgradient-push-const', 'subgradient-push-dimin',
           'push-diging')


def make_method(method, problem, weights, x0, eta, max_iter):
    """Construct the :class:`Alg` of a method tag."""
    if method == 'tvab':
        return TVAB(problem, weights, x0, eta, max_iter)
    elif method == 'subgradient-push-const':
        return SubgradientPush(problem, weights, x0, eta, max_iter)
    elif method == 'subgradient-push-dimin':
        return SubgradientPush(problem, weights, x0, eta, max_iter,
                               diminishing=True)
    elif method == 'push-diging':
        return PushDIGing(problem, weights, x0, eta, max_iter)
    else:
        raise ValueError('unknown method {}, expected one of {}'.format(
            method, METHODS))
