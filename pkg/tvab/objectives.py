# -*- coding: utf-8 -*-
"""Sum-of-local-costs problems.

A :class:`Problem` holds ``n`` local objectives ``f_i`` over a shared
decision variable of dimension ``p``. The global objective is the average
``f(x) = (1/n) sum_i f_i(x)``. Three families are provided: regularized
logistic regression, least squares (including linear regression on noisy
samples of a line), and quadratics.

Each family stores the data of all agents stacked along a leading axis of
length ``n``, so the gradients of all agents are evaluated in one call.
"""
import numpy as np
import scipy.linalg as la

from scipy import special

from tvab import alg, util


__all__ = ['ConvergenceError', 'Local', 'LogisticLocal', 'LeastSquaresLocal',
           'QuadraticLocal', 'Problem', 'LogisticProblem',
           'LeastSquaresProblem', 'QuadraticProblem',
           'local_gradient', 'make_logistic_problem',
           'make_least_squares_problem', 'make_linear_regression_problem',
           'make_quadratic_problem', 'solve_centralized',
           'gradient_step_contraction_check', 'GradientStepCheck',
           'check_gradient', 'save_problem', 'load_problem']


class ConvergenceError(RuntimeError):
    """Raised when an iterative solver stops before reaching its tolerance.

    Attributes:
        achieved (float): residual reached when the solver stopped.

    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class Local(object):
    """Abstraction for a local objective ``f_i: R^p -> R``.

    Subclasses implement ``_value``, ``_gradient`` and optionally
    ``_hessian``. The public methods check the input and wrap errors raised
    by the implementation.

    Args:
        p (int): decision dimension.
        lipschitz (float): Lipschitz constant of the gradient.
        mu (float): strong convexity constant, 0 if unknown.

    """

    def __init__(self, p, lipschitz, mu=0.0, repr_str=None):
        self.p = p
        self.lipschitz = lipschitz
        self.mu = mu
        if repr_str is None:
            self.repr_str = self.__class__.__name__
        else:
            self.repr_str = repr_str

    def _check_input(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.p, ):
            raise ValueError(
                'input shape mismatch for {s}, got {shape}'.format(
                    s=self, shape=x.shape))
        if not np.all(np.isfinite(x)):
            raise ValueError('non-finite input to {}'.format(self))

        return x

    def _value(self, x):
        raise NotImplementedError

    def _gradient(self, x):
        raise NotImplementedError

    def _hessian(self, x):
        raise NotImplementedError

    def value(self, x):
        """Evaluate the objective at x."""
        x = self._check_input(x)
        try:
            return float(self._value(x))
        except Exception as e:
            raise RuntimeError('Exceptions from {}.'.format(self)) from e

    def gradient(self, x):
        """Evaluate the analytic gradient at x."""
        x = self._check_input(x)
        try:
            return self._gradient(x)
        except Exception as e:
            raise RuntimeError('Exceptions from {}.'.format(self)) from e

    def hessian(self, x):
        """Evaluate the Hessian matrix at x."""
        x = self._check_input(x)
        try:
            return self._hessian(x)
        except Exception as e:
            raise RuntimeError('Exceptions from {}.'.format(self)) from e

    def __call__(self, x):
        return self.value(x)

    def __repr__(self):
        return '<{p}-dimensional {repr_str}>'.format(
            p=self.p, repr_str=self.repr_str)


def _augment(features):
    """Map features c to rows [-c, 1] so that a^T [w; b] = -w^T c + b."""
    ones = np.ones(features.shape[:-1] + (1, ))
    return np.concatenate([-features, ones], axis=-1)


class LogisticLocal(Local):
    r"""Regularized logistic loss of one agent.

    .. math::
        f_i(w, b) = \sum_j \log(1 + e^{(-w^\top c_j + b) y_j})
        + \frac{\lambda}{2} (\|w\|_2^2 + b^2)

    The decision variable is ``x = [w; b]``.

    Args:
        features (array): samples ``c_j`` as rows, shape ``(m_i, p - 1)``.
        labels (array): labels in {-1, +1}, shape ``(m_i, )``.
        lamda (float): ridge coefficient, positive.

    """

    def __init__(self, features, labels, lamda):
        if lamda <= 0:
            raise ValueError('lamda must be positive, got {}'.format(lamda))

        self.features = np.asarray(features, dtype=float)
        self.labels = np.asarray(labels, dtype=float)
        self.lamda = lamda
        self.aug = _augment(self.features)
        gram_norm = la.norm(self.aug, 2)**2 if self.aug.size else 0.0
        super().__init__(self.aug.shape[1], lamda + gram_norm / 4, mu=lamda)

    def _value(self, x):
        z = self.labels * (self.aug @ x)
        return np.logaddexp(0, z).sum() + self.lamda / 2 * (x @ x)

    def _gradient(self, x):
        z = self.labels * (self.aug @ x)
        return self.aug.T @ (special.expit(z) * self.labels) + self.lamda * x

    def _hessian(self, x):
        s = special.expit(self.labels * (self.aug @ x))
        return ((self.aug.T * (s * (1 - s))) @ self.aug
                + self.lamda * np.eye(self.p))


class LeastSquaresLocal(Local):
    r"""Least squares loss :math:`\frac{1}{2}\|H x - b\|_2^2`."""

    def __init__(self, H, b):
        self.H = np.asarray(H, dtype=float)
        self.b = np.asarray(b, dtype=float)
        gram = self.H.T @ self.H
        eigs = la.eigvalsh(gram)
        super().__init__(self.H.shape[1], float(eigs[-1]),
                         mu=max(float(eigs[0]), 0.0))

    def _value(self, x):
        r = self.H @ x - self.b
        return r @ r / 2

    def _gradient(self, x):
        return self.H.T @ (self.H @ x - self.b)

    def _hessian(self, x):
        return self.H.T @ self.H


class QuadraticLocal(Local):
    r"""Quadratic :math:`\frac{1}{2} x^\top P x + q^\top x` with P symmetric
    positive semidefinite."""

    def __init__(self, P, q):
        self.P = np.asarray(P, dtype=float)
        self.q = np.asarray(q, dtype=float)
        eigs = la.eigvalsh(self.P)
        super().__init__(self.P.shape[0], float(eigs[-1]),
                         mu=max(float(eigs[0]), 0.0))

    def _value(self, x):
        return x @ self.P @ x / 2 + self.q @ x

    def _gradient(self, x):
        return self.P @ x + self.q

    def _hessian(self, x):
        return self.P

    def minimizer(self):
        return la.solve(self.P, -self.q, assume_a='pos')


class Problem(object):
    """Abstraction for ``min_x (1/n) sum_i f_i(x)``.

    Subclasses store their data as arrays stacked over agents and implement
    ``_stacked_value``, ``_stacked_gradient`` and ``_local``.

    Args:
        family (str): family tag used in saved files.
        arrays (dict): name -> array with leading axis of length n.
        scalars (dict): name -> float, e.g. the ridge coefficient.

    Attributes:
        n (int): number of agents.
        p (int): decision dimension.
        locals (list of Local): local objectives.
        L (float): max over agents of the gradient Lipschitz constants.
        mu (float): strong convexity constant of the global average.

    """

    family = None

    def __init__(self, arrays, scalars=None):
        self.arrays = {k: np.asarray(v, dtype=float)
                       for k, v in arrays.items()}
        self.scalars = dict(scalars or {})
        self.n = next(iter(self.arrays.values())).shape[0]
        if any(v.shape[0] != self.n for v in self.arrays.values()):
            raise ValueError('stacked arrays must share the agent axis')

        self.locals = [self._local(i) for i in range(self.n)]
        self.p = self.locals[0].p
        self.L = float(max(loc.lipschitz for loc in self.locals))
        self.mu = float(self._global_mu())

    def _local(self, i):
        raise NotImplementedError

    def _global_mu(self):
        raise NotImplementedError

    def _stacked_value(self, X):
        raise NotImplementedError

    def _stacked_gradient(self, X):
        raise NotImplementedError

    def local_lipschitz(self):
        """Per-agent Lipschitz constants of the local gradients."""
        return np.array([loc.lipschitz for loc in self.locals])

    def local_gradient(self, i, x):
        """Gradient of ``f_i`` at ``x``."""
        if not 0 <= i < self.n:
            raise IndexError('agent {} out of range for n={}'.format(
                i, self.n))

        return self.locals[i].gradient(x)

    def stacked_gradient(self, X):
        """Row i of the output is the gradient of ``f_i`` at ``X[i]``.

        Args:
            X (array): shape ``(n, p)``.

        Returns:
            array: shape ``(n, p)``.

        """
        X = np.asarray(X, dtype=float)
        if X.shape != (self.n, self.p):
            raise ValueError(
                'stacked input must have shape {}, got {}'.format(
                    (self.n, self.p), X.shape))

        return self._stacked_gradient(X)

    def stacked_value(self, X):
        """Entry i is ``f_i(X[i])``."""
        return self._stacked_value(np.asarray(X, dtype=float))

    def f(self, x):
        """Global average objective."""
        X = np.broadcast_to(np.asarray(x, dtype=float), (self.n, self.p))
        return float(self._stacked_value(X).mean())

    def gradient(self, x):
        """Gradient of the global average objective."""
        X = np.broadcast_to(np.asarray(x, dtype=float), (self.n, self.p))
        return self._stacked_gradient(X).mean(axis=0)

    def hessian(self, x):
        """Hessian of the global average objective."""
        return sum(loc.hessian(x) for loc in self.locals) / self.n

    def relabel(self, perm):
        """Problem whose agent ``perm[i]`` holds the local of agent ``i``."""
        inv = np.argsort(perm)
        arrays = {k: v[inv] for k, v in self.arrays.items()}
        return self.__class__(arrays, self.scalars)

    def __repr__(self):
        return ('<{family} Problem: n={n}, p={p}, L={L:.3g}, '
                'mu={mu:.3g}>').format(
            family=self.family, n=self.n, p=self.p, L=self.L, mu=self.mu)


class LogisticProblem(Problem):
    """Logistic regression, arrays ``features (n, m, p-1)`` and
    ``labels (n, m)``, scalar ``lamda``."""

    family = 'logistic'

    def __init__(self, arrays, scalars):
        super().__init__(arrays, scalars)
        self._aug = _augment(self.arrays['features'])

    @property
    def lamda(self):
        return self.scalars['lamda']

    def _local(self, i):
        return LogisticLocal(self.arrays['features'][i],
                             self.arrays['labels'][i], self.lamda)

    def _global_mu(self):
        return self.lamda

    def _stacked_value(self, X):
        z = self.arrays['labels'] * np.einsum('nmp,np->nm', _augment(
            self.arrays['features']), X)
        return (np.logaddexp(0, z).sum(axis=1)
                + self.lamda / 2 * np.einsum('np,np->n', X, X))

    def _stacked_gradient(self, X):
        labels = self.arrays['labels']
        z = labels * np.einsum('nmp,np->nm', self._aug, X)
        weights = special.expit(z) * labels
        return np.einsum('nm,nmp->np', weights, self._aug) + self.lamda * X


class LeastSquaresProblem(Problem):
    """Least squares, arrays ``H (n, r, p)`` and ``b (n, r)``."""

    family = 'least_squares'

    def _local(self, i):
        return LeastSquaresLocal(self.arrays['H'][i], self.arrays['b'][i])

    def normal_matrix(self):
        """Sum over agents of ``H_i^T H_i``."""
        return np.einsum('nrp,nrq->pq', self.arrays['H'], self.arrays['H'])

    def _global_mu(self):
        return la.eigvalsh(self.normal_matrix() / self.n)[0]

    def _stacked_value(self, X):
        r = np.einsum('nrp,np->nr', self.arrays['H'], X) - self.arrays['b']
        return np.einsum('nr,nr->n', r, r) / 2

    def _stacked_gradient(self, X):
        H = self.arrays['H']
        r = np.einsum('nrp,np->nr', H, X) - self.arrays['b']
        return np.einsum('nrp,nr->np', H, r)


class QuadraticProblem(Problem):
    """Quadratics, arrays ``P (n, p, p)`` and ``q (n, p)``."""

    family = 'quadratic'

    def _local(self, i):
        return QuadraticLocal(self.arrays['P'][i], self.arrays['q'][i])

    def _global_mu(self):
        return la.eigvalsh(self.arrays['P'].mean(axis=0))[0]

    def _stacked_value(self, X):
        return (np.einsum('np,npq,nq->n', X, self.arrays['P'], X) / 2
                + np.einsum('np,np->n', self.arrays['q'], X))

    def _stacked_gradient(self, X):
        return np.einsum('npq,nq->np', self.arrays['P'], X) + self.arrays['q']


_FAMILIES = {cls.family: cls for cls in
             (LogisticProblem, LeastSquaresProblem, QuadraticProblem)}


def local_gradient(problem, i, x):
    """Gradient of agent ``i``'s local objective at ``x``."""
    return problem.local_gradient(i, x)


def make_logistic_problem(n, m_i=10, p=6, lamda=1.0,
                          label_noise_model='bernoulli', seed=0):
    """Synthetic regularized logistic regression.

    Features are IID Gaussian with mean 0 and variance 9. A ground truth
    ``x~ = [w; b]`` is drawn from the standard uniform distribution and
    ``P(y = +1) = 1 / (1 + exp(-w^T c + b))``. With the augmented rows
    ``a = [-c; 1]`` used by :class:`LogisticLocal` this is
    ``(1 + exp(a^T x~))^{-1} = expit(-a^T x~)``, so labels agree in sign
    with the loss.

    Args:
        n (int): number of agents.
        m_i (int): samples per agent.
        p (int): decision dimension, features have ``p - 1`` entries.
        lamda (float): ridge coefficient.
        label_noise_model (str): ``'bernoulli'`` draws labels from the
            probability above, ``'none'`` takes the more likely label.
        seed (int): random seed.

    Returns:
        LogisticProblem.

    """
    if min(n, m_i, p) < 1:
        raise ValueError(
            'n, m_i and p must be positive, got {}, {}, {}'.format(
                n, m_i, p))
    if label_noise_model not in ('bernoulli', 'none'):
        raise ValueError('unknown label_noise_model {}'.format(
            label_noise_model))

    rng = util.make_rng(seed)
    features = util.randn((n, m_i, p - 1), scale=3, rng=rng)
    truth = rng.random(p)
    prob_pos = special.expit(-(_augment(features) @ truth))
    if label_noise_model == 'bernoulli':
        positive = rng.random((n, m_i)) < prob_pos
    else:
        positive = prob_pos > 0.5

    labels = np.where(positive, 1.0, -1.0)
    return LogisticProblem({'features': features, 'labels': labels},
                           {'lamda': lamda})


def make_least_squares_problem(n, rows_i, p, seed=0, max_tries=100,
                               min_eig=1e-6):
    """Least squares where no agent can find the solution on its own.

    Every ``H_i`` has ``rows_i < p`` rows and full row rank, and the sum
    ``sum_i H_i^T H_i`` has smallest eigenvalue at least ``min_eig``.

    Args:
        n (int): number of agents.
        rows_i (int): rows per agent.
        p (int): decision dimension.
        seed (int): random seed.
        max_tries (int): number of draws before giving up.
        min_eig (float): eigenvalue threshold of the normal matrix.

    Returns:
        LeastSquaresProblem.

    Raises:
        ValueError: if ``rows_i >= p`` or ``n * rows_i < p``.

    """
    if rows_i >= p:
        raise ValueError(
            'rows_i must be less than p for rank-deficient locals, '
            'got rows_i={}, p={}'.format(rows_i, p))
    if n * rows_i < p:
        raise ValueError(
            'infeasible: n * rows_i = {} < p = {}'.format(n * rows_i, p))

    for attempt in range(max_tries):
        rng = util.make_rng(seed, attempt)
        H = util.randn((n, rows_i, p), rng=rng)
        b = util.randn((n, rows_i), rng=rng)
        ranks = [np.linalg.matrix_rank(H[i]) for i in range(n)]
        normal = np.einsum('nrp,nrq->pq', H, H)
        if (all(r == rows_i for r in ranks)
                and la.eigvalsh(normal)[0] >= min_eig):
            return LeastSquaresProblem({'H': H, 'b': b})

    raise ConvergenceError(
        'no well-posed least squares problem after {} draws'.format(
            max_tries))


def make_linear_regression_problem(n=10, samples=10, noise=0.1, line=None,
                                   seed=0):
    """Fit a line to noisy samples, decision variable (slope, intercept).

    Args:
        n (int): number of agents.
        samples (int): samples per agent.
        noise (float): standard deviation of the additive Gaussian noise.
        line (tuple or None): (slope, intercept). Drawn uniformly from
            [-1, 1]^2 when None.
        seed (int): random seed.

    Returns:
        LeastSquaresProblem.

    """
    rng = util.make_rng(seed)
    if line is None:
        line = rng.uniform(-1, 1, size=2)

    slope, intercept = line
    t = rng.uniform(-1, 1, size=(n, samples))
    H = np.stack([t, np.ones_like(t)], axis=-1)
    b = slope * t + intercept + util.randn((n, samples), scale=noise, rng=rng)
    return LeastSquaresProblem({'H': H, 'b': b})


def make_quadratic_problem(n, p, seed=0, ridge=0.1):
    """Random strongly convex quadratics ``P_i = G_i^T G_i / p + ridge I``.
    """
    rng = util.make_rng(seed)
    G = util.randn((n, p, p), rng=rng)
    P = np.einsum('nkp,nkq->npq', G, G) / p + ridge * np.eye(p)
    q = util.randn((n, p), rng=rng)
    return QuadraticProblem({'P': P, 'q': q})


def solve_centralized(problem, tol=1e-10, max_iter=100):
    """Minimizer of the global objective.

    Least squares and quadratics are solved from the normal equations;
    logistic regression runs damped Newton from zero, finishing with
    gradient descent at step 1/L if Newton stalls above tol.

    Args:
        problem (Problem): problem to solve.
        tol (float): tolerance on the global gradient norm.
        max_iter (int): Newton iteration cap.

    Returns:
        array: x_star of shape ``(p, )``.

    Raises:
        ConvergenceError: if the gradient norm stays above tol.

    """
    if isinstance(problem, LogisticProblem):
        x = np.zeros(problem.p)
        newton = alg.NewtonsMethod(
            problem.gradient,
            lambda x: (lambda g: la.solve(problem.hessian(x), g,
                                          assume_a='pos')),
            x, beta=0.5, f=problem.f, max_iter=max_iter, tol=tol * 1e-2)
        while not newton.done():
            newton.update()

        x_star = newton.x
        if la.norm(problem.gradient(x_star)) > tol:
            gd = alg.GradientMethod(problem.gradient, x_star,
                                    1 / problem.L, max_iter=100 * max_iter,
                                    tol=tol * 1e-2)
            while not gd.done():
                gd.update()

            x_star = gd.x
    else:
        hess = problem.hessian(np.zeros(problem.p))
        x_star = la.solve(hess, -problem.gradient(np.zeros(problem.p)),
                          assume_a='pos')
        # one step of iterative refinement
        x_star -= la.solve(hess, problem.gradient(x_star), assume_a='pos')

    resid = la.norm(problem.gradient(x_star))
    if resid > tol:
        raise ConvergenceError(
            'centralized solver stopped at gradient norm {:.3e} > '
            '{:.1e}'.format(resid, tol), achieved=resid)

    return x_star


class GradientStepCheck(object):
    """Result of :func:`gradient_step_contraction_check`."""

    def __init__(self, lhs, rhs, chi):
        self.lhs = lhs
        self.rhs = rhs
        self.chi = chi
        self.ok = lhs <= rhs + 1e-12

    def __repr__(self):
        return '<GradientStepCheck lhs={:.3e} rhs={:.3e} ok={}>'.format(
            self.lhs, self.rhs, self.ok)


def gradient_step_contraction_check(g_spec, zeta, x, x_star):
    """Check that one gradient step shrinks the distance to the optimum.

    With ``x+ = x - zeta grad g(x)`` and
    ``chi = max(|1 - zeta mu|, |1 - zeta l|)``, the distance satisfies
    ``||x+ - x*|| <= chi ||x - x*||``.

    Args:
        g_spec (Local): objective with attributes ``mu`` and ``lipschitz``.
        zeta (float): step size in ``(0, 2 / l)``.
        x (array): starting point.
        x_star (array): minimizer of g.

    Returns:
        GradientStepCheck.

    """
    ell = g_spec.lipschitz
    if not 0 < zeta < 2 / ell:
        raise ValueError(
            'zeta must lie in (0, 2/l) = (0, {:.6g}), got {}'.format(
                2 / ell, zeta))

    x = np.asarray(x, dtype=float)
    x_plus = x - zeta * g_spec.gradient(x)
    chi = max(abs(1 - zeta * g_spec.mu), abs(1 - zeta * ell))
    lhs = float(la.norm(x_plus - x_star))
    rhs = float(chi * la.norm(x - x_star))
    return GradientStepCheck(lhs, rhs, chi)


def check_gradient(local, x, step=1e-6):
    """Relative error between the analytic and finite-difference gradients.
    """
    analytic = local.gradient(x)
    numeric = util.finite_difference_gradient(local.value, x, step=step)
    scale = max(la.norm(analytic), la.norm(numeric), 1e-12)
    return float(la.norm(analytic - numeric) / scale)


def save_problem(path, problem):
    """Save a problem to a ``.npz`` file with its family tag."""
    scalars = {'scalar_' + k: v for k, v in problem.scalars.items()}
    np.savez(path, family=problem.family, **problem.arrays, **scalars)


def load_problem(path):
    """Load a problem written by :func:`save_problem`."""
    with np.load(path, allow_pickle=False) as data:
        family = str(data['family'])
        if family not in _FAMILIES:
            raise ValueError('unknown problem family {}'.format(family))

        arrays = {}
        scalars = {}
        for key in data.files:
            if key == 'family':
                continue
            elif key.startswith('scalar_'):
                scalars[key[len('scalar_'):]] = float(data[key])
            else:
                arrays[key] = data[key]

    return _FAMILIES[family](arrays, scalars)
