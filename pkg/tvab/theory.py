# -*- coding: utf-8 -*-
"""Numerical counterparts of the convergence analysis.

The module computes the weight sequences the analysis is built on (the
push-sum scaling ``v_k`` and the absolute probability sequence ``phi_k``),
the multi-step contraction constants, and the block-companion system
``M(eta) = M0 + eta ME`` that governs the tracked error vector ``t_k``.

The companion matrix has dimension ``3 Cbar``, where ``Cbar`` is far too large
to store for most inputs. It is therefore kept as its three distinct block
columns, and its spectral radius is found from the characteristic condition

.. math::
    \\rho(M) < e^\\theta \\iff
    I - \\sum_{j=1}^{\\bar{C}} e^{-j\\theta} M_j
    \\text{ is a nonsingular M-matrix},

which only involves 3 x 3 matrices.
"""
import math
import warnings

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from tvab import alg as alg_module
from tvab import app, config, util
from tvab.objectives import ConvergenceError
from tvab.weights import validate_weights, weight_function


__all__ = ['ApsState', 'ContractionConstants', 'PerturbationSystem',
           'TkTrace', 'UnitEigenvalueReport', 'DerivativeReport',
           'InequalityReport',
           'OneStepBoundsReport', 'ErgodicityReport', 'ContractionReport',
           'CertificationReport',
           'compute_v', 'v_stochastic', 'r_matrices', 'approx_phi',
           'aps_state', 'theta', 'phi_recursion_residual',
           'observed_bounds', 'contraction_constants', 'build_M',
           'companion_log_radius', 'spectral_radius', 'verify_unit_eigenvalue',
           'perturbation_derivative', 'eta_threshold', 'trace_t',
           'check_one_step_bounds', 'check_inequality_system',
           'ergodicity_check', 'contraction_ratio',
           'multistep_contraction_check', 'certify']

# |theta| is clamped so that exp(Cbar * theta) stays finite.
_LOG_MAX = 700.0
_THETA_FLOOR = 1e-300
# Largest Cbar for which a companion matrix is ever materialized.
MATERIALIZE_LIMIT = 2000
# Largest Cbar for which the certifier runs the method over Cbar iterations.
RUN_LIMIT = 20000


def _n_of(weights, seq):
    n = getattr(seq, 'n', None)
    return weights(0).n if n is None else n


def _connectivity(seq, C):
    if C is None:
        C = getattr(seq, 'C', None)

    if C is None:
        raise ValueError('a connectivity bound C is required for {}'.format(
            seq))

    if C < 1:
        raise ValueError('C must be positive, got {}'.format(C))

    return int(C)


@dataclass(frozen=True, eq=False)
class ApsState:
    """Push-sum scaling and absolute probability sequence of a run.

    Attributes:
        v (array): ``v_k`` for k = 0..horizon, shape ``(horizon + 1, n)``,
            unnormalized (rows sum to n).
        phi (array): ``phi_k`` for k = 0..horizon + 1.
        horizon (int): last iteration covered by v.
        mu_disagreement (float): row disagreement reached by the truncated
            backward product that seeded phi.
        delta (float): smallest entry of the seeding block vector.

    """
    v: np.ndarray
    phi: np.ndarray
    horizon: int
    mu_disagreement: float = 0.0
    delta: float = 0.0

    @property
    def theta(self):
        return theta(self.phi, self.v)


def compute_v(seq, horizon):
    """Push-sum scaling ``v_{k+1} = B_k v_k`` with ``v_0 = 1``.

    Args:
        seq (GraphSequence or function): graph sequence, or k -> WeightPair.
        horizon (int): last index.

    Returns:
        array of shape ``(horizon + 1, n)``.

    """
    if horizon < 1:
        raise ValueError('horizon must be at least 1, got {}'.format(horizon))

    weights = weight_function(seq)
    n = _n_of(weights, seq)
    v = np.empty((horizon + 1, n))
    v[0] = 1
    for k in range(horizon):
        v[k + 1] = weights(k).B @ v[k]

    return v


def v_stochastic(v):
    """Stochastic scaling ``v_k / n`` of the push-sum sequence."""
    v = np.asarray(v, dtype=float)
    return v / v.shape[-1]


def r_matrices(seq, v, K):
    """Row-stochastic ``R_k = V_{k+1}^{-1} B_k V_k`` for k < K."""
    v = np.asarray(v, dtype=float)
    if len(v) < K + 1:
        raise ValueError('v covers {} iterations, {} needed'.format(
            len(v), K + 1))

    if np.any(v[:K + 1] <= 0):
        raise ValueError('V_k is singular: v has a nonpositive entry')

    weights = weight_function(seq)
    return np.stack([weights(k).B * v[k][None, :] / v[k + 1][:, None]
                     for k in range(K)])


def _row_disagreement(P):
    return float((P.max(axis=0) - P.min(axis=0)).max())


def _block_vector(weights, C, s, n, max_blocks, tol):
    # Rows of D_{s+T} ... D_s agree once the product is ergodic.
    P = np.eye(n)
    disagreement = _row_disagreement(P) if n > 1 else 0.0
    for t in range(s, s + max_blocks):
        if disagreement <= tol:
            break

        for k in range(t * C, (t + 1) * C):
            P = weights(k).A @ P

        disagreement = _row_disagreement(P)

    if disagreement > tol:
        raise ConvergenceError(
            'backward product did not become ergodic within {} blocks: '
            'row disagreement {:.3e} > {:.1e}'.format(
                max_blocks, disagreement, tol), achieved=disagreement)

    return P.mean(axis=0), disagreement


def _approx_phi(seq, C, horizon, tail, tol):
    weights = weight_function(seq)
    n = _n_of(weights, seq)
    C = _connectivity(seq, C)
    if tail is None:
        tail = 100 * n * C

    S = horizon // C + 1
    mu, disagreement = _block_vector(weights, C, S, n, tail, tol)
    phi = np.empty((S * C + 1, n))
    phi[S * C] = mu
    for k in range(S * C - 1, -1, -1):
        phi[k] = weights(k).A.T @ phi[k + 1]

    return phi[:horizon + 1], disagreement, float(mu.min())


def approx_phi(seq, C=None, horizon=100, tail=None, tol=1e-12):
    """Absolute probability sequence of the row-stochastic weights.

    The block vector at the first block past the horizon is approximated by
    a row of a long backward product of C-step blocks. Earlier entries follow
    from ``phi_k^T = phi_{k+1}^T A_k``, so the recursion holds up to rounding.

    Args:
        seq (GraphSequence or function): graph sequence, or k -> WeightPair.
        C (int or None): connectivity bound, ``seq.C`` when None.
        horizon (int): last index returned.
        tail (int or None): cap on the number of blocks in the backward
            product, ``100 n C`` when None.
        tol (float): row disagreement at which the product is accepted.

    Returns:
        array of shape ``(horizon + 1, n)``.

    Raises:
        ConvergenceError: if the product is not ergodic within the cap.

    """
    return _approx_phi(seq, C, horizon, tail, tol)[0]


def aps_state(seq, C=None, horizon=100, tail=None, tol=1e-12):
    """ApsState with v up to ``horizon`` and phi up to ``horizon + 1``."""
    v = compute_v(seq, horizon)
    phi, disagreement, delta = _approx_phi(seq, C, horizon + 1, tail, tol)
    return ApsState(v, phi, horizon, disagreement, delta)


def theta(phi, v):
    """Scalars ``theta_k = phi_{k+1}^T v_k / n``."""
    v_hat = v_stochastic(v)
    K = min(len(phi) - 1, len(v_hat))
    return np.einsum('ki,ki->k', np.asarray(phi)[1:K + 1], v_hat[:K])


def phi_recursion_residual(seq, phi):
    """Largest ``||phi_k^T - phi_{k+1}^T A_k||_inf`` over the sequence."""
    weights = weight_function(seq)
    resid = 0.0
    for k in range(len(phi) - 1):
        resid = max(resid, float(np.abs(
            phi[k] - weights(k).A.T @ phi[k + 1]).max()))

    return resid


def observed_bounds(seq, horizon):
    """Smallest supported entries of A_k and B_k for k < horizon."""
    weights = weight_function(seq)
    alpha = beta = 1.0
    for k in range(horizon):
        diag = validate_weights(weights(k), seq.graph_at(k))
        alpha = min(alpha, diag.alpha_hat)
        beta = min(beta, diag.beta_hat)

    return alpha, beta


@dataclass(frozen=True)
class ContractionConstants:
    """Multi-step contraction constants.

    Everything that scales like ``n^{nC}`` is stored as a logarithm; the
    plain values are properties and overflow to inf.

    ``Cbar_A`` is the smallest integer ``c >= C`` with
    ``gamma_A = Q_A (1 - alpha^{nC})^{(c - 1)/(nC)} < 1``, and ``Cbar_B``
    is the same with ``tau = beta / n^{nC + 1}`` in place of alpha.
    ``Cbar`` is None when it exceeds the float range, with ``log_Cbar``
    still reported.

    """
    n: int
    C: int
    alpha: float
    beta: float
    L: float
    log_Q_A: float
    Cbar_A: Optional[int]
    log_gamma_A: float
    log_tau: float
    log_Q_B: float
    Cbar_B: Optional[int]
    log_gamma_B: float
    log_Cbar: float
    log_m: float

    @property
    def Cbar(self):
        if self.Cbar_A is None or self.Cbar_B is None:
            return None

        return max(self.Cbar_A, self.Cbar_B)

    @property
    def log_scale(self):
        """Logarithm of ``n^{nC}``."""
        return self.n * self.C * math.log(self.n)

    @property
    def representable(self):
        return (self.Cbar is not None
                and self.log_scale <= math.log(1e300)
                and max(self.log_Q_A, self.log_Q_B, self.log_m) < _LOG_MAX)

    def _exp(self, x):
        with np.errstate(over='ignore'):
            return float(np.exp(x))

    @property
    def Q_A(self):
        return self._exp(self.log_Q_A)

    @property
    def gamma_A(self):
        return self._exp(self.log_gamma_A)

    @property
    def tau(self):
        return self._exp(self.log_tau)

    @property
    def Q_B(self):
        return self._exp(self.log_Q_B)

    @property
    def gamma_B(self):
        return self._exp(self.log_gamma_B)

    @property
    def m(self):
        return self._exp(self.log_m)

    def to_dict(self):
        return {
            'n': self.n, 'C': self.C, 'alpha': self.alpha,
            'beta': self.beta, 'L': self.L,
            'log_Q_A': self.log_Q_A, 'Cbar_A': self.Cbar_A,
            'log_gamma_A': self.log_gamma_A, 'log_tau': self.log_tau,
            'log_Q_B': self.log_Q_B, 'Cbar_B': self.Cbar_B,
            'log_gamma_B': self.log_gamma_B, 'Cbar': self.Cbar,
            'log_Cbar': self.log_Cbar, 'log_m': self.log_m}


def _multistep(n, C, log_base):
    nC = n * C
    log_a = nC * log_base
    a = math.exp(log_a)
    log_Q = (math.log(2 * n) + float(np.logaddexp(0.0, -log_a))
             - math.log1p(-a))
    if a > 1e-200:
        c_den = -math.log1p(-a)
        log_x = math.log(nC * log_Q) - math.log(c_den)
    else:
        c_den = a
        log_x = math.log(nC * log_Q) - log_a

    if log_x >= _LOG_MAX:
        return log_Q, None, math.nan, log_x

    x = math.exp(log_x)
    if x < 2 ** 52:
        base = math.floor(x)
        cbar_minus_one = base + 1
    else:
        base = int(x)
        cbar_minus_one = base + max(1, int(np.spacing(x)))

    cbar = max(cbar_minus_one + 1, C)
    # (Cbar - 1) - x, exact even when x is beyond the integer grid
    delta = float(cbar - 1 - base) - (x - base)
    log_gamma = -(c_den / nC) * delta
    return log_Q, cbar, log_gamma, math.log(cbar)


def contraction_constants(n, C, alpha, beta, L):
    """Contraction constants of the row- and column-stochastic chains.

    Args:
        n (int): number of agents.
        C (int): connectivity bound.
        alpha (float): lower bound on supported entries of A_k.
        beta (float): lower bound on supported entries of B_k.
        L (float): largest local smoothness constant.

    Returns:
        ContractionConstants.

    """
    if n < 1 or C < 1:
        raise ValueError('n and C must be positive, got n={}, C={}'.format(
            n, C))

    for name, value in (('alpha', alpha), ('beta', beta)):
        if not 0 < value <= 1:
            raise ValueError('{} must be in (0, 1], got {}'.format(
                name, value))

    if alpha == 1 or beta == 1:
        # only a single agent has unit weights
        alpha = min(alpha, 1 - 1e-16)
        beta = min(beta, 1 - 1e-16)

    log_Q_A, Cbar_A, log_gamma_A, log_Cbar_A = _multistep(
        n, C, math.log(alpha))
    log_tau = math.log(beta) - (n * C + 1) * math.log(n)
    log_Q_B, Cbar_B, log_gamma_B, log_Cbar_B = _multistep(n, C, log_tau)
    log_m = n * C * math.log(n) + log_Q_B + math.log(L)
    return ContractionConstants(
        n=n, C=C, alpha=alpha, beta=beta, L=L,
        log_Q_A=log_Q_A, Cbar_A=Cbar_A, log_gamma_A=log_gamma_A,
        log_tau=log_tau, log_Q_B=log_Q_B, Cbar_B=Cbar_B,
        log_gamma_B=log_gamma_B, log_Cbar=max(log_Cbar_A, log_Cbar_B),
        log_m=log_m)


@dataclass(frozen=True, eq=False)
class PerturbationSystem:
    """Block-companion system ``M(eta) = M0 + eta ME``.

    The first block row is ``[M1, M2, ..., M2, MC]`` with ``Cbar - 2``
    copies of M2, and identities fill the block sub-diagonal. Each of the
    three distinct blocks is split into a part independent of eta (``_0``)
    and a part multiplied by eta (``_E``).

    Attributes:
        n (int), C (int), L (float), mu (float), eta (float)
        Cbar (int): number of block columns.
        log_gamma_A (float), log_gamma_B (float): logarithms of the diagonal
            entries of ``MC_0``.
        M1_0, M1_E, M2_0, M2_E, MC_0, MC_E (array): 3 x 3 blocks.

    """
    n: int
    C: int
    L: float
    mu: float
    eta: float
    Cbar: int
    log_gamma_A: float
    log_gamma_B: float
    M1_0: np.ndarray
    M1_E: np.ndarray
    M2_0: np.ndarray
    M2_E: np.ndarray
    MC_0: np.ndarray
    MC_E: np.ndarray

    @property
    def dim(self):
        return 3 * self.Cbar

    def at(self, eta):
        """The same system at another step size."""
        if eta < 0:
            raise ValueError('eta must be nonnegative, got {}'.format(eta))

        return replace(self, eta=float(eta))

    def with_gammas(self, gamma_A=None, gamma_B=None):
        """The system with replaced contraction factors."""
        log_A = self.log_gamma_A if gamma_A is None else math.log(gamma_A)
        log_B = self.log_gamma_B if gamma_B is None else math.log(gamma_B)
        MC_0 = self.MC_0.copy()
        MC_0[0, 0] = math.exp(log_A)
        MC_0[2, 2] = math.exp(log_B)
        return replace(self, log_gamma_A=log_A, log_gamma_B=log_B, MC_0=MC_0)

    def blocks(self, eta=None):
        """``M1, M2, MC`` at ``eta`` (the system's own by default)."""
        eta = self.eta if eta is None else eta
        return (self.M1_0 + eta * self.M1_E, self.M2_0 + eta * self.M2_E,
                self.MC_0 + eta * self.MC_E)

    def materialize(self, eta=None, limit=MATERIALIZE_LIMIT):
        """Sparse ``3 Cbar x 3 Cbar`` matrix ``M(eta)``.

        Raises:
            ValueError: if Cbar exceeds limit.

        """
        if self.Cbar > limit:
            raise ValueError(
                'Cbar={} is too large to materialize (limit {})'.format(
                    self.Cbar, limit))

        M1, M2, MC = self.blocks(eta)
        first = [M1] + [M2] * (self.Cbar - 2) + [MC]
        first = np.hstack(first)
        rows, cols = np.nonzero(first)
        data = first[rows, cols]
        sub = np.arange(3 * (self.Cbar - 1))
        rows = np.concatenate([rows, sub + 3])
        cols = np.concatenate([cols, sub])
        data = np.concatenate([data, np.ones(len(sub))])
        return sp.csr_matrix((data, (rows, cols)), shape=(self.dim, self.dim))

    @property
    def M0(self):
        return self.materialize(0.0)

    @property
    def ME(self):
        M = self.materialize(1.0) - self.materialize(0.0)
        M.eliminate_zeros()
        return M


def build_M(constants, n, C, L, mu, eta=0.0):
    """Assemble the perturbation system of the tracked error vector.

    Args:
        constants (ContractionConstants): constants for (n, C).
        n (int): number of agents.
        C (int): connectivity bound.
        L (float): largest local smoothness constant.
        mu (float): strong convexity of the average objective.
        eta (float): step size.

    Returns:
        PerturbationSystem.

    Raises:
        OverflowError: if the constants do not fit in floating point; the
            log-domain fields of ``constants`` are still valid.

    """
    if eta < 0:
        raise ValueError('eta must be nonnegative, got {}'.format(eta))

    if (n, C) != (constants.n, constants.C):
        raise ValueError('constants were computed for n={}, C={}'.format(
            constants.n, constants.C))

    if not constants.representable:
        raise OverflowError(
            'constants for n={}, C={} exceed floating point '
            '(log Cbar = {:.4g}, log m = {:.4g}); use the log-domain fields '
            'of ContractionConstants'.format(
                n, C, constants.log_Cbar, constants.log_m))

    sqrt_n = math.sqrt(n)
    Q_A = constants.Q_A
    m = constants.m
    scale = float(n ** (n * C - 1))

    M1_0 = np.array([[0, 0, 0],
                     [0, 1, 0],
                     [2 * m * sqrt_n, 0, 0]], dtype=float)
    M1_E = np.array([[Q_A * n * L, Q_A * n * L, Q_A],
                     [n * L, -mu / scale, sqrt_n],
                     [m * sqrt_n * L, m * n * L, m]], dtype=float)
    M2_0 = np.array([[0, 0, 0],
                     [0, 0, 0],
                     [2 * m * sqrt_n, 0, 0]], dtype=float)
    M2_E = np.array([[Q_A * n * L, Q_A * n * L, Q_A],
                     [0, 0, 0],
                     [m * sqrt_n * L, m * n * L, m]], dtype=float)
    MC_0 = np.array([[constants.gamma_A, 0, 0],
                     [0, 0, 0],
                     [2 * m * sqrt_n, 0, constants.gamma_B]], dtype=float)
    return PerturbationSystem(
        n=n, C=C, L=L, mu=mu, eta=float(eta), Cbar=constants.Cbar,
        log_gamma_A=constants.log_gamma_A, log_gamma_B=constants.log_gamma_B,
        M1_0=M1_0, M1_E=M1_E, M2_0=M2_0, M2_E=M2_E, MC_0=MC_0,
        MC_E=M2_E.copy())


def _geometric(theta, lo, hi):
    # sum_{j=lo}^{hi} exp(-j theta)
    count = hi - lo + 1
    if count <= 0:
        return 0.0

    if theta == 0:
        return float(count)

    return (np.exp(-lo * theta) * np.expm1(-float(count) * theta)
            / np.expm1(-theta))


def _z_matrix(system, eta, theta):
    """``I - sum_j exp(-j theta) M_j`` with diagonals formed stably."""
    Cb = float(system.Cbar)
    e1 = np.exp(-theta)
    eC = np.exp(-Cb * theta)
    S2 = _geometric(theta, 2, system.Cbar - 1)

    G0 = e1 * system.M1_0 + eC * system.MC_0
    GE = e1 * system.M1_E + eC * system.MC_E
    if S2:
        G0 = G0 + S2 * system.M2_0
        GE = GE + S2 * system.M2_E

    Z = -(G0 + eta * GE)
    Z[0, 0] = -np.expm1(system.log_gamma_A - Cb * theta) - eta * GE[0, 0]
    Z[1, 1] = -np.expm1(-theta) - eta * GE[1, 1]
    Z[2, 2] = -np.expm1(system.log_gamma_B - Cb * theta) - eta * GE[2, 2]
    return Z


def _is_m_matrix(Z):
    """Whether a Z-matrix is a nonsingular M-matrix (positive pivots)."""
    Z = np.array(Z, dtype=float)
    k = Z.shape[0]
    for i in range(k):
        pivot = Z[i, i]
        if not (np.isfinite(pivot) and pivot > 0):
            return False

        if i + 1 < k:
            Z[i + 1:, i + 1:] -= np.outer(Z[i + 1:, i], Z[i, i + 1:]) / pivot

    return True


def _stable(system, eta, theta, idx=None):
    with np.errstate(all='ignore'):
        Z = _z_matrix(system, eta, theta)
        if idx is not None:
            Z = Z[np.ix_(idx, idx)]

        return _is_m_matrix(Z)


def _bisect_log(pred, lo, hi, rtol, max_iter):
    # pred(lo) and pred(hi) differ; shrink [lo, hi] keeping that.
    p_lo = pred(lo)
    for _ in range(max_iter):
        if hi - lo <= rtol:
            break

        mid = (lo + hi) / 2
        if pred(mid) == p_lo:
            lo = mid
        else:
            hi = mid

    return lo, hi


def companion_log_radius(system, eta=None, idx=None, rtol=1e-12,
                         max_iter=200):
    """Logarithm of the spectral radius of ``M(eta)``.

    Found by bisection on ``log|theta|`` over the characteristic condition;
    the result is accurate to ``rtol`` relative to ``|theta|``, which keeps
    radii within 1e-20 of 1 resolvable.

    Args:
        system (PerturbationSystem): system.
        eta (float or None): step size, the system's own when None.
        idx (list of int or None): restrict to the variables in idx, giving
            the radius of that diagonal part of the system.
        rtol (float): bisection tolerance in ``log|theta|``.
        max_iter (int): bisection cap.

    Returns:
        float: ``log rho``, clamped to ``[-700 / Cbar, 700 / Cbar]``.

    """
    eta = system.eta if eta is None else eta
    theta_max = _LOG_MAX / float(system.Cbar)
    log_floor = math.log(_THETA_FLOOR)
    log_max = math.log(theta_max)

    def stable(theta):
        return _stable(system, eta, theta, idx)

    if stable(0.0):
        if stable(-theta_max):
            return -theta_max

        if not stable(-_THETA_FLOOR):
            return -_THETA_FLOOR

        lo, hi = _bisect_log(lambda s: stable(-math.exp(s)), log_floor,
                             log_max, rtol, max_iter)
        return -math.exp((lo + hi) / 2)
    else:
        if stable(_THETA_FLOOR):
            return 0.0

        if not stable(theta_max):
            return theta_max

        lo, hi = _bisect_log(lambda s: stable(math.exp(s)), log_floor,
                             log_max, rtol, max_iter)
        return math.exp((lo + hi) / 2)


def spectral_radius(M, tol=1e-10, max_iter=100000):
    """Spectral radius of a nonnegative matrix.

    A PerturbationSystem is handled structurally. Explicit matrices use the
    power method on ``M + I``, whose Perron root is ``rho(M) + 1`` and which
    has no other eigenvalue of the same modulus.

    Args:
        M (PerturbationSystem, array or sparse matrix): matrix.
        tol (float): relative tolerance.
        max_iter (int): power iteration cap.

    Raises:
        ConvergenceError: if the power method does not settle.

    """
    if isinstance(M, PerturbationSystem):
        return float(np.exp(companion_log_radius(M)))

    if not sp.issparse(M):
        M = np.asarray(M, dtype=float)

    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError('M must be square, got shape {}'.format(M.shape))

    if (M.min() if not sp.issparse(M) else M.data.min(initial=0)) < 0:
        raise ValueError('M must be entrywise nonnegative')

    x = np.ones(M.shape[0])
    power = alg_module.PowerMethod(lambda x: M @ x + x, x, max_iter=max_iter,
                                   tol=tol * 1e-2, restart=1000)
    while not power.done():
        power.update()

    if power.resid > tol:
        raise ConvergenceError(
            'power method stopped at relative change {:.3e} > {:.1e}'.format(
                power.resid, tol), achieved=power.resid)

    return max(power.max_eig - 1, 0.0)


@dataclass(frozen=True)
class UnitEigenvalueReport:
    """Eigenstructure of ``M0`` at its unit eigenvalue.

    Attributes:
        log_rho (float): log spectral radius of M0.
        rho_ok (bool): ``|rho - 1| <= 1e-10``.
        simple_ok (bool): 1 is attained by one class only and everything else
            lies strictly inside the unit circle.
        deflated_log_radius (float): log radius of M0 with the unit
            eigenvalue removed; nan when it could not be computed.
        u_residual, w_residual (float): ``||M0 u - u||_inf`` and
            ``||w^T M0 - w^T||_inf``.
        u_ok, w_ok (bool): residuals at most 1e-12.
        wu (float): ``w^T u``.
        class_log_radii (list of (tuple, float)): log radius per strongly
            connected class of variables.

    """
    log_rho: float
    rho_ok: bool
    simple_ok: bool
    deflated_log_radius: float
    u_residual: float
    w_residual: float
    u_ok: bool
    w_ok: bool
    wu: float
    class_log_radii: list = field(default_factory=list)

    @property
    def ok(self):
        return self.rho_ok and self.simple_ok and self.u_ok and self.w_ok


def _variable_classes(system):
    pattern = (system.M1_0 != 0) | (system.MC_0 != 0)
    if system.Cbar > 2:
        pattern |= system.M2_0 != 0

    n_classes, labels = csgraph.connected_components(
        sp.csr_matrix(pattern.astype(float)), directed=True,
        connection='strong')
    return [np.flatnonzero(labels == c).tolist() for c in range(n_classes)]


def _secondary_log_radius(system, idx):
    """Log modulus of the second root of one class of M0."""
    M1 = system.M1_0[np.ix_(idx, idx)]
    M2 = system.M2_0[np.ix_(idx, idx)]
    MC = system.MC_0[np.ix_(idx, idx)]
    if len(idx) == 1 and M2[0, 0] == 0 and MC[0, 0] == 0:
        # lambda^Cbar = M1 lambda^(Cbar - 1): remaining roots are zero
        return -math.inf

    if system.Cbar * len(idx) > MATERIALIZE_LIMIT:
        warnings.warn('class {} of the unit eigenvalue is too large to '
                      'deflate (Cbar={})'.format(idx, system.Cbar))
        return math.nan

    sub = replace(system, M1_0=_embed(M1), M2_0=_embed(M2), MC_0=_embed(MC))
    k = len(idx)
    M = sub.materialize(0.0).toarray()
    keep = np.concatenate([np.arange(j * 3, j * 3 + k)
                           for j in range(system.Cbar)])
    eig = np.sort(np.abs(np.linalg.eigvals(M[np.ix_(keep, keep)])))[::-1]
    return float(np.log(eig[1])) if eig[1] > 0 else -math.inf


def _embed(block):
    out = np.zeros((3, 3))
    k = block.shape[0]
    out[:k, :k] = block
    return out


def verify_unit_eigenvalue(M0, Cbar=None, tol=1e-10):
    """Check that 1 is a simple Perron eigenvalue of ``M0``.

    The unit eigenvalue comes from the r-variable, whose right eigenvector is
    ``u = 1_Cbar (x) (0, 1, 0)`` and whose left eigenvector is ``w = e_1``.
    Simplicity is checked by deflation: the strongly connected classes of
    the variable dependency graph each contribute their own roots, so the
    deflated radius is the largest radius over the other classes and the
    second root of the unit class.

    Args:
        M0 (PerturbationSystem): system, evaluated at eta = 0.
        Cbar (int or None): expected number of block columns.
        tol (float): tolerance on ``|rho - 1|``.

    Returns:
        UnitEigenvalueReport.

    """
    system = M0.at(0.0)
    if Cbar is not None and Cbar != system.Cbar:
        raise ValueError('system has Cbar={}, expected {}'.format(
            system.Cbar, Cbar))

    classes = _variable_classes(system)
    radii = [(tuple(idx), companion_log_radius(system, 0.0, idx))
             for idx in classes]
    log_rho = max(r for _, r in radii)

    top = [idx for idx, r in radii if r == log_rho]
    others = [r for idx, r in radii if r < log_rho]
    if len(top) == 1:
        secondary = _secondary_log_radius(system, list(top[0]))
        candidates = others + [secondary]
        deflated = (math.nan if any(math.isnan(r) for r in candidates)
                    else max(candidates))
    else:
        deflated = log_rho

    e1 = np.array([0.0, 1.0, 0.0])
    column = system.M1_0[:, 1] + system.MC_0[:, 1]
    if system.Cbar > 2:
        column = column + float(system.Cbar - 2) * system.M2_0[:, 1]

    u_residual = float(np.abs(column - e1).max())
    w_residual = float(max(np.abs(system.M1_0[1] - e1).max(),
                           np.abs(system.M2_0[1]).max()
                           if system.Cbar > 2 else 0.0,
                           np.abs(system.MC_0[1]).max()))

    return UnitEigenvalueReport(
        log_rho=log_rho,
        rho_ok=bool(abs(math.expm1(log_rho)) <= tol),
        simple_ok=bool(len(top) == 1 and deflated < log_rho),
        deflated_log_radius=deflated,
        u_residual=u_residual, w_residual=w_residual,
        u_ok=u_residual <= 1e-12, w_ok=w_residual <= 1e-12,
        wu=float(e1 @ e1), class_log_radii=radii)


@dataclass(frozen=True)
class DerivativeReport:
    """First-order change of the Perron root of ``M(eta)`` at eta = 0.

    Attributes:
        wMEu (float): ``w^T ME u``.
        predicted (float): ``-mu / n^{nC - 1}``.
        slope (float): finite-difference derivative of ``rho(M(eta))``.
        h (float): finite-difference step.
        exact_ok (bool): wMEu matches predicted to 1e-12.
        slope_ok (bool): slope is negative and within 5% of wMEu.

    """
    wMEu: float
    predicted: float
    slope: float
    h: float
    exact_ok: bool
    slope_ok: bool

    @property
    def ok(self):
        return self.exact_ok and self.slope_ok


def perturbation_derivative(system, n, C, mu, h=None):
    """Compare ``w^T ME u`` with ``-mu / n^{nC - 1}`` and with a slope.

    The slope uses Richardson extrapolation over steps h and 2h:
    ``(4 (rho(h) - 1) - (rho(2h) - 1)) / (2 h)``. The default step is
    ``1e-3 eta*``, since the derivative only describes ``rho`` on a
    neighbourhood of 0 that scales with the stability threshold.

    Args:
        system (PerturbationSystem): system.
        n (int): number of agents.
        C (int): connectivity bound.
        mu (float): strong convexity.
        h (float or None): finite-difference step.

    Returns:
        DerivativeReport.

    """
    predicted = -mu / float(n ** (n * C - 1))
    wMEu = float(system.M1_E[1, 1] + system.MC_E[1, 1])
    if system.Cbar > 2:
        wMEu += float(system.Cbar - 2) * float(system.M2_E[1, 1])

    exact_ok = abs(wMEu - predicted) <= 1e-12 * max(1.0, abs(predicted))
    if predicted == 0:
        return DerivativeReport(wMEu, predicted, math.nan, math.nan,
                                bool(exact_ok and wMEu == 0), True)

    if h is None:
        eta_star = _eta_threshold(system, n, system.L)
        h = 1e-3 * eta_star if eta_star > 0 else 1e-6 / (n * system.L)

    d1 = math.expm1(companion_log_radius(system, h))
    d2 = math.expm1(companion_log_radius(system, 2 * h))
    slope = (4 * d1 - d2) / (2 * h)
    slope_ok = slope < 0 and abs(slope - wMEu) <= 0.05 * abs(wMEu)
    return DerivativeReport(wMEu, predicted, slope, h, bool(exact_ok),
                            bool(slope_ok))


def _eta_threshold(system, n, L, rtol=1e-6):
    def stable(eta):
        return _stable(system, eta, 0.0)

    hi = 2 / (n * L)
    inside = hi * (1 - rtol)
    if stable(inside):
        return inside

    lo = hi / 2
    while not stable(lo):
        hi = lo
        lo = lo / 2
        if lo < 1e-300:
            warnings.warn('rho(M(eta)) >= 1 for every probed eta > 0; the '
                          'constants are too conservative, returning 0')
            return 0.0

    lo, _ = _bisect_log(lambda s: stable(math.exp(s)), math.log(lo),
                        math.log(hi), rtol, 200)
    return math.exp(lo)


def eta_threshold(constants, n, C, L, mu, rtol=1e-6):
    """Largest step size with ``rho(M(eta)) < 1``.

    Returns:
        float: eta* in ``(0, 2 / (n L))`` to relative tolerance rtol, or 0
        (with a warning) if no probed step size is stable. The open upper
        end is never returned; a system stable there gives
        ``2 (1 - rtol) / (n L)``.

    """
    return _eta_threshold(build_M(constants, n, C, L, mu), n, L, rtol)


@dataclass(frozen=True, eq=False)
class TkTrace:
    """Tracked error vector.

    Attributes:
        t (array): rows ``(||x~_k||, ||r_k||, ||s~_k||)``, shape
            ``(K + 1, 3)``.
        y_norm (array): ``||y_k||``.

    """
    t: np.ndarray
    y_norm: np.ndarray

    @property
    def x_tilde(self):
        return self.t[:, 0]

    @property
    def r(self):
        return self.t[:, 1]

    @property
    def s_tilde(self):
        return self.t[:, 2]

    def corrupted(self, k, component, factor):
        """Copy with ``t[k, component]`` multiplied by factor."""
        t = self.t.copy()
        t[k, component] *= factor
        return TkTrace(t, self.y_norm)


def trace_t(run_states, phi, v, x_star, problem=None):
    """Tracked error vector of a TV-AB run.

    With ``v^_k = v_k / n`` and ``V_k = diag(v^_k)``:
    ``x~_k = x_k - 1 phi_k^T x_k``, ``r_k = 1 (phi_k^T x_k - x*)``,
    ``s_k = V_k^{-1} y_k`` and ``s~_k = s_k - 1 v^_k^T s_k``.

    Args:
        run_states (list of NetworkState): states at k = 0..K.
        phi (array): phi_k for at least k = 0..K.
        v (array): v_k for at least k = 0..K.
        x_star (array): optimum.
        problem (Problem or None): unused, accepted for symmetry with the
            other checks.

    Returns:
        TkTrace.

    """
    K = len(run_states) - 1
    if len(phi) < K + 1 or len(v) < K + 1:
        raise ValueError('phi and v must cover {} iterations'.format(K + 1))

    v_hat = v_stochastic(v)
    if np.any(v_hat[:K + 1] <= 0):
        raise ValueError('V_k is singular: v has a nonpositive entry')

    t = np.empty((K + 1, 3))
    y_norm = np.empty(K + 1)
    for k, state in enumerate(run_states):
        if state.y is None:
            raise ValueError('trace_t needs trackers, got a {} state'.format(
                type(state).__name__))

        n = state.n
        x_bar = phi[k] @ state.x
        s = state.y / v_hat[k][:, None]
        s_tilde = s - v_hat[k] @ s
        t[k, 0] = np.linalg.norm(state.x - x_bar)
        t[k, 1] = math.sqrt(n) * np.linalg.norm(x_bar - x_star)
        t[k, 2] = np.linalg.norm(s_tilde)
        y_norm[k] = np.linalg.norm(state.y)

    return TkTrace(t, y_norm)


@dataclass(frozen=True)
class OneStepBoundsReport:
    """Per-iteration bounds on ``||y_k||`` and ``||r_{k+1}||``.

    Attributes:
        tracker_violations (int): iterations with
            ``||y_k|| > nL ||x~_k|| + nL ||r_k|| + ||s~_k||``.
        tracker_max_gap (float): largest relative excess.
        optimality_checked (bool): whether eta < 1 / (nL), the range where
            the bound on ``||r_{k+1}||`` holds.
        optimality_violations (int): iterations with ``||r_{k+1}|| >
            eta nL ||x~_k|| + (1 - eta mu / n^{nC-1}) ||r_k|| +
            eta sqrt(n) ||s~_k||``.
        optimality_max_gap (float): largest relative excess.
        theta_ok (bool or None): ``1 / n^{nC} <= theta_k <= 1`` for all k.

    """
    tracker_violations: int
    tracker_max_gap: float
    optimality_checked: bool
    optimality_violations: int
    optimality_max_gap: float
    theta_ok: Optional[bool] = None

    @property
    def ok(self):
        return (self.tracker_violations == 0
                and self.optimality_violations == 0
                and self.theta_ok is not False)


def _violations(lhs, rhs, scale, rtol):
    gap = lhs - rhs
    rel = gap / np.maximum(scale, np.finfo(float).tiny)
    bad = gap > rtol * scale
    return int(bad.sum()), float(rel.max()) if len(rel) else -math.inf


def check_one_step_bounds(tk, n, C, L, mu, eta, theta=None, rtol=1e-9):
    """Check the one-step bounds on the tracker and the optimality gap."""
    t = tk.t
    tracker = n * L * (t[:, 0] + t[:, 1]) + t[:, 2]
    tracker_count, tracker_gap = _violations(tk.y_norm, tracker, tracker,
                                             rtol)

    checked = eta < 1 / (n * L)
    count, gap = 0, -math.inf
    if checked and len(t) > 1:
        contraction = 1 - eta * mu / float(n ** (n * C - 1))
        terms = np.stack([eta * n * L * t[:-1, 0], contraction * t[:-1, 1],
                          eta * math.sqrt(n) * t[:-1, 2]])
        count, gap = _violations(t[1:, 1], terms.sum(axis=0),
                                 np.abs(terms).sum(axis=0), rtol)

    theta_ok = None
    if theta is not None:
        lower = math.exp(-n * C * math.log(n))
        theta = np.asarray(theta)
        theta_ok = bool(np.all(theta >= lower * (1 - 1e-12))
                        and np.all(theta <= 1 + 1e-12))

    return OneStepBoundsReport(tracker_count, tracker_gap, bool(checked),
                             count, gap, theta_ok)


@dataclass(frozen=True)
class InequalityReport:
    """Result of :func:`check_inequality_system`.

    Attributes:
        violations (int): violated (iteration, component) pairs.
        max_gap (float): largest ``(lhs - rhs) / scale``.
        checked (int): number of iterations checked.
        violations_per_component (list of int): for x~, r and s~.

    """
    violations: int
    max_gap: float
    checked: int
    violations_per_component: list

    @property
    def ok(self):
        return self.violations == 0


def check_inequality_system(tk, system, Cbar=None, rtol=1e-9):
    """Check ``t_{k+1} <= M1 t_k + M2 sum_l t_{k-l} + MC t_{k-Cbar+1}``.

    This is the first block row of the stacked recursion; the other rows
    only shift the history and hold with equality. Iterations
    ``k = Cbar - 1, ..., K - 1`` are checked, with a violation counted when
    the excess is above ``rtol`` times the sum of absolute right-hand terms.

    Args:
        tk (TkTrace): trace.
        system (PerturbationSystem): system at the run's step size.
        Cbar (int or None): expected number of block columns.
        rtol (float): relative tolerance.

    Returns:
        InequalityReport.

    """
    c = system.Cbar
    if Cbar is not None and Cbar != c:
        raise ValueError('system has Cbar={}, expected {}'.format(c, Cbar))

    t = np.asarray(tk.t, dtype=float)
    if len(t) <= c:
        warnings.warn('trace of {} iterations is too short for Cbar={}; '
                      'nothing was checked'.format(len(t), c))
        return InequalityReport(0, -math.inf, 0, [0, 0, 0])

    ks = np.arange(c - 1, len(t) - 1)
    prefix = np.concatenate([np.zeros((1, 3)), np.cumsum(t, axis=0)])
    window = prefix[ks] - prefix[ks - c + 2]

    M1, M2, MC = system.blocks()
    rhs = t[ks] @ M1.T + window @ M2.T + t[ks - c + 1] @ MC.T
    scale = (t[ks] @ np.abs(M1).T + np.abs(window) @ np.abs(M2).T
             + t[ks - c + 1] @ np.abs(MC).T)
    gap = t[ks + 1] - rhs
    bad = gap > rtol * scale
    rel = gap / np.maximum(scale, np.finfo(float).tiny)
    return InequalityReport(int(bad.sum()), float(rel.max()), len(ks),
                            bad.sum(axis=0).astype(int).tolist())


@dataclass(frozen=True, eq=False)
class ErgodicityReport:
    """Row disagreement of growing backward products of C-step blocks.

    Attributes:
        disagreement (array): after 1, 2, ..., T blocks.
        fitted_rate (float): geometric rate fitted to the disagreement above
            the residual floor; 0 when it vanishes at once.

    """
    disagreement: np.ndarray
    fitted_rate: float

    def blocks_to(self, tol):
        """Number of blocks until the disagreement is at most tol."""
        hits = np.flatnonzero(self.disagreement <= tol)
        return int(hits[0]) + 1 if len(hits) else None


def ergodicity_check(seq, C=None, s=0, T=200):
    """Row disagreement of ``D_{s+t} ... D_s`` for t < T."""
    weights = weight_function(seq)
    C = _connectivity(seq, C)
    n = _n_of(weights, seq)
    P = np.eye(n)
    disagreement = np.empty(T)
    for t in range(T):
        for k in range((s + t) * C, (s + t + 1) * C):
            P = weights(k).A @ P

        disagreement[t] = _row_disagreement(P)

    above = np.flatnonzero(disagreement > config.RESIDUAL_FLOOR)
    if len(above) < 2:
        rate = 0.0
    else:
        slope = np.polyfit(above, np.log(disagreement[above]), 1)[0]
        rate = float(np.exp(slope))

    return ErgodicityReport(disagreement, rate)


def contraction_ratio(product, weight_start, weight_end, b):
    """Ratio of weighted deviations after and before a matrix product.

    Args:
        product (array): ``n x n`` product of the window.
        weight_start (array): stochastic weights at the window start.
        weight_end (array): stochastic weights after the window.
        b (array): vectors, shape ``(n, )`` or ``(trials, n)``.

    Returns:
        array of ratios; 0 where b has no deviation.

    """
    b = np.atleast_2d(b)
    a = b @ product.T
    num = np.linalg.norm(a - (a @ weight_end)[:, None], axis=1)
    den = np.linalg.norm(b - (b @ weight_start)[:, None], axis=1)
    scale = np.linalg.norm(b, axis=1)
    zero = den <= 1e-14 * np.maximum(scale, np.finfo(float).tiny)
    return np.where(zero, 0.0, num / np.where(zero, 1.0, den))


@dataclass(frozen=True)
class ContractionReport:
    """Empirical multi-step contraction factors against gamma_A, gamma_B."""
    max_ratio_A: float
    max_ratio_B: float
    gamma_A: float
    gamma_B: float
    ok: bool


def multistep_contraction_check(seq, constants, trials=1000, seed=0,
                                windows=4, span=None, aps=None):
    """Check the Cbar_A-step and Cbar_B-step contractions on random vectors.

    For windows starting at random ``j``, the row-stochastic product
    ``A_{j+c-1} ... A_j`` with ``c = Cbar_A`` must shrink the
    phi-weighted deviation by gamma_A, and
    ``R_{j+c-1} ... R_j = V_{j+c}^{-1} B_{j+c-1} ... B_j V_j`` with
    ``c = Cbar_B`` must shrink the v-weighted deviation by gamma_B.

    Args:
        seq (GraphSequence): graph sequence.
        constants (ContractionConstants): constants for the sequence.
        trials (int): random vectors in total.
        seed (int): random seed.
        windows (int): number of random windows.
        span (int or None): window starts are drawn from ``[0, span]``.
        aps (ApsState or None): precomputed sequences covering the windows.

    Returns:
        ContractionReport.

    """
    c_A, c_B = constants.Cbar_A, constants.Cbar_B
    if constants.Cbar is None or constants.Cbar > RUN_LIMIT:
        raise ValueError('Cbar={} is too large for a direct product'.format(
            constants.Cbar))

    if span is None:
        span = 10 * constants.C

    horizon = span + max(c_A, c_B) + 1
    if aps is None or aps.horizon < horizon:
        aps = aps_state(seq, constants.C, horizon)

    weights = weight_function(seq)
    rng = util.make_rng(seed)
    v_hat = v_stochastic(aps.v)
    n = aps.v.shape[1]
    per_window = -(-trials // windows)
    max_A = max_B = 0.0
    for j in rng.integers(0, span + 1, size=windows):
        j = int(j)
        P = np.eye(n)
        for k in range(j, j + c_A):
            P = weights(k).A @ P

        b = rng.standard_normal((per_window, n))
        max_A = max(max_A, float(contraction_ratio(
            P, aps.phi[j], aps.phi[j + c_A], b).max()))

        P = np.eye(n)
        for k in range(j, j + c_B):
            P = weights(k).B @ P

        R = P * v_hat[j][None, :] / v_hat[j + c_B][:, None]
        b = rng.standard_normal((per_window, n))
        max_B = max(max_B, float(contraction_ratio(
            R, v_hat[j], v_hat[j + c_B], b).max()))

    ok = (max_A <= constants.gamma_A * (1 + 1e-12)
          and max_B <= constants.gamma_B * (1 + 1e-12))
    return ContractionReport(max_A, max_B, constants.gamma_A,
                             constants.gamma_B, bool(ok))


@dataclass(eq=False)
class CertificationReport:
    """Everything :func:`certify` computed, with a text rendering."""
    constants: ContractionConstants
    eta_star: Optional[float] = None
    unit_eigenvalue: Optional[UnitEigenvalueReport] = None
    derivative: Optional[DerivativeReport] = None
    phi_residual: Optional[float] = None
    mu_delta: Optional[float] = None
    ergodicity: Optional[ErgodicityReport] = None
    contraction: Optional[ContractionReport] = None
    inequality: Optional[InequalityReport] = None
    one_step_bounds: Optional[OneStepBoundsReport] = None
    notes: list = field(default_factory=list)

    @property
    def ok(self):
        parts = [self.unit_eigenvalue, self.derivative, self.contraction,
                 self.inequality, self.one_step_bounds]
        return (self.eta_star is not None and self.eta_star > 0
                and all(p.ok for p in parts if p is not None))

    def to_text(self):
        lines = ['[constants]']
        for key, value in self.constants.to_dict().items():
            lines.append('{}: {}'.format(key, _fmt(value)))

        c = self.constants
        if c.representable:
            for key in ('Q_A', 'gamma_A', 'tau', 'Q_B', 'gamma_B', 'm'):
                lines.append('{}: {}'.format(key, _fmt(getattr(c, key))))

        lines += ['', '[threshold]', 'eta_star: {}'.format(
            _fmt(self.eta_star))]

        if self.unit_eigenvalue is not None:
            r = self.unit_eigenvalue
            lines += ['', '[unit eigenvalue]',
                      'log_rho: {}'.format(_fmt(r.log_rho)),
                      'rho_ok: {}'.format(r.rho_ok),
                      'simple_ok: {}'.format(r.simple_ok),
                      'deflated_log_radius: {}'.format(
                          _fmt(r.deflated_log_radius)),
                      'u_residual: {}'.format(_fmt(r.u_residual)),
                      'w_residual: {}'.format(_fmt(r.w_residual)),
                      'wu: {}'.format(_fmt(r.wu))]

        if self.derivative is not None:
            d = self.derivative
            lines += ['', '[derivative]',
                      'wMEu: {}'.format(_fmt(d.wMEu)),
                      'predicted: {}'.format(_fmt(d.predicted)),
                      'slope: {}'.format(_fmt(d.slope)),
                      'h: {}'.format(_fmt(d.h)),
                      'ok: {}'.format(d.ok)]

        lines += ['', '[sequences]',
                  'phi_recursion_residual: {}'.format(
                      _fmt(self.phi_residual)),
                  'mu_delta: {}'.format(_fmt(self.mu_delta))]
        if self.ergodicity is not None:
            lines += ['ergodicity_rate: {}'.format(
                _fmt(self.ergodicity.fitted_rate)),
                'ergodicity_blocks_to_1e-8: {}'.format(
                    self.ergodicity.blocks_to(1e-8))]

        if self.contraction is not None:
            r = self.contraction
            lines += ['', '[contraction]',
                      'max_ratio_A: {}'.format(_fmt(r.max_ratio_A)),
                      'max_ratio_B: {}'.format(_fmt(r.max_ratio_B)),
                      'ok: {}'.format(r.ok)]

        if self.inequality is not None:
            r = self.inequality
            lines += ['', '[inequality system]',
                      'checked: {}'.format(r.checked),
                      'violations: {}'.format(r.violations),
                      'violations_per_component: {}'.format(
                          r.violations_per_component),
                      'max_gap: {}'.format(_fmt(r.max_gap))]

        if self.one_step_bounds is not None:
            r = self.one_step_bounds
            lines += ['', '[one-step bounds]',
                      'tracker_violations: {}'.format(r.tracker_violations),
                      'optimality_checked: {}'.format(r.optimality_checked),
                      'optimality_violations: {}'.format(
                          r.optimality_violations),
                      'theta_ok: {}'.format(r.theta_ok)]

        if self.notes:
            lines += ['', '[notes]'] + self.notes

        lines += ['', 'ok: {}'.format(self.ok)]
        return '\n'.join(lines) + '\n'


def _fmt(value):
    if isinstance(value, float):
        return repr(value)

    return str(value)


def certify(problem, seq, C=None, x_star=None, horizon=None, seed=0,
            run_inequality=True, trials=200, show_pbar=False):
    """Certify a problem and graph sequence against the analysis.

    The weight bounds alpha and beta are the smallest supported entries
    observed over the horizon, L and mu come from the problem.

    Args:
        problem (Problem): problem.
        seq (GraphSequence): graph sequence.
        C (int or None): connectivity bound, ``seq.C`` when None.
        x_star (array or None): optimum, solved centrally when None.
        horizon (int or None): iterations used for the weight bounds and the
            phi residual, ``max(50, 10 C)`` when None.
        seed (int): seed of the checking run and the random vectors.
        run_inequality (bool): toggle running TV-AB for ``Cbar + 200``
            iterations at ``eta* / 2`` to check the recursion on t_k.
        trials (int): random vectors of the contraction check.
        show_pbar (bool): toggle the progress bar of the checking run.

    Returns:
        CertificationReport.

    """
    C = _connectivity(seq, C)
    n = problem.n
    if horizon is None:
        horizon = max(50, 10 * C)

    alpha, beta = observed_bounds(seq, horizon)
    constants = contraction_constants(n, C, alpha, beta, problem.L)
    report = CertificationReport(constants)

    aps = aps_state(seq, C, horizon)
    report.phi_residual = phi_recursion_residual(seq, aps.phi)
    report.mu_delta = aps.delta
    report.ergodicity = ergodicity_check(seq, C, T=min(200, 10 * n * C))

    if not constants.representable:
        report.notes.append('constants exceed floating point; only their '
                            'logarithms are reported')
        return report

    system = build_M(constants, n, C, problem.L, problem.mu)
    report.unit_eigenvalue = verify_unit_eigenvalue(system)
    report.eta_star = _eta_threshold(system, n, problem.L)
    h = 1e-3 * report.eta_star if report.eta_star > 0 else None
    report.derivative = perturbation_derivative(system, n, C, problem.mu,
                                                h=h)

    if constants.Cbar > RUN_LIMIT:
        report.notes.append('Cbar={} is too large for the trace checks'.format(
            constants.Cbar))
        return report

    report.contraction = multistep_contraction_check(
        seq, constants, trials=trials, seed=seed)

    if run_inequality and report.eta_star > 0:
        eta = report.eta_star / 2
        K = constants.Cbar + 200
        trace = app.run(problem, seq, eta, K, x0_policy='gaussian',
                        seed=seed, x_star=x_star, keep_states=True,
                        show_pbar=show_pbar)
        aps = aps_state(seq, C, K)
        tk = trace_t(trace.states, aps.phi, aps.v, trace.x_star)
        report.inequality = check_inequality_system(tk, system.at(eta))
        report.one_step_bounds = check_one_step_bounds(
            tk, n, C, problem.L, problem.mu, eta, theta=aps.theta)

    return report
