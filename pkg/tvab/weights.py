# -*- coding: utf-8 -*-
"""Consensus weights.

Builds the row-stochastic ``A_k`` and column-stochastic ``B_k`` matrices of a
graph and reports how well a pair of matrices fits the graph.
"""
import functools

from dataclasses import dataclass

import numpy as np

from tvab import config
from tvab.graphs import Digraph


__all__ = ['WeightError', 'WeightPair', 'WeightDiagnostics',
           'AsymmetryReport', 'uniform_weights', 'weights_at',
           'weight_function',
           'validate_weights', 'column_stochastic_asymmetry',
           'save_weights_csv']


class WeightError(ValueError):
    """Raised when weights cannot be formed for a graph."""


@dataclass(frozen=True, eq=False)
class WeightPair:
    """Row-stochastic ``A`` and column-stochastic ``B`` of one iteration."""
    A: np.ndarray
    B: np.ndarray

    @property
    def n(self):
        return self.A.shape[0]


@dataclass(frozen=True)
class WeightDiagnostics:
    """Result of :func:`validate_weights`.

    Attributes:
        alpha_hat (float): smallest supported entry of A.
        beta_hat (float): smallest supported entry of B.
        row_err (float): largest deviation of a row sum of A from 1.
        col_err (float): largest deviation of a column sum of B from 1.
        pattern_ok (bool): A and B are nonzero exactly on the edges.
        diag_ok (bool): all diagonal entries of A and B are positive.

    """
    alpha_hat: float
    beta_hat: float
    row_err: float
    col_err: float
    pattern_ok: bool
    diag_ok: bool

    def ok(self, tol=config.STOCHASTIC_TOL):
        return (self.row_err <= tol and self.col_err <= tol
                and self.pattern_ok and self.diag_ok
                and self.alpha_hat > 0 and self.beta_hat > 0)


@dataclass(frozen=True)
class AsymmetryReport:
    """Per-transmitter view of a column-stochastic update.

    Attributes:
        transmitters (list of int): agents with out-degree at least 2.
        stable (dict): transmitter -> whether its self-weight is below 1.
        unstable_receivers (dict): transmitter -> receivers j with
            ``B[j, i] + B[j, j] > 1``.

    """
    transmitters: list
    stable: dict
    unstable_receivers: dict


def _adjacency(g):
    if isinstance(g, Digraph):
        return g.adjacency()

    adj = np.asarray(g, dtype=bool)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise WeightError(
            'adjacency must be square, got shape {}'.format(adj.shape))

    return adj


def uniform_weights(g):
    """Uniform weights of a graph.

    ``A[i, j] = 1 / d_in(i)`` and ``B[i, j] = 1 / d_out(j)`` on every edge
    ``(i, j)``, with degrees counting the self-loop.

    Args:
        g (Digraph or array): graph, or boolean adjacency with ``adj[i, j]``
            for the edge j -> i.

    Returns:
        WeightPair.

    Raises:
        WeightError: if a self-loop is missing.

    """
    adj = _adjacency(g)
    if not np.all(np.diag(adj)):
        missing = np.flatnonzero(~np.diag(adj)).tolist()
        raise WeightError(
            'uniform weights need all self-loops, missing at {}'.format(
                missing))

    mask = adj.astype(float)
    d_in = mask.sum(axis=1)
    d_out = mask.sum(axis=0)
    A = mask / d_in[:, None]
    B = mask / d_out[None, :]
    return WeightPair(A, B)


def weights_at(seq, k):
    """Uniform weights of the graph active at iteration ``k`` of ``seq``."""
    return uniform_weights(seq.graph_at(k))


def weight_function(seq, maxsize=256):
    """Function k -> uniform weights of iteration k, cached per graph.

    Args:
        seq (GraphSequence or function): a sequence, or a function
            k -> WeightPair which is returned unchanged.
        maxsize (int): number of distinct graphs kept in the cache.

    """
    if callable(seq) and not hasattr(seq, 'graph_at'):
        return seq

    cached = functools.lru_cache(maxsize=maxsize)(uniform_weights)

    def weights(k):
        return cached(seq.graph_at(k))

    return weights


def validate_weights(wp, g):
    """Diagnostics of a weight pair against a graph.

    Args:
        wp (WeightPair): weights.
        g (Digraph or array): graph the weights should comply with.

    Returns:
        WeightDiagnostics.

    """
    adj = _adjacency(g)
    A = np.asarray(wp.A, dtype=float)
    B = np.asarray(wp.B, dtype=float)
    if A.shape != adj.shape or B.shape != adj.shape:
        raise ValueError(
            'weight shapes {} and {} do not match graph with n={}'.format(
                A.shape, B.shape, adj.shape[0]))

    pattern_ok = bool(np.array_equal(A != 0, adj)
                      and np.array_equal(B != 0, adj))
    diag_ok = bool(np.all(np.diag(A) > 0) and np.all(np.diag(B) > 0))

    supported_A = A[A != 0]
    supported_B = B[B != 0]
    alpha_hat = float(supported_A.min()) if supported_A.size else 0.0
    beta_hat = float(supported_B.min()) if supported_B.size else 0.0

    row_err = float(np.abs(A.sum(axis=1) - 1).max())
    col_err = float(np.abs(B.sum(axis=0) - 1).max())
    return WeightDiagnostics(alpha_hat, beta_hat, row_err, col_err,
                             pattern_ok, diag_ok)


def column_stochastic_asymmetry(wp, g):
    """Locally stable transmitters and locally unstable receivers.

    For each agent ``i`` with out-degree at least 2, checks that
    ``B[i, i] < 1`` and lists the receivers ``j`` of ``i`` whose update
    ``B[j, i] + B[j, j]`` exceeds 1.

    Args:
        wp (WeightPair): weights.
        g (Digraph or array): graph.

    Returns:
        AsymmetryReport.

    """
    adj = _adjacency(g)
    B = np.asarray(wp.B)
    d_out = adj.sum(axis=0)

    transmitters = np.flatnonzero(d_out >= 2).tolist()
    stable = {}
    unstable = {}
    for i in transmitters:
        stable[i] = bool(B[i, i] < 1)
        receivers = [j for j in np.flatnonzero(adj[:, i]).tolist() if j != i]
        unstable[i] = [j for j in receivers if B[j, i] + B[j, j] > 1]

    return AsymmetryReport(transmitters, stable, unstable)


def save_weights_csv(path, wp):
    """Write ``A`` above ``B`` as comma-separated rows."""
    n = wp.n
    np.savetxt(path, np.vstack([wp.A, wp.B]), delimiter=',', fmt='%.17g',
               header='rows 0..{m}: A, rows {n}..{e}: B'.format(
                   m=n - 1, n=n, e=2 * n - 1))
