# -*- coding: utf-8 -*-
"""Time-varying directed graphs.

An edge ``(i, j)`` means agent ``j`` can send to agent ``i``, so the edge set
of a graph is the nonzero pattern of its weight matrices. Every graph carries
all ``n`` self-loops. Agents are indexed from 0.

A :class:`GraphSequence` produces the graph active at iteration ``k``. Every
generator draws from a random stream keyed by ``(seed, k)``, so graphs can be
requested in any order and are reproducible.
"""
import numpy as np
import scipy.sparse as sparse

from scipy.sparse import csgraph

from tvab import util


__all__ = ['GraphError', 'Digraph', 'GraphSequence',
           'StaticSequence', 'PeriodicSequence', 'ClusteredSequence',
           'RandomCBoundedSequence', 'GossipSequence',
           'graph_at', 'union', 'is_strongly_connected', 'check_c_bounded',
           'self_loops', 'directed_cycle', 'complete_graph',
           'make_static', 'make_periodic', 'make_clustered',
           'make_random_c_bounded', 'make_gossip',
           'read_edge_list', 'write_edge_list']

KINDS = ('static', 'periodic', 'clustered', 'random-c-bounded', 'gossip')

# Stream keys, so the fixed and per-iteration draws never share a stream.
_STEP_STREAM = 0
_CLUSTER_STREAM = 1


class GraphError(ValueError):
    """Raised for malformed graphs and mismatched agent counts."""


class Digraph(object):
    """Directed graph on ``n`` agents with all self-loops.

    Args:
        n (int): number of agents.
        edges (iterable of pairs): edges ``(i, j)``, meaning j sends to i.
            Self-loops are added if missing.

    Attributes:
        n (int): number of agents.
        edges (frozenset): edge set, including self-loops.

    """

    def __init__(self, n, edges=()):
        if n < 1:
            raise GraphError('n must be positive, got {}'.format(n))

        edge_set = set((i, i) for i in range(n))
        for e in edges:
            i, j = (int(v) for v in e)
            if not (0 <= i < n and 0 <= j < n):
                raise GraphError(
                    'edge {} out of range for n={}'.format((i, j), n))

            edge_set.add((i, j))

        self.n = n
        self.edges = frozenset(edge_set)

    @classmethod
    def from_edges(cls, n, edges):
        """Build a graph from an edge list, adding self-loops."""
        return cls(n, edges)

    @classmethod
    def from_adjacency(cls, adj):
        """Build a graph from a boolean matrix with ``adj[i, j]`` for j -> i.
        """
        adj = np.asarray(adj, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise GraphError(
                'adjacency must be square, got shape {}'.format(adj.shape))

        rows, cols = np.nonzero(adj)
        return cls(adj.shape[0], zip(rows.tolist(), cols.tolist()))

    def adjacency(self):
        """Boolean matrix with ``adj[i, j] = True`` iff ``(i, j)`` is an edge.
        """
        adj = np.zeros((self.n, self.n), dtype=bool)
        if self.edges:
            rows, cols = zip(*self.edges)
            adj[list(rows), list(cols)] = True

        return adj

    def in_degrees(self):
        """In-degrees including the self-loop."""
        return self.adjacency().sum(axis=1)

    def out_degrees(self):
        """Out-degrees including the self-loop."""
        return self.adjacency().sum(axis=0)

    def has_self_loops(self):
        return all((i, i) in self.edges for i in range(self.n))

    def non_loop_edges(self):
        return sorted(e for e in self.edges if e[0] != e[1])

    def relabel(self, perm):
        """Graph with agent ``i`` renamed to ``perm[i]``."""
        perm = np.asarray(perm)
        return Digraph(self.n, ((perm[i], perm[j]) for i, j in self.edges))

    def __eq__(self, other):
        return (isinstance(other, Digraph) and self.n == other.n
                and self.edges == other.edges)

    def __hash__(self):
        return hash((self.n, self.edges))

    def __repr__(self):
        return '<{n}-agent Digraph with {e} edges>'.format(
            n=self.n, e=len(self.edges) - self.n)


def self_loops(n):
    """Graph with only the self-loops."""
    return Digraph(n)


def directed_cycle(n, order=None):
    """Directed cycle visiting agents in ``order`` (default 0, 1, ..., n-1).
    """
    if order is None:
        order = range(n)

    order = list(order)
    return Digraph(n, ((order[(t + 1) % n], order[t]) for t in range(n)))


def complete_graph(n):
    """Complete digraph."""
    return Digraph(n, ((i, j) for i in range(n) for j in range(n)))


def union(graphs):
    """Union of the edge sets of graphs on the same agents.

    Args:
        graphs (list of Digraph): nonempty list.

    Returns:
        Digraph.

    Raises:
        GraphError: if the list is empty or the agent counts differ.

    """
    graphs = list(graphs)
    if not graphs:
        raise GraphError('cannot take the union of no graphs')

    n = graphs[0].n
    edges = set()
    for g in graphs:
        if g.n != n:
            raise GraphError(
                'mismatched agent counts, got {} and {}'.format(n, g.n))

        edges |= g.edges

    return Digraph(n, edges)


def is_strongly_connected(g):
    """Whether the graph has a single strongly connected component."""
    if g.n == 1:
        return True

    ncomp = csgraph.connected_components(
        sparse.csr_matrix(g.adjacency()), directed=True,
        connection='strong', return_labels=False)
    return ncomp == 1


class GraphSequence(object):
    """Abstraction for infinite sequences of directed graphs.

    Subclasses implement ``_graph_at(k)``, which must be a pure function of
    the constructor arguments and ``k``.

    Args:
        n (int): number of agents.
        kind (str): one of ``'static'``, ``'periodic'``, ``'clustered'``,
            ``'random-c-bounded'``, ``'gossip'``.
        seed (int): random seed.
        C (int or None): connectivity bound the sequence is built to satisfy.
            None when no bound is claimed.
        params (dict): kind-specific parameters, kept for reporting.

    """

    def __init__(self, n, kind, seed=0, C=None, params=None):
        if kind not in KINDS:
            raise GraphError(
                'unknown graph kind {}, expected one of {}'.format(
                    kind, KINDS))

        self.n = n
        self.kind = kind
        self.seed = seed
        self.C = C
        self.params = dict(params or {})

    def _graph_at(self, k):
        raise NotImplementedError

    def graph_at(self, k):
        """Graph active at iteration ``k``."""
        if k < 0:
            raise ValueError('k must be nonnegative, got {}'.format(k))

        return self._graph_at(int(k))

    def graphs(self, start, stop):
        """Graphs for iterations ``start, ..., stop - 1``."""
        return [self.graph_at(k) for k in range(start, stop)]

    def __repr__(self):
        return '<{kind} GraphSequence on {n} agents, seed={seed}>'.format(
            kind=self.kind, n=self.n, seed=self.seed)


class StaticSequence(GraphSequence):
    """The same graph at every iteration."""

    def __init__(self, graph):
        self.graph = graph
        C = 1 if is_strongly_connected(graph) else None
        super().__init__(graph.n, 'static', C=C)

    def _graph_at(self, k):
        return self.graph


class PeriodicSequence(GraphSequence):
    """Cycles through a fixed list of graphs.

    Args:
        graphs (list of Digraph): graphs ``G_0, ..., G_{P-1}``.
            The graph at iteration k is ``G_{k mod P}``.

    """

    def __init__(self, graphs):
        graphs = list(graphs)
        if not graphs:
            raise GraphError('a periodic sequence needs at least one graph')

        n = graphs[0].n
        if any(g.n != n for g in graphs):
            raise GraphError('all graphs of a periodic sequence share n')

        self.period = len(graphs)
        self.stored = graphs
        C = self.period if is_strongly_connected(union(graphs)) else None
        super().__init__(n, 'periodic', C=C,
                         params={'period': self.period})

    def _graph_at(self, k):
        return self.stored[k % self.period]


class ClusteredSequence(GraphSequence):
    """Clusters that are internally strongly connected at every iteration.

    Each cluster uses a fixed directed ring plus random chords. At every
    iteration k with ``k mod C == 0`` an inter-cluster graph is added:
    member j of cluster c sends to member j of the next cluster along a
    random cycle over the clusters.

    Args:
        n_clusters (int): number of clusters.
        cluster_size (int): agents per cluster.
        C (int): period of the inter-cluster activations.
        seed (int): random seed.
        chord_prob (float): probability of each intra-cluster chord.

    """

    def __init__(self, n_clusters, cluster_size, C, seed=0, chord_prob=0.3):
        if n_clusters < 1 or cluster_size < 1 or C < 1:
            raise GraphError(
                'n_clusters, cluster_size and C must be positive, got '
                '{}, {}, {}'.format(n_clusters, cluster_size, C))

        n = n_clusters * cluster_size
        self.n_clusters = n_clusters
        self.cluster_size = cluster_size
        self.chord_prob = chord_prob
        super().__init__(n, 'clustered', seed=seed, C=C,
                         params={'n_clusters': n_clusters,
                                 'cluster_size': cluster_size,
                                 'chord_prob': chord_prob})

        intra = []
        for c in range(n_clusters):
            rng = util.make_rng(seed, _CLUSTER_STREAM, c)
            members = [self.member(c, j) for j in range(cluster_size)]
            intra += _ring_with_chords(members, chord_prob, rng)

        self.intra = Digraph(n, intra)

    def member(self, c, j):
        """Agent index of member ``j`` of cluster ``c``."""
        return c * self.cluster_size + j

    def cluster_of(self, i):
        return i // self.cluster_size

    def _graph_at(self, k):
        if k % self.C != 0 or self.n_clusters == 1:
            return self.intra

        rng = util.make_rng(self.seed, _STEP_STREAM, k)
        order = rng.permutation(self.n_clusters)
        edges = set(self.intra.edges)
        for t in range(self.n_clusters):
            src, dst = order[t], order[(t + 1) % self.n_clusters]
            for j in range(self.cluster_size):
                edges.add((self.member(dst, j), self.member(src, j)))

        return Digraph(self.n, edges)


class RandomCBoundedSequence(GraphSequence):
    """Random strongly connected graph every C-th iteration, local otherwise.

    At ``k mod C == 0`` the graph is a random Hamiltonian cycle plus each
    remaining ordered pair with probability ``edge_prob``. Every other
    iteration has self-loops only.

    """

    def __init__(self, n, C, seed=0, edge_prob=0.05):
        if C < 1:
            raise GraphError('C must be positive, got {}'.format(C))

        self.edge_prob = edge_prob
        super().__init__(n, 'random-c-bounded', seed=seed, C=C,
                         params={'edge_prob': edge_prob})

    def _graph_at(self, k):
        if k % self.C != 0:
            return self_loops(self.n)

        rng = util.make_rng(self.seed, _STEP_STREAM, k)
        cycle = directed_cycle(self.n, rng.permutation(self.n))
        extra = rng.random((self.n, self.n)) < self.edge_prob
        rows, cols = np.nonzero(extra)
        return Digraph(self.n, set(cycle.edges)
                       | set(zip(rows.tolist(), cols.tolist())))


class GossipSequence(GraphSequence):
    """One directed edge per iteration, uniform over ordered pairs i != j.

    No connectivity bound is claimed for this sequence.
    """

    def __init__(self, n, seed=0):
        super().__init__(n, 'gossip', seed=seed, C=None)

    def active_edge(self, k):
        """The pair ``(receiver, sender)`` active at iteration k."""
        rng = util.make_rng(self.seed, _STEP_STREAM, k)
        sender = int(rng.integers(self.n))
        receiver = int(rng.integers(self.n - 1))
        if receiver >= sender:
            receiver += 1

        return receiver, sender

    def _graph_at(self, k):
        if self.n == 1:
            return self_loops(1)

        return Digraph(self.n, [self.active_edge(k)])


def _ring_with_chords(members, chord_prob, rng):
    size = len(members)
    edges = []
    if size == 1:
        return edges

    for t in range(size):
        edges.append((members[(t + 1) % size], members[t]))

    draws = rng.random((size, size))
    for a in range(size):
        for b in range(size):
            if a != b and b != (a + 1) % size and draws[a, b] < chord_prob:
                edges.append((members[b], members[a]))

    return edges


def graph_at(seq, k):
    """Graph of ``seq`` active at iteration ``k``."""
    return seq.graph_at(k)


def check_c_bounded(seq, C, horizon):
    """Check that every C consecutive graphs form a strongly connected union.

    Args:
        seq (GraphSequence): sequence to check.
        C (int): window length.
        horizon (int): number of iterations examined.

    Returns:
        bool: whether the union of graphs ``k, ..., k+C-1`` is strongly
        connected for every ``k`` in ``[0, horizon - C]``.

    """
    if C < 1:
        raise ValueError('C must be positive, got {}'.format(C))
    if horizon < C:
        raise ValueError(
            'horizon must be at least C, got horizon={}, C={}'.format(
                horizon, C))

    adjs = [seq.graph_at(k).adjacency() for k in range(horizon)]
    for k in range(horizon - C + 1):
        window = np.logical_or.reduce(adjs[k:k + C])
        if not is_strongly_connected(Digraph.from_adjacency(window)):
            return False

    return True


def make_static(graph):
    """Sequence repeating ``graph``."""
    return StaticSequence(graph)


def make_periodic(n=None, graphs=None, period=4):
    """Periodic sequence.

    When ``graphs`` is None, the arcs ``t -> t+1`` of a directed n-cycle are
    split into ``period`` subsets by ``t mod period``, so each graph is
    disconnected while their union is the cycle.

    Args:
        n (int): number of agents, required when graphs is None.
        graphs (list of Digraph or None): explicit graph list.
        period (int): period of the built-in default.

    Returns:
        PeriodicSequence.

    """
    if graphs is None:
        if n is None:
            raise ValueError('n is required for the built-in periodic graphs')

        graphs = []
        for r in range(period):
            arcs = [((t + 1) % n, t) for t in range(n) if t % period == r]
            graphs.append(Digraph(n, arcs))

    return PeriodicSequence(graphs)


def make_clustered(n_clusters, cluster_size, C, seed=0, chord_prob=0.3):
    """Clustered sequence, see :class:`ClusteredSequence`."""
    return ClusteredSequence(n_clusters, cluster_size, C, seed=seed,
                             chord_prob=chord_prob)


def make_random_c_bounded(n, C, seed=0, edge_prob=0.05):
    """Random C-bounded sequence, see :class:`RandomCBoundedSequence`."""
    return RandomCBoundedSequence(n, C, seed=seed, edge_prob=edge_prob)


def make_gossip(n, seed=0):
    """Gossip sequence, see :class:`GossipSequence`."""
    return GossipSequence(n, seed=seed)


def read_edge_list(path, n, count=None):
    """Read graphs from a text file of ``graph receiver sender`` rows.

    Lines starting with ``#`` are comments. Graph indices run from 0 to
    ``G - 1``; a graph with no listed rows has self-loops only.

    Args:
        path (str or Path): file path.
        n (int): number of agents.
        count (int or None): number of graphs. Defaults to one past the
            largest graph index in the file.

    Returns:
        list of Digraph.

    """
    rows = np.loadtxt(path, dtype=int, comments='#', ndmin=2)
    if rows.size == 0:
        return [self_loops(n) for _ in range(count or 1)]

    if rows.shape[1] != 3:
        raise GraphError(
            'edge list rows must have 3 columns, got {}'.format(rows.shape[1]))

    if count is None:
        count = rows[:, 0].max() + 1
    return [Digraph(n, rows[rows[:, 0] == g, 1:].tolist())
            for g in range(count)]


def write_edge_list(path, graphs):
    """Write graphs as ``graph receiver sender`` rows, self-loops omitted."""
    rows = [(g, i, j) for g, graph in enumerate(graphs)
            for i, j in graph.non_loop_edges()]
    np.savetxt(path, np.array(rows, dtype=int).reshape(-1, 3), fmt='%d',
               header='graph receiver sender')
