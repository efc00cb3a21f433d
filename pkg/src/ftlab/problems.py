"""Benchmark fitness functions and the MST formulation on edge bit strings."""

import itertools
from dataclasses import dataclass, field

import numpy as np

from ftlab.core import BitString, ParameterError

__all__ = [
    "InputError",
    "OneMax",
    "LeadingOnes",
    "BinVal",
    "WeightedGraph",
    "MST",
    "make_problem",
    "component_count",
    "mst_weight_oracle",
    "spanning_tree_weights",
    "binval_gap_levels",
    "read_edge_list",
    "write_edge_list",
    "random_connected_graph",
]


class InputError(ValueError):
    """Malformed or unsupported problem input."""


def _bits(x, n):
    arr = x.bits if isinstance(x, BitString) else np.asarray(x, dtype=np.uint8)
    if arr.size != n:
        raise InputError(f"bit string has length {arr.size}, problem expects {n}")
    return arr


class OneMax:
    name = "onemax"
    maximize = True

    def __init__(self, n):
        if n < 1:
            raise ParameterError("n must be positive")
        self.n = n

    @property
    def optimum(self):
        return self.n

    def evaluate(self, x):
        return int(np.count_nonzero(_bits(x, self.n)))

    def __repr__(self):
        return f"OneMax({self.n})"


class LeadingOnes:
    name = "leadingones"
    maximize = True

    def __init__(self, n):
        if n < 1:
            raise ParameterError("n must be positive")
        self.n = n

    @property
    def optimum(self):
        return self.n

    def evaluate(self, x):
        arr = _bits(x, self.n)
        zeros = np.flatnonzero(arr == 0)
        return int(zeros[0]) if zeros.size else self.n

    def __repr__(self):
        return f"LeadingOnes({self.n})"


class BinVal:
    """``sum_i 2^(i-1) x_i`` with bit ``i`` (1-based) carrying weight ``2^(i-1)``.

    Values are exact Python integers.
    """

    name = "binval"
    maximize = True

    def __init__(self, n):
        if n < 1:
            raise ParameterError("n must be positive")
        self.n = n

    @property
    def optimum(self):
        return (1 << self.n) - 1

    def evaluate(self, x):
        arr = _bits(x, self.n)
        value = 0
        for i in np.flatnonzero(arr):
            value |= 1 << int(i)
        return value

    def __repr__(self):
        return f"BinVal({self.n})"


def binval_gap_levels(n, s, exact_power=False):
    """``(n_minus, n_plus)`` for a BinVal target with ``2^s <= 2^n - k < 2^(s+1)``.

    ``n_minus = n - ceil(log2(2^n - k))`` and ``n_plus = n - floor(log2(2^n - k))``;
    when ``2^n - k`` is an exact power of two both logarithms equal ``s``.
    """
    if not 0 <= s <= n:
        raise ParameterError(f"gap exponent must lie in [0, {n}], got {s}")
    n_plus = n - s
    n_minus = n - s if exact_power else n - (s + 1)
    return n_minus, n_plus


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected graph with positive integer edge weights, vertices ``0..n_vertices-1``."""

    n_vertices: int
    edges: tuple = field(default_factory=tuple)

    def __post_init__(self):
        edges = tuple((int(u), int(v), int(w)) for u, v, w in self.edges)
        object.__setattr__(self, "edges", edges)
        if self.n_vertices < 1:
            raise InputError("graph needs at least one vertex")
        for idx, (u, v, w) in enumerate(edges):
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices):
                raise InputError(f"edge {idx} has endpoint outside [0, {self.n_vertices})")
            if u == v:
                raise InputError(f"edge {idx} is a self-loop")
            if w < 1:
                raise InputError(f"edge {idx} has non-positive weight {w}")

    @property
    def m(self):
        return len(self.edges)

    @property
    def w_max(self):
        return max(w for _, _, w in self.edges)

    def arrays(self):
        e = np.array(self.edges, dtype=np.int64).reshape(-1, 3)
        return e[:, 0].copy(), e[:, 1].copy(), e[:, 2].copy()

    def is_connected(self):
        return _count_components(self.n_vertices, self.edges, [1] * self.m) == 1


def _find(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


def _count_components(n_vertices, edges, selected):
    parent = list(range(n_vertices))
    count = n_vertices
    for (u, v, _), bit in zip(edges, selected):
        if bit:
            ru, rv = _find(parent, u), _find(parent, v)
            if ru != rv:
                parent[ru] = rv
                count -= 1
    return count


def component_count(graph, x):
    """Connected components of the spanning subgraph selected by ``x``."""
    return _count_components(graph.n_vertices, graph.edges, _bits(x, graph.m))


def selected_weight(graph, x):
    arr = _bits(x, graph.m)
    return int(sum(w for (_, _, w), b in zip(graph.edges, arr) if b))


def _kruskal(graph, reverse=False):
    if not graph.is_connected():
        raise InputError("graph is not connected")
    order = sorted(range(graph.m), key=lambda i: graph.edges[i][2], reverse=reverse)
    parent = list(range(graph.n_vertices))
    chosen = [0] * graph.m
    total = 0
    for i in order:
        u, v, w = graph.edges[i]
        ru, rv = _find(parent, u), _find(parent, v)
        if ru != rv:
            parent[ru] = rv
            chosen[i] = 1
            total += w
    return total, chosen


def mst_weight_oracle(graph):
    """Minimum spanning tree weight by Kruskal's greedy edge ordering."""
    return _kruskal(graph)[0]


def minimum_spanning_tree(graph):
    return BitString(_kruskal(graph)[1])


def maximum_spanning_tree(graph):
    return BitString(_kruskal(graph, reverse=True)[1])


def spanning_tree_weights(graph):
    """Weights of all spanning trees by enumerating ``(n_vertices - 1)``-edge subsets."""
    k = graph.n_vertices - 1
    out = []
    for combo in itertools.combinations(range(graph.m), k):
        sel = [0] * graph.m
        for i in combo:
            sel[i] = 1
        if _count_components(graph.n_vertices, graph.edges, sel) == 1:
            out.append(sum(graph.edges[i][2] for i in combo))
    return out


class MST:
    """Minimise ``(c(x) - 1) * penalty + w(x)`` over edge subsets ``x``.

    ``penalty`` defaults to ``n_vertices**2 * w_max``, which exceeds every possible
    selected weight, so fewer components always wins.
    """

    name = "mst"
    maximize = False

    def __init__(self, graph, penalty=None):
        self.graph = graph
        self.n = graph.m
        self.penalty = graph.n_vertices ** 2 * graph.w_max if penalty is None else int(penalty)
        if self.penalty <= sum(w for _, _, w in graph.edges):
            raise ParameterError("penalty must exceed the total edge weight")
        self.w_opt = mst_weight_oracle(graph)

    @property
    def optimum(self):
        return self.w_opt

    def components_and_weight(self, x):
        return component_count(self.graph, x), selected_weight(self.graph, x)

    def evaluate(self, x):
        c, w = self.components_and_weight(x)
        return (c - 1) * self.penalty + w

    def decode(self, value):
        """Split a scalar fitness back into ``(components, weight)``."""
        extra, w = divmod(int(value), self.penalty)
        return extra + 1, w

    def __repr__(self):
        return f"MST(n_vertices={self.graph.n_vertices}, m={self.graph.m})"


def make_problem(name, n=None, graph=None, penalty=None):
    """Build a problem from its CLI/config name."""
    key = name.lower()
    if key == "mst":
        if graph is None:
            raise InputError("problem 'mst' needs a graph")
        return MST(graph, penalty=penalty)
    table = {"onemax": OneMax, "leadingones": LeadingOnes, "binval": BinVal}
    if key not in table:
        raise InputError(f"unknown problem {name!r}; expected onemax, leadingones, binval or mst")
    if n is None:
        raise InputError(f"problem {key!r} needs n")
    return table[key](int(n))


def read_edge_list(path):
    """Parse the plain-text format: header ``n_v m`` then ``m`` lines ``u v w``."""
    with open(path) as fh:
        lines = [(i + 1, ln.split()) for i, ln in enumerate(fh) if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise InputError(f"{path}: empty edge list")
    lineno, header = lines[0]
    if len(header) != 2:
        raise InputError(f"{path}:{lineno}: header must be 'n_v m'")
    try:
        n_v, m = int(header[0]), int(header[1])
    except ValueError:
        raise InputError(f"{path}:{lineno}: header values must be integers") from None
    body = lines[1:]
    if len(body) != m:
        raise InputError(f"{path}: header declares {m} edges, found {len(body)}")
    edges = []
    for lineno, parts in body:
        if len(parts) != 3:
            raise InputError(f"{path}:{lineno}: expected 'u v w'")
        try:
            edges.append(tuple(int(t) for t in parts))
        except ValueError:
            raise InputError(f"{path}:{lineno}: edge fields must be integers") from None
    try:
        graph = WeightedGraph(n_v, tuple(edges))
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None
    if not graph.is_connected():
        raise InputError(f"{path}: graph is not connected")
    return graph


def write_edge_list(graph, path):
    with open(path, "w") as fh:
        fh.write(f"{graph.n_vertices} {graph.m}\n")
        for u, v, w in graph.edges:
            fh.write(f"{u} {v} {w}\n")


def random_connected_graph(n_vertices, rng, extra_edge_prob=0.5, max_weight=10):
    """Random spanning tree plus independent extra edges; integer weights in ``[1, max_weight]``.

    ``rng`` is any object with ``bounded`` and ``random`` (e.g. :class:`~ftlab.rng.Xoshiro256`).
    """
    edges = {}
    order = list(range(n_vertices))
    for i in range(n_vertices - 1, 0, -1):
        j = rng.bounded(i + 1)
        order[i], order[j] = order[j], order[i]
    for i in range(1, n_vertices):
        u, v = order[i], order[rng.bounded(i)]
        edges[(min(u, v), max(u, v))] = 1 + rng.bounded(max_weight)
    for u in range(n_vertices):
        for v in range(u + 1, n_vertices):
            if (u, v) not in edges and rng.random() < extra_edge_prob:
                edges[(u, v)] = 1 + rng.bounded(max_weight)
    return WeightedGraph(n_vertices, tuple((u, v, w) for (u, v), w in sorted(edges.items())))
