"""Signed bounded-degree interaction graphs and combinatorial subroutines.

Edges carry a sign in {-1, +1}; the effective coupling between adjacent
vertices u, v is sign(u,v) / max_degree, so every magnetization
m_i = sum_j A_ij sigma_j lies in [-1, 1]. The divisor is the *declared*
maximum degree of the graph, not the per-vertex degree.

File format: header line ``n m delta`` followed by m lines ``u v s`` with
1-based vertex indices and s in {+1, -1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import networkx as nx
import numpy as np

from . import _kernels as _k
from .cnf import CnfFormula, as_spin_vector
from .errors import GraphFileError, InfeasibleInstanceError


class InteractionGraph:
    """Immutable simple undirected graph with signed edges and a declared max degree."""

    __slots__ = (
        "num_vertices",
        "max_degree",
        "edges",
        "_nbr_ptr",
        "_nbr_idx",
        "_nbr_sign",
    )

    def __init__(
        self,
        num_vertices: int,
        edges: Iterable[tuple] = (),
        max_degree: Optional[int] = None,
    ):
        if num_vertices < 0:
            raise ValueError("num_vertices must be nonnegative")
        canon = []
        seen = set()
        deg = np.zeros(num_vertices, dtype=np.int64)
        for u, v, s in edges:
            u, v, s = int(u), int(v), int(s)
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not (0 <= u < num_vertices and 0 <= v < num_vertices):
                raise ValueError(f"edge ({u}, {v}) out of range [0, {num_vertices})")
            if s not in (-1, 1):
                raise ValueError(f"edge sign must be -1 or +1, got {s}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"parallel edge ({u}, {v})")
            seen.add(key)
            canon.append((key[0], key[1], s))
            deg[u] += 1
            deg[v] += 1
        canon.sort()
        observed = int(deg.max()) if num_vertices else 0
        if max_degree is None:
            max_degree = observed
        max_degree = int(max_degree)
        if canon and max_degree < 1:
            raise ValueError("max_degree must be >= 1 when edges exist")
        if observed > max_degree:
            raise ValueError(
                f"vertex degree {observed} exceeds declared max_degree {max_degree}"
            )
        self.num_vertices = int(num_vertices)
        self.max_degree = max_degree
        self.edges = tuple(canon)

        adj: list[list[tuple]] = [[] for _ in range(num_vertices)]
        for u, v, s in canon:
            adj[u].append((v, s))
            adj[v].append((u, s))
        for a in adj:
            a.sort()
        counts = [len(a) for a in adj]
        self._nbr_ptr = np.concatenate(([0], np.cumsum(counts, dtype=np.int64)))
        self._nbr_idx = np.fromiter(
            (v for a in adj for v, _ in a), np.int32, count=int(self._nbr_ptr[-1])
        )
        self._nbr_sign = np.fromiter(
            (s for a in adj for _, s in a), np.int8, count=int(self._nbr_ptr[-1])
        )

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def inv_delta(self) -> float:
        return 1.0 / self.max_degree if self.max_degree > 0 else 0.0

    def degree(self, v: int) -> int:
        return int(self._nbr_ptr[v + 1] - self._nbr_ptr[v])

    def neighbors(self, v: int) -> np.ndarray:
        return self._nbr_idx[self._nbr_ptr[v]:self._nbr_ptr[v + 1]].copy()

    def dense_weights(self) -> np.ndarray:
        """Full coupling matrix A with entries sign/max_degree (zero diagonal)."""
        w = np.zeros((self.num_vertices, self.num_vertices))
        for u, v, s in self.edges:
            w[u, v] = w[v, u] = s * self.inv_delta
        return w

    def __eq__(self, other) -> bool:
        if not isinstance(other, InteractionGraph):
            return NotImplemented
        return (
            self.num_vertices == other.num_vertices
            and self.max_degree == other.max_degree
            and self.edges == other.edges
        )

    def __hash__(self):
        return hash((self.num_vertices, self.max_degree, self.edges))

    def __repr__(self) -> str:
        return (
            f"InteractionGraph(num_vertices={self.num_vertices}, "
            f"num_edges={self.num_edges}, max_degree={self.max_degree})"
        )


def magnetization(graph: InteractionGraph, config, i: int) -> float:
    """m_i = sum over neighbors j of sign(i,j)/max_degree * spins[j]."""
    spins = as_spin_vector(config, graph.num_vertices)
    if not 0 <= i < graph.num_vertices:
        raise IndexError(f"vertex {i} out of range [0, {graph.num_vertices})")
    return float(
        _k.site_magnetization(
            graph._nbr_ptr, graph._nbr_idx, graph._nbr_sign, graph.inv_delta, spins, i
        )
    )


def all_magnetizations(graph: InteractionGraph, config) -> np.ndarray:
    """Vector of magnetizations; equals magnetization(graph, config, i) per index."""
    spins = as_spin_vector(config, graph.num_vertices)
    if graph.num_edges == 0:
        return np.zeros(graph.num_vertices)
    src = np.repeat(np.arange(graph.num_vertices), np.diff(graph._nbr_ptr))
    contrib = graph._nbr_sign.astype(np.float64) * spins[graph._nbr_idx]
    return np.bincount(src, weights=contrib, minlength=graph.num_vertices) * graph.inv_delta


def rank_local_maxima(graph: InteractionGraph, rank) -> set:
    """Vertices whose rank exceeds every neighbor's rank.

    ``rank`` assigns each vertex a distinct comparable value (a permutation).
    The result is always an independent set; isolated vertices are always
    selected (the max over an empty neighborhood loses to everything).
    """
    rank = np.asarray(rank)
    if rank.shape != (graph.num_vertices,):
        raise ValueError("rank must assign one value per vertex")
    if np.unique(rank).size != graph.num_vertices:
        raise ValueError("rank values must be distinct")
    out = set()
    for u in range(graph.num_vertices):
        nbrs = graph._nbr_idx[graph._nbr_ptr[u]:graph._nbr_ptr[u + 1]]
        if nbrs.size == 0 or rank[u] > rank[nbrs].max():
            out.add(u)
    return out


def inclusion_probability_estimate(
    graph: InteractionGraph, vertex: int, num_samples: int, rng: np.random.Generator
) -> float:
    """Monte Carlo frequency of ``vertex`` being a rank local maximum.

    Selection of a vertex depends only on rank comparisons inside its closed
    neighborhood, so each sample draws continuous keys for those deg+1
    vertices; ties have probability zero.
    """
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    deg = graph.degree(vertex)
    keys = rng.random((num_samples, deg + 1))
    # column 0 is the vertex itself
    wins = keys[:, 0] > keys[:, 1:].max(axis=1, initial=-np.inf)
    return float(wins.mean())


def clause_coverage(formula: CnfFormula, independent_set) -> Optional[int]:
    """Minimum over clauses of |clause variables ∩ independent_set|; None if no clauses."""
    if formula.num_clauses == 0:
        return None
    iset = set(independent_set)
    return min(
        sum(1 for lit in clause if lit.variable in iset) for clause in formula.clauses
    )


@dataclass
class CoveringSetResult:
    """Outcome of the rejection search for a clause-covering independent set."""

    found: bool
    independent_set: set
    ordering: np.ndarray  # the rank vector that produced independent_set
    coverage: Optional[int]  # min clause intersection achieved (None: no clauses)
    tries: int


def search_covering_independent_set(
    graph: InteractionGraph,
    formula: CnfFormula,
    target_lambda: float,
    max_tries: int,
    rng: np.random.Generator,
) -> CoveringSetResult:
    """Sample random orderings until the local-maxima set covers every clause.

    Success means min-coverage >= ceil(target_lambda * k_min). Failure after
    max_tries is a normal outcome carrying the best attempt seen.
    """
    if not 0 < target_lambda <= 1:
        raise ValueError("target_lambda must lie in (0, 1]")
    if max_tries < 1:
        raise ValueError("max_tries must be >= 1")
    k_min = min((len(c) for c in formula.clauses), default=0)
    target = math.ceil(target_lambda * k_min)
    best: Optional[CoveringSetResult] = None
    for t in range(1, max_tries + 1):
        rank = rng.permutation(graph.num_vertices)
        iset = rank_local_maxima(graph, rank)
        cov = clause_coverage(formula, iset)
        if cov is None or cov >= target:
            return CoveringSetResult(True, iset, rank, cov, t)
        if best is None or cov > best.coverage:
            best = CoveringSetResult(False, iset, rank, cov, t)
    assert best is not None
    best.tries = max_tries
    return best


def _two_hop_balls(adjacency: list) -> list:
    """adjacency: per-vertex set of neighbors. Returns per-vertex set of
    vertices within distance <= 2 (excluding the vertex itself)."""
    balls = []
    for v, nbrs in enumerate(adjacency):
        ball = set(nbrs)
        for u in nbrs:
            ball |= adjacency[u]
        ball.discard(v)
        balls.append(ball)
    return balls


def greedy_2hop_disjoint(
    graph: InteractionGraph, formula: CnfFormula, candidates
) -> set:
    """Greedy subset of candidates pairwise at distance >= 3 in the interaction
    graph and in the formula's variable co-occurrence graph.

    Scans candidates in ascending index order; each selection removes every
    candidate within two hops of it in either graph.
    """
    n = graph.num_vertices
    adj_g = [set() for _ in range(n)]
    for u, v, _ in graph.edges:
        adj_g[u].add(v)
        adj_g[v].add(u)
    adj_f = [set() for _ in range(n)]
    for clause in formula.clauses:
        vs = [lit.variable for lit in clause]
        for a in vs:
            for b in vs:
                if a != b:
                    adj_f[a].add(b)
    balls_g = _two_hop_balls(adj_g)
    balls_f = _two_hop_balls(adj_f)

    alive = set(int(v) for v in candidates)
    for v in alive:
        if not 0 <= v < n:
            raise IndexError(f"candidate {v} out of range [0, {n})")
    chosen = set()
    for v in sorted(alive):
        if v not in alive:
            continue
        chosen.add(v)
        alive.discard(v)
        alive -= balls_g[v]
        alive -= balls_f[v]
    return chosen


def partner_assignment(graph: InteractionGraph, independent_set) -> dict:
    """Injective map from part of the independent set to outside neighbors.

    Scans the set in ascending order; each vertex claims its smallest
    unclaimed neighbor (all neighbors lie outside the set by independence).
    On a connected graph the matched part has size at least |I|/max_degree.
    """
    iset = sorted(set(int(v) for v in independent_set))
    members = set(iset)
    for v in iset:
        nbrs = graph.neighbors(v)
        if any(int(u) in members for u in nbrs):
            raise ValueError("independent_set is not independent")
    claimed = set()
    out = {}
    for v in iset:
        for u in graph.neighbors(v):
            u = int(u)
            if u not in claimed:
                out[v] = u
                claimed.add(u)
                break
    return out


def generate_regular_signed_graph(
    n: int,
    delta: int,
    sign_bias: float,
    rng: np.random.Generator,
    max_tries: int = 200,
) -> InteractionGraph:
    """Connected delta-regular simple graph with independent random edge signs.

    Signs are +1 with probability sign_bias. Regular graphs are drawn from the
    configuration model (rejecting non-simple pairings internally) and redrawn
    until connected; deterministic given the rng state.
    """
    if not 0 <= sign_bias <= 1:
        raise ValueError("sign_bias must lie in [0, 1]")
    if delta < 0 or n < 1:
        raise InfeasibleInstanceError(f"no {delta}-regular graph on {n} vertices")
    if delta >= n or (n * delta) % 2 != 0:
        raise InfeasibleInstanceError(f"no {delta}-regular graph on {n} vertices")
    if delta == 0:
        if n > 1:
            raise InfeasibleInstanceError(
                "a 0-regular graph on more than one vertex cannot be connected"
            )
        return InteractionGraph(n, (), max_degree=0)
    for _ in range(max_tries):
        g = nx.random_regular_graph(delta, n, seed=rng)
        if nx.is_connected(g):
            edges = sorted((min(u, v), max(u, v)) for u, v in g.edges())
            signs = np.where(rng.random(len(edges)) < sign_bias, 1, -1)
            return InteractionGraph(
                n,
                [(u, v, int(s)) for (u, v), s in zip(edges, signs)],
                max_degree=delta,
            )
    raise InfeasibleInstanceError(
        f"failed to draw a connected {delta}-regular graph in {max_tries} tries"
    )


def save_graph(graph: InteractionGraph, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_graph(graph))


def serialize_graph(graph: InteractionGraph) -> str:
    lines = [f"{graph.num_vertices} {graph.num_edges} {graph.max_degree}"]
    for u, v, s in graph.edges:
        lines.append(f"{u + 1} {v + 1} {s:+d}")
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> InteractionGraph:
    """Parse the ``n m delta`` / ``u v s`` edge-list format (1-based vertices)."""
    lines = [ln for ln in (raw.strip() for raw in text.splitlines()) if ln]
    if not lines:
        raise GraphFileError("empty graph file")
    head = lines[0].split()
    if len(head) != 3:
        raise GraphFileError(f"malformed header {lines[0]!r} (expected 'n m delta')")
    try:
        n, m, delta = (int(x) for x in head)
    except ValueError:
        raise GraphFileError(f"malformed header {lines[0]!r}") from None
    if len(lines) - 1 != m:
        raise GraphFileError(f"header declares {m} edges, found {len(lines) - 1}")
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 3:
            raise GraphFileError(f"malformed edge line {ln!r}")
        try:
            u, v, s = (int(x) for x in parts)
        except ValueError:
            raise GraphFileError(f"malformed edge line {ln!r}") from None
        if not (1 <= u <= n and 1 <= v <= n):
            raise GraphFileError(f"edge ({u}, {v}) out of range 1..{n}")
        edges.append((u - 1, v - 1, s))
    try:
        return InteractionGraph(n, edges, max_degree=delta)
    except ValueError as exc:
        raise GraphFileError(str(exc)) from None


def load_graph(path: str) -> InteractionGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_graph(fh.read())
