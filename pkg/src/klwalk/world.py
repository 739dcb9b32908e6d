"""Graph worlds and the target-tracking cost stream.

The experiment terrain is a connected undirected graph. The passive
dynamics mix a lazy nearest-neighbour walk with a small teleport-to-home
column, which keeps the kernel irreducible, aperiodic and strictly
Dobrushin-contractive. The tracked target walks the same graph with its
own (randomly sampled) kernel; its whole trajectory is simulated before
the agent ever moves, so the resulting cost sequence cannot depend on the
agent's behaviour.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import _accel
from .chains import CostFunction, StochasticMatrix
from .errors import GraphError

_KERNEL_STREAM = 0x6B65726E  # distinct child-stream tags for one env seed
_PATH_STREAM = 0x70617468


@dataclass(frozen=True)
class Graph:
    """A connected undirected graph without self-loops or repeated edges."""

    n: int
    edges: tuple[tuple[int, int], ...]
    adjacency: tuple[tuple[int, ...], ...]

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        if n < 1:
            raise GraphError(f"graph needs at least one vertex, got n={n}")
        seen = set()
        normalized = []
        neighbours = [set() for _ in range(n)]
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge ({u}, {v}) out of range for n={n}")
            if u == v:
                raise GraphError(f"self-loop at vertex {u} (laziness belongs to the walk)")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise GraphError(f"duplicate edge ({u}, {v})")
            seen.add(key)
            normalized.append(key)
            neighbours[u].add(v)
            neighbours[v].add(u)
        graph = cls(
            n=n,
            edges=tuple(normalized),
            adjacency=tuple(tuple(sorted(nb)) for nb in neighbours),
        )
        if n > 1 and not graph._connected():
            raise GraphError("graph is disconnected")
        return graph

    def _connected(self) -> bool:
        seen = {0}
        frontier = deque([0])
        while frontier:
            u = frontier.popleft()
            for v in self.adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    frontier.append(v)
        return len(seen) == self.n

    def degree(self, x: int) -> int:
        return len(self.adjacency[x])


def load_graph(edge_list: str) -> Graph:
    """Parse a whitespace-separated edge list ('#' starts a comment).

    Vertices are 0-based; the vertex count is one past the largest index
    mentioned. A single isolated vertex cannot be expressed in this
    format, so an empty edge list is rejected.
    """
    edges = []
    for lineno, raw in enumerate(edge_list.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphError(f"line {lineno}: expected two vertex indices, got {raw.strip()!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphError(f"line {lineno}: vertex indices must be integers, got {raw.strip()!r}")
        if u < 0 or v < 0:
            raise GraphError(f"line {lineno}: vertex indices must be nonnegative")
        edges.append((u, v))
    if not edges:
        raise GraphError("edge list is empty")
    n = max(max(u, v) for u, v in edges) + 1
    return Graph.from_edges(n, edges)


def grid_graph(rows: int, cols: int) -> Graph:
    """4-connected lattice with vertex ids r * cols + c."""
    if rows < 1 or cols < 1:
        raise GraphError(f"grid needs positive dimensions, got {rows}x{cols}")
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return Graph.from_edges(rows * cols, edges)


def bfs_distances(graph: Graph) -> tuple[np.ndarray, int]:
    """All-pairs hop counts via one breadth-first pass per source."""
    n = graph.n
    dist = np.full((n, n), -1, dtype=np.int64)
    for src in range(n):
        dist[src, src] = 0
        frontier = deque([src])
        while frontier:
            u = frontier.popleft()
            for v in graph.adjacency[u]:
                if dist[src, v] < 0:
                    dist[src, v] = dist[src, u] + 1
                    frontier.append(v)
    diameter = int(dist.max())
    dist.setflags(write=False)
    return dist, diameter


def build_passive(graph: Graph, stay_prob: float, delta: float, home: int) -> StochasticMatrix:
    """Mix the lazy neighbour walk with a teleport-to-home column.

    The walk stays put with probability ``stay_prob`` and otherwise moves
    to a uniformly chosen neighbour; with probability ``delta`` a step is
    replaced by a jump to ``home``. Any delta > 0 forces every pair of
    rows to overlap at the home column, so the Dobrushin coefficient is at
    most 1 - delta. delta = 0 is accepted for building the bare walk, but
    forfeits that guarantee.
    """
    if not 0.0 < stay_prob < 1.0:
        raise ValueError(f"stay_prob must lie in (0, 1), got {stay_prob}")
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    if not 0 <= home < graph.n:
        raise ValueError(f"home vertex {home} out of range for n={graph.n}")
    n = graph.n
    walk = np.zeros((n, n))
    if n == 1:
        walk[0, 0] = 1.0
    else:
        for x in range(n):
            nb = graph.adjacency[x]
            walk[x, x] = stay_prob
            walk[x, list(nb)] = (1.0 - stay_prob) / len(nb)
    rows = (1.0 - delta) * walk
    rows[:, home] += delta
    return StochasticMatrix(rows)


@dataclass(frozen=True)
class TrackingEnv:
    """A target walking the graph, plus the distance table that prices it.

    ``target_kernel`` rows are supported on closed neighbourhoods (vertex
    plus its neighbours); ``target_state`` is the sampled starting vertex.
    """

    graph: Graph
    target_kernel: StochasticMatrix
    target_state: int
    distances: np.ndarray
    diameter: int
    seed: int
    dirichlet_alpha: float

    def stream(self, horizon: int) -> "ReplayCostStream":
        """Pre-simulate the target for ``horizon`` steps and freeze the
        resulting cost sequence (identical for identical env seeds)."""
        if horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {horizon}")
        rng = np.random.default_rng([self.seed, _PATH_STREAM])
        cdf = np.cumsum(self.target_kernel.rows, axis=1)
        positions = _accel.markov_path(cdf, self.target_state, rng.random(horizon - 1))
        return ReplayCostStream([tracking_cost(self, int(s)) for s in positions])


def make_tracking_env(graph: Graph, seed: int, dirichlet_alpha: float = 1.0) -> TrackingEnv:
    """Sample a target kernel (Dirichlet rows over closed neighbourhoods)
    and a uniform starting vertex, both driven by ``seed``."""
    if dirichlet_alpha <= 0:
        raise ValueError(f"dirichlet_alpha must be positive, got {dirichlet_alpha}")
    rng = np.random.default_rng([seed, _KERNEL_STREAM])
    n = graph.n
    rows = np.zeros((n, n))
    for x in range(n):
        closed = (x,) + graph.adjacency[x]
        rows[x, list(closed)] = rng.dirichlet(np.full(len(closed), dirichlet_alpha))
    target0 = int(rng.integers(n))
    distances, diameter = bfs_distances(graph)
    return TrackingEnv(
        graph=graph,
        target_kernel=StochasticMatrix(rows),
        target_state=target0,
        distances=distances,
        diameter=diameter,
        seed=seed,
        dirichlet_alpha=dirichlet_alpha,
    )


def tracking_cost(env: TrackingEnv, target_position: int) -> CostFunction:
    """Graph distance to the target, normalized by the diameter; zero at
    the target itself, one at the far end of the graph."""
    if not 0 <= target_position < env.graph.n:
        raise IndexError(f"vertex {target_position} out of range for n={env.graph.n}")
    if env.diameter == 0:
        return CostFunction(np.zeros(env.graph.n))
    return CostFunction(env.distances[:, target_position] / env.diameter)


class ReplayCostStream:
    """Serve a pre-generated list of cost functions in order.

    This is the only cost-stream implementation the library ships: the
    sequence is fixed at construction, which makes obliviousness to the
    agent structural rather than promised.
    """

    def __init__(self, costs):
        self._costs = tuple(costs)
        self._cursor = 0

    def __len__(self) -> int:
        return len(self._costs)

    @property
    def costs(self) -> tuple[CostFunction, ...]:
        """The full pre-generated sequence (reading it does not consume it)."""
        return self._costs

    @property
    def remaining(self) -> int:
        return len(self._costs) - self._cursor

    def next(self) -> CostFunction:
        if self._cursor >= len(self._costs):
            raise RuntimeError("cost stream exhausted")
        out = self._costs[self._cursor]
        self._cursor += 1
        return out
