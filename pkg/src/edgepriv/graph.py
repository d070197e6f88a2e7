"""Communication topology: balanced, strongly connected digraphs.

Agent ids are 1-based at every public surface. ``adjacency[i, j] == 1`` means
agent ``j+1`` sends to agent ``i+1`` (row = receiver, column = sender), so the
Laplacian is ``diag(in-degree) - adjacency``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components


class GraphError(ValueError):
    """Raised for malformed topologies."""


@dataclass(frozen=True, eq=False)
class Digraph:
    n: int
    adjacency: np.ndarray
    edges: tuple[tuple[int, int], ...] = field(repr=False)

    def __post_init__(self):
        self.adjacency.setflags(write=False)

    @property
    def in_degree(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    @property
    def out_degree(self) -> np.ndarray:
        return self.adjacency.sum(axis=0)

    def degree(self, agent: int) -> int:
        """Common in/out degree of ``agent`` (meaningful on balanced graphs)."""
        return int(self.in_degree[agent - 1])

    def out_neighbors(self, agent: int) -> list[int]:
        return [int(r) + 1 for r in np.flatnonzero(self.adjacency[:, agent - 1])]

    def in_neighbors(self, agent: int) -> list[int]:
        return [int(c) + 1 for c in np.flatnonzero(self.adjacency[agent - 1, :])]

    def has_edge(self, src: int, dst: int) -> bool:
        return bool(self.adjacency[dst - 1, src - 1])

    @property
    def edge_index(self) -> tuple[np.ndarray, np.ndarray]:
        """0-based (sender, receiver) index arrays aligned with ``edges``."""
        arr = np.asarray(self.edges, dtype=np.intp).reshape(-1, 2) - 1
        return arr[:, 0], arr[:, 1]

    def __eq__(self, other):
        return isinstance(other, Digraph) and self.n == other.n and self.edges == other.edges

    def __hash__(self):
        return hash((self.n, self.edges))

    def to_dict(self) -> dict:
        return {"n": self.n, "edges": [list(e) for e in self.edges]}


@dataclass
class ValidationReport:
    unbalanced: list[int]
    unreachable: list[tuple[int, int]]
    too_small: bool = False
    self_loops: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.unbalanced or self.unreachable or self.too_small or self.self_loops)

    @property
    def violations(self) -> list[str]:
        out = []
        if self.too_small:
            out.append("agent count below 3")
        if self.self_loops:
            out.append(f"self-loops at {self.self_loops}")
        if self.unbalanced:
            out.append(f"unbalanced at nodes {self.unbalanced}")
        if self.unreachable:
            out.append(f"not strongly connected ({len(self.unreachable)} unreachable pairs)")
        return out


def build(n: int, edges) -> Digraph:
    """Build a digraph from 1-based ``(sender, receiver)`` pairs.

    Validation of balance and connectivity is left to :func:`validate`.
    """
    if n < 3:
        raise GraphError(f"need at least 3 agents, got n={n}")
    adjacency = np.zeros((n, n), dtype=np.int64)
    seen = set()
    for e in edges:
        i, j = (int(v) for v in e)
        if not (1 <= i <= n and 1 <= j <= n):
            raise GraphError(f"edge ({i},{j}) has a node outside 1..{n}")
        if i == j:
            raise GraphError(f"self-loop at node {i}")
        if (i, j) in seen:
            raise GraphError(f"duplicate edge ({i},{j})")
        seen.add((i, j))
        adjacency[j - 1, i - 1] = 1
    return Digraph(n, adjacency, tuple(sorted(seen)))


def _from_adjacency(adjacency: np.ndarray) -> Digraph:
    senders_receivers = [(int(c) + 1, int(r) + 1) for r, c in zip(*np.nonzero(adjacency))]
    return Digraph(adjacency.shape[0], adjacency.astype(np.int64), tuple(sorted(senders_receivers)))


def validate(g: Digraph) -> ValidationReport:
    """Check the standing topology assumption and report every failure."""
    diff = g.in_degree - g.out_degree
    unbalanced = [int(i) + 1 for i in np.flatnonzero(diff)]
    loops = [int(i) + 1 for i in np.flatnonzero(np.diag(g.adjacency))]
    # sender -> receiver orientation for the SCC pass
    ncomp, labels = connected_components(csr_matrix(g.adjacency.T), directed=True, connection="strong")
    unreachable = []
    if ncomp > 1:
        reach = _reachability(g)
        unreachable = [(i + 1, j + 1) for i in range(g.n) for j in range(g.n) if i != j and not reach[i, j]]
    return ValidationReport(unbalanced, unreachable, too_small=g.n < 3, self_loops=loops)


def _reachability(g: Digraph) -> np.ndarray:
    # only used to name the failing pairs once the SCC pass has failed
    reach = np.eye(g.n, dtype=bool) | (g.adjacency.T > 0)
    for k in range(g.n):
        reach |= reach[:, [k]] & reach[[k], :]
    return reach


def require_valid(g: Digraph) -> Digraph:
    report = validate(g)
    if not report.ok:
        raise GraphError("; ".join(report.violations))
    return g


def laplacian(g: Digraph) -> np.ndarray:
    L = np.diag(g.adjacency.sum(axis=1)) - g.adjacency
    return L.astype(np.float64)


def epsilon_bound(g: Digraph) -> float:
    """Upper end of the open step-size interval for the normal discrete rule."""
    return 1.0 / float(g.in_degree.max())


def merge_nodes(g: Digraph, group) -> tuple[Digraph, dict[int, int]]:
    """Collapse ``group`` into a single super node.

    Edges are deduplicated and internal edges dropped. Returns the merged graph
    (not validated; merging can break balance) and the old->new id map.
    """
    group = sorted(set(int(v) for v in group))
    if not group or any(not 1 <= v <= g.n for v in group):
        raise GraphError("merge group must be a non-empty subset of the agents")
    keep = [v for v in range(1, g.n + 1) if v not in group]
    mapping = {}
    new_id = 1
    for v in range(1, g.n + 1):
        if v in group:
            continue
        mapping[v] = new_id
        new_id += 1
    for v in group:
        mapping[v] = new_id
    m = len(keep) + 1
    adjacency = np.zeros((m, m), dtype=np.int64)
    for i, j in g.edges:
        a, b = mapping[i], mapping[j]
        if a != b:
            adjacency[b - 1, a - 1] = 1
    return _from_adjacency(adjacency), mapping


def demo_graph() -> Digraph:
    """Five-agent balanced demo topology used by the shipped configs."""
    return build(5, [(1, 2), (2, 3), (3, 4), (4, 5), (5, 1), (3, 5), (4, 3), (5, 4)])


def ring(n: int) -> Digraph:
    return build(n, [(i, i % n + 1) for i in range(1, n + 1)])


def pendant_pair_graph(n: int, attacker: int = 1) -> Digraph:
    """Directed ring on agents 1..n-1 plus agent n talking only to ``attacker``."""
    if n < 4:
        raise GraphError("pendant-pair graph needs n >= 4 (ring of at least 3)")
    if not 1 <= attacker <= n - 1:
        raise GraphError("attacker must lie on the ring")
    edges = [(i, i % (n - 1) + 1) for i in range(1, n)]
    edges += [(attacker, n), (n, attacker)]
    return build(n, edges)


def random_balanced(n: int, rng: np.random.Generator, extra_cycles: int | None = None) -> Digraph:
    """Random balanced, strongly connected digraph.

    A Hamiltonian cycle on a random permutation guarantees strong connectivity;
    further edge-disjoint cycles keep every node balanced.
    """
    if n < 3:
        raise GraphError(f"need at least 3 agents, got n={n}")
    perm = rng.permutation(n) + 1
    edges = {(int(perm[i]), int(perm[(i + 1) % n])) for i in range(n)}
    if extra_cycles is None:
        extra_cycles = int(rng.integers(0, n))
    for _ in range(extra_cycles):
        for _attempt in range(20):
            length = int(rng.integers(2, n + 1))
            nodes = rng.choice(n, size=length, replace=False) + 1
            cyc = {(int(nodes[i]), int(nodes[(i + 1) % length])) for i in range(length)}
            if not cyc & edges:
                edges |= cyc
                break
    return build(n, sorted(edges))


def load(path) -> Digraph:
    """Read a graph from JSON ``{"n":..,"edges":[[i,j],..]}`` or an "i j" edge list."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        return from_dict(json.loads(text))
    return parse_edge_list(text)


def from_dict(data: dict) -> Digraph:
    try:
        return build(int(data["n"]), [tuple(e) for e in data["edges"]])
    except KeyError as exc:
        raise GraphError(f"graph JSON is missing field {exc}") from None


def parse_edge_list(text: str, n: int | None = None) -> Digraph:
    """Parse "i j" lines; ``#`` starts a comment. n defaults to the largest id."""
    edges = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphError(f"line {lineno}: expected 'i j', got {line!r}")
        edges.append((int(parts[0]), int(parts[1])))
    if n is None:
        n = max((max(e) for e in edges), default=0)
    return build(n, edges)
