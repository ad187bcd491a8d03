"""
Undirected host networks.

A :class:`Network` is immutable once built: the canonical edge tuple, the
0-1 adjacency matrix and the degree vector are fixed at construction, so a
single instance can be shared by concurrently running trials.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Tuple, Union

import networkx as nx
import numpy as np

from .errors import ConfigError, IndexOutOfRange, InvalidProbability, SelfLoop
from .linalg import eig_sym

Edge = Tuple[int, int]


@dataclass(frozen=True)
class Network:
    """
    Undirected simple graph over hosts ``0..n-1``.

    Attributes:
        n: Number of hosts
        edges: Canonical ``(min, max)`` pairs, sorted
        adjacency: Symmetric 0-1 matrix with zero diagonal
        degrees: Row sums of ``adjacency``
    """

    n: int
    edges: Tuple[Edge, ...]
    adjacency: np.ndarray = field(repr=False, compare=False)
    degrees: np.ndarray = field(repr=False, compare=False)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def d_min(self) -> int:
        return int(self.degrees.min()) if self.n else 0

    @property
    def d_avg(self) -> float:
        return float(self.degrees.mean()) if self.n else 0.0

    def neighbors(self, i: int) -> np.ndarray:
        """Indices of the hosts adjacent to host ``i``."""
        return np.flatnonzero(self.adjacency[i])

    def to_networkx(self) -> nx.Graph:
        """
        Copy into a ``networkx`` graph.

        Returns:
            nx.Graph: Nodes ``0 .. n-1``, isolated hosts included, and one
            edge per network edge
        """
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n))
        graph.add_edges_from(self.edges)
        return graph


def from_edge_list(n: int, pairs: Iterable[Edge]) -> Network:
    """
    Build a network from host pairs, dropping duplicates.

    Args:
        n: Number of hosts (positive)
        pairs: Host pairs; ``(i, j)`` and ``(j, i)`` denote the same edge

    Returns:
        Network: The deduplicated undirected network

    Raises:
        IndexOutOfRange: If an index is outside ``[0, n)``
        SelfLoop: If a pair joins a host to itself

    Examples:
        >>> from_edge_list(3, [(0, 1), (1, 2)]).degrees
        array([1, 2, 1])
    """
    if n < 1:
        raise IndexOutOfRange(f"host count must be positive, got {n}")
    canonical = set()
    for i, j in pairs:
        i, j = int(i), int(j)
        if not (0 <= i < n and 0 <= j < n):
            raise IndexOutOfRange(f"edge ({i}, {j}) outside [0, {n})")
        if i == j:
            raise SelfLoop(f"self-loop on host {i}")
        canonical.add((min(i, j), max(i, j)))

    edges = tuple(sorted(canonical))
    adjacency = np.zeros((n, n), dtype=np.int64)
    for i, j in edges:
        adjacency[i, j] = adjacency[j, i] = 1
    adjacency.setflags(write=False)
    degrees = adjacency.sum(axis=1)
    degrees.setflags(write=False)
    return Network(n=n, edges=edges, adjacency=adjacency, degrees=degrees)


def erdos_renyi(n: int, p: float, seed: int) -> Network:
    """
    Sample a G(n, p) graph; identical ``(n, p, seed)`` give identical edges.

    Raises:
        InvalidProbability: If ``p`` is outside ``[0, 1]``
    """
    if not 0.0 <= p <= 1.0:
        raise InvalidProbability(f"edge probability must lie in [0, 1], got {p}")
    if n < 1:
        raise IndexOutOfRange(f"host count must be positive, got {n}")
    graph = nx.gnp_random_graph(n, p, seed=seed)
    return from_edge_list(n, graph.edges())


def complete(n: int) -> Network:
    """
    Complete graph on ``n`` hosts.

    Args:
        n: Number of hosts (positive)

    Returns:
        Network: Every pair of hosts joined, ``n (n - 1) / 2`` edges
    """
    return from_edge_list(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def cycle(n: int) -> Network:
    """
    Ring ``0 - 1 - ... - (n-1) - 0``.

    Raises:
        IndexOutOfRange: If ``n < 3``
    """
    if n < 3:
        raise IndexOutOfRange(f"a cycle needs at least 3 hosts, got {n}")
    return from_edge_list(n, [(i, (i + 1) % n) for i in range(n)])


def path(n: int) -> Network:
    """Hosts ``0 .. n-1`` in a line, ``n - 1`` edges."""
    return from_edge_list(n, [(i, i + 1) for i in range(n - 1)])


def spectral_radius(net: Network) -> float:
    """Largest adjacency eigenvalue (equal to the spectral radius, by Perron)."""
    return float(eig_sym(net.adjacency.astype(float))[-1])


def write_edge_list(net: Network, path: Union[str, Path]) -> None:
    """Write the ``"n m"`` header followed by one ``"i j"`` line per edge."""
    lines: List[str] = [f"{net.n} {net.num_edges}"]
    lines.extend(f"{i} {j}" for i, j in net.edges)
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_list(path: Union[str, Path]) -> Network:
    """
    Parse the edge-list text format written by :func:`write_edge_list`.

    Raises:
        ConfigError: On a malformed header, a malformed edge line or an edge
                     count that disagrees with the header
    """
    text = Path(path).read_text()
    rows = [(k + 1, line.split()) for k, line in enumerate(text.splitlines())]
    rows = [(k, parts) for k, parts in rows if parts]
    if not rows:
        raise ConfigError("empty edge-list file", field="header", line=1)

    def ints(k: int, parts: List[str], what: str) -> Tuple[int, int]:
        if len(parts) != 2:
            raise ConfigError(f"expected two integers in {what}", field=what, line=k)
        try:
            return int(parts[0]), int(parts[1])
        except ValueError:
            raise ConfigError(f"non-integer value in {what}", field=what, line=k)

    n, m = ints(*rows[0], "header")
    pairs = [ints(k, parts, "edge") for k, parts in rows[1:]]
    if len(pairs) != m:
        raise ConfigError(
            f"header announces {m} edges but {len(pairs)} were found",
            field="header",
            line=rows[0][0],
        )
    try:
        return from_edge_list(n, pairs)
    except (IndexOutOfRange, SelfLoop) as e:
        raise ConfigError(str(e), field="edge") from e
