"""Patrol environments: strongly connected weighted digraphs and built-in datasets."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

SF_LABELS = tuple("ABCDEFGHIJKL")

# Quantized by-car travel times (minutes) between the twelve San Francisco
# locations, rows are origins and columns destinations.
SF_TRAVEL_TIMES = np.array(
    [
        [1, 3, 3, 5, 4, 6, 3, 5, 7, 4, 6, 6],
        [3, 1, 5, 4, 2, 4, 4, 5, 5, 3, 5, 5],
        [3, 5, 1, 7, 6, 8, 3, 4, 9, 4, 8, 7],
        [6, 4, 7, 1, 5, 6, 4, 7, 5, 6, 6, 7],
        [4, 3, 6, 5, 1, 3, 5, 5, 6, 3, 4, 4],
        [6, 4, 8, 5, 3, 1, 6, 7, 3, 6, 2, 3],
        [2, 5, 3, 5, 6, 7, 1, 5, 7, 5, 7, 8],
        [3, 5, 2, 7, 6, 7, 3, 1, 9, 3, 7, 5],
        [8, 6, 9, 4, 6, 4, 6, 9, 1, 8, 5, 7],
        [4, 3, 4, 6, 3, 5, 5, 3, 7, 1, 5, 3],
        [6, 4, 8, 6, 4, 2, 6, 6, 4, 5, 1, 3],
        [6, 4, 6, 6, 3, 3, 6, 4, 5, 3, 2, 1],
    ],
    dtype=np.int64,
)
SF_CRIME_COUNTS = np.array([133, 90, 89, 87, 83, 83, 74, 64, 48, 43, 38, 34])

PI_TOL = 1e-12


def is_strongly_connected(adjacency) -> bool:
    adjacency = np.asarray(adjacency)
    if adjacency.shape[0] == 0:
        return False
    ncomp, _ = connected_components(csr_matrix(adjacency != 0), directed=True, connection="strong")
    return ncomp == 1


@dataclass(frozen=True, eq=False)
class SurveillanceGraph:
    """Weighted directed patrol graph.

    ``weights[i, j]`` is the positive integer travel time of edge ``(i, j)`` and
    zero where there is no edge, so the edge set is ``weights > 0``.
    """

    weights: np.ndarray
    labels: tuple | None = None

    def __post_init__(self):
        w = np.array(self.weights)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError(f"weight matrix must be square, got shape {w.shape}")
        if not np.all(np.equal(np.mod(w, 1), 0)):
            raise ValueError("travel times must be integers; quantize real-valued times first")
        w = w.astype(np.int64)
        if np.any(w < 0):
            raise ValueError("travel times must be positive on edges")
        if np.any(~(w > 0).any(axis=1)):
            raise ValueError("every node needs at least one outgoing edge")
        if not is_strongly_connected(w > 0):
            raise ValueError("graph is not strongly connected")
        if self.labels is not None and len(self.labels) != w.shape[0]:
            raise ValueError("one label per node required")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        adj = w > 0
        adj.setflags(write=False)
        object.__setattr__(self, "_adjacency", adj)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def adjacency(self) -> np.ndarray:
        return self._adjacency

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in np.argwhere(self._adjacency)]

    @property
    def max_weight(self) -> int:
        return int(self.weights.max())

    def has_self_loops(self) -> bool:
        return bool(np.all(np.diag(self._adjacency)))

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self._adjacency, self._adjacency.T))

    def is_unweighted(self) -> bool:
        return bool(np.all(self.weights[self._adjacency] == 1))

    @classmethod
    def from_edges(cls, n, edges, labels=None):
        """Build from ``(i, j)`` or ``(i, j, w)`` tuples; missing weights default to 1."""
        w = np.zeros((n, n), dtype=np.int64)
        for e in edges:
            i, j = int(e[0]), int(e[1])
            weight = e[2] if len(e) > 2 else 1
            if weight != int(weight) or weight < 1:
                raise ValueError(f"edge ({i}, {j}) needs a positive integer weight, got {weight}")
            w[i, j] = int(weight)
        return cls(w, labels)

    @classmethod
    def from_adjacency(cls, adjacency, labels=None):
        return cls(np.asarray(adjacency, dtype=bool).astype(np.int64), labels)


def as_distribution(pi, n=None) -> np.ndarray:
    """Validate a visit distribution: strictly positive, sums to one."""
    pi = np.asarray(pi, dtype=float).ravel()
    if n is not None and pi.shape[0] != n:
        raise ValueError(f"distribution has {pi.shape[0]} entries, graph has {n} nodes")
    if np.any(pi <= 0):
        raise ValueError("visit distribution must be strictly positive")
    if abs(pi.sum() - 1.0) > PI_TOL:
        raise ValueError(f"visit distribution sums to {pi.sum():.15g}, not 1")
    return pi


def make_grid(rows: int, cols: int, self_loops: bool = True) -> SurveillanceGraph:
    """4-neighbour lattice with unit travel times, nodes numbered row-major."""
    if rows < 1 or cols < 1:
        raise ValueError("grid needs at least one row and one column")
    n = rows * cols
    w = np.zeros((n, n), dtype=np.int64)
    for r in range(rows):
        for c in range(cols):
            u = r * cols + c
            if r + 1 < rows:
                w[u, u + cols] = w[u + cols, u] = 1
            if c + 1 < cols:
                w[u, u + 1] = w[u + 1, u] = 1
    if self_loops:
        np.fill_diagonal(w, 1)
    return SurveillanceGraph(w)


def sf_dataset() -> tuple[SurveillanceGraph, np.ndarray]:
    """Twelve-location San Francisco map and its crime-proportional visit frequencies."""
    g = SurveillanceGraph(SF_TRAVEL_TIMES.copy(), SF_LABELS)
    pi = SF_CRIME_COUNTS / SF_CRIME_COUNTS.sum()
    return g, pi


def grid_uniform_pi(g: SurveillanceGraph) -> np.ndarray:
    return np.full(g.n, 1.0 / g.n)


uniform_pi = grid_uniform_pi


# -- serialization -----------------------------------------------------------


def graph_to_dict(g: SurveillanceGraph, pi=None) -> dict:
    out = {
        "n": g.n,
        "edges": [[i, j, int(g.weights[i, j])] for i, j in g.edges],
    }
    if g.labels is not None:
        out["labels"] = list(g.labels)
    if pi is not None:
        out["pi"] = [float(x) for x in pi]
    return out


def graph_from_dict(data: dict) -> tuple[SurveillanceGraph, np.ndarray | None]:
    g = SurveillanceGraph.from_edges(int(data["n"]), data["edges"], data.get("labels"))
    pi = data.get("pi")
    if pi is not None:
        pi = as_distribution(pi, g.n)
    return g, pi


def save_graph(path, g: SurveillanceGraph, pi=None) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(g, pi), indent=1) + "\n")


def load_graph(path) -> tuple[SurveillanceGraph, np.ndarray | None]:
    return graph_from_dict(json.loads(Path(path).read_text()))


def to_dot(g: SurveillanceGraph, p=None, name="patrol") -> str:
    """Graphviz text; edges carry travel times and, if ``p`` is given, probabilities."""
    names = g.labels or tuple(str(i) for i in range(g.n))
    lines = [f"digraph {name} {{"]
    for i, label in enumerate(names):
        lines.append(f'  {i} [label="{label}"];')
    for i, j in g.edges:
        attrs = [f"weight={g.weights[i, j]}"]
        if p is not None:
            if p[i, j] <= 0:
                continue
            attrs.append(f'label="{p[i, j]:.3f}"')
        else:
            attrs.append(f'label="{g.weights[i, j]}"')
        lines.append(f"  {i} -> {j} [{', '.join(attrs)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
