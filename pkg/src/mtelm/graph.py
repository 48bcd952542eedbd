"""Agent topologies and signed edge-incidence consensus constraints.

An undirected connected graph over agents 0..m-1 induces one consensus
constraint per edge: for edge e = (s, j) with s < j the constraint block
is U_s - U_j (up to a per-edge orientation sign).  Constraint matrices
are kept structural -- (edge, sign) incidence lists -- and never
densified inside solver paths.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, UsageError

TOPOLOGY_KINDS = ("ring", "star", "path", "custom")


def _normalize_edges(m, edges):
    seen = set()
    out = []
    for edge in edges:
        s, j = int(edge[0]), int(edge[1])
        if s == j:
            raise UsageError(f"self-loop on agent {s} is not allowed")
        if s > j:
            s, j = j, s
        if not (0 <= s < j < m):
            raise UsageError(f"edge ({s}, {j}) outside agent range 0..{m - 1}")
        if (s, j) in seen:
            raise UsageError(f"duplicate edge ({s}, {j})")
        seen.add((s, j))
        out.append((s, j))
    return tuple(sorted(out))


@dataclass(frozen=True)
class Topology:
    """Undirected connected graph over agents ``0..m-1``.

    Edges are stored as (s, j) pairs with s < j, sorted.  Construction
    fails on self-loops, duplicates, out-of-range endpoints, or a
    disconnected graph.
    """

    m: int
    edges: tuple

    def __post_init__(self):
        if self.m < 1:
            raise UsageError("topology needs at least one agent")
        object.__setattr__(self, "edges", _normalize_edges(self.m, self.edges))
        unreachable = self._unreachable_agent()
        if unreachable is not None:
            raise UsageError(
                f"topology is disconnected: agent {unreachable} is unreachable from agent 0"
            )

    def _unreachable_agent(self):
        if self.m == 1:
            return None
        adjacency = self.neighbors
        visited = {0}
        queue = deque([0])
        while queue:
            node = queue.popleft()
            for other in adjacency[node]:
                if other not in visited:
                    visited.add(other)
                    queue.append(other)
        for t in range(self.m):
            if t not in visited:
                return t
        return None

    @property
    def neighbors(self):
        adjacency = [[] for _ in range(self.m)]
        for s, j in self.edges:
            adjacency[s].append(j)
            adjacency[j].append(s)
        return tuple(tuple(sorted(a)) for a in adjacency)

    @property
    def degrees(self):
        deg = [0] * self.m
        for s, j in self.edges:
            deg[s] += 1
            deg[j] += 1
        return tuple(deg)

    @property
    def num_edges(self):
        return len(self.edges)


def build_topology(kind, m, edges=None):
    """Construct a named topology (``ring``/``star``/``path``) or a custom one."""
    if kind not in TOPOLOGY_KINDS:
        raise UsageError(f"unknown topology kind {kind!r}")
    if m < 1:
        raise UsageError("topology needs at least one agent")
    if kind == "custom":
        if edges is None:
            raise UsageError("custom topology requires an edge list")
        return Topology(m=m, edges=tuple(edges))
    if edges is not None:
        raise UsageError(f"{kind} topology does not accept an explicit edge list")
    if kind == "ring":
        if m <= 2:
            built = [(0, 1)] if m == 2 else []
        else:
            built = [(i, i + 1) for i in range(m - 1)] + [(0, m - 1)]
    elif kind == "star":
        built = [(0, i) for i in range(1, m)]
    else:  # path
        built = [(i, i + 1) for i in range(m - 1)]
    return Topology(m=m, edges=tuple(built))


def load_edge_list(path, m=None):
    """Read a 1-indexed ``s j`` edge list (one pair per line) into a Topology.

    Blank lines and ``#`` comments are ignored.  ``m`` defaults to the
    largest agent index seen.
    """
    edges = []
    largest = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(f"{path}: line {lineno}: expected 's j', got {raw!r}")
            try:
                s, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(
                    f"{path}: line {lineno}: agent indices must be integers, got {raw!r}"
                ) from None
            if s < 1 or j < 1:
                raise ParseError(f"{path}: line {lineno}: agent indices are 1-based")
            largest = max(largest, s, j)
            edges.append((s - 1, j - 1))
    if not edges:
        raise ParseError(f"{path}: no edges found")
    return Topology(m=m if m is not None else largest, edges=tuple(edges))


@dataclass(frozen=True)
class ConstraintSet:
    """Signed incidence view of the consensus constraints.

    Edge e = (s, j) contributes the stacked block
    ``orientations[e] * (U_s - U_j)``.  The adjoint applied at agent t
    sums incident stacked blocks with the agent's sign.  The default
    orientation is +1 on every edge (agent-index order); solver iterates
    are invariant to orientation flips.
    """

    topology: Topology
    orientations: tuple = None

    def __post_init__(self):
        e = self.topology.num_edges
        if self.orientations is None:
            object.__setattr__(self, "orientations", (1,) * e)
        else:
            ori = tuple(int(o) for o in self.orientations)
            if len(ori) != e or any(o not in (-1, 1) for o in ori):
                raise UsageError("orientations must be a +1/-1 value per edge")
            object.__setattr__(self, "orientations", ori)

    @property
    def num_edges(self):
        return self.topology.num_edges

    def incident(self, t):
        """Tuple of (edge_index, sign) for edges touching agent t."""
        out = []
        for e, (s, j) in enumerate(self.topology.edges):
            if t == s:
                out.append((e, self.orientations[e]))
            elif t == j:
                out.append((e, -self.orientations[e]))
        return tuple(out)

    def degree(self, t):
        """d_t; also the largest (and only) eigenvalue of C_t^T C_t / I."""
        return self.topology.degrees[t]

    def edge_difference(self, u_list, e):
        """Stacked block of edge e: orientation * (U_s - U_j)."""
        s, j = self.topology.edges[e]
        return self.orientations[e] * (u_list[s] - u_list[j])

    def consensus_stack(self, u_list):
        """All edge blocks as an (|E|, L, r) array; empty for |E| = 0."""
        if self.num_edges == 0:
            block = np.asarray(u_list[0], dtype=float)
            return np.zeros((0,) + block.shape)
        return np.stack([self.edge_difference(u_list, e) for e in range(self.num_edges)])

    def apply_adjoint(self, t, stacked):
        """C_t^T applied to stacked edge blocks: sum of signed incident blocks."""
        stacked = np.asarray(stacked, dtype=float)
        out = None
        for e, sign in self.incident(t):
            contribution = sign * stacked[e]
            out = contribution if out is None else out + contribution
        if out is None:
            return np.zeros(stacked.shape[1:]) if stacked.ndim == 3 else 0.0
        return out

    def is_consensus(self, u_list, tol=0.0):
        """True when every edge block vanishes (all agents agree)."""
        stacked = self.consensus_stack(u_list)
        if stacked.size == 0:
            return True
        return float(np.abs(stacked).max()) <= tol


def build_constraints(topology, orientations=None):
    return ConstraintSet(topology=topology, orientations=orientations)
