"""Undirected communication graphs and their consensus operators.

Nodes are labeled 1..N. Each edge (i, j) contributes one row to the oriented
incidence operator: +1 on node i's block, -1 on node j's. Per-node variables
live in R^M, so stacked operators act on R^{N*M} and are Kronecker lifts of
their scalar (per-node) counterparts.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Topology",
    "NetworkMatrices",
    "check_connected",
    "build_matrices",
    "generate_graph",
]


@dataclass(frozen=True)
class Topology:
    """Graph plus the per-node block dimension."""

    num_nodes: int
    edges: tuple[tuple[int, int], ...]
    block_dim: int = 1

    def __post_init__(self):
        if self.num_nodes < 2:
            raise ValueError("topology needs at least 2 nodes")
        if self.block_dim < 1:
            raise ValueError("block_dim must be >= 1")
        norm_edges = tuple((int(i), int(j)) for i, j in self.edges)
        seen = set()
        for i, j in norm_edges:
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (1 <= i <= self.num_nodes and 1 <= j <= self.num_nodes):
                raise ValueError(f"edge ({i},{j}) has node index out of range 1..{self.num_nodes}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"duplicate edge ({i},{j})")
            seen.add(key)
        object.__setattr__(self, "edges", norm_edges)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, node: int) -> list[int]:
        out = []
        for i, j in self.edges:
            if i == node:
                out.append(j)
            elif j == node:
                out.append(i)
        return sorted(out)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_nodes)
        for i, j in self.edges:
            deg[i - 1] += 1
            deg[j - 1] += 1
        return deg

    def to_dict(self) -> dict:
        return {
            "num_nodes": self.num_nodes,
            "edges": [list(e) for e in self.edges],
            "block_dim": self.block_dim,
        }

    @staticmethod
    def from_dict(d: dict) -> "Topology":
        return Topology(
            num_nodes=int(d["num_nodes"]),
            edges=tuple((int(i), int(j)) for i, j in d["edges"]),
            block_dim=int(d.get("block_dim", 1)),
        )


def check_connected(topo: Topology) -> bool:
    """Breadth-first reachability from node 1."""
    adj: dict[int, list[int]] = {v: [] for v in range(1, topo.num_nodes + 1)}
    for i, j in topo.edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {1}
    frontier = [1]
    while frontier:
        nxt = []
        for v in frontier:
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        frontier = nxt
    return len(seen) == topo.num_nodes


@dataclass
class NetworkMatrices:
    """Dense consensus operators for one topology.

    incidence is the stacked edge-difference operator (E*M x N*M); lminus is
    its Gram matrix (the signed-Laplacian lift), lplus = 2*degree - lminus the
    signless counterpart. sigma_min is the smallest nonzero eigenvalue of
    lminus, lplus_norm the spectral norm of lplus; both are computed on the
    scalar (per-node) operators, whose spectra the Kronecker lift repeats.
    """

    topology: Topology
    incidence: np.ndarray
    degree: np.ndarray
    lminus: np.ndarray
    lplus: np.ndarray
    sigma_min: float
    lplus_norm: float
    degrees_vector: np.ndarray = field(repr=False, default=None)
    scalar_incidence: np.ndarray = field(repr=False, default=None)

    @property
    def total_dim(self) -> int:
        return self.topology.num_nodes * self.topology.block_dim

    @property
    def edge_dim(self) -> int:
        return self.topology.num_edges * self.topology.block_dim


def build_matrices(topo: Topology) -> NetworkMatrices:
    """Assemble the dense operators; rejects disconnected topologies."""
    if topo.num_edges == 0:
        raise ValueError("topology has no edges")
    if not check_connected(topo):
        raise ValueError("graph is not connected")
    n, m, e = topo.num_nodes, topo.block_dim, topo.num_edges

    atilde = np.zeros((e, n))
    for k, (i, j) in enumerate(topo.edges):
        atilde[k, i - 1] = 1.0
        atilde[k, j - 1] = -1.0

    deg = topo.degrees()
    eye_m = np.eye(m)
    incidence = np.kron(atilde, eye_m)
    degree = np.kron(np.diag(deg), eye_m)
    lminus = incidence.T @ incidence
    lplus = 2.0 * degree - lminus

    scalar_lminus = atilde.T @ atilde
    evals = np.linalg.eigvalsh(scalar_lminus)
    tol = 1e-9 * max(float(evals[-1]), 1.0)
    nonzero = evals[evals > tol]
    if nonzero.size != n - 1:
        raise ValueError("unexpected Laplacian nullspace; graph connectivity is broken")
    sigma_min = float(nonzero[0])
    lplus_norm = float(np.linalg.eigvalsh(2.0 * np.diag(deg) - scalar_lminus)[-1])

    return NetworkMatrices(
        topology=topo,
        incidence=incidence,
        degree=degree,
        lminus=lminus,
        lplus=lplus,
        sigma_min=sigma_min,
        lplus_norm=lplus_norm,
        degrees_vector=np.repeat(deg, m),
        scalar_incidence=atilde,
    )


def generate_graph(
    kind: str,
    num_nodes: int,
    extra_edge_prob: float = 0.0,
    seed: int = 0,
    block_dim: int = 1,
) -> Topology:
    """Named families: ring, path, star, complete, random_connected.

    random_connected draws a random spanning tree, then adds each remaining
    pair independently with extra_edge_prob (0 -> tree, 1 -> complete).
    """
    n = num_nodes
    if kind == "ring":
        if n < 3:
            raise ValueError("ring needs at least 3 nodes")
        edges = [(i, i + 1) for i in range(1, n)] + [(n, 1)]
    elif kind == "path":
        edges = [(i, i + 1) for i in range(1, n)]
    elif kind == "star":
        edges = [(1, i) for i in range(2, n + 1)]
    elif kind == "complete":
        edges = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
    elif kind == "random_connected":
        if not 0.0 <= extra_edge_prob <= 1.0:
            raise ValueError("extra_edge_prob must be in [0, 1]")
        rng = np.random.default_rng(np.random.SeedSequence((seed, n)))
        order = rng.permutation(n) + 1
        tree = set()
        for idx in range(1, n):
            anchor = order[rng.integers(idx)]
            a, b = int(order[idx]), int(anchor)
            tree.add((min(a, b), max(a, b)))
        edges = sorted(tree)
        for i in range(1, n + 1):
            for j in range(i + 1, n + 1):
                if (i, j) not in tree and rng.uniform() < extra_edge_prob:
                    edges.append((i, j))
        edges = sorted(edges)
    else:
        raise ValueError(f"unknown graph kind {kind!r}")
    return Topology(num_nodes=n, edges=tuple(edges), block_dim=block_dim)
