"""Pose-frequency graph: nodes are (frequency bin, joint) pairs.

Node `b * 18 + i` is joint `i` in bin `b`. Each bin holds a copy of the
COCO-18 skeleton; the same joint is chained across adjacent bins.
"""
import logging
from collections import deque
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from pipeline.configurations import NUM_JOINTS, PARTITION_STRATEGY, ROOT_JOINT
from pipeline.errors import ContractError, ParameterError

logger = logging.getLogger(__name__)

STRATEGIES = {"uniform": 1, "distance": 2, "spatial": 3}

SELF, CLOSER, FARTHER = 0, 1, 2


def skeleton_edges_coco18() -> List[Tuple[int, int]]:
    return [
        (0, 1),                    # nose - neck
        (1, 2), (1, 5),            # neck - shoulders
        (2, 3), (5, 6),            # shoulders - elbows
        (3, 4), (6, 7),            # elbows - wrists
        (1, 8), (1, 11),           # neck - hips
        (8, 9), (11, 12),          # hips - knees
        (9, 10), (12, 13),         # knees - ankles
        (0, 14), (0, 15),          # nose - eyes
        (14, 16), (15, 17),        # eyes - ears
    ]


@dataclass(frozen=True)
class PoseFrequencyGraph:
    num_bins: int
    edges: Tuple[Tuple[int, int], ...]  # (u, v) with u < v, sorted
    num_joints: int = NUM_JOINTS

    @property
    def num_nodes(self) -> int:
        return self.num_bins * self.num_joints

    def node_index(self, b: int, i: int) -> int:
        return b * self.num_joints + i

    def node_of(self, index: int) -> Tuple[int, int]:
        return divmod(index, self.num_joints)

    def neighbours(self) -> List[List[int]]:
        adj: List[List[int]] = [[] for _ in range(self.num_nodes)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return adj


def build_graph(num_bins: int, inter_frequency: bool = True) -> PoseFrequencyGraph:
    """Skeleton edges in every bin plus (optionally) joint chains across adjacent bins."""
    if num_bins < 1:
        raise ParameterError(f"graph needs at least 1 bin, got {num_bins}")
    edges = []
    for b in range(num_bins):
        base = b * NUM_JOINTS
        edges.extend((base + i, base + j) for i, j in skeleton_edges_coco18())
        if inter_frequency and b + 1 < num_bins:
            edges.extend((base + i, base + NUM_JOINTS + i) for i in range(NUM_JOINTS))
    edges = tuple(sorted((min(u, v), max(u, v)) for u, v in edges))
    graph = PoseFrequencyGraph(num_bins=num_bins, edges=edges)
    logger.debug(f"  [GRAPH] {num_bins} bins: {graph.num_nodes} nodes, {len(edges)} edges")
    return graph


def hop_distance(graph: PoseFrequencyGraph, roots: Sequence[int]) -> np.ndarray:
    """BFS hop distance from the first root; later roots only seed components it cannot reach."""
    dist = np.full(graph.num_nodes, -1, dtype=np.int64)
    adj = graph.neighbours()
    for root in roots:
        if dist[root] >= 0:
            continue
        dist[root] = 0
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    queue.append(v)
    return dist


@dataclass(frozen=True)
class PartitionLabels:
    """Partition id of every non-zero entry (row, col) of A + I, self-loops included."""
    strategy: str
    num_partitions: int
    rows: np.ndarray
    cols: np.ndarray
    parts: np.ndarray

    def label_of(self, row: int, col: int) -> int:
        hit = np.nonzero((self.rows == row) & (self.cols == col))[0]
        if hit.size == 0:
            raise ParameterError(f"({row}, {col}) is not an entry of the graph")
        return int(self.parts[hit[0]])


def partition(graph: PoseFrequencyGraph, strategy: str = PARTITION_STRATEGY) -> PartitionLabels:
    """Split each node's neighbourhood into labelled subsets.

    uniform: one group. distance: self | neighbours.
    spatial: self | neighbour closer to the root | neighbour farther from it,
    with the root at the neck in bin 0 and hop distance on the whole graph.
    """
    if strategy not in STRATEGIES:
        raise ParameterError(f"unknown partition strategy {strategy!r}; expected one of {sorted(STRATEGIES)}")

    n = graph.num_nodes
    u = np.array([e[0] for e in graph.edges], dtype=np.int64)
    v = np.array([e[1] for e in graph.edges], dtype=np.int64)
    diag = np.arange(n, dtype=np.int64)
    rows = np.concatenate([diag, u, v])
    cols = np.concatenate([diag, v, u])
    is_self = rows == cols

    if strategy == "uniform":
        parts = np.zeros_like(rows)
    elif strategy == "distance":
        parts = np.where(is_self, 0, 1)
    else:
        # without inter-frequency edges each bin is rooted at its own neck
        roots = [graph.node_index(b, ROOT_JOINT) for b in range(graph.num_bins)]
        dist = hop_distance(graph, roots)
        parts = np.full_like(rows, SELF)
        parts[dist[cols] < dist[rows]] = CLOSER
        parts[dist[cols] > dist[rows]] = FARTHER

    order = np.lexsort((cols, rows))
    return PartitionLabels(
        strategy=strategy,
        num_partitions=STRATEGIES[strategy],
        rows=rows[order],
        cols=cols[order],
        parts=parts[order],
    )


@dataclass(frozen=True)
class NormalizedAdjacency:
    """D^-1/2 A_p D^-1/2 per partition, D from the full A + I."""
    partitions: Tuple[sp.csr_matrix, ...]
    strategy: str

    @property
    def num_partitions(self) -> int:
        return len(self.partitions)

    @property
    def num_nodes(self) -> int:
        return self.partitions[0].shape[0]

    def total(self) -> sp.csr_matrix:
        out = self.partitions[0].copy()
        for mat in self.partitions[1:]:
            out = out + mat
        return out.tocsr()

    def stacked(self) -> sp.csr_matrix:
        """[A_0 | A_1 | ...], so a single product sums all partitions."""
        mat = sp.hstack(self.partitions, format="csr")
        mat.sort_indices()
        return mat


def normalize_adjacency(graph: PoseFrequencyGraph, labels: PartitionLabels) -> NormalizedAdjacency:
    n = graph.num_nodes
    degree = np.bincount(labels.rows, minlength=n).astype(np.float64)
    if np.any(degree == 0):
        raise ContractError("isolated node in A + I")
    inv_sqrt = degree ** -0.5
    values = inv_sqrt[labels.rows] * inv_sqrt[labels.cols]

    mats = []
    for p in range(labels.num_partitions):
        keep = labels.parts == p
        mat = sp.csr_matrix((values[keep], (labels.rows[keep], labels.cols[keep])), shape=(n, n))
        mat.sort_indices()
        mats.append(mat)
    return NormalizedAdjacency(partitions=tuple(mats), strategy=labels.strategy)


def adjacency_for(num_bins: int, strategy: str = PARTITION_STRATEGY, inter_frequency: bool = True) -> NormalizedAdjacency:
    graph = build_graph(num_bins, inter_frequency=inter_frequency)
    return normalize_adjacency(graph, partition(graph, strategy))


def export_edges(graph: PoseFrequencyGraph, labels: PartitionLabels) -> str:
    """One line per directed neighbour entry: `b,i - b,j [partition]`."""
    lines = []
    for row, col, part in zip(labels.rows, labels.cols, labels.parts):
        if row == col:
            continue
        b1, i1 = graph.node_of(int(row))
        b2, i2 = graph.node_of(int(col))
        lines.append(f"{b1},{i1} - {b2},{i2} [{int(part)}]")
    return "\n".join(lines) + "\n"
