"""Community detection: weighted modularity, Louvain, and label reshuffles."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from rtscope.errors import DataIntegrityError, DomainError, InputError
from rtscope.graph import NodeTable, UndirectedGraph

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Partition:
    """Node-to-community labeling with dense labels 0..n_communities-1."""

    labels: np.ndarray
    n_communities: int
    modularity: float | None = None

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", labels)
        if labels.size == 0:
            raise ValueError("empty partition")
        counts = np.bincount(labels, minlength=self.n_communities)
        if labels.min() < 0 or counts.size != self.n_communities or (counts == 0).any():
            raise ValueError("labels must be dense 0..n_communities-1 with every label used")

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_communities)

    def members(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.labels == label)


def modularity(g: UndirectedGraph, labels: Sequence[int] | np.ndarray) -> float:
    """Newman-Girvan weighted modularity of a labeling.

    Q = sum over communities of [S_in/(2m) - (S_tot/(2m))^2] with m the
    total undirected edge weight, S_in twice the community-internal weight
    and S_tot the summed node strengths.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size != g.n_nodes:
        raise ValueError(f"labeling covers {labels.size} nodes, graph has {g.n_nodes}")
    m = g.total_weight
    if m <= 0:
        raise DomainError("modularity is undefined for an edgeless graph")
    n_comm = int(labels.max()) + 1
    lu = labels[g.eu]
    internal = lu == labels[g.ev]
    sum_in = 2.0 * np.bincount(lu[internal], weights=g.ew[internal], minlength=n_comm)
    sum_tot = np.bincount(labels, weights=g.strength, minlength=n_comm)
    two_m = 2.0 * m
    return float(np.sum(sum_in / two_m - (sum_tot / two_m) ** 2))


def _local_move(
    indptr: list[int],
    nbr: list[int],
    wgt: list[float],
    k: list[float],
    comm: list[int],
    sum_tot: list[float],
    order: list[int],
    inv_2m: float,
    q_running: float,
    trace: list[float] | None,
) -> tuple[int, float]:
    """One Louvain local-moving phase. Mutates comm/sum_tot; returns (moves, Q).

    Nodes are swept in the given order; after the first pass only nodes whose
    neighborhood changed are re-evaluated, and convergence is confirmed by a
    final pass over every node, so the result is a full fixed point: no
    single move improves Q.
    """
    inv_m = 2.0 * inv_2m
    n = len(comm)
    dirty = bytearray(b"\x01") * n
    full_pass = True
    total_moves = 0
    while True:
        moves = 0
        for i in order:
            if not dirty[i]:
                continue
            dirty[i] = 0
            start = indptr[i]
            end = indptr[i + 1]
            if start == end:
                continue
            ci = comm[i]
            ki = k[i]
            neighbors = nbr[start:end]
            links: dict[int, float] = {}
            for j, w in zip(neighbors, wgt[start:end]):
                if j != i:
                    cj = comm[j]
                    links[cj] = links.get(cj, 0.0) + w
            sum_tot[ci] -= ki
            gain_stay = links.get(ci, 0.0) - sum_tot[ci] * ki * inv_2m
            best_c = ci
            best_gain = gain_stay
            for c, k_in in links.items():
                if c == ci:
                    continue
                gain = k_in - sum_tot[c] * ki * inv_2m
                # Ties in gain break toward the smallest community label.
                if gain > best_gain or (gain == best_gain and c < best_c):
                    best_c = c
                    best_gain = gain
            if best_c != ci and best_gain > gain_stay:
                comm[i] = best_c
                sum_tot[best_c] += ki
                moves += 1
                q_running += (best_gain - gain_stay) * inv_m
                if trace is not None:
                    trace.append(q_running)
                for j in neighbors:
                    dirty[j] = 1
            else:
                sum_tot[ci] += ki
        total_moves += moves
        if moves == 0:
            if full_pass:
                return total_moves, q_running
            # Quiet on the dirty set alone: verify against every node.
            dirty = bytearray(b"\x01") * n
            full_pass = True
        else:
            full_pass = False


def _aggregate(
    n: int,
    indptr: list[int],
    nbr: list[int],
    wgt: list[float],
    self_w: np.ndarray,
    k: np.ndarray,
    comm: list[int],
) -> tuple[int, list[int], list[int], list[float], np.ndarray, np.ndarray, np.ndarray]:
    """Collapse communities into supernodes; returns the next-level arrays."""
    comm_arr = np.asarray(comm, dtype=np.int64)
    uniq, new_of = np.unique(comm_arr, return_inverse=True)
    n2 = int(uniq.size)
    k2 = np.bincount(new_of, weights=k, minlength=n2)
    self2 = np.bincount(new_of, weights=self_w, minlength=n2)
    acc: dict[tuple[int, int], float] = {}
    new_list = new_of.tolist()
    for i in range(n):
        ci = new_list[i]
        for idx in range(indptr[i], indptr[i + 1]):
            j = nbr[idx]
            if j <= i:
                continue
            cj = new_list[j]
            if ci == cj:
                self2[ci] += wgt[idx]
            else:
                key = (ci, cj) if ci < cj else (cj, ci)
                acc[key] = acc.get(key, 0.0) + wgt[idx]
    pairs = sorted(acc.items())
    deg = [0] * n2
    for (u, v), _ in pairs:
        deg[u] += 1
        deg[v] += 1
    indptr2 = [0] * (n2 + 1)
    for i in range(n2):
        indptr2[i + 1] = indptr2[i] + deg[i]
    fill = indptr2[:-1].copy()
    nbr2 = [0] * indptr2[-1]
    wgt2 = [0.0] * indptr2[-1]
    for (u, v), w in pairs:
        nbr2[fill[u]] = v
        wgt2[fill[u]] = w
        fill[u] += 1
        nbr2[fill[v]] = u
        wgt2[fill[v]] = w
        fill[v] += 1
    return n2, indptr2, nbr2, wgt2, self2, k2, new_of


_MAX_LEVELS = 64


def louvain(
    g: UndirectedGraph,
    seed: int,
    with_trace: bool = False,
) -> Partition | tuple[Partition, list[float]]:
    """Two-phase Louvain modularity optimization.

    Local moving sweeps nodes in a seed-determined permutation, greedily
    moving each node to the neighboring community with the largest strictly
    positive modularity gain (ties break toward the smallest community
    label), until no move improves Q; communities are then aggregated into
    supernodes and the process repeats until it stops moving. The result is
    deterministic for a fixed seed. Nodes with no edges never move, so they
    end up as singleton communities.

    With ``with_trace=True`` also returns the running modularity value after
    every accepted move; the trace is strictly increasing.
    """
    if g.n_edges == 0:
        raise DomainError("edgeless graph: no communities to detect")
    rng = np.random.default_rng(seed)
    n = g.n_nodes
    m = g.total_weight
    inv_2m = 1.0 / (2.0 * m)

    indptr = g.indptr.tolist()
    nbr = g.nbr.tolist()
    wgt = g.wgt.tolist()
    k = g.strength.astype(np.float64)
    self_w = np.zeros(n, dtype=np.float64)
    comm = list(range(n))
    node_map = np.arange(n, dtype=np.int64)

    trace: list[float] | None = [] if with_trace else None
    # Q of the all-singleton start (level 0 has no self-loops).
    q_running = float(-np.sum((k * inv_2m) ** 2))

    for _ in range(_MAX_LEVELS):
        order = rng.permutation(n).tolist()
        sum_tot = k.tolist()
        moves, q_running = _local_move(
            indptr, nbr, wgt, k.tolist(), comm, sum_tot, order, inv_2m, q_running, trace
        )
        if moves == 0:
            break
        n, indptr, nbr, wgt, self_w, k, new_of = _aggregate(
            n, indptr, nbr, wgt, self_w, k, comm
        )
        # Route every original node through the freshly aggregated supernodes.
        node_map = new_of[node_map]
        comm = list(range(n))
    else:
        log.warning("louvain stopped after %d levels without converging", _MAX_LEVELS)

    canon: dict[int, int] = {}
    final = np.empty(g.n_nodes, dtype=np.int64)
    for i, c in enumerate(node_map.tolist()):
        label = canon.get(c)
        if label is None:
            label = len(canon)
            canon[c] = label
        final[i] = label
    q = modularity(g, final)
    partition = Partition(labels=final, n_communities=len(canon), modularity=q)
    if with_trace:
        return partition, trace if trace is not None else []
    return partition


def reshuffle_partition(p: Partition, seed: int) -> Partition:
    """Randomly permute labels across nodes; community sizes are preserved."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(p.labels.size)
    return Partition(labels=p.labels[perm], n_communities=p.n_communities, modularity=None)


def top_community_labels(p: Partition, k: int | None = None) -> list[int]:
    """Community labels by decreasing size (ties by smaller label)."""
    sizes = p.sizes()
    order = np.lexsort((np.arange(sizes.size), -sizes))
    if k is not None:
        order = order[:k]
    return [int(label) for label in order]


def community_names(p: Partition, k: int = 5) -> dict[int, str]:
    """Name the k largest communities RT1..RTk; everything else is OTHER."""
    names = {}
    for rank, label in enumerate(top_community_labels(p), start=1):
        names[label] = f"RT{rank}" if rank <= k else "OTHER"
    return names


def save_partition(p: Partition, nodes: NodeTable, path: Path | str) -> None:
    if p.labels.size != len(nodes):
        raise DataIntegrityError("partition and node table sizes differ")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["author_id", "community_label"])
        for idx in range(len(nodes)):
            writer.writerow([nodes.name(idx), int(p.labels[idx])])


def load_partition(path: Path | str, nodes: NodeTable) -> Partition:
    """Load an exported partition; labels are re-densified in first-seen order."""
    raw = np.full(len(nodes), -1, dtype=np.int64)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["author_id", "community_label"]:
                raise InputError(f"{path}: bad partition header {header}")
            for row in reader:
                idx = nodes.get(row[0])
                if idx is None:
                    raise DataIntegrityError(f"{path}: author {row[0]!r} not in node table")
                raw[idx] = int(row[1])
    except OSError as exc:
        raise InputError(f"cannot read partition {path}: {exc}") from exc
    if (raw < 0).any():
        missing = nodes.name(int(np.flatnonzero(raw < 0)[0]))
        raise DataIntegrityError(f"{path}: no community for author {missing!r}")
    canon: dict[int, int] = {}
    labels = np.empty_like(raw)
    for i, c in enumerate(raw.tolist()):
        label = canon.get(c)
        if label is None:
            label = len(canon)
            canon[c] = label
        labels[i] = label
    return Partition(labels=labels, n_communities=len(canon), modularity=None)
