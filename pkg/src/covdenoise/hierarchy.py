"""Agglomerative clustering of distance matrices (average and single linkage)
with cophenetic distances, built for correlation filtering.

Cluster labels follow the usual convention: leaves are 0..p-1 and the merge
created at step t gets label p+t.  Ties between candidate merges are broken
by the lexicographically smallest pair of cluster labels, so dendrograms are
fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

_METHODS = ("average", "single")


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    size: int


def linkage(distance: np.ndarray, method: str = "average") -> list[Merge]:
    """Sequence of p-1 merges of the given symmetric distance matrix."""
    if method not in _METHODS:
        raise ParameterError(f"unknown linkage method {method!r}")
    d = np.asarray(distance, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ParameterError("distance matrix must be square")
    p = d.shape[0]
    total = 2 * p - 1
    # working pairwise distances over all labels ever created; inactive = +inf
    work = np.full((total, total), np.inf)
    work[:p, :p] = 0.5 * (d + d.T)
    work[np.tril_indices(total)] = np.inf
    sizes = np.zeros(total, dtype=int)
    sizes[:p] = 1
    active = np.zeros(total, dtype=bool)
    active[:p] = True
    merges: list[Merge] = []
    for step in range(p - 1):
        flat = np.argmin(work[:p + step, :p + step])
        i, j = divmod(int(flat), p + step)
        height = work[i, j]
        new = p + step
        active[i] = active[j] = False
        row = np.full(total, np.inf)
        candidates = np.flatnonzero(active[:new])
        if method == "average":
            merged = (sizes[i] * np.minimum(work[i, candidates], work[candidates, i])
                      + sizes[j] * np.minimum(work[j, candidates], work[candidates, j]))
            row[candidates] = merged / (sizes[i] + sizes[j])
        else:
            row[candidates] = np.minimum(
                np.minimum(work[i, candidates], work[candidates, i]),
                np.minimum(work[j, candidates], work[candidates, j]),
            )
        work[i, :] = np.inf
        work[:, i] = np.inf
        work[j, :] = np.inf
        work[:, j] = np.inf
        work[:new, new] = row[:new]
        sizes[new] = sizes[i] + sizes[j]
        active[new] = True
        merges.append(Merge(left=i, right=j, height=float(height), size=int(sizes[new])))
    return merges


def cluster_members(merges: list[Merge], p: int) -> list[np.ndarray]:
    """Leaf index sets for every label (leaves first, then merge order)."""
    members: list[np.ndarray] = [np.array([i]) for i in range(p)]
    for merge in merges:
        members.append(np.concatenate((members[merge.left], members[merge.right])))
    return members


def cophenetic_matrix(merges: list[Merge], p: int) -> np.ndarray:
    """Matrix of dendrogram heights at which leaf pairs first join; zero diagonal."""
    members = cluster_members(merges, p)
    coph = np.zeros((p, p))
    for merge in merges:
        left, right = members[merge.left], members[merge.right]
        coph[np.ix_(left, right)] = merge.height
        coph[np.ix_(right, left)] = merge.height
    return coph
