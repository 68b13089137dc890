"""Independent brute-force reference implementations used as test oracles.

None of these touch the k-d tree, the assignment solver or the voxel code
under test.
"""

import itertools
import math

import numpy as np


def brute_nearest(points: np.ndarray, queries: np.ndarray):
    """O(n*q) scan; the squared distance is dx*dx + dy*dy + dz*dz, ties to the lowest id."""
    ids = np.empty(len(queries), dtype=np.int64)
    d2s = np.empty(len(queries))
    for r, q in enumerate(queries):
        dx = points[:, 0] - q[0]
        dy = points[:, 1] - q[1]
        dz = points[:, 2] - q[2]
        d2 = dx * dx + dy * dy + dz * dz
        i = int(np.argmin(d2))  # argmin returns the first minimum
        ids[r], d2s[r] = i, d2[i]
    return ids, d2s


def brute_chamfer(a: np.ndarray, b: np.ndarray) -> float:
    _, ab = brute_nearest(b, a)
    _, ba = brute_nearest(a, b)
    return math.fsum(ab.tolist()) / len(a) + math.fsum(ba.tolist()) / len(b)


def brute_dcd(a: np.ndarray, b: np.ndarray, alpha: float) -> float:
    def side(query, target):
        ids, d2 = brute_nearest(target, query)
        terms = []
        for i, d in zip(ids, d2):
            n = max(int((ids == i).sum()), 1)
            terms.append(1.0 - np.exp(-alpha * np.sqrt(d)) / n)
        return math.fsum(terms) / len(query)

    return 0.5 * (side(a, b) + side(b, a))


def brute_emd(a: np.ndarray, b: np.ndarray) -> float:
    """Minimum over all permutations of the summed unsquared distances (mean per point)."""
    n = len(a)
    cost = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))
    perms = np.array(list(itertools.permutations(range(n))))
    totals = cost[np.arange(n), perms].sum(axis=1)
    best = perms[int(np.argmin(totals))]
    return math.fsum(cost[np.arange(n), best].tolist()) / n


def brute_bounds(points: np.ndarray):
    lo = [min(p[k] for p in points) for k in range(3)]
    hi = [max(p[k] for p in points) for k in range(3)]
    return np.array(lo), np.array(hi)


def voxel_id_set(points: np.ndarray, size: float) -> set:
    return {tuple(int(math.floor(c / size)) for c in p) for p in points}
