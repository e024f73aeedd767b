"""Incremental voxel map with a flat point list per voxel.

Nearest-neighbor queries are local by construction: only the query's voxel
and its 26 face/edge/corner neighbors are searched, so queries far from the
map return nothing and the caller skips the residual. Insertion decimates:
a point is rejected when its voxel already holds the per-voxel cap or an
existing point closer than the decimation radius.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_NEIGHBOR_OFFSETS = np.array(
    [(dx, dy, dz) for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)],
    dtype=np.int64,
)


@dataclass
class LinearIVox:
    voxel_size: float = 0.5
    max_points_per_voxel: int = 20
    decimation_radius: float = 0.05
    _cells: dict[tuple[int, int, int], np.ndarray] = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return sum(len(c) for c in self._cells.values())

    def voxel_coords(self, points: np.ndarray) -> np.ndarray:
        return np.floor(np.asarray(points, dtype=np.float64) / self.voxel_size).astype(np.int64)

    def insert(self, points) -> int:
        """Insert points, honoring the cap and decimation radius; returns #accepted."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if pts.size == 0:
            return 0
        coords = self.voxel_coords(pts)
        # Group by voxel so the sequential accept test only scans small lists.
        order = np.lexsort((coords[:, 2], coords[:, 1], coords[:, 0]))
        coords = coords[order]
        pts = pts[order]
        boundaries = np.nonzero(np.any(np.diff(coords, axis=0) != 0, axis=1))[0] + 1
        accepted = 0
        r2 = self.decimation_radius * self.decimation_radius
        for start, stop in zip(
            np.concatenate([[0], boundaries]), np.concatenate([boundaries, [len(pts)]])
        ):
            key = tuple(int(c) for c in coords[start])
            stored = self._cells.get(key)
            cell = [] if stored is None else list(stored)
            for p in pts[start:stop]:
                if len(cell) >= self.max_points_per_voxel:
                    break
                if cell:
                    d2 = np.sum((np.asarray(cell) - p) ** 2, axis=1)
                    if np.min(d2) < r2:
                        continue
                cell.append(p)
                accepted += 1
            if cell:
                self._cells[key] = np.asarray(cell)
        return accepted

    def _gather(self, key: tuple[int, int, int]) -> np.ndarray | None:
        return self._cells.get(key)

    def nearest(self, query, k: int = 1) -> np.ndarray:
        """Exact k-nearest points within the query's voxel and its 26 neighbors.

        Returns an (m, 3) array with m <= k, sorted by distance; empty when no
        stored point lies in the neighborhood.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        q = np.asarray(query, dtype=np.float64).reshape(3)
        base = self.voxel_coords(q[None, :])[0]
        chunks = []
        for off in _NEIGHBOR_OFFSETS:
            cell = self._cells.get((int(base[0] + off[0]), int(base[1] + off[1]), int(base[2] + off[2])))
            if cell is not None:
                chunks.append(cell)
        if not chunks:
            return np.empty((0, 3))
        candidates = np.concatenate(chunks, axis=0)
        d2 = np.sum((candidates - q) ** 2, axis=1)
        order = np.argsort(d2, kind="stable")[:k]
        return candidates[order]

    def knn_batch(self, queries: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Batched ``nearest`` over (N, 3) queries.

        Returns ``(neighbors, counts)`` where neighbors is (N, k, 3) padded
        with NaN and counts[i] is the number of valid rows for query i.
        Queries sharing a voxel share one candidate gather.
        """
        queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        n = len(queries)
        coords = self.voxel_coords(queries)
        unique_coords, inverse = np.unique(coords, axis=0, return_inverse=True)
        flat_points = []
        flat_group = []
        for g, base in enumerate(unique_coords):
            chunks = []
            for off in _NEIGHBOR_OFFSETS:
                cell = self._cells.get(
                    (int(base[0] + off[0]), int(base[1] + off[1]), int(base[2] + off[2]))
                )
                if cell is not None:
                    chunks.append(cell)
            if chunks:
                pts = np.concatenate(chunks, axis=0)
                flat_points.append(pts)
                flat_group.append(np.full(len(pts), g, dtype=np.int64))
        neighbors = np.full((n, k, 3), np.nan)
        counts = np.zeros(n, dtype=np.int64)
        if not flat_points:
            return neighbors, counts
        group_cand = np.concatenate(flat_points, axis=0)
        group_id = np.concatenate(flat_group)
        # expand each group's candidate block to all queries in that voxel
        sizes = np.bincount(group_id, minlength=len(unique_coords))
        starts = np.concatenate([[0], np.cumsum(sizes)])[:-1]
        per_query = sizes[inverse]
        owner = np.repeat(np.arange(n), per_query)
        cum = np.concatenate([[0], np.cumsum(per_query)])
        local = np.arange(int(cum[-1])) - np.repeat(cum[:-1], per_query)
        take = np.repeat(starts[inverse], per_query) + local
        cand = group_cand[take]
        d2 = np.sum((cand - queries[owner]) ** 2, axis=1)
        order = np.lexsort((d2, owner))
        cand, owner = cand[order], owner[order]
        group_starts = np.concatenate([[0], np.nonzero(np.diff(owner))[0] + 1])
        rank = np.arange(len(owner))
        rank = rank - np.repeat(
            rank[group_starts], np.diff(np.concatenate([group_starts, [len(owner)]]))
        )
        keep = rank < k
        neighbors[owner[keep], rank[keep]] = cand[keep]
        np.add.at(counts, owner[keep], 1)
        return neighbors, counts
