"""Firm to functional-urban-area assignment.

Geometry is planar in lon/lat degrees. Containment follows the even-odd rule
with boundary points counted as inside; a point inside a hole is outside the
part unless it sits on the hole's ring. When several areas contain a point,
the one with the smallest total outer-ring area wins, ties going to the
lowest id.
"""
from __future__ import annotations

import csv
import dataclasses
import functools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .ingest import Firm, FunctionalUrbanArea, Snapshot

UNASSIGNED = "UNASSIGNED"
BOUNDARY = "BOUNDARY"


class SpatialIndex:
    """Uniform bounding-box grid over the parts of a set of urban areas.

    Immutable after construction. Every part is registered in all grid cells
    its bounding box touches, so the candidates for a point are a superset of
    the areas that contain it.
    """

    def __init__(self, fuas: Sequence[FunctionalUrbanArea], cells_per_part: int = 4):
        self.fuas = tuple(sorted(fuas, key=lambda f: f.fua_id))
        self.fua_ids = tuple(f.fua_id for f in self.fuas)
        self._pos = {fid: i for i, fid in enumerate(self.fua_ids)}

        vx: list[float] = []
        vy: list[float] = []
        ring_ptr = [0]
        part_ring_ptr = [0]
        part_fua: list[int] = []
        bbox: list[tuple[float, float, float, float]] = []
        for fi, f in enumerate(self.fuas):
            for part in f.parts:
                for ring in (part.outer, *part.holes):
                    vx.extend(v[0] for v in ring)
                    vy.extend(v[1] for v in ring)
                    ring_ptr.append(len(vx))
                part_ring_ptr.append(len(ring_ptr) - 1)
                part_fua.append(fi)
                xs = [v[0] for v in part.outer]
                ys = [v[1] for v in part.outer]
                bbox.append((min(xs), min(ys), max(xs), max(ys)))

        self.vx = np.asarray(vx, dtype=np.float64)
        self.vy = np.asarray(vy, dtype=np.float64)
        self.ring_ptr = np.asarray(ring_ptr, dtype=np.int64)
        self.part_ring_ptr = np.asarray(part_ring_ptr, dtype=np.int64)
        self.part_fua = np.asarray(part_fua, dtype=np.int64)
        self.part_bbox = np.asarray(bbox, dtype=np.float64).reshape(-1, 4)
        self.fua_area = np.asarray([f.outer_area for f in self.fuas], dtype=np.float64)
        self._build_grid(cells_per_part)

    def _build_grid(self, cells_per_part: int) -> None:
        n = self.part_fua.shape[0]
        if n == 0:
            self.grid_origin = np.zeros(4)
            self.grid_step = np.ones(2)
            self.grid_shape = np.ones(2, dtype=np.int64)
            self.cell_ptr = np.zeros(2, dtype=np.int64)
            self.cell_parts = np.zeros(0, dtype=np.int64)
            return
        bb = self.part_bbox
        x0, y0 = bb[:, 0].min(), bb[:, 1].min()
        x1, y1 = bb[:, 2].max(), bb[:, 3].max()
        side = max(1, int(math.ceil(math.sqrt(cells_per_part * n))))
        nx = side if x1 > x0 else 1
        ny = side if y1 > y0 else 1
        dx = (x1 - x0) / nx if x1 > x0 else 1.0
        dy = (y1 - y0) / ny if y1 > y0 else 1.0
        self.grid_origin = np.array([x0, y0, x1, y1])
        self.grid_step = np.array([dx, dy])
        self.grid_shape = np.array([nx, ny], dtype=np.int64)

        # same expression as the query path in kernels.assign_points_numba
        cx0 = np.minimum(np.floor((bb[:, 0] - x0) / dx).astype(np.int64), nx - 1)
        cx1 = np.minimum(np.floor((bb[:, 2] - x0) / dx).astype(np.int64), nx - 1)
        cy0 = np.minimum(np.floor((bb[:, 1] - y0) / dy).astype(np.int64), ny - 1)
        cy1 = np.minimum(np.floor((bb[:, 3] - y0) / dy).astype(np.int64), ny - 1)
        cells: list[list[int]] = [[] for _ in range(nx * ny)]
        for p in range(n):
            for cy in range(cy0[p], cy1[p] + 1):
                for cx in range(cx0[p], cx1[p] + 1):
                    cells[cy * nx + cx].append(p)
        self.cell_ptr = np.zeros(nx * ny + 1, dtype=np.int64)
        self.cell_ptr[1:] = np.cumsum([len(c) for c in cells])
        self.cell_parts = np.asarray([p for c in cells for p in c], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.fuas)

    def fua(self, fua_id: str) -> FunctionalUrbanArea:
        return self.fuas[self._pos[fua_id]]

    def candidates(self, lon: float, lat: float) -> list[str]:
        """Ids of areas with a part whose bounding box contains the point."""
        if self.cell_parts.size == 0:
            return []
        x0, y0, x1, y1 = self.grid_origin
        if not (x0 <= lon <= x1 and y0 <= lat <= y1):
            return []
        nx, ny = int(self.grid_shape[0]), int(self.grid_shape[1])
        cx = min(int(np.floor((lon - x0) / self.grid_step[0])), nx - 1)
        cy = min(int(np.floor((lat - y0) / self.grid_step[1])), ny - 1)
        cell = cy * nx + cx
        out = set()
        for p in self.cell_parts[self.cell_ptr[cell]:self.cell_ptr[cell + 1]]:
            b = self.part_bbox[p]
            if b[0] <= lon <= b[2] and b[1] <= lat <= b[3]:
                out.add(self.fua_ids[self.part_fua[p]])
        return sorted(out)

    def locate(self, lon, lat) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised lookup: (area index or -1, on-boundary flag) per point."""
        px = np.ascontiguousarray(lon, dtype=np.float64)
        py = np.ascontiguousarray(lat, dtype=np.float64)
        return kernels.assign_points(
            px, py, self.vx, self.vy, self.ring_ptr, self.part_ring_ptr, self.part_fua,
            self.part_bbox, self.fua_area, self.grid_origin, self.grid_step, self.grid_shape,
            self.cell_ptr, self.cell_parts,
        )


def build_index(fuas: Iterable[FunctionalUrbanArea]) -> SpatialIndex:
    return SpatialIndex(list(fuas))


def assign_fua(firm: Firm, index: SpatialIndex) -> str | None:
    best, _ = index.locate([firm.lon], [firm.lat])
    return None if best[0] < 0 else index.fua_ids[best[0]]


@dataclass
class CoverageReport:
    """Per-firm assignment outcome plus per-country counts.

    ``city_of`` doubles as the assignment table consumed by the network code.
    """

    rows: list[tuple[str, str | None, str]]
    fua_ids: frozenset[str]
    by_country: dict[str, tuple[int, int]] = field(default_factory=dict)

    @functools.cached_property
    def city_of(self) -> dict[str, str | None]:
        return {fid: city for fid, city, _ in self.rows}

    @property
    def n_assigned(self) -> int:
        return sum(1 for _, c, _ in self.rows if c is not None)

    @property
    def coverage(self) -> float:
        return self.n_assigned / len(self.rows) if self.rows else 0.0

    @property
    def unassigned(self) -> list[str]:
        return [fid for fid, c, _ in self.rows if c is None]

    @property
    def boundary(self) -> list[str]:
        return [fid for fid, _, flag in self.rows if flag == BOUNDARY]

    def to_csv(self, path: str | Path) -> int:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["firm_id", "fua_id", "flag"])
            for fid, city, flag in self.rows:
                w.writerow([fid, city or UNASSIGNED, flag])
        return len(self.rows)

    def country_csv(self, path: str | Path) -> int:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["country", "assigned", "unassigned"])
            for c, (a, u) in self.by_country.items():
                w.writerow([c, a, u])
        return len(self.by_country)


def assign_all(snapshot: Snapshot, index: SpatialIndex) -> tuple[Snapshot, CoverageReport]:
    """Fill ``city_id`` for every firm. Firm order in the snapshot is preserved."""
    ids = sorted(snapshot.firms)
    firms = [snapshot.firms[i] for i in ids]
    lon = np.fromiter((f.lon for f in firms), dtype=np.float64, count=len(firms))
    lat = np.fromiter((f.lat for f in firms), dtype=np.float64, count=len(firms))
    best, on_edge = index.locate(lon, lat)

    rows = []
    city_by_id = {}
    counts: dict[str, list[int]] = {}
    for f, b, e in zip(firms, best.tolist(), on_edge.tolist()):
        city = None if b < 0 else index.fua_ids[b]
        city_by_id[f.firm_id] = city
        rows.append((f.firm_id, city, BOUNDARY if e else ""))
        c = counts.setdefault(f.country, [0, 0])
        c[0 if city is not None else 1] += 1

    new_firms = {
        k: (f if f.city_id == city_by_id[k] else dataclasses.replace(f, city_id=city_by_id[k]))
        for k, f in snapshot.firms.items()
    }
    out = dataclasses.replace(snapshot, firms=new_firms)
    report = CoverageReport(rows, frozenset(index.fua_ids), {k: tuple(v) for k, v in sorted(counts.items())})
    return out, report
