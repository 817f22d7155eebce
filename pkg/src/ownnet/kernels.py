"""Hot loops: batched point-in-polygon assignment and chain pair enumeration.

Every kernel has two implementations with identical results:

* ``*_numba`` -- explicit loops compiled with ``numba.njit``;
* ``*_numpy`` -- vectorised numpy, used when numba is missing or disabled.

The public names (``assign_points``, ``chain_pairs``) dispatch on
:data:`ownnet._accel.USE_NUMBA`. Both paths evaluate the same floating point
expressions in the same order, so their outputs are bit-identical.

Ring layout shared by both paths: vertices of every ring are concatenated in
``vx``/``vy`` (each ring closed, first vertex repeated last); ``ring_ptr``
holds CSR offsets into the vertex arrays; ``part_ring_ptr`` holds CSR offsets
into the rings, the first ring of each part being its outer ring.
"""
from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit

OUTSIDE = 0
INSIDE = 1
ON_BOUNDARY = 2


# ---------------------------------------------------------------------------
# point in polygon
# ---------------------------------------------------------------------------


@njit(cache=True)
def _ring_code(px, py, vx, vy, start, end):
    inside = False
    for i in range(start, end - 1):
        x1 = vx[i]
        y1 = vy[i]
        x2 = vx[i + 1]
        y2 = vy[i + 1]
        if min(x1, x2) <= px <= max(x1, x2) and min(y1, y2) <= py <= max(y1, y2):
            if (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1) == 0.0:
                return ON_BOUNDARY
        if (y1 > py) != (y2 > py):
            xint = (x2 - x1) * (py - y1) / (y2 - y1) + x1
            if px < xint:
                inside = not inside
    return INSIDE if inside else OUTSIDE


@njit(cache=True)
def _part_code(px, py, p, vx, vy, ring_ptr, part_ring_ptr):
    r0 = part_ring_ptr[p]
    code = _ring_code(px, py, vx, vy, ring_ptr[r0], ring_ptr[r0 + 1])
    if code != INSIDE:
        return code
    for r in range(r0 + 1, part_ring_ptr[p + 1]):
        h = _ring_code(px, py, vx, vy, ring_ptr[r], ring_ptr[r + 1])
        if h == ON_BOUNDARY:
            return ON_BOUNDARY
        if h == INSIDE:
            return OUTSIDE
    return INSIDE


@njit(cache=True)
def assign_points_numba(
    px, py, vx, vy, ring_ptr, part_ring_ptr, part_fua, part_bbox, fua_area,
    grid_origin, grid_step, grid_shape, cell_ptr, cell_parts,
):
    n = px.shape[0]
    best = np.full(n, -1, dtype=np.int64)
    boundary = np.zeros(n, dtype=np.bool_)
    if cell_parts.shape[0] == 0:
        return best, boundary
    gx0 = grid_origin[0]
    gy0 = grid_origin[1]
    gx1 = grid_origin[2]
    gy1 = grid_origin[3]
    nx = grid_shape[0]
    ny = grid_shape[1]
    for k in range(n):
        x = px[k]
        y = py[k]
        if not (gx0 <= x <= gx1 and gy0 <= y <= gy1):
            continue
        cx = min(int(np.floor((x - gx0) / grid_step[0])), nx - 1)
        cy = min(int(np.floor((y - gy0) / grid_step[1])), ny - 1)
        cell = cy * nx + cx
        best_area = np.inf
        for t in range(cell_ptr[cell], cell_ptr[cell + 1]):
            p = cell_parts[t]
            if x < part_bbox[p, 0] or x > part_bbox[p, 2] or y < part_bbox[p, 1] or y > part_bbox[p, 3]:
                continue
            code = _part_code(x, y, p, vx, vy, ring_ptr, part_ring_ptr)
            if code == OUTSIDE:
                continue
            if code == ON_BOUNDARY:
                boundary[k] = True
            f = part_fua[p]
            a = fua_area[f]
            if best[k] < 0 or a < best_area or (a == best_area and f < best[k]):
                best[k] = f
                best_area = a
    return best, boundary


def _ring_code_numpy(px, py, vx, vy, start, end):
    inside = np.zeros(px.shape[0], dtype=bool)
    on = np.zeros(px.shape[0], dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        for i in range(start, end - 1):
            x1 = vx[i]
            y1 = vy[i]
            x2 = vx[i + 1]
            y2 = vy[i + 1]
            inbox = (px >= min(x1, x2)) & (px <= max(x1, x2)) & (py >= min(y1, y2)) & (py <= max(y1, y2))
            on |= inbox & ((x2 - x1) * (py - y1) - (y2 - y1) * (px - x1) == 0.0)
            crosses = (y1 > py) != (y2 > py)
            xint = (x2 - x1) * (py - y1) / (y2 - y1) + x1
            inside ^= crosses & (px < xint)
    code = np.where(inside, INSIDE, OUTSIDE)
    code[on] = ON_BOUNDARY
    return code


def assign_points_numpy(
    px, py, vx, vy, ring_ptr, part_ring_ptr, part_fua, part_bbox, fua_area,
    grid_origin=None, grid_step=None, grid_shape=None, cell_ptr=None, cell_parts=None,
):
    # The grid is unused here: a bbox mask per part is already vectorised.
    n = px.shape[0]
    best = np.full(n, -1, dtype=np.int64)
    best_area = np.full(n, np.inf)
    boundary = np.zeros(n, dtype=bool)
    for p in range(part_fua.shape[0]):
        bb = part_bbox[p]
        idx = np.flatnonzero((px >= bb[0]) & (px <= bb[2]) & (py >= bb[1]) & (py <= bb[3]))
        if idx.size == 0:
            continue
        x = px[idx]
        y = py[idx]
        r0 = part_ring_ptr[p]
        code = _ring_code_numpy(x, y, vx, vy, ring_ptr[r0], ring_ptr[r0 + 1])
        for r in range(r0 + 1, part_ring_ptr[p + 1]):
            live = code == INSIDE
            if not live.any():
                break
            h = _ring_code_numpy(x[live], y[live], vx, vy, ring_ptr[r], ring_ptr[r + 1])
            sub = code[live]
            sub[h == ON_BOUNDARY] = ON_BOUNDARY
            sub[h == INSIDE] = OUTSIDE
            code[live] = sub
        hit = idx[code != OUTSIDE]
        boundary[idx[code == ON_BOUNDARY]] = True
        f = part_fua[p]
        a = fua_area[f]
        better = (best[hit] < 0) | (a < best_area[hit]) | ((a == best_area[hit]) & (f < best[hit]))
        sel = hit[better]
        best[sel] = f
        best_area[sel] = a
    return best, boundary


# ---------------------------------------------------------------------------
# chain enumeration
# ---------------------------------------------------------------------------


@njit(cache=True)
def chain_pairs_numba(l2_nodes, in_ptr, in_edge, out_ptr, out_edge):
    total = 0
    for v in l2_nodes:
        total += (in_ptr[v + 1] - in_ptr[v]) * (out_ptr[v + 1] - out_ptr[v])
    first = np.empty(total, dtype=np.int64)
    second = np.empty(total, dtype=np.int64)
    k = 0
    for v in l2_nodes:
        for i in range(in_ptr[v], in_ptr[v + 1]):
            for j in range(out_ptr[v], out_ptr[v + 1]):
                first[k] = in_edge[i]
                second[k] = out_edge[j]
                k += 1
    return first, second


def chain_pairs_numpy(l2_nodes, in_ptr, in_edge, out_ptr, out_edge):
    l2_nodes = np.asarray(l2_nodes, dtype=np.int64)
    indeg = in_ptr[l2_nodes + 1] - in_ptr[l2_nodes]
    outdeg = out_ptr[l2_nodes + 1] - out_ptr[l2_nodes]
    counts = indeg * outdeg
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    owner = np.repeat(np.arange(l2_nodes.size), counts)
    pos = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    width = outdeg[owner]
    first = in_edge[in_ptr[l2_nodes][owner] + pos // width]
    second = out_edge[out_ptr[l2_nodes][owner] + pos % width]
    return first.astype(np.int64), second.astype(np.int64)


if USE_NUMBA:
    assign_points = assign_points_numba
    chain_pairs = chain_pairs_numba
else:
    assign_points = assign_points_numpy
    chain_pairs = chain_pairs_numpy
