"""Brute-force reference implementations used as test oracles.

Each one is written from the definition, with plain loops and no shared code
with the package.
"""
from __future__ import annotations

import math
from itertools import product

import numpy as np


# --- geometry ---------------------------------------------------------------

def ring_contains(px, py, ring):
    """'in', 'on' or 'out' for a closed ring (first vertex repeated last)."""
    crossings = 0
    for (x1, y1), (x2, y2) in zip(ring, ring[1:]):
        if min(x1, x2) <= px <= max(x1, x2) and min(y1, y2) <= py <= max(y1, y2):
            if (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1) == 0.0:
                return "on"
        if (y1 > py) != (y2 > py):
            if px < (x2 - x1) * (py - y1) / (y2 - y1) + x1:
                crossings += 1
    return "in" if crossings % 2 else "out"


def shoelace(ring):
    return abs(sum(ring[i][0] * ring[i + 1][1] - ring[i + 1][0] * ring[i][1] for i in range(len(ring) - 1))) / 2


def part_contains(px, py, part):
    c = ring_contains(px, py, part.outer)
    if c != "in":
        return c
    for h in part.holes:
        hc = ring_contains(px, py, h)
        if hc == "on":
            return "on"
        if hc == "in":
            return "out"
    return "in"


def linear_scan(px, py, fuas):
    """(winning fua_id or None, boundary flag) by scanning every area."""
    best = None
    on = False
    for f in fuas:
        codes = [part_contains(px, py, p) for p in f.parts]
        if all(c == "out" for c in codes):
            continue
        on = on or "on" in codes
        key = (sum(shoelace(p.outer) for p in f.parts), f.fua_id)
        if best is None or key < best:
            best = key
    return (best[1] if best else None), on


def star_polygon(rng, cx, cy, rmin=1, rmax=6, nmin=3, nmax=10):
    """Simple polygon with integer vertices, star-shaped around (cx, cy)."""
    while True:
        n = int(rng.integers(nmin, nmax + 1))
        verts = set()
        for _ in range(n):
            t = rng.uniform(0, 2 * math.pi)
            r = rng.uniform(rmin, rmax)
            v = (cx + round(r * math.cos(t)), cy + round(r * math.sin(t)))
            if v != (cx, cy):
                verts.add(v)
        by_angle = {}
        for v in verts:
            a = math.atan2(v[1] - cy, v[0] - cx)
            if a not in by_angle or math.dist(v, (cx, cy)) < math.dist(by_angle[a], (cx, cy)):
                by_angle[a] = v
        angles = sorted(by_angle)
        if len(angles) < 3:
            continue
        gaps = [b - a for a, b in zip(angles, angles[1:])] + [angles[0] + 2 * math.pi - angles[-1]]
        if max(gaps) >= math.pi:
            continue
        ring = [tuple(float(c) for c in by_angle[a]) for a in angles]
        ring.append(ring[0])
        if shoelace(ring) > 0:
            return tuple(ring)


# --- graphs -----------------------------------------------------------------

def brute_chains(links, city_of, focal):
    """Every ordered pair (l1, l2) with l1.owned == l2.owner located in the focal city."""
    out = []
    for a, b in product(links, links):
        if a.owned_id == b.owner_id and city_of.get(a.owned_id) == focal:
            out.append((a.owner_id, a.owned_id, b.owned_id))
    return sorted(out)


def reachability_sccs(nodes, edges):
    """Strongly connected components with more than one node, via Floyd-Warshall closure."""
    idx = {n: i for i, n in enumerate(nodes)}
    n = len(nodes)
    R = np.zeros((n, n), dtype=bool)
    for a, b in edges:
        R[idx[a], idx[b]] = True
    for k in range(n):
        R |= R[:, k:k + 1] & R[k:k + 1, :]
    seen = set()
    comps = []
    for i in range(n):
        if i in seen:
            continue
        comp = {j for j in range(n) if j == i or (R[i, j] and R[j, i])}
        seen |= comp
        if len(comp) > 1:
            comps.append(sorted(nodes[j] for j in comp))
    return sorted(comps)


# --- correspondence analysis ------------------------------------------------

def chi2_over_n(N):
    N = np.asarray(N, float)
    N = N[N.sum(1) > 0][:, N.sum(0) > 0]
    n = N.sum()
    E = np.outer(N.sum(1), N.sum(0)) / n
    return float(((N - E) ** 2 / E).sum() / n)
