"""Time the numba and numpy kernel paths on the same inputs.

    python3 benchmarks/bench_kernels.py [--points 300000] [--cities 138] [--edges 300000]

Both paths are checked for identical output before timings are reported.
The numba column excludes the one-off compile (a warm-up call runs first).
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from ownnet import kernels
from ownnet._accel import NUMBA_AVAILABLE
from ownnet.geo import SpatialIndex
from ownnet.ingest import Firm, OwnershipLink
from ownnet.netgraph import OwnershipGraph
from ownnet.synth import make_fuas


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_assign(n_points, n_cities, rng, repeat):
    idx = SpatialIndex(make_fuas(n_cities, rng))
    px = rng.uniform(-6.0, 2.0, n_points)
    py = rng.uniform(50.0, 58.0, n_points)
    args = (idx.vx, idx.vy, idx.ring_ptr, idx.part_ring_ptr, idx.part_fua, idx.part_bbox, idx.fua_area,
            idx.grid_origin, idx.grid_step, idx.grid_shape, idx.cell_ptr, idx.cell_parts)
    t_np, out_np = best_of(lambda: kernels.assign_points_numpy(px, py, *args), repeat)
    row = {"kernel": f"assign_points ({n_points} pts, {n_cities} areas)", "numpy": t_np}
    if NUMBA_AVAILABLE:
        kernels.assign_points_numba(px[:10], py[:10], *args)
        t_nb, out_nb = best_of(lambda: kernels.assign_points_numba(px, py, *args), repeat)
        assert np.array_equal(out_np[0], out_nb[0]) and np.array_equal(out_np[1], out_nb[1])
        row["numba"] = t_nb
    return row


def bench_chains(n_edges, rng, repeat):
    n = max(2, n_edges)
    ids = [f"F{i:07d}" for i in range(n)]
    firms = {i: Firm(i, i, 0.0, 0.0, "GB", "2511", 1.0) for i in ids}
    a = rng.integers(0, n, n_edges)
    b = rng.integers(0, n, n_edges)
    keep = a != b
    pairs = sorted(set(zip(a[keep].tolist(), b[keep].tolist())))
    g = OwnershipGraph(firms, [OwnershipLink(ids[i], ids[j], 100.0) for i, j in pairs])
    nodes = np.sort(rng.choice(n, size=n // 10, replace=False)).astype(np.int64)
    args = (nodes, g.in_ptr, g.in_edge, g.out_ptr, g.out_edge)
    t_np, out_np = best_of(lambda: kernels.chain_pairs_numpy(*args), repeat)
    row = {"kernel": f"chain_pairs ({len(pairs)} edges, {nodes.size} L2 firms, {out_np[0].size} chains)", "numpy": t_np}
    if NUMBA_AVAILABLE:
        kernels.chain_pairs_numba(nodes[:2], *args[1:])
        t_nb, out_nb = best_of(lambda: kernels.chain_pairs_numba(*args), repeat)
        assert np.array_equal(out_np[0], out_nb[0]) and np.array_equal(out_np[1], out_nb[1])
        row["numba"] = t_nb
    return row


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=300_000)
    ap.add_argument("--cities", type=int, default=138)
    ap.add_argument("--edges", type=int, default=300_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    rows = [bench_assign(args.points, args.cities, rng, args.repeat), bench_chains(args.edges, rng, args.repeat)]
    print(f"{'kernel':<62} {'numpy s':>9} {'numba s':>9} {'speedup':>8}")
    for r in rows:
        nb = r.get("numba")
        print(f"{r['kernel']:<62} {r['numpy']:>9.4f} "
              + (f"{nb:>9.4f} {r['numpy'] / nb:>7.1f}x" if nb else f"{'n/a':>9} {'':>8}"))


if __name__ == "__main__":
    main()
