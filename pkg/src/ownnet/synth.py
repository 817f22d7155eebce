"""Synthetic firm/link/boundary datasets for tests, benchmarks and the demo fixture.

Real inputs come from proprietary registries; everything here is generated
from a seeded ``numpy.random.Generator`` and is reproducible bit for bit.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .ingest import Firm, FUAPart, FunctionalUrbanArea, OwnershipLink, write_firms, write_fua, write_links

# rough country centres (lon, lat) and spread for firms outside the domestic cities
FOREIGN = {
    "DE": (10.0, 51.0), "FR": (2.5, 46.5), "NL": (5.3, 52.1), "IE": (-8.0, 53.3), "ES": (-3.7, 40.4),
    "IT": (12.5, 42.8), "SE": (15.0, 60.0), "PL": (19.0, 52.0), "US": (-95.0, 38.0), "JP": (138.0, 36.0),
    "CN": (110.0, 33.0), "CH": (8.2, 46.8), "IN": (78.0, 22.0), "CA": (-100.0, 55.0),
}
DIVISIONS = [d for d in range(1, 100) if d not in {4, 34, 40, 44, 48, 54, 57, 67, 76, 83, 89}]


def regular_polygon(cx: float, cy: float, radius: float, n: int = 24, phase: float = 0.0):
    ring = [(round(cx + radius * math.cos(phase + 2 * math.pi * k / n), 9),
             round(cy + radius * math.sin(phase + 2 * math.pi * k / n), 9)) for k in range(n)]
    return tuple(ring + [ring[0]])


def make_fuas(n_cities: int, rng: np.random.Generator, names: Sequence[str] | None = None):
    """Non-overlapping regular polygons on a jittered grid over Great Britain."""
    side = max(1, math.ceil(math.sqrt(n_cities)))
    step_x = 7.0 / side
    step_y = 7.0 / side
    fuas = []
    for k in range(n_cities):
        gx, gy = k % side, k // side
        cx = -5.5 + (gx + 0.5) * step_x + rng.uniform(-0.1, 0.1) * step_x
        cy = 50.5 + (gy + 0.5) * step_y + rng.uniform(-0.1, 0.1) * step_y
        r = 0.3 * min(step_x, step_y) * rng.uniform(0.6, 1.0)
        fid = names[k] if names else f"UK{k:03d}"
        fuas.append(FunctionalUrbanArea(fid, fid, "GB", int(rng.integers(50_000, 5_000_000)),
                                        (FUAPart(regular_polygon(cx, cy, r)),)))
    return fuas


def _centre_radius(f: FunctionalUrbanArea):
    ring = f.parts[0].outer[:-1]
    cx = sum(v[0] for v in ring) / len(ring)
    cy = sum(v[1] for v in ring) / len(ring)
    return cx, cy, math.hypot(ring[0][0] - cx, ring[0][1] - cy)


def make_firms(n: int, fuas, rng: np.random.Generator, *, prefix: str = "F", domestic: str = "GB",
               p_domestic: float = 0.8, p_in_city: float = 0.85, p_missing_turnover: float = 0.1,
               city_weights=None) -> list[Firm]:
    geom = [_centre_radius(f) for f in fuas]
    if city_weights is None:
        w = 1.0 / np.arange(1, len(fuas) + 1)
    else:
        w = np.asarray(city_weights, dtype=float)
    w = w / w.sum()
    foreign = sorted(FOREIGN)
    width = max(6, len(str(n)))
    u = rng.random(n)
    city = rng.choice(len(fuas), size=n, p=w) if fuas else np.zeros(n, dtype=int)
    rho = 0.9 * np.sqrt(rng.random(n))
    theta = 2 * np.pi * rng.random(n)
    free_lon = rng.uniform(-5.5, 1.5, n)
    free_lat = rng.uniform(50.0, 57.5, n)
    fc = rng.integers(len(foreign), size=n)
    jitter = rng.normal(0, 1.0, (n, 2)) * (1.5, 1.0)
    div = rng.integers(len(DIVISIONS), size=n)
    sub = rng.integers(0, 100, size=n)
    missing = rng.random(n) < p_missing_turnover
    turn = rng.lognormal(8.0, 2.0, n)
    firms = []
    for i in range(n):
        if u[i] < p_domestic * p_in_city and fuas:
            cx, cy, r = geom[city[i]]
            lon = cx + rho[i] * r * math.cos(theta[i])
            lat = cy + rho[i] * r * math.sin(theta[i])
            country = domestic
        elif u[i] < p_domestic:
            lon, lat, country = free_lon[i], free_lat[i], domestic
        else:
            country = foreign[fc[i]]
            x, y = FOREIGN[country]
            lon, lat = x + jitter[i, 0], y + jitter[i, 1]
        nace = f"{DIVISIONS[div[i]]:02d}{sub[i]:02d}"
        turnover = None if missing[i] else round(float(turn[i]), 3)
        firms.append(Firm(f"{prefix}{i:0{width}d}", f"Firm {i}", round(float(lon), 6), round(float(lat), 6),
                          country, nace, turnover))
    return firms


def make_links(firms: Sequence[Firm], n_links: int, rng: np.random.Generator) -> list[OwnershipLink]:
    """Distinct owner->owned pairs, owners drawn with a heavy tail so hubs appear."""
    n = len(firms)
    if n < 2:
        return []
    owner_w = 1.0 / np.arange(1, n + 1) ** 0.8
    owner_w /= owner_w.sum()
    perm = rng.permutation(n)
    seen: set[tuple[int, int]] = set()
    links = []
    cap = n * (n - 1)
    while len(links) < min(n_links, cap):
        k = n_links - len(links)
        a = perm[rng.choice(n, size=k, p=owner_w)]
        b = rng.integers(0, n, size=k)
        full = rng.random(k) < 0.6
        shares = np.where(full, 100.0, np.round(rng.uniform(1.0, 99.99, size=k), 2))
        for i, j, s in zip(a.tolist(), b.tolist(), shares.tolist()):
            if i == j or (i, j) in seen:
                continue
            seen.add((i, j))
            links.append(OwnershipLink(firms[i].firm_id, firms[j].firm_id, float(s)))
            if len(links) >= n_links:
                break
    return links


def write_dataset(dest: str | Path, *, n_firms: int = 2000, n_links: int = 2000, n_cities: int = 20,
                  years: Sequence[int] = (2010, 2013, 2016), seed: int = 0) -> Path:
    """Write boundaries, per-year firm/link CSVs and an INI config; returns the config path."""
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    fuas = make_fuas(n_cities, rng)
    write_fua(fuas, dest / "fua.geojson")
    ids = [f.fua_id for f in fuas]
    lines = [
        "[run]",
        "boundaries = fua.geojson",
        f"focal = {ids[1] if len(ids) > 1 else ids[0]}",
        f"capital = {ids[0]}",
        "domestic_country = GB",
        f"cities = {','.join(ids[1:5])}",
        "currency = EUR",
        "unit = thousands",
        "out = out",
        "",
    ]
    for y in years:
        firms = make_firms(n_firms, fuas, rng)
        links = make_links(firms, n_links, rng)
        write_firms(firms, dest / f"firms_{y}.csv")
        write_links(links, dest / f"links_{y}.csv")
        lines += [f"[{y}]", f"firms = firms_{y}.csv", f"links = links_{y}.csv", ""]
    path = dest / "config.ini"
    path.write_text("\n".join(lines), encoding="utf-8")
    return path


FIXTURE_CITIES = {
    # id: (name, lon, lat, radius)
    "LON": ("London", -0.12, 51.5, 0.35),
    "MAN": ("Manchester", -2.24, 53.48, 0.2),
    "LIV": ("Liverpool", -2.98, 53.41, 0.18),
    "LEE": ("Leeds", -1.55, 53.8, 0.18),
    "NEW": ("Newcastle", -1.61, 54.97, 0.18),
}


def write_fixture(dest: str | Path, *, n_firms: int = 50, n_links: int = 60,
                  years: Sequence[int] = (2010, 2013, 2016), seed: int = 2010) -> Path:
    """The small five-city demonstration dataset bundled with the package."""
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    fuas = [
        FunctionalUrbanArea(fid, name, "GB", int(rng.integers(500_000, 10_000_000)),
                            (FUAPart(regular_polygon(x, y, r, n=8)),))
        for fid, (name, x, y, r) in FIXTURE_CITIES.items()
    ]
    write_fua(fuas, dest / "fua.geojson")
    lines = [
        "[run]",
        "boundaries = fua.geojson",
        "focal = MAN",
        "capital = LON",
        "domestic_country = GB",
        "cities = LEE,LIV,MAN,NEW",
        "currency = EUR",
        "unit = thousands",
        "out = out",
        "top_k = 5",
        "",
    ]
    for y in years:
        firms = make_firms(n_firms, fuas, rng, prefix=f"GB{y}", p_in_city=0.9,
                           city_weights=[1.0, 1.5, 1.0, 1.0, 1.0])
        links = make_links(firms, n_links, rng)
        write_firms(firms, dest / f"firms_{y}.csv")
        write_links(links, dest / f"links_{y}.csv")
        lines += [f"[{y}]", f"firms = firms_{y}.csv", f"links = links_{y}.csv", ""]
    path = dest / "fixture.ini"
    path.write_text("\n".join(lines), encoding="utf-8")
    return path
