"""Ownership-link revenue ("force"), city and city-pair aggregates, NACE sections.

The force of a link is the owned firm's turnover weighted by the owner's
capital share, ``share_pct / 100 * turnover``, and is attributed to the city
of the owned firm. Links whose owned firm has no turnover carry no force;
they still count in link counts and are reported separately.

Sums are computed with :func:`math.fsum`, so totals are correctly rounded and
independent of input order.
"""
from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ingest import Firm, OwnershipLink, Snapshot

log = logging.getLogger(__name__)

SECTIONS = tuple("ABCDEFGHIJKLMNOPQRSTU")
INTERNAL = "INTERNAL"


class UnknownDivisionError(ValueError):
    code = "UNKNOWN_DIVISION"


def city_label(firm: Firm) -> str:
    """City of a firm, or the ``UNASSIGNED:<country>`` pseudo-city."""
    return firm.city_id if firm.city_id is not None else f"UNASSIGNED:{firm.country}"


@dataclass(frozen=True, slots=True)
class LinkForce:
    owner_id: str
    owned_id: str
    share_pct: float
    force: float
    origin_city: str
    dest_city: str


def link_force(link: OwnershipLink, firms: Mapping[str, Firm]) -> LinkForce | None:
    owned = firms[link.owned_id]
    if owned.turnover is None:
        return None
    return LinkForce(
        link.owner_id, link.owned_id, link.share_pct,
        link.share_pct / 100.0 * owned.turnover,
        city_label(firms[link.owner_id]), city_label(owned),
    )


@dataclass
class ForceTable:
    forces: list[LinkForce]
    missing: list[tuple[OwnershipLink, str]]

    def missing_by_city(self) -> dict[str, int]:
        out: dict[str, int] = defaultdict(int)
        for _, city in self.missing:
            out[city] += 1
        return dict(sorted(out.items()))


def compute_forces(snapshot: Snapshot) -> ForceTable:
    forces = []
    missing = []
    firms = snapshot.firms
    for l in snapshot.links:
        lf = link_force(l, firms)
        if lf is None:
            missing.append((l, city_label(firms[l.owned_id])))
        else:
            forces.append(lf)
    return ForceTable(forces, missing)


def aggregate_city_forces(forces: Iterable[LinkForce], by: str = "dest") -> dict[str, float]:
    """Total force per city, keyed and sorted by city id.

    ``by="dest"`` attributes each link to the owned firm's city. ``by="origin"``
    is an owner-side view offered for exploration only.
    """
    if by not in ("dest", "origin"):
        raise ValueError(f"by must be 'dest' or 'origin', not {by!r}")
    groups: dict[str, list[float]] = defaultdict(list)
    for f in forces:
        groups[f.dest_city if by == "dest" else f.origin_city].append(f.force)
    return {c: math.fsum(groups[c]) for c in sorted(groups)}


@dataclass(frozen=True, slots=True)
class CityPairFlow:
    origin_city: str
    dest_city: str
    year: int
    n_links: int
    total_force: float
    n_missing: int = 0

    @property
    def flags(self) -> str:
        return INTERNAL if self.origin_city == self.dest_city else ""


def city_pair_matrix(snapshot: Snapshot, cities: Iterable[str]) -> list[CityPairFlow]:
    """One row per ordered (origin, dest) pair of listed cities with at least one link."""
    cities = set(cities)
    firms = snapshot.firms
    acc: dict[tuple[str, str], list] = {}
    for l in snapshot.links:
        o = firms[l.owner_id].city_id
        d = firms[l.owned_id]
        if o not in cities or d.city_id not in cities:
            continue
        slot = acc.setdefault((o, d.city_id), [0, [], 0])
        slot[0] += 1
        if d.turnover is None:
            slot[2] += 1
        else:
            slot[1].append(l.share_pct / 100.0 * d.turnover)
    return [
        CityPairFlow(o, d, snapshot.year, n, math.fsum(fs), miss)
        for (o, d), (n, fs, miss) in sorted(acc.items())
    ]


def write_flows(flows: Iterable[CityPairFlow], path: str | Path) -> int:
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["origin", "dest", "year", "n_links", "total_force", "flags"])
        for f in flows:
            w.writerow([f.origin_city, f.dest_city, f.year, f.n_links, repr(f.total_force), f.flags])
            n += 1
    return n


# ---------------------------------------------------------------------------
# NACE sections
# ---------------------------------------------------------------------------


def _read_division_table(text: str) -> dict[int, str]:
    table = {}
    for row in csv.DictReader(text.splitlines()):
        d = int(row["division"])
        s = row["section"].strip().upper()
        if s not in SECTIONS:
            raise ValueError(f"division table: unknown section {s!r}")
        table[d] = s
    return table


@lru_cache(maxsize=None)
def _default_table() -> dict[int, str]:
    return _read_division_table(resources.files("ownnet.data").joinpath("nace_divisions.csv").read_text(encoding="utf-8"))


def load_division_table(path: str | Path | None = None) -> dict[int, str]:
    if path is None:
        return dict(_default_table())
    return _read_division_table(Path(path).read_text(encoding="utf-8"))


def nace_section(nace4: str, table: Mapping[int, str] | None = None) -> str:
    table = _default_table() if table is None else table
    try:
        return table[int(nace4[:2])]
    except (KeyError, ValueError):
        raise UnknownDivisionError(f"UNKNOWN_DIVISION: {nace4!r}") from None


@dataclass
class SectorMatrix:
    rows: list[tuple[str, int]]
    cells: np.ndarray
    columns: tuple[str, ...] = SECTIONS
    excluded: dict[int, dict[str, int]] = field(default_factory=dict)

    @property
    def all_zero(self) -> bool:
        return not np.any(self.cells > 0)

    def row_labels(self) -> list[str]:
        return [f"{c}|{y}" for c, y in self.rows]

    def to_csv(self, path: str | Path) -> int:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["city", "year", *self.columns])
            for (c, y), vals in zip(self.rows, self.cells.tolist()):
                w.writerow([c, y, *(repr(v) for v in vals)])
        return len(self.rows)

    def excluded_csv(self, path: str | Path) -> int:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["year", "missing_turnover", "unknown_division"])
            for y, d in self.excluded.items():
                w.writerow([y, d["missing_turnover"], d["unknown_division"]])
        return len(self.excluded)

    @classmethod
    def from_csv(cls, path: str | Path) -> "SectorMatrix":
        with open(path, newline="", encoding="utf-8") as fh:
            r = csv.reader(fh)
            header = next(r)
            rows, vals = [], []
            for rec in r:
                rows.append((rec[0], int(rec[1])))
                vals.append([float(v) for v in rec[2:]])
        cells = np.asarray(vals, dtype=np.float64).reshape(len(rows), len(header) - 2)
        return cls(rows, cells, tuple(header[2:]))


def sector_matrix(snapshots: Sequence[Snapshot], cities: Sequence[str],
                  table: Mapping[int, str] | None = None) -> SectorMatrix:
    """(city, year) x section matrix of total force of links owned into each city.

    Rows follow snapshot order, then the given city order. Links without
    turnover or with an unallocated division are left out and counted per year.
    """
    table = _default_table() if table is None else table
    col = {s: j for j, s in enumerate(SECTIONS)}
    cities = list(cities)
    rows: list[tuple[str, int]] = []
    cell_terms: list[list[list[float]]] = []
    excluded: dict[int, dict[str, int]] = {}
    for snap in snapshots:
        base = len(rows)
        rows.extend((c, snap.year) for c in cities)
        cell_terms.extend([[] for _ in SECTIONS] for _ in cities)
        row_of = {c: base + i for i, c in enumerate(cities)}
        ex = excluded.setdefault(snap.year, {"missing_turnover": 0, "unknown_division": 0})
        for l in snap.links:
            owned = snap.firms[l.owned_id]
            r = row_of.get(owned.city_id)
            if r is None:
                continue
            if owned.turnover is None:
                ex["missing_turnover"] += 1
                continue
            try:
                s = nace_section(owned.nace4, table)
            except UnknownDivisionError:
                ex["unknown_division"] += 1
                continue
            cell_terms[r][col[s]].append(l.share_pct / 100.0 * owned.turnover)
    cells = np.array([[math.fsum(t) for t in row] for row in cell_terms], dtype=np.float64).reshape(len(rows), len(SECTIONS))
    m = SectorMatrix(rows, cells, SECTIONS, excluded)
    if m.all_zero:
        log.warning("sector matrix is all zero; correspondence analysis will be degenerate")
    return m


def top_links(forces: Iterable[LinkForce], origin: str, dest: str, k: int = 5) -> list[LinkForce]:
    """The ``k`` strongest links from ``origin`` to ``dest``; ties by (owner_id, owned_id)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    sel = [f for f in forces if f.origin_city == origin and f.dest_city == dest]
    sel.sort(key=lambda f: (-f.force, f.owner_id, f.owned_id))
    return sel[:k]


def write_top_links(rows: Iterable[tuple[int, LinkForce]], path: str | Path) -> int:
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["origin", "dest", "rank", "owner_id", "owned_id", "share_pct", "force"])
        for rank, f in rows:
            w.writerow([f.origin_city, f.dest_city, rank, f.owner_id, f.owned_id, repr(f.share_pct), repr(f.force)])
            n += 1
    return n
