"""Directed ownership graph, geographic scope classes and L1 -> L2 -> L3 chains."""
from __future__ import annotations

import csv
import datetime as _dt
import enum
import logging
from collections import deque
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from . import kernels
from .ingest import Firm, OwnershipLink, Snapshot

log = logging.getLogger(__name__)

ROUNDTRIP = "ROUNDTRIP"


class GeoScope(str, enum.Enum):
    FOCAL_CITY = "FOCAL_CITY"
    CAPITAL = "CAPITAL"
    OTHER_DOMESTIC = "OTHER_DOMESTIC"
    EUROPEAN_UNION = "EUROPEAN_UNION"
    EXTRA_EUROPEAN = "EXTRA_EUROPEAN"


DOMESTIC_SCOPES = (GeoScope.FOCAL_CITY, GeoScope.CAPITAL, GeoScope.OTHER_DOMESTIC)


class Side(str, enum.Enum):
    OWNER = "OWNER"
    OWNED = "OWNED"


class UnknownCityError(KeyError):
    pass


class EmptySetError(ValueError):
    code = "EMPTY_SET"


def eu_members(year: int, table: str | Path | None = None) -> frozenset[str]:
    """EU member states at 31 December of ``year`` from a dated membership table."""
    if table is None:
        text = resources.files("ownnet.data").joinpath("eu_members.csv").read_text(encoding="utf-8")
    else:
        text = Path(table).read_text(encoding="utf-8")
    ref = _dt.date(year, 12, 31)
    out = set()
    for row in csv.DictReader(text.splitlines()):
        joined = _dt.date.fromisoformat(row["joined"])
        left = _dt.date.fromisoformat(row["left"]) if row.get("left") else None
        if joined <= ref and (left is None or left > ref):
            out.add(row["country"].strip().upper())
    return frozenset(out)


@dataclass(frozen=True)
class ScopeConfig:
    focal_fua_id: str
    capital_fua_id: str
    domestic_country: str
    eu_countries: frozenset[str]

    def __post_init__(self):
        if self.focal_fua_id == self.capital_fua_id:
            raise ValueError("focal and capital city must differ")
        if self.domestic_country not in self.eu_countries:
            log.info("domestic country %s is outside the EU set", self.domestic_country)

    @property
    def domestic_in_eu(self) -> bool:
        return self.domestic_country in self.eu_countries

    @classmethod
    def for_year(cls, focal: str, capital: str, domestic: str, year: int, table=None) -> "ScopeConfig":
        return cls(focal, capital, domestic.upper(), eu_members(year, table))


def scope_of(city: str | None, country: str, cfg: ScopeConfig) -> GeoScope:
    if city is not None and city == cfg.focal_fua_id:
        return GeoScope.FOCAL_CITY
    if city is not None and city == cfg.capital_fua_id:
        return GeoScope.CAPITAL
    if country == cfg.domestic_country:
        return GeoScope.OTHER_DOMESTIC
    if country in cfg.eu_countries:
        return GeoScope.EUROPEAN_UNION
    return GeoScope.EXTRA_EUROPEAN


def classify_scope(firm: Firm, cfg: ScopeConfig) -> GeoScope:
    return scope_of(firm.city_id, firm.country, cfg)


class OwnershipGraph:
    """Immutable CSR adjacency over firms.

    Node ``i`` is the i-th firm id in sorted order, so integer order equals
    lexicographic id order. Edges are stored sorted by (owner, owned); the
    in-adjacency is a permutation of the same edge array sorted by
    (owned, owner).
    """

    def __init__(self, firms: Mapping[str, Firm], links: Sequence[OwnershipLink]):
        self.firms = firms
        self.ids = sorted(firms)
        self.index = {fid: i for i, fid in enumerate(self.ids)}
        n = len(self.ids)
        src = np.fromiter((self.index[l.owner_id] for l in links), dtype=np.int64, count=len(links))
        dst = np.fromiter((self.index[l.owned_id] for l in links), dtype=np.int64, count=len(links))
        order = np.lexsort((dst, src))
        self.src = src[order]
        self.dst = dst[order]
        self.links = [links[i] for i in order.tolist()]
        self.share = np.fromiter((l.share_pct for l in self.links), dtype=np.float64, count=len(self.links))

        self.out_ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.src, minlength=n), out=self.out_ptr[1:])
        self.out_edge = np.arange(self.src.size, dtype=np.int64)
        self.in_edge = np.lexsort((self.src, self.dst)).astype(np.int64)
        self.in_ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.dst, minlength=n), out=self.in_ptr[1:])

    @property
    def n_nodes(self) -> int:
        return len(self.ids)

    @property
    def n_edges(self) -> int:
        return len(self.links)

    def out_degree(self, firm_id: str) -> int:
        i = self.index[firm_id]
        return int(self.out_ptr[i + 1] - self.out_ptr[i])

    def in_degree(self, firm_id: str) -> int:
        i = self.index[firm_id]
        return int(self.in_ptr[i + 1] - self.in_ptr[i])

    def out_links(self, firm_id: str) -> list[OwnershipLink]:
        i = self.index[firm_id]
        return [self.links[e] for e in self.out_edge[self.out_ptr[i]:self.out_ptr[i + 1]].tolist()]

    def in_links(self, firm_id: str) -> list[OwnershipLink]:
        i = self.index[firm_id]
        return [self.links[e] for e in self.in_edge[self.in_ptr[i]:self.in_ptr[i + 1]].tolist()]

    def successors(self, i: int) -> np.ndarray:
        return self.dst[self.out_ptr[i]:self.out_ptr[i + 1]]

    def transpose(self) -> "OwnershipGraph":
        return OwnershipGraph(self.firms, [OwnershipLink(l.owned_id, l.owner_id, l.share_pct) for l in self.links])


def build_graph(snapshot: Snapshot) -> OwnershipGraph:
    return OwnershipGraph(snapshot.firms, snapshot.links)


def _city_lookup(graph: OwnershipGraph, assignments):
    if assignments is None:
        return lambda fid: graph.firms[fid].city_id
    city_of = assignments.city_of
    return lambda fid: city_of.get(fid)


def _nodes_in_city(graph: OwnershipGraph, city: str, assignments) -> np.ndarray:
    known = getattr(assignments, "fua_ids", None)
    if known is not None and city not in known:
        raise UnknownCityError(city)
    city_at = _city_lookup(graph, assignments)
    return np.asarray([i for i, fid in enumerate(graph.ids) if city_at(fid) == city], dtype=np.int64)


def inbound_links(graph: OwnershipGraph, city: str, assignments=None) -> list[OwnershipLink]:
    """Links whose owned firm sits in ``city``, ordered by (owner_id, owned_id).

    ``assignments`` is a :class:`ownnet.geo.CoverageReport` (anything with
    ``city_of`` and ``fua_ids``); without it, firms' own ``city_id`` is used
    and the city id is not checked.
    """
    nodes = _nodes_in_city(graph, city, assignments)
    return [graph.links[e] for e in np.flatnonzero(np.isin(graph.dst, nodes)).tolist()]


def outbound_links(graph: OwnershipGraph, city: str, assignments=None) -> list[OwnershipLink]:
    """Links whose owner sits in ``city``, ordered by (owner_id, owned_id)."""
    nodes = _nodes_in_city(graph, city, assignments)
    return [graph.links[e] for e in np.flatnonzero(np.isin(graph.src, nodes)).tolist()]


@dataclass(frozen=True, slots=True)
class OwnershipChain:
    inbound: OwnershipLink
    outbound: OwnershipLink
    l2_city: str
    l1_scope: GeoScope
    l3_scope: GeoScope

    @property
    def l1_id(self) -> str:
        return self.inbound.owner_id

    @property
    def l2_id(self) -> str:
        return self.inbound.owned_id

    @property
    def l3_id(self) -> str:
        return self.outbound.owned_id

    @property
    def flags(self) -> str:
        return ROUNDTRIP if self.l1_id == self.l3_id else ""


def extract_chains(graph: OwnershipGraph, city: str, assignments, cfg: ScopeConfig) -> list[OwnershipChain]:
    """Every (inbound, outbound) link pair meeting at a firm located in ``city``.

    Ordered by (l1_id, l2_id, l3_id). Round trips (L1 = L3) are kept and
    carry the ROUNDTRIP flag.
    """
    nodes = _nodes_in_city(graph, city, assignments)
    first, second = kernels.chain_pairs(nodes, graph.in_ptr, graph.in_edge, graph.out_ptr, graph.out_edge)
    if first.size == 0:
        return []
    order = np.lexsort((graph.dst[second], graph.dst[first], graph.src[first]))
    city_at = _city_lookup(graph, assignments)
    scope_cache: dict[int, GeoScope] = {}

    def scope(node: int) -> GeoScope:
        s = scope_cache.get(node)
        if s is None:
            fid = graph.ids[node]
            s = scope_cache[node] = scope_of(city_at(fid), graph.firms[fid].country, cfg)
        return s

    src = graph.src
    dst = graph.dst
    links = graph.links
    return [
        OwnershipChain(links[a], links[b], city, scope(src[a]), scope(dst[b]))
        for a, b in zip(first[order].tolist(), second[order].tolist())
    ]


def chain_summary(chains: Sequence[OwnershipChain]) -> dict:
    firms = set()
    links = set()
    for c in chains:
        firms.update((c.l1_id, c.l2_id, c.l3_id))
        links.add((c.inbound.owner_id, c.inbound.owned_id))
        links.add((c.outbound.owner_id, c.outbound.owned_id))
    return {
        "n_chains": len(chains),
        "n_distinct_firms": len(firms),
        "n_distinct_links": len(links),
        "n_roundtrip": sum(1 for c in chains if c.flags == ROUNDTRIP),
    }


def write_chains(chains: Iterable[OwnershipChain], path: str | Path) -> int:
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["l1_id", "l1_scope", "l2_id", "l3_id", "l3_scope", "flags"])
        for c in chains:
            w.writerow([c.l1_id, c.l1_scope.value, c.l2_id, c.l3_id, c.l3_scope.value, c.flags])
            n += 1
    return n


def scope_counts(links: Sequence[OwnershipLink], side: Side | str, cfg: ScopeConfig,
                 firms: Mapping[str, Firm], assignments=None) -> dict[GeoScope, int]:
    side = Side(side)
    city_of = assignments.city_of if assignments is not None else None
    counts = dict.fromkeys(GeoScope, 0)
    for l in links:
        fid = l.owner_id if side is Side.OWNER else l.owned_id
        f = firms[fid]
        city = city_of.get(fid) if city_of is not None else f.city_id
        counts[scope_of(city, f.country, cfg)] += 1
    return counts


def scope_distribution(links: Sequence[OwnershipLink], side: Side | str, cfg: ScopeConfig,
                       firms: Mapping[str, Firm], assignments=None) -> dict[GeoScope, float]:
    """Percentage of links per scope class of the owner (or owned) endpoint."""
    if not links:
        raise EmptySetError("EMPTY_SET: no links to classify")
    counts = scope_counts(links, side, cfg, firms, assignments)
    n = len(links)
    return {s: 100.0 * c / n for s, c in counts.items()}


def domestic_share(dist: Mapping[GeoScope, float]) -> float:
    return sum(dist[s] for s in DOMESTIC_SCOPES)


# ---------------------------------------------------------------------------
# cycles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CycleReport:
    components: list[tuple[str, ...]]
    examples: list[tuple[str, ...]]

    @property
    def count(self) -> int:
        return len(self.components)

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "components": [list(c) for c in self.components],
            "example_cycles": [list(c) for c in self.examples],
        }


def strongly_connected_components(graph: OwnershipGraph) -> list[list[int]]:
    """Tarjan's algorithm, iterative so deep ownership paths cannot overflow the stack."""
    n = graph.n_nodes
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    out: list[list[int]] = []
    counter = 0
    out_ptr = graph.out_ptr.tolist()
    dst = graph.dst.tolist()
    for root in range(n):
        if index[root] >= 0 or out_ptr[root] == out_ptr[root + 1]:
            continue
        work = [(root, out_ptr[root])]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, e = work[-1]
            if e < out_ptr[v + 1]:
                work[-1] = (v, e + 1)
                w = dst[e]
                if index[w] < 0:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, out_ptr[w]))
                elif on_stack[w] and index[w] < low[v]:
                    low[v] = index[w]
                continue
            work.pop()
            if work:
                u = work[-1][0]
                if low[v] < low[u]:
                    low[u] = low[v]
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                out.append(sorted(comp))
    return out


def _shortest_cycle(graph: OwnershipGraph, start: int, members: set[int]) -> list[int]:
    # BFS in sorted-successor order, so the example is deterministic
    parent = {start: start}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for w in graph.successors(v).tolist():
            if w == start:
                path = [v]
                while path[-1] != start:
                    path.append(parent[path[-1]])
                return path[::-1] + [start]
            if w in members and w not in parent:
                parent[w] = v
                queue.append(w)
    return [start]


def detect_cycles(graph: OwnershipGraph) -> CycleReport:
    """Strongly connected components with more than one firm, lowest id first."""
    comps = [c for c in strongly_connected_components(graph) if len(c) > 1]
    comps.sort(key=lambda c: c[0])
    components = [tuple(graph.ids[i] for i in c) for c in comps]
    examples = [tuple(graph.ids[i] for i in _shortest_cycle(graph, c[0], set(c))) for c in comps]
    return CycleReport(components, examples)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def _dot_id(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def write_dot(graph: OwnershipGraph, path: str | Path) -> int:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("digraph ownership {\n")
        for fid in graph.ids:
            f = graph.firms[fid]
            fh.write(f"  {_dot_id(fid)} [city={_dot_id(f.city_id or '')}, country={_dot_id(f.country)}, nace4={_dot_id(f.nace4)}];\n")
        for l in graph.links:
            fh.write(f"  {_dot_id(l.owner_id)} -> {_dot_id(l.owned_id)} [share_pct={l.share_pct!r}];\n")
        fh.write("}\n")
    return graph.n_edges


def write_graphml(graph: OwnershipGraph, path: str | Path) -> int:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write('<?xml version="1.0" encoding="UTF-8"?>\n')
        fh.write('<graphml xmlns="http://graphml.graphdrawing.org/xmlns">\n')
        fh.write('  <key id="city" for="node" attr.name="city" attr.type="string"/>\n')
        fh.write('  <key id="country" for="node" attr.name="country" attr.type="string"/>\n')
        fh.write('  <key id="nace4" for="node" attr.name="nace4" attr.type="string"/>\n')
        fh.write('  <key id="share_pct" for="edge" attr.name="share_pct" attr.type="double"/>\n')
        fh.write('  <graph id="ownership" edgedefault="directed">\n')
        for fid in graph.ids:
            f = graph.firms[fid]
            fh.write(f"    <node id={quoteattr(fid)}>"
                     f'<data key="city">{escape(f.city_id or "")}</data>'
                     f'<data key="country">{escape(f.country)}</data>'
                     f'<data key="nace4">{escape(f.nace4)}</data></node>\n')
        for l in graph.links:
            fh.write(f"    <edge source={quoteattr(l.owner_id)} target={quoteattr(l.owned_id)}>"
                     f'<data key="share_pct">{l.share_pct!r}</data></edge>\n')
        fh.write("  </graph>\n</graphml>\n")
    return graph.n_edges
