"""Parsers for firm, ownership-link and boundary files.

Per-row problems never abort a parse: the row is moved to a quarantine report
with its line number and a reason code. Only structural problems (unreadable
file, missing mandatory column, malformed GeoJSON container) raise
:class:`IngestError`.
"""
from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

# reason codes
FIELD_COUNT = "FIELD_COUNT"
MISSING_ID = "MISSING_ID"
DUP_ID = "DUP_ID"
BAD_COORD = "BAD_COORD"
COORD_RANGE = "COORD_RANGE"
BAD_COUNTRY = "BAD_COUNTRY"
BAD_NACE = "BAD_NACE"
BAD_TURNOVER = "BAD_TURNOVER"
BAD_SHARE = "BAD_SHARE"
SHARE_RANGE = "SHARE_RANGE"
SELF_LOOP = "SELF_LOOP"
DANGLING = "DANGLING"
DUP_LINK = "DUP_LINK"
BAD_GEOMETRY = "BAD_GEOMETRY"
RING_OPEN = "RING_OPEN"
RING_SHORT = "RING_SHORT"
ZERO_AREA = "ZERO_AREA"
BAD_POPULATION = "BAD_POPULATION"

FIRM_COLUMNS = ("id", "name", "lon", "lat", "country", "nace4", "turnover")
LINK_COLUMNS = ("owner_id", "owned_id", "share_pct")

_NACE_RE = re.compile(r"^[0-9]{4}$")
_COUNTRY_RE = re.compile(r"^[A-Z]{2}$")


class IngestError(Exception):
    """Structural input failure; the whole file is unusable."""


@dataclass(frozen=True, slots=True)
class Firm:
    firm_id: str
    name: str
    lon: float
    lat: float
    country: str
    nace4: str
    turnover: float | None
    city_id: str | None = None

    @property
    def division(self) -> int:
        return int(self.nace4[:2])


@dataclass(frozen=True, slots=True)
class OwnershipLink:
    owner_id: str
    owned_id: str
    share_pct: float


@dataclass(frozen=True, slots=True)
class QuarantineRecord:
    line: int
    reason: str
    raw_row: str


@dataclass
class QuarantineReport:
    source: str
    records: list[QuarantineRecord] = field(default_factory=list)
    n_rows: int = 0

    def add(self, line: int, reason: str, raw: str) -> None:
        self.records.append(QuarantineRecord(line, reason, raw))

    @property
    def n_rejected(self) -> int:
        return len(self.records)

    @property
    def n_accepted(self) -> int:
        return self.n_rows - len(self.records)

    def reason_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.records:
            out[r.reason] = out.get(r.reason, 0) + 1
        return dict(sorted(out.items()))

    def to_csv(self, path: str | Path) -> int:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["line", "reason", "raw_row"])
            for r in self.records:
                w.writerow([r.line, r.reason, r.raw_row])
        return len(self.records)


@dataclass
class Snapshot:
    year: int
    firms: dict[str, Firm]
    links: list[OwnershipLink]
    quarantine: list[QuarantineReport] = field(default_factory=list)
    currency: str = "EUR"

    def firm(self, firm_id: str) -> Firm:
        return self.firms[firm_id]


@dataclass(frozen=True)
class FUAPart:
    outer: tuple[tuple[float, float], ...]
    holes: tuple[tuple[tuple[float, float], ...], ...] = ()


@dataclass(frozen=True)
class FunctionalUrbanArea:
    fua_id: str
    name: str
    country: str
    population: int
    parts: tuple[FUAPart, ...]

    @property
    def outer_area(self) -> float:
        """Sum of the outer-ring areas, holes ignored (used for overlap tie-breaks)."""
        return math.fsum(ring_area(p.outer) for p in self.parts)

    @property
    def area(self) -> float:
        return math.fsum(ring_area(p.outer) - math.fsum(ring_area(h) for h in p.holes) for p in self.parts)


def ring_area(ring) -> float:
    """Absolute shoelace area of a closed ring, in squared coordinate units."""
    s = math.fsum(ring[i][0] * ring[i + 1][1] - ring[i + 1][0] * ring[i][1] for i in range(len(ring) - 1))
    return abs(s) / 2.0


def _raw(row: list[str]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="").writerow(row)
    return buf.getvalue()


def _open_csv(path: str | Path, columns: Iterable[str], schema: Mapping[str, str] | None):
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc.strerror or exc}") from exc
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        fh.close()
        raise IngestError(f"{path}: empty file, header row expected") from None
    header = [h.strip() for h in header]
    schema = dict(schema or {})
    positions = {}
    for col in columns:
        src = schema.get(col, col)
        if src not in header:
            fh.close()
            raise IngestError(f"{path}: missing mandatory column {src!r}")
        positions[col] = header.index(src)
    return fh, reader, positions, len(header)


def _float(text: str) -> float | None:
    try:
        v = float(text)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def parse_firms(path: str | Path, schema: Mapping[str, str] | None = None):
    """Read a firm CSV. Returns ``(firms, quarantine)``, firms keyed by id in file order.

    ``schema`` maps logical column names (``id``, ``name``, ``lon`` ...) to the
    header names used in the file; unmapped columns use their logical name.
    """
    fh, reader, pos, width = _open_csv(path, FIRM_COLUMNS, schema)
    firms: dict[str, Firm] = {}
    q = QuarantineReport(str(path))
    with fh:
        for row in reader:
            if not row:
                continue
            q.n_rows += 1
            line = reader.line_num
            if len(row) != width:
                q.add(line, FIELD_COUNT, _raw(row))
                continue
            firm_id = row[pos["id"]].strip()
            if not firm_id:
                q.add(line, MISSING_ID, _raw(row))
                continue
            lon = _float(row[pos["lon"]])
            lat = _float(row[pos["lat"]])
            if lon is None or lat is None:
                q.add(line, BAD_COORD, _raw(row))
                continue
            if not (-180.0 <= lon <= 180.0 and -90.0 <= lat <= 90.0):
                q.add(line, COORD_RANGE, _raw(row))
                continue
            country = row[pos["country"]].strip().upper()
            if not _COUNTRY_RE.match(country):
                q.add(line, BAD_COUNTRY, _raw(row))
                continue
            nace4 = row[pos["nace4"]].strip()
            if not _NACE_RE.match(nace4) or nace4[:2] == "00":
                q.add(line, BAD_NACE, _raw(row))
                continue
            t = row[pos["turnover"]].strip()
            if t == "":
                turnover = None
            else:
                turnover = _float(t)
                if turnover is None or turnover < 0:
                    q.add(line, BAD_TURNOVER, _raw(row))
                    continue
            if firm_id in firms:
                q.add(line, DUP_ID, _raw(row))
                continue
            firms[firm_id] = Firm(firm_id, row[pos["name"]], lon, lat, country, nace4, turnover)
    return firms, q


def _parse_share(text: str) -> float | None:
    text = text.strip()
    if text.endswith("%"):
        text = text[:-1].strip()
    return _float(text)


def parse_links(path: str | Path, firms: Mapping[str, Firm], schema: Mapping[str, str] | None = None):
    """Read an ownership-link CSV against an already parsed firm collection.

    Returns ``(links, quarantine)``. Of duplicate (owner, owned) pairs the
    first occurrence is kept.
    """
    fh, reader, pos, width = _open_csv(path, LINK_COLUMNS, schema)
    links: list[OwnershipLink] = []
    seen: set[tuple[str, str]] = set()
    q = QuarantineReport(str(path))
    with fh:
        for row in reader:
            if not row:
                continue
            q.n_rows += 1
            line = reader.line_num
            if len(row) != width:
                q.add(line, FIELD_COUNT, _raw(row))
                continue
            owner = row[pos["owner_id"]].strip()
            owned = row[pos["owned_id"]].strip()
            if not owner or not owned:
                q.add(line, MISSING_ID, _raw(row))
                continue
            share = _parse_share(row[pos["share_pct"]])
            if share is None:
                q.add(line, BAD_SHARE, _raw(row))
                continue
            if not (0.0 < share <= 100.0):
                q.add(line, SHARE_RANGE, _raw(row))
                continue
            if owner == owned:
                q.add(line, SELF_LOOP, _raw(row))
                continue
            if owner not in firms or owned not in firms:
                q.add(line, DANGLING, _raw(row))
                continue
            key = (owner, owned)
            if key in seen:
                q.add(line, DUP_LINK, _raw(row))
                continue
            seen.add(key)
            links.append(OwnershipLink(owner, owned, share))
    return links, q


# ---------------------------------------------------------------------------
# boundaries
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class RejectedFeature:
    index: int
    feature_id: str | None
    reason: str


def _ring(coords) -> tuple[tuple[float, float], ...]:
    out = []
    for v in coords:
        if not isinstance(v, (list, tuple)) or len(v) < 2:
            raise ValueError(BAD_GEOMETRY)
        x, y = float(v[0]), float(v[1])
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError(BAD_GEOMETRY)
        out.append((x, y))
    if len(out) < 4:
        raise ValueError(RING_SHORT)
    if out[0] != out[-1]:
        raise ValueError(RING_OPEN)
    return tuple(out)


def _polygon(coords) -> FUAPart:
    if not isinstance(coords, list) or not coords:
        raise ValueError(BAD_GEOMETRY)
    rings = [_ring(r) for r in coords]
    if ring_area(rings[0]) <= 0.0:
        raise ValueError(ZERO_AREA)
    return FUAPart(rings[0], tuple(rings[1:]))


def parse_fua(path: str | Path):
    """Read a GeoJSON FeatureCollection of Polygon/MultiPolygon city boundaries.

    Properties used: ``id`` (or the feature-level ``id``), ``name``,
    ``population`` and ``country``. Returns ``(fuas, rejected)`` with the
    accepted areas sorted by id.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise IngestError(f"{path}: invalid JSON ({exc.msg})") from exc
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection" or not isinstance(doc.get("features"), list):
        raise IngestError(f"{path}: not a GeoJSON FeatureCollection")

    fuas: dict[str, FunctionalUrbanArea] = {}
    rejected: list[RejectedFeature] = []
    for i, feat in enumerate(doc["features"]):
        props = (feat.get("properties") or {}) if isinstance(feat, dict) else {}
        fid = props.get("id", feat.get("id") if isinstance(feat, dict) else None)
        fid = None if fid is None else str(fid).strip() or None
        if fid is None:
            rejected.append(RejectedFeature(i, None, MISSING_ID))
            continue
        if fid in fuas:
            rejected.append(RejectedFeature(i, fid, DUP_ID))
            continue
        geom = feat.get("geometry") or {}
        try:
            if geom.get("type") == "Polygon":
                parts = (_polygon(geom.get("coordinates")),)
            elif geom.get("type") == "MultiPolygon":
                polys = geom.get("coordinates")
                if not isinstance(polys, list) or not polys:
                    raise ValueError(BAD_GEOMETRY)
                parts = tuple(_polygon(p) for p in polys)
            else:
                raise ValueError(BAD_GEOMETRY)
        except (ValueError, TypeError, AttributeError) as exc:
            reason = str(exc) if isinstance(exc, ValueError) and str(exc) in {RING_OPEN, RING_SHORT, ZERO_AREA, BAD_GEOMETRY} else BAD_GEOMETRY
            rejected.append(RejectedFeature(i, fid, reason))
            continue
        pop = props.get("population", 0)
        try:
            pop = int(pop or 0)
        except (TypeError, ValueError):
            pop = -1
        if pop < 0:
            rejected.append(RejectedFeature(i, fid, BAD_POPULATION))
            continue
        fuas[fid] = FunctionalUrbanArea(
            fid, str(props.get("name", fid)), str(props.get("country", "")).upper(), pop, parts
        )
    return [fuas[k] for k in sorted(fuas)], rejected


# ---------------------------------------------------------------------------
# writers
# ---------------------------------------------------------------------------


def _fmt(v: float | None) -> str:
    return "" if v is None else repr(float(v))


def write_firms(firms: Iterable[Firm], path: str | Path) -> int:
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIRM_COLUMNS)
        for f in firms:
            w.writerow([f.firm_id, f.name, _fmt(f.lon), _fmt(f.lat), f.country, f.nace4, _fmt(f.turnover)])
            n += 1
    return n


def write_links(links: Iterable[OwnershipLink], path: str | Path) -> int:
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LINK_COLUMNS)
        for l in links:
            w.writerow([l.owner_id, l.owned_id, _fmt(l.share_pct)])
            n += 1
    return n


def write_fua(fuas: Iterable[FunctionalUrbanArea], path: str | Path) -> None:
    features = []
    for f in fuas:
        polys = [[[list(v) for v in p.outer]] + [[list(v) for v in h] for h in p.holes] for p in f.parts]
        geom = {"type": "Polygon", "coordinates": polys[0]} if len(polys) == 1 else {"type": "MultiPolygon", "coordinates": polys}
        features.append({
            "type": "Feature",
            "properties": {"id": f.fua_id, "name": f.name, "country": f.country, "population": f.population},
            "geometry": geom,
        })
    Path(path).write_text(json.dumps({"type": "FeatureCollection", "features": features}, indent=1) + "\n", encoding="utf-8")


def load_snapshot(year: int, firms_path, links_path, *, schema=None, currency: str = "EUR",
                  share_threshold: float = 0.0) -> Snapshot:
    """Parse one vintage. Links below ``share_threshold`` percent are dropped after validation."""
    firms, qf = parse_firms(firms_path, schema)
    links, ql = parse_links(links_path, firms)
    if share_threshold > 0:
        links = [l for l in links if l.share_pct >= share_threshold]
    return Snapshot(year, firms, links, [qf, ql], currency)
