"""Command-line pipeline.

Exit codes: 0 ok, 2 structural input failure, 3 upstream stage missing,
4 degenerate analysis.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import ca as ca_mod
from . import geo, ingest, metrics, netgraph

log = logging.getLogger("ownnet")

CONFIG_ENV = "OWNNET_CONFIG"

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_STAGE = 3
EXIT_DEGENERATE = 4

STAGES = ("validate", "assign", "chains", "scope", "flows", "sectors", "ca", "export")


class ConfigError(Exception):
    pass


class MissingStage(Exception):
    def __init__(self, stage: str, path: Path):
        super().__init__(f"upstream stage '{stage}' has not been run (missing {path})")
        self.stage = stage


@dataclass
class YearPaths:
    year: int
    firms: Path
    links: Path


@dataclass
class RunConfig:
    boundaries: Path
    years: list[YearPaths]
    focal: str
    capital: str
    domestic_country: str = "GB"
    cities: list[str] = field(default_factory=list)
    currency: str = "EUR"
    unit: str = "thousands"
    out: Path = Path("out")
    share_threshold: float = 0.0
    division_table: Path | None = None
    eu_table: Path | None = None
    top_k: int = 5
    ca_cities: list[str] = field(default_factory=list)

    def check_files(self) -> None:
        paths = [self.boundaries]
        for y in self.years:
            paths += [y.firms, y.links]
        for extra in (self.division_table, self.eu_table):
            if extra is not None:
                paths.append(extra)
        for p in paths:
            if not p.is_file():
                raise ConfigError(f"input file not found: {p}")

    def scope_config(self, year: int) -> netgraph.ScopeConfig:
        return netgraph.ScopeConfig.for_year(self.focal, self.capital, self.domestic_country, year, self.eu_table)


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.replace(";", ",").split(",") if v.strip()]


def load_config(path: str | Path) -> RunConfig:
    """Read an INI file: a ``[run]`` section plus one section per year.

    Relative paths resolve against the config file's directory.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if "run" not in cp:
        raise ConfigError(f"{path}: missing [run] section")
    base = path.parent
    run = cp["run"]

    def p(v: str | None) -> Path | None:
        if not v:
            return None
        q = Path(v)
        return q if q.is_absolute() else base / q

    years = []
    for sec in cp.sections():
        if sec == "run":
            continue
        if not sec.isdigit():
            raise ConfigError(f"{path}: unexpected section [{sec}]")
        s = cp[sec]
        if "firms" not in s or "links" not in s:
            raise ConfigError(f"{path}: [{sec}] needs firms and links")
        years.append(YearPaths(int(sec), p(s["firms"]), p(s["links"])))
    years.sort(key=lambda y: y.year)
    try:
        cities = _split(run.get("cities", ""))
        return RunConfig(
            boundaries=p(run["boundaries"]),
            years=years,
            focal=run["focal"],
            capital=run["capital"],
            domestic_country=run.get("domestic_country", "GB").upper(),
            cities=cities,
            currency=run.get("currency", "EUR"),
            unit=run.get("unit", "thousands"),
            out=p(run.get("out", "out")),
            share_threshold=float(run.get("share_threshold", "0")),
            division_table=p(run.get("division_table")),
            eu_table=p(run.get("eu_table")),
            top_k=int(run.get("top_k", "5")),
            ca_cities=_split(run.get("ca_cities", "")) or cities,
        )
    except KeyError as exc:
        raise ConfigError(f"{path}: [run] is missing {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


class Pipeline:
    """Runs stages against one config, caching parsed inputs within a process.

    Stages that need assignments read them from this process's ``assign``
    run, or from the coverage files a previous invocation left in the output
    directory; otherwise :class:`MissingStage` is raised.
    """

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = cfg.out
        self.out.mkdir(parents=True, exist_ok=True)
        self._fuas = None
        self._index = None
        self._raw: dict[int, ingest.Snapshot] = {}
        self._assigned: dict[int, tuple[ingest.Snapshot, geo.CoverageReport]] = {}
        self._division = None
        self._graphs: dict[int, netgraph.OwnershipGraph] = {}
        self.artifacts: dict[str, dict] = {}

    # -- inputs -----------------------------------------------------------
    @property
    def fuas(self):
        if self._fuas is None:
            self._fuas, self.rejected_fuas = ingest.parse_fua(self.cfg.boundaries)
        return self._fuas

    @property
    def index(self) -> geo.SpatialIndex:
        if self._index is None:
            self._index = geo.build_index(self.fuas)
        return self._index

    @property
    def division_table(self):
        if self._division is None:
            self._division = metrics.load_division_table(self.cfg.division_table)
        return self._division

    def raw(self, yp: YearPaths) -> ingest.Snapshot:
        if yp.year not in self._raw:
            self._raw[yp.year] = ingest.load_snapshot(
                yp.year, yp.firms, yp.links, currency=self.cfg.currency,
                share_threshold=self.cfg.share_threshold,
            )
        return self._raw[yp.year]

    def assigned(self, yp: YearPaths) -> tuple[ingest.Snapshot, geo.CoverageReport]:
        if yp.year in self._assigned:
            return self._assigned[yp.year]
        path = self.out / f"coverage_{yp.year}.csv"
        if not path.is_file():
            raise MissingStage("assign", path)
        snap = self.raw(yp)
        rows = []
        with open(path, newline="", encoding="utf-8") as fh:
            for rec in csv.DictReader(fh):
                city = None if rec["fua_id"] == geo.UNASSIGNED else rec["fua_id"]
                rows.append((rec["firm_id"], city, rec["flag"]))
        report = geo.CoverageReport(rows, frozenset(self.index.fua_ids))
        city_of = report.city_of
        firms = {k: replace(f, city_id=city_of.get(k)) for k, f in snap.firms.items()}
        res = (replace(snap, firms=firms), report)
        self._assigned[yp.year] = res
        return res

    def graph(self, yp: YearPaths) -> netgraph.OwnershipGraph:
        if yp.year not in self._graphs:
            self._graphs[yp.year] = netgraph.build_graph(self.assigned(yp)[0])
        return self._graphs[yp.year]

    def years(self, only: int | None = None) -> list[YearPaths]:
        if only is None:
            return list(self.cfg.years)
        sel = [y for y in self.cfg.years if y.year == only]
        if not sel:
            raise ConfigError(f"year {only} is not configured")
        return sel

    def _check_city(self, city: str) -> None:
        if city not in self.index.fua_ids:
            raise ConfigError(f"city {city!r} is not among the boundary ids")

    # -- bookkeeping ------------------------------------------------------
    def record(self, artifact: str, path: Path, rows: int) -> None:
        rel = path.relative_to(self.out).as_posix()
        self.artifacts[rel] = {"artifact": artifact, "path": rel, "sha256": sha256(path), "rows": int(rows)}

    def write_manifest(self) -> Path:
        mpath = self.out / "manifest.json"
        entries = {}
        if mpath.is_file():
            try:
                entries = {e["path"]: e for e in json.loads(mpath.read_text(encoding="utf-8"))}
            except (ValueError, KeyError, TypeError):
                entries = {}
        entries.update(self.artifacts)
        _write_json([entries[k] for k in sorted(entries)], mpath)
        return mpath

    def write_run_info(self) -> None:
        path = self.out / "run_info.json"
        _write_json({
            "currency": self.cfg.currency,
            "monetary_unit": self.cfg.unit,
            "years": [y.year for y in self.cfg.years],
            "focal": self.cfg.focal,
            "capital": self.cfg.capital,
            "domestic_country": self.cfg.domestic_country,
            "cities": self.cfg.cities,
            "share_threshold": self.cfg.share_threshold,
        }, path)
        self.record("run_info", path, 1)

    # -- stages -----------------------------------------------------------
    def validate(self, year=None) -> dict:
        summary = {"boundaries": {}, "years": {}}
        fuas = self.fuas
        summary["boundaries"] = {
            "accepted": len(fuas),
            "rejected": [{"index": r.index, "id": r.feature_id, "reason": r.reason} for r in self.rejected_fuas],
        }
        for yp in self.years(year):
            snap = self.raw(yp)
            ys = {}
            for kind, q in zip(("firms", "links"), snap.quarantine):
                path = self.out / f"quarantine_{yp.year}_{kind}.csv"
                self.record(f"quarantine_{kind}", path, q.to_csv(path))
                ys[kind] = {"rows": q.n_rows, "accepted": q.n_accepted, "quarantined": q.n_rejected,
                            "reasons": q.reason_counts()}
            summary["years"][str(yp.year)] = ys
        summary["quarantined_total"] = sum(v["quarantined"] for y in summary["years"].values() for v in y.values())
        path = self.out / "validate_summary.json"
        _write_json(summary, path)
        self.record("validate_summary", path, 1)
        return summary

    def assign(self, year=None) -> None:
        for yp in self.years(year):
            snap, report = geo.assign_all(self.raw(yp), self.index)
            self._assigned[yp.year] = (snap, report)
            path = self.out / f"coverage_{yp.year}.csv"
            self.record("coverage", path, report.to_csv(path))
            path = self.out / f"coverage_{yp.year}_countries.csv"
            self.record("coverage_countries", path, report.country_csv(path))

    def chains(self, year=None) -> None:
        self._check_city(self.cfg.focal)
        for yp in self.years(year):
            snap, report = self.assigned(yp)
            g = self.graph(yp)
            chains = netgraph.extract_chains(g, self.cfg.focal, report, self.cfg.scope_config(yp.year))
            path = self.out / f"chains_{yp.year}.csv"
            self.record("chains", path, netgraph.write_chains(chains, path))
            path = self.out / f"chains_{yp.year}_summary.json"
            _write_json(netgraph.chain_summary(chains), path)
            self.record("chains_summary", path, 1)

    def scope(self, year=None) -> None:
        self._check_city(self.cfg.focal)
        for yp in self.years(year):
            snap, report = self.assigned(yp)
            g = self.graph(yp)
            sc = self.cfg.scope_config(yp.year)
            views = (
                ("owned_by", netgraph.inbound_links(g, self.cfg.focal, report), netgraph.Side.OWNER),
                ("owning", netgraph.outbound_links(g, self.cfg.focal, report), netgraph.Side.OWNED),
            )
            path = self.out / f"scope_{yp.year}.csv"
            n = 0
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["view", "scope", "n_links", "pct"])
                for view, links, side in views:
                    if not links:
                        log.warning("%s: no %s links for %s", yp.year, view, self.cfg.focal)
                        continue
                    counts = netgraph.scope_counts(links, side, sc, snap.firms, report)
                    dist = netgraph.scope_distribution(links, side, sc, snap.firms, report)
                    for s, pct in dist.items():
                        w.writerow([view, s.value, counts[s], repr(pct)])
                        n += 1
            self.record("scope", path, n)

    def flows(self, year=None) -> None:
        cities = self.cfg.cities or list(self.index.fua_ids)
        for c in cities:
            self._check_city(c)
        for yp in self.years(year):
            snap, _ = self.assigned(yp)
            rows = metrics.city_pair_matrix(snap, cities)
            path = self.out / f"flows_{yp.year}.csv"
            self.record("flows", path, metrics.write_flows(rows, path))
            forces = metrics.compute_forces(snap).forces
            top = []
            for o in sorted(cities):
                for d in sorted(cities):
                    if o != d:
                        top += list(enumerate(metrics.top_links(forces, o, d, self.cfg.top_k), start=1))
            path = self.out / f"top_links_{yp.year}.csv"
            self.record("top_links", path, metrics.write_top_links(top, path))

    def sectors(self, year=None) -> None:
        cities = self.cfg.ca_cities or self.cfg.cities or list(self.index.fua_ids)
        for c in cities:
            self._check_city(c)
        snaps = [self.assigned(yp)[0] for yp in self.years(year)]
        m = metrics.sector_matrix(snaps, cities, self.division_table)
        path = self.out / "sectors.csv"
        self.record("sectors", path, m.to_csv(path))
        path = self.out / "sectors_excluded.csv"
        self.record("sectors_excluded", path, m.excluded_csv(path))

    def ca(self, year=None) -> ca_mod.CAResult:
        path = self.out / "sectors.csv"
        if not path.is_file():
            raise MissingStage("sectors", path)
        m = metrics.SectorMatrix.from_csv(path)
        res = ca_mod.correspondence_analysis(m.cells, m.rows, m.columns)
        cities = list(dict.fromkeys(c for c, _ in res.row_labels))
        trajs = ca_mod.trajectories(res, cities)
        p = self.out / "ca_coords.csv"
        self.record("ca_coords", p, ca_mod.write_coordinates(res, p))
        p = self.out / "ca_report.csv"
        self.record("ca_report", p, ca_mod.write_report(ca_mod.ca_report(res, 3), p))
        p = self.out / "ca_map.svg"
        ca_mod.write_svg(res, trajs, p, title="City specialisation by owned-firm sector")
        self.record("ca_map", p, sum(len(t.points) for t in trajs))
        p = self.out / "ca_summary.json"
        _write_json({
            "dims": res.dims,
            "singular_values": [float(v) for v in res.sv],
            "explained": [float(v) for v in res.explained],
            "total_inertia": res.total_inertia,
            "dropped_rows": ["|".join(map(str, r)) for r in res.dropped_rows],
            "dropped_cols": list(res.dropped_cols),
        }, p)
        self.record("ca_summary", p, 1)
        return res

    def export(self, year=None) -> None:
        for yp in self.years(year):
            g = self.graph(yp)
            p = self.out / f"graph_{yp.year}.dot"
            self.record("graph_dot", p, netgraph.write_dot(g, p))
            p = self.out / f"graph_{yp.year}.graphml"
            self.record("graph_graphml", p, netgraph.write_graphml(g, p))
            rep = netgraph.detect_cycles(g)
            p = self.out / f"cycles_{yp.year}.json"
            _write_json(rep.to_dict(), p)
            self.record("cycles", p, rep.count)


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ownnet", description="Inter-urban corporate ownership network toolkit.")
    ap.add_argument("--config", help=f"INI run config (default: ${CONFIG_ENV})")
    ap.add_argument("--year", type=int, help="restrict to one configured year")
    ap.add_argument("--focal", help="focal city id (overrides config)")
    ap.add_argument("--capital", help="capital city id (overrides config)")
    ap.add_argument("--out", help="output directory (overrides config)")
    ap.add_argument("--share-threshold", type=float, help="drop links below this share percentage")
    ap.add_argument("--division-table", help="CSV division,section table replacing the bundled one")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in STAGES:
        sub.add_parser(name)
    sub.add_parser("run", help="every stage in order")
    sp = sub.add_parser("synth", help="write a synthetic dataset and config")
    sp.add_argument("dest")
    sp.add_argument("--firms", type=int, default=2000)
    sp.add_argument("--links", type=int, default=2000)
    sp.add_argument("--cities", type=int, default=20)
    sp.add_argument("--years", default="2010,2013,2016")
    sp.add_argument("--seed", type=int, default=0)
    return ap


def _resolve_config(args) -> RunConfig:
    path = args.config or os.environ.get(CONFIG_ENV)
    if not path:
        raise ConfigError(f"no config given (use --config or set {CONFIG_ENV})")
    cfg = load_config(path)
    if args.focal:
        cfg.focal = args.focal
    if args.capital:
        cfg.capital = args.capital
    if args.out:
        cfg.out = Path(args.out)
    if args.share_threshold is not None:
        cfg.share_threshold = args.share_threshold
    if args.division_table:
        cfg.division_table = Path(args.division_table)
    if cfg.focal == cfg.capital:
        raise ConfigError("focal and capital city must differ")
    cfg.check_files()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "synth":
        from . import synth

        years = [int(y) for y in _split(args.years)]
        cfg_path = synth.write_dataset(args.dest, n_firms=args.firms, n_links=args.links,
                                       n_cities=args.cities, years=years, seed=args.seed)
        print(cfg_path)
        return EXIT_OK
    try:
        cfg = _resolve_config(args)
        pipe = Pipeline(cfg)
        stages = STAGES if args.command == "run" else (args.command,)
        for stage in stages:
            result = getattr(pipe, stage)(args.year)
            if stage == "validate":
                print(json.dumps(result, sort_keys=True))
        pipe.write_run_info()
        pipe.write_manifest()
    except (ConfigError, ingest.IngestError, netgraph.UnknownCityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except MissingStage as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except ca_mod.CAError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE if exc.code == "DEGENERATE" else EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
