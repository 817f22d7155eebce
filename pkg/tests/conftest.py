from __future__ import annotations

from pathlib import Path

import pytest

from ownnet.ingest import Firm, FUAPart, FunctionalUrbanArea, OwnershipLink, Snapshot

FIXTURE = Path(__file__).resolve().parents[1] / "src" / "ownnet" / "data" / "fixture"
GOLDEN = Path(__file__).resolve().parent / "golden"


def square(x0, y0, side=1.0):
    return ((x0, y0), (x0 + side, y0), (x0 + side, y0 + side), (x0, y0 + side), (x0, y0))


def fua(fid, ring, country="GB", holes=()):
    return FunctionalUrbanArea(fid, fid, country, 1000, (FUAPart(tuple(ring), tuple(holes)),))


def firm(fid, city=None, country="GB", turnover=1000.0, nace4="2511", lon=0.0, lat=0.0):
    return Firm(fid, fid, lon, lat, country, nace4, turnover, city)


def snapshot(firms, links, year=2016):
    return Snapshot(year, {f.firm_id: f for f in firms}, [OwnershipLink(*l) for l in links], [])


def write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture
def fixture_dir():
    return FIXTURE


@pytest.fixture
def golden_dir():
    return GOLDEN


# --- acceptance reporting ----------------------------------------------------

_CRITERIA: dict[int, tuple[str, bool, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is None or rep.when != "call" and not (rep.when == "setup" and not rep.passed):
        return
    n, title = m.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if not rep.passed:
        detail = (detail + "; " if detail else "") + (rep.longrepr.reprcrash.message.splitlines()[0]
                                                      if hasattr(rep.longrepr, "reprcrash") else "skipped")
    _CRITERIA[n] = (title, rep.passed, detail)
    print(f"\ncriterion {n}: {'PASS' if rep.passed else 'FAIL'} {title}" + (f" ({detail})" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[n]
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
