import json

import pytest
from hypothesis import given, settings, strategies as st

from ownnet import ingest
from ownnet.ingest import Firm, IngestError, OwnershipLink, parse_firms, parse_fua, parse_links

from conftest import square, write

HEADER = "id,name,lon,lat,country,nace4,turnover\n"


def good_row(i):
    return f"F{i},Firm {i},-2.2,53.4,GB,2511,{100 + i}\n"


def test_lat_out_of_range_is_quarantined(tmp_path):
    p = write(tmp_path / "f.csv", HEADER + "A,a,0.0,91.0,GB,2511,1\n")
    firms, q = parse_firms(p)
    assert firms == {}
    assert [(r.line, r.reason) for r in q.records] == [(2, "COORD_RANGE")]


def test_nace_9411_accepted(tmp_path):
    p = write(tmp_path / "f.csv", HEADER + "A,a,0.0,51.0,GB,9411,42771.52\n")
    firms, q = parse_firms(p)
    assert firms["A"].nace4 == "9411"
    assert firms["A"].turnover == 42771.52
    assert q.n_rejected == 0


def test_duplicate_id_quarantines_later_line(tmp_path):
    rows = [good_row(i) for i in range(1, 8)]
    rows.insert(3, "DUP,first,0,0,GB,2511,1\n")   # file line 5
    rows.insert(7, "DUP,second,0,0,GB,2511,2\n")  # file line 9
    p = write(tmp_path / "f.csv", HEADER + "".join(rows))
    firms, q = parse_firms(p)
    assert firms["DUP"].name == "first"
    assert [(r.line, r.reason) for r in q.records] == [(9, "DUP_ID")]


@pytest.mark.parametrize("row,reason", [
    ("A,a,0,0,GB,2511", "FIELD_COUNT"),
    (",a,0,0,GB,2511,1", "MISSING_ID"),
    ("A,a,x,0,GB,2511,1", "BAD_COORD"),
    ("A,a,nan,0,GB,2511,1", "BAD_COORD"),
    ("A,a,181,0,GB,2511,1", "COORD_RANGE"),
    ("A,a,0,0,GBR,2511,1", "BAD_COUNTRY"),
    ("A,a,0,0,GB,251,1", "BAD_NACE"),
    ("A,a,0,0,GB,0011,1", "BAD_NACE"),
    ("A,a,0,0,GB,2511,-5", "BAD_TURNOVER"),
    ("A,a,0,0,GB,2511,abc", "BAD_TURNOVER"),
])
def test_firm_reason_codes(tmp_path, row, reason):
    firms, q = parse_firms(write(tmp_path / "f.csv", HEADER + row + "\n"))
    assert firms == {}
    assert q.records[0].reason == reason
    assert q.records[0].raw_row == row


def test_missing_turnover_is_none(tmp_path):
    firms, _ = parse_firms(write(tmp_path / "f.csv", HEADER + "A,a,0,0,gb,2511,\n"))
    assert firms["A"].turnover is None
    assert firms["A"].country == "GB"


def test_missing_column_is_fatal(tmp_path):
    with pytest.raises(IngestError, match="nace4"):
        parse_firms(write(tmp_path / "f.csv", "id,name,lon,lat,country,turnover\n"))


def test_unreadable_file(tmp_path):
    with pytest.raises(IngestError):
        parse_firms(tmp_path / "nope.csv")


def test_schema_mapping(tmp_path):
    p = write(tmp_path / "f.csv", "bvd,nm,x,y,ctry,nace,rev\nA,a,1,2,FR,6420,10\n")
    schema = dict(id="bvd", name="nm", lon="x", lat="y", country="ctry", nace4="nace", turnover="rev")
    firms, _ = parse_firms(p, schema)
    assert firms["A"] == Firm("A", "a", 1.0, 2.0, "FR", "6420", 10.0)


FIRMS = {k: Firm(k, k, 0.0, 0.0, "GB", "2511", 1.0) for k in "ABC"}
LHEAD = "owner_id,owned_id,share_pct\n"


@pytest.mark.parametrize("row,reason", [
    ("A,A,50", "SELF_LOOP"),
    ("A,X,10", "DANGLING"),
    ("X,A,10", "DANGLING"),
    ("A,B,0", "SHARE_RANGE"),
    ("A,B,100.5", "SHARE_RANGE"),
    ("A,B,-1", "SHARE_RANGE"),
    ("A,B,lots", "BAD_SHARE"),
    ("A,,10", "MISSING_ID"),
    ("A,B", "FIELD_COUNT"),
])
def test_link_reason_codes(tmp_path, row, reason):
    links, q = parse_links(write(tmp_path / "l.csv", LHEAD + row + "\n"), FIRMS)
    assert links == []
    assert q.records[0].reason == reason


def test_fractional_share_accepted(tmp_path):
    links, q = parse_links(write(tmp_path / "l.csv", LHEAD + "A,B,34.96\nB,C,100%\n"), FIRMS)
    assert links == [OwnershipLink("A", "B", 34.96), OwnershipLink("B", "C", 100.0)]
    assert q.n_rejected == 0


def test_duplicate_link_keeps_first(tmp_path):
    links, q = parse_links(write(tmp_path / "l.csv", LHEAD + "A,B,10\nA,B,20\n"), FIRMS)
    assert links == [OwnershipLink("A", "B", 10.0)]
    assert q.reason_counts() == {"DUP_LINK": 1}


def test_quarantine_csv(tmp_path):
    _, q = parse_links(write(tmp_path / "l.csv", LHEAD + "A,A,5\n"), FIRMS)
    assert q.to_csv(tmp_path / "q.csv") == 1
    assert (tmp_path / "q.csv").read_text() == "line,reason,raw_row\n2,SELF_LOOP,\"A,A,5\"\n"


def geojson(tmp_path, *features):
    doc = {"type": "FeatureCollection", "features": [
        {"type": "Feature", "properties": {"id": fid}, "geometry": geom} for fid, geom in features]}
    return write(tmp_path / "b.geojson", json.dumps(doc))


def test_unit_square_area(tmp_path):
    fuas, rej = parse_fua(geojson(tmp_path, ("U", {"type": "Polygon", "coordinates": [square(0, 0)]})))
    assert rej == []
    assert len(fuas) == 1 and fuas[0].area == 1.0


def test_open_ring_rejected(tmp_path):
    ring = list(square(0, 0))[:-1]
    fuas, rej = parse_fua(geojson(tmp_path, ("U", {"type": "Polygon", "coordinates": [ring]})))
    assert fuas == []
    assert [(r.feature_id, r.reason) for r in rej] == [("U", "RING_OPEN")]


def test_multipolygon_two_parts(tmp_path):
    geom = {"type": "MultiPolygon", "coordinates": [[square(0, 0)], [square(5, 5, 2.0)]]}
    fuas, _ = parse_fua(geojson(tmp_path, ("M", geom)))
    (m,) = fuas
    assert len(m.parts) == 2
    assert m.area == 1.0 + 4.0


def test_hole_reduces_area(tmp_path):
    geom = {"type": "Polygon", "coordinates": [square(0, 0, 4.0), square(1, 1)]}
    (f,), _ = parse_fua(geojson(tmp_path, ("H", geom)))
    assert f.outer_area == 16.0
    assert f.area == 15.0


def test_bad_features(tmp_path):
    fuas, rej = parse_fua(geojson(
        tmp_path,
        ("Z", {"type": "Polygon", "coordinates": [[(0, 0), (1, 1), (2, 2), (0, 0)]]}),
        ("S", {"type": "Polygon", "coordinates": [[(0, 0), (1, 0), (0, 0)]]}),
        ("P", {"type": "Point", "coordinates": [0, 0]}),
        ("OK", {"type": "Polygon", "coordinates": [square(0, 0)]}),
        ("OK", {"type": "Polygon", "coordinates": [square(3, 0)]}),
    ))
    assert [f.fua_id for f in fuas] == ["OK"]
    assert [r.reason for r in rej] == ["ZERO_AREA", "RING_SHORT", "BAD_GEOMETRY", "DUP_ID"]


def test_not_a_feature_collection(tmp_path):
    with pytest.raises(IngestError):
        parse_fua(write(tmp_path / "b.geojson", '{"type": "Feature"}'))


# property: writing then reading a clean collection is the identity

ids = st.text("ABCDEFGHIJ0123456789", min_size=1, max_size=6)
finite = st.floats(-179.9, 179.9, allow_nan=False)
firm_st = st.builds(
    lambda fid, lon, lat, c, d, t: Firm(fid, f"n {fid}", lon, lat, c, f"{d:02d}11", t),
    ids, finite, st.floats(-89.9, 89.9), st.sampled_from(["GB", "DE", "US"]),
    st.integers(1, 99), st.one_of(st.none(), st.floats(0, 1e12, allow_nan=False)),
)


@settings(max_examples=60, deadline=None)
@given(st.lists(firm_st, max_size=30, unique_by=lambda f: f.firm_id), st.data())
def test_round_trip(tmp_path_factory, firms, data):
    d = tmp_path_factory.mktemp("rt")
    ingest.write_firms(firms, d / "f.csv")
    got, q = parse_firms(d / "f.csv")
    assert list(got.values()) == firms and q.n_rejected == 0
    links = []
    if len(firms) >= 2:
        pairs = data.draw(st.lists(st.tuples(st.integers(0, len(firms) - 1), st.integers(0, len(firms) - 1))
                                   .filter(lambda p: p[0] != p[1]), unique=True, max_size=40))
        shares = data.draw(st.lists(st.floats(0.01, 100.0), min_size=len(pairs), max_size=len(pairs)))
        links = [OwnershipLink(firms[a].firm_id, firms[b].firm_id, s) for (a, b), s in zip(pairs, shares)]
    ingest.write_links(links, d / "l.csv")
    got_links, ql = parse_links(d / "l.csv", got)
    assert got_links == links and ql.n_rejected == 0


# property: corrupting rows never loses a row: accepted + quarantined == input rows

CORRUPTIONS = [
    lambda r: r.replace(",53.4,", ",95.0,"),
    lambda r: r.replace(",GB,", ",G1,"),
    lambda r: r.replace(",2511,", ",25x1,"),
    lambda r: r.rstrip("\n") + ",extra\n",
    lambda r: "," + r.split(",", 1)[1],
    lambda r: r.replace(",-2.2,", ",west,"),
]


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 60), st.lists(st.tuples(st.integers(0, 59), st.integers(0, len(CORRUPTIONS) - 1)), max_size=30))
def test_conservation_under_corruption(tmp_path_factory, n, hits):
    rows = [good_row(i) for i in range(n)]
    bad = set()
    for i, k in hits:
        if i < n:
            rows[i] = CORRUPTIONS[k](rows[i])
            bad.add(i)
    p = write(tmp_path_factory.mktemp("c") / "f.csv", HEADER + "".join(rows))
    firms, q = parse_firms(p)
    assert len(firms) + q.n_rejected == n == q.n_rows
    assert len(firms) == n - len(bad)
    assert sorted(r.line for r in q.records) == sorted(i + 2 for i in bad)
