import math

import numpy as np
import pytest

from ownnet.ingest import OwnershipLink
from ownnet.metrics import (
    SECTIONS, LinkForce, SectorMatrix, UnknownDivisionError, aggregate_city_forces, city_pair_matrix,
    compute_forces, link_force, load_division_table, nace_section, sector_matrix, top_links, write_flows,
)

from conftest import firm, snapshot


def force_of(share, turnover):
    firms = {"A": firm("A", city="X"), "B": firm("B", city="Y", turnover=turnover)}
    return link_force(OwnershipLink("A", "B", share), firms)


def test_full_share_is_turnover():
    assert force_of(100.0, 1291788.0).force == 1291788.0


def test_linearity_examples():
    assert force_of(50.0, 1000.0).force == 500.0
    assert force_of(34.96, 17102.0).force == pytest.approx(5978.86, abs=5e-3)


def test_missing_turnover_and_cities():
    assert force_of(50.0, None) is None
    firms = {"A": firm("A", city=None, country="FR"), "B": firm("B", city=None, country="DE")}
    lf = link_force(OwnershipLink("A", "B", 10.0), firms)
    assert (lf.origin_city, lf.dest_city) == ("UNASSIGNED:FR", "UNASSIGNED:DE")


def lf(dest, force, origin="O"):
    return LinkForce("a", "b", 100.0, force, origin, dest)


def test_aggregate_examples():
    assert aggregate_city_forces([lf("X", 500.0)]) == {"X": 500.0}
    assert aggregate_city_forces([lf("X", 100.0), lf("X", 200.0), lf("Y", 50.0)]) == {"X": 300.0, "Y": 50.0}
    assert aggregate_city_forces([lf("X", 1.0, "P")], by="origin") == {"P": 1.0}
    with pytest.raises(ValueError):
        aggregate_city_forces([], by="both")


def test_aggregate_matches_naive_sum_and_is_homogeneous():
    rng = np.random.default_rng(7)
    forces = [lf(f"C{rng.integers(20)}", float(v)) for v in rng.lognormal(8, 2, 10_000)]
    got = aggregate_city_forces(forces)
    naive = {}
    for f in forces:
        naive[f.dest_city] = naive.get(f.dest_city, 0.0) + f.force
    assert got.keys() == naive.keys()
    for k in got:
        assert got[k] == pytest.approx(naive[k], rel=1e-12)
    scaled = aggregate_city_forces([lf(f.dest_city, 3.0 * f.force) for f in forces])
    for k in got:
        assert scaled[k] == pytest.approx(3.0 * got[k], rel=1e-12)
    rng.shuffle(forces)
    assert aggregate_city_forces(forces) == got


def test_compute_forces_splits_missing():
    s = snapshot([firm("A", city="X"), firm("B", city="Y", turnover=None), firm("C", city="Y")],
                 [("A", "B", 50), ("A", "C", 50)])
    t = compute_forces(s)
    assert [f.owned_id for f in t.forces] == ["C"]
    assert t.missing_by_city() == {"Y": 1}


def test_city_pairs_directed(tmp_path):
    s = snapshot([firm("A", city="X"), firm("B", city="Y", turnover=10.0)], [("A", "B", 50), ("B", "A", 100)])
    flows = city_pair_matrix(s, {"X", "Y"})
    assert [(f.origin_city, f.dest_city, f.total_force) for f in flows] == [("X", "Y", 5.0), ("Y", "X", 1000.0)]
    assert city_pair_matrix(snapshot([firm("A", city="X"), firm("B")], [("A", "B", 5)]), {"X"}) == []
    write_flows(flows, tmp_path / "f.csv")
    assert (tmp_path / "f.csv").read_text().splitlines()[1] == "X,Y,2016,1,5.0,"


def test_internal_flag():
    s = snapshot([firm("A", city="X"), firm("B", city="X")], [("A", "B", 50)])
    (f,) = city_pair_matrix(s, ["X"])
    assert f.flags == "INTERNAL"


def test_nace_sections():
    assert nace_section("6420") == "K"
    assert nace_section("9411") == "S"
    assert nace_section("0111") == "A"
    assert nace_section("9900") == "U"
    with pytest.raises(UnknownDivisionError):
        nace_section("0400")


def test_division_table_totality():
    table = load_division_table()
    gaps = {4, 34, 40, 44, 48, 54, 57, 67, 76, 83, 89}
    assert set(table) == set(range(1, 100)) - gaps
    assert set(table.values()) == set(SECTIONS)


def test_division_table_override(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("division,section\n25,B\n")
    assert nace_section("2511", load_division_table(p)) == "B"
    p.write_text("division,section\n25,Z\n")
    with pytest.raises(ValueError):
        load_division_table(p)


def test_sector_single_cell_and_row_sum():
    s = snapshot([firm("A"), firm("B", city="X", nace4="2511")], [("A", "B", 50)], year=2010)
    m = sector_matrix([s], ["X"])
    assert m.rows == [("X", 2010)]
    assert np.count_nonzero(m.cells) == 1 and m.cells[0, SECTIONS.index("C")] == 500.0
    s2 = snapshot([firm("A"), firm("B", city="X", nace4="2511"), firm("C", city="X", nace4="6420", turnover=7.0)],
                  [("A", "B", 50), ("A", "C", 100)], year=2010)
    m2 = sector_matrix([s2], ["X"])
    assert m2.cells.sum() == math.fsum(f.force for f in compute_forces(s2).forces)


def test_sector_exclusions_and_zero_warning(caplog):
    s = snapshot([firm("A"), firm("B", city="X", turnover=None), firm("C", city="X", nace4="0400")],
                 [("A", "B", 50), ("A", "C", 50)], year=2013)
    m = sector_matrix([s], ["X"])
    assert m.all_zero
    assert m.excluded == {2013: {"missing_turnover": 1, "unknown_division": 1}}
    assert "all zero" in caplog.text


def test_sector_matrix_csv_round_trip(tmp_path):
    s = snapshot([firm("A"), firm("B", city="X", turnover=0.1)], [("A", "B", 30)], year=2010)
    m = sector_matrix([s], ["X", "Y"])
    m.to_csv(tmp_path / "s.csv")
    back = SectorMatrix.from_csv(tmp_path / "s.csv")
    assert back.rows == m.rows and np.array_equal(back.cells, m.cells)


def test_sector_matrix_matches_triple_loop():
    rng = np.random.default_rng(11)
    cities = ["C0", "C1", "C2", "C3"]
    snaps = []
    for year in (2010, 2013, 2016):
        firms = [firm(f"F{i}", city=[*cities, None][rng.integers(5)], nace4=f"{[10, 25, 64, 94, 47][rng.integers(5)]:02d}00",
                      turnover=float(rng.integers(1, 10_000))) for i in range(60)]
        pairs = {(int(a), int(b)) for a, b in rng.integers(0, 60, size=(150, 2)) if a != b}
        snaps.append(snapshot(firms, [(f"F{a}", f"F{b}", float(rng.integers(1, 101))) for a, b in pairs], year))
    m = sector_matrix(snaps, cities)
    for r, (c, y) in enumerate(m.rows):
        s = next(x for x in snaps if x.year == y)
        for j, sec in enumerate(SECTIONS):
            want = math.fsum(l.share_pct / 100 * s.firms[l.owned_id].turnover for l in s.links
                             if s.firms[l.owned_id].city_id == c and nace_section(s.firms[l.owned_id].nace4) == sec)
            assert m.cells[r, j] == want


def test_top_links():
    forces = [LinkForce(o, d, 100.0, f, "X", "Y") for o, d, f in [("b", "1", 5.0), ("a", "2", 5.0), ("a", "1", 9.0)]]
    assert [(f.owner_id, f.owned_id) for f in top_links(forces, "X", "Y", 5)] == [("a", "1"), ("a", "2"), ("b", "1")]
    assert top_links(forces, "Y", "X", 5) == []
    with pytest.raises(ValueError):
        top_links(forces, "X", "Y", 0)


def test_top_links_sort_oracle():
    rng = np.random.default_rng(5)
    forces = [LinkForce(f"o{rng.integers(10)}", f"d{i}", 1.0, float(rng.integers(0, 20)), "X", "Y") for i in range(100)]
    full = sorted(forces, key=lambda f: (-f.force, f.owner_id, f.owned_id))
    assert top_links(forces, "X", "Y", 10) == full[:10]
