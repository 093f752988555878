# -*- coding: utf-8 -*-
import datetime
import io

import pytest

from src.core import mobility
from src.core.errors import ParseError, UnmappedCountryError

from conftest import FIXTURES


@pytest.fixture
def traces():
    return mobility.parse_checkins((FIXTURES / "t6_checkins.csv").read_text(encoding="utf-8"))


@pytest.fixture
def country_map():
    return mobility.parse_country_map((FIXTURES / "t6_country_map.csv").read_text(encoding="utf-8"))


def _day(text):
    return datetime.date.fromisoformat(text).toordinal()


def test_parse_checkins_groups_and_sorts(traces):
    assert [t.user for t in traces] == ["alice", "bob", "carol"]
    assert [t.n_points for t in traces] == [4, 4, 3]
    assert traces[2].days() == [_day("2016-01-01"), _day("2016-01-02"), _day("2016-01-04")]


def test_parse_checkins_sorts_by_date_stably():
    text = "user,date,country\nu,2016-01-02,DE\nu,2016-01-01,US\nu,2016-01-02,FR\n"
    (trace,) = mobility.parse_checkins(text)
    assert [c.country for c in trace.checkins] == ["US", "DE", "FR"]


def test_parse_checkins_empty():
    assert mobility.parse_checkins("") == []
    assert mobility.parse_checkins("user,date,country\n") == []


@pytest.mark.parametrize(
    "text,line",
    [
        ("user,date,country\nu,2016-13-01,US\n", 2),
        ("user,date,country\nu,2016-01-01\n", 2),
        ("user,date,country\nu,2016-01-01,US\n,2016-01-02,US\n", 3),
        ("name,date,country\n", 1),
    ],
)
def test_parse_checkins_errors(text, line):
    with pytest.raises(ParseError) as excinfo:
        mobility.parse_checkins(text, "checkins.csv")
    assert excinfo.value.line == line


def test_parse_country_map(country_map):
    assert country_map.lookup("US") == 5
    assert "DE" in country_map
    assert country_map.countries() == ["DE", "FR", "US"]
    with pytest.raises(UnmappedCountryError):
        country_map.lookup("JP")


def test_parse_country_map_rejects_duplicates():
    with pytest.raises(ParseError) as excinfo:
        mobility.parse_country_map("country,asn\nUS,5\nUS,6\n")
    assert excinfo.value.line == 3


def test_country_sequence_counts_first_visits(traces):
    alice, bob, carol = traces
    assert mobility.country_sequence(alice) == ["US", "DE"]
    assert mobility.country_sequence(bob) == ["DE"]
    # 回到 US 不再计数
    assert mobility.country_sequence(carol) == ["US", "FR"]


def test_as_sequence_collapses_repeats(country_map):
    trace = mobility.MobilityTrace(
        "u",
        (
            mobility.CheckIn("u", 1, "US"),
            mobility.CheckIn("u", 2, "CA"),
            mobility.CheckIn("u", 3, "DE"),
        ),
    )
    cmap = mobility.CountryAsMap({"US": 5, "CA": 5, "DE": 6})
    assert mobility.as_sequence(trace, cmap) == [5, 6]
    assert mobility.as_sequence(trace, cmap, 1) == [5]
    assert mobility.as_sequence(trace, cmap, 2) == [5]
    assert mobility.as_sequence(trace, cmap, 3) == [5, 6]


def test_daily_locations_takes_last_checkin_of_day(country_map):
    trace = mobility.MobilityTrace(
        "u",
        (
            mobility.CheckIn("u", 1, "US"),
            mobility.CheckIn("u", 1, "DE"),
            mobility.CheckIn("u", 3, "FR"),
        ),
    )
    assert mobility.daily_locations(trace, country_map) == {1: 6, 3: 4}


def test_trace_must_be_sorted():
    with pytest.raises(ValueError):
        mobility.MobilityTrace("u", (mobility.CheckIn("u", 2, "US"), mobility.CheckIn("u", 1, "US")))


def test_write_checkins_csv(traces):
    out = io.StringIO()
    mobility.write_checkins_csv(traces, out)
    assert mobility.parse_checkins(out.getvalue()) == traces
