# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast

from pathlib import Path
from typing import Callable

import pytest

from coreason_ghast.exceptions import ConfigError, IoError
from coreason_ghast.schemas import AssertionReport, Event, EventKind, Violation
from coreason_ghast.treegraph import TreeGraph
from coreason_ghast.utils.formats import (
    fmt_id,
    format_event_log,
    format_risks,
    format_rows,
    format_snapshot,
    load_snapshot,
    parse_event_log,
    parse_id,
    parse_queries,
    parse_report,
    parse_risks,
    parse_rows,
    parse_snapshot,
    parse_timeline,
    read_event_log,
    read_json,
    read_text,
    report_payload,
    write_event_log,
    write_json,
    write_snapshot,
    write_text,
)

GraphOf = Callable[..., TreeGraph]


class TestDigests:
    def test_hex(self) -> None:
        """Digests are 16 lowercase hex digits."""
        assert fmt_id(255) == "00000000000000ff"
        assert parse_id("00000000000000ff") == 255

    def test_bad_digest(self) -> None:
        """Non-hex digests name their line."""
        with pytest.raises(ConfigError) as exc:
            parse_id("xyz", line=7)
        assert exc.value.line == 7


class TestSnapshot:
    def test_round_trip(self, graph_of: GraphOf, tmp_path: Path) -> None:
        """A written snapshot reloads to the same graph, weights included."""
        g = graph_of((0, None), (1, 0), (2, 0), (3, 1), weights={2: 60})
        path = write_snapshot(g, tmp_path / "out" / "graph.txt")
        again = load_snapshot(path.read_text())
        assert list(again) == list(g)
        assert again.weights() == g.weights()
        assert again.pivot() == g.pivot()
        assert again.block(3).parent == 1

    def test_format(self, graph_of: GraphOf) -> None:
        """Genesis has no parent and blocks without references print a dash."""
        text = format_snapshot(graph_of((0, None), (1, 0)))
        first, second = text.splitlines()
        assert first == "0000000000000000 - - honest 0 1"
        assert second.startswith("0000000000000001 0000000000000000 - ")

    def test_field_count(self) -> None:
        """Short lines are reported with their line number."""
        text = "0000000000000000 - - honest 0 1\n0000000000000001 0000000000000000 -\n"
        with pytest.raises(ConfigError) as exc:
            parse_snapshot(text)
        assert exc.value.line == 2

    def test_bad_entry(self) -> None:
        """Unknown creators are configuration errors too."""
        with pytest.raises(ConfigError) as exc:
            parse_snapshot("\n0000000000000000 - - nobody 0 1\n")
        assert exc.value.line == 2


class TestEventLog:
    def test_round_trip(self, tmp_path: Path) -> None:
        """Events survive a write and read."""
        events = [
            Event(round=0, block=5, kind=EventKind.HGEN_RLS),
            Event(round=1, block=5, kind=EventKind.ARVL),
            Event(round=1, block=9, kind=EventKind.MGEN),
        ]
        path = write_event_log(events, tmp_path / "events.log")
        assert read_event_log(path) == events
        assert format_event_log(events).splitlines()[0] == "0 hGenRls 0000000000000005"

    @pytest.mark.parametrize("text, line", [("0 hGenRls\n", 1), ("0 Arvl 00\n1 teleport 01\n", 2)])
    def test_errors(self, text: str, line: int) -> None:
        """Malformed events name their line."""
        with pytest.raises(ConfigError) as exc:
            parse_event_log(text)
        assert exc.value.line == line

    def test_missing_file(self, tmp_path: Path) -> None:
        """Unreadable logs raise IoError."""
        with pytest.raises(IoError):
            read_event_log(tmp_path / "absent.log")


class TestQueries:
    def test_parse(self) -> None:
        """Five or six fields per line; eta_w defaults to 600."""
        queries = parse_queries("# m n theta t beta [eta_w]\n100 600 20000 200 0.1\n\n10 5 1000 30 0.3 60  # small\n")
        assert len(queries) == 2
        assert queries[0].eta_w == 600
        assert (queries[1].m, queries[1].n, queries[1].t, queries[1].eta_w) == (10, 5, 30, 60)
        assert queries[1].beta == pytest.approx(0.3)

    @pytest.mark.parametrize(
        "text, line",
        [("1 2 3\n", 1), ("1 2 3 4 0.1\n1 2 3 4 0.7\n", 2), ("10 5 10 20 0.1\n", 1), ("a b c d e\n", 1)],
    )
    def test_errors(self, text: str, line: int) -> None:
        """Bad field counts, out-of-range values and splits beyond theta name their line."""
        with pytest.raises(ConfigError) as exc:
            parse_queries(text)
        assert exc.value.line == line

    def test_risks(self) -> None:
        """Risks print in scientific notation, one per line."""
        text = format_risks([1.0, 2.5e-7])
        assert text == "1.000000000000e+00\n2.500000000000e-07\n"
        assert parse_risks(text) == [1.0, 2.5e-7]


class TestTables:
    def test_rows(self) -> None:
        """None cells are written empty and read back as None."""
        text = format_rows([{"a": 1, "b": None}, {"a": 2, "b": 0.5}], ["a", "b"])
        assert text.splitlines() == ["a,b", "1,", "2,0.5"]
        assert parse_rows(text) == [{"a": "1", "b": None}, {"a": "2", "b": "0.5"}]

    @pytest.mark.parametrize("text", ["x-1", "5", "3-y", "1-2;-"])
    def test_bad_timeline(self, text: str) -> None:
        """A pivot span must be `entered-left` or `entered-`."""
        with pytest.raises(ConfigError, match="bad pivot span"):
            parse_timeline(text)

    def test_timeline(self) -> None:
        """Empty cells mean the block never reached the pivot chain."""
        assert parse_timeline("") == []
        assert parse_timeline("3-7;9-") == [(3, 7), (9, None)]

    def test_json(self, tmp_path: Path) -> None:
        """JSON is written with sorted keys into missing directories."""
        path = write_json({"b": 1, "a": [1, 2]}, tmp_path / "nested" / "x.json")
        assert read_json(path) == {"a": [1, 2], "b": 1}
        assert path.read_text().index('"a"') < path.read_text().index('"b"')

    def test_bad_json(self, tmp_path: Path) -> None:
        """Broken JSON reports line and column."""
        path = write_text('{\n  "a": ,\n}\n', tmp_path / "bad.json")
        with pytest.raises(ConfigError) as exc:
            read_json(path)
        assert exc.value.line == 2

    def test_io_errors(self, tmp_path: Path) -> None:
        """Unwritable and unreadable paths raise IoError."""
        blocker = write_text("x", tmp_path / "file")
        with pytest.raises(IoError):
            write_text("y", blocker / "child.txt")
        with pytest.raises(IoError):
            read_text(tmp_path / "absent.txt")


class TestReport:
    def test_payload(self) -> None:
        """Reports carry per-invariant counts and reload without them."""
        report = AssertionReport(
            events_checked=5,
            violations=[Violation(event_index=2, invariant_name="chain_margin", detail="x")],
        )
        payload = report_payload(report)
        assert payload["counts"] == {"chain_margin": 1}
        assert payload["ok"] is False
        assert parse_report(payload) == report
