# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast

"""Line-oriented text formats: graph snapshots, event logs, risk queries, metrics and oracle reports.

Every writer has a matching parser. Block digests are written as 16 lowercase hex
digits, `-` marks an absent field.
"""

import csv
import io
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from coreason_ghast.exceptions import ConfigError, IoError
from coreason_ghast.schemas import AssertionReport, Block, BlockId, Creator, Event, EventKind, RiskQuery
from coreason_ghast.treegraph import TableWeight, TreeGraph

_NONE = "-"


def fmt_id(b: BlockId) -> str:
    return f"{b:016x}"


def parse_id(text: str, line: int = 0) -> BlockId:
    try:
        return int(text, 16)
    except ValueError as e:
        raise ConfigError(f"bad block digest {text!r}", line=line or None) from e


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
    return path


def _read(path: Path) -> str:
    try:
        return path.read_text()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e


# -- graph snapshot -------------------------------------------------------


def format_snapshot(g: TreeGraph) -> str:
    """One block per line, `id parent refs creator born_round weight`, in insertion order."""
    out = io.StringIO()
    for bid in g:
        b = g.block(bid)
        parent = fmt_id(b.parent) if b.parent is not None else _NONE
        refs = ",".join(fmt_id(r) for r in b.refs) or _NONE
        out.write(f"{fmt_id(bid)} {parent} {refs} {b.creator.value} {b.born_round} {g.weight(bid)}\n")
    return out.getvalue()


def parse_snapshot(text: str) -> Tuple[List[Block], Dict[BlockId, int]]:
    """Blocks in file order and their weights.

    Raises:
        ConfigError: A malformed line.
    """
    blocks: List[Block] = []
    weights: Dict[BlockId, int] = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        parts = raw.split()
        if len(parts) != 6:
            raise ConfigError(f"snapshot line needs 6 fields, got {len(parts)}", line=no)
        bid = parse_id(parts[0], no)
        parent = None if parts[1] == _NONE else parse_id(parts[1], no)
        refs = () if parts[2] == _NONE else tuple(parse_id(r, no) for r in parts[2].split(","))
        try:
            blocks.append(
                Block(id=bid, parent=parent, refs=refs, creator=Creator(parts[3]), born_round=int(parts[4]))
            )
            weights[bid] = int(parts[5])
        except (ValueError, ValidationError) as e:
            raise ConfigError(f"bad snapshot entry: {e}", line=no) from e
    return blocks, weights


def load_snapshot(text: str, **graph_kwargs: Any) -> TreeGraph:
    """Rebuild a graph from a snapshot, reusing the recorded weights."""
    blocks, weights = parse_snapshot(text)
    g = TreeGraph(weight_fn=TableWeight(weights), **graph_kwargs)
    for b in blocks:
        g.insert_block(b, validate=False)
    return g


def write_snapshot(g: TreeGraph, path: Path) -> Path:
    return _write(path, format_snapshot(g))


# -- event log ------------------------------------------------------------


def format_event_log(events: Iterable[Event]) -> str:
    """One event per line: `round kind block`."""
    return "".join(f"{e.round} {e.kind.value} {fmt_id(e.block)}\n" for e in events)


def parse_event_log(text: str) -> List[Event]:
    events: List[Event] = []
    for no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        parts = raw.split()
        if len(parts) != 3:
            raise ConfigError(f"event line needs 3 fields, got {len(parts)}", line=no)
        try:
            events.append(Event(round=int(parts[0]), kind=EventKind(parts[1]), block=parse_id(parts[2], no)))
        except (ValueError, ValidationError) as e:
            raise ConfigError(f"bad event: {e}", line=no) from e
    return events


def write_event_log(events: Iterable[Event], path: Path) -> Path:
    return _write(path, format_event_log(events))


def read_event_log(path: Path) -> List[Event]:
    return parse_event_log(_read(path))


# -- risk queries ---------------------------------------------------------

QUERY_FIELDS = ("m", "n", "theta", "t", "beta", "eta_w")


def parse_queries(text: str) -> List[RiskQuery]:
    """Whitespace-separated `m n theta t beta [eta_w]` per line; '#' starts a comment."""
    queries: List[RiskQuery] = []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (5, 6):
            raise ConfigError(f"query needs 5 or 6 fields ({' '.join(QUERY_FIELDS)}), got {len(parts)}", line=no)
        try:
            values: Dict[str, Any] = dict(zip(QUERY_FIELDS, parts, strict=False))
            queries.append(RiskQuery.model_validate(values))
        except ValidationError as e:
            raise ConfigError(f"bad query: {e.errors()[0]['msg']}", line=no) from e
    return queries


def format_risks(risks: Sequence[float]) -> str:
    return "".join(f"{r:.12e}\n" for r in risks)


def parse_risks(text: str) -> List[float]:
    return [float(x) for x in text.split()]


# -- metrics --------------------------------------------------------------


PivotSpan = Tuple[int, Optional[int]]


def format_timeline(spans: Sequence[PivotSpan]) -> str:
    """`3-7;9-` for on-pivot rounds [3, 7) and from 9 on."""
    return ";".join(f"{a}-{'' if b is None else b}" for a, b in spans)


def parse_timeline(text: str) -> List[PivotSpan]:
    """Inverse of format_timeline.

    Raises:
        ConfigError: A span is not `entered-left` or `entered-`.
    """
    spans: List[PivotSpan] = []
    for item in filter(None, text.split(";")):
        start, sep, end = item.partition("-")
        try:
            if not sep:
                raise ValueError(item)
            spans.append((int(start), int(end) if end else None))
        except ValueError as e:
            raise ConfigError(f"bad pivot span {item!r}") from e
    return spans


def format_rows(rows: Sequence[Dict[str, Any]], fields: Sequence[str]) -> str:
    """CSV with a header; None becomes an empty cell."""
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=list(fields), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if row.get(k) is None else row[k]) for k in fields})
    return out.getvalue()


def parse_rows(text: str) -> List[Dict[str, Optional[str]]]:
    """Inverse of format_rows, with empty cells read back as None."""
    return [{k: (v if v != "" else None) for k, v in row.items()} for row in csv.DictReader(io.StringIO(text))]


def write_json(data: Any, path: Path) -> Path:
    return _write(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


def read_json(path: Path) -> Any:
    try:
        return json.loads(_read(path))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: {e.msg}", line=e.lineno, column=e.colno) from e


def write_text(text: str, path: Path) -> Path:
    return _write(path, text)


def read_text(path: Path) -> str:
    return _read(path)


# -- oracle report --------------------------------------------------------


def report_payload(report: AssertionReport) -> Dict[str, Any]:
    data = report.model_dump(mode="json")
    data["counts"] = report.counts()
    data["ok"] = report.ok
    return data


def parse_report(data: Dict[str, Any]) -> AssertionReport:
    return AssertionReport.model_validate({k: v for k, v in data.items() if k not in ("counts", "ok")})
