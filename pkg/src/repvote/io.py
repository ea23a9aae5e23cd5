"""File boundaries: election files, trait rosters, tabular reports.

Election files use the semicolon-separated public participatory-budgeting
convention: a META section of key;value lines, a PROJECTS section, and a
VOTES section, each introduced by its bare header line. Published files load
unmodified where their ballot types overlap ours; unknown META keys are kept
in a pass-through map.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .model import (
    Ballot,
    BallotFormat,
    ElectionInstance,
    HUMAN_SOURCE,
    ParseError,
    Project,
    RepvoteError,
    Violation,
    VoterRecord,
    validate_ballot,
)
from .recovery import RecoveryCell

SCHEMA_VERSION = 1

CELL_COLUMNS = (
    "model_name",
    "rule",
    "turnout_fraction",
    "representation_fraction",
    "consistency_abstained",
    "consistency_with_ai",
    "recovery",
    "seed",
)


class CountMismatchError(RepvoteError):
    """META declares a different count than the body delivers."""


class DuplicateVoterError(RepvoteError):
    pass


class MissingHeaderError(RepvoteError):
    pass


@dataclass(frozen=True)
class ElectionDiagnostic:
    line_number: int
    code: str
    message: str


@dataclass(frozen=True)
class ParsedElection:
    instance: ElectionInstance
    ballots: tuple[Ballot, ...]
    meta: Mapping[str, str]
    diagnostics: tuple[ElectionDiagnostic, ...] = ()


# META keys with first-class meaning; everything else passes through.
_FORMAT_KEYS = {"vote_type", "ballot_format"}
_INT_KEYS = {
    "max_points": "score_max",
    "score_max": "score_max",
    "max_sum_points": "cumulative_points",
    "cumulative_points": "cumulative_points",
    "min_length": "cumulative_min_projects",
    "cumulative_min_projects": "cumulative_min_projects",
}


def _meta_int(key: str, raw: str, line_number: int) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ParseError(line_number, f"META {key} must be an integer, got {raw!r}")


def _split_sections(lines: Sequence[str]) -> dict[str, list[tuple[int, str]]]:
    """Group numbered lines under their section header."""
    sections: dict[str, list[tuple[int, str]]] = {}
    current: list[tuple[int, str]] | None = None
    for number, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            continue
        if line.strip() in ("META", "PROJECTS", "VOTES"):
            name = line.strip()
            if name in sections:
                raise ParseError(number, f"duplicate section {name}")
            current = sections.setdefault(name, [])
            continue
        if current is None:
            raise ParseError(number, "content before any section header")
        current.append((number, line))
    for required in ("META", "PROJECTS", "VOTES"):
        if required not in sections:
            raise ParseError(len(lines) or 1, f"missing section {required}")
    return sections


def _header_index(
    header_line: tuple[int, str], required: Sequence[str]
) -> dict[str, int]:
    number, line = header_line
    columns = [c.strip() for c in line.split(";")]
    index = {name: i for i, name in enumerate(columns)}
    for name in required:
        if name not in index:
            raise ParseError(number, f"header must name column {name!r}")
    return index


def _parse_vote_entries(
    number: int,
    fmt: BallotFormat,
    vote_cell: str,
    points_cell: str | None,
) -> dict[str, int]:
    ids = [p.strip() for p in vote_cell.split(",") if p.strip()]
    if fmt in (BallotFormat.SINGLE, BallotFormat.APPROVAL):
        return {pid: 1 for pid in ids}
    if points_cell is None or not points_cell.strip():
        raise ParseError(number, f"{fmt.value} vote needs a points column")
    points = [p.strip() for p in points_cell.split(",")]
    if len(points) != len(ids):
        raise ParseError(
            number, f"{len(ids)} project(s) but {len(points)} point value(s)"
        )
    entries: dict[str, int] = {}
    for pid, point in zip(ids, points):
        try:
            entries[pid] = int(point)
        except ValueError:
            raise ParseError(number, f"points for {pid} must be integers, got {point!r}")
    return entries


def parse_election(path: str | Path, strict: bool = True) -> ParsedElection:
    """Parse a semicolon-separated election file.

    Strict mode raises on the first invalid ballot; lenient mode drops the
    ballot and records a diagnostic with its 1-based line number. Structural
    damage (bad sections, unreadable META, count mismatches) raises in both
    modes.
    """
    text = Path(path).read_text(encoding="utf-8")
    sections = _split_sections(text.splitlines())

    meta: dict[str, str] = {}
    budget: int | None = None
    fmt: BallotFormat | None = None
    instance_kwargs: dict[str, int] = {}
    declared: dict[str, int] = {}
    for position, (number, line) in enumerate(sections["META"]):
        key, sep, value = line.partition(";")
        if not sep:
            raise ParseError(number, "META lines are key;value")
        key = key.strip()
        value = value.strip()
        if position == 0 and (key, value) == ("key", "value"):
            continue  # conventional section header
        if key == "budget":
            budget = _meta_int(key, value, number)
        elif key in _FORMAT_KEYS:
            try:
                fmt = BallotFormat.parse(value)
            except ValueError as exc:
                raise ParseError(number, str(exc))
        elif key in _INT_KEYS:
            instance_kwargs[_INT_KEYS[key]] = _meta_int(key, value, number)
        elif key in ("num_projects", "num_votes"):
            declared[key] = _meta_int(key, value, number)
        else:
            meta[key] = value
    meta_line = sections["META"][0][0] if sections["META"] else 1
    if budget is None:
        raise ParseError(meta_line, "META must declare budget")
    if fmt is None:
        raise ParseError(meta_line, "META must declare vote_type")

    project_rows = sections["PROJECTS"]
    if not project_rows:
        raise ParseError(1, "PROJECTS section is empty")
    pindex = _header_index(project_rows[0], ("project_id", "cost"))
    name_col = pindex.get("name")
    projects: list[Project] = []
    seen_projects: set[str] = set()
    for number, line in project_rows[1:]:
        cells = [c.strip() for c in line.split(";")]
        if len(cells) <= max(pindex["project_id"], pindex["cost"]):
            raise ParseError(number, "project row is missing columns")
        pid = cells[pindex["project_id"]]
        if pid in seen_projects:
            raise ParseError(number, f"duplicate project id {pid}")
        seen_projects.add(pid)
        cost = _meta_int("cost", cells[pindex["cost"]], number)
        name = cells[name_col] if name_col is not None and name_col < len(cells) else pid
        projects.append(Project(id=pid, name=name, cost=cost))

    if "num_projects" in declared and declared["num_projects"] != len(projects):
        raise CountMismatchError(
            f"META num_projects={declared['num_projects']} "
            f"but PROJECTS has {len(projects)} rows"
        )

    instance = ElectionInstance(
        projects=tuple(projects),
        budget=budget,
        ballot_format=fmt,
        **instance_kwargs,
    )

    vote_rows = sections["VOTES"]
    if not vote_rows:
        raise ParseError(1, "VOTES section is empty")
    vindex = _header_index(vote_rows[0], ("voter_id", "vote"))
    points_col = vindex.get("points")
    ballots: list[Ballot] = []
    diagnostics: list[ElectionDiagnostic] = []
    seen_voters: set[str] = set()
    body_rows = 0
    for number, line in vote_rows[1:]:
        body_rows += 1
        cells = [c.strip() for c in line.split(";")]
        if len(cells) <= vindex["vote"]:
            raise ParseError(number, "vote row is missing columns")
        voter_id = cells[vindex["voter_id"]]
        if voter_id in seen_voters:
            raise ParseError(number, f"duplicate voter id {voter_id}")
        seen_voters.add(voter_id)
        points_cell = (
            cells[points_col]
            if points_col is not None and points_col < len(cells)
            else None
        )
        try:
            entries = _parse_vote_entries(number, fmt, cells[vindex["vote"]], points_cell)
        except ParseError as exc:
            if strict:
                raise
            diagnostics.append(ElectionDiagnostic(number, "parse_error", str(exc)))
            continue
        ballot = Ballot(voter_id=voter_id, format=fmt, entries=entries)
        violations = validate_ballot(ballot, instance)
        if violations:
            first: Violation = violations[0]
            if strict:
                raise ParseError(number, f"{first.code}: {first.message}")
            diagnostics.append(
                ElectionDiagnostic(number, first.code, first.message)
            )
            continue
        ballots.append(ballot)

    if "num_votes" in declared and declared["num_votes"] != body_rows:
        raise CountMismatchError(
            f"META num_votes={declared['num_votes']} but VOTES has {body_rows} rows"
        )

    return ParsedElection(
        instance=instance,
        ballots=tuple(ballots),
        meta=meta,
        diagnostics=tuple(diagnostics),
    )


def write_election(
    instance: ElectionInstance,
    ballots: Iterable[Ballot],
    path: str | Path,
    extra_meta: Mapping[str, str] | None = None,
) -> None:
    """Write the canonical election file; parse_election round-trips it."""
    ballots = list(ballots)
    lines = ["META", "key;value"]
    lines.append(f"budget;{instance.budget}")
    lines.append(f"vote_type;{instance.ballot_format.value}")
    lines.append(f"num_projects;{len(instance.projects)}")
    lines.append(f"num_votes;{len(ballots)}")
    if instance.ballot_format is BallotFormat.SCORE:
        lines.append(f"max_points;{instance.score_max}")
    if instance.ballot_format is BallotFormat.CUMULATIVE:
        lines.append(f"max_sum_points;{instance.cumulative_points}")
        lines.append(f"min_length;{instance.cumulative_min_projects}")
    for key, value in (extra_meta or {}).items():
        lines.append(f"{key};{value}")
    lines.append("PROJECTS")
    lines.append("project_id;cost;name")
    for project in instance.projects:
        lines.append(f"{project.id};{project.cost};{project.name}")
    lines.append("VOTES")
    with_points = instance.ballot_format in (BallotFormat.SCORE, BallotFormat.CUMULATIVE)
    lines.append("voter_id;vote;points" if with_points else "voter_id;vote")
    for ballot in ballots:
        ordered = sorted(ballot.entries, key=instance.presentation_index)
        vote = ",".join(ordered)
        if with_points:
            points = ",".join(str(ballot.entries[pid]) for pid in ordered)
            lines.append(f"{ballot.voter_id};{vote};{points}")
        else:
            lines.append(f"{ballot.voter_id};{vote}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def parse_traits(path: str | Path) -> dict[str, dict[str, str]]:
    """Read a trait roster CSV: first column voter_id, one row per voter.

    Values stay verbatim strings; empty cells mean the trait is missing.
    """
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingHeaderError(f"{path}: empty file")
        if not header or header[0].strip() != "voter_id":
            raise MissingHeaderError(
                f"{path}: first header column must be voter_id, got {header[:1]!r}"
            )
        keys = [k.strip() for k in header[1:]]
        traits: dict[str, dict[str, str]] = {}
        for row in reader:
            if not row or not any(cell.strip() for cell in row):
                continue
            voter_id = row[0].strip()
            if voter_id in traits:
                raise DuplicateVoterError(f"{path}: duplicate voter_id {voter_id}")
            values: dict[str, str] = {}
            for key, cell in zip(keys, row[1:]):
                if cell != "":
                    values[key] = cell
            traits[voter_id] = values
    return traits


def write_traits(
    traits: Mapping[str, Mapping[str, str]],
    path: str | Path,
    columns: Sequence[str] | None = None,
) -> None:
    if columns is None:
        keys: set[str] = set()
        for values in traits.values():
            keys.update(values)
        columns = sorted(keys)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["voter_id", *columns])
        for voter_id in traits:
            row = [voter_id] + [traits[voter_id].get(key, "") for key in columns]
            writer.writerow(row)


def build_roster(
    ballots: Iterable[Ballot],
    traits: Mapping[str, Mapping[str, str]] | None = None,
    source: str = HUMAN_SOURCE,
) -> list[VoterRecord]:
    """Join ballots with trait rows into voter records.

    Voters appear in ballot order; trait-only voters (no ballot) follow in
    sorted order so abstention models can still score them.
    """
    traits = traits or {}
    records: list[VoterRecord] = []
    seen: set[str] = set()
    for ballot in ballots:
        if ballot.voter_id in seen:
            raise DuplicateVoterError(f"duplicate ballot for voter {ballot.voter_id}")
        seen.add(ballot.voter_id)
        records.append(
            VoterRecord(
                voter_id=ballot.voter_id,
                traits=dict(traits.get(ballot.voter_id, {})),
                ballots={source: {ballot.format: ballot}},
            )
        )
    for voter_id in sorted(traits):
        if voter_id not in seen:
            records.append(
                VoterRecord(voter_id=voter_id, traits=dict(traits[voter_id]), ballots={})
            )
    return records


def format_rational(value: Fraction | float | int | None) -> str:
    """Fixed 6-fractional-digit decimal string; None becomes empty."""
    if value is None:
        return ""
    if isinstance(value, float):
        value = Fraction(value).limit_denominator(10**12)
    quantum = Decimal("0.000001")
    as_decimal = Decimal(value.numerator) / Decimal(value.denominator)
    return str(as_decimal.quantize(quantum, rounding=ROUND_HALF_EVEN))


def _cell_row(cell: RecoveryCell) -> dict[str, object]:
    return {
        "model_name": cell.model_name,
        "rule": cell.rule,
        "turnout_fraction": format_rational(cell.turnout_fraction),
        "representation_fraction": format_rational(cell.representation_fraction),
        "consistency_abstained": format_rational(cell.consistency_abstained),
        "consistency_with_ai": format_rational(cell.consistency_with_ai),
        "recovery": format_rational(cell.recovery),
        "seed": cell.seed,
    }


def _format_value(value: object) -> object:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (Fraction, float)):
        return format_rational(value)
    return value


def write_report(
    rows: Sequence[RecoveryCell] | Sequence[Mapping[str, object]],
    path: str | Path,
    fmt: str = "csv",
    columns: Sequence[str] | None = None,
    kind: str = "rows",
) -> None:
    """Write tabular results as CSV or versioned JSON with stable columns.

    RecoveryCell sequences get the fixed 8-column layout; generic mapping
    rows need explicit ``columns`` unless every row shares one key order.
    Rationals are serialized as 6-fractional-digit decimal strings.
    """
    rows = list(rows)
    if rows and isinstance(rows[0], RecoveryCell):
        columns = list(CELL_COLUMNS)
        rows = [_cell_row(cell) for cell in rows]
        kind = "recovery_cells"
    elif columns is None:
        if rows:
            columns = list(rows[0].keys())
        else:
            columns = []
    formatted = [
        {name: _format_value(row.get(name)) for name in columns} for row in rows
    ]
    if fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(columns)
            for row in formatted:
                writer.writerow([row[name] for name in columns])
    elif fmt == "json":
        payload = {
            "schema_version": SCHEMA_VERSION,
            "kind": kind,
            "columns": list(columns),
            "rows": formatted,
        }
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, ensure_ascii=False, indent=2)
            handle.write("\n")
    else:
        raise ValueError(f"unknown report format {fmt!r}; use csv or json")


def read_report(path: str | Path) -> dict[str, object]:
    """Load a JSON report; rejects unknown schema versions."""
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported report schema_version {version!r}")
    return payload
