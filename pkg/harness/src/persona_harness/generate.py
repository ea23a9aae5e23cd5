"""Batch ballot generation: prompts out, exchange JSONL in.

Every (voter, format, temperature, run) cell produces exactly one line, in
the output file when the reply parses and validates, in the rejects file
otherwise. Requests may run concurrently; line order is always the cell
order, so a given input produces byte-identical files.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from repvote import Ballot, BallotFormat, ElectionInstance, VoterRecord, validate_ballot

from .endpoint import Endpoint, EndpointError
from .parsing import ParseFailure, extract_entries
from .prompts import PromptTemplate, TraitGroup, render_prompt


@dataclass(frozen=True)
class _Cell:
    voter_index: int
    voter_id: str
    fmt_index: int
    fmt: BallotFormat
    temp_index: int
    temperature: float
    run_index: int

    @property
    def order(self) -> tuple[int, int, int, int]:
        return (self.voter_index, self.fmt_index, self.temp_index, self.run_index)


@dataclass
class GenerateResult:
    output_path: Path
    rejects_path: Path
    written: int = 0
    rejected: int = 0
    reject_reasons: list[str] = field(default_factory=list)


def generate(
    roster: Sequence[VoterRecord],
    instance: ElectionInstance,
    formats: Sequence[BallotFormat],
    endpoint: Endpoint,
    temperatures: Sequence[float],
    runs_per_temp: int,
    output_path: str | Path,
    rejects_path: str | Path,
    template: PromptTemplate,
    trait_groups: Iterable[TraitGroup | str],
    source: str = "ai",
    parse_retries: int = 2,
    max_workers: int = 1,
) -> GenerateResult:
    if runs_per_temp < 1:
        raise ValueError("runs_per_temp must be >= 1")
    if not temperatures:
        raise ValueError("at least one temperature is required")
    if not formats:
        raise ValueError("at least one ballot format is required")
    groups = tuple(trait_groups)

    prompts = {
        (v.voter_id, fmt): render_prompt(v, instance, fmt, groups, template)
        for v in roster
        for fmt in formats
    }
    cells = [
        _Cell(vi, v.voter_id, fi, fmt, ti, float(temp), run)
        for vi, v in enumerate(roster)
        for fi, fmt in enumerate(formats)
        for ti, temp in enumerate(temperatures)
        for run in range(runs_per_temp)
    ]

    def work(cell: _Cell):
        prompt = prompts[(cell.voter_id, cell.fmt)]
        reply = error = None
        for attempt in range(parse_retries + 1):
            context = {
                "voter_id": cell.voter_id,
                "format": cell.fmt.value,
                "temperature": cell.temperature,
                "run_index": cell.run_index,
                "attempt": attempt,
            }
            try:
                reply = endpoint.complete(prompt, cell.temperature, context)
            except EndpointError as exc:
                reply, error = None, f"endpoint: {exc}"
                continue
            try:
                entries = extract_entries(reply, instance, cell.fmt)
            except ParseFailure as exc:
                error = f"parse: {exc}"
                continue
            violations = validate_ballot(Ballot(cell.voter_id, cell.fmt, entries), instance)
            if violations:
                error = "invalid: " + "; ".join(str(v) for v in violations)
                continue
            return ("ok", entries)
        return ("reject", {"reply": reply, "error": error})

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            outcomes = list(pool.map(work, cells))
    else:
        outcomes = [work(cell) for cell in cells]

    result = GenerateResult(Path(output_path), Path(rejects_path))
    with open(result.output_path, "w", encoding="utf-8", newline="\n") as out, open(
        result.rejects_path, "w", encoding="utf-8", newline="\n"
    ) as rejects:
        for cell, (status, detail) in sorted(
            zip(cells, outcomes), key=lambda pair: pair[0].order
        ):
            if status == "ok":
                record = {
                    "voter_id": cell.voter_id,
                    "source": source,
                    "format": cell.fmt.value,
                    "entries": {p: detail[p] for p in sorted(detail)},
                    "meta": {
                        "temperature": cell.temperature,
                        "run_index": cell.run_index,
                    },
                }
                out.write(json.dumps(record, ensure_ascii=False) + "\n")
                result.written += 1
            else:
                record = {
                    "voter_id": cell.voter_id,
                    "format": cell.fmt.value,
                    "temperature": cell.temperature,
                    "run_index": cell.run_index,
                    "reply": detail["reply"],
                    "error": detail["error"],
                }
                rejects.write(json.dumps(record, ensure_ascii=False) + "\n")
                result.rejected += 1
                result.reject_reasons.append(str(detail["error"]))
    return result
