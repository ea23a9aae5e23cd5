"""Top-level harness checks, one pass/fail line each."""

from collections import Counter

from repvote import BallotFormat
from repvote.personas import import_ai_ballots

import harness_support
from harness_support import survey_instance, survey_template, ten_voter_roster
from persona_harness import GROUP_ORDER, MockEndpoint, generate

TEMPERATURE_GRID = [0.4, 0.2, 0.0]
RUNS_PER_TEMP = 20
FORMATS = [BallotFormat.APPROVAL, BallotFormat.CUMULATIVE]


def check(name: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    suffix = f" ({detail})" if detail else ""
    harness_support.ACCEPTANCE_LINES.append(f"{name}: {status}{suffix}")
    assert passed, f"{name}: {status}{suffix}"


def _run(tmp_path, tag):
    out = tmp_path / f"ai{tag}.jsonl"
    rej = tmp_path / f"rejects{tag}.jsonl"
    result = generate(
        ten_voter_roster(),
        survey_instance(),
        FORMATS,
        MockEndpoint(survey_instance()),
        TEMPERATURE_GRID,
        RUNS_PER_TEMP,
        out,
        rej,
        survey_template(),
        list(GROUP_ORDER),
        max_workers=4,
    )
    return result, out, rej


def test_mock_generation_validity(tmp_path):
    result, out, rej = _run(tmp_path, "")

    import json

    lines = [json.loads(line) for line in out.read_text().splitlines()]
    per_cell = Counter((l["voter_id"], l["format"]) for l in lines)
    grid_ok = (
        len(per_cell) == 10 * len(FORMATS)
        and set(per_cell.values()) == {len(TEMPERATURE_GRID) * RUNS_PER_TEMP}
    )
    check(
        "temperature grid coverage",
        grid_ok,
        f"{len(per_cell)} voter-format cells, every one with exactly "
        f"{len(TEMPERATURE_GRID) * RUNS_PER_TEMP} lines "
        f"({len(TEMPERATURE_GRID)} temperatures x {RUNS_PER_TEMP} runs)",
    )

    imported = import_ai_ballots(out, ten_voter_roster(), survey_instance())
    clean = not imported.rejected and imported.attached == len(lines)
    check(
        "emitted lines import cleanly",
        clean,
        f"{imported.attached}/{len(lines)} non-reject lines attached, "
        f"{len(imported.rejected)} rejected on import "
        f"({result.rejected} routed to the rejects file at generation time)",
    )

    rerun, out2, rej2 = _run(tmp_path, "2")
    identical = (
        out.read_bytes() == out2.read_bytes() and rej.read_bytes() == rej2.read_bytes()
    )
    check(
        "mock rerun byte-identical",
        identical,
        f"{len(out.read_bytes())} output bytes and rejects file both match",
    )
