"""Synthetic representative ballots and the ballot-exchange boundary.

The synthetic persona policy exists so the whole pipeline runs offline: it
maps voter traits to per-project utilities and renders them in any ballot
format. Externally generated ballots (e.g. from the LLM harness) enter through
the same JSONL exchange format that ``export_ballots`` writes.

Exchange format, one JSON object per line, UTF-8 without BOM:

    {"voter_id": str, "source": str, "format": "single|approval|score|cumulative",
     "entries": {project_id: int}, "meta": {...optional...}}
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from ._seed import derive_seed
from .abstention import MissingTraitError
from .model import (
    Ballot,
    BallotFormat,
    ElectionInstance,
    ParseError,
    RepvoteError,
    VoterRecord,
    validate_ballot,
)


class UnknownVoterError(RepvoteError):
    pass


@dataclass(frozen=True)
class PersonaPolicy:
    """Additive utility model: trait key -> project id -> affinity.

    A voter's utility for a project sums affinity * multiplier over the
    policy's traits, where the multiplier is the voter's trait value when it
    parses as a number and 1.0 otherwise (categorical presence). Gaussian
    noise with ``noise_sigma`` is seeded per (policy seed, voter, project), so
    ballots are reproducible and, at sigma 0, a pure function of the traits.
    """

    name: str
    trait_weights: Mapping[str, Mapping[str, float]]
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "trait_weights",
            {trait: dict(per_project) for trait, per_project in self.trait_weights.items()},
        )
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        for trait, per_project in self.trait_weights.items():
            for project_id, affinity in per_project.items():
                if not math.isfinite(affinity):
                    raise ValueError(f"non-finite affinity for {trait}/{project_id}")


def _trait_multiplier(raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        return 1.0


def utilities(
    voter: VoterRecord, instance: ElectionInstance, policy: PersonaPolicy
) -> dict[str, float]:
    missing = sorted(t for t in policy.trait_weights if t not in voter.traits)
    if missing:
        raise MissingTraitError([f"{voter.voter_id} (traits: {', '.join(missing)})"])
    out = {}
    for project_id in instance.project_ids:
        utility = sum(
            per_project.get(project_id, 0.0) * _trait_multiplier(voter.traits[trait])
            for trait, per_project in policy.trait_weights.items()
        )
        if policy.noise_sigma > 0:
            rng = random.Random(derive_seed(policy.seed, "noise", voter.voter_id, project_id))
            utility += rng.gauss(0.0, policy.noise_sigma)
        out[project_id] = utility
    return out


def _rank_order(util: dict[str, float], instance: ElectionInstance) -> list[str]:
    # Highest utility first; presentation order breaks float ties.
    return sorted(util, key=lambda p: (-util[p], instance.presentation_index(p)))


def _cumulative_entries(
    ordered: list[str], util: dict[str, float], instance: ElectionInstance
) -> dict[str, int]:
    points = instance.cumulative_points
    min_projects = instance.cumulative_min_projects
    if len(ordered) < min_projects:
        raise ValueError(
            f"instance has {len(ordered)} projects, cumulative needs >= {min_projects}"
        )
    positive = [p for p in ordered if util[p] > 0]
    candidates = positive if len(positive) >= min_projects else ordered[: max(min_projects, len(positive))]
    weights = [max(util[p], 0.0) for p in candidates]
    if sum(weights) <= 0:
        weights = [1.0] * len(candidates)
    total = sum(weights)

    # Largest-remainder apportionment of the point budget.
    quotas = [points * w / total for w in weights]
    allocation = [int(math.floor(q)) for q in quotas]
    shortfall = points - sum(allocation)
    by_remainder = sorted(
        range(len(candidates)), key=lambda i: (-(quotas[i] - allocation[i]), i)
    )
    for i in by_remainder[:shortfall]:
        allocation[i] += 1

    # Greedy transfer from the largest allocation until enough projects score.
    while sum(1 for a in allocation if a > 0) < min_projects:
        donor = max(range(len(candidates)), key=lambda i: allocation[i])
        receiver = next(i for i in range(len(candidates)) if allocation[i] == 0)
        allocation[donor] -= 1
        allocation[receiver] += 1
    return {p: a for p, a in zip(candidates, allocation) if a > 0}


def synth_ballot(
    voter: VoterRecord,
    instance: ElectionInstance,
    policy: PersonaPolicy,
    fmt: BallotFormat,
) -> Ballot:
    """Render the policy's utilities for one voter in the requested format.

    SingleChoice: argmax. Approval: every positive-utility project (argmax
    fallback when none is positive). Score: utilities rank-mapped onto
    [1, score_max]. Cumulative: largest-remainder point apportionment over
    positive utilities, transferred until the minimum project count holds.
    """
    util = utilities(voter, instance, policy)
    ordered = _rank_order(util, instance)
    if fmt is BallotFormat.SINGLE:
        entries = {ordered[0]: 1}
    elif fmt is BallotFormat.APPROVAL:
        approved = [p for p in ordered if util[p] > 0]
        entries = {p: 1 for p in (approved or ordered[:1])}
    elif fmt is BallotFormat.SCORE:
        n = len(ordered)
        entries = {}
        for position, project_id in enumerate(ordered):
            if n == 1:
                entries[project_id] = instance.score_max
            else:
                entries[project_id] = 1 + round(
                    (instance.score_max - 1) * (n - 1 - position) / (n - 1)
                )
    elif fmt is BallotFormat.CUMULATIVE:
        entries = _cumulative_entries(ordered, util, instance)
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unhandled format {fmt}")
    return Ballot(voter.voter_id, fmt, entries)


@dataclass(frozen=True)
class LineDiagnostic:
    line_number: int
    voter_id: str | None
    code: str
    message: str


@dataclass
class ImportResult:
    roster: list[VoterRecord]
    attached: int = 0
    rejected: list[LineDiagnostic] = field(default_factory=list)
    warnings: list[LineDiagnostic] = field(default_factory=list)


def import_ai_ballots(
    path: str | Path,
    roster: Sequence[VoterRecord],
    instance: ElectionInstance,
    on_invalid: str = "skip",
) -> ImportResult:
    """Attach exchange-file ballots to the roster under their source labels.

    Returns a new roster (records are immutable) plus per-line diagnostics.
    ``on_invalid="skip"`` collects rejects and continues; ``"fail"`` raises on
    the first bad line. A repeated (voter, source, format) key wins last and
    leaves a warning diagnostic.
    """
    if on_invalid not in ("skip", "fail"):
        raise ValueError("on_invalid must be 'skip' or 'fail'")
    by_id = {v.voter_id: v for v in roster}
    order = [v.voter_id for v in roster]
    result = ImportResult(roster=[])
    seen: set[tuple[str, str, BallotFormat]] = set()

    def reject(diag: LineDiagnostic):
        if on_invalid == "fail":
            raise ParseError(diag.line_number, f"{diag.code}: {diag.message}")
        result.rejected.append(diag)

    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                reject(LineDiagnostic(line_number, None, "parse_error", str(exc)))
                continue
            try:
                voter_id = record["voter_id"]
                source = record["source"]
                fmt = BallotFormat.parse(record["format"])
                raw_entries = record["entries"]
                if not isinstance(raw_entries, dict):
                    raise TypeError("entries must be an object")
                entries = {}
                for p, w in raw_entries.items():
                    if isinstance(w, bool) or not isinstance(w, int):
                        raise ValueError(f"weight {w!r} for {p} is not an integer")
                    entries[str(p)] = w
            except (KeyError, TypeError, ValueError, AttributeError) as exc:
                reject(LineDiagnostic(line_number, None, "schema_error", repr(exc)))
                continue
            if voter_id not in by_id:
                reject(LineDiagnostic(line_number, voter_id, "unknown_voter", voter_id))
                continue
            ballot = Ballot(voter_id, fmt, entries)
            violations = validate_ballot(ballot, instance)
            if violations:
                reject(
                    LineDiagnostic(
                        line_number,
                        voter_id,
                        "format_violation",
                        "; ".join(str(v) for v in violations),
                    )
                )
                continue
            key = (voter_id, source, fmt)
            if key in seen:
                result.warnings.append(
                    LineDiagnostic(
                        line_number, voter_id, "duplicate", f"{source}/{fmt.value} replaced"
                    )
                )
            seen.add(key)
            by_id[voter_id] = by_id[voter_id].with_ballot(source, ballot)
            result.attached += 1

    result.roster = [by_id[vid] for vid in order]
    return result


def export_ballots(
    roster: Sequence[VoterRecord],
    path: str | Path,
    sources: Sequence[str] | None = None,
    meta: Mapping[str, object] | None = None,
) -> int:
    """Write roster ballots as exchange JSONL; returns the line count.

    Lines are ordered by (voter, source, format) with sorted entry keys, so a
    given roster always serializes to identical bytes.
    """
    written = 0
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for voter in roster:
            for source in sorted(voter.ballots):
                if sources is not None and source not in sources:
                    continue
                for fmt in sorted(voter.ballots[source], key=lambda f: f.value):
                    ballot = voter.ballots[source][fmt]
                    record = {
                        "voter_id": voter.voter_id,
                        "source": source,
                        "format": fmt.value,
                        "entries": {p: ballot.entries[p] for p in sorted(ballot.entries)},
                    }
                    if meta:
                        record["meta"] = dict(meta)
                    handle.write(json.dumps(record, ensure_ascii=False, sort_keys=False))
                    handle.write("\n")
                    written += 1
    return written
