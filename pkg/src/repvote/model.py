"""Shared domain types: election instances, ballots, voters, outcomes.

Everything here is an immutable value object; modules higher up the stack
(aggregation, consistency, recovery, ...) treat these as read-only and are
safe to evaluate in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping


class RepvoteError(Exception):
    """Base class for all library errors."""


class UnknownProjectError(RepvoteError):
    """A ballot references a project id that is not in the instance."""


class FormatViolationError(RepvoteError):
    """A ballot violates the constraints of its declared format."""

    def __init__(self, violations: Iterable["Violation"]):
        self.violations = tuple(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class UnderivableDirectionError(RepvoteError):
    """Requested ballot derivation is not strictly expressiveness-reducing."""


class ParseError(RepvoteError):
    """A boundary file is malformed; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class BallotFormat(str, Enum):
    SINGLE = "single"
    APPROVAL = "approval"
    SCORE = "score"
    CUMULATIVE = "cumulative"

    @classmethod
    def parse(cls, token: str) -> "BallotFormat":
        """Map external spellings (election files, JSONL) onto the enum."""
        aliases = {
            "single": cls.SINGLE,
            "single_choice": cls.SINGLE,
            "singlechoice": cls.SINGLE,
            "choose-1": cls.SINGLE,
            "approval": cls.APPROVAL,
            "score": cls.SCORE,
            "scoring": cls.SCORE,
            "cumulative": cls.CUMULATIVE,
        }
        try:
            return aliases[token.strip().lower()]
        except KeyError:
            raise ValueError(f"unknown ballot format {token!r}") from None


@dataclass(frozen=True)
class Project:
    id: str
    name: str
    cost: int

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("project id must be non-empty")
        if self.cost < 0:
            raise ValueError(f"project {self.id}: cost must be >= 0")


@dataclass(frozen=True)
class ElectionInstance:
    """Projects in presentation order, a budget, and the ballot format in use.

    ``score_max`` bounds Score weights; ``cumulative_points`` and
    ``cumulative_min_projects`` constrain Cumulative ballots (sum of weights,
    minimum number of distinct projects).
    """

    projects: tuple[Project, ...]
    budget: int
    ballot_format: BallotFormat
    score_max: int = 5
    cumulative_points: int = 10
    cumulative_min_projects: int = 3
    _by_id: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "projects", tuple(self.projects))
        if not self.projects:
            raise ValueError("instance needs at least one project")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.score_max < 1:
            raise ValueError("score_max must be >= 1")
        if not self.cumulative_points >= self.cumulative_min_projects >= 1:
            raise ValueError("need cumulative_points >= cumulative_min_projects >= 1")
        by_id = {}
        for index, project in enumerate(self.projects):
            if project.id in by_id:
                raise ValueError(f"duplicate project id {project.id!r}")
            by_id[project.id] = (index, project)
        object.__setattr__(self, "_by_id", by_id)

    @property
    def project_ids(self) -> tuple[str, ...]:
        return tuple(p.id for p in self.projects)

    def has_project(self, project_id: str) -> bool:
        return project_id in self._by_id

    def project(self, project_id: str) -> Project:
        try:
            return self._by_id[project_id][1]
        except KeyError:
            raise UnknownProjectError(project_id) from None

    def cost(self, project_id: str) -> int:
        return self.project(project_id).cost

    def presentation_index(self, project_id: str) -> int:
        try:
            return self._by_id[project_id][0]
        except KeyError:
            raise UnknownProjectError(project_id) from None


@dataclass(frozen=True)
class Ballot:
    """One voter's expressed choice: project id -> integer weight.

    Absent projects carry implicit weight 0 everywhere downstream.
    """

    voter_id: str
    format: BallotFormat
    entries: Mapping[str, int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", dict(self.entries))

    def weight(self, project_id: str) -> int:
        return self.entries.get(project_id, 0)


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


def validate_ballot(ballot: Ballot, instance: ElectionInstance) -> list[Violation]:
    """Check a ballot against its format's constraints.

    Returns the (possibly empty) list of violated constraints rather than
    raising, so lenient parsers can collect diagnostics. ``ensure_valid_ballot``
    is the raising variant.
    """
    violations: list[Violation] = []
    for project_id in ballot.entries:
        if not instance.has_project(project_id):
            violations.append(
                Violation("unknown_project", f"project {project_id!r} not in instance")
            )
    entries = ballot.entries
    fmt = ballot.format
    if fmt is BallotFormat.SINGLE:
        if len(entries) != 1:
            violations.append(
                Violation("single_entry_count", f"expected exactly 1 entry, got {len(entries)}")
            )
        if any(w != 1 for w in entries.values()):
            violations.append(Violation("single_weight", "single-choice weight must be 1"))
    elif fmt is BallotFormat.APPROVAL:
        if not entries:
            violations.append(Violation("approval_empty", "approval ballot needs >= 1 entry"))
        if any(w != 1 for w in entries.values()):
            violations.append(Violation("approval_weight", "approval weights must all be 1"))
    elif fmt is BallotFormat.SCORE:
        if not entries:
            violations.append(Violation("score_empty", "score ballot needs >= 1 entry"))
        bad = {p: w for p, w in entries.items() if not 1 <= w <= instance.score_max}
        if bad:
            violations.append(
                Violation("score_range", f"weights outside [1, {instance.score_max}]: {bad}")
            )
    elif fmt is BallotFormat.CUMULATIVE:
        if any(w < 1 for w in entries.values()):
            violations.append(Violation("cumulative_weight", "cumulative weights must be >= 1"))
        total = sum(entries.values())
        if total != instance.cumulative_points:
            violations.append(
                Violation(
                    "cumulative_sum",
                    f"weights sum to {total}, expected {instance.cumulative_points}",
                )
            )
        if len(entries) < instance.cumulative_min_projects:
            violations.append(
                Violation(
                    "cumulative_min_projects",
                    f"{len(entries)} projects scored, need >= {instance.cumulative_min_projects}",
                )
            )
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unhandled format {fmt}")
    return violations


def ensure_valid_ballot(ballot: Ballot, instance: ElectionInstance) -> None:
    """Raise UnknownProjectError / FormatViolationError on the first problem."""
    violations = validate_ballot(ballot, instance)
    if not violations:
        return
    unknown = [v for v in violations if v.code == "unknown_project"]
    if unknown:
        raise UnknownProjectError(unknown[0].message)
    raise FormatViolationError(violations)


# Strictly expressiveness-reducing derivations only. Approval -> SingleChoice is
# deliberately not derivable: an approval ballot carries no intensity to break
# ties with, and the source data never needed it.
_DERIVABLE = {
    (BallotFormat.CUMULATIVE, BallotFormat.APPROVAL),
    (BallotFormat.CUMULATIVE, BallotFormat.SINGLE),
    (BallotFormat.SCORE, BallotFormat.APPROVAL),
    (BallotFormat.SCORE, BallotFormat.SINGLE),
}


def derive_ballot(
    ballot: Ballot, target_format: BallotFormat, instance: ElectionInstance
) -> Ballot:
    """Project a weighted ballot down to a less expressive format.

    Approval target: every positively scored project at weight 1. SingleChoice
    target: the highest-weight project, ties broken by earliest presentation
    order in the instance. Deriving a ballot to its own format is the
    identity, which makes repeated derivation idempotent.
    """
    if target_format is ballot.format:
        return ballot
    if (ballot.format, target_format) not in _DERIVABLE:
        raise UnderivableDirectionError(
            f"cannot derive {target_format.value} from {ballot.format.value}"
        )
    scored = {p: w for p, w in ballot.entries.items() if w > 0}
    if not scored:
        raise FormatViolationError(
            [Violation("empty_source", "source ballot has no positive weights")]
        )
    if target_format is BallotFormat.APPROVAL:
        return Ballot(ballot.voter_id, BallotFormat.APPROVAL, {p: 1 for p in scored})
    top = max(scored.values())
    winner = min(
        (p for p, w in scored.items() if w == top),
        key=instance.presentation_index,
    )
    return Ballot(ballot.voter_id, BallotFormat.SINGLE, {winner: 1})


@dataclass(frozen=True)
class VoterRecord:
    """A voter: id, trait map (values kept as raw strings), and ballots.

    ``ballots`` is keyed by source label ("human" or a model name), then by
    ballot format. Sparse by design: a voter need not have every combination.
    """

    voter_id: str
    traits: Mapping[str, str] = field(default_factory=dict)
    ballots: Mapping[str, Mapping[BallotFormat, Ballot]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "traits", dict(self.traits))
        object.__setattr__(
            self, "ballots", {src: dict(fmts) for src, fmts in self.ballots.items()}
        )

    def get_ballot(self, source: str, fmt: BallotFormat) -> Ballot | None:
        return self.ballots.get(source, {}).get(fmt)

    def with_ballot(self, source: str, ballot: Ballot) -> "VoterRecord":
        """Functional update; the record itself stays immutable."""
        merged = {src: dict(fmts) for src, fmts in self.ballots.items()}
        merged.setdefault(source, {})[ballot.format] = ballot
        return VoterRecord(self.voter_id, self.traits, merged)


HUMAN_SOURCE = "human"


@dataclass(frozen=True)
class Outcome:
    """Result of one aggregation rule: winners in selection order.

    ``support`` covers every project in the instance (zero included) so that
    support ranks are well-defined for losers too.
    """

    rule: str
    winners: tuple[str, ...]
    support: Mapping[str, int]
    spent: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "winners", tuple(self.winners))
        object.__setattr__(self, "support", dict(self.support))
        if len(set(self.winners)) != len(self.winners):
            raise ValueError("winners must be distinct")

    @property
    def winner_set(self) -> frozenset[str]:
        return frozenset(self.winners)
