"""Pairwise-preference consistency metrics.

A ballot induces a weak order over the instance's projects via its weights
(absent projects weigh 0). The pairwise matrix marks cell (i, j) with 1 iff i
is strictly preferred to j; ties leave both cells 0. Individual and collective
consistency count the reference's 1-cells matched by the candidate;
transitivity (same agent, two formats) counts agreeing cells, 0s included,
after binarizing both ballots. Kemeny distance counts strictly opposed pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from .model import (
    Ballot,
    BallotFormat,
    ElectionInstance,
    Outcome,
    RepvoteError,
)


class UndefinedReferenceError(RepvoteError):
    """Reference side has no decided pairs (all tied), so the ratio is 0/0."""


class SameFormatError(RepvoteError):
    """Transitivity standardization needs two different ballot formats."""


@dataclass(frozen=True)
class PairwiseMatrix:
    project_ids: tuple[str, ...]
    cells: tuple[tuple[bool, ...], ...]

    def cell(self, i: int, j: int) -> bool:
        return self.cells[i][j]

    def ones(self) -> set[tuple[int, int]]:
        return {
            (i, j)
            for i in range(len(self.project_ids))
            for j in range(len(self.project_ids))
            if self.cells[i][j]
        }


@dataclass(frozen=True)
class ConsistencyScore:
    matched_ones: int
    reference_ones: int
    value: Fraction


@dataclass(frozen=True)
class TransitivityScore:
    matched_cells: int
    total_cells: int
    value: Fraction


def _weights(ballot: Ballot, instance: ElectionInstance) -> list[int]:
    return [ballot.weight(p) for p in instance.project_ids]


def pairwise_matrix(ballot: Ballot, instance: ElectionInstance) -> PairwiseMatrix:
    """cell(i, j) = 1 iff weight(i) > weight(j); ties excluded (both 0)."""
    w = _weights(ballot, instance)
    n = len(w)
    cells = tuple(tuple(w[i] > w[j] for j in range(n)) for i in range(n))
    return PairwiseMatrix(instance.project_ids, cells)


def _matrix_consistency(
    reference: PairwiseMatrix, candidate: PairwiseMatrix
) -> ConsistencyScore:
    n = len(reference.project_ids)
    reference_ones = 0
    matched = 0
    for i in range(n):
        for j in range(n):
            if reference.cells[i][j]:
                reference_ones += 1
                if candidate.cells[i][j]:
                    matched += 1
    if reference_ones == 0:
        raise UndefinedReferenceError("reference has no strict pairwise preferences")
    return ConsistencyScore(matched, reference_ones, Fraction(matched, reference_ones))


def individual_consistency(
    reference: Ballot, candidate: Ballot, instance: ElectionInstance
) -> ConsistencyScore:
    """Share of the reference's strict pairs matched by the candidate."""
    return _matrix_consistency(
        pairwise_matrix(reference, instance), pairwise_matrix(candidate, instance)
    )


def _binary_ballot(ballot: Ballot, keep: set[str]) -> Ballot:
    return Ballot(ballot.voter_id, BallotFormat.APPROVAL, {p: 1 for p in keep})


def standardize_for_transitivity(
    a: Ballot, b: Ballot, instance: ElectionInstance
) -> tuple[Ballot, Ballot]:
    """Binarize two different-format ballots of the same agent.

    Against a SingleChoice ballot, the other side keeps only its maximum-weight
    projects; against an Approval ballot (or for the remaining weighted pair),
    every positively scored project maps to 1. Outputs are approval-shaped.
    """
    if a.format is b.format:
        raise SameFormatError(f"both ballots are {a.format.value}")

    def positives(ballot: Ballot) -> set[str]:
        return {p for p, w in ballot.entries.items() if w > 0}

    def argmax(ballot: Ballot) -> set[str]:
        top = max(ballot.entries.values())
        return {p for p, w in ballot.entries.items() if w == top}

    if BallotFormat.SINGLE in (a.format, b.format):
        reduce = argmax
    else:
        reduce = positives
    return _binary_ballot(a, reduce(a)), _binary_ballot(b, reduce(b))


def transitivity_consistency(
    a: Ballot, b: Ballot, instance: ElectionInstance
) -> TransitivityScore:
    """Agreement fraction over all off-diagonal matrix cells, 0s included."""
    bin_a, bin_b = standardize_for_transitivity(a, b, instance)
    ma = pairwise_matrix(bin_a, instance)
    mb = pairwise_matrix(bin_b, instance)
    n = len(instance.project_ids)
    total = n * (n - 1)
    if total == 0:
        raise UndefinedReferenceError("single-project instance has no project pairs")
    matched = sum(
        ma.cells[i][j] == mb.cells[i][j] for i in range(n) for j in range(n) if i != j
    )
    return TransitivityScore(matched, total, Fraction(matched, total))


def _winners_as_ballot(outcome: Outcome, instance: ElectionInstance, label: str) -> Ballot:
    return Ballot(label, BallotFormat.APPROVAL, {p: 1 for p in outcome.winners})


def collective_consistency(
    reference: Outcome, candidate: Outcome, instance: ElectionInstance
) -> ConsistencyScore:
    """Winner sets scored like approval ballots (winners 1, losers 0).

    A reference electing no project, or every project, has no decided pairs
    and raises UndefinedReferenceError.
    """
    n = len(instance.project_ids)
    if not 0 < len(reference.winners) < n:
        raise UndefinedReferenceError(
            f"reference elects {len(reference.winners)} of {n} projects; all pairs tied"
        )
    return individual_consistency(
        _winners_as_ballot(reference, instance, "reference"),
        _winners_as_ballot(candidate, instance, "candidate"),
        instance,
    )


def kemeny_distance(a: Ballot, b: Ballot, instance: ElectionInstance) -> int:
    """Count ordered pairs ranked strictly oppositely by the two ballots.

    Weak orders: a pair tied in either ballot contributes nothing. On strict
    orders this is the classic inversion count (a metric; see the property
    tests).
    """
    wa = _weights(a, instance)
    wb = _weights(b, instance)
    n = len(wa)
    return sum(
        1
        for i in range(n)
        for j in range(n)
        if wa[i] > wa[j] and wb[j] > wb[i]
    )


def mean_scores(scores: list[ConsistencyScore]) -> Fraction | None:
    """Plain mean of score values; None for an empty list."""
    if not scores:
        return None
    return sum((s.value for s in scores), Fraction(0)) / len(scores)
