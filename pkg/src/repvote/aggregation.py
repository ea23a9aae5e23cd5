"""Winner-selection rules: majority, utilitarian greedy, method of equal
shares, and cost-scaled sequential Phragmen, plus the controlled-winners
truncation used to compare proportional rules against greedy at equal
cardinality.

Endowment and load arithmetic is exact rational (gmpy2.mpq when available,
fractions.Fraction otherwise), so tie detection never hinges on float
tolerance. Support scores stay integers.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .model import (
    Ballot,
    BallotFormat,
    ElectionInstance,
    Outcome,
    RepvoteError,
)

try:
    from gmpy2 import mpq as _rat
except ImportError:
    _rat = Fraction


class EmptyBallotSetError(RepvoteError):
    """An aggregation rule was invoked with no ballots."""


class MixedFormatsError(RepvoteError):
    """Ballots passed to a single tally do not share one format."""


class FormatMismatchError(RepvoteError):
    """A rule received ballots in a format it does not accept."""


class UnknownRuleError(RepvoteError):
    pass


class TieBreak(str, Enum):
    PROJECT_ID_LEX = "lex"
    PRESENTATION_ORDER = "presentation"


class AggregationRule(str, Enum):
    MAJORITY = "majority"
    UTILITARIAN_GREEDY = "greedy"
    EQUAL_SHARES = "equal_shares"
    PHRAGMEN = "phragmen"

    @classmethod
    def parse(cls, token: str) -> "AggregationRule":
        aliases = {
            "majority": cls.MAJORITY,
            "greedy": cls.UTILITARIAN_GREEDY,
            "utilitarian_greedy": cls.UTILITARIAN_GREEDY,
            "utilitarian-greedy": cls.UTILITARIAN_GREEDY,
            "equal_shares": cls.EQUAL_SHARES,
            "equal-shares": cls.EQUAL_SHARES,
            "mes": cls.EQUAL_SHARES,
            "phragmen": cls.PHRAGMEN,
        }
        try:
            return aliases[token.strip().lower()]
        except KeyError:
            raise UnknownRuleError(f"unknown aggregation rule {token!r}") from None


@dataclass(frozen=True)
class AggregationConfig:
    rule: AggregationRule
    controlled_winner_count: int | None = None
    tie_break: TieBreak = TieBreak.PROJECT_ID_LEX

    def __post_init__(self) -> None:
        if self.controlled_winner_count is not None and self.controlled_winner_count < 1:
            raise ValueError("controlled_winner_count must be >= 1 when set")


def _tie_key(instance: ElectionInstance, tie_break: TieBreak):
    if tie_break is TieBreak.PRESENTATION_ORDER:
        return instance.presentation_index
    return lambda project_id: project_id


def support_scores(ballots: list[Ballot], instance: ElectionInstance) -> dict[str, int]:
    """Tally support per project over all instance projects (zeros included).

    SingleChoice/Approval: count of ballots naming the project. Score or
    Cumulative: sum of weights.
    """
    formats = {b.format for b in ballots}
    if len(formats) > 1:
        raise MixedFormatsError(f"mixed ballot formats: {sorted(f.value for f in formats)}")
    support = {project_id: 0 for project_id in instance.project_ids}
    counting = not formats or formats <= {BallotFormat.SINGLE, BallotFormat.APPROVAL}
    for ballot in ballots:
        for project_id, weight in ballot.entries.items():
            if weight <= 0 or project_id not in support:
                continue
            support[project_id] += 1 if counting else weight
    return support


def _supporters(ballots: list[Ballot], instance: ElectionInstance) -> dict[str, list[int]]:
    # Positive weight = support, uniform across supporters (weight-proportional
    # cost sharing is deliberately out of scope).
    out: dict[str, list[int]] = {project_id: [] for project_id in instance.project_ids}
    for index, ballot in enumerate(ballots):
        for project_id, weight in ballot.entries.items():
            if weight > 0 and project_id in out:
                out[project_id].append(index)
    return out


def majority(
    ballots: list[Ballot],
    instance: ElectionInstance,
    tie_break: TieBreak = TieBreak.PROJECT_ID_LEX,
) -> Outcome:
    """Single winner with the highest support; SingleChoice ballots only."""
    if not ballots:
        raise EmptyBallotSetError("majority needs at least one ballot")
    wrong = {b.format for b in ballots} - {BallotFormat.SINGLE}
    if wrong:
        raise FormatMismatchError(
            f"majority accepts single-choice ballots only, got {sorted(f.value for f in wrong)}"
        )
    support = support_scores(ballots, instance)
    key = _tie_key(instance, tie_break)
    winner = min(instance.project_ids, key=lambda p: (-support[p], key(p)))
    return Outcome(
        rule=AggregationRule.MAJORITY.value,
        winners=(winner,),
        support=support,
        spent=instance.cost(winner),
    )


def utilitarian_greedy(
    ballots: list[Ballot],
    instance: ElectionInstance,
    tie_break: TieBreak = TieBreak.PROJECT_ID_LEX,
) -> Outcome:
    """Descending-support greedy: select whatever still fits, skip the rest.

    Unaffordable projects are skipped, not terminal; iteration continues until
    every supported project has been considered. Projects with zero support
    are never selected.
    """
    if not ballots:
        raise EmptyBallotSetError("utilitarian_greedy needs at least one ballot")
    support = support_scores(ballots, instance)
    key = _tie_key(instance, tie_break)
    order = sorted(
        (p for p in instance.project_ids if support[p] > 0),
        key=lambda p: (-support[p], key(p)),
    )
    winners: list[str] = []
    remaining = instance.budget
    for project_id in order:
        cost = instance.cost(project_id)
        if cost <= remaining:
            winners.append(project_id)
            remaining -= cost
    return Outcome(
        rule=AggregationRule.UTILITARIAN_GREEDY.value,
        winners=tuple(winners),
        support=support,
        spent=instance.budget - remaining,
    )


def _min_payment_cap(cost: int, budgets_ascending: list):
    """Minimal per-supporter cap c with sum(min(c, budget)) = cost, else None."""
    paid = 0
    n = len(budgets_ascending)
    for k, budget in enumerate(budgets_ascending):
        cap = (cost - paid) / _rat(n - k)
        if cap <= budget:
            return cap
        paid = paid + budget
    return None


def equal_shares_with_payments(
    ballots: list[Ballot],
    instance: ElectionInstance,
    tie_break: TieBreak = TieBreak.PROJECT_ID_LEX,
    exhaust_with_greedy: bool = False,
):
    """Method of equal shares; returns (Outcome, payments).

    Every voter starts with budget/n. A project is bought when its supporters
    can jointly cover its cost; the rule repeatedly picks the project with the
    minimal per-supporter payment cap rho, charging each supporter
    min(rho, remaining endowment). ``payments`` maps voter index ->
    project id -> exact rational amount paid.

    ``exhaust_with_greedy`` optionally spends the leftover (never charged to
    endowments) on remaining projects in greedy order; off by default because
    completion would blur the proportionality comparison.
    """
    if not ballots:
        raise EmptyBallotSetError("equal_shares needs at least one ballot")
    support = support_scores(ballots, instance)
    supporters = _supporters(ballots, instance)
    key = _tie_key(instance, tie_break)
    n_voters = len(ballots)
    endowment = _rat(instance.budget) / n_voters
    remaining = [endowment] * n_voters
    payments: dict[int, dict[str, object]] = {}

    # Lazy min-heap over (rho, tie, project): stale rho values are lower
    # bounds (budgets only shrink), so an entry whose recomputed key is <=
    # the top of the heap is the true minimum.
    heap = []
    for project_id in instance.project_ids:
        group = supporters[project_id]
        if not group:
            continue  # empty supporter set is never affordable
        rho = _min_payment_cap(instance.cost(project_id), sorted(remaining[v] for v in group))
        if rho is not None:
            heap.append((rho, key(project_id), project_id))
    heapq.heapify(heap)

    winners: list[str] = []
    spent = 0
    while heap:
        _, tie, project_id = heapq.heappop(heap)
        group = supporters[project_id]
        rho = _min_payment_cap(instance.cost(project_id), sorted(remaining[v] for v in group))
        if rho is None:
            continue  # permanently unaffordable: endowments only decrease
        if heap and (rho, tie) > (heap[0][0], heap[0][1]):
            heapq.heappush(heap, (rho, tie, project_id))
            continue
        for v in group:
            pay = rho if rho <= remaining[v] else remaining[v]
            remaining[v] = remaining[v] - pay
            payments.setdefault(v, {})[project_id] = pay
        winners.append(project_id)
        spent += instance.cost(project_id)

    if exhaust_with_greedy:
        order = sorted(
            (p for p in instance.project_ids if support[p] > 0 and p not in set(winners)),
            key=lambda p: (-support[p], key(p)),
        )
        leftover = instance.budget - spent
        for project_id in order:
            cost = instance.cost(project_id)
            if cost <= leftover:
                winners.append(project_id)
                leftover -= cost
                spent += cost

    outcome = Outcome(
        rule=AggregationRule.EQUAL_SHARES.value,
        winners=tuple(winners),
        support=support,
        spent=spent,
    )
    return outcome, payments


def equal_shares(
    ballots: list[Ballot],
    instance: ElectionInstance,
    tie_break: TieBreak = TieBreak.PROJECT_ID_LEX,
    exhaust_with_greedy: bool = False,
) -> Outcome:
    outcome, _ = equal_shares_with_payments(
        ballots, instance, tie_break=tie_break, exhaust_with_greedy=exhaust_with_greedy
    )
    return outcome


def phragmen(
    ballots: list[Ballot],
    instance: ElectionInstance,
    tie_break: TieBreak = TieBreak.PROJECT_ID_LEX,
) -> Outcome:
    """Cost-scaled sequential Phragmen.

    Supporters accrue virtual load; each round selects the affordable project
    minimizing t(p) = (cost(p) + sum of supporter loads) / |supporters| and
    resets its supporters' loads to t(p). Unaffordable projects are skipped as
    in greedy; the run stops when nothing affordable remains.
    """
    if not ballots:
        raise EmptyBallotSetError("phragmen needs at least one ballot")
    support = support_scores(ballots, instance)
    supporters = _supporters(ballots, instance)
    key = _tie_key(instance, tie_break)
    loads = [_rat(0)] * len(ballots)
    remaining = instance.budget
    selected: set[str] = set()
    winners: list[str] = []
    while True:
        best = None
        for project_id in instance.project_ids:
            group = supporters[project_id]
            if project_id in selected or not group:
                continue
            cost = instance.cost(project_id)
            if cost > remaining:
                continue
            t = (cost + sum(loads[v] for v in group)) / _rat(len(group))
            entry = (t, key(project_id), project_id)
            if best is None or entry < best:
                best = entry
        if best is None:
            break
        t, _, project_id = best
        for v in supporters[project_id]:
            loads[v] = t
        selected.add(project_id)
        winners.append(project_id)
        remaining -= instance.cost(project_id)
    return Outcome(
        rule=AggregationRule.PHRAGMEN.value,
        winners=tuple(winners),
        support=support,
        spent=instance.budget - remaining,
    )


def controlled_winners(
    outcome: Outcome,
    k: int,
    instance: ElectionInstance,
    tie_break: TieBreak = TieBreak.PROJECT_ID_LEX,
) -> Outcome:
    """Keep the k winners with the highest support, preserving selection order.

    k at or above the winner count returns the outcome unchanged. The instance
    is needed to recompute spent (and for presentation-order ties).
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if k >= len(outcome.winners):
        return outcome
    key = _tie_key(instance, tie_break)
    ranked = sorted(outcome.winners, key=lambda p: (-outcome.support.get(p, 0), key(p)))
    keep = set(ranked[:k])
    winners = tuple(p for p in outcome.winners if p in keep)
    return Outcome(
        rule=outcome.rule,
        winners=winners,
        support=outcome.support,
        spent=sum(instance.cost(p) for p in winners),
    )


RULE_FUNCTIONS = {
    AggregationRule.MAJORITY: majority,
    AggregationRule.UTILITARIAN_GREEDY: utilitarian_greedy,
    AggregationRule.EQUAL_SHARES: equal_shares,
    AggregationRule.PHRAGMEN: phragmen,
}


def aggregate(
    ballots: list[Ballot], instance: ElectionInstance, config: AggregationConfig
) -> Outcome:
    """Run the configured rule, applying controlled-winners truncation if set."""
    func = RULE_FUNCTIONS[config.rule]
    outcome = func(ballots, instance, tie_break=config.tie_break)
    if config.controlled_winner_count is not None:
        outcome = controlled_winners(
            outcome, config.controlled_winner_count, instance, tie_break=config.tie_break
        )
    return outcome
