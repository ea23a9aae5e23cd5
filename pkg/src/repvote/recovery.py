"""Consistency-loss and recovery experiments.

A sweep cell fixes (abstention model, rule, turnout, representation), samples
the abstainers and their represented subset, and measures collective
consistency of the abstained and mixed outcomes against the full-turnout
outcome. Recovery = (C_mixed - C_abstained) / (1 - C_abstained): the share of
lost consistency restored by machine representatives. Random control groups of
the same abstainer count provide the baseline. Winner movements decompose each
cell into false negatives/positives that were or were not repaired.
"""

from __future__ import annotations

import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import AbstractSet, Iterable, Sequence

from ._seed import derive_seed
from .abstention import (
    AbstentionModel,
    ParticipationPlan,
    RANDOM_BASELINE,
    build_plan,
    flag_abstainers,
)
from .aggregation import (
    AggregationRule,
    RULE_FUNCTIONS,
    TieBreak,
)
from .consistency import collective_consistency
from .model import (
    Ballot,
    ElectionInstance,
    HUMAN_SOURCE,
    Outcome,
    RepvoteError,
    VoterRecord,
)


class NoLossToRecoverError(RepvoteError):
    """Abstention did not change the outcome; recovery is undefined (0/0)."""


class MissingAIBallotsError(RepvoteError):
    def __init__(self, source: str, voter_ids: Sequence[str]):
        self.voter_ids = tuple(voter_ids)
        super().__init__(
            f"{len(self.voter_ids)} voters lack a {source!r} ballot: "
            + ", ".join(self.voter_ids[:10])
            + ("..." if len(self.voter_ids) > 10 else "")
        )


class InvalidPError(RepvoteError):
    pass


@dataclass(frozen=True)
class RecoveryCell:
    model_name: str
    rule: str
    turnout_fraction: Fraction
    representation_fraction: Fraction
    consistency_abstained: Fraction
    consistency_with_ai: Fraction
    recovery: Fraction | None
    seed: int

    @property
    def no_loss(self) -> bool:
        return self.recovery is None


class MovementCategory(str, Enum):
    FALSE_NEGATIVE_ADDED_BACK = "false_negative_added_back"
    FALSE_POSITIVE_REMOVED = "false_positive_removed"
    FALSE_NEGATIVE_UNRECOVERED = "false_negative_unrecovered"
    FALSE_POSITIVE_UNREMOVED = "false_positive_unremoved"


@dataclass(frozen=True)
class WinnerMovement:
    project_id: str
    category: MovementCategory
    rank_in_reference: int


CONTROL_PREFIX = "control-"


def control_parent(model_name: str) -> str | None:
    """For a control cell name like 'control-03-of-low_trust', the model name."""
    if model_name.startswith(CONTROL_PREFIX) and "-of-" in model_name:
        return model_name.split("-of-", 1)[1]
    return None


def recovery_score(
    full: Outcome, abstained: Outcome, mixed: Outcome, instance: ElectionInstance
) -> Fraction:
    """(C_mixed - C_abstained) / (1 - C_abstained), consistency against full.

    May be negative when machine representation makes things worse. Raises
    NoLossToRecoverError when abstention lost nothing (C_abstained = 1).
    """
    c_abstained = collective_consistency(full, abstained, instance).value
    c_mixed = collective_consistency(full, mixed, instance).value
    if c_abstained == 1:
        raise NoLossToRecoverError("abstained outcome already matches the full outcome")
    return (c_mixed - c_abstained) / (1 - c_abstained)


def _human_ballots(
    roster: Sequence[VoterRecord], instance: ElectionInstance, exclude: frozenset[str]
) -> list[Ballot]:
    return [
        b
        for v in roster
        if v.voter_id not in exclude
        and (b := v.get_ballot(HUMAN_SOURCE, instance.ballot_format)) is not None
    ]


def _ai_ballots(
    roster: Sequence[VoterRecord],
    instance: ElectionInstance,
    include: frozenset[str],
    source: str,
) -> list[Ballot]:
    return [
        b
        for v in roster
        if v.voter_id in include
        and (b := v.get_ballot(source, instance.ballot_format)) is not None
    ]


def _outcome_or_empty(
    ballots: list[Ballot], rule: AggregationRule, instance: ElectionInstance, tie_break: TieBreak
) -> Outcome:
    # An empty electorate elects nothing; rules themselves treat it as an error.
    if not ballots:
        return Outcome(
            rule=rule.value,
            winners=(),
            support={p: 0 for p in instance.project_ids},
            spent=0,
        )
    return RULE_FUNCTIONS[rule](ballots, instance, tie_break=tie_break)


@dataclass(frozen=True)
class _PlanTask:
    """One (cohort, turnout, representation) grid point; evaluated per rule."""

    cell_name: str
    flagged: frozenset[str]
    turnout: Fraction
    representation: Fraction
    plan_turnout: Fraction  # what build_plan actually samples with
    seed: int


def _plan_cells(
    task: _PlanTask,
    roster: tuple[VoterRecord, ...],
    instance: ElectionInstance,
    rules: tuple[AggregationRule, ...],
    full: dict[AggregationRule, Outcome],
    ai_source: str,
    tie_break: TieBreak,
) -> list[tuple[RecoveryCell, tuple[WinnerMovement, ...]]]:
    plan = build_plan(
        roster,
        RANDOM_BASELINE,
        task.plan_turnout,
        task.representation,
        task.seed,
        flagged=set(task.flagged),
    )
    humans = _human_ballots(roster, instance, plan.abstainers)
    mixed_ballots = humans + _ai_ballots(roster, instance, plan.represented, ai_source)
    cells = []
    for rule in rules:
        abstained = _outcome_or_empty(humans, rule, instance, tie_break)
        mixed = _outcome_or_empty(mixed_ballots, rule, instance, tie_break)
        c_abstained = collective_consistency(full[rule], abstained, instance).value
        c_mixed = collective_consistency(full[rule], mixed, instance).value
        recovery = None
        if c_abstained != 1:
            recovery = (c_mixed - c_abstained) / (1 - c_abstained)
        cell = RecoveryCell(
            model_name=task.cell_name,
            rule=rule.value,
            turnout_fraction=task.turnout,
            representation_fraction=task.representation,
            consistency_abstained=c_abstained,
            consistency_with_ai=c_mixed,
            recovery=recovery,
            seed=task.seed,
        )
        movements = tuple(classify_movements(full[rule], abstained, mixed))
        cells.append((cell, movements))
    return cells


def _run_task(args) -> list[tuple[RecoveryCell, tuple[WinnerMovement, ...]]]:
    return _plan_cells(*args)


def sweep_with_movements(
    roster: Sequence[VoterRecord],
    instance: ElectionInstance,
    rules: Sequence[AggregationRule],
    models: Sequence[AbstentionModel],
    turnouts: Sequence[Fraction | float],
    representations: Sequence[Fraction | float],
    controls: int,
    master_seed: int,
    ai_source: str,
    tie_break: TieBreak = TieBreak.PROJECT_ID_LEX,
    workers: int = 1,
    restrict_to: AbstractSet[str] | None = None,
    cohort_label: str | None = None,
) -> tuple[list[RecoveryCell], list[tuple[RecoveryCell, WinnerMovement]]]:
    """Full factorial grid over rules x models x turnouts x representations.

    Every abstention-model grid point is paired with ``controls`` random
    control cells whose abstainer group is a uniform roster sample of equal
    size. Consistency is always measured against the full-turnout outcome.
    Per-cell seeds derive from the master seed and the cell key, so any subset
    of the grid reproduces independently; results are keyed, not appended, and
    come back sorted regardless of worker scheduling.

    ``restrict_to`` limits every model's flagged set to a voter cohort (the
    electorate itself is never restricted); ``cohort_label`` suffixes cell
    names with ``@label`` so cohort runs stay distinguishable in one report.
    """
    roster = tuple(roster)
    rules = tuple(rules)
    turnout_grid = [Fraction(t).limit_denominator(10**9) for t in turnouts]
    representation_grid = [Fraction(r).limit_denominator(10**9) for r in representations]
    if not (rules and models and turnout_grid and representation_grid):
        raise ValueError("rules, models, turnouts and representations must be non-empty")

    by_id = {v.voter_id: v for v in roster}
    roster_ids = sorted(by_id)

    def _flag(model: AbstentionModel) -> frozenset[str]:
        flagged = frozenset(flag_abstainers(roster, model))
        if restrict_to is not None:
            flagged &= frozenset(restrict_to)
        return flagged

    if any(r > 0 for r in representation_grid):
        representable = (
            set(roster_ids)
            if controls > 0
            else set().union(*(_flag(m) for m in models))
        )
        missing = sorted(
            vid
            for vid in representable
            if by_id[vid].get_ballot(ai_source, instance.ballot_format) is None
        )
        if missing:
            raise MissingAIBallotsError(ai_source, missing)

    all_humans = _human_ballots(roster, instance, frozenset())
    full = {
        rule: _outcome_or_empty(all_humans, rule, instance, tie_break) for rule in rules
    }

    tasks: list[_PlanTask] = []
    for model in models:
        name = model.name if cohort_label is None else f"{model.name}@{cohort_label}"
        flagged = _flag(model)
        for turnout in turnout_grid:
            for representation in representation_grid:
                seed = derive_seed(master_seed, "plan", name, turnout, representation)
                tasks.append(
                    _PlanTask(
                        cell_name=name,
                        flagged=flagged,
                        turnout=turnout,
                        representation=representation,
                        plan_turnout=turnout,
                        seed=seed,
                    )
                )
                # Control groups match the realized abstainer count of the
                # model cell, drawn from the whole roster.
                n_abstain = min(round((1 - turnout) * len(flagged)), len(flagged))
                for g in range(controls):
                    group_seed = derive_seed(
                        master_seed, "control", name, turnout, representation, g
                    )
                    group = frozenset(
                        random.Random(group_seed).sample(roster_ids, n_abstain)
                    )
                    tasks.append(
                        _PlanTask(
                            cell_name=f"{CONTROL_PREFIX}{g + 1:02d}-of-{name}",
                            flagged=group,
                            turnout=turnout,
                            representation=representation,
                            plan_turnout=Fraction(0),
                            seed=group_seed,
                        )
                    )

    args = [(task, roster, instance, rules, full, ai_source, tie_break) for task in tasks]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_task, args, chunksize=max(1, len(args) // workers)))
    else:
        results = [_run_task(a) for a in args]

    pairs = [pair for group in results for pair in group]

    def _cell_key(cell: RecoveryCell):
        return (cell.model_name, cell.rule, cell.turnout_fraction, cell.representation_fraction)

    pairs.sort(key=lambda pair: _cell_key(pair[0]))
    cells = [cell for cell, _ in pairs]
    movements = [
        (cell, movement) for cell, cell_movements in pairs for movement in cell_movements
    ]
    return cells, movements


def sweep(
    roster: Sequence[VoterRecord],
    instance: ElectionInstance,
    rules: Sequence[AggregationRule],
    models: Sequence[AbstentionModel],
    turnouts: Sequence[Fraction | float],
    representations: Sequence[Fraction | float],
    controls: int,
    master_seed: int,
    ai_source: str,
    tie_break: TieBreak = TieBreak.PROJECT_ID_LEX,
    workers: int = 1,
    restrict_to: AbstractSet[str] | None = None,
    cohort_label: str | None = None,
) -> list[RecoveryCell]:
    """Grid cells only; sweep_with_movements pairs them with winner movements."""
    cells, _ = sweep_with_movements(
        roster,
        instance,
        rules,
        models,
        turnouts,
        representations,
        controls,
        master_seed,
        ai_source,
        tie_break=tie_break,
        workers=workers,
        restrict_to=restrict_to,
        cohort_label=cohort_label,
    )
    return cells


def classify_movements(
    full: Outcome, abstained: Outcome, mixed: Outcome
) -> list[WinnerMovement]:
    """Partition the winner-set symmetric difference of full vs abstained.

    False negatives (dropped by abstention) split on whether the mixed outcome
    added them back; false positives (introduced by abstention) split on
    whether it removed them. Ranks come from support in the full outcome,
    1-based, ties by project id.
    """
    ranked = sorted(full.support, key=lambda p: (-full.support[p], p))
    rank = {p: i + 1 for i, p in enumerate(ranked)}
    full_set, abstained_set, mixed_set = (
        full.winner_set,
        abstained.winner_set,
        mixed.winner_set,
    )
    movements = []
    for project_id in full_set - abstained_set:
        category = (
            MovementCategory.FALSE_NEGATIVE_ADDED_BACK
            if project_id in mixed_set
            else MovementCategory.FALSE_NEGATIVE_UNRECOVERED
        )
        movements.append(WinnerMovement(project_id, category, rank[project_id]))
    for project_id in abstained_set - full_set:
        category = (
            MovementCategory.FALSE_POSITIVE_UNREMOVED
            if project_id in mixed_set
            else MovementCategory.FALSE_POSITIVE_REMOVED
        )
        movements.append(WinnerMovement(project_id, category, rank[project_id]))
    movements.sort(key=lambda m: (m.rank_in_reference, m.project_id))
    return movements


def retention_curve(
    roster: Sequence[VoterRecord],
    instance: ElectionInstance,
    rule: AggregationRule,
    abstain_fractions: Sequence[Fraction | float],
    repeats: int,
    seed: int,
    tie_break: TieBreak = TieBreak.PROJECT_ID_LEX,
) -> dict[Fraction, Fraction]:
    """Mean share of full-turnout winners retained under random abstention.

    For each fraction, that share of the voting population is removed
    uniformly at random ``repeats`` times. An emptied electorate retains
    nothing by convention.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    voters = [
        v for v in roster if v.get_ballot(HUMAN_SOURCE, instance.ballot_format) is not None
    ]
    ids = sorted(v.voter_id for v in voters)
    full = _outcome_or_empty(
        _human_ballots(voters, instance, frozenset()), rule, instance, tie_break
    )
    if not full.winners:
        raise ValueError("full outcome elects no winners; retention undefined")
    curve: dict[Fraction, Fraction] = {}
    for fraction in abstain_fractions:
        frac = Fraction(fraction).limit_denominator(10**9)
        total = Fraction(0)
        for repeat in range(repeats):
            rng = random.Random(derive_seed(seed, "retention", frac, repeat))
            removed = frozenset(rng.sample(ids, min(round(frac * len(ids)), len(ids))))
            ballots = _human_ballots(voters, instance, removed)
            outcome = _outcome_or_empty(ballots, rule, instance, tie_break)
            total += Fraction(len(outcome.winner_set & full.winner_set), len(full.winners))
        curve[frac] = total / repeats
    return curve


def fisher_combined_p(p_values: Sequence[float]) -> float:
    """Fisher's method: X = -2 sum(ln p), chi-square survival at 2k df.

    The degrees of freedom are always even, so the survival function has the
    closed form exp(-X/2) * sum_{j<k} (X/2)^j / j!; no numerical integration.
    """
    if not p_values:
        raise InvalidPError("need at least one p value")
    for p in p_values:
        if not (isinstance(p, (int, float, Fraction)) and 0 < p <= 1):
            raise InvalidPError(f"p value {p!r} outside (0, 1]")
    half_x = -sum(math.log(float(p)) for p in p_values)
    term = 1.0
    series = 1.0
    for j in range(1, len(p_values)):
        term *= half_x / j
        series += term
    return min(1.0, math.exp(-half_x) * series)


def mean_recovery(cells: Iterable[RecoveryCell]) -> Fraction | None:
    """Simple mean over cells with a defined recovery; None if no loss cells."""
    values = [c.recovery for c in cells if c.recovery is not None]
    if not values:
        return None
    return sum(values, Fraction(0)) / len(values)
