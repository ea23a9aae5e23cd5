"""Prompt construction for ballot-casting personas.

A prompt has three parts: a scenario preamble listing every project with its
cost and the total budget, a question fixed per ballot format, and a profile
paragraph rendered from the voter's traits. Trait keys are organized into
four named groups rendered in a fixed order; callers pick which groups a
given prompt includes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

from repvote import BallotFormat, ElectionInstance, VoterRecord


class HarnessError(Exception):
    pass


class MissingTraitError(HarnessError):
    pass


class TraitGroup(str, Enum):
    SOCIO_DEMOGRAPHICS = "socio_demographics"
    POLITICAL_INTERESTS = "political_interests"
    PROJECT_PREFERENCES = "project_preferences"
    OUTCOME_EXPECTATIONS = "outcome_expectations"

    @classmethod
    def parse(cls, value: "TraitGroup | str") -> "TraitGroup":
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            names = ", ".join(g.value for g in cls)
            raise MissingTraitError(f"unknown trait group {value!r} (known: {names})")


# Profile paragraphs always render in this order, whatever subset is asked for.
GROUP_ORDER = (
    TraitGroup.SOCIO_DEMOGRAPHICS,
    TraitGroup.POLITICAL_INTERESTS,
    TraitGroup.PROJECT_PREFERENCES,
    TraitGroup.OUTCOME_EXPECTATIONS,
)


@dataclass(frozen=True)
class PromptTemplate:
    """Which trait keys belong to which group, and how each one reads.

    ``groups`` maps a group to the ordered trait keys it renders. ``phrases``
    optionally rewords a trait ("{value} years old"); keys without a phrase
    render as "<key> is <value>".
    """

    groups: Mapping[TraitGroup, tuple[str, ...]]
    phrases: Mapping[str, str] = field(default_factory=dict)
    currency: str = "CHF"

    def __post_init__(self) -> None:
        normalized = {}
        for group, keys in self.groups.items():
            normalized[TraitGroup.parse(group)] = tuple(keys)
        object.__setattr__(self, "groups", normalized)
        object.__setattr__(self, "phrases", dict(self.phrases))


def scenario_preamble(instance: ElectionInstance, currency: str) -> str:
    """Every project exactly once, in presentation order, with the budget."""
    parts = [
        f"{p.id}: {p.name}, cost is {p.cost:,} {currency}" for p in instance.projects
    ]
    return (
        "Among the following list of projects: "
        + "; ".join(parts)
        + f" with a total budget of {instance.budget:,} {currency}"
    )


def format_question(fmt: BallotFormat, instance: ElectionInstance) -> str:
    if fmt is BallotFormat.APPROVAL:
        return "Which projects are preferred for a person with the following profile?"
    if fmt is BallotFormat.SINGLE:
        return "Which one is the most preferred for a person with the following profile?"
    if fmt is BallotFormat.SCORE:
        m = instance.score_max
        return (
            f"Assign a score of 1 to {m}, {m} being the highest and 1 being the "
            "lowest to the projects for a person with the following profile"
        )
    return (
        f"Distribute {instance.cumulative_points} points across at least "
        f"{instance.cumulative_min_projects} projects for a person with the "
        "following profile"
    )


def answer_instruction(fmt: BallotFormat, instance: ElectionInstance) -> str:
    """Constrained reply shape; the tolerant extractor handles strays."""
    base = 'Answer with "project_id:points" pairs only, separated by commas.'
    if fmt is BallotFormat.APPROVAL:
        return base + " Use 1 as the points value for each preferred project."
    if fmt is BallotFormat.SINGLE:
        return base + " Give exactly one pair, with 1 as the points value."
    if fmt is BallotFormat.SCORE:
        return base + " Give every project exactly one pair."
    return (
        base
        + f" The points must sum to {instance.cumulative_points} across at least "
        f"{instance.cumulative_min_projects} projects."
    )


def render_profile(
    voter: VoterRecord,
    trait_groups: Iterable[TraitGroup | str],
    template: PromptTemplate,
) -> str:
    requested = {TraitGroup.parse(g) for g in trait_groups}
    if not requested:
        raise MissingTraitError("at least one trait group is required")
    lines = []
    for group in GROUP_ORDER:
        if group not in requested:
            continue
        keys = template.groups.get(group)
        if not keys:
            raise MissingTraitError(f"template defines no traits for group {group.value}")
        phrases = []
        for key in keys:
            value = voter.traits.get(key)
            if value is None or value == "":
                raise MissingTraitError(
                    f"voter {voter.voter_id} has no value for trait {key!r} "
                    f"(group {group.value})"
                )
            phrase = template.phrases.get(key)
            if phrase:
                phrases.append(phrase.format(key=key, value=value))
            else:
                phrases.append(f"{key} is {value}")
        lines.append(", ".join(phrases))
    return "\n".join(lines)


def render_prompt(
    voter: VoterRecord,
    instance: ElectionInstance,
    fmt: BallotFormat,
    trait_groups: Iterable[TraitGroup | str],
    template: PromptTemplate,
) -> str:
    return "\n\n".join(
        [
            scenario_preamble(instance, template.currency),
            format_question(fmt, instance),
            render_profile(voter, trait_groups, template),
            answer_instruction(fmt, instance),
        ]
    )
