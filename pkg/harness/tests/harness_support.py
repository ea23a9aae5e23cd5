"""Shared fixtures: the five-project survey election and a ten-voter roster.

Named distinctly from the core suite's support module so both suites can be
collected in one pytest run.
"""

from __future__ import annotations

from repvote import (
    Ballot,
    BallotFormat,
    ElectionInstance,
    HUMAN_SOURCE,
    Project,
    VoterRecord,
)

from persona_harness import PromptTemplate, TraitGroup

# One line per acceptance criterion; the conftest hook echoes these.
ACCEPTANCE_LINES: list[str] = []


SURVEY_PROJECTS = (
    ("P1", "Bins for Litter", 5000),
    ("P2", "Elderly Fun", 10000),
    ("P3", "Local Park", 30000),
    ("P4", "Mental Health", 15000),
    ("P5", "Bike Lane", 40000),
)


def survey_instance(fmt: BallotFormat = BallotFormat.APPROVAL) -> ElectionInstance:
    return ElectionInstance(
        projects=tuple(Project(pid, name, cost) for pid, name, cost in SURVEY_PROJECTS),
        budget=50000,
        ballot_format=fmt,
        score_max=5,
        cumulative_points=10,
        cumulative_min_projects=3,
    )


def survey_template() -> PromptTemplate:
    return PromptTemplate(
        groups={
            TraitGroup.SOCIO_DEMOGRAPHICS: ("gender", "age", "district"),
            TraitGroup.POLITICAL_INTERESTS: ("political_orientation",),
            TraitGroup.PROJECT_PREFERENCES: ("env_importance",),
            TraitGroup.OUTCOME_EXPECTATIONS: ("outcome_preference",),
        },
        phrases={"age": "{value} years old", "district": "lives in {value}"},
    )


def ten_voter_roster() -> list[VoterRecord]:
    districts = ("Zelgli", "Telli")
    orientations = ("left leaning", "center", "right leaning")
    roster = []
    for i in range(1, 11):
        vid = f"v{i:02d}"
        traits = {
            "gender": "female" if i % 2 else "male",
            "age": str(20 + 3 * i),
            "district": districts[i % 2],
            "political_orientation": orientations[i % 3],
            "env_importance": "important" if i % 2 else "not important",
            "outcome_preference": "cost-effective winners" if i <= 5 else "popular winners",
        }
        ballot = Ballot(vid, BallotFormat.APPROVAL, {f"P{1 + i % 5}": 1})
        roster.append(
            VoterRecord(vid, traits, {HUMAN_SOURCE: {BallotFormat.APPROVAL: ballot}})
        )
    return roster
