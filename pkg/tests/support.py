"""Shared builders and randomized generators for the test suite.

Lives outside conftest so tests can import it by a name that stays unique
when this suite is collected together with the harness suite.
"""

from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import strategies as st

from repvote import (
    Ballot,
    BallotFormat,
    ElectionInstance,
    HUMAN_SOURCE,
    Project,
    VoterRecord,
)


# One line per acceptance criterion; the conftest hook echoes these.
ACCEPTANCE_LINES: list[str] = []


def make_instance(
    costs: dict[str, int],
    budget: int,
    fmt: BallotFormat = BallotFormat.APPROVAL,
    **kwargs,
) -> ElectionInstance:
    projects = tuple(Project(pid, pid, cost) for pid, cost in costs.items())
    return ElectionInstance(projects=projects, budget=budget, ballot_format=fmt, **kwargs)


def approval(voter_id: str, *project_ids: str) -> Ballot:
    return Ballot(voter_id, BallotFormat.APPROVAL, {p: 1 for p in project_ids})


def single(voter_id: str, project_id: str) -> Ballot:
    return Ballot(voter_id, BallotFormat.SINGLE, {project_id: 1})


def score(voter_id: str, **weights: int) -> Ballot:
    return Ballot(voter_id, BallotFormat.SCORE, weights)


def cumulative(voter_id: str, **weights: int) -> Ballot:
    return Ballot(voter_id, BallotFormat.CUMULATIVE, weights)


def voter(voter_id: str, ballot: Ballot | None = None, **traits: str) -> VoterRecord:
    ballots = {}
    if ballot is not None:
        ballots = {HUMAN_SOURCE: {ballot.format: ballot}}
    return VoterRecord(voter_id=voter_id, traits=traits, ballots=ballots)


WORKED_INSTANCE = make_instance({"X": 40, "Y": 40, "Z": 100}, budget=100)
WORKED_BALLOTS = [
    approval("v1", "X", "Z"),
    approval("v2", "X", "Z"),
    approval("v3", "Y", "Z"),
    approval("v4", "Y", "Z"),
]


def random_approval_election(
    rng: random.Random,
    max_projects: int = 10,
    max_voters: int = 20,
) -> tuple[ElectionInstance, list[Ballot]]:
    """Random approval instance where every voter approves something."""
    n_projects = rng.randint(1, max_projects)
    n_voters = rng.randint(1, max_voters)
    costs = {f"P{i}": rng.randint(1, 50) for i in range(1, n_projects + 1)}
    budget = rng.randint(1, 120)
    instance = make_instance(costs, budget)
    pids = list(instance.project_ids)
    ballots = []
    for v in range(n_voters):
        k = rng.randint(1, n_projects)
        ballots.append(approval(f"v{v}", *rng.sample(pids, k)))
    return instance, ballots


@pytest.fixture
def rng() -> random.Random:
    return random.Random(0xC0FFEE)


# -- hypothesis strategies ---------------------------------------------------

project_ids = st.integers(min_value=1, max_value=8).map(lambda n: [f"P{i}" for i in range(1, n + 1)])


@st.composite
def approval_instances(draw, max_projects: int = 8):
    n = draw(st.integers(min_value=1, max_value=max_projects))
    costs = {
        f"P{i}": draw(st.integers(min_value=1, max_value=40)) for i in range(1, n + 1)
    }
    budget = draw(st.integers(min_value=1, max_value=100))
    return make_instance(costs, budget)


@st.composite
def approval_ballot_lists(draw, instance: ElectionInstance, max_voters: int = 20):
    pids = list(instance.project_ids)
    n = draw(st.integers(min_value=1, max_value=max_voters))
    out = []
    for v in range(n):
        chosen = draw(
            st.lists(st.sampled_from(pids), min_size=1, max_size=len(pids), unique=True)
        )
        out.append(approval(f"v{v}", *chosen))
    return out


@st.composite
def elections_with_ballots(draw, max_projects: int = 8, max_voters: int = 20):
    instance = draw(approval_instances(max_projects))
    ballots = draw(approval_ballot_lists(instance, max_voters))
    return instance, ballots


def fraction_strategy():
    return st.fractions(min_value=Fraction(0), max_value=Fraction(1), max_denominator=20)
