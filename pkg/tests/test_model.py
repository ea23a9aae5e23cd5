"""Domain types: ballot validation and format derivation."""

import pytest
from hypothesis import given, strategies as st

from support import approval, cumulative, make_instance, score, single
from repvote import (
    Ballot,
    BallotFormat,
    ElectionInstance,
    Project,
    derive_ballot,
    ensure_valid_ballot,
    validate_ballot,
)
from repvote.model import (
    FormatViolationError,
    UnderivableDirectionError,
    UnknownProjectError,
)

INSTANCE = make_instance(
    {"P1": 10, "P2": 10, "P3": 10, "P4": 10, "P5": 10},
    budget=30,
    fmt=BallotFormat.CUMULATIVE,
)


def codes(ballot, instance=INSTANCE):
    return [v.code for v in validate_ballot(ballot, instance)]


class TestValidation:
    def test_valid_cumulative(self):
        assert codes(cumulative("v", P1=6, P2=3, P3=1)) == []

    def test_cumulative_too_few_projects(self):
        assert "cumulative_min_projects" in codes(cumulative("v", P1=10))

    def test_cumulative_wrong_sum(self):
        assert "cumulative_sum" in codes(cumulative("v", P1=4, P2=3, P3=1))

    def test_cumulative_zero_weight(self):
        assert "cumulative_weight" in codes(cumulative("v", P1=10, P2=0, P3=0))

    def test_unknown_project(self):
        assert codes(approval("v", "P9")) == ["unknown_project"]

    def test_single_requires_one_entry(self):
        bad = Ballot("v", BallotFormat.SINGLE, {"P1": 1, "P2": 1})
        assert "single_entry_count" in codes(bad)

    def test_single_weight_must_be_one(self):
        assert "single_weight" in codes(Ballot("v", BallotFormat.SINGLE, {"P1": 2}))

    def test_approval_empty(self):
        assert "approval_empty" in codes(Ballot("v", BallotFormat.APPROVAL, {}))

    def test_approval_weights(self):
        assert "approval_weight" in codes(Ballot("v", BallotFormat.APPROVAL, {"P1": 2}))

    def test_score_range(self):
        inst = make_instance({"P1": 1, "P2": 1}, budget=2, fmt=BallotFormat.SCORE)
        assert "score_range" in codes(score("v", P1=6), inst)
        assert "score_range" in codes(score("v", P1=0), inst)
        assert codes(score("v", P1=5, P2=1), inst) == []

    def test_ensure_valid_raises_unknown_project_first(self):
        with pytest.raises(UnknownProjectError):
            ensure_valid_ballot(Ballot("v", BallotFormat.SINGLE, {"P9": 2}), INSTANCE)

    def test_ensure_valid_raises_format_violation(self):
        with pytest.raises(FormatViolationError) as exc:
            ensure_valid_ballot(cumulative("v", P1=10), INSTANCE)
        assert exc.value.violations


class TestDerivation:
    def test_cumulative_to_approval(self):
        derived = derive_ballot(cumulative("v", P1=6, P2=3, P3=1), BallotFormat.APPROVAL, INSTANCE)
        assert derived.entries == {"P1": 1, "P2": 1, "P3": 1}
        assert derived.format is BallotFormat.APPROVAL

    def test_cumulative_to_single(self):
        derived = derive_ballot(cumulative("v", P1=6, P2=3, P3=1), BallotFormat.SINGLE, INSTANCE)
        assert derived.entries == {"P1": 1}

    def test_single_tie_breaks_by_presentation_order(self):
        derived = derive_ballot(cumulative("v", P1=5, P2=5), BallotFormat.SINGLE, INSTANCE)
        assert derived.entries == {"P1": 1}
        flipped = ElectionInstance(
            projects=tuple(reversed(INSTANCE.projects)),
            budget=INSTANCE.budget,
            ballot_format=BallotFormat.CUMULATIVE,
        )
        derived = derive_ballot(cumulative("v", P1=5, P2=5), BallotFormat.SINGLE, flipped)
        assert derived.entries == {"P2": 1}

    def test_approval_to_single_is_underivable(self):
        with pytest.raises(UnderivableDirectionError):
            derive_ballot(approval("v", "P1"), BallotFormat.SINGLE, INSTANCE)

    def test_same_format_derivation_is_identity(self):
        ballot = approval("v", "P1")
        assert derive_ballot(ballot, BallotFormat.APPROVAL, INSTANCE) is ballot

    @given(data=st.data())
    def test_derived_ballots_validate_and_rederive_stably(self, data):
        k = data.draw(st.integers(min_value=3, max_value=5))
        chosen = data.draw(
            st.permutations(["P1", "P2", "P3", "P4", "P5"]).map(lambda p: p[:k])
        )
        weights = dict.fromkeys(chosen, 1)
        for _ in range(10 - k):
            weights[data.draw(st.sampled_from(chosen))] += 1
        ballot = Ballot("v", BallotFormat.CUMULATIVE, weights)
        assert validate_ballot(ballot, INSTANCE) == []
        for target in (BallotFormat.APPROVAL, BallotFormat.SINGLE):
            derived = derive_ballot(ballot, target, INSTANCE)
            assert validate_ballot(derived, INSTANCE) == []
            assert derive_ballot(derived, target, INSTANCE).entries == derived.entries

    def test_derived_approval_keys_equal_source_keys(self):
        src = score("v", P1=4, P2=1, P5=3)
        derived = derive_ballot(src, BallotFormat.APPROVAL, INSTANCE)
        assert set(derived.entries) == set(src.entries)
        assert set(derived.entries.values()) == {1}


class TestInstance:
    def test_duplicate_project_ids_rejected(self):
        with pytest.raises(ValueError):
            ElectionInstance(
                projects=(Project("P1", "a", 1), Project("P1", "b", 2)),
                budget=10,
                ballot_format=BallotFormat.APPROVAL,
            )

    def test_negative_cost_rejected(self):
        with pytest.raises(ValueError):
            Project("P1", "a", -1)

    def test_presentation_index_follows_project_order(self):
        assert [INSTANCE.presentation_index(p) for p in ("P1", "P3", "P5")] == [0, 2, 4]

    def test_ballot_entries_are_copied(self):
        entries = {"P1": 1}
        ballot = approval("v", "P1")
        mutated = dict(ballot.entries)
        mutated["P2"] = 1
        assert ballot.entries == entries
