import re

import pytest
from hypothesis import given, strategies as st

from repvote import BallotFormat, ElectionInstance, Project, VoterRecord

from harness_support import survey_instance, survey_template, ten_voter_roster
from persona_harness import (
    GROUP_ORDER,
    MissingTraitError,
    PromptTemplate,
    TraitGroup,
    answer_instruction,
    format_question,
    render_profile,
    render_prompt,
    scenario_preamble,
)

EXPECTED_PREAMBLE = (
    "Among the following list of projects: "
    "P1: Bins for Litter, cost is 5,000 CHF; "
    "P2: Elderly Fun, cost is 10,000 CHF; "
    "P3: Local Park, cost is 30,000 CHF; "
    "P4: Mental Health, cost is 15,000 CHF; "
    "P5: Bike Lane, cost is 40,000 CHF "
    "with a total budget of 50,000 CHF"
)


class TestPreamble:
    def test_survey_fixture_text(self):
        assert scenario_preamble(survey_instance(), "CHF") == EXPECTED_PREAMBLE

    def test_currency_is_configurable(self):
        text = scenario_preamble(survey_instance(), "USD")
        assert "5,000 USD" in text and "CHF" not in text

    @given(
        st.lists(
            st.tuples(st.integers(1, 99), st.integers(100, 10**6)),
            min_size=1,
            max_size=12,
            unique_by=lambda t: t[0],
        )
    )
    def test_every_project_once_in_presentation_order(self, raw):
        projects = tuple(
            Project(f"P{num}", f"Project {num}", cost) for num, cost in raw
        )
        instance = ElectionInstance(
            projects=projects, budget=10**7, ballot_format=BallotFormat.APPROVAL
        )
        text = scenario_preamble(instance, "CHF")
        positions = []
        for project in projects:
            hits = [
                m.start()
                for m in re.finditer(
                    rf"(?<![A-Za-z0-9_]){re.escape(project.id)}(?![A-Za-z0-9_])", text
                )
            ]
            assert len(hits) == 1, project.id
            positions.append(hits[0])
        assert positions == sorted(positions)


class TestFormatQuestions:
    def test_approval_wording(self):
        assert (
            format_question(BallotFormat.APPROVAL, survey_instance())
            == "Which projects are preferred for a person with the following profile?"
        )

    def test_single_wording(self):
        assert (
            format_question(BallotFormat.SINGLE, survey_instance())
            == "Which one is the most preferred for a person with the following profile?"
        )

    def test_score_wording(self):
        assert format_question(BallotFormat.SCORE, survey_instance()) == (
            "Assign a score of 1 to 5, 5 being the highest and 1 being the lowest "
            "to the projects for a person with the following profile"
        )

    def test_score_wording_tracks_score_max(self):
        instance = survey_instance()
        wider = ElectionInstance(
            projects=instance.projects,
            budget=instance.budget,
            ballot_format=BallotFormat.SCORE,
            score_max=10,
        )
        text = format_question(BallotFormat.SCORE, wider)
        assert "1 to 10" in text and "10 being the highest" in text

    def test_cumulative_wording_uses_instance_limits(self):
        text = format_question(BallotFormat.CUMULATIVE, survey_instance())
        assert "Distribute 10 points across at least 3 projects" in text

    def test_answer_instruction_mentions_pairs(self):
        for fmt in BallotFormat:
            text = answer_instruction(fmt, survey_instance())
            assert '"project_id:points" pairs only' in text
        cumulative = answer_instruction(BallotFormat.CUMULATIVE, survey_instance())
        assert "sum to 10" in cumulative


class TestProfile:
    def test_group_rendering_order_is_canonical(self):
        voter = ten_voter_roster()[0]
        profile = render_profile(
            voter,
            [TraitGroup.PROJECT_PREFERENCES, TraitGroup.SOCIO_DEMOGRAPHICS],
            survey_template(),
        )
        lines = profile.splitlines()
        assert len(lines) == 2
        assert lines[0].startswith("gender is")
        assert lines[1] == "env_importance is important"

    def test_phrases_reword_traits(self):
        voter = ten_voter_roster()[0]
        profile = render_profile(
            voter, [TraitGroup.SOCIO_DEMOGRAPHICS], survey_template()
        )
        assert "23 years old" in profile
        assert "lives in Telli" in profile

    def test_default_phrase_is_key_is_value(self):
        voter = ten_voter_roster()[0]
        profile = render_profile(
            voter, [TraitGroup.POLITICAL_INTERESTS], survey_template()
        )
        assert profile == "political_orientation is center"

    def test_missing_trait_value_raises(self):
        voter = VoterRecord("x", {"gender": "female"})
        with pytest.raises(MissingTraitError, match="age"):
            render_profile(voter, [TraitGroup.SOCIO_DEMOGRAPHICS], survey_template())

    def test_unknown_group_name_raises(self):
        voter = ten_voter_roster()[0]
        with pytest.raises(MissingTraitError, match="unknown trait group"):
            render_profile(voter, ["hobbies"], survey_template())

    def test_group_absent_from_template_raises(self):
        template = PromptTemplate(groups={TraitGroup.SOCIO_DEMOGRAPHICS: ("gender",)})
        voter = ten_voter_roster()[0]
        with pytest.raises(MissingTraitError, match="political_interests"):
            render_profile(voter, [TraitGroup.POLITICAL_INTERESTS], template)

    def test_empty_request_raises(self):
        with pytest.raises(MissingTraitError):
            render_profile(ten_voter_roster()[0], [], survey_template())


class TestRenderPrompt:
    def test_structure_preamble_question_profile_answer(self):
        voter = ten_voter_roster()[0]
        prompt = render_prompt(
            voter,
            survey_instance(),
            BallotFormat.APPROVAL,
            [TraitGroup.SOCIO_DEMOGRAPHICS],
            survey_template(),
        )
        blocks = prompt.split("\n\n")
        assert blocks[0] == EXPECTED_PREAMBLE
        assert blocks[1].endswith("profile?")
        assert "gender is" in blocks[2]
        assert blocks[3].startswith("Answer with")

    def test_same_voter_twice_is_identical(self):
        voter = ten_voter_roster()[3]
        args = (
            voter,
            survey_instance(),
            BallotFormat.SCORE,
            list(GROUP_ORDER),
            survey_template(),
        )
        assert render_prompt(*args) == render_prompt(*args)

    def test_group_strings_accepted(self):
        voter = ten_voter_roster()[0]
        by_enum = render_prompt(
            voter,
            survey_instance(),
            BallotFormat.SINGLE,
            [TraitGroup.SOCIO_DEMOGRAPHICS],
            survey_template(),
        )
        by_name = render_prompt(
            voter,
            survey_instance(),
            BallotFormat.SINGLE,
            ["socio_demographics"],
            survey_template(),
        )
        assert by_enum == by_name
