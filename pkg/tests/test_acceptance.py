"""Top-level acceptance checks, one pass/fail line each.

Each test exercises one contract end to end and reports a single line in the
terminal summary. Two dataset-bound checks need the published survey election
file; point REPVOTE_CITY_IDEA_ELECTION at it to enable them, otherwise they
are reported as dataset-gated and skipped.
"""

import os
import random
import time
from fractions import Fraction

import pytest

import support
from support import (
    WORKED_BALLOTS,
    WORKED_INSTANCE,
    approval,
    make_instance,
    random_approval_election,
    voter,
)
from repvote import (
    AbstentionModel,
    AggregationConfig,
    AggregationRule,
    Ballot,
    BallotFormat,
    HUMAN_SOURCE,
    ModelKind,
    Outcome,
    PersonaPolicy,
    ThresholdMode,
    TraitProxy,
    aggregate,
    build_roster,
    classify_movements,
    collective_consistency,
    controlled_winners,
    equal_shares,
    equal_shares_with_payments,
    fisher_combined_p,
    individual_consistency,
    kemeny_distance,
    parse_election,
    pairwise_matrix,
    phragmen,
    recovery_score,
    retention_curve,
    support_scores,
    sweep,
    synth_ballot,
    utilitarian_greedy,
)
from repvote.cli import main as cli_main
from repvote.consistency import UndefinedReferenceError
from repvote.io import write_election, write_traits
from repvote.personas import export_ballots

CITY_DATA_ENV = "REPVOTE_CITY_IDEA_ELECTION"


def check(name: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    suffix = f" ({detail})" if detail else ""
    support.ACCEPTANCE_LINES.append(f"{name}: {status}{suffix}")
    assert passed, f"{name}: {status}{suffix}"


def gate(name: str) -> str:
    path = os.environ.get(CITY_DATA_ENV)
    if not path:
        support.ACCEPTANCE_LINES.append(
            f"{name}: SKIPPED (dataset-gated; set {CITY_DATA_ENV} to the "
            "published cumulative election file)"
        )
        pytest.skip(f"{name}: {CITY_DATA_ENV} not set")
    return path


def test_worked_instance_rules():
    start = time.perf_counter()
    es = equal_shares(WORKED_BALLOTS, WORKED_INSTANCE)
    ph = phragmen(WORKED_BALLOTS, WORKED_INSTANCE)
    greedy = utilitarian_greedy(WORKED_BALLOTS, WORKED_INSTANCE)
    elapsed = time.perf_counter() - start
    ok = (
        set(es.winners) == {"X", "Y"}
        and set(ph.winners) == {"X", "Y"}
        and greedy.winners == ("Z",)
        and elapsed < 1.0
    )
    check(
        "worked-instance rules",
        ok,
        f"equal_shares={list(es.winners)} phragmen={list(ph.winners)} "
        f"greedy={list(greedy.winners)} in {elapsed * 1000:.1f}ms",
    )


def test_equal_shares_exact_accounting():
    rng = random.Random(20260814)
    violations = 0
    for _ in range(200):
        instance, ballots = random_approval_election(rng, max_projects=10, max_voters=20)
        outcome, payments = equal_shares_with_payments(ballots, instance)
        endowment = Fraction(instance.budget, len(ballots))
        cost = {p.id: p.cost for p in instance.projects}
        if sum(cost[w] for w in outcome.winners) > instance.budget:
            violations += 1
        for i, ballot in enumerate(ballots):
            paid = payments.get(i, {})
            if sum(paid.values(), Fraction(0)) > endowment:
                violations += 1
            if any(pid not in ballot.entries for pid in paid):
                violations += 1
        for winner in outcome.winners:
            total = sum(
                (payments.get(i, {}).get(winner, Fraction(0)) for i in range(len(ballots))),
                Fraction(0),
            )
            if total != cost[winner]:
                violations += 1
    check(
        "equal-shares exact accounting",
        violations == 0,
        f"200 random instances, {violations} violations",
    )


def test_pairwise_agreement_matches_oracle():
    rng = random.Random(1000003)
    mismatches = 0
    for _ in range(1000):
        n = rng.randint(2, 8)
        instance = make_instance({f"P{i}": 1 for i in range(1, n + 1)}, budget=n)
        ids = list(instance.project_ids)

        def random_ballot():
            chosen = rng.sample(ids, rng.randint(1, n))
            return Ballot(
                "v", BallotFormat.CUMULATIVE, {p: rng.randint(1, 5) for p in chosen}
            )

        reference, candidate = random_ballot(), random_ballot()
        ref_w = {p: reference.entries.get(p, 0) for p in ids}
        cand_w = {p: candidate.entries.get(p, 0) for p in ids}
        matched = reference_ones = 0
        for i in ids:
            for j in ids:
                if i != j and ref_w[i] > ref_w[j]:
                    reference_ones += 1
                    if cand_w[i] > cand_w[j]:
                        matched += 1

        matrix = pairwise_matrix(reference, instance)
        matrix_ones = {
            (matrix.project_ids[i], matrix.project_ids[j]) for i, j in matrix.ones()
        }
        oracle_ones = {(i, j) for i in ids for j in ids if i != j and ref_w[i] > ref_w[j]}
        if matrix_ones != oracle_ones:
            mismatches += 1
            continue
        try:
            score = individual_consistency(reference, candidate, instance)
        except UndefinedReferenceError:
            if reference_ones != 0:
                mismatches += 1
            continue
        if (score.matched_ones, score.reference_ones) != (matched, reference_ones):
            mismatches += 1
        elif score.value != Fraction(matched, reference_ones):
            mismatches += 1
    check(
        "pairwise agreement vs brute-force oracle",
        mismatches == 0,
        f"1000 random ballot pairs, {mismatches} mismatches",
    )


def test_rank_distance_is_a_metric():
    rng = random.Random(77)
    failures = 0
    for _ in range(500):
        n = rng.randint(2, 6)
        instance = make_instance(
            {chr(65 + i): 1 for i in range(n)}, budget=n, fmt=BallotFormat.SCORE
        )
        ids = list(instance.project_ids)

        def order_ballot():
            order = rng.sample(ids, n)
            return Ballot("v", BallotFormat.SCORE, {p: n - i for i, p in enumerate(order)})

        x, y, z = order_ballot(), order_ballot(), order_ballot()
        dxy = kemeny_distance(x, y, instance)
        if dxy != kemeny_distance(y, x, instance):
            failures += 1
        if (dxy == 0) != (x.entries == y.entries):
            failures += 1
        if dxy > kemeny_distance(x, z, instance) + kemeny_distance(z, y, instance):
            failures += 1
    inst3 = make_instance({"A": 1, "B": 1, "C": 1}, budget=3, fmt=BallotFormat.SCORE)
    fixture = kemeny_distance(
        Ballot("v", BallotFormat.SCORE, {"A": 3, "B": 2, "C": 1}),
        Ballot("v", BallotFormat.SCORE, {"C": 3, "B": 2, "A": 1}),
        inst3,
    )
    check(
        "rank-distance metric laws",
        failures == 0 and fixture == 3,
        f"500 strict-order triples, {failures} failures; full-reversal fixture={fixture}",
    )


def _perfect_ai_roster():
    prefs = {
        "v1": ("P1", "P2"),
        "v2": ("P1", "P2"),
        "v3": ("P1", "P3"),
        "v4": ("P2", "P3"),
        "v5": ("P3", "P4"),
        "v6": ("P3", "P4"),
        "v7": ("P4",),
        "v8": ("P1", "P4"),
    }
    return [
        voter(vid, approval(vid, *p), q=str(i / 10)).with_ballot(
            "ai", approval(vid, *p)
        )
        for i, (vid, p) in enumerate(prefs.items(), start=1)
    ]


def test_recovery_formula_fixtures():
    inst6 = make_instance({c: 1 for c in "ABCDEF"}, budget=6)

    def outcome(*winners):
        support = {p: (10 if p in winners else 0) for p in "ABCDEF"}
        return Outcome(rule="r", winners=tuple(winners), support=support, spent=0)

    full, abstained, mixed = outcome("A"), outcome("A", "B", "C"), outcome("A", "B")
    c_abst = collective_consistency(full, abstained, inst6).value
    c_mixed = collective_consistency(full, mixed, inst6).value
    arithmetic = recovery_score(full, abstained, mixed, inst6)
    no_change = recovery_score(full, abstained, abstained, inst6)

    model = AbstentionModel(
        name="m",
        kind=ModelKind.CUSTOM,
        proxies=(TraitProxy("q", numeric_range=(0, 1)),),
        threshold_mode=ThresholdMode.FRACTION,
        fraction=Fraction(1, 2),
    )
    cells = sweep(
        _perfect_ai_roster(),
        make_instance({"P1": 10, "P2": 10, "P3": 10, "P4": 10}, budget=20),
        rules=[AggregationRule.UTILITARIAN_GREEDY, AggregationRule.EQUAL_SHARES],
        models=[model],
        turnouts=[Fraction(0), Fraction(1, 2)],
        representations=[Fraction(1)],
        controls=3,
        master_seed=9,
        ai_source="ai",
    )
    loss = [c for c in cells if c.recovery is not None]
    ok = (
        (c_abst, c_mixed) == (Fraction(3, 5), Fraction(4, 5))
        and arithmetic == Fraction(1, 2)
        and no_change == 0
        and loss
        and all(c.recovery == 1 for c in loss)
    )
    check(
        "recovery formula fixtures",
        ok,
        f"0.6/0.8 arithmetic={arithmetic} no-change={no_change} "
        f"perfect-AI loss cells={len(loss)} all at 1.0",
    )


def test_controlled_winner_counts():
    # Count parity requires equal shares to elect at least as many winners as
    # greedy (truncation cannot extend). Where it does, parity must be exact;
    # where it under-elects, the documented fallback leaves the outcome as is.
    rng = random.Random(31337)
    comparable = under_elected = mismatches = 0
    for _ in range(200):
        instance, ballots = random_approval_election(rng)
        greedy = utilitarian_greedy(ballots, instance)
        es = equal_shares(ballots, instance)
        if not greedy.winners or not es.winners:
            continue
        controlled = controlled_winners(es, len(greedy.winners), instance)
        if len(es.winners) >= len(greedy.winners):
            comparable += 1
            if len(controlled.winners) != len(greedy.winners):
                mismatches += 1
        else:
            under_elected += 1
            if controlled != es:
                mismatches += 1
    check(
        "controlled winner counts",
        comparable >= 100 and mismatches == 0,
        f"{comparable} instances truncated to greedy's count exactly, "
        f"{under_elected} with fewer proportional winners left unchanged, "
        f"{mismatches} mismatches",
    )


def _clustered_cumulative_election(index: int):
    rng = random.Random(5_000_000 + index)
    costs = {f"P{i:02d}": rng.randint(500, 25000) for i in range(1, 34)}
    instance = make_instance(
        costs,
        budget=50000,
        fmt=BallotFormat.CUMULATIVE,
        cumulative_points=10,
        cumulative_min_projects=3,
    )
    policies = [
        PersonaPolicy(
            name=f"cluster{c}",
            trait_weights={
                "m": {pid: rng.uniform(0, 1) ** 2 for pid in costs}
            },
            noise_sigma=0.15,
            seed=rng.randrange(2**32),
        )
        for c in range(4)
    ]
    ballots = [
        synth_ballot(
            voter(f"v{i:03d}", m="1"), instance, policies[i % 4], BallotFormat.CUMULATIVE
        )
        for i in range(250)
    ]
    return instance, ballots


def test_winner_stability_trend():
    wins = 0
    for index in range(30):
        instance, ballots = _clustered_cumulative_election(index)
        roster = build_roster(ballots)
        retained = {}
        for rule in (AggregationRule.EQUAL_SHARES, AggregationRule.UTILITARIAN_GREEDY):
            curve = retention_curve(
                roster, instance, rule, [Fraction(1, 2)], repeats=40, seed=index
            )
            retained[rule] = curve[Fraction(1, 2)]
        if retained[AggregationRule.EQUAL_SHARES] > retained[AggregationRule.UTILITARIAN_GREEDY]:
            wins += 1
    check(
        "winner stability trend",
        wins >= 25,
        f"equal shares retained more winners than greedy at 50% abstention in "
        f"{wins}/30 synthetic cumulative elections (40 resamples each)",
    )


def test_combined_p_fixture():
    combined = fisher_combined_p([0.05, 0.05])
    check(
        "combined p-value fixture",
        abs(combined - 0.0175) <= 0.0005,
        f"[0.05, 0.05] -> {combined:.6f}",
    )


def test_sweep_reports_are_reproducible(tmp_path):
    instance = make_instance({"P1": 10, "P2": 10, "P3": 10, "P4": 10}, budget=20)
    roster = _perfect_ai_roster()
    ballots = [v.ballots[HUMAN_SOURCE][BallotFormat.APPROVAL] for v in roster]
    write_election(instance, ballots, tmp_path / "election.pb")
    write_traits({v.voter_id: dict(v.traits) for v in roster}, tmp_path / "traits.csv")
    export_ballots(roster, tmp_path / "ai.jsonl", sources=["ai"])

    outputs = {}
    for run in ("first", "second"):
        out = tmp_path / run
        code = cli_main(
            [
                "recovery",
                "--election",
                str(tmp_path / "election.pb"),
                "--traits",
                str(tmp_path / "traits.csv"),
                "--ballots",
                str(tmp_path / "ai.jsonl"),
                "--ai-source",
                "ai",
                "--models",
                "random_baseline",
                "--turnouts",
                "0.25,0.75",
                "--representations",
                "0.5,1",
                "--controls",
                "2",
                "--seed",
                "123",
                "--no-figures",
                "--output-dir",
                str(out),
            ]
        )
        assert code == 0
        outputs[run] = (
            (out / "recovery_cells.csv").read_bytes(),
            (out / "movements.csv").read_bytes(),
        )
    check(
        "sweep reports reproducible",
        outputs["first"] == outputs["second"],
        "recovery_cells.csv and movements.csv byte-identical across reruns",
    )


def test_movement_categories_partition():
    rng = random.Random(424242)
    ids = list("ABCDEF")
    failures = 0
    for _ in range(500):
        def outcome():
            winners = tuple(rng.sample(ids, rng.randint(0, 6)))
            support = {p: rng.randint(0, 9) for p in ids}
            return Outcome(rule="r", winners=winners, support=support, spent=0)

        full, abstained, mixed = outcome(), outcome(), outcome()
        moves = classify_movements(full, abstained, mixed)
        touched = [m.project_id for m in moves]
        if len(touched) != len(set(touched)):
            failures += 1
        elif set(touched) != full.winner_set ^ abstained.winner_set:
            failures += 1
    check(
        "movement categories partition",
        failures == 0,
        f"500 random outcome triples, {failures} failures",
    )


def _load_city_roster(path):
    parsed = parse_election(path, strict=False)
    return parsed.instance, build_roster(parsed.ballots)


def test_city_dataset_retention():
    path = gate("city-dataset retention")
    instance, roster = _load_city_roster(path)
    curve = retention_curve(
        roster,
        instance,
        AggregationRule.EQUAL_SHARES,
        [Fraction(4, 5)],
        repeats=40,
        seed=0,
    )
    value = float(curve[Fraction(4, 5)])
    check(
        "city-dataset retention",
        abs(value - 0.831) <= 0.05,
        f"equal shares at 80% abstention retained {value:.3f} (expected 0.831 +/- 0.05)",
    )


def test_city_dataset_winner_changes():
    path = gate("city-dataset winner changes")
    instance, roster = _load_city_roster(path)
    ids = sorted(v.voter_id for v in roster)
    ballots_by_id = {
        v.voter_id: v.ballots[HUMAN_SOURCE][instance.ballot_format] for v in roster
    }
    means = {}
    for rule in (AggregationRule.EQUAL_SHARES, AggregationRule.UTILITARIAN_GREEDY):
        full = aggregate(
            list(ballots_by_id.values()), instance, AggregationConfig(rule=rule)
        )
        total = 0
        for repeat in range(40):
            rng = random.Random(1337 + repeat)
            removed = set(rng.sample(ids, round(0.5 * len(ids))))
            sample = [b for vid, b in ballots_by_id.items() if vid not in removed]
            outcome = aggregate(sample, instance, AggregationConfig(rule=rule))
            total += len(full.winner_set ^ outcome.winner_set)
        means[rule] = total / 40
    es, greedy = (
        means[AggregationRule.EQUAL_SHARES],
        means[AggregationRule.UTILITARIAN_GREEDY],
    )
    check(
        "city-dataset winner changes",
        abs(es - 1.87) <= 0.5 and abs(greedy - 3.59) <= 0.5,
        f"mean winner changes at 50% abstention: equal shares {es:.2f} "
        f"(expected 1.87 +/- 0.5), greedy {greedy:.2f} (expected 3.59 +/- 0.5)",
    )
