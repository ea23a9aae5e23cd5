"""Abstention models: who is likely to abstain, and participation plans.

A model scores voters from survey-trait proxies (low digital literacy, low
engagement, low institutional trust) and flags the lowest-scoring ones.
Participation plans then sample who actually abstains at a given turnout and
who gets a machine representative at a given representation share. Random
control groups of matching size provide the baseline.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from math import ceil
from typing import Iterable, Sequence

from ._seed import derive_seed
from .model import RepvoteError, VoterRecord


class MissingTraitError(RepvoteError):
    """Voters lack a proxy trait required by the model (strict mode)."""

    def __init__(self, voter_ids: Sequence[str]):
        self.voter_ids = tuple(voter_ids)
        super().__init__(f"voters missing proxy traits: {', '.join(self.voter_ids)}")


class SizeTooLargeError(RepvoteError):
    pass


class InvalidFractionError(RepvoteError):
    pass


# Answer strings that mean "no usable value" in the survey exports.
MISSING_ANSWERS = frozenset({"", "don't know", "dont know", "no answer"})


@dataclass(frozen=True)
class TraitProxy:
    """One survey question used as an abstention proxy.

    ``scale`` lists categorical answers from lowest to highest; ``numeric_range``
    min-max scales numeric answers; ``count_answers`` counts '|'-separated
    multi-tick answers. Without any of these, numeric values are min-max
    normalized over the roster. ``higher_is_abstaining`` flips the direction so
    that a LOW normalized value always means "likely to abstain".
    """

    key: str
    scale: tuple[str, ...] | None = None
    numeric_range: tuple[float, float] | None = None
    count_answers: bool = False
    higher_is_abstaining: bool = False

    def raw_value(self, voter: VoterRecord) -> float | None:
        raw = voter.traits.get(self.key)
        if raw is None:
            return None
        text = raw.strip()
        if text.lower() in MISSING_ANSWERS:
            return None
        if self.count_answers:
            ticks = [t for t in text.split("|") if t.strip().lower() not in MISSING_ANSWERS]
            return float(len(ticks))
        if self.scale is not None:
            lowered = text.lower()
            for index, option in enumerate(self.scale):
                if option == lowered:
                    return index / (len(self.scale) - 1) if len(self.scale) > 1 else 1.0
            return None
        try:
            value = float(text)
        except ValueError:
            return None
        if self.numeric_range is not None:
            lo, hi = self.numeric_range
            if hi == lo:
                return 0.5
            return min(1.0, max(0.0, (value - lo) / (hi - lo)))
        return value


class ModelKind(str, Enum):
    LOW_ENGAGEMENT = "low_engagement"
    LOW_DIGITAL_LITERACY = "low_digital_literacy"
    LOW_TRUST = "low_trust"
    RANDOM_BASELINE = "random_baseline"
    CUSTOM = "custom"


class ThresholdMode(str, Enum):
    QUARTILE = "quartile"
    FRACTION = "fraction"


@dataclass(frozen=True)
class AbstentionModel:
    """Trait proxies plus a threshold rule.

    Quartile mode flags the bottom quarter by composite score (mean of
    direction-normalized proxies); with ``per_trait_union`` it instead flags
    the bottom quarter per proxy and unions them, which is how flagged shares
    can exceed 25%. Fraction mode flags the ceil(f*n) lowest composite scores.
    """

    name: str
    kind: ModelKind
    proxies: tuple[TraitProxy, ...] = ()
    threshold_mode: ThresholdMode = ThresholdMode.QUARTILE
    fraction: Fraction | None = None
    per_trait_union: bool = False

    def __post_init__(self) -> None:
        if self.kind is not ModelKind.RANDOM_BASELINE and not self.proxies:
            raise ValueError(f"model {self.name}: proxy traits must be non-empty")
        if self.threshold_mode is ThresholdMode.FRACTION:
            if self.fraction is None or not 0 <= self.fraction <= 1:
                raise InvalidFractionError("fraction mode needs a fraction in [0, 1]")


AGREEMENT_5 = ("completely disagree", "disagree", "neutral", "agree", "completely agree")
TRUST_4 = ("no trust at all", "rather no trust", "rather trust", "a lot of trust")
CONTACT_FREQUENCY_5 = ("never", "annually", "quarterly", "weekly", "daily")

# Default proxy sets follow the pre/post-voting survey question codes used by
# the trait CSVs; override per deployment through the experiment config.
LOW_DIGITAL_LITERACY = AbstentionModel(
    name="low_digital_literacy",
    kind=ModelKind.LOW_DIGITAL_LITERACY,
    proxies=(
        TraitProxy("DPr.1.1", scale=AGREEMENT_5),
        TraitProxy("DPr.1.2", scale=AGREEMENT_5, higher_is_abstaining=True),
        TraitProxy("DPr.2", scale=TRUST_4),
    ),
)

LOW_ENGAGEMENT = AbstentionModel(
    name="low_engagement",
    kind=ModelKind.LOW_ENGAGEMENT,
    proxies=(
        TraitProxy("EPr.1.1", scale=CONTACT_FREQUENCY_5),
        TraitProxy("EPr.1.2", scale=CONTACT_FREQUENCY_5),
        TraitProxy("EPo.6", count_answers=True),
    ),
)

LOW_TRUST = AbstentionModel(
    name="low_trust",
    kind=ModelKind.LOW_TRUST,
    proxies=(
        TraitProxy("TPo.1.1", numeric_range=(0, 10)),
        TraitProxy("TPo.1.2", numeric_range=(0, 10)),
        TraitProxy("TPo.1.3", numeric_range=(0, 10)),
        TraitProxy("TPo.1.4", numeric_range=(0, 10)),
        TraitProxy("IPr.3.1", numeric_range=(0, 10)),
        TraitProxy("IPr.3.2", numeric_range=(0, 10)),
    ),
)

RANDOM_BASELINE = AbstentionModel(name="random_baseline", kind=ModelKind.RANDOM_BASELINE)

DEFAULT_MODELS = (LOW_ENGAGEMENT, LOW_DIGITAL_LITERACY, LOW_TRUST)


def _normalized_columns(
    roster: Sequence[VoterRecord], model: AbstentionModel
) -> tuple[dict[str, dict[str, float]], list[str]]:
    """Per-proxy direction-normalized values in [0, 1] plus incomplete voters."""
    columns: dict[str, dict[str, float]] = {}
    for proxy in model.proxies:
        raw = {v.voter_id: proxy.raw_value(v) for v in roster}
        present = {vid: val for vid, val in raw.items() if val is not None}
        if present and (proxy.scale is None and proxy.numeric_range is None):
            lo, hi = min(present.values()), max(present.values())
            if hi > lo:
                present = {vid: (val - lo) / (hi - lo) for vid, val in present.items()}
            else:
                present = {vid: 0.5 for vid in present}
        if proxy.higher_is_abstaining:
            present = {vid: 1.0 - val for vid, val in present.items()}
        columns[proxy.key] = present
    incomplete = sorted(
        v.voter_id
        for v in roster
        if any(v.voter_id not in columns[p.key] for p in model.proxies)
    )
    return columns, incomplete


def score_voters(
    roster: Sequence[VoterRecord], model: AbstentionModel
) -> tuple[dict[str, float], list[str]]:
    """Composite proxy scores (low = likely abstainer) and excluded voter ids.

    Voters missing any proxy are excluded from scoring and reported in the
    second element.
    """
    columns, incomplete = _normalized_columns(roster, model)
    skip = set(incomplete)
    scores = {
        v.voter_id: sum(columns[p.key][v.voter_id] for p in model.proxies) / len(model.proxies)
        for v in roster
        if v.voter_id not in skip
    }
    return scores, incomplete


def _lowest(scores: dict[str, float], count: int) -> set[str]:
    ranked = sorted(scores.items(), key=lambda item: (item[1], item[0]))
    return {vid for vid, _ in ranked[:count]}


def flag_abstainers(
    roster: Sequence[VoterRecord], model: AbstentionModel, strict: bool = False
) -> set[str]:
    """Deterministically flag likely abstainers.

    RandomBaseline flags the whole roster (the random draw happens later, in
    plan construction and control sampling). Voters missing a proxy are
    excluded, or raise MissingTraitError when strict.
    """
    if model.kind is ModelKind.RANDOM_BASELINE:
        return {v.voter_id for v in roster}
    columns, incomplete = _normalized_columns(roster, model)
    if strict and incomplete:
        raise MissingTraitError(incomplete)
    skip = set(incomplete)
    scored_ids = [v.voter_id for v in roster if v.voter_id not in skip]
    if not scored_ids:
        return set()
    if model.threshold_mode is ThresholdMode.FRACTION:
        scores, _ = score_voters(roster, model)
        return _lowest(scores, ceil(model.fraction * len(scored_ids)))
    quota = ceil(len(scored_ids) / 4)
    if model.per_trait_union:
        flagged: set[str] = set()
        for proxy in model.proxies:
            column = {vid: columns[proxy.key][vid] for vid in scored_ids}
            flagged |= _lowest(column, quota)
        return flagged
    scores, _ = score_voters(roster, model)
    return _lowest(scores, quota)


def random_controls(
    roster: Sequence[VoterRecord], size: int, groups: int, seed: int
) -> list[set[str]]:
    """`groups` uniform samples without replacement, one derived seed each."""
    ids = sorted(v.voter_id for v in roster)
    if size > len(ids):
        raise SizeTooLargeError(f"requested {size} of {len(ids)} voters")
    if groups < 1:
        raise ValueError("groups must be >= 1")
    out = []
    for index in range(groups):
        rng = random.Random(derive_seed(seed, "control", index))
        out.append(set(rng.sample(ids, size)))
    return out


class Modality(str, Enum):
    HUMANS_FULL = "humans_full"
    HUMANS_PARTIAL = "humans_partial"
    MIXED_HUMAN_AI = "mixed_human_ai"
    AI_ONLY = "ai_only"


@dataclass(frozen=True)
class ParticipationPlan:
    modality: Modality
    abstainers: frozenset[str]
    represented: frozenset[str]
    turnout_fraction: Fraction
    representation_fraction: Fraction
    seed: int

    def __post_init__(self) -> None:
        if not self.represented <= self.abstainers:
            raise ValueError("represented voters must be a subset of abstainers")


def _round_half_even(value: Fraction) -> int:
    # round() on Fraction is banker's rounding; 0.75 * 126 = 94.5 -> 94,
    # matching the calibration figure this module is checked against.
    return round(value)


def build_plan(
    roster: Sequence[VoterRecord],
    model: AbstentionModel,
    turnout_fraction: Fraction | float,
    representation_fraction: Fraction | float,
    seed: int,
    flagged: set[str] | None = None,
) -> ParticipationPlan:
    """Sample who abstains and who gets represented, reproducibly from seed.

    abstainers: (1 - turnout) of the model's flagged set, uniform without
    replacement. represented: representation share of the abstainers. The
    modality label falls out of the resulting sets. ``flagged`` overrides the
    model's own flagging (used for control groups of a prescribed size).
    """
    turnout = Fraction(turnout_fraction).limit_denominator(10**9)
    representation = Fraction(representation_fraction).limit_denominator(10**9)
    for name, value in (("turnout", turnout), ("representation", representation)):
        if not 0 <= value <= 1:
            raise InvalidFractionError(f"{name} fraction {value} outside [0, 1]")
    if flagged is None:
        flagged = flag_abstainers(roster, model)
    roster_ids = {v.voter_id for v in roster}
    if not flagged <= roster_ids:
        raise ValueError("flagged voters not in roster")

    n_abstain = min(_round_half_even((1 - turnout) * len(flagged)), len(flagged))
    rng = random.Random(derive_seed(seed, "abstainers"))
    abstainers = set(rng.sample(sorted(flagged), n_abstain))
    n_repr = min(_round_half_even(representation * len(abstainers)), len(abstainers))
    rng = random.Random(derive_seed(seed, "represented"))
    represented = set(rng.sample(sorted(abstainers), n_repr))

    if not abstainers:
        modality = Modality.HUMANS_FULL
    elif abstainers == roster_ids and represented == roster_ids:
        modality = Modality.AI_ONLY
    elif represented:
        modality = Modality.MIXED_HUMAN_AI
    else:
        modality = Modality.HUMANS_PARTIAL
    return ParticipationPlan(
        modality=modality,
        abstainers=frozenset(abstainers),
        represented=frozenset(represented),
        turnout_fraction=turnout,
        representation_fraction=representation,
        seed=seed,
    )


def overlap_report(
    roster: Sequence[VoterRecord], models: Iterable[AbstentionModel]
) -> dict[frozenset[str], int]:
    """Venn-cell counts: voters flagged by exactly this subset of models."""
    models = list(models)
    if len(models) < 2:
        raise ValueError("overlap needs at least two models")
    flagged = {m.name: flag_abstainers(roster, m) for m in models}
    counts: dict[frozenset[str], int] = {}
    names = [m.name for m in models]
    for voter in roster:
        member = frozenset(n for n in names if voter.voter_id in flagged[n])
        if member:
            counts[member] = counts.get(member, 0) + 1
    # report every non-empty subset, zeros included, for a stable table
    from itertools import combinations

    for r in range(1, len(names) + 1):
        for combo in combinations(names, r):
            counts.setdefault(frozenset(combo), 0)
    return counts
