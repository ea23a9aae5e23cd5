"""Participatory-budgeting rules, ballot agreement scoring, and abstention
recovery experiments with AI-representative ballots."""

from .abstention import (
    AbstentionModel,
    DEFAULT_MODELS,
    InvalidFractionError,
    LOW_DIGITAL_LITERACY,
    LOW_ENGAGEMENT,
    LOW_TRUST,
    MissingTraitError,
    Modality,
    ModelKind,
    ParticipationPlan,
    RANDOM_BASELINE,
    SizeTooLargeError,
    ThresholdMode,
    TraitProxy,
    build_plan,
    flag_abstainers,
    overlap_report,
    random_controls,
    score_voters,
)
from .aggregation import (
    AggregationConfig,
    AggregationRule,
    EmptyBallotSetError,
    FormatMismatchError,
    MixedFormatsError,
    TieBreak,
    UnknownRuleError,
    aggregate,
    controlled_winners,
    equal_shares,
    equal_shares_with_payments,
    majority,
    phragmen,
    support_scores,
    utilitarian_greedy,
)
from .consistency import (
    ConsistencyScore,
    PairwiseMatrix,
    SameFormatError,
    TransitivityScore,
    UndefinedReferenceError,
    collective_consistency,
    individual_consistency,
    kemeny_distance,
    mean_scores,
    pairwise_matrix,
    transitivity_consistency,
)
from .io import (
    CountMismatchError,
    DuplicateVoterError,
    ElectionDiagnostic,
    MissingHeaderError,
    ParsedElection,
    build_roster,
    format_rational,
    parse_election,
    parse_traits,
    read_report,
    write_election,
    write_report,
    write_traits,
)
from .model import (
    Ballot,
    BallotFormat,
    ElectionInstance,
    FormatViolationError,
    HUMAN_SOURCE,
    Outcome,
    ParseError,
    Project,
    RepvoteError,
    UnderivableDirectionError,
    UnknownProjectError,
    VoterRecord,
    derive_ballot,
    ensure_valid_ballot,
    validate_ballot,
)
from .personas import (
    ImportResult,
    LineDiagnostic,
    PersonaPolicy,
    UnknownVoterError,
    export_ballots,
    import_ai_ballots,
    synth_ballot,
    utilities,
)
from .recovery import (
    InvalidPError,
    MissingAIBallotsError,
    MovementCategory,
    NoLossToRecoverError,
    RecoveryCell,
    WinnerMovement,
    classify_movements,
    fisher_combined_p,
    mean_recovery,
    recovery_score,
    retention_curve,
    sweep,
    sweep_with_movements,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
