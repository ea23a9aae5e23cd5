"""Command-line front end.

Wires the library into runnable experiment commands. Values come from three
layers, later wins: built-in defaults, the ``[experiment]`` table of a TOML
config file, command-line flags. Report files land in the output directory
(flag, config, or REPVOTE_OUTPUT_DIR); report commands also render PNG
figures next to the delimited output unless --no-figures is set.

Exit codes: 0 ok, 2 file parse error, 3 validation error, 4 config error.
stdout carries progress lines only; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import io as rio
from ._seed import derive_seed
from .abstention import (
    DEFAULT_MODELS,
    AbstentionModel,
    InvalidFractionError,
    MissingTraitError,
    ModelKind,
    RANDOM_BASELINE,
    SizeTooLargeError,
    ThresholdMode,
    TraitProxy,
    overlap_report,
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
)
from .consistency import (
    SameFormatError,
    UndefinedReferenceError,
    collective_consistency,
    individual_consistency,
    transitivity_consistency,
)
from .model import (
    Ballot,
    BallotFormat,
    ElectionInstance,
    FormatViolationError,
    HUMAN_SOURCE,
    ParseError,
    RepvoteError,
    UnderivableDirectionError,
    UnknownProjectError,
    VoterRecord,
    derive_ballot,
)
from .personas import (
    PersonaPolicy,
    UnknownVoterError,
    export_ballots,
    import_ai_ballots,
    synth_ballot,
)
from .recovery import (
    InvalidPError,
    MissingAIBallotsError,
    NoLossToRecoverError,
    retention_curve,
    sweep_with_movements,
)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_CONFIG = 4

OUTPUT_DIR_ENV = "REPVOTE_OUTPUT_DIR"

MOVEMENT_COLUMNS = (
    "model_name",
    "rule",
    "turnout_fraction",
    "representation_fraction",
    "seed",
    "project_id",
    "category",
    "rank_in_reference",
)


class ConfigError(RepvoteError):
    pass


class ValidationFailure(RepvoteError):
    pass


class _UsageError(Exception):
    def __init__(self, parser: argparse.ArgumentParser, message: str):
        self.parser = parser
        super().__init__(message)


class _Parser(argparse.ArgumentParser):
    """Exits 4 on misuse instead of argparse's default 2 (reserved for files)."""

    def error(self, message):
        raise _UsageError(self, message)


def _say(message: str) -> None:
    print(message)


def _warn(message: str) -> None:
    print(f"repvote: {message}", file=sys.stderr)


# -- config plumbing ---------------------------------------------------------


def _load_config(path: str | None) -> tuple[dict, Path]:
    if path is None:
        return {}, Path.cwd()
    config_path = Path(path)
    try:
        with open(config_path, "rb") as handle:
            return tomllib.load(handle), config_path.parent
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{config_path}: {exc}")


def _pick(flag_value, config: Mapping, key: str, default):
    if flag_value is not None:
        return flag_value
    if key in config:
        return config[key]
    return default


def _path(value, base: Path) -> Path:
    value = Path(value)
    return value if value.is_absolute() else base / value


def _fraction_list(value) -> list[Fraction]:
    if isinstance(value, str):
        parts = [p for p in value.split(",") if p.strip()]
    else:
        parts = list(value)
    if not parts:
        raise ConfigError("fraction list must be non-empty")
    out = []
    for part in parts:
        try:
            frac = Fraction(str(part).strip())
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"not a fraction: {part!r}")
        if not 0 <= frac <= 1:
            raise ConfigError(f"fraction {part} outside [0, 1]")
        out.append(frac)
    return out


def _name_list(value) -> list[str]:
    if isinstance(value, str):
        names = [p.strip() for p in value.split(",") if p.strip()]
    else:
        names = [str(p) for p in value]
    if not names:
        raise ConfigError("list must be non-empty")
    return names


def _rules(value) -> list[AggregationRule]:
    return [AggregationRule.parse(name) for name in _name_list(value)]


def _formats(value) -> list[BallotFormat]:
    return [BallotFormat.parse(name) for name in _name_list(value)]


def _proxy_from_table(table: Mapping) -> TraitProxy:
    if "key" not in table:
        raise ConfigError("abstention_model proxy needs a key")
    return TraitProxy(
        key=str(table["key"]),
        scale=tuple(str(s) for s in table["scale"]) if "scale" in table else None,
        numeric_range=(
            tuple(float(x) for x in table["numeric_range"])
            if "numeric_range" in table
            else None
        ),
        count_answers=bool(table.get("count_answers", False)),
        higher_is_abstaining=bool(table.get("higher_is_abstaining", False)),
    )


def _model_from_table(table: Mapping) -> AbstentionModel:
    if "name" not in table:
        raise ConfigError("abstention_model needs a name")
    try:
        kind = ModelKind(str(table.get("kind", "custom")))
        threshold = ThresholdMode(str(table.get("threshold", "quartile")))
    except ValueError as exc:
        raise ConfigError(str(exc))
    fraction = None
    if "fraction" in table:
        fraction = Fraction(str(table["fraction"]))
    try:
        return AbstentionModel(
            name=str(table["name"]),
            kind=kind,
            proxies=tuple(_proxy_from_table(p) for p in table.get("proxy", [])),
            threshold_mode=threshold,
            fraction=fraction,
            per_trait_union=bool(table.get("per_trait_union", False)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc))


def _model_registry(config: Mapping) -> dict[str, AbstentionModel]:
    registry = {m.name: m for m in (*DEFAULT_MODELS, RANDOM_BASELINE)}
    for table in config.get("abstention_model", []):
        model = _model_from_table(table)
        registry[model.name] = model
    return registry


def _models(value, config: Mapping) -> list[AbstentionModel]:
    registry = _model_registry(config)
    if value is None:
        return [m for m in DEFAULT_MODELS]
    models = []
    for name in _name_list(value):
        if name not in registry:
            known = ", ".join(sorted(registry))
            raise ConfigError(f"unknown abstention model {name!r} (known: {known})")
        models.append(registry[name])
    return models


def _output_dir(args, experiment: Mapping) -> Path:
    value = _pick(
        getattr(args, "output_dir", None),
        experiment,
        "output_dir",
        os.environ.get(OUTPUT_DIR_ENV, "."),
    )
    directory = Path(value)
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def _report_path(directory: Path, stem: str, fmt: str) -> Path:
    return directory / f"{stem}.{fmt}"


def _figures_enabled(args, experiment: Mapping) -> bool:
    if getattr(args, "no_figures", False):
        return False
    return bool(experiment.get("figures", True))


def _tie_break(args, experiment: Mapping) -> TieBreak:
    value = _pick(getattr(args, "tie_break", None), experiment, "tie_break", "lex")
    try:
        return TieBreak(value)
    except ValueError:
        raise ConfigError(f"unknown tie-break {value!r} (use lex or presentation)")


def _seed(args, experiment: Mapping) -> int:
    return int(_pick(getattr(args, "seed", None), experiment, "seed", 0))


def _require(value, flag: str):
    if value is None:
        raise ConfigError(f"missing required {flag} (flag or config key)")
    return value


# -- shared loading ----------------------------------------------------------


def _load_election(args, experiment: Mapping, base: Path, strict: bool = False):
    election = _require(
        _pick(getattr(args, "election", None), experiment, "election", None),
        "--election",
    )
    parsed = rio.parse_election(_path(election, base), strict=strict)
    for diag in parsed.diagnostics:
        _warn(f"election line {diag.line_number}: {diag.code}: {diag.message}")
    return parsed


def _load_traits(args, experiment: Mapping, base: Path, required: bool = False):
    traits = _pick(getattr(args, "traits", None), experiment, "traits", None)
    if traits is None:
        if required:
            raise ConfigError("missing required --traits (flag or config key)")
        return {}
    return rio.parse_traits(_path(traits, base))


def _ballot_paths(args, experiment: Mapping, base: Path) -> list[Path]:
    value = getattr(args, "ballots", None)
    if value is None:
        value = experiment.get("ballots")
    if value is None:
        return []
    if isinstance(value, (str, Path)):
        value = [value]
    return [_path(p, base) for p in value]


def _import_all(
    roster: list[VoterRecord],
    instance: ElectionInstance,
    paths: Sequence[Path],
) -> list[VoterRecord]:
    for path in paths:
        result = import_ai_ballots(path, roster, instance, on_invalid="skip")
        roster = result.roster
        for diag in result.warnings:
            _warn(f"{path}:{diag.line_number}: {diag.code}: {diag.message}")
        for diag in result.rejected:
            _warn(f"{path}:{diag.line_number}: rejected: {diag.code}: {diag.message}")
        _say(f"imported {result.attached} ballots from {path}")
    return roster


def _ai_sources(args, roster: Sequence[VoterRecord]) -> list[str]:
    flag = getattr(args, "ai_source", None)
    if flag:
        return [flag]
    found = sorted(
        {source for v in roster for source in v.ballots if source != HUMAN_SOURCE}
    )
    if not found:
        raise ConfigError("no AI-source ballots present; pass --ballots/--ai-source")
    return found


# -- subcommands -------------------------------------------------------------


def _cmd_aggregate(args) -> int:
    config, base = _load_config(args.config)
    experiment = config.get("experiment", {})
    parsed = _load_election(args, experiment, base)
    instance = parsed.instance
    rules = _rules(_pick(args.rules, experiment, "rules", "greedy,equal_shares,phragmen"))
    tie_break = _tie_break(args, experiment)
    out_dir = _output_dir(args, experiment)

    outcomes = {}
    for rule in rules:
        outcomes[rule] = aggregate(
            list(parsed.ballots), instance, AggregationConfig(rule=rule, tie_break=tie_break)
        )
    if args.controlled_by:
        anchor = AggregationRule.parse(args.controlled_by)
        anchor_outcome = outcomes.get(anchor) or aggregate(
            list(parsed.ballots), instance, AggregationConfig(rule=anchor, tie_break=tie_break)
        )
        k = len(anchor_outcome.winners)
        outcomes = {
            rule: (
                outcome
                if rule is anchor
                else controlled_winners(outcome, k, instance, tie_break)
            )
            for rule, outcome in outcomes.items()
        }

    rows = []
    for rule in rules:
        outcome = outcomes[rule]
        order = {pid: i + 1 for i, pid in enumerate(outcome.winners)}
        for project in instance.projects:
            rows.append(
                {
                    "rule": rule.value,
                    "project_id": project.id,
                    "name": project.name,
                    "cost": project.cost,
                    "support": outcome.support[project.id],
                    "selected": project.id in outcome.winner_set,
                    "selection_order": order.get(project.id),
                }
            )
    path = _report_path(out_dir, "aggregate", args.format)
    rio.write_report(rows, path, fmt=args.format, kind="aggregate")
    _say(f"wrote {path}")
    for rule in rules:
        outcome = outcomes[rule]
        _say(f"{rule.value}: winners {list(outcome.winners)} spent {outcome.spent}")
    return EXIT_OK


def _eligible_pairs(
    roster: Sequence[VoterRecord],
    instance: ElectionInstance,
    source: str,
    fmt: BallotFormat,
    derive_missing: bool,
) -> list[tuple[str, Ballot, Ballot]]:
    pairs = []
    for voter in roster:
        candidate = voter.get_ballot(source, fmt)
        if candidate is None:
            continue
        reference = voter.get_ballot(HUMAN_SOURCE, fmt)
        if reference is None and derive_missing:
            expressed = voter.get_ballot(HUMAN_SOURCE, instance.ballot_format)
            if expressed is not None:
                reference = derive_ballot(expressed, fmt, instance)
        if reference is None:
            continue
        pairs.append((voter.voter_id, reference, candidate))
    return pairs


def _cmd_consistency(args) -> int:
    config, base = _load_config(args.config)
    experiment = config.get("experiment", {})
    parsed = _load_election(args, experiment, base)
    instance = parsed.instance
    traits = _load_traits(args, experiment, base)
    roster = rio.build_roster(parsed.ballots, traits)
    roster = _import_all(roster, instance, _ballot_paths(args, experiment, base))

    sources = _ai_sources(args, roster)
    formats = _formats(
        _pick(args.formats, experiment, "formats", instance.ballot_format.value)
    )
    fractions = _fraction_list(
        _pick(args.fractions, experiment, "fractions", "0.1,0.25,0.75,1.0")
    )
    repeats = int(_pick(args.repeats, experiment, "repeats", 20))
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    reduction = _pick(args.reduction, experiment, "reduction", "voter-mean")
    if reduction not in ("voter-mean", "pooled"):
        raise ConfigError(f"unknown reduction {reduction!r}")
    seed = _seed(args, experiment)
    tie_break = _tie_break(args, experiment)
    out_dir = _output_dir(args, experiment)

    import random as _random

    rows = []
    for source in sources:
        for fmt in formats:
            pairs = _eligible_pairs(roster, instance, source, fmt, args.derive_missing)
            scores = []
            skipped = 0
            for voter_id, reference, candidate in pairs:
                try:
                    scores.append((voter_id, individual_consistency(reference, candidate, instance)))
                except UndefinedReferenceError:
                    skipped += 1
            if skipped:
                _warn(
                    f"{source}:{fmt.value}: skipped {skipped} voter(s) with no "
                    "strict pairwise preference to match"
                )
            if not scores:
                _warn(f"{source}:{fmt.value}: no comparable voter pairs")
                continue
            ordered = sorted(scores, key=lambda s: s[0])
            for frac in fractions:
                size = max(1, -(-len(ordered) * frac.numerator // frac.denominator))
                size = min(size, len(ordered))
                total = Fraction(0)
                for repeat in range(repeats):
                    rng = _random.Random(
                        derive_seed(seed, "consistency", source, fmt.value, frac, repeat)
                    )
                    sample = rng.sample(ordered, size)
                    if reduction == "voter-mean":
                        total += sum(
                            (score.value for _, score in sample), Fraction(0)
                        ) / size
                    else:
                        matched = sum(score.matched_ones for _, score in sample)
                        reference_ones = sum(score.reference_ones for _, score in sample)
                        total += Fraction(matched, reference_ones)
                rows.append(
                    {
                        "label": f"{source}:{fmt.value}",
                        "population_fraction": frac,
                        "value": total / repeats,
                        "n": size,
                        "repeats": repeats,
                    }
                )

    rules = _rules(_pick(args.rules, experiment, "rules", "greedy,equal_shares,phragmen"))
    human_ballots = [
        b
        for v in roster
        if (b := v.get_ballot(HUMAN_SOURCE, instance.ballot_format)) is not None
    ]
    for source in sources:
        ai_ballots = [
            b
            for v in roster
            if (b := v.get_ballot(source, instance.ballot_format)) is not None
        ]
        if not human_ballots or not ai_ballots:
            continue
        for rule in rules:
            reference = aggregate(
                human_ballots, instance, AggregationConfig(rule=rule, tie_break=tie_break)
            )
            candidate = aggregate(
                ai_ballots, instance, AggregationConfig(rule=rule, tie_break=tie_break)
            )
            try:
                score = collective_consistency(reference, candidate, instance)
            except UndefinedReferenceError as exc:
                _warn(f"collective:{source}:{rule.value}: {exc}")
                continue
            rows.append(
                {
                    "label": f"collective:{source}:{rule.value}",
                    "population_fraction": Fraction(1),
                    "value": score.value,
                    "n": len(ai_ballots),
                    "repeats": 1,
                }
            )

    path = _report_path(out_dir, "consistency", args.format)
    rio.write_report(
        rows,
        path,
        fmt=args.format,
        columns=["label", "population_fraction", "value", "n", "repeats"],
        kind="consistency",
    )
    _say(f"wrote {path}")
    if _figures_enabled(args, experiment):
        from . import plots

        figure = plots.consistency_figure(rows, out_dir / "consistency.png")
        _say(f"wrote {figure}")
    return EXIT_OK


def _cmd_transitivity(args) -> int:
    config, base = _load_config(args.config)
    experiment = config.get("experiment", {})
    parsed = _load_election(args, experiment, base)
    instance = parsed.instance
    traits = _load_traits(args, experiment, base)
    roster = rio.build_roster(parsed.ballots, traits)
    roster = _import_all(roster, instance, _ballot_paths(args, experiment, base))

    pair_specs = _name_list(_require(args.pairs, "--pairs"))
    source = args.source or HUMAN_SOURCE
    out_dir = _output_dir(args, experiment)

    rows = []
    summary = []
    for spec in pair_specs:
        left_name, sep, right_name = spec.partition(":")
        if not sep:
            raise ConfigError(f"pair {spec!r} must look like single:cumulative")
        left_fmt = BallotFormat.parse(left_name)
        right_fmt = BallotFormat.parse(right_name)
        if left_fmt is right_fmt:
            raise ConfigError(f"pair {spec!r} compares a format with itself")
        values = []
        for voter in roster:
            left = voter.get_ballot(source, left_fmt)
            right = voter.get_ballot(source, right_fmt)
            if left is None or right is None:
                continue
            score = transitivity_consistency(left, right, instance)
            values.append((voter.voter_id, score.value))
            rows.append(
                {
                    "pair": f"{left_fmt.value}:{right_fmt.value}",
                    "voter_id": voter.voter_id,
                    "value": score.value,
                }
            )
        if values:
            mean = sum((v for _, v in values), Fraction(0)) / len(values)
            summary.append(
                {
                    "pair": f"{left_fmt.value}:{right_fmt.value}",
                    "mean": mean,
                    "n": len(values),
                }
            )
        else:
            _warn(f"pair {spec}: no voter holds both formats under source {source!r}")

    path = _report_path(out_dir, "transitivity", args.format)
    rio.write_report(
        rows, path, fmt=args.format, columns=["pair", "voter_id", "value"], kind="transitivity"
    )
    summary_path = _report_path(out_dir, "transitivity_summary", args.format)
    rio.write_report(
        summary,
        summary_path,
        fmt=args.format,
        columns=["pair", "mean", "n"],
        kind="transitivity_summary",
    )
    _say(f"wrote {path}")
    _say(f"wrote {summary_path}")
    return EXIT_OK


def _cmd_recovery(args) -> int:
    config, base = _load_config(args.config)
    experiment = config.get("experiment", {})
    parsed = _load_election(args, experiment, base)
    instance = parsed.instance
    traits = _load_traits(args, experiment, base)
    roster = rio.build_roster(parsed.ballots, traits)
    roster = _import_all(roster, instance, _ballot_paths(args, experiment, base))

    rules = _rules(_pick(args.rules, experiment, "rules", "greedy,equal_shares,phragmen"))
    models = _models(_pick(args.models, experiment, "models", None), config)
    turnouts = _fraction_list(
        _pick(args.turnouts, experiment, "turnouts", "0.25,0.5,0.75")
    )
    representations = _fraction_list(
        _pick(args.representations, experiment, "representations", "0,0.5,1")
    )
    controls = int(_pick(args.controls, experiment, "controls", 30))
    if controls < 0:
        raise ConfigError("controls must be >= 0")
    workers = int(_pick(args.workers, experiment, "workers", os.cpu_count() or 1))
    seed = _seed(args, experiment)
    tie_break = _tie_break(args, experiment)
    ai_source = args.ai_source or experiment.get("ai_source")
    if ai_source is None and any(r > 0 for r in representations):
        ai_source = _ai_sources(args, roster)[0]
    out_dir = _output_dir(args, experiment)

    cohorts: list[tuple[str | None, set[str] | None]] = [(None, None)]
    if args.group_by:
        prefix, sep, key = args.group_by.partition(":")
        if prefix != "trait" or not sep or not key:
            raise ConfigError("--group-by takes trait:<trait-key>")
        values: dict[str, set[str]] = {}
        for voter in roster:
            value = voter.traits.get(key)
            if value is not None:
                values.setdefault(value, set()).add(voter.voter_id)
        if not values:
            raise ConfigError(f"no voter carries trait {key!r}")
        cohorts = [(f"{key}={value}", values[value]) for value in sorted(values)]

    all_cells = []
    all_pairs = []
    for label, cohort in cohorts:
        cells, pairs = sweep_with_movements(
            roster,
            instance,
            rules,
            models,
            turnouts,
            representations,
            controls,
            master_seed=seed,
            ai_source=ai_source or "ai",
            tie_break=tie_break,
            workers=workers,
            restrict_to=cohort,
            cohort_label=label,
        )
        all_cells.extend(cells)
        all_pairs.extend(pairs)

    cells_path = _report_path(out_dir, "recovery_cells", args.format)
    rio.write_report(all_cells, cells_path, fmt=args.format)
    movement_rows = [
        {
            "model_name": cell.model_name,
            "rule": cell.rule,
            "turnout_fraction": cell.turnout_fraction,
            "representation_fraction": cell.representation_fraction,
            "seed": cell.seed,
            "project_id": movement.project_id,
            "category": movement.category.value,
            "rank_in_reference": movement.rank_in_reference,
        }
        for cell, movement in all_pairs
    ]
    movements_path = _report_path(out_dir, "movements", args.format)
    rio.write_report(
        movement_rows,
        movements_path,
        fmt=args.format,
        columns=list(MOVEMENT_COLUMNS),
        kind="movements",
    )
    _say(f"wrote {cells_path}")
    _say(f"wrote {movements_path}")
    if _figures_enabled(args, experiment):
        from . import plots

        figure = plots.recovery_figure(all_cells, out_dir / "recovery.png")
        _say(f"wrote {figure}")
    return EXIT_OK


def _cmd_retention(args) -> int:
    config, base = _load_config(args.config)
    experiment = config.get("experiment", {})
    parsed = _load_election(args, experiment, base)
    instance = parsed.instance
    traits = _load_traits(args, experiment, base)
    roster = rio.build_roster(parsed.ballots, traits)

    rules = _rules(_pick(args.rules, experiment, "rules", "greedy,equal_shares,phragmen"))
    fractions = _fraction_list(
        _pick(args.fractions, experiment, "fractions", "0.2,0.4,0.5,0.6,0.8")
    )
    repeats = int(_pick(args.repeats, experiment, "repeats", 40))
    seed = _seed(args, experiment)
    tie_break = _tie_break(args, experiment)
    out_dir = _output_dir(args, experiment)

    rows = []
    curves = {}
    for rule in rules:
        curve = retention_curve(
            roster, instance, rule, fractions, repeats, seed, tie_break=tie_break
        )
        curves[rule.value] = curve
        for frac, retained in curve.items():
            rows.append(
                {
                    "rule": rule.value,
                    "abstention_fraction": frac,
                    "retention": retained,
                    "repeats": repeats,
                }
            )

    path = _report_path(out_dir, "retention", args.format)
    rio.write_report(
        rows,
        path,
        fmt=args.format,
        columns=["rule", "abstention_fraction", "retention", "repeats"],
        kind="retention",
    )
    _say(f"wrote {path}")
    if _figures_enabled(args, experiment):
        from . import plots

        figure = plots.retention_figure(curves, out_dir / "retention.png")
        _say(f"wrote {figure}")
    return EXIT_OK


def _auto_affinities(
    roster: Sequence[VoterRecord], instance: ElectionInstance, seed: int
) -> dict[str, dict[str, float]]:
    """Reproducible stand-in policy: per (trait, project) uniform in [-1, 1].

    Uses only traits every voter carries, so synthesis never trips a
    missing-trait error on a partial roster.
    """
    import random as _random

    shared: set[str] | None = None
    for voter in roster:
        keys = set(voter.traits)
        shared = keys if shared is None else shared & keys
    shared = shared or set()
    weights = {}
    for trait in sorted(shared):
        weights[trait] = {
            project_id: _random.Random(
                derive_seed(seed, "affinity", trait, project_id)
            ).uniform(-1, 1)
            for project_id in instance.project_ids
        }
    return weights


def _persona_policy(
    config: Mapping, args, roster: Sequence[VoterRecord], instance: ElectionInstance
) -> PersonaPolicy:
    personas = config.get("personas", {})
    seed = int(_pick(args.seed, personas, "seed", 0))
    noise = float(_pick(args.noise_sigma, personas, "noise_sigma", 0.0))
    affinities = personas.get("affinity")
    if affinities:
        weights = {
            str(trait): {str(p): float(w) for p, w in per_project.items()}
            for trait, per_project in affinities.items()
        }
        for trait, per_project in weights.items():
            for project_id in per_project:
                if not instance.has_project(project_id):
                    raise ConfigError(
                        f"personas.affinity.{trait}: unknown project {project_id}"
                    )
    else:
        weights = _auto_affinities(roster, instance, seed)
    return PersonaPolicy(
        name=str(personas.get("name", "auto")),
        trait_weights=weights,
        noise_sigma=noise,
        seed=seed,
    )


def _cmd_synth(args) -> int:
    config, base = _load_config(args.config)
    experiment = config.get("experiment", {})
    parsed = _load_election(args, experiment, base)
    instance = parsed.instance
    traits = _load_traits(args, experiment, base, required=False)
    roster = rio.build_roster(parsed.ballots, traits)

    formats = _formats(
        _pick(args.formats, experiment, "formats", instance.ballot_format.value)
    )
    source = args.source or experiment.get("ai_source") or "ai:synthetic"
    policy = _persona_policy(config, args, roster, instance)
    out_dir = _output_dir(args, experiment)
    path = Path(args.output) if args.output else out_dir / "synthetic_ballots.jsonl"

    synthesized = []
    for voter in roster:
        record = voter
        for fmt in formats:
            record = record.with_ballot(source, synth_ballot(record, instance, policy, fmt))
        synthesized.append(record)
    count = export_ballots(
        synthesized,
        path,
        sources=[source],
        meta={"policy": policy.name, "noise_sigma": policy.noise_sigma, "seed": policy.seed},
    )
    _say(f"wrote {path} ({count} lines)")
    return EXIT_OK


def _cmd_validate(args) -> int:
    config, base = _load_config(args.config)
    experiment = config.get("experiment", {})
    parsed = _load_election(args, experiment, base, strict=args.strict)
    instance = parsed.instance
    problems = len(parsed.diagnostics)
    _say(
        f"election ok: {len(instance.projects)} projects, "
        f"{len(parsed.ballots)} valid ballots, {problems} rejected"
    )
    traits = _load_traits(args, experiment, base)
    if traits:
        _say(f"traits ok: {len(traits)} voters")
    roster = rio.build_roster(parsed.ballots, traits)
    for path in _ballot_paths(args, experiment, base):
        result = import_ai_ballots(
            path, roster, instance, on_invalid="fail" if args.strict else "skip"
        )
        roster = result.roster
        for diag in result.warnings:
            _warn(f"{path}:{diag.line_number}: {diag.code}: {diag.message}")
        for diag in result.rejected:
            _warn(f"{path}:{diag.line_number}: rejected: {diag.code}: {diag.message}")
        problems += len(result.rejected)
        _say(f"ballot file ok: {path} ({result.attached} attached)")
    if problems:
        raise ValidationFailure(f"{problems} invalid record(s); see stderr")
    return EXIT_OK


def _cmd_overlap(args) -> int:
    config, base = _load_config(args.config)
    experiment = config.get("experiment", {})
    traits = _load_traits(args, experiment, base, required=True)
    roster = rio.build_roster([], traits)
    models = _models(_pick(args.models, experiment, "models", None), config)
    out_dir = _output_dir(args, experiment)

    report = overlap_report(roster, models)
    rows = [
        {"models": "+".join(sorted(subset)), "size": len(subset), "count": count}
        for subset, count in report.items()
    ]
    rows.sort(key=lambda r: (r["size"], r["models"]))
    path = _report_path(out_dir, "overlap", args.format)
    rio.write_report(
        rows, path, fmt=args.format, columns=["models", "size", "count"], kind="overlap"
    )
    _say(f"wrote {path}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="repvote", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: _Parser) -> None:
        p.add_argument("--config", help="TOML config file; flags override it")
        p.add_argument("--election", help="election file (META/PROJECTS/VOTES)")
        p.add_argument("--traits", help="voter traits CSV")
        p.add_argument("--output-dir", help=f"report directory (default ${OUTPUT_DIR_ENV} or .)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--seed", type=int, help="master seed (default 0)")
        p.add_argument("--tie-break", choices=("lex", "presentation"))
        p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    p = sub.add_parser("aggregate", help="run voting rules on an election file")
    common(p)
    p.add_argument("--rules", help="comma-separated rule names")
    p.add_argument(
        "--controlled-by",
        metavar="RULE",
        help="truncate each other rule's winners to this rule's winner count",
    )
    p.set_defaults(func=_cmd_aggregate)

    p = sub.add_parser("consistency", help="pairwise agreement of AI vs human ballots")
    common(p)
    p.add_argument("--ballots", action="append", help="ballot-exchange JSONL (repeatable)")
    p.add_argument("--ai-source", help="source label to compare (default: all found)")
    p.add_argument("--formats", help="comma-separated ballot formats")
    p.add_argument("--fractions", help="population fractions, e.g. 0.1,0.25,1")
    p.add_argument("--repeats", type=int, help="samples per fraction (default 20)")
    p.add_argument("--reduction", choices=("voter-mean", "pooled"))
    p.add_argument("--rules", help="rules for the collective comparison")
    p.add_argument(
        "--derive-missing",
        action="store_true",
        help="derive the human reference ballot when the format allows it",
    )
    p.set_defaults(func=_cmd_consistency)

    p = sub.add_parser("transitivity", help="same-source agreement across ballot formats")
    common(p)
    p.add_argument("--ballots", action="append", help="ballot-exchange JSONL (repeatable)")
    p.add_argument("--pairs", help="format pairs, e.g. single:cumulative,approval:score")
    p.add_argument("--source", help=f"ballot source to inspect (default {HUMAN_SOURCE})")
    p.set_defaults(func=_cmd_transitivity)

    p = sub.add_parser("recovery", help="abstention/representation sweep with controls")
    common(p)
    p.add_argument("--ballots", action="append", help="ballot-exchange JSONL (repeatable)")
    p.add_argument("--ai-source", help="source label for representative ballots")
    p.add_argument("--rules", help="comma-separated rule names")
    p.add_argument("--models", help="comma-separated abstention model names")
    p.add_argument("--turnouts", help="turnout fractions (default 0.25,0.5,0.75)")
    p.add_argument("--representations", help="representation fractions (default 0,0.5,1)")
    p.add_argument("--controls", type=int, help="random control groups per cell (default 30)")
    p.add_argument("--workers", type=int, help="parallel workers (default: cpu count)")
    p.add_argument("--group-by", metavar="trait:KEY", help="cohort sweeps by trait value")
    p.set_defaults(func=_cmd_recovery)

    p = sub.add_parser("retention", help="winner retention under random abstention")
    common(p)
    p.add_argument("--rules", help="comma-separated rule names")
    p.add_argument("--fractions", help="abstention fractions (default 0.2,...,0.8)")
    p.add_argument("--repeats", type=int, help="resamples per fraction (default 40)")
    p.set_defaults(func=_cmd_retention)

    p = sub.add_parser("synth", help="generate synthetic persona ballots as JSONL")
    common(p)
    p.add_argument("--formats", help="ballot formats to synthesize")
    p.add_argument("--source", help="source label (default ai:synthetic)")
    p.add_argument("--noise-sigma", type=float, help="utility noise (default 0)")
    p.add_argument("--output", help="output JSONL path")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("validate", help="check election/traits/ballot files")
    common(p)
    p.add_argument("--ballots", action="append", help="ballot-exchange JSONL (repeatable)")
    p.add_argument("--strict", action="store_true", help="fail on first invalid record")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("overlap", help="co-membership counts of abstention model flags")
    common(p)
    p.add_argument("--models", help="comma-separated abstention model names")
    p.set_defaults(func=_cmd_overlap)

    return parser


_PARSE_ERRORS = (
    ParseError,
    rio.CountMismatchError,
    rio.MissingHeaderError,
    rio.DuplicateVoterError,
    UnicodeDecodeError,
    json.JSONDecodeError,
)

_VALIDATION_ERRORS = (
    FormatViolationError,
    UnknownProjectError,
    UnderivableDirectionError,
    EmptyBallotSetError,
    MixedFormatsError,
    FormatMismatchError,
    UndefinedReferenceError,
    SameFormatError,
    MissingTraitError,
    SizeTooLargeError,
    InvalidFractionError,
    MissingAIBallotsError,
    NoLossToRecoverError,
    InvalidPError,
    UnknownVoterError,
    ValidationFailure,
)

_CONFIG_ERRORS = (UnknownRuleError, ConfigError, OSError, ValueError)


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        exc.parser.print_usage(sys.stderr)
        _warn(f"error: {exc}")
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _PARSE_ERRORS as exc:
        _warn(f"parse error: {exc}")
        return EXIT_PARSE
    except _VALIDATION_ERRORS as exc:
        _warn(f"validation error: {exc}")
        return EXIT_VALIDATION
    except _CONFIG_ERRORS as exc:
        _warn(f"config error: {exc}")
        return EXIT_CONFIG
    except RepvoteError as exc:
        _warn(f"error: {exc}")
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
