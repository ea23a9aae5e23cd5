"""Extract ballot entries from model reply text.

First pass looks for the constrained "project_id:points" pairs the prompt
asks for. When none are present, approval and single-choice replies fall back
to bare project mentions; score and cumulative replies cannot (points carry
information), so they fail parsing instead.
"""

from __future__ import annotations

import re

from repvote import BallotFormat, ElectionInstance

from .prompts import HarnessError


class ParseFailure(HarnessError):
    pass


def _id_alternation(instance: ElectionInstance) -> str:
    # Longest first so P10 is not eaten by P1.
    ids = sorted(instance.project_ids, key=len, reverse=True)
    return "|".join(re.escape(pid) for pid in ids)


def _pair_pattern(instance: ElectionInstance) -> re.Pattern:
    ids = _id_alternation(instance)
    return re.compile(
        rf"(?<![A-Za-z0-9_])({ids})(?![A-Za-z0-9_])\s*(?:[:=→-]|\s)\s*(\d+)"
    )


def _mention_pattern(instance: ElectionInstance) -> re.Pattern:
    ids = _id_alternation(instance)
    return re.compile(rf"(?<![A-Za-z0-9_])({ids})(?![A-Za-z0-9_])")


def extract_entries(
    text: str, instance: ElectionInstance, fmt: BallotFormat
) -> dict[str, int]:
    """Entries in reply order; later mentions of a project override earlier.

    Raises ParseFailure when nothing usable is found. Zero and negative
    weights are dropped (an explicit 0 means not chosen); approval weights
    normalize to 1 whatever the reply said.
    """
    pairs = _pair_pattern(instance).findall(text)
    if pairs:
        entries: dict[str, int] = {}
        for pid, raw in pairs:
            weight = int(raw)
            if weight <= 0:
                entries.pop(pid, None)
                continue
            entries[pid] = weight
        if not entries:
            raise ParseFailure("every extracted pair had zero points")
        if fmt is BallotFormat.APPROVAL:
            return {pid: 1 for pid in entries}
        if fmt is BallotFormat.SINGLE:
            best = max(entries.items(), key=lambda kv: (kv[1], -_order(entries, kv[0])))
            return {best[0]: 1}
        return entries
    if fmt in (BallotFormat.APPROVAL, BallotFormat.SINGLE):
        mentions = _mention_pattern(instance).findall(text)
        if not mentions:
            raise ParseFailure("no recognizable project references")
        if fmt is BallotFormat.SINGLE:
            return {mentions[0]: 1}
        seen = dict.fromkeys(mentions)
        return {pid: 1 for pid in seen}
    raise ParseFailure("no project_id:points pairs found")


def _order(entries: dict[str, int], pid: str) -> int:
    return list(entries).index(pid)
