"""Rank refinement, wasted-effort measurement and with/without comparison."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping

from .purification import PurifiedSpectra


class RefineVariant(str, enum.Enum):
    PRODUCT = "product"  # norm * (1 + ratio) / 2
    AVERAGE = "average"  # (norm + ratio) / 2
    GEOMETRIC = "geometric"  # 2 * norm * ratio / (norm + ratio)


class Outcome(str, enum.Enum):
    POSITIVE = "Positive"
    NEGATIVE = "Negative"
    NEUTRAL = "Neutral"


@dataclass(frozen=True)
class RefinedScores:
    susp: dict[int, float]
    norm: dict[int, float]
    ratio: dict[int, float]
    score: dict[int, float]


@dataclass(frozen=True)
class EffortReport:
    faulty: int
    effort: float
    technique: str
    purified: bool


@dataclass(frozen=True)
class ComparisonOutcome:
    outcome: Outcome
    stmt_save: float


def ratio(stmt: int, purified: PurifiedSpectra) -> float:
    covering = purified.b_ef(stmt)
    if covering == 0:
        return 0.0
    return covering / (covering + purified.b_nf(stmt))


def normalize(susp_map: Mapping[int, float]) -> dict[int, float]:
    if not susp_map:
        raise ValueError("cannot normalize an empty suspiciousness map")
    lo, hi = min(susp_map.values()), max(susp_map.values())
    if hi == lo:
        return {s: 1.0 for s in susp_map}
    return {s: (v - lo) / (hi - lo) for s, v in susp_map.items()}


def combine(norm: float, ratio_: float, variant: RefineVariant = RefineVariant.PRODUCT) -> float:
    if variant is RefineVariant.PRODUCT:
        return norm * (1 + ratio_) / 2
    if variant is RefineVariant.AVERAGE:
        return (norm + ratio_) / 2
    if variant is RefineVariant.GEOMETRIC:
        den = norm + ratio_
        return 2 * norm * ratio_ / den if den else 0.0
    raise ValueError(variant)


def refine(
    susp_map: Mapping[int, float],
    purified: PurifiedSpectra,
    variant: RefineVariant = RefineVariant.PRODUCT,
) -> RefinedScores:
    norm = normalize(susp_map)
    ratios = {s: ratio(s, purified) for s in susp_map}
    score = {s: combine(norm[s], ratios[s], variant) for s in susp_map}
    return RefinedScores(dict(susp_map), norm, ratios, score)


def stmt_effort(scores: Mapping[int, float], faulty: int) -> float:
    """Statements ranked above the faulty one, plus half of its tie group, plus one half.

    The tie group includes the faulty statement itself.
    """
    if faulty not in scores:
        raise KeyError(f"faulty statement {faulty} is not a candidate statement")
    target = scores[faulty]
    above = sum(1 for v in scores.values() if v > target)
    tied = sum(1 for v in scores.values() if v == target)
    return above + 0.5 * tied + 0.5


def compare(effort_original: float, effort_purified: float) -> ComparisonOutcome:
    save = effort_original - effort_purified
    if save > 0:
        return ComparisonOutcome(Outcome.POSITIVE, save)
    if save < 0:
        return ComparisonOutcome(Outcome.NEGATIVE, save)
    return ComparisonOutcome(Outcome.NEUTRAL, 0.0)


def ordered(scores: Mapping[int, float]) -> list[int]:
    """Statements by descending score; ties broken by ordinal for stable output."""
    return sorted(scores, key=lambda s: (-scores[s], s))
