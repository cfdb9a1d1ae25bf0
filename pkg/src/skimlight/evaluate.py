"""Sentence-level precision/recall/F1 against gold salience annotations.

Gold format (UTF-8 JSON): a single object or a list of objects, each
{"paper_id": ..., "salient": [sentence_id, ...],
 "facets": {sentence_id: facet, ...}?}.

Conventions: with no predictions, precision is reported as 0 (not
undefined); F1 is 0 whenever precision + recall is 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from skimlight.errors import MalformedInput
from skimlight.model import FACETS, Facet


@dataclass(frozen=True)
class GoldPaper:
    paper_id: str
    salient: frozenset[str]
    facets: Mapping[str, Facet] = field(default_factory=dict)


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


def prf(tp: int, fp: int, fn: int) -> PRF:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (
        2 * precision * recall / (precision + recall)
        if precision + recall
        else 0.0
    )
    return PRF(precision, recall, f1, tp, fp, fn)


def salience_prf(predicted: Iterable[str], gold: Iterable[str]) -> PRF:
    predicted_set = set(predicted)
    gold_set = set(gold)
    tp = len(predicted_set & gold_set)
    return prf(tp, len(predicted_set - gold_set), len(gold_set - predicted_set))


@dataclass(frozen=True)
class EvalReport:
    salience: PRF
    per_facet: Mapping[Facet, PRF]
    facet_micro: PRF | None
    facet_macro_f1: float | None

    def as_dict(self) -> dict:
        out: dict = {
            "salience": vars(self.salience),
            "per_facet": {f.value: vars(m) for f, m in self.per_facet.items()},
        }
        if self.facet_micro is not None:
            out["facet_micro"] = vars(self.facet_micro)
        if self.facet_macro_f1 is not None:
            out["facet_macro_f1"] = self.facet_macro_f1
        return out


def evaluate(
    predicted: Iterable[tuple[str, Facet]],
    gold: GoldPaper,
) -> EvalReport:
    """Score visible (sentence, facet) pairs against one gold paper."""
    pairs = list(predicted)
    salience = salience_prf((sid for sid, _ in pairs), gold.salient)

    per_facet: dict[Facet, PRF] = {}
    facet_micro = None
    macro = None
    if gold.facets:
        tp = fp = fn = 0
        f1s = []
        for facet in FACETS:
            pred_f = {sid for sid, f in pairs if f == facet}
            gold_f = {sid for sid, f in gold.facets.items() if f == facet}
            m = salience_prf(pred_f, gold_f)
            per_facet[facet] = m
            tp, fp, fn = tp + m.tp, fp + m.fp, fn + m.fn
            f1s.append(m.f1)
        facet_micro = prf(tp, fp, fn)
        macro = sum(f1s) / len(f1s)
    return EvalReport(
        salience=salience,
        per_facet=per_facet,
        facet_micro=facet_micro,
        facet_macro_f1=macro,
    )


def parse_gold(data: bytes) -> list[GoldPaper]:
    try:
        payload = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedInput(f"gold file is not UTF-8 JSON: {exc}") from exc
    if isinstance(payload, dict):
        payload = [payload]
    if not isinstance(payload, list):
        raise MalformedInput("gold file must be an object or a list of objects")
    out = []
    for i, entry in enumerate(payload):
        if not isinstance(entry, dict):
            raise MalformedInput(f"gold entry {i} must be an object")
        try:
            facets = {
                sid: Facet(value)
                for sid, value in entry.get("facets", {}).items()
            }
            out.append(
                GoldPaper(
                    paper_id=entry["paper_id"],
                    salient=frozenset(entry["salient"]),
                    facets=facets,
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedInput(f"gold entry {i}: {exc}") from exc
    return out
