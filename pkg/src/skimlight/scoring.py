"""Priority scoring: label-model posterior + abstract similarity + position.

Salience is the tf-idf cosine between each body sentence and the whole
abstract, with IDF statistics taken over the document's own sentences.
Cosines below the similarity threshold contribute nothing, mirroring a
hard not-relevant cutoff.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

from skimlight.label_model import FacetPosterior
from skimlight.model import FACET_RANK, FACETS, Facet, PaperDocument

DEFAULT_STOPWORDS = frozenset(
    """a an and are as at be but by for from has have in is it its of on or
    that the their this to was we were which will with our they them then
    than these those not no can may might do does did been being over under
    into about between each both more most other some such only own same so
    too very just also""".split()
)

_TOKEN_RE = re.compile(r"\w+")


@dataclass(frozen=True)
class SalienceConfig:
    similarity_threshold: float = 0.25
    stopwords: frozenset[str] = DEFAULT_STOPWORDS
    w_posterior: float = 0.6
    w_salience: float = 0.3
    w_position: float = 0.1
    first_sentence_bonus: float = 1.0
    last_sentence_bonus: float = 0.5
    candidate_floor: float = 0.15

    def __post_init__(self):
        weights = (self.w_posterior, self.w_salience, self.w_position)
        if any(w < 0 for w in weights) or abs(sum(weights) - 1.0) > 1e-9:
            raise ValueError("weights must be non-negative and sum to 1")
        if not 0.0 <= self.similarity_threshold <= 1.0:
            raise ValueError("similarity_threshold must be in [0, 1]")


@dataclass(frozen=True)
class Candidate:
    """A (sentence, facet) pair eligible for highlighting.

    priority recomposes exactly from the stored components:
    w_posterior * posterior + w_salience * salience + w_position * position.
    """

    sentence_id: str
    facet: Facet
    priority: float
    posterior: float
    salience: float
    position: float
    section_path: tuple[str, ...]


def _tokens(text: str, stopwords: frozenset[str]) -> list[str]:
    return [t for t in _TOKEN_RE.findall(text.casefold()) if t not in stopwords]


def _cosine(a: Mapping[str, float], b: Mapping[str, float]) -> float:
    if not a or not b:
        return 0.0
    dot = sum(w * b[t] for t, w in a.items() if t in b)
    norm_a = math.sqrt(sum(w * w for w in a.values()))
    norm_b = math.sqrt(sum(w * w for w in b.values()))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return dot / (norm_a * norm_b)


def _tfidf(counts: Counter[str], idf: Mapping[str, float]) -> dict[str, float]:
    return {t: c * idf[t] for t, c in counts.items()}


def tfidf_salience(
    document: PaperDocument, config: SalienceConfig | None = None
) -> dict[str, float]:
    """Cosine similarity of each body sentence to the whole abstract.

    With an empty abstract there is no similarity signal, so every sentence
    gets the neutral value 0.5.
    """
    config = config or SalienceConfig()
    body = document.body_sentences
    if not document.abstract:
        return {s.sentence_id: 0.5 for s in body}

    sentence_tokens = {
        s.sentence_id: _tokens(s.text, config.stopwords)
        for s in document.all_sentences
    }
    n_docs = len(document.all_sentences)
    df: Counter[str] = Counter()
    for toks in sentence_tokens.values():
        df.update(set(toks))
    idf = {t: 1.0 + math.log(n_docs / df[t]) for t in df}

    abstract_counts: Counter[str] = Counter()
    for s in document.abstract:
        abstract_counts.update(sentence_tokens[s.sentence_id])
    abstract_vec = _tfidf(abstract_counts, idf)

    out: dict[str, float] = {}
    for s in body:
        vec = _tfidf(Counter(sentence_tokens[s.sentence_id]), idf)
        cos = _cosine(vec, abstract_vec)
        out[s.sentence_id] = min(1.0, max(0.0, cos))
    return out


def _position_bonus(document: PaperDocument, config: SalienceConfig) -> dict[str, float]:
    out: dict[str, float] = {}
    for section in document.sections:
        for paragraph in section.paragraphs:
            last = len(paragraph.sentences) - 1
            for i, s in enumerate(paragraph.sentences):
                if i == 0:
                    out[s.sentence_id] = config.first_sentence_bonus
                elif i == last:
                    out[s.sentence_id] = config.last_sentence_bonus
                else:
                    out[s.sentence_id] = 0.0
    return out


def score_candidates(
    document: PaperDocument,
    posteriors: Iterable[FacetPosterior],
    config: SalienceConfig | None = None,
) -> list[Candidate]:
    """One candidate per (body sentence, facet) clearing the posterior floor.

    Abstract sentences are never candidates; readers have already read the
    abstract. Ordering is (canonical facet order, priority desc, position
    in document).
    """
    config = config or SalienceConfig()
    posterior_map = {p.sentence_id: p for p in posteriors}
    salience_raw = tfidf_salience(document, config)
    position = _position_bonus(document, config)

    candidates: list[Candidate] = []
    for sentence in document.body_sentences:
        posterior = posterior_map[sentence.sentence_id]
        raw = salience_raw[sentence.sentence_id]
        salience = raw if raw >= config.similarity_threshold else 0.0
        pos = position[sentence.sentence_id]
        path = document.section_path_of(sentence.sentence_id)
        for facet in FACETS:
            p = posterior.prob(facet)
            if p < config.candidate_floor:
                continue
            priority = (
                config.w_posterior * p
                + config.w_salience * salience
                + config.w_position * pos
            )
            candidates.append(
                Candidate(
                    sentence_id=sentence.sentence_id,
                    facet=facet,
                    priority=priority,
                    posterior=p,
                    salience=salience,
                    position=pos,
                    section_path=path,
                )
            )

    ordinal = {s.sentence_id: s.global_ordinal for s in document.body_sentences}
    candidates.sort(
        key=lambda c: (FACET_RANK[c.facet], -c.priority, ordinal[c.sentence_id])
    )
    return candidates
