"""End-to-end processing: ingest bytes, vote, aggregate, score, plan.

The label model is applied, not fit, at ingestion time: posteriors come
from calibrated parameters shipped as package data (or supplied via
config). Fitting with EM is a development-time activity over a corpus;
per-document maximum-likelihood fits are degenerate at desk scale because
rare facets form clusters of two or three sentences.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from importlib import resources

from skimlight import __version__
from skimlight.ingest import SegmenterConfig, load_canonical, parse_plain_text
from skimlight.label_model import (
    FacetPosterior,
    LabelModelParams,
    initial_params,
    params_from_json,
    predict,
)
from skimlight.labeling import (
    VOTE_NONE,
    LabelingFunctionSpec,
    LabelMatrix,
    apply_lfs,
    builtin_lfs,
)
from skimlight.model import PaperDocument, SourceFormat
from skimlight.scoring import tfidf_salience
from skimlight.planner import (
    HighlightPlan,
    SectionFacetMap,
    build_plan,
    enforce_section_consistency,
    resolve_facets,
)
from skimlight.scoring import Candidate, SalienceConfig, score_candidates

PIPELINE_VERSION = __version__


@dataclass(frozen=True)
class PipelineConfig:
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    salience: SalienceConfig = field(default_factory=SalienceConfig)
    lf_bank: tuple[LabelingFunctionSpec, ...] | None = None  # None = builtin
    label_params: LabelModelParams | None = None  # None = packaged defaults
    section_map: SectionFacetMap = field(default_factory=SectionFacetMap)
    seed: int = 0

    def lfs(self) -> list[LabelingFunctionSpec]:
        return list(self.lf_bank) if self.lf_bank is not None else builtin_lfs()


def default_label_params() -> LabelModelParams:
    """Calibrated parameters for the builtin bank, shipped as package data."""
    data = resources.files("skimlight.data").joinpath("default_params.json").read_bytes()
    return params_from_json(data)


def params_for_matrix(matrix: LabelMatrix, overlay: LabelModelParams) -> LabelModelParams:
    """Adapt calibrated parameters to whatever LFs the matrix actually has.

    Accuracies come from the overlay where the LF is known; unknown LFs get
    the flat default. Propensities are the matrix's own coverage (they do
    not affect posteriors).
    """
    base = initial_params(matrix)
    accuracy = {
        lf_id: overlay.lf_accuracy.get(lf_id, base.lf_accuracy[lf_id])
        for lf_id in matrix.lf_ids
    }
    return replace(base, class_priors=overlay.class_priors, lf_accuracy=accuracy)


@dataclass(frozen=True)
class PipelineResult:
    document: PaperDocument
    matrix: LabelMatrix
    params: LabelModelParams
    posteriors: list[FacetPosterior]
    candidates: list[Candidate]
    plan: HighlightPlan


def content_paper_id(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:16]


def ingest_bytes(
    data: bytes,
    source_format: SourceFormat,
    config: PipelineConfig | None = None,
) -> PaperDocument:
    """Parse input and re-key the document to its content hash, so identical
    uploads always land on the same paper."""
    config = config or PipelineConfig()
    paper_id = content_paper_id(data)
    if source_format is SourceFormat.CANONICAL:
        document = load_canonical(data)
    else:
        document = parse_plain_text(
            data.decode("utf-8"), config.segmenter, paper_id=paper_id
        )
    if document.paper_id != paper_id:
        document = replace(document, paper_id=paper_id)
    return document


DISSIMILARITY_LF_ID = "abstract_dissimilarity"


def add_dissimilarity_negatives(
    matrix: LabelMatrix,
    document: PaperDocument,
    salience: dict[str, float],
    threshold: float,
) -> LabelMatrix:
    """Vote not-salient on body sentences far from the abstract.

    Only sentences no keyword LF touched receive the negative vote. This
    anchors the not-salient class during EM; without it nothing ever votes
    against salience and the priors can drift to a degenerate solution.
    """
    voted = {sentence_id for (_lf, sentence_id) in matrix.votes}
    votes = dict(matrix.votes)
    for sentence in document.body_sentences:
        sid = sentence.sentence_id
        if sid not in voted and salience.get(sid, 1.0) < threshold:
            votes[(DISSIMILARITY_LF_ID, sid)] = VOTE_NONE
    return LabelMatrix(
        lf_ids=matrix.lf_ids + (DISSIMILARITY_LF_ID,),
        sentence_ids=matrix.sentence_ids,
        votes=votes,
    )


def run_pipeline(
    document: PaperDocument, config: PipelineConfig | None = None
) -> PipelineResult:
    config = config or PipelineConfig()
    matrix = apply_lfs(document, config.lfs())
    if document.abstract:
        matrix = add_dissimilarity_negatives(
            matrix,
            document,
            tfidf_salience(document, config.salience),
            config.salience.similarity_threshold,
        )
    overlay = config.label_params or default_label_params()
    params = params_for_matrix(matrix, overlay)
    posteriors = predict(matrix, params)
    candidates = score_candidates(document, posteriors, config.salience)
    candidates = resolve_facets(candidates)
    candidates = enforce_section_consistency(candidates, config.section_map)
    plan = build_plan(candidates, document)
    return PipelineResult(
        document=document,
        matrix=matrix,
        params=params,
        posteriors=posteriors,
        candidates=candidates,
        plan=plan,
    )
