"""Aggregate noisy LF votes into per-sentence facet posteriors.

Two aggregators are provided: a majority-vote baseline and a naive-Bayes
generative model fit with EM. The generative story: each LF independently
fires with probability ``lf_propensity``; when it fires it votes the true
class with probability ``lf_accuracy`` and otherwise spreads its error mass
uniformly over the wrong classes. A salience-only vote names no class: it
is correct exactly when the true class is any facet, so its error mass has
a single wrong class (none) to land on.

All computation is done in the log domain. Classes are indexed in canonical
facet order with the not-salient class last: objective, novelty, method,
result, none.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from skimlight.errors import MalformedInput, NoSignal
from skimlight.labeling import VOTE_SALIENT, LabelMatrix
from skimlight.model import FACET_RANK, FACETS, Facet

N_CLASSES = 5
CLASS_NONE = 4

MODEL_VERSION = "skimlight-lm/1"

ACCURACY_CLAMP = (0.01, 0.99)
_PROPENSITY_FLOOR = 1e-6
_PRIOR_FLOOR = 1e-12

DEFAULT_PRIORS = (0.1, 0.1, 0.1, 0.1, 0.6)
DEFAULT_ACCURACY = 0.7


@dataclass(frozen=True)
class LabelModelParams:
    class_priors: tuple[float, float, float, float, float]
    lf_accuracy: Mapping[str, float]
    lf_propensity: Mapping[str, float]
    em_max_iters: int = 100
    em_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if abs(sum(self.class_priors) - 1.0) > 1e-9:
            raise ValueError("class_priors must sum to 1")
        for lf_id, a in self.lf_accuracy.items():
            if not 0.0 < a < 1.0:
                raise ValueError(f"accuracy for {lf_id!r} must be inside (0, 1)")
        for lf_id, p in self.lf_propensity.items():
            if not 0.0 < p <= 1.0:
                raise ValueError(f"propensity for {lf_id!r} must be inside (0, 1]")


@dataclass(frozen=True)
class FacetPosterior:
    sentence_id: str
    probs: tuple[float, float, float, float, float]

    def prob(self, facet: Facet) -> float:
        return self.probs[FACET_RANK[facet]]

    @property
    def none_prob(self) -> float:
        return self.probs[CLASS_NONE]

    def top_label(self) -> Facet | None:
        """Argmax class; ties resolve in canonical order, facets before none."""
        best = max(range(N_CLASSES), key=lambda i: (self.probs[i], -i))
        return None if best == CLASS_NONE else FACETS[best]


def initial_params(
    matrix: LabelMatrix,
    seed: int = 0,
    em_max_iters: int = 100,
    em_tol: float = 1e-6,
) -> LabelModelParams:
    """Reproducible starting point: none-heavy priors, flat accuracies,
    propensity from empirical coverage."""
    propensity = {
        lf_id: min(1.0, max(_PROPENSITY_FLOOR, matrix.coverage(lf_id)))
        for lf_id in matrix.lf_ids
    }
    return LabelModelParams(
        class_priors=DEFAULT_PRIORS,
        lf_accuracy={lf_id: DEFAULT_ACCURACY for lf_id in matrix.lf_ids},
        lf_propensity=propensity,
        em_max_iters=em_max_iters,
        em_tol=em_tol,
        seed=seed,
    )


def _vote_array(matrix: LabelMatrix) -> np.ndarray:
    votes = np.full((len(matrix.lf_ids), len(matrix.sentence_ids)), -1, dtype=np.int64)
    lf_index = {lf_id: i for i, lf_id in enumerate(matrix.lf_ids)}
    sent_index = {sid: i for i, sid in enumerate(matrix.sentence_ids)}
    for (lf_id, sentence_id), vote in matrix.votes.items():
        votes[lf_index[lf_id], sent_index[sentence_id]] = vote
    return votes


def _log_vote_likelihood(vote_row: np.ndarray, accuracy: float) -> np.ndarray:
    """Per-class log q(vote | class) for one LF's fired votes.

    vote_row: (n_fired,) codes in 0..5. Returns (n_fired, N_CLASSES).
    """
    n = len(vote_row)
    out = np.full((n, N_CLASSES), math.log((1.0 - accuracy) / (N_CLASSES - 1)))
    rows = np.arange(n)
    class_mask = vote_row < VOTE_SALIENT
    out[rows[class_mask], vote_row[class_mask]] = math.log(accuracy)
    salient = rows[~class_mask]
    out[salient, :CLASS_NONE] = math.log(accuracy)
    out[salient, CLASS_NONE] = math.log(1.0 - accuracy)
    return out


def _log_joint(votes: np.ndarray, params: LabelModelParams, lf_ids: Sequence[str]) -> np.ndarray:
    """log p(class) + log p(fired votes | class), per sentence × class."""
    n_sent = votes.shape[1]
    joint = np.tile(np.log(np.asarray(params.class_priors)), (n_sent, 1))
    for j, lf_id in enumerate(lf_ids):
        fired = votes[j] >= 0
        if not fired.any():
            continue
        joint[fired] += _log_vote_likelihood(votes[j][fired], params.lf_accuracy[lf_id])
    return joint


def _posteriors(joint: np.ndarray) -> np.ndarray:
    m = joint.max(axis=1, keepdims=True)
    shifted = np.exp(joint - m)
    return shifted / shifted.sum(axis=1, keepdims=True)


def predict(matrix: LabelMatrix, params: LabelModelParams) -> list[FacetPosterior]:
    """Pure E-step posteriors; all-abstain sentences get the class priors."""
    votes = _vote_array(matrix)
    gamma = _posteriors(_log_joint(votes, params, matrix.lf_ids))
    fired_any = (votes >= 0).any(axis=0)
    return [
        FacetPosterior(
            sentence_id=sid,
            probs=(
                tuple(float(x) for x in gamma[i])
                if fired_any[i]
                else tuple(params.class_priors)
            ),
        )
        for i, sid in enumerate(matrix.sentence_ids)
    ]


def log_likelihood(matrix: LabelMatrix, params: LabelModelParams) -> float:
    """Observed-data log-likelihood, including firing/abstaining factors."""
    votes = _vote_array(matrix)
    joint = _log_joint(votes, params, matrix.lf_ids)
    m = joint.max(axis=1)
    ll = float(np.sum(m + np.log(np.exp(joint - m[:, None]).sum(axis=1))))
    n_sent = votes.shape[1]
    for j, lf_id in enumerate(matrix.lf_ids):
        p = params.lf_propensity[lf_id]
        n_fired = int((votes[j] >= 0).sum())
        ll += n_fired * math.log(p)
        if n_fired < n_sent:
            ll += (n_sent - n_fired) * math.log1p(-p) if p < 1.0 else -math.inf
    return ll


def em_step(matrix: LabelMatrix, params: LabelModelParams) -> LabelModelParams:
    """One E+M sweep; returns updated parameters."""
    votes = _vote_array(matrix)
    gamma = _posteriors(_log_joint(votes, params, matrix.lf_ids))
    n_sent = votes.shape[1]

    priors = gamma.mean(axis=0)
    priors = np.maximum(priors, _PRIOR_FLOOR)
    priors = priors / priors.sum()

    accuracy = dict(params.lf_accuracy)
    propensity = dict(params.lf_propensity)
    lo, hi = ACCURACY_CLAMP
    for j, lf_id in enumerate(matrix.lf_ids):
        fired = votes[j] >= 0
        n_fired = int(fired.sum())
        propensity[lf_id] = min(1.0, max(_PROPENSITY_FLOOR, n_fired / n_sent))
        if n_fired == 0:
            continue
        vote_row = votes[j][fired]
        g = gamma[fired]
        class_mask = vote_row < VOTE_SALIENT
        correct = float(
            g[np.arange(len(vote_row))[class_mask], vote_row[class_mask]].sum()
        )
        correct += float(g[~class_mask, :CLASS_NONE].sum())
        accuracy[lf_id] = min(hi, max(lo, correct / n_fired))

    return replace(
        params,
        class_priors=tuple(float(x) for x in priors),
        lf_accuracy=accuracy,
        lf_propensity=propensity,
    )


def _param_delta(a: LabelModelParams, b: LabelModelParams) -> float:
    delta = max(
        abs(x - y) for x, y in zip(a.class_priors, b.class_priors)
    )
    for lf_id in a.lf_accuracy:
        delta = max(delta, abs(a.lf_accuracy[lf_id] - b.lf_accuracy[lf_id]))
        delta = max(delta, abs(a.lf_propensity[lf_id] - b.lf_propensity[lf_id]))
    return delta


def fit_em(matrix: LabelMatrix, init: LabelModelParams | None = None) -> LabelModelParams:
    """Fit the generative model; deterministic given the init."""
    if not matrix.votes:
        raise NoSignal("every labeling function abstained on every sentence")
    params = init if init is not None else initial_params(matrix)
    for _ in range(params.em_max_iters):
        updated = em_step(matrix, params)
        done = _param_delta(params, updated) < params.em_tol
        params = updated
        if done:
            break
    return params


def majority_vote(matrix: LabelMatrix) -> list[FacetPosterior]:
    """Baseline: uniform mass over the modal class(es) of the class-naming
    votes; sentences with none of those get all mass on the none class.
    Salience-only votes name no class and are ignored here."""
    out: list[FacetPosterior] = []
    by_sentence: dict[str, list[int]] = {sid: [] for sid in matrix.sentence_ids}
    for (_lf_id, sentence_id), vote in matrix.votes.items():
        if vote != VOTE_SALIENT:
            by_sentence[sentence_id].append(vote)
    for sid in matrix.sentence_ids:
        class_votes = by_sentence[sid]
        probs = [0.0] * N_CLASSES
        if not class_votes:
            probs[CLASS_NONE] = 1.0
        else:
            counts = [0] * N_CLASSES
            for v in class_votes:
                counts[v] += 1
            top = max(counts)
            winners = [i for i, c in enumerate(counts) if c == top]
            for i in winners:
                probs[i] = 1.0 / len(winners)
        out.append(FacetPosterior(sentence_id=sid, probs=tuple(probs)))
    return out


def params_to_json(params: LabelModelParams) -> bytes:
    payload = {
        "model": MODEL_VERSION,
        "class_priors": list(params.class_priors),
        "lf_accuracy": dict(params.lf_accuracy),
        "lf_propensity": dict(params.lf_propensity),
        "em_max_iters": params.em_max_iters,
        "em_tol": params.em_tol,
        "seed": params.seed,
    }
    return json.dumps(
        payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def params_from_json(data: bytes) -> LabelModelParams:
    try:
        payload = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedInput(f"model params are not UTF-8 JSON: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("model") != MODEL_VERSION:
        raise MalformedInput(f"expected model {MODEL_VERSION!r}")
    try:
        return LabelModelParams(
            class_priors=tuple(float(x) for x in payload["class_priors"]),
            lf_accuracy={k: float(v) for k, v in payload["lf_accuracy"].items()},
            lf_propensity={k: float(v) for k, v in payload["lf_propensity"].items()},
            em_max_iters=int(payload["em_max_iters"]),
            em_tol=float(payload["em_tol"]),
            seed=int(payload["seed"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInput(f"bad model params: {exc}") from exc
