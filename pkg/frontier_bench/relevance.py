"""Similarity engine (tf-idf cosine against a topic query) and a two-class multinomial naive-Bayes model."""

import math
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from enum import StrEnum
from os import PathLike
from types import MappingProxyType

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from frontier_bench._util import atomic_write, split_records

RELEVANT = 0
IRRELEVANT = 1
MODEL_FORMAT_VERSION = 1

type TermVector = Mapping[int, float]


class Weighting(StrEnum):
    TF = "tf"
    TFIDF = "tfidf"


class EmptyCorpusError(ValueError):
    pass


class SingleClassError(ValueError):
    pass


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Vocabulary:
    index: Mapping[str, int]
    document_frequency: tuple[int, ...]
    n_docs: int

    def __len__(self):
        return len(self.index)

    def __contains__(self, term: str):
        return term in self.index

    def df(self, term: str) -> int:
        return self.document_frequency[self.index[term]]

    @property
    def terms(self) -> list[str]:
        return sorted(self.index, key=self.index.__getitem__)


def vocab_fit(corpus: Iterable[Sequence[str]]) -> Vocabulary:
    df: Counter[str] = Counter()
    n_docs = 0
    for tokens in corpus:
        n_docs += 1
        df.update(set(tokens))
    if n_docs == 0:
        raise EmptyCorpusError("cannot fit a vocabulary on an empty corpus")
    terms = sorted(df)
    return Vocabulary(
        index=MappingProxyType({term: i for i, term in enumerate(terms)}),
        document_frequency=tuple(df[t] for t in terms),
        n_docs=n_docs,
    )


def build_vector(tokens: Iterable[str], vocab: Vocabulary, weighting: Weighting = Weighting.TFIDF) -> TermVector:
    counts = Counter(vocab.index[t] for t in tokens if t in vocab.index)
    if weighting == Weighting.TF:
        return {i: float(tf) for i, tf in sorted(counts.items())}
    vector = {}
    for i, tf in sorted(counts.items()):
        # Smoothed idf; the "+ tf" keeps terms present in every document from vanishing.
        vector[i] = tf * math.log((1 + vocab.n_docs) / (1 + vocab.document_frequency[i])) + tf
    return vector


def cosine_sim(a: TermVector, b: TermVector) -> float:
    if not a or not b:
        return 0.0
    common = sorted(a.keys() & b.keys())
    if not common:
        return 0.0
    dot = math.fsum(a[i] * b[i] for i in common)
    norm_a = math.fsum(w * w for w in a.values())
    norm_b = math.fsum(w * w for w in b.values())
    denominator = math.sqrt(norm_a) * math.sqrt(norm_b)
    if denominator == 0:
        return 0.0
    return min(1.0, max(0.0, dot / denominator))


@dataclass(frozen=True)
class TopicQuery:
    tokens: tuple[str, ...]
    vector: TermVector

    @classmethod
    def from_terms(cls, terms: Iterable[str], vocab: Vocabulary) -> "TopicQuery":
        tokens = tuple(terms)
        if not tokens:
            raise ValueError("a topic query needs at least one term")
        return cls(tokens=tokens, vector=build_vector(tokens, vocab, Weighting.TFIDF))

    def similarity(self, vector: TermVector) -> float:
        return cosine_sim(self.vector, vector)


@dataclass(frozen=True, eq=False)
class NBModel:
    class_log_prior: np.ndarray
    term_log_likelihood: np.ndarray
    alpha: float
    vocabulary: Vocabulary


def nb_train(docs: Iterable[tuple[Sequence[str], bool]], alpha: float, vocab: Vocabulary) -> NBModel:
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    counts = np.zeros((2, len(vocab)), dtype=np.float64)
    class_docs = np.zeros(2, dtype=np.float64)
    for tokens, label in docs:
        c = RELEVANT if label else IRRELEVANT
        class_docs[c] += 1
        indices = [vocab.index[t] for t in tokens if t in vocab.index]
        np.add.at(counts[c], indices, 1.0)
    if (class_docs == 0).any():
        raise SingleClassError("naive Bayes training needs at least one relevant and one irrelevant document")
    smoothed = counts + alpha
    likelihood = np.log(smoothed) - np.log(smoothed.sum(axis=1, keepdims=True))
    prior = np.log(class_docs) - np.log(class_docs.sum())
    return NBModel(class_log_prior=prior, term_log_likelihood=likelihood, alpha=alpha, vocabulary=vocab)


def nb_class_posteriors(model: NBModel, tokens: Iterable[str]) -> tuple[float, float]:
    index = model.vocabulary.index
    indices = [index[t] for t in tokens if t in index]
    joint = model.class_log_prior + model.term_log_likelihood[:, indices].sum(axis=1)
    evidence = np.logaddexp(joint[RELEVANT], joint[IRRELEVANT])
    return float(np.exp(joint[RELEVANT] - evidence)), float(np.exp(joint[IRRELEVANT] - evidence))


def nb_posterior(model: NBModel, tokens: Iterable[str]) -> float:
    return nb_class_posteriors(model, tokens)[RELEVANT]


def classifier_metrics(model: NBModel, docs: Iterable[tuple[Sequence[str], bool]], threshold: float = 0.5):
    """Accuracy and F1 (positive class: relevant) of the classifier on labelled documents."""
    tp = fp = fn = tn = 0
    for tokens, label in docs:
        predicted = nb_posterior(model, tokens) >= threshold
        if predicted and label:
            tp += 1
        elif predicted:
            fp += 1
        elif label:
            fn += 1
        else:
            tn += 1
    total = tp + fp + fn + tn
    accuracy = (tp + tn) / total if total else 0.0
    f1 = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
    return accuracy, f1


class _ModelHeader(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format_version: int
    alpha: float
    class_log_prior: tuple[float, float]
    n_docs: int


class _TermLine(BaseModel):
    model_config = ConfigDict(extra="forbid")

    term: str
    log_likelihood: tuple[float, float]
    df: int


def save_model(model: NBModel, path: str | PathLike) -> None:
    vocab = model.vocabulary
    lines = [
        _ModelHeader(
            format_version=MODEL_FORMAT_VERSION,
            alpha=model.alpha,
            class_log_prior=tuple(float(p) for p in model.class_log_prior),
            n_docs=vocab.n_docs,
        ).model_dump_json()
    ]
    for term in vocab.terms:
        i = vocab.index[term]
        lines.append(
            _TermLine(
                term=term,
                log_likelihood=(
                    float(model.term_log_likelihood[RELEVANT, i]),
                    float(model.term_log_likelihood[IRRELEVANT, i]),
                ),
                df=vocab.document_frequency[i],
            ).model_dump_json()
        )
    atomic_write(path, ("\n".join(lines) + "\n").encode("utf-8"))


def load_model(path: str | PathLike) -> NBModel:
    with open(path, "rb") as f:
        lines = [line for line in split_records(f.read()) if line.strip()]
    if not lines:
        raise ModelFormatError(f"model file '{path}' is empty")
    try:
        header = _ModelHeader.model_validate_json(lines[0].decode("utf-8"))
        terms = [_TermLine.model_validate_json(line.decode("utf-8")) for line in lines[1:]]
    except (ValidationError, UnicodeDecodeError) as e:
        raise ModelFormatError(f"invalid model file '{path}': {e}") from e
    if header.format_version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format_version {header.format_version}")
    ordered = sorted(t.term for t in terms)
    if ordered != [t.term for t in terms] or len(set(ordered)) != len(ordered):
        raise ModelFormatError("model terms must be unique and in lexicographic order")
    vocab = Vocabulary(
        index=MappingProxyType({t.term: i for i, t in enumerate(terms)}),
        document_frequency=tuple(t.df for t in terms),
        n_docs=header.n_docs,
    )
    likelihood = np.array([t.log_likelihood for t in terms], dtype=np.float64).reshape(len(terms), 2).T.copy()
    return NBModel(
        class_log_prior=np.array(header.class_log_prior, dtype=np.float64),
        term_log_likelihood=likelihood,
        alpha=header.alpha,
        vocabulary=vocab,
    )
