"""TF-IDF features.

Conventions (fixed so that results are reproducible against a naive
reference): raw term counts, smoothed idf ``ln((1 + n) / (1 + df)) + 1``,
L2-normalized rows, and ``min_df``/``max_df`` read as document-frequency
proportions.  Tokens are lowercase runs of letters/digits; single-character
tokens are kept.
"""
from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

_TOKEN = re.compile(r"[^\W_]+")

NGRAM_CHOICES = ((1, 1), (1, 2))
MAX_DF_CHOICES = (0.75, 0.9, 1.0)
MIN_DF_CHOICES = (0.0, 0.1, 0.25)


class EmptyVocabularyError(ValueError):
    pass


@dataclass(frozen=True)
class VectorizerConfig:
    ngram_range: tuple = (1, 1)
    max_df: float = 1.0
    min_df: float = 0.0
    lowercase: bool = True
    use_idf: bool = True

    def __post_init__(self):
        object.__setattr__(self, "ngram_range", tuple(self.ngram_range))
        lo, hi = self.ngram_range
        if not 1 <= lo <= hi:
            raise ValueError(f"bad ngram_range {self.ngram_range}")
        if not 0.0 <= self.min_df <= self.max_df <= 1.0:
            raise ValueError("need 0 <= min_df <= max_df <= 1")
        if not (self.lowercase and self.use_idf):
            raise ValueError("lowercase and use_idf are fixed to True")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ngram_range"] = list(self.ngram_range)
        return d


def vectorizer_grid() -> list[VectorizerConfig]:
    """All 18 vectorizer settings searched during tuning, in search order."""
    return [
        VectorizerConfig(ngram_range=ng, max_df=hi, min_df=lo)
        for ng in NGRAM_CHOICES
        for hi in MAX_DF_CHOICES
        for lo in MIN_DF_CHOICES
        if lo <= hi
    ]


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def ngrams(tokens: Sequence[str], ngram_range=(1, 1)) -> list[str]:
    lo, hi = ngram_range
    out = []
    for n in range(lo, hi + 1):
        if n == 1:
            out.extend(tokens)
        else:
            out.extend(" ".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1))
    return out


def term_counts(text: str, ngram_range=(1, 1)) -> Counter:
    return Counter(ngrams(tokenize(text), ngram_range))


@dataclass(frozen=True, eq=False)
class SparseVector:
    """Sorted ``(index, value)`` pairs over a fixed dimension."""

    indices: np.ndarray
    values: np.ndarray
    dim: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValueError("indices and values must be 1-D and equally long")
        if idx.size and (np.any(np.diff(idx) <= 0) or idx[0] < 0 or idx[-1] >= self.dim):
            raise ValueError("indices must be strictly increasing and within dimension")
        if not np.all(np.isfinite(val)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, float]], dim: int) -> "SparseVector":
        pairs = sorted(pairs)
        return cls(np.array([i for i, _ in pairs], dtype=np.int64), np.array([v for _, v in pairs]), dim)

    @classmethod
    def from_row(cls, row: sp.csr_matrix) -> "SparseVector":
        row = row.tocsr()
        row.sort_indices()
        return cls(row.indices.copy(), row.data.copy(), row.shape[1])

    def pairs(self) -> list[tuple[int, float]]:
        return list(zip(self.indices.tolist(), self.values.tolist()))

    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.values, self.values)))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    def to_csr(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.values, self.indices, [0, self.indices.size]), shape=(1, self.dim))


@dataclass(frozen=True, eq=False)
class Vocabulary:
    config: VectorizerConfig
    n_docs: int
    terms: tuple
    df: np.ndarray
    idf: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.terms)})

    def __len__(self) -> int:
        return len(self.terms)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "n_docs": self.n_docs,
            "terms": [
                {"term": t, "index": i, "df": int(d), "idf": float(w)}
                for i, (t, d, w) in enumerate(zip(self.terms, self.df, self.idf))
            ],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Vocabulary":
        rows = sorted(d["terms"], key=lambda r: r["index"])
        if [r["index"] for r in rows] != list(range(len(rows))):
            raise ValueError("vocabulary indices must be dense 0..V-1")
        cfg = VectorizerConfig(**{**d["config"], "ngram_range": tuple(d["config"]["ngram_range"])})
        return cls(
            config=cfg,
            n_docs=int(d["n_docs"]),
            terms=tuple(r["term"] for r in rows),
            df=np.array([r["df"] for r in rows], dtype=np.int64),
            idf=np.array([r["idf"] for r in rows], dtype=np.float64),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)


def smoothed_idf(df, n_docs: int):
    return np.log((1.0 + n_docs) / (1.0 + np.asarray(df, dtype=np.float64))) + 1.0


def document_frequencies(counts: Iterable[Mapping[str, int]]) -> tuple[Counter, int]:
    df: Counter = Counter()
    n = 0
    for c in counts:
        df.update(c.keys())
        n += 1
    return df, n


def vocabulary_from_df(df: Mapping[str, int], n_docs: int, cfg: VectorizerConfig) -> Vocabulary:
    """Apply the min/max document-frequency filters and index the survivors."""
    if n_docs <= 0:
        raise ValueError("cannot fit a vocabulary on zero documents")
    kept = sorted(t for t, d in df.items() if cfg.min_df <= d / n_docs <= cfg.max_df)
    if not kept:
        raise EmptyVocabularyError("empty vocabulary")
    dfs = np.array([df[t] for t in kept], dtype=np.int64)
    return Vocabulary(cfg, n_docs, tuple(kept), dfs, smoothed_idf(dfs, n_docs))


def fit_vocabulary(docs: Sequence[str], cfg: VectorizerConfig = VectorizerConfig()) -> Vocabulary:
    if not docs:
        raise ValueError("docs must be non-empty")
    df, n = document_frequencies(term_counts(d, cfg.ngram_range) for d in docs)
    return vocabulary_from_df(df, n, cfg)


def counts_to_matrix(counts: Sequence[Mapping[str, int]], vocab: Vocabulary) -> sp.csr_matrix:
    """Rows of L2-normalized tf-idf from precomputed term counts."""
    index, idf = vocab.index, vocab.idf
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for c in counts:
        row = sorted((index[t], n) for t, n in c.items() if t in index)
        for j, n in row:
            indices.append(j)
            data.append(n * idf[j])
        indptr.append(len(indices))
    X = sp.csr_matrix(
        (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(indptr) - 1, len(vocab)),
    )
    norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
    norms[norms == 0] = 1.0
    X.data /= np.repeat(norms, np.diff(X.indptr))
    return X


def transform_matrix(docs: Sequence[str], vocab: Vocabulary) -> sp.csr_matrix:
    return counts_to_matrix([term_counts(d, vocab.config.ngram_range) for d in docs], vocab)


def transform(doc: str, vocab: Vocabulary) -> SparseVector:
    """tf-idf vector of one document; all-OOV documents map to the zero vector."""
    counts = term_counts(doc, vocab.config.ngram_range)
    raw = {vocab.index[t]: n * vocab.idf[vocab.index[t]] for t, n in counts.items() if t in vocab.index}
    norm = math.sqrt(sum(v * v for v in raw.values()))
    return SparseVector.from_pairs(((i, v / norm) for i, v in raw.items()), len(vocab))
