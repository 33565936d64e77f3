"""Naive reference implementations used as test oracles.

These deliberately avoid the package's own helpers: plain Python loops,
dicts and ``math``, written straight from the formulas.
"""
from __future__ import annotations

import itertools
import math
import re


def naive_tokens(text):
    out, cur = [], []
    for ch in text.lower():
        if ch.isalnum():
            cur.append(ch)
        else:
            if cur:
                out.append("".join(cur))
            cur = []
    if cur:
        out.append("".join(cur))
    return out


def naive_terms(text, ngram_range):
    toks = naive_tokens(text)
    terms = []
    for n in range(ngram_range[0], ngram_range[1] + 1):
        for i in range(len(toks) - n + 1):
            terms.append(" ".join(toks[i:i + n]))
    return terms


def naive_tfidf(docs, ngram_range, max_df, min_df):
    """Returns (terms, dense rows) or None when nothing survives the df filters."""
    n = len(docs)
    per_doc = [naive_terms(d, ngram_range) for d in docs]
    df = {}
    for terms in per_doc:
        for t in set(terms):
            df[t] = df.get(t, 0) + 1
    vocab = sorted(t for t in df if min_df <= df[t] / n <= max_df)
    if not vocab:
        return None
    idf = {t: math.log((1 + n) / (1 + df[t])) + 1 for t in vocab}
    rows = []
    for terms in per_doc:
        raw = [terms.count(t) * idf[t] for t in vocab]
        norm = math.sqrt(sum(v * v for v in raw))
        rows.append([v / norm if norm else 0.0 for v in raw])
    return vocab, rows


def piecewise_assignment(gate, flags, members):
    """Direct transcription of the gate/detector aggregation rule."""
    if gate == 0:
        return ("none", frozenset())
    chosen = frozenset(m for m, f in zip(members, flags) if f == 1)
    if len(chosen) == 0:
        return ("other", frozenset())
    return ("concerns", chosen)


def confusion_metrics(pred, gold):
    tp = fp = fn = 0
    for p, g in zip(pred, gold):
        if p == 1 and g == 1:
            tp += 1
        elif p == 1 and g == 0:
            fp += 1
        elif p == 0 and g == 1:
            fn += 1
    precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
    recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
    return precision, recall, f1


def kl_two_term(p, q):
    return sum(pi * math.log(pi / qi) for pi, qi in zip(p, q) if pi > 0)


def _smoothed(vec, eps):
    vals = [v + eps for v in vec]
    s = sum(vals)
    return [v / s for v in vals]


def pop_hist(pops, edges, eps):
    counts = [0] * (len(edges) - 1)
    for p in pops:
        x = math.log10(p)
        b = 0
        while b < len(counts) - 1 and x >= edges[b + 1]:
            b += 1
        counts[b] += 1
    total = sum(counts)
    return _smoothed([c / total for c in counts], eps)


def vote_share(votes, eps):
    tot = [sum(v[i] for v in votes) for i in range(3)]
    s = sum(tot)
    return _smoothed([t / s for t in tot], eps)


def exhaustive_best_subset(cities, k, state_pop, state_pol, edges, eps):
    """cities: list of (name, population, (d, r, i)); returns (score, names)."""
    best = None
    for combo in itertools.combinations(sorted(cities), k):
        pop = pop_hist([c[1] for c in combo], edges, eps)
        pol = vote_share([c[2] for c in combo], eps)
        score = (kl_two_term(pop, state_pop) + kl_two_term(pol, state_pol)) / 2
        key = (score, tuple(c[0] for c in combo))
        if best is None or key < best:
            best = key
    return best


def logistic_value(w, b, rows, y, s, penalty, C):
    """Objective at (w, b) for dense rows; plain loops."""
    total = 0.0
    for xi, yi, si in zip(rows, y, s):
        z = sum(a * c for a, c in zip(w, xi)) + b
        yy = 1.0 if yi == 1 else -1.0
        m = yy * z
        total += si * (math.log1p(math.exp(-m)) if m > -30 else -m + math.log1p(math.exp(m)))
    if penalty == "l2":
        total += 0.5 * sum(v * v for v in w) / C
    elif penalty == "l1":
        total += sum(abs(v) for v in w) / C
    return total


_WS = re.compile(r"\s+")


def word_count(text):
    return len([t for t in _WS.split(text.strip()) if t]) if text.strip() else 0
