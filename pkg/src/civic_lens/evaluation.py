"""Evaluation protocol: held-out test split, stratified k-fold grid search,
per-target precision/recall/F1, and mean +/- standard error over seeds."""
from __future__ import annotations

import csv
import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import features, models
from .seeding import derive_seed
from .taxonomy import LOCAL_KEYS, SOCIETAL_KEYS, label_columns

log = logging.getLogger(__name__)

FAMILIES = ("logistic", "svm")


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 1 / 6
    k: int = 5
    seed: int = 0
    stratify_on: str | None = None  # target whose labels drive the split

    def __post_init__(self):
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.k < 2:
            raise ValueError("k must be at least 2")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _binary(labels) -> np.ndarray:
    y = np.asarray(labels)
    if y.ndim != 1 or not np.all((y == 0) | (y == 1)):
        raise EvaluationError("labels must be a 1-D 0/1 vector")
    return y.astype(np.int64)


def _pick(items, idx):
    if isinstance(items, np.ndarray):
        return items[idx]
    return [items[i] for i in idx]


def stratified_split_indices(labels, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    y = _binary(labels)
    n = y.size
    pos, neg = np.flatnonzero(y == 1), np.flatnonzero(y == 0)
    if pos.size < 2 or neg.size < 2:
        raise EvaluationError("cannot stratify: each class needs at least 2 members")
    n_test = _round_half_up(test_fraction * n)
    n_test = min(max(n_test, 1), n - 1)
    n_test_pos = _round_half_up(pos.size * n_test / n)
    n_test_pos = min(n_test_pos, pos.size, n_test)
    n_test_neg = n_test - n_test_pos
    if n_test_neg > neg.size:
        n_test_neg = neg.size
        n_test_pos = n_test - n_test_neg
    rng = np.random.default_rng(seed)
    pos, neg = rng.permutation(pos), rng.permutation(neg)
    test = np.sort(np.concatenate([pos[:n_test_pos], neg[:n_test_neg]]))
    mask = np.ones(n, dtype=bool)
    mask[test] = False
    return np.flatnonzero(mask), test


def stratified_split(items, labels, spec: SplitSpec = SplitSpec()):
    """Hold out ``round(test_fraction * n)`` items with matching class balance.

    Returns ``(trainval, test)`` in original item order.
    """
    if len(items) != len(labels):
        raise EvaluationError("items and labels differ in length")
    tv, te = stratified_split_indices(labels, spec.test_fraction, spec.seed)
    return _pick(items, tv), _pick(items, te)


def stratified_kfold_indices(labels, k: int, seed: int) -> list[np.ndarray]:
    y = _binary(labels)
    if k < 2:
        raise EvaluationError("k must be at least 2")
    pos, neg = np.flatnonzero(y == 1), np.flatnonzero(y == 0)
    if pos.size < k or neg.size < k:
        raise EvaluationError(f"each class needs at least k={k} members")
    rng = np.random.default_rng(seed)
    order = np.concatenate([rng.permutation(pos), rng.permutation(neg)])
    # dealing positives then negatives round-robin keeps both class counts
    # and fold sizes within one of each other
    fold_of = np.arange(order.size) % k
    return [np.sort(order[fold_of == f]) for f in range(k)]


def stratified_kfold(items, labels, k: int = 5, seed: int = 0) -> list:
    if len(items) != len(labels):
        raise EvaluationError("items and labels differ in length")
    return [_pick(items, idx) for idx in stratified_kfold_indices(labels, k, seed)]


def binary_metrics(pred, gold) -> dict[str, float]:
    """Precision, recall and F1 for the positive class; 0/0 counts as 0."""
    p, g = np.asarray(pred), np.asarray(gold)
    if p.shape != g.shape:
        raise EvaluationError("pred and gold differ in length")
    tp = int(np.sum((p == 1) & (g == 1)))
    fp = int(np.sum((p == 1) & (g == 0)))
    fn = int(np.sum((p == 0) & (g == 1)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"precision": precision, "recall": recall, "f1": f1}


@dataclass
class Grid:
    family: str
    vectorizers: list
    models: list

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if not self.vectorizers or not self.models:
            raise ValueError("grid must be non-empty")

    def cells(self) -> list[tuple]:
        return list(itertools.product(self.vectorizers, self.models))

    def __len__(self) -> int:
        return len(self.vectorizers) * len(self.models)


def default_grid(family: str, seed: int = 0) -> Grid:
    """Full tuning ranges: 18 vectorizer settings times the family's model cells."""
    cells = models.logistic_grid(seed) if family == "logistic" else models.svm_grid(seed)
    return Grid(family, features.vectorizer_grid(), cells)


@dataclass
class GridSearchResult:
    family: str
    best_index: int
    vectorizer: features.VectorizerConfig
    model: object
    mean_f1: float
    table: list = field(default_factory=list)


def _counts_cache(texts: Sequence[str], ngram_ranges) -> dict:
    return {ng: [features.term_counts(t, ng) for t in texts] for ng in ngram_ranges}


def grid_search(grid: Grid, texts: Sequence[str], labels, k: int = 5, seed: int = 0,
                stop_on_perfect: bool = False, counts: Mapping | None = None) -> GridSearchResult:
    """Pick the grid cell with the best mean validation F1 over k folds.

    The vocabulary is refit on each fold's training part.  Ties go to the
    earliest cell in grid order.  With ``stop_on_perfect`` the search ends at
    the first cell with mean F1 = 1: no later cell can beat it under that
    tie-break, so the selection is unchanged and the remaining cells are
    reported as skipped.
    """
    y = _binary(labels)
    if len(texts) != y.size:
        raise EvaluationError("texts and labels differ in length")
    folds = stratified_kfold_indices(y, k, seed)
    if counts is None:
        counts = _counts_cache(texts, {v.ngram_range for v in grid.vectorizers})
    n_models = len(grid.models)
    scores = np.full((len(grid), k), np.nan)
    errors: dict[int, str] = {}
    evaluated = np.zeros(len(grid), dtype=bool)
    all_idx = np.arange(y.size)
    fold_splits = []
    for val in folds:
        mask = np.ones(y.size, dtype=bool)
        mask[val] = False
        fold_splits.append((all_idx[mask], val))

    dfs: dict = {}
    done = False
    for vi, vcfg in enumerate(grid.vectorizers):
        ng_counts = counts[vcfg.ngram_range]
        matrices = []
        vocab_error = None
        for f, (tr, va) in enumerate(fold_splits):
            key = (vcfg.ngram_range, f)
            if key not in dfs:
                dfs[key] = features.document_frequencies(ng_counts[i] for i in tr)
            try:
                vocab = features.vocabulary_from_df(*dfs[key], vcfg)
            except features.EmptyVocabularyError as exc:
                vocab_error = f"fold {f}: {exc}"
                break
            matrices.append((features.counts_to_matrix([ng_counts[i] for i in tr], vocab),
                             features.counts_to_matrix([ng_counts[i] for i in va], vocab)))
        for mi, mcfg in enumerate(grid.models):
            c = vi * n_models + mi
            evaluated[c] = True
            if vocab_error:
                errors[c] = vocab_error
                continue
            for f, ((tr, va), (Xtr, Xva)) in enumerate(zip(fold_splits, matrices)):
                try:
                    model = models.train(grid.family, Xtr, y[tr], mcfg)
                except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
                    errors[c] = f"fold {f}: {exc}"
                    break
                scores[c, f] = binary_metrics(models.predict_many(model, Xva), y[va])["f1"]
            if stop_on_perfect and c not in errors and scores[c].mean() >= 1.0:
                done = True
                break
        if done:
            break

    table = []
    best, best_mean = -1, -math.inf
    for c, (vcfg, mcfg) in enumerate(grid.cells()):
        row = {"cell": c, "family": grid.family, "vectorizer": vcfg.to_dict(), "model": mcfg.to_dict()}
        if not evaluated[c]:
            row.update(status="skipped", mean_f1=None, fold_f1=None)
        elif c in errors:
            row.update(status="failed", error=errors[c], mean_f1=None, fold_f1=None)
        else:
            m = float(scores[c].mean())
            row.update(status="ok", mean_f1=m, fold_f1=[float(s) for s in scores[c]])
            if m > best_mean:
                best, best_mean = c, m
        table.append(row)
    if best < 0:
        diag = "; ".join(f"cell {c}: {e}" for c, e in sorted(errors.items()))
        raise EvaluationError(f"every grid cell failed to train ({diag})")
    vcfg, mcfg = grid.cells()[best]
    return GridSearchResult(grid.family, best, vcfg, mcfg, best_mean, table)


def mean_stderr(values: Sequence[float]) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("no values")
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se


def format_with_stderr(mean: float, se: float) -> str:
    return f"{mean:.4f} ({se:.4f})"


@dataclass
class UnitResult:
    """Outcome of one (target, seed slot, family) evaluation."""

    target: str
    seed_slot: int
    family: str
    search: GridSearchResult
    test_metrics: dict
    vocab: features.Vocabulary
    model: object
    n_trainval: int
    n_test: int


def _evaluate_unit(texts, y, target, slot, family, spec_k, test_fraction, root_seed, grid, stop_on_perfect, counts):
    split_seed = derive_seed(root_seed, target, slot, "split")
    fold_seed = derive_seed(root_seed, target, slot, "folds")
    model_seed = derive_seed(root_seed, target, slot, "model") & 0x7FFFFFFF
    tv, te = stratified_split_indices(y, test_fraction, split_seed)
    if grid is None:
        grid = default_grid(family, model_seed)
    tv_counts = {ng: [c[i] for i in tv] for ng, c in counts.items()}
    search = grid_search(grid, [texts[i] for i in tv], y[tv], spec_k, fold_seed, stop_on_perfect, tv_counts)
    vcfg = search.vectorizer
    ng = vcfg.ngram_range
    df = features.document_frequencies(counts[ng][i] for i in tv)
    vocab = features.vocabulary_from_df(*df, vcfg)
    Xtv = features.counts_to_matrix([counts[ng][i] for i in tv], vocab)
    Xte = features.counts_to_matrix([counts[ng][i] for i in te], vocab)
    model = models.train(family, Xtv, y[tv], search.model)
    metrics = binary_metrics(models.predict_many(model, Xte), y[te])
    return UnitResult(target, slot, family, search, metrics, vocab, model, len(tv), len(te))


@dataclass
class MetricReport:
    families: tuple
    seeds: tuple
    rows: list  # per-target dicts
    macro: dict  # {"local_top10"/"societal_top10": {family: stats}}
    best_family: dict  # target -> family with highest mean test F1

    def to_dict(self) -> dict:
        return {"families": list(self.families), "seeds": list(self.seeds), "rows": self.rows,
                "macro": self.macro, "best_family": self.best_family}

    def csv_rows(self) -> list[list[str]]:
        header = ["target", "fraction", "support", "family", "f1", "precision", "recall",
                  "f1_stderr", "precision_stderr", "recall_stderr"]
        out = [header]
        for row in self.rows:
            for fam in self.families:
                s = row["families"][fam]
                out.append([row["target"], f"{100 * row['fraction']:.2f}%", str(row["support"]), fam,
                             *(f"{s[m]:.4f}" for m in ("f1", "precision", "recall")),
                             *(f"{s[m + '_stderr']:.4f}" for m in ("f1", "precision", "recall"))])
        for name, per_fam in self.macro.items():
            for fam in self.families:
                s = per_fam[fam]
                out.append([name, "", "", fam, *(f"{s[m]:.4f}" for m in ("f1", "precision", "recall")),
                             *(f"{s[m + '_stderr']:.4f}" for m in ("f1", "precision", "recall"))])
        return out


def _stats(per_seed: list[dict]) -> dict:
    out = {}
    for m in ("f1", "precision", "recall"):
        mean, se = mean_stderr([d[m] for d in per_seed])
        out[m], out[m + "_stderr"] = mean, se
    return out


@dataclass
class SuiteResult:
    report: MetricReport
    units: list  # UnitResult, ordered by (target, slot, family)

    def best_units(self) -> dict:
        """``{slot: {target: UnitResult}}`` using each target's best family."""
        out: dict = {}
        for u in self.units:
            if self.report.best_family[u.target] == u.family:
                out.setdefault(u.seed_slot, {})[u.target] = u
        return out

    def cv_rows(self) -> list[dict]:
        rows = []
        for u in self.units:
            for r in u.search.table:
                rows.append({"target": u.target, "seed_slot": u.seed_slot, **r})
        return rows


def evaluate_suite(texts: Sequence[str], labels: Mapping[str, Sequence[int]], targets: Sequence[str] | None = None,
                   families: Sequence[str] = ("logistic",), seeds: Sequence[int] = (0, 1, 2), k: int = 5,
                   test_fraction: float = 1 / 6, root_seed: int = 0, grids: Mapping[str, Grid] | None = None,
                   stop_on_perfect: bool = False, jobs: int = 1) -> SuiteResult:
    """Split, tune, refit and score every target for every seed and family."""
    targets = list(targets) if targets is not None else label_columns()
    missing = [t for t in targets if t not in labels]
    if missing:
        raise EvaluationError(f"labels missing for targets: {missing}")
    for fam in families:
        if fam not in FAMILIES:
            raise EvaluationError(f"unknown family {fam!r}")
    SplitSpec(test_fraction, k)
    grids = dict(grids or {})
    ngs = {v.ngram_range for g in grids.values() for v in g.vectorizers} or set(features.NGRAM_CHOICES)
    if any(f not in grids for f in families):
        ngs |= set(features.NGRAM_CHOICES)
    counts = _counts_cache(texts, ngs)
    ys = {t: _binary(labels[t]) for t in targets}
    for t, y in ys.items():
        if y.size != len(texts):
            raise EvaluationError(f"{t}: expected {len(texts)} labels, got {y.size}")

    work = [(t, s, f) for t in targets for s in seeds for f in families]

    def run(t, s, f):
        return _evaluate_unit(texts, ys[t], t, s, f, k, test_fraction, root_seed, grids.get(f),
                              stop_on_perfect, counts)

    if jobs > 1:
        from joblib import Parallel, delayed

        units = Parallel(n_jobs=jobs)(delayed(run)(*w) for w in work)
    else:
        units = [run(*w) for w in work]

    by_key = {(u.target, u.seed_slot, u.family): u for u in units}
    rows, best_family = [], {}
    for t in targets:
        y = ys[t]
        row = {"target": t, "fraction": float(y.mean()), "support": int(y.sum()), "families": {}}
        for f in families:
            row["families"][f] = _stats([by_key[(t, s, f)].test_metrics for s in seeds])
        best_family[t] = max(families, key=lambda f: (row["families"][f]["f1"], -families.index(f)))
        rows.append(row)

    macro = {}
    for name, keys in (("local_top10", LOCAL_KEYS), ("societal_top10", SOCIETAL_KEYS)):
        keys = [k_ for k_ in keys if k_ in ys]
        if not keys:
            continue
        macro[name] = {}
        for f in families:
            per_seed = []
            for s in seeds:
                ms = [by_key[(t, s, f)].test_metrics for t in keys]
                per_seed.append({m: float(np.mean([d[m] for d in ms])) for m in ("f1", "precision", "recall")})
            macro[name][f] = _stats(per_seed)
    report = MetricReport(tuple(families), tuple(seeds), rows, macro, best_family)
    return SuiteResult(report, units)


def write_report(report: MetricReport, json_path, csv_path) -> None:
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(report.csv_rows())


def write_cv_table(rows: list[dict], path) -> None:
    header = ["target", "seed_slot", "family", "cell", "status", "ngram_range", "max_df", "min_df", "model", "mean_f1"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            v = r["vectorizer"]
            w.writerow([r["target"], r["seed_slot"], r["family"], r["cell"], r["status"],
                        "-".join(map(str, v["ngram_range"])), v["max_df"], v["min_df"],
                        json.dumps(r["model"], sort_keys=True),
                        "" if r["mean_f1"] is None else f"{r['mean_f1']:.6f}"])
