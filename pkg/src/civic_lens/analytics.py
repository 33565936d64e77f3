"""Descriptive outputs: per-city summary rows, concern co-occurrence, Sankey data."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Mapping, Sequence

from .cascade import LabelSet
from .corpus import Comment
from .taxonomy import LOCAL_KEYS, SOCIETAL_KEYS, TOP_LOCAL, TOP_SOCIETAL, AssignmentKind

OTHER, NONE = "other", "none"
LOCAL_ROWS = (*LOCAL_KEYS, OTHER, NONE)
SOCIETAL_COLS = (*SOCIETAL_KEYS, OTHER, NONE)
_DISPLAY = {c.key: c.display for c in (*TOP_LOCAL, *TOP_SOCIETAL)}

SUMMARY_COLUMNS = (
    "city", "n_comments", "pct_action", "pct_local_given_action", "pct_societal_given_action",
    "pct_top10_local_given_action", "pct_top10_societal_given_action", "most_common_local",
    "most_common_societal",
)


class AnalyticsError(ValueError):
    pass


def format_pct(x: float | None) -> str:
    """Two decimals, halves rounded away from zero; None renders empty."""
    if x is None:
        return ""
    return str(Decimal(repr(x)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def pct(num: int, den: int) -> float:
    return 100.0 * num / den


def render_concerns(keys: Sequence[str]) -> str:
    return " & ".join(_DISPLAY[k] for k in keys)


@dataclass(frozen=True)
class CitySummary:
    city: str
    n_comments: int
    n_action: int
    pct_action: float
    pct_local_given_action: float | None
    pct_societal_given_action: float | None
    pct_top10_local_given_action: float | None
    pct_top10_societal_given_action: float | None
    most_common_local: tuple = ()
    most_common_societal: tuple = ()

    def row(self) -> list[str]:
        return [
            self.city,
            str(self.n_comments),
            format_pct(self.pct_action),
            format_pct(self.pct_local_given_action),
            format_pct(self.pct_societal_given_action),
            format_pct(self.pct_top10_local_given_action),
            format_pct(self.pct_top10_societal_given_action),
            render_concerns(self.most_common_local),
            render_concerns(self.most_common_societal),
        ]


def _most_common(assignments, keys: Sequence[str]) -> tuple:
    counts = dict.fromkeys(keys, 0)
    for a in assignments:
        for k in a.keys:
            counts[k] += 1
    top = max(counts.values())
    if top == 0:
        return ()
    return tuple(k for k in keys if counts[k] == top)


def city_summary(city: str, labels: Sequence[LabelSet]) -> CitySummary:
    """Table-style row for one city; every column after the first is conditional on action comments."""
    if not labels:
        raise AnalyticsError(f"{city}: no comments")
    action = [ls for ls in labels if ls.action]
    n, na = len(labels), len(action)

    def cond(pred):
        return pct(sum(1 for ls in action if pred(ls)), na) if na else None

    return CitySummary(
        city=city,
        n_comments=n,
        n_action=na,
        pct_action=pct(na, n),
        pct_local_given_action=cond(lambda ls: ls.local_assignment.kind is not AssignmentKind.NONE),
        pct_societal_given_action=cond(lambda ls: ls.societal_assignment.kind is not AssignmentKind.NONE),
        pct_top10_local_given_action=cond(lambda ls: ls.local_assignment.kind is AssignmentKind.CONCERNS),
        pct_top10_societal_given_action=cond(lambda ls: ls.societal_assignment.kind is AssignmentKind.CONCERNS),
        most_common_local=_most_common((ls.local_assignment for ls in action), LOCAL_KEYS),
        most_common_societal=_most_common((ls.societal_assignment for ls in action), SOCIETAL_KEYS),
    )


def summarize_cities(comments: Sequence[Comment], labels: Sequence[LabelSet]) -> list[CitySummary]:
    """One summary per city, cities in sorted order."""
    city_of = {c.comment_id: c.city for c in comments}
    groups: dict[str, list[LabelSet]] = {}
    for ls in labels:
        if ls.comment_id not in city_of:
            raise AnalyticsError(f"label for unknown comment {ls.comment_id}")
        groups.setdefault(city_of[ls.comment_id], []).append(ls)
    return [city_summary(city, groups[city]) for city in sorted(groups)]


def write_summary(path, summaries: Iterable[CitySummary]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for s in summaries:
            w.writerow(s.row())


@dataclass
class CooccurrenceMatrix:
    counts: dict  # counts[local_row][societal_col]
    local_totals: dict  # comments per local category
    societal_totals: dict
    base_n: int
    restrict_to_action: bool = True
    rows: tuple = LOCAL_ROWS
    cols: tuple = SOCIETAL_COLS

    def row_sums(self) -> dict:
        return {r: sum(self.counts[r].values()) for r in self.rows}

    def col_sums(self) -> dict:
        return {c: sum(self.counts[r][c] for r in self.rows) for c in self.cols}

    def total(self) -> int:
        return sum(self.row_sums().values())

    def __add__(self, other: "CooccurrenceMatrix") -> "CooccurrenceMatrix":
        if self.restrict_to_action != other.restrict_to_action:
            raise AnalyticsError("cannot add matrices over different base populations")
        return CooccurrenceMatrix(
            counts={r: {c: self.counts[r][c] + other.counts[r][c] for c in self.cols} for r in self.rows},
            local_totals={r: self.local_totals[r] + other.local_totals[r] for r in self.rows},
            societal_totals={c: self.societal_totals[c] + other.societal_totals[c] for c in self.cols},
            base_n=self.base_n + other.base_n,
            restrict_to_action=self.restrict_to_action,
        )

    def to_rows(self) -> list[list]:
        out = [["local\\societal", *self.cols]]
        for r in self.rows:
            out.append([r, *(self.counts[r][c] for c in self.cols)])
        return out


def cooccurrence(labels: Iterable[LabelSet], restrict_to_action: bool = True) -> CooccurrenceMatrix:
    """Count (local, societal) category pairs, expanding multi-concern comments to every pair."""
    counts = {r: dict.fromkeys(SOCIETAL_COLS, 0) for r in LOCAL_ROWS}
    lt, st = dict.fromkeys(LOCAL_ROWS, 0), dict.fromkeys(SOCIETAL_COLS, 0)
    base = 0
    for ls in labels:
        if restrict_to_action and not ls.action:
            continue
        base += 1
        lcats = ls.local_assignment.categories()
        scats = ls.societal_assignment.categories()
        for r in lcats:
            lt[r] += 1
            for c in scats:
                counts[r][c] += 1
        for c in scats:
            st[c] += 1
    return CooccurrenceMatrix(counts, lt, st, base, restrict_to_action)


def write_cooccurrence(path, matrix: CooccurrenceMatrix) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(matrix.to_rows())


def sankey_export(matrix: CooccurrenceMatrix, direction: str = "local_first", top_k: int = 3) -> dict:
    """Nodes for the upper level and, per node, links to its ``top_k`` largest partners.

    Node ``pct`` is the share of the base population carrying that category.
    A link's ``pct_of_source`` divides its pair count by all pairs leaving
    the source, so a node's links sum to at most 100.
    """
    if direction not in ("local_first", "societal_first"):
        raise AnalyticsError(f"bad direction {direction!r}")
    if top_k < 1:
        raise AnalyticsError("top_k must be at least 1")
    if direction == "local_first":
        sources, targets, totals = matrix.rows, matrix.cols, matrix.local_totals
        pair = lambda s, t: matrix.counts[s][t]  # noqa: E731
    else:
        sources, targets, totals = matrix.cols, matrix.rows, matrix.societal_totals
        pair = lambda s, t: matrix.counts[t][s]  # noqa: E731
    base = matrix.base_n
    nodes, links = [], []
    for s in sources:
        if totals[s] == 0:
            continue
        nodes.append({"key": s, "count": totals[s], "pct": pct(totals[s], base) if base else 0.0})
        partners = [(t, pair(s, t)) for t in targets if pair(s, t) > 0]
        row_sum = sum(n for _, n in partners)
        order = {t: i for i, t in enumerate(targets)}
        partners.sort(key=lambda tn: (-tn[1], order[tn[0]]))
        for t, n in partners[:top_k]:
            links.append({"source": s, "target": t, "count": n, "pct_of_source": pct(n, row_sum)})
    return {"direction": direction, "base_n": base, "top_k": top_k, "nodes": nodes, "links": links}


def write_sankey(path, data: Mapping) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass(frozen=True)
class CoverageStats:
    pct_any_local: float | None
    pct_any_societal: float | None
    pct_any_local_all: float
    pct_any_societal_all: float
    n_action: int
    n_comments: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def coverage_stats(labels: Sequence[LabelSet]) -> CoverageStats:
    """Share of comments with any local / societal concern.

    The primary figures use action comments as the base; the ``_all``
    variants use every comment.
    """
    labels = list(labels)
    if not labels:
        raise AnalyticsError("no labels")
    action = [ls for ls in labels if ls.action]

    def share(group, dim):
        hits = sum(1 for ls in group if getattr(ls, f"{dim}_assignment").kind is not AssignmentKind.NONE)
        return pct(hits, len(group))

    return CoverageStats(
        pct_any_local=share(action, "local") if action else None,
        pct_any_societal=share(action, "societal") if action else None,
        pct_any_local_all=share(labels, "local"),
        pct_any_societal_all=share(labels, "societal"),
        n_action=len(action),
        n_comments=len(labels),
    )
