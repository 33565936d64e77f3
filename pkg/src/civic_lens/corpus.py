"""Transcript ingestion: segments in, filtered public comments out."""
from __future__ import annotations

import json
import logging
import math
import re
import statistics
from dataclasses import asdict, dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Sequence

log = logging.getLogger(__name__)

ROLES = ("official", "public", "unknown")
SEGMENT_KEYS = frozenset(
    ["meeting_id", "city", "date", "start_s", "end_s", "speaker_id", "role", "in_comment_session", "text"]
)


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class TranscriptSegment:
    meeting_id: str
    city: str
    date: str
    start_s: float
    end_s: float
    speaker_id: str
    role: str
    in_comment_session: bool
    text: str

    def __post_init__(self):
        date.fromisoformat(self.date)
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")
        if not (math.isfinite(self.start_s) and math.isfinite(self.end_s)) or self.start_s < 0:
            raise ValueError("start_s must be a non-negative finite number")
        if self.end_s <= self.start_s:
            raise ValueError("end_s must exceed start_s")
        if not self.text.strip():
            raise ValueError("empty text")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    @classmethod
    def from_record(cls, rec: dict) -> "TranscriptSegment":
        if not isinstance(rec, dict):
            raise ValueError("record is not a JSON object")
        keys = set(rec)
        if keys != SEGMENT_KEYS:
            missing, extra = SEGMENT_KEYS - keys, keys - SEGMENT_KEYS
            raise ValueError(f"bad keys (missing={sorted(missing)}, extra={sorted(extra)})")
        for k in ("meeting_id", "city", "date", "speaker_id", "role", "text"):
            if not isinstance(rec[k], str):
                raise ValueError(f"{k} must be a string")
        for k in ("start_s", "end_s"):
            if isinstance(rec[k], bool) or not isinstance(rec[k], (int, float)):
                raise ValueError(f"{k} must be a number")
        if not isinstance(rec["in_comment_session"], bool):
            raise ValueError("in_comment_session must be true/false")
        return cls(**{**rec, "start_s": float(rec["start_s"]), "end_s": float(rec["end_s"])})


@dataclass(frozen=True)
class Comment:
    comment_id: str
    city: str
    meeting_id: str
    date: str
    speaker_id: str
    text: str
    duration_s: float
    word_count: int

    def to_record(self) -> dict:
        return asdict(self)

    @classmethod
    def from_record(cls, rec: dict) -> "Comment":
        c = cls(**rec)
        if c.word_count != count_words(c.text):
            raise ValueError(f"{c.comment_id}: word_count does not match text")
        return c


@dataclass
class ParseReport:
    valid: int = 0
    rejected: int = 0
    reasons: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"valid": self.valid, "rejected": self.rejected, "reasons": list(self.reasons)}


@dataclass(frozen=True)
class FilterConfig:
    min_words: int = 5
    min_duration_s: float = 2.0
    blocklist: tuple = ("thanks", "thank you", "bye", "can you hear me")

    def __post_init__(self):
        if self.min_words < 0 or self.min_duration_s < 0:
            raise ValueError("filter thresholds must be non-negative")
        object.__setattr__(self, "blocklist", tuple(normalize_phrase(p) for p in self.blocklist))


def count_words(text: str) -> int:
    return len(text.split())


def normalize_phrase(text: str) -> str:
    """Casefold, drop punctuation and collapse whitespace."""
    return " ".join(re.sub(r"[^\w\s]|_", " ", text.casefold()).split())


def parse_transcript(path) -> tuple[list[TranscriptSegment], ParseReport]:
    """Read a JSONL transcript, keeping well-formed segments in file order.

    Malformed lines are counted in the returned report rather than raised;
    only a file with no usable line at all is an error.
    """
    segments: list[TranscriptSegment] = []
    report = ParseReport()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                segments.append(TranscriptSegment.from_record(json.loads(line)))
            except (ValueError, TypeError) as exc:
                report.rejected += 1
                report.reasons.append(f"line {lineno}: {exc}")
    report.valid = len(segments)
    if not segments:
        raise CorpusError(f"{path}: no valid segments")
    if report.rejected:
        log.warning("%s: rejected %d malformed line(s)", path, report.rejected)
    return segments, report


def assemble_comments(segments: Sequence[TranscriptSegment]) -> list[Comment]:
    """Merge runs of same-speaker public-session segments into comments.

    Segments must be sorted by ``(meeting_id, start_s)``.  Any segment that is
    not a public-session utterance breaks the current run.
    """
    for prev, cur in zip(segments, segments[1:]):
        if (cur.meeting_id, cur.start_s) < (prev.meeting_id, prev.start_s):
            raise CorpusError("segments out of order")

    comments: list[Comment] = []
    ordinal: dict[str, int] = {}
    run: list[TranscriptSegment] = []

    def flush():
        if not run:
            return
        first = run[0]
        n = ordinal.get(first.meeting_id, 0) + 1
        ordinal[first.meeting_id] = n
        text = " ".join(s.text.strip() for s in run)
        comments.append(
            Comment(
                comment_id=f"{first.meeting_id}-c{n:03d}",
                city=first.city,
                meeting_id=first.meeting_id,
                date=first.date,
                speaker_id=first.speaker_id,
                text=text,
                duration_s=math.fsum(s.duration_s for s in run),
                word_count=count_words(text),
            )
        )
        run.clear()

    for seg in segments:
        keep = seg.role == "public" and seg.in_comment_session
        if not keep:
            flush()
            continue
        if run and (run[-1].meeting_id != seg.meeting_id or run[-1].speaker_id != seg.speaker_id):
            flush()
        run.append(seg)
    flush()
    return comments


def filter_comments(
    comments: Iterable[Comment], cfg: FilterConfig = FilterConfig()
) -> tuple[list[Comment], list[tuple[Comment, str]]]:
    """Split comments into kept and dropped; each drop carries a reason tag.

    Thresholds are strict: a comment of exactly ``min_words`` words or exactly
    ``min_duration_s`` seconds is kept.  Blocklist phrases must match the whole
    normalized comment.
    """
    kept, dropped = [], []
    blocked = set(cfg.blocklist)
    for c in comments:
        if c.word_count < cfg.min_words:
            dropped.append((c, "short"))
        elif c.duration_s < cfg.min_duration_s:
            dropped.append((c, "brief"))
        elif normalize_phrase(c.text) in blocked:
            dropped.append((c, "blocklist"))
        else:
            kept.append(c)
    return kept, dropped


def _histogram(values: Sequence[float], width: float) -> list[dict]:
    if width <= 0:
        raise ValueError("bin width must be positive")
    counts: dict[int, int] = {}
    for v in values:
        b = int(v // width)
        counts[b] = counts.get(b, 0) + 1
    return [
        {"lo": b * width, "hi": (b + 1) * width, "count": counts.get(b, 0)}
        for b in range(0, max(counts) + 1)
    ]


def corpus_stats(comments: Sequence[Comment], duration_bin_s: float = 30.0, length_bin_words: float = 100.0) -> dict:
    if not comments:
        raise CorpusError("empty corpus")
    durations = [c.duration_s for c in comments]
    lengths = [c.word_count for c in comments]
    return {
        "n_meetings": len({c.meeting_id for c in comments}),
        "n_comments": len(comments),
        "mean_duration_s": statistics.fmean(durations),
        "mean_word_count": statistics.fmean(lengths),
        "duration_histogram": _histogram(durations, duration_bin_s),
        "length_histogram": _histogram(lengths, length_bin_words),
    }


def read_comments(path) -> list[Comment]:
    with open(path, encoding="utf-8") as fh:
        return [Comment.from_record(json.loads(line)) for line in fh if line.strip()]


def write_comments(path, comments: Iterable[Comment]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in comments:
            fh.write(json.dumps(c.to_record(), ensure_ascii=False, sort_keys=True) + "\n")
