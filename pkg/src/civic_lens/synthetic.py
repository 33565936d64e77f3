"""Keyword-rule corpora with known labels, for end-to-end checks.

Each of the 23 targets owns one keyword and is positive exactly when that
keyword occurs.  Generation keeps the labels hierarchy-consistent: a concern
keyword implies its gate keyword, and any gate keyword implies the action
keyword.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Comment, count_words
from .taxonomy import ACTION_COMMENT, LOCAL_GATE, LOCAL_KEYS, SOCIETAL_GATE, SOCIETAL_KEYS, label_columns

_SYLLABLES = ("ba", "ko", "ri", "mu", "te", "sa", "lo", "ne", "pi", "du", "ga", "ve")


def keyword(target: str) -> str:
    return "kw" + target.replace("_", "")


def filler_lexicon(size: int = 300) -> list[str]:
    words = []
    for a in _SYLLABLES:
        for b in _SYLLABLES:
            for c in _SYLLABLES:
                words.append(a + b + c)
    return words[:size]


@dataclass(frozen=True)
class SyntheticSpec:
    n_comments: int = 600
    n_meetings: int = 10
    concern_rate: float = 0.08
    gate_only_rate: float = 0.1
    action_only_rate: float = 0.15
    min_filler: int = 6
    max_filler: int = 18
    lexicon_size: int = 40
    cities: tuple = ("Northfield", "Eastport", "Westbrook")


def generate(spec: SyntheticSpec = SyntheticSpec(), seed: int = 0) -> tuple[list[Comment], dict[str, dict[str, int]]]:
    """Comments plus ground truth ``{comment_id: {target: 0/1}}``."""
    rng = np.random.default_rng(seed)
    lexicon = filler_lexicon(spec.lexicon_size)
    comments, truth = [], {}
    per_meeting = -(-spec.n_comments // spec.n_meetings)
    for i in range(spec.n_comments):
        m = i // per_meeting
        bits = {t: 0 for t in label_columns()}
        for dim_keys, gate in ((LOCAL_KEYS, LOCAL_GATE), (SOCIETAL_KEYS, SOCIETAL_GATE)):
            for k in dim_keys:
                bits[k] = int(rng.random() < spec.concern_rate)
            bits[gate] = int(any(bits[k] for k in dim_keys) or rng.random() < spec.gate_only_rate)
        bits[ACTION_COMMENT] = int(bits[LOCAL_GATE] or bits[SOCIETAL_GATE] or rng.random() < spec.action_only_rate)
        n_fill = int(rng.integers(spec.min_filler, spec.max_filler + 1))
        words = [lexicon[j] for j in rng.integers(0, len(lexicon), n_fill)]
        words += [keyword(t) for t, b in bits.items() if b]
        words = [words[j] for j in rng.permutation(len(words))]
        text = " ".join(words)
        meeting_id = f"m{m:03d}"
        cid = f"{meeting_id}-c{i - m * per_meeting + 1:03d}"
        comments.append(Comment(
            comment_id=cid,
            city=spec.cities[m % len(spec.cities)],
            meeting_id=meeting_id,
            date=f"2023-{1 + m % 12:02d}-{1 + m % 28:02d}",
            speaker_id=f"spk{i:04d}",
            text=text,
            duration_s=float(10 + len(words)),
            word_count=count_words(text),
        ))
        truth[cid] = bits
    return comments, truth


def to_segments(comments: list[Comment]) -> list[dict]:
    """Transcript records that assemble back into exactly ``comments``.

    An official's remark separates consecutive speakers so no run merges.
    """
    out, clock = [], {}
    for c in comments:
        t = clock.get(c.meeting_id, 0.0)
        base = {"meeting_id": c.meeting_id, "city": c.city, "date": c.date, "in_comment_session": True}
        out.append({**base, "start_s": t, "end_s": t + 3.0, "speaker_id": "chair", "role": "official",
                    "text": "next speaker please"})
        t += 3.0
        out.append({**base, "start_s": t, "end_s": t + c.duration_s, "speaker_id": c.speaker_id,
                    "role": "public", "text": c.text})
        clock[c.meeting_id] = t + c.duration_s
    return out


def annotation_record(comment_id: str, bits: dict[str, int]) -> dict:
    return {
        "comment_id": comment_id,
        "action": bits[ACTION_COMMENT],
        "local_gate": bits[LOCAL_GATE],
        "societal_gate": bits[SOCIETAL_GATE],
        "local_flags": {k: bits[k] for k in LOCAL_KEYS},
        "societal_flags": {k: bits[k] for k in SOCIETAL_KEYS},
    }


def write_fixture(out_dir, spec: SyntheticSpec = SyntheticSpec(), seed: int = 0) -> dict:
    """Write ``transcripts/<meeting>.jsonl`` and ``annotations.jsonl`` under ``out_dir``."""
    out = Path(out_dir)
    comments, truth = generate(spec, seed)
    tdir = out / "transcripts"
    tdir.mkdir(parents=True, exist_ok=True)
    by_meeting: dict[str, list[dict]] = {}
    for rec in to_segments(comments):
        by_meeting.setdefault(rec["meeting_id"], []).append(rec)
    for mid, recs in by_meeting.items():
        with open(tdir / f"{mid}.jsonl", "w", encoding="utf-8") as fh:
            for r in recs:
                fh.write(json.dumps(r, sort_keys=True) + "\n")
    with open(out / "annotations.jsonl", "w", encoding="utf-8") as fh:
        for c in comments:
            fh.write(json.dumps(annotation_record(c.comment_id, truth[c.comment_id]), sort_keys=True) + "\n")
    return {"comments": comments, "truth": truth, "transcripts": tdir, "annotations": out / "annotations.jsonl"}
