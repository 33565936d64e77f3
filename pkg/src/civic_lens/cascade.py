"""Hierarchical labeling of comments.

Every comment gets 23 binary decisions: the action-comment flag, one gate
per dimension, and one detector per top-10 concern.  The gates and detectors
are then folded into one assignment per dimension:

    gate = 0                    -> no concern
    gate = 1, no detector fired -> other concern
    gate = 1, some fired        -> the set of concerns that fired

Detectors run on every comment regardless of the gate so that per-target
scores stay comparable; their output is simply ignored when the gate is off.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from . import features, models
from .corpus import Comment
from .taxonomy import (
    ACTION_COMMENT,
    LOCAL_GATE,
    LOCAL_KEYS,
    SOCIETAL_GATE,
    SOCIETAL_KEYS,
    TOP_LOCAL,
    TOP_SOCIETAL,
    Assignment,
    AssignmentKind,
    label_columns,
)

Flags = Union[Sequence[bool], Mapping[str, bool]]


class CascadeError(ValueError):
    pass


def _flag_list(flags: Flags, keys: Sequence[str]) -> list[bool]:
    if isinstance(flags, Mapping):
        unknown = set(flags) - set(keys)
        if unknown:
            raise CascadeError(f"unknown concern flags: {sorted(unknown)}")
        return [bool(flags.get(k, False)) for k in keys]
    flags = [bool(f) for f in flags]
    if len(flags) != len(keys):
        raise CascadeError(f"expected {len(keys)} flags, got {len(flags)}")
    return flags


def _aggregate(dimension: str, gate: bool, flags: Flags) -> Assignment:
    members = TOP_LOCAL if dimension == "local" else TOP_SOCIETAL
    keys = LOCAL_KEYS if dimension == "local" else SOCIETAL_KEYS
    bits = _flag_list(flags, keys)
    if not gate:
        return Assignment(dimension, AssignmentKind.NONE)
    fired = frozenset(m for m, b in zip(members, bits) if b)
    if fired:
        return Assignment(dimension, AssignmentKind.CONCERNS, fired)
    return Assignment(dimension, AssignmentKind.OTHER)


def aggregate_local(gate: bool, flags: Flags) -> Assignment:
    return _aggregate("local", gate, flags)


def aggregate_societal(gate: bool, flags: Flags) -> Assignment:
    return _aggregate("societal", gate, flags)


@dataclass(frozen=True)
class LabelSet:
    comment_id: str
    action: bool
    local_gate: bool
    local_flags: tuple
    societal_gate: bool
    societal_flags: tuple
    local_assignment: Assignment
    societal_assignment: Assignment

    @classmethod
    def from_bits(cls, comment_id: str, bits: Mapping[str, int]) -> "LabelSet":
        local = tuple(bool(bits[k]) for k in LOCAL_KEYS)
        societal = tuple(bool(bits[k]) for k in SOCIETAL_KEYS)
        return cls(
            comment_id=comment_id,
            action=bool(bits[ACTION_COMMENT]),
            local_gate=bool(bits[LOCAL_GATE]),
            local_flags=local,
            societal_gate=bool(bits[SOCIETAL_GATE]),
            societal_flags=societal,
            local_assignment=aggregate_local(bool(bits[LOCAL_GATE]), local),
            societal_assignment=aggregate_societal(bool(bits[SOCIETAL_GATE]), societal),
        )

    def bits(self) -> dict[str, int]:
        out = {ACTION_COMMENT: int(self.action), LOCAL_GATE: int(self.local_gate), SOCIETAL_GATE: int(self.societal_gate)}
        out.update({k: int(b) for k, b in zip(LOCAL_KEYS, self.local_flags)})
        out.update({k: int(b) for k, b in zip(SOCIETAL_KEYS, self.societal_flags)})
        return out

    def to_record(self, with_assignments: bool = True) -> dict:
        rec = {
            "comment_id": self.comment_id,
            "action": int(self.action),
            "local_gate": int(self.local_gate),
            "societal_gate": int(self.societal_gate),
            "local_flags": {k: int(b) for k, b in zip(LOCAL_KEYS, self.local_flags)},
            "societal_flags": {k: int(b) for k, b in zip(SOCIETAL_KEYS, self.societal_flags)},
        }
        if with_assignments:
            rec["local_assignment"] = self.local_assignment.to_json()
            rec["societal_assignment"] = self.societal_assignment.to_json()
        return rec

    @classmethod
    def from_record(cls, rec: Mapping) -> "LabelSet":
        bits = record_bits(rec)
        missing = [t for t in label_columns() if t not in bits]
        if missing:
            raise CascadeError(f"{rec.get('comment_id')}: missing targets {missing}")
        ls = cls.from_bits(rec["comment_id"], bits)
        for dim, key in (("local", "local_assignment"), ("societal", "societal_assignment")):
            if key in rec and Assignment.from_json(dim, rec[key]) != getattr(ls, key):
                raise CascadeError(f"{rec['comment_id']}: {key} disagrees with gate/flags")
        return ls


_TOP_LEVEL = {"action": ACTION_COMMENT, "local_gate": LOCAL_GATE, "societal_gate": SOCIETAL_GATE}


def record_bits(rec: Mapping) -> dict[str, int]:
    """Flatten a labels/predictions record into ``{target: 0/1}`` (partial allowed)."""
    bits: dict[str, int] = {}
    for key, value in rec.items():
        if key in ("comment_id", "local_assignment", "societal_assignment"):
            continue
        if key in _TOP_LEVEL:
            bits[_TOP_LEVEL[key]] = _bit(value, key)
        elif key in ("local_flags", "societal_flags"):
            allowed = LOCAL_KEYS if key == "local_flags" else SOCIETAL_KEYS
            for k, v in value.items():
                if k not in allowed:
                    raise CascadeError(f"unknown target: {k}")
                bits[k] = _bit(v, k)
        else:
            raise CascadeError(f"unknown target: {key}")
    return bits


def _bit(v, name) -> int:
    if v in (0, 1) and not isinstance(v, float):
        return int(v)
    raise CascadeError(f"{name}: expected 0/1, got {v!r}")


class TrainedDetector:
    """A fitted vocabulary plus a binary model."""

    source = "trained"

    def __init__(self, vocab: features.Vocabulary, model: models.Model):
        if len(vocab) != model.dim:
            raise CascadeError("vocabulary size does not match model dimension")
        self.vocab = vocab
        self.model = model

    def predict_many(self, comments: Sequence[Comment]) -> np.ndarray:
        X = features.transform_matrix([c.text for c in comments], self.vocab)
        return models.predict_many(self.model, X)


class ImportedDetector:
    """Lookup of externally produced predictions keyed by comment id."""

    source = "imported"

    def __init__(self, target: str, predictions: Mapping[str, int]):
        self.target = target
        self.predictions = dict(predictions)

    def predict_many(self, comments: Sequence[Comment]) -> np.ndarray:
        out = []
        for c in comments:
            if c.comment_id not in self.predictions:
                raise CascadeError(f"no imported {self.target} prediction for comment {c.comment_id}")
            out.append(self.predictions[c.comment_id])
        return np.asarray(out, dtype=np.int64)


class ClassifierBank(dict):
    """Mapping of target name to detector; complete when all 23 are present."""

    def missing(self) -> list[str]:
        return [t for t in label_columns() if t not in self]

    def check_complete(self) -> None:
        missing = self.missing()
        if missing:
            raise CascadeError(f"missing detector: {missing[0]}")

    def sources(self) -> dict[str, str]:
        return {t: d.source for t, d in self.items()}


def _predict_bits(comments: Sequence[Comment], bank: ClassifierBank) -> dict[str, np.ndarray]:
    bank.check_complete()
    return {t: bank[t].predict_many(comments) for t in label_columns()}


def classify_comment(comment: Comment, bank: ClassifierBank) -> LabelSet:
    bits = _predict_bits([comment], bank)
    return LabelSet.from_bits(comment.comment_id, {t: int(v[0]) for t, v in bits.items()})


def classify_corpus(comments: Sequence[Comment], banks: Sequence[ClassifierBank]) -> list[LabelSet]:
    """Majority vote of each binary decision over an odd number of banks."""
    if len(banks) == 0 or len(banks) % 2 == 0:
        raise CascadeError("majority vote requires odd count")
    comments = list(comments)
    if not comments:
        return []
    votes = [_predict_bits(comments, bank) for bank in banks]
    need = len(banks) // 2 + 1
    voted = {t: (sum(v[t] for v in votes) >= need).astype(np.int64) for t in label_columns()}
    return [
        LabelSet.from_bits(c.comment_id, {t: int(voted[t][i]) for t in voted})
        for i, c in enumerate(comments)
    ]


def import_predictions(path) -> ClassifierBank:
    """Wrap a JSONL of external predictions as a (possibly partial) bank."""
    per_target: dict[str, dict[str, int]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            rec = json.loads(line)
            if "comment_id" not in rec:
                raise CascadeError(f"{path}:{lineno}: missing comment_id")
            for target, bit in record_bits(rec).items():
                per_target.setdefault(target, {})[rec["comment_id"]] = bit
    return ClassifierBank({t: ImportedDetector(t, p) for t, p in per_target.items()})


def read_labels(path) -> list[LabelSet]:
    with open(path, encoding="utf-8") as fh:
        return [LabelSet.from_record(json.loads(line)) for line in fh if line.strip()]


def write_labels(path, labels: Iterable[LabelSet]) -> None:
    with open(Path(path), "w", encoding="utf-8") as fh:
        for ls in labels:
            fh.write(json.dumps(ls.to_record(), sort_keys=True) + "\n")
