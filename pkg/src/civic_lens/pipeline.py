"""Run configuration and the end-to-end commands behind the CLI.

Every command first loads and checks all of its inputs, raising
``ValidationError`` before anything is written; only then does it compute
and write outputs.  Outputs are byte-stable for a given config and root
seed.  Wall-clock data is kept in ``run_meta.json`` only.
"""
from __future__ import annotations

import copy
import hashlib
import json
import logging
import os
import platform
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from . import __version__, analytics, cascade, corpus, evaluation, features, goldset, models
from .seeding import derive_seed
from .taxonomy import label_columns

log = logging.getLogger(__name__)


class ValidationError(ValueError):
    """Bad configuration or input; maps to exit code 1."""


DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "jobs": 1,
    "out": "out",
    "paths": {
        "transcripts": None,
        "comments": None,
        "annotations": None,
        "models": None,
        "labels": None,
        "predictions": None,
        "cities": None,
        "state_cities": None,
    },
    "filter": {"min_words": 5, "min_duration_s": 2.0,
               "blocklist": ["thanks", "thank you", "bye", "can you hear me"]},
    "training": {"families": ["logistic", "svm"], "seeds": [0, 1, 2], "k": 5, "test_fraction": 1 / 6,
                 "stop_on_perfect": True},
    "analytics": {"restrict_to_action": True, "direction": "local_first", "top_k": 3},
    "goldset": {"subset_size": None, "n_subsets": 1000, "population_bins": [3.0, 3.6, 4.2, 4.8, 5.4, 6.0],
                "smoothing_epsilon": 1e-9, "state_population": None, "state_votes": None},
}


def _merge(base: dict, over: Mapping, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        where = f"{prefix}{k}"
        if k not in base:
            raise ValidationError(f"config key '{where}': unknown key")
        if isinstance(base[k], dict):
            if not isinstance(v, Mapping):
                raise ValidationError(f"config key '{where}': expected a mapping")
            out[k] = _merge(base[k], v, where + ".")
        else:
            out[k] = v
    return out


def _want(cond: bool, key: str, msg: str) -> None:
    if not cond:
        raise ValidationError(f"config key '{key}': {msg}")


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def check_config(cfg: dict) -> dict:
    _want(_is_int(cfg["seed"]) and cfg["seed"] >= 0, "seed", "must be a non-negative integer")
    _want(_is_int(cfg["jobs"]) and cfg["jobs"] >= 1, "jobs", "must be a positive integer")
    _want(isinstance(cfg["out"], str) and cfg["out"], "out", "must be a path")
    for k, v in cfg["paths"].items():
        _want(v is None or isinstance(v, str), f"paths.{k}", "must be a path string")
    f = cfg["filter"]
    _want(_is_int(f["min_words"]) and f["min_words"] >= 0, "filter.min_words", "must be a non-negative integer")
    _want(_is_num(f["min_duration_s"]) and f["min_duration_s"] >= 0, "filter.min_duration_s", "must be >= 0")
    _want(isinstance(f["blocklist"], list) and all(isinstance(p, str) for p in f["blocklist"]),
          "filter.blocklist", "must be a list of strings")
    t = cfg["training"]
    _want(isinstance(t["families"], list) and t["families"] and all(x in evaluation.FAMILIES for x in t["families"])
          and len(set(t["families"])) == len(t["families"]), "training.families",
          f"must be a non-empty list drawn from {list(evaluation.FAMILIES)}")
    _want(isinstance(t["seeds"], list) and t["seeds"] and all(_is_int(s) and s >= 0 for s in t["seeds"])
          and len(set(t["seeds"])) == len(t["seeds"]), "training.seeds", "must be distinct non-negative integers")
    _want(len(t["seeds"]) % 2 == 1, "training.seeds", "majority vote requires odd count")
    _want(_is_int(t["k"]) and t["k"] >= 2, "training.k", "must be an integer >= 2")
    _want(_is_num(t["test_fraction"]) and 0 < t["test_fraction"] < 1, "training.test_fraction", "must lie in (0, 1)")
    _want(isinstance(t["stop_on_perfect"], bool), "training.stop_on_perfect", "must be true or false")
    a = cfg["analytics"]
    _want(isinstance(a["restrict_to_action"], bool), "analytics.restrict_to_action", "must be true or false")
    _want(a["direction"] in ("local_first", "societal_first"), "analytics.direction",
          "must be local_first or societal_first")
    _want(_is_int(a["top_k"]) and a["top_k"] >= 1, "analytics.top_k", "must be a positive integer")
    g = cfg["goldset"]
    _want(g["subset_size"] is None or (_is_int(g["subset_size"]) and g["subset_size"] >= 1),
          "goldset.subset_size", "must be a positive integer")
    _want(_is_int(g["n_subsets"]) and g["n_subsets"] >= 1, "goldset.n_subsets", "must be a positive integer")
    try:
        goldset.DistributionSpec(tuple(g["population_bins"]), g["smoothing_epsilon"])
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"config key 'goldset.population_bins': {exc}") from exc
    return cfg


def load_config(path=None, overrides: Mapping | None = None) -> dict:
    """Defaults, then the YAML/JSON file, then explicit overrides."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = yaml.safe_load(fh)
        except OSError as exc:
            raise ValidationError(f"cannot read config {path}: {exc.strerror}") from exc
        except yaml.YAMLError as exc:
            raise ValidationError(f"config {path} is not valid YAML/JSON: {exc}") from exc
        if doc is not None:
            if not isinstance(doc, Mapping):
                raise ValidationError(f"config {path}: top level must be a mapping")
            cfg = _merge(cfg, doc)
    if overrides:
        cfg = _merge(cfg, overrides)
    return check_config(cfg)


def config_digest(cfg: Mapping) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def _need_path(cfg, key: str, must_exist: bool = True, is_dir: bool | None = None) -> Path:
    value = cfg["paths"].get(key)
    if not value:
        raise ValidationError(f"config key 'paths.{key}': required for this command")
    p = Path(value)
    if must_exist and not p.exists():
        raise ValidationError(f"config key 'paths.{key}': {p} does not exist")
    if must_exist and is_dir is not None and p.is_dir() != is_dir:
        raise ValidationError(f"config key 'paths.{key}': {p} must be a {'directory' if is_dir else 'file'}")
    return p


def _out_dir(cfg) -> Path:
    return Path(cfg["out"])


def _write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_run_meta(cfg, command: str, extra: Mapping | None = None) -> None:
    """Record when and how a command ran, merged into the sidecar ``run_meta.json``."""
    path = _out_dir(cfg) / "run_meta.json"
    meta = {}
    if path.exists():
        try:
            meta = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, ValueError):
            meta = {}
    meta[command] = {
        "finished_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config_sha256": config_digest(cfg),
        "seed": cfg["seed"],
        **(extra or {}),
    }
    _write_json(path, meta)


# -- loading with validation ----------------------------------------------------------------


def _load_comments(path: Path) -> list[corpus.Comment]:
    try:
        comments = corpus.read_comments(path)
    except (OSError, ValueError, TypeError) as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    ids = [c.comment_id for c in comments]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"{path}: duplicate comment_id")
    if not comments:
        raise ValidationError(f"{path}: no comments")
    return comments


def _load_annotations(path: Path, comments) -> dict[str, np.ndarray]:
    """Per-target label vectors aligned with ``comments``."""
    by_id: dict[str, dict] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                rec = json.loads(line)
                cid = rec.get("comment_id") if isinstance(rec, dict) else None
                if not isinstance(cid, str):
                    raise ValidationError(f"{path}:{lineno}: missing comment_id")
                ls = cascade.LabelSet.from_record(rec)
                if cid in by_id:
                    raise ValidationError(f"{path}:{lineno}: duplicate comment_id {cid}")
                by_id[cid] = ls.bits()
    except (OSError, ValueError, KeyError, TypeError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"{path}: {exc}") from exc
    missing = [c.comment_id for c in comments if c.comment_id not in by_id]
    if missing:
        raise ValidationError(f"{path}: no annotation for comment {missing[0]}")
    return {t: np.array([by_id[c.comment_id][t] for c in comments], dtype=np.int64) for t in label_columns()}


def _transcript_files(p: Path) -> list[Path]:
    files = sorted(p.glob("*.jsonl")) if p.is_dir() else [p]
    if not files:
        raise ValidationError(f"config key 'paths.transcripts': no *.jsonl files in {p}")
    return files


def _filter_config(cfg) -> corpus.FilterConfig:
    f = cfg["filter"]
    return corpus.FilterConfig(f["min_words"], float(f["min_duration_s"]), tuple(f["blocklist"]))


# -- commands -------------------------------------------------------------------------------


def cmd_extract(cfg) -> dict:
    files = _transcript_files(_need_path(cfg, "transcripts"))
    segments, reports = [], {}
    for f in files:
        try:
            segs, rep = corpus.parse_transcript(f)
        except (OSError, ValueError) as exc:
            raise ValidationError(str(exc)) from exc
        segments.extend(segs)
        reports[f.name] = rep.to_dict()
    segments.sort(key=lambda s: (s.meeting_id, s.start_s))
    try:
        raw = corpus.assemble_comments(segments)
    except corpus.CorpusError as exc:
        raise ValidationError(str(exc)) from exc
    ids = [c.comment_id for c in raw]
    if len(set(ids)) != len(ids):
        raise ValidationError("comment ids collide across transcript files (duplicate meeting ids?)")
    kept, dropped = corpus.filter_comments(raw, _filter_config(cfg))

    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    corpus.write_comments(out / "comments.jsonl", kept)
    _write_dropped(out / "dropped.jsonl", dropped)
    summary = {"files": reports, "segments": len(segments), "assembled": len(raw), "kept": len(kept),
               "dropped": _reason_counts(dropped)}
    if kept:
        summary["stats"] = corpus.corpus_stats(kept)
    _write_json(out / "extract_report.json", summary)
    return summary


def _write_dropped(path: Path, dropped) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c, reason in dropped:
            fh.write(json.dumps({"comment_id": c.comment_id, "reason": reason}, sort_keys=True) + "\n")


def _reason_counts(dropped) -> dict:
    counts: dict[str, int] = {}
    for _, r in dropped:
        counts[r] = counts.get(r, 0) + 1
    return dict(sorted(counts.items()))


def cmd_filter(cfg) -> dict:
    comments = _load_comments(_need_path(cfg, "comments", is_dir=False))
    kept, dropped = corpus.filter_comments(comments, _filter_config(cfg))
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    corpus.write_comments(out / "comments.jsonl", kept)
    _write_dropped(out / "dropped.jsonl", dropped)
    return {"kept": len(kept), "dropped": _reason_counts(dropped)}


def _suite(cfg, comments, labels) -> evaluation.SuiteResult:
    t = cfg["training"]
    try:
        return evaluation.evaluate_suite(
            [c.text for c in comments], labels, families=tuple(t["families"]), seeds=tuple(t["seeds"]),
            k=t["k"], test_fraction=float(t["test_fraction"]), root_seed=cfg["seed"],
            stop_on_perfect=t["stop_on_perfect"], jobs=cfg["jobs"],
        )
    except evaluation.EvaluationError as exc:
        # class balance problems surface here, after inputs parsed fine
        raise ValidationError(str(exc)) from exc


def _annotated_inputs(cfg):
    comments = _load_comments(_need_path(cfg, "comments", is_dir=False))
    labels = _load_annotations(_need_path(cfg, "annotations", is_dir=False), comments)
    t = cfg["training"]
    for target, y in labels.items():
        for cls in (0, 1):
            n_cls = int(np.sum(y == cls))
            if n_cls < t["k"] + 2:
                raise ValidationError(f"target {target}: class {cls} has {n_cls} examples; "
                                      f"need at least {t['k'] + 2} for the split and {t['k']}-fold CV")
    return comments, labels


def _write_report(out: Path, suite: evaluation.SuiteResult) -> None:
    evaluation.write_report(suite.report, out / "report.json", out / "report.csv")
    evaluation.write_cv_table(suite.cv_rows(), out / "cv_table.csv")


def cmd_evaluate(cfg) -> dict:
    comments, labels = _annotated_inputs(cfg)
    suite = _suite(cfg, comments, labels)
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    _write_report(out, suite)
    return suite.report.to_dict()


def cmd_train(cfg) -> dict:
    comments, labels = _annotated_inputs(cfg)
    suite = _suite(cfg, comments, labels)
    out = _out_dir(cfg)
    mdir = out / "models"
    mdir.mkdir(parents=True, exist_ok=True)
    manifest = {"root_seed": cfg["seed"], "seeds": list(cfg["training"]["seeds"]), "targets": {}}
    for slot, units in sorted(suite.best_units().items()):
        sdir = mdir / f"seed{slot}"
        sdir.mkdir(exist_ok=True)
        for target in label_columns():
            u = units[target]
            (sdir / f"{target}.vocab.json").write_text(u.vocab.dumps() + "\n", encoding="utf-8")
            (sdir / f"{target}.json").write_text(models.dumps_model(u.model, f"{target}.vocab.json") + "\n",
                                                 encoding="utf-8")
    for row in suite.report.rows:
        fam = suite.report.best_family[row["target"]]
        manifest["targets"][row["target"]] = {"family": fam, "test_f1": row["families"][fam]["f1"]}
    _write_json(mdir / "manifest.json", manifest)
    _write_report(out, suite)
    return manifest


def load_bank(seed_dir: Path) -> cascade.ClassifierBank:
    bank = cascade.ClassifierBank()
    for target in label_columns():
        mpath = seed_dir / f"{target}.json"
        if not mpath.exists():
            continue
        try:
            mdict = json.loads(mpath.read_text(encoding="utf-8"))
            vref = mdict.get("vocabulary_ref") or f"{target}.vocab.json"
            vocab = features.Vocabulary.from_dict(json.loads((seed_dir / vref).read_text(encoding="utf-8")))
            bank[target] = cascade.TrainedDetector(vocab, models.model_from_dict(mdict))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise ValidationError(f"{mpath}: {exc}") from exc
    return bank


def cmd_predict(cfg) -> dict:
    comments = _load_comments(_need_path(cfg, "comments", is_dir=False))
    seeds = cfg["training"]["seeds"]
    mdir = Path(cfg["paths"]["models"]) if cfg["paths"]["models"] else None
    imported = cascade.ClassifierBank()
    if cfg["paths"]["predictions"]:
        try:
            imported = cascade.import_predictions(_need_path(cfg, "predictions", is_dir=False))
        except (OSError, ValueError) as exc:
            raise ValidationError(str(exc)) from exc
    banks = []
    for slot in seeds:
        bank = cascade.ClassifierBank()
        if mdir is not None:
            sdir = mdir / f"seed{slot}"
            if not sdir.is_dir():
                raise ValidationError(f"config key 'paths.models': missing {sdir}")
            bank.update(load_bank(sdir))
        bank.update(imported)
        try:
            bank.check_complete()
        except cascade.CascadeError as exc:
            raise ValidationError(f"seed {slot}: {exc}") from exc
        banks.append(bank)
    for t, det in imported.items():
        absent = [c.comment_id for c in comments if c.comment_id not in det.predictions]
        if absent:
            raise ValidationError(f"no imported {t} prediction for comment {absent[0]}")
    labels = cascade.classify_corpus(comments, banks)
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    cascade.write_labels(out / "labels.jsonl", labels)
    return {"n_comments": len(labels), "sources": banks[0].sources()}


def _labels_for(cfg, comments=None) -> list[cascade.LabelSet]:
    path = _need_path(cfg, "labels", is_dir=False)
    try:
        labels = cascade.read_labels(path)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    if not labels:
        raise ValidationError(f"{path}: no labels")
    if comments is not None:
        known = {c.comment_id for c in comments}
        stray = [ls.comment_id for ls in labels if ls.comment_id not in known]
        if stray:
            raise ValidationError(f"{path}: label for unknown comment {stray[0]}")
    return labels


def cmd_summarize(cfg) -> dict:
    comments = _load_comments(_need_path(cfg, "comments", is_dir=False))
    labels = _labels_for(cfg, comments)
    summaries = analytics.summarize_cities(comments, labels)
    matrix = analytics.cooccurrence(labels, cfg["analytics"]["restrict_to_action"])
    coverage = analytics.coverage_stats(labels)
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    analytics.write_summary(out / "summary.csv", summaries)
    analytics.write_cooccurrence(out / "cooccurrence.csv", matrix)
    _write_json(out / "coverage.json", coverage.to_dict())
    return {"cities": [s.city for s in summaries], "coverage": coverage.to_dict()}


def cmd_sankey(cfg) -> dict:
    labels = _labels_for(cfg)
    a = cfg["analytics"]
    matrix = analytics.cooccurrence(labels, a["restrict_to_action"])
    if matrix.base_n == 0:
        raise ValidationError("no comments in the base population (no action comments?)")
    data = analytics.sankey_export(matrix, a["direction"], a["top_k"])
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    analytics.write_sankey(out / "sankey.json", data)
    return {"base_n": data["base_n"], "nodes": len(data["nodes"]), "links": len(data["links"])}


def cmd_select_cities(cfg) -> dict:
    g = cfg["goldset"]
    spec = goldset.DistributionSpec(tuple(g["population_bins"]), float(g["smoothing_epsilon"]))
    try:
        candidates = goldset.read_cities(_need_path(cfg, "cities", is_dir=False))
        if cfg["paths"]["state_cities"]:
            state = goldset.StateProfile.from_cities(
                goldset.read_cities(_need_path(cfg, "state_cities", is_dir=False)), spec)
        elif g["state_population"] is not None and g["state_votes"] is not None:
            state = goldset.StateProfile.from_vectors(g["state_population"], g["state_votes"], spec)
        else:
            raise ValidationError("config key 'paths.state_cities': give a state city list or "
                                  "goldset.state_population plus goldset.state_votes")
    except (OSError, goldset.GoldSetError, TypeError) as exc:
        raise ValidationError(str(exc)) from exc
    size = g["subset_size"]
    if size is None:
        raise ValidationError("config key 'goldset.subset_size': required for select-cities")
    if size > len(candidates):
        raise ValidationError(f"config key 'goldset.subset_size': {size} exceeds {len(candidates)} candidates")
    seed = derive_seed(cfg["seed"], "goldset")
    result = goldset.select_gold_set(candidates, state, size, g["n_subsets"], seed, spec)
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "result.json", result.to_dict())
    return result.to_dict()


COMMANDS = {
    "extract": cmd_extract,
    "filter": cmd_filter,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
    "summarize": cmd_summarize,
    "sankey": cmd_sankey,
    "select-cities": cmd_select_cities,
}


def run(command: str, cfg) -> dict:
    result = COMMANDS[command](cfg)
    write_run_meta(cfg, command, {"pid": os.getpid()})
    return result

