"""Staged command-line pipeline.

Stages communicate through JSON Lines files so any of them can be rerun
or inspected in isolation:

    extract -> classify -> paraphrase -> translate -> score -> report

Every stage writes a manifest next to its output (input hashes, config
snapshot, record counts, seed) and nothing else non-deterministic, so a
rerun with the same config, seed and mock backends is byte-identical.

Exit codes: 0 success, 1 contract violation, 2 transport failures.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import yaml

from . import corpus as corpus_mod
from . import extract as extract_mod
from . import lexicon as lexicon_mod
from . import llm as llm_mod
from . import mt as mt_mod
from . import qe as qe_mod
from . import report as report_mod
from . import stats as stats_mod
from .errors import (ContractViolation, SchemaVersionError, TransportError,
                     UnparseableResponse)

SCHEMA_VERSION = report_mod.SCHEMA_VERSION

STAGES = ("extract", "classify", "paraphrase", "translate", "score", "report")


# --- config ------------------------------------------------------------------

@dataclass
class Config:
    raw: dict
    base: Path

    def path(self, value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base / p

    def require(self, *keys):
        node = self.raw
        for key in keys:
            if not isinstance(node, dict) or key not in node:
                raise ContractViolation(f"config is missing {'.'.join(keys)}")
            node = node[key]
        return node

    def get(self, *keys, default=None):
        node = self.raw
        for key in keys:
            if not isinstance(node, dict) or key not in node:
                return default
            node = node[key]
        return node


def load_config(path: str | Path) -> Config:
    path = Path(path)
    if not path.is_file():
        raise ContractViolation(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ContractViolation(f"config must be a mapping: {path}")
    return Config(raw=raw, base=path.parent)


def _credential(cfg_entry: dict) -> str | None:
    env_name = cfg_entry.get("credential_env")
    if env_name is None:
        return None
    value = os.environ.get(env_name)
    if not value:
        raise ContractViolation(
            f"credential environment variable {env_name!r} is not set")
    return value


def build_backend(config: Config, name: str):
    entry = config.get("backends", name)
    if entry is None:
        raise ContractViolation(f"backend {name!r} is not defined in the config")
    kind = entry.get("kind")
    mode = entry.get("mode", "http")
    if kind == "llm":
        if mode == "mock":
            return llm_mod.MockChatBackend.from_file(
                config.path(entry["script"]),
                model_id=entry.get("model_id", "mock-chat"))
        return llm_mod.HttpChatBackend(
            base_url=entry["base_url"], model_id=entry["model_id"],
            api_key=_credential(entry), timeout=entry.get("timeout", 60.0))
    if kind == "mt":
        if mode == "mock":
            return mt_mod.MockMTBackend(
                system_id=entry.get("system_id", name),
                break_rules=entry.get("break_rules"))
        return mt_mod.HttpMTBackend(
            base_url=entry["base_url"], system_id=entry.get("system_id", name),
            api_key=_credential(entry), timeout=entry.get("timeout", 60.0))
    if kind == "qe":
        orientation = stats_mod.Orientation(entry["orientation"])
        if mode == "mock":
            return qe_mod.MockQEBackend(
                metric_id=entry.get("metric_id", name), orientation=orientation)
        return qe_mod.HttpQEBackend(
            base_url=entry["base_url"], metric_id=entry.get("metric_id", name),
            orientation=orientation, api_key=_credential(entry),
            timeout=entry.get("timeout", 60.0))
    raise ContractViolation(f"backend {name!r} has unknown kind {kind!r}")


# --- shared io ---------------------------------------------------------------

def read_jsonl(path: Path) -> list[dict]:
    if not path.is_file():
        raise ContractViolation(f"missing input file: {path}")
    _check_input_manifest(path)
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def write_jsonl(path: Path, records: list[dict]):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _manifest_path(out: Path) -> Path:
    return out / "manifest.json" if out.is_dir() else Path(str(out) + ".manifest.json")


def _check_input_manifest(path: Path):
    manifest = Path(str(path) + ".manifest.json")
    if not manifest.is_file():
        return
    with open(manifest, encoding="utf-8") as fh:
        recorded = json.load(fh).get("schema_version")
    if recorded != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"{path} was written under schema {recorded}, expected {SCHEMA_VERSION}")


def write_manifest(out: Path, stage: str, config: Config, inputs: dict[str, Path],
                   counts: dict, seed):
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "stage": stage,
        "seed": seed,
        "inputs": {name: _sha256(path) for name, path in sorted(inputs.items())},
        "config": config.raw,
        "counts": counts,
    }
    path = _manifest_path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")


def _map_ordered(fn, items, max_workers: int):
    """Run fn over items concurrently, results joined in input order."""
    results = [None] * len(items)
    if not items:
        return results
    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        future_to_idx = {pool.submit(fn, item): i for i, item in enumerate(items)}
        for future in future_to_idx:
            idx = future_to_idx[future]
            try:
                results[idx] = (future.result(), None)
            except Exception as exc:  # noqa: BLE001 - recorded per item
                results[idx] = (None, exc)
    return results


def _load_corpus(config: Config) -> corpus_mod.Corpus:
    path = config.path(config.require("corpus", "path"))
    fmt = config.get("corpus", "format", default="conllu")
    if not path.is_file():
        raise ContractViolation(f"missing input file: {path}")
    return corpus_mod.load_corpus(path, fmt)


def _load_lexicon(config: Config):
    idioms_path = config.path(config.require("lexicon", "idioms"))
    if not idioms_path.is_file():
        raise ContractViolation(f"missing input file: {idioms_path}")
    verbs_value = config.get("lexicon", "verb_lemmas")
    if verbs_value:
        verbs_path = config.path(verbs_value)
        verb_lemmas = [line.strip() for line
                       in verbs_path.read_text("utf-8").splitlines()
                       if line.strip() and not line.startswith("#")]
    else:
        verb_lemmas = lexicon_mod.default_verb_lemmas()
    with open(idioms_path, encoding="utf-8") as fh:
        lex = lexicon_mod.load_idiom_lexicon(fh, verb_lemmas,
                                             source_label=str(idioms_path))
    return lex, idioms_path


def _categories(args) -> tuple[extract_mod.Category, ...]:
    if not getattr(args, "category", None) or args.category == "all":
        return tuple(extract_mod.Category)
    return (extract_mod.Category(args.category.upper()),)


def _seed(config: Config, args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    return config.get("seed", default=0)


def _concurrency(config: Config) -> int:
    return int(config.get("concurrency", default=4))


# --- stages ------------------------------------------------------------------

def stage_extract(config: Config, args) -> int:
    corpus = _load_corpus(config)
    lex, idioms_path = _load_lexicon(config)
    light_verbs = lexicon_mod.light_verb_set(
        config.get("light_verbs", default="dataset_six"))
    threshold = float(config.get("vid_threshold",
                                 default=extract_mod.DEFAULT_VID_THRESHOLD))
    categories = _categories(args)
    seed = _seed(config, args)

    records = []
    per_category = {c.value: 0 for c in extract_mod.Category}
    for sentence in corpus:
        for cand in extract_mod.extract_all(sentence, lex, light_verbs,
                                            threshold, categories):
            per_category[cand.category.value] += 1
            records.append(extract_mod.candidate_to_dict(cand))
    out = Path(args.stage_out)
    write_jsonl(out, records)

    counts = {"candidates": len(records), **per_category}
    n_controls = int(config.get("control_sample", "n", default=0))
    if n_controls:
        controls, shortfall = extract_mod.sample_non_vmwe(
            corpus, n_controls, seed, lex, light_verbs, threshold)
        controls_out = Path(args.controls_out) if args.controls_out else \
            out.with_name(out.stem + ".controls.jsonl")
        write_jsonl(controls_out,
                    [corpus_mod.sentence_to_dict(s) for s in controls])
        counts["controls"] = len(controls)
        counts["controls_shortfall"] = shortfall
        if shortfall:
            print(f"warning: only {len(controls)} of {n_controls} requested "
                  f"control sentences qualify", file=sys.stderr)
    inputs = {"corpus": config.path(config.require("corpus", "path")),
              "idioms": idioms_path}
    write_manifest(out, "extract", config, inputs, counts, seed)
    return 0


def stage_classify(config: Config, args) -> int:
    candidates = [extract_mod.candidate_from_dict(r)
                  for r in read_jsonl(Path(args.stage_in))]
    wanted = set(_categories(args))
    candidates = [c for c in candidates if c.category in wanted]
    corpus = _load_corpus(config)
    backend_name = args.backend or config.require("pipeline", "llm")
    backend = build_backend(config, backend_name)

    def classify(cand):
        sentence = corpus.by_id(cand.sentence_id)
        return llm_mod.classify_candidate(backend, cand.category, cand, sentence)

    outcomes = _map_ordered(classify, candidates, _concurrency(config))
    records = []
    counts = {"total": len(candidates), "accepted": 0, "rejected": 0,
              "undecided": 0, "transport_failures": 0}
    for cand, (result, exc) in zip(candidates, outcomes):
        record = {"candidate_ref": cand.ref, "sentence_id": cand.sentence_id,
                  "category": cand.category.value, "span": list(cand.span)}
        if exc is None:
            record.update(verdict=result.verdict, raw_choice=result.raw_choice,
                          raw_response=result.raw_response)
            counts["accepted" if result.verdict else "rejected"] += 1
        elif isinstance(exc, UnparseableResponse):
            record.update(verdict=None, raw_choice=None,
                          raw_response=exc.raw_response, error="unparseable")
            counts["undecided"] += 1
        elif isinstance(exc, TransportError):
            record.update(verdict=None, raw_choice=None, raw_response=None,
                          error="transport")
            counts["transport_failures"] += 1
        else:
            raise exc
        records.append(record)
    out = Path(args.stage_out)
    write_jsonl(out, records)
    inputs = {"candidates": Path(args.stage_in),
              "corpus": config.path(config.require("corpus", "path"))}
    write_manifest(out, "classify", config, inputs, counts, _seed(config, args))
    return 2 if counts["transport_failures"] else 0


def stage_paraphrase(config: Config, args) -> int:
    classifications = read_jsonl(Path(args.stage_in))
    wanted = {c.value for c in _categories(args)}
    accepted = [r for r in classifications
                if r.get("verdict") is True and r["category"] in wanted]
    corpus = _load_corpus(config)
    backend_name = args.backend or config.require("pipeline", "llm")
    backend = build_backend(config, backend_name)

    def paraphrase(record):
        sentence = corpus.by_id(record["sentence_id"])
        cand = extract_mod.rebuild_candidate(
            sentence, extract_mod.Category(record["category"]),
            tuple(record["span"]))
        return llm_mod.paraphrase_candidate(backend, cand, sentence)

    outcomes = _map_ordered(paraphrase, accepted, _concurrency(config))
    records = []
    counts = {"total": len(accepted), "paraphrased": 0, "retained_candidate": 0,
              "undecided": 0, "transport_failures": 0}
    for source, (result, exc) in zip(accepted, outcomes):
        record = {"candidate_ref": source["candidate_ref"],
                  "sentence_id": source["sentence_id"],
                  "category": source["category"]}
        if exc is None:
            record.update(original=result.original, paraphrased=result.paraphrased,
                          retains_candidate=result.retains_candidate,
                          raw_response=result.raw_response)
            counts["paraphrased"] += 1
            counts["retained_candidate"] += result.retains_candidate
        elif isinstance(exc, UnparseableResponse):
            record.update(original=None, paraphrased=None,
                          raw_response=exc.raw_response, error="unparseable")
            counts["undecided"] += 1
        elif isinstance(exc, TransportError):
            record.update(original=None, paraphrased=None, raw_response=None,
                          error="transport")
            counts["transport_failures"] += 1
        else:
            raise exc
        records.append(record)
    out = Path(args.stage_out)
    write_jsonl(out, records)
    inputs = {"classifications": Path(args.stage_in),
              "corpus": config.path(config.require("corpus", "path"))}
    write_manifest(out, "paraphrase", config, inputs, counts, _seed(config, args))
    return 2 if counts["transport_failures"] else 0


def _target_langs(config: Config, args) -> list[str]:
    if getattr(args, "target_lang", None):
        return [args.target_lang]
    langs = config.get("target_langs", default=list(mt_mod.TARGET_LANGS))
    bad = [lang for lang in langs if lang not in mt_mod.TARGET_LANGS]
    if bad:
        raise ContractViolation(f"unsupported target language(s): {bad}")
    return list(langs)


def _mt_backend_names(config: Config, args) -> list[str]:
    if getattr(args, "backend", None):
        return [args.backend]
    names = config.require("pipeline", "mt")
    if isinstance(names, str):
        names = [names]
    return list(names)


def stage_translate(config: Config, args) -> int:
    paraphrases = [r for r in read_jsonl(Path(args.stage_in))
                   if r.get("paraphrased")]
    langs = _target_langs(config, args)
    backends = {name: build_backend(config, name)
                for name in _mt_backend_names(config, args)}
    min_repeats = int(config.get("repetition", "min_repeats",
                                 default=mt_mod.DEFAULT_MIN_REPEATS))
    max_unit = int(config.get("repetition", "max_unit",
                              default=mt_mod.DEFAULT_MAX_UNIT))

    controls: list[corpus_mod.Sentence] = []
    controls_path = None
    if args.controls_in:
        controls_path = Path(args.controls_in)
    elif config.get("controls"):
        controls_path = config.path(config.get("controls"))
    if controls_path is not None:
        if not controls_path.is_file():
            raise ContractViolation(f"missing input file: {controls_path}")
        with open(controls_path, encoding="utf-8") as fh:
            controls = list(corpus_mod.corpus_from_jsonl(fh).sentences)

    jobs = []
    for name, backend in sorted(backends.items()):
        for lang in langs:
            for rec in paraphrases:
                jobs.append((backend, lang, "ori", rec["original"], rec))
                jobs.append((backend, lang, "para", rec["paraphrased"], rec))
            for sentence in controls:
                jobs.append((backend, lang, "control", sentence.text,
                             {"sentence_id": sentence.id, "candidate_ref": None,
                              "category": None}))

    def run(job):
        backend, lang, kind, text, rec = job
        record = mt_mod.translate(backend, text, lang,
                                  sentence_id=rec["sentence_id"])
        return mt_mod.validate_translation(record, min_repeats, max_unit)

    outcomes = _map_ordered(run, jobs, _concurrency(config))
    records = []
    counts = {"total": len(jobs), "transport_failures": 0,
              **{v.value: 0 for v in mt_mod.ValidityStatus}}
    for (backend, lang, kind, text, rec), (result, exc) in zip(jobs, outcomes):
        if exc is not None:
            if isinstance(exc, TransportError):
                counts["transport_failures"] += 1
                records.append({
                    "sentence_id": rec["sentence_id"],
                    "candidate_ref": rec.get("candidate_ref"),
                    "category": rec.get("category"), "kind": kind,
                    "source": text, "target_lang": lang,
                    "system_id": backend.system_id, "hypothesis": None,
                    "validity": None, "error": "transport"})
                continue
            raise exc
        counts[result.validity.value] += 1
        records.append({
            "sentence_id": result.sentence_id,
            "candidate_ref": rec.get("candidate_ref"),
            "category": rec.get("category"), "kind": kind,
            "source": result.source, "target_lang": result.target_lang,
            "system_id": result.system_id, "hypothesis": result.hypothesis,
            "validity": result.validity.value})
    out = Path(args.stage_out)
    write_jsonl(out, records)
    inputs = {"paraphrases": Path(args.stage_in)}
    if controls_path is not None:
        inputs["controls"] = controls_path
    write_manifest(out, "translate", config, inputs, counts, _seed(config, args))
    return 2 if counts["transport_failures"] else 0


def stage_score(config: Config, args) -> int:
    translations = read_jsonl(Path(args.stage_in))
    backend_name = args.backend or config.require("pipeline", "qe")
    backend = build_backend(config, backend_name)

    valid = []
    records = []
    counts = {"qe_scores": 0, "deltas": 0, "invalid": 0, "delta_pairs_skipped": 0,
              "transport_failures": 0}
    for rec in translations:
        if rec.get("error") == "transport" or rec.get("validity") is None:
            counts["invalid"] += 1
            records.append({"type": "invalid", "kind": rec["kind"],
                            "sentence_id": rec["sentence_id"],
                            "candidate_ref": rec.get("candidate_ref"),
                            "category": rec.get("category"),
                            "system_id": rec["system_id"],
                            "target_lang": rec["target_lang"],
                            "validity": rec.get("validity") or "transport"})
            continue
        if rec["validity"] != mt_mod.ValidityStatus.OK.value:
            counts["invalid"] += 1
            records.append({"type": "invalid", "kind": rec["kind"],
                            "sentence_id": rec["sentence_id"],
                            "candidate_ref": rec.get("candidate_ref"),
                            "category": rec.get("category"),
                            "system_id": rec["system_id"],
                            "target_lang": rec["target_lang"],
                            "validity": rec["validity"]})
            continue
        valid.append(rec)

    def assess(rec):
        return qe_mod.score(backend, rec["source"], rec["hypothesis"])

    outcomes = _map_ordered(assess, valid, _concurrency(config))
    scored: dict[tuple, tuple[dict, qe_mod.QEScore]] = {}
    for rec, (result, exc) in zip(valid, outcomes):
        if exc is not None:
            if isinstance(exc, TransportError):
                counts["transport_failures"] += 1
                continue
            raise exc
        key = (rec["candidate_ref"], rec["system_id"], rec["target_lang"],
               rec["kind"], rec["sentence_id"])
        scored[key] = (rec, result)
        counts["qe_scores"] += 1
        records.append({"type": "qe", "kind": rec["kind"],
                        "sentence_id": rec["sentence_id"],
                        "candidate_ref": rec.get("candidate_ref"),
                        "category": rec.get("category"),
                        "system_id": rec["system_id"],
                        "target_lang": rec["target_lang"],
                        "metric_id": result.metric_id,
                        "orientation": result.orientation.value,
                        "value": result.value})

    # pair ori/para per candidate for the delta experiment
    by_pair: dict[tuple, dict[str, tuple[dict, qe_mod.QEScore]]] = {}
    for (cand_ref, system_id, lang, kind, sentence_id), pair in scored.items():
        if cand_ref is None or kind not in ("ori", "para"):
            continue
        by_pair.setdefault((cand_ref, system_id, lang), {})[kind] = pair
    expected_pairs = {(r["candidate_ref"], r["system_id"], r["target_lang"])
                      for r in translations
                      if r.get("candidate_ref") and r.get("kind") in ("ori", "para")}
    for key in sorted(expected_pairs, key=lambda k: (k[0], k[1], k[2])):
        sides = by_pair.get(key, {})
        if "ori" not in sides or "para" not in sides:
            counts["delta_pairs_skipped"] += 1
            continue
        ori_rec, ori_score = sides["ori"]
        para_rec, para_score = sides["para"]
        try:
            mix_score = qe_mod.score(backend, ori_rec["source"],
                                     para_rec["hypothesis"])
        except TransportError:
            counts["transport_failures"] += 1
            counts["delta_pairs_skipped"] += 1
            continue
        delta_mix = stats_mod.delta_improvement(ori_score, mix_score)
        delta_para = stats_mod.delta_improvement(ori_score, para_score)
        counts["deltas"] += 1
        records.append({"type": "delta",
                        "sentence_id": ori_rec["sentence_id"],
                        "candidate_ref": key[0], "category": ori_rec["category"],
                        "system_id": key[1], "target_lang": key[2],
                        "metric_id": ori_score.metric_id,
                        "orientation": ori_score.orientation.value,
                        "qe_ori": ori_score.value, "qe_mix": mix_score.value,
                        "qe_para": para_score.value,
                        "delta_mix": delta_mix, "delta_para": delta_para})
    out = Path(args.stage_out)
    write_jsonl(out, records)
    write_manifest(out, "score", config, {"translations": Path(args.stage_in)},
                   counts, _seed(config, args))
    return 2 if counts["transport_failures"] else 0


def _rebuild_delta(rec: dict) -> qe_mod.DeltaReport:
    orientation = stats_mod.Orientation(rec["orientation"])
    mk = lambda v: qe_mod.QEScore(metric_id=rec["metric_id"],
                                  orientation=orientation, value=v)
    return qe_mod.DeltaReport(
        sentence_id=rec["sentence_id"], system_id=rec["system_id"],
        target_lang=rec["target_lang"], qe_ori=mk(rec["qe_ori"]),
        qe_mix=mk(rec["qe_mix"]), qe_para=mk(rec["qe_para"]),
        delta_mix=rec["delta_mix"], delta_para=rec["delta_para"],
        candidate_ref=rec.get("candidate_ref") or "",
        category=rec.get("category") or "")


def stage_report(config: Config, args) -> int:
    scored = read_jsonl(Path(args.stage_in))
    out_dir = Path(args.stage_out)
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = {"scored": Path(args.stage_in)}

    qe_records = [r for r in scored if r["type"] == "qe"]
    invalid_records = [r for r in scored if r["type"] == "invalid"]
    delta_records = [r for r in scored if r["type"] == "delta"]

    # error rates and ranking exclusions
    tallies: dict[tuple[str, str], list[int]] = {}
    for rec in qe_records + invalid_records:
        pair = (rec["system_id"], rec["target_lang"])
        tallies.setdefault(pair, [0, 0])[1] += 1
    for rec in invalid_records:
        tallies[(rec["system_id"], rec["target_lang"])][0] += 1
    flag_pct = float(config.get("exclusion", "flag_pct",
                                default=report_mod.DEFAULT_FLAG_PCT))
    exclude_pct = float(config.get("exclusion", "rank_exclude_pct",
                                   default=report_mod.DEFAULT_EXCLUDE_PCT))
    error_rows = report_mod.error_rate_rows(
        {pair: tuple(v) for pair, v in tallies.items()}, flag_pct, exclude_pct)
    exclusions = [(r.system_id, r.target_lang) for r in error_rows if r.excluded]

    tables: dict[str, object] = {"error_rates": error_rows}

    ori_records = [r for r in qe_records if r["kind"] == "ori"]
    control_records = [r for r in qe_records if r["kind"] == "control"]
    if ori_records:
        orientation = stats_mod.Orientation(ori_records[0]["orientation"])
        metric_id = ori_records[0]["metric_id"]
        vmwe_scores: dict[tuple, list[float]] = {}
        for rec in ori_records:
            key = (rec["category"], rec["system_id"], rec["target_lang"])
            vmwe_scores.setdefault(key, []).append(rec["value"])
        control_pool: dict[tuple, list[float]] = {}
        for rec in control_records:
            pair = (rec["system_id"], rec["target_lang"])
            control_pool.setdefault(pair, []).append(rec["value"])
        control_scores = {
            (category, system_id, lang): control_pool[(system_id, lang)]
            for (category, system_id, lang) in vmwe_scores
            if (system_id, lang) in control_pool}
        tables["gap_table"] = report_mod.gap_table(
            vmwe_scores, control_scores, orientation, metric_id)

        rankings = []
        for category in sorted({k[0] for k in vmwe_scores},
                               key=report_mod._category_key):
            cell_means = {}
            for (cat, system_id, lang), values in vmwe_scores.items():
                if cat == category:
                    cell_means[(system_id, lang)] = stats_mod.fmean(values)
            rankings.append(report_mod.rank_systems(
                cell_means, orientation, metric_id, category=category,
                exclusions=exclusions))
        tables["ranking"] = rankings

    if delta_records:
        tables["delta_table"] = report_mod.delta_table(
            [_rebuild_delta(r) for r in delta_records])

    da_path = config.get("da", "annotations")
    if da_path:
        da_file = config.path(da_path)
        annotations = [stats_mod.DAAnnotation(
            system_id=r["system_id"], sentence_id=r["sentence_id"],
            annotator_id=r["annotator_id"], raw_score=r["raw_score"])
            for r in read_jsonl(da_file)]
        zscores = stats_mod.znormalize(annotations)
        tables["z_gap_table"] = report_mod.z_gap_table(
            zscores, config.require("da", "vmwe_ids"),
            config.require("da", "control_ids"))
        inputs["da_annotations"] = da_file

    gold_path = config.get("classifier_eval", "gold")
    classifications_in = getattr(args, "classifications_in", None)
    if gold_path and classifications_in:
        gold_file = config.path(gold_path)
        gold = {r["candidate_ref"]: bool(r["label"])
                for r in read_jsonl(gold_file)}
        predictions = []
        undecided = []
        for rec in read_jsonl(Path(classifications_in)):
            category = extract_mod.Category(rec["category"])
            if rec.get("verdict") is None:
                undecided.append((rec["candidate_ref"], category))
                continue
            predictions.append(llm_mod.ClassificationResult(
                candidate_ref=rec["candidate_ref"], category=category,
                verdict=rec["verdict"], raw_choice=rec.get("raw_choice") or "",
                raw_response=rec.get("raw_response") or ""))
        tables["classifier_table"] = report_mod.classifier_report(
            gold, predictions, undecided)
        inputs["gold"] = gold_file
        inputs["classifications"] = Path(classifications_in)

    table_kinds = {"gap_table": "gap", "delta_table": "delta",
                   "ranking": "ranking", "error_rates": "error_rate",
                   "z_gap_table": "gap", "classifier_table": "classifier"}
    counts = {}
    for name, rows in sorted(tables.items()):
        kind = table_kinds[name]
        for fmt in ("csv", "json"):
            text = report_mod.emit(rows, fmt, table=kind)
            (out_dir / f"{name}.{fmt}").write_text(text, encoding="utf-8")
        counts[name] = len(rows) if isinstance(rows, list) else len(rows.entries)
    write_manifest(out_dir, "report", config, inputs, counts, _seed(config, args))
    return 0


def stage_run_all(config: Config, args) -> int:
    out_dir = Path(args.stage_out)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "candidates": out_dir / "candidates.jsonl",
        "controls": out_dir / "controls.jsonl",
        "classifications": out_dir / "classifications.jsonl",
        "paraphrases": out_dir / "paraphrases.jsonl",
        "translations": out_dir / "translations.jsonl",
        "scored": out_dir / "scored.jsonl",
        "report": out_dir / "report",
    }
    worst = 0

    def ns(**kwargs):
        base = {"config": args.config, "seed": getattr(args, "seed", None),
                "backend": None, "category": getattr(args, "category", None),
                "target_lang": getattr(args, "target_lang", None),
                "stage_in": None, "stage_out": None, "controls_in": None,
                "controls_out": None, "classifications_in": None}
        base.update(kwargs)
        return argparse.Namespace(**base)

    worst = max(worst, stage_extract(config, ns(
        stage_out=paths["candidates"], controls_out=paths["controls"])))
    worst = max(worst, stage_classify(config, ns(
        stage_in=paths["candidates"], stage_out=paths["classifications"])))
    worst = max(worst, stage_paraphrase(config, ns(
        stage_in=paths["classifications"], stage_out=paths["paraphrases"])))
    controls_in = paths["controls"] if paths["controls"].is_file() else None
    worst = max(worst, stage_translate(config, ns(
        stage_in=paths["paraphrases"], stage_out=paths["translations"],
        controls_in=controls_in)))
    worst = max(worst, stage_score(config, ns(
        stage_in=paths["translations"], stage_out=paths["scored"])))
    worst = max(worst, stage_report(config, ns(
        stage_in=paths["scored"], stage_out=paths["report"],
        classifications_in=paths["classifications"])))
    return worst


# --- argument parsing ---------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vmweval",
        description="VMWE extraction, paraphrasing and MT quality pipeline")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("extract", "find VMWE candidates and sample a control set"),
        ("classify", "ask the LLM backend to confirm candidates"),
        ("paraphrase", "rewrite confirmed candidates without the VMWE"),
        ("translate", "translate originals, paraphrases and controls"),
        ("score", "run quality estimation and the delta experiment"),
        ("report", "aggregate scores into tables"),
        ("run-all", "run every stage into one output directory"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="pipeline config (YAML)")
        p.add_argument("--stage-in", help="JSON Lines input from the previous stage")
        p.add_argument("--stage-out", required=True,
                       help="output path (directory for report/run-all)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--backend", help="backend name from the config")
        p.add_argument("--category", choices=["vid", "vpc", "lvc", "all"],
                       help="restrict to one VMWE category")
        p.add_argument("--target-lang", choices=list(mt_mod.TARGET_LANGS),
                       help="restrict translation to one target language")
        p.add_argument("--controls-in", help="control sentences (JSON Lines)")
        p.add_argument("--controls-out", help="where extract writes controls")
        p.add_argument("--classifications-in",
                       help="classification records for the classifier table")
    return parser


_STAGE_FN = {
    "extract": stage_extract,
    "classify": stage_classify,
    "paraphrase": stage_paraphrase,
    "translate": stage_translate,
    "score": stage_score,
    "report": stage_report,
    "run-all": stage_run_all,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    needs_in = args.command in ("classify", "paraphrase", "translate", "score",
                                "report")
    try:
        if needs_in and not args.stage_in:
            raise ContractViolation(f"{args.command} requires --stage-in")
        config = load_config(args.config)
        return _STAGE_FN[args.command](config, args)
    except SchemaVersionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ContractViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TransportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
