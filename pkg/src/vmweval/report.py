"""Aggregation tables and their CSV/JSON rendering.

All rendering is deterministic: fixed column orders, fixed row sorts,
half-up decimal rounding (1 decimal for percents, 2 for QE values), so
emitted reports can be compared byte for byte.
"""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass
from statistics import fmean
from typing import Iterable, Mapping, Sequence

from .errors import ContractViolation
from .extract import Category
from .llm import ClassificationResult
from .qe import DeltaReport
from .stats import (ConfusionMatrix, ConfusionReport, Orientation, ZScore,
                    confusion_metrics, round_half_up)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

# Thresholds on per-cell error rates: flag noisy cells, drop unusable ones
# from rankings.
DEFAULT_FLAG_PCT = 10.0
DEFAULT_EXCLUDE_PCT = 50.0

CellKey = tuple[str, str, str]  # (category, system_id, target_lang)


@dataclass(frozen=True)
class GapCell:
    category: str
    system_id: str
    target_lang: str
    metric_id: str
    gap: float
    n_vmwe: int
    n_control: int

    def __post_init__(self):
        if self.n_vmwe < 1 or self.n_control < 1:
            raise ContractViolation("gap cell needs scores on both sides")


@dataclass(frozen=True)
class RankedSystem:
    rank: int
    system_id: str
    mean_score: float
    included_pairs: tuple[str, ...]


@dataclass(frozen=True)
class Ranking:
    metric_id: str
    category: str
    orientation: Orientation
    entries: tuple[RankedSystem, ...]


def _category_key(name: str):
    order = [c.value for c in Category]
    return (order.index(name), name) if name in order else (len(order), name)


def gap_table(vmwe_scores: Mapping[CellKey, Sequence[float]],
              control_scores: Mapping[CellKey, Sequence[float]],
              orientation: Orientation, metric_id: str) -> list[GapCell]:
    """Mean score gap per cell, oriented so positive = VMWE side worse."""
    cells = []
    for key in sorted(set(vmwe_scores) | set(control_scores),
                      key=lambda k: (_category_key(k[0]), k[1], k[2])):
        if key not in vmwe_scores or key not in control_scores:
            side = "control" if key not in control_scores else "vmwe"
            log.warning("gap cell %s has no %s scores, skipping", key, side)
            continue
        vmwe, control = vmwe_scores[key], control_scores[key]
        if not vmwe or not control:
            log.warning("gap cell %s has an empty side, skipping", key)
            continue
        gap = fmean(vmwe) - fmean(control)
        if not orientation.lower_is_better:
            gap = -gap
        cells.append(GapCell(category=key[0], system_id=key[1], target_lang=key[2],
                             metric_id=metric_id, gap=gap,
                             n_vmwe=len(vmwe), n_control=len(control)))
    return cells


def z_gap_table(zscores: Sequence[ZScore], vmwe_ids: Iterable[str],
                control_ids: Iterable[str], category: str = "all",
                target_lang: str = "all",
                metric_id: str = "da_z") -> list[GapCell]:
    """Human-score gap per system over standardized judgments.

    Sentence ids decide side membership; judgments outside both sets are
    ignored.  Standardized scores are higher-better, so the gap is
    control minus VMWE.
    """
    vmwe_ids, control_ids = set(vmwe_ids), set(control_ids)
    overlap = vmwe_ids & control_ids
    if overlap:
        raise ContractViolation(f"ids on both sides: {sorted(overlap)[:5]}")
    vmwe: dict[str, list[float]] = {}
    control: dict[str, list[float]] = {}
    for z in zscores:
        if z.sentence_id in vmwe_ids:
            vmwe.setdefault(z.system_id, []).append(z.z)
        elif z.sentence_id in control_ids:
            control.setdefault(z.system_id, []).append(z.z)
    cells = []
    for system_id in sorted(set(vmwe) | set(control)):
        if system_id not in vmwe or system_id not in control:
            log.warning("system %s lacks judgments on one side, skipping",
                        system_id)
            continue
        cells.append(GapCell(
            category=category, system_id=system_id, target_lang=target_lang,
            metric_id=metric_id,
            gap=fmean(control[system_id]) - fmean(vmwe[system_id]),
            n_vmwe=len(vmwe[system_id]), n_control=len(control[system_id])))
    return cells


def rank_systems(cell_means: Mapping[tuple[str, str], float],
                 orientation: Orientation, metric_id: str,
                 category: str = "all",
                 exclusions: Iterable[tuple[str, str]] = ()) -> Ranking:
    """Order systems by their mean score over non-excluded language pairs."""
    excluded = set(exclusions)
    by_system: dict[str, dict[str, float]] = {}
    for (system_id, lang), value in cell_means.items():
        if (system_id, lang) in excluded:
            continue
        by_system.setdefault(system_id, {})[lang] = value
    dropped = {s for s, _ in cell_means} - set(by_system)
    for system_id in sorted(dropped):
        log.warning("system %s has no included pairs, dropped from ranking",
                    system_id)
    scored = [(fmean(langs.values()), system_id, tuple(sorted(langs)))
              for system_id, langs in by_system.items()]
    scored.sort(key=lambda item: (item[0] if orientation.lower_is_better
                                  else -item[0], item[1]))
    entries = tuple(
        RankedSystem(rank=i, system_id=system_id, mean_score=mean,
                     included_pairs=langs)
        for i, (mean, system_id, langs) in enumerate(scored, start=1))
    return Ranking(metric_id=metric_id, category=category,
                   orientation=orientation, entries=entries)


@dataclass(frozen=True)
class ClassifierCell:
    category: str
    matrix: ConfusionMatrix
    metrics: ConfusionReport
    n_undecided: int


def classifier_report(gold: Mapping[str, bool],
                      predictions: Iterable[ClassificationResult],
                      undecided: Iterable[tuple[str, Category]] = (),
                      ) -> list[ClassifierCell]:
    """Join predictions to gold labels and score them per category."""
    counts: dict[str, dict[str, int]] = {}
    for pred in predictions:
        if pred.candidate_ref not in gold:
            raise ContractViolation(
                f"prediction {pred.candidate_ref} has no gold label")
        cell = counts.setdefault(pred.category.value,
                                 {"tp": 0, "fn": 0, "fp": 0, "tn": 0})
        actual = gold[pred.candidate_ref]
        if pred.verdict and actual:
            cell["tp"] += 1
        elif pred.verdict and not actual:
            cell["fp"] += 1
        elif not pred.verdict and actual:
            cell["fn"] += 1
        else:
            cell["tn"] += 1
    n_undecided: dict[str, int] = {}
    for ref, category in undecided:
        if ref not in gold:
            raise ContractViolation(f"undecided candidate {ref} has no gold label")
        n_undecided[category.value] = n_undecided.get(category.value, 0) + 1
    cells = []
    for name in sorted(set(counts) | set(n_undecided), key=_category_key):
        if name not in counts:
            log.warning("category %s has only undecided predictions, skipping",
                        name)
            continue
        matrix = ConfusionMatrix(**counts[name])
        cells.append(ClassifierCell(category=name, matrix=matrix,
                                    metrics=confusion_metrics(matrix),
                                    n_undecided=n_undecided.get(name, 0)))
    return cells


@dataclass(frozen=True)
class DeltaRow:
    category: str
    system_id: str
    target_lang: str
    metric_id: str
    n: int
    mean_ori: float
    mean_delta_mix: float
    mean_delta_para: float


def delta_table(reports: Sequence[DeltaReport]) -> list[DeltaRow]:
    """Aggregate per-sentence deltas into table rows."""
    groups: dict[tuple, list[DeltaReport]] = {}
    for rep in reports:
        key = (rep.category or "all", rep.system_id, rep.target_lang,
               rep.qe_ori.metric_id)
        groups.setdefault(key, []).append(rep)
    rows = []
    for key in sorted(groups, key=lambda k: (_category_key(k[0]), k[1:])):
        batch = groups[key]
        rows.append(DeltaRow(
            category=key[0], system_id=key[1], target_lang=key[2],
            metric_id=key[3], n=len(batch),
            mean_ori=fmean(r.qe_ori.value for r in batch),
            mean_delta_mix=fmean(r.delta_mix for r in batch),
            mean_delta_para=fmean(r.delta_para for r in batch)))
    return rows


@dataclass(frozen=True)
class ErrorRateRow:
    system_id: str
    target_lang: str
    n_total: int
    n_invalid: int
    rate: float
    flagged: bool
    excluded: bool


def error_rate_rows(counts: Mapping[tuple[str, str], tuple[int, int]],
                    flag_pct: float = DEFAULT_FLAG_PCT,
                    exclude_pct: float = DEFAULT_EXCLUDE_PCT) -> list[ErrorRateRow]:
    """Turn (invalid, total) counts per (system, lang) into judged rows."""
    rows = []
    for (system_id, lang) in sorted(counts):
        invalid, total = counts[(system_id, lang)]
        if total < 1 or invalid > total:
            raise ContractViolation(
                f"bad counts for ({system_id}, {lang}): {invalid}/{total}")
        rate = 100.0 * invalid / total
        rows.append(ErrorRateRow(system_id=system_id, target_lang=lang,
                                 n_total=total, n_invalid=invalid, rate=rate,
                                 flagged=rate > flag_pct,
                                 excluded=rate > exclude_pct))
    return rows


# --- rendering ---------------------------------------------------------------

def _fmt(value: float, ndigits: int, signed: bool = False) -> str:
    rounded = round_half_up(value, ndigits)
    if rounded == 0.0:
        rounded = 0.0  # avoid "-0.00"
    text = f"{rounded:.{ndigits}f}"
    if signed and not text.startswith("-"):
        text = "+" + text
    return text


def _pct(fraction: float) -> str:
    return _fmt(fraction * 100.0, 1)


def _csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def _json_table(table: str, rows: list[dict]) -> str:
    return json.dumps({"schema_version": SCHEMA_VERSION, "table": table,
                       "rows": rows}, ensure_ascii=False, indent=2) + "\n"


def emit(report, fmt: str, table: str | None = None) -> str:
    """Render a report object (or list of them) as csv or json text.

    `table` names the table kind explicitly; it is only required when the
    row list is empty and the kind cannot be inferred.
    """
    if fmt not in ("csv", "json"):
        raise ContractViolation(f"unknown report format {fmt!r}")
    emitters = {
        "gap": _emit_gap,
        "delta": _emit_delta,
        "ranking": _emit_rankings,
        "error_rate": _emit_error_rates,
        "classifier": _emit_classifier,
    }
    kinds = {GapCell: "gap", DeltaRow: "delta", Ranking: "ranking",
             ErrorRateRow: "error_rate", ClassifierCell: "classifier"}
    if isinstance(report, Ranking):
        report = [report]
    if table is None:
        if not isinstance(report, list) or not report:
            raise ContractViolation("cannot infer table kind, pass table=")
        table = kinds.get(type(report[0]))
    if table not in emitters:
        raise ContractViolation(f"cannot emit table {table!r}")
    return emitters[table](report, fmt)


def _emit_gap(cells: list[GapCell], fmt: str) -> str:
    if fmt == "csv":
        return _csv(
            ["category", "system_id", "target_lang", "metric_id", "gap",
             "n_vmwe", "n_control"],
            [[c.category, c.system_id, c.target_lang, c.metric_id,
              _fmt(c.gap, 2, signed=True), c.n_vmwe, c.n_control]
             for c in cells])
    return _json_table("gap", [{
        "category": c.category, "system_id": c.system_id,
        "target_lang": c.target_lang, "metric_id": c.metric_id,
        "gap": round_half_up(c.gap, 2), "n_vmwe": c.n_vmwe,
        "n_control": c.n_control} for c in cells])


def _emit_delta(rows: list[DeltaRow], fmt: str) -> str:
    if fmt == "csv":
        return _csv(
            ["category", "system_id", "target_lang", "metric_id", "n", "ori",
             "delta_mix", "delta_para"],
            [[r.category, r.system_id, r.target_lang, r.metric_id, r.n,
              _fmt(r.mean_ori, 2), _fmt(r.mean_delta_mix, 2, signed=True),
              _fmt(r.mean_delta_para, 2, signed=True)] for r in rows])
    return _json_table("delta", [{
        "category": r.category, "system_id": r.system_id,
        "target_lang": r.target_lang, "metric_id": r.metric_id, "n": r.n,
        "ori": round_half_up(r.mean_ori, 2),
        "delta_mix": round_half_up(r.mean_delta_mix, 2),
        "delta_para": round_half_up(r.mean_delta_para, 2)} for r in rows])


def _emit_rankings(rankings: list[Ranking], fmt: str) -> str:
    if fmt == "csv":
        rows = []
        for ranking in rankings:
            for e in ranking.entries:
                rows.append([ranking.metric_id, ranking.category, e.rank,
                             e.system_id, _fmt(e.mean_score, 2),
                             ";".join(e.included_pairs)])
        return _csv(["metric_id", "category", "rank", "system_id",
                     "mean_score", "included_pairs"], rows)
    return _json_table("ranking", [{
        "metric_id": ranking.metric_id, "category": ranking.category,
        "rank": e.rank, "system_id": e.system_id,
        "mean_score": round_half_up(e.mean_score, 2),
        "included_pairs": list(e.included_pairs)}
        for ranking in rankings for e in ranking.entries])


def _emit_error_rates(rows: list[ErrorRateRow], fmt: str) -> str:
    if fmt == "csv":
        return _csv(
            ["system_id", "target_lang", "n_total", "n_invalid", "error_rate",
             "flagged", "excluded"],
            [[r.system_id, r.target_lang, r.n_total, r.n_invalid,
              _fmt(r.rate, 2), str(r.flagged).lower(), str(r.excluded).lower()]
             for r in rows])
    return _json_table("error_rate", [{
        "system_id": r.system_id, "target_lang": r.target_lang,
        "n_total": r.n_total, "n_invalid": r.n_invalid,
        "error_rate": round_half_up(r.rate, 2), "flagged": r.flagged,
        "excluded": r.excluded} for r in rows])


def _emit_classifier(cells: list[ClassifierCell], fmt: str) -> str:
    if fmt == "csv":
        rows = []
        for c in cells:
            m = c.metrics
            rows.append([c.category, c.matrix.total, c.n_undecided,
                         _pct(m.accuracy), _pct(m.macro_f1),
                         _pct(m.positive.precision), _pct(m.positive.recall),
                         _pct(m.positive.f1), _pct(m.negative.precision),
                         _pct(m.negative.recall), _pct(m.negative.f1)])
        return _csv(["category", "n", "undecided", "accuracy", "macro_f1",
                     "pos_precision", "pos_recall", "pos_f1", "neg_precision",
                     "neg_recall", "neg_f1"], rows)
    out = []
    for c in cells:
        m = c.metrics
        out.append({
            "category": c.category, "n": c.matrix.total,
            "undecided": c.n_undecided,
            "matrix": {"tp": c.matrix.tp, "fn": c.matrix.fn,
                       "fp": c.matrix.fp, "tn": c.matrix.tn},
            "accuracy": round_half_up(m.accuracy * 100.0, 1),
            "macro_f1": round_half_up(m.macro_f1 * 100.0, 1),
            "positive": {"precision": round_half_up(m.positive.precision * 100.0, 1),
                         "recall": round_half_up(m.positive.recall * 100.0, 1),
                         "f1": round_half_up(m.positive.f1 * 100.0, 1)},
            "negative": {"precision": round_half_up(m.negative.precision * 100.0, 1),
                         "recall": round_half_up(m.negative.recall * 100.0, 1),
                         "f1": round_half_up(m.negative.f1 * 100.0, 1)},
        })
    return _json_table("classifier", out)
