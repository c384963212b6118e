import json
import logging

import pytest

from vmweval.errors import ContractViolation
from vmweval.extract import Category
from vmweval.llm import ClassificationResult
from vmweval.qe import DeltaReport, Orientation, QEScore
from vmweval.report import (GapCell, Ranking, classifier_report, delta_table,
                            emit, error_rate_rows, gap_table, rank_systems,
                            z_gap_table)
from vmweval.stats import ConfusionMatrix, ZScore, confusion_metrics

LOWER = Orientation.LOWER_BETTER_0_25
HIGHER = Orientation.HIGHER_BETTER_0_1


# --- gap table ----------------------------------------------------------------

def _gap_inputs():
    vmwe = {("VID", "alpha", "de"): [10.0, 12.0],
            ("VPC", "alpha", "de"): [8.0]}
    control = {("VID", "alpha", "de"): [9.0, 9.0],
               ("VPC", "alpha", "de"): [8.5],
               ("LVC", "beta", "cs"): [1.0]}
    return vmwe, control


def test_gap_sign_lower_better(caplog):
    vmwe, control = _gap_inputs()
    with caplog.at_level(logging.WARNING, logger="vmweval.report"):
        cells = gap_table(vmwe, control, LOWER, "qe")
    assert [(c.category, c.gap) for c in cells] == [("VID", 2.0),
                                                    ("VPC", -0.5)]
    assert cells[0].n_vmwe == 2 and cells[0].n_control == 2
    assert "LVC" in caplog.text and "no vmwe scores" in caplog.text


def test_gap_sign_higher_better():
    vmwe, control = _gap_inputs()
    cells = gap_table(vmwe, control, HIGHER, "qe")
    # positive still means the VMWE side is worse
    assert [(c.category, c.gap) for c in cells] == [("VID", -2.0),
                                                    ("VPC", 0.5)]


def test_gap_grows_when_vmwe_side_degrades():
    vmwe, control = _gap_inputs()
    worse = {k: [v + 1.0 for v in vals] for k, vals in vmwe.items()}
    base = {c.category: c.gap for c in gap_table(vmwe, control, LOWER, "qe")}
    bumped = {c.category: c.gap for c in gap_table(worse, control, LOWER, "qe")}
    for category in base:
        assert bumped[category] == pytest.approx(base[category] + 1.0)


def test_gap_orders_categories_canonically():
    scores = {("VPC", "a", "de"): [1.0], ("VID", "b", "cs"): [1.0],
              ("VID", "a", "de"): [1.0], ("zz", "a", "de"): [1.0]}
    cells = gap_table(scores, scores, LOWER, "qe")
    assert [(c.category, c.system_id, c.target_lang) for c in cells] == [
        ("VID", "a", "de"), ("VID", "b", "cs"), ("VPC", "a", "de"),
        ("zz", "a", "de")]


def test_gap_skips_empty_side(caplog):
    with caplog.at_level(logging.WARNING, logger="vmweval.report"):
        cells = gap_table({("VID", "a", "de"): []},
                          {("VID", "a", "de"): [1.0]}, LOWER, "qe")
    assert cells == []
    assert "empty side" in caplog.text


def test_gap_cell_contract():
    with pytest.raises(ContractViolation):
        GapCell(category="VID", system_id="a", target_lang="de",
                metric_id="qe", gap=0.0, n_vmwe=0, n_control=3)


# --- z gap table --------------------------------------------------------------

def _z(system, sentence, value):
    return ZScore(system_id=system, sentence_id=sentence, annotator_id="a1",
                  raw_score=0.0, z=value)


def test_z_gap_table():
    zs = [_z("alpha", "v1", 0.5), _z("alpha", "v2", -0.5),
          _z("alpha", "c1", 1.0), _z("alpha", "c2", 0.0),
          _z("beta", "v1", 1.0), _z("beta", "c1", 1.0),
          _z("alpha", "x9", 9.0)]  # in neither set, ignored
    cells = z_gap_table(zs, ["v1", "v2"], ["c1", "c2"])
    assert [(c.system_id, c.gap) for c in cells] == [("alpha", 0.5),
                                                     ("beta", 0.0)]
    assert cells[0].category == "all"
    assert cells[0].metric_id == "da_z"
    assert cells[0].n_vmwe == 2 and cells[0].n_control == 2


def test_z_gap_skips_one_sided_system(caplog):
    zs = [_z("alpha", "v1", 0.5), _z("alpha", "c1", 1.0),
          _z("gamma", "v1", 0.2)]
    with caplog.at_level(logging.WARNING, logger="vmweval.report"):
        cells = z_gap_table(zs, ["v1"], ["c1"])
    assert [c.system_id for c in cells] == ["alpha"]
    assert "gamma" in caplog.text


def test_z_gap_rejects_overlapping_ids():
    with pytest.raises(ContractViolation):
        z_gap_table([], ["v1", "shared"], ["shared", "c1"])


# --- rankings -------------------------------------------------------------------

def test_rank_lower_better():
    cells = {("alpha", "de"): 10.0, ("alpha", "cs"): 20.0,
             ("beta", "de"): 12.0, ("beta", "cs"): 12.0}
    ranking = rank_systems(cells, LOWER, "qe")
    assert [(e.rank, e.system_id, e.mean_score) for e in ranking.entries] == [
        (1, "beta", 12.0), (2, "alpha", 15.0)]
    assert ranking.entries[0].included_pairs == ("cs", "de")
    assert ranking.category == "all"


def test_rank_higher_better_flips():
    cells = {("alpha", "de"): 0.8, ("beta", "de"): 0.6}
    ranking = rank_systems(cells, HIGHER, "qe")
    assert [e.system_id for e in ranking.entries] == ["alpha", "beta"]


def test_rank_breaks_ties_by_system_id():
    cells = {("zeta", "de"): 5.0, ("acme", "de"): 5.0}
    ranking = rank_systems(cells, LOWER, "qe")
    assert [e.system_id for e in ranking.entries] == ["acme", "zeta"]
    assert [e.rank for e in ranking.entries] == [1, 2]


def test_rank_applies_exclusions():
    cells = {("alpha", "de"): 10.0, ("alpha", "cs"): 20.0,
             ("beta", "de"): 12.0}
    ranking = rank_systems(cells, LOWER, "qe",
                           exclusions=[("alpha", "cs")])
    assert ranking.entries[0].system_id == "alpha"
    assert ranking.entries[0].mean_score == 10.0
    assert ranking.entries[0].included_pairs == ("de",)


def test_rank_drops_fully_excluded_system(caplog):
    cells = {("alpha", "de"): 10.0, ("beta", "de"): 12.0}
    with caplog.at_level(logging.WARNING, logger="vmweval.report"):
        ranking = rank_systems(cells, LOWER, "qe",
                               exclusions=[("alpha", "de")])
    assert [e.system_id for e in ranking.entries] == ["beta"]
    assert ranking.entries[0].rank == 1
    assert "alpha" in caplog.text


def test_rank_order_is_shift_invariant():
    import random
    rng = random.Random(7)
    cells = {(f"s{i}", lang): rng.uniform(0.0, 10.0)
             for i in range(6) for lang in ("de", "cs")}
    base = [e.system_id for e in rank_systems(cells, LOWER, "qe").entries]
    shifted = {k: v + 7.0 for k, v in cells.items()}
    assert [e.system_id
            for e in rank_systems(shifted, LOWER, "qe").entries] == base


# --- classifier report ----------------------------------------------------------

def _pred(ref, category, verdict):
    return ClassificationResult(candidate_ref=ref, category=category,
                                verdict=verdict, raw_choice="X",
                                raw_response="Final Answer: X")


def test_classifier_report_joins_and_counts():
    gold = {"r1": True, "r2": True, "r3": False, "r4": False,
            "r5": True, "r6": True}
    preds = [_pred("r1", Category.VID, True), _pred("r2", Category.VID, False),
             _pred("r3", Category.VID, True), _pred("r4", Category.VID, False),
             _pred("r5", Category.VPC, True)]
    cells = classifier_report(gold, preds, undecided=[("r6", Category.VID)])
    assert [c.category for c in cells] == ["VID", "VPC"]
    vid = cells[0]
    assert (vid.matrix.tp, vid.matrix.fn, vid.matrix.fp, vid.matrix.tn) == \
        (1, 1, 1, 1)
    assert vid.n_undecided == 1
    assert vid.metrics == confusion_metrics(ConfusionMatrix(tp=1, fn=1,
                                                            fp=1, tn=1))
    assert cells[1].matrix.tp == 1 and cells[1].n_undecided == 0


def test_classifier_report_requires_gold():
    with pytest.raises(ContractViolation):
        classifier_report({}, [_pred("r9", Category.VID, True)])
    with pytest.raises(ContractViolation):
        classifier_report({"r1": True}, [], undecided=[("r9", Category.VID)])


def test_classifier_report_skips_undecided_only_category(caplog):
    with caplog.at_level(logging.WARNING, logger="vmweval.report"):
        cells = classifier_report({"u1": True}, [],
                                  undecided=[("u1", Category.LVC)])
    assert cells == []
    assert "only undecided" in caplog.text


# --- delta table ----------------------------------------------------------------

def _delta(sentence, system, lang, ori, mix, para, category=""):
    qe_ori = QEScore("m", LOWER, ori)
    qe_mix = QEScore("m", LOWER, mix)
    qe_para = QEScore("m", LOWER, para)
    return DeltaReport(sentence_id=sentence, system_id=system,
                       target_lang=lang, qe_ori=qe_ori, qe_mix=qe_mix,
                       qe_para=qe_para, delta_mix=ori - mix,
                       delta_para=ori - para, category=category)


def test_delta_table_groups_and_averages():
    reports = [_delta("s1", "alpha", "de", 10.0, 8.0, 7.0, category="VID"),
               _delta("s2", "alpha", "de", 12.0, 10.0, 11.0, category="VID"),
               _delta("s3", "beta", "de", 5.0, 5.0, 5.0, category="VID"),
               _delta("s4", "alpha", "cs", 1.0, 1.0, 1.0)]
    rows = delta_table(reports)
    assert [(r.category, r.system_id, r.target_lang, r.n) for r in rows] == [
        ("VID", "alpha", "de", 2), ("VID", "beta", "de", 1),
        ("all", "alpha", "cs", 1)]
    vid_alpha = rows[0]
    assert vid_alpha.mean_ori == 11.0
    assert vid_alpha.mean_delta_mix == 2.0
    assert vid_alpha.mean_delta_para == 2.0
    assert vid_alpha.metric_id == "m"


# --- error rates -----------------------------------------------------------------

def test_error_rate_rows_thresholds():
    counts = {("b", "cs"): (10, 100), ("a", "de"): (1, 10),
              ("a", "cs"): (0, 4), ("b", "de"): (51, 100),
              ("c", "de"): (50, 100)}
    rows = error_rate_rows(counts)
    assert [(r.system_id, r.target_lang) for r in rows] == [
        ("a", "cs"), ("a", "de"), ("b", "cs"), ("b", "de"), ("c", "de")]
    by_key = {(r.system_id, r.target_lang): r for r in rows}
    # thresholds are strict: exactly 10% is not flagged, exactly 50% not excluded
    assert not by_key[("a", "de")].flagged
    assert not by_key[("b", "cs")].flagged
    assert by_key[("b", "de")].flagged and by_key[("b", "de")].excluded
    assert by_key[("c", "de")].flagged and not by_key[("c", "de")].excluded
    assert by_key[("a", "cs")].rate == 0.0
    assert by_key[("b", "de")].rate == 51.0


def test_error_rate_rows_published_value():
    rows = error_rate_rows({("sys", "zh"): (9989, 10000)})
    assert rows[0].rate == pytest.approx(99.89, abs=1e-12)
    assert rows[0].excluded


def test_error_rate_rows_contracts():
    with pytest.raises(ContractViolation):
        error_rate_rows({("a", "de"): (0, 0)})
    with pytest.raises(ContractViolation):
        error_rate_rows({("a", "de"): (5, 4)})


# --- rendering -------------------------------------------------------------------

def test_emit_gap_csv_format():
    vmwe, control = _gap_inputs()
    text = emit(gap_table(vmwe, control, LOWER, "qe"), "csv")
    lines = text.splitlines()
    assert lines[0] == ("category,system_id,target_lang,metric_id,gap,"
                        "n_vmwe,n_control")
    assert lines[1] == "VID,alpha,de,qe,+2.00,2,2"
    assert lines[2] == "VPC,alpha,de,qe,-0.50,1,1"


def test_emit_never_renders_negative_zero():
    cell = GapCell(category="VID", system_id="a", target_lang="de",
                   metric_id="qe", gap=-0.004, n_vmwe=1, n_control=1)
    text = emit([cell], "csv")
    assert "+0.00" in text
    assert "-0.00" not in text


def test_emit_delta_csv_signs():
    rows = delta_table([_delta("s1", "alpha", "de", 10.0, 8.0, 12.0)])
    text = emit(rows, "csv")
    assert text.splitlines()[1] == "all,alpha,de,m,1,10.00,+2.00,-2.00"


def test_emit_ranking_accepts_bare_object():
    ranking = rank_systems({("alpha", "de"): 10.0, ("alpha", "cs"): 11.0},
                           LOWER, "qe", category="VID")
    text = emit(ranking, "csv")
    lines = text.splitlines()
    assert lines[0] == ("metric_id,category,rank,system_id,mean_score,"
                        "included_pairs")
    assert lines[1] == "qe,VID,1,alpha,10.50,cs;de"


def test_emit_error_rate_csv_booleans():
    text = emit(error_rate_rows({("b", "de"): (51, 100)}), "csv")
    assert text.splitlines()[1] == "b,de,100,51,51.00,true,true"


def test_emit_classifier_csv_row():
    gold = {f"p{i}": i < 4 for i in range(5)}
    preds = [_pred(f"p{i}", Category.VPC, True) for i in range(5)]
    text = emit(classifier_report(gold, preds), "csv")
    lines = text.splitlines()
    assert lines[0] == ("category,n,undecided,accuracy,macro_f1,pos_precision,"
                        "pos_recall,pos_f1,neg_precision,neg_recall,neg_f1")
    assert lines[1] == "VPC,5,0,80.0,44.4,80.0,100.0,88.9,0.0,0.0,0.0"


def test_emit_json_envelope():
    vmwe, control = _gap_inputs()
    text = emit(gap_table(vmwe, control, LOWER, "qe"), "json")
    body = json.loads(text)
    assert body["schema_version"] == 1
    assert body["table"] == "gap"
    assert body["rows"][0] == {"category": "VID", "system_id": "alpha",
                               "target_lang": "de", "metric_id": "qe",
                               "gap": 2.0, "n_vmwe": 2, "n_control": 2}
    assert text.endswith("\n")


def test_emit_empty_list_needs_table_hint():
    with pytest.raises(ContractViolation):
        emit([], "csv")
    header_only = emit([], "csv", table="gap")
    assert header_only.splitlines() == [
        "category,system_id,target_lang,metric_id,gap,n_vmwe,n_control"]
    assert json.loads(emit([], "json", table="delta"))["rows"] == []


def test_emit_rejects_unknown_kinds():
    with pytest.raises(ContractViolation):
        emit([], "xml", table="gap")
    with pytest.raises(ContractViolation):
        emit([], "csv", table="bogus")
    vmwe, control = _gap_inputs()
    single_cell = gap_table(vmwe, control, LOWER, "qe")[0]
    with pytest.raises(ContractViolation):
        emit(single_cell, "csv")  # bare non-ranking object, kind unknown
