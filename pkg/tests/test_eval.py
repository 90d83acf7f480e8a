"""Accuracy metrics, report identities and report IO."""

import numpy as np
import pytest

from depgraph_rec.corpus import (CorpusRow, NextSetIndex, SequenceRecord,
                                 build_vocabulary)
from depgraph_rec.errors import ValidationError, VocabMismatch
from depgraph_rec.evaluate import (EvalReport, check_report_identities,
                                   compare_runs, evaluate, evaluate_multi,
                                   read_reports_jsonl, write_reports_jsonl)
from depgraph_rec.hylstm import HyLstmModel, PathSetExample


def constant_model(winner: int = 4, vocab_size: int = 8) -> HyLstmModel:
    """A model whose target head always ranks `winner` first (then ties by
    ascending id), independent of the input."""
    model = HyLstmModel.init(vocab_size, 2, 3, 1, seed=0)
    model.head_target.w[:] = 0.0
    model.head_target.b[:] = 0.0
    model.head_target.b[winner] = 10.0
    return model


def hand_dataset():
    index = NextSetIndex()
    index.add((2, 3), 4)
    index.add((2, 3), 5)
    index.add((2, 5), 5)
    index.add((2, 2), 4)
    records = [
        SequenceRecord((2, 3), 4),  # known;   pred 4: top-1 hit, in-set hit
        SequenceRecord((2, 5), 5),  # known;   pred 4: miss, not in {5}
        SequenceRecord((3, 3), 4),  # unknown; exact-match fallback hits
        SequenceRecord((3, 5), 6),  # unknown; miss
        SequenceRecord((2, 2), 5),  # known;   in-set hit via {4}, top-1 miss
    ]
    return records, index


def test_evaluate_hand_computed_metrics():
    records, index = hand_dataset()
    rep = evaluate(constant_model(), records, index, name="hand")
    assert rep.n_cases == 5
    assert rep.top1 == pytest.approx(2 / 5)
    assert rep.in_set_all == pytest.approx(3 / 5)
    assert rep.n_known == 3 and rep.n_unknown == 2
    assert rep.in_set_known == pytest.approx(2 / 3)
    assert rep.in_set_unknown == pytest.approx(1 / 2)
    # ranking after the winner is id-ascending among zero logits
    assert rep.topk[3] == pytest.approx(2 / 5)   # ranked [4, 2, 3]
    assert rep.topk[5] == pytest.approx(5 / 5)   # ranked [4, 2, 3, 5, 6]
    check_report_identities(rep)


def test_in_set_can_exceed_top1():
    records, index = hand_dataset()
    rep = evaluate(constant_model(), records, index)
    assert rep.in_set_all > rep.top1


def test_known_unknown_via_explicit_keys():
    records, index = hand_dataset()
    rep = evaluate(constant_model(), records, index, known_keys=set())
    assert rep.n_known == 0 and rep.n_unknown == 5
    check_report_identities(rep)


def test_evaluate_requires_cases():
    _, index = hand_dataset()
    with pytest.raises(ValidationError):
        evaluate(constant_model(), [], index)


def test_vocab_mismatch_detected():
    records, index = hand_dataset()
    vocab = build_vocabulary([CorpusRow("dep_path", "g", ("A()",) * 3, "A()")],
                             0, 0)
    model = constant_model()
    model.vocab_hash = "0" * 16
    with pytest.raises(VocabMismatch):
        evaluate(model, records, index, vocab)
    model.vocab_hash = vocab.content_hash()
    check_report_identities(evaluate(model, records, index, vocab))


def test_evaluate_multi_keys_on_first_path():
    index = NextSetIndex()
    index.add((2, 3), 4)
    examples = [
        PathSetExample(((2, 3), (3, 5)), 4),  # known via first path; hit
        PathSetExample(((3, 3), (2, 5)), 5),  # unknown; pred 4: miss
    ]
    rep = evaluate_multi(constant_model(), examples, index)
    assert rep.n_known == 1 and rep.n_unknown == 1
    assert rep.top1 == pytest.approx(1 / 2)
    check_report_identities(rep)
    # restricting to the first path cannot change a constant model's output
    filtered = evaluate_multi(constant_model(), examples, index,
                              path_filter=lambda ps: ps[:1])
    assert filtered.top1 == rep.top1


def test_identity_checker_rejects_inconsistent_reports():
    bad = EvalReport(name="x", n_cases=4, top1=0.5, in_set_all=0.9,
                     in_set_known=0.1, in_set_unknown=0.1,
                     n_known=2, n_unknown=2)
    with pytest.raises(ValidationError):
        check_report_identities(bad)
    below_top1 = EvalReport(name="x", n_cases=4, top1=0.9, in_set_all=0.5,
                            in_set_known=0.5, in_set_unknown=0.5,
                            n_known=2, n_unknown=2)
    with pytest.raises(ValidationError):
        check_report_identities(below_top1)


def test_report_json_round_trip(tmp_path):
    records, index = hand_dataset()
    rep = evaluate(constant_model(), records, index, name="round-trip")
    again = EvalReport.from_json(rep.to_json())
    for attr in ("name", "n_cases", "top1", "topk", "in_set_all",
                 "in_set_known", "in_set_unknown", "n_known", "n_unknown"):
        assert getattr(again, attr) == getattr(rep, attr)
    path = tmp_path / "reports.jsonl"
    write_reports_jsonl([rep, again], path)
    loaded = read_reports_jsonl(path)
    assert len(loaded) == 2 and loaded[0].top1 == rep.top1


def test_compare_runs_table():
    records, index = hand_dataset()
    rep = evaluate(constant_model(), records, index, name="baseline")
    other = evaluate(constant_model(winner=5), records, index, name="other")
    table = compare_runs([rep, other])
    assert "baseline" in table and "other" in table
    assert f"{rep.in_set_all:.4f}" in table
    assert "+0.0000" in table  # first row's delta against itself
    with pytest.raises(ValidationError):
        compare_runs([])
