"""Accuracy metrics and run comparison.

Top-1 counts exact label matches. In-set accuracy counts a prediction as a
hit when it belongs to the set of next tokens observed for that exact input
sequence in training; inputs never seen in training fall back to exact match.
Test cases are "known" when their input sequence occurred in training,
otherwise "unknown".
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .corpus import NextSetIndex, SequenceRecord, Vocabulary
from .errors import ValidationError, VocabMismatch
from .hylstm import HyLstmModel, PathSetExample, recommend

REPORT_SCHEMA_VERSION = 1


@dataclass
class CaseRecord:
    key: tuple[int, ...]
    label: int
    prediction: int
    in_set: bool
    known: bool


@dataclass
class EvalReport:
    name: str = ""
    n_cases: int = 0
    top1: float = 0.0
    topk: dict[int, float] = field(default_factory=dict)
    in_set_all: float = 0.0      # Acc(A)
    in_set_known: float = 0.0    # Acc(K)
    in_set_unknown: float = 0.0  # Acc(U)
    n_known: int = 0
    n_unknown: int = 0
    cases: list[CaseRecord] = field(default_factory=list)

    def to_json(self) -> str:
        d = {"schema_version": REPORT_SCHEMA_VERSION, "name": self.name,
             "n_cases": self.n_cases, "top1": self.top1,
             "topk": {str(k): v for k, v in self.topk.items()},
             "in_set_all": self.in_set_all, "in_set_known": self.in_set_known,
             "in_set_unknown": self.in_set_unknown,
             "n_known": self.n_known, "n_unknown": self.n_unknown}
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        d = json.loads(text)
        return cls(name=d["name"], n_cases=d["n_cases"], top1=d["top1"],
                   topk={int(k): v for k, v in d["topk"].items()},
                   in_set_all=d["in_set_all"], in_set_known=d["in_set_known"],
                   in_set_unknown=d["in_set_unknown"], n_known=d["n_known"],
                   n_unknown=d["n_unknown"])


def _finalize(name: str, cases: list[CaseRecord], topk_hits: dict[int, int],
              n: int) -> EvalReport:
    if n == 0:
        raise ValidationError("no test cases")
    known = [c for c in cases if c.known]
    unknown = [c for c in cases if not c.known]
    acc = lambda cs: sum(c.in_set for c in cs) / len(cs) if cs else 0.0
    return EvalReport(
        name=name, n_cases=n,
        top1=sum(c.prediction == c.label for c in cases) / n,
        topk={k: v / n for k, v in topk_hits.items()},
        in_set_all=acc(cases), in_set_known=acc(known),
        in_set_unknown=acc(unknown),
        n_known=len(known), n_unknown=len(unknown), cases=cases)


def evaluate(model: HyLstmModel, test_records: list[SequenceRecord],
             index: NextSetIndex, vocab: Vocabulary | None = None,
             known_keys=None, topk: tuple[int, ...] = (1, 3, 5),
             name: str = "") -> EvalReport:
    """Evaluate a single-path model on encoded records."""
    if vocab is not None and model.vocab_hash and \
            model.vocab_hash != vocab.content_hash():
        raise VocabMismatch("model was trained against a different vocabulary")
    known_keys = known_keys if known_keys is not None else index
    cases = []
    topk_hits = {k: 0 for k in topk}
    for r in test_records:
        ranked = recommend(model, r.tokens, k=max(topk))
        pred = ranked[0]
        for k in topk:
            topk_hits[k] += r.label in ranked[:k]
        known = tuple(r.tokens) in known_keys
        next_set = index.get(r.tokens)
        in_set = pred in next_set if next_set is not None else pred == r.label
        cases.append(CaseRecord(tuple(r.tokens), r.label, pred, in_set, known))
    return _finalize(name, cases, topk_hits, len(test_records))


def evaluate_multi(model: HyLstmModel, examples: list[PathSetExample],
                   index: NextSetIndex, vocab: Vocabulary | None = None,
                   topk: tuple[int, ...] = (1, 3, 5), name: str = "",
                   path_filter=None) -> EvalReport:
    """Evaluate a multi-path model on path-set examples. The in-set key is
    the first path's token sequence. path_filter optionally restricts the
    paths shown to the model (e.g. first path only for ablations)."""
    if vocab is not None and model.vocab_hash and \
            model.vocab_hash != vocab.content_hash():
        raise VocabMismatch("model was trained against a different vocabulary")
    cases = []
    topk_hits = {k: 0 for k in topk}
    for ex in examples:
        paths = path_filter(ex.paths) if path_filter else ex.paths
        ranked = recommend(model, paths, k=max(topk), multi=True)
        pred = ranked[0]
        for k in topk:
            topk_hits[k] += ex.label in ranked[:k]
        key = tuple(ex.paths[0])
        known = key in index
        next_set = index.get(key)
        in_set = pred in next_set if next_set is not None else pred == ex.label
        cases.append(CaseRecord(key, ex.label, pred, in_set, known))
    return _finalize(name, cases, topk_hits, len(examples))


def check_report_identities(report: EvalReport, tol: float = 1e-12) -> None:
    """Internal consistency: Acc(A) must be the case-weighted mean of
    Acc(K) and Acc(U), and in-set accuracy can never undercut top-1."""
    lhs = report.in_set_all * report.n_cases
    rhs = (report.in_set_known * report.n_known
           + report.in_set_unknown * report.n_unknown)
    if abs(lhs - rhs) > tol * max(1.0, abs(lhs)):
        raise ValidationError("Acc(A) decomposition identity violated")
    if report.in_set_all + tol < report.top1:
        raise ValidationError("in-set accuracy below top-1 accuracy")


def compare_runs(reports: list[EvalReport]) -> str:
    """Aligned text table over named reports; delta column is the Acc(A)
    difference from the first row."""
    if not reports:
        raise ValidationError("need at least one report")
    header = f"{'run':<28} {'Acc(A)':>8} {'Acc(K)':>8} {'Acc(U)':>8} " \
             f"{'top-1':>8} {'dAcc(A)':>9}"
    lines = [header, "-" * len(header)]
    base = reports[0].in_set_all
    for r in reports:
        lines.append(f"{r.name:<28} {r.in_set_all:>8.4f} {r.in_set_known:>8.4f} "
                     f"{r.in_set_unknown:>8.4f} {r.top1:>8.4f} "
                     f"{r.in_set_all - base:>+9.4f}")
    return "\n".join(lines) + "\n"


def write_reports_jsonl(reports: list[EvalReport], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in reports:
            f.write(r.to_json() + "\n")


def read_reports_jsonl(path) -> list[EvalReport]:
    with open(path, encoding="utf-8") as f:
        return [EvalReport.from_json(line) for line in f if line.strip()]
