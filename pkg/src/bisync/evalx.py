"""Corpus BLEU, translation edit rate and stratified reports.

BLEU follows the usual corpus formulation (clipped n-gram counts up to
order 4, brevity penalty, geometric mean). Zero precisions are smoothed
exponentially: the k-th order with no match gets ``1 / (2**k * total)``.
When no hypothesis is long enough for the higher orders, the mean runs
over the orders that exist. Scores are on a 0-100 scale. Text is compared
as given; no extra tokenization is applied.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

from bisync.editdist import BUCKET_LABELS, OPCLASS_LABELS, bucket_of, classify_edit_ops, edit_distance, opclass_label

MAX_ORDER = 4
MISSING = "—"


def _check_lengths(hyps, refs):
    if len(hyps) != len(refs):
        raise ValueError(f"{len(hyps)} hypotheses for {len(refs)} references")


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


@dataclass(frozen=True)
class BleuStats:
    matches: tuple
    totals: tuple
    hyp_len: int
    ref_len: int

    def __add__(self, other):
        return BleuStats(
            tuple(a + b for a, b in zip(self.matches, other.matches)),
            tuple(a + b for a, b in zip(self.totals, other.totals)),
            self.hyp_len + other.hyp_len,
            self.ref_len + other.ref_len,
        )


def sentence_stats(hyp: Sequence[str], ref: Sequence[str]) -> BleuStats:
    matches, totals = [], []
    for n in range(1, MAX_ORDER + 1):
        h, r = _ngrams(hyp, n), _ngrams(ref, n)
        matches.append(sum(min(c, r[g]) for g, c in h.items()))
        totals.append(max(len(hyp) - n + 1, 0))
    return BleuStats(tuple(matches), tuple(totals), len(hyp), len(ref))


def bleu_from_stats(stats: BleuStats) -> float:
    if stats.hyp_len == 0:
        return 0.0
    log_p = 0.0
    smooth = 1.0
    order = 0
    for m, t in zip(stats.matches, stats.totals):
        if t == 0:
            break
        order += 1
        if m == 0:
            smooth *= 2
            log_p += math.log(1.0 / (smooth * t))
        else:
            log_p += math.log(m / t)
    bp = 1.0 if stats.hyp_len >= stats.ref_len else math.exp(1 - stats.ref_len / stats.hyp_len)
    return 100.0 * bp * math.exp(log_p / order)


def bleu(hyps: Sequence[Sequence[str]], refs: Sequence[Sequence[str]]) -> float:
    _check_lengths(hyps, refs)
    total = BleuStats((0,) * MAX_ORDER, (0,) * MAX_ORDER, 0, 0)
    for h, r in zip(hyps, refs):
        total = total + sentence_stats(h, r)
    return bleu_from_stats(total)


def _shift_once(hyp, ref, max_phrase=10):
    """Best single block move of a hyp phrase that also occurs in ref."""
    base = edit_distance(hyp, ref)
    ref_phrases = {tuple(ref[i : i + L]) for L in range(1, max_phrase + 1) for i in range(len(ref) - L + 1)}
    best = (0, None)
    for L in range(1, min(max_phrase, len(hyp)) + 1):
        for i in range(len(hyp) - L + 1):
            phrase = tuple(hyp[i : i + L])
            if phrase not in ref_phrases:
                continue
            rest = hyp[:i] + hyp[i + L :]
            for j in range(len(rest) + 1):
                if j == i:
                    continue
                moved = rest[:j] + list(phrase) + rest[j:]
                gain = base - edit_distance(moved, ref) - 1
                if gain > best[0]:
                    best = (gain, moved)
    return best[1]


def ter_edits(hyp: Sequence[str], ref: Sequence[str], shifts: bool = False) -> int:
    hyp, ref = list(hyp), list(ref)
    n_shifts = 0
    while shifts:
        moved = _shift_once(hyp, ref)
        if moved is None:
            break
        hyp = moved
        n_shifts += 1
    return edit_distance(hyp, ref) + n_shifts


def translation_edit_rate(hyps, refs, shifts: bool = False) -> float:
    """Total edits divided by total reference length (0.0 is perfect)."""
    _check_lengths(hyps, refs)
    ref_len = sum(len(r) for r in refs)
    if ref_len == 0:
        raise ValueError("reference corpus is empty")
    return sum(ter_edits(h, r, shifts) for h, r in zip(hyps, refs)) / ref_len


METRICS = {"bleu": bleu, "ter": lambda h, r: 100.0 * translation_edit_rate(h, r)}


def metric_signature(metric: str) -> str:
    if metric == "bleu":
        return "bleu|order:4|smooth:exp|tok:none|case:exact"
    return "ter|shifts:no|tok:none|case:exact|scale:100"


@dataclass
class StratumRow:
    label: str
    n: int
    score: Optional[float]
    copy_score: Optional[float]


@dataclass
class EvalReport:
    strata: str
    metric: str
    overall: float
    copy_overall: float
    rows: list
    metadata: dict = field(default_factory=dict)

    @property
    def n_total(self) -> int:
        return sum(r.n for r in self.rows)

    def row(self, label: str) -> StratumRow:
        return next(r for r in self.rows if r.label == label)

    def columns(self) -> list:
        return [r.label for r in self.rows]

    def _cells(self):
        fmt = lambda v: MISSING if v is None else f"{v:.1f}"
        head = ["", "All"] + self.columns()
        n = ["N", str(self.n_total)] + [str(r.n) for r in self.rows]
        sys_row = [self.metadata.get("system", "system"), fmt(self.overall)] + [fmt(r.score) for r in self.rows]
        copy = ["copy", fmt(self.copy_overall)] + [fmt(r.copy_score) for r in self.rows]
        return [head, n, copy, sys_row]

    def to_tsv(self) -> str:
        return "\n".join("\t".join(cells) for cells in self._cells()) + "\n"

    def to_table(self) -> str:
        cells = self._cells()
        widths = [max(len(row[c]) for row in cells) for c in range(len(cells[0]))]
        lines = ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "strata": self.strata,
            "metric": self.metric,
            "overall": self.overall,
            "copy": self.copy_overall,
            "rows": [vars(r) for r in self.rows],
            "metadata": self.metadata,
        }


def stratum_of(init, ref, strata: str) -> str:
    if strata == "bucket":
        return bucket_of(edit_distance(init, ref))
    if strata == "opclass":
        return opclass_label(classify_edit_ops(init, ref))
    raise ValueError(f"unknown strata {strata!r}")


def stratified_report(hyps, refs, inits, strata: str = "bucket", metric: str = "bleu", system: str = "system") -> EvalReport:
    """Score per stratum of (init, ref) distance or edit class, with a copy baseline."""
    _check_lengths(hyps, refs)
    _check_lengths(inits, refs)
    score = METRICS[metric]
    labels = BUCKET_LABELS if strata == "bucket" else OPCLASS_LABELS
    groups = {label: [] for label in labels}
    for k, (init, ref) in enumerate(zip(inits, refs)):
        groups[stratum_of(init, ref, strata)].append(k)
    rows = []
    for label in labels:
        idx = groups[label]
        if not idx:
            rows.append(StratumRow(label, 0, None, None))
            continue
        r = [refs[k] for k in idx]
        rows.append(StratumRow(label, len(idx), score([hyps[k] for k in idx], r), score([inits[k] for k in idx], r)))
    return EvalReport(
        strata,
        metric,
        score(hyps, refs),
        score(inits, refs),
        rows,
        {"system": system, "signature": metric_signature(metric), "tokenization": "whitespace"},
    )
