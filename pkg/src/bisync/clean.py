"""Corpus cleaning with an Edit-MT model: classify pairs, then filter or fix them.

A pair whose predicted tags are all negative counts as parallel. The other
pairs are either dropped or re-decoded with the predicted tags as a forced
prefix. Tag sets also map onto the four cross-lingual entailment relations.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from bisync.editor_ar import DecodeMode, ProtocolError, sync_batch
from bisync.tags import COPY_TAGS, EditTagSet

logger = logging.getLogger(__name__)

POLICIES = ("filter", "fix", "filter_and_fix")
EDIT_CLASSES = ("Copy", "Insertion", "Deletion", "Substitution")


class RelationLabel(str, Enum):
    BIDIRECTIONAL = "Bidirectional"
    FORWARD = "Forward"
    BACKWARD = "Backward"
    NO_ENTAILMENT = "NoEntailment"


_EN_FR = {
    RelationLabel.BIDIRECTIONAL: "Copy",
    RelationLabel.FORWARD: "Deletion",
    RelationLabel.BACKWARD: "Insertion",
    RelationLabel.NO_ENTAILMENT: "Substitution",
}


@dataclass(frozen=True)
class LabelMap:
    direction: str = "EnFr"

    def __post_init__(self):
        if self.direction not in ("EnFr", "FrEn"):
            raise ValueError(f"unknown direction {self.direction!r}")

    @property
    def to_class(self) -> dict:
        if self.direction == "EnFr":
            return dict(_EN_FR)
        swapped = dict(_EN_FR)
        swapped[RelationLabel.FORWARD] = "Insertion"
        swapped[RelationLabel.BACKWARD] = "Deletion"
        return swapped

    @property
    def to_label(self) -> dict:
        return {c: r for r, c in self.to_class.items()}


_CLASS_TAGS = {
    "Copy": COPY_TAGS,
    "Insertion": EditTagSet(True, False, False),
    "Deletion": EditTagSet(False, False, True),
    "Substitution": EditTagSet(False, True, False),
}


def edit_class_of_tags(tags: EditTagSet) -> str:
    """Single edit class; several positive tags resolve as sub > del > ins."""
    if tags.sub:
        return "Substitution"
    if tags.del_:
        return "Deletion"
    if tags.ins:
        return "Insertion"
    return "Copy"


def clte_label_of_tags(tags: EditTagSet, label_map: LabelMap = LabelMap()) -> RelationLabel:
    return label_map.to_label[edit_class_of_tags(tags)]


def tags_of_clte_label(label, label_map: LabelMap = LabelMap()) -> EditTagSet:
    return _CLASS_TAGS[label_map.to_class[RelationLabel(label)]]


def classify_pairs(ckpt, pairs: Sequence[tuple], beam: int = 1) -> list:
    """Predicted tag set per (x1, x2) pair, reading x1 as source and x2 as initial target."""
    pairs = [(list(a), list(b)) for a, b in pairs]
    try:
        return [tags for tags, _ in sync_batch(ckpt, pairs, DecodeMode("classify"), beam)]
    except ProtocolError:
        pass
    out = []
    for a, b in pairs:
        try:
            out.append(sync_batch(ckpt, [(a, b)], DecodeMode("classify"), beam)[0][0])
        except ProtocolError as err:
            logger.warning("classification failed: %s", err)
            out.append(None)
    return out


@dataclass
class CleaningReport:
    policy: str
    n_total: int = 0
    n_parallel: int = 0
    n_filtered: int = 0
    n_fixed: int = 0
    label_histogram: dict = field(default_factory=dict)

    @property
    def parallel_fraction(self) -> float:
        return self.n_parallel / self.n_total if self.n_total else 0.0

    def to_json(self) -> dict:
        return {
            "policy": self.policy,
            "n_total": self.n_total,
            "n_parallel": self.n_parallel,
            "n_filtered": self.n_filtered,
            "n_fixed": self.n_fixed,
            "parallel_fraction": self.parallel_fraction,
            "label_histogram": dict(sorted(self.label_histogram.items())),
        }


def run_cleaning(ckpt_clf, ckpt_fix, corpus: Sequence[tuple], policy: str = "filter", beam: int = 1) -> tuple:
    """Return ``(cleaned pairs, report, predicted tags)``.

    ``filter`` keeps the pairs classified parallel. ``fix`` keeps every pair
    and replaces the target of the others by a forced-tag re-decoding.
    ``filter_and_fix`` keeps the parallel pairs plus the fixed pairs that
    the classifier then accepts as parallel. Corpus order is preserved.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    corpus = [(list(s), list(t)) for s, t in corpus]
    tags = classify_pairs(ckpt_clf, corpus, beam)
    report = CleaningReport(policy, n_total=len(corpus))
    report.label_histogram = dict(Counter("err" if t is None else t.code() for t in tags))
    parallel = [t is not None and t.is_copy for t in tags]
    report.n_parallel = sum(parallel)
    report.n_filtered = len(corpus) - report.n_parallel
    if policy == "filter":
        return [p for p, ok in zip(corpus, parallel) if ok], report, tags

    todo = [k for k, ok in enumerate(parallel) if not ok and tags[k] is not None]
    fixed = {}
    for code in sorted({tags[k].code() for k in todo}):
        group = [k for k in todo if tags[k].code() == code]
        mode = DecodeMode.forced(EditTagSet.from_code(code))
        try:
            outs = sync_batch(ckpt_fix, [corpus[k] for k in group], mode, beam)
        except Exception as err:  # items stay unchanged
            logger.warning("fixing %d items tagged %s failed: %s", len(group), code, err)
            continue
        for k, (_, text) in zip(group, outs):
            fixed[k] = text
    if policy == "filter_and_fix" and fixed:
        keys = sorted(fixed)
        recheck = classify_pairs(ckpt_clf, [(corpus[k][0], fixed[k]) for k in keys], beam)
        fixed = {k: fixed[k] for k, t in zip(keys, recheck) if t is not None and t.is_copy}
    report.n_fixed = len(fixed)
    out = []
    for k, (src, tgt) in enumerate(corpus):
        if parallel[k]:
            out.append((src, tgt))
        elif k in fixed:
            out.append((src, fixed[k]))
        elif policy == "fix":
            out.append((src, tgt))
    return out, report, tags
