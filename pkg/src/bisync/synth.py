"""Synthetic initial translations and editing-corpus assembly.

Four kinds of initial target are derived from a reference ``ref``:

* insertion: ``k`` non-overlapping segments removed from ``ref``;
* substitution: round trip through a back-translation sampled with top-5
  noise, re-translated under lexical constraints that keep at least half of
  ``ref``;
* deletion: ``ref`` extended with proposed segments, either at ``k`` gap
  positions (``del1``) or with a single contiguous insertion (``del2``);
* copy: ``ref`` itself.
"""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

import numpy as np

from bisync._seeding import derive_seed, item_rng
from bisync.editdist import DEL, KEEP, edit_script
from bisync.lcd import ConstrainedDecodeError, NextTokenScorer, constrained_beam_search
from bisync.tags import EditTagSet

logger = logging.getLogger(__name__)

METHODS = ("ins", "sub", "del1", "del2", "copy", "parallel", "similar", "related")
EDIT_TYPES = ("ins", "sub", "del", "copy")

METHOD_TAGS = {
    "ins": EditTagSet(True, False, False),
    "sub": EditTagSet(False, True, False),
    "del1": EditTagSet(False, False, True),
    "del2": EditTagSet(False, False, True),
    "copy": EditTagSet(False, False, False),
}


class SynthesisError(RuntimeError):
    """An editing example could not be produced and must be dropped."""


@dataclass(frozen=True)
class Triplet:
    src: tuple
    init: tuple
    ref: tuple
    tags: Optional[EditTagSet]
    method: str

    def __post_init__(self):
        for name in ("src", "init", "ref"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "parallel" and (self.init or self.tags is not None):
            raise ValueError("parallel rows carry an empty init and no tags")


@dataclass(frozen=True)
class GeneratorConfig:
    k_range: tuple = (1, 5)
    max_seg_len: int = 5
    max_removal_ratio: float = 0.5
    min_len_for_edit: int = 4
    del_mix: float = 0.5
    seed: int = 0
    lcd_beam: int = 5
    sub_attempts: int = 30
    span_retries: int = 100

    def __post_init__(self):
        lo, hi = self.k_range
        if lo < 1 or hi < lo:
            raise ValueError(f"k_range must be within [1, inf), got {self.k_range}")
        if not 0.0 < self.max_removal_ratio <= 1.0:
            raise ValueError("max_removal_ratio must be in (0, 1]")
        if self.max_seg_len < 1:
            raise ValueError("max_seg_len must be positive")
        if not 0.0 <= self.del_mix <= 1.0:
            raise ValueError("del_mix must be a probability")


class Translator(Protocol):
    scorer: NextTokenScorer

    def sample(self, tokens: Sequence[str], seed: int) -> list: ...


class SegmentProposer(Protocol):
    def propose(self, src, left, right, max_len: int, rng: np.random.Generator) -> list:
        """Return 1..max_len tokens to insert between ``left`` and ``right``."""


# -- insertion ---------------------------------------------------------------


def removal_spans(n: int, cfg: GeneratorConfig, rng: np.random.Generator) -> list:
    """Sorted ``(start, length)`` spans to cut out of a sentence of length n.

    Spans never touch (at least one kept token separates two spans), so each
    span is also one gap of the result. Overlapping draws are rejected and
    redrawn; after ``span_retries`` failures the number of spans shrinks.
    """
    budget = int(np.floor(cfg.max_removal_ratio * n))
    lo, hi = cfg.k_range
    k = int(rng.integers(lo, hi + 1))
    k = min(k, budget, (n + 1) // 2)
    if k < 1:
        return []
    lengths = []
    left = budget
    for i in range(k):
        cap = min(cfg.max_seg_len, left - (k - i - 1))
        length = int(rng.integers(1, cap + 1))
        lengths.append(length)
        left -= length
    while lengths:
        for _ in range(cfg.span_retries):
            spans = []
            ok = True
            for length in lengths:
                start = int(rng.integers(0, n - length + 1))
                if any(start <= s + l and s <= start + length for s, l in spans):
                    ok = False
                    break
                spans.append((start, length))
            if ok and sum(lengths) < n:
                return sorted(spans)
        lengths.pop()
    return []


def kept_runs(ref: Sequence, spans: Sequence) -> list:
    """Maximal runs of ``ref`` that survive removing ``spans``."""
    runs, pos = [], 0
    for start, length in sorted(spans):
        if start > pos:
            runs.append(list(ref[pos:start]))
        pos = start + length
    if pos < len(ref):
        runs.append(list(ref[pos:]))
    return runs


def _insertion(ref, cfg, rng):
    if len(ref) < cfg.min_len_for_edit:
        return None
    spans = removal_spans(len(ref), cfg, rng)
    if not spans:
        return None
    return spans


def gen_insertion(ref: Sequence[str], cfg: GeneratorConfig, item_seed: int) -> Optional[list]:
    """Initial translation for the insertion task, or ``None`` if ``ref`` is too short."""
    spans = _insertion(ref, cfg, item_rng(item_seed, "ins"))
    if spans is None:
        return None
    return [tok for run in kept_runs(ref, spans) for tok in run]


# -- substitution ------------------------------------------------------------


def gen_substitution(
    src: Sequence[str],
    ref: Sequence[str],
    back: Translator,
    fwd: Translator,
    cfg: GeneratorConfig,
    item_seed: int,
    with_constraints: bool = False,
):
    """Round-trip initial translation for the substitution task.

    Constraints are the kept runs of an insertion-style reduction drawn with
    its own seed. Attempts whose output equals ``ref`` carry no substitution
    and are redrawn; ``SynthesisError`` is raised when every attempt fails.
    With ``with_constraints`` the constraint segments are returned as well.
    """
    if len(ref) < cfg.min_len_for_edit:
        return None
    reasons = Counter()
    for attempt in range(cfg.sub_attempts):
        x_star = back.sample(ref, derive_seed(item_seed, "sub-backtrans", attempt))
        spans = _insertion(ref, cfg, item_rng(item_seed, "sub-constraints", attempt))
        if spans is None:
            return None
        constraints = kept_runs(ref, spans)
        max_len = 2 * max(len(ref), len(x_star)) + 2
        try:
            out = constrained_beam_search(fwd.scorer, x_star, constraints, beam=cfg.lcd_beam, max_len=max_len)
        except ConstrainedDecodeError as err:
            reasons[str(err)] += 1
            continue
        if list(out) != list(ref):
            return (out, constraints) if with_constraints else out
        reasons["round trip reproduced the reference"] += 1
    raise SynthesisError(f"no substitution after {cfg.sub_attempts} attempts: {dict(reasons)}")


# -- deletion ----------------------------------------------------------------


class NgramProposer:
    """Proposes real target-side n-grams that follow the left context.

    The segment is copied from a corpus sentence at a random occurrence of the
    left-context token; without such an occurrence any corpus span is used.
    """

    def __init__(self, sentences: Sequence[Sequence[str]]):
        self.sentences = [list(s) for s in sentences if len(s) > 0]
        if not self.sentences:
            raise ValueError("NgramProposer needs a non-empty corpus")
        self._after = defaultdict(list)
        for si, sent in enumerate(self.sentences):
            for pos, tok in enumerate(sent[:-1]):
                self._after[tok].append((si, pos + 1))

    def propose(self, src, left, right, max_len, rng):
        length = int(rng.integers(1, max_len + 1))
        options = self._after.get(left[-1]) if left else None
        if options:
            si, pos = options[int(rng.integers(len(options)))]
        else:
            si = int(rng.integers(len(self.sentences)))
            pos = int(rng.integers(len(self.sentences[si])))
        seg = self.sentences[si][pos : pos + length]
        return seg or self.sentences[si][-1:]


def gen_deletion_gap(
    src: Sequence[str],
    ref: Sequence[str],
    filler: SegmentProposer,
    cfg: GeneratorConfig,
    item_seed: int,
) -> list:
    """Extend ``ref`` at ``k`` distinct gap slots with proposed segments."""
    rng = item_rng(item_seed, "del1")
    lo, hi = cfg.k_range
    k = min(int(rng.integers(lo, hi + 1)), len(ref) + 1)
    slots = sorted(int(s) for s in rng.choice(len(ref) + 1, size=k, replace=False))
    out = []
    for slot in range(len(ref) + 1):
        if slots and slot == slots[0]:
            slots.pop(0)
            seg = filler.propose(src, list(ref[:slot]), list(ref[slot:]), cfg.max_seg_len, rng)
            out.extend(seg[: cfg.max_seg_len])
        if slot < len(ref):
            out.append(ref[slot])
    return out


def _single_deletion_run(out, ref) -> bool:
    steps = [s for s in edit_script(out, ref).steps if s.op != KEEP]
    if not steps or any(s.op != DEL for s in steps):
        return False
    idx = [s.i for s in steps]
    return idx == list(range(idx[0], idx[0] + len(idx)))


def gen_deletion_wiki(
    ref: Sequence[str],
    expander: SegmentProposer,
    cfg: GeneratorConfig,
    item_seed: int,
    src: Sequence[str] = (),
) -> list:
    """Extend ``ref`` with exactly one contiguous inserted segment.

    Draws whose minimal alignment back to ``ref`` would not read as one
    contiguous deletion are redrawn.
    """
    rng = item_rng(item_seed, "del2")
    out = None
    for _ in range(cfg.span_retries):
        slot = int(rng.integers(0, len(ref) + 1))
        seg = expander.propose(src, list(ref[:slot]), list(ref[slot:]), cfg.max_seg_len, rng)
        seg = seg[: cfg.max_seg_len]
        out = list(ref[:slot]) + list(seg) + list(ref[slot:])
        if _single_deletion_run(out, ref):
            return out
    return out


# -- corpus ------------------------------------------------------------------


@dataclass
class SynthesisReport:
    n_pairs: int = 0
    methods: Counter = None
    short_fallback: int = 0
    dropped: int = 0

    def __post_init__(self):
        if self.methods is None:
            self.methods = Counter()


def _generate(kind, index, src, ref, back, fwd, gap_filler, expander, cfg):
    item_seed = derive_seed(cfg.seed, "item-seed", index)
    if kind == "ins":
        return gen_insertion(ref, cfg, item_seed)
    if kind == "sub":
        return gen_substitution(src, ref, back, fwd, cfg, item_seed)
    if kind == "del1":
        return gen_deletion_gap(src, ref, gap_filler, cfg, item_seed)
    if kind == "del2":
        return gen_deletion_wiki(ref, expander, cfg, item_seed, src=src)
    return list(ref)


def _edit_one(index, src, ref, back, fwd, gap_filler, expander, cfg, kind=None):
    if kind is None:
        rng = item_rng(cfg.seed, "item", index)
        kind = EDIT_TYPES[int(rng.integers(len(EDIT_TYPES)))]
        if kind == "del":
            kind = "del1" if rng.random() < cfg.del_mix else "del2"
    try:
        init = _generate(kind, index, src, ref, back, fwd, gap_filler, expander, cfg)
    except SynthesisError as err:
        logger.info("dropping editing example %d (%s): %s", index, kind, err)
        return None, False
    fell_back = False
    if init is None:
        kind, init, fell_back = "copy", list(ref), True
    return Triplet(src, init, ref, METHOD_TAGS[kind], kind), fell_back


def build_method_set(parallel, method, back, fwd, gap_filler, expander, cfg: GeneratorConfig) -> list:
    """Test set where every pair is edited with ``method``.

    Pairs too short for the method, or whose substitution fails, are skipped.
    """
    if method not in METHOD_TAGS:
        raise ValueError(f"unknown method {method!r}")
    out = []
    for i, (src, ref) in enumerate(parallel):
        trip, fell_back = _edit_one(i, src, ref, back, fwd, gap_filler, expander, cfg, kind=method)
        if trip is not None and not fell_back:
            out.append(trip)
    return out


def build_editing_corpus(
    parallel: Sequence[tuple],
    back: Translator,
    fwd: Translator,
    gap_filler: SegmentProposer,
    expander: SegmentProposer,
    cfg: GeneratorConfig,
    threads: int = 1,
) -> tuple:
    """One editing triplet plus one parallel triplet per input pair.

    The edit type is drawn uniformly from insertion, substitution, deletion
    and copy with a per-item seed derived from ``cfg.seed`` and the item
    index, so the output does not depend on ``threads``. Returns
    ``(triplets, report)``.
    """

    def work(args):
        i, (src, ref) = args
        return _edit_one(i, src, ref, back, fwd, gap_filler, expander, cfg)

    items = list(enumerate(parallel))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, items))
    else:
        results = [work(it) for it in items]

    report = SynthesisReport(n_pairs=len(parallel))
    out = []
    for (i, (src, ref)), (trip, fell_back) in zip(items, results):
        if trip is None:
            report.dropped += 1
        else:
            report.methods[trip.method] += 1
            report.short_fallback += fell_back
            out.append(trip)
        out.append(Triplet(src, (), ref, None, "parallel"))
    return out, report
