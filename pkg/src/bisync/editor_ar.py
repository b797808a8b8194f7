"""Edit-MT: an autoregressive model reading ``src [sep] init`` and writing tags then text.

Outputs for editing data start with three tag tokens, e.g.
``[ins] [!sub] [!del] t4 t9 ...``; outputs for parallel data carry no tags.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from bisync.seqmodel import RESERVED, SEP, Checkpoint, ModelScorer, greedy_decode
from bisync.synth import Triplet
from bisync.tags import OPS, EditTagSet, TagParseError
from bisync.lcd import beam_search

MODES = ("free", "forced", "classify")
SIMILAR_TAGS = EditTagSet(True, True, True)
RELATED_TAGS = EditTagSet(True, False, False)


class ProtocolError(RuntimeError):
    """The model output does not start with a well-formed tag triple."""


def assemble_input(src: Sequence[str], init: Sequence[str]) -> list:
    if not init:
        return list(src)
    return list(src) + [SEP] + list(init)


def split_input(tokens: Sequence[str]) -> tuple:
    tokens = list(tokens)
    if SEP not in tokens:
        return tokens, []
    k = tokens.index(SEP)
    return tokens[:k], tokens[k + 1 :]


def encode_tags(tags: EditTagSet) -> list:
    return tags.tokens()


def decode_tags(tokens: Sequence[str]) -> EditTagSet:
    return EditTagSet.from_tokens(tokens)


def training_pair(t: Triplet) -> tuple:
    if t.tags is None:
        return list(t.src), list(t.ref)
    return assemble_input(t.src, t.init), t.tags.tokens() + list(t.ref)


def mix_training_data(editing: Sequence[Triplet], parallel: Sequence[Triplet], seed: int = 0) -> list:
    """Balanced 1:1 mixture as (input, output) pairs, shuffled by ``seed``.

    The larger side is truncated to the size of the smaller one.
    """
    n = min(len(editing), len(parallel))
    rows = [training_pair(t) for t in list(editing)[:n]] + [training_pair(t) for t in list(parallel)[:n]]
    order = np.random.default_rng(seed).permutation(len(rows))
    return [rows[i] for i in order]


def label_tm_rows(triplets: Sequence[Triplet], scheme: str) -> list:
    """Attach the fixed tag sets used when true edits are unknown."""
    tags = {"similar": SIMILAR_TAGS, "related": RELATED_TAGS}[scheme]
    return [Triplet(t.src, t.init, t.ref, tags, t.method) for t in triplets]


@dataclass(frozen=True)
class DecodeMode:
    kind: str = "free"
    tags: Optional[EditTagSet] = None

    def __post_init__(self):
        if self.kind not in MODES:
            raise ValueError(f"unknown mode {self.kind!r}")
        if (self.kind == "forced") != (self.tags is not None):
            raise ValueError("forced mode needs tags, other modes take none")

    @classmethod
    def forced(cls, tags: EditTagSet) -> "DecodeMode":
        return cls("forced", tags)


class _Masks:
    """Per-position vocabulary restrictions for the tag protocol."""

    def __init__(self, ckpt: Checkpoint):
        vocab = ckpt.vocab
        n = len(vocab)
        self.text = np.zeros(n, dtype=bool)
        self.text[: len(RESERVED)] = True
        self.text[vocab.index["[eos]"]] = False
        self.pairs = []
        for op in OPS:
            m = np.ones(n, dtype=bool)
            m[[vocab.index[f"[{op}]"], vocab.index[f"[!{op}]"]]] = False
            self.pairs.append(m)

    def after_tags(self, pos):
        # the first three positions may hold anything, text may not hold reserved symbols
        return self.text if pos >= 3 else np.zeros_like(self.text)

    def classify(self, pos):
        return self.pairs[pos] if pos < 3 else self.text

    def plain(self, pos):
        return self.text


def _masks(ckpt):
    cached = getattr(ckpt, "_tag_masks", None)
    if cached is None:
        cached = _Masks(ckpt)
        ckpt._tag_masks = cached
    return cached


def _finish(out: Sequence[str], mode: DecodeMode) -> tuple:
    if mode.kind == "forced":
        return mode.tags, list(out[3:])
    try:
        tags = EditTagSet.from_tokens(out)
    except TagParseError as err:
        raise ProtocolError(f"malformed tag prefix {list(out[:3])}: {err}") from None
    if mode.kind == "classify":
        return tags, []
    return tags, list(out[3:])


def sync(ckpt: Checkpoint, src, init, mode: DecodeMode = DecodeMode(), beam: int = 1, max_len=None) -> tuple:
    """Edit ``init`` into a translation of ``src``; returns ``(tags, text)``.

    An empty ``init`` is plain translation: no tags are produced and the
    returned tags are ``None``.
    """
    return sync_batch(ckpt, [(src, init)], mode, beam, max_len)[0]


def sync_batch(ckpt: Checkpoint, items, mode: DecodeMode = DecodeMode(), beam: int = 1, max_len=None) -> list:
    masks = _masks(ckpt)
    inputs = [assemble_input(s, i) for s, i in items]
    plain = [not init for _, init in items]
    limit = max_len or ckpt.config.max_len
    if mode.kind == "classify":
        banned, prefixes, limit = masks.classify, None, 3
    elif mode.kind == "forced":
        banned, prefixes = masks.after_tags, [mode.tags.tokens()] * len(items)
        limit += 3
    else:
        banned, prefixes = masks.after_tags, None
        limit += 3
    results = [None] * len(items)
    mt_idx = [k for k, p in enumerate(plain) if p and mode.kind == "free"]
    edit_idx = [k for k in range(len(items)) if k not in set(mt_idx)]

    def run(idx, ban, pre, lim):
        if not idx:
            return []
        if beam <= 1:
            return greedy_decode(
                ckpt, [inputs[k] for k in idx], [pre[k] for k in idx] if pre else None, lim, ban
            )
        scorer = ModelScorer(ckpt, ban)
        return [
            beam_search(scorer, inputs[k], beam=beam, max_len=lim, prefix=pre[k] if pre else ()) for k in idx
        ]

    for k, out in zip(mt_idx, run(mt_idx, masks.plain, None, limit)):
        results[k] = (None, out)
    for k, out in zip(edit_idx, run(edit_idx, banned, prefixes, limit)):
        results[k] = _finish(out, mode)
    return results
