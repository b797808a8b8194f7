"""Edit-LevT: oracle edit policies, policy application and refinement.

A policy acts on a hypothesis ``h`` in three phases: delete some tokens,
open placeholders in the ``len(h) + 1`` slots, then fill the placeholders.
Slots are numbered against the original ``h``: fills for slot ``i`` end
up just before ``h[i]`` (or at the end for slot ``len(h)``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from bisync._seeding import item_rng

PLH = "[plh]"


@dataclass(frozen=True)
class LevtPolicy:
    delete: tuple
    insert_counts: tuple
    fills: tuple

    def __post_init__(self):
        for name in ("delete", "insert_counts", "fills"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if len(self.insert_counts) != len(self.delete) + 1:
            raise ValueError("insert_counts needs one slot more than delete")
        if any(c < 0 for c in self.insert_counts):
            raise ValueError("negative placeholder count")
        if sum(self.insert_counts) != len(self.fills):
            raise ValueError(f"{len(self.fills)} fills for {sum(self.insert_counts)} placeholders")

    @classmethod
    def noop(cls, n: int) -> "LevtPolicy":
        return cls((False,) * n, (0,) * (n + 1), ())

    @property
    def n_edits(self) -> int:
        return sum(self.delete) + len(self.fills)


@dataclass(frozen=True)
class LevtTrainConfig:
    p: float = 0.5
    deletion_rate: float = 0.3
    shuffle_prob: float = 0.5
    shuffle_window: int = 3
    max_rounds: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if not 0.0 <= self.deletion_rate < 1.0:
            raise ValueError("deletion_rate must lie in [0, 1)")
        if self.shuffle_window < 1 or self.max_rounds < 0:
            raise ValueError("shuffle_window >= 1 and max_rounds >= 0 required")


def _lcs_table(h, y):
    n, m = len(h), len(y)
    L = np.zeros((n + 1, m + 1), dtype=np.int32)
    for i in range(n - 1, -1, -1):
        for j in range(m - 1, -1, -1):
            L[i, j] = L[i + 1, j + 1] + 1 if h[i] == y[j] else max(L[i + 1, j], L[i, j + 1])
    return L


def lcs_alignment(h: Sequence, y: Sequence) -> list:
    """Matched index pairs of a leftmost longest common subsequence."""
    L = _lcs_table(h, y)
    i = j = 0
    pairs = []
    while i < len(h) and j < len(y):
        if h[i] == y[j]:
            pairs.append((i, j))
            i += 1
            j += 1
        elif L[i + 1, j] >= L[i, j + 1]:
            i += 1
        else:
            j += 1
    return pairs


def oracle_policy(h: Sequence[str], y: Sequence[str]) -> LevtPolicy:
    """Smallest deletion/insertion program turning ``h`` into ``y``."""
    pairs = lcs_alignment(h, y)
    delete = [True] * len(h)
    counts = [0] * (len(h) + 1)
    fills = []
    prev_j = 0
    for i, j in pairs + [(len(h), len(y))]:
        if i < len(h):
            delete[i] = False
        counts[i] += j - prev_j
        fills.extend(y[prev_j:j])
        prev_j = j + 1
    return LevtPolicy(delete, counts, fills)


def apply_policy(h: Sequence[str], policy: LevtPolicy) -> list:
    if len(policy.delete) != len(h):
        raise ValueError(f"policy covers {len(policy.delete)} tokens, hypothesis has {len(h)}")
    kept = [(i, tok) for i, tok in enumerate(h) if not policy.delete[i]]
    # placeholders go in front of the original position they are slotted at
    with_plh = []
    k = 0
    for slot in range(len(h) + 1):
        with_plh.extend([None] * policy.insert_counts[slot])
        while k < len(kept) and kept[k][0] == slot:
            with_plh.append(kept[k][1])
            k += 1
    fills = iter(policy.fills)
    return [next(fills) if tok is None else tok for tok in with_plh]


def clip_policy(policy: LevtPolicy, k_max: int) -> LevtPolicy:
    """Cap every slot at ``k_max`` placeholders, dropping the surplus fills."""
    counts, fills, pos = [], [], 0
    for c in policy.insert_counts:
        keep = min(c, k_max)
        fills.extend(policy.fills[pos : pos + keep])
        counts.append(keep)
        pos += c
    return LevtPolicy(policy.delete, counts, fills)


def pass_targets(h0: Sequence[str], ref: Sequence[str], k_max: int):
    """Supervision for the three LevT passes starting from ``h0``.

    Returns ``(deletions, kept, counts, fills)``: deletion labels on ``h0``,
    the hypothesis after the oracle deletions, and clipped insertion
    targets on that shorter hypothesis.
    """
    first = oracle_policy(h0, ref)
    kept = [tok for tok, d in zip(h0, first.delete) if not d]
    ins = clip_policy(oracle_policy(kept, ref), k_max)
    return list(first.delete), kept, list(ins.insert_counts), list(ins.fills)


def noise_reference(ref: Sequence[str], cfg: LevtTrainConfig, rng: np.random.Generator) -> list:
    """Random token deletion, then sometimes a bounded local shuffle."""
    out = [tok for tok in ref if rng.random() >= cfg.deletion_rate]
    if out and rng.random() < cfg.shuffle_prob:
        keys = np.arange(len(out)) + rng.uniform(0, cfg.shuffle_window, size=len(out))
        out = [out[i] for i in np.argsort(keys, kind="stable")]
    return out


def make_levt_training_example(src, init, ref, cfg: LevtTrainConfig, item_seed) -> tuple:
    """Pick the initial hypothesis and its oracle policy for one item."""
    rng = item_rng(cfg.seed, "levt-init", item_seed)
    if rng.random() < cfg.p:
        h0 = list(init)
    else:
        h0 = noise_reference(ref, cfg, rng)
    return h0, oracle_policy(h0, ref)


class EditHeads(Protocol):
    """What refinement needs from a model: one decision per pass."""

    def deletions(self, src: Sequence[str], hyp: Sequence[str]) -> Sequence[bool]: ...

    def insert_counts(self, src: Sequence[str], hyp: Sequence[str]) -> Sequence[int]: ...

    def fills(self, src: Sequence[str], hyp: Sequence[str], counts: Sequence[int]) -> Sequence[str]: ...


class OracleHeads:
    """Heads that always follow the oracle policy towards a fixed target."""

    def __init__(self, target: Sequence[str]):
        self.target = list(target)

    def deletions(self, src, hyp):
        return oracle_policy(hyp, self.target).delete

    def insert_counts(self, src, hyp):
        return oracle_policy(hyp, self.target).insert_counts

    def fills(self, src, hyp, counts):
        return oracle_policy(hyp, self.target).fills


def refine_trace(heads, src, init, max_rounds: int = 10) -> list:
    """Hypotheses after each round that changed something, starting with ``init``."""
    if not hasattr(heads, "deletions"):  # a checkpoint
        from bisync.seqmodel import ModelHeads

        heads = ModelHeads(heads)
    trace = [list(init)]
    h = list(init)
    for _ in range(max_rounds):
        dels = list(heads.deletions(src, h))
        kept = [tok for tok, d in zip(h, dels) if not d]
        counts = list(heads.insert_counts(src, kept))
        fills = list(heads.fills(src, kept, counts)) if sum(counts) else []
        new = apply_policy(kept, LevtPolicy((False,) * len(kept), counts, fills))
        if new == h:
            break
        trace.append(new)
        h = new
    return trace


def refine(heads, src, init, cfg: LevtTrainConfig | None = None, max_rounds: int | None = None) -> list:
    """Iteratively edit ``init`` until a round changes nothing.

    ``heads`` is either an ``EditHeads`` implementation or a LevT checkpoint.
    """
    if max_rounds is None:
        max_rounds = (cfg or LevtTrainConfig()).max_rounds
    return refine_trace(heads, src, init, max_rounds)[-1]


def levt_examples(triplets, cfg: LevtTrainConfig, epoch: int = 0) -> list:
    """(source, initial hypothesis, reference) items for one training epoch."""
    out = []
    for i, t in enumerate(triplets):
        h0, _ = make_levt_training_example(t.src, t.init, t.ref, cfg, (i, epoch))
        out.append((list(t.src), h0, list(t.ref)))
    return out


def train_levt(triplets, model_cfg, cfg: LevtTrainConfig = LevtTrainConfig(), init=None, threads=None):
    """Train a LevT checkpoint on triplets, redrawing initial hypotheses every epoch."""
    from bisync.seqmodel import train

    triplets = list(triplets)
    return train(
        levt_examples(triplets, cfg, 0),
        model_cfg,
        "levt",
        init=init,
        resample=lambda epoch: levt_examples(triplets, cfg, epoch),
        threads=threads,
    )
