"""Lexically constrained beam search with dynamic beam allocation.

Any object exposing next-token log-probabilities (see ``NextTokenScorer``)
can be decoded. Constraints are an ordered list of token segments; every
segment must appear contiguously, and segments appear in order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

logger = logging.getLogger(__name__)


class ConstrainedDecodeError(RuntimeError):
    """No hypothesis satisfied every constraint within the length budget."""


class NextTokenScorer(Protocol):
    vocab: Sequence[str]
    eos: str

    def log_probs(self, src: Sequence[str], prefixes: Sequence[Sequence[str]]) -> np.ndarray:
        """Return an array of shape ``(len(prefixes), len(vocab))``."""


@dataclass(frozen=True)
class ConstraintSet:
    segments: tuple = ()

    def __post_init__(self):
        segs = tuple(tuple(s) for s in self.segments)
        if any(len(s) == 0 for s in segs):
            raise ValueError("constraint segments must be non-empty")
        object.__setattr__(self, "segments", segs)

    @property
    def total_tokens(self) -> int:
        return sum(len(s) for s in self.segments)


@dataclass(frozen=True)
class ConstraintState:
    segment: int = 0
    offset: int = 0
    satisfied: int = 0  # constraint tokens matched so far, including the partial segment

    def done(self, constraints: ConstraintSet) -> bool:
        return self.segment == len(constraints.segments)

    def advance(self, token: str, constraints: ConstraintSet) -> "ConstraintState":
        """State after emitting ``token`` as part of the pending segment.

        Only valid when ``token`` is the next constraint token; a hypothesis
        inside a segment has no other legal continuation.
        """
        seg = constraints.segments[self.segment]
        if token != seg[self.offset]:
            raise ValueError(f"{token!r} does not continue the pending constraint")
        if self.offset + 1 == len(seg):
            return ConstraintState(self.segment + 1, 0, self.satisfied + 1)
        return ConstraintState(self.segment, self.offset + 1, self.satisfied + 1)


@dataclass
class _Hyp:
    score: float
    tokens: list
    state: ConstraintState = field(default_factory=ConstraintState)


def _vocab_index(model: NextTokenScorer) -> dict:
    return {tok: i for i, tok in enumerate(model.vocab)}


def _topk(row: np.ndarray, k: int) -> np.ndarray:
    # stable: ties resolved by vocabulary index
    return np.argsort(-row, kind="stable")[:k]


def beam_search(
    model: NextTokenScorer,
    src: Sequence[str],
    beam: int = 5,
    max_len: int = 64,
    prefix: Sequence[str] = (),
) -> list:
    """Plain beam search over the sum of token log-probabilities.

    ``max_len`` counts every output token including ``prefix``; a hypothesis
    of that length can only be closed with the end-of-sequence token. Search
    stops once the best finished hypothesis scores at least as well as every
    live one.
    """
    if beam < 1:
        raise ValueError("beam must be >= 1")
    eos_id = _vocab_index(model)[model.eos]
    alive = [(0.0, list(prefix))]
    finished = []
    while alive:
        lp = np.asarray(model.log_probs(src, [h for _, h in alive]), dtype=np.float64)
        scores = np.array([s for s, _ in alive])[:, None] + lp
        for r, (_, h) in enumerate(alive):
            if len(h) >= max_len:
                keep = scores[r, eos_id]
                scores[r, :] = -np.inf
                scores[r, eos_id] = keep
        flat = scores.ravel()
        order = np.argsort(-flat, kind="stable")[:beam]
        nxt = []
        for idx in order:
            if not np.isfinite(flat[idx]):
                break
            r, t = divmod(int(idx), lp.shape[1])
            score, h = alive[r]
            if t == eos_id:
                finished.append((float(flat[idx]), h))
            else:
                nxt.append((float(flat[idx]), h + [model.vocab[t]]))
        alive = nxt
        if finished and alive and max(s for s, _ in finished) >= max(s for s, _ in alive):
            break
    if not finished:
        raise ConstrainedDecodeError("beam search produced no finished hypothesis")
    best = max(range(len(finished)), key=lambda i: (finished[i][0], -i))
    return finished[best][1]


def _allocate(candidates: list, beam: int) -> list:
    """Pick up to ``beam`` candidates, round-robin over progress banks.

    Candidates are ``(score, hyp_index, token_index, state)``. Each round
    takes the best remaining candidate of every bank, visiting banks from the
    highest progress down, so that each non-empty bank keeps a slot whenever
    the beam is wide enough.
    """
    banks: dict = {}
    for cand in candidates:
        banks.setdefault(cand[3].satisfied, []).append(cand)
    for cands in banks.values():
        cands.sort(key=lambda c: (-c[0], c[1], c[2]))
    order = sorted(banks, reverse=True)
    chosen = []
    depth = 0
    while len(chosen) < beam:
        took = False
        for b in order:
            if depth < len(banks[b]):
                chosen.append(banks[b][depth])
                took = True
                if len(chosen) == beam:
                    break
        if not took:
            break
        depth += 1
    chosen.sort(key=lambda c: (-c[0], c[1], c[2]))
    return chosen


def constrained_beam_search(
    model: NextTokenScorer,
    src: Sequence[str],
    constraints: ConstraintSet | Sequence[Sequence[str]],
    beam: int = 5,
    max_len: int = 64,
    prefix: Sequence[str] = (),
) -> list:
    """Best hypothesis of ``constrained_search``."""
    return constrained_search(model, src, constraints, beam, max_len, prefix)[0][1]


def constrained_search(
    model: NextTokenScorer,
    src: Sequence[str],
    constraints: ConstraintSet | Sequence[Sequence[str]],
    beam: int = 5,
    max_len: int = 64,
    prefix: Sequence[str] = (),
) -> list:
    """Finished ``(score, tokens)`` hypotheses, best first.

    Beam search whose output contains every constraint segment in order.

    Each live hypothesis proposes its ``beam`` best model tokens plus the next
    token of its pending constraint. Emitting the first token of the pending
    segment branches: one copy starts the segment, the other treats the token
    as free text. Inside a segment the only continuation is its next token,
    which keeps segments contiguous and progress monotone. Finishing is only
    allowed once all constraints are met; candidates that can no longer fit
    the remaining constraint tokens into ``max_len`` are pruned.
    """
    if not isinstance(constraints, ConstraintSet):
        constraints = ConstraintSet(tuple(constraints))
    if beam < 1:
        raise ValueError("beam must be >= 1")
    total = constraints.total_tokens
    if max_len < total:
        raise ValueError(f"max_len {max_len} cannot hold {total} constrained tokens")
    index = _vocab_index(model)
    eos_id = index[model.eos]
    for seg in constraints.segments:
        for tok in seg:
            if tok not in index:
                raise ValueError(f"constraint token {tok!r} is not in the model vocabulary")

    alive = [_Hyp(0.0, list(prefix))]
    finished = []
    while alive:
        lp = np.asarray(model.log_probs(src, [h.tokens for h in alive]), dtype=np.float64)
        candidates = []
        for r, h in enumerate(alive):
            state = h.state
            done = state.done(constraints)
            forced = None if done else index[constraints.segments[state.segment][state.offset]]
            if len(h.tokens) >= max_len:
                proposals = [eos_id] if done else []
            elif state.offset > 0:
                proposals = [forced]
            else:
                proposals = [int(t) for t in _topk(lp[r], beam)]
                free = set(proposals)
                if forced is not None and forced not in free:
                    proposals.append(forced)
            room = max_len - len(h.tokens) - 1
            for t in proposals:
                score = h.score + lp[r, t]
                if not np.isfinite(score):
                    continue
                if t == eos_id:
                    if done:
                        candidates.append((score, r, t, state))
                    continue
                if t == forced:
                    nxt_state = state.advance(model.vocab[t], constraints)
                    if total - nxt_state.satisfied <= room:
                        candidates.append((score, r, t, nxt_state))
                    if state.offset > 0 or t not in free:
                        continue
                # the same token also stays available as ordinary text
                if total - state.satisfied <= room:
                    candidates.append((score, r, t, state))
        nxt = []
        for score, r, t, state in _allocate(candidates, beam):
            toks = alive[r].tokens
            if t == eos_id:
                finished.append((float(score), toks))
            else:
                nxt.append(_Hyp(float(score), toks + [model.vocab[t]], state))
        alive = nxt
        if finished and alive and max(s for s, _ in finished) >= max(h.score for h in alive):
            break
    if not finished:
        raise ConstrainedDecodeError(
            f"no hypothesis met all {len(constraints.segments)} constraints within {max_len} tokens"
        )
    order = sorted(range(len(finished)), key=lambda i: (-finished[i][0], i))
    return [finished[i] for i in order]


def satisfies(output: Sequence[str], constraints: ConstraintSet | Sequence[Sequence[str]]) -> bool:
    """True when every segment occurs contiguously and in order in ``output``."""
    segments = constraints.segments if isinstance(constraints, ConstraintSet) else constraints
    pos = 0
    out = list(output)
    for seg in segments:
        seg = list(seg)
        found = -1
        for start in range(pos, len(out) - len(seg) + 1):
            if out[start : start + len(seg)] == seg:
                found = start
                break
        if found < 0:
            return False
        pos = found + len(seg)
    return True
