"""A deterministic synthetic language pair with oracle translators.

Source words ``s0..s{V-1}`` map one-to-one onto target words ``t0..t{V-1}``
through a seeded permutation; translation also swaps adjacent tokens at
even positions, so ``s0 s1 s2 s3`` becomes ``d(s1) d(s0) d(s3) d(s2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

FWD = "fwd"
BACK = "back"
EOS = "</s>"

# index offsets of the five "nearest" dictionary neighbours of a word
_NEIGHBOUR_OFFSETS = (1, -1, 2, -2, 3)


class OutOfVocabularyError(ValueError):
    def __init__(self, token, direction):
        super().__init__(f"token {token!r} is not in the {direction} input vocabulary")
        self.token = token


@dataclass(frozen=True)
class ToyLanguageSpec:
    vocab_size: int = 50
    noise_eps: float = 0.1
    seed: int = 0
    dictionary: dict = field(init=False, repr=False, compare=False)
    inverse: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.vocab_size < 6:
            raise ValueError("vocab_size must allow five distinct neighbours")
        if not 0.0 <= self.noise_eps <= 1.0:
            raise ValueError("noise_eps must be a probability")
        perm = np.random.default_rng(self.seed).permutation(self.vocab_size)
        fwd = {f"s{i}": f"t{int(perm[i])}" for i in range(self.vocab_size)}
        object.__setattr__(self, "dictionary", fwd)
        object.__setattr__(self, "inverse", {v: k for k, v in fwd.items()})

    @property
    def source_vocab(self) -> list:
        return [f"s{i}" for i in range(self.vocab_size)]

    @property
    def target_vocab(self) -> list:
        return [f"t{i}" for i in range(self.vocab_size)]

    def neighbours(self, token: str) -> list:
        prefix, idx = token[0], int(token[1:])
        return [f"{prefix}{(idx + off) % self.vocab_size}" for off in _NEIGHBOUR_OFFSETS]


def reorder(tokens: Sequence[str]) -> list:
    """Swap the tokens at positions (0, 1), (2, 3), ...; an involution."""
    out = list(tokens)
    for i in range(0, len(out) - 1, 2):
        out[i], out[i + 1] = out[i + 1], out[i]
    return out


def toy_translate(
    spec: ToyLanguageSpec,
    tokens: Sequence[str],
    direction: str = FWD,
    sampling: Optional[int] = None,
) -> list:
    """Translate with the oracle dictionary.

    ``sampling`` is either ``None`` (exact) or an integer item seed selecting
    top-5 sampling: each output token independently becomes one of its five
    nearest neighbours with probability ``spec.noise_eps``.
    """
    if direction not in (FWD, BACK):
        raise ValueError(f"unknown direction {direction!r}")
    table = spec.dictionary if direction == FWD else spec.inverse
    mapped = []
    for tok in tokens:
        try:
            mapped.append(table[tok])
        except KeyError:
            raise OutOfVocabularyError(tok, direction) from None
    out = reorder(mapped)
    if sampling is not None and spec.noise_eps > 0:
        rng = np.random.default_rng([spec.seed, int(sampling) & 0xFFFFFFFFFFFFFFFF, 7])
        flips = rng.random(len(out)) < spec.noise_eps
        picks = rng.integers(0, len(_NEIGHBOUR_OFFSETS), size=len(out))
        for i in np.flatnonzero(flips):
            out[i] = spec.neighbours(out[i])[int(picks[i])]
    return out


def make_toy_corpus(
    spec: ToyLanguageSpec,
    n: int,
    len_range: tuple = (6, 12),
    seed: int = 0,
    distinct: bool = False,
) -> list:
    """``n`` (src, ref) pairs with lengths uniform in ``len_range`` (inclusive).

    With ``distinct`` no token repeats inside a sentence, which makes word
    alignment unambiguous.
    """
    lo, hi = len_range
    if lo < 1 or hi < lo:
        raise ValueError(f"bad length range {len_range}")
    if distinct and hi > spec.vocab_size:
        raise ValueError("sentences longer than the vocabulary cannot be distinct")
    rng = np.random.default_rng([spec.seed, seed, 11])
    vocab = spec.source_vocab
    pairs = []
    for _ in range(n):
        length = int(rng.integers(lo, hi + 1))
        if distinct:
            idx = rng.choice(spec.vocab_size, size=length, replace=False)
        else:
            idx = rng.integers(0, spec.vocab_size, size=length)
        src = [vocab[int(i)] for i in idx]
        pairs.append((src, toy_translate(spec, src, FWD)))
    return pairs


class ToyScorer:
    """Next-token model that believes in the oracle translation of its input.

    At output position ``p`` it puts mass ``confidence`` on the ``p``-th word
    of the exact translation (or on end-of-sequence past the end) and spreads
    the rest uniformly. Used wherever a trained translation model would be.
    """

    def __init__(self, spec: ToyLanguageSpec, direction: str = FWD, confidence: float = 0.9):
        self.spec = spec
        self.direction = direction
        out_vocab = spec.target_vocab if direction == FWD else spec.source_vocab
        self.vocab = out_vocab + [EOS]
        self.eos = EOS
        self._index = {t: i for i, t in enumerate(self.vocab)}
        rest = (1.0 - confidence) / (len(self.vocab) - 1)
        self._hit = float(np.log(confidence))
        self._miss = float(np.log(rest))
        self._cache: dict = {}

    def _oracle(self, src):
        key = tuple(src)
        if key not in self._cache:
            self._cache[key] = toy_translate(self.spec, src, self.direction)
        return self._cache[key]

    def log_probs(self, src, prefixes):
        target = self._oracle(src)
        out = np.full((len(prefixes), len(self.vocab)), self._miss)
        for r, prefix in enumerate(prefixes):
            p = len(prefix)
            tok = target[p] if p < len(target) else EOS
            out[r, self._index[tok]] = self._hit
        return out


class ToyTranslator:
    """Translator for one direction of the toy pair (sampling + scoring)."""

    def __init__(self, spec: ToyLanguageSpec, direction: str = FWD):
        self.spec = spec
        self.direction = direction
        self.scorer = ToyScorer(spec, direction)

    def translate(self, tokens):
        return toy_translate(self.spec, tokens, self.direction)

    def sample(self, tokens, seed: int):
        return toy_translate(self.spec, tokens, self.direction, sampling=seed)
