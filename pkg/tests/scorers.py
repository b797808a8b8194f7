"""Deterministic stand-in scorers for the decoders."""

import hashlib

import numpy as np


class RandomScorer:
    """Arbitrary but reproducible next-token distributions."""

    def __init__(self, n_words=6, seed=0, eos_bias=0.0, banned=()):
        self.vocab = [f"w{i}" for i in range(n_words)] + ["</s>"]
        self.eos = "</s>"
        self.seed = seed
        self.eos_bias = eos_bias
        self.banned = [self.vocab.index(b) for b in banned]

    def log_probs(self, src, prefixes):
        rows = []
        for prefix in prefixes:
            key = repr((self.seed, tuple(src), tuple(prefix))).encode()
            rng = np.random.default_rng(int.from_bytes(hashlib.sha256(key).digest()[:8], "little"))
            logits = rng.normal(size=len(self.vocab)) * 2.0
            logits[-1] += self.eos_bias + 0.3 * len(prefix)
            logits[self.banned] = -np.inf
            rows.append(logits - np.logaddexp.reduce(logits))
        return np.array(rows)


def random_case(rng):
    scorer = RandomScorer(n_words=int(rng.integers(3, 8)), seed=int(rng.integers(1 << 30)))
    n_seg = int(rng.integers(1, 4))
    segments = [
        [scorer.vocab[int(t)] for t in rng.integers(0, len(scorer.vocab) - 1, size=int(rng.integers(1, 4)))]
        for _ in range(n_seg)
    ]
    return scorer, segments, int(rng.integers(1, 6))
