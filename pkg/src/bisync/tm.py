"""Translation-memory index, fuzzy-match retrieval and related segments.

Retrieval returns entries whose source side has similarity strictly above
``theta`` with the query. The q-gram prefilter only skips entries that
provably cannot clear the threshold, so results equal a full scan:

* the similarity threshold bounds the edit distance, and therefore the
  length difference, for each candidate length;
* two sequences within edit distance ``d`` share at least
  ``max(n, m) - q + 1 - q * d`` q-grams. When that bound is positive only
  entries sharing a q-gram with the query are verified; otherwise the
  whole length group is scanned.

Survivors are verified with the banded edit distance.
"""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Optional, Sequence

from bisync.editdist import KEEP, bounded_edit_distance, edit_script
from bisync.formats import dump_json, load_json
from bisync.synth import Triplet
from bisync.editor_ar import RELATED_TAGS, SIMILAR_TAGS

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TmConfig:
    q: int = 3
    theta: float = 0.6
    k: int = 3
    exclude_exact: bool = True
    link_floor: float = 0.1

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("q must be positive")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")


@dataclass(frozen=True)
class TmEntry:
    src: tuple
    tgt: tuple
    domain: str = ""


@dataclass(frozen=True)
class TmMatch:
    src: tuple
    tgt: tuple
    score: float
    index: int
    related_mask: Optional[tuple] = None


def _qgrams(tokens, q):
    return [tuple(tokens[i : i + q]) for i in range(len(tokens) - q + 1)]


def max_distance(n: int, m: int, theta: float) -> int:
    """Largest edit distance whose similarity still exceeds ``theta`` (-1 if none)."""
    longest = max(n, m)
    best = -1
    for d in range(longest + 1):
        if 1.0 - d / longest > theta:
            best = d
        else:
            break
    return best


class CooccurrenceTable:
    """Dice co-occurrence scores between source and target words."""

    def __init__(self, src_counts: dict, tgt_counts: dict, pair_counts: dict):
        self.src_counts = src_counts
        self.tgt_counts = tgt_counts
        self.pair_counts = pair_counts

    @classmethod
    def build(cls, pairs) -> "CooccurrenceTable":
        sc, tc, pc = Counter(), Counter(), Counter()
        for src, tgt in pairs:
            s, t = set(src), set(tgt)
            sc.update(s)
            tc.update(t)
            pc.update((a, b) for a in s for b in t)
        return cls(dict(sc), dict(tc), dict(pc))

    def __bool__(self):
        return bool(self.pair_counts)

    def dice(self, s, t) -> float:
        c = self.pair_counts.get((s, t), 0)
        if not c:
            return 0.0
        return 2.0 * c / (self.src_counts[s] + self.tgt_counts[t])

    def link(self, t, candidates: Sequence[str], floor: float) -> Optional[str]:
        """Source word among ``candidates`` best associated with ``t``."""
        best, best_score = None, -1.0
        for s in sorted(set(candidates)):
            v = self.dice(s, t)
            if v >= floor and v > best_score:
                best, best_score = s, v
        return best

    def to_json(self):
        return {
            "src": sorted(self.src_counts.items()),
            "tgt": sorted(self.tgt_counts.items()),
            "pairs": sorted([a, b, c] for (a, b), c in self.pair_counts.items()),
        }

    @classmethod
    def from_json(cls, data):
        return cls(
            {k: v for k, v in data["src"]},
            {k: v for k, v in data["tgt"]},
            {(a, b): c for a, b, c in data["pairs"]},
        )


class TmIndex:
    def __init__(self, entries: Sequence[TmEntry], cfg: TmConfig, table: Optional[CooccurrenceTable] = None):
        self.entries = tuple(entries)
        self.cfg = cfg
        self.table = table if table is not None else CooccurrenceTable.build((e.src, e.tgt) for e in self.entries)
        self.by_length = defaultdict(list)
        self.postings = defaultdict(list)
        for i, e in enumerate(self.entries):
            self.by_length[len(e.src)].append(i)
            for g in sorted(set(_qgrams(e.src, cfg.q))):
                self.postings[len(e.src), g].append(i)

    def __len__(self):
        return len(self.entries)

    def save(self, path) -> None:
        dump_json(
            path,
            "tm-index",
            {
                "config": vars(self.cfg),
                "entries": [[list(e.src), list(e.tgt), e.domain] for e in self.entries],
                "cooccurrence": self.table.to_json(),
            },
        )

    @classmethod
    def load(cls, path) -> "TmIndex":
        body = load_json(path, "tm-index")
        entries = [TmEntry(tuple(s), tuple(t), d) for s, t, d in body["entries"]]
        return cls(entries, TmConfig(**body["config"]), CooccurrenceTable.from_json(body["cooccurrence"]))


def build_index(corpus, cfg: TmConfig = TmConfig()) -> TmIndex:
    """Index (src, tgt) or (src, tgt, domain) rows; duplicate pairs are kept once."""
    seen = set()
    entries = []
    for row in corpus:
        src, tgt = tuple(row[0]), tuple(row[1])
        domain = row[2] if len(row) > 2 else ""
        if (src, tgt) in seen:
            continue
        seen.add((src, tgt))
        entries.append(TmEntry(src, tgt, domain))
    if not entries:
        raise ValueError("cannot build a translation memory from an empty corpus")
    return TmIndex(entries, cfg)


def build_domain_indices(corpus, cfg: TmConfig = TmConfig()) -> dict:
    """One index per domain label of (src, tgt, domain) rows."""
    groups = defaultdict(list)
    for row in corpus:
        groups[row[2]].append(row)
    return {d: build_index(rows, cfg) for d, rows in sorted(groups.items())}


def retrieve(index: TmIndex, query, k=None, theta=None, exclude_exact=None) -> list:
    cfg = index.cfg
    k = cfg.k if k is None else k
    theta = cfg.theta if theta is None else theta
    exclude_exact = cfg.exclude_exact if exclude_exact is None else exclude_exact
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    query = tuple(query)
    n = len(query)
    grams = set(_qgrams(query, cfg.q))
    found = []
    for m in sorted(index.by_length):
        longest = max(n, m)
        if longest == 0:
            continue
        d_max = max_distance(n, m, theta)
        if d_max < abs(n - m):
            continue
        if longest - cfg.q + 1 - cfg.q * d_max >= 1:
            cand = sorted({i for g in grams for i in index.postings.get((m, g), ())})
        else:
            cand = index.by_length[m]
        for i in cand:
            x = index.entries[i].src
            if exclude_exact and x == query:
                continue
            d = bounded_edit_distance(query, x, d_max)
            if d is not None:
                found.append((1.0 - d / longest, i))
    found.sort(key=lambda p: (-p[0], p[1]))
    return [TmMatch(index.entries[i].src, index.entries[i].tgt, s, i) for s, i in found[:k]]


def related_mask(query, x_sim, y_sim, table: CooccurrenceTable, floor: float = 0.1) -> list:
    """Per-token keep flags for ``y_sim``: linked to a matched ``x_sim`` token."""
    if not table:
        logger.warning("empty lexical table; keeping the whole retrieved target")
        return [True] * len(y_sim)
    script = edit_script(list(x_sim), list(query))
    matched = {x_sim[s.i] for s in script.steps if s.op == KEEP}
    keep = []
    for t in y_sim:
        s = table.link(t, x_sim, floor)
        keep.append(s is not None and s in matched)
    return keep


def related_segments(query, x_sim, y_sim, table: CooccurrenceTable, floor: float = 0.1) -> list:
    """``y_sim`` with the tokens not aligned to the matched source part removed."""
    if list(query) == list(x_sim):
        return list(y_sim)
    mask = related_mask(query, x_sim, y_sim, table, floor)
    return [t for t, k in zip(y_sim, mask) if k]


def make_ft_corpus(index: TmIndex, pairs, scheme: str = "similar", training: bool = True) -> list:
    """Editing triplets built from retrieved matches.

    Training sentences use every qualifying match (up to ``cfg.k``), test
    sentences only the best one. Sentences without a match produce no row.
    """
    if scheme not in ("similar", "related"):
        raise ValueError(f"unknown scheme {scheme!r}")
    tags = SIMILAR_TAGS if scheme == "similar" else RELATED_TAGS
    out = []
    for src, ref in pairs:
        for m in retrieve(index, src, k=index.cfg.k if training else 1):
            init = m.tgt if scheme == "similar" else related_segments(src, m.src, m.tgt, index.table, index.cfg.link_floor)
            out.append(Triplet(src, init, ref, tags, scheme))
    return out
