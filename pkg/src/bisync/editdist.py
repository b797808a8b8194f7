"""Token-level edit distance, alignment scripts, similarity and strata.

All functions operate on sequences of hashable tokens (normally whitespace
tokens) with unit costs for insertion, deletion and substitution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Optional, Sequence

KEEP = "KEEP"
SUB = "SUB"
DEL = "DEL"
INS = "INS"

BUCKET_LABELS = ("0", "1", "2", "3", "4", "5", "6", "7", "8-10", ">10")

# Column order of the edit-operation breakdown.
OPCLASS_LABELS = ("=", "Ins", "Sub", "Del", "Ins+Sub", "Ins+Del", "Sub+Del", "Ins+Sub+Del")


class UndefinedInputError(ValueError):
    """Raised when a quantity is undefined for the given inputs."""


@dataclass(frozen=True)
class Step:
    op: str
    i: Optional[int] = None  # index into the first sequence
    j: Optional[int] = None  # index into the second sequence


@dataclass(frozen=True)
class EditScript:
    steps: tuple
    cost: int

    def ops(self) -> list:
        return [s.op for s in self.steps]

    def apply(self, a: Sequence, b: Sequence) -> list:
        """Rebuild the target sequence from ``a`` using this script.

        ``b`` supplies the inserted / substituted tokens (the script only
        stores indices).
        """
        out = []
        for s in self.steps:
            if s.op == KEEP:
                out.append(a[s.i])
            elif s.op in (SUB, INS):
                out.append(b[s.j])
        return out


def edit_distance(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    """Levenshtein distance between two token sequences."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ta in enumerate(a, 1):
        cur = [i]
        for j, tb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ta != tb)))
        prev = cur
    return prev[-1]


def bounded_edit_distance(a: Sequence, b: Sequence, max_dist: int) -> Optional[int]:
    """Edit distance restricted to a diagonal band of width ``max_dist``.

    Returns the exact distance when it is ``<= max_dist`` and ``None``
    otherwise. Rows are abandoned as soon as every cell in the band exceeds
    the threshold.
    """
    if max_dist < 0:
        return None
    n, m = len(a), len(b)
    if abs(n - m) > max_dist:
        return None
    big = max_dist + 1
    prev = [j if j <= max_dist else big for j in range(m + 1)]
    for i in range(1, n + 1):
        lo = max(1, i - max_dist)
        hi = min(m, i + max_dist)
        cur = [big] * (m + 1)
        if i <= max_dist:
            cur[0] = i
        ta = a[i - 1]
        row_min = cur[0]
        for j in range(lo, hi + 1):
            v = prev[j - 1] + (ta != b[j - 1])
            if prev[j] + 1 < v:
                v = prev[j] + 1
            if cur[j - 1] + 1 < v:
                v = cur[j - 1] + 1
            if v > big:
                v = big
            cur[j] = v
            if v < row_min:
                row_min = v
        if row_min > max_dist:
            return None
        prev = cur
    d = prev[m]
    return d if d <= max_dist else None


def _suffix_table(a: Sequence, b: Sequence) -> list:
    # d[i][j] = distance between a[i:] and b[j:]
    n, m = len(a), len(b)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n, -1, -1):
        row = d[i]
        for j in range(m, -1, -1):
            if i == n:
                row[j] = m - j
            elif j == m:
                row[j] = n - i
            else:
                nxt = d[i + 1]
                row[j] = min(nxt[j + 1] + (a[i] != b[j]), nxt[j] + 1, row[j + 1] + 1)
    return d


def edit_script(a: Sequence, b: Sequence) -> EditScript:
    """Minimal alignment of ``a`` onto ``b``.

    The script is read left to right; at every position the first optimal
    move in the order KEEP, SUB, DEL, INS is taken, so early tokens are
    matched as soon as an optimal alignment allows it.
    """
    d = _suffix_table(a, b)
    n, m = len(a), len(b)
    i = j = 0
    steps = []
    while i < n or j < m:
        here = d[i][j]
        if i < n and j < m and a[i] == b[j] and here == d[i + 1][j + 1]:
            steps.append(Step(KEEP, i, j))
            i += 1
            j += 1
        elif i < n and j < m and here == d[i + 1][j + 1] + 1:
            steps.append(Step(SUB, i, j))
            i += 1
            j += 1
        elif i < n and here == d[i + 1][j] + 1:
            steps.append(Step(DEL, i, None))
            i += 1
        else:
            steps.append(Step(INS, None, j))
            j += 1
    return EditScript(tuple(steps), d[0][0])


def similarity(x: Sequence, x_sim: Sequence) -> float:
    """Fuzzy-match score ``1 - ED(x, x_sim) / max(|x|, |x_sim|)``."""
    longest = max(len(x), len(x_sim))
    if longest == 0:
        raise UndefinedInputError("similarity is undefined for two empty sequences")
    return 1.0 - edit_distance(x, x_sim) / longest


def classify_edit_ops(init: Sequence, ref: Sequence) -> frozenset:
    """Set of edit kinds ({"ins", "sub", "del"}) needed to turn init into ref."""
    kinds = set()
    for s in edit_script(init, ref).steps:
        if s.op == INS:
            kinds.add("ins")
        elif s.op == DEL:
            kinds.add("del")
        elif s.op == SUB:
            kinds.add("sub")
    return frozenset(kinds)


def opclass_label(ops: frozenset) -> str:
    if not ops:
        return "="
    names = [name for key, name in (("ins", "Ins"), ("sub", "Sub"), ("del", "Del")) if key in ops]
    return "+".join(names)


def bucket_of(delta: int) -> str:
    if delta < 0:
        raise ValueError(f"edit distance must be non-negative, got {delta}")
    if delta <= 7:
        return str(delta)
    if delta <= 10:
        return "8-10"
    return ">10"


def is_subsequence(short: Sequence, long: Sequence) -> bool:
    it = iter(long)
    return all(any(tok == other for other in it) for tok in short)
