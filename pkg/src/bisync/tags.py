"""The three binary edit tags prefixed to Edit-MT outputs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

OPS = ("ins", "sub", "del")
TAG_TOKENS = tuple(tok for op in OPS for tok in (f"[{op}]", f"[!{op}]"))


class TagParseError(ValueError):
    def __init__(self, message, position):
        super().__init__(f"{message} (position {position})")
        self.position = position


@dataclass(frozen=True)
class EditTagSet:
    ins: bool = False
    sub: bool = False
    del_: bool = False

    @classmethod
    def from_ops(cls, ops) -> "EditTagSet":
        ops = set(ops)
        return cls("ins" in ops, "sub" in ops, "del" in ops)

    @classmethod
    def all(cls) -> list:
        return [cls(bool(i & 4), bool(i & 2), bool(i & 1)) for i in range(8)]

    def flags(self) -> tuple:
        return (self.ins, self.sub, self.del_)

    @property
    def is_copy(self) -> bool:
        return not any(self.flags())

    def positives(self) -> list:
        return [op for op, on in zip(OPS, self.flags()) if on]

    def tokens(self) -> list:
        return [f"[{op}]" if on else f"[!{op}]" for op, on in zip(OPS, self.flags())]

    def code(self) -> str:
        """TSV rendering, e.g. ``"100"`` for insertion only."""
        return "".join("1" if on else "0" for on in self.flags())

    @classmethod
    def from_code(cls, code: str) -> "EditTagSet":
        if len(code) != 3 or any(c not in "01" for c in code):
            raise TagParseError(f"bad tag code {code!r}", 0)
        return cls(*(c == "1" for c in code))

    @classmethod
    def from_tokens(cls, tokens: Sequence[str]) -> "EditTagSet":
        """Parse the three leading tag tokens of ``tokens``."""
        flags = []
        for pos, op in enumerate(OPS):
            if pos >= len(tokens):
                raise TagParseError(f"missing [{op}] tag", pos)
            tok = tokens[pos]
            if tok == f"[{op}]":
                flags.append(True)
            elif tok == f"[!{op}]":
                flags.append(False)
            else:
                raise TagParseError(f"expected [{op}] or [!{op}], got {tok!r}", pos)
        return cls(*flags)

    def __str__(self):
        return " ".join(self.tokens())


COPY_TAGS = EditTagSet(False, False, False)
