"""On-disk formats: parallel text, triplet TSV and versioned artifacts.

Corpora are UTF-8, one sentence per line, tokens separated by single
spaces. Toolkit-written artifacts start with a ``#bisync <kind> v<N>``
header line (TSV) or carry ``format``/``version`` keys (JSON) and are
refused when the kind or version does not match.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

from bisync.synth import Triplet
from bisync.tags import EditTagSet

FORMAT_VERSION = 1
TRIPLET_COLUMNS = ("src", "init", "ref", "tags", "method")


class FormatError(ValueError):
    """An input file does not follow the expected layout or version."""


def tokenize(line: str) -> list:
    return line.split()


def detokenize(tokens: Sequence[str]) -> str:
    return " ".join(tokens)


def read_lines(path) -> list:
    with open(path, encoding="utf-8") as f:
        return [tokenize(line) for line in f.read().splitlines()]


def write_lines(path, sentences: Iterable[Sequence[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for sent in sentences:
            f.write(detokenize(sent) + "\n")


def read_parallel(src_path, tgt_path) -> list:
    src, tgt = read_lines(src_path), read_lines(tgt_path)
    if len(src) != len(tgt):
        raise FormatError(f"{src_path} has {len(src)} lines but {tgt_path} has {len(tgt)}")
    return list(zip(src, tgt))


def write_parallel(src_path, tgt_path, pairs) -> None:
    pairs = list(pairs)
    write_lines(src_path, [s for s, _ in pairs])
    write_lines(tgt_path, [t for _, t in pairs])


def parallel_paths(prefix) -> tuple:
    """``corpus/train`` -> (``corpus/train.src``, ``corpus/train.tgt``)."""
    prefix = Path(prefix)
    if prefix.is_dir():
        prefix = prefix / "corpus"
    return prefix.with_name(prefix.name + ".src"), prefix.with_name(prefix.name + ".tgt")


def header(kind: str) -> str:
    return f"#bisync {kind} v{FORMAT_VERSION}"


def check_header(line: str, kind: str, path="<input>") -> None:
    expected = header(kind)
    if line.rstrip("\n") != expected:
        raise FormatError(f"{path}: expected header {expected!r}, found {line.strip()!r}")


def write_triplets(path, triplets: Iterable[Triplet]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(header("triplets") + "\n")
        f.write("\t".join(TRIPLET_COLUMNS) + "\n")
        for t in triplets:
            tags = t.tags.code() if t.tags is not None else ""
            f.write("\t".join([detokenize(t.src), detokenize(t.init), detokenize(t.ref), tags, t.method]) + "\n")


def read_triplets(path) -> list:
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty file")
    check_header(lines[0], "triplets", path)
    if len(lines) < 2 or tuple(lines[1].split("\t")) != TRIPLET_COLUMNS:
        raise FormatError(f"{path}: missing column header")
    out = []
    for lineno, line in enumerate(lines[2:], 3):
        cols = line.split("\t")
        if len(cols) != 5:
            raise FormatError(f"{path}:{lineno}: expected 5 columns, got {len(cols)}")
        src, init, ref, tags, method = cols
        try:
            out.append(
                Triplet(
                    tokenize(src),
                    tokenize(init),
                    tokenize(ref),
                    EditTagSet.from_code(tags) if tags else None,
                    method,
                )
            )
        except ValueError as err:
            raise FormatError(f"{path}:{lineno}: {err}") from None
    return out


def dump_json(path, kind: str, payload: dict) -> None:
    body = {"format": f"bisync-{kind}", "version": FORMAT_VERSION, **payload}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(body, f, ensure_ascii=False, sort_keys=True, indent=1)
        f.write("\n")


def load_json(path, kind: str) -> dict:
    with open(path, encoding="utf-8") as f:
        try:
            body = json.load(f)
        except json.JSONDecodeError as err:
            raise FormatError(f"{path}: {err}") from None
    if body.get("format") != f"bisync-{kind}" or body.get("version") != FORMAT_VERSION:
        raise FormatError(
            f"{path}: expected bisync-{kind} v{FORMAT_VERSION}, "
            f"found {body.get('format')} v{body.get('version')}"
        )
    return body


def read_jsonl(path) -> list:
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def write_jsonl(path, records) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
