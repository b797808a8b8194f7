"""Command-line entry point: ``bisync <command> ...``.

Exit status is 0 on success, 1 for usage errors, 2 for data errors (missing
or malformed files, schema violations, out-of-vocabulary tokens) and 3 for
anything else. Errors are printed to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from bisync import __version__

logger = logging.getLogger("bisync")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _threads(value):
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("--threads must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bisync", description="Bilingual synchronization toolkit.")
    p.add_argument("--version", action="version", version=f"bisync {__version__}")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--seed", type=int, help="global seed (default 0)")
    p.add_argument("--threads", type=_threads, help="worker threads (default: $BISYNC_THREADS or 1)")
    p.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("toygen", help="emit a synthetic toy parallel corpus")
    g.add_argument("--out", required=True, help="output prefix; writes PREFIX.src and PREFIX.tgt")
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--min-len", type=int)
    g.add_argument("--max-len", type=int)
    g.add_argument("--vocab-size", type=int)
    g.add_argument("--noise-eps", type=float)
    g.add_argument("--corpus-seed", type=int, help="sentence sampling seed (default: --seed)")
    g.add_argument("--distinct", action="store_true", help="no repeated tokens within a sentence")

    s = sub.add_parser("synth", help="build editing triplets from a parallel corpus")
    s.add_argument("--in", dest="inp", required=True, help="parallel corpus prefix or directory")
    s.add_argument("--out", required=True, help="output triplet TSV")
    s.add_argument("--translator", choices=["toy", "model"], default="toy")
    s.add_argument("--back-model", help="target-to-source AR checkpoint (translator=model)")
    s.add_argument("--fwd-model", help="source-to-target AR checkpoint (translator=model)")
    s.add_argument("--method", help="edit every pair with this method instead of mixing")

    t = sub.add_parser("tm", help="translation-memory operations")
    tsub = t.add_subparsers(dest="tm_command", parser_class=_Parser)
    tb = tsub.add_parser("build", help="index a parallel corpus")
    tb.add_argument("--in", dest="inp", required=True)
    tb.add_argument("--out", required=True)
    tb.add_argument("--q", type=int)
    tq = tsub.add_parser("query", help="retrieve fuzzy matches for source sentences")
    tq.add_argument("--index", required=True)
    tq.add_argument("--in", dest="inp", required=True, help="one tokenized query per line")
    tq.add_argument("--out", required=True, help="JSONL output")
    tq.add_argument("--k", type=int)
    tq.add_argument("--theta", type=float)
    tq.add_argument("--keep-exact", action="store_true")
    tf = tsub.add_parser("ft", help="assemble fine-tuning triplets from retrieved matches")
    tf.add_argument("--index", required=True)
    tf.add_argument("--in", dest="inp", required=True, help="parallel corpus prefix")
    tf.add_argument("--out", required=True)
    tf.add_argument("--scheme", choices=["similar", "related"], default="similar")
    tf.add_argument("--test", action="store_true", help="keep only the best match per sentence")
    tf.add_argument("--theta", type=float, help="similarity threshold (default: the index's)")

    tr = sub.add_parser("train", help="train an Edit-MT (ar) or Edit-LevT (levt) model")
    tr.add_argument("--arch", choices=["ar", "levt"], required=True)
    tr.add_argument("--in", dest="inp", required=True, help="triplet TSV or parallel corpus prefix")
    tr.add_argument("--out", required=True, help="checkpoint path (.npz)")
    tr.add_argument("--init", help="continue from this checkpoint")
    tr.add_argument("--preset", choices=["tm", "clte"], help="fine-tuning recipe (needs --init)")
    tr.add_argument("--epochs", type=int)
    tr.add_argument("--lr", type=float)
    tr.add_argument("--batch-tokens", type=int)
    tr.add_argument("--embed-dim", type=int)
    tr.add_argument("--layers", type=int)
    tr.add_argument("--p", type=float, help="levt: probability of starting from the given init")

    sy = sub.add_parser("sync", help="edit initial translations with a trained model")
    sy.add_argument("--arch", choices=["ar", "levt"], default="ar")
    sy.add_argument("--model", required=True)
    sy.add_argument("--in", dest="inp", required=True, help="JSONL records {src, init, mode?, tags?} or triplet TSV")
    sy.add_argument("--out", required=True, help="JSONL output {tags, text}")
    sy.add_argument("--mode", choices=["free", "forced", "classify"], default="free")
    sy.add_argument("--beam", type=int, default=1)
    sy.add_argument("--max-rounds", type=int)

    ev = sub.add_parser("eval", help="score hypotheses, stratified by edit distance or edit class")
    ev.add_argument("--hyp", required=True, help="sync JSONL output or one hypothesis per line")
    ev.add_argument("--triplets", required=True, help="triplet TSV providing init and ref")
    ev.add_argument("--strata", choices=["bucket", "opclass"])
    ev.add_argument("--metric", choices=["bleu", "ter"])
    ev.add_argument("--out", help="write the report here (.tsv, .json or aligned text)")
    ev.add_argument("--system", default="system")

    cl = sub.add_parser("clean", help="filter or fix a noisy parallel corpus")
    cl.add_argument("--policy", choices=["filter", "fix", "filter_and_fix"], required=True)
    cl.add_argument("--model", required=True, help="Edit-MT checkpoint used to classify")
    cl.add_argument("--fix-model", help="checkpoint used to fix (default: --model)")
    cl.add_argument("--in", dest="inp", required=True, help="parallel corpus prefix")
    cl.add_argument("--out", required=True, help="output prefix")
    cl.add_argument("--report", help="JSON report path (default: OUT.report.json)")
    cl.add_argument("--beam", type=int, default=1)
    return p


# --------------------------------------------------------------------------- helpers


def _need(path):
    if not Path(path).exists():
        raise DataError(f"no such file: {path}")
    return path


def _read_parallel(prefix):
    from bisync.formats import parallel_paths, read_parallel

    src, tgt = parallel_paths(prefix)
    return read_parallel(_need(src), _need(tgt))


def _write_json(path, data):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, ensure_ascii=False, indent=1, sort_keys=True)
        f.write("\n")


def _load_ckpt(path, objective=None):
    from bisync.seqmodel import Checkpoint

    try:
        ckpt = Checkpoint.load(_need(path))
    except (OSError, KeyError, ValueError) as err:
        raise DataError(f"{path}: cannot read checkpoint ({err})") from None
    if objective and ckpt.objective != objective:
        raise DataError(f"{path}: expected a {objective} checkpoint, found {ckpt.objective}")
    return ckpt


# --------------------------------------------------------------------------- commands


def cmd_toygen(args, run):
    from bisync.formats import parallel_paths, write_parallel
    from bisync.toytrans import make_toy_corpus

    toy = run.section("toy")
    spec = toy.spec(run.seed)
    lo = args.min_len if args.min_len is not None else toy.min_len
    hi = args.max_len if args.max_len is not None else toy.max_len
    seed = args.corpus_seed if args.corpus_seed is not None else run.seed
    pairs = make_toy_corpus(spec, args.n, (lo, hi), seed=seed, distinct=args.distinct)
    src, tgt = parallel_paths(args.out)
    Path(src).parent.mkdir(parents=True, exist_ok=True)
    write_parallel(src, tgt, pairs)
    return {"pairs": len(pairs), "src": str(src), "tgt": str(tgt)}


def _translators(args, run):
    if args.translator == "toy":
        from bisync.toytrans import BACK, FWD, ToyTranslator

        spec = run.section("toy").spec(run.seed)
        return ToyTranslator(spec, BACK), ToyTranslator(spec, FWD)
    from bisync.seqmodel import ModelTranslator

    if not args.back_model or not args.fwd_model:
        raise UsageError("--translator model needs --back-model and --fwd-model")
    return ModelTranslator(_load_ckpt(args.back_model, "ar")), ModelTranslator(_load_ckpt(args.fwd_model, "ar"))


def cmd_synth(args, run):
    from bisync.formats import write_triplets
    from bisync.synth import NgramProposer, build_editing_corpus, build_method_set

    pairs = _read_parallel(args.inp)
    back, fwd = _translators(args, run)
    proposer = NgramProposer([t for _, t in pairs])
    cfg = run.section("synth")
    if args.method:
        triplets = build_method_set(pairs, args.method, back, fwd, proposer, proposer, cfg)
        stats = {"method": args.method, "triplets": len(triplets)}
    else:
        triplets, report = build_editing_corpus(pairs, back, fwd, proposer, proposer, cfg, threads=run.threads)
        stats = {
            "triplets": len(triplets),
            "methods": dict(sorted(report.methods.items())),
            "short_fallback": report.short_fallback,
            "dropped": report.dropped,
        }
    write_triplets(args.out, triplets)
    return stats


def cmd_tm(args, run):
    from bisync.formats import read_lines, write_jsonl, write_triplets
    from bisync.tm import TmIndex, build_index, make_ft_corpus, retrieve

    if args.tm_command is None:
        raise UsageError("tm needs a subcommand: build, query or ft")
    cfg = run.section("tm")
    if args.tm_command == "build":
        index = build_index(_read_parallel(args.inp), cfg)
        index.save(args.out)
        return {"entries": len(index)}
    index = TmIndex.load(_need(args.index))
    if args.tm_command == "query":
        records = []
        for q in read_lines(_need(args.inp)):
            matches = retrieve(index, q, k=args.k, theta=args.theta, exclude_exact=not args.keep_exact)
            records.append(
                {
                    "query": " ".join(q),
                    "matches": [{"src": " ".join(m.src), "tgt": " ".join(m.tgt), "score": m.score} for m in matches],
                }
            )
        write_jsonl(args.out, records)
        return {"queries": len(records), "with_match": sum(bool(r["matches"]) for r in records)}
    if args.theta is not None:
        from dataclasses import replace

        index.cfg = replace(index.cfg, theta=args.theta)
    triplets = make_ft_corpus(index, _read_parallel(args.inp), args.scheme, training=not args.test)
    write_triplets(args.out, triplets)
    return {"triplets": len(triplets)}


def _training_rows(path):
    """Triplets from a TSV file, or parallel rows from a corpus prefix."""
    from bisync.formats import read_triplets
    from bisync.synth import Triplet

    if Path(path).is_file():
        return read_triplets(path)
    return [Triplet(s, (), t, None, "parallel") for s, t in _read_parallel(path)]


def cmd_train(args, run):
    from dataclasses import replace

    from bisync.editor_ar import mix_training_data, training_pair
    from bisync.editor_levt import train_levt
    from bisync.seqmodel import fine_tune, train

    rows = _training_rows(args.inp)
    if not rows:
        raise DataError(f"{args.inp}: no training rows")
    mcfg = run.section("model")
    init = _load_ckpt(args.init, args.arch) if args.init else None
    if args.preset and init is None:
        raise UsageError("--preset needs --init")
    if args.arch == "ar":
        editing = [r for r in rows if r.tags is not None]
        parallel = [r for r in rows if r.tags is None]
        if editing and parallel:
            data = mix_training_data(editing, parallel, seed=run.seed)
        else:
            data = [training_pair(r) for r in rows]
        if args.preset:
            explicit = {k: v for k, v in (("epochs", args.epochs), ("lr", args.lr)) if v is not None}
            ckpt = fine_tune(init, data, args.preset, **explicit)
        else:
            ckpt = train(data, mcfg, "ar", init=init, threads=run.threads)
    else:
        lcfg = run.section("levt")
        if args.preset:
            from bisync.seqmodel import FT_PRESETS

            recipe = dict(FT_PRESETS[args.preset]["levt"])
            recipe.update({k: v for k, v in (("epochs", args.epochs), ("lr", args.lr)) if v is not None})
            mcfg = replace(init.config, warmup=1, **recipe)
        ckpt = train_levt(rows, mcfg, lcfg, init=init, threads=run.threads)
    ckpt.save(args.out)
    return {"objective": ckpt.objective, "steps": ckpt.step, "loss": ckpt.history}


def _sync_records(path):
    from bisync.formats import read_jsonl, read_triplets, tokenize

    if str(path).endswith(".tsv"):
        return [
            {"src": list(t.src), "init": list(t.init), "tags": t.tags.code() if t.tags else None} for t in read_triplets(path)
        ]
    out = []
    for k, rec in enumerate(read_jsonl(path), 1):
        if "src" not in rec:
            raise DataError(f"{path}:{k}: record has no 'src'")
        tags = rec.get("tags")
        out.append({"src": tokenize(rec["src"]), "init": tokenize(rec.get("init", "")), "mode": rec.get("mode"), "tags": tags})
    return out


def cmd_sync(args, run):
    from bisync.formats import detokenize, write_jsonl
    from bisync.tags import EditTagSet

    records = _sync_records(_need(args.inp))
    results = []
    if args.arch == "levt":
        from bisync.editor_levt import refine

        ckpt = _load_ckpt(args.model, "levt")
        rounds = args.max_rounds if args.max_rounds is not None else run.section("levt").max_rounds
        for rec in records:
            results.append({"text": detokenize(refine(ckpt, rec["src"], rec["init"], max_rounds=rounds))})
    else:
        from bisync.editor_ar import DecodeMode, ProtocolError, sync_batch

        ckpt = _load_ckpt(args.model, "ar")
        groups = {}
        for k, rec in enumerate(records):
            kind = rec.get("mode") or args.mode
            if kind == "forced":
                if not rec.get("tags"):
                    raise DataError(f"record {k + 1}: forced mode needs tags")
                tags = rec["tags"]
                tags = EditTagSet.from_code(tags) if len(tags) == 3 else EditTagSet.from_tokens(tags.split())
                mode = DecodeMode.forced(tags)
            else:
                mode = DecodeMode(kind)
            groups.setdefault(mode, []).append(k)
        results = [None] * len(records)
        failed = 0
        for mode, idx in groups.items():
            items = [(records[k]["src"], records[k]["init"]) for k in idx]
            try:
                outs = sync_batch(ckpt, items, mode, args.beam)
            except ProtocolError:
                # retry one by one so a single malformed output does not sink the batch
                outs = []
                for item in items:
                    try:
                        outs.append(sync_batch(ckpt, [item], mode, args.beam)[0])
                    except ProtocolError as err:
                        outs.append(err)
            for k, out in zip(idx, outs):
                if isinstance(out, ProtocolError):
                    failed += 1
                    results[k] = {"tags": None, "text": "", "error": str(out)}
                else:
                    tags, text = out
                    results[k] = {"tags": tags.code() if tags is not None else None, "text": detokenize(text)}
        write_jsonl(args.out, results)
        return {"records": len(results), "protocol_errors": failed}
    write_jsonl(args.out, results)
    return {"records": len(results)}


def _read_hyps(path):
    from bisync.formats import read_jsonl, read_lines, tokenize

    if str(path).endswith(".jsonl"):
        return [tokenize(r["text"]) for r in read_jsonl(path)]
    return read_lines(path)


def cmd_eval(args, run):
    from bisync.evalx import stratified_report
    from bisync.formats import read_triplets

    ecfg = run.section("eval")
    hyps = _read_hyps(_need(args.hyp))
    trips = read_triplets(_need(args.triplets))
    if len(hyps) != len(trips):
        raise DataError(f"{len(hyps)} hypotheses for {len(trips)} triplets")
    report = stratified_report(
        hyps,
        [t.ref for t in trips],
        [t.init for t in trips],
        args.strata or ecfg.strata,
        args.metric or ecfg.metric,
        system=args.system,
    )
    if args.out:
        if args.out.endswith(".json"):
            _write_json(args.out, report.to_json())
        elif args.out.endswith(".tsv"):
            Path(args.out).write_text(report.to_tsv(), encoding="utf-8")
        else:
            Path(args.out).write_text(report.to_table(), encoding="utf-8")
    else:
        sys.stdout.write(report.to_table())
    return {"overall": report.overall, "copy": report.copy_overall, "n": report.n_total}


def cmd_clean(args, run):
    from bisync.clean import run_cleaning
    from bisync.formats import parallel_paths, write_parallel

    clf = _load_ckpt(args.model, "ar")
    fixer = _load_ckpt(args.fix_model, "ar") if args.fix_model else clf
    pairs = _read_parallel(args.inp)
    cleaned, report, _ = run_cleaning(clf, fixer, pairs, args.policy, beam=args.beam)
    src, tgt = parallel_paths(args.out)
    Path(src).parent.mkdir(parents=True, exist_ok=True)
    write_parallel(src, tgt, cleaned)
    _write_json(args.report or f"{args.out}.report.json", report.to_json())
    return report.to_json()


COMMANDS = {
    "toygen": cmd_toygen,
    "synth": cmd_synth,
    "tm": cmd_tm,
    "train": cmd_train,
    "sync": cmd_sync,
    "eval": cmd_eval,
    "clean": cmd_clean,
}


def _overrides(args) -> dict:
    model = {
        "epochs": getattr(args, "epochs", None),
        "lr": getattr(args, "lr", None),
        "batch_tokens": getattr(args, "batch_tokens", None),
        "embed_dim": getattr(args, "embed_dim", None),
        "layers": getattr(args, "layers", None),
    }
    toy = {
        "vocab_size": getattr(args, "vocab_size", None),
        "noise_eps": getattr(args, "noise_eps", None),
    }
    tm = {"q": getattr(args, "q", None)} if args.command == "tm" else {}
    return {
        "seed": args.seed,
        "threads": args.threads,
        "model": model,
        "toy": toy,
        "tm": tm,
        "levt": {"p": getattr(args, "p", None)},
    }


def _fail(code, kind, message):
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit": code}) + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("missing command; see bisync --help")
    except UsageError as err:
        return _fail(EXIT_USAGE, "usage", str(err))
    except SystemExit as exit_:  # --help / --version
        return int(exit_.code or 0)

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logger.addHandler(handler)
    logger.setLevel(args.log_level)
    try:
        return _dispatch(args)
    finally:
        logger.removeHandler(handler)


def _dispatch(args) -> int:
    from bisync.config import ConfigError, load_file, resolve
    from bisync.formats import FormatError
    from bisync.seqmodel import VocabularyError
    from bisync.tags import TagParseError
    from bisync.toytrans import OutOfVocabularyError

    try:
        if args.threads is None and os.environ.get("BISYNC_THREADS"):
            try:
                args.threads = _threads(os.environ["BISYNC_THREADS"])
            except (ValueError, argparse.ArgumentTypeError):
                raise UsageError(f"bad BISYNC_THREADS value {os.environ['BISYNC_THREADS']!r}") from None
        file_data = load_file(_need(args.config)) if args.config else {}
        run = resolve(file_data, _overrides(args))
        if run.threads > 1:
            import torch

            torch.set_num_threads(run.threads)
        logger.info("resolved config %s", json.dumps(run.to_json(), sort_keys=True))
        stats = COMMANDS[args.command](args, run)
    except UsageError as err:
        return _fail(EXIT_USAGE, "usage", str(err))
    except (DataError, ConfigError, FormatError, VocabularyError, OutOfVocabularyError, TagParseError) as err:
        return _fail(EXIT_DATA, "data", str(err))
    except (FileNotFoundError, IsADirectoryError, UnicodeDecodeError, json.JSONDecodeError) as err:
        return _fail(EXIT_DATA, "data", str(err))
    except Exception as err:  # noqa: BLE001
        logger.debug("internal error", exc_info=True)
        return _fail(EXIT_INTERNAL, "internal", f"{type(err).__name__}: {err}")
    # eval without --out already printed its table
    if stats is not None and not (args.command == "eval" and not args.out):
        sys.stdout.write(json.dumps(stats, sort_keys=True) + "\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
