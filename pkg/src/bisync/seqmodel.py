"""A small Transformer encoder-decoder with an autoregressive head and LevT heads.

One module class serves both objectives. With ``objective="ar"`` the decoder
is causal and trained with label-smoothed token cross-entropy. With
``objective="levt"`` the decoder reads the whole hypothesis and three heads
are trained: keep/delete per token, placeholder count per slot and token
fill per placeholder.

Checkpoints are ``.npz`` archives holding every parameter tensor under its
module name plus a ``__meta__`` entry with the JSON-encoded config, the
objective, the step counter and the loss history.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

from bisync.editor_levt import PLH, pass_targets
from bisync.tags import TAG_TOKENS

logger = logging.getLogger(__name__)

PAD, BOS, EOS, SEP, GAP = "[pad]", "[bos]", "[eos]", "[sep]", "[gap]"
SPECIALS = (PAD, BOS, EOS, SEP, GAP, PLH)
RESERVED = SPECIALS + TAG_TOKENS
OBJECTIVES = ("ar", "levt")
CHECKPOINT_VERSION = 1

FT_PRESETS = {
    "clte": {"ar": {"epochs": 5, "lr": 8e-5}, "levt": {"epochs": 5, "lr": 8e-5}},
    "tm": {"ar": {"epochs": 1, "lr": 8e-5}, "levt": {"epochs": 1, "lr": 9e-5}},
}


class VocabularyError(ValueError):
    def __init__(self, token):
        super().__init__(f"token {token!r} is not in the model vocabulary")
        self.token = token


class Vocab:
    """Reserved symbols first, then corpus words in sorted order."""

    def __init__(self, words: Iterable[str] = ()):
        extra = sorted(set(words) - set(RESERVED))
        self.tokens = list(RESERVED) + extra
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        self.word_ids = np.arange(len(RESERVED), len(self.tokens))

    @classmethod
    def build(cls, sentences: Iterable[Sequence[str]]) -> "Vocab":
        return cls(tok for sent in sentences for tok in sent)

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, tok):
        return tok in self.index

    def encode(self, tokens: Sequence[str]) -> list:
        try:
            return [self.index[t] for t in tokens]
        except KeyError as err:
            raise VocabularyError(err.args[0]) from None

    def decode(self, ids: Iterable[int]) -> list:
        return [self.tokens[i] for i in ids]


@dataclass(frozen=True)
class ModelConfig:
    vocab: tuple = ()
    embed_dim: int = 64
    layers: int = 2
    heads: int = 4
    ffn_dim: int = 128
    max_len: int = 64
    dropout: float = 0.1
    lr: float = 1e-3
    warmup: int = 400
    batch_tokens: int = 2048
    epochs: int = 10
    label_smoothing: float = 0.1
    k_max: int = 8
    average_last: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "vocab", tuple(self.vocab))
        if self.embed_dim % self.heads:
            raise ValueError("embed_dim must be divisible by heads")
        if self.epochs < 0 or self.average_last < 1:
            raise ValueError("epochs >= 0 and average_last >= 1 required")

    def to_json(self) -> dict:
        return {**asdict(self), "vocab": list(self.vocab)}

    @classmethod
    def from_json(cls, data: dict) -> "ModelConfig":
        return cls(**data)


def _sinusoids(n: int, d: int) -> torch.Tensor:
    pos = torch.arange(n, dtype=torch.float64)[:, None]
    rate = torch.exp(-math.log(10000.0) * torch.arange(0, d, 2, dtype=torch.float64) / d)
    table = torch.zeros(n, d, dtype=torch.float64)
    table[:, 0::2] = torch.sin(pos * rate)
    table[:, 1::2] = torch.cos(pos * rate[: d // 2])
    return table.float()


class Seq2Seq(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        d = cfg.embed_dim
        self.scale = math.sqrt(d)
        self.embed = nn.Embedding(len(cfg.vocab), d, padding_idx=0)
        nn.init.normal_(self.embed.weight, std=d**-0.5)
        with torch.no_grad():
            self.embed.weight[0].zero_()
        self.register_buffer("positions", _sinusoids(2 * cfg.max_len + 8, d), persistent=False)
        self.drop = nn.Dropout(cfg.dropout)

        def enc_layer():
            return nn.TransformerEncoderLayer(
                d, cfg.heads, cfg.ffn_dim, cfg.dropout, activation="gelu", batch_first=True, norm_first=True
            )

        def dec_layer():
            return nn.TransformerDecoderLayer(
                d, cfg.heads, cfg.ffn_dim, cfg.dropout, activation="gelu", batch_first=True, norm_first=True
            )

        self.encoder = nn.TransformerEncoder(
            enc_layer(), cfg.layers, norm=nn.LayerNorm(d), enable_nested_tensor=False
        )
        self.decoder = nn.TransformerDecoder(dec_layer(), cfg.layers, norm=nn.LayerNorm(d))
        self.del_head = nn.Linear(d, 2)
        self.plh_head = nn.Linear(2 * d, cfg.k_max + 1)

    def _embed(self, ids):
        x = self.embed(ids) * self.scale + self.positions[: ids.shape[1]].to(self.embed.weight.dtype)
        return self.drop(x)

    def encode(self, src):
        mask = src.eq(0)
        return self.encoder(self._embed(src), src_key_padding_mask=mask), mask

    def decode(self, tgt, memory, memory_mask, causal: bool):
        L = tgt.shape[1]
        attn = torch.triu(torch.ones(L, L, dtype=torch.bool), 1) if causal else None
        return self.decoder(
            self._embed(tgt),
            memory,
            tgt_mask=attn,
            tgt_key_padding_mask=tgt.eq(0),
            memory_key_padding_mask=memory_mask,
            tgt_is_causal=causal,
        )

    def token_logits(self, states):
        return states @ self.embed.weight.t()

    def slot_logits(self, states):
        return self.plh_head(torch.cat([states[:, :-1], states[:, 1:]], dim=-1))


@dataclass
class Checkpoint:
    config: ModelConfig
    params: dict
    objective: str = "ar"
    step: int = 0
    history: list = field(default_factory=list)

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}")
        self._module = None
        self._vocab = None

    @property
    def vocab(self) -> Vocab:
        if self._vocab is None:
            self._vocab = Vocab(self.config.vocab)
            if self._vocab.tokens != list(self.config.vocab):
                raise ValueError("stored vocabulary is not in canonical order")
        return self._vocab

    def module(self) -> Seq2Seq:
        """Inference copy of the network (cached, eval mode)."""
        if self._module is None:
            self._module = build_module(self.config, self.params).eval()
        return self._module

    def meta(self) -> dict:
        return {
            "format": "bisync-checkpoint",
            "version": CHECKPOINT_VERSION,
            "config": self.config.to_json(),
            "objective": self.objective,
            "step": self.step,
            "history": self.history,
        }

    def save(self, path) -> None:
        meta = json.dumps(self.meta(), sort_keys=True)
        with open(path, "wb") as f:
            np.savez(f, __meta__=np.array(meta), **self.params)

    @classmethod
    def load(cls, path) -> "Checkpoint":
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["__meta__"]))
            params = {k: data[k].copy() for k in data.files if k != "__meta__"}
        if meta.get("format") != "bisync-checkpoint" or meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: not a version {CHECKPOINT_VERSION} bisync checkpoint")
        return cls(ModelConfig.from_json(meta["config"]), params, meta["objective"], meta["step"], meta["history"])


def build_module(cfg: ModelConfig, params: Optional[dict] = None) -> Seq2Seq:
    torch.manual_seed(cfg.seed)
    module = Seq2Seq(cfg)
    if params is not None:
        state = {k: torch.from_numpy(np.asarray(v)) for k, v in params.items()}
        module.load_state_dict(state)
    return module


def module_params(module: nn.Module) -> dict:
    return {k: v.detach().cpu().numpy().copy() for k, v in module.state_dict().items()}


def average_checkpoints(ckpts: Sequence[Checkpoint]) -> Checkpoint:
    if not ckpts:
        raise ValueError("nothing to average")
    first = ckpts[0]
    for c in ckpts[1:]:
        if c.config != first.config or c.objective != first.objective:
            raise ValueError("checkpoints have different configurations")
    params = {}
    for name, value in first.params.items():
        stacked = np.stack([c.params[name] for c in ckpts]).astype(np.float64)
        params[name] = stacked.mean(axis=0).astype(value.dtype)
    return Checkpoint(first.config, params, first.objective, max(c.step for c in ckpts), list(first.history))


# --------------------------------------------------------------------------- batches


def _pad(rows, value=0) -> torch.Tensor:
    width = max((len(r) for r in rows), default=0)
    out = torch.full((len(rows), max(width, 1)), value, dtype=torch.long)
    for i, r in enumerate(rows):
        out[i, : len(r)] = torch.tensor(r, dtype=torch.long)
    return out


def ar_batch(vocab: Vocab, items) -> dict:
    """``items`` are (input tokens, output tokens) pairs."""
    bos, eos = vocab.index[BOS], vocab.index[EOS]
    src = [vocab.encode(x) for x, _ in items]
    out = [vocab.encode(y) for _, y in items]
    return {
        "src": _pad(src),
        "tgt_in": _pad([[bos] + y for y in out]),
        "tgt_out": _pad([y + [eos] for y in out], -100),
    }


def levt_batch(vocab: Vocab, items, k_max: int) -> dict:
    """``items`` are (source, initial hypothesis, reference) triples."""
    bos, eos, plh = vocab.index[BOS], vocab.index[EOS], vocab.index[PLH]
    src, del_in, del_lab, ins_in, ins_lab, fill_in, fill_lab = [], [], [], [], [], [], []
    for x, h0, ref in items:
        dels, kept, counts, fills = pass_targets(list(h0), list(ref), k_max)
        src.append(vocab.encode(x))
        del_in.append([bos] + vocab.encode(h0) + [eos])
        del_lab.append([-100] + [int(d) for d in dels] + [-100])
        kept_ids = vocab.encode(kept)
        ins_in.append([bos] + kept_ids + [eos])
        ins_lab.append(counts)
        row, lab = [bos], [-100]
        fill_ids = iter(vocab.encode(fills))
        for slot, c in enumerate(counts):
            row += [plh] * c
            lab += [next(fill_ids) for _ in range(c)]
            if slot < len(kept_ids):
                row.append(kept_ids[slot])
                lab.append(-100)
        fill_in.append(row + [eos])
        fill_lab.append(lab + [-100])
    return {
        "src": _pad(src),
        "del_in": _pad(del_in),
        "del_lab": _pad(del_lab, -100),
        "ins_in": _pad(ins_in),
        "ins_lab": _pad(ins_lab, -100),
        "fill_in": _pad(fill_in),
        "fill_lab": _pad(fill_lab, -100),
    }


def _ce(logits, labels, smoothing=0.0):
    flat = labels.reshape(-1)
    if not bool((flat != -100).any()):
        return logits.sum() * 0.0
    return F.cross_entropy(
        logits.reshape(-1, logits.shape[-1]), flat, ignore_index=-100, label_smoothing=smoothing
    )


def batch_loss(module: Seq2Seq, batch: dict, objective: str, label_smoothing: float = 0.0):
    memory, mask = module.encode(batch["src"])
    if objective == "ar":
        states = module.decode(batch["tgt_in"], memory, mask, causal=True)
        return _ce(module.token_logits(states), batch["tgt_out"], label_smoothing)
    del_states = module.decode(batch["del_in"], memory, mask, causal=False)
    ins_states = module.decode(batch["ins_in"], memory, mask, causal=False)
    fill_states = module.decode(batch["fill_in"], memory, mask, causal=False)
    return (
        _ce(module.del_head(del_states), batch["del_lab"])
        + _ce(module.slot_logits(ins_states), batch["ins_lab"])
        + _ce(module.token_logits(fill_states), batch["fill_lab"])
    )


def _length(item) -> int:
    return sum(len(part) for part in item)


def _batches(items, batch_tokens: int, rng: np.random.Generator) -> list:
    order = rng.permutation(len(items))
    order = sorted(order, key=lambda i: _length(items[i]))
    batches, cur, widest = [], [], 0
    for i in order:
        width = _length(items[i]) + 2
        if cur and max(widest, width) * (len(cur) + 1) > batch_tokens:
            batches.append(cur)
            cur, widest = [], 0
        cur.append(i)
        widest = max(widest, width)
    if cur:
        batches.append(cur)
    return [batches[i] for i in rng.permutation(len(batches))]


def _make_batch(vocab, objective, items, k_max):
    return ar_batch(vocab, items) if objective == "ar" else levt_batch(vocab, items, k_max)


def _check_items(items, objective, max_len):
    width = 2 if objective == "ar" else 3
    for item in items:
        if len(item) != width:
            raise ValueError(f"{objective} training items have {width} fields, got {len(item)}")
        if any(len(part) > 2 * max_len + 4 for part in item):
            raise ValueError(f"sequence longer than the positional table (max_len={max_len})")


def evaluate_loss(ckpt: Checkpoint, corpus, batch_tokens: int = 4096) -> float:
    """Mean per-batch loss without dropout or label smoothing."""
    module = ckpt.module()
    rng = np.random.default_rng(0)
    total, n = 0.0, 0
    with torch.no_grad():
        for idx in _batches(corpus, batch_tokens, rng):
            batch = _make_batch(ckpt.vocab, ckpt.objective, [corpus[i] for i in idx], ckpt.config.k_max)
            total += float(batch_loss(module, batch, ckpt.objective)) * len(idx)
            n += len(idx)
    return total / n


def train(
    corpus,
    cfg: ModelConfig,
    objective: str = "ar",
    init: Optional[Checkpoint] = None,
    resample: Optional[Callable[[int], list]] = None,
    threads: Optional[int] = None,
) -> Checkpoint:
    """Train from scratch (or continue from ``init``) and return the final checkpoint.

    ``corpus`` holds (input, output) pairs for ``ar`` and (source, initial
    hypothesis, reference) triples for ``levt``. ``resample(epoch)`` may
    supply a fresh corpus every epoch, e.g. new noise draws.
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}")
    corpus = list(corpus)
    if not corpus:
        raise ValueError("empty training corpus")
    if threads:
        torch.set_num_threads(threads)
    if init is not None:
        cfg = replace(cfg, vocab=init.config.vocab)
    elif not cfg.vocab:
        cfg = replace(cfg, vocab=tuple(Vocab.build(part for item in corpus for part in item).tokens))
    vocab = Vocab(cfg.vocab)
    for item in corpus:
        for part in item:
            vocab.encode(part)
    _check_items(corpus, objective, cfg.max_len)

    module = build_module(cfg, init.params if init is not None else None)
    torch.manual_seed(cfg.seed)
    opt = torch.optim.Adam(module.parameters(), lr=cfg.lr, betas=(0.9, 0.98), eps=1e-9)
    warm = max(cfg.warmup, 1)
    sched = torch.optim.lr_scheduler.LambdaLR(opt, lambda s: min((s + 1) / warm, math.sqrt(warm / (s + 1))))
    rng = np.random.default_rng(cfg.seed)
    step = init.step if init is not None else 0

    probe = Checkpoint(cfg, module_params(module), objective)
    history = [evaluate_loss(probe, corpus[:2000])]
    logger.info("%s step 0 loss %.4f", objective, history[0])
    snapshots = []
    for epoch in range(cfg.epochs):
        items = corpus if resample is None or epoch == 0 else list(resample(epoch))
        if epoch and resample is not None:
            for item in items:
                for part in item:
                    vocab.encode(part)
        module.train()
        total, seen = 0.0, 0
        for idx in _batches(items, cfg.batch_tokens, rng):
            batch = _make_batch(vocab, objective, [items[i] for i in idx], cfg.k_max)
            loss = batch_loss(module, batch, objective, cfg.label_smoothing if objective == "ar" else 0.0)
            opt.zero_grad()
            loss.backward()
            opt.step()
            sched.step()
            step += 1
            total += float(loss.detach()) * len(idx)
            seen += len(idx)
        history.append(total / seen)
        logger.info("%s epoch %d loss %.4f", objective, epoch + 1, history[-1])
        if epoch >= cfg.epochs - cfg.average_last:
            snapshots.append(Checkpoint(cfg, module_params(module), objective, step))
    if not snapshots:
        return Checkpoint(cfg, module_params(module), objective, step, history)
    final = average_checkpoints(snapshots) if len(snapshots) > 1 else snapshots[0]
    final.history = history
    return final


def fine_tune(ckpt: Checkpoint, corpus, preset: str | dict = "tm", **overrides) -> Checkpoint:
    """Continue training ``ckpt`` with a named or explicit recipe."""
    recipe = dict(FT_PRESETS[preset][ckpt.objective]) if isinstance(preset, str) else dict(preset)
    recipe.update(overrides)
    recipe.setdefault("warmup", 1)
    cfg = replace(ckpt.config, **recipe)
    return train(corpus, cfg, ckpt.objective, init=ckpt)


# --------------------------------------------------------------------------- decoding


def _reserved_mask(vocab: Vocab, allow: Sequence[str] = ()) -> np.ndarray:
    """Boolean mask of ids that ordinary text may not contain."""
    mask = np.zeros(len(vocab), dtype=bool)
    mask[: len(RESERVED)] = True
    for tok in allow:
        mask[vocab.index[tok]] = False
    return mask


class ModelScorer:
    """``NextTokenScorer`` view of an AR checkpoint for the beam searches.

    ``banned(position)`` may return a boolean mask over the vocabulary of
    ids that are not allowed at that output position.
    """

    def __init__(self, ckpt: Checkpoint, banned: Optional[Callable[[int], np.ndarray]] = None):
        if ckpt.objective != "ar":
            raise ValueError("beam scoring needs an autoregressive checkpoint")
        self.ckpt = ckpt
        self.vocab = ckpt.vocab.tokens
        self.eos = EOS
        self.banned = banned
        self._base = np.zeros(len(self.vocab), dtype=bool)
        self._base[[ckpt.vocab.index[PAD], ckpt.vocab.index[BOS]]] = True
        self._cache = (None, None)

    def _memory(self, src):
        key = tuple(src)
        if self._cache[0] != key:
            ids = torch.tensor([self.ckpt.vocab.encode(src)], dtype=torch.long)
            self._cache = (key, self.ckpt.module().encode(ids))
        return self._cache[1]

    def log_probs(self, src, prefixes):
        module, vocab = self.ckpt.module(), self.ckpt.vocab
        with torch.no_grad():
            memory, mask = self._memory(src)
            bos = vocab.index[BOS]
            tgt = _pad([[bos] + vocab.encode(p) for p in prefixes])
            B = tgt.shape[0]
            states = module.decode(tgt, memory.expand(B, -1, -1), mask.expand(B, -1), causal=True)
            last = torch.tensor([len(p) for p in prefixes])
            logits = module.token_logits(states[torch.arange(B), last]).double().numpy()
        for r, p in enumerate(prefixes):
            ban = self._base if self.banned is None else self._base | self.banned(len(p))
            logits[r, ban] = -np.inf
        return logits - np.logaddexp.reduce(logits, axis=1, keepdims=True)


def greedy_decode(
    ckpt: Checkpoint,
    inputs: Sequence[Sequence[str]],
    forced_prefixes: Optional[Sequence[Sequence[str]]] = None,
    max_len: Optional[int] = None,
    banned: Optional[Callable[[int], np.ndarray]] = None,
    batch_size: int = 64,
) -> list:
    """Batched greedy decoding; outputs start with their forced prefix.

    ``max_len`` bounds the output length, prefix included.
    """
    if ckpt.objective != "ar":
        raise ValueError("greedy decoding needs an autoregressive checkpoint")
    module, vocab = ckpt.module(), ckpt.vocab
    prefixes = [list(p) for p in forced_prefixes] if forced_prefixes is not None else [[] for _ in inputs]
    if len(prefixes) != len(inputs):
        raise ValueError("one forced prefix per input required")
    limit = max_len or ckpt.config.max_len
    base = np.zeros(len(vocab), dtype=bool)
    base[[vocab.index[PAD], vocab.index[BOS]]] = True
    bos, eos = vocab.index[BOS], vocab.index[EOS]
    results = []
    for start in range(0, len(inputs), batch_size):
        chunk = list(range(start, min(start + batch_size, len(inputs))))
        pre = [vocab.encode(prefixes[i]) for i in chunk]
        with torch.no_grad():
            memory, mask = module.encode(_pad([vocab.encode(inputs[i]) for i in chunk]))
            seqs = [[bos] for _ in chunk]
            done = [False] * len(chunk)
            for pos in range(max(limit, max(len(p) for p in pre))):
                live = [r for r in range(len(chunk)) if not done[r]]
                if not live:
                    break
                tgt = _pad([seqs[r] for r in live])
                states = module.decode(tgt, memory[live], mask[live], causal=True)
                last = torch.tensor([len(seqs[r]) - 1 for r in live])
                logits = module.token_logits(states[torch.arange(len(live)), last]).numpy()
                ban = base if banned is None else base | banned(pos)
                logits[:, ban] = -np.inf
                for k, r in enumerate(live):
                    if pos < len(pre[r]):
                        tok = pre[r][pos]
                    elif pos >= limit:
                        tok = eos
                    else:
                        tok = int(np.argmax(logits[k]))
                    if tok == eos:
                        done[r] = True
                    else:
                        seqs[r].append(tok)
        results.extend(vocab.decode(s[1:]) for s in seqs)
    return results


def decode(
    ckpt: Checkpoint,
    tokens: Sequence[str],
    mode="greedy",
    forced_prefix: Sequence[str] = (),
    max_len: Optional[int] = None,
    banned: Optional[Callable[[int], np.ndarray]] = None,
) -> list:
    """Decode one input; ``mode`` is ``"greedy"``, ``"beam"`` (k=5) or a beam width."""
    for tok in forced_prefix:
        if tok not in ckpt.vocab:
            raise VocabularyError(tok)
    if mode == "greedy" or mode == 1:
        return greedy_decode(ckpt, [tokens], [forced_prefix], max_len, banned)[0]
    from bisync.lcd import beam_search

    width = 5 if mode == "beam" else int(mode)
    limit = max(max_len or ckpt.config.max_len, len(forced_prefix))
    return beam_search(ModelScorer(ckpt, banned), tokens, beam=width, max_len=limit, prefix=forced_prefix)


@dataclass
class LevtScores:
    deletion: np.ndarray  # (|h|, 2)
    placeholder: np.ndarray  # (|h| + 1, k_max + 1)
    fill: np.ndarray  # (number of [plh] tokens in h, vocab)


def _levt_states(ckpt, src, hyp_ids):
    module, vocab = ckpt.module(), ckpt.vocab
    memory, mask = module.encode(torch.tensor([vocab.encode(src)], dtype=torch.long))
    tgt = torch.tensor([[vocab.index[BOS]] + hyp_ids + [vocab.index[EOS]]], dtype=torch.long)
    return module, module.decode(tgt, memory, mask, causal=False)


def levt_heads(ckpt: Checkpoint, src: Sequence[str], hyp: Sequence[str]) -> LevtScores:
    """Probabilities of the three LevT passes on one hypothesis."""
    if ckpt.objective != "levt":
        raise ValueError("levt_heads needs a levt checkpoint")
    if len(hyp) > 2 * ckpt.config.max_len + 4:
        raise ValueError("hypothesis longer than the model supports")
    ids = ckpt.vocab.encode(hyp)
    with torch.no_grad():
        module, states = _levt_states(ckpt, src, ids)
        deletion = torch.softmax(module.del_head(states[0, 1:-1]).double(), -1).numpy()
        placeholder = torch.softmax(module.slot_logits(states)[0].double(), -1).numpy()
        plh_pos = [i + 1 for i, t in enumerate(ids) if t == ckpt.vocab.index[PLH]]
        fill = torch.softmax(module.token_logits(states[0, plh_pos]).double(), -1).numpy()
    return LevtScores(deletion, placeholder, fill.reshape(len(plh_pos), len(ckpt.vocab)))


class ModelHeads:
    """Greedy ``EditHeads`` backed by a trained LevT checkpoint."""

    def __init__(self, ckpt: Checkpoint, threshold: float = 0.5):
        self.ckpt = ckpt
        self.threshold = threshold
        self._text_mask = _reserved_mask(ckpt.vocab)

    def deletions(self, src, hyp):
        if not hyp:
            return []
        return list(levt_heads(self.ckpt, src, hyp).deletion[:, 1] > self.threshold)

    def insert_counts(self, src, hyp):
        counts = levt_heads(self.ckpt, src, hyp).placeholder.argmax(axis=1)
        room = 2 * self.ckpt.config.max_len - len(hyp)
        out = []
        for c in counts:
            c = int(min(c, max(room, 0)))
            room -= c
            out.append(c)
        return out

    def fills(self, src, hyp, counts):
        seq = []
        for slot, c in enumerate(counts):
            seq += [PLH] * c
            if slot < len(hyp):
                seq.append(hyp[slot])
        probs = levt_heads(self.ckpt, src, seq).fill.copy()
        probs[:, self._text_mask] = -1.0
        return self.ckpt.vocab.decode(probs.argmax(axis=1))


class ModelTranslator:
    """Translator backed by an AR checkpoint, usable for round-trip synthesis.

    ``sample`` draws every token from the ``top_k`` most likely ones.
    """

    def __init__(self, ckpt: Checkpoint, top_k: int = 5, max_len: Optional[int] = None):
        text = _reserved_mask(ckpt.vocab, allow=(EOS,))
        self.ckpt = ckpt
        self.top_k = top_k
        self.max_len = max_len or ckpt.config.max_len
        self._banned = lambda pos: text
        self.scorer = ModelScorer(ckpt, self._banned)

    def translate(self, tokens):
        return greedy_decode(self.ckpt, [tokens], None, self.max_len, self._banned)[0]

    def sample(self, tokens, seed: int):
        rng = np.random.default_rng(seed)
        out = []
        while len(out) < self.max_len:
            lp = self.scorer.log_probs(tokens, [out])[0]
            top = np.argsort(-lp, kind="stable")[: self.top_k]
            top = top[np.isfinite(lp[top])]
            p = np.exp(lp[top] - lp[top].max())
            tok = self.scorer.vocab[int(rng.choice(top, p=p / p.sum()))]
            if tok == EOS:
                break
            out.append(tok)
        return out
