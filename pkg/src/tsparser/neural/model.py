"""The parser network: embeddings, encoders, shared attention scorer and the
action / token output layers, plus checkpoint I/O."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .. import attention as att
from ..transitions import ALL_OPS, ENTITY, NUMBER, REL_ANY, REL_NUMERIC, REL_UNARY, Inventory
from ..vocab import TokenVocab, WordVocab
from . import tensor as T
from .layers import (LSTMParams, StackNode, encode_utterance, stack_init, stack_push, stack_reduce,
                     uniform)

CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class ModelConfig:
    mode: str = "td"
    attention: str = "soft"
    word_dim: int = 50
    token_dim: int = 50
    hidden: int = 150
    attention_dim: int = 150
    feature_dim: int = 150
    dropout: float = 0.5
    init_scale: float = 0.08

    def __post_init__(self):
        if self.mode not in ("td", "bu"):
            raise ValueError(f"mode must be td or bu, not {self.mode!r}")
        if self.attention not in att.VARIANTS:
            raise ValueError(f"attention must be one of {att.VARIANTS}, not {self.attention!r}")


@dataclass
class Encoded:
    words: list
    buffer: T.Tensor     # (k, 2H)
    projected: T.Tensor  # (k, A), W_b applied once per utterance


class ParserModel:
    def __init__(self, config: ModelConfig, words: WordVocab, tokens: TokenVocab, seed=0):
        self.config = config
        self.words = words
        self.tokens = tokens
        rng = np.random.default_rng(seed)
        c, s = config, config.init_scale
        H = c.hidden
        self.enc_fwd = LSTMParams.init(rng, c.word_dim, H, "enc_fwd.", s)
        self.enc_bwd = LSTMParams.init(rng, c.word_dim, H, "enc_bwd.", s)
        self.stack_cell = LSTMParams.init(rng, c.token_dim, H, "stack.", s)
        p = {
            "word_emb": uniform(rng, (len(words), c.word_dim), s),
            "token_emb": uniform(rng, (len(tokens), c.token_dim), s),
            "W_u": uniform(rng, (c.token_dim, 2 * c.token_dim), s),
            "att.W_b": uniform(rng, (c.attention_dim, 2 * H), s),
            "att.W_s": uniform(rng, (c.attention_dim, H), s),
            "att.V": uniform(rng, (c.attention_dim,), s),
            "crf.w": uniform(rng, (3,), s),
            "W_f": uniform(rng, (c.feature_dim, 3 * H), s),
            "b_f": uniform(rng, (c.feature_dim,), s),
            "W_oa": uniform(rng, (len(ALL_OPS), c.feature_dim), s),
            "b_oa": uniform(rng, (len(ALL_OPS),), s),
            "W_oy": uniform(rng, (len(tokens), c.feature_dim), s),
            "b_oy": uniform(rng, (len(tokens),), s),
        }
        self.params = {k: T.param(v, k) for k, v in p.items()}
        self.params.update(self.enc_fwd.named("enc_fwd."))
        self.params.update(self.enc_bwd.named("enc_bwd."))
        self.params.update(self.stack_cell.named("stack."))
        self.scorer = att.ScorerParams(self.params["att.W_b"], self.params["att.W_s"], self.params["att.V"])

    # -- parameter helpers -----------------------------------------------------------

    def __getitem__(self, name) -> T.Tensor:
        return self.params[name]

    def snapshot(self) -> dict:
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_snapshot(self, snap: dict):
        for k, v in snap.items():
            self.params[k].data[...] = v

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def load_word_vectors(self, path) -> int:
        """Overwrite word rows from a whitespace-separated ``word v1 v2 ...`` file."""
        E = self.params["word_emb"].data
        n = 0
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                parts = line.rstrip().split(" ")
                if len(parts) != E.shape[1] + 1:
                    continue
                i = self.words.index.get(parts[0].lower())
                if i is not None:
                    E[i] = np.asarray(parts[1:], dtype=float)
                    n += 1
        return n

    # -- encoders ------------------------------------------------------------------

    def encode(self, words) -> Encoded:
        buf = encode_utterance(self.words.ids(words), self.params["word_emb"], self.enc_fwd, self.enc_bwd)
        return Encoded(list(words), buf, att.project_buffer(buf, self.scorer))

    def token_embedding(self, kind, symbol) -> T.Tensor:
        return T.getitem(self.params["token_emb"], self.tokens.id(kind, symbol))

    def op_embedding(self, tag) -> T.Tensor:
        return self.token_embedding("op", tag)

    def stack_start(self) -> StackNode:
        return stack_init(self.stack_cell)

    def push(self, node, emb, is_open=False) -> StackNode:
        return stack_push(node, emb, self.stack_cell, is_open)

    def reduce(self, node, mode, parent_emb=None, n_children=None) -> StackNode:
        return stack_reduce(node, mode, self.params["W_u"], self.stack_cell, parent_emb, n_children)

    # -- predictions ------------------------------------------------------------------

    def scores(self, enc: Encoded, s) -> T.Tensor:
        return att.score(enc.buffer, s, self.scorer, enc.projected)

    def feature(self, context, s, rng=None, training=False) -> T.Tensor:
        f = att.features(context, s, self.params["W_f"], self.params["b_f"])
        return T.dropout(f, self.config.dropout, rng, training and rng is not None)

    def action_log_probs(self, feature, mask) -> T.Tensor:
        return att.masked_log_probs(feature, self.params["W_oa"], self.params["b_oa"], mask)

    def token_log_probs(self, feature, mask) -> T.Tensor:
        return att.predict_token(feature, self.params["W_oy"], self.params["b_oy"], mask)

    def token_context(self, enc: Encoded, scores, rng=None, choice=None):
        """Buffer summary used for token prediction under the configured variant.

        Returns (context, log-probability of the attention choice or None,
        weights for tracing). ``rng`` switches hard/binomial to sampling;
        ``choice`` forces the hard index or binomial mask.
        """
        variant = self.config.attention
        if variant == "soft":
            w = att.soft_weights(scores)
            return T.matmul(w, enc.buffer), None, w.data
        if variant == "structured":
            m = att.crf_marginals(scores, self.params["crf.w"])
            return att.structured_attend(m, enc.buffer), None, m.data
        if variant == "hard":
            logp = T.log_softmax(scores)
            if choice is not None:
                idx = int(choice)
            elif rng is not None:
                p = np.exp(logp.data)
                idx = int(rng.choice(len(p), p=p / p.sum()))
            else:
                idx = int(np.argmax(scores.data))
            onehot = np.zeros(scores.shape[-1])
            onehot[idx] = 1.0
            return T.getitem(enc.buffer, idx), T.getitem(logp, idx), onehot
        if choice is not None:
            mask = np.asarray(choice, dtype=bool)
            log_p = T.sum(T.add(T.mul(T.log_sigmoid(scores), mask.astype(float)),
                                T.mul(T.log_sigmoid(T.scale(scores, -1.0)), (~mask).astype(float))))
            chosen = mask.copy()
            if not chosen.any():
                chosen[int(np.argmax(scores.data))] = True
            return T.matmul(T.Tensor(chosen / chosen.sum()), enc.buffer), log_p, chosen.astype(float)
        mask, ctx, log_p = att.binomial_select(scores, enc.buffer, rng)
        return ctx, log_p, mask.astype(float)

    # -- token slots ------------------------------------------------------------------

    def slot_tokens(self, numeric_relations, entity_candidates=None, numbers=()) -> dict:
        """Admissible vocabulary ids per token slot for one utterance."""
        tv = self.tokens
        ents = tv.of_kind("entity")
        if entity_candidates:
            allowed = set(entity_candidates)
            ents = [e for e in ents if e in allowed] or ents
        rels = tv.of_kind("relation")
        numeric = set(numeric_relations or ())
        ids = {
            ENTITY: [tv.id("entity", e) for e in ents],
            NUMBER: [tv.id("number", n) for n in numbers if tv.get("number", n) is not None],
            REL_ANY: [tv.id("relation", r) for r in rels],
            REL_UNARY: [tv.id("relation", r) for r in rels if r not in numeric],
            REL_NUMERIC: [tv.id("relation", r) for r in rels if r in numeric],
        }
        return {k: np.asarray(v, dtype=int) for k, v in ids.items()}

    def slot_masks(self, slot_ids: dict) -> dict:
        out = {}
        for k, ids in slot_ids.items():
            m = np.zeros(len(self.tokens), dtype=bool)
            m[ids] = True
            out[k] = m
        return out

    @staticmethod
    def inventory(slot_ids: dict) -> Inventory:
        return Inventory(**{k: len(v) > 0 for k, v in slot_ids.items()})

    # -- checkpoints ------------------------------------------------------------------

    def save(self, path, extra: dict | None = None):
        manifest = {
            "version": CHECKPOINT_VERSION,
            "model_config": asdict(self.config),
            "shapes": {k: list(v.data.shape) for k, v in self.params.items()},
            "words": self.words.words,
            "tokens": [list(t) for t in self.tokens.tokens],
            "extra": extra or {},
        }
        arrays = {f"param/{k}": v.data for k, v in self.params.items()}
        with open(path, "wb") as fh:
            np.savez_compressed(fh, manifest=np.array(json.dumps(manifest)), **arrays)

    @classmethod
    def load(cls, path):
        """Returns (model, extra)."""
        path = Path(path)
        try:
            data = np.load(path, allow_pickle=False)
            manifest = json.loads(str(data["manifest"]))
        except (OSError, ValueError, KeyError) as err:
            raise CheckpointError(f"{path}: not a parser checkpoint ({err})") from None
        if manifest.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {manifest.get('version')}")
        model = cls(ModelConfig(**manifest["model_config"]), WordVocab(manifest["words"]),
                    TokenVocab([tuple(t) for t in manifest["tokens"]]))
        for name, p in model.params.items():
            key = f"param/{name}"
            if key not in data:
                raise CheckpointError(f"{path}: missing parameter {name}")
            arr = data[key]
            if list(arr.shape) != list(p.data.shape) or list(arr.shape) != manifest["shapes"].get(name):
                raise CheckpointError(f"{path}: parameter {name} has shape {arr.shape}, "
                                      f"config implies {p.data.shape}")
            p.data[...] = arr
        return model, manifest["extra"]
