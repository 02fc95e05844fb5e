"""Relevance scorers behind the protocol server.

StubScorer needs no model and exists so the full external-scoring path
can be exercised with deterministic scores. ModelScorer wraps any local
or hub sequence-classification checkpoint; transformers/torch are
imported lazily so stub mode starts instantly.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .truncation import truncate_model_tokens


@dataclass
class AdapterConfig:
    model: str | None = None  # path or model id; None = stub mode
    constant: float | None = None  # stub mode: fixed score instead of text hash
    max_total: int = 512
    query_budget: int = 256
    candidate_budget: int = 256
    batch_size: int = 16
    device: str = "cpu"

    def validate(self):
        if self.max_total < 2:
            raise ValueError("max_total must be >= 2")
        if self.query_budget < 1 or self.candidate_budget < 1:
            raise ValueError("side budgets must be positive")
        if self.query_budget + self.candidate_budget > self.max_total:
            raise ValueError("side budgets exceed max_total")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.constant is not None and not 0.0 <= self.constant <= 1.0:
            raise ValueError("constant score must be within [0, 1]")


class StubScorer:
    """Deterministic hash (or constant) scores; no model involved."""

    def __init__(self, config: AdapterConfig):
        self.constant = config.constant

    def score_batch(self, pairs) -> list[float]:
        out = []
        for query, candidate in pairs:
            if self.constant is not None:
                out.append(self.constant)
            else:
                digest = hashlib.sha256(f"{query}\x1f{candidate}".encode("utf-8")).digest()
                out.append(int.from_bytes(digest[:8], "big") / float(2**64))
        return out


class ModelScorer:
    """Sequence-pair classifier: probability that candidate is relevant.

    Query and candidate are tokenized with the model's own tokenizer,
    capped at their side budgets, jointly truncated to fit the model
    input (special tokens subtracted first), and scored as sequence A /
    sequence B.
    """

    def __init__(self, config: AdapterConfig):
        import inspect

        import torch
        from transformers import AutoModelForSequenceClassification, AutoTokenizer

        self._torch = torch
        self.config = config
        self.tokenizer = AutoTokenizer.from_pretrained(config.model)
        self.backend = getattr(self.tokenizer, "_tokenizer", None)
        if self.backend is None:
            raise ValueError("the adapter needs a fast tokenizer "
                             "(id-level truncation and pair assembly)")
        self.model = AutoModelForSequenceClassification.from_pretrained(config.model)
        self.model.to(config.device)
        self.model.eval()
        self._forward_params = set(inspect.signature(self.model.forward).parameters)
        self.pair_overhead = self.tokenizer.num_special_tokens_to_add(pair=True)
        if config.max_total <= self.pair_overhead + 1:
            raise ValueError(
                f"max_total {config.max_total} leaves no room after "
                f"{self.pair_overhead} special tokens")

    def _encode(self, query: str, candidate: str):
        enc_q = self.backend.encode(query, add_special_tokens=False)
        enc_c = self.backend.encode(candidate, add_special_tokens=False)
        q_ids = enc_q.ids[: self.config.query_budget]
        c_ids = enc_c.ids[: self.config.candidate_budget]
        q_ids, c_ids = truncate_model_tokens(
            q_ids, c_ids, self.config.max_total - self.pair_overhead)
        enc_q.truncate(len(q_ids))
        enc_c.truncate(len(c_ids))
        merged = self.backend.post_process(enc_q, enc_c, add_special_tokens=True)
        return {"input_ids": merged.ids,
                "token_type_ids": merged.type_ids,
                "attention_mask": merged.attention_mask}

    def score_batch(self, pairs) -> list[float]:
        torch = self._torch
        encoded = [self._encode(q, c) for q, c in pairs]
        batch = self.tokenizer.pad(encoded, return_tensors="pt").to(self.config.device)
        inputs = {k: v for k, v in batch.items() if k in self._forward_params}
        with torch.no_grad():
            logits = self.model(**inputs).logits
        if logits.shape[-1] == 1:
            probs = torch.sigmoid(logits[:, 0])
        else:
            # label convention: last class = relevant (index 1 for binary heads)
            probs = torch.softmax(logits, dim=-1)[:, -1]
        return [float(min(max(p, 0.0), 1.0)) for p in probs.cpu().tolist()]


def build_scorer(config: AdapterConfig):
    config.validate()
    if config.model is None:
        return StubScorer(config)
    return ModelScorer(config)
