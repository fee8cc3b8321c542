"""Model loading and batched encoding.

All heavy imports live here so spec validation and file parsing stay cheap.
Encoding pins a single torch thread: reproducibility of the exported bytes
matters more than batch throughput at this scale.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from radeval_export.errors import ExportError


def _torch():
    import torch

    torch.set_num_threads(1)
    return torch


def load_encoder(model_path: str):
    torch = _torch()
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(model_path)
        model = AutoModel.from_pretrained(model_path)
    except Exception as exc:
        raise ExportError(f"cannot load encoder from {model_path!r}: {exc}") from exc
    model.eval()
    return tokenizer, model


def load_labeler(model_path: str):
    torch = _torch()
    from transformers import AutoModelForSequenceClassification, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(model_path)
        model = AutoModelForSequenceClassification.from_pretrained(model_path)
    except Exception as exc:
        raise ExportError(f"cannot load labeler from {model_path!r}: {exc}") from exc
    model.eval()
    return tokenizer, model


def _batches(items: Sequence, size: int):
    for start in range(0, len(items), size):
        yield start, items[start:start + size]


def _hidden_states(torch, model, encoded, layer: int):
    with torch.no_grad():
        output = model(**encoded, output_hidden_states=True)
    stack = output.hidden_states
    if not -len(stack) <= layer < len(stack):
        raise ExportError(
            f"layer {layer} out of range; model exposes {len(stack)} "
            "hidden-state layers (0 = embeddings)")
    return stack[layer]


def _check_dim(dim: int | None, rows: np.ndarray, what: str) -> int:
    if dim is None:
        return int(rows.shape[-1])
    if rows.shape[-1] != dim:
        raise ExportError(
            f"dim mismatch across batches for {what}: {rows.shape[-1]} != {dim}")
    return dim


def encode_tokens(tokenizer, model, texts: Sequence[str], keys: Sequence[str],
                  layer: int, batch_size: int):
    """Per-token vectors for each text, special tokens excluded.

    Returns (dim, list of (tokens, float32 matrix)).

    Raises:
        ExportError: a text with no content tokens, or a dim mismatch.
    """
    torch = _torch()
    results = []
    dim = None
    for start, batch in _batches(list(texts), batch_size):
        encoded = tokenizer(list(batch), padding=True, truncation=True,
                            return_tensors="pt", return_special_tokens_mask=True)
        special = encoded.pop("special_tokens_mask")
        hidden = _hidden_states(torch, model, encoded, layer)
        keep = (encoded["attention_mask"] == 1) & (special == 0)
        for i in range(len(batch)):
            positions = keep[i].nonzero(as_tuple=True)[0]
            if positions.numel() == 0:
                raise ExportError(
                    f"report {keys[start + i]} has no content tokens; "
                    "token export needs non-empty text")
            ids = encoded["input_ids"][i, positions].tolist()
            tokens = tokenizer.convert_ids_to_tokens(ids)
            rows = hidden[i, positions].numpy().astype("<f4")
            dim = _check_dim(dim, rows, keys[start + i])
            results.append((tokens, rows))
    return dim, results


def encode_reports(tokenizer, model, texts: Sequence[str], keys: Sequence[str],
                   layer: int, pooling: str, batch_size: int):
    """One pooled vector per text. Returns (dim, list of float32 vectors)."""
    torch = _torch()
    results = []
    dim = None
    for start, batch in _batches(list(texts), batch_size):
        encoded = tokenizer(list(batch), padding=True, truncation=True,
                            return_tensors="pt")
        hidden = _hidden_states(torch, model, encoded, layer)
        if pooling == "cls":
            pooled = hidden[:, 0, :]
        else:
            mask = encoded["attention_mask"].unsqueeze(-1).to(hidden.dtype)
            pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1)
        for i in range(len(batch)):
            row = pooled[i].numpy().astype("<f4")
            dim = _check_dim(dim, row, keys[start + i])
            results.append(row)
    return dim, results


def label_states(tokenizer, model, texts: Sequence[str],
                 threshold: float, batch_size: int):
    """Binary label states from a multi-label classification head.

    Returns (label names in head order, list of {name: state} dicts) with
    states "positive" (sigmoid above threshold) or "negative".
    """
    torch = _torch()
    id2label = model.config.id2label
    names = [id2label[i] for i in range(len(id2label))]
    results = []
    for _, batch in _batches(list(texts), batch_size):
        encoded = tokenizer(list(batch), padding=True, truncation=True,
                            return_tensors="pt")
        with torch.no_grad():
            logits = model(**encoded).logits
        probs = torch.sigmoid(logits)
        for row in probs:
            states = {name: "positive" if float(p) > threshold else "negative"
                      for name, p in zip(names, row)}
            results.append(states)
    return names, results
