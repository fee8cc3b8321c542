"""Shared fixtures: miniature local models and a small report corpus.

The models are randomly initialized (seeded) BERT variants saved to disk,
so every test run sees identical weights without any network access.
"""

from __future__ import annotations

import json

import pytest

CHEXPERT14 = (
    "Enlarged Cardiomediastinum", "Cardiomegaly", "Lung Opacity",
    "Lung Lesion", "Edema", "Consolidation", "Pneumonia", "Atelectasis",
    "Pneumothorax", "Pleural Effusion", "Pleural Other", "Fracture",
    "Support Devices", "No Finding",
)

VOCAB = (
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "lungs", "are", "clear", "no", "pleural", "effusion",
    "heart", "size", "is", "normal", "mild", "cardiomegaly", "with",
    "small", "right", "opacity", "in", "lower", "lobe", "unchanged",
)

STUDIES = (
    {"study_id": "s1", "section": "findings",
     "reference_text": "The lungs are clear. No pleural effusion.",
     "source_dataset": "toy"},
    {"study_id": "s2", "section": "findings",
     "reference_text": "Mild cardiomegaly. Heart size is normal.",
     "source_dataset": "toy"},
    {"study_id": "s3", "section": "findings",
     "reference_text": "Small right opacity in the lower lobe.",
     "source_dataset": "toy"},
)

CANDIDATES = tuple(
    {"study_id": sid, "system_id": sysid, "text": text}
    for sysid, texts in (
        ("sysA", ("Lungs are clear with no effusion.",
                  "Mild cardiomegaly is unchanged.",
                  "Right lower lobe opacity.")),
        ("sysB", ("No pleural effusion.",
                  "Heart size normal.",
                  "Opacity in the right lower lobe unchanged.")),
    )
    for sid, text in zip(("s1", "s2", "s3"), texts)
)


def _write_vocab(path):
    path.write_text("\n".join(VOCAB) + "\n", encoding="utf-8")


@pytest.fixture(scope="session")
def tiny_encoder_dir(tmp_path_factory):
    import torch
    from transformers import BertConfig, BertModel, BertTokenizerFast

    root = tmp_path_factory.mktemp("tiny-encoder")
    _write_vocab(root / "vocab.txt")
    tokenizer = BertTokenizerFast(vocab_file=str(root / "vocab.txt"),
                                  model_max_length=64, do_lower_case=True)
    tokenizer.save_pretrained(str(root))
    config = BertConfig(vocab_size=len(VOCAB), hidden_size=16,
                        num_hidden_layers=2, num_attention_heads=2,
                        intermediate_size=32, max_position_embeddings=64)
    torch.manual_seed(1234)
    BertModel(config).save_pretrained(str(root))
    return root


@pytest.fixture(scope="session")
def tiny_labeler_dir(tmp_path_factory):
    import torch
    from transformers import (BertConfig, BertForSequenceClassification,
                              BertTokenizerFast)

    root = tmp_path_factory.mktemp("tiny-labeler")
    _write_vocab(root / "vocab.txt")
    tokenizer = BertTokenizerFast(vocab_file=str(root / "vocab.txt"),
                                  model_max_length=64, do_lower_case=True)
    tokenizer.save_pretrained(str(root))
    config = BertConfig(vocab_size=len(VOCAB), hidden_size=16,
                        num_hidden_layers=2, num_attention_heads=2,
                        intermediate_size=32, max_position_embeddings=64,
                        num_labels=len(CHEXPERT14),
                        id2label=dict(enumerate(CHEXPERT14)),
                        label2id={n: i for i, n in enumerate(CHEXPERT14)},
                        problem_type="multi_label_classification")
    torch.manual_seed(4321)
    BertForSequenceClassification(config).save_pretrained(str(root))
    return root


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    with open(root / "studies.jsonl", "w", encoding="utf-8") as fh:
        for row in STUDIES:
            fh.write(json.dumps(row) + "\n")
    with open(root / "candidates.jsonl", "w", encoding="utf-8") as fh:
        for row in CANDIDATES:
            fh.write(json.dumps(row) + "\n")
    return root


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_acceptance():
    def _record(name: str, passed: bool, detail: str = "") -> None:
        status = "PASS" if passed else "FAIL"
        line = f"{status}  {name}"
        if detail:
            line += f"  [{detail}]"
        ACCEPTANCE_LINES.append(line)

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria (exporter)")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
