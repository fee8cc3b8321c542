"""Builders for on-disk toy corpora used by the CLI and acceptance tests."""

import base64
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np

CHEXPERT14 = (
    "No Finding", "Enlarged Cardiomediastinum", "Cardiomegaly", "Lung Opacity",
    "Lung Lesion", "Edema", "Consolidation", "Pneumonia", "Atelectasis",
    "Pneumothorax", "Pleural Effusion", "Pleural Other", "Fracture",
    "Support Devices",
)

# filled by the acceptance tests; printed by conftest in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def record_acceptance(name: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    line = f"{status}  {name}"
    if detail:
        line += f"  [{detail}]"
    ACCEPTANCE_LINES.append(line)


def payload(rows) -> str:
    return base64.b64encode(np.asarray(rows, dtype="<f4").tobytes()).decode()


def write_jsonl(path: Path, records) -> None:
    with open(path, "w") as handle:
        for record in records:
            handle.write(json.dumps(record) + "\n")


def toy_corpus(root: Path) -> Path:
    """Write a small two-section corpus with every sidecar; returns config path."""
    root.mkdir(parents=True, exist_ok=True)
    studies = [
        {"study_id": "s1", "section": "findings",
         "reference_text": "No acute cardiopulmonary process.", "source_dataset": "toy"},
        {"study_id": "s2", "section": "impression",
         "reference_text": "Worsening pleural effusion.", "source_dataset": "toy"},
        {"study_id": "s3", "section": "findings",
         "reference_text": "Stable small left effusion.", "source_dataset": "toy"},
    ]
    candidates = [
        {"study_id": "s1", "system_id": "sysA", "text": "No acute process."},
        {"study_id": "s1", "system_id": "sysB", "text": "Large effusion, worsened."},
        {"study_id": "s2", "system_id": "sysA", "text": "Worsening effusion."},
        {"study_id": "s2", "system_id": "sysB", "text": "Stable appearance."},
        {"study_id": "s3", "system_id": "sysA", "text": "Stable left effusion."},
        {"study_id": "s3", "system_id": "sysB", "text": "New large pneumothorax."},
    ]
    write_jsonl(root / "studies.jsonl", studies)
    write_jsonl(root / "candidates.jsonl", candidates)

    keys = [("s1", "REF"), ("s1", "sysA"), ("s1", "sysB"),
            ("s2", "REF"), ("s2", "sysA"), ("s2", "sysB"),
            ("s3", "REF"), ("s3", "sysA"), ("s3", "sysB")]
    rng = np.random.default_rng(20240)
    report_records = [{"format_version": 1, "kind": "report", "dim": 4,
                       "record_count": len(keys)}]
    for study_id, system_id in keys:
        vec = rng.normal(size=4)
        report_records.append({"study_id": study_id, "system_id": system_id,
                               "data": payload([vec])})
    write_jsonl(root / "report_emb.jsonl", report_records)

    token_records = [{"format_version": 1, "kind": "token", "dim": 3,
                      "record_count": len(keys)}]
    for study_id, system_id in keys:
        tokens = ["tok%d" % i for i in range(int(rng.integers(1, 4)))]
        rows = rng.normal(size=(len(tokens), 3))
        token_records.append({"study_id": study_id, "system_id": system_id,
                              "tokens": tokens, "data": payload(rows)})
    write_jsonl(root / "token_emb.jsonl", token_records)

    positives = {
        ("s1", "REF"): ["No Finding"], ("s1", "sysA"): ["No Finding"],
        ("s1", "sysB"): ["Pleural Effusion"],
        ("s2", "REF"): ["Pleural Effusion"], ("s2", "sysA"): ["Pleural Effusion"],
        ("s2", "sysB"): ["No Finding"],
        ("s3", "REF"): ["Pleural Effusion"], ("s3", "sysA"): ["Pleural Effusion"],
        ("s3", "sysB"): ["Pneumothorax"],
    }
    label_records = []
    for (study_id, system_id), pos in positives.items():
        labels = {name: ("positive" if name in pos else "negative")
                  for name in CHEXPERT14}
        label_records.append({"study_id": study_id, "system_id": system_id,
                              "labels": labels})
    write_jsonl(root / "labels.jsonl", label_records)

    graph_records = []
    spans = {
        ("s1", "REF"): [], ("s1", "sysA"): [], ("s1", "sysB"): [("effusion", "OBS")],
        ("s2", "REF"): [("effusion", "OBS"), ("worsening", "OBS")],
        ("s2", "sysA"): [("effusion", "OBS")],
        ("s2", "sysB"): [],
        ("s3", "REF"): [("effusion", "OBS"), ("left", "ANAT")],
        ("s3", "sysA"): [("effusion", "OBS"), ("left", "ANAT")],
        ("s3", "sysB"): [("pneumothorax", "OBS")],
    }
    for (study_id, system_id), ents in spans.items():
        entities = [{"id": str(i), "tokens": [tok], "type": typ}
                    for i, (tok, typ) in enumerate(ents)]
        relations = []
        if len(entities) == 2:
            relations.append({"head": "0", "tail": "1", "type": "modify"})
        graph_records.append({"study_id": study_id, "system_id": system_id,
                              "entities": entities, "relations": relations})
    write_jsonl(root / "graphs.jsonl", graph_records)

    error_counts = {
        ("s1", "sysA", "findings"): 1, ("s1", "sysB", "findings"): 4,
        ("s2", "sysA", "impression"): 0, ("s2", "sysB", "impression"): 3,
        ("s3", "sysA", "findings"): 0, ("s3", "sysB", "findings"): 5,
    }
    annotation_records = [
        {"study_id": sid, "system_id": sys_id, "section": section,
         "counts": {"omission": {"significant": count, "insignificant": 1}}}
        for (sid, sys_id, section), count in error_counts.items()
    ]
    write_jsonl(root / "annotations.jsonl", annotation_records)

    config = {
        "studies": "studies.jsonl",
        "candidates": "candidates.jsonl",
        "sidecars": {
            "chexbert_embeddings": "report_emb.jsonl",
            "bertscore_tokens": "token_emb.jsonl",
            "chexbert_labels": "labels.jsonl",
            "radgraph_graphs": "graphs.jsonl",
            "annotations": "annotations.jsonl",
            "retrieval_embeddings": "report_emb.jsonl",
            "retrieval_labels": "labels.jsonl",
        },
        "seed": 7,
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config, indent=1))
    return config_path


def run_cli(args, cwd, env_extra=None, timeout=240):
    env = dict(os.environ)
    env.pop("RADEVAL_THREADS", None)
    env.pop("RADEVAL_PURE_PYTHON", None)
    if env_extra:
        env.update(env_extra)
    return subprocess.run(
        [sys.executable, "-m", "radeval.cli", *args],
        cwd=str(cwd), env=env, capture_output=True, text=True, timeout=timeout)
