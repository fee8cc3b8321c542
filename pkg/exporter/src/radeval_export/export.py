"""Export orchestration: read reports, encode, write one sidecar file."""

from __future__ import annotations

from radeval_export import encode, writers
from radeval_export.reports import read_reports
from radeval_export.spec import ExportSpec


def export(spec: ExportSpec) -> int:
    """Run one export; returns the number of records written.

    Deterministic given fixed model weights and an identical spec: records
    keep input order, encoding is single-threaded, and the writer emits
    canonical JSON lines.

    Raises:
        SpecError: invalid spec (already raised on construction).
        ExportError: unreadable inputs, model load failure, empty token
            records, or a dim mismatch across batches.
    """
    records = read_reports(spec.inputs)
    texts = [r.text for r in records]
    keys = [f"{r.study_id}/{r.system_id}" for r in records]

    if spec.kind == "labels":
        tokenizer, model = encode.load_labeler(spec.model)
        _, states = encode.label_states(tokenizer, model, texts,
                                        spec.threshold, spec.batch_size)
        writers.write_labels_file(
            spec.output,
            [(r.study_id, r.system_id, s) for r, s in zip(records, states)])
        return len(records)

    tokenizer, model = encode.load_encoder(spec.model)
    if spec.kind == "token":
        dim, encoded = encode.encode_tokens(tokenizer, model, texts, keys,
                                            spec.layer, spec.batch_size)
        writers.write_embedding_file(
            spec.output, "token", dim,
            [(r.study_id, r.system_id, tokens, rows)
             for r, (tokens, rows) in zip(records, encoded)])
    else:
        dim, vectors = encode.encode_reports(tokenizer, model, texts, keys,
                                             spec.layer, spec.pooling,
                                             spec.batch_size)
        writers.write_embedding_file(
            spec.output, "report", dim,
            [(r.study_id, r.system_id, None, row)
             for r, row in zip(records, vectors)])
    return len(records)
