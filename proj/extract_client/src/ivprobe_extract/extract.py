"""Final-layer [CLS] extraction from a sequence-classification NLI model."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import formats

log = logging.getLogger(__name__)

LABEL_COLUMNS = ("monotonicity", "relation", "entailment")
# Class counts of the enums used by the synthetic generator.
LABEL_CLASSES = {"monotonicity": 2, "relation": 3, "entailment": 2}


class DataError(Exception):
    pass


class ModelLoadError(Exception):
    pass


@dataclass
class Example:
    premise: str
    hypothesis: str
    labels: dict = field(default_factory=dict)


@dataclass
class ExtractionJob:
    model: str
    input_csv: Path
    out_dir: Path
    batch_size: int = 16
    device: str = "cpu"


@dataclass
class ExtractionResult:
    representations: np.ndarray
    predictions: np.ndarray
    head: Optional[list]
    head_note: str
    truncated: list


def read_input(path: Path) -> list[Example]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty input") from None
        if header[:2] != ["premise", "hypothesis"] or any(h not in LABEL_COLUMNS for h in header[2:]):
            raise DataError(f"{path}: header must be premise,hypothesis[,monotonicity,relation,entailment]")
        extra = header[2:]
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}")
            premise, hypothesis = row[0], row[1]
            if not premise or not hypothesis:
                raise DataError(f"{path}:{line_no}: premise and hypothesis are both required")
            labels = {}
            for name, value in zip(extra, row[2:]):
                try:
                    v = int(value)
                except ValueError:
                    raise DataError(f"{path}:{line_no}: {name} '{value}' is not a class id") from None
                if not 0 <= v < LABEL_CLASSES[name]:
                    raise DataError(f"{path}:{line_no}: {name} id {v} out of range")
                labels[name] = v
            rows.append(Example(premise, hypothesis, labels))
    if not rows:
        raise DataError(f"{path}: no examples")
    return rows


def load_model(name: str, device: str):
    import torch
    from transformers import AutoModelForSequenceClassification, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(name)
        model = AutoModelForSequenceClassification.from_pretrained(name)
    except Exception as e:  # transformers raises a zoo of types here
        raise ModelLoadError(f"cannot load model '{name}': {e}") from e
    model.to(device).eval()
    torch.use_deterministic_algorithms(True)
    return tokenizer, model


def export_head(model) -> tuple[Optional[list], str]:
    """The layers between the final [CLS] state and the logits, when they fit the head format."""
    kind = model.config.model_type

    def layer(linear, act):
        return formats.Layer(
            linear.weight.detach().cpu().double().numpy(), linear.bias.detach().cpu().double().numpy(), act
        )

    if kind == "bert" and getattr(model.bert, "pooler", None) is not None:
        return [layer(model.bert.pooler.dense, "tanh"), layer(model.classifier, "identity")], "bert pooler + classifier"
    if kind in ("roberta", "xlm-roberta", "camembert"):
        c = model.classifier
        return [layer(c.dense, "tanh"), layer(c.out_proj, "identity")], f"{kind} classification head"
    return None, f"model type '{kind}' has no head expressible as identity/tanh layers"


def max_length(tokenizer, model) -> int:
    limit = tokenizer.model_max_length
    if limit is None or limit > 100_000:
        limit = model.config.max_position_embeddings
    return int(limit)


def extract(job: ExtractionJob) -> ExtractionResult:
    import torch

    examples = read_input(job.input_csv)
    tokenizer, model = load_model(job.model, job.device)
    limit = max_length(tokenizer, model)
    head, note = export_head(model)

    reps, preds, truncated = [], [], []
    with torch.inference_mode():
        for start in range(0, len(examples), job.batch_size):
            batch = examples[start : start + job.batch_size]
            premises = [e.premise for e in batch]
            hypotheses = [e.hypothesis for e in batch]
            full = tokenizer(premises, hypotheses, truncation=False)["input_ids"]
            for i, ids in enumerate(full):
                if len(ids) > limit:
                    truncated.append({"row": start + i, "tokens": len(ids), "kept": limit})
            enc = tokenizer(
                premises, hypotheses, padding=True, truncation="longest_first", max_length=limit, return_tensors="pt"
            ).to(job.device)
            out = model(**enc, output_hidden_states=True)
            reps.append(out.hidden_states[-1][:, 0, :].double().cpu().numpy())
            preds.append(out.logits.argmax(dim=-1).cpu().numpy())
    for t in truncated:
        log.warning("row %d truncated from %d to %d tokens", t["row"], t["tokens"], t["kept"])
    return ExtractionResult(np.concatenate(reps), np.concatenate(preds), head, note, truncated)


def write_outputs(job: ExtractionJob, examples: list[Example], result: ExtractionResult) -> list[str]:
    out = Path(job.out_dir)
    files = ["representations.iprb"]
    formats.write_bytes(out / "representations.iprb", formats.encode_matrix(result.representations))
    for name in LABEL_COLUMNS:
        if examples and name in examples[0].labels:
            formats.write_bytes(out / f"{name}.csv", formats.encode_labels(name, [e.labels[name] for e in examples]))
            files.append(f"{name}.csv")
    formats.write_bytes(out / "model_predictions.csv", formats.encode_labels("model_prediction", result.predictions))
    files.append("model_predictions.csv")
    if result.head is not None:
        formats.write_bytes(out / "head.ihead", formats.encode_head(result.head))
        files.append("head.ihead")
    manifest = {
        "command": "extract",
        "model": job.model,
        "rows": int(result.representations.shape[0]),
        "cols": int(result.representations.shape[1]),
        "position": "final layer [CLS]",
        "head": result.head_note,
        "truncated": result.truncated,
        "files": files,
    }
    formats.write_bytes(out / "manifest.json", (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode())
    return files


def run(job: ExtractionJob) -> ExtractionResult:
    examples = read_input(job.input_csv)
    result = extract(job)
    write_outputs(job, examples, result)
    return result
