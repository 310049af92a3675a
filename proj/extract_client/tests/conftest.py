import os
import shutil
import subprocess
from pathlib import Path

import pytest


def _tool(env_name: str, build_name: str):
    path = os.environ.get(env_name)
    if path:
        return path
    guess = Path(__file__).resolve().parents[2] / "build" / build_name
    return str(guess) if guess.exists() else shutil.which(guess.name)


@pytest.fixture(scope="session")
def check_files():
    exe = _tool("IVPROBE_CHECK_FILES", "tests/ivprobe_check_files")
    if not exe:
        pytest.skip("ivprobe_check_files not built")

    def run(directory):
        proc = subprocess.run([exe, str(directory)], capture_output=True, text=True)
        return proc.returncode, proc.stdout.strip(), proc.stderr.strip()

    return run


@pytest.fixture(scope="session")
def ivprobe_cli():
    exe = _tool("IVPROBE_CLI", "tools/ivprobe")
    if not exe:
        pytest.skip("ivprobe CLI not built")
    return exe


WORDS = (
    "every some no dog animal cat pet bird sparrow person man woman walks runs sleeps sees a the "
    "in park house tall small happy sad red car vehicle"
).split()


@pytest.fixture(scope="session")
def tiny_bert(tmp_path_factory):
    """A randomly initialized BERT NLI classifier saved locally; nothing is downloaded."""
    import torch
    from transformers import BertConfig, BertForSequenceClassification, BertTokenizerFast

    d = tmp_path_factory.mktemp("tiny-bert")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", *WORDS]
    (d / "vocab.txt").write_text("\n".join(vocab) + "\n")
    tok = BertTokenizerFast(vocab_file=str(d / "vocab.txt"), do_lower_case=True, model_max_length=24)
    torch.manual_seed(0)
    cfg = BertConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
        num_labels=3,
    )
    model = BertForSequenceClassification(cfg)
    # Wider logits so float32 storage cannot flip an argmax.
    with torch.no_grad():
        model.classifier.weight.mul_(20.0)
    model.save_pretrained(d)
    tok.save_pretrained(d)
    return d
