import numpy as np
import pytest

from udc.corpus import Document, LabeledDataset, Vocabulary, PAD_TOKEN, UNK_TOKEN
from udc.nn import EncoderConfig, ModelState

ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)


def tiny_vocab(n_tokens=20):
    tokens = [PAD_TOKEN, UNK_TOKEN] + [f"w{i}" for i in range(n_tokens - 2)]
    return Vocabulary({t: i for i, t in enumerate(tokens)}, tokens)


def small_model(
    num_classes=3,
    vocab_size=20,
    embed_dim=5,
    kernel_sizes=(2, 3),
    filters=4,
    dropout_p=0.0,
    max_len=8,
    seed=0,
    dtype=np.float64,
):
    cfg = EncoderConfig(
        num_classes=num_classes,
        embed_dim=embed_dim,
        kernel_sizes=kernel_sizes,
        filters_per_kernel=filters,
        dropout_p=dropout_p,
        max_len=max_len,
    )
    return ModelState(cfg, vocab_size=vocab_size, rng_seed=seed, dtype=dtype)


def random_token_batch(rng, batch, seq_len, vocab_size, pad_tail=True):
    ids = rng.integers(1, vocab_size, size=(batch, seq_len))
    if pad_tail:
        for b in range(batch):
            cut = int(rng.integers(1, seq_len + 1))
            ids[b, cut:] = 0
    return ids


def two_class_toy_dataset(per_class=10):
    docs = []
    for i in range(per_class):
        docs.append(Document(f"a{i}", f"apple apple fruit tree number{i % 3}", 0))
        docs.append(Document(f"b{i}", f"rocket launch orbit space number{i % 3}", 1))
    return LabeledDataset(docs, 2, ["fruit", "space"])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
