"""Dataset ingestion, tokenization, vocabulary and split handling.

Everything here is a pure function of (inputs, seed): loading is
deterministic (sorted paths / line order), splits are stratified and
seeded, and embedding initialization draws from a fixed-seed generator.
"""
from __future__ import annotations

import csv
import json
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_INDEX = 0
UNK_INDEX = 1

DATASET_FORMATS = ("newsgroups_dirs", "jsonl", "csv")


@dataclass
class Document:
    id: str
    text: str
    label: int


@dataclass
class LabeledDataset:
    documents: list[Document]
    num_classes: int
    class_names: list[str]

    def __post_init__(self):
        if self.num_classes < 2:
            raise DataError(f"need at least 2 classes, got {self.num_classes}")
        if len(self.class_names) != self.num_classes:
            raise DataError("class_names length must equal num_classes")
        seen = set()
        for doc in self.documents:
            if doc.id in seen:
                raise DataError(f"duplicate document id {doc.id!r}")
            seen.add(doc.id)
            if not 0 <= doc.label < self.num_classes:
                raise DataError(
                    f"label {doc.label} of document {doc.id!r} outside "
                    f"[0, {self.num_classes})"
                )

    def __len__(self):
        return len(self.documents)

    def labels(self) -> np.ndarray:
        return np.array([d.label for d in self.documents], dtype=np.int64)


@dataclass
class SplitSpec:
    train_fraction: float = 0.7
    valid_fraction: float = 0.1
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        fractions = (self.train_fraction, self.valid_fraction, self.test_fraction)
        if not all(0.0 < f < 1.0 for f in fractions):
            raise DataError(f"split fractions must lie in (0,1), got {fractions}")
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise DataError(f"split fractions must sum to 1, got {sum(fractions)}")


def _is_breaking(ch: str) -> bool:
    # Punctuation and symbol characters are peeled off token edges. Including
    # symbols guarantees the reserved "<pad>"/"<unk>" strings can never be
    # produced by tokenizing real text.
    return unicodedata.category(ch)[0] in ("P", "S")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace, peeling edge punctuation into
    standalone tokens. Interior punctuation ("v2.0", "don't") is kept."""
    tokens: list[str] = []
    for chunk in text.lower().split():
        i, j = 0, len(chunk)
        lead: list[str] = []
        trail: list[str] = []
        while i < j and _is_breaking(chunk[i]):
            lead.append(chunk[i])
            i += 1
        while j > i and _is_breaking(chunk[j - 1]):
            trail.append(chunk[j - 1])
            j -= 1
        tokens.extend(lead)
        if i < j:
            tokens.append(chunk[i:j])
        tokens.extend(reversed(trail))
    return tokens


@dataclass
class Vocabulary:
    token_to_index: dict[str, int]
    index_to_token: list[str]

    def __post_init__(self):
        if self.index_to_token[PAD_INDEX] != PAD_TOKEN:
            raise DataError("index 0 must be the padding token")
        if self.index_to_token[UNK_INDEX] != UNK_TOKEN:
            raise DataError("index 1 must be the unknown token")
        for idx, tok in enumerate(self.index_to_token):
            if self.token_to_index.get(tok) != idx:
                raise DataError("token_to_index and index_to_token disagree")

    def __len__(self):
        return len(self.index_to_token)

    def encode(self, tokens: list[str], max_len: int) -> np.ndarray:
        ids = [self.token_to_index.get(t, UNK_INDEX) for t in tokens[:max_len]]
        ids.extend([PAD_INDEX] * (max_len - len(ids)))
        return np.array(ids, dtype=np.int64)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps({"tokens": self.index_to_token}, ensure_ascii=False),
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        tokens = json.loads(Path(path).read_text(encoding="utf-8"))["tokens"]
        return cls({t: i for i, t in enumerate(tokens)}, list(tokens))


def build_vocab(dataset: LabeledDataset, min_count: int = 2) -> Vocabulary:
    """Vocabulary of tokens occurring at least min_count times, ordered by
    frequency (descending) then lexicographically, after PAD and UNK."""
    if min_count < 1:
        raise DataError(f"min_count must be >= 1, got {min_count}")
    counts: Counter[str] = Counter()
    for doc in dataset.documents:
        counts.update(tokenize(doc.text))
    kept = sorted(
        (t for t, c in counts.items() if c >= min_count),
        key=lambda t: (-counts[t], t),
    )
    index_to_token = [PAD_TOKEN, UNK_TOKEN] + kept
    return Vocabulary({t: i for i, t in enumerate(index_to_token)}, index_to_token)


@dataclass
class EmbeddingMatrix:
    values: np.ndarray
    embed_dim: int
    source: str  # "pretrained" or "random"

    def __post_init__(self):
        if self.values.shape[1] != self.embed_dim:
            raise DataError("embedding matrix width must equal embed_dim")
        if not np.all(np.isfinite(self.values)):
            raise DataError("embedding matrix contains non-finite entries")


def _random_rows(n: int, dim: int, seed: int) -> np.ndarray:
    # N(0, 0.1^2) per entry; a single seeded draw keeps rows a function of
    # (seed, row index) only.
    return np.random.default_rng(seed).normal(0.0, 0.1, size=(n, dim))


def random_embeddings(vocab: Vocabulary, embed_dim: int, seed: int = 0) -> EmbeddingMatrix:
    values = _random_rows(len(vocab), embed_dim, seed)
    values[PAD_INDEX] = 0.0
    return EmbeddingMatrix(values.astype(np.float32), embed_dim, "random")


def load_pretrained_embeddings(
    path: str | Path, vocab: Vocabulary, embed_dim: int, seed: int = 0
) -> EmbeddingMatrix:
    """Read whitespace-separated vectors ("token v1 ... vD" per line).

    Tokens present in the file keep their file rows verbatim; everything
    else (including UNK) falls back to the random scheme. PAD is zero.
    """
    values = _random_rows(len(vocab), embed_dim, seed)
    path = Path(path)
    if not path.exists():
        raise DataError(f"embedding file not found: {path}")
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                raise DataError(f"{path}:{lineno}: malformed embedding line")
            token, rest = parts[0], parts[1:]
            if len(rest) != embed_dim:
                raise DataError(
                    f"{path}:{lineno}: expected {embed_dim} values, got {len(rest)}"
                )
            idx = vocab.token_to_index.get(token)
            if idx is None:
                continue
            try:
                values[idx] = [float(x) for x in rest]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-numeric value") from exc
    values[PAD_INDEX] = 0.0
    return EmbeddingMatrix(values.astype(np.float32), embed_dim, "pretrained")


def _strip_headers(text: str) -> str:
    # Drop the leading header block (everything up to the first blank line).
    head, sep, body = text.partition("\n\n")
    return body if sep else text


def load_dataset(
    path: str | Path, format: str, strip_headers: bool = False
) -> LabeledDataset:
    if format not in DATASET_FORMATS:
        raise DataError(f"unknown dataset format {format!r}")
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset path not found: {path}")
    if format == "newsgroups_dirs":
        return _load_newsgroups_dirs(path, strip_headers)
    if format == "jsonl":
        return _load_jsonl(path)
    return _load_csv(path)


def _load_newsgroups_dirs(root: Path, strip_headers: bool) -> LabeledDataset:
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if len(class_dirs) < 2:
        raise DataError(f"{root}: need at least 2 class directories")
    documents: list[Document] = []
    class_names: list[str] = []
    for label, class_dir in enumerate(class_dirs):
        class_names.append(class_dir.name)
        files = sorted(p for p in class_dir.iterdir() if p.is_file())
        if not files:
            raise DataError(f"{class_dir}: empty class directory")
        for f in files:
            text = f.read_text(encoding="utf-8", errors="replace")
            if strip_headers:
                text = _strip_headers(text)
            documents.append(Document(f"{class_dir.name}/{f.name}", text, label))
    return LabeledDataset(documents, len(class_names), class_names)


def _records_to_dataset(records: list[tuple[str, str, int]], origin: str) -> LabeledDataset:
    if not records:
        raise DataError(f"{origin}: no documents")
    num_classes = max(label for _, _, label in records) + 1
    if num_classes < 2:
        raise DataError(f"{origin}: need at least 2 distinct labels")
    docs = [Document(i, t, l) for i, t, l in records]
    return LabeledDataset(docs, num_classes, [str(k) for k in range(num_classes)])


def _load_jsonl(path: Path) -> LabeledDataset:
    records = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON") from exc
            try:
                records.append((str(obj["id"]), str(obj["text"]), int(obj["label"])))
            except KeyError as exc:
                raise DataError(f"{path}:{lineno}: missing field {exc}") from exc
            if records[-1][2] < 0:
                raise DataError(f"{path}:{lineno}: negative label")
    return _records_to_dataset(records, str(path))


def _load_csv(path: Path) -> LabeledDataset:
    records = []
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"id", "text", "label"} <= set(reader.fieldnames):
            raise DataError(f"{path}: CSV must have header id,text,label")
        for lineno, row in enumerate(reader, start=2):
            try:
                records.append((row["id"], row["text"], int(row["label"])))
            except (TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: bad row") from exc
            if records[-1][2] < 0:
                raise DataError(f"{path}:{lineno}: negative label")
    return _records_to_dataset(records, str(path))


def save_jsonl(dataset: LabeledDataset, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for doc in dataset.documents:
            fh.write(
                json.dumps(
                    {"id": doc.id, "text": doc.text, "label": doc.label},
                    ensure_ascii=False,
                )
                + "\n"
            )


def _split_counts(n: int, fractions: tuple[float, float, float]) -> list[int]:
    exact = [n * f for f in fractions]
    counts = [int(np.floor(x)) for x in exact]
    remaining = n - sum(counts)
    # Largest-remainder allocation; ties resolved in train/valid/test order.
    order = sorted(range(3), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[:remaining]:
        counts[i] += 1
    # Every split must see every class; borrow from the largest split.
    while min(counts) == 0:
        counts[counts.index(max(counts))] -= 1
        counts[counts.index(min(counts))] += 1
    return counts


def split_dataset(
    dataset: LabeledDataset, spec: SplitSpec
) -> tuple[LabeledDataset, LabeledDataset, LabeledDataset]:
    """Seeded stratified split: per-class proportions track the requested
    fractions to within one document, and the three parts are disjoint
    and exhaustive."""
    by_class: dict[int, list[int]] = {}
    for idx, doc in enumerate(dataset.documents):
        by_class.setdefault(doc.label, []).append(idx)
    for label, idxs in sorted(by_class.items()):
        if len(idxs) < 3:
            raise DataError(
                f"class {dataset.class_names[label]!r} has {len(idxs)} documents; "
                "need at least 3 to populate train/valid/test"
            )
    rng = np.random.default_rng(spec.seed)
    fractions = (spec.train_fraction, spec.valid_fraction, spec.test_fraction)
    parts: tuple[list[int], list[int], list[int]] = ([], [], [])
    for label in sorted(by_class):
        idxs = np.array(by_class[label])
        idxs = idxs[rng.permutation(len(idxs))]
        n_train, n_valid, _ = _split_counts(len(idxs), fractions)
        parts[0].extend(idxs[:n_train])
        parts[1].extend(idxs[n_train : n_train + n_valid])
        parts[2].extend(idxs[n_train + n_valid :])
    out = []
    for part in parts:
        docs = [dataset.documents[i] for i in sorted(part)]
        out.append(LabeledDataset(docs, dataset.num_classes, list(dataset.class_names)))
    return out[0], out[1], out[2]


@dataclass
class EncodedDataset:
    """Token-id matrix plus labels and ids, ready for the network."""

    token_ids: np.ndarray  # [n, max_len] int64
    labels: np.ndarray  # [n] int64
    doc_ids: list[str]
    num_classes: int
    class_names: list[str] = field(default_factory=list)

    def __len__(self):
        return self.token_ids.shape[0]


def encode_dataset(
    dataset: LabeledDataset, vocab: Vocabulary, max_len: int
) -> EncodedDataset:
    ids = np.stack(
        [vocab.encode(tokenize(d.text), max_len) for d in dataset.documents]
    ) if dataset.documents else np.zeros((0, max_len), dtype=np.int64)
    return EncodedDataset(
        ids,
        dataset.labels(),
        [d.id for d in dataset.documents],
        dataset.num_classes,
        list(dataset.class_names),
    )
