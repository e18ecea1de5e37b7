"""Seeded synthetic topic corpora for demos, fixtures, and desk-scale runs.

Documents are bags of pseudo-words drawn from Zipf-weighted per-class
topic vocabularies mixed with a shared background vocabulary. A
configurable fraction of documents blends two classes' topic words,
creating genuinely ambiguous instances whose errors an uncertainty
scorer should be able to find.
"""
from __future__ import annotations

import numpy as np

from .corpus import Document, LabeledDataset

CLASS_NAMES = [
    "sci.space", "rec.sport.hockey", "comp.graphics", "talk.politics.misc",
    "sci.med", "rec.autos", "comp.windows.x", "soc.religion.christian",
    "sci.electronics", "rec.motorcycles", "comp.sys.mac.hardware", "talk.religion.misc",
    "sci.crypt", "rec.sport.baseball", "comp.os.ms-windows.misc", "alt.atheism",
    "misc.forsale", "talk.politics.guns", "comp.sys.ibm.pc.hardware", "talk.politics.mideast",
]

_CONSONANTS = "bcdfghjklmnprstvwz"
_VOWELS = "aeiou"


def _word_list(rng: np.random.Generator, count: int, syllables: int) -> list[str]:
    sylls = [c + v for c in _CONSONANTS for v in _VOWELS]
    words: set[str] = set()
    while len(words) < count:
        words.add("".join(rng.choice(sylls) for _ in range(syllables)))
    return sorted(words)


def _zipf_weights(n: int) -> np.ndarray:
    w = 1.0 / (np.arange(n) + 2.0)
    return w / w.sum()


def synthetic_topic_corpus(
    num_classes: int = 4,
    docs_per_class: int = 700,
    seed: int = 0,
    ambiguous_fraction: float = 0.25,
    topic_word_share: float = 0.55,
    words_per_class: int = 60,
    background_words: int = 240,
    doc_length: tuple[int, int] = (30, 90),
) -> LabeledDataset:
    """Generate a labeled corpus; deterministic for a given seed."""
    if not 2 <= num_classes <= len(CLASS_NAMES):
        raise ValueError(f"num_classes must lie in [2, {len(CLASS_NAMES)}]")
    rng = np.random.default_rng(seed)
    pool = _word_list(rng, num_classes * words_per_class + background_words, 3)
    topics = [
        pool[i * words_per_class : (i + 1) * words_per_class] for i in range(num_classes)
    ]
    background = pool[num_classes * words_per_class :]
    topic_w = _zipf_weights(words_per_class)
    background_w = _zipf_weights(len(background))
    documents = []
    for label in range(num_classes):
        for j in range(docs_per_class):
            ambiguous = rng.random() < ambiguous_fraction
            other = int(rng.integers(num_classes - 1))
            other = other if other < label else other + 1
            length = int(rng.integers(doc_length[0], doc_length[1] + 1))
            words = []
            for _ in range(length):
                if rng.random() < topic_word_share:
                    # Ambiguous documents draw nearly half their topic
                    # words from another class.
                    source = other if (ambiguous and rng.random() < 0.45) else label
                    words.append(topics[source][rng.choice(words_per_class, p=topic_w)])
                else:
                    words.append(background[rng.choice(len(background), p=background_w)])
            # Light punctuation so the corpus exercises the tokenizer.
            text = " ".join(words) + "."
            documents.append(Document(f"{CLASS_NAMES[label]}/{j:05d}", text, label))
    return LabeledDataset(documents, num_classes, CLASS_NAMES[:num_classes])
