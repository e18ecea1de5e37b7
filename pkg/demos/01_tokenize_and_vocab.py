"""Walk through the corpus pipeline: tokenize, build a vocabulary,
attach embeddings, and make a stratified split.

Run: python3 demos/01_tokenize_and_vocab.py
"""
from udc.corpus import (
    SplitSpec,
    build_vocab,
    random_embeddings,
    split_dataset,
    tokenize,
)
from udc.datagen import synthetic_topic_corpus

print("== tokenizer ==")
for text in ("The cat sat.", "Re: FAQ v2.0", '"(quoted)" words'):
    print(f"  {text!r:28} -> {tokenize(text)}")

print("\n== synthetic corpus ==")
dataset = synthetic_topic_corpus(num_classes=4, docs_per_class=50, seed=0)
print(f"  {len(dataset)} documents over classes {dataset.class_names}")
print(f"  sample: {dataset.documents[0].id}: {dataset.documents[0].text[:60]}...")

print("\n== vocabulary ==")
vocab = build_vocab(dataset, min_count=2)
print(f"  {len(vocab)} tokens; most frequent after PAD/UNK: {vocab.index_to_token[2:8]}")

print("\n== embeddings ==")
emb = random_embeddings(vocab, embed_dim=16, seed=0)
print(f"  matrix {emb.values.shape}, source={emb.source}, PAD row zero: "
      f"{bool((emb.values[0] == 0).all())}")

print("\n== stratified split ==")
train, valid, test = split_dataset(dataset, SplitSpec(0.7, 0.1, 0.2, seed=0))
print(f"  train/valid/test = {len(train)}/{len(valid)}/{len(test)}")
for name, part in (("train", train), ("valid", valid), ("test", test)):
    counts = {}
    for doc in part.documents:
        counts[doc.label] = counts.get(doc.label, 0) + 1
    print(f"  {name:5} per-class counts: {dict(sorted(counts.items()))}")
