"""Score test documents with all four uncertainty scorers and show how
the histogram-entropy pipeline turns sampled predictions into a score.

Run: python3 demos/03_uncertainty_scores.py
"""
import numpy as np

from udc.corpus import SplitSpec, build_vocab, encode_dataset, random_embeddings, split_dataset
from udc.datagen import synthetic_topic_corpus
from udc.nn import EncoderConfig, ModelState
from udc.training import TrainConfig, train
from udc.uncertainty import (
    ScorerConfig,
    bin_count,
    de_score,
    deterministic_features,
    entropy,
    mask_top_m,
    mc_sample,
    normalize,
    score_dataset,
)

SEED = 3
dataset = synthetic_topic_corpus(num_classes=4, docs_per_class=150, seed=SEED)
train_set, valid_set, test_set = split_dataset(dataset, SplitSpec(seed=SEED))
vocab = build_vocab(train_set, min_count=2)
enc_cfg = EncoderConfig(num_classes=4, embed_dim=24, filters_per_kernel=24,
                        dropout_p=0.5, max_len=100)
model = ModelState(enc_cfg, len(vocab), rng_seed=SEED,
                   embedding_values=random_embeddings(vocab, 24, seed=SEED).values)
train_enc = encode_dataset(train_set, vocab, enc_cfg.max_len)
valid_enc = encode_dataset(valid_set, vocab, enc_cfg.max_len)
test_enc = encode_dataset(test_set, vocab, enc_cfg.max_len)
result = train(model, train_enc, valid_enc, TrainConfig(max_epochs=4, patience=4, seed=SEED))
model = result.model

print("== the pipeline on one instance ==")
samples = mc_sample(model, test_enc, num_samples=50, seed=0)
row = samples.sampled_classes[0]
hist = bin_count(row, 4)
masked = mask_top_m(hist, 4)  # identity: only 4 classes
probs = normalize(masked)
print(f"  sampled classes (50 passes): {row.tolist()}")
print(f"  bin count:  {hist.tolist()}")
print(f"  masked:     {masked.tolist()} (c <= 10, mask skipped)")
print(f"  normalized: {np.round(probs, 3).tolist()}")
print(f"  entropy:    {entropy(probs):.4f}")

print("\n== all scorers, five most uncertain documents each ==")
train_feats = deterministic_features(model, train_enc)
for kind in ("dropout_entropy", "dropout_baseline", "pl_variance", "distance_knn"):
    cfg = ScorerConfig(kind, num_samples=50, knn_k=10, seed=0)
    scores = score_dataset(model, test_enc, cfg, train_feats)
    top = sorted(scores, key=lambda s: -s.value)[:5]
    wrong = sum(1 for s in top if s.predicted_class != s.true_label)
    print(f"  {kind:17}: top-5 scores {[round(s.value, 3) for s in top]} "
          f"({wrong}/5 are model errors)")

print("\n== uncertainty separates right from wrong ==")
des = de_score(model, test_enc, ScorerConfig("dropout_entropy", num_samples=100, seed=0))
right = [s.value for s in des if s.predicted_class == s.true_label]
wrong = [s.value for s in des if s.predicted_class != s.true_label]
print(f"  mean score on correct predictions: {np.mean(right):.4f}")
print(f"  mean score on wrong predictions:   {np.mean(wrong):.4f}")
