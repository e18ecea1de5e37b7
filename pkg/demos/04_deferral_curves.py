"""Selective prediction: defer the most uncertain fraction of the test
set to perfect experts and watch the metric table improve, compared with
deferring a random subset of the same size.

Run: python3 demos/04_deferral_curves.py
"""
from udc.corpus import SplitSpec, build_vocab, encode_dataset, random_embeddings, split_dataset
from udc.datagen import synthetic_topic_corpus
from udc.evaluation import (
    DeferralPolicy,
    ScoredPrediction,
    evaluate,
    format_report_table,
    random_deferral_baseline,
)
from udc.nn import EncoderConfig, ModelState
from udc.training import TrainConfig, train
from udc.uncertainty import ScorerConfig, de_score

SEED = 9
dataset = synthetic_topic_corpus(num_classes=4, docs_per_class=200, seed=SEED)
train_set, valid_set, test_set = split_dataset(dataset, SplitSpec(seed=SEED))
vocab = build_vocab(train_set, min_count=2)
enc_cfg = EncoderConfig(num_classes=4, embed_dim=24, filters_per_kernel=24,
                        dropout_p=0.5, max_len=100)
model = ModelState(enc_cfg, len(vocab), rng_seed=SEED,
                   embedding_values=random_embeddings(vocab, 24, seed=SEED).values)
result = train(
    model,
    encode_dataset(train_set, vocab, enc_cfg.max_len),
    encode_dataset(valid_set, vocab, enc_cfg.max_len),
    TrainConfig(max_epochs=4, patience=4, seed=SEED),
)
test_enc = encode_dataset(test_set, vocab, enc_cfg.max_len)
scores = de_score(result.model, test_enc, ScorerConfig("dropout_entropy", 100, seed=SEED))
preds = [
    ScoredPrediction(s.instance_id, s.predicted_class, int(t), s.value)
    for s, t in zip(scores, test_enc.labels)
]

rows = []
for mode in ("remaining_only", "combined"):
    rows.extend(evaluate(preds, DeferralPolicy(mode=mode), scorer="dropout_entropy").rows)
print(format_report_table(rows))

print("\nrandom-deferral control at the same ratios (kept-set micro-F1):")
for ratio in (0.1, 0.2, 0.3, 0.4):
    mean = random_deferral_baseline(preds, ratio, trials=100, seed=SEED)
    de_row = next(r for r in rows if r.mode == "remaining_only" and r.ratio == ratio)
    print(f"  r={ratio:.1f}: random {mean['micro_f1']:.3f}  vs  ranked {de_row.micro_f1:.3f}")
