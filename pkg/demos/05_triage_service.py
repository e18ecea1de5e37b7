"""End-to-end triage: train, score, export the most uncertain documents
as a review queue, then drive the HTTP service in-process the way a
human reviewer (or the web UI) would.

Run: python3 demos/05_triage_service.py
"""
import json
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from udc.cli import main
from udc.corpus import save_jsonl
from udc.datagen import synthetic_topic_corpus
from udc.service import create_app

workdir = Path(tempfile.mkdtemp(prefix="udc_demo_"))
out = workdir / "out"
save_jsonl(synthetic_topic_corpus(num_classes=4, docs_per_class=60, seed=2),
           workdir / "corpus.jsonl")
(workdir / "run.yaml").write_text(f"""\
dataset: {{path: {workdir}/corpus.jsonl, format: jsonl}}
vocab: {{min_count: 1}}
embeddings: {{dim: 16}}
encoder: {{embed_dim: 16, kernel_sizes: [3, 4], filters_per_kernel: 8, dropout_p: 0.5, max_len: 60}}
train: {{batch_size: 16, max_epochs: 3, patience: 5}}
scorers: [{{kind: dropout_entropy, num_samples: 50}}]
output_dir: {out}
seed: 2
""")

for argv in (
    ["train", "--config", str(workdir / "run.yaml")],
    ["score", "--config", str(workdir / "run.yaml")],
    ["triage-export", "--config", str(workdir / "run.yaml"), "--ratio", "0.25"],
):
    assert main(argv) == 0, argv

queue_path = out / "triage_queue.jsonl"
labels_path = out / "labels.jsonl"
print(f"\nqueue written to {queue_path}")

client = TestClient(create_app(queue_path, labels_path))
items = client.get("/api/queue", params={"status": "pending", "limit": 3}).json()
print(f"\ntop {len(items)} most uncertain documents:")
for it in items:
    top3 = ", ".join(f"{it['class_names'][c]}:{f:.2f}" for c, f in it["top3"])
    print(f"  {it['instance_id']}  score={it['score']:.3f}  model says [{top3}]")

print("\nlabeling them with the model's own top guess...")
for it in items:
    resp = client.post("/api/labels", json={
        "instance_id": it["instance_id"],
        "label": it["predicted_class"],
        "reviewer": "demo",
    })
    assert resp.status_code == 201

metrics = client.get("/api/metrics").json()
print(f"live metrics: {json.dumps(metrics, indent=2)}")
print("\nTo review in a browser instead:")
print(f"  udc serve --queue {queue_path} --labels {labels_path} --ui frontend/dist")
