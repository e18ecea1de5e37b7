"""HTTP triage service: serves the uncertainty-ranked queue, accepts
human labels into an append-only store, and reports live metrics.

Durability contract: a label is written and flushed to the store before
the request is acknowledged, and the store is replayed on startup, so
acknowledged labels survive restarts. Writers are serialized by a lock;
metric reads take the same lock and therefore see consistent snapshots.
"""
from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import FileResponse, HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .errors import DataError, LabelStoreError

FALLBACK_PAGE = """<!doctype html>
<html><head><title>triage queue</title></head>
<body><h1>Triage service is running</h1>
<p>No UI bundle was found. The JSON API is live: try
<a href="/api/queue">/api/queue</a> or <a href="/api/metrics">/api/metrics</a>.
Build the frontend and pass its dist directory via --ui to get the review UI.</p>
</body></html>"""


@dataclass
class TriageItem:
    instance_id: str
    text: str
    score: float
    predicted_class: int
    top3: list
    class_names: list = field(default_factory=list)
    true_label: int | None = None
    status: str = "pending"

    def to_payload(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "text": self.text,
            "score": self.score,
            "predicted_class": self.predicted_class,
            "top3": self.top3,
            "class_names": self.class_names,
            "status": self.status,
        }


class LabelSubmission(BaseModel):
    instance_id: str
    label: int
    reviewer: str = "anonymous"


class TriageState:
    def __init__(self, queue_path: str | Path, labels_path: str | Path):
        self.labels_path = Path(labels_path)
        self.lock = threading.Lock()
        self.items = self._load_queue(Path(queue_path))
        self.by_id = {item.instance_id: item for item in self.items}
        self.num_classes = self._infer_num_classes()
        self.labels: dict[str, dict] = {}
        self._replay()

    @staticmethod
    def _load_queue(path: Path) -> list[TriageItem]:
        if not path.exists():
            raise DataError(f"queue file not found: {path}")
        items = []
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    items.append(
                        TriageItem(
                            instance_id=str(obj["instance_id"]),
                            text=str(obj["text"]),
                            score=float(obj["score"]),
                            predicted_class=int(obj["predicted_class"]),
                            top3=list(obj.get("top3", [])),
                            class_names=list(obj.get("class_names", [])),
                            true_label=(
                                int(obj["true_label"]) if "true_label" in obj else None
                            ),
                        )
                    )
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise DataError(f"{path}:{lineno}: bad queue record: {exc}") from exc
        # Queue order is always score-descending regardless of file order.
        items.sort(key=lambda it: (-it.score, it.instance_id))
        return items

    def _infer_num_classes(self) -> int:
        n = 0
        for item in self.items:
            n = max(n, len(item.class_names), item.predicted_class + 1)
            if item.true_label is not None:
                n = max(n, item.true_label + 1)
        return n

    def _replay(self) -> None:
        if not self.labels_path.exists():
            return
        with self.labels_path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    instance_id = str(obj["instance_id"])
                    label = int(obj["label"])
                    reviewer = str(obj["reviewer"])
                    timestamp = str(obj["timestamp"])
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise LabelStoreError(
                        f"{self.labels_path}:{lineno}: corrupt store line: {exc}"
                    ) from exc
                if instance_id not in self.by_id:
                    raise LabelStoreError(
                        f"{self.labels_path}:{lineno}: unknown instance {instance_id!r}"
                    )
                if not 0 <= label < self.num_classes:
                    raise LabelStoreError(
                        f"{self.labels_path}:{lineno}: label {label} out of range"
                    )
                if instance_id in self.labels:
                    continue  # first write wins
                self.labels[instance_id] = {
                    "instance_id": instance_id,
                    "label": label,
                    "reviewer": reviewer,
                    "timestamp": timestamp,
                }
                self.by_id[instance_id].status = "labeled"

    def submit(self, sub: LabelSubmission) -> tuple[int, dict]:
        """Returns (http_status, payload). Appends to the store before
        mutating in-memory state (append-then-ack)."""
        with self.lock:
            item = self.by_id.get(sub.instance_id)
            if item is None:
                return 404, {"error": f"unknown instance {sub.instance_id!r}"}
            if sub.instance_id in self.labels:
                return 409, {
                    "error": "instance already labeled",
                    "label": self.labels[sub.instance_id]["label"],
                }
            if not 0 <= sub.label < max(self.num_classes, 1):
                return 400, {"error": f"label {sub.label} out of range"}
            record = {
                "instance_id": sub.instance_id,
                "label": sub.label,
                "reviewer": sub.reviewer,
                "timestamp": datetime.now(timezone.utc).isoformat(),
            }
            with self.labels_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            self.labels[sub.instance_id] = record
            item.status = "labeled"
            return 201, {"acknowledged": True, "metrics": self._metrics_locked()}

    def queue_payload(self, limit: int | None, status: str | None) -> list[dict]:
        with self.lock:
            items = [
                it.to_payload()
                for it in self.items
                if status is None or it.status == status
            ]
        return items[:limit] if limit is not None else items

    def doc_payload(self, instance_id: str) -> dict | None:
        with self.lock:
            item = self.by_id.get(instance_id)
            if item is None:
                return None
            payload = item.to_payload()
            if item.true_label is not None:
                payload["true_label"] = item.true_label
            return payload

    def metrics(self) -> dict:
        with self.lock:
            return self._metrics_locked()

    def _metrics_locked(self) -> dict:
        total = len(self.items)
        labeled = len(self.labels)
        agreements = sum(
            1
            for iid, rec in self.labels.items()
            if rec["label"] == self.by_id[iid].predicted_class
        )
        has_truth = total > 0 and all(it.true_label is not None for it in self.items)
        payload = {
            "total": total,
            "labeled_count": labeled,
            "coverage": labeled / total if total else 0.0,
            "agreement_rate": agreements / labeled if labeled else 0.0,
            "has_ground_truth": has_truth,
            "model_accuracy_on_kept": None,
            "combined_accuracy": None,
        }
        if has_truth:
            kept = [it for it in self.items if it.instance_id not in self.labels]
            kept_correct = sum(1 for it in kept if it.predicted_class == it.true_label)
            if kept:
                payload["model_accuracy_on_kept"] = kept_correct / len(kept)
            # Human labels count as ground truth, so every labeled item is
            # correct in the combined view.
            payload["combined_accuracy"] = (kept_correct + labeled) / total
        return payload


def create_app(
    queue_path: str | Path,
    labels_path: str | Path,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    state = TriageState(queue_path, labels_path)
    app = FastAPI(title="triage queue")
    app.state.triage = state

    @app.get("/api/queue")
    def get_queue(limit: int | None = None, status: str | None = None):
        if status is not None and status not in ("pending", "labeled"):
            return JSONResponse({"error": f"unknown status {status!r}"}, status_code=400)
        return state.queue_payload(limit, status)

    @app.get("/api/docs/{instance_id}")
    def get_doc(instance_id: str):
        payload = state.doc_payload(instance_id)
        if payload is None:
            return JSONResponse(
                {"error": f"unknown instance {instance_id!r}"}, status_code=404
            )
        return payload

    @app.post("/api/labels")
    def post_label(sub: LabelSubmission):
        status_code, payload = state.submit(sub)
        return JSONResponse(payload, status_code=status_code)

    @app.get("/api/metrics")
    def get_metrics():
        return state.metrics()

    index_file = None
    if ui_dir is not None:
        ui_dir = Path(ui_dir)
        candidate = ui_dir / "index.html"
        if candidate.exists():
            index_file = candidate
        assets = ui_dir / "assets"
        if assets.is_dir():
            app.mount("/assets", StaticFiles(directory=assets), name="assets")

    @app.get("/", response_class=HTMLResponse)
    def root():
        if index_file is not None:
            return FileResponse(index_file)
        return HTMLResponse(FALLBACK_PAGE)

    return app


def serve(
    queue_path: str | Path,
    labels_path: str | Path,
    host: str = "127.0.0.1",
    port: int = 8321,
    ui_dir: str | Path | None = None,
) -> None:
    import uvicorn

    uvicorn.run(create_app(queue_path, labels_path, ui_dir), host=host, port=port)
