"""Command-line entry point.

Subcommands: train, score, evaluate, export-features, triage-export,
serve. Flags override config-file values. Exit codes: 0 success,
1 usage error, 2 data/model error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import checkpoint, corpus, evaluation, uncertainty
from .config import RunConfig, load_run_config, write_effective_config
from .errors import ConfigError, UdcError
from .metric import distance_statistics, partition_by_class
from .nn import EncoderConfig, ModelState
from .training import train, write_train_log


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        raise UsageError(message)


def _load_splits(cfg: RunConfig):
    if not cfg.dataset.path:
        raise ConfigError("dataset.path is required")
    dataset = corpus.load_dataset(
        cfg.dataset.path, cfg.dataset.format, cfg.dataset.strip_headers
    )
    return dataset, corpus.split_dataset(dataset, cfg.split)


def _encoder_config(cfg: RunConfig, num_classes: int) -> EncoderConfig:
    e = cfg.encoder
    return EncoderConfig(
        num_classes=num_classes,
        embed_dim=e.embed_dim,
        kernel_sizes=tuple(e.kernel_sizes),
        filters_per_kernel=e.filters_per_kernel,
        dropout_p=e.dropout_p,
        max_len=e.max_len,
    )


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _train_once(cfg: RunConfig, train_set, valid_set, vocab, out: Path, tag: str = ""):
    enc_cfg = _encoder_config(cfg, train_set.num_classes)
    if cfg.embeddings.path:
        emb = corpus.load_pretrained_embeddings(
            cfg.embeddings.path, vocab, cfg.embeddings.dim, cfg.embeddings.seed
        )
    else:
        emb = corpus.random_embeddings(vocab, cfg.embeddings.dim, cfg.embeddings.seed)
    if emb.embed_dim != enc_cfg.embed_dim:
        raise ConfigError(
            f"embeddings.dim={emb.embed_dim} does not match encoder.embed_dim={enc_cfg.embed_dim}"
        )
    model = ModelState(
        enc_cfg,
        vocab_size=len(vocab),
        rng_seed=cfg.train.seed,
        embedding_values=emb.values,
        freeze_embedding=cfg.encoder.freeze_embedding,
    )
    model.class_names = list(train_set.class_names)
    train_enc = corpus.encode_dataset(train_set, vocab, enc_cfg.max_len)
    valid_enc = corpus.encode_dataset(valid_set, vocab, enc_cfg.max_len)
    result = train(model, train_enc, valid_enc, cfg.train, cfg.metric.to_metric_config())
    suffix = f"_{tag}" if tag else ""
    checkpoint.save_checkpoint(result.model, out / f"checkpoint{suffix}.udc")
    write_train_log(result.log, out / f"train_log{suffix}.csv")
    return result


def cmd_train(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    _, (train_set, valid_set, _) = _load_splits(cfg)
    vocab = corpus.build_vocab(train_set, cfg.vocab.min_count)
    vocab.save(out / "vocab.json")
    write_effective_config(cfg, out / "effective_config.yaml")
    if cfg.sweep:
        rows = ["margin,lambda_weight,best_epoch,best_val_micro_f1"]
        for point in cfg.sweep:
            cfg.metric.enable = True
            cfg.metric.margin = point.margin
            cfg.metric.lambda_weight = point.lambda_weight
            tag = f"m{point.margin}_l{point.lambda_weight}"
            result = _train_once(cfg, train_set, valid_set, vocab, out, tag)
            rows.append(
                f"{point.margin},{point.lambda_weight},"
                f"{result.best_epoch},{result.best_val_micro_f1!r}"
            )
            print(f"sweep {tag}: best val micro-F1 {result.best_val_micro_f1:.4f}")
        (out / "sweep_summary.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
        return 0
    result = _train_once(cfg, train_set, valid_set, vocab, out)
    last = result.log[-1]
    print(
        f"trained {last.epoch} epochs; best val micro-F1 "
        f"{result.best_val_micro_f1:.4f} at epoch {result.best_epoch}"
    )
    return 0


def _load_model_and_split(cfg: RunConfig, checkpoint_path: Path, split: str):
    _, (train_set, valid_set, test_set) = _load_splits(cfg)
    chosen = {"train": train_set, "valid": valid_set, "test": test_set}[split]
    vocab = corpus.Vocabulary.load(Path(cfg.output_dir) / "vocab.json")
    model = checkpoint.load_checkpoint(checkpoint_path)
    if model.vocab_size != len(vocab):
        raise ConfigError(
            f"checkpoint vocab size {model.vocab_size} does not match vocab.json ({len(vocab)})"
        )
    enc = corpus.encode_dataset(chosen, vocab, model.config.max_len)
    return model, vocab, enc, (train_set, valid_set, test_set)


def _scores_path(out: Path, kind: str) -> Path:
    return out / f"scores_{kind}.jsonl"


def write_scores_jsonl(scores, path: Path) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for s in scores:
            record = {
                "id": s.instance_id,
                "scorer": s.scorer,
                "score": s.value,
                "predicted_class": s.predicted_class,
            }
            if s.histogram is not None:
                record["histogram"] = s.histogram
            if s.true_label is not None:
                record["true_label"] = s.true_label
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_scores_jsonl(path: Path) -> list[dict]:
    records = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    return records


def cmd_score(cfg: RunConfig, checkpoint_path: Path, split: str) -> int:
    out = _out_dir(cfg)
    model, vocab, enc, (train_set, _, _) = _load_model_and_split(cfg, checkpoint_path, split)
    train_features = None
    if any(s.kind == "distance_knn" for s in cfg.scorers):
        train_enc = corpus.encode_dataset(train_set, vocab, model.config.max_len)
        train_features = uncertainty.deterministic_features(model, train_enc)
    for scorer_cfg in cfg.scorers:
        scores = uncertainty.score_dataset(model, enc, scorer_cfg, train_features)
        path = _scores_path(out, scorer_cfg.kind)
        write_scores_jsonl(scores, path)
        print(f"wrote {len(scores)} scores to {path}")
    return 0


def _predictions_from_records(records: list[dict]) -> list[evaluation.ScoredPrediction]:
    preds = []
    for r in records:
        if "true_label" not in r:
            raise UdcError(f"score record {r.get('id')!r} lacks true_label")
        preds.append(
            evaluation.ScoredPrediction(
                r["id"], int(r["predicted_class"]), int(r["true_label"]), float(r["score"])
            )
        )
    return preds


def cmd_evaluate(cfg: RunConfig, score_files: list[Path]) -> int:
    out = _out_dir(cfg)
    if not score_files:
        score_files = sorted(_out_dir(cfg).glob("scores_*.jsonl"))
    if not score_files:
        raise UdcError("no score files given and none found in the output directory")
    all_rows: list[evaluation.EvalRow] = []
    ids_seen = None
    for path in score_files:
        records = read_scores_jsonl(path)
        ids = sorted(r["id"] for r in records)
        if ids_seen is None:
            ids_seen = ids
        elif ids != ids_seen:
            raise UdcError(f"{path}: instance set differs from the first score file")
        preds = _predictions_from_records(records)
        scorer = records[0]["scorer"] if records else path.stem
        for mode in cfg.deferral.modes:
            policy = evaluation.DeferralPolicy(tuple(cfg.deferral.ratios), mode)
            all_rows.extend(evaluation.evaluate(preds, policy, scorer).rows)
            base = evaluation.evaluate(
                preds, evaluation.DeferralPolicy((0.0,), mode), scorer
            ).rows[0]
            for ratio in cfg.deferral.ratios:
                mean = evaluation.random_deferral_baseline(
                    preds, ratio, cfg.deferral.random_trials, cfg.seed, mode
                )
                improvement = (
                    (mean["micro_f1"] - base.micro_f1) / base.micro_f1
                    if base.micro_f1 > 0
                    else 0.0
                )
                all_rows.append(
                    evaluation.EvalRow(
                        f"{scorer}+random", ratio, mode, mean["accuracy"],
                        mean["micro_f1"], mean["macro_f1"], improvement,
                        evaluation.deferred_count(len(preds), ratio),
                    )
                )
    evaluation.write_report_csv(all_rows, out / "report.csv", cfg.seed)
    table = evaluation.format_report_table(all_rows)
    (out / "report.txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    return 0


def cmd_export_features(cfg: RunConfig, checkpoint_path: Path, split: str) -> int:
    out = _out_dir(cfg)
    model, _, enc, _ = _load_model_and_split(cfg, checkpoint_path, split)
    feats = uncertainty.deterministic_features(model, enc)
    path = out / f"features_{split}.csv"
    dim = feats.dim
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write("id,label," + ",".join(f"f_{i}" for i in range(dim)) + "\n")
        for i, doc_id in enumerate(enc.doc_ids):
            row = ",".join(repr(float(x)) for x in feats.features[i])
            fh.write(f"{doc_id},{enc.labels[i]},{row}\n")
    stats = distance_statistics(feats, partition_by_class(enc.labels))
    print(
        f"wrote {len(enc)} x {dim} features to {path}\n"
        f"distance statistics: mean_intra={stats.mean_intra:.6g} "
        f"mean_inter={stats.mean_inter:.6g} ratio={stats.ratio:.6g}"
    )
    return 0


def cmd_triage_export(
    cfg: RunConfig, scores_path: Path, ratio: float, include_truth: bool = True
) -> int:
    out = _out_dir(cfg)
    dataset = corpus.load_dataset(
        cfg.dataset.path, cfg.dataset.format, cfg.dataset.strip_headers
    )
    by_id = {d.id: d for d in dataset.documents}
    records = read_scores_jsonl(scores_path)
    missing = [r["id"] for r in records if r["id"] not in by_id]
    if missing:
        raise UdcError(f"score ids missing from the dataset: {missing[:5]}")
    ranked = sorted(records, key=lambda r: (-r["score"], r["id"]))
    cut = evaluation.deferred_count(len(ranked), ratio)
    queue_path = out / "triage_queue.jsonl"
    with queue_path.open("w", encoding="utf-8") as fh:
        for r in ranked[:cut]:
            doc = by_id[r["id"]]
            hist = r.get("histogram")
            if hist:
                total = sum(hist) or 1
                order = sorted(range(len(hist)), key=lambda c: (-hist[c], c))[:3]
                top3 = [[c, hist[c] / total] for c in order]
            else:
                top3 = [[int(r["predicted_class"]), 1.0]]
            item = {
                "instance_id": r["id"],
                "text": doc.text,
                "score": r["score"],
                "predicted_class": int(r["predicted_class"]),
                "top3": top3,
                "class_names": dataset.class_names,
            }
            if include_truth and "true_label" in r:
                item["true_label"] = int(r["true_label"])
            fh.write(json.dumps(item, sort_keys=True) + "\n")
    print(f"wrote {cut} triage items to {queue_path}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="udc", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="YAML run config")
    common.add_argument("--seed", type=int, default=None, help="master seed override")
    common.add_argument("--out", type=str, default=None, help="output directory override")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common])
    p = sub.add_parser("score", parents=[common])
    p.add_argument("--checkpoint", type=Path, default=None)
    p.add_argument("--split", choices=["train", "valid", "test"], default="test")
    p = sub.add_parser("evaluate", parents=[common])
    p.add_argument("scores", nargs="*", type=Path)
    p = sub.add_parser("export-features", parents=[common])
    p.add_argument("--checkpoint", type=Path, default=None)
    p.add_argument("--split", choices=["train", "valid", "test"], default="test")
    p = sub.add_parser("triage-export", parents=[common])
    p.add_argument("--scores", type=Path, default=None)
    p.add_argument("--ratio", type=float, default=0.2)
    p.add_argument("--no-truth", action="store_true")
    p = sub.add_parser("serve", parents=[common])
    p.add_argument("--queue", type=Path, required=True)
    p.add_argument("--labels", type=Path, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--ui", type=Path, default=None, help="built UI bundle directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_run_config(
            getattr(args, "config", None),
            {"seed": getattr(args, "seed", None), "output_dir": getattr(args, "out", None)},
        )
        out = Path(cfg.output_dir)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "score":
            ckpt = args.checkpoint or out / "checkpoint.udc"
            return cmd_score(cfg, ckpt, args.split)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, list(args.scores))
        if args.command == "export-features":
            ckpt = args.checkpoint or out / "checkpoint.udc"
            return cmd_export_features(cfg, ckpt, args.split)
        if args.command == "triage-export":
            scores = args.scores or out / "scores_dropout_entropy.jsonl"
            return cmd_triage_export(cfg, scores, args.ratio, not args.no_truth)
        if args.command == "serve":
            from .service import serve  # deferred: uvicorn import is heavy

            serve(args.queue, args.labels, args.host, args.port, args.ui)
            return 0
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (UdcError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
