import pytest
import yaml

from udc.config import (
    RunConfig,
    config_from_dict,
    load_run_config,
    read_effective_config,
    write_effective_config,
)
from udc.errors import ConfigError


def test_defaults_materialized():
    cfg = RunConfig()
    d = cfg.to_dict()
    assert d["train"]["batch_size"] == 32
    assert d["train"]["learning_rate"] == 0.001
    assert d["encoder"]["kernel_sizes"] == [3, 4, 5]
    assert d["metric"]["lambda_weight"] == 0.1
    assert d["deferral"]["ratios"] == [0.0, 0.1, 0.2, 0.3, 0.4]
    assert [s["kind"] for s in d["scorers"]] == [
        "dropout_entropy", "dropout_baseline", "pl_variance", "distance_knn",
    ]


def test_round_trip_lossless(tmp_path):
    cfg = config_from_dict(
        {
            "dataset": {"path": "data.jsonl", "format": "jsonl"},
            "seed": 13,
            "train": {"learning_rate": 0.0005, "max_epochs": 7},
            "metric": {"enable": False, "margin": 2.5},
            "sweep": [{"margin": 0.5, "lambda_weight": 0.1}],
        }
    )
    path = tmp_path / "effective.yaml"
    write_effective_config(cfg, path)
    again = read_effective_config(path)
    assert again == cfg
    # and a second emission is byte-identical
    path2 = tmp_path / "effective2.yaml"
    write_effective_config(again, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_master_seed_inheritance():
    cfg = config_from_dict({"seed": 99})
    assert cfg.split.seed == 99
    assert cfg.train.seed == 99
    assert cfg.embeddings.seed == 99
    assert all(s.seed == 99 for s in cfg.scorers)


def test_explicit_sub_seed_wins():
    cfg = config_from_dict({"seed": 99, "split": {"seed": 5}})
    assert cfg.split.seed == 5
    assert cfg.train.seed == 99


def test_flag_overrides(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump({"seed": 1, "output_dir": "orig"}))
    cfg = load_run_config(path, {"seed": 42, "output_dir": "elsewhere"})
    assert cfg.seed == 42
    assert cfg.split.seed == 42
    assert cfg.output_dir == "elsewhere"


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown config keys"):
        config_from_dict({"dataset": {}, "mystery": 1})


def test_bad_section_type_rejected():
    with pytest.raises(ConfigError):
        config_from_dict({"train": [1, 2]})


def test_unknown_scorer_kind_rejected():
    with pytest.raises(Exception):
        config_from_dict({"scorers": [{"kind": "nope"}]})


def test_missing_config_file():
    with pytest.raises(ConfigError, match="not found"):
        load_run_config("/does/not/exist.yaml")
