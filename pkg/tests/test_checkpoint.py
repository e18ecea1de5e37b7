import numpy as np
import pytest

from udc.checkpoint import MAGIC, load_checkpoint, save_checkpoint
from udc.errors import CheckpointError
from udc.nn import EncoderConfig, ModelState

from conftest import small_model


def make_f32_model(**kwargs):
    return small_model(dtype=np.float32, **kwargs)


class TestRoundTrip:
    def test_bit_exact(self, tmp_path):
        model = make_f32_model(seed=5)
        path = tmp_path / "m.udc"
        save_checkpoint(model, path)
        loaded = load_checkpoint(path)
        for a, b in zip(model.parameters(), loaded.parameters()):
            assert a.value.dtype == b.value.dtype == np.float32
            assert np.array_equal(a.value, b.value), a.name
        assert loaded.config == model.config
        assert loaded.class_names == model.class_names
        assert loaded.rng_seed == model.rng_seed

    def test_save_load_save_identical_bytes(self, tmp_path):
        model = make_f32_model(seed=2)
        p1, p2 = tmp_path / "a.udc", tmp_path / "b.udc"
        save_checkpoint(model, p1)
        save_checkpoint(load_checkpoint(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_class_names_preserved(self, tmp_path):
        model = make_f32_model()
        model.class_names = ["alpha", "beta", "gamma"]
        save_checkpoint(model, tmp_path / "m.udc")
        assert load_checkpoint(tmp_path / "m.udc").class_names == ["alpha", "beta", "gamma"]


class TestRejection:
    def test_corrupt_magic(self, tmp_path):
        model = make_f32_model()
        path = tmp_path / "m.udc"
        save_checkpoint(model, path)
        raw = bytearray(path.read_bytes())
        raw[:8] = b"NOTMODEL"
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(path)

    def test_truncated_file(self, tmp_path):
        model = make_f32_model()
        path = tmp_path / "m.udc"
        save_checkpoint(model, path)
        path.write_bytes(path.read_bytes()[:-20])
        with pytest.raises(CheckpointError, match="truncated"):
            load_checkpoint(path)

    def test_trailing_garbage(self, tmp_path):
        model = make_f32_model()
        path = tmp_path / "m.udc"
        save_checkpoint(model, path)
        path.write_bytes(path.read_bytes() + b"xx")
        with pytest.raises(CheckpointError, match="trailing"):
            load_checkpoint(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError, match="not found"):
            load_checkpoint(tmp_path / "nope.udc")

    def test_config_mismatch(self, tmp_path):
        model = make_f32_model(filters=4)
        path = tmp_path / "m.udc"
        save_checkpoint(model, path)
        other = EncoderConfig(
            num_classes=3, embed_dim=5, kernel_sizes=(2, 3),
            filters_per_kernel=8, dropout_p=0.0, max_len=8,
        )
        with pytest.raises(CheckpointError, match="does not match"):
            load_checkpoint(path, expected_config=other)

    def test_magic_prefix_only(self, tmp_path):
        path = tmp_path / "m.udc"
        path.write_bytes(MAGIC)
        with pytest.raises(CheckpointError):
            load_checkpoint(path)
