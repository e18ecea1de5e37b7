import math

import numpy as np
import pytest

from udc.errors import TrainingError
from udc.nn import (
    DropoutMode,
    EncoderConfig,
    ModelState,
    apply_dropout,
    backward,
    forward,
    softmax,
    softmax_cross_entropy,
)
from udc.training import TrainConfig

from conftest import random_token_batch, small_model

GRAD_STEP = 1e-5  # central-difference step for float64 checks


def central_diff(fn, array, indices, h=GRAD_STEP):
    """Finite-difference oracle: d fn / d array[i] for the given flat indices."""
    flat = array.ravel()
    out = {}
    for i in indices:
        orig = flat[i]
        flat[i] = orig + h
        plus = fn()
        flat[i] = orig - h
        minus = fn()
        flat[i] = orig
        out[i] = (plus - minus) / (2.0 * h)
    return out


def max_rel_err(analytic, numeric):
    worst = 0.0
    for i, fd in numeric.items():
        denom = max(abs(fd), abs(analytic[i]), 1e-8)
        worst = max(worst, abs(fd - analytic[i]) / denom)
    return worst


class TestForward:
    def test_all_pad_deterministic_and_repeatable(self):
        model = small_model()
        ids = np.zeros((2, 8), dtype=np.int64)
        logits1, fb1 = forward(model, ids, DropoutMode.DETERMINISTIC)
        logits2, fb2 = forward(model, ids, DropoutMode.DETERMINISTIC)
        assert np.array_equal(logits1, logits2)
        assert np.array_equal(fb1.features, fb2.features)
        # no valid window: pool floor is zero, logits reduce to the fc bias
        assert np.all(fb1.features == 0.0)
        assert np.allclose(logits1, model.fc_b.value[None, :])

    def test_mc_streams_differ(self, rng):
        model = small_model(dropout_p=0.5)
        ids = random_token_batch(rng, 2, 8, 20)
        _, fb1 = forward(model, ids, DropoutMode.MC_STOCHASTIC, np.random.default_rng(1))
        _, fb2 = forward(model, ids, DropoutMode.MC_STOCHASTIC, np.random.default_rng(2))
        assert not np.array_equal(fb1.features, fb2.features)

    def test_zero_conv_weights_give_uniform_softmax(self, rng):
        model = small_model(num_classes=4)
        for s in model.config.kernel_sizes:
            model.conv_w[s].value[:] = 0.0
            model.conv_b[s].value[:] = 0.0
        model.fc_b.value[:] = 0.0
        ids = random_token_batch(rng, 1, 8, 20, pad_tail=False)
        logits, _ = forward(model, ids, DropoutMode.DETERMINISTIC)
        assert np.allclose(logits, logits[0, 0])
        assert np.allclose(softmax(logits), 0.25)

    def test_token_id_out_of_range(self):
        model = small_model(vocab_size=10)
        ids = np.full((1, 8), 10, dtype=np.int64)
        with pytest.raises(ValueError, match="out of range"):
            forward(model, ids)

    def test_softmax_rows_sum_to_one(self, rng):
        logits = rng.normal(size=(7, 5)) * 10
        assert np.allclose(softmax(logits).sum(axis=1), 1.0, atol=1e-6)


class TestSoftmaxCrossEntropy:
    def test_uniform_logits(self):
        logits = np.zeros((2, 4))
        loss, _ = softmax_cross_entropy(logits, np.array([1, 3]))
        assert loss == pytest.approx(math.log(4), abs=1e-12)

    def test_saturated_logits(self):
        logits = np.zeros((1, 4))
        logits[0, 2] = 1e6
        loss, _ = softmax_cross_entropy(logits, np.array([2]))
        assert loss == pytest.approx(0.0, abs=1e-9)

    def test_gradient_matches_finite_difference_f32(self, rng):
        logits = rng.normal(size=(3, 5)).astype(np.float32)
        labels = np.array([0, 2, 4])
        _, dlogits = softmax_cross_entropy(logits, labels)
        # evaluate the oracle objective in float64 so difference noise does
        # not swamp the single-precision tolerance
        fn = lambda: softmax_cross_entropy(logits.astype(np.float64), labels)[0]
        numeric = central_diff(fn, logits, range(logits.size), h=1e-3)
        assert max_rel_err(dlogits.ravel(), numeric) < 1e-3


class TestBackward:
    def combined_loss(self, model, ids, labels):
        def fn():
            logits, _ = forward(model, ids, DropoutMode.DETERMINISTIC)
            loss, _ = softmax_cross_entropy(logits, labels)
            return loss
        return fn

    def test_zero_metric_path_equals_ce_only(self, rng):
        model = small_model()
        ids = random_token_batch(rng, 3, 8, 20)
        labels = np.array([0, 1, 2])
        logits, fb = forward(model, ids, DropoutMode.DETERMINISTIC)
        _, dlogits = softmax_cross_entropy(logits, labels)
        backward(model, dlogits, np.zeros_like(fb.features))
        with_zeros = [p.grad.copy() for p in model.parameters()]
        for p in model.parameters():
            p.grad[:] = 0.0
        forward(model, ids, DropoutMode.DETERMINISTIC)
        backward(model, dlogits, None)
        for a, p in zip(with_zeros, model.parameters()):
            assert np.array_equal(a, p.grad)

    def test_metric_only_path_leaves_fc_untouched(self, rng):
        model = small_model()
        ids = random_token_batch(rng, 3, 8, 20)
        logits, fb = forward(model, ids, DropoutMode.DETERMINISTIC)
        dfeat = rng.normal(size=fb.features.shape)
        backward(model, np.zeros_like(logits), dfeat)
        assert np.all(model.fc_w.grad == 0.0)
        assert np.all(model.fc_b.grad == 0.0)
        assert np.any(model.embedding.grad != 0.0)

    def test_full_combined_gradient_matches_finite_difference(self, rng):
        from udc.metric import MetricConfig, metric_loss, partition_by_class
        from udc.nn import FeatureBatch

        model = small_model(num_classes=2, seed=3)
        ids = random_token_batch(rng, 4, 8, 20)
        labels = np.array([0, 1, 0, 1])
        mcfg = MetricConfig(margin=0.8, lambda_weight=0.25)

        def total_loss():
            logits, fb = forward(model, ids, DropoutMode.DETERMINISTIC)
            ce, _ = softmax_cross_entropy(logits, labels)
            ml, _ = metric_loss(
                FeatureBatch(fb.features, fb.dim, labels), partition_by_class(labels), mcfg
            )
            return ce + ml

        logits, fb = forward(model, ids, DropoutMode.DETERMINISTIC)
        _, dlogits = softmax_cross_entropy(logits, labels)
        _, dfeat = metric_loss(
            FeatureBatch(fb.features, fb.dim, labels), partition_by_class(labels), mcfg
        )
        backward(model, dlogits, dfeat)
        for p in model.parameters():
            indices = np.random.default_rng(0).choice(
                p.value.size, size=min(20, p.value.size), replace=False
            )
            numeric = central_diff(total_loss, p.value, indices, h=1e-4)
            assert max_rel_err(p.grad.ravel(), numeric) < 1e-6, p.name

    def test_backward_without_forward(self):
        model = small_model()
        with pytest.raises(TrainingError, match="without"):
            backward(model, np.zeros((1, 3)))

    def test_pool_routing_preserves_gradient_sum(self, rng):
        # With every pre-activation positive and no padding, the bias
        # gradient per filter equals the summed incoming pooled gradient.
        model = small_model(num_classes=2, kernel_sizes=(2,), filters=3)
        for s in model.config.kernel_sizes:
            model.conv_w[s].value[:] = np.abs(model.conv_w[s].value) + 0.01
            model.conv_b[s].value[:] = 1.0
        model.embedding.value[:] = np.abs(model.embedding.value) + 0.01
        ids = random_token_batch(rng, 3, 8, 20, pad_tail=False)
        logits, fb = forward(model, ids, DropoutMode.DETERMINISTIC)
        dfeat = rng.normal(size=fb.features.shape)
        backward(model, np.zeros_like(logits), dfeat)
        assert np.allclose(model.conv_b[2].grad, dfeat.sum(axis=0))


class TestDropout:
    def test_deterministic_is_identity(self, rng):
        h = rng.normal(size=(4, 6))
        out, mask = apply_dropout(h, 0.5, DropoutMode.DETERMINISTIC, None)
        assert out is h and mask is None

    def test_stochastic_expectation_matches_identity(self):
        h = np.linspace(0.5, 2.0, 30)[None, :]
        total = np.zeros_like(h)
        rng = np.random.default_rng(77)
        for _ in range(10_000):
            out, _ = apply_dropout(h, 0.5, DropoutMode.MC_STOCHASTIC, rng)
            total += out
        mean = total / 10_000
        assert np.all(np.abs(mean - h) / h < 0.02)

    def test_zero_probability_is_identity(self, rng):
        h = rng.normal(size=(2, 5))
        out, mask = apply_dropout(h, 0.0, DropoutMode.MC_STOCHASTIC, rng)
        assert np.array_equal(out, h) and mask is None


class TestAdam:
    def test_zero_gradient_leaves_value(self):
        model = small_model()
        before = [p.value.copy() for p in model.parameters()]
        from udc.nn import adam_step

        adam_step(model.parameters(), TrainConfig())
        for b, p in zip(before, model.parameters()):
            assert np.array_equal(b, p.value)

    def test_first_step_magnitude(self):
        from udc.nn import Parameter, adam_step

        p = Parameter(np.array([1.0]), "scalar")
        p.grad[:] = 1.0
        cfg = TrainConfig(learning_rate=0.001)
        adam_step([p], cfg)
        # bias-corrected first step is lr / (1 + eps)
        assert abs((1.0 - p.value[0]) - 0.001) < 1e-9
        assert p.step_count == 1
        assert np.all(p.grad == 0.0)

    def test_identical_parameters_stay_identical(self, rng):
        from udc.nn import Parameter, adam_step

        v = rng.normal(size=(4,))
        p1, p2 = Parameter(v.copy(), "a"), Parameter(v.copy(), "b")
        cfg = TrainConfig()
        for step in range(5):
            g = rng.normal(size=(4,))
            p1.grad[:] = g
            p2.grad[:] = g
            adam_step([p1, p2], cfg)
            assert np.array_equal(p1.value, p2.value)

    def test_non_finite_gradient_names_parameter(self):
        from udc.nn import Parameter, adam_step

        p = Parameter(np.ones(3), "conv2_weight")
        p.grad[:] = np.nan
        with pytest.raises(TrainingError, match="conv2_weight"):
            adam_step([p], TrainConfig())


class TestGradcheckPerLayer:
    """Per-layer finite-difference checks on randomized small configs."""

    @pytest.mark.parametrize("trial", range(6))
    def test_random_configs_double_precision(self, trial):
        rng = np.random.default_rng(100 + trial)
        kernel_sizes = tuple(sorted(rng.choice([2, 3, 4], size=2, replace=False)))
        model = small_model(
            num_classes=int(rng.integers(2, 5)),
            vocab_size=int(rng.integers(8, 16)),
            embed_dim=int(rng.integers(3, 7)),
            kernel_sizes=kernel_sizes,
            filters=int(rng.integers(2, 5)),
            max_len=int(rng.integers(max(kernel_sizes) + 1, 10)),
            seed=trial,
        )
        batch = int(rng.integers(2, 5))
        ids = random_token_batch(rng, batch, model.config.max_len, model.vocab_size)
        labels = rng.integers(0, model.config.num_classes, size=batch)

        def loss():
            logits, _ = forward(model, ids, DropoutMode.DETERMINISTIC)
            return softmax_cross_entropy(logits, labels)[0]

        logits, _ = forward(model, ids, DropoutMode.DETERMINISTIC)
        _, dlogits = softmax_cross_entropy(logits, labels)
        backward(model, dlogits)
        for p in model.parameters():
            indices = rng.choice(p.value.size, size=min(12, p.value.size), replace=False)
            numeric = central_diff(loss, p.value, indices)
            err = max_rel_err(p.grad.ravel(), numeric)
            assert err < 1e-6, f"{p.name}: rel err {err:.2e}"
            p.grad[:] = 0.0

    def test_through_frozen_dropout_mask(self, rng):
        # Re-seeding the same stream freezes the mask, making the
        # stochastic path differentiable for the oracle.
        model = small_model(dropout_p=0.4, seed=9)
        ids = random_token_batch(rng, 3, 8, 20)
        labels = np.array([0, 1, 2])

        def loss():
            logits, _ = forward(
                model, ids, DropoutMode.TRAIN_STOCHASTIC, np.random.default_rng(42)
            )
            return softmax_cross_entropy(logits, labels)[0]

        logits, _ = forward(
            model, ids, DropoutMode.TRAIN_STOCHASTIC, np.random.default_rng(42)
        )
        _, dlogits = softmax_cross_entropy(logits, labels)
        backward(model, dlogits)
        for p in model.parameters():
            indices = rng.choice(p.value.size, size=min(10, p.value.size), replace=False)
            numeric = central_diff(loss, p.value, indices)
            assert max_rel_err(p.grad.ravel(), numeric) < 1e-6, p.name
            p.grad[:] = 0.0

    def test_single_precision_tolerance(self, rng):
        # the float32 analytic gradient is checked against differences of a
        # float64 twin so oracle noise stays below the 1e-3 tolerance
        model = small_model(dtype=np.float32, seed=4)
        twin = small_model(dtype=np.float64, seed=4)
        for pf, pd in zip(model.parameters(), twin.parameters()):
            pd.value[...] = pf.value.astype(np.float64)
        ids = random_token_batch(rng, 3, 8, 20)
        labels = np.array([0, 1, 2])

        def loss():
            logits, _ = forward(twin, ids, DropoutMode.DETERMINISTIC)
            return softmax_cross_entropy(logits, labels)[0]

        logits, _ = forward(model, ids, DropoutMode.DETERMINISTIC)
        _, dlogits = softmax_cross_entropy(logits, labels)
        backward(model, dlogits)
        for pf, pd in zip(model.parameters(), twin.parameters()):
            indices = rng.choice(pf.value.size, size=min(8, pf.value.size), replace=False)
            numeric = central_diff(loss, pd.value, indices, h=1e-5)
            assert max_rel_err(pf.grad.ravel().astype(np.float64), numeric) < 1e-3, pf.name


def test_encoder_config_validation():
    with pytest.raises(ValueError):
        EncoderConfig(num_classes=1)
    with pytest.raises(ValueError):
        EncoderConfig(num_classes=2, dropout_p=1.0)
    with pytest.raises(ValueError):
        EncoderConfig(num_classes=2, max_len=2, kernel_sizes=(3,))
    cfg = EncoderConfig(num_classes=4)
    assert cfg.feature_dim == 300
