import numpy as np
import pytest

from src.models.network import (
    GradientSet,
    LabeledExample,
    LayerKind,
    LayerOrder,
    LossKind,
    LrSchedule,
    Mode,
    NetworkParams,
    NetworkSpec,
    TrainConfig,
    TrainRecord,
    TrainReport,
)
from src.services.cnn_service import (
    accuracy,
    classify,
    grad_check,
    init_params,
    network_forward,
    random_network,
    sgd_step,
    train,
    zeros_params,
)
from src.utils.errors import DefinitionError, ShapeError


def _sign_toy(per_class=10, length=16):
    """Class 0 is constant -1, class 1 is constant +1."""
    examples = []
    for c, level in enumerate((-1.0, 1.0)):
        for j in range(per_class):
            examples.append(LabeledExample.from_index(np.full((1, length), level), c, 2, name=f"c{c}-{j}"))
    return examples


def _toy_spec():
    return NetworkSpec.conv_blocks(in_channels=1, num_classes=2, kernel_length=3, channels=[4], name="toy")


class TestGradCheck:

    @pytest.mark.parametrize("seed", range(20))
    @pytest.mark.parametrize("loss_kind", list(LossKind))
    def test_random_networks(self, seed, loss_kind):
        spec, params, example = random_network(seed)
        report = grad_check(spec, params, example, h=1e-5, tol=1e-4, loss_kind=loss_kind)
        assert report.checked > 0
        assert report.max_rel_error <= 1e-4, report.violations
        assert report.passed

    def test_small_network_on_long_input(self, small_spec, rng):
        params = init_params(small_spec, seed=3)
        example = LabeledExample.from_index(rng.normal(size=(1, 32)), 1, 3)
        report = grad_check(small_spec, params, example)
        assert report.passed
        assert report.checked + report.skipped == params.num_trainable(small_spec)

    def test_subset_is_seeded(self, small_spec, rng):
        params = init_params(small_spec, seed=3)
        example = LabeledExample.from_index(rng.normal(size=(1, 24)), 0, 3)
        a = grad_check(small_spec, params, example, max_params=25, seed=5)
        b = grad_check(small_spec, params, example, max_params=25, seed=5)
        assert a.checked + a.skipped == 25
        assert a.max_rel_error == b.max_rel_error
        assert a.worst == b.worst

    def test_leaves_parameters_untouched(self, small_spec, rng):
        params = init_params(small_spec, seed=1)
        before = params.copy()
        grad_check(small_spec, params, LabeledExample.from_index(rng.normal(size=(1, 16)), 2, 3), max_params=10)
        for got, want in zip(params.layers, before.layers):
            for key in want:
                np.testing.assert_array_equal(got[key], want[key])


class TestForward:

    def test_zero_parameters_give_uniform_output(self, small_spec, rng):
        label, probs = classify(small_spec, zeros_params(small_spec), rng.normal(size=(1, 20)))
        np.testing.assert_allclose(probs, 1 / 3)
        assert label == 0

    def test_probabilities_sum_to_one(self, small_spec, rng):
        params = init_params(small_spec, seed=2)
        for _ in range(5):
            _, probs = classify(small_spec, params, rng.normal(size=(1, 40)))
            assert probs.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all(probs >= 0)

    def test_forward_does_not_touch_running_statistics(self, small_spec, rng):
        params = init_params(small_spec, seed=2)
        before = params.copy()
        _, cache = network_forward(small_spec, params, rng.normal(size=(1, 20)), Mode.TRAIN)
        assert cache is not None
        for got, want in zip(params.layers, before.layers):
            for key in want:
                np.testing.assert_array_equal(got[key], want[key])

    def test_infer_mode_returns_no_cache(self, small_spec, rng):
        _, cache = network_forward(small_spec, init_params(small_spec), rng.normal(size=(1, 8)))
        assert cache is None

    def test_wrong_input_channels(self, small_spec):
        with pytest.raises(ShapeError):
            classify(small_spec, init_params(small_spec), np.zeros((2, 8)))

    def test_constant_logit_shift_keeps_the_class(self, small_spec, rng):
        params = init_params(small_spec, seed=5)
        x = rng.normal(size=(1, 20))
        label, probs = classify(small_spec, params, x)
        params.layers[-1]["bias"] += 3.0
        shifted_label, shifted_probs = classify(small_spec, params, x)
        assert shifted_label == label
        np.testing.assert_allclose(shifted_probs, probs, rtol=1e-12)

    def test_inference_ignores_example_order(self, small_spec, rng):
        params = init_params(small_spec, seed=5)
        inputs = [rng.normal(size=(1, 20)) for _ in range(4)]
        forward = [classify(small_spec, params, x)[1] for x in inputs]
        backward = [classify(small_spec, params, x)[1] for x in reversed(inputs)]
        for a, b in zip(forward, reversed(backward)):
            np.testing.assert_array_equal(a, b)

    def test_relu_before_batchnorm_ignores_the_input(self, rng):
        """With temporal batch statistics the pooled features equal the batch-norm shift."""
        spec = NetworkSpec.conv_blocks(in_channels=1, num_classes=3, kernel_length=3, channels=[4, 4],
                                       order=LayerOrder.RELU_BN)
        params = init_params(spec, seed=7)
        a, _ = network_forward(spec, params, rng.normal(size=(1, 30)), Mode.TRAIN)
        b, _ = network_forward(spec, params, 5.0 * rng.normal(size=(1, 30)) + 2.0, Mode.TRAIN)
        np.testing.assert_allclose(a, b, atol=1e-12)


class TestSgdStep:

    def test_quadratic_step(self, small_spec):
        params = zeros_params(small_spec)
        params.layers[-1]["bias"][0] = 1.0
        grads = [dict() for _ in small_spec.layers]
        # E = w^2 on the first fc bias
        grads[-1]["bias"] = np.array([2.0, 0.0, 0.0])
        sgd_step(small_spec, params, GradientSet(grads), 0.1)
        assert params.layers[-1]["bias"][0] == pytest.approx(0.8)

    def test_zero_gradient_changes_nothing(self, small_spec):
        params = init_params(small_spec, seed=4)
        before = params.copy()
        grads = GradientSet([{k: np.zeros_like(v) for k, v in group.items() if k in ("weight", "bias", "gamma", "beta")}
                             for group in params.layers])
        sgd_step(small_spec, params, grads, 0.5)
        for got, want in zip(params.layers, before.layers):
            for key in want:
                np.testing.assert_array_equal(got[key], want[key])

    def test_gradient_shape_checked(self, small_spec):
        params = init_params(small_spec)
        grads = [dict() for _ in small_spec.layers]
        grads[-1]["bias"] = np.zeros(5)
        with pytest.raises(ShapeError):
            sgd_step(small_spec, params, GradientSet(grads), 0.1)


class TestTrain:

    def test_separable_toy(self):
        spec, toy = _toy_spec(), _sign_toy()
        cfg = TrainConfig(epochs=3, learning_rate=0.1, shuffle_seed=1, weight_init_seed=2)
        _, report = train(spec, toy, cfg)
        reached = report.iterations_to_accuracy(1.0)
        assert reached is not None
        # the window holds a full epoch from iteration len(toy) on
        assert len(toy) <= reached <= 3 * len(toy)
        assert report.records[reached - 1].train_acc == 1.0
        assert report.records[-1].train_acc == 1.0
        assert report.final_loss < report.initial_loss

    def test_unlearnable_labels_never_reach_accuracy(self, rng):
        # identical inputs carry no information about their random labels
        labels = rng.permutation([0] * 10 + [1] * 10)
        examples = [LabeledExample.from_index(np.ones((1, 16)), int(c), 2, name=f"r{j}") for j, c in enumerate(labels)]
        _, report = train(_toy_spec(), examples, TrainConfig(epochs=3, learning_rate=0.1, shuffle_seed=5,
                                                             weight_init_seed=6))
        assert report.iterations_to_accuracy(0.9) is None

    def test_report_shape(self):
        spec, toy = _toy_spec(), _sign_toy(per_class=3)
        validate = _sign_toy(per_class=2)
        _, report = train(spec, toy, TrainConfig(epochs=4, learning_rate=0.05), validate_set=validate)
        assert len(report.records) == 4 * len(toy)
        assert [r.iteration for r in report.records] == list(range(1, 4 * len(toy) + 1))
        with_val = [r for r in report.records if r.val_acc is not None]
        assert [r.epoch for r in with_val] == [1, 2, 3, 4]
        assert report.final_val_acc == with_val[-1].val_acc

    def test_mini_batches(self):
        spec, toy = _toy_spec(), _sign_toy(per_class=3)
        _, report = train(spec, toy, TrainConfig(epochs=2, mini_batch=4, learning_rate=0.05))
        # 6 examples in batches of 4 and 2
        assert len(report.records) == 4

    def test_deterministic(self):
        spec, toy = _toy_spec(), _sign_toy(per_class=4)
        cfg = TrainConfig(epochs=2, learning_rate=0.05, shuffle_seed=3, weight_init_seed=4)
        a, ra = train(spec, toy, cfg)
        b, rb = train(spec, toy, cfg)
        for ga, gb in zip(a.layers, b.layers):
            for key in ga:
                np.testing.assert_array_equal(ga[key], gb[key])
        assert [r.train_loss for r in ra.records] == [r.train_loss for r in rb.records]

    def test_starting_parameters_not_modified(self):
        spec, toy = _toy_spec(), _sign_toy(per_class=2)
        start = init_params(spec, seed=9)
        before = start.copy()
        trained, _ = train(spec, toy, TrainConfig(epochs=1, learning_rate=0.05), params=start)
        np.testing.assert_array_equal(start.layers[0]["weight"], before.layers[0]["weight"])
        assert not np.array_equal(trained.layers[0]["weight"], before.layers[0]["weight"])

    def test_running_statistics_committed(self):
        spec, toy = _toy_spec(), _sign_toy(per_class=2)
        trained, _ = train(spec, toy, TrainConfig(epochs=1, learning_rate=0.05))
        bn = next(g for layer, g in zip(spec.layers, trained.layers) if layer.kind is LayerKind.BATCHNORM)
        assert not np.array_equal(bn["running_var"], np.ones(4))

    def test_trained_toy_classifies_its_training_points(self):
        spec, toy = _toy_spec(), _sign_toy()
        trained, report = train(spec, toy, TrainConfig(epochs=3, learning_rate=0.1, shuffle_seed=1, weight_init_seed=2))
        assert report.records[-1].train_acc == 1.0
        assert accuracy(spec, trained, []) is None

    def test_empty_training_set(self):
        with pytest.raises(DefinitionError, match="training set is empty"):
            train(_toy_spec(), [], TrainConfig(epochs=1))

    def test_missing_class(self):
        only_zero = [ex for ex in _sign_toy(per_class=2) if ex.class_index == 0]
        with pytest.raises(DefinitionError, match="no training examples for class indices"):
            train(_toy_spec(), only_zero, TrainConfig(epochs=1))

    def test_target_size_checked(self):
        bad = _sign_toy(per_class=1) + [LabeledExample.from_index(np.ones((1, 16)), 2, 3)]
        with pytest.raises(ShapeError):
            train(_toy_spec(), bad, TrainConfig(epochs=1))


class TestTrainReport:

    @staticmethod
    def _report(accs, per_epoch):
        return TrainReport(records=[
            TrainRecord(iteration=i + 1, epoch=i // per_epoch + 1, train_loss=1.0, train_acc=acc)
            for i, acc in enumerate(accs)
        ])

    def test_lucky_first_guesses_do_not_count(self):
        report = self._report([1.0, 1.0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.75], per_epoch=4)
        assert report.iterations_to_accuracy(0.9) is None
        assert report.iterations_to_accuracy(0.75) == 8

    def test_end_of_first_epoch_counts(self):
        report = self._report([0.0, 0.5, 0.67, 1.0, 1.0, 1.0], per_epoch=4)
        assert report.iterations_to_accuracy(0.9) == 4

    def test_later_epoch(self):
        report = self._report([1.0, 0.0, 0.33, 0.5, 0.75, 0.75, 1.0, 1.0], per_epoch=4)
        assert report.iterations_to_accuracy(0.9) == 7
        assert report.iterations_to_accuracy(0.5) == 4

    def test_empty_report(self):
        assert TrainReport().iterations_to_accuracy() is None


class TestTrainConfig:

    def test_step_decay(self):
        schedule = LrSchedule("step_decay", factor=0.5, every_n_epochs=2)
        assert [schedule.rate(0.1, e) for e in range(5)] == pytest.approx([0.1, 0.1, 0.05, 0.05, 0.025])

    def test_invalid_values(self):
        with pytest.raises(DefinitionError):
            TrainConfig(epochs=0)
        with pytest.raises(DefinitionError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(DefinitionError):
            LrSchedule("cosine")

    def test_dict_form(self):
        cfg = TrainConfig(epochs=3, loss=LossKind.MSE, lr_schedule=LrSchedule("step_decay", 0.5, 2))
        assert TrainConfig.from_dict(cfg.to_dict()) == cfg


class TestParams:

    def test_list_form(self, small_spec):
        params = init_params(small_spec, seed=6)
        restored = NetworkParams.from_list(params.to_list())
        restored.check(small_spec)
        np.testing.assert_array_equal(restored.layers[0]["weight"], params.layers[0]["weight"])

    def test_check_rejects_wrong_shapes(self, small_spec):
        params = init_params(small_spec)
        params.layers[0]["weight"] = np.zeros((4, 1, 2))
        with pytest.raises(ShapeError):
            params.check(small_spec)

    def test_glorot_bounds(self, small_spec):
        params = init_params(small_spec, seed=0)
        weight = params.layers[0]["weight"]
        assert np.abs(weight).max() <= np.sqrt(6.0 / (1 * 3 + 4 * 3))
        np.testing.assert_array_equal(params.layers[0]["bias"], 0.0)
