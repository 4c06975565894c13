import numpy as np
import pytest

from aec import ladder
from aec.errors import ConvergenceError, DecodeError
from aec.ladder import (
    LadderBatch,
    LadderConfig,
    default_denoise_costs,
    draw_noise,
    init_ladder,
    ladder_forward,
    ladder_loss,
    ladder_loss_and_grad,
    load_ladder,
    predict_ladder,
    save_ladder,
    train_ladder,
)

from oracles import plain_bn_mlp


def small_config(**kw):
    defaults = dict(layer_dims=(5, 4, 3), noise_sigma=0.3,
                    denoise_costs=(4.0, 2.0, 1.0), seed=3)
    defaults.update(kw)
    return LadderConfig(**defaults)


def mixed_batch(seed=11, n_labeled=4, n_unlabeled=3, d=5, n_classes=3):
    rng = np.random.default_rng(seed)
    return LadderBatch(
        labeled_x=rng.normal(size=(n_labeled, d)),
        labels=rng.integers(0, n_classes, n_labeled),
        unlabeled_x=rng.normal(size=(n_unlabeled, d)),
    )


def blob_data(seed=0, n_per_class=25, d=4):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(-2, 1, size=(n_per_class, d)),
                   rng.normal(2, 1, size=(n_per_class, d))])
    y = np.array([0] * n_per_class + [1] * n_per_class)
    return X, y


class TestConfig:
    def test_default_denoise_pattern(self):
        assert default_denoise_costs(5) == (1000.0, 10.0, 0.1, 0.1, 0.1)
        assert default_denoise_costs(3) == (1000.0, 10.0, 0.1)
        config = LadderConfig(layer_dims=(8, 4, 4, 4, 2))
        assert config.denoise_costs == (1000.0, 10.0, 0.1, 0.1, 0.1)

    def test_cost_length_must_match(self):
        with pytest.raises(ValueError):
            LadderConfig(layer_dims=(5, 3), denoise_costs=(1.0, 1.0, 1.0))

    def test_nonpositive_dim_rejected(self):
        with pytest.raises(ValueError):
            LadderConfig(layer_dims=(4, 0, 2))


class TestInit:
    def test_shape_contract(self):
        model = init_ladder(LadderConfig(layer_dims=(4, 3, 2)))
        assert model.weights[1].shape == (3, 4)
        assert model.weights[2].shape == (2, 3)
        assert model.decoder_weights[0].shape == (4, 3)
        assert model.decoder_weights[1].shape == (3, 2)
        for l, d in enumerate((4, 3, 2)):
            assert model.combinator[l].shape == (10, d)

    def test_same_seed_bit_identical(self):
        a = init_ladder(small_config())
        b = init_ladder(small_config())
        for (name, va), (_, vb) in zip(a.parameters(), b.parameters()):
            assert np.array_equal(va, vb), name

    def test_combinator_passes_topdown_at_init(self):
        model = init_ladder(small_config())
        a = model.combinator[1]
        assert (a[3] == 1.0).all()
        assert np.abs(np.delete(a, 3, axis=0)).max() == 0.0


class TestForward:
    def test_sigma_zero_noisy_equals_clean(self):
        model = init_ladder(small_config())
        x = np.random.default_rng(0).normal(size=(6, 5))
        records, _ = ladder_forward(model, x, sigma=0.0)
        for rec in records:
            assert np.array_equal(rec["z"], rec["z_tilde"])

    def test_posteriors_sum_to_one(self):
        model = init_ladder(small_config())
        x = np.random.default_rng(1).normal(size=(8, 5))
        _, posteriors = ladder_forward(model, x, sigma=0.3, rng=np.random.default_rng(2))
        assert np.abs(posteriors.sum(axis=1) - 1.0).max() < 1e-6

    def test_identical_rows_normalize_to_zero(self):
        model = init_ladder(small_config())
        x = np.tile(np.random.default_rng(3).normal(size=5), (4, 1))
        records, _ = ladder_forward(model, x, sigma=0.0)
        assert np.abs(records[1]["z"]).max() < 1e-3  # epsilon-damped zeros

    def test_dimension_mismatch(self):
        model = init_ladder(small_config())
        with pytest.raises(ValueError):
            ladder_forward(model, np.ones((2, 7)))


class TestLoss:
    def test_zero_costs_labeled_only_is_plain_cross_entropy(self):
        config = small_config(denoise_costs=(0.0, 0.0, 0.0))
        model = init_ladder(config)
        rng = np.random.default_rng(4)
        x = rng.normal(size=(6, 5))
        labels = rng.integers(0, 3, 6)
        batch = LadderBatch(labeled_x=x, labels=labels)
        noise = draw_noise(model, batch, 0.3, np.random.default_rng(5))
        loss = ladder_loss(model, batch, sigma=0.3, noise=noise)
        assert loss.total == pytest.approx(loss.supervised)
        assert loss.denoise_per_layer.sum() == 0.0
        # cross-entropy of the noisy encoder, computed directly
        records, posteriors = ladder_forward(model, x, sigma=0.3,
                                             noise=noise["labeled"])
        direct = -np.log(posteriors[np.arange(6), labels]).mean()
        assert loss.supervised == pytest.approx(direct, rel=1e-12)

    def test_perfect_reconstruction_zeroes_denoise(self):
        # with sigma = 0 the lateral input is the normalized clean z, so
        # per-unit constants mu(u) = m/(1-s), v(u) = s make the combinator
        # output exactly the clean pre-activation: reconstruction is perfect
        config = small_config(noise_sigma=0.0)
        model = init_ladder(config)
        rng = np.random.default_rng(6)
        x = rng.normal(size=(7, 5))
        batch = LadderBatch(labeled_x=x, labels=rng.integers(0, 3, 7))
        records, _ = ladder_forward(model, x, sigma=0.0)
        for l in range(model.n_layers + 1):
            a = np.zeros_like(model.combinator[l])
            if l == 0:
                a[9] = 1.0  # v = 1, mu = 0: zhat = z~ = x at the input layer
            else:
                z_pre = records[l]["z_pre"]
                sigma_c = np.sqrt(z_pre.var(axis=0) + 1e-6)
                a[9] = sigma_c
                a[4] = z_pre.mean(axis=0) / (1.0 - sigma_c)
            model.combinator[l] = a
        noise = draw_noise(model, batch, 0.0, np.random.default_rng(7))
        loss = ladder_loss(model, batch, sigma=0.0, noise=noise)
        assert loss.denoise_per_layer.sum() == pytest.approx(0.0, abs=1e-12)

    def test_gradient_matches_finite_differences(self):
        model = init_ladder(small_config())
        batch = mixed_batch()
        noise = draw_noise(model, batch, 0.3, np.random.default_rng(5))
        _, grads, _ = ladder_loss_and_grad(model, batch, noise=noise)
        step = 1e-5
        for name, value in model.parameters():
            it = np.nditer(value, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = value[idx]
                value[idx] = orig + step
                plus = ladder_loss(model, batch, noise=noise).total
                value[idx] = orig - step
                minus = ladder_loss(model, batch, noise=noise).total
                value[idx] = orig
                fd = (plus - minus) / (2 * step)
                rel = abs(grads[name][idx] - fd) / max(abs(grads[name][idx]), abs(fd), 1e-6)
                assert rel < 1e-4, f"{name}[{idx}]: analytic {grads[name][idx]}, fd {fd}"

    def test_unlabeled_rows_leave_supervised_unchanged(self):
        model = init_ladder(small_config())
        rng = np.random.default_rng(8)
        labeled = rng.normal(size=(5, 5))
        labels = rng.integers(0, 3, 5)
        lab_only = LadderBatch(labeled_x=labeled, labels=labels)
        noise_rng = np.random.default_rng(9)
        noise = draw_noise(model, lab_only, 0.3, noise_rng)
        base = ladder_loss(model, lab_only, noise=noise)
        mixed = LadderBatch(labeled_x=labeled, labels=labels,
                            unlabeled_x=rng.normal(size=(6, 5)))
        noise_rng = np.random.default_rng(9)  # same labeled noise realization
        noise2 = draw_noise(model, mixed, 0.3, noise_rng)
        assert np.array_equal(noise["labeled"][0], noise2["labeled"][0])
        withu = ladder_loss(model, mixed, noise=noise2)
        assert withu.supervised == base.supervised
        assert withu.denoise_per_layer.sum() != pytest.approx(
            base.denoise_per_layer.sum()
        )

    def test_reconstruction_pressure_increases_with_lambda(self):
        batch = mixed_batch()
        denoise_sums = []
        for lam0 in (0.0, 1000.0):
            model = init_ladder(small_config(denoise_costs=(lam0, 2.0, 1.0)))
            noise = draw_noise(model, batch, 0.3, np.random.default_rng(10))
            loss = ladder_loss(model, batch, noise=noise)
            denoise_sums.append(loss.denoise_per_layer.sum())
        assert denoise_sums[1] > denoise_sums[0]

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            LadderBatch(labeled_x=np.zeros((0, 5)), labels=np.zeros(0, dtype=int))

    def test_degenerates_to_plain_mlp(self):
        config = LadderConfig(layer_dims=(6, 5, 4, 3), noise_sigma=0.0,
                              denoise_costs=(0, 0, 0, 0), seed=2)
        model = init_ladder(config)
        rng = np.random.default_rng(9)
        worst = 0.0
        for trial in range(20):
            x = rng.normal(size=(8, 6))
            labels = rng.integers(0, 3, 8)
            batch = LadderBatch(labeled_x=x, labels=labels)
            noise = draw_noise(model, batch, 0.0, np.random.default_rng(trial))
            loss, grads, _ = ladder_loss_and_grad(model, batch, sigma=0.0, noise=noise)
            ref_loss, dW, dG, dB = plain_bn_mlp(
                [model.weights[l] for l in (1, 2, 3)],
                [model.bn_scale[l] for l in (1, 2, 3)],
                [model.bn_shift[l] for l in (1, 2, 3)],
                x, labels,
            )
            worst = max(worst, abs(loss.total - ref_loss))
            for l in (1, 2, 3):
                worst = max(
                    worst,
                    np.abs(grads[f"W{l}"] - dW[l - 1]).max(),
                    np.abs(grads[f"gamma{l}"] - dG[l - 1]).max(),
                    np.abs(grads[f"beta{l}"] - dB[l - 1]).max(),
                )
        assert worst < 1e-10


class TestTraining:
    def test_separable_blobs_reach_full_train_accuracy(self):
        X, y = blob_data()
        # sanity: the blobs are linearly separable (least-squares probe)
        w = np.linalg.lstsq(np.hstack([X, np.ones((X.shape[0], 1))]),
                            2.0 * y - 1.0, rcond=None)[0]
        probe = np.sign(np.hstack([X, np.ones((X.shape[0], 1))]) @ w)
        assert (probe == 2.0 * y - 1.0).all()
        config = LadderConfig(layer_dims=(4, 16, 8, 2), noise_sigma=0.2,
                              denoise_costs=(0, 0, 0, 0), batch_size=25,
                              epochs=60, learning_rate=0.01, seed=1)
        model, history = train_ladder(config, LadderBatch(labeled_x=X, labels=y))
        pred, _ = predict_ladder(model, X)
        assert (pred == y).mean() == 1.0
        assert history[-1]["total"] < history[0]["total"]

    def test_training_deterministic(self):
        X, y = blob_data(seed=5, n_per_class=12)
        config = LadderConfig(layer_dims=(4, 8, 2), noise_sigma=0.2,
                              denoise_costs=(1.0, 0.1, 0.1), batch_size=8,
                              epochs=5, learning_rate=0.01, seed=7)
        _, h1 = train_ladder(config, LadderBatch(labeled_x=X, labels=y))
        _, h2 = train_ladder(config, LadderBatch(labeled_x=X, labels=y))
        assert h1 == h2

    def test_history_and_valid_accuracy(self):
        X, y = blob_data(seed=6, n_per_class=10)
        config = LadderConfig(layer_dims=(4, 8, 2), batch_size=10, epochs=3,
                              denoise_costs=(1.0, 0.1, 0.1),
                              learning_rate=0.01, seed=0)
        _, history = train_ladder(config, LadderBatch(labeled_x=X, labels=y),
                                  valid=(X, y))
        assert len(history) == 3
        assert all("valid_accuracy" in h for h in history)

    def test_divergence_reports_epoch(self):
        X, y = blob_data(seed=7, n_per_class=8)
        config = LadderConfig(layer_dims=(4, 8, 2), batch_size=16, epochs=10,
                              denoise_costs=(1000.0, 10.0, 0.1),
                              learning_rate=1e40, seed=0)  # absurd rate
        with pytest.raises(ConvergenceError) as info:
            with np.errstate(all="ignore"):
                train_ladder(config, LadderBatch(labeled_x=X, labels=y))
        assert info.value.epoch is not None


class TestPredict:
    def test_posterior_rows_sum_to_one(self):
        model = init_ladder(small_config())
        _, posteriors = predict_ladder(model, np.random.default_rng(0).normal(size=(9, 5)))
        assert np.abs(posteriors.sum(axis=1) - 1.0).max() < 1e-6

    def test_duplicate_rows_identical_predictions(self):
        model = init_ladder(small_config())
        x = np.random.default_rng(1).normal(size=5)
        pred, post = predict_ladder(model, np.tile(x, (3, 1)))
        assert len(set(pred.tolist())) == 1
        assert np.array_equal(post[0], post[1])

    def test_dimension_mismatch(self):
        model = init_ladder(small_config())
        with pytest.raises(ValueError):
            predict_ladder(model, np.ones((2, 9)))


class TestSerialization:
    def test_roundtrip(self, tmp_path):
        X, y = blob_data(seed=9, n_per_class=10)
        config = LadderConfig(layer_dims=(4, 6, 2), batch_size=10, epochs=4,
                              denoise_costs=(1.0, 0.1, 0.0),
                              learning_rate=0.01, seed=2)
        model, _ = train_ladder(config, LadderBatch(labeled_x=X, labels=y))
        path = tmp_path / "model.ladder"
        save_ladder(path, model)
        back = load_ladder(path)
        assert back.layer_dims == model.layer_dims
        assert back.noise_sigma == model.noise_sigma
        assert back.denoise_costs == model.denoise_costs
        assert back.trained_steps == model.trained_steps
        for (name, va), (_, vb) in zip(model.parameters(), back.parameters()):
            assert np.array_equal(va, vb), name
        x = np.random.default_rng(3).normal(size=(5, 4))
        assert np.array_equal(predict_ladder(model, x)[1], predict_ladder(back, x)[1])

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad"
        path.write_bytes(b"AEC-WRONG v9\n")
        with pytest.raises(DecodeError):
            load_ladder(path)

    def test_truncated_file(self, tmp_path):
        model = init_ladder(small_config())
        path = tmp_path / "model.ladder"
        save_ladder(path, model)
        path.write_bytes(path.read_bytes()[:-16])
        with pytest.raises(DecodeError):
            load_ladder(path)
