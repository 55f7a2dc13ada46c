import numpy as np
import pytest

from adaprune import Checkpoint, Layer
from adaprune.dataset import synthetic_dataset
from adaprune.pipeline import forward_dense
from adaprune.textmodel import classify, clean_accuracy, featurize, train_toy


def identity_model(dim):
    return Checkpoint([Layer(weight=np.eye(dim))])


class TestFeaturizeAndClassify:
    def test_featurize_is_mean(self):
        emb = np.array([[1.0, 0.0], [0.0, 1.0], [3.0, 5.0]])
        np.testing.assert_allclose(featurize(emb, [0, 1]), [0.5, 0.5])

    def test_empty_tokens_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            featurize(np.eye(3), [])

    def test_identity_network_argmax_of_embedding_row(self):
        emb = np.array([[0.1, 0.9, 0.3], [0.7, 0.2, 0.4]])
        model = identity_model(3)
        label, scores = classify(model, emb, [0])
        assert label == 1
        np.testing.assert_allclose(scores, emb[0])

    def test_duplicated_tokens_do_not_change_prediction(self):
        rng = np.random.default_rng(211)
        emb = rng.normal(size=(6, 4))
        model = Checkpoint([Layer(rng.normal(size=(3, 4)))])
        single = classify(model, emb, [2])
        double = classify(model, emb, [2, 2])
        assert single[0] == double[0]
        np.testing.assert_allclose(single[1], double[1], rtol=1e-14)

    def test_matches_manual_forward_composition(self):
        rng = np.random.default_rng(223)
        emb = rng.normal(size=(8, 5))
        model = Checkpoint(
            [
                Layer(rng.normal(size=(6, 5)), rng.normal(size=6), "relu"),
                Layer(rng.normal(size=(3, 6)), rng.normal(size=3), "identity"),
            ]
        )
        tokens = [1, 4, 7]
        label, scores = classify(model, emb, tokens)
        feat = emb[tokens].mean(axis=0)[:, None]
        expected = forward_dense(model, feat)[-1][1][:, 0]
        np.testing.assert_array_equal(scores, expected)
        assert label == int(np.argmax(expected))

    def test_tie_breaks_to_lowest_label(self):
        emb = np.array([[0.5, 0.5]])
        label, _ = classify(identity_model(2), emb, [0])
        assert label == 0


class TestTrainToy:
    def test_separable_blobs_fit(self):
        ds = synthetic_dataset(seed=0, vocab_size=24, d_embed=8, n_examples=60, noise=0.2)
        model = train_toy(ds, widths=(8, 16, 2), epochs=200, learning_rate=0.5, seed=0)
        assert clean_accuracy(model, ds) >= 95.0

    def test_zero_epochs_returns_seeded_init(self):
        ds = synthetic_dataset(seed=1, vocab_size=12, d_embed=6, n_examples=10)
        a = train_toy(ds, widths=(6, 4, 2), epochs=0, learning_rate=0.1, seed=42)
        rng = np.random.default_rng(42)
        w0 = rng.normal(0.0, np.sqrt(2.0 / 6), size=(4, 6))
        w1 = rng.normal(0.0, np.sqrt(2.0 / 4), size=(2, 4))
        np.testing.assert_array_equal(a.layers[0].weight, w0)
        np.testing.assert_array_equal(a.layers[1].weight, w1)
        np.testing.assert_array_equal(a.layers[0].bias, np.zeros(4))

    def test_same_seed_bitwise_identical(self):
        ds = synthetic_dataset(seed=2, vocab_size=12, d_embed=6, n_examples=16)
        a = train_toy(ds, widths=(6, 8, 2), epochs=25, learning_rate=0.3, seed=9)
        b = train_toy(ds, widths=(6, 8, 2), epochs=25, learning_rate=0.3, seed=9)
        for la, lb in zip(a.layers, b.layers):
            np.testing.assert_array_equal(la.weight, lb.weight)
            np.testing.assert_array_equal(la.bias, lb.bias)

    def test_head_is_non_prunable_identity(self):
        ds = synthetic_dataset(seed=3, vocab_size=12, d_embed=6, n_examples=10)
        model = train_toy(ds, widths=(6, 5, 2), epochs=1, learning_rate=0.1, seed=0)
        assert model.layers[0].activation == "relu" and model.layers[0].prunable
        assert model.layers[-1].activation == "identity" and not model.layers[-1].prunable

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_aborts_with_diagnostics(self):
        from adaprune import NumericalError

        ds = synthetic_dataset(seed=5, vocab_size=12, d_embed=6, n_examples=10)
        with pytest.raises(NumericalError, match="epoch"):
            train_toy(ds, widths=(6, 8, 2), epochs=5, learning_rate=1e200, seed=0)

    def test_width_compatibility_checked(self):
        ds = synthetic_dataset(seed=4, vocab_size=12, d_embed=6, n_examples=10)
        with pytest.raises(ValueError, match="embeddings"):
            train_toy(ds, widths=(5, 4, 2), epochs=1, learning_rate=0.1, seed=0)
        with pytest.raises(ValueError, match="labels"):
            train_toy(ds, widths=(6, 4, 3), epochs=1, learning_rate=0.1, seed=0)
