import numpy as np
import pytest

from adaprune import Checkpoint, Layer
from adaprune.attack import attack_example, evaluate_robustness
from adaprune.dataset import ToyDataset, synthetic_dataset
from adaprune.textmodel import classify, train_toy

from oracles import exhaustive_flip_exists


def tiny_model(seed, d_embed=4, n_labels=2):
    rng = np.random.default_rng(seed)
    return Checkpoint(
        [
            Layer(rng.normal(size=(5, d_embed)), rng.normal(size=5) * 0.1, "tanh"),
            Layer(rng.normal(size=(n_labels, 5)), rng.normal(size=n_labels) * 0.1, "identity"),
        ]
    )


def tiny_setup(seed, vocab=10, d_embed=4, max_tokens=3, max_syn=2):
    """Random model plus examples labeled by the model itself, so every
    example is initially classified correctly."""
    rng = np.random.default_rng(seed)
    model = tiny_model(seed, d_embed=d_embed)
    emb = rng.normal(size=(vocab, d_embed))
    synonyms = {}
    for t in range(vocab):
        others = [o for o in range(vocab) if o != t]
        count = int(rng.integers(0, max_syn + 1))
        synonyms[t] = [int(o) for o in rng.choice(others, size=count, replace=False)]
    n_tokens = int(rng.integers(1, max_tokens + 1))
    tokens = [int(t) for t in rng.integers(0, vocab, size=n_tokens)]
    label, _ = classify(model, emb, tokens)
    return model, emb, tokens, synonyms, label


class TestAttackExample:
    def test_empty_synonym_map_fails(self):
        model, emb, tokens, _, _ = tiny_setup(1)
        flipped, perturbed, subs = attack_example(model, emb, tokens, {}, max_subs=5)
        assert not flipped
        assert perturbed == tokens
        assert subs == []

    def test_zero_budget_fails(self):
        model, emb, tokens, synonyms, _ = tiny_setup(2)
        flipped, perturbed, subs = attack_example(model, emb, tokens, synonyms, max_subs=0)
        assert not flipped
        assert perturbed == tokens

    def test_greedy_consistent_with_exhaustive_search(self):
        flips = 0
        for seed in range(60):
            model, emb, tokens, synonyms, label = tiny_setup(seed + 100)
            flipped, perturbed, subs = attack_example(
                model, emb, tokens, synonyms, max_subs=len(tokens)
            )
            exhaustive = exhaustive_flip_exists(
                lambda toks: classify(model, emb, toks)[0], tokens, synonyms, label
            )
            if flipped:
                flips += 1
                # The witness must actually flip the label.
                assert classify(model, emb, perturbed)[0] != label
                assert exhaustive
            if not exhaustive:
                assert not flipped
        assert flips > 0  # the suite must exercise both outcomes

    def test_budget_limits_substitutions(self):
        for seed in range(20):
            model, emb, tokens, synonyms, _ = tiny_setup(seed + 500)
            _, _, subs = attack_example(model, emb, tokens, synonyms, max_subs=1)
            assert len(subs) <= 1

    def test_success_monotone_in_budget(self):
        for seed in range(30):
            model, emb, tokens, synonyms, _ = tiny_setup(seed + 900)
            outcomes = [
                attack_example(model, emb, tokens, synonyms, max_subs=m)[0]
                for m in range(0, len(tokens) + 1)
            ]
            assert all(not a or b for a, b in zip(outcomes, outcomes[1:]))


@pytest.fixture(scope="module")
def trained():
    ds = synthetic_dataset(seed=6, vocab_size=24, d_embed=8, n_examples=40, noise=0.35)
    model = train_toy(ds, widths=(8, 12, 2), epochs=150, learning_rate=0.5, seed=1)
    return model, ds


class TestEvaluateRobustness:
    def test_metric_identities(self, trained):
        model, ds = trained
        res = evaluate_robustness(model, ds, max_subs=3)
        assert 0.0 <= res.aua <= res.acc <= 100.0
        assert res.attempted == round(res.acc * len(ds.examples) / 100.0)
        if res.attempted:
            assert res.asr == pytest.approx(100.0 * res.succeeded / res.attempted)
            assert res.asr == pytest.approx(100.0 * (res.acc - res.aua) / res.acc, abs=1e-9)
        else:
            assert res.asr == 0.0

    def test_empty_synonyms_mean_no_successes(self, trained):
        model, ds = trained
        stripped = ToyDataset(
            examples=ds.examples,
            vocab_size=ds.vocab_size,
            num_labels=ds.num_labels,
            embedding=ds.embedding,
            synonyms={},
        )
        res = evaluate_robustness(model, stripped, max_subs=5)
        assert res.aua == res.acc
        assert res.asr == 0.0
        assert res.succeeded == 0

    def test_asr_monotone_in_budget(self, trained):
        model, ds = trained
        results = [evaluate_robustness(model, ds, max_subs=m) for m in (0, 1, 2, 4)]
        asrs = [r.asr for r in results]
        assert all(b >= a for a, b in zip(asrs, asrs[1:]))
        attempted = {r.attempted for r in results}
        assert len(attempted) == 1  # attack budget never changes who is attacked

    def test_count_assembly_validates(self):
        from adaprune import result_from_counts

        res = result_from_counts(200, 150, 30)
        assert (res.acc, res.aua, res.asr) == (75.0, 60.0, 20.0)
        with pytest.raises(ValueError):
            result_from_counts(0, 0, 0)
        with pytest.raises(ValueError):
            result_from_counts(10, 5, 7)

    def test_empty_dataset_rejected(self, trained):
        model, ds = trained
        empty = ToyDataset(
            examples=[],
            vocab_size=ds.vocab_size,
            num_labels=ds.num_labels,
            embedding=ds.embedding,
            synonyms={},
        )
        with pytest.raises(ValueError):
            evaluate_robustness(model, empty, max_subs=1)
