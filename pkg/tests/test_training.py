"""Training stages: overfit checks, determinism, schedule semantics."""

import math

import numpy as np
import pytest

from uiq.encoder import EncoderConfig, init_params, tokenize
from uiq.training import (
    AdamW,
    DatasetViews,
    EmptyDataset,
    TrainConfig,
    preset_config,
    run_schedule,
    train_stage,
)

TINY = EncoderConfig(d_model=16, depth=1, heads=4, embed_dim=16, vocab_size=128, max_tokens=16,
                     patch_size=8, image_size=32)


class ArrayContrastiveView:
    """In-memory (image, description) view for training tests."""

    def __init__(self, images, texts, vocab=128, max_tokens=16):
        self.images = images
        self.tokens = [tokenize(t, vocab, max_tokens) for t in texts]

    def __len__(self):
        return len(self.images)

    def batch(self, indices, rng):
        return np.stack([self.images[i] for i in indices]), [self.tokens[i] for i in indices]


class ArrayPairwiseView:
    def __init__(self, pos, neg, texts, vocab=128, max_tokens=16):
        self.pos = pos
        self.neg = neg
        self.tokens = [tokenize(t, vocab, max_tokens) for t in texts]

    def __len__(self):
        return len(self.pos)

    def batch(self, indices, rng):
        return (
            np.stack([self.pos[i] for i in indices]),
            np.stack([self.neg[i] for i in indices]),
            [self.tokens[i] for i in indices],
        )


def _fixed_samples(n=8, size=32, seed=0):
    rng = np.random.default_rng(seed)
    images = [rng.integers(0, 256, (size, size, 3), dtype=np.uint8) for _ in range(n)]
    texts = [f"ui screenshot. screen kind {chr(97 + i)} number {i}" for i in range(n)]
    return images, texts


def test_overfit_batch_contrastive_under_desk_preset():
    # 8 fixed samples, desk hyperparameters: loss must fall below 10% of the
    # initial value within 300 steps (here: batch = all 8, 300 epochs = 300 steps)
    images, texts = _fixed_samples()
    view = ArrayContrastiveView(images, texts)
    params = init_params(TINY, seed=1)
    config = TrainConfig(objective="batch_contrastive", batch_size=8, epochs=300,
                         learning_rate=1e-3, weight_decay=0.01, seed=5, preset="desk")
    _, trace = train_stage(params, view, config)
    assert len(trace) == 300
    assert trace[-1] < 0.10 * trace[0], f"{trace[0]:.3f} -> {trace[-1]:.3f}"


def test_overfit_pairwise_below_indifference():
    rng = np.random.default_rng(2)
    n = 8
    pos = [rng.integers(0, 256, (32, 32, 3), dtype=np.uint8) for _ in range(n)]
    neg = [rng.integers(0, 256, (32, 32, 3), dtype=np.uint8) for _ in range(n)]
    texts = [f"ui screenshot. well-designed. screen {i}" for i in range(n)]
    view = ArrayPairwiseView(pos, neg, texts)
    params = init_params(TINY, seed=3)
    config = TrainConfig(objective="pairwise", batch_size=8, epochs=120,
                         learning_rate=1e-3, weight_decay=0.01, seed=6, preset="desk")
    _, trace = train_stage(params, view, config)
    # below ln 2 means the preferred screenshot wins on average
    assert sum(trace[-10:]) / 10 < math.log(2)


def test_empty_dataset():
    params = init_params(TINY, seed=0)
    view = ArrayContrastiveView([], [])
    with pytest.raises(EmptyDataset):
        train_stage(params, view, TrainConfig())


def test_training_determinism():
    images, texts = _fixed_samples(6, seed=4)
    view = ArrayContrastiveView(images, texts)
    config = TrainConfig(objective="batch_contrastive", batch_size=4, epochs=3,
                         learning_rate=1e-3, seed=9)
    p1, t1 = train_stage(init_params(TINY, seed=2), view, config)
    p2, t2 = train_stage(init_params(TINY, seed=2), view, config)
    assert t1 == t2
    for name in p1.tensors:
        np.testing.assert_array_equal(p1.tensors[name], p2.tensors[name])


def test_train_stage_does_not_mutate_input_params():
    images, texts = _fixed_samples(4, seed=5)
    view = ArrayContrastiveView(images, texts)
    params = init_params(TINY, seed=2)
    before = {k: v.copy() for k, v in params.tensors.items()}
    train_stage(params, view, TrainConfig(batch_size=4, epochs=2, seed=1))
    for name, tensor in params.tensors.items():
        np.testing.assert_array_equal(tensor, before[name])


def test_tau_clamped():
    params = init_params(TINY, seed=0)
    params.tensors["tau"] = np.array(math.log(120.0), dtype=np.float32)
    opt = AdamW(params, lr=0.0, betas=(0.9, 0.98), eps=1e-6, weight_decay=0.0)
    grads = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    opt.step(params, grads)
    assert math.exp(float(params.tensors["tau"])) <= 100.0 + 1e-3


def _mini_views(seed=0):
    images, texts = _fixed_samples(6, seed=seed)
    cv = ArrayContrastiveView(images, texts)
    rng = np.random.default_rng(seed + 1)
    neg = [rng.integers(0, 256, (32, 32, 3), dtype=np.uint8) for _ in range(4)]
    pv = ArrayPairwiseView(images[:4], neg, texts[:4])
    return DatasetViews(contrastive=cv, pairwise=pv)


def _mini_configs():
    base = dict(batch_size=4, epochs=1, learning_rate=1e-3, weight_decay=0.01)
    return {i: TrainConfig(seed=i, **base) for i in range(1, 5)}


def test_run_schedule_stage_chaining_and_snapshots():
    params = init_params(TINY, seed=7)
    final, snaps, traces = run_schedule(params, _mini_views(0), _mini_views(1), _mini_configs(), last_stage=4)
    assert sorted(snaps) == [1, 2, 3, 4]
    assert sorted(traces) == [1, 2, 3, 4]
    # each stage produced distinct weights, and the final equals stage 4
    for a, b in ((1, 2), (2, 3), (3, 4)):
        assert any(not np.array_equal(snaps[a].tensors[k], snaps[b].tensors[k]) for k in snaps[a].tensors)
    for name in final.tensors:
        np.testing.assert_array_equal(final.tensors[name], snaps[4].tensors[name])


def test_run_schedule_suffix_disabling():
    params = init_params(TINY, seed=7)
    _, snaps_12, _ = run_schedule(params, _mini_views(0), None, _mini_configs(), last_stage=2)
    assert sorted(snaps_12) == [1, 2]
    _, snaps_1, _ = run_schedule(params, _mini_views(0), None, _mini_configs(), last_stage=1)
    assert sorted(snaps_1) == [1]
    # the shared prefix is identical weights (pretrain-only ablation == stage 1 of the longer run)
    for name in snaps_1[1].tensors:
        np.testing.assert_array_equal(snaps_1[1].tensors[name], snaps_12[1].tensors[name])


def test_run_schedule_requires_human_views_for_late_stages():
    params = init_params(TINY, seed=7)
    with pytest.raises(EmptyDataset):
        run_schedule(params, _mini_views(0), None, _mini_configs(), last_stage=3)


def test_presets_pin_paper_hyperparameters():
    s1 = preset_config("paper-stage1")
    assert (s1.batch_size, s1.epochs, s1.learning_rate, s1.weight_decay) == (128, 1, 5e-7, 0.2)
    assert (s1.beta1, s1.beta2, s1.eps) == (0.9, 0.98, 1e-6)
    s2 = preset_config("paper-stage2+")
    assert (s2.batch_size, s2.epochs, s2.learning_rate, s2.weight_decay) == (256, 1, 5e-7, 0.2)
    desk = preset_config("desk")
    assert (desk.batch_size, desk.epochs, desk.learning_rate, desk.weight_decay) == (32, 20, 1e-3, 0.01)
    with pytest.raises(ValueError):
        preset_config("gpu-cluster")
