"""Smoke tests for the python bindings."""

import json

import numpy as np
import pytest

import zslforge as z


def test_version():
    assert z.__version__


def test_tokenize():
    assert z.tokenize("Rear-view mirror") == ["rear", "view", "mirror"]
    assert z.tokenize("") == []


def test_plan_chunks():
    assert z.plan_chunks(256) == [(0, 256)]
    assert z.plan_chunks(463) == [(0, 256), (206, 462), (412, 463)]
    with pytest.raises(z.ZslforgeError):
        z.plan_chunks(10, window=50, overlap=50)


def test_warmup_weight():
    assert z.warmup_weight(2.0, 0, 93, 0) == 0.0
    assert z.warmup_weight(2.0, 0, 93, 93) == 2.0
    assert z.warmup_weight(4.0, 6, 22, 14) == pytest.approx(2.0)


def test_adjust_for_missing():
    assert z.adjust_for_missing(0.5163, 489, 500) * 100 == pytest.approx(50.49, abs=0.02)


def test_hinge_loss():
    assert z.hinge_loss([2.0, 0.5, -1.0], 0, 1.0) == 0.0
    assert z.hinge_loss([2.0, 0.5, -1.0], 0, 2.0) == pytest.approx(0.5)


def test_kl_divergence():
    assert z.kl_divergence([[0.0]], [[0.0]]) == 0.0
    assert z.kl_divergence([[1.0]], [[0.0]]) == pytest.approx(0.5)


def test_sample_log_uniform():
    v = z.sample_log_uniform(0.1, 100.0, seed=4)
    assert 0.1 <= v <= 100.0
    assert z.sample_log_uniform(0.1, 100.0, seed=4) == v


def test_config_sampling_is_deterministic():
    a = json.loads(z.sample_simple_config(seed=9))
    b = json.loads(z.sample_simple_config(seed=9))
    assert a == b
    assert a["batch_size"] in (32, 128, 256, 512, 1024)
    c = json.loads(z.sample_cada_config(seed=9))
    assert c["vae_lr"] == 0.00015


def test_synthetic_train_predict_roundtrip():
    bundle = z.generate_synthetic(
        n_classes=8, n_seen=6, d_proto=4, d_img=8, d_aux=4, samples_per_class=20, seed=3
    )
    images = np.asarray(bundle["images"])
    aux = np.asarray(bundle["aux"])
    labels = list(bundle["labels"])
    assert images.shape == (160, 8)
    assert aux.shape == (8, 4)

    n_seen, per = 6, 20
    config = json.dumps(
        {"d_embed": 16, "margin": 5.0, "batch_size": 32, "learning_rate": 0.01,
         "epochs": 50, "seed": 1}
    )
    params, history = z.train_simple(
        config, aux[:n_seen], images[: n_seen * per], labels[: n_seen * per]
    )
    assert len(history) == 50
    assert history[-1] <= history[0]

    unseen_images = images[n_seen * per :]
    unseen_aux = aux[n_seen:]
    preds = z.predict_topk(params, unseen_images, unseen_aux, 1)
    unseen_labels = [c - n_seen for c in labels[n_seen * per :]]
    means = z.mean_per_class_topk(preds, unseen_labels, [1], 2)
    assert means[1] >= 0.5  # tiny task, should be mostly separable
