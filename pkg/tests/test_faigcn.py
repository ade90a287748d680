"""
Tests for the graph-conv layer, frequency attention and the full model
"""
from types import SimpleNamespace

import numpy as np
import pytest
import torch
from pydantic import ValidationError

from ml.faigcn import (
    AttentionMap,
    Faigcn,
    FaigcnConfig,
    attention_pool,
    attention_scores,
    features_tensor,
    forward,
    gcn_layer,
    init_params,
)
from ml.numerics import DTYPE, RngStream, check_gradients, sparse_from_scipy
from pipeline.errors import ContractError, DimensionError
from pipeline.graph import adjacency_for


def test_config_defaults_and_validation():
    config = FaigcnConfig()
    assert config.channels == [32, 64]
    assert config.strides == [1, 2]
    assert config.partition_strategy == "spatial"
    with pytest.raises(ValidationError):
        FaigcnConfig(kernel_size=4)
    with pytest.raises(ValidationError):
        FaigcnConfig(channels=[8], strides=[1, 2])
    with pytest.raises(ValidationError):
        FaigcnConfig(unknown=1)


def test_init_shapes():
    """Layer 1 holds one 2 x 32 matrix per spatial partition"""
    model = init_params(FaigcnConfig(), 10, RngStream(0))
    assert tuple(model.weights[0].shape) == (3, 2, 32)
    assert tuple(model.weights[1].shape) == (3, 32, 64)
    assert model.out_bins == 5
    assert torch.all(model.norms[0].weight == 1.0)
    assert torch.all(model.fc.bias == 0.0)
    bound = np.sqrt(6.0 / 2)
    assert model.weights[0].abs().max().item() <= bound
    print("✓ parameter shapes and init ranges")


def test_init_is_seeded():
    a = init_params(FaigcnConfig(), 8, RngStream(4))
    b = init_params(FaigcnConfig(), 8, RngStream(4))
    for (name, pa), (_, pb) in zip(a.state_dict().items(), b.state_dict().items()):
        assert torch.equal(pa, pb), name


def test_layer_stride_halves_bins():
    """Stride 2 on 10 bins leaves 5 bins of 18 joints"""
    adj = sparse_from_scipy(adjacency_for(10, "spatial").stacked())
    h = torch.from_numpy(np.random.default_rng(0).normal(size=(1, 180, 2)))
    w = torch.from_numpy(np.random.default_rng(1).normal(size=(3, 2, 4)))
    out = gcn_layer(h, adj, w, stride=2)
    assert tuple(out.shape) == (1, 90, 4)
    assert torch.all(out >= 0)
    with pytest.raises(DimensionError):
        gcn_layer(h, adj, torch.zeros(3, 5, 4, dtype=DTYPE))


def test_layer_gradients():
    """Layer gradients agree with finite differences"""
    adj = sparse_from_scipy(adjacency_for(2, "spatial").stacked())
    h = torch.from_numpy(np.random.default_rng(2).normal(size=(1, 36, 2))).requires_grad_(True)
    w = torch.from_numpy(np.random.default_rng(3).normal(size=(3, 2, 3))).requires_grad_(True)
    assert check_gradients(lambda hh, ww: gcn_layer(hh, adj, ww).sum(), (h, w))


def test_attention_scores_variants():
    z = torch.zeros(1, 3, 18, 4, dtype=DTYPE)
    w = torch.ones(4, dtype=DTYPE)
    # zero-norm z: cosine is 0, so variant 1 scores are exactly 1
    assert torch.all(attention_scores(z, w, 1) == 1.0)
    assert torch.all(attention_scores(z, w, 2) == 0.0)
    z2 = torch.ones(1, 1, 1, 4, dtype=DTYPE)
    assert attention_scores(z2, w, 1).item() == pytest.approx(2.0)
    assert attention_scores(z2, w, 2).item() == pytest.approx(4.0)


def test_attention_pool():
    h = torch.arange(2 * 3 * 18 * 1, dtype=DTYPE).reshape(2, 3, 18, 1)
    alpha = torch.full((2, 3, 18), 1.0 / 3, dtype=DTYPE)
    assert torch.allclose(attention_pool(h, alpha), h.mean(dim=1))
    with pytest.raises(DimensionError):
        attention_pool(h, alpha[:, :2])


def test_forward_outputs(dataset):
    """Logits are a pair and attention sums to 1 over bins for every joint"""
    model = init_params(FaigcnConfig(), dataset[0].num_bins, RngStream(0))
    logits, amap = forward(dataset[0], model)
    assert tuple(logits.shape) == (2,)
    assert amap.alpha.shape == (model.out_bins, 18)
    assert np.allclose(amap.alpha.sum(axis=0), 1.0)
    assert amap.per_joint.sum() == pytest.approx(1.0)
    again, _ = forward(dataset[0], model)
    assert torch.equal(logits, again)
    print("✓ forward pass shapes")


def test_forward_rejects_wrong_bins(dataset):
    model = init_params(FaigcnConfig(), dataset[0].num_bins + 1, RngStream(0))
    with pytest.raises(DimensionError):
        forward(dataset[0], model)


def test_training_forward_needs_rng(dataset):
    model = init_params(FaigcnConfig(), dataset[0].num_bins, RngStream(0))
    with pytest.raises(ContractError):
        forward(dataset[0], model, training=True)
    logits, _ = forward(dataset[0], model, training=True, rng=RngStream(1))
    assert torch.isfinite(logits).all()


def test_without_attention_is_uniform(dataset):
    config = FaigcnConfig(use_attention=False)
    model = init_params(config, dataset[0].num_bins, RngStream(0))
    _, amap = forward(dataset[0], model)
    assert np.allclose(amap.alpha, AttentionMap.uniform(model.out_bins).alpha)


def test_bin_permutation_invariance(dataset):
    """With unlinked bins, one partition and no stride, shuffling bins leaves logits unchanged"""
    config = FaigcnConfig(kernel_size=1, inter_frequency=False, strides=[1, 1])
    model = init_params(config, dataset[0].num_bins, RngStream(0))
    model.eval()
    x = features_tensor(dataset[:2])
    perm = torch.from_numpy(RngStream(5).permutation(x.shape[1]))
    with torch.no_grad():
        logits, _ = model(x)
        shuffled, _ = model(x[:, perm])
    assert torch.allclose(logits, shuffled, atol=1e-10)


def test_state_dict_excludes_adjacency():
    model = Faigcn(FaigcnConfig(), 8)
    assert not any("adjacency" in key for key in model.state_dict())


@pytest.mark.parametrize("variant", [1, 2])
def test_end_to_end_gradients(variant):
    """Every parameter's gradient through a 4-bin model matches finite differences"""
    config = FaigcnConfig(channels=[4, 6], strides=[1, 2], dropout=0.0, attention_hidden=5, attention_variant=variant)
    model = init_params(config, 4, RngStream(variant))
    model.eval()
    x = torch.from_numpy(np.random.default_rng(variant).normal(size=(1, 4, 18, 2)))
    names = [name for name, _ in model.named_parameters()]
    params = tuple(p.detach().clone().requires_grad_(True) for p in model.parameters())

    def logits(*values):
        return torch.func.functional_call(model, dict(zip(names, values)), (x,))[0]

    assert check_gradients(logits, params)
    print(f"✓ end-to-end gradients, attention variant {variant}")


def test_zero_input_gives_uniform_attention():
    """With nothing to tell bins apart, attention is spread evenly"""
    model = init_params(FaigcnConfig(), 6, RngStream(9))
    model.eval()
    _, alpha = model(torch.zeros(2, 6, 18, 2, dtype=DTYPE))
    assert torch.allclose(alpha, torch.full_like(alpha, 1.0 / model.out_bins))
    assert torch.allclose(alpha.sum(dim=1), torch.ones(2, 18, dtype=DTYPE))


def test_attention_simplex_on_random_inputs():
    """100 random inputs: every joint's attention is non-negative and sums to 1 over bins"""
    model = init_params(FaigcnConfig(channels=[8, 8]), 6, RngStream(12))
    model.eval()
    x = torch.from_numpy(np.random.default_rng(12).normal(size=(100, 6, 18, 2)))
    with torch.no_grad():
        _, alpha = model(x)
    assert torch.all(alpha >= 0)
    assert torch.allclose(alpha.sum(dim=1), torch.ones(100, 18, dtype=DTYPE), rtol=0, atol=1e-9)


def test_layer_gradients_with_training_batch_norm():
    """Gradients through batch statistics (training mode) match finite differences"""
    adj = sparse_from_scipy(adjacency_for(2, "spatial").stacked())
    rng = np.random.default_rng(21)
    h = torch.from_numpy(rng.normal(size=(2, 36, 2))).requires_grad_(True)
    w = torch.from_numpy(rng.normal(size=(3, 2, 3))).requires_grad_(True)
    gamma = torch.from_numpy(rng.uniform(0.5, 1.5, size=3)).requires_grad_(True)
    beta = torch.from_numpy(rng.normal(size=3)).requires_grad_(True)

    def layer(hh, ww, g, b):
        bn = SimpleNamespace(
            running_mean=torch.zeros(3, dtype=DTYPE), running_var=torch.ones(3, dtype=DTYPE),
            weight=g, bias=b, momentum=0.1, eps=1e-5,
        )
        return gcn_layer(hh, adj, ww, bn=bn, training=True)

    assert check_gradients(layer, (h, w, gamma, beta))
