import pytest
import torch

from oracles import relative_gradient_error

from flexse.tf_blocks import (
    AxialTransformerLayer,
    CompositeTFModule,
    DualPathTFModule,
    MemoryTokens,
    WindowTFModule,
    WindowTransformerLayer,
    attach_memory,
    detach_memory,
)

torch.manual_seed(0)


def _probe(module, feat):
    """Scalar readout of a layer output against a fixed random weighting."""
    weights = torch.arange(feat.numel(), dtype=feat.dtype).reshape(feat.shape)
    weights = torch.sin(weights)  # fixed, nonuniform, bounded
    def fn():
        return (module(feat) * weights).sum()
    return fn


@pytest.mark.parametrize("shifted", [False, True])
def test_window_layer_preserves_shape(shifted):
    layer = WindowTransformerLayer(8, 2, 4, 4, shifted=shifted)
    for f, t in ((129, 251), (7, 9), (4, 4)):
        feat = torch.randn(8, 2, f, t)
        assert layer(feat).shape == feat.shape


def test_window_layer_zeroed_is_identity():
    layer = WindowTransformerLayer(8, 2, 4, 4, shifted=True)
    with torch.no_grad():
        layer.proj.weight.zero_()
        layer.proj.bias.zero_()
        layer.mlp_out.weight.zero_()
        layer.mlp_out.bias.zero_()
    feat = torch.randn(8, 1, 10, 13)
    assert torch.equal(layer(feat), feat)


@pytest.mark.parametrize("shifted", [False, True])
def test_window_layer_gradients(shifted):
    torch.manual_seed(11)
    layer = WindowTransformerLayer(4, 2, 2, 2, shifted=shifted).double()
    feat = torch.randn(4, 1, 3, 3, dtype=torch.float64, requires_grad=True)
    tensors = [feat] + list(layer.parameters())
    err = relative_gradient_error(_probe(layer, feat), tensors)
    assert err < 1e-4


@pytest.mark.parametrize("axis", ["freq", "time"])
def test_axial_layer_shape(axis):
    layer = AxialTransformerLayer(8, 2, axis)
    feat = torch.randn(8, 3, 11, 17)
    assert layer(feat).shape == feat.shape


def test_freq_path_local_to_frames():
    torch.manual_seed(2)
    layer = AxialTransformerLayer(8, 2, "freq")
    feat = torch.randn(8, 2, 9, 6)
    bumped = feat.clone()
    bumped[:, :, :, 3] += 1.0
    with torch.no_grad():
        base, moved = layer(feat), layer(bumped)
    others = [t for t in range(6) if t != 3]
    assert torch.equal(base[:, :, :, others], moved[:, :, :, others])
    assert not torch.equal(base[:, :, :, 3], moved[:, :, :, 3])


def test_time_path_local_to_bins():
    torch.manual_seed(3)
    layer = AxialTransformerLayer(8, 2, "time")
    feat = torch.randn(8, 2, 9, 6)
    bumped = feat.clone()
    bumped[:, :, 4, :] += 1.0
    with torch.no_grad():
        base, moved = layer(feat), layer(bumped)
    others = [f for f in range(9) if f != 4]
    assert torch.equal(base[:, :, others], moved[:, :, others])


@pytest.mark.parametrize("axis", ["freq", "time"])
def test_axial_layer_gradients(axis):
    torch.manual_seed(13)
    layer = AxialTransformerLayer(4, 2, axis).double()
    feat = torch.randn(4, 2, 4, 5, dtype=torch.float64, requires_grad=True)
    tensors = [feat] + list(layer.parameters())
    err = relative_gradient_error(_probe(layer, feat), tensors)
    assert err < 1e-4


def test_memory_attach_detach_shapes():
    mem = MemoryTokens(16, 4)
    feat = torch.randn(16, 2, 33, 251)
    extended = attach_memory(feat, mem.tokens)
    assert extended.shape == (16, 2, 33, 255)
    restored, carry = detach_memory(extended, 4)
    assert restored.shape == feat.shape
    assert torch.equal(restored, feat)
    assert carry.shape == (1, 16, 1, 4)


def test_first_segment_uses_learned_tokens_then_carry():
    mem = MemoryTokens(6, 2)
    feat = torch.randn(6, 3, 5, 7)
    ext = attach_memory(feat, mem.tokens, carry=None)
    head = ext[:, :, :, :2]
    expect = mem.tokens[0].unsqueeze(1).expand(6, 3, 5, 2)
    assert torch.equal(head, expect)
    carry = torch.randn(1, 6, 1, 2)
    ext2 = attach_memory(feat, mem.tokens, carry=carry)
    expect2 = carry[0].unsqueeze(1).expand(6, 3, 5, 2)
    assert torch.equal(ext2[:, :, :, :2], expect2)


def test_detach_carry_is_cf_mean():
    feat_ext = torch.randn(4, 3, 5, 9)
    _, carry = detach_memory(feat_ext, 2)
    expect = feat_ext[:, :, :, :2].mean(dim=(1, 2))
    assert torch.allclose(carry[0, :, 0, :], expect)


def test_memory_shape_mismatch_raises():
    feat = torch.randn(6, 1, 5, 7)
    mem = MemoryTokens(6, 2)
    with pytest.raises(ValueError):
        attach_memory(feat, mem.tokens, carry=torch.randn(1, 4, 1, 2))


def test_composite_module_runs_and_carries():
    torch.manual_seed(4)
    mod = CompositeTFModule(8, 2, 4, 4, group=2)
    feat = torch.randn(8, 2, 9, 12)
    out, carry = mod(feat)
    assert out.shape == feat.shape
    assert carry.shape == (1, 8, 1, 2)
    out2, _ = mod(feat, carry)
    assert not torch.equal(out, out2)  # carry changes the result


def test_dual_path_module_runs():
    mod = DualPathTFModule(8, 2, group=2)
    feat = torch.randn(8, 1, 9, 12)
    out, carry = mod(feat)
    assert out.shape == feat.shape
    assert carry.shape == (1, 8, 1, 2)


def test_window_module_has_no_memory_tokens():
    mod = WindowTFModule(8, 2, 4, 4)
    assert not any(isinstance(m, MemoryTokens) for m in mod.modules())
    assert len(mod.layers) == 4
    shifts = [layer.spec.shifted for layer in mod.layers]
    assert shifts == [False, True, False, True]
    feat = torch.randn(8, 2, 9, 12)
    out, carry = mod(feat)
    assert out.shape == feat.shape and carry is None
