import math

import numpy as np
import pytest

from sigvwap.backbone import (
    AttentionBlock,
    BackboneShape,
    KanUnivariate,
    RkanSublayer,
    TkanLayer,
    VsnBlock,
    attention,
    build_backbone,
    causal_mask,
    embed,
    kan_apply,
    rkan_step,
    tkan_step,
    vsn_forward,
)
from sigvwap.backbone.attention import multi_head_attention
from sigvwap.backbone.kan import tkan_sequence
from sigvwap.errors import ShapeError
from sigvwap.nn_core import ops
from sigvwap.nn_core.gradcheck import check_gradients, max_error
from sigvwap.nn_core.parameter_store import ParameterStore
from sigvwap.nn_core.tensor import Tensor

TINY_SHAPE = BackboneShape(
    num_variables=3,
    d_model=4,
    embedding=2,
    num_heads=2,
    stack_depth=1,
    num_sublayers=1,
    kan_width=2,
    grid_intervals=4,
)


def test_causal_mask():
    mask = causal_mask(4)
    assert np.all(mask[np.tril_indices(4)] == 0.0)
    assert np.all(np.isneginf(mask[np.triu_indices(4, k=1)]))
    assert causal_mask(1).tolist() == [[0.0]]
    with pytest.raises(ShapeError):
        causal_mask(0)


def test_attention_weights_are_causal_distributions():
    rng = np.random.default_rng(0)
    Q, K, V = (rng.normal(size=(5, 4)) for _ in range(3))
    _, weights = attention(Q, K, V, causal_mask(5), num_heads=2, return_weights=True)
    weights = weights.numpy()
    assert weights.shape == (2, 5, 5)
    assert weights.sum(axis=-1) == pytest.approx(np.ones((2, 5)))
    assert np.all(weights[:, np.triu_indices(5, k=1)[0], np.triu_indices(5, k=1)[1]] == 0.0)


def test_first_query_attends_only_to_itself():
    rng = np.random.default_rng(1)
    Q, K, V = (rng.normal(size=(3, 2)) for _ in range(3))
    out = attention(Q, K, V, causal_mask(3)).numpy()
    assert out[0] == pytest.approx(V[0])


def test_permuting_future_keys_leaves_the_past_unchanged():
    rng = np.random.default_rng(2)
    block = AttentionBlock.create(ParameterStore(), 4, 2, rng)
    x = rng.normal(size=(6, 4))
    shuffled = x.copy()
    shuffled[3:] = x[[5, 3, 4]]
    out, _ = multi_head_attention(x, block)
    out_shuffled, _ = multi_head_attention(shuffled, block)
    assert out_shuffled.numpy()[:3] == pytest.approx(out.numpy()[:3], abs=1e-12)


def test_attention_rejects_indivisible_heads():
    with pytest.raises(ShapeError):
        AttentionBlock.create(ParameterStore(), 5, 2, np.random.default_rng(0))
    with pytest.raises(ShapeError):
        attention(np.ones((2, 3)), np.ones((2, 3)), np.ones((2, 3)), None, num_heads=2)


def test_vsn_importance_is_a_distribution():
    block = VsnBlock.create(ParameterStore(), 4, 3, np.random.default_rng(3))
    x = np.random.default_rng(4).normal(size=(2, 5, 4))
    selected, weights = vsn_forward(embed(x, block), block)
    assert selected.shape == (2, 5, 3)
    assert weights.numpy().sum(axis=-1) == pytest.approx(np.ones((2, 5)))
    assert np.all(weights.numpy() >= 0.0)


def test_vsn_single_variable_has_full_importance():
    block = VsnBlock.create(ParameterStore(), 1, 2, np.random.default_rng(5))
    _, weights = vsn_forward(embed(np.ones((3, 1)), block), block)
    assert weights.numpy() == pytest.approx(np.ones((3, 1)))


def test_embed_rejects_wrong_variable_count():
    block = VsnBlock.create(ParameterStore(), 3, 2, np.random.default_rng(6))
    with pytest.raises(ShapeError):
        embed(np.ones((4, 2)), block)


def test_kan_without_splines_is_linear():
    phi = KanUnivariate.create(ParameterStore(), "phi", 3, 2, np.random.default_rng(7))
    phi.coefficients.value[...] = 0.0
    s = np.random.default_rng(8).normal(size=(4, 3))
    assert kan_apply(phi, s).numpy() == pytest.approx(s @ phi.bypass.value, abs=1e-12)


def test_kan_outside_the_grid_keeps_only_the_bypass():
    phi = KanUnivariate.create(ParameterStore(), "phi", 2, 2, np.random.default_rng(9))
    s = np.array([[40.0, -40.0]])
    assert kan_apply(phi, s).numpy() == pytest.approx(s @ phi.bypass.value, abs=1e-12)


def test_kan_spline_vanishes_past_the_grid_ends():
    phi = KanUnivariate.create(ParameterStore(), "phi", 1, 1, np.random.default_rng(22))
    phi.coefficients.value[...] = 1.0
    phi.bypass.value[...] = 0.0
    outside = np.array([[-5.0], [-4.0], [-3.5], [-3.0], [3.0], [3.5], [4.0], [5.0]])
    assert kan_apply(phi, outside).numpy() == pytest.approx(np.zeros((8, 1)), abs=1e-15)
    near_edges = np.array([[-3.0 + 1e-6], [3.0 - 1e-6]])
    assert np.abs(kan_apply(phi, near_edges).numpy()).max() < 1e-12
    assert kan_apply(phi, np.array([[0.0]])).item() > 0.5


def test_kan_needs_more_intervals_than_the_spline_order():
    with pytest.raises(ShapeError):
        KanUnivariate.create(ParameterStore(), "phi", 1, 1, np.random.default_rng(23), 3)


def test_kan_is_continuous():
    phi = KanUnivariate.create(ParameterStore(), "phi", 1, 1, np.random.default_rng(10))
    grid = np.linspace(-4.0, 4.0, 801)[:, None]
    values = kan_apply(phi, grid).numpy()[:, 0]
    assert np.abs(np.diff(values)).max() < 0.05


def test_rkan_step_from_zero_state():
    store = ParameterStore()
    layer = RkanSublayer.create(store, "rkan", 2, 3, np.random.default_rng(11))
    x_t = np.array([0.2, -0.4])
    o, state = rkan_step(layer, x_t, np.zeros(3))
    expected_o = kan_apply(layer.phi, x_t @ layer.W_x.value).numpy()
    assert o.numpy() == pytest.approx(expected_o, abs=1e-12)
    assert state.numpy() == pytest.approx(expected_o @ layer.W_hz.value, abs=1e-12)


def _zeroed_tkan(n_in=2, hidden=3):
    store = ParameterStore()
    layer = TkanLayer.create(
        store, "tkan", n_in, hidden, np.random.default_rng(12), num_sublayers=2, kan_width=2
    )
    for _, tensor in store.trainable():
        tensor.value[...] = 0.0
    return layer


def test_tkan_with_zero_weights():
    layer = _zeroed_tkan()
    h, c, states = layer.initial_state(())
    h, c, _ = tkan_step(layer, np.array([0.3, -0.7]), h, c, states)
    assert c.numpy() == pytest.approx([0.25] * 3, abs=1e-12)
    assert h.numpy() == pytest.approx([0.5 * math.tanh(0.25)] * 3, abs=1e-12)


def test_saturated_forget_gate_keeps_the_cell():
    layer = _zeroed_tkan()
    layer.b_f.value[...] = 40.0
    layer.b_i.value[...] = -40.0
    h, _, states = layer.initial_state(())
    c_prev = ops.tanh(np.array([0.4, -0.2, 0.9]))
    _, c, _ = tkan_step(layer, np.array([1.0, 1.0]), h, c_prev, states)
    assert c.numpy() == pytest.approx(c_prev.numpy(), abs=1e-12)


def test_tkan_hidden_state_is_bounded():
    layer = TkanLayer.create(ParameterStore(), "tkan", 3, 4, np.random.default_rng(13))
    x = np.random.default_rng(14).normal(scale=25.0, size=(2, 10, 3))
    hidden = tkan_sequence(layer, x).numpy()
    assert hidden.shape == (2, 10, 4)
    assert np.abs(hidden).max() < 1.0


@pytest.mark.parametrize("kind", ["transformer", "recurrent"])
def test_backbone_shape_and_no_lookahead(kind):
    backbone = build_backbone(kind, ParameterStore(), TINY_SHAPE, np.random.default_rng(15))
    x = np.random.default_rng(16).normal(size=(2, 6, 3))
    out = backbone(x).numpy()
    assert out.shape == (2, 6, 4)

    for cut in range(6):
        altered = x.copy()
        altered[:, cut:] += 5.0
        out_altered = backbone(altered).numpy()
        assert np.array_equal(out_altered[:, :cut], out[:, :cut])
        assert not np.allclose(out_altered[:, cut:], out[:, cut:])


def test_transformer_backbone_records_importance():
    backbone = build_backbone(
        "transformer", ParameterStore(), TINY_SHAPE, np.random.default_rng(17)
    )
    backbone(np.ones((4, 3)))
    assert backbone.last_importance.numpy().shape == (4, 3)


def test_backbone_gradient():
    store = ParameterStore()
    backbone = build_backbone("transformer", store, TINY_SHAPE, np.random.default_rng(18))
    x = np.random.default_rng(19).normal(size=(3, 3))
    weights = np.random.default_rng(20).normal(size=(3, 4))

    def loss():
        return ops.sum_(ops.mul(backbone(x), weights))

    results = check_gradients(
        loss, dict(store.trainable()), max_entries=4, rng=np.random.default_rng(21)
    )
    assert max_error(results) <= 1e-4


def _weighted_sum(out, seed):
    weights = np.random.default_rng(seed).normal(size=out.shape)
    return ops.sum_(ops.mul(out, weights))


def test_vsn_gradient():
    store = ParameterStore()
    block = VsnBlock.create(store, 3, 2, np.random.default_rng(22))
    x = Tensor(np.random.default_rng(23).normal(size=(2, 4, 3)), requires_grad=True)

    def loss():
        selected, weights = vsn_forward(embed(x, block), block)
        return ops.add(_weighted_sum(selected, 24), _weighted_sum(weights, 25))

    assert max_error(check_gradients(loss, {"x": x, **dict(store.trainable())})) <= 1e-4


def test_kan_gradient():
    store = ParameterStore()
    phi = KanUnivariate.create(store, "phi", 3, 2, np.random.default_rng(26))
    # entries inside and past the grid ends
    s = Tensor(np.random.default_rng(27).normal(scale=2.0, size=(5, 3)), requires_grad=True)

    def loss():
        return _weighted_sum(kan_apply(phi, s), 28)

    assert max_error(check_gradients(loss, {"s": s, **dict(store.trainable())})) <= 1e-4


def test_rkan_step_gradient():
    store = ParameterStore()
    layer = RkanSublayer.create(store, "rkan", 2, 3, np.random.default_rng(29), intervals=4)
    rng = np.random.default_rng(30)
    x_t = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
    state = Tensor(rng.normal(scale=0.5, size=(4, 3)), requires_grad=True)

    def loss():
        o, new_state = rkan_step(layer, x_t, state)
        return ops.add(_weighted_sum(o, 31), _weighted_sum(new_state, 32))

    params = {"x_t": x_t, "state": state, **dict(store.trainable())}
    assert max_error(check_gradients(loss, params)) <= 1e-4


def test_tkan_step_gradient():
    store = ParameterStore()
    layer = TkanLayer.create(store, "tkan", 2, 3, np.random.default_rng(33), kan_width=2)
    rng = np.random.default_rng(34)
    x_t = Tensor(rng.normal(size=(2, 2)), requires_grad=True)
    h_prev = Tensor(rng.normal(scale=0.5, size=(2, 3)), requires_grad=True)
    c_prev = Tensor(rng.normal(scale=0.5, size=(2, 3)), requires_grad=True)
    states = [Tensor(rng.normal(scale=0.5, size=(2, 2))) for _ in layer.sublayers]

    def loss():
        h, c, new_states = tkan_step(layer, x_t, h_prev, c_prev, states)
        total = ops.add(_weighted_sum(h, 35), _weighted_sum(c, 36))
        return ops.add(total, _weighted_sum(ops.concat(new_states, axis=-1), 37))

    params = {"x_t": x_t, "h_prev": h_prev, "c_prev": c_prev, **dict(store.trainable())}
    assert max_error(check_gradients(loss, params)) <= 1e-4


def test_multi_head_attention_gradient():
    store = ParameterStore()
    block = AttentionBlock.create(store, 4, 2, np.random.default_rng(38))
    x = Tensor(np.random.default_rng(39).normal(size=(2, 5, 4)), requires_grad=True)

    def loss():
        out, weights = multi_head_attention(x, block)
        return ops.add(_weighted_sum(out, 40), _weighted_sum(weights, 41))

    assert max_error(check_gradients(loss, {"x": x, **dict(store.trainable())})) <= 1e-4
