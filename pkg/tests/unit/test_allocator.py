import numpy as np
import pytest

from sigvwap.allocator import (
    BaseCurve,
    StepAdjuster,
    VolumeAllocator,
    allocate,
    allocation_weights,
    base_curve_of,
    naive_allocation,
    refine_allocation,
    static_sub_allocator,
    zero_adjusters,
)
from sigvwap.errors import CheckpointError, ConfigError, ShapeError
from sigvwap.model.allocation import AllocationCurve
from sigvwap.nn_core import ops
from sigvwap.nn_core.gradcheck import check_gradients, max_error
from sigvwap.nn_core.parameter_store import ParameterStore

LOOKBACK = 2
D_MODEL = 3


def _allocator(horizon, seed=0, hidden=(4,)):
    store = ParameterStore()
    allocator = VolumeAllocator(store, D_MODEL, horizon, np.random.default_rng(seed), hidden)
    return store, allocator


def _context(horizon, seed=1, batch=()):
    return np.random.default_rng(seed).normal(size=batch + (LOOKBACK + horizon - 1, D_MODEL))


def test_zero_adjusters_on_a_uniform_base_split_evenly():
    store, allocator = _allocator(4)
    assert zero_adjusters(store) == 2 * 3
    curve = allocate(_context(4), allocator.base, allocator.adjusters, LOOKBACK)
    assert curve.weights == pytest.approx([0.25] * 4, abs=1e-15)


def test_zero_adjusters_return_the_base_curve():
    store, allocator = _allocator(5)
    allocator.base.logits.value[...] = [0.3, -1.0, 0.8, 0.0, 0.2]
    zero_adjusters(store)
    curve = allocate(_context(5), allocator.base, allocator.adjusters, LOOKBACK)
    assert curve.weights == pytest.approx(base_curve_of(store).weights, abs=1e-12)


def test_saturated_adjusters_fill_early_bins():
    store, allocator = _allocator(3)
    for adjuster in allocator.adjusters:
        adjuster.layers[-1].b.value[...] = 1e3
    volumes, alphas = allocator(_context(3), LOOKBACK)
    assert alphas.numpy() == pytest.approx([2.0, 2.0])
    assert volumes.numpy() == pytest.approx([2.0 / 3.0, 1.0 / 3.0, 0.0], abs=1e-12)


def test_negative_saturation_defers_to_the_last_bin():
    store, allocator = _allocator(4)
    for adjuster in allocator.adjusters:
        adjuster.layers[-1].b.value[...] = -1e3
    volumes, _ = allocator(_context(4), LOOKBACK)
    assert volumes.numpy() == pytest.approx([0.0, 0.0, 0.0, 1.0], abs=1e-12)


def _signed_adjusters(allocator, scale=2.0):
    """Wires every f_t to ``scale * a[row_t, 0]`` so alpha lands on both sides of 1."""
    for adjuster in allocator.adjusters:
        first, middle, last = adjuster.layers
        for layer in adjuster.layers:
            layer.W.value[...] = 0.0
            layer.b.value[...] = 0.0
        first.W.value[0, :2] = [scale, -scale]
        middle.W.value[0, 0] = middle.W.value[1, 1] = 1.0
        last.W.value[:2, 0] = [1.0, -1.0]


@pytest.mark.parametrize("horizon", [2, 3, 12])
def test_allocations_conserve_volume(horizon):
    draws = 10_000
    contexts = _context(horizon, seed=horizon, batch=(draws,))
    _, random_weights = _allocator(horizon, seed=horizon, hidden=(6, 3))
    random_weights.base.logits.value[...] = np.random.default_rng(horizon).normal(
        scale=2.0, size=horizon
    )
    _, front_loaded = _allocator(horizon, hidden=(6, 3))
    front_loaded.base.logits.value[...] = np.linspace(3.0, -3.0, horizon)
    _signed_adjusters(front_loaded)

    for allocator in (random_weights, front_loaded):
        volumes, alphas = allocator(contexts, LOOKBACK)
        volumes, alphas = volumes.numpy(), alphas.numpy()
        assert volumes.shape == (draws, horizon)
        assert alphas.shape == (draws, horizon - 1)
        assert np.all(volumes >= 0.0)
        assert np.abs(volumes.sum(axis=-1) - 1.0).max() <= 1e-12
        assert np.all((alphas > 0.0) & (alphas < 2.0))
    # budget used up before the last bin
    assert np.mean(volumes[:, -1] == 0.0) > 0.1


def test_bin_volumes_only_read_rows_up_to_their_start():
    horizon = 6
    _, allocator = _allocator(horizon, seed=2, hidden=(6, 3))
    allocator.base.logits.value[...] = np.linspace(1.0, -1.0, horizon)
    context = _context(horizon, seed=3, batch=(8,))
    volumes = allocator(context, LOOKBACK)[0].numpy()
    rng = np.random.default_rng(4)

    for t in range(1, horizon):
        altered = context.copy()
        tail = altered[..., LOOKBACK - 1 + t :, :]
        tail += rng.normal(scale=3.0, size=tail.shape)
        changed = allocator(altered, LOOKBACK)[0].numpy()
        assert np.array_equal(changed[:, :t], volumes[:, :t])
        if t < horizon - 1:
            assert not np.array_equal(changed, volumes)


def test_allocation_gradient():
    horizon = 4
    store, allocator = _allocator(horizon, seed=5, hidden=(5,))
    allocator.base.logits.value[...] = [0.4, -0.2, 0.1, -0.3]
    context = _context(horizon, seed=6, batch=(3,))
    rng = np.random.default_rng(7)
    volume_weights = rng.normal(size=(3, horizon))
    alpha_weights = rng.normal(size=(3, horizon - 1))

    volumes, alphas = (t.numpy() for t in allocator(context, LOOKBACK))
    base = base_curve_of(store).weights
    remaining = np.ones(3)
    for t in range(horizon - 1):
        proposal = alphas[:, t] * base[t]
        assert np.all(np.abs(proposal - remaining) > 1e-3)
        remaining = remaining - volumes[:, t]

    def loss():
        v, alpha = allocator(context, LOOKBACK)
        weighted = ops.sum_(ops.mul(v, volume_weights))
        return ops.add(weighted, ops.sum_(ops.mul(alpha, alpha_weights)))

    assert max_error(check_gradients(loss, dict(store.trainable()))) <= 1e-4
    assert np.abs(store["alloc.base.logits"].grad).max() > 0.0
    assert np.abs(store["alloc.adjuster.1.w1.W"].grad).max() > 0.0


def test_adjuster_input_grows_with_the_bin():
    store = ParameterStore()
    adjuster = StepAdjuster.create(store, 3, D_MODEL + 2, (4,), np.random.default_rng(0))
    assert adjuster.layers[0].W.shape == (D_MODEL + 2, 4)
    assert adjuster(np.ones(D_MODEL + 2)).shape == (1,)


def test_allocation_rejects_bad_inputs():
    with pytest.raises(ShapeError):
        _allocator(1)
    store, allocator = _allocator(3)
    with pytest.raises(ShapeError):
        allocator(np.ones((LOOKBACK, D_MODEL)), LOOKBACK)
    context = _context(3)
    context[0, 0] = np.nan
    with pytest.raises(ShapeError):
        allocator(context, LOOKBACK)
    with pytest.raises(ShapeError):
        allocation_weights(_context(3), allocator.base, allocator.adjusters[:1], LOOKBACK)


def test_allocate_takes_a_single_context():
    _, allocator = _allocator(3)
    with pytest.raises(ShapeError):
        allocate(_context(3, batch=(2,)), allocator.base, allocator.adjusters, LOOKBACK)


@pytest.mark.parametrize("horizon", [1, 3, 12])
def test_naive_allocation(horizon):
    curve = naive_allocation(horizon)
    assert curve.weights == pytest.approx([1.0 / horizon] * horizon)
    assert abs(curve.weights.sum() - 1.0) <= 1e-15


def test_base_curve_is_a_softmax():
    store = ParameterStore()
    base = BaseCurve.create(store, 3)
    base.logits.value[...] = [0.0, np.log(2.0), np.log(5.0)]
    assert base_curve_of(store).weights == pytest.approx([0.125, 0.25, 0.625])
    assert base.curve().numpy() == pytest.approx([0.125, 0.25, 0.625])


def test_refinement_splits_each_parent_bin():
    refined = refine_allocation(
        AllocationCurve([0.5, 0.5]), 3600, {3600: static_sub_allocator(naive_allocation(3))}
    )
    assert refined.curve.weights == pytest.approx([1.0 / 6.0] * 6)
    assert refined.bin_seconds.tolist() == [1200] * 6
    assert refined.parent_index.tolist() == [0, 0, 0, 1, 1, 1]


def test_refinement_below_the_threshold_is_identity():
    parent = AllocationCurve([0.2, 0.3, 0.5])
    refined = refine_allocation(parent, 600, {})
    assert refined.curve.weights == pytest.approx(parent.weights)
    assert refined.bin_seconds.tolist() == [600] * 3


def test_refinement_recurses_through_the_ladder():
    parent = AllocationCurve([0.7, 0.3])
    ladder = {
        7200: static_sub_allocator(np.array([0.4, 0.6])),
        3600: static_sub_allocator(np.array([0.5, 0.25, 0.25])),
    }
    refined = refine_allocation(parent, 7200, ladder)
    assert len(refined.curve) == 12
    assert set(refined.bin_seconds.tolist()) == {1200}
    assert refined.parent_mass(2) == pytest.approx([0.7, 0.3], abs=1e-12)
    assert refined.curve.weights[:3] == pytest.approx([0.7 * 0.4 * w for w in (0.5, 0.25, 0.25)])


def test_refinement_needs_every_rung():
    with pytest.raises(CheckpointError):
        refine_allocation(AllocationCurve([1.0]), 7200, {})


def test_refinement_rejects_uneven_splits():
    with pytest.raises(ConfigError):
        refine_allocation(
            AllocationCurve([1.0]), 3000, {3000: static_sub_allocator(naive_allocation(7))}
        )
