import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memgan import crossbar as xb
from memgan.device import DeviceParams
from memgan.imaging import read_pgm

uS = 1e-6
GEN = xb.GENERATOR_MAPPING
DISC = xb.DISCRIMINATOR_MAPPING
LAYER_SHAPES = [(100, 128), (128, 784), (784, 128), (128, 1)]
LAYER_SPECS = [GEN, GEN, DISC, DISC]


def small_stack(shapes, rng, params=None, specs=None):
    params = params or DeviceParams()
    specs = specs or [GEN] * len(shapes)
    return xb.init_stack(shapes, specs, params, rng)


def set_weights(stack, name, w):
    """Overwrite a region so that its signed weight view equals ``w``."""
    spec = stack.specs[name]
    idx = stack.cells(name)
    sign = np.where(np.asarray(w) < 0, -1, 1).astype(np.int8)
    stack.sign_mask.ravel()[idx] = sign.ravel()
    stack.g.ravel()[idx] = xb.weights_to_conductance(np.abs(w), spec).ravel()


def triple_loop_vmm(W, x):
    rows, cols = len(W), len(W[0])
    out = []
    for j in range(cols):
        acc = 0.0
        for i in range(rows):
            acc += W[i][j] * x[i]
        out.append(acc)
    return out


# -- packing -----------------------------------------------------------------

def test_layer_shapes_fill_counts(rng):
    s = xb.init_stack(LAYER_SHAPES, LAYER_SPECS, DeviceParams(), rng)
    assert s.shape == (384, 576)
    assert s.n_tiles == 54
    assert int(s.mapped.sum()) == 213_632
    unused = ~s.mapped
    assert int(unused.sum()) == 7_552
    assert np.all(s.g[unused] == 150 * uS)
    # unused cells are exactly the tail of the packing order
    tail = xb.packing_order()[213_632:]
    assert np.array_equal(np.sort(tail), np.sort(np.flatnonzero(unused.ravel())))


def test_empty_stack_all_unused(rng):
    s = xb.init_stack([], [], DeviceParams(), rng)
    assert not s.mapped.any()
    assert np.all(xb.export_conductance_map(s) == 150 * uS)


def test_capacity_exceeded(rng):
    with pytest.raises(xb.CapacityError):
        xb.init_stack([(221_185, 1)], [GEN], DeviceParams(), rng)


def test_capacity_exact_fit(rng):
    s = xb.init_stack([(384, 576)], [GEN], DeviceParams(), rng)
    assert s.mapped.all()


def test_packing_order_walks_tiles_column_major():
    order = xb.packing_order()
    assert sorted(order.tolist()) == list(range(384 * 576))
    assert divmod(int(order[0]), 576) == (0, 0)
    assert divmod(int(order[63]), 576) == (0, 63)
    assert divmod(int(order[64]), 576) == (1, 0)
    # second tile sits below the first, seventh starts the next tile column
    assert divmod(int(order[4096]), 576) == (64, 0)
    assert divmod(int(order[6 * 4096]), 576) == (0, 64)


def test_regions_disjoint_and_row_major(rng):
    s = xb.init_stack(LAYER_SHAPES, LAYER_SPECS, DeviceParams(), rng,
                      names=["gen_w1", "gen_w2", "disc_w1", "disc_w2"])
    seen = np.concatenate([s.cells(n) for n in s.regions])
    assert len(np.unique(seen)) == len(seen) == 213_632
    assert s.regions["gen_w2"].offset == 100 * 128
    assert s.regions["disc_w2"].offset == 100 * 128 + 2 * 128 * 784


def test_initial_magnitudes_and_signs(rng):
    s = xb.init_stack(LAYER_SHAPES, LAYER_SPECS, DeviceParams(), rng,
                      names=["gen_w1", "gen_w2", "disc_w1", "disc_w2"])
    w = xb.conductance_to_weights(s, "gen_w2")
    assert np.abs(w).max() <= 0.25 * 0.4 + 1e-12
    frac_pos = (s.signs("gen_w2") > 0).mean()
    assert abs(frac_pos - 0.5) < 0.01
    assert np.abs(xb.conductance_to_weights(s, "disc_w1")).max() <= 0.25 * 0.15 + 1e-12


def test_mapping_must_match_device_range(rng):
    with pytest.raises(ValueError):
        xb.init_stack([(2, 2)], [xb.MappingSpec(g_min=100e-6)], DeviceParams(), rng)


# -- mapping ------------------------------------------------------------------

def test_mapping_examples():
    assert xb.conductance_weights(150 * uS, 1, GEN) == 0.0
    assert xb.conductance_weights(300 * uS, -1, DISC) == pytest.approx(-0.15, rel=1e-12)
    assert xb.conductance_weights(225 * uS, 1, GEN) == pytest.approx(0.2, rel=1e-12)
    assert xb.weights_to_conductance(0.0, GEN) == pytest.approx(150 * uS, rel=1e-12)
    assert xb.weights_to_conductance(0.4, GEN) == pytest.approx(300 * uS, rel=1e-12)
    assert xb.weights_to_conductance(0.1, GEN) == pytest.approx(187.5 * uS, rel=1e-12)


@pytest.mark.parametrize("w", [-0.01, 0.41])
def test_weights_to_conductance_domain(w):
    with pytest.raises(ValueError):
        xb.weights_to_conductance(w, GEN)


@pytest.mark.parametrize("kw", [dict(g_min=3e-4, g_max=1e-4), dict(w_min=0.5, w_max=0.1), dict(w_min=-0.1)])
def test_mapping_spec_invariants(kw):
    with pytest.raises(ValueError):
        xb.MappingSpec(**kw)


def test_unknown_matrix(rng):
    s = small_stack([(2, 2)], rng)
    with pytest.raises(KeyError):
        xb.conductance_to_weights(s, "nope")
    with pytest.raises(KeyError):
        xb.vmm(s, "nope", [1, 2])


@given(w=st.floats(0.0, 0.4))
def test_round_trip(w):
    back = xb.conductance_weights(xb.weights_to_conductance(w, GEN), 1, GEN)
    assert back == pytest.approx(w, rel=1e-9, abs=1e-15)


@given(g1=st.floats(150e-6, 300e-6), g2=st.floats(150e-6, 300e-6))
def test_mapping_monotone_per_sign(g1, g2):
    if g1 == g2:
        return
    lo, hi = min(g1, g2), max(g1, g2)
    if xb.conductance_weights(hi, 1, GEN) == xb.conductance_weights(lo, 1, GEN):
        return  # below float resolution
    assert xb.conductance_weights(hi, 1, GEN) > xb.conductance_weights(lo, 1, GEN)
    assert xb.conductance_weights(hi, -1, GEN) < xb.conductance_weights(lo, -1, GEN)


# -- VMM ----------------------------------------------------------------------

def test_vmm_zero_input(rng):
    s = small_stack([(5, 3)], rng)
    assert np.all(xb.vmm(s, "m0", np.zeros(5)) == 0)


def test_vmm_hand_example(rng):
    s = small_stack([(2, 2)], rng)
    set_weights(s, "m0", np.array([[0.1, -0.2], [0.3, 0.0]]))
    np.testing.assert_allclose(xb.vmm(s, "m0", [1.0, 1.0]), [0.4, -0.2], rtol=1e-12)


def test_vmm_dimension_mismatch(rng):
    s = small_stack([(4, 3)], rng)
    with pytest.raises(ValueError):
        xb.vmm(s, "m0", np.ones(3))


def test_vmm_matches_triple_loop_64(rng):
    s = small_stack([(64, 64)], rng)
    x = rng.uniform(-1, 1, 64)
    W = xb.conductance_to_weights(s, "m0").tolist()
    ref = np.array(triple_loop_vmm(W, x.tolist()))
    got = xb.vmm(s, "m0", x)
    assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(np.abs(ref))


def test_vmm_batch_rows_equal_single_rows(rng):
    s = small_stack([(7, 4)], rng)
    X = rng.normal(size=(5, 7))
    batch = xb.vmm(s, "m0", X)
    for i in range(5):
        np.testing.assert_allclose(batch[i], xb.vmm(s, "m0", X[i]), rtol=1e-14)


# -- Manhattan updates --------------------------------------------------------

def test_no_update_no_pulses(rng):
    s = small_stack([(3, 4)], rng)
    before = s.g.copy()
    assert xb.apply_manhattan_update(s, "m0", np.zeros((3, 4)), rng) == (0, 0.0)
    assert np.array_equal(s.g, before)


def test_clipped_pulse_still_costs_energy(rng):
    s = small_stack([(1, 1)], rng)
    set_weights(s, "m0", np.array([[0.4]]))  # positive cell at g_max
    n, e = xb.apply_manhattan_update(s, "m0", np.array([[1]]), rng)
    assert n == 1
    assert s.conductances("m0")[0, 0] == pytest.approx(300 * uS, rel=1e-15)
    assert e == pytest.approx(0.64 * 300e-6 * 1e-7, rel=1e-12)


def test_negative_cell_increase_is_reset(rng):
    s = small_stack([(1, 1)], rng)
    set_weights(s, "m0", np.array([[-0.2]]))
    g0 = s.conductances("m0")[0, 0]
    xb.apply_manhattan_update(s, "m0", np.array([[1]]), rng)
    assert s.conductances("m0")[0, 0] < g0
    assert xb.conductance_to_weights(s, "m0")[0, 0] > -0.2


def test_positive_cell_increase_is_set(rng):
    s = small_stack([(1, 1)], rng)
    set_weights(s, "m0", np.array([[0.2]]))
    xb.apply_manhattan_update(s, "m0", np.array([[1]]), rng)
    assert xb.conductance_to_weights(s, "m0")[0, 0] > 0.2


def test_update_shape_mismatch(rng):
    s = small_stack([(3, 4)], rng)
    with pytest.raises(ValueError):
        xb.apply_manhattan_update(s, "m0", np.ones((4, 3)), rng)


def test_update_touches_only_its_region(rng):
    s = small_stack([(10, 10), (5, 5)], rng)
    other = s.conductances("m1").copy()
    unused = s.g[~s.mapped].copy()
    xb.apply_manhattan_update(s, "m0", np.ones((10, 10)), rng)
    assert np.array_equal(s.conductances("m1"), other)
    assert np.array_equal(s.g[~s.mapped], unused)


def test_accumulators(rng):
    s = small_stack([(4, 4)], rng)
    n1, e1 = xb.apply_manhattan_update(s, "m0", np.ones((4, 4)), rng)
    n2, e2 = xb.apply_manhattan_update(s, "m0", -np.ones((4, 4)), rng)
    assert s.pulses == n1 + n2 == 32
    assert s.energy_j == e1 + e2


def test_energy_matches_pulse_log_recomputation(rng):
    params = DeviceParams.with_variation()
    s = xb.init_stack([(30, 20)], [GEN], params, rng)
    s.pulse_log = []
    for _ in range(5):
        d = rng.integers(-1, 2, size=(30, 20))
        s.pulse_log.clear()
        _, e = xb.apply_manhattan_update(s, "m0", d, rng)
        terms = []
        for _, cells, pol, g_before in s.pulse_log:
            for p, g in zip(pol.tolist(), g_before.tolist()):
                v = params.v_set if p > 0 else params.v_reset
                terms.append(v * v * g * params.t_p)
        assert e == math.fsum(terms)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), steps=st.integers(1, 60))
def test_bounds_and_signs_under_fuzzed_updates(seed, steps):
    rng = np.random.default_rng(seed)
    s = xb.init_stack([(12, 9), (9, 3)], [GEN, DISC], DeviceParams(sigma_d2d=0.5, sigma_c2c=0.3), rng)
    signs = s.sign_mask.copy()
    for _ in range(steps):
        for name, r in s.regions.items():
            xb.apply_manhattan_update(s, name, rng.integers(-1, 2, size=(r.rows, r.cols)), rng)
    assert s.g.min() >= 150e-6 and s.g.max() <= 300e-6
    assert np.array_equal(s.sign_mask, signs)


# -- export & area ------------------------------------------------------------

def test_export_is_a_copy(rng):
    s = small_stack([(3, 3)], rng)
    m = xb.export_conductance_map(s)
    m[:] = 0
    assert s.g.min() >= 150 * uS


def test_conductance_map_files(tmp_path, rng):
    s = small_stack([(3, 3)], rng)
    csv_path, pgm_path = xb.save_conductance_map(s, tmp_path, "hw-ideal", 7)
    assert csv_path.name == "gmap_hw-ideal_007.csv"
    assert pgm_path.name == "gmap_hw-ideal_007.pgm"
    g = np.loadtxt(csv_path, delimiter=",")
    assert g.shape == (384, 576)
    np.testing.assert_allclose(g, s.g, rtol=1e-9)
    img = read_pgm(pgm_path)
    assert img.shape == (384, 576)
    assert np.all(img[~s.mapped] == 0)


def test_pgm_scaling_endpoints(tmp_path):
    g = np.array([[150e-6, 300e-6, 225e-6]])
    img = read_pgm(xb.write_conductance_pgm(g, tmp_path / "x.pgm"))
    assert img.tolist() == [[0, 255, 128]]


def test_area_report():
    a = xb.area_report()
    assert a.cell_um2 == 0.36
    assert a.tile_um2 == 1474.56
    assert a.tile_um2 == pytest.approx(4096 * 0.36, rel=1e-12)
    assert a.tiles == 54
    assert a.total_um2 == 79626.24


def test_area_single_tile():
    assert xb.area_report(tiles=1).total_um2 == 1474.56


def test_area_from_stack(rng):
    assert xb.area_report(small_stack([(2, 2)], rng)).total_um2 == 79626.24
