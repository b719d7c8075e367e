import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracle_reference import scalar_drop_cost

from d2dpower.channel import ChannelParams, GainTable, build_gain_table, dbw_to_watt
from d2dpower.errors import ShapeError
from d2dpower.objective import (
    ConstraintConfig,
    batch_cost,
    drop_cost,
    enb_interference,
    interference_penalty,
    power_penalty,
    spectral_efficiency,
    stacked_cost,
    throughput,
)
from d2dpower.topology import (
    Batch,
    D2DPair,
    Drop,
    build_hex_layout,
    sample_batch,
    sample_drop,
)

NOISE_DBW = -130.0
NO_SHADOW = ChannelParams(shadowing_enabled=False)


def _random_instance(rng, k=None, n=None, c=1):
    k = k or int(rng.integers(1, 5))
    n = n or int(rng.integers(1, 5))
    layout = build_hex_layout(c, 500.0)
    pairs = []
    for i in range(k):
        tx = rng.uniform(-400, 400, 2)
        rx = tx + rng.uniform(-100, 100, 2)
        pairs.append(D2DPair(tx[0], tx[1], rx[0], rx[1], 0))
    drop = Drop(layout, tuple(pairs))
    gains = build_gain_table(drop, ChannelParams(), rng)
    p = rng.uniform(-60.0, 20.0, (k, n))
    return drop, gains, p


def test_throughput_hand_value():
    # one pair, 50 m apart, 0 dBm on a single channel
    layout = build_hex_layout(1, 500.0)
    drop = Drop(layout, (D2DPair(0.0, 0.0, 50.0, 0.0, 0),))
    gains = build_gain_table(drop, NO_SHADOW)
    t = throughput(gains, np.array([[0.0]]), NOISE_DBW)
    pl = 30.0 + 40.0 * math.log10(50.0)
    sinr = 10.0 ** ((0.0 - pl - 30.0) / 10.0) / 1e-13
    expected = math.log2(1.0 + sinr)
    assert t[0] == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(1.38, abs=0.01)


def test_throughput_floor_power_is_negligible():
    layout = build_hex_layout(1, 500.0)
    drop = Drop(layout, (D2DPair(0.0, 0.0, 50.0, 0.0, 0),))
    gains = build_gain_table(drop, NO_SHADOW)
    t = throughput(gains, np.full((1, 4), -150.0), NOISE_DBW)
    assert (t >= 0).all()
    assert t.sum() < 1e-8


def test_colocated_pairs_symmetric_throughput():
    layout = build_hex_layout(1, 500.0)
    pair = D2DPair(10.0, 20.0, 40.0, 60.0, 0)
    drop = Drop(layout, (pair, pair))
    gains = build_gain_table(drop, NO_SHADOW)
    p = np.full((2, 3), -10.0)
    t = throughput(gains, p, NOISE_DBW)
    assert t[0] == pytest.approx(t[1], rel=1e-12)


def test_power_penalty_dead_zone():
    # -10 dBm x 4 channels = 0.4 mW total, far below 0.25 W
    assert power_penalty(np.full((3, 4), -10.0), 0.25) == 0.0


def test_power_penalty_doubling_gives_one():
    # one transmitter at exactly twice the cap
    p = np.array([[10.0 * math.log10(500.0)]])  # 0.5 W in dBm
    assert power_penalty(p, 0.25) == pytest.approx(1.0, rel=1e-12)


def test_power_penalty_additive_over_transmitters():
    p_w = 0.5  # per transmitter, cap 0.25
    p = np.full((5, 1), 10.0 * math.log10(p_w * 1000.0))
    assert power_penalty(p, 0.25) == pytest.approx(5.0, rel=1e-12)


def test_enb_interference_hand_value():
    layout = build_hex_layout(1, 500.0)
    drop = Drop(layout, (D2DPair(100.0, 0.0, 110.0, 0.0, 0),))
    gains = build_gain_table(drop, NO_SHADOW)
    agg = enb_interference(gains, np.array([[0.0]]))
    # 1 mW through 110 dB path loss
    assert agg[0, 0] == pytest.approx(1e-14, rel=1e-12)


def test_enb_interference_linear_in_power():
    rng = np.random.default_rng(0)
    drop, gains, p = _random_instance(rng, k=3, n=2)
    base = enb_interference(gains, p)
    doubled = enb_interference(gains, p + 10.0 * math.log10(2.0))
    assert doubled == pytest.approx(2.0 * base, rel=1e-12)


def test_enb_interference_floor_effectively_zero():
    rng = np.random.default_rng(1)
    drop, gains, _ = _random_instance(rng, k=4, n=2)
    agg = enb_interference(gains, np.full((4, 2), -150.0))
    assert (agg < 1e-15).all()


def test_interference_penalty_examples():
    q = dbw_to_watt(-140.0)
    below = np.full((2, 3), 0.5 * q)
    assert interference_penalty(below, q) == 0.0
    one_over = below.copy()
    one_over[1, 2] = 2.0 * q
    assert interference_penalty(one_over, q) == pytest.approx(1.0, rel=1e-12)
    all_over = np.full((2, 3), 2.0 * q)
    assert interference_penalty(all_over, q) == pytest.approx(6.0, rel=1e-12)


def test_drop_cost_unconstrained_reduction():
    rng = np.random.default_rng(2)
    drop, gains, p = _random_instance(rng, k=3, n=3)
    cfg = ConstraintConfig(c_p=0.0, c_if=0.0)
    breakdown = drop_cost(gains, p, cfg, NOISE_DBW)
    assert breakdown.total == pytest.approx(-breakdown.sum_throughput, rel=1e-12)


def test_drop_cost_floor_powers_near_zero():
    rng = np.random.default_rng(3)
    drop, gains, _ = _random_instance(rng, k=2, n=2)
    cfg = ConstraintConfig()
    breakdown = drop_cost(gains, np.full((2, 2), -150.0), cfg, NOISE_DBW)
    assert breakdown.ct_p == 0.0
    assert breakdown.ct_if == 0.0
    assert abs(breakdown.total) < 1e-8


def test_drop_cost_matches_scalar_oracle():
    rng = np.random.default_rng(4)
    cfg = ConstraintConfig(p_max_w=0.05, q_max_dbw=-135.0, c_p=7.0, c_if=3.0)
    for _ in range(30):
        drop, gains, p = _random_instance(rng)
        got = drop_cost(gains, p, cfg, NOISE_DBW)
        want = scalar_drop_cost(
            p.tolist(),
            gains.g_d2d_db.tolist(),
            gains.g_enb_db.tolist(),
            cfg.p_max_w,
            cfg.q_max_w,
            cfg.c_p,
            cfg.c_if,
            dbw_to_watt(NOISE_DBW),
        )
        for a, b in zip((got.sum_throughput, got.ct_p, got.ct_if, got.total), want):
            assert abs(a - b) <= 1e-12 * max(1.0, abs(a), abs(b))


def test_batch_cost_singleton_equals_drop_cost():
    rng = np.random.default_rng(5)
    layout = build_hex_layout(1, 500.0)
    batch = sample_batch(layout, 3, 100.0, 1, rng)
    gains = [build_gain_table(d, NO_SHADOW) for d in batch.drops]
    p = [rng.uniform(-60, 20, (3, 2))]
    cfg = ConstraintConfig()
    assert batch_cost(batch, gains, p, cfg, NOISE_DBW) == pytest.approx(
        drop_cost(gains[0], p[0], cfg, NOISE_DBW).total, rel=1e-12
    )


def test_batch_cost_mean_of_identical_drops():
    rng = np.random.default_rng(6)
    layout = build_hex_layout(1, 500.0)
    drop = sample_drop(layout, 2, 100.0, rng)
    gains = build_gain_table(drop, NO_SHADOW)
    p = rng.uniform(-60, 20, (2, 2))
    cfg = ConstraintConfig()
    batch = Batch((drop, drop))
    value = batch_cost(batch, [gains, gains], [p, p], cfg, NOISE_DBW)
    assert value == pytest.approx(drop_cost(gains, p, cfg, NOISE_DBW).total, rel=1e-12)


@pytest.mark.parametrize("bn", [1, 2, 8, 50])
def test_batch_cost_equals_mean_of_drop_costs(bn):
    rng = np.random.default_rng(7 + bn)
    layout = build_hex_layout(1, 500.0)
    batch = sample_batch(layout, 4, 100.0, bn, rng)
    gains = [build_gain_table(d, ChannelParams(), rng) for d in batch.drops]
    ps = [rng.uniform(-60, 20, (4, 3)) for _ in range(bn)]
    cfg = ConstraintConfig(p_max_w=0.05, q_max_dbw=-138.0)
    vectorized = batch_cost(batch, gains, ps, cfg, NOISE_DBW)
    per_drop = np.mean([drop_cost(g, p, cfg, NOISE_DBW).total for g, p in zip(gains, ps)])
    assert abs(vectorized - per_drop) <= 1e-9 * max(1.0, abs(per_drop))


def test_batch_cost_misaligned_lengths():
    rng = np.random.default_rng(8)
    layout = build_hex_layout(1, 500.0)
    batch = sample_batch(layout, 2, 100.0, 3, rng)
    gains = [build_gain_table(d, NO_SHADOW) for d in batch.drops]
    ps = [np.zeros((2, 2))] * 2
    with pytest.raises(ShapeError):
        batch_cost(batch, gains, ps, ConstraintConfig(), NOISE_DBW)


def test_per_channel_gains_match_flat_when_equal():
    rng = np.random.default_rng(9)
    drop, gains, p = _random_instance(rng, k=3, n=4)
    flat = drop_cost(gains, p, ConstraintConfig(), NOISE_DBW)
    repeated = GainTable(
        np.repeat(gains.g_d2d_db[:, :, None], 4, axis=2),
        np.repeat(gains.g_enb_db[:, :, None], 4, axis=2),
    )
    per_channel = drop_cost(repeated, p, ConstraintConfig(), NOISE_DBW)
    assert per_channel.total == pytest.approx(flat.total, rel=1e-12)


def test_raising_own_power_increases_own_throughput():
    rng = np.random.default_rng(10)
    drop, gains, p = _random_instance(rng, k=3, n=2)
    base = throughput(gains, p, NOISE_DBW)
    base_if = enb_interference(gains, p)
    bumped = p.copy()
    bumped[1, 0] += 3.0
    after = throughput(gains, bumped, NOISE_DBW)
    after_if = enb_interference(gains, bumped)
    assert after[1] > base[1]
    assert (after_if[:, 0] >= base_if[:, 0]).all()
    # the untouched channel is unaffected
    assert after_if[:, 1] == pytest.approx(base_if[:, 1], rel=1e-12)


@given(seed=st.integers(0, 10_000))
@settings(deadline=None, max_examples=30)
def test_throughput_and_penalties_nonnegative(seed):
    rng = np.random.default_rng(seed)
    drop, gains, p = _random_instance(rng)
    cfg = ConstraintConfig(p_max_w=0.01, q_max_dbw=-145.0)
    breakdown = drop_cost(gains, p, cfg, NOISE_DBW)
    t = throughput(gains, p, NOISE_DBW)
    assert (t >= 0).all()
    assert breakdown.ct_p >= 0.0
    assert breakdown.ct_if >= 0.0
    assert breakdown.total == pytest.approx(
        -breakdown.sum_throughput + cfg.c_if * breakdown.ct_if + cfg.c_p * breakdown.ct_p,
        rel=1e-12,
    )


def test_penalties_zero_iff_constraints_hold():
    rng = np.random.default_rng(11)
    drop, gains, p = _random_instance(rng, k=2, n=2)
    cfg = ConstraintConfig(p_max_w=0.25, q_max_dbw=-120.0)
    pw_totals = (10.0 ** ((p - 30.0) / 10.0)).sum(axis=1)
    agg = enb_interference(gains, p)
    breakdown = drop_cost(gains, p, cfg, NOISE_DBW)
    p_ok = (pw_totals <= cfg.p_max_w).all()
    q_ok = (agg <= cfg.q_max_w).all()
    assert (breakdown.ct_p == 0.0) == p_ok
    assert (breakdown.ct_if == 0.0) == q_ok


def test_spectral_efficiency():
    assert spectral_efficiency(np.zeros(4), 4, 8) == 0.0
    assert spectral_efficiency(np.array([4.0, 4.0]), 2, 2) == pytest.approx(2.0)


def test_stacked_cost_shape_validation():
    with pytest.raises(ShapeError):
        stacked_cost(
            np.zeros((2, 3, 2)),
            np.zeros((2, 4, 4)),
            np.zeros((2, 3, 1)),
            ConstraintConfig(),
            NOISE_DBW,
        )
