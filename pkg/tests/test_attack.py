import numpy as np
import pytest

from gaf_advforge import attack, gaf
from gaf_advforge.attack import AttackConfig
from gaf_advforge.candlestick import PatternLabel
from gaf_advforge.cnn import ConstantModel, CnnModel
from gaf_advforge.datagen import GeneratorConfig, build_dataset
from gaf_advforge.errors import ConfigError
from gaf_advforge.rng import generator

LABEL = PatternLabel.MORNING_STAR


@pytest.fixture(scope="module")
def data():
    return build_dataset(GeneratorConfig(per_class=6, seed=9))


@pytest.fixture(scope="module")
def item(data):
    i = int(np.flatnonzero(data.labels == LABEL)[0])
    return data.tensors[i], data.scales[i], int(data.window_ids[i])


def test_config_validation():
    with pytest.raises(ConfigError):
        AttackConfig(scale_low=1.01, scale_high=1.02)
    with pytest.raises(ConfigError):
        AttackConfig(reset_period=0)
    with pytest.raises(ConfigError):
        AttackConfig(schedule=[(0.9, 1.1)] * 9)


def test_schedules():
    low, high = AttackConfig(schedule=attack.region_schedule(0.05, 0.01)).bounds()
    np.testing.assert_allclose(low, [0.95] * 7 + [0.99] * 3)
    np.testing.assert_allclose(high, [1.05] * 7 + [1.01] * 3)
    low, high = AttackConfig(schedule=attack.recency_schedule(0.02, 0.0)).bounds()
    assert low[0] == pytest.approx(0.98) and low[-1] == 1.0 and high[-1] == 1.0


def test_identity_perturbation(item):
    tensor = item[0]
    out = attack.perturb_diagonals(tensor, AttackConfig(scale_low=1, scale_high=1),
                                   generator(0, 1))
    np.testing.assert_allclose(out, tensor, atol=1e-12)


def test_clamp_at_one():
    series = np.linspace(0, 1, 10)
    tensor = np.stack([gaf.encode_normalized(series)] * 4)
    factors = np.full((4, 10), 1.01)
    out, pre = attack.reencode(tensor, factors)
    assert pre[0, -1] == pytest.approx(1.01)
    assert np.all(np.abs(out) <= 1 + 1e-12)
    assert gaf.decode_diagonal(out)[0, -1] == pytest.approx(1.0)


def test_single_episode_within_interval(item):
    tensor = item[0]
    cfg = AttackConfig()
    gen = generator(3, 3)
    for _ in range(20):
        factors = 0.99 + 0.02 * gen.random((4, 10))
        _, pre = attack.reencode(tensor, factors)
        ratio = pre / np.diagonal(tensor, axis1=-2, axis2=-1)
        assert np.all((ratio >= 0.99 - 1e-12) & (ratio <= 1.01 + 1e-12))
    out = attack.perturb_diagonals(tensor, cfg, gen)
    assert out.shape == (4, 10, 10)


def test_untouched_channels_keep_factor_one(item):
    cfg = AttackConfig(channels=(3,), scale_low=0.9, scale_high=1.1)
    out = attack.perturb_diagonals(item[0], cfg, generator(0, 0))
    np.testing.assert_allclose(out[:3], item[0][:3], atol=1e-12)
    assert not np.allclose(out[3], item[0][3])


def test_shared_channels_draw_one_factor_per_position():
    cfg = AttackConfig(shared_channels=True)
    f = attack._draws(cfg, 0, [1, 2])
    np.testing.assert_array_equal(f[:, :, 0], f[:, :, 3])


def test_always_correct_six_episodes(item):
    tensor, scales, wid = item
    cfg = AttackConfig(episodes=6, reset_period=3)
    records = attack.sample_adversarial(ConstantModel(LABEL), tensor, LABEL, cfg,
                                        source_window_id=wid, scales=scales)
    assert [r.perturb_depth for r in records] == [1, 2, 3, 1, 2, 3]
    assert [r.episode_index for r in records] == [1, 2, 3, 4, 5, 6]
    assert all(r.label is LABEL and r.source_window_id == wid for r in records)


def test_cumulative_deviation_bounded(item):
    tensor, scales, wid = item
    original = np.diagonal(tensor, axis1=-2, axis2=-1)
    seen = []

    def hook(ev):
        seen.append(ev["depth"])
        pre = ev["pre_clamp"][0]
        d = ev["depth"]
        lo = np.abs(original) * 0.9**d - 1e-12
        hi = np.abs(original) * 1.1**d + 1e-12
        assert np.all((np.abs(pre) >= lo) & (np.abs(pre) <= hi))
        assert np.all(np.sign(pre) == np.sign(original))

    attack.sample_adversarial(ConstantModel(LABEL), tensor, LABEL,
                              AttackConfig(episodes=12, scale_low=0.9, scale_high=1.1),
                              source_window_id=wid, scales=scales, on_episode=hook)
    assert seen == [1, 2, 3] * 4


def test_cumulative_deviation_default_interval(item):
    tensor, scales, wid = item
    original = np.diagonal(tensor, axis1=-2, axis2=-1)
    worst = [np.inf, 0.0]

    def hook(ev):
        ratio = np.abs(ev["pre_clamp"][0]) / np.abs(original)
        worst[0] = min(worst[0], ratio.min())
        worst[1] = max(worst[1], ratio.max())

    attack.sample_adversarial(ConstantModel(LABEL), tensor, LABEL, AttackConfig(episodes=30),
                              source_window_id=wid, scales=scales, on_episode=hook)
    assert 0.99**3 - 1e-12 <= worst[0] and worst[1] <= 1.01**3 + 1e-12


def test_reset_restarts_from_original(item):
    tensor, scales, wid = item
    starts = {}

    def hook(ev):
        starts[ev["episode"]] = ev["start"][0].copy()

    records = attack.sample_adversarial(ConstantModel(LABEL), tensor, LABEL,
                                        AttackConfig(episodes=10), source_window_id=wid,
                                        scales=scales, on_episode=hook)
    for ep, start in starts.items():
        if ep % 3 == 1:
            np.testing.assert_array_equal(start, tensor)
        else:
            np.testing.assert_array_equal(start, records[ep - 2].tensor)


def test_degenerate_interval_records_equal_original(item):
    tensor, scales, wid = item
    records = attack.sample_adversarial(ConstantModel(LABEL), tensor, LABEL,
                                        AttackConfig(episodes=6, scale_low=1, scale_high=1),
                                        source_window_id=wid, scales=scales)
    assert len(records) == 6
    for r in records:
        np.testing.assert_allclose(r.tensor, tensor, atol=1e-9)
        assert r.rule_consistent


def test_always_wrong_collects_nothing(item):
    tensor, scales, wid = item
    assert attack.sample_adversarial(ConstantModel(PatternLabel.BEARISH_HARAMI), tensor, LABEL,
                                     source_window_id=wid, scales=scales) == []


def test_records_are_valid_gaf(item):
    tensor, scales, wid = item
    for r in attack.sample_adversarial(ConstantModel(LABEL), tensor, LABEL,
                                       AttackConfig(scale_low=0.9, scale_high=1.1),
                                       source_window_id=wid, scales=scales):
        np.testing.assert_allclose(r.tensor, np.swapaxes(r.tensor, -1, -2), atol=1e-15)
        assert np.all(np.abs(r.tensor) <= 1 + 1e-12)
        series = gaf.decode_diagonal(r.tensor)
        np.testing.assert_allclose(gaf.encode_stack(series), r.tensor, atol=1e-9)


def test_pool_soundness_and_bookkeeping(data):
    model = CnnModel.initialize(0)
    pool = attack.sample_pool(model, data, AttackConfig(episodes=4))
    assert len(pool) > 0
    np.testing.assert_array_equal(model.predict_batch(pool.tensors), pool.labels)
    assert set(pool.meta) == {"source_id", "episode", "depth", "rule_consistent"}
    assert set(pool.meta["depth"].tolist()) <= {1, 2, 3}
    np.testing.assert_array_equal(pool.meta["depth"], (pool.meta["episode"] - 1) % 3 + 1)
    assert set(pool.meta["source_id"].tolist()) <= set(data.window_ids.tolist())


def test_pool_matches_per_item_sampling(data):
    model = CnnModel.initialize(1)
    cfg = AttackConfig(episodes=5)
    pool = attack.sample_pool(model, data, cfg, chunk=7)
    expected = []
    for i in range(len(data)):
        expected += attack.sample_adversarial(model, data.tensors[i], data.labels[i], cfg,
                                              source_window_id=int(data.window_ids[i]),
                                              scales=data.scales[i])
    assert len(pool) == len(expected)
    for k, r in enumerate(expected):
        np.testing.assert_allclose(pool.tensors[k], r.tensor, atol=1e-12)
        assert pool.meta["episode"][k] == r.episode_index
        assert bool(pool.meta["rule_consistent"][k]) == r.rule_consistent


def test_require_rule_consistent_filters(data):
    model = ConstantModel(LABEL)
    sub = data.subset(np.flatnonzero(data.labels == LABEL))
    loose = attack.sample_pool(model, sub, AttackConfig(scale_low=0.9, scale_high=1.1))
    strict = attack.sample_pool(model, sub, AttackConfig(scale_low=0.9, scale_high=1.1,
                                                         require_rule_consistent=True))
    assert len(strict) == int(loose.meta["rule_consistent"].sum())
    assert strict.meta["rule_consistent"].all()


def test_attack_eval_constant_correct_stub(data):
    sub = data.subset(np.flatnonzero(data.labels == LABEL))
    table = attack.attack_eval(ConstantModel(LABEL), sub)
    assert table.success[int(LABEL)] == 0 and table.average == 0.0
    assert all(o.episodes_used == 10 and not o.success for o in table.outcomes)


def test_attack_eval_constant_stub_on_mixed_data(data):
    table = attack.attack_eval(ConstantModel(LABEL), data)
    assert table.rate(LABEL) == 0.0
    assert all(table.rate(lab) == 1.0 for lab in PatternLabel if lab != LABEL)
    assert all(o.episodes_used == 1 for o in table.outcomes if o.success)
    d = table.to_dict()
    assert d["average"] == pytest.approx(7 / 8)
    assert [r["label"] for r in d["per_label"]] == list(range(1, 9))


def test_attack_eval_deterministic_and_chunk_independent(data):
    model = CnnModel.initialize(2)
    a = attack.attack_eval(model, data, AttackConfig(scale_low=0.8, scale_high=1.2))
    b = attack.attack_eval(model, data, AttackConfig(scale_low=0.8, scale_high=1.2), chunk=5)
    assert a.to_dict() == b.to_dict()
    assert [o.episodes_used for o in a.outcomes] == [o.episodes_used for o in b.outcomes]
