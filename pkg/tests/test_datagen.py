import hashlib
import struct

import numpy as np
import pytest

from gaf_advforge import dataset
from gaf_advforge.candlestick import PatternLabel, geometry, rule_check
from gaf_advforge.datagen import (
    GeneratorConfig,
    build_dataset,
    dataset_from_bars,
    load_ohlc_csv,
    scan_and_label,
    synthesize_flat,
    synthesize_window,
)
from gaf_advforge.errors import DatasetFormatError, InvariantError, ParseError
from gaf_advforge.rng import generator

CFG = GeneratorConfig()


def make(label, seed):
    return synthesize_window(label, CFG, generator(seed, 0, int(label)))


def test_synthesis_is_deterministic():
    a = make(PatternLabel.MORNING_STAR, 7)
    b = make(PatternLabel.MORNING_STAR, 7)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, make(PatternLabel.MORNING_STAR, 8))


def test_bearish_harami_middle_inside_first():
    for seed in range(30):
        w = make(PatternLabel.BEARISH_HARAMI, seed)
        a_lo, a_hi = sorted(w[7, [0, 3]])
        b_lo, b_hi = sorted(w[8, [0, 3]])
        assert a_lo < b_lo and b_hi < a_hi


def test_windows_satisfy_bar_invariants():
    for label in PatternLabel:
        for seed in range(20):
            w = make(label, seed)
            assert np.all(w[:, 1] >= np.maximum(w[:, 0], w[:, 3]))
            assert np.all(w[:, 2] <= np.minimum(w[:, 0], w[:, 3]))
            assert np.all(w > 0)


def write_csv(path, rows, header="timestamp,open,high,low,close"):
    path.write_text("\n".join([header, *rows]) + "\n")
    return path


def test_load_csv_three_rows(tmp_path):
    p = write_csv(tmp_path / "a.csv", [
        "2024-01-01T00:00,1.10,1.12,1.09,1.11",
        "2024-01-01T00:01,1.11,1.13,1.10,1.12",
        "2024-01-01T00:02,1.12,1.12,1.08,1.09",
    ])
    bars = load_ohlc_csv(p)
    assert [b.close for b in bars] == [1.11, 1.12, 1.09]


def test_load_csv_header_only(tmp_path):
    assert load_ohlc_csv(write_csv(tmp_path / "a.csv", [])) == []


def test_load_csv_invariant_row(tmp_path):
    p = write_csv(tmp_path / "a.csv", [
        "t0,1.10,1.12,1.09,1.11",
        "t1,1.10,1.11,1.09,1.12",
    ])
    with pytest.raises(InvariantError) as info:
        load_ohlc_csv(p)
    assert info.value.row == 3


def test_load_csv_parse_error(tmp_path):
    p = write_csv(tmp_path / "a.csv", ["t0,1.10,abc,1.09,1.11"])
    with pytest.raises(ParseError) as info:
        load_ohlc_csv(p)
    assert (info.value.row, info.value.column) == (2, "high")


def test_load_csv_bad_header(tmp_path):
    with pytest.raises(ParseError):
        load_ohlc_csv(write_csv(tmp_path / "a.csv", [], header="date,o,h,l,c"))


def flat(n, level, seed):
    return synthesize_flat(n, level, CFG, generator(seed, 99))


def test_flat_stream_has_no_hits():
    for seed in range(20):
        assert scan_and_label(flat(60, 1.1, seed)) == []


@pytest.mark.parametrize("label", list(PatternLabel))
def test_plant_and_recover(label):
    for seed in range(25):
        w = make(label, seed)
        stream = np.concatenate([flat(15, w[0, 0], seed), w, flat(15, w[-1, 3], seed + 1)])
        hits = scan_and_label(stream)
        assert [(off, lab) for off, _, lab in hits] == [(15, label)]
        np.testing.assert_array_equal(hits[0][1], w)


def test_two_concatenated_windows_recovered():
    a = make(PatternLabel.MORNING_STAR, 3)
    b = make(PatternLabel.BEARISH_ENGULFING, 4)
    # splice b onto a's closing level so the join stays continuous
    b = b * (a[-1, 3] / b[0, 0])
    stream = np.concatenate([a, flat(12, a[-1, 3], 1), b])
    found = {(off, lab) for off, _, lab in scan_and_label(stream)}
    assert {(0, PatternLabel.MORNING_STAR), (22, PatternLabel.BEARISH_ENGULFING)} <= found


def test_dataset_from_bars_ids_are_offsets():
    w = make(PatternLabel.SHOOTING_STAR, 2)
    stream = np.concatenate([flat(5, w[0, 0], 0), w])
    ds = dataset_from_bars(stream)
    assert ds.window_ids.tolist() == [5] and ds.labels.tolist() == [5]


def test_build_dataset_counts():
    ds = build_dataset(GeneratorConfig(per_class=5, seed=1))
    assert len(ds) == 40
    assert set(ds.class_counts().values()) == {5}
    assert ds.provenance == dataset.CLEAN
    assert ds.tensors.shape == (40, 4, 10, 10)


def test_build_dataset_hash_stable(tmp_path):
    cfg = GeneratorConfig(per_class=10, seed=123)
    a = dataset.save(build_dataset(cfg), tmp_path / "a.gafd")
    b = dataset.save(build_dataset(cfg), tmp_path / "b.gafd")
    ha, hb = (hashlib.sha256(p.read_bytes()).hexdigest() for p in (a, b))
    assert ha == hb
    other = build_dataset(GeneratorConfig(per_class=10, seed=124))
    assert other.digest() != ha


def test_gafd_layout(tmp_path):
    ds = build_dataset(GeneratorConfig(per_class=1, seed=0))
    raw = ds.to_bytes()
    assert raw[:4] == b"GAFD"
    assert struct.unpack_from("<IIIII", raw, 4) == (1, 8, 10, 10, 4)
    assert len(raw) == 24 + 8 * (1 + 8 + 400 * 4)
    label, wid = struct.unpack_from("<BQ", raw, 24)
    first = np.frombuffer(raw, "<f4", count=400, offset=33).reshape(10, 10, 4)
    assert label == ds.labels[0] and wid == ds.window_ids[0]
    np.testing.assert_array_equal(first, ds.tensors[0].transpose(1, 2, 0).astype("<f4"))


def test_gafd_roundtrip(tmp_path):
    ds = build_dataset(GeneratorConfig(per_class=3, seed=5))
    back = dataset.load(dataset.save(ds, tmp_path / "d.gafd"))
    np.testing.assert_allclose(back.tensors, ds.tensors, atol=1e-6)
    np.testing.assert_array_equal(back.labels, ds.labels)
    np.testing.assert_array_equal(back.window_ids, ds.window_ids)
    np.testing.assert_array_equal(back.scales, ds.scales)
    assert (back.provenance, back.seed) == (ds.provenance, ds.seed)
    assert back.to_bytes() == ds.to_bytes()


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda r: b"XXXX" + r[4:], "magic"),
        (lambda r: r[:4] + struct.pack("<I", 2) + r[8:], "version"),
        (lambda r: r[:-3], "payload"),
        (lambda r: r[:10], "short"),
    ],
)
def test_gafd_rejects_corruption(mutate, message):
    raw = build_dataset(GeneratorConfig(per_class=1)).to_bytes()
    with pytest.raises(DatasetFormatError, match=message):
        dataset.from_bytes(mutate(raw))


def test_window_ids():
    assert dataset.clean_window_id(3, 7) == (3 << 32) | 7
    adv = dataset.adversarial_window_id(dataset.clean_window_id(3, 7), 5)
    assert dataset.source_window_id(adv) == dataset.clean_window_id(3, 7)
    assert adv & int(dataset.ADV_FLAG)


def test_generation_rejection_respects_rule_check():
    # sanity: the body-size rules hold with a tighter long-body factor too
    from gaf_advforge.candlestick import RuleParams

    params = RuleParams(long_body_factor=1.5)
    cfg = GeneratorConfig(rule_params=params)
    for seed in range(10):
        w = synthesize_window(PatternLabel.BULLISH_ENGULFING, cfg, generator(seed, 0))
        assert rule_check(w, PatternLabel.BULLISH_ENGULFING, params)
        assert geometry(w[8]).body >= 1.5 * np.mean(np.abs(w[:, 3] - w[:, 0]))
