import json

import numpy as np
import pytest

from gaf_advforge import pipeline
from gaf_advforge.cli import default_config_doc
from gaf_advforge.cnn import TrainConfig
from gaf_advforge.config import Config, ExperimentConfig, MergeConfig, from_dict, load_config
from gaf_advforge.datagen import GeneratorConfig
from gaf_advforge.dataset import ADVERSARIAL, CLEAN, MERGED, Dataset
from gaf_advforge.errors import ConfigError, InsufficientAdversarial


def fake(labels, provenance=CLEAN, offset=0):
    labels = np.asarray(labels)
    n = len(labels)
    gen = np.random.default_rng(offset)
    return Dataset(gen.uniform(-1, 1, (n, 4, 10, 10)), labels, np.arange(n) + offset,
                   provenance=provenance,
                   meta={"source_id": np.arange(n, dtype=np.uint64) % 7})


def test_merge_half_and_half():
    clean = fake(np.repeat(np.arange(1, 9), 10))
    adv = fake(np.repeat(np.arange(1, 9), 25), ADVERSARIAL, offset=1000)
    merged = pipeline.merge_datasets(clean, adv, MergeConfig(0.5, seed=1))
    assert len(merged) == 160
    assert merged.provenance == MERGED
    assert set(merged.class_counts().values()) == {20}
    is_adv = merged.meta["adversarial"]
    assert is_adv.sum() == 80
    # every clean item survives, adversarial items are distinct pool members
    np.testing.assert_array_equal(merged.window_ids[~is_adv], clean.window_ids)
    picked = merged.window_ids[is_adv]
    assert len(set(picked.tolist())) == 80
    assert set(picked.tolist()) <= set(adv.window_ids.tolist())


def test_merge_other_fraction():
    clean = fake(np.repeat(np.arange(1, 9), 9))
    adv = fake(np.repeat(np.arange(1, 9), 30), ADVERSARIAL, offset=500)
    merged = pipeline.merge_datasets(clean, adv, MergeConfig(0.75))
    assert set(merged.class_counts().values()) == {12}


def test_merge_insufficient():
    clean = fake(np.repeat(np.arange(1, 9), 200))
    adv_labels = np.concatenate([np.repeat([l], 50 if l == 3 else 300) for l in range(1, 9)])
    adv = fake(adv_labels, ADVERSARIAL, offset=9000)
    with pytest.raises(InsufficientAdversarial) as info:
        pipeline.merge_datasets(clean, adv)
    assert (info.value.label, info.value.needed, info.value.available) == (3, 200, 50)


def test_merge_is_seeded():
    clean = fake(np.repeat(np.arange(1, 9), 5))
    adv = fake(np.repeat(np.arange(1, 9), 20), ADVERSARIAL, offset=100)
    a = pipeline.merge_datasets(clean, adv, MergeConfig(seed=3))
    b = pipeline.merge_datasets(clean, adv, MergeConfig(seed=3))
    c = pipeline.merge_datasets(clean, adv, MergeConfig(seed=4))
    assert a.digest() == b.digest() != c.digest()


def test_pool_for_sources():
    pool = fake(np.repeat(np.arange(1, 9), 3), ADVERSARIAL)
    sub = pipeline.pool_for_sources(pool, [0, 2])
    assert set(sub.meta["source_id"].tolist()) == {0, 2}


def test_run_seeds_are_distinct_and_stable():
    a = [pipeline.RunSeeds.derive(0, i) for i in range(20)]
    assert a == [pipeline.RunSeeds.derive(0, i) for i in range(20)]
    assert len({s.init for s in a}) == 20
    assert pipeline.RunSeeds.derive(1, 0) != a[0]


def tiny_config(**experiment):
    return Config(
        # just enough training for every class to have failed attacks to merge
        generator=GeneratorConfig(per_class=40),
        train=TrainConfig(epochs=12, batch_size=32, learning_rate=1e-2),
        experiment=ExperimentConfig(**{"n_runs": 2, **experiment}),
    )


@pytest.fixture(scope="module")
def tiny_report():
    return pipeline.run_experiment(tiny_config())


def test_two_runs_give_df_one(tiny_report):
    doc = tiny_report.to_dict()
    assert doc["n_runs"] == 2 and len(doc["runs"]) == 2
    assert doc["ttest"]["df"] == 1
    assert doc["ttest"]["h0"] == "mu_clean = mu_merge"
    assert set(doc["attack"]) == {"clean", "merged", "items"}
    assert doc["attack"]["items"] == 320
    for arm in ("clean", "merged"):
        best = doc["best_models"][arm]
        accs = [r[f"{arm}_accuracy"] for r in doc["runs"]]
        assert best["accuracy"] == max(accs)


def test_report_is_deterministic(tiny_report):
    again = pipeline.run_experiment(tiny_config())
    assert again.to_json() == tiny_report.to_json()
    assert pipeline.run_experiment(tiny_config(master_seed=1)).to_json() != tiny_report.to_json()


def test_ttest_sign_is_clean_minus_merged(tiny_report):
    doc = tiny_report.to_dict()
    diffs = [r["clean_accuracy"] - r["merged_accuracy"] for r in doc["runs"]]
    if doc["ttest"]["mean"] is not None:
        assert doc["ttest"]["mean"] == pytest.approx(np.mean(diffs))


def test_checkpoints_resume(tmp_path):
    cfg = tiny_config()
    first = pipeline.run_experiment(cfg, checkpoint_dir=tmp_path)
    assert len(list(tmp_path.glob("*.gcnn"))) == 4
    resumed = pipeline.run_experiment(cfg, checkpoint_dir=tmp_path)
    assert resumed.to_json() == first.to_json()


def test_report_json_roundtrip(tiny_report):
    doc = json.loads(tiny_report.to_json())
    assert doc == json.loads(json.dumps(tiny_report.to_dict()))
    assert doc["config"]["experiment"]["n_runs"] == 2


def test_bundled_config_equals_defaults():
    assert from_dict(default_config_doc()) == Config()
    assert from_dict({}) == Config()


@pytest.mark.parametrize(
    "doc, message",
    [
        ({"bogus": {}}, "sections"),
        ({"train": {"epochz": 3}}, "unknown keys"),
        ({"attack": {"scale_low": 1.5}}, "scale_low"),
        ({"experiment": {"n_runs": 1}}, "n_runs"),
        ({"train": []}, "object"),
    ],
)
def test_config_errors(doc, message):
    with pytest.raises(ConfigError, match=message):
        from_dict(doc)


def test_load_config_missing(tmp_path):
    with pytest.raises(ConfigError, match="nope.json"):
        load_config(tmp_path / "nope.json")


def test_load_config_partial(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"attack": {"schedule": [[0.95, 1.05]] * 7 + [[0.99, 1.01]] * 3},
                             "rules": {"long_body_factor": 1.5}}))
    cfg = load_config(p)
    assert cfg.attack.schedule[0] == (0.95, 1.05)
    assert cfg.generator.rule_params.long_body_factor == 1.5
    assert from_dict(cfg.to_dict()) == cfg


def test_with_seed():
    cfg = Config().with_seed(9)
    assert (cfg.generator.seed, cfg.train.seed, cfg.attack.seed, cfg.merge.seed,
            cfg.experiment.master_seed) == (9, 9, 9, 9, 9)
