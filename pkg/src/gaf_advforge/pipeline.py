"""Dataset merging and the repeated clean-vs-merged training experiment.

Per run ``i`` every seed is derived from the master seed, and the clean and
merged arms share the same validation split, initialization and batch order,
so their accuracies pair naturally.  Both arms are scored on held-out clean
examples.  The adversarial pool is sampled once from the run-0 clean model
(or per run with ``pool_per_run``), restricted per run to sources in that
run's training split so validation windows never leak into training.
"""

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import rng as rng_mod
from .attack import AttackConfig, attack_eval, sample_pool
from .candlestick import PatternLabel
from .cnn import TrainConfig, load_model, save_model, stratified_split, train
from .config import Config, ExperimentConfig, MergeConfig
from .datagen import GeneratorConfig, build_dataset
from .dataset import MERGED, Dataset
from .errors import InsufficientAdversarial, ZeroVariance
from .stats import describe, paired_ttest

log = logging.getLogger(__name__)

REPORT_VERSION = 1


def merge_datasets(clean: Dataset, adversarial: Dataset, cfg: MergeConfig = MergeConfig()) -> Dataset:
    """Keep every clean item and draw adversarial items per class, without
    replacement, so each class holds ``clean_fraction`` clean items."""
    clean_parts, adv_parts = [], []
    for lab in PatternLabel:
        c_idx = np.flatnonzero(clean.labels == lab)
        if len(c_idx) == 0:
            continue
        needed = int(round(len(c_idx) * (1.0 - cfg.clean_fraction) / cfg.clean_fraction))
        pool = np.flatnonzero(adversarial.labels == lab)
        if len(pool) < needed:
            raise InsufficientAdversarial(int(lab), needed, len(pool))
        gen = rng_mod.generator(cfg.seed, rng_mod.MERGE, int(lab))
        chosen = np.sort(gen.choice(pool, size=needed, replace=False))
        clean_parts.append(c_idx)
        adv_parts.append(chosen)
    c_idx = np.concatenate(clean_parts)
    a_idx = np.concatenate(adv_parts)
    c, a = clean.subset(c_idx), adversarial.subset(a_idx)
    has_scales = c.scales is not None and a.scales is not None
    return Dataset(
        np.concatenate([c.tensors, a.tensors]),
        np.concatenate([c.labels, a.labels]),
        np.concatenate([c.window_ids, a.window_ids]),
        provenance=MERGED,
        seed=cfg.seed,
        scales=np.concatenate([c.scales, a.scales]) if has_scales else None,
        meta={"adversarial": np.r_[np.zeros(len(c), bool), np.ones(len(a), bool)]},
    )


def pool_for_sources(pool: Dataset, source_ids) -> Dataset:
    keep = np.isin(pool.meta["source_id"].astype(np.uint64), np.asarray(source_ids, np.uint64))
    return pool.subset(np.flatnonzero(keep))


def pool_summary(pool: Dataset) -> dict:
    depth = pool.meta.get("depth", np.empty(0))
    consistent = pool.meta.get("rule_consistent", np.empty(0, bool))
    return {
        "size": len(pool),
        "class_counts": {str(k): v for k, v in pool.class_counts().items()},
        "depth_counts": {str(int(d)): int(np.sum(depth == d)) for d in np.unique(depth)},
        "rule_consistent_fraction": float(np.mean(consistent)) if len(consistent) else 0.0,
    }


@dataclass
class RunSeeds:
    split: int
    init: int
    order: int
    merge: int

    @classmethod
    def derive(cls, master: int, run: int) -> "RunSeeds":
        d = lambda tag: rng_mod.derive_seed(master, rng_mod.RUN, run, tag)  # noqa: E731
        return cls(d(rng_mod.SPLIT), d(rng_mod.INIT), d(rng_mod.ORDER), d(rng_mod.MERGE))


@dataclass
class ExperimentReport:
    config: dict
    clean_accuracies: list
    merged_accuracies: list
    best: dict
    attack: dict
    pool: dict
    ttest: dict | None = None
    descriptive: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        n = len(self.clean_accuracies)
        return {
            "version": REPORT_VERSION,
            "config": self.config,
            "n_runs": n,
            "runs": [
                {"run": i, "clean_accuracy": c, "merged_accuracy": m}
                for i, (c, m) in enumerate(zip(self.clean_accuracies, self.merged_accuracies))
            ],
            "descriptive": self.descriptive,
            "ttest": self.ttest,
            "best_models": self.best,
            "attack": self.attack,
            "adversarial_pool": self.pool,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _train_arm(args):
    """Worker: train one arm of one run; loads a checkpoint when present."""
    run, arm, train_set, val_set, seeds, train_cfg, ckpt_dir = args
    if ckpt_dir is not None:
        stem = Path(ckpt_dir) / f"run{run:03d}_{arm}"
        meta = stem.with_suffix(".json")
        if meta.exists():
            acc = json.loads(meta.read_text())["accuracy"]
            return run, arm, load_model(stem.with_suffix(".gcnn")), acc
    cfg = replace(train_cfg, seed=seeds.order)
    model, acc = train(seeds.init, train_set, cfg, validation=val_set)
    log.info("run %d %s accuracy %.4f", run, arm, acc)
    if ckpt_dir is not None:
        save_model(model, stem.with_suffix(".gcnn"))
        meta.write_text(json.dumps({"run": run, "arm": arm, "accuracy": acc}))
    return run, arm, model, acc


def _map(fn, jobs, items):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def _best(accs) -> int:
    # highest accuracy, earliest run on ties
    return int(np.argmax(np.asarray(accs)))


def run_experiment(
    cfg: Config,
    *,
    jobs: int = 1,
    checkpoint_dir=None,
    clean: Dataset | None = None,
) -> ExperimentReport:
    """Train ``n_runs`` clean/merged pairs, test them, attack each arm's best model."""
    exp: ExperimentConfig = cfg.experiment
    master = exp.master_seed
    gen_cfg: GeneratorConfig = replace(
        cfg.generator, seed=rng_mod.derive_seed(master, rng_mod.DATA), rule_params=cfg.rules
    )
    if clean is None:
        clean = build_dataset(gen_cfg)
    if checkpoint_dir is not None:
        Path(checkpoint_dir).mkdir(parents=True, exist_ok=True)
    train_cfg: TrainConfig = cfg.train
    seeds = [RunSeeds.derive(master, i) for i in range(exp.n_runs)]
    splits = [stratified_split(clean.labels, train_cfg.split, s.split) for s in seeds]

    clean_results = _map(
        _train_arm,
        jobs,
        (
            (i, "clean", clean.subset(tr), clean.subset(va), seeds[i], train_cfg, checkpoint_dir)
            for i, (tr, va) in enumerate(splits)
        ),
    )
    clean_models = [r[2] for r in clean_results]
    clean_accs = [float(r[3]) for r in clean_results]

    sample_cfg: AttackConfig = replace(cfg.attack, seed=rng_mod.derive_seed(master, rng_mod.SAMPLE))
    if exp.pool_per_run:
        pools = [sample_pool(m, clean, sample_cfg, cfg.rules) for m in clean_models]
    else:
        pools = [sample_pool(clean_models[0], clean, sample_cfg, cfg.rules)] * exp.n_runs
    log.info("adversarial pool: %d items", len(pools[0]))

    def merged_args():
        for i, (tr, va) in enumerate(splits):
            train_part = clean.subset(tr)
            adv = pool_for_sources(pools[i], train_part.window_ids)
            merged = merge_datasets(train_part, adv, MergeConfig(cfg.merge.clean_fraction, seeds[i].merge))
            yield i, "merged", merged, clean.subset(va), seeds[i], train_cfg, checkpoint_dir

    merged_results = _map(_train_arm, jobs, merged_args())
    merged_models = [r[2] for r in merged_results]
    merged_accs = [float(r[3]) for r in merged_results]

    eval_cfg = replace(cfg.attack, seed=rng_mod.derive_seed(master, rng_mod.ATTACK))
    best_c, best_m = _best(clean_accs), _best(merged_accs)
    attack = {
        "clean": attack_eval(clean_models[best_c], clean, eval_cfg).to_dict(),
        "merged": attack_eval(merged_models[best_m], clean, eval_cfg).to_dict(),
        "items": len(clean),
    }
    # positive mean difference means clean > merged, matching H0: mu_clean = mu_merge
    try:
        ttest = paired_ttest(clean_accs, merged_accs).to_dict()
        ttest["h0"] = "mu_clean = mu_merge"
    except ZeroVariance as exc:
        ttest = {"h0": "mu_clean = mu_merge", "df": exp.n_runs - 1, "error": str(exc),
                 "n": exp.n_runs, "t": None, "p": None, "mean": None, "std": None}

    config_doc = cfg.to_dict()
    config_doc["generator"]["seed"] = gen_cfg.seed
    return ExperimentReport(
        config=config_doc,
        clean_accuracies=clean_accs,
        merged_accuracies=merged_accs,
        best={
            "clean": {"run": best_c, "accuracy": clean_accs[best_c]},
            "merged": {"run": best_m, "accuracy": merged_accs[best_m]},
        },
        attack=attack,
        pool=pool_summary(pools[0]) | {"per_run": exp.pool_per_run},
        ttest=ttest,
        descriptive={
            "clean": describe(clean_accs).to_dict(),
            "merged": describe(merged_accs).to_dict(),
        },
    )

