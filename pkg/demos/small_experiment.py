"""
A small clean-versus-merged experiment
======================================

The full protocol at reduced size: repeated paired training runs, a paired
t-test on their validation accuracies, and an attack on each arm's best
model.  The desk-scale default (20 runs, 200 windows per class) is
``gaf-advforge experiment --out results/``; this version finishes in
well under a minute.
"""

#%%
from gaf_advforge import report
from gaf_advforge.cnn import TrainConfig
from gaf_advforge.config import Config, ExperimentConfig
from gaf_advforge.datagen import GeneratorConfig
from gaf_advforge.pipeline import run_experiment

cfg = Config(
    generator=GeneratorConfig(per_class=60),
    train=TrainConfig(epochs=15, batch_size=32, learning_rate=5e-3),
    experiment=ExperimentConfig(n_runs=4, master_seed=3),
)
result = run_experiment(cfg).to_dict()

#%%
# The four tables
# ---------------
print(report.render_tables(result))

#%%
# Per-run accuracies, ready for plotting
# --------------------------------------
print(report.accuracy_csv(result))
print("adversarial pool:", result["adversarial_pool"])
