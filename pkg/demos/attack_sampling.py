"""
Collecting failed attacks
=========================

The local search multiplies the diagonal of every GAF channel by factors in
[0.99, 1.01], re-encodes, and asks the model for a label.  Perturbations the
model still gets right are kept as extra training data; the fraction of
windows whose label can be flipped is the attack success rate.
"""

#%%
import numpy as np

from gaf_advforge import attack, cnn
from gaf_advforge.attack import AttackConfig
from gaf_advforge.datagen import GeneratorConfig, build_dataset
from gaf_advforge.pipeline import pool_summary

data = build_dataset(GeneratorConfig(per_class=80, seed=2))
model, acc = cnn.train(0, data, cnn.TrainConfig(epochs=12))
print(f"target model validation accuracy {acc:.3f}")

#%%
# Tracing one window
# ------------------
# The working tensor is restored every three episodes, so depths cycle 1, 2, 3.
i = 5
original = np.diagonal(data.tensors[i], axis1=-2, axis2=-1)


def show(ev):
    ratio = ev["pre_clamp"][0] / original
    print(f"episode {ev['episode']:2d} depth {ev['depth']}  "
          f"diagonal ratio in [{ratio.min():.4f}, {ratio.max():.4f}]  "
          f"still correct: {bool(ev['correct'][0])}")


records = attack.sample_adversarial(model, data.tensors[i], data.labels[i], AttackConfig(),
                                    source_window_id=int(data.window_ids[i]),
                                    scales=data.scales[i], on_episode=show)
print(len(records), "records kept;", sum(r.rule_consistent for r in records),
      "still satisfy the price rules after decoding")

#%%
# A whole pool
# ------------
pool = attack.sample_pool(model, data)
print(pool_summary(pool))

#%%
# Success rates per label
# -----------------------
table = attack.attack_eval(model, data)
for row in table.to_dict()["per_label"]:
    print(f"label {row['label']}: {row['success']:3d}/{row['total']}  {100 * row['rate']:.2f}%")
print(f"average {100 * table.average:.2f}%")
