"""
Training the GAF classifier
===========================

A two-layer convolutional network written directly in numpy, trained on
synthetic windows.  Takes a few seconds on one core.
"""

#%%
import numpy as np

from gaf_advforge import cnn
from gaf_advforge.candlestick import PatternLabel
from gaf_advforge.datagen import GeneratorConfig, build_dataset

data = build_dataset(GeneratorConfig(per_class=100, seed=1))
print(len(data), "windows:", data.class_counts())

#%%
# Before training
# ---------------
# Glorot-initialized weights give a loss close to that of a uniform guess.
model = cnn.CnnModel.initialize(0)
print("untrained loss:", round(cnn.loss(model, data.tensors[::10], data.labels[::10]), 4),
      "(ln 8 =", round(np.log(8), 4), ")")

#%%
# Train with a held-out split
# ---------------------------
train_idx, val_idx = cnn.stratified_split(data.labels, 0.8, seed=0)
val = data.subset(val_idx)
model, acc = cnn.train(0, data.subset(train_idx), cnn.TrainConfig(epochs=40), validation=val)
print(f"validation accuracy: {acc:.3f}")

#%%
# Where the mistakes are
# ----------------------
pred = model.predict_batch(val.tensors)
confusion = np.zeros((8, 8), dtype=int)
np.add.at(confusion, (val.labels - 1, pred - 1), 1)
print("rows: true label, columns: predicted")
for label, row in zip(PatternLabel, confusion):
    print(f"{label.name:18s}", " ".join(f"{v:3d}" for v in row))
