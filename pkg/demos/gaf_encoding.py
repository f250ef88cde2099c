"""
Encoding a price window as a Gramian Angular Field
==================================================

A 10-bar OHLC window becomes four 10x10 matrices, one per price channel.
The diagonal of each matrix still carries the (normalized) series, which is
what the attack later perturbs.
"""

#%%
# A synthetic Morning Star window
# -------------------------------
import numpy as np

from gaf_advforge import gaf
from gaf_advforge.candlestick import PatternLabel
from gaf_advforge.datagen import GeneratorConfig, synthesize_window
from gaf_advforge.rng import generator

np.set_printoptions(precision=3, suppress=True, linewidth=110)

window = synthesize_window(PatternLabel.MORNING_STAR, GeneratorConfig(), generator(42, 0))
print("bars (open, high, low, close):")
print(window)

#%%
# One channel by hand
# -------------------
# Min-max normalize the closes, take arccos, and form cos(phi_i + phi_j).
closes = window[:, 3]
x = gaf.normalize(closes)
polar = gaf.to_polar(x)
print("normalized closes:", x)
print("angles (rad):     ", polar.angles)
print("radii:            ", polar.radii)

g = gaf.encode(closes)
print("close-channel GAF:")
print(g)

#%%
# Two equivalent forms and the way back
# -------------------------------------
# cos(a + b) = x_i x_j - sqrt(1 - x_i^2) sqrt(1 - x_j^2), so the algebraic
# form needs no trigonometry.  The diagonal is 2 x^2 - 1, which inverts.
print("max |trig - algebraic|:", np.abs(g - gaf.encode_algebraic(x)).max())
print("max |decoded - x|:     ", np.abs(gaf.decode_diagonal(g) - x).max())

#%%
# The full tensor
# ---------------
tensor = gaf.encode_window(window)
normed, scales = gaf.normalize_window(window)
print("tensor shape:", tensor.shape)
restored = gaf.denormalize(gaf.decode_diagonal(tensor), scales)
print("prices recovered from the diagonals, max error:", np.abs(restored - window).max())
