"""
Labelling windows with the eight candlestick rules
==================================================

Each pattern is a 7-bar trend followed by three pattern bars.  The generator
builds windows that satisfy exactly one rule; the scanner finds them again
inside a longer stream.
"""

#%%
import numpy as np

from gaf_advforge.candlestick import PatternLabel, detect_trend, geometry, match_pattern
from gaf_advforge.datagen import GeneratorConfig, scan_and_label, synthesize_flat
from gaf_advforge.datagen import synthesize_window
from gaf_advforge.rng import generator

cfg = GeneratorConfig()

#%%
# One window per label
# --------------------
for label in PatternLabel:
    w = synthesize_window(label, cfg, generator(7, 0, int(label)))
    shapes = []
    for bar in w[7:]:
        g = geometry(bar)
        shapes.append(f"{g.color.name[0]} body={g.body * 1e4:5.1f} "
                      f"up={g.upper_shadow * 1e4:4.1f} lo={g.lower_shadow * 1e4:4.1f}")
    print(f"{label.name:18s} trend={detect_trend(w[:7]).name:5s} -> "
          f"{match_pattern(w).name:18s} | " + " | ".join(shapes))

#%%
# Hiding a pattern in a quiet stream
# ----------------------------------
# Flat filler alternates colors, so no trend forms and nothing matches.
planted = synthesize_window(PatternLabel.BEARISH_ENGULFING, cfg, generator(3, 0))
stream = np.concatenate([
    synthesize_flat(25, planted[0, 0], cfg, generator(3, 1)),
    planted,
    synthesize_flat(25, planted[-1, 3], cfg, generator(3, 2)),
])
for offset, _, label in scan_and_label(stream):
    print(f"found {label.name} at bar {offset} of {len(stream)}")

#%%
# Rules are scale free
# --------------------
# Every threshold is relative to the window's own mean body, so rescaling
# prices leaves the label unchanged.
for scale in (0.01, 1.0, 250.0):
    print(scale, match_pattern(planted * scale).name)
