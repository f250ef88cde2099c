"""Synthetic candle windows, CSV ingestion and clean dataset assembly.

Windows are built constructively in units of ``sigma = volatility *
base_price``: seven medium-bodied bars drifting in the required trend
direction followed by three pattern bars with randomized magnitudes.  A draw
that the rule engine does not label exactly as the target is discarded and
redrawn.
"""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng as rng_mod
from .candlestick import (
    TREND_LEN,
    WINDOW_LEN,
    OhlcBar,
    PatternLabel,
    RuleParams,
    Trend,
    matching_labels,
    required_trend,
)
from .dataset import CLEAN, Dataset, clean_window_id
from .errors import ConfigError, GenerationFailed, InvariantError, ParseError
from .gaf import encode_stack, normalize_window

log = logging.getLogger(__name__)

MAX_ATTEMPTS = 1000
CSV_HEADER = ("timestamp", "open", "high", "low", "close")


@dataclass(frozen=True)
class GeneratorConfig:
    per_class: int = 200
    base_price: float = 1.10
    volatility: float = 0.002
    seed: int = 0
    rule_params: RuleParams = field(default_factory=RuleParams)

    def __post_init__(self):
        if int(self.per_class) < 1:
            raise ConfigError("generator: per_class must be >= 1")
        if not self.base_price > 0 or not self.volatility > 0:
            raise ConfigError("generator: base_price and volatility must be positive")


def _bar(open_, close, upper, lower):
    return [open_, max(open_, close) + upper, min(open_, close) - lower, close]


def _trend_bars(direction, price, rng):
    bars = []
    for _ in range(TREND_LEN):
        body = rng.uniform(0.7, 1.1)
        close = price + direction * body
        bars.append(_bar(price, close, rng.uniform(0.05, 0.4), rng.uniform(0.05, 0.4)))
        price = close
    return bars, price


def _pattern_bars(label, price, rng, params):
    """Three bars in sigma units, starting at ``price`` (close of bar 6)."""
    u = rng.uniform
    L = PatternLabel
    hammer_upper = params.inverted_hammer_upper_shadow

    if label in (L.MORNING_STAR, L.INVERTED_HAMMER):
        a_close = price - u(2.2, 3.0)
        a = _bar(price, a_close, u(0.0, 0.2), u(0.0, 0.2))
        b_open = a_close - u(0.0, 0.3)
        b_close = b_open + rng.choice((-1.0, 1.0)) * u(0.1, 0.4)
        long_shadow, small = u(1.0, 1.8), u(0.0, 0.1)
        if label is L.INVERTED_HAMMER and hammer_upper:
            b = _bar(b_open, b_close, long_shadow, small)
        else:
            b = _bar(b_open, b_close, small, long_shadow)
        c_open = max(b_open, b_close) + u(0.0, 0.1)
        c_body = u(2.2, 3.0) if label is L.MORNING_STAR else u(0.4, 0.8)
        c = _bar(c_open, c_open + c_body, u(0.0, 0.2), u(0.0, 0.2))
        return [a, b, c]

    if label is L.BULLISH_ENGULFING:
        a_close = price - u(0.2, 0.45)
        a = _bar(price, a_close, u(0.0, 0.05), u(0.0, 0.05))
        b_open = a_close - u(0.1, 0.4)
        b_close = price + u(1.6, 2.4)
        b = _bar(b_open, b_close, u(0.0, 0.2), u(0.0, 0.2))
        c_open = b_close + u(-0.1, 0.1)
        c = _bar(c_open, c_open + u(0.5, 1.2), u(0.0, 0.3), u(0.0, 0.3))
        return [a, b, c]

    if label is L.BULLISH_HARAMI:
        a_body = u(2.2, 3.0)
        a_close = price - a_body
        a = _bar(price, a_close, u(0.0, 0.2), u(0.0, 0.2))
        b_body = u(0.15, 0.45)
        b_open = a_close + u(0.2, a_body - 0.2 - b_body)
        b_close = b_open + b_body
        b = _bar(b_open, b_close, u(0.0, 0.5) * b_body, u(0.0, 0.5) * b_body)
        c_open = b_close + u(-0.05, 0.1)
        c = _bar(c_open, c_open + u(0.5, 1.2), u(0.0, 0.3), u(0.0, 0.3))
        return [a, b, c]

    if label in (L.EVENING_STAR, L.SHOOTING_STAR):
        a_close = price + u(2.2, 3.0)
        a = _bar(price, a_close, u(0.0, 0.2), u(0.0, 0.2))
        b_body = u(0.1, 0.4)
        b_bottom = a_close + u(0.05, 0.3)
        if rng.random() < 0.5:
            b_open, b_close = b_bottom, b_bottom + b_body
        else:
            b_open, b_close = b_bottom + b_body, b_bottom
        if label is L.SHOOTING_STAR:
            b = _bar(b_open, b_close, u(1.0, 1.8), u(0.0, 0.1))
        else:
            b = _bar(b_open, b_close, u(0.0, 0.5) * b_body, u(0.0, 0.3))
        c_open = min(b_open, b_close) - u(0.0, 0.1)
        c = _bar(c_open, c_open - u(1.0, 2.5), u(0.0, 0.2), u(0.0, 0.2))
        return [a, b, c]

    if label is L.BEARISH_ENGULFING:
        a_close = price + u(0.2, 0.45)
        a = _bar(price, a_close, u(0.0, 0.05), u(0.0, 0.05))
        b_open = a_close + u(0.1, 0.4)
        b_close = price - u(1.6, 2.4)
        b = _bar(b_open, b_close, u(0.0, 0.2), u(0.0, 0.2))
        c_open = b_close + u(-0.1, 0.1)
        c = _bar(c_open, c_open - u(0.5, 1.2), u(0.0, 0.3), u(0.0, 0.3))
        return [a, b, c]

    if label is L.BEARISH_HARAMI:
        a_body = u(2.2, 3.0)
        a_close = price + a_body
        a = _bar(price, a_close, u(0.0, 0.2), u(0.0, 0.2))
        b_body = u(0.15, 0.45)
        b_open = a_close - u(0.2, a_body - 0.2 - b_body)
        b_close = b_open - b_body
        b = _bar(b_open, b_close, u(0.0, 0.5) * b_body, u(0.0, 0.5) * b_body)
        c_open = b_close + u(-0.1, 0.05)
        c = _bar(c_open, c_open - u(0.5, 1.2), u(0.0, 0.3), u(0.0, 0.3))
        return [a, b, c]

    raise ValueError(f"unknown label {label!r}")


def synthesize_window(label, cfg: GeneratorConfig, rng: np.random.Generator) -> np.ndarray:
    """Draw a ``(10, 4)`` OHLC window that the rule engine labels ``label``.

    Raises GenerationFailed after MAX_ATTEMPTS rejected draws.
    """
    label = PatternLabel(label)
    direction = 1.0 if required_trend(label) is Trend.UP else -1.0
    sigma = cfg.volatility * cfg.base_price
    for _ in range(MAX_ATTEMPTS):
        trend, last = _trend_bars(direction, 0.0, rng)
        units = np.array(trend + _pattern_bars(label, last, rng, cfg.rule_params))
        window = cfg.base_price + sigma * units
        if np.any(window <= 0):
            continue
        if matching_labels(window, cfg.rule_params) == [label]:
            return window
    raise GenerationFailed(
        f"no {label.name} window accepted after {MAX_ATTEMPTS} draws; rule parameters "
        "are inconsistent with the generator"
    )


def synthesize_flat(n_bars: int, level: float, cfg: GeneratorConfig, rng) -> np.ndarray:
    """Trendless filler: bars alternating white/black around ``level``.

    Consecutive-bar colors always alternate, and every pattern needs its first
    and third bar to have opposite colors, so filler alone never matches.
    """
    sigma = cfg.volatility * cfg.base_price
    out = np.empty((n_bars, 4))
    sign = rng.choice((-1.0, 1.0))
    for i in range(n_bars):
        half = 0.5 * sigma * rng.uniform(0.6, 1.0)
        o, c = level - sign * half, level + sign * half
        out[i] = _bar(o, c, sigma * rng.uniform(0.05, 0.4), sigma * rng.uniform(0.05, 0.4))
        sign = -sign
    return out


def load_ohlc_csv(path) -> list[OhlcBar]:
    """Read ``timestamp,open,high,low,close`` rows; row numbers count the header as 1."""
    path = Path(path)
    bars = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(1, "header", "file is empty")
        if tuple(h.strip().lower() for h in header) != CSV_HEADER:
            raise ParseError(1, "header", f"expected {','.join(CSV_HEADER)}")
        for rownum, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise ParseError(rownum, "*", f"expected 5 fields, got {len(row)}")
            vals = []
            for name, text in zip(CSV_HEADER[1:], row[1:]):
                try:
                    vals.append(float(text))
                except ValueError:
                    raise ParseError(rownum, name, f"not a number: {text!r}") from None
            bar = OhlcBar(*vals)
            reason = bar.check()
            if reason:
                raise InvariantError(rownum, reason)
            bars.append(bar)
    return bars


def scan_and_label(bars, params: RuleParams = RuleParams()):
    """Slide a 10-bar window with stride 1 and return ``(offset, window, label)``
    for every window the rules label.  Ambiguous windows are skipped."""
    arr = np.asarray(bars, dtype=np.float64).reshape(-1, 4)
    hits = []
    for start in range(len(arr) - WINDOW_LEN + 1):
        window = arr[start:start + WINDOW_LEN]
        found = matching_labels(window, params)
        if len(found) == 1:
            hits.append((start, window.copy(), found[0]))
        elif len(found) > 1:
            log.warning("ambiguous window at offset %d: %s", start, found)
    return hits


def encode_windows(windows) -> tuple[np.ndarray, np.ndarray]:
    """Encode ``(N, 10, 4)`` windows; returns float64 tensors and channel scales."""
    windows = np.asarray(windows, dtype=np.float64)
    normed = np.empty((len(windows), 4, WINDOW_LEN))
    scales = np.empty((len(windows), 4, 2))
    for i, w in enumerate(windows):
        normed[i], scales[i] = normalize_window(w)
    return encode_stack(normed), scales


def build_windows(cfg: GeneratorConfig):
    """All synthesized windows in label-major order with labels and ids."""
    windows, labels, ids = [], [], []
    for label in PatternLabel:
        for i in range(cfg.per_class):
            gen = rng_mod.generator(cfg.seed, rng_mod.DATA, int(label), i)
            windows.append(synthesize_window(label, cfg, gen))
            labels.append(int(label))
            ids.append(clean_window_id(label, i))
    return np.array(windows), np.array(labels), np.array(ids, dtype=np.uint64)


def build_dataset(cfg: GeneratorConfig) -> Dataset:
    windows, labels, ids = build_windows(cfg)
    tensors, scales = encode_windows(windows)
    log.info("built %d clean windows (%d per class)", len(labels), cfg.per_class)
    return Dataset(tensors, labels, ids, provenance=CLEAN, seed=cfg.seed, scales=scales)


def dataset_from_bars(bars, params: RuleParams = RuleParams(), seed: int = 0) -> Dataset:
    """Label a bar stream with the rules and encode every hit; window ids are offsets."""
    hits = scan_and_label(bars, params)
    if not hits:
        return Dataset(np.empty((0, 4, 10, 10)), np.empty(0), np.empty(0), seed=seed,
                       scales=np.empty((0, 4, 2)))
    offsets, windows, labels = zip(*hits)
    tensors, scales = encode_windows(windows)
    return Dataset(tensors, [int(l) for l in labels], list(offsets), seed=seed, scales=scales)


__all__ = [
    "GeneratorConfig",
    "synthesize_window",
    "synthesize_flat",
    "load_ohlc_csv",
    "scan_and_label",
    "build_dataset",
    "build_windows",
    "dataset_from_bars",
    "encode_windows",
]
